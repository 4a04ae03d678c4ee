//! Synthetic data-generating processes used by the simulation harness.
//!
//! Two designs: a partially linear model with an AR(1)-style covariate
//! correlation structure and non-linear outcome/propensity functions, and a
//! univariate continuous-treatment model suited to kernel-smoothed nuisances.

use rand::Rng;

use crate::data::{Dataset, Matrix, Truth};
use crate::error::{Error, Result};
use crate::scalar::{real, SampleScalar, Scalar};

/// Configuration of the partially linear design.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlmConfig<F> {
    pub n: usize,
    /// Covariate dimension; the outcome function touches the first four
    /// coordinates and the last one, so q >= 5.
    pub q: usize,
    pub theta0: F,
}

impl<F: Scalar> PlmConfig<F> {
    pub fn new(n: usize, q: usize, theta0: F) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if q < 5 {
            return Err(Error::invalid("covariate dimension q must be at least 5"));
        }
        Ok(PlmConfig { n, q, theta0 })
    }
}

/// Outcome regression component g0(x) = x1 + sin(x2 + x3) + cos(x3) + |x4| + xq.
pub fn plm_g0<F: Scalar>(x: &[F]) -> F {
    let q = x.len();
    x[0] + (x[1] + x[2]).sin() + x[2].cos() + x[3].abs() + x[q - 1]
}

/// Propensity e0(x) = expit(sum_j x_j) / 2 + 1/5, bounded inside (0.2, 0.7).
pub fn plm_e0<F: Scalar>(x: &[F]) -> F {
    let s: F = x.iter().copied().sum();
    let expit = F::one() / (F::one() + (-s).exp());
    expit / real::<F>(2.0) + real::<F>(0.2)
}

/// Outcome conditional mean k_y0(x) = theta0 e0(x) + g0(x).
pub fn plm_ky0<F: Scalar>(x: &[F], theta0: F) -> F {
    theta0 * plm_e0(x) + plm_g0(x)
}

/// Lower-triangular Cholesky factor of the covariance with entries
/// 0.8^{|i-j|} / 4.
fn covariance_cholesky<F: Scalar>(q: usize) -> Result<Vec<Vec<F>>> {
    let mut cov = vec![vec![F::zero(); q]; q];
    let rho = real::<F>(0.8);
    let quarter = real::<F>(0.25);
    for i in 0..q {
        for j in 0..q {
            cov[i][j] = rho.powi((i as i32 - j as i32).abs()) * quarter;
        }
    }
    let mut chol = vec![vec![F::zero(); q]; q];
    for i in 0..q {
        for j in 0..=i {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= chol[i][k] * chol[j][k];
            }
            if i == j {
                if s <= F::zero() {
                    return Err(Error::Internal(
                        "covariate covariance is not positive definite".into(),
                    ));
                }
                chol[i][j] = s.sqrt();
            } else {
                chol[i][j] = s / chol[j][j];
            }
        }
    }
    Ok(chol)
}

/// Simulate the partially linear design:
/// X ~ N(0, Sigma), Z | X ~ Bernoulli(e0(X)), Y = theta0 Z + g0(X) + N(0,1).
pub fn simulate_plm<F, R>(cfg: &PlmConfig<F>, rng: &mut R) -> Result<Dataset<F>>
where
    F: SampleScalar,
    R: Rng + ?Sized,
{
    let PlmConfig { n, q, theta0 } = *cfg;
    if n == 0 || q < 5 {
        return Err(Error::invalid("invalid PLM configuration"));
    }
    let chol = covariance_cholesky::<F>(q)?;
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut e0 = Vec::with_capacity(n);
    let mut g0 = Vec::with_capacity(n);
    let mut ky0 = Vec::with_capacity(n);
    let mut std_norm = vec![F::zero(); q];
    for _ in 0..n {
        for v in std_norm.iter_mut() {
            *v = F::standard_normal(rng);
        }
        let mut x = vec![F::zero(); q];
        for i in 0..q {
            let mut s = F::zero();
            for k in 0..=i {
                s += chol[i][k] * std_norm[k];
            }
            x[i] = s;
        }
        let e = plm_e0(&x);
        let g = plm_g0(&x);
        let zi = if rng.gen_range(0.0..1.0) < e.to_f64().unwrap() {
            F::one()
        } else {
            F::zero()
        };
        let u = F::standard_normal(rng);
        y.push(theta0 * zi + g + u);
        z.push(zi);
        e0.push(e);
        g0.push(g);
        ky0.push(theta0 * e + g);
        rows.push(x);
    }
    let truth = Truth {
        theta0,
        e0,
        g0,
        ky0,
    };
    Dataset::new(y, z, Matrix::from_rows(rows)?, Some(truth))
}

/// Simulate the univariate continuous-treatment model:
/// X, U, V iid N(0,1); Z = sin X + V; Y = 3 Z + X + U.
///
/// Here E(Z | X) = sin X and E(Y | X) = 3 sin X + X, so the partialled-out
/// nuisances are smooth univariate functions.
pub fn simulate_kernel_model<F, R>(n: usize, rng: &mut R) -> Result<Dataset<F>>
where
    F: SampleScalar,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let theta0 = real::<F>(3.0);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut e0 = Vec::with_capacity(n);
    let mut g0 = Vec::with_capacity(n);
    let mut ky0 = Vec::with_capacity(n);
    for _ in 0..n {
        let x = F::standard_normal(rng);
        let u = F::standard_normal(rng);
        let v = F::standard_normal(rng);
        let zi = x.sin() + v;
        let yi = theta0 * zi + x + u;
        let e = x.sin();
        y.push(yi);
        z.push(zi);
        e0.push(e);
        g0.push(x);
        ky0.push(theta0 * e + x);
        rows.push(vec![x]);
    }
    let truth = Truth {
        theta0,
        e0,
        g0,
        ky0,
    };
    Dataset::new(y, z, Matrix::from_rows(rows)?, Some(truth))
}
