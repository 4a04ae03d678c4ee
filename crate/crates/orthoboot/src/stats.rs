//! Small statistical helpers shared across modules.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

pub fn mean<F: Scalar>(xs: &[F]) -> F {
    debug_assert!(!xs.is_empty());
    xs.iter().copied().sum::<F>() / real::<F>(xs.len() as f64)
}

/// Unbiased sample variance (1/(n-1)).
pub fn sample_variance<F: Scalar>(xs: &[F]) -> Result<F> {
    if xs.len() < 2 {
        return Err(Error::invalid("variance requires at least 2 values"));
    }
    let m = mean(xs);
    let ss = xs.iter().map(|&x| (x - m) * (x - m)).sum::<F>();
    Ok(ss / real::<F>((xs.len() - 1) as f64))
}

/// Equal-tailed empirical quantile with linear interpolation between order
/// statistics (position h = (n-1)p).
pub fn quantile<F: Scalar>(sorted: &[F], p: F) -> F {
    debug_assert!(!sorted.is_empty());
    debug_assert!(p >= F::zero() && p <= F::one());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = real::<F>((n - 1) as f64) * p;
    let lo = h.floor();
    let idx = lo.to_usize().unwrap_or(0).min(n - 1);
    if idx + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo;
    sorted[idx] + frac * (sorted[idx + 1] - sorted[idx])
}

/// Sorts a copy of `xs` and returns the `p` quantile.
pub fn quantile_of<F: Scalar>(xs: &[F], p: F) -> F {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in quantile input"));
    quantile(&v, p)
}

/// Inverse standard-normal CDF (Acklam's rational approximation,
/// |relative error| < 1.2e-9 over (0,1)).
pub fn normal_quantile<F: Scalar>(p: F) -> Result<F> {
    let pf = p.to_f64().ok_or_else(|| Error::invalid("p not finite"))?;
    if !(0.0..=1.0).contains(&pf) || pf == 0.0 || pf == 1.0 {
        return Err(Error::invalid(format!(
            "normal quantile requires p in (0,1), got {pf}"
        )));
    }

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if pf < P_LOW {
        let q = (-2.0 * pf.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if pf <= 1.0 - P_LOW {
        let q = pf - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - pf).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    Ok(real(x))
}

/// Nodes and weights of 4-point Gauss-Legendre on [-1, 1].
const GL4_NODES: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.3478548451374538,
    0.6521451548625461,
    0.6521451548625461,
    0.3478548451374538,
];

/// Composite Gauss-Legendre quadrature of `f` on [0, 1]: 16 panels of the
/// 4-point rule, 64 evaluation points total.
pub fn integrate_unit_interval<F: Scalar, G>(mut f: G) -> Result<F>
where
    G: FnMut(F) -> Result<F>,
{
    let panels = 16usize;
    let width = 1.0 / panels as f64;
    let mut acc = F::zero();
    for p in 0..panels {
        let a = p as f64 * width;
        let mid = a + width / 2.0;
        for (node, weight) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
            let t = real::<F>(mid + node * width / 2.0);
            acc = acc + real::<F>(weight * width / 2.0) * f(t)?;
        }
    }
    Ok(acc)
}
