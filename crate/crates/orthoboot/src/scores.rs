//! Score functions, weighted estimating-equation solvers, and the sandwich
//! variance estimator.
//!
//! Both built-in scores are affine in theta, m(O; theta, h) = a(O,h) +
//! b(O,h) * theta, so the weighted equation has the closed-form root
//! theta = -(sum w a) / (sum w b). A Newton solver backs non-affine scores
//! and doubles as a cross-check for the closed forms.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nuisance::PredictorHandle;
use crate::scalar::{real, Scalar};
use crate::weights::WeightVector;

/// A single observation viewed by a score.
#[derive(Debug, Clone, Copy)]
pub struct Obs<'a, F> {
    pub y: F,
    pub z: F,
    pub x: &'a [F],
}

impl<F: Scalar> Dataset<F> {
    #[inline]
    pub fn obs(&self, i: usize) -> Obs<'_, F> {
        Obs {
            y: self.y[i],
            z: self.z[i],
            x: self.x.row(i),
        }
    }
}

/// Plug-in nuisance fit consumed by a score. Every component required by the
/// chosen score is present by construction.
pub enum NuisanceFit<F> {
    /// h = (k_y, e) for the partialled-out score.
    PartialledOut {
        k_y: PredictorHandle<F>,
        e: PredictorHandle<F>,
    },
    /// h = (mu(1,.), mu(0,.), e) for the AIPW score; `e` is expected to be
    /// clamped into [epsilon, 1-epsilon].
    Aipw {
        mu1: PredictorHandle<F>,
        mu0: PredictorHandle<F>,
        e: PredictorHandle<F>,
    },
}

impl<F: Scalar> NuisanceFit<F> {
    fn partialled_out(&self) -> Result<(&dyn crate::nuisance::Predictor<F>, &dyn crate::nuisance::Predictor<F>)> {
        match self {
            NuisanceFit::PartialledOut { k_y, e } => Ok((k_y.as_ref(), e.as_ref())),
            NuisanceFit::Aipw { .. } => Err(Error::invalid(
                "partialled-out score needs a (k_y, e) nuisance fit",
            )),
        }
    }

    #[allow(clippy::type_complexity)]
    fn aipw(
        &self,
    ) -> Result<(
        &dyn crate::nuisance::Predictor<F>,
        &dyn crate::nuisance::Predictor<F>,
        &dyn crate::nuisance::Predictor<F>,
    )> {
        match self {
            NuisanceFit::Aipw { mu1, mu0, e } => Ok((mu1.as_ref(), mu0.as_ref(), e.as_ref())),
            NuisanceFit::PartialledOut { .. } => {
                Err(Error::invalid("AIPW score needs a (mu1, mu0, e) nuisance fit"))
            }
        }
    }
}

/// An estimating function m(O; theta, h) with derivative in theta.
pub trait Score<F: Scalar>: Send + Sync {
    fn evaluate(&self, obs: &Obs<'_, F>, theta: F, h: &NuisanceFit<F>) -> Result<F>;
    fn dtheta(&self, obs: &Obs<'_, F>, theta: F, h: &NuisanceFit<F>) -> Result<F>;

    /// Whether the score is affine in theta, enabling the exact solver.
    fn is_affine(&self) -> bool {
        true
    }
}

/// Robinson's residual-on-residual score for the partially linear model:
/// m = [y - k_y(x) - theta (z - e(x))] (z - e(x)).
pub struct PartialledOutScore;

impl<F: Scalar> Score<F> for PartialledOutScore {
    fn evaluate(&self, obs: &Obs<'_, F>, theta: F, h: &NuisanceFit<F>) -> Result<F> {
        let (k_y, e) = h.partialled_out()?;
        let y_res = obs.y - k_y.predict(obs.x);
        let z_res = obs.z - e.predict(obs.x);
        Ok((y_res - theta * z_res) * z_res)
    }

    fn dtheta(&self, obs: &Obs<'_, F>, _theta: F, h: &NuisanceFit<F>) -> Result<F> {
        let (_, e) = h.partialled_out()?;
        let z_res = obs.z - e.predict(obs.x);
        Ok(-(z_res * z_res))
    }
}

/// Augmented inverse probability weighting score for the average treatment
/// effect: m = -theta + B(O; h).
pub struct AipwScore;

impl AipwScore {
    /// The influence-style summand B(O; h) = mu1 - mu0 + z(y - mu1)/e -
    /// (1-z)(y - mu0)/(1-e).
    pub fn augmented_term<F: Scalar>(obs: &Obs<'_, F>, h: &NuisanceFit<F>) -> Result<F> {
        let (mu1, mu0, e) = h.aipw()?;
        let m1 = mu1.predict(obs.x);
        let m0 = mu0.predict(obs.x);
        let ex = e.predict(obs.x);
        if ex <= F::zero() || ex >= F::one() {
            return Err(Error::Internal(format!(
                "propensity {ex} outside (0,1): clamp contract violated"
            )));
        }
        let one = F::one();
        Ok(m1 - m0 + obs.z * (obs.y - m1) / ex - (one - obs.z) * (obs.y - m0) / (one - ex))
    }
}

impl<F: Scalar> Score<F> for AipwScore {
    fn evaluate(&self, obs: &Obs<'_, F>, theta: F, h: &NuisanceFit<F>) -> Result<F> {
        Ok(Self::augmented_term(obs, h)? - theta)
    }

    fn dtheta(&self, _obs: &Obs<'_, F>, _theta: F, _h: &NuisanceFit<F>) -> Result<F> {
        Ok(-F::one())
    }
}

/// Solution of a weighted estimating equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveResult<F> {
    pub theta_hat: F,
    /// Weighted score at the solution.
    pub m_bar: F,
    pub iterations: usize,
}

/// Per-observation affine coefficients a_i = m(O_i, 0), b_i = m(O_i, 1) -
/// m(O_i, 0), computed once per (data, h) and reused across bootstrap draws.
pub struct AffineCoefficients<F> {
    pub a: Vec<F>,
    pub b: Vec<F>,
}

pub fn affine_coefficients<F: Scalar>(
    score: &dyn Score<F>,
    data: &Dataset<F>,
    h: &NuisanceFit<F>,
) -> Result<AffineCoefficients<F>> {
    if !score.is_affine() {
        return Err(Error::invalid("score is not affine in theta"));
    }
    let n = data.len();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let obs = data.obs(i);
        let at_zero = score.evaluate(&obs, F::zero(), h)?;
        let at_one = score.evaluate(&obs, F::one(), h)?;
        a.push(at_zero);
        b.push(at_one - at_zero);
    }
    Ok(AffineCoefficients { a, b })
}

pub(crate) const DEGENERATE_SLOPE: f64 = 1e-12;

/// Exact root of the weighted equation for precomputed affine coefficients.
pub fn solve_with_coefficients<F: Scalar>(
    coeffs: &AffineCoefficients<F>,
    w: &WeightVector<F>,
) -> Result<SolveResult<F>> {
    if w.len() != coeffs.a.len() {
        return Err(Error::invalid("weight length does not match data"));
    }
    let ws = w.as_slice();
    let mut num = F::zero();
    let mut den = F::zero();
    for i in 0..ws.len() {
        num += ws[i] * coeffs.a[i];
        den += ws[i] * coeffs.b[i];
    }
    if den.abs() < real::<F>(DEGENERATE_SLOPE) {
        return Err(Error::Degenerate(format!(
            "weighted slope {den} below threshold"
        )));
    }
    let theta = -num / den;
    Ok(SolveResult {
        theta_hat: theta,
        m_bar: num + den * theta,
        iterations: 0,
    })
}

/// Solve sum_i w_i m(O_i; theta, h) = 0 exactly for an affine score.
pub fn solve_weighted<F: Scalar>(
    score: &dyn Score<F>,
    data: &Dataset<F>,
    w: &WeightVector<F>,
    h: &NuisanceFit<F>,
) -> Result<SolveResult<F>> {
    let coeffs = affine_coefficients(score, data, h)?;
    solve_with_coefficients(&coeffs, w)
}

/// Newton-Raphson on the weighted score; backs non-affine scores and serves
/// as an independent cross-check of the closed forms.
pub fn solve_newton<F: Scalar>(
    score: &dyn Score<F>,
    data: &Dataset<F>,
    w: &WeightVector<F>,
    h: &NuisanceFit<F>,
    theta_init: F,
    tol: F,
    max_iter: usize,
) -> Result<SolveResult<F>> {
    if tol <= F::zero() {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if w.len() != data.len() {
        return Err(Error::invalid("weight length does not match data"));
    }
    let ws = w.as_slice();
    let weighted = |theta: F| -> Result<(F, F)> {
        let mut m = F::zero();
        let mut d = F::zero();
        for i in 0..data.len() {
            let obs = data.obs(i);
            m += ws[i] * score.evaluate(&obs, theta, h)?;
            d += ws[i] * score.dtheta(&obs, theta, h)?;
        }
        Ok((m, d))
    };

    let mut theta = theta_init;
    for iter in 0..=max_iter {
        let (m_bar, slope) = weighted(theta)?;
        if m_bar.abs() <= tol {
            return Ok(SolveResult {
                theta_hat: theta,
                m_bar,
                iterations: iter,
            });
        }
        if iter == max_iter {
            return Err(Error::Convergence {
                iterations: max_iter,
                m_bar: m_bar.abs().to_f64().unwrap_or(f64::NAN),
            });
        }
        if slope.abs() < real::<F>(DEGENERATE_SLOPE) {
            return Err(Error::Degenerate("zero score derivative at iterate".into()));
        }
        theta = theta - m_bar / slope;
    }
    unreachable!("loop returns or errors before exhausting");
}

/// Scalar sandwich variance M^-1 (n^-1 sum m^2) M^-1 at the equal-weight
/// solution, with M the average score derivative.
pub fn sandwich_variance<F: Scalar>(
    score: &dyn Score<F>,
    data: &Dataset<F>,
    theta_hat: F,
    h: &NuisanceFit<F>,
) -> Result<F> {
    let n = data.len();
    if n == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    let inv_n = F::one() / real::<F>(n as f64);
    let mut m_sq = F::zero();
    let mut slope = F::zero();
    for i in 0..n {
        let obs = data.obs(i);
        let m = score.evaluate(&obs, theta_hat, h)?;
        m_sq += m * m;
        slope += score.dtheta(&obs, theta_hat, h)?;
    }
    m_sq = m_sq * inv_n;
    slope = slope * inv_n;
    if slope.abs() < real::<F>(DEGENERATE_SLOPE) {
        return Err(Error::Degenerate("average score derivative is zero".into()));
    }
    Ok(m_sq / (slope * slope))
}
