//! Orthogonality diagnostics: the Gateaux path f(t) = E[m{O; theta0,
//! h0 + t(h - h0)}] along a nuisance perturbation, evaluated analytically
//! (closed forms for both built-in scores) and by Monte Carlo, plus the rate
//! functional sqrt(n) * int_0^1 |f''(t)| dt and an empirical probe showing
//! what goes wrong with a non-orthogonal score.

use std::sync::Arc;

use crate::data::Dataset;
use crate::dgp::{plm_e0, plm_ky0, simulate_plm, PlmConfig};
use crate::error::{Error, Result};
use crate::nuisance::{fit_forest, predictor_from_fn, ForestConfig, Predictor, PredictorHandle};
use crate::posterior::{sample_posterior, summarize};
use crate::scalar::{real, Scalar};
use crate::scores::{NuisanceFit, Obs, PartialledOutScore, Score};
use crate::stats::integrate_unit_interval;
use crate::stream::{derive_seed, substream};
use crate::weights::WeightScheme;

/// Smallest admissible ratio denominator in the AIPW path.
const POSITIVITY_FLOOR: f64 = 1e-6;

/// Central-difference step for f'(0).
const FD_STEP: f64 = 1e-4;

/// A point on the path: the value f(t) and, for Monte Carlo evaluators, its
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathValue<F> {
    pub f: F,
    pub stderr: Option<F>,
}

/// The map t -> f(t) along a fixed nuisance perturbation.
pub trait GateauxPath<F: Scalar> {
    fn value(&self, t: F) -> Result<PathValue<F>>;

    /// Analytic second derivative in t, where available.
    fn second_derivative(&self, _t: F) -> Result<F> {
        Err(Error::invalid(
            "this path does not expose an analytic second derivative",
        ))
    }
}

/// Paths whose perturbation h - h0 can be shrunk by a scalar factor, as the
/// rate functional requires.
pub trait ScalablePath<F: Scalar>: GateauxPath<F> {
    fn scaled(&self, factor: F) -> Self
    where
        Self: Sized;
}

/// Analytic path for the partialled-out score:
/// f(t) = t^2 E[{k_y - k_y0}{e - e0} - theta0 {e - e0}^2],
/// with the expectation replaced by an average over a supplied X sample.
#[derive(Debug, Clone, Copy)]
pub struct PlmGateaux<F> {
    /// Sample average of the bracketed expression at unit perturbation.
    k_hat: F,
    scale: F,
}

impl<F: Scalar> PlmGateaux<F> {
    /// Build from samples of the perturbation differences dk = k_y - k_y0 and
    /// de = e - e0 over a common X sample.
    pub fn from_samples(dk: &[F], de: &[F], theta0: F) -> Result<Self> {
        if dk.is_empty() {
            return Err(Error::invalid("empty X sample"));
        }
        if dk.len() != de.len() {
            return Err(Error::invalid("perturbation samples differ in length"));
        }
        let mut k_hat = F::zero();
        for (&a, &b) in dk.iter().zip(de.iter()) {
            k_hat += a * b - theta0 * b * b;
        }
        k_hat /= real::<F>(dk.len() as f64);
        Ok(PlmGateaux {
            k_hat,
            scale: F::one(),
        })
    }
}

impl<F: Scalar> GateauxPath<F> for PlmGateaux<F> {
    fn value(&self, t: F) -> Result<PathValue<F>> {
        let s2 = self.scale * self.scale;
        Ok(PathValue {
            f: t * t * s2 * self.k_hat,
            stderr: None,
        })
    }

    fn second_derivative(&self, _t: F) -> Result<F> {
        Ok(real::<F>(2.0) * self.scale * self.scale * self.k_hat)
    }
}

impl<F: Scalar> ScalablePath<F> for PlmGateaux<F> {
    fn scaled(&self, factor: F) -> Self {
        // k_hat is quadratic in the perturbation, so shrinking (dk, de) by
        // `factor` multiplies it by factor^2; fold that into `scale`.
        PlmGateaux {
            k_hat: self.k_hat,
            scale: self.scale * factor,
        }
    }
}

/// Analytic path for the AIPW score, averaging the closed-form integrand over
/// an X sample. The identification terms E[mu0(1,X) - mu0(0,X)] - theta0
/// cancel at the anchor, leaving only perturbation terms.
#[derive(Debug, Clone)]
pub struct AipwGateaux<F> {
    e0: Vec<F>,
    dmu1: Vec<F>,
    dmu0: Vec<F>,
    de: Vec<F>,
    scale: F,
}

impl<F: Scalar> AipwGateaux<F> {
    pub fn from_samples(e0: &[F], dmu1: &[F], dmu0: &[F], de: &[F]) -> Result<Self> {
        let n = e0.len();
        if n == 0 {
            return Err(Error::invalid("empty X sample"));
        }
        if dmu1.len() != n || dmu0.len() != n || de.len() != n {
            return Err(Error::invalid("perturbation samples differ in length"));
        }
        if e0.iter().any(|&p| p <= F::zero() || p >= F::one()) {
            return Err(Error::invalid("true propensities must lie in (0,1)"));
        }
        Ok(AipwGateaux {
            e0: e0.to_vec(),
            dmu1: dmu1.to_vec(),
            dmu0: dmu0.to_vec(),
            de: de.to_vec(),
            scale: F::one(),
        })
    }

    /// Ratio denominators at path position t; errors if positivity fails.
    fn denominators(&self, i: usize, t: F) -> Result<(F, F)> {
        let de = self.scale * self.de[i];
        let d1 = self.e0[i] + t * de;
        let d0 = F::one() - self.e0[i] - t * de;
        let floor = real::<F>(POSITIVITY_FLOOR);
        if d1 < floor || d0 < floor {
            return Err(Error::PositivityViolation(format!(
                "perturbed propensity denominator below {POSITIVITY_FLOOR} at t = {t}"
            )));
        }
        Ok((d1, d0))
    }
}

impl<F: Scalar> GateauxPath<F> for AipwGateaux<F> {
    fn value(&self, t: F) -> Result<PathValue<F>> {
        let mut sum = F::zero();
        let one = F::one();
        for i in 0..self.e0.len() {
            let (d1, d0) = self.denominators(i, t)?;
            let dmu1 = self.scale * self.dmu1[i];
            let dmu0 = self.scale * self.dmu0[i];
            sum += t * dmu1 - t * dmu0 - t * self.e0[i] * dmu1 / d1
                + t * (one - self.e0[i]) * dmu0 / d0;
        }
        Ok(PathValue {
            f: sum / real::<F>(self.e0.len() as f64),
            stderr: None,
        })
    }

    fn second_derivative(&self, t: F) -> Result<F> {
        let mut sum = F::zero();
        let one = F::one();
        for i in 0..self.e0.len() {
            let (d1, d0) = self.denominators(i, t)?;
            let dmu1 = self.scale * self.dmu1[i];
            let dmu0 = self.scale * self.dmu0[i];
            let de = self.scale * self.de[i];
            let e0 = self.e0[i];
            sum += e0 * e0 * dmu1 * de / (d1 * d1 * d1)
                + (one - e0) * (one - e0) * dmu0 * de / (d0 * d0 * d0);
        }
        Ok(real::<F>(2.0) * sum / real::<F>(self.e0.len() as f64))
    }
}

impl<F: Scalar> ScalablePath<F> for AipwGateaux<F> {
    fn scaled(&self, factor: F) -> Self {
        let mut out = self.clone();
        out.scale = self.scale * factor;
        out
    }
}

/// A path defined by an arbitrary closure; used to wrap Monte Carlo
/// evaluators so they fit the reporting machinery.
pub struct FnPath<F, G>
where
    G: Fn(F) -> Result<PathValue<F>>,
{
    f: G,
    _marker: std::marker::PhantomData<fn() -> F>,
}

impl<F, G> FnPath<F, G>
where
    G: Fn(F) -> Result<PathValue<F>>,
{
    pub fn new(f: G) -> Self {
        FnPath {
            f,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Scalar, G> GateauxPath<F> for FnPath<F, G>
where
    G: Fn(F) -> Result<PathValue<F>>,
{
    fn value(&self, t: F) -> Result<PathValue<F>> {
        (self.f)(t)
    }
}

/// Predictor h0 + t (h - h0) interpolating between two fitted functions.
pub fn perturbed<F: Scalar>(
    base: PredictorHandle<F>,
    target: PredictorHandle<F>,
    t: F,
) -> PredictorHandle<F> {
    struct Interp<F> {
        base: PredictorHandle<F>,
        target: PredictorHandle<F>,
        t: F,
    }
    impl<F: Scalar> Predictor<F> for Interp<F> {
        fn predict(&self, x: &[F]) -> F {
            let b = self.base.predict(x);
            b + self.t * (self.target.predict(x) - b)
        }
    }
    Arc::new(Interp { base, target, t })
}

/// Direct simulation of the defining expectation: average m(O_i; theta0, h)
/// over fresh observations, with a Monte Carlo standard error. The caller
/// supplies the perturbed fit `h` (see [`perturbed`]) and the simulated data.
pub fn f_monte_carlo<F: Scalar>(
    score: &dyn Score<F>,
    theta0: F,
    h: &NuisanceFit<F>,
    data: &Dataset<F>,
) -> Result<PathValue<F>> {
    let mc = data.len();
    if mc < 100 {
        return Err(Error::invalid(
            "Monte Carlo path needs at least 100 observations",
        ));
    }
    let mut sum = F::zero();
    let mut sum_sq = F::zero();
    for i in 0..mc {
        let m = score.evaluate(&data.obs(i), theta0, h)?;
        sum += m;
        sum_sq += m * m;
    }
    let n = real::<F>(mc as f64);
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(F::zero());
    Ok(PathValue {
        f: mean,
        stderr: Some((var / n).sqrt()),
    })
}

/// Orthogonality verdict for one path.
#[derive(Debug, Clone)]
pub struct OrthoReport<F> {
    pub f0: F,
    /// Central finite difference at 0.
    pub fprime0: F,
    /// Max deviation of the curve from its best-fitting c * t^2.
    pub quadratic_fit_residual: F,
    pub curve: Vec<(F, PathValue<F>)>,
    /// True when |f'(0)| exceeds the tolerance plus Monte Carlo noise.
    pub flagged_nonorthogonal: bool,
}

/// Evaluate f on a [0,1] grid, estimate f'(0) by central differences, and fit
/// c * t^2 to the curve.
pub fn orthogonality_check<F: Scalar>(
    path: &dyn GateauxPath<F>,
    tol: F,
) -> Result<OrthoReport<F>> {
    let f0 = path.value(F::zero())?.f;
    let step = real::<F>(FD_STEP);
    let up = path.value(step)?;
    let down = path.value(-step)?;
    let two = real::<F>(2.0);
    let fprime0 = (up.f - down.f) / (two * step);
    // Monte Carlo noise propagated through the difference quotient
    let noise = match (up.stderr, down.stderr) {
        (Some(a), Some(b)) => real::<F>(4.0) * (a + b) / (two * step),
        _ => F::zero(),
    };

    let mut curve = Vec::with_capacity(11);
    let mut num = F::zero();
    let mut den = F::zero();
    for k in 0..=10u32 {
        let t = real::<F>(f64::from(k) / 10.0);
        let v = path.value(t)?;
        num += v.f * t * t;
        den += t.powi(4);
        curve.push((t, v));
    }
    let c = num / den;
    let mut quadratic_fit_residual = F::zero();
    for (t, v) in &curve {
        quadratic_fit_residual = quadratic_fit_residual.max((v.f - c * *t * *t).abs());
    }

    Ok(OrthoReport {
        f0,
        fprime0,
        quadratic_fit_residual,
        curve,
        flagged_nonorthogonal: fprime0.abs() > tol + noise,
    })
}

/// For each n, shrink the perturbation to n^(-rate_exponent) of its unit size
/// and report sqrt(n) * int_0^1 |f''(t)| dt (64-point composite quadrature).
/// With `rate_exponent` above 1/4 the sequence trends to zero.
pub fn rate_functional<F: Scalar, P: ScalablePath<F>>(
    path: &P,
    n_grid: &[usize],
    rate_exponent: f64,
) -> Result<Vec<(usize, F)>> {
    let mut out = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        if n == 0 {
            return Err(Error::invalid("grid sample sizes must be positive"));
        }
        let factor = real::<F>((n as f64).powf(-rate_exponent));
        let shrunk = path.scaled(factor);
        let integral = integrate_unit_interval(|t| Ok(shrunk.second_derivative(t)?.abs()))?;
        out.push((n, real::<F>((n as f64).sqrt()) * integral));
    }
    Ok(out)
}

/// Deliberately non-orthogonal score m = (y - k_y(x)) z - theta: the outcome
/// residual is not projected off the treatment, so nuisance error in k_y
/// enters at first order. Its population root is theta0 E[e0(1-e0)] rather
/// than theta0.
pub struct NaiveScore;

impl NaiveScore {
    /// Monte Carlo estimate of the naive score's own estimand
    /// E[(Y - k_y0(X)) Z] under the partially linear design.
    pub fn plm_anchor(cfg: &PlmConfig<f64>, mc: usize, seed: u64) -> Result<f64> {
        let mut rng = substream(seed, 0);
        let sim = simulate_plm(&PlmConfig::new(mc, cfg.q, cfg.theta0)?, &mut rng)?;
        let truth = sim.truth.as_ref().expect("simulators attach truth");
        let mut sum = 0.0;
        for i in 0..sim.len() {
            sum += (sim.y[i] - truth.ky0[i]) * sim.z[i];
        }
        Ok(sum / sim.len() as f64)
    }
}

impl<F: Scalar> Score<F> for NaiveScore {
    fn evaluate(&self, obs: &Obs<'_, F>, theta: F, h: &NuisanceFit<F>) -> Result<F> {
        match h {
            NuisanceFit::PartialledOut { k_y, .. } => {
                Ok((obs.y - k_y.predict(obs.x)) * obs.z - theta)
            }
            NuisanceFit::Aipw { .. } => {
                Err(Error::invalid("naive score needs a (k_y, e) nuisance fit"))
            }
        }
    }

    fn dtheta(&self, _obs: &Obs<'_, F>, _theta: F, _h: &NuisanceFit<F>) -> Result<F> {
        Ok(-F::one())
    }
}

/// One arm of the non-orthogonality probe.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeArm {
    pub label: String,
    /// The population value the credible interval is checked against.
    pub anchor: f64,
    pub coverage_pct: f64,
    pub avg_post_mean: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DriftReport {
    pub arms: Vec<ProbeArm>,
}

/// Probe configuration; replicate counts are desk scale.
#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig {
    pub n: usize,
    pub q: usize,
    pub theta0: f64,
    pub replicates: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

/// Contrast the orthogonal pipeline against the naive score, each arm judged
/// against its own population anchor. The naive arms differ only in nuisance
/// quality: a deliberately under-grown forest versus the truth plugged in.
pub fn nonortho_probe(cfg: &ProbeConfig) -> Result<DriftReport> {
    if cfg.replicates == 0 || cfg.bootstrap == 0 {
        return Err(Error::invalid("probe needs replicates and bootstrap draws"));
    }
    let plm = PlmConfig::new(cfg.n, cfg.q, cfg.theta0)?;
    let naive_anchor = NaiveScore::plm_anchor(&plm, 200_000, derive_seed(cfg.seed, u64::MAX))?;

    let mut covered = [0usize; 3];
    let mut mean_sum = [0.0f64; 3];
    for r in 0..cfg.replicates {
        let rep_seed = derive_seed(cfg.seed, r as u64);
        let mut rng = substream(rep_seed, 0);
        let data = simulate_plm(&plm, &mut rng)?;

        let forest_cfg = ForestConfig {
            seed: derive_seed(rep_seed, 1),
            ..ForestConfig::default()
        };
        let k_y: PredictorHandle<f64> = Arc::new(fit_forest(&data.x, &data.y, &forest_cfg)?);
        let e: PredictorHandle<f64> = Arc::new(fit_forest(
            &data.x,
            &data.z,
            &ForestConfig {
                seed: derive_seed(rep_seed, 2),
                ..ForestConfig::default()
            },
        )?);
        // slow-rate fit: tiny subsamples keep the forest far from k_y0
        let slow = ForestConfig {
            subsample_exponent: 0.1,
            num_trees: 50,
            seed: derive_seed(rep_seed, 3),
            ..ForestConfig::default()
        };
        let k_y_slow: PredictorHandle<f64> = Arc::new(fit_forest(&data.x, &data.y, &slow)?);
        let k_y_truth = predictor_from_fn(move |x: &[f64]| plm_ky0(x, 3.0));
        let e_unused = predictor_from_fn(plm_e0::<f64>);

        let arms: [(&dyn Score<f64>, NuisanceFit<f64>, f64); 3] = [
            (
                &PartialledOutScore,
                NuisanceFit::PartialledOut { k_y, e },
                cfg.theta0,
            ),
            (
                &NaiveScore,
                NuisanceFit::PartialledOut {
                    k_y: k_y_slow,
                    e: Arc::clone(&e_unused),
                },
                naive_anchor,
            ),
            (
                &NaiveScore,
                NuisanceFit::PartialledOut {
                    k_y: k_y_truth,
                    e: e_unused,
                },
                naive_anchor,
            ),
        ];
        for (a, (score, h, anchor)) in arms.iter().enumerate() {
            let sample = sample_posterior(
                &data,
                *score,
                h,
                cfg.bootstrap,
                WeightScheme::Dirichlet,
                derive_seed(rep_seed, 10 + a as u64),
            )?;
            let summary = summarize(&sample, 0.95, Some(*anchor))?;
            if summary.covers_true == Some(true) {
                covered[a] += 1;
            }
            mean_sum[a] += summary.post_mean;
        }
    }

    let labels = [
        "orthogonal partialled-out, forest nuisances",
        "naive score, slow-rate forest",
        "naive score, truth plug-in",
    ];
    let anchors = [cfg.theta0, naive_anchor, naive_anchor];
    let r = cfg.replicates as f64;
    let arms = (0..3)
        .map(|a| ProbeArm {
            label: labels[a].to_string(),
            anchor: anchors[a],
            coverage_pct: 100.0 * covered[a] as f64 / r,
            avg_post_mean: mean_sum[a] / r,
        })
        .collect();
    Ok(DriftReport { arms })
}

/// Write curve samples as `t<TAB>f<TAB>stderr` lines (empty stderr column for
/// analytic paths).
pub fn write_curve<F: Scalar>(path: &std::path::Path, curve: &[(F, PathValue<F>)]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    writeln!(out, "t\tf\tstderr").map_err(|e| Error::io(path, e))?;
    for (t, v) in curve {
        match v.stderr {
            Some(se) => writeln!(out, "{t:?}\t{:?}\t{se:?}", v.f),
            None => writeln!(out, "{t:?}\t{:?}\t", v.f),
        }
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plm_constant_perturbation_closed_form() {
        // dk = 1, de = 0.1, theta0 = 3 -> f(t) = (0.1 - 3 * 0.01) t^2 = 0.07 t^2
        let n = 50;
        let path =
            PlmGateaux::from_samples(&vec![1.0; n], &vec![0.1; n], 3.0).unwrap();
        assert_relative_eq!(path.value(1.0).unwrap().f, 0.07, epsilon = 1e-14);
        assert_relative_eq!(path.value(0.5).unwrap().f, 0.0175, epsilon = 1e-14);
        assert_relative_eq!(path.second_derivative(0.3).unwrap(), 0.14, epsilon = 1e-14);
    }

    #[test]
    fn plm_zero_perturbation_is_flat() {
        let path = PlmGateaux::from_samples(&[0.0; 4], &[0.0; 4], 3.0).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(path.value(t).unwrap().f, 0.0);
        }
    }

    #[test]
    fn plm_value_at_zero_is_zero() {
        let path = PlmGateaux::from_samples(&[2.0, -1.0], &[0.3, 0.4], 3.0).unwrap();
        assert_eq!(path.value(0.0).unwrap().f, 0.0);
    }

    #[test]
    fn empty_sample_is_invalid() {
        assert!(PlmGateaux::<f64>::from_samples(&[], &[], 3.0).is_err());
        assert!(AipwGateaux::<f64>::from_samples(&[], &[], &[], &[]).is_err());
    }

    #[test]
    fn aipw_zero_perturbation_is_flat() {
        let e0 = [0.3, 0.5, 0.7];
        let z = [0.0; 3];
        let path = AipwGateaux::from_samples(&e0, &z, &z, &z).unwrap();
        for t in [0.0, 0.5, 1.0] {
            assert_eq!(path.value(t).unwrap().f, 0.0);
        }
    }

    #[test]
    fn aipw_mu_free_perturbation_is_flat() {
        // every non-constant term carries a mu-difference factor
        let e0 = [0.3, 0.5, 0.7];
        let zero = [0.0; 3];
        let de = [0.1, -0.2, 0.05];
        let path = AipwGateaux::from_samples(&e0, &zero, &zero, &de).unwrap();
        for t in [0.0, 0.25, 0.5, 1.0] {
            assert_relative_eq!(path.value(t).unwrap().f, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn aipw_first_derivative_vanishes_at_zero() {
        let e0 = [0.3, 0.5, 0.6, 0.45];
        let dmu1 = [0.5, -0.2, 0.1, 0.3];
        let dmu0 = [-0.1, 0.4, 0.2, -0.3];
        let de = [0.05, -0.1, 0.08, 0.02];
        let path = AipwGateaux::from_samples(&e0, &dmu1, &dmu0, &de).unwrap();
        let up = path.value(FD_STEP).unwrap().f;
        let down = path.value(-FD_STEP).unwrap().f;
        assert!(((up - down) / (2.0 * FD_STEP)).abs() < 1e-8);
        assert_eq!(path.value(0.0).unwrap().f, 0.0);
    }

    #[test]
    fn aipw_second_derivative_single_point_oracle() {
        // one sample point: closed form per term
        let e0 = 0.4;
        let dmu1 = 0.5;
        let dmu0 = -0.3;
        let de = 0.1;
        let path = AipwGateaux::from_samples(&[e0], &[dmu1], &[dmu0], &[de]).unwrap();
        let t = 0.7;
        let d1: f64 = e0 + t * de;
        let d0: f64 = 1.0 - e0 - t * de;
        let want =
            2.0 * (e0 * e0 * dmu1 * de / d1.powi(3) + (1.0 - e0) * (1.0 - e0) * dmu0 * de / d0.powi(3));
        assert_relative_eq!(path.second_derivative(t).unwrap(), want, epsilon = 1e-14);
        // mu1-only perturbation keeps only the first term
        let p1 = AipwGateaux::from_samples(&[e0], &[dmu1], &[0.0], &[de]).unwrap();
        let first = 2.0 * e0 * e0 * dmu1 * de / d1.powi(3);
        assert_relative_eq!(p1.second_derivative(t).unwrap(), first, epsilon = 1e-14);
    }

    #[test]
    fn aipw_matches_finite_difference_second_derivative() {
        let e0 = [0.35, 0.55];
        let dmu1 = [0.4, -0.1];
        let dmu0 = [0.2, 0.3];
        let de = [0.08, -0.06];
        let path = AipwGateaux::from_samples(&e0, &dmu1, &dmu0, &de).unwrap();
        for t in [0.2, 0.5, 0.8] {
            let h = 1e-4;
            let fd = (path.value(t + h).unwrap().f - 2.0 * path.value(t).unwrap().f
                + path.value(t - h).unwrap().f)
                / (h * h);
            assert_relative_eq!(path.second_derivative(t).unwrap(), fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn aipw_positivity_violation_detected() {
        // e0 + t de hits zero at t = 1
        let path = AipwGateaux::from_samples(&[0.5], &[1.0], &[0.0], &[-0.5]).unwrap();
        assert!(path.value(0.5).is_ok());
        assert!(matches!(
            path.value(1.0),
            Err(Error::PositivityViolation(_))
        ));
    }

    #[test]
    fn plm_curve_is_exactly_quadratic() {
        let path =
            PlmGateaux::<f64>::from_samples(&[1.0, 0.5, -0.3], &[0.2, -0.1, 0.4], 3.0).unwrap();
        let report = orthogonality_check(&path, 1e-8).unwrap();
        assert!(report.quadratic_fit_residual < 1e-10);
        assert_eq!(report.f0, 0.0);
        assert!(report.fprime0.abs() < 1e-8);
        assert!(!report.flagged_nonorthogonal);
        // f(t)/t^2 constant across the grid
        let f1 = path.value(1.0).unwrap().f;
        for t in [0.1, 0.5, 1.0] {
            assert_relative_eq!(path.value(t).unwrap().f / (t * t), f1, epsilon = 1e-10);
        }
    }

    #[test]
    fn linear_path_is_flagged() {
        let path = FnPath::new(|t: f64| {
            Ok(PathValue {
                f: -0.3 * t,
                stderr: None,
            })
        });
        let report = orthogonality_check(&path, 1e-3).unwrap();
        assert_relative_eq!(report.fprime0, -0.3, epsilon = 1e-8);
        assert!(report.flagged_nonorthogonal);
    }

    #[test]
    fn monte_carlo_noise_raises_the_bar() {
        // same slope, but with a large reported standard error: not flagged
        let path = FnPath::new(|t: f64| {
            Ok(PathValue {
                f: -0.3 * t,
                stderr: Some(1.0),
            })
        });
        let report = orthogonality_check(&path, 1e-3).unwrap();
        assert!(!report.flagged_nonorthogonal);
    }

    #[test]
    fn rate_functional_decays_for_plm() {
        let path = PlmGateaux::from_samples(&[1.0], &[1.0], 0.0).unwrap();
        let grid = [100, 1_000, 10_000, 100_000];
        let seq = rate_functional(&path, &grid, 0.3).unwrap();
        for win in seq.windows(2) {
            assert!(win[1].1 < win[0].1);
        }
        // closed-form check: sqrt(n) * 2 K n^{-0.6} with K = 1
        for (n, v) in &seq {
            let want = 2.0 * (*n as f64).powf(-0.1);
            assert_relative_eq!(*v, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn rate_functional_zero_cases() {
        let zero = PlmGateaux::from_samples(&[0.0], &[0.0], 3.0).unwrap();
        for (_, v) in rate_functional(&zero, &[10, 100], 0.3).unwrap() {
            assert_eq!(v, 0.0);
        }
        // AIPW with mu-only... e-free perturbation: f'' carries de in each term
        let mu_only =
            AipwGateaux::from_samples(&[0.4], &[0.7], &[0.2], &[0.0]).unwrap();
        for (_, v) in rate_functional(&mu_only, &[10, 1_000], 0.3).unwrap() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn perturbed_predictor_interpolates() {
        let base = predictor_from_fn(|_x: &[f64]| 1.0);
        let target = predictor_from_fn(|_x: &[f64]| 3.0);
        assert_eq!(perturbed(base.clone(), target.clone(), 0.0).predict(&[0.0]), 1.0);
        assert_eq!(perturbed(base.clone(), target.clone(), 1.0).predict(&[0.0]), 3.0);
        assert_eq!(perturbed(base, target, 0.25).predict(&[0.0]), 1.5);
    }

    #[test]
    fn monte_carlo_path_rejects_tiny_samples() {
        let mut rng = substream(1, 0);
        let data = simulate_plm(&PlmConfig::new(50, 5, 3.0).unwrap(), &mut rng).unwrap();
        let h = NuisanceFit::PartialledOut {
            k_y: predictor_from_fn(|x: &[f64]| plm_ky0(x, 3.0)),
            e: predictor_from_fn(plm_e0::<f64>),
        };
        assert!(f_monte_carlo(&PartialledOutScore, 3.0, &h, &data).is_err());
    }

    #[test]
    fn monte_carlo_zero_at_the_truth() {
        let mut rng = substream(31, 0);
        let data = simulate_plm(&PlmConfig::new(20_000, 5, 3.0).unwrap(), &mut rng).unwrap();
        let h = NuisanceFit::PartialledOut {
            k_y: predictor_from_fn(|x: &[f64]| plm_ky0(x, 3.0)),
            e: predictor_from_fn(plm_e0::<f64>),
        };
        let v = f_monte_carlo(&PartialledOutScore, 3.0, &h, &data).unwrap();
        let se = v.stderr.unwrap();
        assert!(v.f.abs() < 4.0 * se, "f = {} vs se {se}", v.f);
    }

    #[test]
    fn monte_carlo_matches_plm_constant_perturbation() {
        // dk = 1, de = 0.1 at t = 1 -> expect 0.07
        let mut rng = substream(32, 0);
        let data = simulate_plm(&PlmConfig::new(200_000, 5, 3.0).unwrap(), &mut rng).unwrap();
        let h = NuisanceFit::PartialledOut {
            k_y: predictor_from_fn(|x: &[f64]| plm_ky0(x, 3.0) + 1.0),
            e: predictor_from_fn(|x: &[f64]| plm_e0::<f64>(x) + 0.1),
        };
        let v = f_monte_carlo(&PartialledOutScore, 3.0, &h, &data).unwrap();
        let se = v.stderr.unwrap();
        assert!(
            (v.f - 0.07).abs() < 4.0 * se,
            "f = {} vs 0.07, se {se}",
            v.f
        );
    }

    #[test]
    fn naive_score_is_affine_with_unit_negative_slope() {
        use crate::data::Matrix;
        let ds = Dataset::new(
            vec![2.0],
            vec![1.0],
            Matrix::from_rows(vec![vec![0.0]]).unwrap(),
            None,
        )
        .unwrap();
        let h = NuisanceFit::PartialledOut {
            k_y: predictor_from_fn(|_x: &[f64]| 0.5),
            e: predictor_from_fn(|_x: &[f64]| 0.5),
        };
        let s = NaiveScore;
        assert_relative_eq!(s.evaluate(&ds.obs(0), 0.0, &h).unwrap(), 1.5);
        assert_relative_eq!(s.evaluate(&ds.obs(0), 1.5, &h).unwrap(), 0.0);
        assert_eq!(s.dtheta(&ds.obs(0), 0.0, &h).unwrap(), -1.0);
    }

    #[test]
    fn naive_anchor_is_attenuated_theta0() {
        // E[(Y - k_y0) Z] = theta0 E[e0 (1 - e0)] < theta0 when e0 is interior
        let cfg = PlmConfig::new(1000, 5, 3.0).unwrap();
        let anchor = NaiveScore::plm_anchor(&cfg, 200_000, 7).unwrap();
        assert!(anchor > 0.3 && anchor < 3.0 * 0.25 + 0.05, "anchor = {anchor}");
    }

    #[test]
    fn curve_export_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.tsv");
        let curve = vec![
            (0.0, PathValue { f: 0.0, stderr: None }),
            (0.5, PathValue { f: 0.25, stderr: Some(0.01) }),
        ];
        write_curve(&path, &curve).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t\tf\tstderr");
        assert_eq!(lines[1], "0.0\t0.0\t");
        assert_eq!(lines[2], "0.5\t0.25\t0.01");
    }
}
