//! Posterior sampling over bootstrap weights and summaries of the draws.
//!
//! Each posterior draw re-solves the weighted estimating equation under fresh
//! exchangeable weights while the nuisance fit stays fixed. Draws use
//! per-index substreams, so the output is identical for any thread count.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{real, SampleScalar, Scalar};
use crate::scores::{
    affine_coefficients, sandwich_variance, solve_newton, solve_with_coefficients, NuisanceFit,
    Score,
};
use crate::stats::{mean, normal_quantile, quantile, sample_variance};
use crate::stream::substream;
use crate::weights::{draw, equal_weights, WeightScheme};

/// Cap on redraw attempts for a single posterior draw whose weighted equation
/// is degenerate.
const MAX_ATTEMPTS_PER_DRAW: usize = 100;

/// Posterior draws plus the equal-weight (frequentist) solution computed on
/// the same data and nuisance fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample<F> {
    pub draws: Vec<F>,
    /// Root of the unweighted (equal-weight) estimating equation.
    pub theta_hat_n: F,
    /// Sandwich variance estimate at `theta_hat_n` (per-observation scale).
    pub sandwich: F,
    pub n: usize,
    /// Degenerate draws that were rejected and redrawn.
    pub rejected_draws: usize,
}

/// Draw `b_draws` posterior samples of theta under the given weight scheme.
pub fn sample_posterior<F: SampleScalar>(
    data: &Dataset<F>,
    score: &dyn Score<F>,
    h: &NuisanceFit<F>,
    b_draws: usize,
    scheme: WeightScheme,
    seed: u64,
) -> Result<PosteriorSample<F>> {
    if b_draws == 0 {
        return Err(Error::invalid("need at least one posterior draw"));
    }
    let n = data.len();
    let eq = equal_weights::<F>(n)?;
    let (theta_hat_n, coeffs) = if score.is_affine() {
        let coeffs = affine_coefficients(score, data, h)?;
        (solve_with_coefficients(&coeffs, &eq)?.theta_hat, Some(coeffs))
    } else {
        (
            solve_newton(score, data, &eq, h, F::zero(), real(1e-10), 200)?.theta_hat,
            None,
        )
    };
    let sandwich = sandwich_variance(score, data, theta_hat_n, h)?;

    if scheme == WeightScheme::Equal {
        return Ok(PosteriorSample {
            draws: vec![theta_hat_n; b_draws],
            theta_hat_n,
            sandwich,
            n,
            rejected_draws: 0,
        });
    }

    let results: Vec<Result<(F, usize)>> = (0..b_draws as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = substream(seed, j);
            let mut rejected = 0usize;
            loop {
                let w = draw::<F, _>(scheme, n, &mut rng)?;
                let solved = match &coeffs {
                    Some(c) => solve_with_coefficients(c, &w),
                    None => solve_newton(score, data, &w, h, theta_hat_n, real(1e-10), 200),
                };
                match solved {
                    Ok(r) => return Ok((r.theta_hat, rejected)),
                    Err(Error::Degenerate(_)) if rejected + 1 < MAX_ATTEMPTS_PER_DRAW => {
                        rejected += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        })
        .collect();

    let mut draws = Vec::with_capacity(b_draws);
    let mut rejected_draws = 0usize;
    for r in results {
        let (theta, rej) = r?;
        draws.push(theta);
        rejected_draws += rej;
    }
    if rejected_draws > b_draws / 10 {
        return Err(Error::Degenerate(format!(
            "{rejected_draws} of {b_draws} posterior draws were degenerate"
        )));
    }
    Ok(PosteriorSample {
        draws,
        theta_hat_n,
        sandwich,
        n,
        rejected_draws,
    })
}

/// Pool draws from posterior samples computed on the same data with distinct
/// nuisance fits; the frequentist anchor and sandwich are averaged.
pub fn collate<F: Scalar>(samples: &[PosteriorSample<F>]) -> Result<PosteriorSample<F>> {
    if samples.is_empty() {
        return Err(Error::invalid("nothing to collate"));
    }
    let n = samples[0].n;
    if samples.iter().any(|s| s.n != n) {
        return Err(Error::invalid("collated samples must share the sample size"));
    }
    let mut draws = Vec::new();
    let mut rejected = 0;
    for s in samples {
        draws.extend_from_slice(&s.draws);
        rejected += s.rejected_draws;
    }
    let k = real::<F>(samples.len() as f64);
    let theta_hat_n = samples.iter().map(|s| s.theta_hat_n).sum::<F>() / k;
    let sandwich = samples.iter().map(|s| s.sandwich).sum::<F>() / k;
    Ok(PosteriorSample {
        draws,
        theta_hat_n,
        sandwich,
        n,
        rejected_draws: rejected,
    })
}

/// Summary statistics of a posterior sample at a given credibility level.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PosteriorSummary<F> {
    pub post_mean: F,
    pub post_var: F,
    /// Equal-tailed percentile credible interval.
    pub cred_lo: F,
    pub cred_hi: F,
    pub theta_hat_n: F,
    /// Wald interval from the sandwich variance.
    pub freq_lo: F,
    pub freq_hi: F,
    pub covers_true: Option<bool>,
}

pub fn summarize<F: Scalar>(
    sample: &PosteriorSample<F>,
    level: F,
    theta_true: Option<F>,
) -> Result<PosteriorSummary<F>> {
    if sample.draws.len() < 2 {
        return Err(Error::invalid("need at least two draws to summarize"));
    }
    if level <= F::zero() || level >= F::one() {
        return Err(Error::invalid("credibility level must lie in (0,1)"));
    }
    let post_mean = mean(&sample.draws);
    let post_var = sample_variance(&sample.draws)?;
    let mut sorted = sample.draws.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("draws are finite"));
    let half = F::one() / real::<F>(2.0);
    let alpha = (F::one() - level) * half;
    let cred_lo = quantile(&sorted, alpha);
    let cred_hi = quantile(&sorted, F::one() - alpha);
    let z = normal_quantile(F::one() - alpha)?;
    let se = (sample.sandwich / real::<F>(sample.n as f64)).sqrt();
    let freq_lo = sample.theta_hat_n - z * se;
    let freq_hi = sample.theta_hat_n + z * se;
    let covers_true = theta_true.map(|t| cred_lo <= t && t <= cred_hi);
    Ok(PosteriorSummary {
        post_mean,
        post_var,
        cred_lo,
        cred_hi,
        theta_hat_n: sample.theta_hat_n,
        freq_lo,
        freq_hi,
        covers_true,
    })
}

/// Write posterior draws as one value per line.
pub fn write_draws<F: Scalar>(path: &std::path::Path, draws: &[F]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    for d in draws {
        writeln!(out, "{d:?}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
