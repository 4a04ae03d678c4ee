//! Nadaraya-Watson kernel regression with a Gaussian kernel (univariate).

use crate::error::{Error, Result};
use crate::nuisance::Predictor;
use crate::scalar::{real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth<F> {
    /// Silverman's rule: 1.06 * sigma_hat * n^(-1/5).
    Auto,
    Fixed(F),
}

/// Fitted Nadaraya-Watson estimator.
pub struct NadarayaWatson<F> {
    x: Vec<F>,
    y: Vec<F>,
    bandwidth: F,
}

impl<F: Scalar> NadarayaWatson<F> {
    pub fn bandwidth(&self) -> F {
        self.bandwidth
    }
}

impl<F: Scalar> Predictor<F> for NadarayaWatson<F> {
    fn predict(&self, query: &[F]) -> F {
        let q = query[0];
        let half = real::<F>(-0.5);
        let mut num = F::zero();
        let mut den = F::zero();
        for (&xi, &yi) in self.x.iter().zip(self.y.iter()) {
            let u = (q - xi) / self.bandwidth;
            let k = (half * u * u).exp();
            num += k * yi;
            den += k;
        }
        if den > F::zero() {
            num / den
        } else {
            // all kernel weights underflowed: fall back to the nearest point
            let mut best = 0usize;
            let mut best_dist = F::infinity();
            for (i, &xi) in self.x.iter().enumerate() {
                let d = (q - xi).abs();
                if d < best_dist {
                    best_dist = d;
                    best = i;
                }
            }
            self.y[best]
        }
    }
}

/// Fit a Nadaraya-Watson estimator on univariate data.
pub fn fit_kernel<F: Scalar>(x: &[F], y: &[F], bandwidth: Bandwidth<F>) -> Result<NadarayaWatson<F>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("fit_kernel requires n >= 2"));
    }
    if y.len() != n {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("kernel inputs must be finite"));
    }
    let bw = match bandwidth {
        Bandwidth::Fixed(b) => {
            if b <= F::zero() {
                return Err(Error::invalid("bandwidth must be positive"));
            }
            b
        }
        Bandwidth::Auto => {
            let sd = crate::stats::sample_variance(x)?.sqrt();
            let silverman =
                real::<F>(1.06) * sd * real::<F>(n as f64).powf(real::<F>(-0.2));
            if silverman <= F::zero() {
                // degenerate (constant x); any positive bandwidth gives the
                // same weighted mean
                F::one()
            } else {
                silverman
            }
        }
    };
    Ok(NadarayaWatson {
        x: x.to_vec(),
        y: y.to_vec(),
        bandwidth: bw,
    })
}
