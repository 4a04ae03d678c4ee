//! Bootstrap weight vectors: exchangeable non-negative weights summing to one.
//!
//! Two schemes are provided. Dirichlet(1,...,1) weights give the Bayesian
//! bootstrap; multinomial counts over n equiprobable cells, scaled by 1/n,
//! give Efron's bootstrap. Equal weights 1/n recover the plain empirical
//! distribution and hence the frequentist solution.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{real, SampleScalar, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Dirichlet,
    Multinomial,
    /// Deterministic 1/n weights; draws under this scheme reproduce the
    /// equal-weight solution.
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<F> {
    w: Vec<F>,
    scheme: WeightScheme,
}

impl<F: Scalar> WeightVector<F> {
    /// Validates non-negativity and unit sum; renormalizes once if the sum is
    /// off by more than the tolerance, and errors if that does not fix it.
    pub fn new(w: Vec<F>, scheme: WeightScheme) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("weight vector must have n >= 1"));
        }
        if w.iter().any(|&v| v < F::zero() || !v.is_finite()) {
            return Err(Error::invalid("weights must be non-negative and finite"));
        }
        let tol = Self::sum_tolerance(w.len());
        let sum = w.iter().copied().sum::<F>();
        let mut w = w;
        if (sum - F::one()).abs() > tol {
            if sum <= F::zero() {
                return Err(Error::Internal("weight sum not positive".into()));
            }
            for v in w.iter_mut() {
                *v = *v / sum;
            }
            let resum = w.iter().copied().sum::<F>();
            if (resum - F::one()).abs() > tol {
                return Err(Error::Internal(format!(
                    "weight sum {resum} still off unity after renormalization"
                )));
            }
        }
        Ok(WeightVector { w, scheme })
    }

    fn sum_tolerance(n: usize) -> F {
        real::<F>(1e-12).max(F::epsilon() * real::<F>(n as f64))
    }

    pub fn as_slice(&self) -> &[F] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }
}

/// Dirichlet(1,...,1) weights, realized as n standard exponentials normalized
/// by their sum.
pub fn draw_dirichlet<F, R>(n: usize, rng: &mut R) -> Result<WeightVector<F>>
where
    F: SampleScalar,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::invalid("draw_dirichlet requires n >= 1"));
    }
    let mut w: Vec<F> = Vec::with_capacity(n);
    let mut sum = F::zero();
    for _ in 0..n {
        let e = F::standard_exponential(rng);
        sum += e;
        w.push(e);
    }
    if sum <= F::zero() {
        return Err(Error::Internal("exponential draws summed to zero".into()));
    }
    for v in w.iter_mut() {
        *v = *v / sum;
    }
    WeightVector::new(w, WeightScheme::Dirichlet)
}

/// Multinomial(n; 1/n,...,1/n) counts divided by n.
pub fn draw_multinomial<F, R>(n: usize, rng: &mut R) -> Result<WeightVector<F>>
where
    F: Scalar,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::invalid("draw_multinomial requires n >= 1"));
    }
    let mut counts = vec![0usize; n];
    for _ in 0..n {
        // cells are equiprobable, so a uniform index is the categorical draw
        counts[rng.gen_range(0..n)] += 1;
    }
    let inv_n = F::one() / real::<F>(n as f64);
    let w = counts
        .into_iter()
        .map(|c| real::<F>(c as f64) * inv_n)
        .collect();
    WeightVector::new(w, WeightScheme::Multinomial)
}

/// Deterministic weights 1/n.
pub fn equal_weights<F: Scalar>(n: usize) -> Result<WeightVector<F>> {
    if n == 0 {
        return Err(Error::invalid("equal_weights requires n >= 1"));
    }
    let inv_n = F::one() / real::<F>(n as f64);
    WeightVector::new(vec![inv_n; n], WeightScheme::Equal)
}

/// Draw a weight vector under the given scheme. `Equal` ignores the stream.
pub fn draw<F, R>(scheme: WeightScheme, n: usize, rng: &mut R) -> Result<WeightVector<F>>
where
    F: SampleScalar,
    R: Rng + ?Sized,
{
    match scheme {
        WeightScheme::Dirichlet => draw_dirichlet(n, rng),
        WeightScheme::Multinomial => draw_multinomial(n, rng),
        WeightScheme::Equal => equal_weights(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::substream;
    use approx::assert_relative_eq;

    #[test]
    fn n_zero_is_invalid() {
        let mut rng = substream(1, 0);
        assert!(draw_dirichlet::<f64, _>(0, &mut rng).is_err());
        assert!(draw_multinomial::<f64, _>(0, &mut rng).is_err());
        assert!(equal_weights::<f64>(0).is_err());
    }

    #[test]
    fn single_weight_is_one() {
        let mut rng = substream(7, 3);
        assert_eq!(draw_dirichlet::<f64, _>(1, &mut rng).unwrap().as_slice(), &[1.0]);
        assert_eq!(draw_multinomial::<f64, _>(1, &mut rng).unwrap().as_slice(), &[1.0]);
        assert_eq!(equal_weights::<f64>(1).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn equal_weights_are_quarters_for_n4() {
        assert_eq!(
            equal_weights::<f64>(4).unwrap().as_slice(),
            &[0.25, 0.25, 0.25, 0.25]
        );
    }

    #[test]
    fn equal_weights_n3_sum_to_one() {
        let w = equal_weights::<f64>(3).unwrap();
        let sum: f64 = w.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        for &v in w.as_slice() {
            assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn multinomial_n4_is_quarter_grid() {
        let mut rng = substream(11, 0);
        let w = draw_multinomial::<f64, _>(4, &mut rng).unwrap();
        let sum: f64 = w.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        for &v in w.as_slice() {
            let scaled = v * 4.0;
            assert!((scaled - scaled.round()).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn dirichlet_draw_satisfies_invariants() {
        let mut rng = substream(5, 9);
        for _ in 0..50 {
            let w = draw_dirichlet::<f64, _>(37, &mut rng).unwrap();
            assert!(w.as_slice().iter().all(|&v| v >= 0.0));
            let sum: f64 = w.as_slice().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_negative_weights() {
        assert!(WeightVector::new(vec![0.5, -0.1, 0.6], WeightScheme::Dirichlet).is_err());
    }

    proptest::proptest! {
        #[test]
        fn any_draw_is_nonnegative_and_sums_to_one(seed in 0u64..1000, n in 1usize..200) {
            let mut rng = substream(seed, 0);
            let d = draw_dirichlet::<f64, _>(n, &mut rng).unwrap();
            let m = draw_multinomial::<f64, _>(n, &mut rng).unwrap();
            for w in [d, m] {
                proptest::prop_assert!(w.as_slice().iter().all(|&v| v >= 0.0));
                let sum: f64 = w.as_slice().iter().sum();
                proptest::prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }
}
