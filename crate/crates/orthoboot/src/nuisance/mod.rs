//! Non-parametric regression learners producing plug-in nuisance fits.

mod forest;
mod kernel;

pub use forest::{fit_forest, Forest, ForestConfig, MaxFeatures};
pub use kernel::{fit_kernel, Bandwidth, NadarayaWatson};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

/// A fitted prediction function. Prediction is deterministic given the fitted
/// state and defined on the whole covariate domain.
pub trait Predictor<F>: Send + Sync {
    fn predict(&self, x: &[F]) -> F;
}

/// Shared handle to a fitted predictor.
pub type PredictorHandle<F> = Arc<dyn Predictor<F>>;

/// Predictor backed by a closure; used for truth plug-ins and perturbations.
pub struct FnPredictor<F, G>
where
    G: Fn(&[F]) -> F + Send + Sync,
{
    f: G,
    _marker: std::marker::PhantomData<fn() -> F>,
}

impl<F, G> FnPredictor<F, G>
where
    G: Fn(&[F]) -> F + Send + Sync,
{
    pub fn new(f: G) -> Self {
        FnPredictor {
            f,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Scalar, G> Predictor<F> for FnPredictor<F, G>
where
    G: Fn(&[F]) -> F + Send + Sync,
{
    fn predict(&self, x: &[F]) -> F {
        (self.f)(x)
    }
}

/// Convenience constructor for a boxed closure predictor.
pub fn predictor_from_fn<F: Scalar>(
    f: impl Fn(&[F]) -> F + Send + Sync + 'static,
) -> PredictorHandle<F> {
    Arc::new(FnPredictor::new(f))
}

/// Clamping specification for propensity predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampSpec<F> {
    pub epsilon: F,
}

impl<F: Scalar> ClampSpec<F> {
    pub fn new(epsilon: F) -> Result<Self> {
        if epsilon <= F::zero() || epsilon >= real::<F>(0.5) {
            return Err(Error::invalid("clamp epsilon must lie in (0, 0.5)"));
        }
        Ok(ClampSpec { epsilon })
    }
}

impl<F: Scalar> Default for ClampSpec<F> {
    fn default() -> Self {
        ClampSpec {
            epsilon: real(0.01),
        }
    }
}

struct Clamped<F> {
    inner: PredictorHandle<F>,
    spec: ClampSpec<F>,
}

impl<F: Scalar> Predictor<F> for Clamped<F> {
    fn predict(&self, x: &[F]) -> F {
        self.inner
            .predict(x)
            .max(self.spec.epsilon)
            .min(F::one() - self.spec.epsilon)
    }
}

/// Wrap a propensity predictor so its output lies in [epsilon, 1-epsilon].
pub fn clamp_propensity<F: Scalar>(
    p: PredictorHandle<F>,
    spec: ClampSpec<F>,
) -> PredictorHandle<F> {
    Arc::new(Clamped { inner: p, spec })
}

/// Predictor that prepends a fixed treatment value to the covariate vector
/// before querying a model fitted on (Z, X) features. Backs the AIPW
/// outcome-regression components mu(1, .) and mu(0, .).
pub struct AtTreatment<F> {
    inner: PredictorHandle<F>,
    z: F,
}

impl<F: Scalar> AtTreatment<F> {
    pub fn new(inner: PredictorHandle<F>, z: F) -> Self {
        AtTreatment { inner, z }
    }
}

impl<F: Scalar> Predictor<F> for AtTreatment<F> {
    fn predict(&self, x: &[F]) -> F {
        let mut zx = Vec::with_capacity(x.len() + 1);
        zx.push(self.z);
        zx.extend_from_slice(x);
        self.inner.predict(&zx)
    }
}
