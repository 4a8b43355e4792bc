use crate::data::BoundingBox;

/// A binary problem with a known posterior `eta(x) = P(y = 1 | x)`.
pub trait GroundTruth: Sync {
    fn dim(&self) -> usize;

    /// Posterior probability of class 1, in `[0, 1]`.
    fn eta(&self, x: &[f64]) -> f64;

    /// Bounded region the problem is studied on.
    fn support(&self) -> &BoundingBox;

    /// Bayes classifier `I(eta(x) > 1/2)`.
    fn bayes_label(&self, x: &[f64]) -> usize {
        usize::from(self.eta(x) > 0.5)
    }

    /// Distance of the posterior from the decision boundary, `|eta(x) - 1/2|`.
    fn margin(&self, x: &[f64]) -> f64 {
        (self.eta(x) - 0.5).abs()
    }
}

/// Ground truth given by a closure, handy for analytic toy problems.
pub struct FnGroundTruth<F> {
    eta: F,
    support: BoundingBox,
}

impl<F> FnGroundTruth<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(support: BoundingBox, eta: F) -> Self {
        Self { eta, support }
    }
}

impl<F> GroundTruth for FnGroundTruth<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.support.dim()
    }

    fn eta(&self, x: &[f64]) -> f64 {
        (self.eta)(x).clamp(0.0, 1.0)
    }

    fn support(&self) -> &BoundingBox {
        &self.support
    }
}

impl<T: GroundTruth + ?Sized> GroundTruth for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eta(&self, x: &[f64]) -> f64 {
        (**self).eta(x)
    }
    fn support(&self) -> &BoundingBox {
        (**self).support()
    }
}
