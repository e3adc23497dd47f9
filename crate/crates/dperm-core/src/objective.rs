//! Convex objective abstraction consumed by the solver, the Lipschitz
//! extension, and the samplers.

use crate::linalg;

/// A convex function on a convex set, exposed through value/subgradient
/// oracles plus the constants the optimization schedules need.
///
/// `lipschitz` bounds subgradient norms on the feasible set, `smoothness`
/// and `strong_convexity` describe the whole objective (not per-example
/// quantities).
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn subgrad(&self, x: &[f64]) -> Vec<f64>;

    /// Bound on subgradient norms over the feasible set.
    fn lipschitz(&self) -> f64;

    /// Smoothness constant of the objective, when declared.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Strong convexity of the objective (0 when merely convex).
    fn strong_convexity(&self) -> f64 {
        0.0
    }
}

/// `scale * inner`, used e.g. to feed `eps/(6 L |C|) * L(.; D)` into the
/// sampler.
pub struct Scaled<'a> {
    pub inner: &'a dyn Objective,
    pub scale: f64,
}

impl Objective for Scaled<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.scale * self.inner.value(x)
    }
    fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.inner.subgrad(x);
        linalg::scale(&mut g, self.scale);
        g
    }
    fn lipschitz(&self) -> f64 {
        self.scale * self.inner.lipschitz()
    }
    fn smoothness(&self) -> Option<f64> {
        self.inner.smoothness().map(|b| self.scale * b)
    }
    fn strong_convexity(&self) -> f64 {
        self.scale * self.inner.strong_convexity()
    }
}

/// The inner objective evaluated through the affine map `x -> center + scale*x`.
///
/// Used when a localized cap is recentered and rescaled into isotropic
/// position before sampling.
pub struct Recentered<'a> {
    pub inner: &'a dyn Objective,
    pub center: Vec<f64>,
    pub scale: f64,
}

impl Recentered<'_> {
    fn map(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .map(|(v, c)| c + self.scale * v)
            .collect()
    }
}

impl Objective for Recentered<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&self.map(x))
    }
    fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.inner.subgrad(&self.map(x));
        linalg::scale(&mut g, self.scale);
        g
    }
    fn lipschitz(&self) -> f64 {
        self.scale * self.inner.lipschitz()
    }
    fn smoothness(&self) -> Option<f64> {
        self.inner.smoothness().map(|b| self.scale * self.scale * b)
    }
    fn strong_convexity(&self) -> f64 {
        self.scale * self.scale * self.inner.strong_convexity()
    }
}

/// `inner + (ridge/2)||x||^2 + <shift, x>`: the perturbed program solved by
/// objective perturbation.
pub struct Perturbed<'a> {
    pub inner: &'a dyn Objective,
    pub ridge: f64,
    pub shift: Vec<f64>,
    /// Bound on `||x||` over the feasible set, used to extend the Lipschitz
    /// constant to the ridge term.
    pub out_radius: f64,
}

impl Objective for Perturbed<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) + 0.5 * self.ridge * linalg::norm_sq(x) + linalg::dot(&self.shift, x)
    }
    fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.inner.subgrad(x);
        for i in 0..g.len() {
            g[i] += self.ridge * x[i] + self.shift[i];
        }
        g
    }
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz() + self.ridge * self.out_radius + linalg::norm(&self.shift)
    }
    fn smoothness(&self) -> Option<f64> {
        self.inner.smoothness().map(|b| b + self.ridge)
    }
    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity() + self.ridge
    }
}
