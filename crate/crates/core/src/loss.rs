//! Per-round convex costs.
//!
//! Every learner consumes losses through the [`Loss`] trait. Losses of the
//! form `g(⟨v, x⟩) + (α/2)‖x‖²` additionally expose their [`LinearModel`]
//! structure, which lets the inner solvers compute proximal steps exactly and
//! accumulate squared losses into sufficient statistics.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::set::ConvexSet;

pub type SharedLoss = Arc<dyn Loss>;

pub trait Loss: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    /// Gradient, or any subgradient where the loss is not differentiable.
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Declared strong convexity lower bound.
    fn strong_convexity(&self) -> f64;

    /// Lipschitz constant of the gradient, absent for non-smooth losses.
    fn gradient_lipschitz(&self) -> Option<f64>;

    /// Upper bound on the Lipschitz constant of the loss over `set`
    /// (infinite when the set is unbounded and the loss grows).
    fn lipschitz_on(&self, set: &ConvexSet) -> f64;

    fn linear_model(&self) -> Option<LinearModel<'_>> {
        None
    }
}

/// Scalar link `g` of a linear-model loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// `½(y − u)²`
    Squared { target: f64 },
    /// `ln(1 + exp(−label·u))`
    Logistic { label: f64 },
    /// `max(0, 1 − label·u)`
    Hinge { label: f64 },
}

impl Link {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Link::Squared { target } => 0.5 * (target - u) * (target - u),
            Link::Logistic { label } => softplus(-label * u),
            Link::Hinge { label } => (1.0 - label * u).max(0.0),
        }
    }

    /// Derivative in `u`; the hinge kink takes the zero-side subgradient.
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Link::Squared { target } => u - target,
            Link::Logistic { label } => -label * sigmoid(-label * u),
            Link::Hinge { label } => {
                if label * u < 1.0 {
                    -label
                } else {
                    0.0
                }
            }
        }
    }

    /// Bound on `|g''|`, absent for the hinge.
    pub fn curvature_bound(&self) -> Option<f64> {
        match *self {
            Link::Squared { .. } => Some(1.0),
            Link::Logistic { .. } => Some(0.25),
            Link::Hinge { .. } => None,
        }
    }

    /// Bound on `|g'(u)|` for `|u| ≤ u_max`.
    fn derivative_bound(&self, u_max: f64) -> f64 {
        match *self {
            Link::Squared { target } => target.abs() + u_max,
            Link::Logistic { .. } | Link::Hinge { .. } => 1.0,
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Borrowed view of `g(⟨v, x⟩) + (α/2)‖x‖²`.
#[derive(Debug, Clone, Copy)]
pub struct LinearModel<'a> {
    pub v: &'a DVector<f64>,
    pub link: Link,
    pub alpha: f64,
}

/// `g(⟨v, x⟩) + (α/2)‖x‖²` with an owned feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLoss {
    v: DVector<f64>,
    link: Link,
    alpha: f64,
}

impl LinearLoss {
    fn new(v: DVector<f64>, link: Link, alpha: f64) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidParameter("feature vector must be non-empty".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("feature vector must be finite".into()));
        }
        Ok(Self { v, link, alpha })
    }

    /// `½(y − ⟨v, x⟩)² + (α/2)‖x‖²`
    pub fn quadratic(y: f64, v: DVector<f64>, alpha: f64) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::InvalidParameter("target must be finite".into()));
        }
        Self::new(v, Link::Squared { target: y }, alpha)
    }

    /// `ln(1 + exp(−label·⟨v, x⟩)) + (α/2)‖x‖²`, label ∈ {−1, +1}.
    pub fn logistic(label: f64, v: DVector<f64>, alpha: f64) -> Result<Self> {
        check_label(label)?;
        Self::new(v, Link::Logistic { label }, alpha)
    }

    /// `max(0, 1 − label·⟨v, x⟩) + (α/2)‖x‖²`, label ∈ {−1, +1}.
    pub fn hinge(label: f64, v: DVector<f64>, alpha: f64) -> Result<Self> {
        check_label(label)?;
        Self::new(v, Link::Hinge { label }, alpha)
    }

    pub fn features(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shared(self) -> SharedLoss {
        Arc::new(self)
    }
}

fn check_label(label: f64) -> Result<()> {
    if label == 1.0 || label == -1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("label must be +1 or -1, got {label}")))
    }
}

fn linear_value(m: &LinearModel<'_>, x: &DVector<f64>) -> f64 {
    m.link.value(m.v.dot(x)) + 0.5 * m.alpha * x.norm_squared()
}

fn linear_gradient(m: &LinearModel<'_>, x: &DVector<f64>) -> DVector<f64> {
    m.v * m.link.derivative(m.v.dot(x)) + x * m.alpha
}

fn linear_lipschitz(m: &LinearModel<'_>, set: &ConvexSet) -> f64 {
    let r = set.max_norm();
    let vn = m.v.norm();
    let link_part = if r.is_finite() || !matches!(m.link, Link::Squared { .. }) || vn == 0.0 {
        m.link.derivative_bound(vn * r) * vn
    } else {
        f64::INFINITY
    };
    let ridge_part = if m.alpha == 0.0 { 0.0 } else { m.alpha * r };
    link_part + ridge_part
}

impl Loss for LinearLoss {
    fn dim(&self) -> usize {
        self.v.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        linear_value(&self.linear_model().unwrap(), x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        linear_gradient(&self.linear_model().unwrap(), x)
    }

    fn strong_convexity(&self) -> f64 {
        self.alpha
    }

    fn gradient_lipschitz(&self) -> Option<f64> {
        self.link.curvature_bound().map(|c| c * self.v.norm_squared() + self.alpha)
    }

    fn lipschitz_on(&self, set: &ConvexSet) -> f64 {
        linear_lipschitz(&self.linear_model().unwrap(), set)
    }

    fn linear_model(&self) -> Option<LinearModel<'_>> {
        Some(LinearModel { v: &self.v, link: self.link, alpha: self.alpha })
    }
}

/// Adds `(α/2)‖x‖²` to another loss.
#[derive(Debug, Clone)]
pub struct Regularized {
    inner: SharedLoss,
    alpha: f64,
}

impl Regularized {
    pub fn new(inner: SharedLoss, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(Self { inner, alpha })
    }
}

impl Loss for Regularized {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.inner.value(x) + 0.5 * self.alpha * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.gradient(x) + x * self.alpha
    }

    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity() + self.alpha
    }

    fn gradient_lipschitz(&self) -> Option<f64> {
        self.inner.gradient_lipschitz().map(|l| l + self.alpha)
    }

    fn lipschitz_on(&self, set: &ConvexSet) -> f64 {
        let extra = if self.alpha == 0.0 { 0.0 } else { self.alpha * set.max_norm() };
        self.inner.lipschitz_on(set) + extra
    }

    fn linear_model(&self) -> Option<LinearModel<'_>> {
        self.inner.linear_model().map(|m| LinearModel { alpha: m.alpha + self.alpha, ..m })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(d, |_, _| rng.random_range(-scale..scale))
    }

    fn central_diff(loss: &dyn Loss, x: &DVector<f64>) -> DVector<f64> {
        let h = 1e-5;
        DVector::from_fn(x.len(), |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (loss.value(&xp) - loss.value(&xm)) / (2.0 * h)
        })
    }

    fn sample_losses(rng: &mut ChaCha8Rng) -> Vec<SharedLoss> {
        let mut out: Vec<SharedLoss> = Vec::new();
        for _ in 0..10 {
            let d = rng.random_range(1..6);
            let alpha = rng.random_range(0.1..2.0);
            let y = rng.random_range(-1.0..1.0);
            let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            out.push(LinearLoss::quadratic(y, rand_vec(rng, d, 1.0), alpha).unwrap().shared());
            out.push(LinearLoss::logistic(label, rand_vec(rng, d, 1.0), alpha).unwrap().shared());
        }
        out
    }

    #[test]
    fn quadratic_gradient_closed_form() {
        let v = DVector::from_row_slice(&[1.0, -2.0]);
        let f = LinearLoss::quadratic(0.5, v.clone(), 0.3).unwrap();
        let x = DVector::from_row_slice(&[0.2, 0.7]);
        let expected = &v * (v.dot(&x) - 0.5) + &x * 0.3;
        assert_eq!(f.gradient(&x), expected);
        assert_eq!(f.strong_convexity(), 0.3);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for loss in sample_losses(&mut rng) {
            for _ in 0..100 {
                let x = rand_vec(&mut rng, loss.dim(), 2.0);
                let g = loss.gradient(&x);
                let fd = central_diff(loss.as_ref(), &x);
                let rel = (&g - &fd).norm() / g.norm().max(1.0);
                assert!(rel < 1e-6, "rel err {rel} for {loss:?}");
            }
        }
    }

    #[test]
    fn declared_constants_hold_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for loss in sample_losses(&mut rng) {
            let d = loss.dim();
            let set = ConvexSet::origin_ball(d, 1.5).unwrap();
            let l = loss.lipschitz_on(&set);
            let lg = loss.gradient_lipschitz().unwrap();
            let a = loss.strong_convexity();
            for _ in 0..200 {
                let x = set.sample(&mut rng).unwrap();
                let y = set.sample(&mut rng).unwrap();
                let gap = (&x - &y).norm();
                assert!((loss.value(&x) - loss.value(&y)).abs() <= l * gap + 1e-9);
                let lower = loss.value(&x) + loss.gradient(&x).dot(&(&y - &x)) + 0.5 * a * gap * gap;
                assert!(loss.value(&y) >= lower - 1e-9);
                assert!((loss.gradient(&x) - loss.gradient(&y)).norm() <= lg * gap + 1e-9);
            }
        }
    }

    #[test]
    fn logistic_is_stable_for_large_margins() {
        let f = LinearLoss::logistic(1.0, DVector::from_element(1, 1.0), 0.0).unwrap();
        let big = DVector::from_element(1, 800.0);
        assert!(f.value(&big) >= 0.0 && f.value(&big) < 1e-300);
        assert!((f.value(&(-big.clone())) - 800.0).abs() < 1e-9);
        assert!(f.gradient(&big)[0].abs() < 1e-300);
    }

    #[test]
    fn hinge_kink_uses_zero_side() {
        let f = LinearLoss::hinge(1.0, DVector::from_element(1, 1.0), 0.0).unwrap();
        assert_eq!(f.gradient(&DVector::from_element(1, 1.0))[0], 0.0);
        assert_eq!(f.gradient(&DVector::from_element(1, 0.5))[0], -1.0);
        assert!(f.gradient_lipschitz().is_none());
    }

    #[test]
    fn regularized_adds_ridge() {
        let base = LinearLoss::quadratic(0.4, DVector::from_element(1, 1.0), 0.0).unwrap().shared();
        let r = Regularized::new(base, 2.0).unwrap();
        let x = DVector::from_element(1, 1.0);
        assert!((r.value(&x) - (0.18 + 1.0)).abs() < 1e-15);
        assert_eq!(r.linear_model().unwrap().alpha, 2.0);
        assert_eq!(r.strong_convexity(), 2.0);
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(LinearLoss::logistic(0.5, DVector::from_element(1, 1.0), 1.0).is_err());
        assert!(LinearLoss::quadratic(0.0, DVector::from_element(1, 1.0), -1.0).is_err());
    }
}
