//! Output perturbation for online learners whose sensitivity decays as
//! `λ/t`.

mod pocp;
mod run;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub use pocp::Pocp;
pub use run::{run_private, LossConstants, RunOptions};

/// Largest admissible δ: `2e⁻²`.
pub fn max_delta() -> f64 {
    2.0 * (-2.0f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub eps: f64,
    pub delta: f64,
    pub horizon: usize,
}

impl PrivacyBudget {
    pub fn new(eps: f64, delta: f64, horizon: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive and finite, got {eps}")));
        }
        if !(delta > 0.0 && delta < max_delta()) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 2e^-2 ≈ {:.6}), got {delta}",
                max_delta()
            )));
        }
        if horizon < 2 {
            return Err(Error::InvalidParameter(format!("horizon must be >= 2, got {horizon}")));
        }
        Ok(Self { eps, delta, horizon })
    }
}

/// Noise scale of the perturbed iterates: step `t` adds `N(0, (β/t)²𝕀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCalibration {
    pub c: f64,
    pub beta: f64,
    pub lambda: f64,
}

/// `c = ln(½ ln(2/δ)) / (2 ln T)`.
pub fn exponent_c(delta: f64, horizon: usize) -> f64 {
    (0.5 * (2.0 / delta).ln()).ln() / (2.0 * (horizon as f64).ln())
}

/// `β = λ T^{½+c} √((2/ε)(ln(T/δ) + √ε / T^{½+c}))`.
pub fn calibrate(budget: &PrivacyBudget, lambda: f64) -> Result<NoiseCalibration> {
    let b = PrivacyBudget::new(budget.eps, budget.delta, budget.horizon)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive and finite, got {lambda}")));
    }
    let t = b.horizon as f64;
    let c = exponent_c(b.delta, b.horizon);
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("delta {} gives non-positive c", b.delta)));
    }
    let growth = t.powf(0.5 + c);
    let beta = lambda * growth * ((2.0 / b.eps) * ((t / b.delta).ln() + b.eps.sqrt() / growth)).sqrt();
    Ok(NoiseCalibration { c, beta, lambda })
}

impl NoiseCalibration {
    /// Calibration that adds no noise; the wrapper then reproduces the
    /// non-private learner.
    pub fn zero() -> Self {
        Self { c: 0.0, beta: 0.0, lambda: 0.0 }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    pub fn std_at(&self, t: usize) -> f64 {
        self.beta / t as f64
    }

    /// One draw of `b ∼ N(0, (β/t)²𝕀_d)`.
    pub fn sample<R: Rng + ?Sized>(&self, t: usize, dim: usize, rng: &mut R) -> DVector<f64> {
        gaussian(dim, self.std_at(t), rng)
    }
}

pub(crate) fn gaussian<R: Rng + ?Sized>(dim: usize, std: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * std
    })
}

/// Sensitivity contract `S(A, t) ≤ λ/t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityProfile {
    pub lambda: f64,
}

impl SensitivityProfile {
    /// Implicit gradient descent: `2L/α`.
    pub fn igd(lipschitz: f64, alpha: f64) -> Self {
        Self { lambda: 2.0 * lipschitz / alpha }
    }

    /// Follow the leader: `2L/α`.
    pub fn ftl(lipschitz: f64, alpha: f64) -> Self {
        Self { lambda: 2.0 * lipschitz / alpha }
    }

    /// Projected gradient with `η_t = 2/(αt)` after burn-in.
    pub fn giga(grad_bound: f64, alpha: f64) -> Self {
        Self { lambda: GIGA_FACTOR * grad_bound / alpha }
    }
}

/// The changed loss enters through a step of size `2/(αt)` times a gradient
/// difference of norm at most `2G`.
pub const GIGA_FACTOR: f64 = 4.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_calibration() {
        let b = PrivacyBudget::new(1.0, 0.1, 16).unwrap();
        let cal = calibrate(&b, 1.0).unwrap();
        assert!((cal.c - 0.072864).abs() < 1e-5);
        assert!((cal.beta - 15.9077).abs() < 1e-3);
        let doubled = calibrate(&b, 2.0).unwrap();
        assert_eq!(doubled.c, cal.c);
        assert!((doubled.beta - 2.0 * cal.beta).abs() <= 1e-12 * cal.beta);
    }

    #[test]
    fn rejects_large_delta() {
        assert!(PrivacyBudget::new(1.0, 0.5, 16).is_err());
        assert!(PrivacyBudget::new(1.0, 0.271, 16).is_err());
        assert!(PrivacyBudget::new(1.0, 0.1, 1).is_err());
        assert!(PrivacyBudget::new(0.0, 0.1, 16).is_err());
        let forged = PrivacyBudget { eps: 1.0, delta: 0.5, horizon: 16 };
        assert!(calibrate(&forged, 1.0).is_err());
    }

    #[test]
    fn beta_monotonicity() {
        let epss = [0.1, 0.5, 1.0, 5.0];
        let deltas = [1e-1, 1e-2, 1e-4, 1e-6];
        let ts = [4, 16, 256, 4096];
        let beta = |e, d, t| calibrate(&PrivacyBudget::new(e, d, t).unwrap(), 1.0).unwrap().beta;
        for &d in &deltas {
            for &t in &ts {
                for w in epss.windows(2) {
                    assert!(beta(w[0], d, t) > beta(w[1], d, t));
                }
            }
        }
        for &e in &epss {
            for &t in &ts {
                for w in deltas.windows(2) {
                    assert!(beta(e, w[0], t) < beta(e, w[1], t));
                }
            }
            for &d in &deltas {
                for w in ts.windows(2) {
                    assert!(beta(e, d, w[0]) < beta(e, d, w[1]));
                }
            }
        }
    }
}
