//! Private offline risk minimisation: implicit gradient descent over
//! ridge-regularised losses, iterate averaging, and one Gaussian
//! perturbation of the average.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::learners::{Igd, OnlineLearner};
use crate::loss::{Regularized, SharedLoss};
use crate::privacy::gaussian;
use crate::set::ConvexSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolConfig {
    pub eps_p: f64,
    pub delta: f64,
    /// Target excess risk; sets the ridge weight.
    pub eps_g: f64,
    /// Lipschitz bound of the raw loss.
    pub lipschitz: f64,
    /// Assumed bound on the norm of the risk minimiser.
    pub xstar_norm: f64,
}

impl PolConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_p", self.eps_p),
            ("eps_g", self.eps_g),
            ("L", self.lipschitz),
            ("xstar_norm", self.xstar_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    /// `α = ε_g / ‖x*‖²`.
    pub fn alpha(&self) -> f64 {
        self.eps_g / (self.xstar_norm * self.xstar_norm)
    }

    /// Lipschitz bound of the regularised loss over the ball of radius
    /// `‖x*‖`: `L + α‖x*‖`.
    pub fn regularized_lipschitz(&self) -> f64 {
        self.lipschitz + self.alpha() * self.xstar_norm
    }

    /// The ball of radius `‖x*‖` replaces an unbounded set.
    pub fn feasible_set(&self, set: &ConvexSet) -> Result<ConvexSet> {
        if set.is_bounded() {
            Ok(set.clone())
        } else {
            ConvexSet::origin_ball(set.dim(), self.xstar_norm)
        }
    }

    /// Sensitivity of the averaged iterate, `2(L + α‖x*‖) ln T / (αT)`.
    pub fn average_sensitivity(&self, horizon: usize) -> f64 {
        let t = horizon as f64;
        2.0 * self.regularized_lipschitz() * t.ln() / (self.alpha() * t)
    }

    /// `β = 2√2 (L + α‖x*‖) ln T / (αTε_p) · √(ln(1/δ) + ε_p)`.
    pub fn beta(&self, horizon: usize) -> f64 {
        self.average_sensitivity(horizon) * 2f64.sqrt() * ((1.0 / self.delta).ln() + self.eps_p).sqrt() / self.eps_p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolOutput {
    /// Released point `P_C(x̃ + b)`.
    pub point: DVector<f64>,
    /// Average `x̃` of the iterates, before noise.
    pub average: DVector<f64>,
    pub beta: f64,
    pub noise_norm: f64,
}

/// Runs the private offline learner on raw losses `ℓ(·; z_t)`.
pub fn pol_run(
    losses: &[SharedLoss],
    set: &ConvexSet,
    config: &PolConfig,
    seed: u64,
    beta_override: Option<f64>,
) -> Result<PolOutput> {
    config.validate()?;
    let horizon = losses.len();
    if horizon < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 examples, got {horizon}")));
    }
    let set = config.feasible_set(set)?;
    let zero = DVector::zeros(set.dim());
    if losses.iter().any(|f| f.value(&zero) > 1.0) {
        log::warn!("some loss exceeds 1 at the origin; the utility guarantee does not apply");
    }
    let alpha = config.alpha();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = set.sample(&mut rng)?;
    let mut igd = Igd::new(set.clone(), alpha, start.clone())?;
    let mut sum = start;
    for f in &losses[..horizon - 1] {
        let regularized: SharedLoss = std::sync::Arc::new(Regularized::new(f.clone(), alpha)?);
        igd.observe(&regularized)?;
        sum += igd.iterate();
    }
    let average = sum / horizon as f64;
    let beta = beta_override.unwrap_or_else(|| config.beta(horizon));
    let b = gaussian(set.dim(), beta, &mut rng);
    let noise_norm = b.norm();
    let point = set.project(&(&average + b))?;
    Ok(PolOutput { point, average, beta, noise_norm })
}

/// Exact expected loss over a known data distribution.
pub trait RiskOracle {
    fn risk(&self, x: &DVector<f64>) -> f64;

    /// Minimiser of the risk over the feasible set.
    fn minimizer(&self) -> DVector<f64>;
}

/// `E[ℓ(x̂)] − E[ℓ(x*)]`.
pub fn excess_risk(x: &DVector<f64>, oracle: &dyn RiskOracle) -> f64 {
    oracle.risk(x) - oracle.risk(&oracle.minimizer())
}

/// Risk of `ℓ(x; z) = ½‖x − z‖²` for `z` with mean `μ` and total variance
/// `tr Σ`: `½‖x − μ‖² + ½ tr Σ`, minimised over a set by projecting `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistanceRisk {
    pub mean: DVector<f64>,
    pub total_variance: f64,
    pub set: ConvexSet,
}

impl RiskOracle for SquaredDistanceRisk {
    fn risk(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.mean).norm_squared() + 0.5 * self.total_variance
    }

    fn minimizer(&self) -> DVector<f64> {
        self.set.project(&self.mean).expect("dimension checked at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LinearLoss;

    fn config(eps_g: f64) -> PolConfig {
        PolConfig { eps_p: 1.0, delta: 0.01, eps_g, lipschitz: 1.0, xstar_norm: 1.0 }
    }

    #[test]
    fn golden_beta() {
        assert!((config(1.0).beta(100) - 0.61671).abs() < 1e-4);
    }

    #[test]
    fn rejects_single_example() {
        let f = LinearLoss::quadratic(0.4, DVector::from_element(1, 1.0), 0.0).unwrap().shared();
        let set = ConvexSet::all_space(1).unwrap();
        assert!(pol_run(&[f], &set, &config(1.0), 0, Some(0.0)).is_err());
    }

    #[test]
    fn identical_quadratics_approach_shifted_optimum() {
        let cfg = config(1.0);
        let target = 0.4 / (1.0 + cfg.alpha());
        let f = LinearLoss::quadratic(0.4, DVector::from_element(1, 1.0), 0.0).unwrap().shared();
        let set = ConvexSet::all_space(1).unwrap();
        let mut last = f64::INFINITY;
        for t in [100usize, 1_000, 10_000] {
            let losses = vec![f.clone(); t];
            let out = pol_run(&losses, &set, &cfg, 5, Some(0.0)).unwrap();
            let err = (out.point[0] - target).abs();
            assert!(err <= 2.0 * (t as f64).ln() / t as f64, "T={t}: {err}");
            assert!(err < last);
            last = err;
        }
    }

    #[test]
    fn output_is_feasible_and_deterministic() {
        let cfg = config(0.5);
        let losses: Vec<SharedLoss> = (0..50)
            .map(|i| LinearLoss::logistic(if i % 3 == 0 { 1.0 } else { -1.0 }, DVector::from_element(2, 0.3), 0.0).unwrap().shared())
            .collect();
        let set = ConvexSet::all_space(2).unwrap();
        let a = pol_run(&losses, &set, &cfg, 9, None).unwrap();
        assert!(a.point.norm() <= cfg.xstar_norm);
        assert_eq!(a, pol_run(&losses, &set, &cfg, 9, None).unwrap());
    }

    #[test]
    fn quadratic_excess_risk() {
        let oracle = SquaredDistanceRisk {
            mean: DVector::from_row_slice(&[0.3, -0.2]),
            total_variance: 0.5,
            set: ConvexSet::origin_ball(2, 1.0).unwrap(),
        };
        assert_eq!(excess_risk(&oracle.minimizer(), &oracle), 0.0);
        let e = DVector::from_row_slice(&[0.01, 0.02]);
        let x = oracle.minimizer() + &e;
        assert!((excess_risk(&x, &oracle) - 0.5 * e.norm_squared()).abs() < 1e-9);
    }
}
