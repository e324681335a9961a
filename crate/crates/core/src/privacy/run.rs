use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{calibrate, NoiseCalibration, Pocp, PrivacyBudget, SensitivityProfile};
use crate::error::{Error, Result};
use crate::learners::{Ftl, Giga, Igd, LearnerKind, OnlineLearner};
use crate::loss::SharedLoss;
use crate::set::ConvexSet;
use crate::trace::LearnerTrace;

/// Relative slack allowed when checking declared constants on samples.
const CONSTANT_SLACK: f64 = 0.01;
const VALIDATION_SAMPLES: usize = 1_000;

/// Constants of a loss stream: strong convexity α, Lipschitz bound L,
/// gradient Lipschitz bound L_G and gradient norm bound G.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConstants {
    pub alpha: f64,
    pub lipschitz: f64,
    pub grad_lipschitz: Option<f64>,
    pub grad_bound: Option<f64>,
}

impl LossConstants {
    /// Worst case of the constants each loss declares over `set`.
    pub fn declared(losses: &[SharedLoss], set: &ConvexSet) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::EmptySequence);
        }
        let alpha = losses.iter().map(|f| f.strong_convexity()).fold(f64::INFINITY, f64::min);
        let lipschitz = losses.iter().map(|f| f.lipschitz_on(set)).fold(0.0, f64::max);
        let grad_lipschitz = losses
            .iter()
            .map(|f| f.gradient_lipschitz())
            .try_fold(0.0, |acc: f64, l| l.map(|l| acc.max(l)));
        Ok(Self { alpha, lipschitz, grad_lipschitz, grad_bound: Some(lipschitz) })
    }

    /// Checks the constants against every loss's declarations and against
    /// the defining inequalities on sampled `(loss, x, y)` triples.
    pub fn validate<R: Rng + ?Sized>(&self, losses: &[SharedLoss], set: &ConvexSet, rng: &mut R) -> Result<()> {
        if !(self.alpha > 0.0 && self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::InvalidParameter("alpha and L must be positive and finite".into()));
        }
        if losses.is_empty() {
            return Err(Error::EmptySequence);
        }
        let up = 1.0 + CONSTANT_SLACK;
        let violated = |what: String| Err(Error::ConstantViolated(what));
        for (i, f) in losses.iter().enumerate() {
            if f.strong_convexity() < self.alpha * (1.0 - CONSTANT_SLACK) {
                return violated(format!("loss {i} has strong convexity {} < alpha {}", f.strong_convexity(), self.alpha));
            }
            if let Some(lg) = self.grad_lipschitz {
                match f.gradient_lipschitz() {
                    Some(l) if l <= lg * up => {}
                    other => return violated(format!("loss {i} has gradient Lipschitz constant {other:?} > {lg}")),
                }
            }
        }
        for _ in 0..VALIDATION_SAMPLES {
            let f = &losses[rng.random_range(0..losses.len())];
            let x = set.sample(rng)?;
            let y = set.sample(rng)?;
            let gx = f.gradient(&x);
            let gy = f.gradient(&y);
            let dist = (&y - &x).norm();
            let gap = (f.value(&x) - f.value(&y)).abs();
            if gap > self.lipschitz * up * dist + 1e-9 || gx.norm() > self.lipschitz * up {
                return violated(format!("Lipschitz bound {} exceeded", self.lipschitz));
            }
            if let Some(g) = self.grad_bound {
                if gx.norm() > g * up {
                    return violated(format!("gradient norm {} exceeds bound {g}", gx.norm()));
                }
            }
            let lower = f.value(&x) + gx.dot(&(&y - &x)) + 0.5 * self.alpha * (1.0 - CONSTANT_SLACK) * dist * dist;
            if f.value(&y) < lower - 1e-9 {
                return violated(format!("strong convexity {} exceeded", self.alpha));
            }
            if let Some(lg) = self.grad_lipschitz {
                if (&gx - &gy).norm() > lg * up * dist + 1e-9 {
                    return violated(format!("gradient Lipschitz bound {lg} exceeded"));
                }
            }
        }
        Ok(())
    }

    pub fn sensitivity(&self, kind: LearnerKind) -> Result<SensitivityProfile> {
        match kind {
            LearnerKind::Igd => Ok(SensitivityProfile::igd(self.lipschitz, self.alpha)),
            LearnerKind::Ftl => Ok(SensitivityProfile::ftl(self.lipschitz, self.alpha)),
            LearnerKind::Giga => Ok(SensitivityProfile::giga(self.grad_bound.unwrap_or(self.lipschitz), self.alpha)),
            LearnerKind::Qftl => Err(Error::InvalidParameter(
                "the closed-form quadratic learner is privatised through sum trees, not output perturbation".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: u64,
    /// Replaces the calibrated β, e.g. 0 for a noise-free reference run.
    pub beta_override: Option<f64>,
    /// Starting point; drawn from the set when absent.
    pub start: Option<DVector<f64>>,
}

/// Runs a privatised learner over the whole stream. The trace records the
/// played private points, their costs, the costs of the clean iterates and
/// the noise norms; hindsight columns are left for the caller.
pub fn run_private(
    kind: LearnerKind,
    losses: &[SharedLoss],
    set: &ConvexSet,
    budget: &PrivacyBudget,
    constants: &LossConstants,
    options: &RunOptions,
) -> Result<LearnerTrace> {
    if !set.is_bounded() {
        return Err(Error::UnboundedSet);
    }
    if losses.is_empty() {
        return Err(Error::EmptySequence);
    }
    if losses.len() > budget.horizon {
        return Err(Error::InvalidParameter(format!(
            "stream has {} losses but the budget covers {}",
            losses.len(),
            budget.horizon
        )));
    }
    let mut check_rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x5EED_C0DE_F00D_BEEF);
    constants.validate(losses, set, &mut check_rng)?;
    let profile = constants.sensitivity(kind)?;
    let mut calibration = calibrate(budget, profile.lambda)?;
    if let Some(beta) = options.beta_override {
        calibration = calibration.with_beta(beta);
    }
    log::debug!("{kind}: lambda {} c {} beta {}", calibration.lambda, calibration.c, calibration.beta);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let start = match &options.start {
        Some(x) => x.clone(),
        None => set.sample(&mut rng)?,
    };
    match kind {
        LearnerKind::Igd => drive(Igd::new(set.clone(), constants.alpha, start)?, set, calibration, rng, losses),
        LearnerKind::Ftl => drive(Ftl::new(set.clone(), constants.alpha, start)?, set, calibration, rng, losses),
        LearnerKind::Giga => {
            let lg = constants
                .grad_lipschitz
                .ok_or_else(|| Error::InvalidParameter("GIGA requires a gradient Lipschitz bound".into()))?;
            drive(Giga::new(set.clone(), constants.alpha, lg, start)?, set, calibration, rng, losses)
        }
        LearnerKind::Qftl => unreachable!("rejected by sensitivity"),
    }
}

fn drive<A: OnlineLearner>(
    learner: A,
    set: &ConvexSet,
    calibration: NoiseCalibration,
    rng: ChaCha8Rng,
    losses: &[SharedLoss],
) -> Result<LearnerTrace> {
    let mut pocp = Pocp::new(learner, set.clone(), calibration, rng)?;
    let mut trace = LearnerTrace::new();
    for f in losses {
        let played = pocp.output().clone();
        let cost_private = f.value(&played);
        let cost_clean = f.value(pocp.learner().iterate());
        let noise = pocp.noise_norm();
        trace.push(played, cost_private, cost_clean, noise);
        pocp.step(f)?;
    }
    trace.final_point = Some(pocp.output().clone());
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LinearLoss;

    fn stream(n: usize, seed: u64) -> Vec<SharedLoss> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v = DVector::from_fn(2, |_, _| rng.random_range(-0.7..0.7));
                LinearLoss::quadratic(rng.random_range(-1.0..1.0), v, 1.0).unwrap().shared()
            })
            .collect()
    }

    #[test]
    fn zero_beta_matches_nonprivate() {
        let set = ConvexSet::origin_ball(2, 1.0).unwrap();
        let losses = stream(4, 1);
        let constants = LossConstants::declared(&losses, &set).unwrap();
        let budget = PrivacyBudget::new(1.0, 0.01, 4).unwrap();
        for kind in [LearnerKind::Igd, LearnerKind::Ftl, LearnerKind::Giga] {
            let opts = RunOptions { seed: 3, beta_override: Some(0.0), start: None };
            let trace = run_private(kind, &losses, &set, &budget, &constants, &opts).unwrap();
            for s in &trace.steps {
                assert_eq!(s.cost_private, s.cost_nonprivate);
                assert_eq!(s.noise_norm, 0.0);
            }
        }
    }

    #[test]
    fn private_outputs_are_feasible() {
        let set = ConvexSet::origin_ball(2, 1.0).unwrap();
        let losses = stream(64, 2);
        let constants = LossConstants::declared(&losses, &set).unwrap();
        let budget = PrivacyBudget::new(1.0, 0.01, 64).unwrap();
        let trace = run_private(LearnerKind::Igd, &losses, &set, &budget, &constants, &RunOptions::default()).unwrap();
        assert_eq!(trace.len(), 64);
        assert!(trace.steps.iter().all(|s| set.contains(&s.point)));
        assert!(trace.steps[1..].iter().all(|s| s.noise_norm > 0.0));
    }

    #[test]
    fn understated_constants_are_rejected() {
        let set = ConvexSet::origin_ball(2, 1.0).unwrap();
        let losses = stream(16, 4);
        let declared = LossConstants::declared(&losses, &set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let low_l = LossConstants { lipschitz: declared.lipschitz * 0.2, ..declared };
        assert!(matches!(low_l.validate(&losses, &set, &mut rng), Err(Error::ConstantViolated(_))));
        let high_alpha = LossConstants { alpha: 3.0, ..declared };
        assert!(matches!(high_alpha.validate(&losses, &set, &mut rng), Err(Error::ConstantViolated(_))));
        let budget = PrivacyBudget::new(1.0, 0.01, 16).unwrap();
        assert!(run_private(LearnerKind::Igd, &losses, &set, &budget, &low_l, &RunOptions::default()).is_err());
    }

    #[test]
    fn unbounded_set_is_rejected() {
        let set = ConvexSet::all_space(2).unwrap();
        let losses = stream(4, 5);
        let constants = LossConstants { alpha: 1.0, lipschitz: 1.0, grad_lipschitz: None, grad_bound: None };
        let budget = PrivacyBudget::new(1.0, 0.01, 4).unwrap();
        let r = run_private(LearnerKind::Igd, &losses, &set, &budget, &constants, &RunOptions::default());
        assert_eq!(r.unwrap_err(), Error::UnboundedSet);
    }
}
