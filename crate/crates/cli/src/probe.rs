//! Empirical sensitivity of the non-private learners on neighbouring
//! streams.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use dp_ocp_core::learners::{Ftl, Giga, Igd};
use dp_ocp_core::privacy::LossConstants;
use dp_ocp_core::{ConvexSet, LearnerKind, LinearLoss, OnlineLearner, SharedLoss};

use crate::error::{invalid, Result};

/// Strong convexity of every probe loss.
pub const PROBE_ALPHA: f64 = 1.0;

/// Reference sensitivity constant `λ` the probe normalises by: `2L/α` for
/// IGD and FTL, `2G/α` for GIGA.
pub fn reference_lambda(kind: LearnerKind, constants: &LossConstants) -> f64 {
    match kind {
        LearnerKind::Giga => 2.0 * constants.grad_bound.unwrap_or(constants.lipschitz) / constants.alpha,
        _ => 2.0 * constants.lipschitz / constants.alpha,
    }
}

fn random_loss<R: Rng>(dim: usize, rng: &mut R) -> Result<SharedLoss> {
    let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
    let z: DVector<f64> = z.normalize();
    let v = z * rng.random_range(0.0..1.0f64).sqrt();
    let loss = if rng.random_bool(0.5) {
        LinearLoss::quadratic(rng.random_range(-1.0..1.0), v, PROBE_ALPHA)?
    } else {
        let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        LinearLoss::logistic(label, v, PROBE_ALPHA)?
    };
    Ok(loss.shared())
}

fn learner(kind: LearnerKind, set: &ConvexSet, constants: &LossConstants, x1: DVector<f64>) -> Result<Box<dyn OnlineLearner>> {
    Ok(match kind {
        LearnerKind::Igd => Box::new(Igd::new(set.clone(), constants.alpha, x1)?),
        LearnerKind::Ftl => Box::new(Ftl::new(set.clone(), constants.alpha, x1)?),
        LearnerKind::Giga => {
            let lg = constants.grad_lipschitz.ok_or_else(|| invalid("probe losses must be smooth"))?;
            Box::new(Giga::new(set.clone(), constants.alpha, lg, x1)?)
        }
        LearnerKind::Qftl => return Err(invalid("probe supports igd, giga and ftl")),
    })
}

/// Worst `t·‖x_{t+1} − x′_{t+1}‖/λ` over `trials` random neighbouring pairs
/// of `horizon`-long streams mixing quadratic and logistic losses. GIGA's
/// burn-in rounds are skipped.
pub fn sensitivity_probe(kind: LearnerKind, dim: usize, horizon: usize, trials: usize, seed: u64) -> Result<f64> {
    if dim == 0 || horizon == 0 || trials == 0 {
        return Err(invalid("dim, T and trials must be positive"));
    }
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let set = ConvexSet::origin_ball(dim, rng.random_range(0.5..2.0))?;
        let losses = (0..horizon).map(|_| random_loss(dim, &mut rng)).collect::<Result<Vec<_>>>()?;
        let mut neighbour = losses.clone();
        let changed = rng.random_range(0..horizon);
        neighbour[changed] = random_loss(dim, &mut rng)?;

        let both: Vec<SharedLoss> = losses.iter().chain(&neighbour[changed..=changed]).cloned().collect();
        let constants = LossConstants::declared(&both, &set)?;
        let lambda = reference_lambda(kind, &constants);
        let x1 = set.sample(&mut rng)?;
        let mut a = learner(kind, &set, &constants, x1.clone())?;
        let mut b = learner(kind, &set, &constants, x1)?;
        for (t, (f, g)) in losses.iter().zip(&neighbour).enumerate() {
            a.observe(f)?;
            b.observe(g)?;
            if a.in_burn_in() {
                continue;
            }
            let ratio = (t + 1) as f64 * (a.iterate() - b.iterate()).norm() / lambda;
            worst = worst.max(ratio);
        }
    }
    Ok(worst)
}
