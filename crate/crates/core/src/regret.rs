//! Regret against the best fixed point in hindsight.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::loss::SharedLoss;
use crate::set::ConvexSet;
use crate::solver::CumulativeObjective;

/// Minimiser of `Σ f_t` over `set` and the optimal cumulative cost.
pub fn hindsight_optimum(losses: &[SharedLoss], set: &ConvexSet) -> Result<(DVector<f64>, f64)> {
    if losses.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut objective = CumulativeObjective::new(set.dim());
    for f in losses {
        objective.add(f)?;
    }
    let x = objective.minimize(set, &DVector::zeros(set.dim()))?;
    let value = objective.value(&x);
    Ok((x, value))
}

/// `Σ f_t(x_t) − min_{x∈C} Σ f_t(x)`.
pub fn regret(losses: &[SharedLoss], plays: &[DVector<f64>], set: &ConvexSet) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_dim(losses.len(), plays.len())?;
    let mut incurred = 0.0;
    for (index, (f, x)) in losses.iter().zip(plays).enumerate() {
        check_dim(set.dim(), x.len())?;
        if !set.contains(x) {
            return Err(Error::Infeasible { index });
        }
        incurred += f.value(x);
    }
    let (_, best) = hindsight_optimum(losses, set)?;
    Ok(incurred - best)
}
