use nalgebra::DVector;

use super::{check_alpha, OnlineLearner};
use crate::error::{Error, Result};
use crate::loss::SharedLoss;
use crate::set::ConvexSet;
use crate::solver::CumulativeObjective;

/// `argmin_{x∈C} Σ_τ f_τ(x)` from a cold start at the projected origin.
pub fn ftl_update(losses: &[SharedLoss], set: &ConvexSet) -> Result<DVector<f64>> {
    let mut objective = CumulativeObjective::new(set.dim());
    for f in losses {
        objective.add(f)?;
    }
    objective.minimize(set, &DVector::zeros(set.dim()))
}

/// Follow the leader, warm-started from the previous leader.
#[derive(Debug, Clone)]
pub struct Ftl {
    set: ConvexSet,
    alpha: f64,
    objective: CumulativeObjective,
    x: DVector<f64>,
}

impl Ftl {
    pub fn new(set: ConvexSet, alpha: f64, x1: DVector<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if !set.contains(&x1) {
            return Err(Error::Infeasible { index: 0 });
        }
        let objective = CumulativeObjective::new(set.dim());
        Ok(Self { set, alpha, objective, x: x1 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl OnlineLearner for Ftl {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn round(&self) -> usize {
        self.objective.len() + 1
    }

    fn iterate(&self) -> &DVector<f64> {
        &self.x
    }

    fn observe(&mut self, loss: &SharedLoss) -> Result<()> {
        if loss.strong_convexity() < self.alpha {
            log::debug!("loss strong convexity {} below declared {}", loss.strong_convexity(), self.alpha);
        }
        self.objective.add(loss)?;
        self.x = self.objective.minimize(&self.set, &self.x)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LinearLoss;

    fn q(y: f64, alpha: f64) -> SharedLoss {
        LinearLoss::quadratic(y, DVector::from_element(1, 1.0), alpha).unwrap().shared()
    }

    #[test]
    fn spec_examples() {
        let line = ConvexSet::all_space(1).unwrap();
        assert!((ftl_update(&[q(1.0, 1.0)], &line).unwrap()[0] - 0.5).abs() < 1e-9);
        assert!((ftl_update(&[q(1.0, 1.0), q(0.0, 1.0)], &line).unwrap()[0] - 0.25).abs() < 1e-9);
        let sym = ftl_update(&[q(1.0, 1.0), q(-1.0, 1.0)], &line).unwrap();
        assert!(sym[0].abs() < 1e-9);
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let set = ConvexSet::origin_ball(1, 0.6).unwrap();
        let losses: Vec<_> = [0.9, -0.2, 1.0, 0.4].iter().map(|&y| q(y, 0.5)).collect();
        let mut ftl = Ftl::new(set.clone(), 0.5, DVector::zeros(1)).unwrap();
        for (i, f) in losses.iter().enumerate() {
            ftl.observe(f).unwrap();
            let cold = ftl_update(&losses[..=i], &set).unwrap();
            assert!((ftl.iterate() - cold).norm() < 1e-8);
            assert_eq!(ftl.round(), i + 2);
        }
    }
}
