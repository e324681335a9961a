//! Per-step records of a run.

use nalgebra::DVector;

use crate::error::{check_dim, Result};
use crate::loss::SharedLoss;
use crate::regret::hindsight_optimum;
use crate::set::ConvexSet;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    /// Point played at step t (the private output for private runs).
    pub point: DVector<f64>,
    pub cost_private: f64,
    pub cost_nonprivate: f64,
    pub noise_norm: f64,
    pub cum_cost_private: f64,
    pub cum_cost_nonprivate: f64,
    /// Running `Σ_{τ≤t} f_τ(x*)` for the hindsight optimum `x*` of the whole
    /// stream; zero until [`LearnerTrace::attach_hindsight`] is called.
    pub cum_cost_optimal: f64,
}

impl TraceStep {
    pub fn cum_regret_private(&self) -> f64 {
        self.cum_cost_private - self.cum_cost_optimal
    }

    pub fn cum_regret_nonprivate(&self) -> f64 {
        self.cum_cost_nonprivate - self.cum_cost_optimal
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnerTrace {
    pub steps: Vec<TraceStep>,
    pub optimum: Option<DVector<f64>>,
    /// Point released after the last loss.
    pub final_point: Option<DVector<f64>>,
}

impl LearnerTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, point: DVector<f64>, cost_private: f64, cost_nonprivate: f64, noise_norm: f64) {
        let (cp, cn) = self
            .steps
            .last()
            .map_or((0.0, 0.0), |s| (s.cum_cost_private, s.cum_cost_nonprivate));
        self.steps.push(TraceStep {
            t: self.steps.len() + 1,
            point,
            cost_private,
            cost_nonprivate,
            noise_norm,
            cum_cost_private: cp + cost_private,
            cum_cost_nonprivate: cn + cost_nonprivate,
            cum_cost_optimal: 0.0,
        });
    }

    /// Fills the optimal-cost column from the hindsight optimum over `set`.
    pub fn attach_hindsight(&mut self, losses: &[SharedLoss], set: &ConvexSet) -> Result<()> {
        check_dim(self.steps.len(), losses.len())?;
        let (x, _) = hindsight_optimum(losses, set)?;
        let mut acc = 0.0;
        for (step, f) in self.steps.iter_mut().zip(losses) {
            acc += f.value(&x);
            step.cum_cost_optimal = acc;
        }
        self.optimum = Some(x);
        Ok(())
    }

    pub fn final_regret_private(&self) -> Option<f64> {
        self.steps.last().map(TraceStep::cum_regret_private)
    }

    pub fn final_regret_nonprivate(&self) -> Option<f64> {
        self.steps.last().map(TraceStep::cum_regret_nonprivate)
    }

    pub fn mean_noise_norm(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.noise_norm).sum::<f64>() / self.steps.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LinearLoss;

    #[test]
    fn cumulative_columns_are_running_sums() {
        let mut trace = LearnerTrace::new();
        let costs = [(1.0, 0.5), (2.0, 0.25), (0.5, 0.125)];
        for (p, n) in costs {
            trace.push(DVector::zeros(1), p, n, 0.0);
        }
        let mut acc = (0.0, 0.0);
        for (s, (p, n)) in trace.steps.iter().zip(costs) {
            acc.0 += p;
            acc.1 += n;
            assert_eq!((s.cum_cost_private, s.cum_cost_nonprivate), acc);
        }
        assert_eq!(trace.steps.iter().map(|s| s.t).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn final_regret_matches_definition() {
        let losses: Vec<SharedLoss> = [0.0, 1.0]
            .iter()
            .map(|&y| LinearLoss::quadratic(y, DVector::from_element(1, 1.0), 0.0).unwrap().shared())
            .collect();
        let mut trace = LearnerTrace::new();
        for f in &losses {
            let x = DVector::zeros(1);
            let c = f.value(&x);
            trace.push(x, c, c, 0.0);
        }
        trace.attach_hindsight(&losses, &ConvexSet::all_space(1).unwrap()).unwrap();
        assert!((trace.final_regret_private().unwrap() - 0.25).abs() < 1e-9);
    }
}
