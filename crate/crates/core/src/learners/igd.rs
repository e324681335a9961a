use nalgebra::DVector;

use super::{check_alpha, OnlineLearner};
use crate::error::{Error, Result};
use crate::loss::{Loss, SharedLoss};
use crate::set::ConvexSet;
use crate::solver::prox;

/// `argmin_{x∈C} ½‖x − x_t‖² + η·f(x)`.
pub fn igd_update(x: &DVector<f64>, loss: &dyn Loss, eta: f64, set: &ConvexSet) -> Result<DVector<f64>> {
    prox(loss, x, eta, set)
}

/// Implicit gradient descent with `η_t = 1/(αt)`.
#[derive(Debug, Clone)]
pub struct Igd {
    set: ConvexSet,
    alpha: f64,
    t: usize,
    x: DVector<f64>,
}

impl Igd {
    pub fn new(set: ConvexSet, alpha: f64, x1: DVector<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if !set.contains(&x1) {
            return Err(Error::Infeasible { index: 0 });
        }
        Ok(Self { set, alpha, t: 1, x: x1 })
    }

    pub fn step_size(&self) -> f64 {
        1.0 / (self.alpha * self.t as f64)
    }
}

impl OnlineLearner for Igd {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn round(&self) -> usize {
        self.t
    }

    fn iterate(&self) -> &DVector<f64> {
        &self.x
    }

    fn observe(&mut self, loss: &SharedLoss) -> Result<()> {
        self.x = igd_update(&self.x, loss.as_ref(), self.step_size(), &self.set)?;
        self.t += 1;
        Ok(())
    }
}
