use nalgebra::DVector;

use super::{check_alpha, OnlineLearner};
use crate::error::{check_dim, Error, Result};
use crate::loss::SharedLoss;
use crate::set::ConvexSet;

/// `P_C(x − η·∇)`.
pub fn giga_update(x: &DVector<f64>, grad: &DVector<f64>, eta: f64, set: &ConvexSet) -> Result<DVector<f64>> {
    check_dim(x.len(), grad.len())?;
    set.project(&(x - grad * eta))
}

/// `t_q = ⌈2L_G²/α²⌉`, at least 1.
pub fn burn_in_length(grad_lipschitz: f64, alpha: f64) -> usize {
    let tq = (2.0 * grad_lipschitz * grad_lipschitz / (alpha * alpha)).ceil();
    if tq.is_finite() && tq >= 1.0 {
        tq as usize
    } else {
        1
    }
}

/// Projected online gradient descent with `η_t = 2/(αt)`.
///
/// Points `x_1, …, x_{t_q}` all equal a fixed random point and the losses of
/// rounds before `t_q` are ignored; updates start from round `t_q`.
#[derive(Debug, Clone)]
pub struct Giga {
    set: ConvexSet,
    alpha: f64,
    burn_in: usize,
    t: usize,
    x: DVector<f64>,
}

impl Giga {
    pub fn new(set: ConvexSet, alpha: f64, grad_lipschitz: f64, x1: DVector<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if !(grad_lipschitz >= 0.0) {
            return Err(Error::InvalidParameter(format!("L_G must be >= 0, got {grad_lipschitz}")));
        }
        if !set.contains(&x1) {
            return Err(Error::Infeasible { index: 0 });
        }
        Ok(Self { set, alpha, burn_in: burn_in_length(grad_lipschitz, alpha), t: 1, x: x1 })
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn step_size(&self) -> f64 {
        2.0 / (self.alpha * self.t as f64)
    }
}

impl OnlineLearner for Giga {
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
        check_dim(self.dim(), loss.dim())?;
        if self.t >= self.burn_in {
            let g = loss.gradient(&self.x);
            self.x = giga_update(&self.x, &g, self.step_size(), &self.set)?;
        }
        self.t += 1;
        Ok(())
    }

    fn in_burn_in(&self) -> bool {
        self.t <= self.burn_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LinearLoss;

    fn unit_box() -> ConvexSet {
        ConvexSet::boxed(DVector::from_element(1, -1.0), DVector::from_element(1, 1.0)).unwrap()
    }

    #[test]
    fn spec_examples() {
        let x = DVector::zeros(1);
        let g = DVector::from_element(1, -1.0);
        assert_eq!(giga_update(&x, &g, 0.5, &unit_box()).unwrap()[0], 0.5);
        assert_eq!(giga_update(&x, &g, 2.0, &unit_box()).unwrap()[0], 1.0);
        let x = DVector::from_element(1, 0.3);
        assert_eq!(giga_update(&x, &DVector::zeros(1), 2.0, &unit_box()).unwrap(), x);
    }

    #[test]
    fn burn_in_replays_start() {
        let f = LinearLoss::quadratic(1.0, DVector::from_element(1, 1.0), 1.0).unwrap().shared();
        // L_G = 2, α = 1 → t_q = 8.
        let x1 = DVector::from_element(1, -0.4);
        let mut giga = Giga::new(unit_box(), 1.0, 2.0, x1.clone()).unwrap();
        assert_eq!(giga.burn_in(), 8);
        for _ in 1..8 {
            assert!(giga.in_burn_in());
            giga.observe(&f).unwrap();
            assert_eq!(giga.iterate(), &x1);
        }
        assert_eq!(giga.round(), 8);
        assert!(giga.in_burn_in());
        giga.observe(&f).unwrap();
        assert!(!giga.in_burn_in());
        assert_ne!(giga.iterate(), &x1);
    }
}
