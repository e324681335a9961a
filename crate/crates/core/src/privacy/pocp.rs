use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::NoiseCalibration;
use crate::error::{Error, Result};
use crate::learners::OnlineLearner;
use crate::loss::SharedLoss;
use crate::set::ConvexSet;

/// Gaussian output perturbation around an online learner.
///
/// The wrapped learner only ever sees its own clean iterates; the noisy,
/// projected point is what gets played.
#[derive(Debug)]
pub struct Pocp<A> {
    learner: A,
    set: ConvexSet,
    calibration: NoiseCalibration,
    rng: ChaCha8Rng,
    output: DVector<f64>,
    noise_norm: f64,
}

impl<A: OnlineLearner> Pocp<A> {
    pub fn new(learner: A, set: ConvexSet, calibration: NoiseCalibration, rng: ChaCha8Rng) -> Result<Self> {
        if !set.is_bounded() {
            return Err(Error::UnboundedSet);
        }
        if learner.dim() != set.dim() {
            return Err(Error::DimensionMismatch { expected: set.dim(), found: learner.dim() });
        }
        let output = set.project(learner.iterate())?;
        Ok(Self { learner, set, calibration, rng, output, noise_norm: 0.0 })
    }

    pub fn seeded(learner: A, set: ConvexSet, calibration: NoiseCalibration, seed: u64) -> Result<Self> {
        Self::new(learner, set, calibration, ChaCha8Rng::seed_from_u64(seed))
    }

    /// The private point `x̂_t` to play.
    pub fn output(&self) -> &DVector<f64> {
        &self.output
    }

    /// Norm of the noise added to produce the current output.
    pub fn noise_norm(&self) -> f64 {
        self.noise_norm
    }

    pub fn learner(&self) -> &A {
        &self.learner
    }

    pub fn calibration(&self) -> &NoiseCalibration {
        &self.calibration
    }

    /// Consumes `f_t`, updates the clean iterate to `x_{t+1}` and returns
    /// `x̂_{t+1} = P_C(x_{t+1} + b)` with `b ∼ N(0, (β/t)²𝕀)`.
    pub fn step(&mut self, loss: &SharedLoss) -> Result<&DVector<f64>> {
        let t = self.learner.round();
        self.learner.observe(loss)?;
        if self.learner.in_burn_in() {
            self.output = self.learner.iterate().clone();
            self.noise_norm = 0.0;
        } else {
            let b = self.calibration.sample(t, self.set.dim(), &mut self.rng);
            self.noise_norm = b.norm();
            self.output = self.set.project(&(self.learner.iterate() + b))?;
        }
        Ok(&self.output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Igd;
    use crate::loss::LinearLoss;

    fn losses() -> Vec<SharedLoss> {
        (0..8)
            .map(|i| {
                let v = DVector::from_row_slice(&[(i as f64).sin(), (i as f64).cos()]);
                LinearLoss::quadratic(0.3, v, 1.0).unwrap().shared()
            })
            .collect()
    }

    #[test]
    fn zero_noise_follows_learner() {
        let set = ConvexSet::origin_ball(2, 1.0).unwrap();
        let mut p = Pocp::seeded(Igd::new(set.clone(), 1.0, DVector::zeros(2)).unwrap(), set.clone(), NoiseCalibration::zero(), 1).unwrap();
        let mut plain = Igd::new(set, 1.0, DVector::zeros(2)).unwrap();
        for f in losses() {
            p.step(&f).unwrap();
            plain.observe(&f).unwrap();
            assert_eq!(p.output(), plain.iterate());
            assert_eq!(p.noise_norm(), 0.0);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let set = ConvexSet::origin_ball(2, 1.0).unwrap();
        let cal = NoiseCalibration::zero().with_beta(0.7);
        let run = || {
            let mut p = Pocp::seeded(Igd::new(set.clone(), 1.0, DVector::zeros(2)).unwrap(), set.clone(), cal, 9).unwrap();
            losses().iter().map(|f| p.step(f).unwrap().clone()).collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().all(|x| set.contains(x)));
    }

    #[test]
    fn requires_bounded_set() {
        let set = ConvexSet::all_space(2).unwrap();
        let igd = Igd::new(set.clone(), 1.0, DVector::zeros(2)).unwrap();
        assert_eq!(Pocp::seeded(igd, set, NoiseCalibration::zero(), 0).unwrap_err(), Error::UnboundedSet);
    }
}
