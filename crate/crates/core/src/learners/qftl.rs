use nalgebra::{DMatrix, DVector};

use super::{check_alpha, OnlineLearner};
use crate::error::{check_dim, Error, Result};
use crate::loss::{Link, SharedLoss};

/// `(tα𝕀 + V)⁻¹ u` by Cholesky factorisation of the symmetrised matrix.
pub fn qftl_update(v: &DMatrix<f64>, u: &DVector<f64>, t: usize, alpha: f64) -> Result<DVector<f64>> {
    check_alpha(alpha)?;
    if !v.is_square() {
        return Err(Error::InvalidParameter("V must be square".into()));
    }
    check_dim(v.nrows(), u.len())?;
    if t == 0 {
        return Err(Error::InvalidParameter("t must be >= 1".into()));
    }
    let mut m = (v + v.transpose()) * 0.5;
    for i in 0..m.nrows() {
        m[(i, i)] += t as f64 * alpha;
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Factorization("tαI + V is not positive definite".into()))?;
    Ok(chol.solve(u))
}

/// Follow the leader for `½(y − vᵀx)² + (α/2)‖x‖²`, in closed form.
#[derive(Debug, Clone)]
pub struct Qftl {
    alpha: f64,
    t: usize,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    x: DVector<f64>,
}

impl Qftl {
    pub fn new(alpha: f64, x1: DVector<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        let d = x1.len();
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self { alpha, t: 1, gram: DMatrix::zeros(d, d), moment: DVector::zeros(d), x: x1 })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }
}

/// Extracts `(y, v)` from a squared-link loss whose ridge equals `alpha`.
pub(crate) fn quadratic_parts(loss: &SharedLoss, alpha: f64) -> Result<(f64, DVector<f64>)> {
    match loss.linear_model() {
        Some(m) => match m.link {
            Link::Squared { target } if (m.alpha - alpha).abs() <= 1e-12 * alpha.max(1.0) => Ok((target, m.v.clone())),
            Link::Squared { .. } => Err(Error::InvalidParameter(format!(
                "quadratic loss has alpha {} but the learner uses {alpha}",
                m.alpha
            ))),
            _ => Err(Error::InvalidParameter("closed-form FTL requires quadratic losses".into())),
        },
        None => Err(Error::InvalidParameter("closed-form FTL requires quadratic losses".into())),
    }
}

impl OnlineLearner for Qftl {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn round(&self) -> usize {
        self.t
    }

    fn iterate(&self) -> &DVector<f64> {
        &self.x
    }

    fn observe(&mut self, loss: &SharedLoss) -> Result<()> {
        check_dim(self.dim(), loss.dim())?;
        let (y, v) = quadratic_parts(loss, self.alpha)?;
        self.gram.ger(1.0, &v, &v, 1.0);
        self.moment.axpy(y, &v, 1.0);
        self.x = qftl_update(&self.gram, &self.moment, self.t, self.alpha)?;
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LinearLoss;

    fn m1(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn spec_examples() {
        let one = DVector::from_element(1, 1.0);
        assert!((qftl_update(&m1(1.0), &one, 1, 1.0).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((qftl_update(&m1(2.0), &one, 2, 1.0).unwrap()[0] - 0.25).abs() < 1e-15);
        let zero = qftl_update(&DMatrix::identity(3, 3), &DVector::zeros(3), 4, 1.0).unwrap();
        assert_eq!(zero, DVector::zeros(3));
    }

    #[test]
    fn rejects_non_quadratic_and_mismatched_alpha() {
        let mut q = Qftl::new(1.0, DVector::zeros(1)).unwrap();
        let logistic = LinearLoss::logistic(1.0, DVector::from_element(1, 1.0), 1.0).unwrap().shared();
        assert!(q.observe(&logistic).is_err());
        let other = LinearLoss::quadratic(1.0, DVector::from_element(1, 1.0), 2.0).unwrap().shared();
        assert!(q.observe(&other).is_err());
    }

    #[test]
    fn residual_and_norm_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (r, alpha) = (0.8, 0.5);
        for _ in 0..20 {
            let mut q = Qftl::new(alpha, DVector::zeros(3)).unwrap();
            for t in 1..=30 {
                let v = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
                let v = if v.norm() > r { &v * (r / v.norm()) } else { v };
                let y = rng.random_range(-r..r);
                q.observe(&LinearLoss::quadratic(y, v, alpha).unwrap().shared()).unwrap();
                let mut m = q.gram().clone();
                for i in 0..3 {
                    m[(i, i)] += t as f64 * alpha;
                }
                let res = (&m * q.iterate() - q.moment()).norm();
                assert!(res <= 1e-9 * (1.0 + q.moment().norm()));
                assert!(q.iterate().norm() <= 2.0 * r / alpha);
            }
        }
    }
}
