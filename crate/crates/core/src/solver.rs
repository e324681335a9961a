//! Inner solvers: proximal steps for single losses and minimisation of
//! cumulative objectives over a convex set.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};
use crate::loss::{LinearModel, Link, Loss, SharedLoss};
use crate::set::ConvexSet;

/// Stopping rule on successive iterates.
pub const INNER_TOLERANCE: f64 = 1e-10;
pub const MAX_INNER_ITERATIONS: usize = 10_000;

/// `argmin_{x∈C} ½‖x − center‖² + η·f(x)`.
///
/// Linear-model losses are solved through the scalar multiplier `s` of the
/// optimality condition `x = P_C(center/μ + s·v)`, μ = 1 + ηα, which is a
/// monotone root-finding problem. Other losses fall back to projected
/// gradient with step `1/(1 + η·L_G)`.
pub fn prox(loss: &dyn Loss, center: &DVector<f64>, eta: f64, set: &ConvexSet) -> Result<DVector<f64>> {
    check_dim(set.dim(), center.len())?;
    check_dim(set.dim(), loss.dim())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {eta}")));
    }
    match loss.linear_model() {
        Some(model) => linear_prox(&model, center, eta, set),
        None => {
            let lg = loss.gradient_lipschitz().ok_or(Error::NonSmooth)?;
            let step = 1.0 / (1.0 + eta * lg);
            let start = set.project(center)?;
            projected_gradient(|x| (x - center) + loss.gradient(x) * eta, set, start, step)
        }
    }
}

fn linear_prox(m: &LinearModel<'_>, center: &DVector<f64>, eta: f64, set: &ConvexSet) -> Result<DVector<f64>> {
    let mu = 1.0 + eta * m.alpha;
    let anchor = center / mu;
    let k = eta / mu;
    let v = m.v;
    let vn2 = v.norm_squared();
    if vn2 == 0.0 {
        return set.project(&anchor);
    }
    if let (Link::Squared { target }, ConvexSet::AllSpace { .. }) = (m.link, set) {
        let s = k * (target - v.dot(&anchor)) / (1.0 + k * vn2);
        return Ok(anchor + v * s);
    }

    let point = |s: f64| set.project(&(&anchor + v * s));
    let residual = |s: f64| -> Result<f64> { Ok(s + k * m.link.derivative(v.dot(&point(s)?))) };

    // residual(s) >= s + residual(0) for s >= 0 and <= s + residual(0) for
    // s <= 0, so the root lies between 0 and -residual(0).
    let r0 = residual(0.0)?;
    if r0 == 0.0 {
        return point(0.0);
    }
    let (mut lo, mut hi) = if r0 > 0.0 { (-r0, 0.0) } else { (0.0, -r0) };
    for _ in 0..2_000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    point(0.5 * (lo + hi))
}

/// Projected gradient with a fixed step, stopping once successive iterates
/// are within [`INNER_TOLERANCE`].
pub fn projected_gradient<G>(mut grad: G, set: &ConvexSet, start: DVector<f64>, step: f64) -> Result<DVector<f64>>
where
    G: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut x = start;
    for _ in 0..MAX_INNER_ITERATIONS {
        let next = set.project(&(&x - grad(&x) * step))?;
        let moved = (&next - &x).norm();
        x = next;
        if moved <= INNER_TOLERANCE {
            return Ok(x);
        }
        if !moved.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence { iterations: MAX_INNER_ITERATIONS })
}

/// `Σ_τ f_τ(x)` over every loss observed so far.
///
/// Squared-link losses are folded into `(V, u, Σy²)`, other linear-model
/// losses keep only their features and link, and anything else is stored as
/// is. Gradients of the squared part cost O(d²) regardless of the count.
#[derive(Debug, Clone)]
pub struct CumulativeObjective {
    dim: usize,
    count: usize,
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    target_sq: f64,
    ridge: f64,
    linear: Vec<(DVector<f64>, Link)>,
    generic: Vec<SharedLoss>,
    generic_strong_convexity: f64,
    generic_smoothness: f64,
    nonsmooth: bool,
}

impl CumulativeObjective {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            gram: DMatrix::zeros(dim, dim),
            moment: DVector::zeros(dim),
            target_sq: 0.0,
            ridge: 0.0,
            linear: Vec::new(),
            generic: Vec::new(),
            generic_strong_convexity: 0.0,
            generic_smoothness: 0.0,
            nonsmooth: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn add(&mut self, loss: &SharedLoss) -> Result<()> {
        check_dim(self.dim, loss.dim())?;
        match loss.linear_model() {
            Some(m) => {
                self.ridge += m.alpha;
                match m.link {
                    Link::Squared { target } => {
                        self.gram.ger(1.0, m.v, m.v, 1.0);
                        self.moment.axpy(target, m.v, 1.0);
                        self.target_sq += target * target;
                    }
                    link => {
                        if link.curvature_bound().is_none() {
                            self.nonsmooth = true;
                        }
                        self.linear.push((m.v.clone(), link));
                    }
                }
            }
            None => {
                match loss.gradient_lipschitz() {
                    Some(l) => self.generic_smoothness += l,
                    None => self.nonsmooth = true,
                }
                self.generic_strong_convexity += loss.strong_convexity();
                self.generic.push(loss.clone());
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let quad = 0.5 * x.dot(&(&self.gram * x)) - self.moment.dot(x) + 0.5 * self.target_sq;
        let linear: f64 = self.linear.iter().map(|(v, link)| link.value(v.dot(x))).sum();
        let generic: f64 = self.generic.iter().map(|f| f.value(x)).sum();
        quad + linear + generic + 0.5 * self.ridge * x.norm_squared()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = &self.gram * x - &self.moment + x * self.ridge;
        for (v, link) in &self.linear {
            g.axpy(link.derivative(v.dot(x)), v, 1.0);
        }
        for f in &self.generic {
            g += f.gradient(x);
        }
        g
    }

    /// Lipschitz constant of the gradient.
    pub fn smoothness(&self) -> f64 {
        let gram_top = if self.dim == 0 {
            0.0
        } else {
            SymmetricEigen::new(self.gram.clone()).eigenvalues.max().max(0.0)
        };
        let linear: f64 = self
            .linear
            .iter()
            .map(|(v, link)| link.curvature_bound().unwrap_or(0.0) * v.norm_squared())
            .sum();
        gram_top + linear + self.ridge + self.generic_smoothness
    }

    pub fn strong_convexity(&self) -> f64 {
        self.ridge + self.generic_strong_convexity
    }

    /// Minimiser over `set`, warm-started from `start`.
    pub fn minimize(&self, set: &ConvexSet, start: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, set.dim())?;
        if self.count == 0 {
            return Err(Error::EmptySequence);
        }
        if self.nonsmooth {
            return Err(Error::NonSmooth);
        }
        let smooth = self.smoothness();
        if !(smooth > 0.0) {
            return Err(Error::InvalidParameter("objective has zero curvature".into()));
        }
        let x0 = set.project(start)?;
        projected_gradient(|x| self.gradient(x), set, x0, 1.0 / smooth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LinearLoss;

    fn scalar(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn prox_unconstrained_quadratic() {
        // ½x² + ½(1 − x)² has stationarity x + (x − 1) = 0.
        let f = LinearLoss::quadratic(1.0, scalar(1.0), 0.0).unwrap();
        let x = prox(&f, &scalar(0.0), 1.0, &ConvexSet::all_space(1).unwrap()).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn prox_hits_box_boundary() {
        let f = LinearLoss::quadratic(1.0, scalar(1.0), 0.0).unwrap();
        let set = ConvexSet::boxed(scalar(0.0), scalar(0.3)).unwrap();
        let x = prox(&f, &scalar(0.0), 1.0, &set).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn vanishing_step_is_identity() {
        let f = LinearLoss::logistic(1.0, scalar(2.0), 1.0).unwrap();
        let set = ConvexSet::origin_ball(1, 1.0).unwrap();
        let x = prox(&f, &scalar(0.7), 1e-12, &set).unwrap();
        assert!((x[0] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn hinge_prox_lands_on_kink() {
        // ½(x − 0)² + max(0, 1 − x) with η = 10: unconstrained optimum of the
        // active branch would be x = 10 > 1, so the solution sits at x = 1.
        let f = LinearLoss::hinge(1.0, scalar(1.0), 0.0).unwrap();
        let x = prox(&f, &scalar(0.0), 10.0, &ConvexSet::origin_ball(1, 5.0).unwrap()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cumulative_matches_direct_sum() {
        let losses: Vec<SharedLoss> = vec![
            LinearLoss::quadratic(0.3, DVector::from_row_slice(&[1.0, 0.5]), 0.5).unwrap().shared(),
            LinearLoss::logistic(-1.0, DVector::from_row_slice(&[-0.2, 0.9]), 0.25).unwrap().shared(),
        ];
        let mut obj = CumulativeObjective::new(2);
        for f in &losses {
            obj.add(f).unwrap();
        }
        let x = DVector::from_row_slice(&[0.4, -1.1]);
        let direct: f64 = losses.iter().map(|f| f.value(&x)).sum();
        let grad = losses.iter().fold(DVector::zeros(2), |acc, f| acc + f.gradient(&x));
        assert!((obj.value(&x) - direct).abs() < 1e-12);
        assert!((obj.gradient(&x) - grad).norm() < 1e-12);
        assert_eq!(obj.strong_convexity(), 0.75);
    }

    #[test]
    fn empty_objective_is_rejected() {
        let obj = CumulativeObjective::new(2);
        assert_eq!(
            obj.minimize(&ConvexSet::all_space(2).unwrap(), &DVector::zeros(2)),
            Err(Error::EmptySequence)
        );
    }
}
