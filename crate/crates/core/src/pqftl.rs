//! Private follow-the-leader for quadratic losses
//! `f_t(x) = ½(y_t − v_tᵀx)² + (α/2)‖x‖²`.
//!
//! The sums `V_t = Σ v vᵀ` and `u_t = Σ y v` are released through two sum
//! trees, each with half of the budget, and the played point is the
//! closed-form leader computed from those noisy sums alone.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::learners::{qftl_update, OnlineLearner, Qftl};
use crate::loss::{LinearLoss, SharedLoss};
use crate::set::ConvexSet;
use crate::trace::LearnerTrace;
use crate::treesum::{flatten, reshape, symmetrize, tree_sigma, Retention, SumTree};

/// Eigenvalue floor, relative to `tα`, used when the noisy system is not
/// positive definite.
pub const EIGEN_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PqftlConfig {
    pub alpha: f64,
    /// Bound on `‖v_t‖` and `|y_t|`.
    pub bound: f64,
    /// Total privacy budget; `None` runs both trees without noise.
    pub eps: Option<f64>,
    pub delta: f64,
    pub horizon: usize,
    /// Norm bound declared for the `y v` tree; defaults to `R²`.
    pub moment_bound: Option<f64>,
    pub retention: Retention,
}

impl PqftlConfig {
    pub fn new(alpha: f64, bound: f64, eps: f64, delta: f64, horizon: usize) -> Self {
        Self { alpha, bound, eps: Some(eps), delta, horizon, moment_bound: None, retention: Retention::Frontier }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::InvalidParameter(format!("R must be positive, got {}", self.bound)));
        }
        if self.horizon < 4 {
            return Err(Error::InvalidParameter(format!("horizon must be >= 4, got {}", self.horizon)));
        }
        Ok(())
    }
}

/// Per-step solve diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    /// Smallest eigenvalue of the symmetrised `tα𝕀 + V̂_t`.
    pub min_eigenvalue: f64,
    /// Whether eigenvalues had to be clamped.
    pub clamped: bool,
    pub point_norm: f64,
}

#[derive(Debug, Clone)]
pub struct PqftlState {
    config: PqftlConfig,
    dim: usize,
    t: usize,
    gram_tree: SumTree,
    moment_tree: SumTree,
    rng: ChaCha8Rng,
    point: DVector<f64>,
    /// Noise-free mode solves from exact running sums, so its points match
    /// the non-private learner bit for bit.
    exact: Option<Qftl>,
}

impl PqftlState {
    pub fn new(config: PqftlConfig, dim: usize, start: DVector<f64>, seed: u64) -> Result<Self> {
        config.validate()?;
        check_dim(dim, start.len())?;
        let r2 = config.bound * config.bound;
        let moment_bound = config.moment_bound.unwrap_or(r2);
        let (sigma_gram, sigma_moment) = match config.eps {
            Some(eps) => (
                tree_sigma(r2, eps / 2.0, config.delta / 2.0, config.horizon)?,
                tree_sigma(moment_bound, eps / 2.0, config.delta / 2.0, config.horizon)?,
            ),
            None => (0.0, 0.0),
        };
        let gram_tree = SumTree::new(config.horizon, dim * dim, sigma_gram, r2, config.retention)?;
        let moment_tree = SumTree::new(config.horizon, dim, sigma_moment, moment_bound, config.retention)?;
        let exact = match config.eps {
            Some(_) => None,
            None => Some(Qftl::new(config.alpha, start.clone())?),
        };
        Ok(Self {
            config,
            dim,
            t: 1,
            gram_tree,
            moment_tree,
            rng: ChaCha8Rng::seed_from_u64(seed),
            point: start,
            exact,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn round(&self) -> usize {
        self.t
    }

    /// The private point `x̂_t`.
    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    pub fn gram_tree(&self) -> &SumTree {
        &self.gram_tree
    }

    pub fn moment_tree(&self) -> &SumTree {
        &self.moment_tree
    }

    /// Consumes `(y_t, v_t)` and moves to `x̂_{t+1} = (tα𝕀 + V̂_t)⁻¹ û_t`.
    pub fn step(&mut self, y: f64, v: &DVector<f64>) -> Result<SolveInfo> {
        check_dim(self.dim, v.len())?;
        let r = self.config.bound * (1.0 + 1e-12);
        if v.norm() > r {
            return Err(Error::NormBound { norm: v.norm(), bound: self.config.bound });
        }
        if y.abs() > r {
            return Err(Error::NormBound { norm: y.abs(), bound: self.config.bound });
        }
        let outer = v * v.transpose();
        let gram = self.gram_tree.insert(&flatten(&outer)?, &mut self.rng)?.value;
        let moment = self.moment_tree.insert(&(v * y), &mut self.rng)?.value;
        let alpha = self.config.alpha;
        let (x, info) = match &mut self.exact {
            Some(q) => {
                q.observe(&LinearLoss::quadratic(y, v.clone(), alpha)?.shared())?;
                let m = symmetrize(q.gram()) + DMatrix::identity(self.dim, self.dim) * (self.t as f64 * alpha);
                let min_eigenvalue = SymmetricEigen::new(m).eigenvalues.min();
                let x = q.iterate().clone();
                let point_norm = x.norm();
                (x, SolveInfo { min_eigenvalue, clamped: false, point_norm })
            }
            None => noisy_leader(&reshape(&gram, self.dim)?, &moment, self.t, alpha)?,
        };
        self.point = x;
        self.t += 1;
        Ok(info)
    }
}

/// Solves `(tα𝕀 + sym(V̂)) x = û`, clamping eigenvalues at `EIGEN_FLOOR·tα`
/// when the Cholesky factorisation fails.
pub fn noisy_leader(gram: &DMatrix<f64>, moment: &DVector<f64>, t: usize, alpha: f64) -> Result<(DVector<f64>, SolveInfo)> {
    let d = moment.len();
    let shift = t as f64 * alpha;
    let m = symmetrize(gram) + DMatrix::identity(d, d) * shift;
    let eig = SymmetricEigen::new(m.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    let (x, clamped) = match m.cholesky() {
        Some(chol) => (chol.solve(moment), false),
        None => {
            let floor = EIGEN_FLOOR * shift;
            let inv = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
            let q = &eig.eigenvectors;
            let x = q * (q.transpose() * moment).component_mul(&inv);
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::Factorization("noisy system could not be solved".into()));
            }
            (x, true)
        }
    };
    let point_norm = x.norm();
    Ok((x, SolveInfo { min_eigenvalue, clamped, point_norm }))
}

#[derive(Debug, Clone)]
pub struct PqftlRun {
    pub trace: LearnerTrace,
    pub solves: Vec<SolveInfo>,
}

impl PqftlRun {
    /// Steps whose system had smallest eigenvalue below `α/2`.
    pub fn ill_conditioned_steps(&self, alpha: f64) -> usize {
        self.solves.iter().filter(|s| s.min_eigenvalue < alpha / 2.0).count()
    }
}

/// Runs the private learner over `(y_t, v_t)` pairs together with its
/// non-private counterpart. Both start from the same point, drawn from the
/// ball of radius `2R/α` that contains every non-private iterate.
pub fn pqftl_run(stream: &[(f64, DVector<f64>)], config: &PqftlConfig, seed: u64) -> Result<PqftlRun> {
    config.validate()?;
    let (_, first) = stream.first().ok_or(Error::EmptySequence)?;
    let dim = first.len();
    if stream.len() > config.horizon {
        return Err(Error::InvalidParameter(format!(
            "stream has {} items but the horizon is {}",
            stream.len(),
            config.horizon
        )));
    }
    let mut start_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A_0F0F_F0F0);
    let start = ConvexSet::origin_ball(dim, 2.0 * config.bound / config.alpha)?.sample(&mut start_rng)?;
    let mut private = PqftlState::new(config.clone(), dim, start.clone(), seed)?;
    let mut clean = Qftl::new(config.alpha, start)?;
    let mut trace = LearnerTrace::new();
    let mut solves = Vec::with_capacity(stream.len());
    let mut losses: Vec<SharedLoss> = Vec::with_capacity(stream.len());
    for (t, (y, v)) in stream.iter().enumerate() {
        let f = LinearLoss::quadratic(*y, v.clone(), config.alpha)?.shared();
        let played = private.point().clone();
        let deviation = (&played - clean.iterate()).norm();
        trace.push(played.clone(), f.value(&played), f.value(clean.iterate()), deviation);
        solves.push(private.step(*y, v).map_err(|e| step_error(t, e))?);
        clean.observe(&f).map_err(|e| step_error(t, e))?;
        losses.push(f);
    }
    trace.final_point = Some(private.point().clone());
    trace.attach_hindsight(&losses, &ConvexSet::all_space(dim)?)?;
    Ok(PqftlRun { trace, solves })
}

fn step_error(t: usize, e: Error) -> Error {
    log::error!("step {}: {e}", t + 1);
    e
}

/// Non-private closed-form leader, re-exported for oracle comparisons.
pub fn exact_leader(gram: &DMatrix<f64>, moment: &DVector<f64>, t: usize, alpha: f64) -> Result<DVector<f64>> {
    qftl_update(gram, moment, t, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn stream(n: usize, d: usize, r: f64, seed: u64) -> Vec<(f64, DVector<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                let v = if v.norm() > r { &v * (r / v.norm()) } else { v };
                (rng.random_range(-r..r), v)
            })
            .collect()
    }

    #[test]
    fn one_step_scalar() {
        let cfg = PqftlConfig { eps: None, ..PqftlConfig::new(1.0, 1.0, 1.0, 0.1, 4) };
        let mut s = PqftlState::new(cfg, 1, DVector::zeros(1), 0).unwrap();
        s.step(1.0, &DVector::from_element(1, 1.0)).unwrap();
        assert!((s.point()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_matches_closed_form() {
        let data = stream(40, 3, 1.0, 1);
        let cfg = PqftlConfig { eps: None, ..PqftlConfig::new(0.5, 1.0, 1.0, 0.1, 40) };
        let run = pqftl_run(&data, &cfg, 7).unwrap();
        for s in &run.trace.steps {
            assert!((s.cost_private - s.cost_nonprivate).abs() <= 1e-9 * (1.0 + s.cost_nonprivate));
            assert!(s.noise_norm < 1e-9);
        }
        assert!(run.solves.iter().all(|s| !s.clamped));
    }

    #[test]
    fn noisy_point_recomputes_from_dump() {
        let cfg = PqftlConfig { retention: Retention::Full, ..PqftlConfig::new(1.0, 1.0, 1.0, 0.1, 8) };
        let mut s = PqftlState::new(cfg, 1, DVector::zeros(1), 3).unwrap();
        let data = stream(6, 1, 1.0, 2);
        for (t, (y, v)) in data.iter().enumerate() {
            s.step(*y, v).unwrap();
            let t = t + 1;
            let noisy_sum = |tree: &SumTree| -> f64 {
                let wanted: Vec<String> = tree.decomposition(t).iter().map(|id| id.label()).collect();
                tree.dump()
                    .lines()
                    .filter_map(|line| {
                        let f: Vec<&str> = line.split(',').collect();
                        wanted.contains(&f[0].to_string()).then(|| f[2].parse::<f64>().unwrap())
                    })
                    .sum()
            };
            let a = noisy_sum(s.gram_tree());
            let b = noisy_sum(s.moment_tree());
            let expect = b / (t as f64 + a).max(EIGEN_FLOOR * t as f64);
            assert!((s.point()[0] - expect).abs() <= 1e-12 * (1.0 + expect.abs()), "{} vs {expect}", s.point()[0]);
        }
    }

    #[test]
    fn clamps_indefinite_systems() {
        let gram = DMatrix::from_row_slice(2, 2, &[-5.0, 0.0, 0.0, 1.0]);
        let (x, info) = noisy_leader(&gram, &DVector::from_row_slice(&[1.0, 1.0]), 1, 1.0).unwrap();
        assert!(info.clamped);
        assert!(info.min_eigenvalue < 0.0);
        assert!((x[1] - 0.5).abs() < 1e-12);
        assert!((x[0] - 1e9).abs() < 1.0);
    }

    #[test]
    fn rejects_out_of_bound_data() {
        let mut s = PqftlState::new(PqftlConfig::new(1.0, 1.0, 1.0, 0.1, 8), 2, DVector::zeros(2), 0).unwrap();
        assert!(matches!(s.step(0.0, &DVector::from_element(2, 1.0)), Err(Error::NormBound { .. })));
        assert!(matches!(s.step(2.0, &DVector::zeros(2)), Err(Error::NormBound { .. })));
    }
}
