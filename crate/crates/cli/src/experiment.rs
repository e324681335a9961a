//! Experiment orchestration: data, learner dispatch, trial averaging and
//! trace output.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dp_ocp_core::learners::{Ftl, Giga, Igd, Qftl};
use dp_ocp_core::offline::{pol_run, PolConfig};
use dp_ocp_core::pqftl::{pqftl_run, PqftlConfig};
use dp_ocp_core::privacy::{run_private, LossConstants, RunOptions};
use dp_ocp_core::regret::hindsight_optimum;
use dp_ocp_core::{ConvexSet, LearnerKind, LearnerTrace, LinearLoss, OnlineLearner, PrivacyBudget, SharedLoss};

use crate::config::{Algo, DataSource, ExperimentConfig, LossKind, SetSpec};
use crate::data::{fmt_float, gen_synthetic, load_covertype, load_year_prediction, Dataset};
use crate::error::{invalid, HarnessError, Result};

/// Relative slack when checking a dataset against the declared bound `R`.
const BOUND_SLACK: f64 = 1e-9;

pub const TRACE_HEADER: &str = "t,cost_private,cost_nonprivate,noise_norm,cum_regret_private,cum_regret_nonprivate";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub cost_private: f64,
    pub cost_nonprivate: f64,
    pub noise_norm: f64,
    pub cum_regret_private: f64,
    pub cum_regret_nonprivate: f64,
}

impl TraceRow {
    fn from_trace(trace: &LearnerTrace) -> Vec<TraceRow> {
        trace
            .steps
            .iter()
            .map(|s| TraceRow {
                t: s.t,
                cost_private: s.cost_private,
                cost_nonprivate: s.cost_nonprivate,
                noise_norm: s.noise_norm,
                cum_regret_private: s.cum_regret_private(),
                cum_regret_nonprivate: s.cum_regret_nonprivate(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub rows: Vec<TraceRow>,
    pub final_point: DVector<f64>,
    pub avg_regret_private: f64,
    pub avg_regret_nonprivate: f64,
    pub mean_noise_norm: f64,
    pub accuracy: Option<f64>,
    /// Private quadratic learner only: steps whose noisy system had smallest
    /// eigenvalue below α/2, and steps that needed eigenvalue clamping.
    pub ill_conditioned: Option<usize>,
    pub clamped: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algo: Algo,
    pub trials: usize,
    pub horizon: usize,
    pub avg_regret_private: f64,
    pub avg_regret_nonprivate: f64,
    pub mean_noise_norm: f64,
    pub accuracy: Option<f64>,
    pub ill_conditioned: Option<f64>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "summary algo={} trials={} T={} avg_regret_private={} avg_regret_nonprivate={} mean_noise_norm={}",
            self.algo,
            self.trials,
            self.horizon,
            fmt_float(self.avg_regret_private),
            fmt_float(self.avg_regret_nonprivate),
            fmt_float(self.mean_noise_norm)
        )?;
        if let Some(a) = self.accuracy {
            write!(f, " accuracy={a:.4}")?;
        }
        if let Some(n) = self.ill_conditioned {
            write!(f, " ill_conditioned_steps={n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Per-step columns averaged over trials.
    pub rows: Vec<TraceRow>,
    pub trials: Vec<TrialResult>,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn write_trace<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_trace(&self.rows, out)
    }
}

pub fn write_trace<W: Write>(rows: &[TraceRow], out: W) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            fmt_float(r.cost_private),
            fmt_float(r.cost_nonprivate),
            fmt_float(r.noise_norm),
            fmt_float(r.cum_regret_private),
            fmt_float(r.cum_regret_nonprivate)
        )?;
    }
    out.flush()
}

pub fn write_trace_file(rows: &[TraceRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(HarnessError::io(path.display().to_string()))?;
    write_trace(rows, file).map_err(HarnessError::io(path.display().to_string()))
}

/// Training stream and optional held-out set for one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub train: Dataset,
    pub test: Option<Dataset>,
    /// Norm of the generating optimum when known.
    pub xstar_norm: Option<f64>,
}

fn trial_seed(config: &ExperimentConfig, trial: usize) -> u64 {
    config.seed.wrapping_add(trial as u64)
}

/// Loads file data once; synthetic data is drawn per trial instead.
fn load_file_data(config: &ExperimentConfig) -> Result<Option<TrialData>> {
    let bound = config.synthetic.bound;
    let data = match &config.data {
        DataSource::Synthetic => return Ok(None),
        DataSource::Csv(p) => Dataset::read_csv(p)?,
        DataSource::Covertype(p) => load_covertype(p, bound)?,
        DataSource::YearPrediction(p) => load_year_prediction(p, bound)?,
    };
    let (mut train, test) = if config.loss.is_classification() && config.test_fraction > 0.0 {
        let (train, test) = data.split(config.test_fraction, config.seed);
        (train, Some(test))
    } else {
        (data, None)
    };
    if let Some(n) = config.row_limit {
        train.truncate(n);
    }
    Ok(Some(TrialData { train, test, xstar_norm: None }))
}

fn synthetic_data(config: &ExperimentConfig, seed: u64) -> Result<TrialData> {
    let generated = gen_synthetic(&config.synthetic, seed)?;
    let xstar_norm = generated.xstar.norm();
    let (train, test) = if config.loss.is_classification() {
        let labelled = Dataset {
            ys: generated.data.ys.iter().map(|y| if *y >= 0.0 { 1.0 } else { -1.0 }).collect(),
            vs: generated.data.vs,
        };
        let (train, test) = labelled.split(config.test_fraction, seed);
        (train, (!test.is_empty()).then_some(test))
    } else {
        (generated.data, None)
    };
    Ok(TrialData { train, test, xstar_norm: Some(xstar_norm) })
}

pub fn build_losses(data: &Dataset, loss: LossKind, alpha: f64) -> Result<Vec<SharedLoss>> {
    data.ys
        .iter()
        .zip(&data.vs)
        .enumerate()
        .map(|(i, (y, v))| {
            let built = match loss {
                LossKind::Quadratic => LinearLoss::quadratic(*y, v.clone(), alpha),
                LossKind::Logistic => LinearLoss::logistic(*y, v.clone(), alpha),
                LossKind::Hinge => LinearLoss::hinge(*y, v.clone(), alpha),
            };
            built.map(LinearLoss::shared).map_err(|e| invalid(format!("row {}: {e}", i + 1)))
        })
        .collect()
}

/// Feasible set for a trial. `auto` is the ball of radius ten times the
/// optimum's norm: the generating one for synthetic data, otherwise that of
/// the unconstrained hindsight minimiser (radius 1 if that is degenerate).
pub fn resolve_set(spec: &SetSpec, dim: usize, losses: &[SharedLoss], xstar_norm: Option<f64>) -> Result<ConvexSet> {
    let set = match spec {
        SetSpec::All => ConvexSet::all_space(dim)?,
        SetSpec::Ball(r) => ConvexSet::origin_ball(dim, *r)?,
        SetSpec::Box(lo, hi) => ConvexSet::boxed(DVector::from_element(dim, *lo), DVector::from_element(dim, *hi))?,
        SetSpec::Auto => {
            let estimate = match xstar_norm {
                Some(n) => n,
                None => hindsight_optimum(losses, &ConvexSet::all_space(dim)?)
                    .map(|(x, _)| x.norm())
                    .unwrap_or(0.0),
            };
            let radius = if estimate > 1e-12 { 10.0 * estimate } else { 1.0 };
            ConvexSet::origin_ball(dim, radius)?
        }
    };
    Ok(set)
}

fn accuracy(x: &DVector<f64>, test: &Dataset) -> Option<f64> {
    if test.is_empty() {
        return None;
    }
    let correct = test
        .ys
        .iter()
        .zip(&test.vs)
        .filter(|(y, v)| (if v.dot(x) >= 0.0 { 1.0 } else { -1.0 }) == **y)
        .count();
    Some(correct as f64 / test.len() as f64)
}

fn check_bound(data: &Dataset, bound: f64, targets: bool) -> Result<()> {
    let (v, y) = data.max_norms();
    let limit = bound * (1.0 + BOUND_SLACK);
    if v > limit || (targets && y > limit) {
        return Err(invalid(format!(
            "dataset exceeds the declared bound R = {bound}: max |v| = {v}, max |y| = {y}"
        )));
    }
    Ok(())
}

/// Runs one trial of `config` on `data` with learner seed `seed`.
pub fn run_trial(config: &ExperimentConfig, data: &TrialData, seed: u64) -> Result<TrialResult> {
    let train = &data.train;
    if train.len() < 2 {
        return Err(invalid("need at least two training rows"));
    }
    let dim = train.dim();
    if let Some(x) = &config.synthetic.xstar {
        if x.len() != dim {
            return Err(invalid(format!("xstar has {} entries, data has dimension {dim}", x.len())));
        }
    }
    if config.loss.is_classification() && train.ys.iter().any(|y| y.abs() != 1.0) {
        return Err(invalid("classification losses need labels in {-1, +1}"));
    }
    let horizon = train.len();
    let learner_seed = seed ^ 0x00C0_FFEE_D00D_5EED;
    let noise_off = config.zero_noise.then_some(0.0);

    let mut ill_conditioned = None;
    let mut clamped = None;
    let trace = match config.algo {
        Algo::Pqftl => {
            check_bound(train, config.synthetic.bound, true)?;
            let mut pq = PqftlConfig::new(config.alpha, config.synthetic.bound, config.eps, config.delta, horizon);
            if config.zero_noise {
                pq.eps = None;
            }
            let run = pqftl_run(&train.pairs(), &pq, learner_seed)?;
            ill_conditioned = Some(run.ill_conditioned_steps(config.alpha));
            clamped = Some(run.solves.iter().filter(|s| s.clamped).count());
            run.trace
        }
        Algo::Pol => {
            let losses = build_losses(train, config.loss, 0.0)?;
            let xstar_norm = data.xstar_norm.unwrap_or(config.synthetic.xstar_norm);
            let base = match config.set {
                SetSpec::Auto => ConvexSet::all_space(dim)?,
                ref s => resolve_set(s, dim, &losses, Some(xstar_norm))?,
            };
            let mut pol = PolConfig {
                eps_p: config.eps,
                delta: config.delta,
                eps_g: config.eps_g,
                lipschitz: 1.0,
                xstar_norm,
            };
            let set = pol.feasible_set(&base)?;
            pol.lipschitz = match config.lipschitz {
                Some(l) => l,
                None => LossConstants::declared(&losses, &set)?.lipschitz,
            };
            let out = pol_run(&losses, &set, &pol, learner_seed, noise_off)?;
            let mut trace = LearnerTrace::new();
            for f in &losses {
                trace.push(out.point.clone(), f.value(&out.point), f.value(&out.average), out.noise_norm);
            }
            trace.final_point = Some(out.point);
            trace.attach_hindsight(&losses, &set)?;
            trace
        }
        algo => {
            let losses = build_losses(train, config.loss, config.alpha)?;
            let set = if algo == Algo::Qftl {
                ConvexSet::all_space(dim)?
            } else {
                resolve_set(&config.set, dim, &losses, data.xstar_norm)?
            };
            let mut trace = match algo {
                Algo::Pigd | Algo::Pgiga | Algo::Pftl => {
                    let kind = match algo {
                        Algo::Pigd => LearnerKind::Igd,
                        Algo::Pgiga => LearnerKind::Giga,
                        _ => LearnerKind::Ftl,
                    };
                    let budget = PrivacyBudget::new(config.eps, config.delta, horizon)?;
                    let constants = LossConstants::declared(&losses, &set)?;
                    let options = RunOptions { seed: learner_seed, beta_override: noise_off, start: None };
                    run_private(kind, &losses, &set, &budget, &constants, &options)?
                }
                _ => run_nonprivate(algo, &losses, &set, config, learner_seed)?,
            };
            trace.attach_hindsight(&losses, &set)?;
            trace
        }
    };
    let steps = trace.len() as f64;
    let final_point = trace.final_point.clone().unwrap_or_else(|| DVector::zeros(dim));
    Ok(TrialResult {
        seed,
        avg_regret_private: trace.final_regret_private().unwrap_or(0.0) / steps,
        avg_regret_nonprivate: trace.final_regret_nonprivate().unwrap_or(0.0) / steps,
        mean_noise_norm: trace.mean_noise_norm(),
        accuracy: data.test.as_ref().and_then(|t| accuracy(&final_point, t)),
        rows: TraceRow::from_trace(&trace),
        final_point,
        ill_conditioned,
        clamped,
    })
}

fn run_nonprivate(
    algo: Algo,
    losses: &[SharedLoss],
    set: &ConvexSet,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<LearnerTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = set.dim();
    let alpha = config.alpha;
    let mut learner: Box<dyn OnlineLearner> = match algo {
        Algo::Igd => Box::new(Igd::new(set.clone(), alpha, set.sample(&mut rng)?)?),
        Algo::Ftl => Box::new(Ftl::new(set.clone(), alpha, set.sample(&mut rng)?)?),
        Algo::Giga => {
            let lg = LossConstants::declared(losses, set)?
                .grad_lipschitz
                .ok_or_else(|| invalid("giga needs smooth losses"))?;
            Box::new(Giga::new(set.clone(), alpha, lg, set.sample(&mut rng)?)?)
        }
        Algo::Qftl => {
            let start = ConvexSet::origin_ball(dim, 2.0 * config.synthetic.bound / alpha)?.sample(&mut rng)?;
            Box::new(Qftl::new(alpha, start)?)
        }
        other => unreachable!("{other} is private"),
    };
    let mut trace = LearnerTrace::new();
    for (i, f) in losses.iter().enumerate() {
        let x = learner.iterate().clone();
        let cost = f.value(&x);
        trace.push(x, cost, cost, 0.0);
        learner.observe(f).map_err(|source| HarnessError::Step { step: i + 1, source })?;
    }
    trace.final_point = Some(learner.iterate().clone());
    Ok(trace)
}

/// Runs every trial, in parallel, and averages the per-step columns.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let shared = load_file_data(config)?;
    let trials: Vec<TrialResult> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(config, trial);
            let data = match &shared {
                Some(d) => d.clone(),
                None => synthetic_data(config, seed)?,
            };
            let result = run_trial(config, &data, seed)?;
            log::info!(
                "trial {trial} seed {seed}: avg regret private {} non-private {}",
                result.avg_regret_private,
                result.avg_regret_nonprivate
            );
            Ok(result)
        })
        .collect::<Result<_>>()?;

    let horizon = trials[0].rows.len();
    let n = trials.len() as f64;
    let rows = (0..horizon)
        .map(|i| {
            let mean = |f: fn(&TraceRow) -> f64| trials.iter().map(|tr| f(&tr.rows[i])).sum::<f64>() / n;
            TraceRow {
                t: i + 1,
                cost_private: mean(|r| r.cost_private),
                cost_nonprivate: mean(|r| r.cost_nonprivate),
                noise_norm: mean(|r| r.noise_norm),
                cum_regret_private: mean(|r| r.cum_regret_private),
                cum_regret_nonprivate: mean(|r| r.cum_regret_nonprivate),
            }
        })
        .collect();
    let mean = |f: &dyn Fn(&TrialResult) -> f64| trials.iter().map(f).sum::<f64>() / n;
    let summary = Summary {
        algo: config.algo,
        trials: trials.len(),
        horizon,
        avg_regret_private: mean(&|t| t.avg_regret_private),
        avg_regret_nonprivate: mean(&|t| t.avg_regret_nonprivate),
        mean_noise_norm: mean(&|t| t.mean_noise_norm),
        accuracy: trials.iter().map(|t| t.accuracy).sum::<Option<f64>>().map(|a| a / n),
        ill_conditioned: trials.iter().map(|t| t.ill_conditioned.map(|c| c as f64)).sum::<Option<f64>>().map(|c| c / n),
    };
    Ok(ExperimentResult { rows, trials, summary })
}

/// Generates the synthetic stream of `config` for one seed; used by tests and
/// by the `gen` subcommand.
pub fn trial_data(config: &ExperimentConfig, seed: u64) -> Result<TrialData> {
    match load_file_data(config)? {
        Some(d) => Ok(d),
        None => synthetic_data(config, seed),
    }
}
