//! `key = value` configuration files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{invalid, HarnessError, Result};

/// Parsed `key = value` pairs. Blank lines and `#` comments are skipped;
/// duplicate keys are rejected.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected 'key = value'", n + 1)))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(invalid(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(invalid(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path.display().to_string()))?;
        Self::parse(&text)
    }

    /// Rejects any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(invalid(format!("unknown key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| invalid(format!("{key} = {v}: {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Igd,
    Pigd,
    Giga,
    Pgiga,
    Ftl,
    Pftl,
    Qftl,
    Pqftl,
    Pol,
}

impl Algo {
    pub fn is_private(&self) -> bool {
        matches!(self, Algo::Pigd | Algo::Pgiga | Algo::Pftl | Algo::Pqftl | Algo::Pol)
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "igd" => Algo::Igd,
            "pigd" => Algo::Pigd,
            "giga" => Algo::Giga,
            "pgiga" => Algo::Pgiga,
            "ftl" => Algo::Ftl,
            "pftl" => Algo::Pftl,
            "qftl" => Algo::Qftl,
            "pqftl" => Algo::Pqftl,
            "pol" => Algo::Pol,
            other => return Err(format!("unknown algorithm '{other}'")),
        })
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algo::Igd => "igd",
            Algo::Pigd => "pigd",
            Algo::Giga => "giga",
            Algo::Pgiga => "pgiga",
            Algo::Ftl => "ftl",
            Algo::Pftl => "pftl",
            Algo::Qftl => "qftl",
            Algo::Pqftl => "pqftl",
            Algo::Pol => "pol",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Quadratic,
    Logistic,
    Hinge,
}

impl LossKind {
    pub fn is_classification(&self) -> bool {
        !matches!(self, LossKind::Quadratic)
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quadratic" => Ok(LossKind::Quadratic),
            "logistic" => Ok(LossKind::Logistic),
            "hinge" => Ok(LossKind::Hinge),
            other => Err(format!("unknown loss '{other}'")),
        }
    }
}

/// Feasible set as written in a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    /// Ball of radius ten times an estimate of the optimum's norm.
    Auto,
    Ball(f64),
    Box(f64, f64),
    All,
}

impl FromStr for SetSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |x: &str| x.parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        match parts.as_slice() {
            ["auto"] => Ok(SetSpec::Auto),
            ["all"] => Ok(SetSpec::All),
            ["ball", r] => Ok(SetSpec::Ball(num(r)?)),
            ["box", lo, hi] => Ok(SetSpec::Box(num(lo)?, num(hi)?)),
            _ => Err(format!("expected auto, all, ball:<radius> or box:<lo>:<hi>, got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic,
    /// Dataset CSV with header `y,v1,...,vd`.
    Csv(PathBuf),
    /// Raw forest cover type file: 54 features then the class in 1..=7.
    Covertype(PathBuf),
    /// Raw year prediction file: the target first, then the features.
    YearPrediction(PathBuf),
}

impl FromStr for DataSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "synthetic" || s == "synthetic-linreg" {
            return Ok(DataSource::Synthetic);
        }
        match s.split_once(':') {
            Some(("csv", p)) => Ok(DataSource::Csv(PathBuf::from(p.trim()))),
            Some(("covertype", p)) => Ok(DataSource::Covertype(PathBuf::from(p.trim()))),
            Some(("yearpred", p)) => Ok(DataSource::YearPrediction(PathBuf::from(p.trim()))),
            _ => Ok(DataSource::Csv(PathBuf::from(s))),
        }
    }
}

/// Parameters of the synthetic linear-regression stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub horizon: usize,
    /// Bound on `‖v_t‖` and `|y_t|`.
    pub bound: f64,
    pub xstar_norm: f64,
    /// Fixed optimum; drawn per seed when absent.
    pub xstar: Option<Vec<f64>>,
    pub noise_std: f64,
    /// Every feature equal to this value instead of Gaussian draws.
    pub constant_feature: Option<f64>,
}

pub const DEFAULT_BOUND: f64 = 0.01;

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 10,
            horizon: 100_000,
            bound: DEFAULT_BOUND,
            xstar_norm: 1.0,
            xstar: None,
            noise_std: 0.01,
            constant_feature: None,
        }
    }
}

const SPEC_KEYS: &[&str] = &["dim", "T", "R", "xstar_norm", "xstar", "noise_std", "features"];

impl SyntheticSpec {
    pub fn from_keys(kv: &KeyValues) -> Result<Self> {
        kv.check_keys(SPEC_KEYS)?;
        Self::from_shared_keys(kv)
    }

    fn from_shared_keys(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let xstar = kv
            .raw("xstar")
            .map(|s| {
                s.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| invalid(format!("xstar: {e}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        let constant_feature = match kv.raw("features") {
            None | Some("gaussian") => None,
            Some(s) => match s.split_once(':') {
                Some(("constant", c)) => Some(c.trim().parse::<f64>().map_err(|e| invalid(format!("features: {e}")))?),
                _ => return Err(invalid(format!("features must be gaussian or constant:<value>, got '{s}'"))),
            },
        };
        let spec = Self {
            dim: kv.get_or("dim", xstar.as_ref().map_or(d.dim, Vec::len))?,
            horizon: kv.get_or("T", d.horizon)?,
            bound: kv.get_or("R", d.bound)?,
            xstar_norm: kv.get_or("xstar_norm", d.xstar_norm)?,
            xstar,
            noise_std: kv.get_or("noise_std", d.noise_std)?,
            constant_feature,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.horizon == 0 {
            return Err(invalid("dim and T must be positive"));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(invalid(format!("R must be positive, got {}", self.bound)));
        }
        if !(self.noise_std >= 0.0 && self.xstar_norm >= 0.0) {
            return Err(invalid("noise_std and xstar_norm must be non-negative"));
        }
        if let Some(x) = &self.xstar {
            if x.len() != self.dim {
                return Err(invalid(format!("xstar has {} entries but dim = {}", x.len(), self.dim)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub horizon: usize,
    /// Explicit `T`; caps the number of training rows read from files.
    pub row_limit: Option<usize>,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub trials: usize,
    pub set: SetSpec,
    pub data: DataSource,
    pub loss: LossKind,
    pub synthetic: SyntheticSpec,
    /// Runs private algorithms with all noise switched off.
    pub zero_noise: bool,
    pub test_fraction: f64,
    /// Offline learner: generalisation target and Lipschitz bound.
    pub eps_g: f64,
    pub lipschitz: Option<f64>,
    pub output: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "algo",
    "T",
    "dim",
    "eps",
    "delta",
    "alpha",
    "R",
    "seed",
    "trials",
    "set",
    "data",
    "loss",
    "xstar_norm",
    "xstar",
    "noise_std",
    "features",
    "zero_noise",
    "test_fraction",
    "eps_g",
    "lipschitz",
    "output",
];

impl ExperimentConfig {
    pub fn from_keys(kv: &KeyValues) -> Result<Self> {
        kv.check_keys(CONFIG_KEYS)?;
        let algo: Algo = kv.get("algo")?.ok_or_else(|| invalid("missing key 'algo'"))?;
        let synthetic = SyntheticSpec::from_shared_keys(kv)?;
        let config = Self {
            algo,
            horizon: synthetic.horizon,
            row_limit: kv.get("T")?,
            eps: kv.get_or("eps", 1.0)?,
            delta: kv.get_or("delta", 0.01)?,
            alpha: kv.get_or("alpha", 1.0)?,
            seed: kv.get_or("seed", 0)?,
            trials: kv.get_or("trials", 1)?,
            set: kv.get_or("set", SetSpec::Auto)?,
            data: kv.get_or("data", DataSource::Synthetic)?,
            loss: kv.get_or("loss", LossKind::Quadratic)?,
            synthetic,
            zero_noise: kv.get_or("zero_noise", false)?,
            test_fraction: kv.get_or("test_fraction", 0.1)?,
            eps_g: kv.get_or("eps_g", 0.1)?,
            lipschitz: kv.get("lipschitz")?,
            output: kv.get("output")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_keys(&KeyValues::read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("eps", self.eps), ("alpha", self.alpha), ("eps_g", self.eps_g)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(invalid(format!("test_fraction must lie in [0, 1), got {}", self.test_fraction)));
        }
        if self.algo.is_private() {
            let max_delta = if matches!(self.algo, Algo::Pqftl | Algo::Pol) {
                1.0
            } else {
                dp_ocp_core::privacy::max_delta()
            };
            if !(self.delta > 0.0 && self.delta < max_delta) {
                return Err(invalid(format!("delta must lie in (0, {max_delta:.6}), got {}", self.delta)));
            }
        }
        let min_horizon = if self.algo == Algo::Pqftl { 4 } else { 2 };
        if self.horizon < min_horizon {
            return Err(invalid(format!("T must be >= {min_horizon}, got {}", self.horizon)));
        }
        if matches!(self.algo, Algo::Qftl | Algo::Pqftl) && self.loss != LossKind::Quadratic {
            return Err(invalid(format!("{} requires loss = quadratic", self.algo)));
        }
        if matches!(self.algo, Algo::Pigd | Algo::Pgiga | Algo::Pftl) && self.set == SetSpec::All {
            return Err(invalid(format!("{} requires a bounded set", self.algo)));
        }
        if self.loss == LossKind::Hinge && !matches!(self.algo, Algo::Igd | Algo::Pigd | Algo::Pol) {
            return Err(invalid("hinge loss is only supported by igd, pigd and pol"));
        }
        match self.set {
            SetSpec::Ball(r) if !(r > 0.0 && r.is_finite()) => return Err(invalid("ball radius must be positive")),
            SetSpec::Box(lo, hi) if !(lo <= hi && lo.is_finite() && hi.is_finite()) => {
                return Err(invalid("box requires finite lo <= hi"))
            }
            _ => {}
        }
        if let Some(l) = self.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                return Err(invalid("lipschitz must be positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_defaults() {
        let kv = KeyValues::parse("# experiment\nalgo = pqftl   # private\nT = 64\n\neps=0.5\n").unwrap();
        let c = ExperimentConfig::from_keys(&kv).unwrap();
        assert_eq!(c.algo, Algo::Pqftl);
        assert_eq!(c.horizon, 64);
        assert_eq!(c.eps, 0.5);
        assert_eq!(c.synthetic.dim, 10);
        assert_eq!(c.set, SetSpec::Auto);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let kv = KeyValues::parse("algo = igd\ncolour = blue\n").unwrap();
        assert!(matches!(ExperimentConfig::from_keys(&kv), Err(HarnessError::Validation(_))));
        assert!(KeyValues::parse("T = 1\nT = 2\n").is_err());
        assert!(KeyValues::parse("just words\n").is_err());
    }

    #[test]
    fn validates_preconditions() {
        let bad = [
            "algo = pigd\ndelta = 0.5\n",
            "algo = pqftl\nloss = logistic\n",
            "algo = pigd\nset = all\n",
            "algo = igd\nalpha = 0\n",
            "algo = pqftl\nT = 3\n",
            "algo = igd\nset = ball:-1\n",
        ];
        for text in bad {
            let kv = KeyValues::parse(text).unwrap();
            assert!(ExperimentConfig::from_keys(&kv).is_err(), "{text}");
        }
    }

    #[test]
    fn parses_sets_and_sources() {
        assert_eq!("ball:2.5".parse::<SetSpec>().unwrap(), SetSpec::Ball(2.5));
        assert_eq!("box:-1:1".parse::<SetSpec>().unwrap(), SetSpec::Box(-1.0, 1.0));
        assert!("sphere".parse::<SetSpec>().is_err());
        assert_eq!("covertype:/tmp/c.data".parse::<DataSource>().unwrap(), DataSource::Covertype("/tmp/c.data".into()));
        assert_eq!("data.csv".parse::<DataSource>().unwrap(), DataSource::Csv("data.csv".into()));
    }
}
