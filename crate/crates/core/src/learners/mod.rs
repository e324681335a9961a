//! Non-private online learners.
//!
//! A learner holds the point `x_t` it will play next. Observing `f_t`
//! advances it to `x_{t+1}`.

mod ftl;
mod giga;
mod igd;
mod qftl;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::loss::SharedLoss;

pub use ftl::{ftl_update, Ftl};
pub use giga::{burn_in_length, giga_update, Giga};
pub use igd::{igd_update, Igd};
pub use qftl::{qftl_update, Qftl};

pub trait OnlineLearner: Send + fmt::Debug {
    fn dim(&self) -> usize;

    /// Index `t` of the point currently held.
    fn round(&self) -> usize;

    /// The point `x_t` to play.
    fn iterate(&self) -> &DVector<f64>;

    /// Consumes `f_t` and moves to `x_{t+1}`.
    fn observe(&mut self, loss: &SharedLoss) -> Result<()>;

    /// Whether the held point was chosen independently of the data.
    fn in_burn_in(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    Igd,
    Giga,
    Ftl,
    Qftl,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Igd => "igd",
            LearnerKind::Giga => "giga",
            LearnerKind::Ftl => "ftl",
            LearnerKind::Qftl => "qftl",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "igd" => Ok(LearnerKind::Igd),
            "giga" => Ok(LearnerKind::Giga),
            "ftl" => Ok(LearnerKind::Ftl),
            "qftl" => Ok(LearnerKind::Qftl),
            other => Err(Error::InvalidParameter(format!("unknown learner '{other}'"))),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")))
    }
}
