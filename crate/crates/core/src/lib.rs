//! Differentially private online convex programming.
//!
//! Online learners (IGD, GIGA, FTL, closed-form quadratic FTL) are made
//! private by perturbing their iterates with Gaussian noise scaled to a
//! sensitivity that decays as `1/t`. Quadratic losses additionally get a
//! logarithmic-regret learner built on tree-aggregated private sums, and
//! [`offline`] turns the online machinery into a private batch learner.

pub mod error;
pub mod learners;
pub mod loss;
pub mod offline;
pub mod pqftl;
pub mod privacy;
pub mod regret;
pub mod set;
pub mod solver;
pub mod trace;
pub mod treesum;

pub use error::{Error, Result};
pub use loss::{LinearLoss, Link, Loss, Regularized, SharedLoss};
pub use set::ConvexSet;
pub use learners::{LearnerKind, OnlineLearner};
pub use privacy::{calibrate, NoiseCalibration, PrivacyBudget};
pub use trace::LearnerTrace;
