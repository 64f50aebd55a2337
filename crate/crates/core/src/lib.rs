//! E-value inductive conformal prediction with a reusable calibration set.
//!
//! The predictor scores every candidate label with `1 - p(y|x)`, calibrates
//! once by taking the empirical mean of the calibration scores, and adds a
//! Hoeffding correction `t` so that `mean + t` upper-bounds the true mean
//! score with probability at least `1 - exp(-2 n t^2 / (b - a)^2)`. Under that
//! event Markov's inequality gives, for any level `alpha_tilde`,
//!
//! ```text
//! P(L >= (mean + t) / alpha_tilde) <= alpha_tilde
//! ```
//!
//! so a label is kept in the prediction set when its score is at most
//! `(mean + t) / alpha_tilde`. The same [`CalibrationSummary`] serves every
//! future query, at any `alpha_tilde`.
//!
//! ```
//! use econformal::{calibrate, ScoreBounds};
//!
//! let scores = [0.1, 0.2, 0.15, 0.3];
//! let summary = calibrate(&scores, 0.02, ScoreBounds::unit()).unwrap();
//! let set = summary.predict_set(&[0.05, 0.15, 0.8], 0.5).unwrap();
//! assert_eq!(set.labels(), &[2]);
//! ```

pub mod conformal;
pub mod data;
mod error;
pub mod evaluation;
pub mod format;
pub mod hoeffding;
pub mod nonconformity;
pub mod simulation;

pub use conformal::{calibrate, CalibrationSummary, PredictionSet};
pub use data::{
    parse_dataset, split_dataset, write_dataset, LabeledProbabilityDataset, ProbabilityRecord,
    SplitSpec, ROW_SUM_TOLERANCE,
};
pub use error::{Error, Result};
pub use evaluation::{evaluate, parse_report_kv, render_report, EvaluationReport};
pub use hoeffding::{correction_for_confidence, mean_upper_bound, HoeffdingParams, Tail};
pub use nonconformity::{
    empirical_mean, score_all_labels, score_true, NonconformityMeasure, OneMinusProbability,
    ScoreBounds,
};
pub use simulation::{run_simulation, ScoreDistribution, SimulationConfig, SimulationResult};
