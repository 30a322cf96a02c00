//! Pairwise-comparison rating: data model, online and batch raters,
//! a Gaussian-process rater, evaluation and labeling.

pub mod batch;
pub mod data;
pub mod error;
pub mod eval;
pub mod gp;
pub mod labeling;
pub mod online;
pub mod scores;
pub mod simulate;
pub mod stats;

pub use data::{ComparisonRecord, Dataset, Format, ItemCatalog, ItemId, Outcome};
pub use error::{Error, Result};
pub use scores::{GaussianRating, Method, OutcomeDistribution, ScoreEntry, ScoreTable};
