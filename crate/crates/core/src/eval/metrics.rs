use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Outcome;
use crate::error::{Error, Result};
use crate::scores::OutcomeDistribution;

/// Probabilities are clipped to at least this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// How ties enter the test metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    /// Tied test records are dropped and predictions renormalized over the
    /// two decisive outcomes.
    #[default]
    Binary,
    /// All three outcomes are scored as predicted.
    Ternary,
}

impl FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(MetricMode::Binary),
            "ternary" => Ok(MetricMode::Ternary),
            _ => Err(Error::InvalidInput(format!("unknown metric mode {s:?}"))),
        }
    }
}

/// Mean negative natural log of the probability given to each realized
/// outcome.
pub fn log_loss(predictions: &[OutcomeDistribution], outcomes: &[Outcome]) -> Result<f64> {
    check_lengths(predictions, outcomes)?;
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("log loss of an empty test set".into()));
    }
    let total: f64 = predictions
        .iter()
        .zip(outcomes)
        .map(|(p, &o)| -p.prob(o).clamp(PROB_FLOOR, 1.0).ln())
        .sum();
    Ok(total / outcomes.len() as f64)
}

/// Fraction of records whose most probable outcome was realized. Equal
/// probabilities resolve as A wins, then B wins, then tie.
pub fn accuracy(predictions: &[OutcomeDistribution], outcomes: &[Outcome], mode: MetricMode) -> Result<f64> {
    check_lengths(predictions, outcomes)?;
    let (mut hits, mut total) = (0usize, 0usize);
    for (p, &o) in predictions.iter().zip(outcomes) {
        let guess = match mode {
            MetricMode::Binary if o == Outcome::Tie => continue,
            MetricMode::Binary => p.decisive().argmax(),
            MetricMode::Ternary => p.argmax(),
        };
        total += 1;
        hits += usize::from(guess == o);
    }
    if total == 0 {
        return Err(Error::InvalidInput("no decisive outcomes to score".into()));
    }
    Ok(hits as f64 / total as f64)
}

fn check_lengths(predictions: &[OutcomeDistribution], outcomes: &[Outcome]) -> Result<()> {
    if predictions.len() != outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} outcomes",
            predictions.len(),
            outcomes.len()
        )));
    }
    Ok(())
}
