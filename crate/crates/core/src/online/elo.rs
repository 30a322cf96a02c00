use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ItemCatalog, Outcome};
use crate::error::{Error, Result};
use crate::scores::{check_tie_share, Method, OutcomeDistribution, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EloParams {
    /// Starting score of every item.
    pub initial: f64,
    /// Update gain.
    pub k: f64,
    /// Score difference that corresponds to 10:1 odds.
    pub delta: f64,
}

impl Default for EloParams {
    fn default() -> Self {
        EloParams { initial: 1500.0, k: 32.0, delta: 400.0 }
    }
}

impl EloParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.delta > 0.0 && self.initial.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid Elo parameters {self:?}")));
        }
        Ok(())
    }
}

/// Expected result of A against B: `1 / (1 + 10^((s_b - s_a) / delta))`.
pub fn elo_expected(s_a: f64, s_b: f64, delta: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((s_b - s_a) / delta))
}

/// One Elo step. Whatever A gains, B loses.
pub fn elo_update(s_a: f64, s_b: f64, outcome: Outcome, params: &EloParams) -> (f64, f64) {
    let expected_a = elo_expected(s_a, s_b, params.delta);
    let transfer = params.k * (outcome.score_a() - expected_a);
    (s_a + transfer, s_b - transfer)
}

/// Outcome probabilities from Elo scores. `tie_rate = None` is the binary
/// mode (no tie mass); otherwise that much mass goes to a tie and the rest
/// is split in proportion to the expected result.
pub fn elo_predict(s_a: f64, s_b: f64, params: &EloParams, tie_rate: Option<f64>) -> Result<OutcomeDistribution> {
    let tau = tie_rate.unwrap_or(0.0);
    check_tie_share(tau)?;
    OutcomeDistribution::from_decisive(elo_expected(s_a, s_b, params.delta), tau)
}

/// Elo state over a fixed catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct EloRater {
    params: EloParams,
    scores: Vec<f64>,
}

impl EloRater {
    pub fn new(items: usize, params: EloParams) -> Result<Self> {
        params.validate()?;
        Ok(EloRater { params, scores: vec![params.initial; items] })
    }

    pub fn params(&self) -> &EloParams {
        &self.params
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, idx: usize) -> f64 {
        self.scores[idx]
    }

    /// Adds an item at the initial score and returns its index.
    pub fn add_item(&mut self) -> usize {
        self.scores.push(self.params.initial);
        self.scores.len() - 1
    }

    pub fn apply(&mut self, a: usize, b: usize, outcome: Outcome) {
        let (sa, sb) = elo_update(self.scores[a], self.scores[b], outcome, &self.params);
        self.scores[a] = sa;
        self.scores[b] = sb;
    }

    pub fn predict(&self, a: usize, b: usize, tie_rate: Option<f64>) -> Result<OutcomeDistribution> {
        elo_predict(self.scores[a], self.scores[b], &self.params, tie_rate)
    }

    /// Plays every record of `data` in order, starting from initial scores.
    pub fn fit(data: &Dataset, params: EloParams) -> Result<Self> {
        let mut rater = EloRater::new(data.catalog().len(), params)?;
        for c in data.indexed() {
            rater.apply(c.a, c.b, c.outcome);
        }
        Ok(rater)
    }

    pub fn table(&self, catalog: &ItemCatalog) -> Result<ScoreTable> {
        let mut table = ScoreTable::new(Method::Elo);
        table.params.insert("initial".into(), self.params.initial);
        table.params.insert("k".into(), self.params.k);
        table.params.insert("delta".into(), self.params.delta);
        for (id, &s) in catalog.ids().zip(&self.scores) {
            table.insert(id.clone(), s, None)?;
        }
        Ok(table)
    }
}
