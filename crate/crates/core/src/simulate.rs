//! Synthetic Bradley–Terry worlds with known true scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{ComparisonRecord, Dataset, ItemCatalog, ItemId, Outcome};
use crate::error::{Error, Result};
use crate::scores::{Method, ScoreTable};
use crate::stats::logistic;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub items: usize,
    pub comparisons: usize,
    pub score_scale: f64,
    pub tie_rate: f64,
    pub seed: u64,
}

fn item_ids(m: usize) -> Vec<String> {
    let width = (m.saturating_sub(1)).to_string().len().max(3);
    (0..m).map(|i| format!("item{i:0width$}")).collect()
}

/// Draws true scores i.i.d. `N(0, score_scale^2)` and `n` comparisons over
/// uniformly chosen pairs. The returned truth table carries method tag
/// `lsr` only as a placeholder; its `params` record the generator settings.
pub fn simulate_bt(config: SimulationConfig) -> Result<(ScoreTable, Dataset)> {
    let SimulationConfig { items: m, comparisons: n, score_scale, tie_rate, seed } = config;
    if m < 2 || n < 1 {
        return Err(Error::InvalidInput("simulation needs at least 2 items and 1 comparison".into()));
    }
    if !(score_scale >= 0.0 && score_scale.is_finite()) {
        return Err(Error::InvalidInput(format!("score scale {score_scale} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, score_scale).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let truth: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();
    let ids = item_ids(m);
    let data = simulate_with_truth(&ids, &truth, n, tie_rate, &mut rng)?;

    let mut table = ScoreTable::new(Method::Lsr);
    for (id, &s) in ids.iter().zip(&truth) {
        table.insert(ItemId::new(id.clone())?, s, None)?;
    }
    table.params.insert("items".into(), m as f64);
    table.params.insert("comparisons".into(), n as f64);
    table.params.insert("score_scale".into(), score_scale);
    table.params.insert("tie_rate".into(), tie_rate);
    table.params.insert("seed".into(), seed as f64);
    Ok((table, data))
}

/// Generates comparisons from given true scores. Each record presents a
/// uniformly chosen unordered pair in random order; with probability
/// `tie_rate` it is a tie, otherwise A wins with probability
/// `logistic(s_a - s_b)`.
pub fn simulate_with_truth<R: Rng>(
    ids: &[String],
    truth: &[f64],
    n: usize,
    tie_rate: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if ids.len() != truth.len() || ids.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 items with one score each".into()));
    }
    if !(0.0..1.0).contains(&tie_rate) && tie_rate != 1.0 {
        return Err(Error::InvalidInput(format!("tie rate {tie_rate} outside [0, 1]")));
    }
    let catalog = ItemCatalog::from_ids(ids.iter().cloned())?;
    let m = ids.len();
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        let outcome = if rng.random::<f64>() < tie_rate {
            Outcome::Tie
        } else if rng.random::<f64>() < logistic(truth[a] - truth[b]) {
            Outcome::WinA
        } else {
            Outcome::WinB
        };
        records.push(ComparisonRecord {
            a: catalog.id(a).clone(),
            b: catalog.id(b).clone(),
            outcome,
            timestamp: None,
            session: None,
        });
    }
    Dataset::with_catalog(catalog, records)
}
