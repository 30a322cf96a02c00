//! Train/test evaluation, hyperparameter search and score normalization.

pub mod metrics;
pub mod model;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use metrics::{accuracy, log_loss, MetricMode, PROB_FLOOR};
pub use model::{fit_scores, FittedModel, MethodParams};

use crate::data::{Dataset, Outcome};
use crate::error::{Error, Result};
use crate::scores::{fmt_f64, Method, ScoreTable};

/// Seeds used when none are given.
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const DEFAULT_TEST_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub log_loss: f64,
    pub accuracy: f64,
    /// Test records that entered the metrics.
    pub scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub method: Method,
    pub params: BTreeMap<String, f64>,
    pub mode: MetricMode,
    /// Means over seeds.
    pub log_loss: f64,
    pub accuracy: f64,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub test_fraction: f64,
    pub mode: MetricMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { test_fraction: DEFAULT_TEST_FRACTION, mode: MetricMode::Binary }
    }
}

fn evaluate_seed(data: &Dataset, params: &MethodParams, options: &EvalOptions, seed: u64) -> Result<SeedResult> {
    let (train, test) = data.split(options.test_fraction, seed)?;
    let model = FittedModel::fit(&train, params)?;
    let tie_share = match options.mode {
        MetricMode::Binary => 0.0,
        MetricMode::Ternary => train.tie_frequency(),
    };
    let mut predictions = Vec::with_capacity(test.len());
    let mut outcomes = Vec::with_capacity(test.len());
    for r in test.records() {
        if options.mode == MetricMode::Binary && r.outcome == Outcome::Tie {
            continue;
        }
        let p = model.predict(data.catalog(), &r.a, &r.b, tie_share)?;
        predictions.push(match options.mode {
            MetricMode::Binary => p.decisive(),
            MetricMode::Ternary => p,
        });
        outcomes.push(r.outcome);
    }
    if outcomes.is_empty() {
        return Err(Error::InvalidInput("test split has no records to score".into()));
    }
    Ok(SeedResult {
        seed,
        log_loss: log_loss(&predictions, &outcomes)?,
        accuracy: accuracy(&predictions, &outcomes, options.mode)?,
        scored: outcomes.len(),
    })
}

/// Splits, fits and scores once per seed. Seeds run in parallel; the
/// report lists them in the order given.
pub fn evaluate(data: &Dataset, params: &MethodParams, options: &EvalOptions, seeds: &[u64]) -> Result<EvaluationReport> {
    if data.len() < 2 {
        return Err(Error::InvalidInput("evaluation needs at least 2 records".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidInput("no seeds given".into()));
    }
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            evaluate_seed(data, params, options, seed).map_err(|e| Error::Seed { seed, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_seed.len() as f64;
    Ok(EvaluationReport {
        method: params.method(),
        params: params.to_map(),
        mode: options.mode,
        log_loss: per_seed.iter().map(|r| r.log_loss).sum::<f64>() / n,
        accuracy: per_seed.iter().map(|r| r.accuracy).sum::<f64>() / n,
        seeds: seeds.to_vec(),
        per_seed,
    })
}

/// Candidate values per parameter name; cells are the cartesian product.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grid(pub BTreeMap<String, Vec<f64>>);

impl Grid {
    pub fn new() -> Grid {
        Grid::default()
    }

    pub fn with(mut self, name: &str, values: &[f64]) -> Grid {
        self.0.insert(name.to_string(), values.to_vec());
        self
    }

    /// Search space used when none is given.
    pub fn default_for(method: Method) -> Grid {
        match method {
            Method::Elo => Grid::new().with("k", &[8.0, 16.0, 32.0, 64.0]).with("delta", &[200.0, 400.0, 800.0]),
            Method::TrueSkill => {
                let s0 = 25.0 / 3.0;
                Grid::new().with("beta", &[s0 / 2.0, s0]).with("epsilon_c", &[0.05, 0.1, 0.2])
            }
            Method::Co => Grid::new().with("epsilon", &[0.5, 1.0, 2.0]).with("lambda_ties", &[0.0, 0.5, 1.0]),
            Method::Gp => Grid::new().with("prior_var", &[0.5, 1.0, 4.0]),
            Method::Lsr => Grid::new().with("alpha_reg", &[0.01, 0.1, 1.0]),
        }
    }

    /// Parses `name=v1,v2,...` entries.
    pub fn parse<S: AsRef<str>>(entries: &[S]) -> Result<Grid> {
        let mut grid = Grid::new();
        for entry in entries {
            let entry = entry.as_ref();
            let (name, values) = entry
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("grid entry {entry:?} is not name=v1,v2")))?;
            let values = values
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("grid entry {entry:?}: {e}")))?;
            grid.0.insert(name.trim().to_string(), values);
        }
        Ok(grid)
    }

    /// Number of cells.
    pub fn size(&self) -> usize {
        self.0.values().map(Vec::len).product()
    }

    /// Cells in lexicographic order of (name, position in value list).
    pub fn cells(&self) -> Vec<BTreeMap<String, f64>> {
        let mut cells = vec![BTreeMap::new()];
        for (name, values) in &self.0 {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |&v| {
                        let mut c = cell.clone();
                        c.insert(name.clone(), v);
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: MethodParams,
    pub best_index: usize,
    /// One report per cell, in [`Grid::cells`] order.
    pub reports: Vec<EvaluationReport>,
}

impl GridResult {
    pub fn best_report(&self) -> &EvaluationReport {
        &self.reports[self.best_index]
    }
}

/// Evaluates every grid cell applied over `base`. The best cell has the
/// lowest mean log loss, then the highest accuracy, then comes first.
pub fn grid_search(
    data: &Dataset,
    base: &MethodParams,
    grid: &Grid,
    options: &EvalOptions,
    seeds: &[u64],
) -> Result<GridResult> {
    if grid.0.is_empty() || grid.size() == 0 {
        return Err(Error::InvalidInput("grid is empty".into()));
    }
    let params = grid
        .cells()
        .iter()
        .map(|cell| base.with_overrides(cell))
        .collect::<Result<Vec<_>>>()?;
    let reports = params
        .par_iter()
        .map(|p| evaluate(data, p, options, seeds))
        .collect::<Result<Vec<_>>>()?;
    let mut best_index = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        let b = &reports[best_index];
        if r.log_loss < b.log_loss || (r.log_loss == b.log_loss && r.accuracy > b.accuracy) {
            best_index = i;
        }
    }
    Ok(GridResult { best: params[best_index], best_index, reports })
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub table: ScoreTable,
    /// All scores were equal and were mapped to 0.5.
    pub constant: bool,
}

/// Min–max maps scores onto `[0, 1]`.
pub fn normalize_scores(table: &ScoreTable) -> Result<Normalized> {
    if table.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty table".into()));
    }
    let scores = table.scores();
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(Normalized { table: table.map_scores(|_| 0.5)?, constant: true });
    }
    let span = hi - lo;
    let table = table.map_scores(|s| ((s - lo) / span).clamp(0.0, 1.0))?;
    Ok(Normalized { table, constant: false })
}

/// CSV with one row per report: method, parameters as `k=v;...`, mode,
/// mean metrics and the per-seed values.
pub fn write_reports_csv<W: Write>(reports: &[EvaluationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "params", "mode", "log_loss", "accuracy", "seeds", "seed_log_loss", "seed_accuracy"])?;
    for r in reports {
        let join = |f: &dyn Fn(&SeedResult) -> String| r.per_seed.iter().map(f).collect::<Vec<_>>().join(";");
        w.write_record([
            r.method.name().to_string(),
            params_string(&r.params),
            format!("{:?}", r.mode).to_lowercase(),
            fmt_f64(r.log_loss),
            fmt_f64(r.accuracy),
            join(&|s| s.seed.to_string()),
            join(&|s| fmt_f64(s.log_loss)),
            join(&|s| fmt_f64(s.accuracy)),
        ])?;
    }
    w.flush().map_err(Error::Stream)?;
    Ok(())
}

pub fn params_string(params: &BTreeMap<String, f64>) -> String {
    params.iter().map(|(k, v)| format!("{k}={}", fmt_f64(*v))).collect::<Vec<_>>().join(";")
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({})", self.method, params_string(&self.params))?;
        writeln!(f, "  {:>8}  {:>10}  {:>9}", "seed", "log loss", "accuracy")?;
        for s in &self.per_seed {
            writeln!(f, "  {:>8}  {:>10.6}  {:>9.4}", s.seed, s.log_loss, s.accuracy)?;
        }
        write!(f, "  {:>8}  {:>10.6}  {:>9.4}", "mean", self.log_loss, self.accuracy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_bt, SimulationConfig};

    fn world() -> Dataset {
        let cfg = SimulationConfig { items: 10, comparisons: 400, score_scale: 1.0, tie_rate: 0.1, seed: 3 };
        simulate_bt(cfg).unwrap().1
    }

    #[test]
    fn grid_cells_are_cartesian() {
        let g = Grid::new().with("a", &[1.0, 2.0]).with("b", &[3.0, 4.0, 5.0]);
        assert_eq!(g.size(), 6);
        let cells = g.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0]["a"], 1.0);
        assert_eq!(cells[0]["b"], 3.0);
        assert_eq!(cells[1]["b"], 4.0);
        assert_eq!(cells[5]["a"], 2.0);
        let parsed = Grid::parse(&["a=1,2", "b=3, 4,5"]).unwrap();
        assert_eq!(parsed, g);
        assert!(Grid::parse(&["a"]).is_err());
        assert!(Grid::parse(&["a=x"]).is_err());
    }

    #[test]
    fn evaluate_shapes_and_reproducibility() {
        let d = world();
        let p = MethodParams::default_for(Method::Elo);
        let r1 = evaluate(&d, &p, &EvalOptions::default(), &DEFAULT_SEEDS).unwrap();
        let r2 = evaluate(&d, &p, &EvalOptions::default(), &DEFAULT_SEEDS).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.per_seed.len(), 5);
        let mean = r1.per_seed.iter().map(|s| s.log_loss).sum::<f64>() / 5.0;
        assert_eq!(mean, r1.log_loss);
        let ternary = EvalOptions { mode: MetricMode::Ternary, ..Default::default() };
        let r3 = evaluate(&d, &p, &ternary, &[1]).unwrap();
        assert!(r3.per_seed[0].scored >= r1.per_seed[0].scored);
    }

    #[test]
    fn grid_best_is_minimal() {
        let d = world();
        let grid = Grid::new().with("k", &[1e-6, 32.0]);
        let res = grid_search(&d, &MethodParams::default_for(Method::Elo), &grid, &EvalOptions::default(), &[1, 2]).unwrap();
        assert_eq!(res.reports.len(), 2);
        assert_eq!(res.best_index, 1);
        assert!(res.reports.iter().all(|r| res.best_report().log_loss <= r.log_loss));
        assert!((res.reports[0].log_loss - std::f64::consts::LN_2).abs() < 1e-4);
    }

    #[test]
    fn normalize_examples() {
        let mut t = ScoreTable::new(Method::Co);
        for (id, s) in [("x", 0.0), ("y", 5.0), ("z", 10.0)] {
            t.insert(id.into(), s, None).unwrap();
        }
        let n = normalize_scores(&t).unwrap();
        assert_eq!(n.table.scores(), vec![0.0, 0.5, 1.0]);
        assert!(!n.constant);
        assert_eq!(normalize_scores(&n.table).unwrap().table.scores(), vec![0.0, 0.5, 1.0]);
        let flat = t.map_scores(|_| 3.0).unwrap();
        let n = normalize_scores(&flat).unwrap();
        assert!(n.constant && n.table.scores() == vec![0.5; 3]);
    }

    #[test]
    fn reports_csv_has_one_row_per_report() {
        let d = world();
        let r = evaluate(&d, &MethodParams::default_for(Method::Lsr), &EvalOptions::default(), &[1, 2]).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("lsr,alpha_reg=0.1;"));
    }
}
