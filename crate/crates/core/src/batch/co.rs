//! Margin-violation LP over all comparisons.
//!
//! ```text
//! minimize    1't + lambda_ties 1'|C's|
//! subject to  1's = 0
//!             epsilon - b_n's <= t_n,  t_n >= 0
//! ```
//!
//! `b_n` has `+1` at the winner and `-1` at the loser of decisive record
//! `n`; the columns of `C` are the same vectors for tied records, oriented
//! from the lower to the higher catalog index. `|C's|` is linearized with
//! `u >= C's`, `u >= -C's`.
//!
//! The primal has one row per comparison. The fit solves the dual instead,
//!
//! ```text
//! maximize    epsilon 1'y
//! subject to  B y + C w + 1 z = 0,  0 <= y <= 1,  -lambda <= w <= lambda
//! ```
//!
//! which has one row per item, and reads the scores off its simplex
//! multipliers. The primal optimum is then re-evaluated at those scores and
//! checked against the dual optimum.

use serde::{Deserialize, Serialize};

use super::lp::{lp_solve, Constraint, LinearProgram, LpStatus};
use crate::data::{Dataset, Outcome};
use crate::error::{Error, Result};
use crate::scores::{Method, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoParams {
    /// Required score margin of every decisive comparison.
    pub epsilon: f64,
    /// Weight of the absolute score difference of tied pairs.
    pub lambda_ties: f64,
}

impl Default for CoParams {
    fn default() -> Self {
        CoParams { epsilon: 1.0, lambda_ties: 1.0 }
    }
}

impl CoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite() && self.lambda_ties >= 0.0 && self.lambda_ties.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid CO parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CoFit {
    pub table: ScoreTable,
    /// Optimal value of the primal program.
    pub objective: f64,
    pub iterations: usize,
}

/// Pairs `(winner, loser)` of decisive records and `(low, high)` of ties.
fn split_records(data: &Dataset) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut decisive = Vec::new();
    let mut ties = Vec::new();
    for c in data.indexed() {
        let c = c.canonical();
        match c.outcome {
            Outcome::Tie => ties.push((c.a, c.b)),
            _ => decisive.push((c.a, c.b)),
        }
    }
    (decisive, ties)
}

/// The primal program, with variables ordered `s` (one per catalog item),
/// then `t` (one per decisive record), then `u` (one per tie).
pub fn co_program(data: &Dataset, params: &CoParams) -> Result<LinearProgram> {
    params.validate()?;
    let m = data.catalog().len();
    let (decisive, ties) = split_records(data);
    let n_t = decisive.len();
    let n = m + n_t + ties.len();
    let mut lp = LinearProgram::new(n);
    for j in 0..m {
        lp.bounds[j] = (f64::NEG_INFINITY, f64::INFINITY);
    }
    for (n_idx, &(w, l)) in decisive.iter().enumerate() {
        let t = m + n_idx;
        lp.objective[t] = 1.0;
        // epsilon - (s_w - s_l) <= t  <=>  -s_w + s_l - t <= -epsilon
        lp.inequalities.push(Constraint::new(vec![(w, -1.0), (l, 1.0), (t, -1.0)], -params.epsilon));
    }
    for (k, &(i, j)) in ties.iter().enumerate() {
        let u = m + n_t + k;
        lp.objective[u] = params.lambda_ties;
        lp.inequalities.push(Constraint::new(vec![(i, 1.0), (j, -1.0), (u, -1.0)], 0.0));
        lp.inequalities.push(Constraint::new(vec![(i, -1.0), (j, 1.0), (u, -1.0)], 0.0));
    }
    lp.equalities.push(Constraint::new((0..m).map(|j| (j, 1.0)).collect(), 0.0));
    Ok(lp)
}

fn dual_program(m: usize, decisive: &[(usize, usize)], ties: &[(usize, usize)], params: &CoParams) -> LinearProgram {
    let n = decisive.len() + ties.len() + 1;
    let mut lp = LinearProgram::new(n);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (j, &(w, l)) in decisive.iter().enumerate() {
        lp.objective[j] = -params.epsilon;
        lp.bounds[j] = (0.0, 1.0);
        rows[w].push((j, 1.0));
        rows[l].push((j, -1.0));
    }
    let off = decisive.len();
    for (k, &(i, j)) in ties.iter().enumerate() {
        lp.bounds[off + k] = (-params.lambda_ties, params.lambda_ties);
        rows[i].push((off + k, 1.0));
        rows[j].push((off + k, -1.0));
    }
    let z = n - 1;
    lp.bounds[z] = (f64::NEG_INFINITY, f64::INFINITY);
    for mut row in rows {
        row.push((z, 1.0));
        lp.equalities.push(Constraint::new(row, 0.0));
    }
    lp
}

/// Primal objective at scores `s`, with `t` and `u` at their optimal
/// values for those scores.
pub fn co_objective(data: &Dataset, params: &CoParams, s: &[f64]) -> f64 {
    let (decisive, ties) = split_records(data);
    let hinge: f64 = decisive.iter().map(|&(w, l)| (params.epsilon - (s[w] - s[l])).max(0.0)).sum();
    let spread: f64 = ties.iter().map(|&(i, j)| (s[i] - s[j]).abs()).sum();
    hinge + params.lambda_ties * spread
}

pub fn co_fit(train: &Dataset, params: CoParams) -> Result<CoFit> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot fit on an empty dataset".into()));
    }
    let m = train.catalog().len();
    let (decisive, ties) = split_records(train);
    let dual = dual_program(m, &decisive, &ties, &params);
    let sol = lp_solve(&dual)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!("dual margin program reported {}", sol.status)));
    }
    let mut s: Vec<f64> = sol.duals.iter().map(|p| -p).collect();
    let mean = s.iter().sum::<f64>() / m as f64;
    s.iter_mut().for_each(|v| *v -= mean);

    let objective = co_objective(train, &params, &s);
    let dual_value = -sol.objective;
    if (objective - dual_value).abs() > 1e-8 * (1.0 + dual_value.abs()) {
        return Err(Error::Internal(format!(
            "duality gap: primal {objective} vs dual {dual_value}"
        )));
    }

    let mut table = ScoreTable::new(Method::Co);
    table.params.insert("epsilon".into(), params.epsilon);
    table.params.insert("lambda_ties".into(), params.lambda_ties);
    for (id, &v) in train.catalog().ids().zip(&s) {
        table.insert(id.clone(), v, None)?;
    }
    Ok(CoFit { table, objective, iterations: sol.iterations })
}
