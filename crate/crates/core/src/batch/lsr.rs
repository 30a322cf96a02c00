//! Luce spectral ranking.
//!
//! Each observed comparison adds rate from the loser to the winner of a
//! continuous-time Markov chain (a tie adds half a unit each way). The
//! stationary distribution of the chain is the score vector: item `i`'s
//! score is `ln pi_i`. For two items this reproduces the Bradley–Terry
//! maximum-likelihood estimate `pi_A / pi_B = wins_A / wins_B`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ItemId, Outcome};
use crate::error::{Error, Result};
use crate::scores::{Method, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsrParams {
    /// Pseudo-count added in both directions to every observed pair.
    pub alpha_reg: f64,
    /// Bound on the global-balance residual `max_i |(pi Q)_i|`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LsrParams {
    fn default() -> Self {
        LsrParams { alpha_reg: 0.1, tol: 1e-12, max_iters: 1_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct LsrFit {
    pub table: ScoreTable,
    /// Connected components of the comparison graph. Scores are only
    /// comparable within a component.
    pub components: Vec<Vec<ItemId>>,
    /// Catalog items without any comparison; absent from the table.
    pub unscored: Vec<ItemId>,
}

impl LsrFit {
    pub fn comparable(&self, a: &ItemId, b: &ItemId) -> bool {
        self.components.iter().any(|c| c.contains(a) && c.contains(b))
    }
}

/// Stationary distribution of the chain with off-diagonal rates
/// `rates[(i, j)]` for the transition `i -> j`, by power iteration on the
/// uniformized chain `P = I + Q / lambda`.
pub fn stationary_distribution(rates: &DMatrix<f64>, tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let n = rates.nrows();
    if n != rates.ncols() {
        return Err(Error::InvalidInput("rate matrix must be square".into()));
    }
    if rates.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
        return Err(Error::InvalidInput("rates must be finite and non-negative".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let out_rate: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| rates[(i, j)]).sum())
        .collect();
    let max_out = out_rate.iter().cloned().fold(0.0, f64::max);
    if max_out == 0.0 {
        return Err(Error::InvalidInput("chain has no transitions".into()));
    }
    // Strictly larger than every exit rate keeps the uniformized chain
    // aperiodic.
    let lambda = 1.1 * max_out;

    let mut pi = vec![1.0 / n as f64; n];
    let mut flow = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        // flow = pi Q
        for i in 0..n {
            let inflow: f64 = (0..n).filter(|&j| j != i).map(|j| pi[j] * rates[(j, i)]).sum();
            flow[i] = inflow - pi[i] * out_rate[i];
        }
        residual = flow.iter().fold(0.0f64, |acc, f| acc.max(f.abs()));
        if residual <= tol {
            return Ok(pi);
        }
        for (p, f) in pi.iter_mut().zip(&flow) {
            *p = (*p + f / lambda).max(0.0);
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
    }
    Err(Error::NoConvergence { iterations: max_iters, residual })
}

/// Balance residual `max_i |sum_j pi_j r(j -> i) - pi_i sum_j r(i -> j)|`.
pub fn balance_residual(rates: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = rates.nrows();
    (0..n)
        .map(|i| {
            let inflow: f64 = (0..n).filter(|&j| j != i).map(|j| pi[j] * rates[(j, i)]).sum();
            let outflow: f64 = (0..n).filter(|&j| j != i).map(|j| rates[(i, j)]).sum::<f64>() * pi[i];
            (inflow - outflow).abs()
        })
        .fold(0.0, f64::max)
}

fn strongly_connected(rates: &DMatrix<f64>) -> bool {
    let n = rates.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let r = if forward { rates[(i, j)] } else { rates[(j, i)] };
                if i != j && r > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn lsr_fit(train: &Dataset, params: LsrParams) -> Result<LsrFit> {
    if !(params.alpha_reg >= 0.0 && params.tol > 0.0) {
        return Err(Error::InvalidInput(format!("invalid LSR parameters {params:?}")));
    }
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot fit on an empty dataset".into()));
    }
    let catalog = train.catalog();
    let m = catalog.len();
    // rates[(j, i)]: loser j -> winner i
    let mut rates = DMatrix::<f64>::zeros(m, m);
    let mut observed = DMatrix::<u8>::zeros(m, m);
    let mut parent: Vec<usize> = (0..m).collect();
    let mut seen = vec![false; m];
    for c in train.indexed() {
        let (a, b) = (c.a, c.b);
        match c.outcome {
            Outcome::WinA => rates[(b, a)] += 1.0,
            Outcome::WinB => rates[(a, b)] += 1.0,
            Outcome::Tie => {
                rates[(a, b)] += 0.5;
                rates[(b, a)] += 0.5;
            }
        }
        observed[(a.min(b), a.max(b))] = 1;
        seen[a] = true;
        seen[b] = true;
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            if observed[(i, j)] == 1 {
                rates[(i, j)] += params.alpha_reg;
                rates[(j, i)] += params.alpha_reg;
            }
        }
    }

    // Components in catalog order of their first member.
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in (0..m).filter(|&i| seen[i]) {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(i),
            None => groups.push((root, vec![i])),
        }
    }

    let mut log_pi = vec![f64::NAN; m];
    for (_, members) in &groups {
        let k = members.len();
        let sub = DMatrix::from_fn(k, k, |r, c| rates[(members[r], members[c])]);
        if !strongly_connected(&sub) {
            return Err(Error::NotStronglyConnected);
        }
        let pi = stationary_distribution(&sub, params.tol, params.max_iters)?;
        for (&i, p) in members.iter().zip(pi) {
            log_pi[i] = p.ln();
        }
    }

    let mut table = ScoreTable::new(Method::Lsr);
    table.params.insert("alpha_reg".into(), params.alpha_reg);
    table.params.insert("components".into(), groups.len() as f64);
    let mut unscored = Vec::new();
    for i in 0..m {
        if seen[i] {
            table.insert(catalog.id(i).clone(), log_pi[i], None)?;
        } else {
            unscored.push(catalog.id(i).clone());
        }
    }
    let components = groups
        .into_iter()
        .map(|(_, members)| members.into_iter().map(|i| catalog.id(i).clone()).collect())
        .collect();
    Ok(LsrFit { table, components, unscored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ComparisonRecord, ItemCatalog};

    fn data(rows: &[(&str, &str, Outcome)]) -> Dataset {
        Dataset::from_records(rows.iter().map(|&(a, b, o)| ComparisonRecord::new(a, b, o).unwrap()).collect()).unwrap()
    }

    fn unregularized() -> LsrParams {
        LsrParams { alpha_reg: 0.0, ..Default::default() }
    }

    #[test]
    fn two_items_two_to_one() {
        let d = data(&[("A", "B", Outcome::WinA), ("B", "A", Outcome::WinB), ("A", "B", Outcome::WinB)]);
        let fit = lsr_fit(&d, unregularized()).unwrap();
        let sa = fit.table.score(&"A".into()).unwrap();
        let sb = fit.table.score(&"B".into()).unwrap();
        assert!((sa.exp() - 2.0 / 3.0).abs() < 1e-12);
        assert!((sa - sb - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn symmetric_records_uniform() {
        let d = data(&[
            ("A", "B", Outcome::WinA),
            ("A", "B", Outcome::WinB),
            ("B", "C", Outcome::WinA),
            ("C", "B", Outcome::WinA),
            ("A", "C", Outcome::WinA),
            ("A", "C", Outcome::WinB),
        ]);
        let fit = lsr_fit(&d, unregularized()).unwrap();
        for s in fit.table.scores() {
            assert!((s - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_tie_is_even() {
        let fit = lsr_fit(&data(&[("A", "B", Outcome::Tie)]), unregularized()).unwrap();
        for s in fit.table.scores() {
            assert!((s - 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_examples() {
        assert_eq!(stationary_distribution(&DMatrix::zeros(1, 1), 1e-12, 10).unwrap(), vec![1.0]);

        let cycle = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let pi = stationary_distribution(&cycle, 1e-14, 100_000).unwrap();
        assert!(pi.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-13));

        let two = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]);
        let pi = stationary_distribution(&two, 1e-14, 100_000).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-13 && (pi[1] - 2.0 / 3.0).abs() < 1e-13);
        assert!(balance_residual(&two, &pi) < 1e-14);
    }

    #[test]
    fn non_convergence_reported() {
        let two = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]);
        assert!(matches!(
            stationary_distribution(&two, 1e-300, 3),
            Err(Error::NoConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn components_and_unscored() {
        let catalog = ItemCatalog::from_ids(["A", "B", "C", "D", "E"]).unwrap();
        let rows = [("A", "B", Outcome::WinA), ("C", "D", Outcome::WinB), ("D", "C", Outcome::Tie)];
        let records = rows.iter().map(|&(a, b, o)| ComparisonRecord::new(a, b, o).unwrap()).collect();
        let d = Dataset::with_catalog(catalog, records).unwrap();
        let fit = lsr_fit(&d, LsrParams::default()).unwrap();
        assert_eq!(fit.components.len(), 2);
        assert_eq!(fit.unscored, vec![ItemId::from("E")]);
        assert!(fit.comparable(&"A".into(), &"B".into()));
        assert!(!fit.comparable(&"A".into(), &"C".into()));
        let pa = fit.table.score(&"A".into()).unwrap().exp();
        let pb = fit.table.score(&"B".into()).unwrap().exp();
        assert!((pa + pb - 1.0).abs() < 1e-12 && pa > pb);
        assert_eq!(fit.table.len(), 4);
    }

    #[test]
    fn unbeaten_item_needs_regularization() {
        let d = data(&[("A", "B", Outcome::WinA)]);
        assert!(matches!(lsr_fit(&d, unregularized()), Err(Error::NotStronglyConnected)));
        let fit = lsr_fit(&d, LsrParams::default()).unwrap();
        // pi_A / pi_B = 1.1 / 0.1
        let gap = fit.table.score(&"A".into()).unwrap() - fit.table.score(&"B".into()).unwrap();
        assert!((gap - 11f64.ln()).abs() < 1e-10);
    }
}
