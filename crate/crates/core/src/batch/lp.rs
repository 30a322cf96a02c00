//! Bounded-variable revised simplex for small dense-basis problems.
//!
//! Solves `min c'x` subject to `A_ub x <= b_ub`, `A_eq x = b_eq` and
//! `l <= x <= u`, where bounds may be infinite. Constraint rows are sparse;
//! the basis inverse is dense and refactorized periodically. Entering and
//! leaving variables follow Bland's rule, so the pivot sequence is
//! deterministic and cannot cycle.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sparse linear constraint row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Constraint { coeffs, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Rows of the form `a'x <= rhs`.
    pub inequalities: Vec<Constraint>,
    /// Rows of the form `a'x = rhs`.
    pub equalities: Vec<Constraint>,
    /// `(lower, upper)` per variable; either side may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Problem over `n` variables, all non-negative, with zero objective.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            inequalities: Vec::new(),
            equalities: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for row in self.inequalities.iter().chain(&self.equalities) {
            if let Some(&(j, _)) = row.coeffs.iter().find(|&&(j, a)| j >= n || !a.is_finite()) {
                return Err(Error::InvalidInput(format!("bad coefficient for column {j}")));
            }
            if !row.rhs.is_finite() {
                return Err(Error::InvalidInput("non-finite right-hand side".into()));
            }
        }
        for (j, &(l, u)) in self.bounds.iter().enumerate() {
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!("bad bounds for column {j}: [{l}, {u}]")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite objective coefficient".into()));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.inequalities {
            worst = worst.max(row.dot(x) - row.rhs);
        }
        for row in &self.equalities {
            worst = worst.max((row.dot(x) - row.rhs).abs());
        }
        for (&xj, &(l, u)) in x.iter().zip(&self.bounds) {
            worst = worst.max(l - xj).max(xj - u);
        }
        worst
    }

    /// Plain-text listing of the problem, one row per line.
    pub fn write_listing<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let term = |(j, a): (usize, f64)| format!("{a:+} x{j}");
        writeln!(out, "minimize")?;
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, &c)| term((j, c)))
            .collect();
        writeln!(out, "  {}", if obj.is_empty() { "0".to_string() } else { obj.join(" ") })?;
        writeln!(out, "subject to")?;
        for (i, row) in self.inequalities.iter().enumerate() {
            let lhs: Vec<String> = row.coeffs.iter().copied().map(term).collect();
            writeln!(out, "  u{i}: {} <= {}", lhs.join(" "), row.rhs)?;
        }
        for (i, row) in self.equalities.iter().enumerate() {
            let lhs: Vec<String> = row.coeffs.iter().copied().map(term).collect();
            writeln!(out, "  e{i}: {} = {}", lhs.join(" "), row.rhs)?;
        }
        writeln!(out, "bounds")?;
        for (j, &(l, u)) in self.bounds.iter().enumerate() {
            writeln!(out, "  {l} <= x{j} <= {u}")?;
        }
        writeln!(out, "end")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values; meaningful only when optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Simplex multipliers per row, inequalities first, so that reduced
    /// costs are `c_j - duals' A_j`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-11,
            refactor_every: 64,
            max_iterations: 1_000_000,
        }
    }
}

pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp_solve_with(lp, SimplexOptions::default())
}

pub fn lp_solve_with(lp: &LinearProgram, options: SimplexOptions) -> Result<LpSolution> {
    lp.validate()?;
    Simplex::new(lp, options).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    FreeZero,
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    opts: SimplexOptions,
    m: usize,
    n_struct: usize,
    /// Sparse columns: structurals, then one slack per inequality, then
    /// artificials.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram, opts: SimplexOptions) -> Self {
        let n_struct = lp.num_vars();
        let m_ub = lp.inequalities.len();
        let m = m_ub + lp.equalities.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        let mut b = Vec::with_capacity(m);
        for (i, row) in lp.inequalities.iter().chain(&lp.equalities).enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            b.push(row.rhs);
        }
        // Merge repeated entries in a column.
        for col in &mut cols {
            col.sort_by_key(|&(i, _)| i);
            col.dedup_by(|next, prev| {
                if next.0 == prev.0 {
                    prev.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        let mut lower: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
        let mut upper: Vec<f64> = lp.bounds.iter().map(|b| b.1).collect();
        for i in 0..m_ub {
            cols.push(vec![(i, 1.0)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
        let n = cols.len();
        Simplex {
            lp,
            opts,
            m,
            n_struct,
            cols,
            lower,
            upper,
            cost: vec![0.0; n],
            b,
            x: vec![0.0; n],
            state: vec![State::AtLower; n],
            basis: Vec::with_capacity(m),
            binv: Vec::new(),
            since_refactor: 0,
            iterations: 0,
        }
    }

    fn run(mut self) -> Result<LpSolution> {
        let m_ub = self.lp.inequalities.len();
        // Nonbasic starting point: every variable at a finite bound, free
        // variables at zero.
        for j in 0..self.cols.len() {
            let (l, u) = (self.lower[j], self.upper[j]);
            let (state, value) = if l.is_finite() {
                (State::AtLower, l)
            } else if u.is_finite() {
                (State::AtUpper, u)
            } else {
                (State::FreeZero, 0.0)
            };
            self.state[j] = state;
            self.x[j] = value;
        }
        let mut residual = self.b.clone();
        for j in 0..self.cols.len() {
            if self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    residual[i] -= a * self.x[j];
                }
            }
        }
        // Slack rows with non-negative residual start basic; every other row
        // gets an artificial with the sign of its residual.
        let mut phase1_cost = vec![0.0; self.cols.len()];
        for i in 0..self.m {
            if i < m_ub && residual[i] >= 0.0 {
                let slack = self.n_struct + i;
                self.basis.push(slack);
                self.state[slack] = State::Basic(i);
                self.x[slack] = residual[i];
            } else {
                let sign = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
                let art = self.cols.len();
                self.cols.push(vec![(i, sign)]);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.x.push(residual[i].abs());
                self.state.push(State::Basic(i));
                phase1_cost.push(1.0);
                self.basis.push(art);
            }
        }
        let n_real = self.n_struct + m_ub;
        let has_artificials = self.cols.len() > n_real;
        self.refactor()?;

        if has_artificials {
            self.cost = phase1_cost;
            if let Some(status) = self.optimize()? {
                // Phase 1 is bounded below by zero.
                return Err(Error::Internal(format!("phase 1 reported {status}")));
            }
            let infeasibility: f64 = (n_real..self.cols.len()).map(|j| self.x[j]).sum();
            let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if infeasibility > self.opts.feasibility_tol * scale {
                return Ok(self.finish(LpStatus::Infeasible));
            }
            // Artificials are pinned at zero from here on.
            for j in n_real..self.cols.len() {
                self.upper[j] = 0.0;
                self.x[j] = 0.0;
                if self.state[j] != State::AtLower && !matches!(self.state[j], State::Basic(_)) {
                    self.state[j] = State::AtLower;
                }
            }
        }

        self.cost = vec![0.0; self.cols.len()];
        self.cost[..self.n_struct].copy_from_slice(&self.lp.objective);
        if let Some(status) = self.optimize()? {
            return Ok(self.finish(status));
        }
        Ok(self.finish(LpStatus::Optimal))
    }

    fn finish(&self, status: LpStatus) -> LpSolution {
        let x = self.x[..self.n_struct].to_vec();
        let duals = if status == LpStatus::Optimal { self.multipliers() } else { Vec::new() };
        LpSolution {
            status,
            objective: if status == LpStatus::Optimal { self.lp.objective_value(&x) } else { f64::NAN },
            x,
            duals,
            iterations: self.iterations,
        }
    }

    /// Simplex iterations with the current costs. Returns `Some(Unbounded)`
    /// when an improving ray exists, `None` at optimality.
    fn optimize(&mut self) -> Result<Option<LpStatus>> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Err(Error::Internal("simplex iteration limit reached".into()));
            }
            let pi = self.multipliers();
            let Some((entering, increase)) = self.choose_entering(&pi) else {
                return Ok(None);
            };
            self.iterations += 1;

            // alpha = B^-1 A_j
            alpha.iter_mut().for_each(|a| *a = 0.0);
            for &(i, a) in &self.cols[entering] {
                for (k, alpha_k) in alpha.iter_mut().enumerate() {
                    *alpha_k += self.binv[k * m + i] * a;
                }
            }
            let dir = if increase { 1.0 } else { -1.0 };

            // Ratio test; Bland: ties go to the smallest variable index.
            let mut best: Option<(f64, usize)> = None;
            for k in 0..m {
                let rate = -dir * alpha[k];
                if rate.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let var = self.basis[k];
                let limit = if rate < 0.0 {
                    (self.x[var] - self.lower[var]) / -rate
                } else {
                    (self.upper[var] - self.x[var]) / rate
                };
                if !limit.is_finite() {
                    continue;
                }
                let limit = limit.max(0.0);
                best = match best {
                    None => Some((limit, k)),
                    Some((bl, bk)) => {
                        let tie = 1e-12 * (1.0 + bl);
                        if limit < bl - tie || (limit <= bl + tie && var < self.basis[bk]) {
                            Some((limit, k))
                        } else {
                            Some((bl, bk))
                        }
                    }
                };
            }
            let flip = self.upper[entering] - self.lower[entering];
            let (step, leaving) = match best {
                None if !flip.is_finite() => return Ok(Some(LpStatus::Unbounded)),
                None => (flip, None),
                Some((limit, _)) if flip < limit - 1e-12 * (1.0 + limit) => (flip, None),
                Some((limit, k)) => (limit, Some(k)),
            };

            // Move along the edge.
            self.x[entering] += dir * step;
            for k in 0..m {
                let var = self.basis[k];
                self.x[var] -= dir * step * alpha[k];
            }

            match leaving {
                None => {
                    // Bound flip.
                    self.state[entering] = if increase { State::AtUpper } else { State::AtLower };
                    self.x[entering] = if increase { self.upper[entering] } else { self.lower[entering] };
                }
                Some(r) => {
                    let out = self.basis[r];
                    let to_lower = -dir * alpha[r] < 0.0;
                    self.x[out] = if to_lower { self.lower[out] } else { self.upper[out] };
                    self.state[out] = if to_lower { State::AtLower } else { State::AtUpper };
                    self.basis[r] = entering;
                    self.state[entering] = State::Basic(r);
                    self.pivot(r, &alpha);
                    self.since_refactor += 1;
                    if self.since_refactor >= self.opts.refactor_every {
                        self.refactor()?;
                    }
                }
            }
        }
    }

    /// `pi' = c_B' B^-1`.
    fn multipliers(&self) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (k, &var) in self.basis.iter().enumerate() {
            let c = self.cost[var];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (p, &v) in pi.iter_mut().zip(row) {
                    *p += c * v;
                }
            }
        }
        pi
    }

    /// Smallest-index nonbasic variable whose reduced cost improves the
    /// objective, with the direction it moves in.
    fn choose_entering(&self, pi: &[f64]) -> Option<(usize, bool)> {
        let tol = self.opts.optimality_tol;
        for j in 0..self.cols.len() {
            let state = self.state[j];
            if matches!(state, State::Basic(_)) || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.cost[j] - self.cols[j].iter().map(|&(i, a)| pi[i] * a).sum::<f64>();
            let scale = 1.0 + self.cost[j].abs();
            match state {
                State::AtLower if d < -tol * scale => return Some((j, true)),
                State::AtUpper if d > tol * scale => return Some((j, false)),
                State::FreeZero if d.abs() > tol * scale => return Some((j, d < 0.0)),
                _ => {}
            }
        }
        None
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let inv = 1.0 / alpha[r];
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v *= inv;
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for k in 0..m {
            if k == r || alpha[k] == 0.0 {
                continue;
            }
            let f = alpha[k];
            for (v, p) in self.binv[k * m..(k + 1) * m].iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
        }
    }

    /// Rebuilds `B^-1` from scratch and recomputes basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            self.binv.clear();
            return Ok(());
        }
        let mut basis = DMatrix::<f64>::zeros(m, m);
        for (k, &var) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[var] {
                basis[(i, k)] = a;
            }
        }
        let inv = basis
            .try_inverse()
            .ok_or_else(|| Error::Internal("singular simplex basis".into()))?;
        self.binv = vec![0.0; m * m];
        for k in 0..m {
            for i in 0..m {
                self.binv[k * m + i] = inv[(k, i)];
            }
        }
        // x_B = B^-1 (b - N x_N)
        let mut rhs = self.b.clone();
        for j in 0..self.cols.len() {
            if !matches!(self.state[j], State::Basic(_)) && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.basis[k]] = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }
}
