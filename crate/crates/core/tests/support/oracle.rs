//! Brute-force reference computations, written without the library's own
//! numerical routines.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pairrank_core::batch::{Constraint, LinearProgram};
use pairrank_core::Outcome;
use rand::Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn outcome_likelihood(outcome: Outcome, d: f64) -> f64 {
    match outcome {
        Outcome::WinA => sigmoid(d),
        Outcome::WinB => sigmoid(-d),
        Outcome::Tie => (sigmoid(d) * sigmoid(-d)).sqrt(),
    }
}

/// Random program over 5 variables boxed in `[0, 10]` (some with a free
/// lower side replaced by `-10`), with 4 inequality rows and an optional
/// equality row; integer coefficients.
pub fn random_lp<R: Rng>(rng: &mut R) -> LinearProgram {
    let n = 5;
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        lp.objective[j] = rng.random_range(-5..=5) as f64;
        let lo = if rng.random_bool(0.3) { -10.0 } else { 0.0 };
        lp.bounds[j] = (lo, 10.0);
    }
    for _ in 0..4 {
        let coeffs = (0..n).map(|j| (j, rng.random_range(-4..=4) as f64)).collect();
        lp.inequalities.push(Constraint::new(coeffs, rng.random_range(-6..=20) as f64));
    }
    if rng.random_bool(0.5) {
        let coeffs = (0..n).map(|j| (j, rng.random_range(-3..=3) as f64)).collect();
        lp.equalities.push(Constraint::new(coeffs, rng.random_range(-5..=10) as f64));
    }
    lp
}

/// Optimal value over all vertices of a program with finite bounds, or
/// `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective.len();
    // Each candidate face is a row `a' x = b`.
    let dense = |c: &Constraint| {
        let mut row = vec![0.0; n];
        for &(j, v) in &c.coeffs {
            row[j] += v;
        }
        (row, c.rhs)
    };
    let fixed: Vec<(Vec<f64>, f64)> = lp.equalities.iter().map(dense).collect();
    let mut optional: Vec<(Vec<f64>, f64)> = lp.inequalities.iter().map(dense).collect();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        assert!(lo.is_finite() && hi.is_finite(), "oracle needs finite bounds");
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        optional.push((e.clone(), lo));
        optional.push((e, hi));
    }
    let need = n.checked_sub(fixed.len())?;
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(need);
    enumerate(&optional, need, 0, &mut pick, &mut |chosen| {
        let rows: Vec<&(Vec<f64>, f64)> = fixed.iter().chain(chosen.iter().map(|&i| &optional[i])).collect();
        let a = DMatrix::from_fn(n, n, |r, c| rows[r].0[c]);
        let b = DVector::from_fn(n, |r, _| rows[r].1);
        let Some(x) = a.lu().solve(&b) else { return };
        let x: Vec<f64> = x.iter().copied().collect();
        if x.iter().any(|v| !v.is_finite()) || lp.max_violation(&x) > 1e-7 {
            return;
        }
        let value = lp.objective_value(&x);
        best = Some(best.map_or(value, |b: f64| b.min(value)));
    });
    best
}

fn enumerate(items: &[(Vec<f64>, f64)], k: usize, start: usize, pick: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        visit(pick);
        return;
    }
    for i in start..items.len() {
        pick.push(i);
        enumerate(items, k, i + 1, pick, visit);
        pick.pop();
    }
}

/// Irreducible chain on `n` states: a random directed cycle plus random
/// extra edges, rates in `(0, 5)`.
pub fn random_irreducible_chain<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut rates = DMatrix::zeros(n, n);
    for k in 0..n {
        let (i, j) = (order[k], order[(k + 1) % n]);
        if i != j {
            rates[(i, j)] = rng.random_range(0.05..5.0);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(0.3) {
                rates[(i, j)] = rng.random_range(0.05..5.0);
            }
        }
    }
    rates
}

/// Stationary distribution from `pi Q = 0, sum(pi) = 1` by a dense solve.
pub fn dense_stationary(rates: &DMatrix<f64>) -> Vec<f64> {
    let n = rates.nrows();
    let mut q = rates.clone();
    for i in 0..n {
        q[(i, i)] = 0.0;
        let out: f64 = q.row(i).sum();
        q[(i, i)] = -out;
    }
    // Q' pi = 0 with the last row replaced by normalization.
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("irreducible chain").iter().copied().collect()
}

/// Moments of `N(d; m, v) L(d)` by the trapezoid rule on `steps` panels
/// over ±14 standard deviations.
pub fn dense_tilted(m: f64, v: f64, outcome: Outcome, steps: usize) -> (f64, f64) {
    let sd = v.sqrt();
    let (lo, hi) = (m - 14.0 * sd, m + 14.0 * sd);
    let h = (hi - lo) / steps as f64;
    let (mut z, mut s1) = (0.0, 0.0);
    let mut values = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let d = lo + h * i as f64;
        let end = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let f = end * (-(d - m) * (d - m) / (2.0 * v)).exp() * outcome_likelihood(outcome, d);
        z += f;
        s1 += f * d;
        values.push((d, f));
    }
    let mean = s1 / z;
    let var = values.iter().map(|&(d, f)| f * (d - mean) * (d - mean)).sum::<f64>() / z;
    (mean, var)
}

/// `E[logistic(d)]`, `d ~ N(m, v)`, by the trapezoid rule.
pub fn dense_expected_logistic(m: f64, v: f64, steps: usize) -> f64 {
    let sd = v.sqrt();
    let (lo, hi) = (m - 14.0 * sd, m + 14.0 * sd);
    let h = (hi - lo) / steps as f64;
    let (mut z, mut s) = (0.0, 0.0);
    for i in 0..=steps {
        let d = lo + h * i as f64;
        let end = if i == 0 || i == steps { 0.5 } else { 1.0 };
        let g = end * (-(d - m) * (d - m) / (2.0 * v)).exp();
        z += g;
        s += g * sigmoid(d);
    }
    s / z
}

/// Exact posterior mean of `s_a - s_b` for two items with independent
/// `N(0, prior_var)` priors after `wins` wins of A, by a 2-D grid.
pub fn grid_posterior_gap(wins: u32, prior_var: f64, half_width: f64, points: usize) -> f64 {
    let h = 2.0 * half_width / (points - 1) as f64;
    let (mut z, mut s) = (0.0, 0.0);
    for i in 0..points {
        let sa = -half_width + h * i as f64;
        let pa = (-sa * sa / (2.0 * prior_var)).exp();
        for j in 0..points {
            let sb = -half_width + h * j as f64;
            let w = pa * (-sb * sb / (2.0 * prior_var)).exp() * sigmoid(sa - sb).powi(wins as i32);
            z += w;
            s += w * (sa - sb);
        }
    }
    s / z
}
