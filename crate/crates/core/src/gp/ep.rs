//! Expectation propagation for a logistic comparison likelihood under an
//! independent Gaussian prior on item scores.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::quadrature::gauss_hermite;
use crate::data::{Dataset, ItemId, Outcome};
use crate::error::{Error, Result};
use crate::scores::{fmt_f64, GaussianRating, Method, OutcomeDistribution, ScoreTable};
use crate::stats::{log_logistic, logistic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    /// Prior variance of every item score.
    pub prior_var: f64,
    /// Gauss–Hermite nodes used for the tilted moments and for prediction.
    pub quad_order: usize,
    /// Fraction of each site update applied; 1 is undamped.
    pub damping: f64,
    pub max_sweeps: usize,
    /// Convergence threshold on the largest change of a site parameter.
    pub tol: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        GpParams { prior_var: 1.0, quad_order: 128, damping: 0.5, max_sweeps: 100, tol: 1e-6 }
    }
}

impl GpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.prior_var > 0.0
            && self.prior_var.is_finite()
            && self.quad_order >= 8
            && self.damping > 0.0
            && self.damping <= 1.0
            && self.tol > 0.0;
        if !ok {
            return Err(Error::InvalidInput(format!("invalid GP parameters {self:?}")));
        }
        Ok(())
    }
}

/// Natural parameters of one approximate likelihood factor on `s_a - s_b`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EpSite {
    pub precision: f64,
    pub precision_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedMoments {
    pub mean: f64,
    pub var: f64,
    pub log_partition: f64,
}

fn log_likelihood(outcome: Outcome, d: f64) -> f64 {
    match outcome {
        Outcome::WinA => log_logistic(d),
        Outcome::WinB => log_logistic(-d),
        Outcome::Tie => 0.5 * (log_logistic(d) + log_logistic(-d)),
    }
}

fn likelihood(outcome: Outcome, d: f64) -> f64 {
    match outcome {
        Outcome::WinA => logistic(d),
        Outcome::WinB => logistic(-d),
        Outcome::Tie => (logistic(d) * logistic(-d)).sqrt(),
    }
}

/// Mean, variance and log normalizer of `N(d; cavity_mean, cavity_var) L(d)`.
pub fn tilted_moments(cavity_mean: f64, cavity_var: f64, outcome: Outcome, quad_order: usize) -> TiltedMoments {
    debug_assert!(cavity_var > 0.0);
    let gh = gauss_hermite(quad_order);
    let scale = (2.0 * cavity_var).sqrt();
    let (mut z, mut s1) = (0.0, 0.0);
    for (&x, &w) in gh.nodes.iter().zip(&gh.weights) {
        let d = cavity_mean + scale * x;
        let f = w * likelihood(outcome, d);
        z += f;
        s1 += f * d;
    }
    if !(z > 1e-280) {
        return tilted_moments_log(cavity_mean, cavity_var, outcome, quad_order);
    }
    let mean = s1 / z;
    let var = gh
        .nodes
        .iter()
        .zip(&gh.weights)
        .map(|(&x, &w)| {
            let d = cavity_mean + scale * x;
            w * likelihood(outcome, d) * (d - mean).powi(2)
        })
        .sum::<f64>()
        / z;
    TiltedMoments { mean, var, log_partition: z.ln() - 0.5 * std::f64::consts::PI.ln() }
}

/// Log-space variant for cavities far in the tail of the likelihood.
fn tilted_moments_log(cavity_mean: f64, cavity_var: f64, outcome: Outcome, quad_order: usize) -> TiltedMoments {
    let gh = gauss_hermite(quad_order);
    let scale = (2.0 * cavity_var).sqrt();
    let points: Vec<(f64, f64)> = gh
        .nodes
        .iter()
        .zip(&gh.weights)
        .map(|(&x, &w)| {
            let d = cavity_mean + scale * x;
            (d, w.ln() + log_likelihood(outcome, d))
        })
        .collect();
    let top = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = points.iter().map(|p| (p.1 - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mean = points.iter().zip(&weights).map(|(p, w)| w * p.0).sum::<f64>() / z;
    let var = points.iter().zip(&weights).map(|(p, w)| w * (p.0 - mean).powi(2)).sum::<f64>() / z;
    TiltedMoments { mean, var, log_partition: top + z.ln() - 0.5 * std::f64::consts::PI.ln() }
}

/// Fitted posterior: per-item Gaussian marginals plus convergence
/// diagnostics. Scores in `table` are posterior means.
#[derive(Debug, Clone)]
pub struct PosteriorTable {
    pub table: ScoreTable,
    pub params: GpParams,
    pub sweeps: usize,
    /// Largest site-parameter change in the final sweep.
    pub max_delta: f64,
    pub converged: bool,
    /// Site updates skipped because the cavity had non-positive precision.
    pub skipped_updates: usize,
}

impl PosteriorTable {
    pub fn rating(&self, item: &ItemId) -> Option<GaussianRating> {
        self.table.rating(item)
    }

    /// CSV with header `item,mu,sigma`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["item", "mu", "sigma"])?;
        for e in self.table.entries() {
            let r = e.rating.expect("posterior entries carry ratings");
            w.write_record([e.item.as_str(), &fmt_f64(r.mu), &fmt_f64(r.sigma())])?;
        }
        w.flush().map_err(Error::Stream)?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

struct Ep {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    sites: Vec<EpSite>,
    prior_var: f64,
    buf: DVector<f64>,
}

impl Ep {
    fn new(m: usize, n: usize, prior_var: f64) -> Ep {
        Ep {
            mu: DVector::zeros(m),
            sigma: DMatrix::from_diagonal_element(m, m, prior_var),
            sites: vec![EpSite::default(); n],
            prior_var,
            buf: DVector::zeros(m),
        }
    }

    /// One site update; returns the largest parameter change, or `None`
    /// when the cavity is improper and the site was left alone.
    fn update(&mut self, idx: usize, a: usize, b: usize, outcome: Outcome, params: &GpParams) -> Option<f64> {
        let m = self.mu[a] - self.mu[b];
        let v = self.sigma[(a, a)] + self.sigma[(b, b)] - 2.0 * self.sigma[(a, b)];
        let site = self.sites[idx];
        let cav_prec = 1.0 / v - site.precision;
        if !(cav_prec > 0.0 && cav_prec.is_finite()) {
            return None;
        }
        let cav_var = 1.0 / cav_prec;
        let cav_mean = cav_var * (m / v - site.precision_mean);
        let t = tilted_moments(cav_mean, cav_var, outcome, params.quad_order);

        let target_prec = (1.0 / t.var - cav_prec).max(0.0);
        let target_pm = t.mean / t.var - cav_mean / cav_var;
        let new_prec = site.precision + params.damping * (target_prec - site.precision);
        let new_pm = site.precision_mean + params.damping * (target_pm - site.precision_mean);
        let d_prec = new_prec - site.precision;
        let d_pm = new_pm - site.precision_mean;
        self.sites[idx] = EpSite { precision: new_prec, precision_mean: new_pm };

        // Sherman–Morrison on x = e_a - e_b.
        self.buf.copy_from(&self.sigma.column(a));
        self.buf -= self.sigma.column(b);
        let denom = 1.0 + d_prec * v;
        let shift = (d_pm - d_prec * m) / denom;
        self.mu.axpy(shift, &self.buf, 1.0);
        self.sigma.ger(-d_prec / denom, &self.buf, &self.buf, 1.0);
        Some(d_prec.abs().max(d_pm.abs()))
    }

    /// Rebuilds the posterior from the sites to shed accumulated rounding.
    fn refresh(&mut self, pairs: &[(usize, usize)]) -> Result<()> {
        let m = self.mu.len();
        let mut prec = DMatrix::from_diagonal_element(m, m, 1.0 / self.prior_var);
        let mut h = DVector::zeros(m);
        for (site, &(a, b)) in self.sites.iter().zip(pairs) {
            prec[(a, a)] += site.precision;
            prec[(b, b)] += site.precision;
            prec[(a, b)] -= site.precision;
            prec[(b, a)] -= site.precision;
            h[a] += site.precision_mean;
            h[b] -= site.precision_mean;
        }
        let chol = prec
            .cholesky()
            .ok_or_else(|| Error::Internal("posterior precision is not positive definite".into()))?;
        self.sigma = chol.inverse();
        self.mu = &self.sigma * h;
        Ok(())
    }
}

/// Fits the posterior by sequential damped EP sweeps over `train` in record
/// order. Items without comparisons keep the prior.
pub fn ep_fit(train: &Dataset, params: GpParams) -> Result<PosteriorTable> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("cannot fit on an empty dataset".into()));
    }
    let records = train.indexed();
    let pairs: Vec<(usize, usize)> = records.iter().map(|c| (c.a, c.b)).collect();
    let m = train.catalog().len();
    let mut ep = Ep::new(m, records.len(), params.prior_var);

    let mut sweeps = 0;
    let mut max_delta = f64::INFINITY;
    let mut skipped = 0;
    while sweeps < params.max_sweeps {
        sweeps += 1;
        max_delta = 0.0f64;
        for (idx, c) in records.iter().enumerate() {
            match ep.update(idx, c.a, c.b, c.outcome, &params) {
                Some(delta) => max_delta = max_delta.max(delta),
                None => skipped += 1,
            }
        }
        ep.refresh(&pairs)?;
        if max_delta < params.tol {
            break;
        }
    }

    let mut table = ScoreTable::new(Method::Gp);
    table.params.insert("prior_var".into(), params.prior_var);
    for (i, id) in train.catalog().ids().enumerate() {
        let var = ep.sigma[(i, i)].min(params.prior_var);
        let rating = GaussianRating::new(ep.mu[i], var)?;
        table.insert(id.clone(), ep.mu[i], Some(rating))?;
    }
    Ok(PosteriorTable {
        table,
        params,
        sweeps,
        max_delta,
        converged: max_delta < params.tol,
        skipped_updates: skipped,
    })
}

/// `E[logistic(d)]` for `d ~ N(mean, var)`.
pub fn expected_logistic(mean: f64, var: f64, quad_order: usize) -> f64 {
    if var <= 0.0 {
        return logistic(mean);
    }
    gauss_hermite(quad_order).expect(mean, var, logistic)
}

/// Predictive distribution from the posterior marginals of `a` and `b`.
pub fn gp_predict(posterior: &PosteriorTable, a: &ItemId, b: &ItemId, tie_share: f64) -> Result<OutcomeDistribution> {
    let ra = posterior.rating(a).ok_or_else(|| Error::UnknownItem(a.to_string()))?;
    let rb = posterior.rating(b).ok_or_else(|| Error::UnknownItem(b.to_string()))?;
    let p = expected_logistic(ra.mu - rb.mu, ra.sigma2 + rb.sigma2, posterior.params.quad_order);
    OutcomeDistribution::from_decisive(p, tie_share)
}
