//! Two-player TrueSkill: Gaussian beliefs updated by moment matching the
//! truncated performance difference.
//!
//! With `c^2 = 2 beta^2 + sigma_a^2 + sigma_b^2`, a win by A shifts A's mean
//! up and B's mean down by `sigma^2 / c * v`, and shrinks each variance by
//! the factor `1 - sigma^2 / c^2 * w`. Draws use the two-sided truncation
//! of the draw band `[-epsilon, epsilon]`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ItemCatalog, Outcome};
use crate::error::{Error, Result};
use crate::scores::{GaussianRating, Method, OutcomeDistribution, ScoreTable};
use crate::stats::{draw_corrections, normal_cdf, normal_quantile, v_win, w_win};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueSkillParams {
    pub mu0: f64,
    pub sigma0: f64,
    /// Per-comparison performance standard deviation.
    pub beta: f64,
    /// Draw margin, in score units.
    pub epsilon: f64,
}

impl Default for TrueSkillParams {
    fn default() -> Self {
        let sigma0 = 25.0 / 3.0;
        let beta = sigma0 / 2.0;
        TrueSkillParams { mu0: 25.0, sigma0, beta, epsilon: 0.1 * initial_c(sigma0, beta) }
    }
}

/// `c` for a comparison between two fresh items.
pub fn initial_c(sigma0: f64, beta: f64) -> f64 {
    (2.0 * beta * beta + 2.0 * sigma0 * sigma0).sqrt()
}

impl TrueSkillParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.beta > 0.0 && self.epsilon >= 0.0 && self.mu0.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid TrueSkill parameters {self:?}")));
        }
        Ok(())
    }

    pub fn prior(&self) -> GaussianRating {
        GaussianRating { mu: self.mu0, sigma2: self.sigma0 * self.sigma0 }
    }

    /// Sets the draw margin to `units` multiples of the fresh-pair `c`.
    pub fn with_margin_in_c_units(mut self, units: f64) -> Self {
        self.epsilon = units * initial_c(self.sigma0, self.beta);
        self
    }

    fn c(&self, a: &GaussianRating, b: &GaussianRating) -> f64 {
        (2.0 * self.beta * self.beta + a.sigma2 + b.sigma2).sqrt()
    }
}

/// Draw margin under which two items of exactly known, equal skill tie
/// with probability `tie_rate`.
pub fn margin_from_tie_rate(tie_rate: f64, beta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tie_rate) {
        return Err(Error::InvalidInput(format!("tie rate {tie_rate} outside [0, 1)")));
    }
    Ok(normal_quantile((tie_rate + 1.0) / 2.0) * std::f64::consts::SQRT_2 * beta)
}

pub fn ts_update(
    a: GaussianRating,
    b: GaussianRating,
    outcome: Outcome,
    params: &TrueSkillParams,
) -> (GaussianRating, GaussianRating) {
    let c = params.c(&a, &b);
    let c2 = c * c;
    let margin = params.epsilon / c;
    // (v, w) in A's frame: positive v moves A up and B down.
    let (v, w) = match outcome {
        Outcome::WinA => {
            let x = (a.mu - b.mu) / c - margin;
            (v_win(x), w_win(x))
        }
        Outcome::WinB => {
            let x = (b.mu - a.mu) / c - margin;
            (-v_win(x), w_win(x))
        }
        Outcome::Tie => draw_corrections((a.mu - b.mu) / c, margin),
    };
    let next = |r: GaussianRating, sign: f64| GaussianRating {
        mu: r.mu + sign * r.sigma2 / c * v,
        sigma2: r.sigma2 * (1.0 - r.sigma2 / c2 * w),
    };
    (next(a, 1.0), next(b, -1.0))
}

/// Predictive outcome distribution: the performance difference is
/// `N(mu_a - mu_b, c^2)` and a tie is a difference within the draw margin.
pub fn ts_predict(a: &GaussianRating, b: &GaussianRating, params: &TrueSkillParams) -> OutcomeDistribution {
    let c = params.c(a, b);
    let p_win_a = normal_cdf((a.mu - b.mu - params.epsilon) / c);
    let p_win_b = normal_cdf((b.mu - a.mu - params.epsilon) / c);
    let p_tie = (1.0 - p_win_a - p_win_b).max(0.0);
    OutcomeDistribution { p_win_a, p_win_b, p_tie }
}

/// Which summary of the belief a score table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TsScore {
    #[default]
    Mean,
    /// `mu - 3 sigma`
    Conservative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueSkillRater {
    params: TrueSkillParams,
    ratings: Vec<GaussianRating>,
}

impl TrueSkillRater {
    pub fn new(items: usize, params: TrueSkillParams) -> Result<Self> {
        params.validate()?;
        Ok(TrueSkillRater { params, ratings: vec![params.prior(); items] })
    }

    pub fn params(&self) -> &TrueSkillParams {
        &self.params
    }

    pub fn ratings(&self) -> &[GaussianRating] {
        &self.ratings
    }

    pub fn rating(&self, idx: usize) -> GaussianRating {
        self.ratings[idx]
    }

    pub fn add_item(&mut self) -> usize {
        self.ratings.push(self.params.prior());
        self.ratings.len() - 1
    }

    pub fn apply(&mut self, a: usize, b: usize, outcome: Outcome) {
        let (ra, rb) = ts_update(self.ratings[a], self.ratings[b], outcome, &self.params);
        self.ratings[a] = ra;
        self.ratings[b] = rb;
    }

    pub fn predict(&self, a: usize, b: usize) -> OutcomeDistribution {
        ts_predict(&self.ratings[a], &self.ratings[b], &self.params)
    }

    pub fn fit(data: &Dataset, params: TrueSkillParams) -> Result<Self> {
        let mut rater = TrueSkillRater::new(data.catalog().len(), params)?;
        for c in data.indexed() {
            rater.apply(c.a, c.b, c.outcome);
        }
        Ok(rater)
    }

    pub fn table(&self, catalog: &ItemCatalog, score: TsScore) -> Result<ScoreTable> {
        let mut table = ScoreTable::new(Method::TrueSkill);
        table.params.insert("mu0".into(), self.params.mu0);
        table.params.insert("sigma0".into(), self.params.sigma0);
        table.params.insert("beta".into(), self.params.beta);
        table.params.insert("epsilon".into(), self.params.epsilon);
        for (id, r) in catalog.ids().zip(&self.ratings) {
            let s = match score {
                TsScore::Mean => r.mu,
                TsScore::Conservative => r.conservative(),
            };
            table.insert(id.clone(), s, Some(*r))?;
        }
        Ok(table)
    }
}
