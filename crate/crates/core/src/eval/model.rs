//! Uniform fit/predict over all rating methods.

use std::collections::BTreeMap;

use crate::batch::{bt_predict, co_fit, lsr_fit, CoParams, LsrFit, LsrParams};
use crate::data::{Dataset, ItemCatalog, ItemId};
use crate::error::{Error, Result};
use crate::gp::{ep_fit, gp_predict, GpParams, PosteriorTable};
use crate::online::{EloParams, EloRater, TrueSkillParams, TrueSkillRater, TsScore};
use crate::scores::{Method, OutcomeDistribution, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodParams {
    Elo(EloParams),
    TrueSkill(TrueSkillParams),
    Co(CoParams),
    Lsr(LsrParams),
    Gp(GpParams),
}

impl MethodParams {
    pub fn default_for(method: Method) -> MethodParams {
        match method {
            Method::Elo => MethodParams::Elo(EloParams::default()),
            Method::TrueSkill => MethodParams::TrueSkill(TrueSkillParams::default()),
            Method::Co => MethodParams::Co(CoParams::default()),
            Method::Lsr => MethodParams::Lsr(LsrParams::default()),
            Method::Gp => MethodParams::Gp(GpParams::default()),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            MethodParams::Elo(_) => Method::Elo,
            MethodParams::TrueSkill(_) => Method::TrueSkill,
            MethodParams::Co(_) => Method::Co,
            MethodParams::Lsr(_) => Method::Lsr,
            MethodParams::Gp(_) => Method::Gp,
        }
    }

    /// Applies named overrides. For TrueSkill, `epsilon_c` sets the draw
    /// margin in multiples of the fresh-pair `c`, after `sigma0` and `beta`
    /// have been applied.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<MethodParams> {
        let mut out = *self;
        let unknown = |k: &str| Error::InvalidInput(format!("unknown {} parameter {k:?}", self.method()));
        let as_count = |k: &str, v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidInput(format!("parameter {k} must be a non-negative integer, got {v}")))
            }
        };
        match &mut out {
            MethodParams::Elo(p) => {
                for (k, &v) in overrides {
                    match k.as_str() {
                        "initial" => p.initial = v,
                        "k" => p.k = v,
                        "delta" => p.delta = v,
                        _ => return Err(unknown(k)),
                    }
                }
                p.validate()?;
            }
            MethodParams::TrueSkill(p) => {
                let mut margin_units = None;
                for (k, &v) in overrides {
                    match k.as_str() {
                        "mu0" => p.mu0 = v,
                        "sigma0" => p.sigma0 = v,
                        "beta" => p.beta = v,
                        "epsilon" => p.epsilon = v,
                        "epsilon_c" => margin_units = Some(v),
                        _ => return Err(unknown(k)),
                    }
                }
                if overrides.contains_key("epsilon") && margin_units.is_some() {
                    return Err(Error::InvalidInput("give either epsilon or epsilon_c, not both".into()));
                }
                if let Some(u) = margin_units {
                    *p = p.with_margin_in_c_units(u);
                }
                p.validate()?;
            }
            MethodParams::Co(p) => {
                for (k, &v) in overrides {
                    match k.as_str() {
                        "epsilon" => p.epsilon = v,
                        "lambda_ties" => p.lambda_ties = v,
                        _ => return Err(unknown(k)),
                    }
                }
                p.validate()?;
            }
            MethodParams::Lsr(p) => {
                for (k, &v) in overrides {
                    match k.as_str() {
                        "alpha_reg" => p.alpha_reg = v,
                        "tol" => p.tol = v,
                        "max_iters" => p.max_iters = as_count(k, v)?,
                        _ => return Err(unknown(k)),
                    }
                }
                if !(p.alpha_reg >= 0.0 && p.tol > 0.0) {
                    return Err(Error::InvalidInput(format!("invalid LSR parameters {p:?}")));
                }
            }
            MethodParams::Gp(p) => {
                for (k, &v) in overrides {
                    match k.as_str() {
                        "prior_var" => p.prior_var = v,
                        "quad_order" => p.quad_order = as_count(k, v)?,
                        "damping" => p.damping = v,
                        "max_sweeps" => p.max_sweeps = as_count(k, v)?,
                        "tol" => p.tol = v,
                        _ => return Err(unknown(k)),
                    }
                }
                p.validate()?;
            }
        }
        Ok(out)
    }

    /// Every parameter by name, as used in reports and score files.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match self {
            MethodParams::Elo(p) => vec![("initial", p.initial), ("k", p.k), ("delta", p.delta)],
            MethodParams::TrueSkill(p) => {
                vec![("mu0", p.mu0), ("sigma0", p.sigma0), ("beta", p.beta), ("epsilon", p.epsilon)]
            }
            MethodParams::Co(p) => vec![("epsilon", p.epsilon), ("lambda_ties", p.lambda_ties)],
            MethodParams::Lsr(p) => {
                vec![("alpha_reg", p.alpha_reg), ("tol", p.tol), ("max_iters", p.max_iters as f64)]
            }
            MethodParams::Gp(p) => vec![
                ("prior_var", p.prior_var),
                ("quad_order", p.quad_order as f64),
                ("damping", p.damping),
                ("max_sweeps", p.max_sweeps as f64),
                ("tol", p.tol),
            ],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// A rater fitted on a training set.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Elo(EloRater),
    TrueSkill(TrueSkillRater),
    Co(ScoreTable),
    Lsr(LsrFit),
    Gp(PosteriorTable),
}

impl FittedModel {
    /// Online raters consume `train` in record order.
    pub fn fit(train: &Dataset, params: &MethodParams) -> Result<FittedModel> {
        Ok(match *params {
            MethodParams::Elo(p) => FittedModel::Elo(EloRater::fit(train, p)?),
            MethodParams::TrueSkill(p) => FittedModel::TrueSkill(TrueSkillRater::fit(train, p)?),
            MethodParams::Co(p) => FittedModel::Co(co_fit(train, p)?.table),
            MethodParams::Lsr(p) => FittedModel::Lsr(lsr_fit(train, p)?),
            MethodParams::Gp(p) => FittedModel::Gp(ep_fit(train, p)?),
        })
    }

    /// Outcome distribution for `a` against `b`, both from `catalog` (the
    /// catalog the model was fitted with). Methods without a native tie
    /// probability set `tie_share` aside for a tie. Items LSR cannot place
    /// relative to each other get an even split.
    pub fn predict(&self, catalog: &ItemCatalog, a: &ItemId, b: &ItemId, tie_share: f64) -> Result<OutcomeDistribution> {
        let index = |id: &ItemId| catalog.index_of(id).ok_or_else(|| Error::UnknownItem(id.to_string()));
        match self {
            FittedModel::Elo(r) => r.predict(index(a)?, index(b)?, Some(tie_share)),
            FittedModel::TrueSkill(r) => Ok(r.predict(index(a)?, index(b)?)),
            FittedModel::Co(t) => bt_predict(t, a, b, tie_share),
            FittedModel::Lsr(fit) => {
                index(a)?;
                index(b)?;
                if fit.comparable(a, b) {
                    bt_predict(&fit.table, a, b, tie_share)
                } else {
                    OutcomeDistribution::from_decisive(0.5, tie_share)
                }
            }
            FittedModel::Gp(post) => gp_predict(post, a, b, tie_share),
        }
    }

    pub fn table(&self, catalog: &ItemCatalog) -> Result<ScoreTable> {
        match self {
            FittedModel::Elo(r) => r.table(catalog),
            FittedModel::TrueSkill(r) => r.table(catalog, TsScore::Mean),
            FittedModel::Co(t) => Ok(t.clone()),
            FittedModel::Lsr(fit) => Ok(fit.table.clone()),
            FittedModel::Gp(post) => Ok(post.table.clone()),
        }
    }
}

/// Fits `params` on all of `data` and returns the score table, with the
/// parameters recorded in it.
pub fn fit_scores(data: &Dataset, params: &MethodParams) -> Result<ScoreTable> {
    let model = FittedModel::fit(data, params)?;
    let mut table = model.table(data.catalog())?;
    for (k, v) in params.to_map() {
        table.params.entry(k).or_insert(v);
    }
    Ok(table)
}
