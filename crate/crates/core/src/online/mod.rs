//! Sequential raters: each comparison updates the two items involved,
//! strictly in dataset order.

pub mod elo;
pub mod trueskill;

pub use elo::{elo_expected, elo_predict, elo_update, EloParams, EloRater};
pub use trueskill::{
    margin_from_tie_rate, ts_predict, ts_update, TrueSkillParams, TrueSkillRater, TsScore,
};
