//! Whole-dataset raters: the margin LP and Luce spectral ranking.

pub mod co;
pub mod lp;
pub mod lsr;

pub use co::{co_fit, co_program, CoFit, CoParams};
pub use lp::{lp_solve, Constraint, LinearProgram, LpSolution, LpStatus};
pub use lsr::{lsr_fit, stationary_distribution, LsrFit, LsrParams};

use crate::data::ItemId;
use crate::error::{Error, Result};
use crate::scores::{OutcomeDistribution, ScoreTable};
use crate::stats::logistic;

/// Bradley–Terry prediction from latent scores: A beats B with probability
/// `logistic(s_a - s_b)` after `tie_share` has been set aside for a tie.
pub fn bt_predict(scores: &ScoreTable, a: &ItemId, b: &ItemId, tie_share: f64) -> Result<OutcomeDistribution> {
    let sa = scores.score(a).ok_or_else(|| Error::UnknownItem(a.to_string()))?;
    let sb = scores.score(b).ok_or_else(|| Error::UnknownItem(b.to_string()))?;
    OutcomeDistribution::from_decisive(logistic(sa - sb), tie_share)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::Method;

    #[test]
    fn bt_predict_examples() {
        let mut t = ScoreTable::new(Method::Lsr);
        t.insert("a".into(), (2.0f64 / 3.0).ln(), None).unwrap();
        t.insert("b".into(), (1.0f64 / 3.0).ln(), None).unwrap();
        t.insert("c".into(), (1.0f64 / 3.0).ln(), None).unwrap();
        let d = bt_predict(&t, &"a".into(), &"b".into(), 0.0).unwrap();
        assert!((d.p_win_a - 2.0 / 3.0).abs() < 1e-15);
        let d = bt_predict(&t, &"b".into(), &"c".into(), 0.0).unwrap();
        assert_eq!((d.p_win_a, d.p_win_b, d.p_tie), (0.5, 0.5, 0.0));
        let d = bt_predict(&t, &"b".into(), &"c".into(), 0.25).unwrap();
        assert_eq!((d.p_win_a, d.p_win_b, d.p_tie), (0.375, 0.375, 0.25));
        assert!(bt_predict(&t, &"a".into(), &"zz".into(), 0.0).is_err());
    }
}
