use pairrank_core::batch::{co_fit, lsr_fit, CoParams, LsrParams};
use pairrank_core::eval::normalize_scores;
use pairrank_core::gp::{ep_fit, expected_logistic, GpParams};
use pairrank_core::labeling::{label_items, thresholds, Label, LabelParams, StdMode};
use pairrank_core::online::{elo_update, ts_predict, ts_update, EloParams, EloRater, TrueSkillParams};
use pairrank_core::stats::{logistic, mean};
use pairrank_core::{ComparisonRecord, Dataset, GaussianRating, Method, Outcome, ScoreTable};
use proptest::prelude::*;

fn outcome() -> impl Strategy<Value = Outcome> {
    prop_oneof![Just(Outcome::WinA), Just(Outcome::WinB), Just(Outcome::Tie)]
}

/// Records over `m` items, never comparing an item with itself.
fn records(m: usize, max_len: usize) -> impl Strategy<Value = Vec<(usize, usize, Outcome)>> {
    prop::collection::vec((0..m, 1..m, outcome()), 1..max_len)
        .prop_map(move |v| v.into_iter().map(|(a, off, o)| (a, (a + off) % m, o)).collect())
}

fn dataset(rows: &[(usize, usize, Outcome)]) -> Dataset {
    let records = rows
        .iter()
        .map(|&(a, b, o)| ComparisonRecord::new(format!("i{a}"), format!("i{b}"), o).unwrap())
        .collect();
    Dataset::from_records(records).unwrap()
}

fn negated(rows: &[(usize, usize, Outcome)]) -> Vec<(usize, usize, Outcome)> {
    rows.iter().map(|&(a, b, o)| (a, b, o.mirrored())).collect()
}

fn table(scores: &[f64]) -> ScoreTable {
    let mut t = ScoreTable::new(Method::Co);
    for (i, &s) in scores.iter().enumerate() {
        t.insert(format!("i{i}").as_str().into(), s, None).unwrap();
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn elo_is_zero_sum_and_translation_invariant(rows in records(6, 40), shift in -1e4f64..1e4) {
        let data = dataset(&rows);
        let params = EloParams::default();
        let base = EloRater::fit(&data, params).unwrap();
        let total: f64 = base.scores().iter().sum();
        prop_assert!((total - params.initial * base.scores().len() as f64).abs() < 1e-8);

        let moved = EloRater::fit(&data, EloParams { initial: params.initial + shift, ..params }).unwrap();
        for (x, y) in base.scores().iter().zip(moved.scores()) {
            prop_assert!((y - x - shift).abs() < 1e-8);
        }
    }

    #[test]
    fn elo_single_update_transfers(sa in -3000f64..3000.0, sb in -3000f64..3000.0, o in outcome()) {
        let (a, b) = elo_update(sa, sb, o, &EloParams::default());
        prop_assert!((a + b - sa - sb).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn trueskill_sigma_strictly_shrinks(
        mu_a in 0f64..50.0, mu_b in 0f64..50.0,
        sa in 0.5f64..10.0, sb in 0.5f64..10.0,
        o in outcome(),
    ) {
        let params = TrueSkillParams::default();
        let a = GaussianRating::new(mu_a, sa * sa).unwrap();
        let b = GaussianRating::new(mu_b, sb * sb).unwrap();
        let (a2, b2) = ts_update(a, b, o, &params);
        prop_assert!(a2.sigma2 < a.sigma2 && b2.sigma2 < b.sigma2);
        prop_assert!(a2.sigma2 > 0.0 && b2.sigma2 > 0.0);
    }

    #[test]
    fn trueskill_prediction_swaps(
        mu_a in 0f64..50.0, mu_b in 0f64..50.0,
        sa in 0.5f64..10.0, sb in 0.5f64..10.0,
    ) {
        let params = TrueSkillParams::default();
        let a = GaussianRating::new(mu_a, sa * sa).unwrap();
        let b = GaussianRating::new(mu_b, sb * sb).unwrap();
        let ab = ts_predict(&a, &b, &params);
        let ba = ts_predict(&b, &a, &params);
        prop_assert!((ab.p_win_a - ba.p_win_b).abs() < 1e-12);
        prop_assert!((ab.p_tie - ba.p_tie).abs() < 1e-12);
        prop_assert!((ab.p_win_a + ab.p_win_b + ab.p_tie - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lsr_ignores_record_order(rows in records(5, 30), seed in any::<u64>()) {
        let params = LsrParams { alpha_reg: 0.1, ..Default::default() };
        let data = dataset(&rows);
        let mut shuffled = data.records().to_vec();
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        let other = Dataset::with_catalog(data.catalog().clone(), shuffled).unwrap();
        let x = lsr_fit(&data, params).unwrap().table;
        let y = lsr_fit(&other, params).unwrap().table;
        for (e, f) in x.entries().iter().zip(y.entries()) {
            prop_assert_eq!(&e.item, &f.item);
            prop_assert!((e.score - f.score).abs() < 1e-9);
        }
    }

    #[test]
    fn co_scores_sum_to_zero(rows in records(5, 25)) {
        let fit = co_fit(&dataset(&rows), CoParams::default()).unwrap();
        prop_assert!(fit.table.scores().iter().sum::<f64>().abs() < 1e-8);
        prop_assert!(fit.objective >= 0.0);
    }

    #[test]
    fn normalization_preserves_order(scores in prop::collection::vec(-1e3f64..1e3, 2..30)) {
        let n = normalize_scores(&table(&scores)).unwrap();
        let out = n.table.scores();
        for i in 0..scores.len() {
            prop_assert!((0.0..=1.0).contains(&out[i]));
            for j in 0..scores.len() {
                if scores[i] < scores[j] {
                    prop_assert!(out[i] < out[j]);
                }
            }
        }
    }

    #[test]
    fn threshold_bands_nest(scores in prop::collection::vec(-10f64..10.0, 2..40), a1 in 0f64..3.0, extra in 0f64..3.0) {
        let t = table(&scores);
        let lo = label_items(&t, None, &LabelParams { alpha: a1, ..Default::default() }, 1.0).unwrap();
        let hi = label_items(&t, None, &LabelParams { alpha: a1 + extra, ..Default::default() }, 1.0).unwrap();
        for (x, y) in lo.iter().zip(&hi) {
            if y.label == Label::Safe {
                prop_assert_eq!(x.label, Label::Safe);
            }
            if y.label == Label::Unsafe {
                prop_assert_eq!(x.label, Label::Unsafe);
            }
        }
    }

    #[test]
    fn zero_alpha_collapses_to_mean(scores in prop::collection::vec(-10f64..10.0, 2..40), sample in any::<bool>()) {
        let mode = if sample { StdMode::Sample } else { StdMode::Population };
        let (lo, hi) = thresholds(&scores, 0.0, mode).unwrap();
        prop_assert_eq!(lo, hi);
        prop_assert_eq!(lo, mean(&scores));
    }

    #[test]
    fn labels_survive_positive_affine_maps(scores in prop::collection::vec(-10f64..10.0, 2..30), scale in 0.1f64..10.0, shift in -5f64..5.0, alpha in 0f64..2.0) {
        let params = LabelParams { alpha, ..Default::default() };
        let a = label_items(&table(&scores), None, &params, 1.0).unwrap();
        let moved: Vec<f64> = scores.iter().map(|s| scale * s + shift).collect();
        let b = label_items(&table(&moved), None, &params, 1.0).unwrap();
        // Items within rounding of a threshold may flip; everything else must agree.
        let (lo, hi) = thresholds(&scores, alpha, StdMode::Population).unwrap();
        for ((x, y), s) in a.iter().zip(&b).zip(&scores) {
            let near = (s - lo).abs() < 1e-9 || (s - hi).abs() < 1e-9;
            if !near {
                prop_assert_eq!(x.label, y.label);
            }
        }
    }

    #[test]
    fn expected_logistic_is_shrunk(m in -6f64..6.0, v in 0.01f64..20.0) {
        let p = expected_logistic(m, v, 128);
        prop_assert!((p - 0.5).abs() <= (logistic(m) - 0.5).abs() + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ep_negation_flips_means(rows in records(5, 20)) {
        let params = GpParams { tol: 1e-10, max_sweeps: 400, ..Default::default() };
        let data = dataset(&rows);
        let flipped = Dataset::with_catalog(data.catalog().clone(), dataset(&negated(&rows)).records().to_vec()).unwrap();
        let x = ep_fit(&data, params).unwrap();
        let y = ep_fit(&flipped, params).unwrap();
        for (e, f) in x.table.entries().iter().zip(y.table.entries()) {
            let (re, rf) = (e.rating.unwrap(), f.rating.unwrap());
            prop_assert!((re.mu + rf.mu).abs() < 1e-8, "{} vs {}", re.mu, rf.mu);
            prop_assert!((re.sigma2 - rf.sigma2).abs() < 1e-8);
            prop_assert!(re.sigma2 <= params.prior_var);
        }
    }

    #[test]
    fn ep_is_label_permutation_equivariant(rows in records(4, 15)) {
        let params = GpParams { tol: 1e-10, max_sweeps: 400, ..Default::default() };
        let data = dataset(&rows);
        // Relabel item i as item (3 - i); same record order.
        let relabeled: Vec<_> = rows.iter().map(|&(a, b, o)| (3 - a, 3 - b, o)).collect();
        let other = dataset(&relabeled);
        let x = ep_fit(&data, params).unwrap().table;
        let y = ep_fit(&other, params).unwrap().table;
        for e in x.entries() {
            let i: usize = e.item.as_str()[1..].parse().unwrap();
            let twin = y.score(&format!("i{}", 3 - i).as_str().into()).unwrap();
            prop_assert!((e.score - twin).abs() < 1e-9);
        }
    }
}
