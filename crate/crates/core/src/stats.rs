//! Scalar probability helpers shared by the raters.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln logistic(x)` without overflow for large `|x|`.
pub fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `ln Φ(x)`. Below -8 the left tail is evaluated through the Mills ratio,
/// so the result stays finite long after `Φ(x)` underflows.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x / SQRT_2)).ln_1p()
    } else if x > -8.0 {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(-x).ln()
    }
}

/// `Φ(-x) / φ(x)` for `x >= 8`, by continued fraction.
fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 8.0);
    let mut acc = x;
    for k in (1..=60).rev() {
        acc = x + k as f64 / acc;
    }
    1.0 / acc
}

/// `φ(x) / Φ(x)`, the additive mean correction for a win.
pub fn v_win(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI - log_normal_cdf(x)).exp()
}

/// Multiplicative variance correction for a win: `v (v + x)`.
pub fn w_win(x: f64) -> f64 {
    let v = v_win(x);
    let w = v * (v + x);
    w.clamp(0.0, 1.0)
}

/// Mean and variance corrections `(v, w)` for a draw, where `t` is the
/// normalized mean difference and `margin` the normalized draw half-width.
///
/// Evaluated in a frame scaled by `Φ(margin - |t|)` so that both the
/// numerator and the probability of the draw band stay representable.
pub fn draw_corrections(t: f64, margin: f64) -> (f64, f64) {
    let abs_t = t.abs();
    let upper = margin - abs_t;
    let lower = -margin - abs_t;
    let ratio = (log_normal_cdf(lower) - log_normal_cdf(upper)).exp();
    let band = 1.0 - ratio;
    if !(band > 1e-12) {
        // Zero-width band: the difference collapses onto zero.
        return (-t, 1.0);
    }
    let lam_upper = v_win(upper);
    let lam_lower = v_win(lower);
    let v_abs = (lam_lower * ratio - lam_upper) / band;
    let w = v_abs * v_abs + (upper * lam_upper - lower * lam_lower * ratio) / band;
    let v = if t < 0.0 { -v_abs } else { v_abs };
    (v, w.clamp(0.0, 1.0))
}

/// Inverse of the standard normal CDF.
pub fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation; `sample` selects the `n - 1` denominator.
pub fn std_dev(xs: &[f64], sample: bool) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let denom = if sample { xs.len() - 1 } else { xs.len() } as f64;
    (ss / denom).sqrt()
}

/// Kendall rank correlation (tau-b) between two equally long score lists.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = (x[i] - x[j]).partial_cmp(&0.0).unwrap() as i8;
            let dy = (y[i] - y[j]).partial_cmp(&0.0).unwrap() as i8;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => ties_x += 1,
                (_, 0) => ties_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (concordant + discordant) as f64;
    let denom = ((n0 + ties_x as f64) * (n0 + ties_y as f64)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / denom
}

/// Probit approximation of `E[logistic(d)]` for `d ~ N(mean, var)`.
pub fn probit_logistic_mean(mean: f64, var: f64) -> f64 {
    logistic(mean / (1.0 + PI * var / 8.0).sqrt())
}
