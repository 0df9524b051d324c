//! Gaussian tail and quadrature helpers, evaluated in `f64`.

use gauss_quad::hermite::GaussHermite;
use libm::erfc;
use std::f64::consts::{LN_2, PI, SQRT_2};
use std::sync::OnceLock;

/// Number of Gauss-Hermite nodes used for channel-level expectations.
pub const HERMITE_NODES: usize = 96;

/// Above this argument the tail is evaluated through its asymptotic series.
const ASYMPTOTIC_FROM: f64 = 30.0;

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    if x > ASYMPTOTIC_FROM {
        ln_q_function(x).exp()
    } else {
        0.5 * erfc(x / SQRT_2)
    }
}

/// `ln Q(x)`, finite for every finite `x`.
pub fn ln_q_function(x: f64) -> f64 {
    if x <= ASYMPTOTIC_FROM {
        (0.5 * erfc(x / SQRT_2)).ln()
    } else {
        ln_q_asymptotic(x)
    }
}

fn ln_q_asymptotic(x: f64) -> f64 {
    let r = 1.0 / (x * x);
    let series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
    -0.5 * x * x - x.ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

/// `log2(1 + e^{-t})` without overflow for large negative `t`.
pub fn log2_one_plus_exp_neg(t: f64) -> f64 {
    let nats = if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    };
    nats / LN_2
}

fn hermite_rule() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(HERMITE_NODES).expect("node count >= 2"))
}

/// `E[f(Z)]` for a standard normal `Z`.
pub fn expect_standard_normal(f: impl Fn(f64) -> f64) -> f64 {
    hermite_rule().integrate(|x| f(SQRT_2 * x)) / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_known_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((q_function(-1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    #[test]
    fn asymptotic_branch_is_continuous() {
        let direct = (0.5 * erfc(ASYMPTOTIC_FROM / SQRT_2)).ln();
        let series = ln_q_asymptotic(ASYMPTOTIC_FROM);
        assert!((direct - series).abs() < 1e-11 * direct.abs(), "{direct} vs {series}");
        assert!(ln_q_function(100.0).is_finite());
        assert!(q_function(100.0) == 0.0 || q_function(100.0) < 1e-300);
    }

    #[test]
    fn hermite_moments() {
        assert!((expect_standard_normal(|_| 1.0) - 1.0).abs() < 1e-12);
        assert!((expect_standard_normal(|z| z * z) - 1.0).abs() < 1e-12);
        assert!((expect_standard_normal(|z| z.powi(4)) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn softplus_base2() {
        assert!((log2_one_plus_exp_neg(0.0) - 1.0).abs() < 1e-15);
        assert!((log2_one_plus_exp_neg(-800.0) - 800.0 / LN_2).abs() < 1e-9);
        assert!(log2_one_plus_exp_neg(800.0) >= 0.0);
    }
}
