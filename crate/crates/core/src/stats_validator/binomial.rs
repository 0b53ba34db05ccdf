//! Exact binomial testing, Wilson intervals, Bonferroni correction, and
//! sample-size/power analysis.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

/// Two-sided 95% z.
pub const Z_95: f64 = 1.959963984540054;

/// P(X >= successes | n, p0), one-sided greater. Exact via the regularized
/// incomplete beta behind the binomial CDF.
pub fn binomial_test(successes: u64, n: u64, p0: f64) -> f64 {
    assert!(successes <= n, "successes {successes} > n {n}");
    if successes == 0 {
        return 1.0;
    }
    let dist = Binomial::new(p0, n).expect("valid binomial");
    dist.sf(successes - 1)
}

/// Family-wise alpha divided across m tests.
pub fn bonferroni(alpha: f64, m: u32) -> f64 {
    assert!(m >= 1);
    alpha / m as f64
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateWithCi {
    pub successes: u64,
    pub n: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn wilson_interval(successes: u64, n: u64, z: f64) -> RateWithCi {
    assert!(n > 0, "wilson interval needs n > 0");
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    RateWithCi {
        successes,
        n,
        rate: p,
        ci_low: (center - half).max(0.0),
        ci_high: (center + half).min(1.0),
    }
}

/// Required sample size for a one-sided binomial test of p1 > p0.
///
/// `required_n` is the normal-approximation estimate with the variance taken
/// at the alternative (the Wald-z convention). `exact_n` is the smallest n at
/// which the conservative exact test (critical value chosen so attained size
/// <= alpha) reaches the power target; discreteness makes it noticeably
/// larger at high power targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAnalysis {
    pub p0: f64,
    pub p1: f64,
    pub alpha: f64,
    pub target_power: f64,
    pub required_n: u64,
    pub exact_n: Option<u64>,
    pub exact_power_at_exact_n: Option<f64>,
}

fn upper_tail(c: u64, n: u64, p: f64) -> f64 {
    if c == 0 {
        return 1.0;
    }
    if c > n {
        return 0.0;
    }
    Binomial::new(p, n).expect("valid binomial").sf(c - 1)
}

pub fn power_analysis(p1: f64, p0: f64, alpha: f64, target_power: f64) -> PowerAnalysis {
    assert!(0.0 < p0 && p0 < p1 && p1 < 1.0, "need 0 < p0 < p1 < 1");
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z_alpha = normal.inverse_cdf(1.0 - alpha);
    let z_beta = normal.inverse_cdf(target_power);
    let delta = p1 - p0;
    let approx = ((z_alpha + z_beta) * (z_alpha + z_beta)) * p1 * (1.0 - p1) / (delta * delta);
    let required_n = (approx.ceil() as u64).max(1);

    const MAX_N: u64 = 10_000;
    let mut exact_n = None;
    let mut exact_power = None;
    for n in 1..=MAX_N {
        // smallest critical value keeping the test at or below alpha
        let mut crit = None;
        for c in (0..=n).rev() {
            if upper_tail(c, n, p0) <= alpha {
                crit = Some(c);
            } else {
                break;
            }
        }
        let Some(c) = crit else { continue };
        let power = upper_tail(c, n, p1);
        if power >= target_power {
            exact_n = Some(n);
            exact_power = Some(power);
            break;
        }
    }
    PowerAnalysis {
        p0,
        p1,
        alpha,
        target_power,
        required_n,
        exact_n,
        exact_power_at_exact_n: exact_power,
    }
}
