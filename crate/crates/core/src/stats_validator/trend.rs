//! Cochran-Armitage trend test over ordered groups with scores 1..k.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    pub z: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// `groups` is (successes, total) per ordered group.
pub fn cochran_armitage(groups: &[(u64, u64)]) -> Result<TrendTest, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::DegenerateGroups(
            "need at least 2 groups".into(),
        ));
    }
    let total_n: u64 = groups.iter().map(|(_, n)| n).sum();
    if total_n == 0 || groups.iter().all(|(_, n)| *n == 0) {
        return Err(StatsError::DegenerateGroups("all group totals zero".into()));
    }
    let total_s: u64 = groups.iter().map(|(s, _)| s).sum();
    let p_bar = total_s as f64 / total_n as f64;

    let mut t = 0.0; // sum s_i * x_i
    let mut sum_ns = 0.0; // sum n_i * s_i
    let mut sum_ns2 = 0.0; // sum n_i * s_i^2
    for (i, (x, n)) in groups.iter().enumerate() {
        let score = (i + 1) as f64;
        t += score * *x as f64;
        sum_ns += *n as f64 * score;
        sum_ns2 += *n as f64 * score * score;
    }
    let expected = p_bar * sum_ns;
    let variance = p_bar * (1.0 - p_bar) * (sum_ns2 - sum_ns * sum_ns / total_n as f64);
    if variance <= 0.0 {
        // all-success or all-failure margins carry no trend information
        if (t - expected).abs() < 1e-12 {
            return Ok(TrendTest { z: 0.0, p_value: 1.0 });
        }
        return Err(StatsError::DegenerateGroups(
            "zero trend variance".into(),
        ));
    }
    let z = (t - expected) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let p_value = 2.0 * (1.0 - normal.cdf(z.abs()));
    Ok(TrendTest { z, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_rates_have_no_trend() {
        let groups = vec![(50, 100), (50, 100), (50, 100), (50, 100)];
        let t = cochran_armitage(&groups).unwrap();
        assert!(t.z.abs() < 1e-9, "z = {}", t.z);
        assert!(t.p_value > 0.99);
    }

    #[test]
    fn strong_trend_is_significant_against_permutation_oracle() {
        // rates 10% -> 90% across four groups of 100
        let groups = vec![(10u64, 100u64), (37, 100), (63, 100), (90, 100)];
        let t = cochran_armitage(&groups).unwrap();
        assert!(t.p_value < 0.001, "p = {}", t.p_value);

        // permutation oracle: shuffle outcomes across groups 100k times and
        // compare the statistic T = sum(score * successes)
        let mut outcomes: Vec<(usize, bool)> = Vec::new();
        for (g, (s, n)) in groups.iter().enumerate() {
            for i in 0..*n {
                outcomes.push((g, i < *s));
            }
        }
        let observed_t: f64 = groups
            .iter()
            .enumerate()
            .map(|(g, (s, _))| (g + 1) as f64 * *s as f64)
            .sum();
        let expected_t: f64 = {
            let p = outcomes.iter().filter(|(_, v)| *v).count() as f64 / outcomes.len() as f64;
            groups
                .iter()
                .enumerate()
                .map(|(g, (_, n))| (g + 1) as f64 * *n as f64 * p)
                .sum()
        };
        let observed_dev = (observed_t - expected_t).abs();
        let mut rng = ChaCha8Rng::seed_from_u64(2024_0116);
        let mut values: Vec<bool> = outcomes.iter().map(|(_, v)| *v).collect();
        let trials = 100_000;
        let mut exceed = 0u32;
        for _ in 0..trials {
            // Fisher-Yates
            for i in (1..values.len()).rev() {
                let j = rng.gen_range(0..=i);
                values.swap(i, j);
            }
            let mut t_perm = 0.0;
            let mut idx = 0usize;
            for (g, (_, n)) in groups.iter().enumerate() {
                let hits = values[idx..idx + *n as usize].iter().filter(|v| **v).count();
                t_perm += (g + 1) as f64 * hits as f64;
                idx += *n as usize;
            }
            if (t_perm - expected_t).abs() >= observed_dev {
                exceed += 1;
            }
        }
        let permutation_p = exceed as f64 / trials as f64;
        assert!(
            permutation_p < 0.001,
            "permutation p = {permutation_p} over {trials} shuffles"
        );
    }

    #[test]
    fn degenerate_groups_are_rejected() {
        assert!(cochran_armitage(&[(0, 0), (0, 0)]).is_err());
        assert!(cochran_armitage(&[(5, 10)]).is_err());
    }

    #[test]
    fn all_success_margin_reports_no_trend() {
        let t = cochran_armitage(&[(10, 10), (20, 20), (30, 30)]).unwrap();
        assert_eq!(t.z, 0.0);
        assert_eq!(t.p_value, 1.0);
    }
}
