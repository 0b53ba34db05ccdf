//! Nested-OLS Granger causality and Pearson correlation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Differencing {
    Level,
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrangerResult {
    pub lag: usize,
    pub differencing: Differencing,
    pub f_stat: f64,
    pub p_value: f64,
    /// Regression rows after lag alignment.
    pub n_obs: usize,
}

const SINGULARITY_TOL: f64 = 1e-10;

/// Least-squares RSS with an explicit rank check; rank-deficient designs are
/// rejected rather than pseudo-solved.
pub(crate) fn ols_rss(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<f64, StatsError> {
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let min_sv = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if max_sv <= 0.0 || min_sv / max_sv < SINGULARITY_TOL {
        return Err(StatsError::SingularDesign);
    }
    let beta = svd
        .solve(target, 0.0)
        .map_err(|e| StatsError::Numeric(e.to_string()))?;
    let residuals = target - design * beta;
    Ok(residuals.iter().map(|r| r * r).sum())
}

fn difference(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Tests whether lags of `x` improve the forecast of `y` beyond y's own
/// history: restricted (own lags) vs unrestricted (plus x lags), compared
/// with the nested F statistic on `lag` numerator and n - 2*lag - 1
/// denominator degrees of freedom.
pub fn granger(
    x: &[f64],
    y: &[f64],
    lag: usize,
    differencing: Differencing,
) -> Result<GrangerResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if lag == 0 {
        return Err(StatsError::Numeric("lag must be >= 1".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = match differencing {
        Differencing::Level => (x.to_vec(), y.to_vec()),
        Differencing::Diff => (difference(x), difference(y)),
    };
    if y.len() <= 3 * lag + 3 {
        return Err(StatsError::SeriesTooShort {
            len: y.len(),
            need: 3 * lag + 4,
        });
    }

    let rows = y.len() - lag;
    let target = DVector::from_iterator(rows, (lag..y.len()).map(|t| y[t]));

    // restricted: intercept + y lags
    let mut restricted = DMatrix::zeros(rows, lag + 1);
    // unrestricted: + x lags
    let mut unrestricted = DMatrix::zeros(rows, 2 * lag + 1);
    for (row, t) in (lag..y.len()).enumerate() {
        restricted[(row, 0)] = 1.0;
        unrestricted[(row, 0)] = 1.0;
        for j in 1..=lag {
            restricted[(row, j)] = y[t - j];
            unrestricted[(row, j)] = y[t - j];
            unrestricted[(row, lag + j)] = x[t - j];
        }
    }

    let rss_restricted = ols_rss(&restricted, &target)?;
    let rss_unrestricted = ols_rss(&unrestricted, &target)?;
    let dof_den = rows as f64 - 2.0 * lag as f64 - 1.0;
    if dof_den <= 0.0 {
        return Err(StatsError::SeriesTooShort {
            len: y.len(),
            need: 3 * lag + 2,
        });
    }
    if rss_unrestricted <= f64::EPSILON * target.norm_squared().max(1.0) {
        // perfect fit leaves no residual variance to test against
        return Err(StatsError::SingularDesign);
    }
    let f_stat = (((rss_restricted - rss_unrestricted).max(0.0)) / lag as f64)
        / (rss_unrestricted / dof_den);
    let dist = FisherSnedecor::new(lag as f64, dof_den)
        .map_err(|e| StatsError::Numeric(e.to_string()))?;
    let p_value = 1.0 - dist.cdf(f_stat);
    Ok(GrangerResult {
        lag,
        differencing,
        f_stat,
        p_value,
        n_obs: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub r: f64,
    /// Two-sided p from the t distribution with n-2 dof.
    pub p_value: f64,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<PearsonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::SeriesTooShort { len: n, need: 3 });
    }
    let mean_x = x.iter().sum::<f64>() / n as f64;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Numeric("zero-variance series".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let dof = (n - 2) as f64;
    let p_value = if (1.0 - r * r) <= f64::EPSILON {
        0.0
    } else {
        let t = r * (dof / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| StatsError::Numeric(e.to_string()))?;
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(PearsonResult { r, p_value, n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal as NormalDist};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = NormalDist::new(0.0, 1.0).unwrap();
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    /// Independent OLS oracle: normal equations solved by Gaussian
    /// elimination with partial pivoting, explicit RSS. Deliberately
    /// index-based so it shares nothing with the SVD path.
    #[allow(clippy::needless_range_loop)]
    fn oracle_rss(design: &[Vec<f64>], target: &[f64]) -> f64 {
        let cols = design[0].len();
        let rows = design.len();
        let mut ata = vec![vec![0.0; cols + 1]; cols];
        for i in 0..cols {
            for j in 0..cols {
                let mut s = 0.0;
                for r in 0..rows {
                    s += design[r][i] * design[r][j];
                }
                ata[i][j] = s;
            }
            let mut s = 0.0;
            for r in 0..rows {
                s += design[r][i] * target[r];
            }
            ata[i][cols] = s;
        }
        // gaussian elimination
        for col in 0..cols {
            let mut pivot = col;
            for r in col + 1..cols {
                if ata[r][col].abs() > ata[pivot][col].abs() {
                    pivot = r;
                }
            }
            ata.swap(col, pivot);
            let p = ata[col][col];
            for r in 0..cols {
                if r != col && ata[r][col] != 0.0 {
                    let factor = ata[r][col] / p;
                    for c in col..=cols {
                        ata[r][c] -= factor * ata[col][c];
                    }
                }
            }
        }
        let beta: Vec<f64> = (0..cols).map(|i| ata[i][cols] / ata[i][i]).collect();
        let mut rss = 0.0;
        for r in 0..rows {
            let fitted: f64 = (0..cols).map(|c| design[r][c] * beta[c]).sum();
            let e = target[r] - fitted;
            rss += e * e;
        }
        rss
    }

    #[test]
    fn lag2_coupled_series_is_detected() {
        // y_t = 0.8 * x_{t-2} + noise, n = 250, fixed seed.
        let n = 250;
        let x = noise(n, 11);
        let e = noise(n, 12);
        let mut y = vec![0.0; n];
        for t in 2..n {
            y[t] = 0.8 * x[t - 2] + 0.3 * e[t];
        }
        let result = granger(&x, &y, 2, Differencing::Level).unwrap();
        assert!(result.p_value < 0.01, "p = {}", result.p_value);
        assert!(result.f_stat > 0.0);

        // oracle agreement: rebuild both designs and compare F
        let rows = n - 2;
        let mut restricted = Vec::with_capacity(rows);
        let mut unrestricted = Vec::with_capacity(rows);
        let mut target = Vec::with_capacity(rows);
        for t in 2..n {
            restricted.push(vec![1.0, y[t - 1], y[t - 2]]);
            unrestricted.push(vec![1.0, y[t - 1], y[t - 2], x[t - 1], x[t - 2]]);
            target.push(y[t]);
        }
        let rss_r = oracle_rss(&restricted, &target);
        let rss_u = oracle_rss(&unrestricted, &target);
        let dof_den = rows as f64 - 5.0;
        let f_oracle = ((rss_r - rss_u) / 2.0) / (rss_u / dof_den);
        assert!(
            ((result.f_stat - f_oracle) / f_oracle).abs() < 1e-6,
            "impl F={} oracle F={f_oracle}",
            result.f_stat
        );
    }

    #[test]
    fn independent_noise_is_rarely_significant() {
        let mut rejections = 0;
        let trials = 100;
        for seed in 0..trials {
            let x = noise(250, 1000 + seed);
            let y = noise(250, 2000 + seed);
            let result = granger(&x, &y, 2, Differencing::Level).unwrap();
            if result.p_value <= 0.05 {
                rejections += 1;
            }
        }
        assert!(
            trials - rejections >= 90,
            "only {} of {trials} trials had p > 0.05",
            trials - rejections
        );
    }

    #[test]
    fn identical_series_is_singular() {
        let x = noise(100, 5);
        let err = granger(&x, &x, 2, Differencing::Level).unwrap_err();
        assert!(matches!(err, StatsError::SingularDesign));
    }

    #[test]
    fn differencing_detects_coupling_in_changes() {
        let n = 252;
        let x_changes = noise(n, 21);
        let e = noise(n, 22);
        // build level series whose differences are coupled at lag 2
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for t in 1..n {
            x[t] = x[t - 1] + x_changes[t];
        }
        for t in 2..n {
            y[t] = y[t - 1] + 0.8 * x_changes[t - 2] + 0.3 * e[t];
        }
        let result = granger(&x, &y, 2, Differencing::Diff).unwrap();
        assert!(result.p_value < 0.01, "p = {}", result.p_value);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let x = noise(9, 1);
        let y = noise(9, 2);
        assert!(matches!(
            granger(&x, &y, 2, Differencing::Level),
            Err(StatsError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn f_stat_never_negative() {
        for seed in 0..20 {
            let x = noise(60, 300 + seed);
            let y = noise(60, 400 + seed);
            for lag in 1..=3 {
                let r = granger(&x, &y, lag, Differencing::Level).unwrap();
                assert!(r.f_stat >= 0.0);
            }
        }
    }

    #[test]
    fn extra_column_never_increases_rss() {
        let x = noise(80, 31);
        let y = noise(80, 32);
        let z = noise(80, 33);
        let rows = 80;
        let base = DMatrix::from_fn(rows, 2, |r, c| if c == 0 { 1.0 } else { x[r] });
        let wider = DMatrix::from_fn(rows, 3, |r, c| match c {
            0 => 1.0,
            1 => x[r],
            _ => z[r],
        });
        let target = DVector::from_iterator(rows, y.iter().cloned());
        let rss_base = ols_rss(&base, &target).unwrap();
        let rss_wider = ols_rss(&wider, &target).unwrap();
        assert!(rss_wider <= rss_base + 1e-9 * rss_base);
    }

    #[test]
    fn pearson_perfect_correlation() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y = x.clone();
        let r = pearson(&x, &y).unwrap();
        assert!((r.r - 1.0).abs() < 1e-12);
        assert_eq!(r.p_value, 0.0);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = pearson(&x, &neg).unwrap();
        assert!((r.r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_independent_noise_is_small() {
        let x = noise(242, 71);
        let y = noise(242, 72);
        let r = pearson(&x, &y).unwrap();
        assert!(r.r.abs() < 0.15, "r = {}", r.r);
        assert!(r.p_value > 0.01);
    }

    #[test]
    fn pearson_rejects_short_or_mismatched() {
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }
}
