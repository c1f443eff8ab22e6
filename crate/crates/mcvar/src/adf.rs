//! Augmented Dickey-Fuller stationarity test.
//!
//! Test regression with constant, no trend:
//!
//! ```text
//!   dy_t = alpha + gamma * y_{t-1} + phi_1 dy_{t-1} + ... + phi_p dy_{t-p} + e_t
//! ```
//!
//! The statistic is the t-ratio of `gamma`. The augmentation order follows
//! the Schwert rule `floor(12 * (T/100)^(1/4))` capped by an optional user
//! maximum and by the available degrees of freedom. P-values and 1/5/10%
//! decisions interpolate a bundled table of finite-sample null quantiles
//! (linear in the inverse regression sample size across rows, linear in the
//! statistic within a row).

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flt;
use crate::mat::Mat;

/// Simulated null quantiles, bundled as a data file.
const QUANTILE_TABLE: &str = include_str!("../data/adf_quantiles.csv");

/// Minimum raw series length accepted by [`adf_test`].
pub const MIN_SERIES_LEN: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfResult {
    /// t-ratio of the lagged level coefficient.
    pub statistic: f64,
    /// Interpolated finite-sample p-value, clamped to the table range
    /// `[0.001, 0.999]`.
    pub p_value: f64,
    /// Augmentation lags used.
    pub lags: usize,
    /// Regression sample size.
    pub nobs: usize,
    pub reject_1pct: bool,
    pub reject_5pct: bool,
    pub reject_10pct: bool,
}

/// Schwert's rule of thumb for the maximum augmentation order.
pub fn schwert_lag(t: usize) -> usize {
    flt::floor(12.0 * flt::powf(t as f64 / 100.0, 0.25)) as usize
}

/// Runs the test on one series. `max_lag` caps the Schwert order when given.
pub fn adf_test(series: &[f64], max_lag: Option<usize>) -> Result<AdfResult> {
    let t = series.len();
    if t < MIN_SERIES_LEN {
        return Err(Error::SeriesTooShort {
            len: t,
            min: MIN_SERIES_LEN,
        });
    }
    let mut lags = schwert_lag(t);
    if let Some(cap) = max_lag {
        lags = lags.min(cap);
    }
    // keep enough residual degrees of freedom for the t-ratio
    while lags > 0 && t - 1 - lags < lags + 2 + 5 {
        lags -= 1;
    }

    let nobs = t - 1 - lags;
    let n_params = lags + 2;
    let mut x = Mat::zeros(nobs, n_params);
    let mut y = Vec::with_capacity(nobs);
    for (row, time) in (lags + 1..t).enumerate() {
        y.push(series[time] - series[time - 1]);
        x[(row, 0)] = 1.0;
        x[(row, 1)] = series[time - 1];
        for lag in 1..=lags {
            x[(row, 1 + lag)] = series[time - lag] - series[time - lag - 1];
        }
    }

    let xtx = x.tr_matmul(&x);
    let xtx_inv = xtx
        .inverse_pd()
        .ok_or_else(|| Error::SingularRegression("ADF design".to_string()))?;
    let mut xty = Vec::with_capacity(n_params);
    for c in 0..n_params {
        let mut acc = 0.0;
        for (r, yr) in y.iter().enumerate() {
            acc += x[(r, c)] * yr;
        }
        xty.push(acc);
    }
    let beta = xtx_inv.matvec(&xty);
    let mut rss = 0.0;
    for (r, yr) in y.iter().enumerate() {
        let e = yr - crate::mat::dot(x.row(r), &beta);
        rss += e * e;
    }
    if nobs <= n_params {
        return Err(Error::SingularRegression(
            "no residual degrees of freedom".to_string(),
        ));
    }
    let sigma2 = rss / (nobs - n_params) as f64;
    let var_gamma = sigma2 * xtx_inv[(1, 1)];
    if var_gamma.is_nan() || var_gamma <= 0.0 {
        return Err(Error::SingularRegression(
            "degenerate variance of gamma".to_string(),
        ));
    }
    let statistic = beta[1] / flt::sqrt(var_gamma);

    let table = QuantileTable::bundled();
    let quantiles = table.quantiles_for(nobs);
    let p_value = table.p_value(&quantiles, statistic);
    Ok(AdfResult {
        statistic,
        p_value,
        lags,
        nobs,
        reject_1pct: statistic < table.critical(&quantiles, 0.01),
        reject_5pct: statistic < table.critical(&quantiles, 0.05),
        reject_10pct: statistic < table.critical(&quantiles, 0.10),
    })
}

struct QuantileTable {
    probs: Vec<f64>,
    sizes: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl QuantileTable {
    fn bundled() -> Self {
        let mut lines = QUANTILE_TABLE
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty());
        let header = lines.next().expect("bundled table has a header");
        let probs: Vec<f64> = header
            .split(',')
            .skip(1)
            .map(|s| {
                s.trim_start_matches('p')
                    .parse::<f64>()
                    .expect("valid probability")
            })
            .collect();
        let mut sizes = Vec::new();
        let mut rows = Vec::new();
        for line in lines {
            let mut fields = line.split(',');
            sizes.push(
                fields
                    .next()
                    .unwrap()
                    .parse::<usize>()
                    .expect("valid sample size"),
            );
            rows.push(
                fields
                    .map(|s| s.parse::<f64>().expect("valid quantile"))
                    .collect(),
            );
        }
        QuantileTable { probs, sizes, rows }
    }

    /// Quantile row for a given regression sample size, interpolated
    /// linearly in `1/n` between the bracketing table rows.
    fn quantiles_for(&self, n: usize) -> Vec<f64> {
        let n = n.max(self.sizes[0]).min(*self.sizes.last().unwrap());
        let mut hi = 1;
        while hi < self.sizes.len() - 1 && self.sizes[hi] < n {
            hi += 1;
        }
        let lo = hi - 1;
        let (n_lo, n_hi) = (self.sizes[lo] as f64, self.sizes[hi] as f64);
        let w = if n_lo == n_hi {
            0.0
        } else {
            ((1.0 / n_lo) - (1.0 / n as f64)) / ((1.0 / n_lo) - (1.0 / n_hi))
        };
        self.rows[lo]
            .iter()
            .zip(&self.rows[hi])
            .map(|(a, b)| a * (1.0 - w) + b * w)
            .collect()
    }

    fn critical(&self, quantiles: &[f64], prob: f64) -> f64 {
        for (p, q) in self.probs.iter().zip(quantiles) {
            if (p - prob).abs() < 1e-12 {
                return *q;
            }
        }
        // linear interpolation over probability
        let mut hi = 1;
        while hi < self.probs.len() - 1 && self.probs[hi] < prob {
            hi += 1;
        }
        let lo = hi - 1;
        let w = (prob - self.probs[lo]) / (self.probs[hi] - self.probs[lo]);
        quantiles[lo] * (1.0 - w) + quantiles[hi] * w
    }

    fn p_value(&self, quantiles: &[f64], stat: f64) -> f64 {
        if stat <= quantiles[0] {
            return self.probs[0];
        }
        if stat >= *quantiles.last().unwrap() {
            return *self.probs.last().unwrap();
        }
        let mut hi = 1;
        while quantiles[hi] < stat {
            hi += 1;
        }
        let lo = hi - 1;
        let w = (stat - quantiles[lo]) / (quantiles[hi] - quantiles[lo]);
        self.probs[lo] * (1.0 - w) + self.probs[hi] * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use alloc::vec::Vec;

    #[test]
    fn schwert_rule_values() {
        assert_eq!(schwert_lag(100), 12);
        assert_eq!(schwert_lag(500), 17);
        assert_eq!(schwert_lag(25), 8);
    }

    #[test]
    fn bundled_table_matches_textbook_asymptotics() {
        let table = QuantileTable::bundled();
        let q = table.quantiles_for(2000);
        assert!((table.critical(&q, 0.01) - (-3.43)).abs() < 0.03);
        assert!((table.critical(&q, 0.05) - (-2.86)).abs() < 0.03);
        assert!((table.critical(&q, 0.10) - (-2.57)).abs() < 0.03);
        // small-sample row: Fuller's T=25 values
        let q = table.quantiles_for(25);
        assert!((table.critical(&q, 0.01) - (-3.75)).abs() < 0.05);
        assert!((table.critical(&q, 0.05) - (-3.00)).abs() < 0.05);
    }

    #[test]
    fn too_short_series_rejected() {
        let xs = [0.0; 10];
        assert!(matches!(
            adf_test(&xs, None),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn statistic_invariant_under_constant_shift() {
        let mut rng = Rng::new(12);
        let mut y = 0.0;
        let xs: Vec<f64> = (0..200)
            .map(|_| {
                y = 0.5 * y + rng.standard_normal();
                y
            })
            .collect();
        let shifted: Vec<f64> = xs.iter().map(|x| x + 42.0).collect();
        let a = adf_test(&xs, Some(4)).unwrap();
        let b = adf_test(&shifted, Some(4)).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-8);
        assert_eq!(a.lags, b.lags);
    }

    #[test]
    fn stationary_ar1_rejected_at_one_percent() {
        // AR(1) with coefficient 0.2 at T=500 is far from a unit root; the
        // test must reject at 1% in at least 95 of 100 seeds.
        let mut rejections = 0;
        for seed in 0..100 {
            let mut rng = Rng::new(1000 + seed);
            let mut y = 0.0;
            let xs: Vec<f64> = (0..500)
                .map(|_| {
                    y = 0.2 * y + rng.standard_normal();
                    y
                })
                .collect();
            let res = adf_test(&xs, None).unwrap();
            if res.reject_1pct {
                assert!(res.p_value < 0.01 + 1e-12);
                rejections += 1;
            }
        }
        assert!(rejections >= 95, "only {rejections}/100 rejections");
    }

    #[test]
    fn random_walk_not_rejected_at_five_percent() {
        let mut kept = 0;
        for seed in 0..100 {
            let mut rng = Rng::new(7000 + seed);
            let mut y = 0.0;
            let xs: Vec<f64> = (0..500)
                .map(|_| {
                    y += rng.standard_normal();
                    y
                })
                .collect();
            let res = adf_test(&xs, None).unwrap();
            if !res.reject_5pct {
                kept += 1;
            }
        }
        assert!(kept >= 90, "only {kept}/100 non-rejections");
    }
}
