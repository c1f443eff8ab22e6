//! Price and return panels and the lagged regression design.
//!
//! A panel holds `K` classes (markets or portfolios) of the same `J` series
//! over a shared calendar. Prices are transformed to standardized log-return
//! panels, which the estimator consumes through per-class lagged designs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flt;
use crate::mat::Mat;

/// A series identifier together with its commodity-type tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesInfo {
    pub id: String,
    pub kind: String,
}

/// Raw positive price observations, `K x J x T_raw`.
#[derive(Debug, Clone)]
pub struct PricePanel {
    pub classes: Vec<String>,
    pub series: Vec<SeriesInfo>,
    pub dates: Vec<String>,
    values: Vec<f64>,
}

impl PricePanel {
    /// `values` is laid out class-major: `values[k][j][t]` flattened.
    pub fn new(
        classes: Vec<String>,
        series: Vec<SeriesInfo>,
        dates: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let (k, j, t) = (classes.len(), series.len(), dates.len());
        if values.len() != k * j * t {
            return Err(Error::DimensionMismatch(format!(
                "expected {} price values for K={k}, J={j}, T={t}, got {}",
                k * j * t,
                values.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidParameter(format!(
                    "dates must be strictly increasing: {} before {}",
                    w[0], w[1]
                )));
            }
        }
        let panel = PricePanel {
            classes,
            series,
            dates,
            values,
        };
        for k in 0..panel.classes.len() {
            for j in 0..panel.series.len() {
                for t in 0..panel.dates.len() {
                    let p = panel.value(k, j, t);
                    if !p.is_finite() || p <= 0.0 {
                        return Err(Error::NonPositivePrice {
                            class: panel.classes[k].clone(),
                            series: panel.series[j].id.clone(),
                            date: panel.dates[t].clone(),
                        });
                    }
                }
            }
        }
        Ok(panel)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    #[inline]
    pub fn value(&self, k: usize, j: usize, t: usize) -> f64 {
        self.values[(k * self.series.len() + j) * self.dates.len() + t]
    }
}

/// Log-difference returns before standardization, `K x J x (T_raw - 1)`.
#[derive(Debug, Clone)]
pub struct RawReturns {
    pub classes: Vec<String>,
    pub series: Vec<SeriesInfo>,
    pub dates: Vec<String>,
    values: Vec<f64>,
}

impl RawReturns {
    #[inline]
    pub fn value(&self, k: usize, j: usize, t: usize) -> f64 {
        self.values[(k * self.series.len() + j) * self.dates.len() + t]
    }

    pub fn series_values(&self, k: usize, j: usize) -> &[f64] {
        let t = self.dates.len();
        let start = (k * self.series.len() + j) * t;
        &self.values[start..start + t]
    }
}

/// Mean and standard deviation removed from one series during
/// standardization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub mean: f64,
    pub sd: f64,
}

/// Standardized log-return panel: every series has mean 0 and unit sample
/// standard deviation (divisor `T - 1`).
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub classes: Vec<String>,
    pub series: Vec<SeriesInfo>,
    pub dates: Vec<String>,
    values: Vec<f64>,
    /// Per (class, series) scaling, class-major.
    pub scaling: Vec<Scaling>,
}

impl ReturnPanel {
    pub fn from_values(
        classes: Vec<String>,
        series: Vec<SeriesInfo>,
        dates: Vec<String>,
        values: Vec<f64>,
        scaling: Vec<Scaling>,
    ) -> Result<Self> {
        let (k, j, t) = (classes.len(), series.len(), dates.len());
        if values.len() != k * j * t || scaling.len() != k * j {
            return Err(Error::DimensionMismatch(format!(
                "return panel buffers do not match K={k}, J={j}, T={t}"
            )));
        }
        Ok(ReturnPanel {
            classes,
            series,
            dates,
            values,
            scaling,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    #[inline]
    pub fn value(&self, k: usize, j: usize, t: usize) -> f64 {
        self.values[(k * self.series.len() + j) * self.dates.len() + t]
    }

    pub fn series_values(&self, k: usize, j: usize) -> &[f64] {
        let t = self.dates.len();
        let start = (k * self.series.len() + j) * t;
        &self.values[start..start + t]
    }

    /// Checks the standardization invariant (mean 0, sample sd 1).
    pub fn verify_standardized(&self, tol: f64) -> Result<()> {
        for k in 0..self.n_classes() {
            for j in 0..self.n_series() {
                let xs = self.series_values(k, j);
                let (mean, sd) = mean_sd(xs);
                if mean.abs() > tol || (sd - 1.0).abs() > tol {
                    return Err(Error::NotStandardized {
                        class: self.classes[k].clone(),
                        series: self.series[j].id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-class regression layout for a VAR(P): response row `t` is `y_{P+t}`,
/// predictor row `t` stacks `[y_{P+t-1}, ..., y_t]` lag block by lag block.
#[derive(Debug, Clone)]
pub struct LaggedDesign {
    pub responses: Mat,
    pub predictors: Mat,
    pub n: usize,
    pub p: usize,
}

/// Log-difference transform: `r_t = ln(p_t / p_{t-1})`.
pub fn log_diff(panel: &PricePanel) -> Result<RawReturns> {
    let t_raw = panel.n_obs();
    if t_raw < 2 {
        return Err(Error::SeriesTooShort { len: t_raw, min: 2 });
    }
    let (k_n, j_n) = (panel.n_classes(), panel.n_series());
    let t = t_raw - 1;
    let mut values = Vec::with_capacity(k_n * j_n * t);
    for k in 0..k_n {
        for j in 0..j_n {
            for s in 1..t_raw {
                values.push(flt::ln(panel.value(k, j, s) / panel.value(k, j, s - 1)));
            }
        }
    }
    Ok(RawReturns {
        classes: panel.classes.clone(),
        series: panel.series.clone(),
        dates: panel.dates[1..].to_vec(),
        values,
    })
}

/// Standardizes every series to mean 0 and unit sample standard deviation.
pub fn standardize(returns: &RawReturns) -> Result<ReturnPanel> {
    let (k_n, j_n, t) = (
        returns.classes.len(),
        returns.series.len(),
        returns.dates.len(),
    );
    let mut values = Vec::with_capacity(k_n * j_n * t);
    let mut scaling = Vec::with_capacity(k_n * j_n);
    for k in 0..k_n {
        for j in 0..j_n {
            let xs = returns.series_values(k, j);
            let (mean, sd) = mean_sd(xs);
            if sd <= 1e-12 {
                return Err(Error::ZeroVariance {
                    class: returns.classes[k].clone(),
                    series: returns.series[j].id.clone(),
                });
            }
            values.extend(xs.iter().map(|x| (x - mean) / sd));
            scaling.push(Scaling { mean, sd });
        }
    }
    ReturnPanel::from_values(
        returns.classes.clone(),
        returns.series.clone(),
        returns.dates.clone(),
        values,
        scaling,
    )
}

/// Builds the per-class lagged design matrices for a VAR of order `p`.
pub fn build_lagged_design(panel: &ReturnPanel, p: usize) -> Result<Vec<LaggedDesign>> {
    if p == 0 {
        return Err(Error::InvalidParameter(
            "lag order must be at least 1".into(),
        ));
    }
    let t = panel.n_obs();
    if t <= p {
        return Err(Error::InsufficientObservations { t, p });
    }
    let (k_n, j_n) = (panel.n_classes(), panel.n_series());
    let n = t - p;
    let mut designs = Vec::with_capacity(k_n);
    for k in 0..k_n {
        let mut responses = Mat::zeros(n, j_n);
        let mut predictors = Mat::zeros(n, j_n * p);
        for row in 0..n {
            let time = p + row;
            for j in 0..j_n {
                responses[(row, j)] = panel.value(k, j, time);
            }
            for lag in 1..=p {
                for j in 0..j_n {
                    predictors[(row, (lag - 1) * j_n + j)] = panel.value(k, j, time - lag);
                }
            }
        }
        designs.push(LaggedDesign {
            responses,
            predictors,
            n,
            p,
        });
    }
    Ok(designs)
}

pub(crate) fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, flt::sqrt(ss / (n - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::borrow::ToOwned;
    use alloc::string::ToString;
    use alloc::vec;

    fn info(id: &str) -> SeriesInfo {
        SeriesInfo {
            id: id.to_owned(),
            kind: "metal".to_owned(),
        }
    }

    fn single_series_panel(prices: &[f64]) -> PricePanel {
        let dates = (0..prices.len())
            .map(|i| format!("2020-01-{:02}", i + 1))
            .collect();
        PricePanel::new(
            vec!["world".to_owned()],
            vec![info("GOLD")],
            dates,
            prices.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn log_diff_matches_hand_values() {
        // ln(1.1) and ln(0.9) evaluated independently.
        let panel = single_series_panel(&[100.0, 110.0, 99.0]);
        let ret = log_diff(&panel).unwrap();
        assert!((ret.value(0, 0, 0) - 0.09531018).abs() < 1e-7);
        assert!((ret.value(0, 0, 1) - (-0.10536052)).abs() < 1e-7);
    }

    #[test]
    fn log_diff_equal_prices_is_zero() {
        let panel = single_series_panel(&[100.0, 100.0]);
        let ret = log_diff(&panel).unwrap();
        assert_eq!(ret.value(0, 0, 0), 0.0);
    }

    #[test]
    fn log_diff_scale_invariant() {
        let base = [100.0, 103.0, 97.5, 101.2];
        let scaled: Vec<f64> = base.iter().map(|p| 7.25 * p).collect();
        let r1 = log_diff(&single_series_panel(&base)).unwrap();
        let r2 = log_diff(&single_series_panel(&scaled)).unwrap();
        for t in 0..3 {
            assert_eq!(r1.value(0, 0, t), r2.value(0, 0, t));
        }
    }

    #[test]
    fn log_diff_needs_two_observations() {
        let panel = single_series_panel(&[100.0]);
        assert!(matches!(
            log_diff(&panel),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn non_positive_price_rejected() {
        let dates = vec!["2020-01-01".to_string(), "2020-01-02".to_string()];
        let err = PricePanel::new(
            vec!["world".to_owned()],
            vec![info("GOLD")],
            dates,
            vec![100.0, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonPositivePrice { .. }));
    }

    #[test]
    #[allow(clippy::approx_constant)] // frozen hand-derived oracle values
    fn standardize_two_point_series() {
        // (-1, 1): mean 0, sample sd sqrt(2), so +-1/sqrt(2).
        let raw = RawReturns {
            classes: vec!["world".to_owned()],
            series: vec![info("GOLD")],
            dates: vec!["2020-01-02".to_string(), "2020-01-03".to_string()],
            values: vec![-1.0, 1.0],
        };
        let std = standardize(&raw).unwrap();
        assert!((std.value(0, 0, 0) - (-0.70710678)).abs() < 1e-7);
        assert!((std.value(0, 0, 1) - 0.70710678).abs() < 1e-7);
        assert_eq!(std.scaling[0].mean, 0.0);
    }

    #[test]
    fn standardize_constant_series_errors() {
        let raw = RawReturns {
            classes: vec!["world".to_owned()],
            series: vec![info("GOLD")],
            dates: (0..3).map(|i| format!("2020-01-{:02}", i + 2)).collect(),
            values: vec![5.0, 5.0, 5.0],
        };
        let err = standardize(&raw).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance { .. }));
    }

    #[test]
    fn standardize_is_idempotent() {
        let raw = RawReturns {
            classes: vec!["world".to_owned()],
            series: vec![info("GOLD")],
            dates: (0..5).map(|i| format!("2020-01-{:02}", i + 2)).collect(),
            values: vec![0.3, -0.8, 0.1, 0.9, -0.5],
        };
        let once = standardize(&raw).unwrap();
        let again = standardize(&RawReturns {
            classes: once.classes.clone(),
            series: once.series.clone(),
            dates: once.dates.clone(),
            values: (0..5).map(|t| once.value(0, 0, t)).collect(),
        })
        .unwrap();
        for t in 0..5 {
            assert!((once.value(0, 0, t) - again.value(0, 0, t)).abs() < 1e-10);
        }
        once.verify_standardized(1e-10).unwrap();
    }

    #[test]
    fn lagged_design_definition() {
        let series = [0.1, -0.2, 0.3, -0.4];
        let panel = ReturnPanel::from_values(
            vec!["world".to_owned()],
            vec![info("GOLD")],
            (0..4).map(|i| format!("2020-01-{:02}", i + 1)).collect(),
            series.to_vec(),
            vec![Scaling { mean: 0.0, sd: 1.0 }],
        )
        .unwrap();

        let d1 = build_lagged_design(&panel, 1).unwrap();
        assert_eq!(d1[0].n, 3);
        assert_eq!(d1[0].responses.as_slice(), &series[1..]);
        assert_eq!(d1[0].predictors.as_slice(), &series[..3]);

        let d2 = build_lagged_design(&panel, 2).unwrap();
        assert_eq!(d2[0].n, 2);
        assert_eq!(d2[0].responses.as_slice(), &[0.3, -0.4]);
        // rows stack lag 1 then lag 2
        assert_eq!(d2[0].predictors.row(0), &[-0.2, 0.1]);
        assert_eq!(d2[0].predictors.row(1), &[0.3, -0.2]);

        assert!(matches!(
            build_lagged_design(&panel, 4),
            Err(Error::InsufficientObservations { .. })
        ));
    }
}
