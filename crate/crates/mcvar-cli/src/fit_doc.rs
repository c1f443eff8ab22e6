//! The fit document: a JSON serialization of a fitted multi-class VAR that
//! round-trips losslessly (shortest-representation floats re-parse to the
//! same bits).

use std::path::Path;

use mcvar::mat::Mat;
use mcvar::model::{FitDiagnostics, MultiClassVarFit, PenaltyConfig};
use mcvar::panel::SeriesInfo;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct FitDocument {
    pub dimensions: Dimensions,
    pub classes: Vec<String>,
    pub series: Vec<SeriesDoc>,
    pub penalty: PenaltyDoc,
    /// Per class, `J x (J*P)` coefficient matrix as nested rows.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    /// Per class, lower triangle of the inverse error covariance, row by
    /// row (row i holds i+1 entries).
    pub omega_lower: Vec<Vec<Vec<f64>>>,
    pub diagnostics: DiagnosticsDoc,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Dimensions {
    pub classes: usize,
    pub series: usize,
    pub lags: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SeriesDoc {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PenaltyDoc {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticsDoc {
    pub objective_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl FitDocument {
    pub fn from_fit(fit: &MultiClassVarFit) -> Self {
        let j = fit.n_series();
        FitDocument {
            dimensions: Dimensions {
                classes: fit.n_classes(),
                series: j,
                lags: fit.p,
            },
            classes: fit.classes.clone(),
            series: fit
                .series
                .iter()
                .map(|s| SeriesDoc {
                    id: s.id.clone(),
                    kind: s.kind.clone(),
                })
                .collect(),
            penalty: PenaltyDoc {
                lambda1: fit.penalty.lambda1,
                lambda2: fit.penalty.lambda2,
                lambda3: fit.penalty.lambda3,
                lambda4: fit.penalty.lambda4,
            },
            coefficients: fit
                .b
                .iter()
                .map(|m| (0..m.rows()).map(|r| m.row(r).to_vec()).collect())
                .collect(),
            omega_lower: fit
                .omega
                .iter()
                .map(|m| {
                    (0..j)
                        .map(|r| (0..=r).map(|c| m[(r, c)]).collect())
                        .collect()
                })
                .collect(),
            diagnostics: DiagnosticsDoc {
                objective_trace: fit.diagnostics.objective_trace.clone(),
                outer_iterations: fit.diagnostics.outer_iterations,
                converged: fit.diagnostics.converged,
            },
        }
    }

    pub fn into_fit(self) -> CliResult<MultiClassVarFit> {
        let (k_n, j, p) = (
            self.dimensions.classes,
            self.dimensions.series,
            self.dimensions.lags,
        );
        if self.classes.len() != k_n
            || self.series.len() != j
            || self.coefficients.len() != k_n
            || self.omega_lower.len() != k_n
        {
            return Err(CliError::Data(
                "fit document dimensions are inconsistent".to_string(),
            ));
        }
        let mut b = Vec::with_capacity(k_n);
        for rows in &self.coefficients {
            if rows.len() != j || rows.iter().any(|r| r.len() != j * p) {
                return Err(CliError::Data(
                    "coefficient block has wrong shape".to_string(),
                ));
            }
            b.push(Mat::from_vec(
                j,
                j * p,
                rows.iter().flatten().copied().collect(),
            ));
        }
        let mut omega = Vec::with_capacity(k_n);
        for tri in &self.omega_lower {
            if tri.len() != j || tri.iter().enumerate().any(|(r, row)| row.len() != r + 1) {
                return Err(CliError::Data("omega triangle has wrong shape".to_string()));
            }
            let mut m = Mat::zeros(j, j);
            for (r, row) in tri.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    m[(r, c)] = v;
                    m[(c, r)] = v;
                }
            }
            omega.push(m);
        }
        let penalty = PenaltyConfig::new(
            self.penalty.lambda1,
            self.penalty.lambda2,
            self.penalty.lambda3,
            self.penalty.lambda4,
        )
        .map_err(|e| CliError::Data(e.to_string()))?;
        Ok(MultiClassVarFit {
            classes: self.classes,
            series: self
                .series
                .into_iter()
                .map(|s| SeriesInfo {
                    id: s.id,
                    kind: s.kind,
                })
                .collect(),
            p,
            b,
            omega,
            penalty,
            diagnostics: FitDiagnostics {
                objective_trace: self.diagnostics.objective_trace,
                outer_iterations: self.diagnostics.outer_iterations,
                converged: self.diagnostics.converged,
            },
        })
    }
}

pub fn write_fit(fit: &MultiClassVarFit, path: &Path) -> CliResult<()> {
    let doc = FitDocument::from_fit(fit);
    let mut json = serde_json::to_string_pretty(&doc)?;
    json.push('\n');
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_fit(path: &Path) -> CliResult<MultiClassVarFit> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let doc: FitDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("malformed fit document {}: {e}", path.display())))?;
    doc.into_fit()
}
