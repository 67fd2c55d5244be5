//! JSON reports with explicit units and provenance.
//!
//! Every physical number is emitted as a `{value, unit}` pair, rounded to
//! six significant digits; dimensionless quantities carry the unit
//! `"dimensionless"` rather than omitting the field. The provenance block
//! names the tool, its version, and the input files; its timestamp can be
//! suppressed so reruns produce byte-identical output.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use fibercav::fit::{CouplingFit, LorentzianDipFit};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    BadFitReport { path: String, message: String },
}

/// Rounds to six significant digits, leaving zero and non-finite values
/// untouched.
pub fn round6(value: f64) -> f64 {
    if !value.is_finite() || value == 0.0 {
        return value;
    }
    let magnitude = value.abs().log10().floor() as i32;
    let scale = 10f64.powi(5 - magnitude);
    (value * scale).round() / scale
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: &'static str,
}

impl Quantity {
    pub fn new(value: f64, unit: &'static str) -> Self {
        Quantity {
            value: round6(value),
            unit,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unix_time_s: Option<u64>,
}

impl Provenance {
    /// `inputs` are echoed as given on the command line. `timestamp = false`
    /// omits the clock reading entirely.
    pub fn new(inputs: Vec<String>, timestamp: bool) -> Self {
        let unix_time_s = timestamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Provenance {
            tool: "fibercav",
            version: env!("CARGO_PKG_VERSION"),
            inputs,
            unix_time_s,
        }
    }
}

/// Output of `fibercav fit`: the refined dip plus the linewidth metrics
/// derived from it.
#[derive(Debug, Serialize)]
pub struct DipReport {
    pub lambda0: Quantity,
    pub lambda0_err: Quantity,
    pub delta_lambda: Quantity,
    pub delta_lambda_err: Quantity,
    pub r0: Quantity,
    pub r0_err: Quantity,
    pub background: Quantity,
    pub background_err: Quantity,
    pub kappa: Quantity,
    pub q: Quantity,
    pub residual_rms: Quantity,
    pub converged: bool,
    pub iterations: usize,
    pub provenance: Provenance,
}

impl DipReport {
    pub fn new(fit: &LorentzianDipFit, kappa: f64, q: f64, provenance: Provenance) -> Self {
        DipReport {
            lambda0: Quantity::new(fit.lambda0, "nm"),
            lambda0_err: Quantity::new(fit.lambda0_err, "nm"),
            delta_lambda: Quantity::new(fit.delta_lambda, "nm"),
            delta_lambda_err: Quantity::new(fit.delta_lambda_err, "nm"),
            r0: Quantity::new(fit.r0, "dimensionless"),
            r0_err: Quantity::new(fit.r0_err, "dimensionless"),
            background: Quantity::new(fit.background, "dimensionless"),
            background_err: Quantity::new(fit.background_err, "dimensionless"),
            kappa: Quantity::new(kappa, "GHz"),
            q: Quantity::new(q, "dimensionless"),
            residual_rms: Quantity::new(fit.residual_rms, "dimensionless"),
            converged: fit.converged,
            iterations: fit.iterations,
            provenance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CouplingReportPoint {
    pub kappa: Quantity,
    pub r0_observed: Quantity,
    pub r0_predicted: Quantity,
    pub regime: String,
}

/// Output of `fibercav coupling`: the pooled scattering rate and the
/// per-cavity residual picture.
#[derive(Debug, Serialize)]
pub struct CouplingReport {
    pub kappa_sc: Quantity,
    pub kappa_sc_err: Quantity,
    pub residual_rms: Quantity,
    pub points: Vec<CouplingReportPoint>,
    pub provenance: Provenance,
}

impl CouplingReport {
    pub fn new(fit: &CouplingFit, provenance: Provenance) -> Self {
        CouplingReport {
            kappa_sc: Quantity::new(fit.kappa_sc, "GHz"),
            kappa_sc_err: Quantity::new(fit.kappa_sc_err, "GHz"),
            residual_rms: Quantity::new(fit.residual_rms, "dimensionless"),
            points: fit
                .points
                .iter()
                .map(|p| CouplingReportPoint {
                    kappa: Quantity::new(p.kappa, "GHz"),
                    r0_observed: Quantity::new(p.r0_observed, "dimensionless"),
                    r0_predicted: Quantity::new(p.r0_predicted, "dimensionless"),
                    regime: p.regime.to_string(),
                })
                .collect(),
            provenance,
        }
    }
}

/// Output of `fibercav report`: scattering-limited figures of merit, plus
/// the loaded-linewidth figures when a fitted width is available.
#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub lambda0: Quantity,
    pub kappa_sc: Quantity,
    pub cavity_length: Quantity,
    pub q_sc: Quantity,
    pub finesse_sc: Quantity,
    pub loss_one_pass: Quantity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_lambda: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Quantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Quantity>,
    pub provenance: Provenance,
}

/// Serializes a report and writes it with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, report: &T) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize infallibly");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Pulls `(lambda0, delta_lambda)` back out of a `fibercav fit` JSON
/// report, so `report --fit` can chain off a previous run.
pub fn read_fit_resonance(path: &Path) -> Result<(f64, f64), ReportError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: shown.clone(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ReportError::BadFitReport {
            path: shown.clone(),
            message: format!("not valid JSON: {e}"),
        })?;
    let field = |name: &str| -> Result<f64, ReportError> {
        value
            .get(name)
            .and_then(|q| q.get("value"))
            .and_then(|v| v.as_f64())
            .ok_or_else(|| ReportError::BadFitReport {
                path: shown.clone(),
                message: format!("missing numeric field '{name}.value'"),
            })
    };
    Ok((field("lambda0")?, field("delta_lambda")?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_six_significant_digits() {
        assert_eq!(round6(4473.6417), 4473.64);
        assert_eq!(round6(0.04813564), 0.0481356);
        assert_eq!(round6(63.67971), 63.6797);
        assert_eq!(round6(0.0), 0.0);
        assert_eq!(round6(-1234.5678), -1234.57);
    }

    #[test]
    fn fit_report_round_trips_its_resonance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fit.json");
        let fit = LorentzianDipFit {
            lambda0: 639.969,
            delta_lambda: 0.589,
            r0: 0.23,
            background: 0.94,
            lambda0_err: 1e-4,
            delta_lambda_err: 2e-4,
            r0_err: 1e-3,
            background_err: 1e-3,
            residual_rms: 1e-6,
            converged: true,
            iterations: 12,
            objective_trace: vec![1.0, 1e-6],
        };
        let report = DipReport::new(&fit, 431.9, 1086.5, Provenance::new(vec![], false));
        write_json(&path, &report).unwrap();
        let (lambda0, delta_lambda) = read_fit_resonance(&path).unwrap();
        assert_eq!(lambda0, 639.969);
        assert_eq!(delta_lambda, 0.589);
    }

    #[test]
    fn suppressed_timestamp_never_serializes() {
        let provenance = Provenance::new(vec!["s.csv".to_string()], false);
        let text = serde_json::to_string(&provenance).unwrap();
        assert!(!text.contains("unix_time_s"));
        assert!(text.contains("s.csv"));
    }
}
