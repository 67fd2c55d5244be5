//! CSV tables: spectra, coupling points, and sweep rows.
//!
//! Spectra are written at full precision (`{:.16e}`) so a simulate/load
//! round trip is bit-exact; sweep tables are human-facing and rounded to
//! six significant digits. Loaders report problems with the 1-based line
//! number of the offending row, never a byte offset.

use std::path::Path;

use fibercav::fit::CouplingFit;
use fibercav::grating::Spectrum;
use fibercav::sweep::SweepRow;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Empty { path: String, message: String },
    #[error("{path}:1: expected header '{expected}', got '{got}'")]
    Header {
        path: String,
        expected: &'static str,
        got: String,
    },
    #[error("{path}:{row}: {message}")]
    Parse {
        path: String,
        row: usize,
        message: String,
    },
    #[error("{path}:{row}: wavelength {value} nm does not increase past {previous} nm")]
    NonMonotonicGrid {
        path: String,
        row: usize,
        value: f64,
        previous: f64,
    },
}

/// Largest reflectivity a loader accepts; anything in `(1, 1.05]` is
/// treated as measurement noise and clipped to 1.
const REFLECTIVITY_SLACK: f64 = 1.05;

fn write_text(path: &Path, text: &str) -> Result<(), TableError> {
    std::fs::write(path, text).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String, TableError> {
    std::fs::read_to_string(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Data lines paired with their 1-based position in the file.
type NumberedLines<'t> = Vec<(usize, &'t str)>;

/// Splits CSV text into the header line and numbered data lines, skipping
/// blanks.
fn split_rows<'t>(text: &'t str, path: &str) -> Result<(String, NumberedLines<'t>), TableError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(TableError::Empty {
            path: path.to_string(),
            message: "file is empty".to_string(),
        });
    };
    Ok((header.to_string(), lines.collect()))
}

fn parse_field(path: &str, row: usize, name: &str, text: &str) -> Result<f64, TableError> {
    let value: f64 = text.trim().parse().map_err(|_| TableError::Parse {
        path: path.to_string(),
        row,
        message: format!("invalid {name} '{}'", text.trim()),
    })?;
    if !value.is_finite() {
        return Err(TableError::Parse {
            path: path.to_string(),
            row,
            message: format!("{name} must be finite, got '{}'", text.trim()),
        });
    }
    Ok(value)
}

/// Checks one power value against `[0, 1.05]` and clips the noise band
/// `(1, 1.05]` to 1, counting the clip in `clipped`.
fn check_power(
    path: &str,
    row: usize,
    name: &str,
    value: f64,
    clipped: &mut usize,
) -> Result<f64, TableError> {
    if !(0.0..=REFLECTIVITY_SLACK).contains(&value) {
        return Err(TableError::Parse {
            path: path.to_string(),
            row,
            message: format!("{name} {value} outside [0, {REFLECTIVITY_SLACK}]"),
        });
    }
    if value > 1.0 {
        *clipped += 1;
        Ok(1.0)
    } else {
        Ok(value)
    }
}

/// Writes a spectrum as `wavelength_nm,reflectivity[,transmittance]` rows.
pub fn write_spectrum(path: &Path, spectrum: &Spectrum) -> Result<(), TableError> {
    let mut text = String::new();
    match &spectrum.transmittance {
        Some(transmittance) => {
            text.push_str("wavelength_nm,reflectivity,transmittance\n");
            for ((w, r), t) in spectrum
                .wavelength_nm
                .iter()
                .zip(&spectrum.reflectivity)
                .zip(transmittance)
            {
                text.push_str(&format!("{w:.16e},{r:.16e},{t:.16e}\n"));
            }
        }
        None => {
            text.push_str("wavelength_nm,reflectivity\n");
            for (w, r) in spectrum.wavelength_nm.iter().zip(&spectrum.reflectivity) {
                text.push_str(&format!("{w:.16e},{r:.16e}\n"));
            }
        }
    }
    write_text(path, &text)
}

/// Loads a spectrum CSV. Returns the spectrum and the number of power
/// values that were clipped from the `(1, 1.05]` noise band down to 1.
pub fn load_spectrum(path: &Path) -> Result<(Spectrum, usize), TableError> {
    let shown = path.display().to_string();
    let text = read_text(path)?;
    let (header, rows) = split_rows(&text, &shown)?;
    let columns = match header.as_str() {
        "wavelength_nm,reflectivity" => 2,
        "wavelength_nm,reflectivity,transmittance" => 3,
        other => {
            return Err(TableError::Header {
                path: shown,
                expected: "wavelength_nm,reflectivity[,transmittance]",
                got: other.to_string(),
            })
        }
    };
    if rows.is_empty() {
        return Err(TableError::Empty {
            path: shown,
            message: "no data rows below the header".to_string(),
        });
    }

    let mut wavelength = Vec::with_capacity(rows.len());
    let mut reflectivity = Vec::with_capacity(rows.len());
    let mut transmittance = Vec::with_capacity(rows.len());
    let mut clipped = 0usize;
    for (row, line) in rows {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(TableError::Parse {
                path: shown.clone(),
                row,
                message: format!("expected {columns} fields, got {}", fields.len()),
            });
        }
        let w = parse_field(&shown, row, "wavelength", fields[0])?;
        if let Some(&previous) = wavelength.last() {
            if w <= previous {
                return Err(TableError::NonMonotonicGrid {
                    path: shown.clone(),
                    row,
                    value: w,
                    previous,
                });
            }
        }
        let r = parse_field(&shown, row, "reflectivity", fields[1])?;
        wavelength.push(w);
        reflectivity.push(check_power(&shown, row, "reflectivity", r, &mut clipped)?);
        if columns == 3 {
            let t = parse_field(&shown, row, "transmittance", fields[2])?;
            transmittance.push(check_power(&shown, row, "transmittance", t, &mut clipped)?);
        }
    }

    let transmittance = (columns == 3).then_some(transmittance);
    let spectrum = Spectrum::new(wavelength, reflectivity, transmittance, None)
        .expect("rows were range-checked and ordered above");
    Ok((spectrum, clipped))
}

/// `(kappa, r0)` pairs plus their weights when the table carries a weight
/// column.
pub type CouplingTable = (Vec<(f64, f64)>, Option<Vec<f64>>);

/// Loads `kappa_ghz,r0[,weight]` coupling points.
pub fn load_coupling_points(path: &Path) -> Result<CouplingTable, TableError> {
    let shown = path.display().to_string();
    let text = read_text(path)?;
    let (header, rows) = split_rows(&text, &shown)?;
    let weighted = match header.as_str() {
        "kappa_ghz,r0" => false,
        "kappa_ghz,r0,weight" => true,
        other => {
            return Err(TableError::Header {
                path: shown,
                expected: "kappa_ghz,r0[,weight]",
                got: other.to_string(),
            })
        }
    };
    if rows.is_empty() {
        return Err(TableError::Empty {
            path: shown,
            message: "no data rows below the header".to_string(),
        });
    }

    let columns = if weighted { 3 } else { 2 };
    let mut points = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    for (row, line) in rows {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(TableError::Parse {
                path: shown.clone(),
                row,
                message: format!("expected {columns} fields, got {}", fields.len()),
            });
        }
        let kappa = parse_field(&shown, row, "kappa_ghz", fields[0])?;
        let r0 = parse_field(&shown, row, "r0", fields[1])?;
        points.push((kappa, r0));
        if weighted {
            weights.push(parse_field(&shown, row, "weight", fields[2])?);
        }
    }
    Ok((points, weighted.then_some(weights)))
}

/// Rounds to six significant digits for human-facing tables and reports.
pub fn sig6(value: f64) -> String {
    if !value.is_finite() || value == 0.0 {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{value:.decimals$}")
}

/// Writes sweep or tuning rows as a CSV table rounded to six significant
/// digits per value.
pub fn write_sweep_rows(path: &Path, rows: &[SweepRow]) -> Result<(), TableError> {
    let mut text = String::from(
        "n_in,n_out,polarization,position_um,lambda0_nm,delta_lambda_nm,r0,kappa_ghz,q,regime,converged\n",
    );
    for row in rows {
        let regime = match row.regime {
            Some(regime) => regime.to_string(),
            None => "none".to_string(),
        };
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            row.n_in,
            row.n_out,
            row.polarization,
            sig6(row.tuning_position),
            sig6(row.lambda0),
            sig6(row.delta_lambda),
            sig6(row.r0),
            sig6(row.kappa),
            sig6(row.q),
            regime,
            row.fit_converged,
        ));
    }
    write_text(path, &text)
}

/// One-line summary of a pooled coupling fit for terminal output.
pub fn describe_coupling(fit: &CouplingFit) -> String {
    format!(
        "kappa_sc = {} +- {} GHz over {} points (residual rms {})",
        sig6(fit.kappa_sc),
        sig6(fit.kappa_sc_err),
        fit.points.len(),
        sig6(fit.residual_rms),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits_across_magnitudes() {
        assert_eq!(sig6(1158.21), "1158.21");
        assert_eq!(sig6(0.00465), "0.00465000");
        assert_eq!(sig6(639.969), "639.969");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-42.5), "-42.5000");
        assert_eq!(sig6(1234567.0), "1234567");
    }

    #[test]
    fn spectrum_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let spectrum = Spectrum::new(
            vec![600.0, 600.1 + 1e-13, 600.2],
            vec![0.1234567890123456, 0.0, 1.0],
            Some(vec![0.5, 0.25, 0.125]),
            None,
        )
        .unwrap();
        write_spectrum(&path, &spectrum).unwrap();
        let (loaded, clipped) = load_spectrum(&path).unwrap();
        assert_eq!(clipped, 0);
        assert_eq!(loaded.wavelength_nm, spectrum.wavelength_nm);
        assert_eq!(loaded.reflectivity, spectrum.reflectivity);
        assert_eq!(loaded.transmittance, spectrum.transmittance);
    }

    #[test]
    fn noise_band_clips_with_a_count_and_excess_rejects() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "wavelength_nm,reflectivity\n600,1.03\n601,0.5\n").unwrap();
        let (spectrum, clipped) = load_spectrum(&path).unwrap();
        assert_eq!(clipped, 1);
        assert_eq!(spectrum.reflectivity[0], 1.0);

        std::fs::write(&path, "wavelength_nm,reflectivity\n600,1.2\n").unwrap();
        let err = load_spectrum(&path).unwrap_err();
        assert!(matches!(err, TableError::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn grid_violations_name_their_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(
            &path,
            "wavelength_nm,reflectivity\n600,0.5\n601,0.5\n600.5,0.5\n",
        )
        .unwrap();
        let err = load_spectrum(&path).unwrap_err();
        assert!(
            matches!(err, TableError::NonMonotonicGrid { row: 4, .. }),
            "{err}"
        );
    }

    #[test]
    fn empty_and_header_only_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(
            load_spectrum(&path).unwrap_err(),
            TableError::Empty { .. }
        ));
        std::fs::write(&path, "wavelength_nm,reflectivity\n").unwrap();
        assert!(matches!(
            load_spectrum(&path).unwrap_err(),
            TableError::Empty { .. }
        ));
    }

    #[test]
    fn coupling_points_respect_their_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "kappa_ghz,r0\n405,0.595\n122,0.095\n").unwrap();
        let (points, weights) = load_coupling_points(&path).unwrap();
        assert_eq!(points, vec![(405.0, 0.595), (122.0, 0.095)]);
        assert!(weights.is_none());

        std::fs::write(&path, "kappa_ghz,r0,weight\n405,0.595,2\n").unwrap();
        let (_, weights) = load_coupling_points(&path).unwrap();
        assert_eq!(weights, Some(vec![2.0]));

        std::fs::write(&path, "kappa_ghz,r0\n405,0.595,2\n").unwrap();
        let err = load_coupling_points(&path).unwrap_err();
        assert!(matches!(err, TableError::Parse { row: 2, .. }), "{err}");
    }
}
