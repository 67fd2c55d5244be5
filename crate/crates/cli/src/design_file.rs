//! Plain-text design documents.
//!
//! A design file is a flat `key = value` document, one assignment per line,
//! with `#` comments and blank lines ignored:
//!
//! ```text
//! schema_version = 1
//! period = 252.0
//! duty_cycle = 0.2
//! n_in_slats = 120
//! n_out_slats = 270
//! ```
//!
//! Every key is optional. Omitted geometry falls back to the calibrated
//! reference design, with two derived defaults recomputed from the values
//! actually given: `defect_width` defaults to 1.5 periods, and `base_index`
//! is chosen so the stop band stays centered on 640 nm for whatever period,
//! duty cycle, and contrast the document sets. Assigning either key directly
//! suppresses the corresponding derivation.
//!
//! Unknown keys, duplicate keys, and malformed numbers are reported with
//! their line number; values a consistent cavity cannot have (a duty cycle
//! of 1.5, a negative pitch) are reported under the offending key.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use fibercav::grating::{calibrate_base_index, GratingDesign, GratingError};
use thiserror::Error;

/// The one document layout this build understands.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DesignFileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: unknown key '{key}'")]
    UnknownKey {
        path: String,
        line: usize,
        key: String,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: invalid {field}: {message}")]
    Invalid {
        path: String,
        field: String,
        message: String,
    },
}

#[derive(Default)]
struct RawDesign {
    schema_version: Option<u32>,
    fiber_diameter: Option<f64>,
    period: Option<f64>,
    duty_cycle: Option<f64>,
    defect_width: Option<f64>,
    n_in_slats: Option<usize>,
    n_out_slats: Option<usize>,
    base_index: Option<f64>,
    index_contrast: Option<f64>,
    birefringent_split: Option<f64>,
    slat_loss: Option<f64>,
    y_loss_multiplier: Option<f64>,
    chirp_rate: Option<f64>,
    grating_length: Option<f64>,
}

/// Reads and parses a design file from disk.
pub fn load_design(path: &Path) -> Result<GratingDesign, DesignFileError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| DesignFileError::Io {
        path: shown.clone(),
        source,
    })?;
    parse_design(&text, &shown)
}

/// Parses design-document text; `path` is used only in diagnostics.
pub fn parse_design(text: &str, path: &str) -> Result<GratingDesign, DesignFileError> {
    let mut raw = RawDesign::default();
    for (index, full_line) in text.lines().enumerate() {
        let line = index + 1;
        let content = full_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(DesignFileError::Parse {
                path: path.to_string(),
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        assign(&mut raw, path, line, key, value)?;
    }

    let version = raw.schema_version.unwrap_or(SCHEMA_VERSION);
    if version != SCHEMA_VERSION {
        return Err(DesignFileError::Invalid {
            path: path.to_string(),
            field: "schema_version".to_string(),
            message: format!("this build reads schema_version {SCHEMA_VERSION}, got {version}"),
        });
    }

    let reference = GratingDesign::reference();
    let period = raw.period.unwrap_or(reference.period);
    let mut design = GratingDesign {
        fiber_diameter: raw.fiber_diameter.unwrap_or(reference.fiber_diameter),
        period,
        duty_cycle: raw.duty_cycle.unwrap_or(reference.duty_cycle),
        defect_width: raw.defect_width.unwrap_or(1.5 * period),
        n_in_slats: raw.n_in_slats.unwrap_or(reference.n_in_slats),
        n_out_slats: raw.n_out_slats.unwrap_or(reference.n_out_slats),
        base_index: raw.base_index.unwrap_or(reference.base_index),
        index_contrast: raw.index_contrast.unwrap_or(reference.index_contrast),
        birefringent_split: raw
            .birefringent_split
            .unwrap_or(reference.birefringent_split),
        slat_loss: raw.slat_loss.unwrap_or(reference.slat_loss),
        y_loss_multiplier: raw.y_loss_multiplier.unwrap_or(reference.y_loss_multiplier),
        chirp_rate: raw.chirp_rate.unwrap_or(reference.chirp_rate),
        grating_length: raw.grating_length.unwrap_or(reference.grating_length),
    };
    if raw.base_index.is_none() {
        // Keep the stop band on the reference center for whatever pitch and
        // duty cycle the document chose.
        let cell = calibrate_base_index(reference.band_center(), design.period)
            .map_err(|e| design_error(path, e))?;
        design.base_index = cell - design.duty_cycle * design.index_contrast;
    }
    design.validate().map_err(|e| design_error(path, e))?;
    Ok(design)
}

fn assign(
    raw: &mut RawDesign,
    path: &str,
    line: usize,
    key: &str,
    value: &str,
) -> Result<(), DesignFileError> {
    fn set<T: FromStr>(
        slot: &mut Option<T>,
        path: &str,
        line: usize,
        key: &str,
        value: &str,
    ) -> Result<(), DesignFileError>
    where
        T::Err: Display,
    {
        if slot.is_some() {
            return Err(DesignFileError::Parse {
                path: path.to_string(),
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        let parsed = value.parse().map_err(|e| DesignFileError::Parse {
            path: path.to_string(),
            line,
            message: format!("invalid value '{value}' for '{key}': {e}"),
        })?;
        *slot = Some(parsed);
        Ok(())
    }

    match key {
        "schema_version" => set(&mut raw.schema_version, path, line, key, value),
        "fiber_diameter" => set(&mut raw.fiber_diameter, path, line, key, value),
        "period" => set(&mut raw.period, path, line, key, value),
        "duty_cycle" => set(&mut raw.duty_cycle, path, line, key, value),
        "defect_width" => set(&mut raw.defect_width, path, line, key, value),
        "n_in_slats" => set(&mut raw.n_in_slats, path, line, key, value),
        "n_out_slats" => set(&mut raw.n_out_slats, path, line, key, value),
        "base_index" => set(&mut raw.base_index, path, line, key, value),
        "index_contrast" => set(&mut raw.index_contrast, path, line, key, value),
        "birefringent_split" => set(&mut raw.birefringent_split, path, line, key, value),
        "slat_loss" => set(&mut raw.slat_loss, path, line, key, value),
        "y_loss_multiplier" => set(&mut raw.y_loss_multiplier, path, line, key, value),
        "chirp_rate" => set(&mut raw.chirp_rate, path, line, key, value),
        "grating_length" => set(&mut raw.grating_length, path, line, key, value),
        _ => Err(DesignFileError::UnknownKey {
            path: path.to_string(),
            line,
            key: key.to_string(),
        }),
    }
}

fn design_error(path: &str, error: GratingError) -> DesignFileError {
    match error {
        GratingError::InvalidDesign { field, message } => DesignFileError::Invalid {
            path: path.to_string(),
            field: field.to_string(),
            message,
        },
        other => DesignFileError::Invalid {
            path: path.to_string(),
            field: "design".to_string(),
            message: other.to_string(),
        },
    }
}
