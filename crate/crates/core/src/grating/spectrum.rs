//! Sampled reflection spectra and the wavelength grids they live on.

use thiserror::Error;

use super::Polarization;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("spectrum is empty")]
    Empty,
    #[error("wavelength grid is not strictly increasing at index {index}")]
    NonMonotonicGrid { index: usize },
    #[error("value {value} at index {index} outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("column lengths differ: {0}")]
    LengthMismatch(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// An evenly spaced wavelength grid, nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthGrid {
    pub min_nm: f64,
    pub max_nm: f64,
    pub points: usize,
}

impl WavelengthGrid {
    /// The model is calibrated for the visible/near-infrared window; grids
    /// must stay inside 400..=1000 nm and hold at least two points.
    pub fn new(min_nm: f64, max_nm: f64, points: usize) -> Result<Self, SpectrumError> {
        if !(min_nm.is_finite() && max_nm.is_finite()) || min_nm >= max_nm {
            return Err(SpectrumError::InvalidGrid(format!(
                "need min < max, got [{min_nm}, {max_nm}]"
            )));
        }
        if min_nm < 400.0 || max_nm > 1000.0 {
            return Err(SpectrumError::InvalidGrid(format!(
                "grid [{min_nm}, {max_nm}] nm outside the supported 400..=1000 nm window"
            )));
        }
        if points < 2 {
            return Err(SpectrumError::InvalidGrid(format!(
                "need at least 2 points, got {points}"
            )));
        }
        Ok(WavelengthGrid {
            min_nm,
            max_nm,
            points,
        })
    }

    pub fn step(&self) -> f64 {
        (self.max_nm - self.min_nm) / (self.points - 1) as f64
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.max_nm
                } else {
                    self.min_nm + step * i as f64
                }
            })
            .collect()
    }
}

/// A sampled reflection spectrum, optionally with transmittance.
///
/// Reflectivities are clamped into [0, 1]; construction only tolerates
/// excursions within 1e-9 of that interval (numerical slack from the
/// matrix solve).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub wavelength_nm: Vec<f64>,
    pub reflectivity: Vec<f64>,
    pub transmittance: Option<Vec<f64>>,
    pub polarization: Option<Polarization>,
}

impl Spectrum {
    pub fn new(
        wavelength_nm: Vec<f64>,
        reflectivity: Vec<f64>,
        transmittance: Option<Vec<f64>>,
        polarization: Option<Polarization>,
    ) -> Result<Self, SpectrumError> {
        if wavelength_nm.is_empty() {
            return Err(SpectrumError::Empty);
        }
        if reflectivity.len() != wavelength_nm.len() {
            return Err(SpectrumError::LengthMismatch(format!(
                "{} wavelengths vs {} reflectivities",
                wavelength_nm.len(),
                reflectivity.len()
            )));
        }
        if let Some(t) = &transmittance {
            if t.len() != wavelength_nm.len() {
                return Err(SpectrumError::LengthMismatch(format!(
                    "{} wavelengths vs {} transmittances",
                    wavelength_nm.len(),
                    t.len()
                )));
            }
        }
        for i in 1..wavelength_nm.len() {
            // NaN anywhere must fail this comparison, so it is kept in the
            // "strictly ascending" form rather than its negation.
            let ascending = wavelength_nm[i] > wavelength_nm[i - 1];
            if !ascending {
                return Err(SpectrumError::NonMonotonicGrid { index: i });
            }
        }
        let clamp = |values: Vec<f64>| -> Result<Vec<f64>, SpectrumError> {
            values
                .into_iter()
                .enumerate()
                .map(|(index, value)| {
                    if (-1e-9..=1.0 + 1e-9).contains(&value) {
                        Ok(value.clamp(0.0, 1.0))
                    } else {
                        Err(SpectrumError::ValueOutOfRange { index, value })
                    }
                })
                .collect()
        };
        let reflectivity = clamp(reflectivity)?;
        let transmittance = transmittance.map(clamp).transpose()?;
        Ok(Spectrum {
            wavelength_nm,
            reflectivity,
            transmittance,
            polarization,
        })
    }

    pub fn len(&self) -> usize {
        self.wavelength_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelength_nm.is_empty()
    }

    /// Mean grid spacing, nm.
    pub fn grid_step(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        (self.wavelength_nm[self.len() - 1] - self.wavelength_nm[0]) / (self.len() - 1) as f64
    }
}

/// A located stop band: the widest contiguous interval where reflectivity
/// stays above a fraction of its peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopBand {
    pub center_nm: f64,
    pub low_nm: f64,
    pub high_nm: f64,
}

impl StopBand {
    pub fn width(&self) -> f64 {
        self.high_nm - self.low_nm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation_and_spacing() {
        assert!(WavelengthGrid::new(700.0, 600.0, 100).is_err());
        assert!(WavelengthGrid::new(300.0, 700.0, 100).is_err());
        assert!(WavelengthGrid::new(600.0, 1100.0, 100).is_err());
        assert!(WavelengthGrid::new(600.0, 700.0, 1).is_err());
        let grid = WavelengthGrid::new(600.0, 700.0, 4001).unwrap();
        assert!((grid.step() - 0.025).abs() < 1e-12);
        let wl = grid.wavelengths();
        assert_eq!(wl.len(), 4001);
        assert_eq!(wl[0], 600.0);
        assert_eq!(wl[4000], 700.0);
    }

    #[test]
    fn spectrum_validation() {
        let wl = vec![600.0, 600.5, 601.0];
        assert!(Spectrum::new(wl.clone(), vec![0.1, 0.2, 0.3], None, None).is_ok());
        // Tiny numerical overshoot is clamped.
        let s = Spectrum::new(wl.clone(), vec![0.1, 1.0 + 5e-10, -5e-10], None, None).unwrap();
        assert_eq!(s.reflectivity[1], 1.0);
        assert_eq!(s.reflectivity[2], 0.0);
        // Genuine violations are rejected.
        assert!(matches!(
            Spectrum::new(wl.clone(), vec![0.1, 1.1, 0.3], None, None),
            Err(SpectrumError::ValueOutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            Spectrum::new(vec![600.0, 600.0, 601.0], vec![0.1, 0.2, 0.3], None, None),
            Err(SpectrumError::NonMonotonicGrid { index: 1 })
        ));
        assert!(Spectrum::new(vec![], vec![], None, None).is_err());
        assert!(Spectrum::new(wl, vec![0.1, 0.2], None, None).is_err());
    }
}
