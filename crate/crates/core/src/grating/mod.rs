//! One-dimensional effective-index model of a slat grating bonded to a
//! nanofiber.
//!
//! The guided mode of a bare nanofiber propagates at an effective index
//! `base_index`. Wherever a grating slat touches the fiber the local
//! effective index rises by `index_contrast`, and a small imaginary part
//! stands in for the power the slat scatters out of the guided mode. A
//! grating of `n_in_slats` periods, a widened defect gap, and `n_out_slats`
//! periods therefore maps onto a stack of homogeneous layers that can be
//! solved exactly with 2x2 characteristic matrices ([`stack_response`]).
//!
//! The first stop band of the periodic sections is centered where one
//! period accumulates half a wave of phase: `lambda_B = 2 n_cell Lambda`,
//! with `n_cell` the duty-cycle-weighted cell index. The widened defect
//! breaks the lattice with a half-period phase slip, which places a narrow
//! reflection dip at the center of the band.

mod spectrum;
mod tmm;

pub use spectrum::{Spectrum, SpectrumError, StopBand, WavelengthGrid};
pub use tmm::{
    locate_stopband, power_response, simulate_spectrum, stack_response, DEFAULT_STOPBAND_THRESHOLD,
};

use num_complex::Complex64;
use thiserror::Error;

/// Guided polarization label. The slats break the fiber's cylindrical
/// symmetry, so the two orthogonal polarizations see slightly different
/// effective indices and scattering losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    X,
    Y,
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::X => "x",
            Polarization::Y => "y",
        })
    }
}

impl std::str::FromStr for Polarization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" | "X" => Ok(Polarization::X),
            "y" | "Y" => Ok(Polarization::Y),
            other => Err(format!("unknown polarization '{other}', expected x or y")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GratingError {
    #[error("invalid design: {field}: {message}")]
    InvalidDesign {
        field: &'static str,
        message: String,
    },
    #[error("tuning position {position} um outside +-{half_length} um")]
    TuningOutOfRange { position: f64, half_length: f64 },
    #[error("singular stack: {0}")]
    SingularStack(String),
    #[error("numerical overflow evaluating stack at {wavelength_nm} nm")]
    NumericalOverflow { wavelength_nm: f64 },
    #[error("no stop band found: {0}")]
    NoBandFound(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid spectrum: {0}")]
    Spectrum(#[from] SpectrumError),
}

/// Nominal slat pitch of the reference design, nm.
pub const REFERENCE_PERIOD_NM: f64 = 252.0;
/// Fraction of each period covered by a slat.
pub const REFERENCE_DUTY_CYCLE: f64 = 0.2;
/// Defect gap width of the reference design, nm (1.5 periods).
pub const REFERENCE_DEFECT_WIDTH_NM: f64 = 378.0;
/// Nanofiber diameter of the reference design, nm.
pub const REFERENCE_FIBER_DIAMETER_NM: f64 = 510.0;
/// Wavelength the reference design centers its stop band on, nm.
pub const REFERENCE_BAND_CENTER_NM: f64 = 640.0;
/// Input-mirror slat count of the reference design.
pub const REFERENCE_N_IN: usize = 150;
/// Output-mirror slat count of the reference design.
pub const REFERENCE_N_OUT: usize = 270;
/// Overall slat-array length available for repositioning, um.
pub const REFERENCE_GRATING_LENGTH_UM: f64 = 500.0;

/// Effective-index step under a slat. Calibrated so that a slat-count sweep
/// of the reference design walks the total linewidth from several hundred
/// GHz down through the critical-coupling point well inside 70..=240 input
/// slats, with dips that remain resolvable on a few-pm wavelength grid.
pub const DEFAULT_INDEX_CONTRAST: f64 = 0.018;

/// Imaginary part of the slat-covered effective index for the x mode.
/// Calibrated so the loss floor of the total linewidth (the value it
/// saturates to when both mirrors are made arbitrarily strong) lands on the
/// tens-of-GHz scale seen in fabricated devices.
pub const DEFAULT_SLAT_LOSS: f64 = 3.0e-4;

/// The y mode scatters somewhat harder off the slat edges; its slat loss is
/// scaled by this factor.
pub const DEFAULT_Y_LOSS_MULTIPLIER: f64 = 1.25;

/// Effective-index offset seen by the y mode. Calibrated to split the x and
/// y dips of the reference design by about 1.05 nm.
pub const DEFAULT_BIREFRINGENT_SPLIT: f64 = 2.08e-3;

/// Geometry and optical parameters of one composite cavity.
///
/// Lengths are in nm except `grating_length` (um); `chirp_rate` is in nm of
/// period per um of mounting position.
#[derive(Debug, Clone, PartialEq)]
pub struct GratingDesign {
    /// Nanofiber diameter, nm. Carried for provenance; the 1D model only
    /// sees it through the calibrated effective indices.
    pub fiber_diameter: f64,
    /// Slat pitch, nm.
    pub period: f64,
    /// Fraction of each period covered by a slat, in (0, 1).
    pub duty_cycle: f64,
    /// Defect gap width, nm. Defaults to 1.5 periods, which parks the
    /// defect resonance at the stop-band center.
    pub defect_width: f64,
    /// Slats in the first (input-side) mirror.
    pub n_in_slats: usize,
    /// Slats in the second (output-side) mirror.
    pub n_out_slats: usize,
    /// Effective index of bare-fiber segments.
    pub base_index: f64,
    /// Index step added under each slat.
    pub index_contrast: f64,
    /// Extra index seen by the y polarization everywhere under the grating.
    pub birefringent_split: f64,
    /// Imaginary index under a slat for the x mode (scattering loss).
    pub slat_loss: f64,
    /// Factor applied to `slat_loss` for the y mode.
    pub y_loss_multiplier: f64,
    /// Linear period gradient along the slat array, nm per um.
    pub chirp_rate: f64,
    /// Length of the slat array available for repositioning, um.
    pub grating_length: f64,
}

impl GratingDesign {
    /// The calibrated reference design: a 252 nm pitch, 20% duty cycle
    /// grating whose stop band is centered on 640 nm.
    ///
    /// The base index is chosen so that the duty-cycle-weighted cell index
    /// equals `calibrate_base_index(640, 252)`; the Bragg condition holds
    /// for the cell average, not for the bare-segment index alone.
    pub fn reference() -> Self {
        let cell_index = REFERENCE_BAND_CENTER_NM / (2.0 * REFERENCE_PERIOD_NM);
        GratingDesign {
            fiber_diameter: REFERENCE_FIBER_DIAMETER_NM,
            period: REFERENCE_PERIOD_NM,
            duty_cycle: REFERENCE_DUTY_CYCLE,
            defect_width: REFERENCE_DEFECT_WIDTH_NM,
            n_in_slats: REFERENCE_N_IN,
            n_out_slats: REFERENCE_N_OUT,
            base_index: cell_index - REFERENCE_DUTY_CYCLE * DEFAULT_INDEX_CONTRAST,
            index_contrast: DEFAULT_INDEX_CONTRAST,
            birefringent_split: DEFAULT_BIREFRINGENT_SPLIT,
            slat_loss: DEFAULT_SLAT_LOSS,
            y_loss_multiplier: DEFAULT_Y_LOSS_MULTIPLIER,
            chirp_rate: 0.0,
            grating_length: REFERENCE_GRATING_LENGTH_UM,
        }
    }

    /// Re-centers the design's stop band on `target_nm` by recomputing the
    /// base index from the Bragg condition and the current duty cycle and
    /// contrast.
    pub fn with_band_center(mut self, target_nm: f64) -> Result<Self, GratingError> {
        let cell_index = calibrate_base_index(target_nm, self.period)?;
        self.base_index = cell_index - self.duty_cycle * self.index_contrast;
        self.validate()?;
        Ok(self)
    }

    pub fn with_n_in(mut self, n: usize) -> Self {
        self.n_in_slats = n;
        self
    }

    pub fn with_n_out(mut self, n: usize) -> Self {
        self.n_out_slats = n;
        self
    }

    /// Slat width `duty_cycle * period`, nm.
    pub fn slat_width(&self) -> f64 {
        self.duty_cycle * self.period
    }

    /// Duty-cycle-weighted index of one period; the quantity the Bragg
    /// condition sees.
    pub fn cell_index(&self) -> f64 {
        self.base_index + self.duty_cycle * self.index_contrast
    }

    /// Stop-band center `2 * cell_index * period` of the unchirped design, nm.
    pub fn band_center(&self) -> f64 {
        2.0 * self.cell_index() * self.period
    }

    pub fn validate(&self) -> Result<(), GratingError> {
        fn check(
            field: &'static str,
            value: f64,
            ok: bool,
            message: String,
        ) -> Result<(), GratingError> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(GratingError::InvalidDesign { field, message })
            }
        }
        check(
            "period",
            self.period,
            self.period > 0.0,
            format!("period must be positive, got {}", self.period),
        )?;
        check(
            "duty_cycle",
            self.duty_cycle,
            self.duty_cycle > 0.0 && self.duty_cycle < 1.0,
            format!("duty_cycle must lie in (0, 1), got {}", self.duty_cycle),
        )?;
        check(
            "defect_width",
            self.defect_width,
            self.defect_width > 0.0,
            format!("defect_width must be positive, got {}", self.defect_width),
        )?;
        check(
            "fiber_diameter",
            self.fiber_diameter,
            self.fiber_diameter > 0.0,
            format!(
                "fiber_diameter must be positive, got {}",
                self.fiber_diameter
            ),
        )?;
        check(
            "base_index",
            self.base_index,
            self.base_index > 1.0,
            format!("base_index must exceed 1, got {}", self.base_index),
        )?;
        check(
            "index_contrast",
            self.index_contrast,
            self.index_contrast >= 0.0,
            format!(
                "index_contrast must be non-negative, got {}",
                self.index_contrast
            ),
        )?;
        check(
            "birefringent_split",
            self.birefringent_split,
            self.birefringent_split >= 0.0,
            format!(
                "birefringent_split must be non-negative, got {}",
                self.birefringent_split
            ),
        )?;
        check(
            "slat_loss",
            self.slat_loss,
            self.slat_loss >= 0.0,
            format!("slat_loss must be non-negative, got {}", self.slat_loss),
        )?;
        check(
            "y_loss_multiplier",
            self.y_loss_multiplier,
            self.y_loss_multiplier >= 0.0,
            format!(
                "y_loss_multiplier must be non-negative, got {}",
                self.y_loss_multiplier
            ),
        )?;
        check("chirp_rate", self.chirp_rate, true, String::new())?;
        check(
            "grating_length",
            self.grating_length,
            self.grating_length > 0.0,
            format!(
                "grating_length must be positive, got {}",
                self.grating_length
            ),
        )?;
        Ok(())
    }
}

/// One homogeneous layer of the transfer-matrix stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    /// Physical thickness, nm.
    pub thickness: f64,
    /// Complex effective index in the `n - ik` convention: a negative
    /// imaginary part absorbs.
    pub index: Complex64,
}

/// A fully resolved layer stack between two semi-infinite media.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    /// Real index of the semi-infinite medium light arrives from.
    pub n_incident: f64,
    /// Real index of the semi-infinite medium behind the stack.
    pub n_exit: f64,
    pub polarization: Polarization,
    /// Mounting position the stack was built for, um.
    pub tuning_offset: f64,
}

/// Cell index required to center the first stop band on `target_nm` for a
/// grating of pitch `period_nm`: the Bragg condition `lambda = 2 n Lambda`.
///
/// For a design with nonzero index contrast the returned value is the
/// duty-cycle-weighted cell index; [`GratingDesign::with_band_center`]
/// performs the corresponding split into base index and contrast.
pub fn calibrate_base_index(target_nm: f64, period_nm: f64) -> Result<f64, GratingError> {
    if !(target_nm.is_finite() && target_nm > 0.0) {
        return Err(GratingError::InvalidInput(format!(
            "target wavelength must be positive, got {target_nm}"
        )));
    }
    if !(period_nm.is_finite() && period_nm > 0.0) {
        return Err(GratingError::InvalidInput(format!(
            "period must be positive, got {period_nm}"
        )));
    }
    Ok(target_nm / (2.0 * period_nm))
}

/// Expands a design into the layer stack seen by one polarization at one
/// mounting position.
///
/// The stack is `n_in_slats` unit cells (slat then gap), the defect gap,
/// then `n_out_slats` unit cells, embedded between semi-infinite media at
/// the bare-fiber index: `2 (n_in + n_out) + 1` layers in total. A nonzero
/// chirp rescales every layer by the local period
/// `period + chirp_rate * tuning_position`.
pub fn build_stack(
    design: &GratingDesign,
    polarization: Polarization,
    tuning_position_um: f64,
) -> Result<LayerStack, GratingError> {
    design.validate()?;
    let half_length = 0.5 * design.grating_length;
    if !tuning_position_um.is_finite() || tuning_position_um.abs() > half_length {
        return Err(GratingError::TuningOutOfRange {
            position: tuning_position_um,
            half_length,
        });
    }
    let local_period = design.period + design.chirp_rate * tuning_position_um;
    if local_period <= 0.0 {
        return Err(GratingError::InvalidDesign {
            field: "chirp_rate",
            message: format!(
                "local period {local_period} nm is not positive at position {tuning_position_um} um"
            ),
        });
    }
    let scale = local_period / design.period;
    let slat_thickness = design.duty_cycle * local_period;
    let gap_thickness = (1.0 - design.duty_cycle) * local_period;
    let defect_thickness = design.defect_width * scale;

    let split = match polarization {
        Polarization::X => 0.0,
        Polarization::Y => design.birefringent_split,
    };
    let loss = match polarization {
        Polarization::X => design.slat_loss,
        Polarization::Y => design.slat_loss * design.y_loss_multiplier,
    };
    // The solver's characteristic matrices follow the n - ik convention:
    // absorption is a negative imaginary part.
    let n_gap = Complex64::new(design.base_index + split, 0.0);
    let n_slat = Complex64::new(design.base_index + design.index_contrast + split, -loss);

    let total = 2 * (design.n_in_slats + design.n_out_slats) + 1;
    let mut layers = Vec::with_capacity(total);
    for _ in 0..design.n_in_slats {
        layers.push(Layer {
            thickness: slat_thickness,
            index: n_slat,
        });
        layers.push(Layer {
            thickness: gap_thickness,
            index: n_gap,
        });
    }
    layers.push(Layer {
        thickness: defect_thickness,
        index: n_gap,
    });
    for _ in 0..design.n_out_slats {
        layers.push(Layer {
            thickness: slat_thickness,
            index: n_slat,
        });
        layers.push(Layer {
            thickness: gap_thickness,
            index: n_gap,
        });
    }

    Ok(LayerStack {
        layers,
        n_incident: design.base_index,
        n_exit: design.base_index,
        polarization,
        tuning_offset: tuning_position_um,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bragg_calibration_reference_values() {
        let n = calibrate_base_index(640.0, 252.0).unwrap();
        assert!((n - 1.269_841).abs() < 5e-6);
        let n = calibrate_base_index(627.0, 252.0).unwrap();
        assert!((n - 1.244_048).abs() < 5e-6);
        // Degenerate identity: a half-wavelength period needs index 1.
        assert!((calibrate_base_index(500.0, 250.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(calibrate_base_index(0.0, 252.0).is_err());
        assert!(calibrate_base_index(640.0, -1.0).is_err());
    }

    #[test]
    fn reference_design_is_valid_and_centered() {
        let design = GratingDesign::reference();
        design.validate().unwrap();
        assert!((design.band_center() - 640.0).abs() < 1e-9);
        assert!((design.slat_width() - 50.4).abs() < 1e-12);
        assert!((design.defect_width - 378.0).abs() < 1e-12);
    }

    #[test]
    fn stack_layer_counts() {
        let design = GratingDesign::reference().with_n_in(150).with_n_out(150);
        let stack = build_stack(&design, Polarization::X, 0.0).unwrap();
        assert_eq!(stack.layers.len(), 601);
        assert!((stack.layers[0].thickness - 50.4).abs() < 1e-12);
        assert!((stack.layers[1].thickness - 201.6).abs() < 1e-12);
        // The middle layer is the defect gap.
        assert!((stack.layers[300].thickness - 378.0).abs() < 1e-12);
        assert_eq!(stack.layers[300].index.im, 0.0);

        let bare = GratingDesign::reference().with_n_in(0).with_n_out(0);
        let stack = build_stack(&bare, Polarization::X, 0.0).unwrap();
        assert_eq!(stack.layers.len(), 1);
    }

    #[test]
    fn chirp_scales_every_layer() {
        let mut design = GratingDesign::reference();
        design.chirp_rate = 0.02;
        let stack = build_stack(&design, Polarization::X, 250.0).unwrap();
        let local_period = 257.0;
        assert!((stack.layers[0].thickness - 0.2 * local_period).abs() < 1e-9);
        assert!((stack.layers[1].thickness - 0.8 * local_period).abs() < 1e-9);
        let defect = stack.layers[2 * 150].thickness;
        assert!((defect - 378.0 * local_period / 252.0).abs() < 1e-9);
    }

    #[test]
    fn tuning_bounds_are_enforced() {
        let design = GratingDesign::reference();
        assert!(matches!(
            build_stack(&design, Polarization::X, 251.0),
            Err(GratingError::TuningOutOfRange { .. })
        ));
        assert!(build_stack(&design, Polarization::X, -250.0).is_ok());
    }

    #[test]
    fn y_mode_shifts_index_and_loss() {
        let design = GratingDesign::reference();
        let x = build_stack(&design, Polarization::X, 0.0).unwrap();
        let y = build_stack(&design, Polarization::Y, 0.0).unwrap();
        let split = design.birefringent_split;
        assert!((y.layers[0].index.re - x.layers[0].index.re - split).abs() < 1e-15);
        assert!((y.layers[1].index.re - x.layers[1].index.re - split).abs() < 1e-15);
        assert!((y.layers[0].index.im / x.layers[0].index.im - 1.25).abs() < 1e-12);
    }

    #[test]
    fn design_validation_names_fields() {
        let mut design = GratingDesign::reference();
        design.duty_cycle = 1.5;
        match design.validate() {
            Err(GratingError::InvalidDesign { field, .. }) => assert_eq!(field, "duty_cycle"),
            other => panic!("expected InvalidDesign, got {other:?}"),
        }
    }
}
