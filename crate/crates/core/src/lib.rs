//! Design and analysis toolkit for one-sided composite cavities built by
//! mounting a defect-mode slat grating on an optical nanofiber.
//!
//! The crate is organised around the workflow used to characterise such a
//! cavity:
//!
//! * [`grating`] — a one-dimensional effective-index forward model. Bare
//!   fiber segments propagate at a base effective index, slat-covered
//!   segments at a raised one, and the resulting layer stack is solved
//!   with 2x2 characteristic matrices to produce reflection spectra.
//! * [`fit`] — spectral post-processing: locating the defect dip inside the
//!   stop band, fitting it with a Lorentzian line shape, and fitting the
//!   scattering rate that links on-resonance reflectivity to total
//!   linewidth across a family of cavities.
//! * [`cavity`] — single-port input-output theory used both to interpret
//!   fitted dips (coupling regimes, figures of merit) and to generate
//!   reference data.
//! * [`sweep`] — batch orchestration: slat-count sweeps, resonance tuning
//!   scans, and critical-coupling searches over the resulting rows.
//!
//! All rates are ordinary frequencies in GHz, wavelengths are in nm, and
//! mechanical lengths (cavity length, tuning positions) are in um.

pub mod cavity;
pub mod fit;
pub mod grating;
pub mod sweep;

pub use cavity::{
    classify_regime, guided_fraction, kappa_sc_from_r0, linewidth_metrics,
    on_resonance_reflectivity, reflection_amplitude, scattering_metrics, CavityError, CavityRates,
    CouplingBranch, CouplingRegime, FiguresOfMerit, Resonance, ScatteringMetrics,
    DEFAULT_CRITICAL_TOLERANCE, SPEED_OF_LIGHT,
};
pub use fit::{
    fit_kappa_sc, fit_lorentzian_dip, locate_dip, lorentzian_dip_value, synthesize_dip,
    CouplingFit, CouplingPoint, DipGuess, FitConfig, FitError, LorentzianDipFit,
};
pub use grating::{
    build_stack, calibrate_base_index, locate_stopband, power_response, simulate_spectrum,
    stack_response, GratingDesign, GratingError, Layer, LayerStack, Polarization, Spectrum,
    SpectrumError, StopBand, WavelengthGrid, DEFAULT_STOPBAND_THRESHOLD,
};
pub use sweep::{
    find_critical_coupling, sweep_input_slats, sweep_input_slats_with, sweep_output_slats,
    sweep_output_slats_with, tuning_scan, tuning_scan_with, CriticalPoint, SlatRange, SweepConfig,
    SweepError, SweepOutcome, SweepRow,
};
