//! Resonance-dip extraction and loss-rate estimation from spectra.
//!
//! The workflow mirrors how measured spectra are reduced by hand: find the
//! dip inside the stop band ([`locate_dip`]), refine it with a Lorentzian
//! least-squares fit ([`fit_lorentzian_dip`]), then pool the on-resonance
//! reflectivities of several cavities against their linewidths to estimate
//! the scattering rate they share ([`fit_kappa_sc`]).

mod coupling;
mod lorentzian;
mod synth;

pub use coupling::{fit_kappa_sc, CouplingFit, CouplingPoint};
pub use lorentzian::{
    fit_lorentzian_dip, locate_dip, lorentzian_dip_value, DipGuess, FitConfig, LorentzianDipFit,
};
pub use synth::synthesize_dip;

use thiserror::Error;

/// Failure modes of dip location and fitting.
#[derive(Debug, Error)]
pub enum FitError {
    /// The search window contains no feature deep enough to fit.
    #[error("no dip found: {0}")]
    NoDipFound(String),

    /// The window or grid leaves too few points to constrain the model.
    #[error("degenerate window: {0}")]
    DegenerateWindow(String),

    /// The input spectrum or point set is empty.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// The normal equations lost rank or the iteration diverged.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A parameter or argument is out of its valid range.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
