//! Synthetic dip spectra for exercising the fitting pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{lorentzian_dip_value, FitError};
use crate::grating::{Spectrum, WavelengthGrid};

/// Samples a Lorentzian dip on a wavelength grid with additive Gaussian
/// noise.
///
/// The generator is seeded explicitly, so a fixed seed reproduces the same
/// spectrum bit for bit; `noise_sigma = 0` returns the bare model. Values
/// are clipped to `[0, 1]` after the noise is added, exactly as a detector
/// normalized against a reference would clip.
pub fn synthesize_dip(
    lambda0: f64,
    delta_lambda: f64,
    r0: f64,
    background: f64,
    grid: &WavelengthGrid,
    noise_sigma: f64,
    seed: u64,
) -> Result<Spectrum, FitError> {
    if !(lambda0.is_finite() && lambda0 > 0.0) {
        return Err(FitError::InvalidInput(format!(
            "lambda0 must be positive, got {lambda0}"
        )));
    }
    if !(delta_lambda.is_finite() && delta_lambda > 0.0) {
        return Err(FitError::InvalidInput(format!(
            "delta_lambda must be positive, got {delta_lambda}"
        )));
    }
    if !(0.0..=1.0).contains(&r0) || !(0.0..=1.0).contains(&background) || r0 > background {
        return Err(FitError::InvalidInput(format!(
            "need 0 <= r0 <= background <= 1, got r0 = {r0}, background = {background}"
        )));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(FitError::InvalidInput(format!(
            "noise_sigma must be non-negative, got {noise_sigma}"
        )));
    }

    let wavelengths = grid.wavelengths();
    let reflectivity: Vec<f64> = if noise_sigma == 0.0 {
        wavelengths
            .iter()
            .map(|&wl| lorentzian_dip_value(wl, lambda0, delta_lambda, r0, background))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_sigma)
            .map_err(|e| FitError::InvalidInput(format!("noise distribution: {e}")))?;
        wavelengths
            .iter()
            .map(|&wl| {
                let value = lorentzian_dip_value(wl, lambda0, delta_lambda, r0, background)
                    + noise.sample(&mut rng);
                value.clamp(0.0, 1.0)
            })
            .collect()
    };
    Spectrum::new(wavelengths, reflectivity, None, None)
        .map_err(|e| FitError::InvalidInput(e.to_string()))
}
