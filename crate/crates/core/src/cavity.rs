//! Input-output theory for a single-port (one-sided) resonator.
//!
//! A one-sided cavity exchanges light with the outside world through a
//! single guided port at rate `kappa_in`, loses power to scattering at
//! `kappa_sc`, and may leak through the nominally closed back mirror at
//! `kappa_out`. For a probe detuned by `delta_omega` from resonance the
//! reflected amplitude is
//!
//! ```text
//! r = (kappa_in/2 - kappa_loss/2 - i*delta_omega)
//!     / (kappa_in/2 + kappa_loss/2 + i*delta_omega),
//! kappa_loss = kappa_sc + kappa_out,
//! ```
//!
//! so the reflected power dips to `|1 - 2*kappa_sc/kappa|^2` on resonance
//! and recovers to unity far off resonance. All rates in this module are
//! ordinary frequencies in GHz (not angular frequencies); they relate to
//! spectral widths through `kappa = c * delta_lambda / lambda0^2`.

use num_complex::Complex64;
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative half-width of the critical-coupling band used by callers of
/// [`classify_regime`] that have no instrument-driven value of their own.
/// A cavity with `|kappa/2 - kappa_sc| <= 0.05 * kappa_sc` is labelled
/// critically coupled.
pub const DEFAULT_CRITICAL_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CavityError {
    #[error("invalid cavity rates: {0}")]
    InvalidRates(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Port and loss rates of a one-sided cavity, in GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityRates {
    /// Coupling rate through the guided input port.
    pub kappa_in: f64,
    /// Intra-cavity scattering loss rate.
    pub kappa_sc: f64,
    /// Leakage through the output mirror; zero for an ideal one-sided cavity.
    pub kappa_out: f64,
    /// Total linewidth; always the sum of the three rates above.
    pub kappa: f64,
}

impl CavityRates {
    pub fn new(kappa_in: f64, kappa_sc: f64, kappa_out: f64) -> Result<Self, CavityError> {
        let rates = CavityRates {
            kappa_in,
            kappa_sc,
            kappa_out,
            kappa: kappa_in + kappa_sc + kappa_out,
        };
        rates.validate()?;
        Ok(rates)
    }

    /// Rates for an ideal one-sided cavity (`kappa_out = 0`).
    pub fn one_sided(kappa_in: f64, kappa_sc: f64) -> Result<Self, CavityError> {
        Self::new(kappa_in, kappa_sc, 0.0)
    }

    /// Splits a measured total linewidth into input coupling and loss,
    /// attributing everything that is not scattering to the input port.
    pub fn from_total(kappa: f64, kappa_sc: f64) -> Result<Self, CavityError> {
        if !(kappa.is_finite() && kappa_sc.is_finite()) {
            return Err(CavityError::InvalidRates("rates must be finite".into()));
        }
        if kappa_sc > kappa {
            return Err(CavityError::InvalidRates(format!(
                "kappa_sc ({kappa_sc}) exceeds total kappa ({kappa})"
            )));
        }
        Self::new(kappa - kappa_sc, kappa_sc, 0.0)
    }

    pub fn validate(&self) -> Result<(), CavityError> {
        for (name, value) in [
            ("kappa_in", self.kappa_in),
            ("kappa_sc", self.kappa_sc),
            ("kappa_out", self.kappa_out),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(CavityError::InvalidRates(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        let sum = self.kappa_in + self.kappa_sc + self.kappa_out;
        if sum <= 0.0 {
            return Err(CavityError::InvalidRates(
                "total linewidth must be positive".into(),
            ));
        }
        if (self.kappa - sum).abs() > 1e-9 * sum {
            return Err(CavityError::InvalidRates(format!(
                "kappa ({}) is not the sum of the port rates ({sum})",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Combined non-port loss rate `kappa_sc + kappa_out`.
    pub fn loss_rate(&self) -> f64 {
        self.kappa_sc + self.kappa_out
    }
}

/// Which side of critical coupling a cavity sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingRegime {
    OverCoupled,
    Critical,
    UnderCoupled,
}

impl std::fmt::Display for CouplingRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CouplingRegime::OverCoupled => "over",
            CouplingRegime::Critical => "critical",
            CouplingRegime::UnderCoupled => "under",
        };
        f.write_str(s)
    }
}

/// Branch selector for inverting an on-resonance reflectivity back to a
/// scattering rate. The reflectivity alone cannot distinguish the two
/// solutions `kappa_sc = kappa * (1 -+ sqrt(r0)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingBranch {
    OverCoupled,
    UnderCoupled,
}

/// A fitted resonance dip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    /// Dip center, nm.
    pub lambda0: f64,
    /// Full width at half depth, nm.
    pub delta_lambda: f64,
    /// On-resonance reflectivity, dimensionless.
    pub r0: f64,
}

impl Resonance {
    pub fn new(lambda0: f64, delta_lambda: f64, r0: f64) -> Result<Self, CavityError> {
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(CavityError::InvalidInput(format!(
                "lambda0 must be positive, got {lambda0}"
            )));
        }
        if !(delta_lambda.is_finite() && delta_lambda > 0.0) {
            return Err(CavityError::InvalidInput(format!(
                "delta_lambda must be positive, got {delta_lambda}"
            )));
        }
        if !(0.0..=1.0).contains(&r0) {
            return Err(CavityError::InvalidInput(format!(
                "r0 must lie in [0, 1], got {r0}"
            )));
        }
        Ok(Resonance {
            lambda0,
            delta_lambda,
            r0,
        })
    }
}

/// Scattering-limited figures of merit, independent of how strongly the
/// cavity is coupled to its port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringMetrics {
    /// Scattering-limited quality factor `c / (lambda0 * kappa_sc)`.
    pub q_sc: f64,
    /// Scattering-limited finesse `c / (2 * l * kappa_sc)`.
    pub finesse_sc: f64,
    /// Fractional power lost in one cavity round trip,
    /// `1 - exp(-2 pi kappa_sc l / c)`.
    pub loss_one_pass: f64,
}

/// Loaded and scattering-limited figures of merit for one cavity mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiguresOfMerit {
    /// Total linewidth, GHz.
    pub kappa: f64,
    /// Loaded quality factor `lambda0 / delta_lambda`.
    pub q: f64,
    pub q_sc: f64,
    pub finesse_sc: f64,
    pub loss_one_pass: f64,
}

impl FiguresOfMerit {
    /// Combines a fitted resonance with an independently known scattering
    /// rate and effective cavity length (um).
    pub fn from_parts(
        resonance: &Resonance,
        kappa_sc_ghz: f64,
        cavity_length_um: f64,
    ) -> Result<Self, CavityError> {
        let (kappa, q) = linewidth_metrics(resonance.lambda0, resonance.delta_lambda)?;
        let sc = scattering_metrics(kappa_sc_ghz, resonance.lambda0, cavity_length_um)?;
        Ok(FiguresOfMerit {
            kappa,
            q,
            q_sc: sc.q_sc,
            finesse_sc: sc.finesse_sc,
            loss_one_pass: sc.loss_one_pass,
        })
    }
}

/// Complex reflection amplitude of a one-sided cavity probed `detuning_ghz`
/// away from resonance.
pub fn reflection_amplitude(
    rates: &CavityRates,
    detuning_ghz: f64,
) -> Result<Complex64, CavityError> {
    rates.validate()?;
    if !detuning_ghz.is_finite() {
        return Err(CavityError::InvalidInput(format!(
            "detuning must be finite, got {detuning_ghz}"
        )));
    }
    let half_in = 0.5 * rates.kappa_in;
    let half_loss = 0.5 * rates.loss_rate();
    let numerator = Complex64::new(half_in - half_loss, -detuning_ghz);
    let denominator = Complex64::new(half_in + half_loss, detuning_ghz);
    Ok(numerator / denominator)
}

/// On-resonance power reflectivity `|1 - 2 kappa_sc / kappa|^2` of a cavity
/// whose only non-port loss is scattering.
pub fn on_resonance_reflectivity(kappa: f64, kappa_sc: f64) -> Result<f64, CavityError> {
    check_rate_pair(kappa, kappa_sc)?;
    let amplitude = 1.0 - 2.0 * kappa_sc / kappa;
    Ok(amplitude * amplitude)
}

/// Labels a cavity over-, critically, or under-coupled by comparing
/// `kappa / 2` against `kappa_sc` with a relative tolerance band.
pub fn classify_regime(
    kappa: f64,
    kappa_sc: f64,
    tolerance: f64,
) -> Result<CouplingRegime, CavityError> {
    check_rate_pair(kappa, kappa_sc)?;
    if !(tolerance > 0.0 && tolerance < 0.5) {
        return Err(CavityError::InvalidInput(format!(
            "tolerance must lie in (0, 0.5), got {tolerance}"
        )));
    }
    Ok(label_regime(kappa, kappa_sc, tolerance))
}

/// Regime comparison without the `kappa_sc <= kappa` validity check; used
/// internally where a globally fitted scattering rate may exceed an
/// individual cavity's linewidth.
pub(crate) fn label_regime(kappa: f64, kappa_sc: f64, tolerance: f64) -> CouplingRegime {
    let half = 0.5 * kappa;
    if half > kappa_sc * (1.0 + tolerance) {
        CouplingRegime::OverCoupled
    } else if half < kappa_sc * (1.0 - tolerance) {
        CouplingRegime::UnderCoupled
    } else {
        CouplingRegime::Critical
    }
}

/// Inverts an on-resonance reflectivity to a scattering rate on the chosen
/// coupling branch: `kappa_sc = kappa (1 -+ sqrt(r0)) / 2`.
pub fn kappa_sc_from_r0(r0: f64, kappa: f64, branch: CouplingBranch) -> Result<f64, CavityError> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(CavityError::InvalidRates(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if !(0.0..=1.0).contains(&r0) {
        return Err(CavityError::InvalidInput(format!(
            "r0 must lie in [0, 1], got {r0}"
        )));
    }
    let root = r0.sqrt();
    let kappa_sc = match branch {
        CouplingBranch::OverCoupled => 0.5 * kappa * (1.0 - root),
        CouplingBranch::UnderCoupled => 0.5 * kappa * (1.0 + root),
    };
    Ok(kappa_sc)
}

/// Converts a fitted dip (center and width in nm) to a total linewidth in
/// GHz and a loaded quality factor.
pub fn linewidth_metrics(lambda0_nm: f64, delta_lambda_nm: f64) -> Result<(f64, f64), CavityError> {
    if !(lambda0_nm.is_finite() && lambda0_nm > 0.0) {
        return Err(CavityError::InvalidInput(format!(
            "lambda0 must be positive, got {lambda0_nm}"
        )));
    }
    if !(delta_lambda_nm.is_finite() && delta_lambda_nm > 0.0) {
        return Err(CavityError::InvalidInput(format!(
            "delta_lambda must be positive, got {delta_lambda_nm}"
        )));
    }
    // With c in m/s and wavelengths in nm the unit factors cancel exactly,
    // leaving the rate in GHz.
    let kappa = SPEED_OF_LIGHT * delta_lambda_nm / (lambda0_nm * lambda0_nm);
    let q = lambda0_nm / delta_lambda_nm;
    Ok((kappa, q))
}

/// Scattering-limited figures of merit for a cavity of effective length
/// `cavity_length_um` resonant at `lambda0_nm`.
pub fn scattering_metrics(
    kappa_sc_ghz: f64,
    lambda0_nm: f64,
    cavity_length_um: f64,
) -> Result<ScatteringMetrics, CavityError> {
    if !(kappa_sc_ghz.is_finite() && kappa_sc_ghz > 0.0) {
        return Err(CavityError::InvalidRates(format!(
            "kappa_sc must be positive, got {kappa_sc_ghz}"
        )));
    }
    if !(lambda0_nm.is_finite() && lambda0_nm > 0.0) {
        return Err(CavityError::InvalidInput(format!(
            "lambda0 must be positive, got {lambda0_nm}"
        )));
    }
    if !(cavity_length_um.is_finite() && cavity_length_um > 0.0) {
        return Err(CavityError::InvalidInput(format!(
            "cavity length must be positive, got {cavity_length_um}"
        )));
    }
    // nm * GHz and um * GHz leave simple powers of ten; see unit tests for
    // the hand-checked reference values.
    let q_sc = SPEED_OF_LIGHT / (lambda0_nm * kappa_sc_ghz);
    let finesse_sc = SPEED_OF_LIGHT / (2.0 * cavity_length_um * kappa_sc_ghz * 1e3);
    let exponent =
        2.0 * std::f64::consts::PI * kappa_sc_ghz * cavity_length_um * 1e3 / SPEED_OF_LIGHT;
    let loss_one_pass = 1.0 - (-exponent).exp();
    Ok(ScatteringMetrics {
        q_sc,
        finesse_sc,
        loss_one_pass,
    })
}

/// Fractions of the total linewidth carried by each channel:
/// `(kappa_in, kappa_sc, kappa_out) / kappa`.
pub fn guided_fraction(rates: &CavityRates) -> Result<(f64, f64, f64), CavityError> {
    rates.validate()?;
    let kappa = rates.kappa_in + rates.kappa_sc + rates.kappa_out;
    Ok((
        rates.kappa_in / kappa,
        rates.kappa_sc / kappa,
        rates.kappa_out / kappa,
    ))
}

fn check_rate_pair(kappa: f64, kappa_sc: f64) -> Result<(), CavityError> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(CavityError::InvalidRates(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    if !kappa_sc.is_finite() || kappa_sc < 0.0 {
        return Err(CavityError::InvalidRates(format!(
            "kappa_sc must be non-negative, got {kappa_sc}"
        )));
    }
    if kappa_sc > kappa {
        return Err(CavityError::InvalidRates(format!(
            "kappa_sc ({kappa_sc}) exceeds total kappa ({kappa})"
        )));
    }
    Ok(())
}
