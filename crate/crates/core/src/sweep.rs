//! Design sweeps over slat counts and mounting positions.
//!
//! Each sweep row runs the full reduction pipeline: simulate a coarse
//! spectrum, bracket the stop band, re-simulate the band on a fine grid,
//! locate and fit the resonance dip, and convert the fitted width into a
//! linewidth and quality factor. Slat-count sweeps then pool all converged
//! rows into one scattering-rate fit and label each row's coupling regime
//! against it, mirroring how a family of fabricated cavities would be
//! analyzed together.

use rayon::prelude::*;
use thiserror::Error;

use crate::cavity::{label_regime, linewidth_metrics, CouplingRegime, Resonance};
use crate::fit::{fit_kappa_sc, fit_lorentzian_dip, locate_dip, CouplingFit, FitConfig};
use crate::grating::{
    locate_stopband, simulate_spectrum, GratingDesign, GratingError, Polarization, WavelengthGrid,
    DEFAULT_STOPBAND_THRESHOLD,
};

/// Failure modes of sweep orchestration.
#[derive(Debug, Error)]
pub enum SweepError {
    /// The slat-count range selects no rows or has a zero step.
    #[error("invalid range: {0}")]
    InvalidRange(String),

    /// A requested mounting position falls off the grating.
    #[error("tuning position {position} um outside +/-{half_length} um")]
    TuningOutOfRange { position: f64, half_length: f64 },

    /// Too few converged rows to support the requested selection.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The base design itself is invalid.
    #[error(transparent)]
    Design(#[from] GratingError),
}

/// Inclusive slat-count range with a step, mirroring how sweep extents are
/// quoted in lab notebooks (start, stop, step).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlatRange {
    pub start: usize,
    pub stop: usize,
    pub step: usize,
}

impl SlatRange {
    pub fn new(start: usize, stop: usize, step: usize) -> Result<Self, SweepError> {
        if step == 0 {
            return Err(SweepError::InvalidRange("step must be at least 1".into()));
        }
        if stop < start {
            return Err(SweepError::InvalidRange(format!(
                "stop {stop} below start {start}"
            )));
        }
        Ok(SlatRange { start, stop, step })
    }

    fn values(&self) -> Vec<usize> {
        (self.start..=self.stop).step_by(self.step).collect()
    }
}

/// Tunable knobs of the per-row pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Grid for the survey pass that brackets the stop band.
    pub coarse_grid: WavelengthGrid,
    /// Target spacing of the fine pass across the band, nm.
    pub fine_step_nm: f64,
    /// Extra span simulated on each side of the located band, nm.
    pub fine_margin_nm: f64,
    /// Relative half-width of the critical-coupling label.
    pub regime_tolerance: f64,
    /// Fraction of peak reflectivity delimiting the stop band.
    pub stopband_threshold: f64,
    /// Dip-refinement settings.
    pub fit: FitConfig,
    /// Evaluate rows concurrently. Output is identical either way.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            coarse_grid: WavelengthGrid::new(600.0, 700.0, 1001)
                .expect("default survey grid is valid"),
            fine_step_nm: 0.005,
            fine_margin_nm: 1.0,
            regime_tolerance: crate::cavity::DEFAULT_CRITICAL_TOLERANCE,
            stopband_threshold: DEFAULT_STOPBAND_THRESHOLD,
            fit: FitConfig::default(),
            parallel: true,
        }
    }
}

/// One design point of a sweep with its fitted resonance and derived rates.
///
/// A failed reduction (no band, no dip, or a diverged fit) leaves the
/// numeric fields as NaN with `fit_converged = false`; it never aborts the
/// sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Input-mirror slat count.
    pub n_in: usize,
    /// Output-mirror slat count.
    pub n_out: usize,
    pub polarization: Polarization,
    /// Mounting position along the grating, um.
    pub tuning_position: f64,
    /// Fitted dip center, nm.
    pub lambda0: f64,
    /// Fitted full width at half depth, nm.
    pub delta_lambda: f64,
    /// Fitted on-resonance reflectivity.
    pub r0: f64,
    /// Total linewidth, GHz.
    pub kappa: f64,
    /// Quality factor.
    pub q: f64,
    /// Coupling regime against the sweep's pooled scattering rate; `None`
    /// when the row failed or the sweep fits no pooled rate.
    pub regime: Option<CouplingRegime>,
    pub fit_converged: bool,
}

/// Sweep rows plus the pooled scattering-rate fit used to label them.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Pooled fit over all converged rows; `None` when nothing converged or
    /// the pooled objective was degenerate.
    pub coupling_fit: Option<CouplingFit>,
}

/// The sweep row closest to critical coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub n_in: usize,
    pub n_out: usize,
    /// Total linewidth at the selected row, GHz.
    pub kappa: f64,
    /// On-resonance reflectivity at the selected row.
    pub r0: f64,
    /// Regime label carried over from the selected row.
    pub regime: Option<CouplingRegime>,
}

fn failed_row(
    n_in: usize,
    n_out: usize,
    polarization: Polarization,
    tuning_position: f64,
) -> SweepRow {
    SweepRow {
        n_in,
        n_out,
        polarization,
        tuning_position,
        lambda0: f64::NAN,
        delta_lambda: f64::NAN,
        r0: f64::NAN,
        kappa: f64::NAN,
        q: f64::NAN,
        regime: None,
        fit_converged: false,
    }
}

/// Runs the simulate-bracket-refit pipeline for one design point.
fn reduce_design_point(
    design: &GratingDesign,
    polarization: Polarization,
    tuning_position: f64,
    config: &SweepConfig,
) -> SweepRow {
    let n_in = design.n_in_slats;
    let n_out = design.n_out_slats;
    let fail = || failed_row(n_in, n_out, polarization, tuning_position);

    let Ok(coarse) = simulate_spectrum(design, polarization, &config.coarse_grid, tuning_position)
    else {
        return fail();
    };
    let Ok(band) = locate_stopband(&coarse, config.stopband_threshold) else {
        return fail();
    };

    let low = (band.low_nm - config.fine_margin_nm).max(400.0);
    let high = (band.high_nm + config.fine_margin_nm).min(1000.0);
    let points = ((high - low) / config.fine_step_nm).round() as usize + 1;
    let Ok(fine_grid) = WavelengthGrid::new(low, high, points.max(2)) else {
        return fail();
    };
    let Ok(fine) = simulate_spectrum(design, polarization, &fine_grid, tuning_position) else {
        return fail();
    };

    let Ok(guess) = locate_dip(&fine, None) else {
        return fail();
    };
    let Ok(fit) = fit_lorentzian_dip(&fine, &guess, &config.fit) else {
        return fail();
    };
    if !fit.converged {
        return fail();
    }
    let Ok(resonance) = Resonance::new(fit.lambda0, fit.delta_lambda, fit.r0.clamp(0.0, 1.0))
    else {
        return fail();
    };
    let Ok((kappa, q)) = linewidth_metrics(resonance.lambda0, resonance.delta_lambda) else {
        return fail();
    };

    SweepRow {
        n_in,
        n_out,
        polarization,
        tuning_position,
        lambda0: resonance.lambda0,
        delta_lambda: resonance.delta_lambda,
        r0: resonance.r0,
        kappa,
        q,
        regime: None,
        fit_converged: true,
    }
}

fn reduce_many(
    designs: Vec<(GratingDesign, f64)>,
    polarization: Polarization,
    config: &SweepConfig,
) -> Vec<SweepRow> {
    if config.parallel {
        designs
            .par_iter()
            .map(|(design, tuning)| reduce_design_point(design, polarization, *tuning, config))
            .collect()
    } else {
        designs
            .iter()
            .map(|(design, tuning)| reduce_design_point(design, polarization, *tuning, config))
            .collect()
    }
}

/// Pools converged rows into one scattering-rate fit and labels each
/// converged row's regime against it.
fn attach_regimes(rows: &mut [SweepRow], config: &SweepConfig) -> Option<CouplingFit> {
    let observations: Vec<(f64, f64)> = rows
        .iter()
        .filter(|row| row.fit_converged)
        .map(|row| (row.kappa, row.r0))
        .collect();
    if observations.is_empty() {
        return None;
    }
    let fit = fit_kappa_sc(&observations, None).ok()?;
    for row in rows.iter_mut() {
        if row.fit_converged {
            row.regime = Some(label_regime(
                row.kappa,
                fit.kappa_sc,
                config.regime_tolerance,
            ));
        }
    }
    Some(fit)
}

/// Sweeps the input-mirror slat count with everything else held fixed.
///
/// Rows are emitted in range order and each carries the regime label
/// derived from the sweep's own pooled scattering-rate fit.
pub fn sweep_input_slats(
    design: &GratingDesign,
    n_in_range: SlatRange,
    polarization: Polarization,
) -> Result<SweepOutcome, SweepError> {
    sweep_input_slats_with(design, n_in_range, polarization, &SweepConfig::default())
}

/// [`sweep_input_slats`] with explicit pipeline settings.
pub fn sweep_input_slats_with(
    design: &GratingDesign,
    n_in_range: SlatRange,
    polarization: Polarization,
    config: &SweepConfig,
) -> Result<SweepOutcome, SweepError> {
    design.validate()?;
    let designs: Vec<(GratingDesign, f64)> = n_in_range
        .values()
        .into_iter()
        .map(|n| (design.clone().with_n_in(n), 0.0))
        .collect();
    if designs.is_empty() {
        return Err(SweepError::InvalidRange("range selects no rows".into()));
    }
    let mut rows = reduce_many(designs, polarization, config);
    let coupling_fit = attach_regimes(&mut rows, config);
    Ok(SweepOutcome { rows, coupling_fit })
}

/// Sweeps the output-mirror slat count with everything else held fixed.
pub fn sweep_output_slats(
    design: &GratingDesign,
    n_out_range: SlatRange,
    polarization: Polarization,
) -> Result<SweepOutcome, SweepError> {
    sweep_output_slats_with(design, n_out_range, polarization, &SweepConfig::default())
}

/// [`sweep_output_slats`] with explicit pipeline settings.
pub fn sweep_output_slats_with(
    design: &GratingDesign,
    n_out_range: SlatRange,
    polarization: Polarization,
    config: &SweepConfig,
) -> Result<SweepOutcome, SweepError> {
    design.validate()?;
    let designs: Vec<(GratingDesign, f64)> = n_out_range
        .values()
        .into_iter()
        .map(|n| (design.clone().with_n_out(n), 0.0))
        .collect();
    if designs.is_empty() {
        return Err(SweepError::InvalidRange("range selects no rows".into()));
    }
    let mut rows = reduce_many(designs, polarization, config);
    let coupling_fit = attach_regimes(&mut rows, config);
    Ok(SweepOutcome { rows, coupling_fit })
}

/// Evaluates the cavity at several mounting positions along the grating.
///
/// Rows keep `regime = None`: positions share one mirror pair, so a pooled
/// coupling fit across them would compare a cavity against itself.
pub fn tuning_scan(
    design: &GratingDesign,
    positions: &[f64],
    polarization: Polarization,
) -> Result<SweepOutcome, SweepError> {
    tuning_scan_with(design, positions, polarization, &SweepConfig::default())
}

/// [`tuning_scan`] with explicit pipeline settings.
pub fn tuning_scan_with(
    design: &GratingDesign,
    positions: &[f64],
    polarization: Polarization,
    config: &SweepConfig,
) -> Result<SweepOutcome, SweepError> {
    design.validate()?;
    if positions.is_empty() {
        return Err(SweepError::InvalidRange("no tuning positions given".into()));
    }
    let half_length = 0.5 * design.grating_length;
    for &position in positions {
        if !(position.is_finite() && position.abs() <= half_length) {
            return Err(SweepError::TuningOutOfRange {
                position,
                half_length,
            });
        }
    }
    let designs: Vec<(GratingDesign, f64)> = positions
        .iter()
        .map(|&position| (design.clone(), position))
        .collect();
    let rows = reduce_many(designs, polarization, config);
    Ok(SweepOutcome {
        rows,
        coupling_fit: None,
    })
}

/// Picks the converged row whose on-resonance reflectivity is smallest,
/// i.e. the design point closest to critical coupling. Ties resolve toward
/// the larger input slat count, whose linewidth is narrower.
pub fn find_critical_coupling(rows: &[SweepRow]) -> Result<CriticalPoint, SweepError> {
    let converged: Vec<&SweepRow> = rows.iter().filter(|row| row.fit_converged).collect();
    if converged.len() < 3 {
        return Err(SweepError::InsufficientData(format!(
            "{} converged rows, need at least 3 to bracket a minimum",
            converged.len()
        )));
    }
    let mut best = converged[0];
    for row in &converged[1..] {
        if row.r0 < best.r0 || (row.r0 == best.r0 && row.n_in > best.n_in) {
            best = row;
        }
    }
    Ok(CriticalPoint {
        n_in: best.n_in,
        n_out: best.n_out,
        kappa: best.kappa,
        r0: best.r0,
        regime: best.regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cavity::on_resonance_reflectivity;

    fn synthetic_row(n_in: usize, kappa: f64, r0: f64) -> SweepRow {
        SweepRow {
            n_in,
            n_out: 270,
            polarization: Polarization::X,
            tuning_position: 0.0,
            lambda0: 640.0,
            delta_lambda: kappa * 640.0 * 640.0 / 2.998e17 * 1e9,
            r0,
            kappa,
            q: 640.0 / 0.5,
            regime: Some(CouplingRegime::OverCoupled),
            fit_converged: true,
        }
    }

    #[test]
    fn slat_range_enumerates_inclusively() {
        let range = SlatRange::new(70, 240, 10).unwrap();
        let values = range.values();
        assert_eq!(values.first(), Some(&70));
        assert_eq!(values.last(), Some(&240));
        assert_eq!(values.len(), 18);
        // A step larger than the span still yields the start point.
        let wide = SlatRange::new(100, 120, 50).unwrap();
        assert_eq!(wide.values(), vec![100]);
        assert!(SlatRange::new(100, 120, 0).is_err());
        assert!(SlatRange::new(120, 100, 10).is_err());
    }

    #[test]
    fn critical_point_tracks_the_generator() {
        // Rows generated from the reflectivity law with kappa_sc = 120 GHz:
        // the minimum must land on the row with kappa nearest 240 GHz.
        let kappas = [400.0, 340.0, 290.0, 250.0, 235.0, 200.0, 160.0, 130.0];
        let rows: Vec<SweepRow> = kappas
            .iter()
            .enumerate()
            .map(|(i, &kappa)| {
                let r0 = on_resonance_reflectivity(kappa, 120.0).unwrap();
                synthetic_row(70 + 10 * i, kappa, r0)
            })
            .collect();
        let point = find_critical_coupling(&rows).unwrap();
        assert_eq!(point.kappa, 235.0);
    }

    #[test]
    fn critical_point_ties_break_toward_narrow_linewidth() {
        let rows = vec![
            synthetic_row(100, 300.0, 0.2),
            synthetic_row(110, 250.0, 0.05),
            synthetic_row(120, 200.0, 0.05),
            synthetic_row(130, 150.0, 0.3),
        ];
        let point = find_critical_coupling(&rows).unwrap();
        assert_eq!(point.n_in, 120);
    }

    #[test]
    fn monotone_rows_select_the_endpoint() {
        let rows: Vec<SweepRow> = (0..6)
            .map(|i| synthetic_row(70 + 10 * i, 500.0 - 50.0 * i as f64, 0.8 - 0.1 * i as f64))
            .collect();
        let point = find_critical_coupling(&rows).unwrap();
        assert_eq!(point.n_in, 120);
        assert_eq!(point.regime, Some(CouplingRegime::OverCoupled));
    }

    #[test]
    fn too_few_converged_rows_is_an_error() {
        let mut rows = vec![
            synthetic_row(100, 300.0, 0.2),
            synthetic_row(110, 250.0, 0.1),
            synthetic_row(120, 200.0, 0.05),
        ];
        rows[1].fit_converged = false;
        assert!(matches!(
            find_critical_coupling(&rows),
            Err(SweepError::InsufficientData(_))
        ));
    }

    #[test]
    fn tuning_positions_are_checked_up_front() {
        let design = GratingDesign::reference();
        let half = 0.5 * design.grating_length;
        let result = tuning_scan(&design, &[0.0, half + 1.0], Polarization::X);
        assert!(matches!(result, Err(SweepError::TuningOutOfRange { .. })));
        assert!(tuning_scan(&design, &[], Polarization::X).is_err());
    }
}
