//! Pooled estimate of the scattering rate shared by a cavity family.

use super::FitError;
use crate::cavity::{label_regime, CouplingRegime, DEFAULT_CRITICAL_TOLERANCE};

/// One cavity's contribution to a pooled scattering-rate fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPoint {
    /// Total linewidth of this cavity, GHz.
    pub kappa: f64,
    /// Measured on-resonance reflectivity.
    pub r0_observed: f64,
    /// Reflectivity the fitted scattering rate predicts for this linewidth.
    pub r0_predicted: f64,
    /// Coupling regime relative to the fitted scattering rate.
    pub regime: CouplingRegime,
}

/// Result of [`fit_kappa_sc`].
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFit {
    /// Scattering rate shared by the supplied cavities, GHz.
    pub kappa_sc: f64,
    /// One-sigma uncertainty of `kappa_sc` from the objective curvature, GHz.
    pub kappa_sc_err: f64,
    /// Per-cavity observations annotated with the fitted prediction.
    pub points: Vec<CouplingPoint>,
    /// Weighted root-mean-square reflectivity residual.
    pub residual_rms: f64,
}

fn predicted_r0(kappa: f64, kappa_sc: f64) -> f64 {
    let amplitude = 1.0 - 2.0 * kappa_sc / kappa;
    amplitude * amplitude
}

fn objective(points: &[(f64, f64)], weights: &[f64], kappa_sc: f64) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(&(kappa, r0), &w)| {
            let residual = r0 - predicted_r0(kappa, kappa_sc);
            w * residual * residual
        })
        .sum()
}

/// Fits one scattering rate to several `(kappa, r0)` observations.
///
/// Cavities that share their loss mechanism differ only in mirror
/// transmission, so their on-resonance reflectivities must all satisfy
/// `r0 = (1 - 2 kappa_sc / kappa)^2` with a common `kappa_sc`. The fit
/// minimizes the weighted squared reflectivity residuals over
/// `kappa_sc in (0, min kappa]`; unit weights apply when `weights` is
/// `None`. The objective is quartic in `kappa_sc` and can have two local
/// minima (one per coupling branch), so the search scans a log-spaced grid
/// before refining the best cell by golden section.
pub fn fit_kappa_sc(
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
) -> Result<CouplingFit, FitError> {
    if points.is_empty() {
        return Err(FitError::EmptyInput("no coupling points".into()));
    }
    for &(kappa, r0) in points {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(FitError::InvalidInput(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        if !(0.0..=1.0).contains(&r0) {
            return Err(FitError::InvalidInput(format!(
                "r0 must lie in [0, 1], got {r0}"
            )));
        }
    }
    let weights: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != points.len() {
                return Err(FitError::InvalidInput(format!(
                    "{} weights for {} points",
                    w.len(),
                    points.len()
                )));
            }
            if w.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
                return Err(FitError::InvalidInput(
                    "weights must be finite and non-negative".into(),
                ));
            }
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(FitError::InvalidInput("weights sum to zero".into()));
            }
            w.to_vec()
        }
        None => vec![1.0; points.len()],
    };

    if points.iter().all(|&(_, r0)| r0 == 1.0) {
        return Err(FitError::DegenerateFit(
            "all reflectivities are unity; the objective is flat toward kappa_sc = 0".into(),
        ));
    }

    // Dense log-spaced scan over the admissible interval. The objective is
    // quartic per point, so it can hold one local minimum per coupling
    // branch; every grid-local minimum is refined and ties resolve toward
    // the smaller rate (the over-coupled branch).
    let kappa_top = points.iter().map(|&(k, _)| k).fold(0.0, f64::max);
    let grid_points = 2000;
    let log_min = (kappa_top * 1e-6).ln();
    let log_max = kappa_top.ln();
    let grid_kappa = |i: usize| -> f64 {
        (log_min + (log_max - log_min) * i as f64 / (grid_points - 1) as f64).exp()
    };
    let values: Vec<f64> = (0..grid_points)
        .map(|i| objective(points, &weights, grid_kappa(i)))
        .collect();

    let refine = |mut low: f64, mut high: f64| -> f64 {
        let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
        let mut a = high - inv_phi * (high - low);
        let mut b = low + inv_phi * (high - low);
        let mut fa = objective(points, &weights, a);
        let mut fb = objective(points, &weights, b);
        while high - low > 1e-6 {
            if fa < fb {
                high = b;
                b = a;
                fb = fa;
                a = high - inv_phi * (high - low);
                fa = objective(points, &weights, a);
            } else {
                low = a;
                a = b;
                fa = fb;
                b = low + inv_phi * (high - low);
                fb = objective(points, &weights, b);
            }
        }
        0.5 * (low + high)
    };

    // Minima whose objectives agree to within noise count as the same
    // depth; the threshold is relative to the worst possible objective
    // (every squared residual at most 1), so exact twin roots always tie.
    let weight_sum: f64 = weights.iter().sum();
    let tie_threshold = 1e-9 * weight_sum;
    let mut kappa_sc = f64::NAN;
    let mut sse = f64::INFINITY;
    for i in 0..grid_points {
        let left = if i == 0 { f64::INFINITY } else { values[i - 1] };
        let right = if i + 1 == grid_points {
            f64::INFINITY
        } else {
            values[i + 1]
        };
        if values[i] > left || values[i] > right {
            continue;
        }
        let candidate = refine(
            grid_kappa(i.saturating_sub(1)),
            grid_kappa((i + 1).min(grid_points - 1)),
        );
        let value = objective(points, &weights, candidate);
        // Candidates arrive in ascending order, so on a tie the earlier
        // (smaller, over-coupled) rate stays.
        if kappa_sc.is_nan() || value < sse - tie_threshold {
            sse = value;
            kappa_sc = candidate;
        }
    }

    // Curvature of the objective at the minimum gives the uncertainty:
    // sigma^2 = 2 s^2 / S'' with s^2 the residual variance.
    let mut curvature = 0.0;
    for (&(kappa, r0), &w) in points.iter().zip(&weights) {
        let p = predicted_r0(kappa, kappa_sc);
        let dp = -4.0 * (1.0 - 2.0 * kappa_sc / kappa) / kappa;
        let ddp = 8.0 / (kappa * kappa);
        curvature += 2.0 * w * (dp * dp - (r0 - p) * ddp);
    }
    let dof = points.len().saturating_sub(1).max(1);
    let variance = sse / dof as f64;
    let kappa_sc_err = if curvature > 0.0 {
        (2.0 * variance / curvature).sqrt()
    } else {
        f64::NAN
    };

    let annotated: Vec<CouplingPoint> = points
        .iter()
        .map(|&(kappa, r0)| CouplingPoint {
            kappa,
            r0_observed: r0,
            r0_predicted: predicted_r0(kappa, kappa_sc),
            regime: label_regime(kappa, kappa_sc, DEFAULT_CRITICAL_TOLERANCE),
        })
        .collect();

    Ok(CouplingFit {
        kappa_sc,
        kappa_sc_err,
        points: annotated,
        residual_rms: (sse / weight_sum).sqrt(),
    })
}
