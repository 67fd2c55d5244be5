//! Lorentzian dip location and Levenberg-Marquardt refinement.

use super::FitError;
use crate::grating::{locate_stopband, Spectrum, DEFAULT_STOPBAND_THRESHOLD};

/// Starting point for [`fit_lorentzian_dip`], usually produced by
/// [`locate_dip`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipGuess {
    /// Dip center, nm.
    pub lambda0: f64,
    /// Full width at half depth, nm.
    pub delta_lambda: f64,
    /// Reflectivity at the dip minimum.
    pub r0: f64,
    /// Reflectivity level away from the dip.
    pub background: f64,
    /// Wavelength interval the guess was derived from; the fit never uses
    /// points outside it.
    pub window: (f64, f64),
}

/// Knobs for the least-squares refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Hard cap on accepted iteration steps.
    pub max_iterations: usize,
    /// Stop once every parameter moves by less than this relative amount.
    pub relative_step_tolerance: f64,
    /// When set, the model is averaged over a boxcar of this width before
    /// comparison, mimicking a spectrometer of finite resolution.
    pub instrument_resolution_nm: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 200,
            relative_step_tolerance: 1e-8,
            instrument_resolution_nm: None,
        }
    }
}

/// Refined dip parameters with one-sigma uncertainties.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianDipFit {
    /// Dip center, nm.
    pub lambda0: f64,
    /// Full width at half depth, nm.
    pub delta_lambda: f64,
    /// Reflectivity at the dip minimum.
    pub r0: f64,
    /// Reflectivity level away from the dip.
    pub background: f64,
    /// One-sigma uncertainty of `lambda0`, nm.
    pub lambda0_err: f64,
    /// One-sigma uncertainty of `delta_lambda`, nm.
    pub delta_lambda_err: f64,
    /// One-sigma uncertainty of `r0`.
    pub r0_err: f64,
    /// One-sigma uncertainty of `background`.
    pub background_err: f64,
    /// Root-mean-square residual of the converged model.
    pub residual_rms: f64,
    /// Whether the step tolerance was reached within the iteration cap.
    pub converged: bool,
    /// Accepted iteration steps.
    pub iterations: usize,
    /// Sum of squared residuals after each accepted step, starting with the
    /// initial guess. Strictly non-increasing by construction.
    pub objective_trace: Vec<f64>,
}

/// Reflectivity of a Lorentzian dip at one wavelength.
///
/// `background - (background - r0) * (dl/2)^2 / ((lambda - lambda0)^2 + (dl/2)^2)`
pub fn lorentzian_dip_value(
    lambda_nm: f64,
    lambda0: f64,
    delta_lambda: f64,
    r0: f64,
    background: f64,
) -> f64 {
    let half = 0.5 * delta_lambda;
    let detuning = lambda_nm - lambda0;
    background - (background - r0) * half * half / (detuning * detuning + half * half)
}

/// Model value and its four partial derivatives at one wavelength.
///
/// Parameter order: `lambda0`, `delta_lambda`, `r0`, `background`.
fn model_and_jacobian(lambda: f64, p: &[f64; 4], resolution: Option<f64>) -> (f64, [f64; 4]) {
    let [lambda0, delta_lambda, r0, background] = *p;
    let amplitude = background - r0;
    let half = 0.5 * delta_lambda;
    let u = lambda - lambda0;
    match resolution {
        None => {
            let d = u * u + half * half;
            let shape = half * half / d;
            let value = background - amplitude * shape;
            let d_lambda0 = -2.0 * amplitude * half * half * u / (d * d);
            let d_width = -amplitude * half * u * u / (d * d);
            (value, [d_lambda0, d_width, shape, 1.0 - shape])
        }
        Some(b) => {
            // Boxcar average of the Lorentzian over [u - b/2, u + b/2]:
            // g = (half/b) * (atan(a_plus) - atan(a_minus)).
            let a_plus = (u + 0.5 * b) / half;
            let a_minus = (u - 0.5 * b) / half;
            let g = half / b * (a_plus.atan() - a_minus.atan());
            let value = background - amplitude * g;
            let dg_du = (1.0 / (1.0 + a_plus * a_plus) - 1.0 / (1.0 + a_minus * a_minus)) / b;
            let dg_dhalf = (a_plus.atan() - a_minus.atan()) / b
                - (a_plus / (1.0 + a_plus * a_plus) - a_minus / (1.0 + a_minus * a_minus)) / b;
            let d_lambda0 = amplitude * dg_du;
            let d_width = -amplitude * dg_dhalf * 0.5;
            (value, [d_lambda0, d_width, g, 1.0 - g])
        }
    }
}

/// Solves `a x = rhs` for a 4x4 system by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot underflows.
#[allow(clippy::needless_range_loop)]
fn solve4(mut a: [[f64; 4]; 4], mut rhs: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot_row = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut sum = rhs[col];
        for k in col + 1..4 {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    Some(x)
}

/// Inverts a 4x4 symmetric matrix by Gauss-Jordan elimination with partial
/// pivoting. Returns `None` when the matrix is rank deficient.
#[allow(clippy::needless_range_loop)]
fn invert4(a: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut aug = [[0.0; 8]; 4];
    for i in 0..4 {
        aug[i][..4].copy_from_slice(&a[i]);
        aug[i][4 + i] = 1.0;
    }
    for col in 0..4 {
        let pivot_row = (col..4)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        if aug[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot_row);
        let pivot = aug[col][col];
        for k in 0..8 {
            aug[col][k] /= pivot;
        }
        for row in 0..4 {
            if row != col {
                let factor = aug[row][col];
                for k in 0..8 {
                    aug[row][k] -= factor * aug[col][k];
                }
            }
        }
    }
    let mut inv = [[0.0; 4]; 4];
    for i in 0..4 {
        inv[i].copy_from_slice(&aug[i][4..]);
    }
    Some(inv)
}

/// Locates the deepest dip of a spectrum and derives a fit guess from it.
///
/// When `window` is `None` the search region is the stop band shrunk by 15%
/// on each side, which keeps the band edges out of the background estimate.
/// The background itself is the median reflectivity of the window after
/// discarding the quarter of points nearest the dip.
pub fn locate_dip(spectrum: &Spectrum, window: Option<(f64, f64)>) -> Result<DipGuess, FitError> {
    if spectrum.is_empty() {
        return Err(FitError::EmptyInput("spectrum has no points".into()));
    }
    let (low, high) = match window {
        Some((low, high)) => {
            if !(low.is_finite() && high.is_finite() && low < high) {
                return Err(FitError::InvalidInput(format!(
                    "window bounds must satisfy low < high, got ({low}, {high})"
                )));
            }
            (low, high)
        }
        None => match locate_stopband(spectrum, DEFAULT_STOPBAND_THRESHOLD) {
            Ok(band) => {
                let shrink = 0.15 * band.width();
                (band.low_nm + shrink, band.high_nm - shrink)
            }
            Err(_) => (
                spectrum.wavelength_nm[0],
                spectrum.wavelength_nm[spectrum.len() - 1],
            ),
        },
    };
    let indices: Vec<usize> = (0..spectrum.len())
        .filter(|&i| (low..=high).contains(&spectrum.wavelength_nm[i]))
        .collect();
    if indices.len() < 16 {
        return Err(FitError::DegenerateWindow(format!(
            "window [{low:.3}, {high:.3}] nm holds {} points, need at least 16",
            indices.len()
        )));
    }

    let dip = *indices
        .iter()
        .min_by(|&&i, &&j| spectrum.reflectivity[i].total_cmp(&spectrum.reflectivity[j]))
        .unwrap();
    let lambda_dip = spectrum.wavelength_nm[dip];
    let r_min = spectrum.reflectivity[dip];

    let mut by_distance: Vec<usize> = indices.clone();
    by_distance.sort_by(|&i, &j| {
        (spectrum.wavelength_nm[i] - lambda_dip)
            .abs()
            .total_cmp(&(spectrum.wavelength_nm[j] - lambda_dip).abs())
    });
    let keep_from = by_distance.len() / 4;
    let mut far_values: Vec<f64> = by_distance[keep_from..]
        .iter()
        .map(|&i| spectrum.reflectivity[i])
        .collect();
    far_values.sort_by(f64::total_cmp);
    let background = far_values[far_values.len() / 2];

    if r_min > 0.95 * background {
        return Err(FitError::NoDipFound(format!(
            "minimum {r_min:.4} is within 5% of the background {background:.4}"
        )));
    }

    // Full width from the half-depth crossings on either side of the dip.
    let half_depth = 0.5 * (background + r_min);
    let pos = indices.iter().position(|&i| i == dip).unwrap();
    let left = indices[..pos]
        .iter()
        .rev()
        .find(|&&i| spectrum.reflectivity[i] >= half_depth)
        .map(|&i| spectrum.wavelength_nm[i])
        .unwrap_or(low);
    let right = indices[pos + 1..]
        .iter()
        .find(|&&i| spectrum.reflectivity[i] >= half_depth)
        .map(|&i| spectrum.wavelength_nm[i])
        .unwrap_or(high);
    let mut width = right - left;
    if width <= 0.0 {
        width = 2.0 * spectrum.grid_step();
    }

    Ok(DipGuess {
        lambda0: lambda_dip,
        delta_lambda: width,
        r0: r_min,
        background,
        window: (low, high),
    })
}

/// Refines a dip guess by damped least squares against the spectrum.
///
/// Only points within `lambda0 +/- max(5 widths, 10 grid steps)` of the
/// guess (clipped to its window) enter the fit, so neighbouring structure
/// does not pull on the tails. The damping factor grows until a step
/// reduces the objective, which makes the recorded objective trace
/// non-increasing.
#[allow(clippy::needless_range_loop)]
pub fn fit_lorentzian_dip(
    spectrum: &Spectrum,
    guess: &DipGuess,
    config: &FitConfig,
) -> Result<LorentzianDipFit, FitError> {
    if spectrum.is_empty() {
        return Err(FitError::EmptyInput("spectrum has no points".into()));
    }
    if !(guess.delta_lambda.is_finite() && guess.delta_lambda > 0.0) {
        return Err(FitError::InvalidInput(format!(
            "guess width must be positive, got {}",
            guess.delta_lambda
        )));
    }
    if config.max_iterations == 0 {
        return Err(FitError::InvalidInput(
            "max_iterations must be nonzero".into(),
        ));
    }
    if let Some(b) = config.instrument_resolution_nm {
        if !(b.is_finite() && b > 0.0) {
            return Err(FitError::InvalidInput(format!(
                "instrument resolution must be positive, got {b}"
            )));
        }
    }

    let reach = (5.0 * guess.delta_lambda).max(10.0 * spectrum.grid_step());
    let low = (guess.lambda0 - reach).max(guess.window.0);
    let high = (guess.lambda0 + reach).min(guess.window.1);
    let points: Vec<(f64, f64)> = spectrum
        .wavelength_nm
        .iter()
        .zip(&spectrum.reflectivity)
        .filter(|(&wl, _)| (low..=high).contains(&wl))
        .map(|(&wl, &r)| (wl, r))
        .collect();
    if points.len() < 8 {
        return Err(FitError::DegenerateWindow(format!(
            "fit window [{low:.3}, {high:.3}] nm holds {} points, need at least 8",
            points.len()
        )));
    }
    let n = points.len();

    let mut p = [
        guess.lambda0,
        guess.delta_lambda,
        guess.r0,
        guess.background,
    ];
    let resolution = config.instrument_resolution_nm;
    let objective = |p: &[f64; 4]| -> f64 {
        points
            .iter()
            .map(|&(wl, y)| {
                let (value, _) = model_and_jacobian(wl, p, resolution);
                (value - y) * (value - y)
            })
            .sum()
    };

    let mut sse = objective(&p);
    let mut trace = vec![sse];
    let mut damping = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        // Normal equations from the current Jacobian.
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for &(wl, y) in &points {
            let (value, jac) = model_and_jacobian(wl, &p, resolution);
            let residual = value - y;
            for a in 0..4 {
                jtr[a] += jac[a] * residual;
                for b in a..4 {
                    jtj[a][b] += jac[a] * jac[b];
                }
            }
        }
        for a in 0..4 {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }

        // Retry with stronger damping until a step actually descends.
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = jtj;
            for (k, row) in damped.iter_mut().enumerate() {
                row[k] += damping * jtj[k][k].max(1e-30);
            }
            let rhs = [-jtr[0], -jtr[1], -jtr[2], -jtr[3]];
            let Some(step) = solve4(damped, rhs) else {
                damping *= 8.0;
                continue;
            };
            let candidate = [
                p[0] + step[0],
                p[1] + step[1],
                p[2] + step[2],
                p[3] + step[3],
            ];
            if candidate[1] <= 0.0 || !candidate.iter().all(|v| v.is_finite()) {
                damping *= 8.0;
                continue;
            }
            let candidate_sse = objective(&candidate);
            if candidate_sse <= sse {
                let small_step = (0..4).all(|k| {
                    step[k].abs() <= config.relative_step_tolerance * (p[k].abs() + 1e-12)
                });
                p = candidate;
                sse = candidate_sse;
                trace.push(sse);
                damping = (damping / 8.0).max(1e-12);
                accepted = true;
                iterations += 1;
                if small_step {
                    converged = true;
                }
                break;
            }
            damping *= 8.0;
        }
        if converged || !accepted {
            break;
        }
    }

    // Covariance of the parameters from the Gauss-Newton approximation at
    // the solution, scaled by the residual variance.
    let mut jtj = [[0.0; 4]; 4];
    for &(wl, _) in &points {
        let (_, jac) = model_and_jacobian(wl, &p, resolution);
        for a in 0..4 {
            for b in a..4 {
                jtj[a][b] += jac[a] * jac[b];
            }
        }
    }
    for a in 0..4 {
        for b in 0..a {
            jtj[a][b] = jtj[b][a];
        }
    }
    let inverse = invert4(jtj)
        .ok_or_else(|| FitError::DegenerateFit("normal equations are rank deficient".into()))?;
    if n <= 4 {
        return Err(FitError::DegenerateFit(format!(
            "{n} points cannot constrain 4 parameters"
        )));
    }
    let variance = sse / (n - 4) as f64;
    let err = |k: usize| (inverse[k][k] * variance).max(0.0).sqrt();

    Ok(LorentzianDipFit {
        lambda0: p[0],
        delta_lambda: p[1],
        r0: p[2],
        background: p[3],
        lambda0_err: err(0),
        delta_lambda_err: err(1),
        r0_err: err(2),
        background_err: err(3),
        residual_rms: (sse / n as f64).sqrt(),
        converged,
        iterations,
        objective_trace: trace,
    })
}
