//! Characteristic-matrix solver for layered stacks at normal incidence.

use num_complex::Complex64;
use rayon::prelude::*;

use super::spectrum::{Spectrum, StopBand, WavelengthGrid};
use super::{build_stack, GratingDesign, GratingError, LayerStack, Polarization};

/// Fraction of the peak reflectivity used to delimit the stop band when the
/// caller has no better threshold.
pub const DEFAULT_STOPBAND_THRESHOLD: f64 = 0.5;

/// Complex reflection and transmission amplitudes of a stack at one
/// wavelength, evaluated from the incident side.
///
/// Each layer contributes the characteristic matrix
/// `[[cos d, i sin d / n], [i n sin d, cos d]]` with phase thickness
/// `d = 2 pi n t / lambda`; the amplitudes follow from the ordered product
/// over the stack and the two semi-infinite media. An empty stack reduces
/// to the Fresnel amplitudes of the bare interface.
pub fn stack_response(
    stack: &LayerStack,
    wavelength_nm: f64,
) -> Result<(Complex64, Complex64), GratingError> {
    if !(wavelength_nm.is_finite() && wavelength_nm > 0.0) {
        return Err(GratingError::InvalidInput(format!(
            "wavelength must be positive, got {wavelength_nm}"
        )));
    }
    if stack.n_incident <= 0.0 || stack.n_exit <= 0.0 {
        return Err(GratingError::SingularStack(
            "outer media must have positive index".into(),
        ));
    }

    // The stacks built here contain only a handful of distinct layer types
    // repeated hundreds of times, so cache the per-type matrices instead of
    // re-evaluating complex trigonometry for every layer.
    let mut cache: Vec<(f64, Complex64, [Complex64; 4])> = Vec::with_capacity(8);
    let mut m = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ];
    let two_pi = 2.0 * std::f64::consts::PI;
    for (i, layer) in stack.layers.iter().enumerate() {
        if !(layer.thickness.is_finite() && layer.thickness > 0.0) {
            return Err(GratingError::SingularStack(format!(
                "layer {i} has non-positive thickness {}",
                layer.thickness
            )));
        }
        let entry = cache
            .iter()
            .find(|(t, n, _)| *t == layer.thickness && *n == layer.index);
        let lm = match entry {
            Some((_, _, lm)) => *lm,
            None => {
                let delta = layer.index * two_pi * layer.thickness / wavelength_nm;
                let cos = delta.cos();
                let sin = delta.sin();
                let i_unit = Complex64::new(0.0, 1.0);
                let lm = [
                    cos,
                    i_unit * sin / layer.index,
                    i_unit * layer.index * sin,
                    cos,
                ];
                cache.push((layer.thickness, layer.index, lm));
                lm
            }
        };
        m = [
            m[0] * lm[0] + m[1] * lm[2],
            m[0] * lm[1] + m[1] * lm[3],
            m[2] * lm[0] + m[3] * lm[2],
            m[2] * lm[1] + m[3] * lm[3],
        ];
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(GratingError::NumericalOverflow { wavelength_nm });
    }

    let n0 = Complex64::new(stack.n_incident, 0.0);
    let ns = Complex64::new(stack.n_exit, 0.0);
    let b = m[0] + m[1] * ns;
    let c = m[2] + m[3] * ns;
    let denominator = n0 * b + c;
    if denominator.norm_sqr() == 0.0 {
        return Err(GratingError::SingularStack(format!(
            "zero admittance denominator at {wavelength_nm} nm"
        )));
    }
    let r = (n0 * b - c) / denominator;
    let t = 2.0 * n0 / denominator;
    Ok((r, t))
}

/// Power reflectivity and transmittance of a stack at one wavelength.
pub fn power_response(stack: &LayerStack, wavelength_nm: f64) -> Result<(f64, f64), GratingError> {
    let (r, t) = stack_response(stack, wavelength_nm)?;
    let reflectivity = r.norm_sqr();
    let transmittance = t.norm_sqr() * stack.n_exit / stack.n_incident;
    Ok((reflectivity, transmittance))
}

/// Simulates the reflection and transmission spectrum of a design at one
/// polarization and mounting position.
///
/// Grid points are independent and evaluated in parallel; the result is
/// identical to a sequential scan.
pub fn simulate_spectrum(
    design: &GratingDesign,
    polarization: Polarization,
    grid: &WavelengthGrid,
    tuning_position_um: f64,
) -> Result<Spectrum, GratingError> {
    let stack = build_stack(design, polarization, tuning_position_um)?;
    let wavelengths = grid.wavelengths();
    let responses: Result<Vec<(f64, f64)>, GratingError> = wavelengths
        .par_iter()
        .map(|&wl| power_response(&stack, wl))
        .collect();
    let responses = responses?;
    let (reflectivity, transmittance): (Vec<f64>, Vec<f64>) = responses.into_iter().unzip();
    Ok(Spectrum::new(
        wavelengths,
        reflectivity,
        Some(transmittance),
        Some(polarization),
    )?)
}

/// Finds the wavelength interval of the stop band: the widest contiguous
/// run with `R >= threshold * max(R)`, extended across narrow interior
/// notches.
///
/// A defect resonance sits by construction at the middle of the band and
/// can dip below the threshold, splitting the band into two runs. A gap is
/// treated as such a notch, and bridged, when it is narrower than half of
/// both flanking runs. Side lobes outside the band never come close: the
/// valley separating a lobe from the band is at least as wide as the lobe
/// itself, while a resonance notch is far narrower than the band halves
/// around it. Runs negligible next to the current band (under a quarter of
/// its width) are stepped over during the scan: on noisy data the threshold
/// crossing at a notch shoulder is ragged and chips off one-or-two-point
/// fragments, which must not block the comparison with the next substantial
/// run. A lobe skipped this way stays outside the band; fragments between
/// two merged runs are absorbed.
///
/// Fails with `NoBandFound` when the spectrum never reflects more than 5%,
/// i.e. when there is no grating response worth delimiting.
pub fn locate_stopband(spectrum: &Spectrum, threshold: f64) -> Result<StopBand, GratingError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(GratingError::InvalidInput(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let max = spectrum
        .reflectivity
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if max < 0.05 {
        return Err(GratingError::NoBandFound(format!(
            "peak reflectivity {max:.4} below 0.05"
        )));
    }
    let level = threshold * max;

    // Contiguous index runs at or above the level.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..spectrum.len() {
        if spectrum.reflectivity[i] >= level {
            if run_start.is_none() {
                run_start = Some(i);
            }
        } else if let Some(start) = run_start.take() {
            runs.push((start, i - 1));
        }
    }
    if let Some(start) = run_start {
        runs.push((start, spectrum.len() - 1));
    }

    let width = |&(start, end): &(usize, usize)| -> f64 {
        spectrum.wavelength_nm[end] - spectrum.wavelength_nm[start]
    };
    let band = runs
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| width(a).total_cmp(&width(b)))
        .map(|(i, _)| i)
        .expect("the peak point itself always forms a run");

    // Bridge notches, scanning outward from the widest run. Fragments are
    // stepped over; a substantial run merges only across a gap narrower
    // than half of both the current band and the run itself.
    let (mut start, mut end) = runs[band];
    let mut j = band + 1;
    while j < runs.len() {
        let candidate = runs[j];
        let current = spectrum.wavelength_nm[end] - spectrum.wavelength_nm[start];
        if width(&candidate) < 0.25 * current {
            j += 1;
            continue;
        }
        let gap = spectrum.wavelength_nm[candidate.0] - spectrum.wavelength_nm[end];
        if gap < 0.5 * current.min(width(&candidate)) {
            end = candidate.1;
            j += 1;
        } else {
            break;
        }
    }
    let mut j = band;
    while j > 0 {
        let candidate = runs[j - 1];
        let current = spectrum.wavelength_nm[end] - spectrum.wavelength_nm[start];
        if width(&candidate) < 0.25 * current {
            j -= 1;
            continue;
        }
        let gap = spectrum.wavelength_nm[start] - spectrum.wavelength_nm[candidate.1];
        if gap < 0.5 * current.min(width(&candidate)) {
            start = candidate.0;
            j -= 1;
        } else {
            break;
        }
    }

    let low = spectrum.wavelength_nm[start];
    let high = spectrum.wavelength_nm[end];
    Ok(StopBand {
        center_nm: 0.5 * (low + high),
        low_nm: low,
        high_nm: high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grating::Layer;

    fn bare_interface(n_left: f64, n_right: f64) -> LayerStack {
        LayerStack {
            layers: Vec::new(),
            n_incident: n_left,
            n_exit: n_right,
            polarization: Polarization::X,
            tuning_offset: 0.0,
        }
    }

    #[test]
    fn fresnel_amplitude_of_a_bare_interface() {
        let stack = bare_interface(1.26, 1.27);
        let (r, t) = stack_response(&stack, 640.0).unwrap();
        assert!((r.re - (-0.003_952_569)).abs() < 1e-8);
        assert!(r.im.abs() < 1e-15);
        // Energy conservation across the interface.
        let big_t = t.norm_sqr() * 1.27 / 1.26;
        assert!((r.norm_sqr() + big_t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_stack_is_transparent() {
        let mut design = GratingDesign::reference();
        design.index_contrast = 0.0;
        design.slat_loss = 0.0;
        let stack = build_stack(&design, Polarization::X, 0.0).unwrap();
        for wl in [600.0, 640.0, 685.5] {
            let (r, t) = stack_response(&stack, wl).unwrap();
            assert!(r.norm() < 1e-12, "residual reflection at {wl}");
            assert!((t.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_layer_matches_airy_formula() {
        // A quarter-wave layer of index 1.5 between media of 1.2 and 1.3.
        let n1 = 1.5;
        let wl = 600.0;
        let stack = LayerStack {
            layers: vec![Layer {
                thickness: wl / (4.0 * n1),
                index: Complex64::new(n1, 0.0),
            }],
            n_incident: 1.2,
            n_exit: 1.3,
            polarization: Polarization::X,
            tuning_offset: 0.0,
        };
        let (r, _) = stack_response(&stack, wl).unwrap();
        // Quarter-wave impedance transformation: R = ((n0 ns - n1^2)/(n0 ns + n1^2))^2.
        let expected = ((1.2 * 1.3 - n1 * n1) / (1.2 * 1.3 + n1 * n1)).powi(2);
        assert!((r.norm_sqr() - expected).abs() < 1e-12);
    }

    #[test]
    fn lossless_energy_conservation_across_the_band() {
        let mut design = GratingDesign::reference();
        design.slat_loss = 0.0;
        design.n_in_slats = 60;
        design.n_out_slats = 60;
        let grid = WavelengthGrid::new(620.0, 660.0, 401).unwrap();
        let spectrum = simulate_spectrum(&design, Polarization::X, &grid, 0.0).unwrap();
        let t = spectrum.transmittance.as_ref().unwrap();
        for ((&r, &t), &wl) in spectrum
            .reflectivity
            .iter()
            .zip(t)
            .zip(&spectrum.wavelength_nm)
        {
            assert!((r + t - 1.0).abs() < 1e-9, "energy violation at {} nm", wl);
        }
    }

    #[test]
    fn transmission_is_reciprocal_under_mirror_swap() {
        let design = GratingDesign::reference().with_n_in(40).with_n_out(90);
        let swapped = design.clone().with_n_in(90).with_n_out(40);
        for wl in [612.3, 640.0, 663.7] {
            let (_, t) =
                stack_response(&build_stack(&design, Polarization::X, 0.0).unwrap(), wl).unwrap();
            let (_, t_swapped) =
                stack_response(&build_stack(&swapped, Polarization::X, 0.0).unwrap(), wl).unwrap();
            assert!(
                (t.norm_sqr() - t_swapped.norm_sqr()).abs() <= 1e-9 * t.norm_sqr().max(1e-30),
                "reciprocity violated at {wl}"
            );
        }
    }

    #[test]
    fn zero_chirp_makes_tuning_a_no_op() {
        let design = GratingDesign::reference().with_n_in(30).with_n_out(30);
        let grid = WavelengthGrid::new(630.0, 650.0, 201).unwrap();
        let a = simulate_spectrum(&design, Polarization::X, &grid, 0.0).unwrap();
        let b = simulate_spectrum(&design, Polarization::X, &grid, 100.0).unwrap();
        assert_eq!(a.reflectivity, b.reflectivity);
        assert_eq!(a.transmittance, b.transmittance);
    }

    #[test]
    fn stopband_on_synthetic_top_hat() {
        let wavelengths: Vec<f64> = (0..201).map(|i| 600.0 + 0.5 * i as f64).collect();
        let reflectivity: Vec<f64> = wavelengths
            .iter()
            .map(|&wl| {
                if (635.0..=645.0).contains(&wl) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let spectrum = Spectrum::new(wavelengths, reflectivity, None, None).unwrap();
        let band = locate_stopband(&spectrum, 0.5).unwrap();
        assert_eq!(band.low_nm, 635.0);
        assert_eq!(band.high_nm, 645.0);
        assert_eq!(band.center_nm, 640.0);
    }

    #[test]
    fn stopband_bridges_a_central_notch_but_not_side_lobes() {
        let wavelengths: Vec<f64> = (0..401).map(|i| 630.0 + 0.05 * i as f64).collect();
        let reflectivity: Vec<f64> = wavelengths
            .iter()
            .map(|&wl| {
                if (639.85..=640.15).contains(&wl) {
                    0.05 // resonance notch in the middle of the band
                } else if (635.0..=645.0).contains(&wl) {
                    1.0
                } else if (646.5..=646.9).contains(&wl) {
                    0.6 // side lobe past a wide valley
                } else {
                    0.0
                }
            })
            .collect();
        let spectrum = Spectrum::new(wavelengths, reflectivity, None, None).unwrap();
        let band = locate_stopband(&spectrum, 0.5).unwrap();
        assert_eq!(band.low_nm, 635.0);
        assert_eq!(band.high_nm, 645.0);
        assert_eq!(band.center_nm, 640.0);
    }

    #[test]
    fn stopband_requires_a_real_band() {
        let wavelengths: Vec<f64> = (0..100).map(|i| 600.0 + 0.5 * i as f64).collect();
        let reflectivity = vec![0.01; 100];
        let spectrum = Spectrum::new(wavelengths, reflectivity, None, None).unwrap();
        assert!(matches!(
            locate_stopband(&spectrum, 0.5),
            Err(GratingError::NoBandFound(_))
        ));
        let flat = Spectrum::new(vec![600.0, 601.0], vec![0.5, 0.5], None, None).unwrap();
        assert!(locate_stopband(&flat, 1.5).is_err());
    }

    #[test]
    fn singular_layers_are_rejected() {
        let stack = LayerStack {
            layers: vec![Layer {
                thickness: 0.0,
                index: Complex64::new(1.3, 0.0),
            }],
            n_incident: 1.26,
            n_exit: 1.26,
            polarization: Polarization::X,
            tuning_offset: 0.0,
        };
        assert!(matches!(
            stack_response(&stack, 640.0),
            Err(GratingError::SingularStack(_))
        ));
        let ok = bare_interface(1.26, 1.26);
        assert!(stack_response(&ok, -5.0).is_err());
    }
}
