//! `fibercav`: command-line front end for the cavity toolkit.
//!
//! Subcommands mirror the library workflow: `simulate` produces reflection
//! spectra, `fit` reduces one spectrum to dip parameters, `coupling` pools
//! several cavities into a shared scattering rate, `sweep` and `tune` batch
//! the forward model over mirror sizes or mounting positions, and `report`
//! turns a scattering rate plus geometry into figures of merit.
//!
//! All file formats are plain CSV or JSON. Runs are deterministic: the same
//! arguments and input files produce byte-identical output files, provided
//! report timestamps are suppressed with `--no-timestamp`. Input problems
//! exit with status 2 and a diagnostic naming the file and line.

mod design_file;
mod report;
mod spectrum_io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fibercav::cavity::{linewidth_metrics, scattering_metrics, CavityError};
use fibercav::fit::{fit_kappa_sc, fit_lorentzian_dip, locate_dip, FitConfig, FitError};
use fibercav::grating::{
    simulate_spectrum, GratingDesign, GratingError, Polarization, SpectrumError, WavelengthGrid,
};
use fibercav::sweep::{
    find_critical_coupling, sweep_input_slats, sweep_output_slats, tuning_scan, SlatRange,
    SweepError,
};
use thiserror::Error;

use design_file::DesignFileError;
use report::{CouplingReport, DipReport, MetricsReport, Provenance, Quantity};
use spectrum_io::{describe_coupling, sig6, TableError};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Design(#[from] DesignFileError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error(transparent)]
    Grating(#[from] GratingError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Cavity(#[from] CavityError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser)]
#[command(
    name = "fibercav",
    version,
    about = "Design and analysis of one-sided slat-grating cavities on optical nanofibers"
)]
struct Cli {
    /// Omit timestamps from report provenance so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a reflection spectrum for a design.
    Simulate(SimulateArgs),
    /// Locate and fit the resonance dip in a spectrum CSV.
    Fit(FitArgs),
    /// Fit a shared scattering rate to linewidth/reflectivity points.
    Coupling(CouplingArgs),
    /// Sweep one mirror's slat count and fit every resulting spectrum.
    Sweep(SweepArgs),
    /// Scan mounting positions along the grating.
    Tune(TuneArgs),
    /// Compute figures of merit from a scattering rate and geometry.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Design file; the calibrated reference design when omitted.
    #[arg(long, value_name = "FILE")]
    design: Option<PathBuf>,
    /// Guided polarization, x or y.
    #[arg(long, default_value = "x", value_parser = parse_polarization)]
    pol: Polarization,
    /// Lower edge of the wavelength grid, nm.
    #[arg(long, default_value_t = 600.0)]
    min: f64,
    /// Upper edge of the wavelength grid, nm.
    #[arg(long, default_value_t = 700.0)]
    max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 4001)]
    points: usize,
    /// Mounting position along the grating, um.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    position: f64,
    /// Output spectrum CSV.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Input spectrum CSV (wavelength_nm,reflectivity[,transmittance]).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Restrict the dip search to LOW:HIGH nm.
    #[arg(long, value_name = "LOW:HIGH", value_parser = parse_window)]
    window: Option<(f64, f64)>,
    /// Average the model over a boxcar of this width (nm) to mimic a
    /// spectrometer of finite resolution.
    #[arg(long, value_name = "NM")]
    resolution_nm: Option<f64>,
    /// Output fit report JSON.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct CouplingArgs {
    /// Input CSV of cavities (kappa_ghz,r0[,weight]).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Output coupling report JSON.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Input,
    Output,
}

#[derive(Args)]
struct SweepArgs {
    /// Design file; the calibrated reference design when omitted.
    #[arg(long, value_name = "FILE")]
    design: Option<PathBuf>,
    /// Which mirror to sweep.
    #[arg(long, value_enum, default_value_t = Axis::Input)]
    axis: Axis,
    /// First slat count.
    #[arg(long)]
    start: usize,
    /// Last slat count (inclusive when on the step lattice).
    #[arg(long)]
    stop: usize,
    /// Slat-count increment.
    #[arg(long, default_value_t = 10)]
    step: usize,
    /// Guided polarization, x or y.
    #[arg(long, default_value = "x", value_parser = parse_polarization)]
    pol: Polarization,
    /// Output row-table CSV.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    /// Design file; the calibrated reference design when omitted.
    #[arg(long, value_name = "FILE")]
    design: Option<PathBuf>,
    /// First mounting position, um.
    #[arg(long, allow_negative_numbers = true)]
    start: f64,
    /// Last mounting position, um.
    #[arg(long, allow_negative_numbers = true)]
    stop: f64,
    /// Number of evenly spaced positions.
    #[arg(long, default_value_t = 11)]
    count: usize,
    /// Guided polarization, x or y.
    #[arg(long, default_value = "x", value_parser = parse_polarization)]
    pol: Polarization,
    /// Output row-table CSV.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Scattering rate shared by the cavity family, GHz.
    #[arg(long)]
    kappa_sc: f64,
    /// Resonance wavelength, nm. Alternative to --fit.
    #[arg(long)]
    lambda0: Option<f64>,
    /// Fitted full width at half depth, nm. Optional with --lambda0.
    #[arg(long)]
    delta_lambda: Option<f64>,
    /// Fit report JSON from `fibercav fit` to take the resonance from.
    #[arg(long, value_name = "FILE")]
    fit: Option<PathBuf>,
    /// Effective cavity length, um.
    #[arg(long)]
    length: f64,
    /// Output report JSON.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn parse_polarization(text: &str) -> Result<Polarization, String> {
    text.parse()
}

fn parse_window(text: &str) -> Result<(f64, f64), String> {
    let (low, high) = text
        .split_once(':')
        .ok_or_else(|| format!("expected LOW:HIGH, got '{text}'"))?;
    let low: f64 = low
        .trim()
        .parse()
        .map_err(|_| format!("invalid window edge '{low}'"))?;
    let high: f64 = high
        .trim()
        .parse()
        .map_err(|_| format!("invalid window edge '{high}'"))?;
    if !(low.is_finite() && high.is_finite() && low < high) {
        return Err(format!("window must satisfy LOW < HIGH, got {low}:{high}"));
    }
    Ok((low, high))
}

fn load_design_or_reference(path: &Option<PathBuf>) -> Result<GratingDesign, CliError> {
    match path {
        Some(path) => Ok(design_file::load_design(path)?),
        None => Ok(GratingDesign::reference()),
    }
}

fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error}");
        std::process::exit(2);
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let timestamp = !cli.no_timestamp;
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Fit(args) => fit(args, timestamp),
        Command::Coupling(args) => coupling(args, timestamp),
        Command::Sweep(args) => sweep(args),
        Command::Tune(args) => tune(args),
        Command::Report(args) => metrics_report(args, timestamp),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let design = load_design_or_reference(&args.design)?;
    let grid = WavelengthGrid::new(args.min, args.max, args.points)?;
    let spectrum = simulate_spectrum(&design, args.pol, &grid, args.position)?;
    spectrum_io::write_spectrum(&args.out, &spectrum)?;
    println!(
        "wrote {}: {} points, {} polarization, [{}, {}] nm",
        args.out.display(),
        spectrum.len(),
        args.pol,
        sig6(args.min),
        sig6(args.max),
    );
    Ok(())
}

fn fit(args: FitArgs, timestamp: bool) -> Result<(), CliError> {
    let (spectrum, clipped) = spectrum_io::load_spectrum(&args.input)?;
    if clipped > 0 {
        eprintln!("warning: clipped {clipped} power value(s) above 1 down to 1");
    }
    let guess = locate_dip(&spectrum, args.window)?;
    let config = FitConfig {
        instrument_resolution_nm: args.resolution_nm,
        ..FitConfig::default()
    };
    let fit = fit_lorentzian_dip(&spectrum, &guess, &config)?;
    if !fit.converged {
        eprintln!(
            "warning: fit stopped at the {} iteration cap before reaching tolerance",
            fit.iterations
        );
    }
    let (kappa, q) = linewidth_metrics(fit.lambda0, fit.delta_lambda)?;
    let provenance = Provenance::new(vec![args.input.display().to_string()], timestamp);
    report::write_json(&args.out, &DipReport::new(&fit, kappa, q, provenance))?;
    println!(
        "dip at {} nm, width {} nm, r0 {}, kappa {} GHz, q {}",
        sig6(fit.lambda0),
        sig6(fit.delta_lambda),
        sig6(fit.r0),
        sig6(kappa),
        sig6(q),
    );
    Ok(())
}

fn coupling(args: CouplingArgs, timestamp: bool) -> Result<(), CliError> {
    let (points, weights) = spectrum_io::load_coupling_points(&args.input)?;
    let fit = fit_kappa_sc(&points, weights.as_deref())?;
    let provenance = Provenance::new(vec![args.input.display().to_string()], timestamp);
    report::write_json(&args.out, &CouplingReport::new(&fit, provenance))?;
    println!("{}", describe_coupling(&fit));
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let design = load_design_or_reference(&args.design)?;
    let range = SlatRange::new(args.start, args.stop, args.step)?;
    let outcome = match args.axis {
        Axis::Input => sweep_input_slats(&design, range, args.pol)?,
        Axis::Output => sweep_output_slats(&design, range, args.pol)?,
    };
    spectrum_io::write_sweep_rows(&args.out, &outcome.rows)?;
    println!("wrote {}: {} rows", args.out.display(), outcome.rows.len());
    if let Some(fit) = &outcome.coupling_fit {
        println!("pooled {}", describe_coupling(fit));
    }
    if let Ok(critical) = find_critical_coupling(&outcome.rows) {
        println!(
            "closest to critical coupling: n_in {}, n_out {} (kappa {} GHz, r0 {})",
            critical.n_in,
            critical.n_out,
            sig6(critical.kappa),
            sig6(critical.r0),
        );
    }
    Ok(())
}

fn tune(args: TuneArgs) -> Result<(), CliError> {
    if args.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".to_string()));
    }
    let design = load_design_or_reference(&args.design)?;
    let positions = linspace(args.start, args.stop, args.count);
    let outcome = tuning_scan(&design, &positions, args.pol)?;
    spectrum_io::write_sweep_rows(&args.out, &outcome.rows)?;
    println!(
        "wrote {}: {} positions from {} to {} um",
        args.out.display(),
        outcome.rows.len(),
        sig6(args.start),
        sig6(args.stop),
    );
    Ok(())
}

fn metrics_report(args: ReportArgs, timestamp: bool) -> Result<(), CliError> {
    let (lambda0, delta_lambda) = match (&args.fit, args.lambda0) {
        (Some(path), None) => {
            if args.delta_lambda.is_some() {
                return Err(CliError::Usage(
                    "--delta-lambda conflicts with --fit, which already carries a width"
                        .to_string(),
                ));
            }
            let (lambda0, delta_lambda) = report::read_fit_resonance(path)?;
            (lambda0, Some(delta_lambda))
        }
        (None, Some(lambda0)) => (lambda0, args.delta_lambda),
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "pass either --fit or --lambda0, not both".to_string(),
            ))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "pass --lambda0 (optionally with --delta-lambda) or --fit".to_string(),
            ))
        }
    };

    let sc = scattering_metrics(args.kappa_sc, lambda0, args.length)?;
    let loaded = delta_lambda
        .map(|dl| linewidth_metrics(lambda0, dl))
        .transpose()?;
    let inputs = args.fit.iter().map(|p| p.display().to_string()).collect();
    let report_body = MetricsReport {
        lambda0: Quantity::new(lambda0, "nm"),
        kappa_sc: Quantity::new(args.kappa_sc, "GHz"),
        cavity_length: Quantity::new(args.length, "um"),
        q_sc: Quantity::new(sc.q_sc, "dimensionless"),
        finesse_sc: Quantity::new(sc.finesse_sc, "dimensionless"),
        loss_one_pass: Quantity::new(sc.loss_one_pass, "dimensionless"),
        delta_lambda: delta_lambda.map(|dl| Quantity::new(dl, "nm")),
        kappa: loaded.map(|(kappa, _)| Quantity::new(kappa, "GHz")),
        q: loaded.map(|(_, q)| Quantity::new(q, "dimensionless")),
        provenance: Provenance::new(inputs, timestamp),
    };
    report::write_json(&args.out, &report_body)?;
    println!(
        "q_sc {}, finesse_sc {}, one-pass loss {}",
        sig6(sc.q_sc),
        sig6(sc.finesse_sc),
        sig6(sc.loss_one_pass),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_covers_both_ends() {
        let positions = linspace(-250.0, 250.0, 5);
        assert_eq!(positions, vec![-250.0, -125.0, 0.0, 125.0, 250.0]);
        assert_eq!(linspace(3.0, 9.0, 1), vec![3.0]);
    }

    #[test]
    fn window_strings_parse_or_reject() {
        assert_eq!(parse_window("637:643").unwrap(), (637.0, 643.0));
        assert!(parse_window("643:637").is_err());
        assert!(parse_window("637-643").is_err());
    }
}
