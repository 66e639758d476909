//! `cblsim`: subcommand dispatch over the `cbl-core` simulator.
//!
//! Every subcommand prints a JSON summary on stdout. Commands driven by a
//! config file also write `<stem>.csv` plus a `<stem>.json` sidecar into the
//! output directory; the quick lookups write files only when
//! `--output-dir` is given.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use cbl_core::atomic::{doppler_fwhm, get_scheme, vapor_number_density, LevelScheme};
use cbl_core::config::{parse_config, RunConfig, SweepAxis};
use cbl_core::output::{Format, Report, Table};
use cbl_core::phase_match::{crossed_pumps, solve_planar, Branch, WaveVector};
use cbl_core::propagation::{
    density_curve, detuning_optimum, power_curve, propagate, Curve, PowerAxis, SecondDetuning,
};
use cbl_core::spectra::{autler_townes_splitting, scan_excitation, zeeman_pumping, PolarizationPair, ZeemanOptions};
use cbl_core::Error;

#[derive(Debug, Parser)]
#[command(name = "cblsim", version, about = "Blue light from four-wave mixing in warm Rb vapour")]
pub struct Cli {
    /// Directory for CSV/JSON output; overrides `output.dir` of the config.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Data file format.
    #[arg(long, global = true, default_value = "csv", value_parser = parse_format)]
    pub format: Format,
    /// Fixed-step deterministic propagation.
    #[arg(long, global = true)]
    pub test_mode: bool,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Temperature {
    #[arg(long, allow_negative_numbers = true)]
    pub celsius: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kelvin: Option<f64>,
}

impl Temperature {
    fn kelvin(&self) -> f64 {
        match (self.kelvin, self.celsius) {
            (Some(k), _) => k,
            (None, Some(c)) => c + 273.15,
            (None, None) => f64::NAN,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Run configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Saturated Rb number density at a cell temperature.
    VaporDensity(Temperature),
    /// Doppler FWHM of a line.
    DopplerWidth {
        #[arg(long)]
        wavelength_nm: f64,
        #[command(flatten)]
        temperature: Temperature,
        /// Atomic mass; defaults to the scheme mass.
        #[arg(long)]
        mass_amu: Option<f64>,
        #[arg(long, default_value = "rb85-blue")]
        scheme: String,
    },
    /// Wave-vector closure of the four-wave process.
    PhaseMatch {
        /// Co-propagating pumps along one axis.
        #[arg(long, conflicts_with = "crossing_mrad")]
        collinear: bool,
        /// Unit refractive indices (default).
        #[arg(long, conflicts_with = "indices")]
        vacuum: bool,
        /// Refractive indices of 780 nm, 776 nm, IR and blue fields.
        #[arg(long, value_delimiter = ',', num_args = 4)]
        indices: Option<Vec<f64>>,
        /// Full angle between the pumps.
        #[arg(long, default_value_t = 0.0)]
        crossing_mrad: f64,
        #[arg(long, default_value = "co", value_parser = parse_branch)]
        branch: Branch,
        #[arg(long, default_value = "rb85-blue")]
        scheme: String,
    },
    /// Doppler-averaged upper-level population versus a detuning.
    ScanSpectrum(ConfigArg),
    /// Autler-Townes doublet of a scan and its splitting.
    AtSplitting(ConfigArg),
    /// Zeeman optical pumping for the four polarization pairs.
    Zeeman {
        /// One pair (`sigma+sigma+`, `sigma+sigma-`, `lin-par-lin`,
        /// `lin-perp-lin`); all when absent.
        #[arg(long, value_parser = parse_pair)]
        pair: Option<PolarizationPair>,
        /// Pumping time in excited-state lifetimes.
        #[arg(long, default_value_t = 200.0)]
        duration: f64,
        #[arg(long, default_value_t = ZeemanOptions::default().saturation)]
        saturation: f64,
    },
    /// One propagation run through the cell.
    Propagate(ConfigArg),
    /// Blue output versus pump power (`scan.axis` = power, power1, power2).
    PowerCurve(ConfigArg),
    /// Blue output versus density (`scan.axis` = temperature).
    DensityCurve(ConfigArg),
    /// Blue output versus the first detuning (`scan.axis` = delta1).
    DetuningOptimum(ConfigArg),
}

fn parse_branch(s: &str) -> Result<Branch, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pair(s: &str) -> Result<PolarizationPair, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VaporDensity(_) => "vapor-density",
            Command::DopplerWidth { .. } => "doppler-width",
            Command::PhaseMatch { .. } => "phase-match",
            Command::ScanSpectrum(_) => "scan-spectrum",
            Command::AtSplitting(_) => "at-splitting",
            Command::Zeeman { .. } => "zeeman",
            Command::Propagate(_) => "propagate",
            Command::PowerCurve(_) => "power-curve",
            Command::DensityCurve(_) => "density-curve",
            Command::DetuningOptimum(_) => "detuning-optimum",
        }
    }
}

/// Result of a dispatched subcommand.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

const MHZ: f64 = TAU * 1e6;

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value, Error> {
    Ok(serde_json::to_value(x)?)
}

fn opt_mhz(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(v / MHZ))
}

/// Run one subcommand and write its files.
pub fn run(cli: &Cli) -> Result<Outcome, Error> {
    let name = cli.command.name();
    let (report, config) = match &cli.command {
        Command::VaporDensity(t) => (vapor_density(name, t)?, None),
        Command::DopplerWidth { wavelength_nm, temperature, mass_amu, scheme } => {
            (doppler_width(name, *wavelength_nm, temperature, *mass_amu, scheme)?, None)
        }
        Command::PhaseMatch { collinear, vacuum, indices, crossing_mrad, branch, scheme } => {
            let idx = match (vacuum, indices) {
                (_, Some(v)) => [v[0], v[1], v[2], v[3]],
                _ => [1.0; 4],
            };
            let theta = if *collinear { 0.0 } else { crossing_mrad * 1e-3 };
            (phase_match(name, scheme, idx, theta, *branch)?, None)
        }
        Command::Zeeman { pair, duration, saturation } => (zeeman(name, *pair, *duration, *saturation)?, None),
        Command::ScanSpectrum(c) => with_config(c, |cfg| scan_spectrum(name, cfg))?,
        Command::AtSplitting(c) => with_config(c, |cfg| at_splitting(name, cfg))?,
        Command::Propagate(c) => with_config(c, |cfg| run_propagate(name, cfg, cli.test_mode))?,
        Command::PowerCurve(c) => with_config(c, |cfg| run_power_curve(name, cfg, cli.test_mode))?,
        Command::DensityCurve(c) => with_config(c, |cfg| run_density_curve(name, cfg, cli.test_mode))?,
        Command::DetuningOptimum(c) => with_config(c, |cfg| run_detuning_optimum(name, cfg, cli.test_mode))?,
    };
    let target = match (&cli.output_dir, &config) {
        (Some(dir), cfg) => Some((dir.clone(), cfg.as_ref().and_then(|c| c.output.stem.clone()))),
        (None, Some(cfg)) => Some((cfg.output.dir.clone(), cfg.output.stem.clone())),
        (None, None) => None,
    };
    let files = match target {
        Some((dir, stem)) => report.write(&dir, stem.as_deref().unwrap_or(name), cli.format)?,
        None => Vec::new(),
    };
    Ok(Outcome { report, files })
}

fn with_config(
    arg: &ConfigArg,
    f: impl FnOnce(&RunConfig) -> Result<Report, Error>,
) -> Result<(Report, Option<RunConfig>), Error> {
    let cfg = parse_config(&arg.config)?;
    let report = f(&cfg)?;
    Ok((report, Some(cfg)))
}

fn resolved(cfg: &RunConfig, scheme: &LevelScheme) -> Result<Value, Error> {
    Ok(json!({ "run": to_value(cfg)?, "scheme": to_value(scheme)? }))
}

fn vapor_density(name: &str, t: &Temperature) -> Result<Report, Error> {
    let k = t.kelvin();
    let n = vapor_number_density(k)?;
    Ok(Report::new(name, json!({ "temperature_k": k }), json!({ "temperature_k": k, "density_cm3": n })))
}

fn doppler_width(
    name: &str,
    wavelength_nm: f64,
    t: &Temperature,
    mass: Option<f64>,
    scheme: &str,
) -> Result<Report, Error> {
    let mass = match mass {
        Some(m) => m,
        None => get_scheme(scheme)?.mass_amu,
    };
    let k = t.kelvin();
    let fwhm = doppler_fwhm(wavelength_nm, k, mass)?;
    Ok(Report::new(
        name,
        json!({ "wavelength_nm": wavelength_nm, "temperature_k": k, "mass_amu": mass }),
        json!({ "fwhm_mhz": fwhm * 1e-6 }),
    ))
}

fn phase_match(name: &str, scheme_name: &str, indices: [f64; 4], theta: f64, branch: Branch) -> Result<Report, Error> {
    let scheme = get_scheme(scheme_name)?;
    let [g, e, d, p] = scheme.diamond_indices()?;
    let id = |i: usize| scheme.levels[i].id.clone();
    let lambda = [
        scheme.transition_wavelength_nm(&id(g), &id(e))?,
        scheme.transition_wavelength_nm(&id(e), &id(d))?,
        scheme.transition_wavelength_nm(&id(p), &id(d))?,
        scheme.transition_wavelength_nm(&id(g), &id(p))?,
    ];
    let (p1, p2) = crossed_pumps(lambda[0], lambda[1], theta)?;
    let k1 = WaveVector::from_wavelength("k1", lambda[0], indices[0], p1.direction)?;
    let k2 = WaveVector::from_wavelength("k2", lambda[1], indices[1], p2.direction)?;
    let k_ir = TAU * indices[2] / (lambda[2] * 1e-9);
    let k_bl = TAU * indices[3] / (lambda[3] * 1e-9);
    let sol = solve_planar(&k1, &k2, k_ir, k_bl, branch)?;
    let r = sol.recompute_residual();
    Ok(Report::new(
        name,
        json!({ "scheme": scheme_name, "wavelengths_nm": lambda, "indices": indices,
                "crossing_mrad": theta * 1e3, "branch": branch }),
        json!({
            "residual_per_m": sol.mismatch(),
            "residual_vector_per_m": [r.x, r.y, r.z],
            "relative_residual": sol.mismatch() / k_bl,
            "angle_ir_mrad": sol.angle_ir * 1e3,
            "angle_bl_mrad": sol.angle_bl * 1e3,
            "k_ir_per_m": k_ir,
            "k_bl_per_m": k_bl,
        }),
    ))
}

fn zeeman(name: &str, pair: Option<PolarizationPair>, duration: f64, saturation: f64) -> Result<Report, Error> {
    let opts = ZeemanOptions { saturation, ..ZeemanOptions::default() };
    let pairs: Vec<PolarizationPair> = match pair {
        Some(p) => vec![p],
        None => PolarizationPair::ALL.to_vec(),
    };
    let mut table = Table::new(["pair", "two_step_weight", "stretched_fraction", "max_norm_drift"]);
    let mut summary = serde_json::Map::new();
    for (i, p) in pairs.iter().enumerate() {
        let r = zeeman_pumping(*p, duration, opts)?;
        table.push(vec![i as f64, r.two_step_weight, r.stretched_fraction, r.max_norm_drift])?;
        summary.insert(p.label().into(), to_value(&r)?);
    }
    let labels: Vec<&str> = pairs.iter().map(|p| p.label()).collect();
    Ok(Report::new(name, json!({ "duration": duration, "options": to_value(&opts)?, "pairs": labels }), Value::Object(summary))
        .with_table(table))
}

fn scan_table(scan: &cbl_core::spectra::SpectrumScan) -> Result<Table, Error> {
    let mut t = Table::new(["detuning_mhz", "population"]);
    for (x, y) in &scan.points {
        t.push(vec![x / MHZ, *y])?;
    }
    Ok(t)
}

fn scan_spectrum(name: &str, cfg: &RunConfig) -> Result<Report, Error> {
    let scheme = cfg.load_scheme()?;
    let fields = cfg.field_specs(&scheme)?;
    let (axis, range) = cfg.spectral_range()?;
    let scan = scan_excitation(&scheme, &fields, axis, range, cfg.scan_options())?;
    scan.check()?;
    let (peak_x, peak_y) = scan.maximum().unwrap_or((f64::NAN, f64::NAN));
    let summary = json!({
        "observed_level": scan.metadata.observed_level,
        "peak_detuning_mhz": peak_x / MHZ,
        "peak_population": peak_y,
        "fwhm_mhz": opt_mhz(scan.fwhm()),
    });
    Ok(Report::new(name, resolved(cfg, &scheme)?, summary).with_table(scan_table(&scan)?))
}

fn at_splitting(name: &str, cfg: &RunConfig) -> Result<Report, Error> {
    let scheme = cfg.load_scheme()?;
    let fields = cfg.field_specs(&scheme)?;
    if fields.len() < 2 {
        return Err(Error::Config("fields: at-splitting needs a probe and a coupling field".into()));
    }
    let (axis, range) = cfg.spectral_range()?;
    let scan = scan_excitation(&scheme, &fields, axis, range, cfg.scan_options())?;
    let at = autler_townes_splitting(&scan);
    let expected = fields[1].rabi.hypot(fields[1].detuning);
    let peaks: Vec<f64> = at.peaks.iter().map(|p| p / MHZ).collect();
    let summary = json!({
        "peaks_mhz": peaks,
        "splitting_mhz": opt_mhz(at.splitting),
        "expected_mhz": expected / MHZ,
        "ratio": at.splitting.map_or(Value::Null, |s| json!(s / expected)),
        "resolved": at.resolved,
    });
    Ok(Report::new(name, resolved(cfg, &scheme)?, summary).with_table(scan_table(&scan)?))
}

fn run_propagate(name: &str, cfg: &RunConfig, test_mode: bool) -> Result<Report, Error> {
    let scheme = cfg.load_scheme()?;
    let mut pc = cfg.propagation_config(&scheme, test_mode)?;
    pc.record_profiles = true;
    let r = propagate(&scheme, &pc)?;
    let mut table = Table::new(["z_m", "i1_w_m2", "i2_w_m2", "i_ir_w_m2", "i_bl_w_m2", "inversion", "coherence", "g_ir_per_m", "kappa_per_m"]);
    for p in &r.profile {
        table.push(vec![p.z, p.i1, p.i2, p.i_ir, p.i_bl, p.inversion, p.coherence, p.g_ir, p.kappa])?;
    }
    let summary = json!({
        "output_w": r.output_power,
        "seed_throughput_w": r.seed_throughput,
        "ir_power_w": r.ir_power,
        "above_threshold": r.above_threshold(),
        "ir_detuning_mhz": r.ir_detuning / MHZ,
        "blue_detuning_mhz": r.blue_detuning / MHZ,
        "steps": r.steps,
        "density_cm3": pc.cell.density(),
    });
    let config = json!({ "run": to_value(cfg)?, "resolved": to_value(&pc)?, "test_mode": test_mode });
    Ok(Report::new(name, config, summary).with_table(table))
}

fn curve_report(name: &str, cfg: &RunConfig, extra: Value, curve: &Curve, x_name: &str, xs: &[f64]) -> Result<Report, Error> {
    let mut table = Table::new([x_name, "output_w", "seed_throughput_w", "ir_power_w", "blue_detuning_mhz", "above_threshold"]);
    for (x, p) in xs.iter().zip(&curve.points) {
        table.push(vec![*x, p.output, p.seed_throughput, p.ir_power, p.blue_detuning / MHZ, f64::from(u8::from(p.above_threshold))])?;
    }
    let summary = json!({
        "threshold": curve.threshold,
        "saturation": curve.saturation,
        "slope_above": curve.slope_above,
        "x": x_name,
    });
    let config = json!({ "run": to_value(cfg)?, "resolved": extra });
    Ok(Report::new(name, config, summary).with_table(table))
}

fn run_power_curve(name: &str, cfg: &RunConfig, test_mode: bool) -> Result<Report, Error> {
    let scheme = cfg.load_scheme()?;
    let base = cfg.propagation_config(&scheme, test_mode)?;
    let axis = match cfg.scan.as_ref().map(|s| s.axis) {
        Some(SweepAxis::Power) => PowerAxis::Total,
        Some(SweepAxis::Power1) => PowerAxis::First,
        Some(SweepAxis::Power2) => PowerAxis::Second,
        _ => return Err(Error::Config("scan.axis: power-curve needs power, power1 or power2".into())),
    };
    let mw = cfg.sweep_values()?;
    let watts: Vec<f64> = mw.iter().map(|p| p * 1e-3).collect();
    let curve = power_curve(&scheme, &base, axis, &watts)?;
    let mut report = curve_report(name, cfg, to_value(&base)?, &curve, "power_mw", &mw)?;
    report.summary["threshold"] = curve.threshold.map_or(Value::Null, |t| json!(t * 1e3));
    report.summary["unit"] = json!("mW");
    Ok(report)
}

fn run_density_curve(name: &str, cfg: &RunConfig, test_mode: bool) -> Result<Report, Error> {
    let scheme = cfg.load_scheme()?;
    let base = cfg.propagation_config(&scheme, test_mode)?;
    if cfg.scan.as_ref().map(|s| s.axis) != Some(SweepAxis::Temperature) {
        return Err(Error::Config("scan.axis: density-curve needs temperature".into()));
    }
    let temps = cfg.sweep_values()?;
    let curve = density_curve(&scheme, &base, &temps)?;
    let xs: Vec<f64> = curve.points.iter().map(|p| p.x).collect();
    let mut report = curve_report(name, cfg, to_value(&base)?, &curve, "density_cm3", &xs)?;
    report.summary["unit"] = json!("cm^-3");
    report.summary["temperatures_k"] = json!(temps);
    Ok(report)
}

fn run_detuning_optimum(name: &str, cfg: &RunConfig, test_mode: bool) -> Result<Report, Error> {
    let scheme = cfg.load_scheme()?;
    let base = cfg.propagation_config(&scheme, test_mode)?;
    if cfg.scan.as_ref().map(|s| s.axis) != Some(SweepAxis::Delta1) {
        return Err(Error::Config("scan.axis: detuning-optimum needs delta1".into()));
    }
    let detunings: Vec<f64> = cfg.sweep_values()?.iter().map(|d| d * MHZ).collect();
    let second = if cfg.propagation.follow_second { SecondDetuning::Follow } else { SecondDetuning::Fixed };
    let prof = detuning_optimum(&scheme, &base, &detunings, second)?;
    let mut table = Table::new(["delta1_mhz", "output_w"]);
    for (x, y) in &prof.points {
        table.push(vec![x / MHZ, *y])?;
    }
    let summary = json!({
        "density_cm3": prof.density,
        "optimum_mhz": prof.optimum / MHZ,
        "fwhm_mhz": opt_mhz(prof.fwhm),
    });
    let config = json!({ "run": to_value(cfg)?, "resolved": to_value(&base)?, "second": to_value(&second)? });
    Ok(Report::new(name, config, summary).with_table(table))
}

/// Machine-readable error document for stderr.
pub fn error_json(command: Option<&str>, kind: &str, message: &str) -> Value {
    json!({ "error": { "command": command, "kind": kind, "message": message } })
}

/// Exit status of an error: 1 for bad input or physics limits, 2 for
/// internal failures.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_domain() {
        1
    } else {
        2
    }
}

pub fn stdout_document(outcome: &Outcome) -> Value {
    let files: Vec<String> = outcome.files.iter().map(|p| display(p)).collect();
    json!({ "command": outcome.report.command, "summary": outcome.report.summary, "files": files })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
