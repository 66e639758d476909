//! Run configuration: a TOML document in laboratory units (MHz, mW, cm,
//! cm^-3, K or degrees C) converted to SI at the boundary.
//!
//! ```toml
//! scheme = "rb85-blue"
//!
//! [cell]
//! temperature_c = 60.3
//! length_cm = 5.0
//!
//! [[fields]]
//! lower = "5S1/2"
//! upper = "5P3/2"
//! power_mw = 0.17
//!
//! [[fields]]
//! lower = "5P3/2"
//! upper = "5D5/2"
//! power_mw = 0.65
//! ```

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atomic::{get_scheme, CellConditions, LevelScheme};
use crate::error::{Error, Result};
use crate::liouville::{FieldSpec, ModelOptions, Polarization};
use crate::ode::Tolerance;
use crate::propagation::{rabi_from_intensity, Integrator, MediumOptions, PropagationConfig};
use crate::spectra::{PumpingModel, ScanAxis, ScanOptions, ScanRange, VelocityModel};

const CELSIUS_OFFSET: f64 = 273.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Name of a bundled scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    /// Path of a scheme TOML file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme_file: Option<PathBuf>,
    pub cell: CellSection,
    #[serde(default)]
    pub fields: Vec<FieldSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub propagation: PropagationSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_c: Option<f64>,
    #[serde(default = "default_length_cm")]
    pub length_cm: f64,
    /// Overrides the vapour-pressure density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_cm3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub lower: String,
    pub upper: String,
    /// Defaults to the drive wavelength of the scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_w_cm2: Option<f64>,
    /// Rabi frequency over 2 pi.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_mhz: Option<f64>,
    /// Beam radius.
    #[serde(default = "default_waist_um")]
    pub waist_um: f64,
    #[serde(default)]
    pub detuning_mhz: f64,
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "delta1")]
    Delta1,
    #[serde(rename = "delta2")]
    Delta2,
    #[serde(rename = "sum")]
    Sum,
    /// Total power, split equally between the pumps.
    #[serde(rename = "power")]
    Power,
    #[serde(rename = "power1")]
    Power1,
    #[serde(rename = "power2")]
    Power2,
    #[serde(rename = "temperature")]
    Temperature,
}

impl SweepAxis {
    pub fn unit(self) -> &'static str {
        match self {
            SweepAxis::Delta1 | SweepAxis::Delta2 | SweepAxis::Sum => "MHz",
            SweepAxis::Power | SweepAxis::Power1 | SweepAxis::Power2 => "mW",
            SweepAxis::Temperature => "K",
        }
    }

    pub fn spectral(self) -> Option<ScanAxis> {
        match self {
            SweepAxis::Delta1 => Some(ScanAxis::Delta1),
            SweepAxis::Delta2 => Some(ScanAxis::Delta2),
            SweepAxis::Sum => Some(ScanAxis::Sum),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Spacing {
    #[default]
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "log")]
    Log,
}

/// A one-dimensional sweep; `start` and `stop` are in the unit of the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VelocityKind {
    #[default]
    #[serde(rename = "thermal")]
    Thermal,
    #[serde(rename = "stationary")]
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub velocity: VelocityKind,
    /// Relative accuracy gate of the velocity average.
    #[serde(default = "default_doppler_tolerance")]
    pub doppler_tolerance: f64,
    /// Velocity-selective hyperfine pumping in spectra.
    #[serde(default = "default_true")]
    pub pumping: bool,
    /// Transit refill rate of the pumping model, s^-1.
    #[serde(default = "default_transit_rate")]
    pub transit_rate: f64,
    #[serde(default)]
    pub dephasing_mhz: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Fixed propagation step count; adaptive when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default = "default_max_change")]
    pub max_relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationSection {
    /// IR seed field relative to the IR saturation field.
    #[serde(default = "default_seed_fraction")]
    pub seed_fraction: f64,
    #[serde(default)]
    pub seed_blue_w_cm2: f64,
    /// Global scale of the four-wave coupling.
    #[serde(default = "default_calibration")]
    pub calibration: f64,
    #[serde(default)]
    pub phase_mismatch_per_m: f64,
    /// Hyperfine pumping on open lines inside the cell.
    #[serde(default)]
    pub pumping: bool,
    /// Keep the second laser on the velocity class of the first while the
    /// first detuning is scanned; otherwise the second laser stays put.
    #[serde(default)]
    pub follow_second: bool,
    #[serde(default)]
    pub record_profiles: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
    /// File stem; defaults to the subcommand name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

fn default_length_cm() -> f64 {
    5.0
}
fn default_waist_um() -> f64 {
    60.0
}
fn default_polarization() -> Polarization {
    Polarization::SigmaPlus
}
fn default_doppler_tolerance() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}
fn default_transit_rate() -> f64 {
    PumpingModel::default().transit_rate
}
fn default_rtol() -> f64 {
    Tolerance::default().rtol
}
fn default_atol() -> f64 {
    Tolerance::default().atol
}
fn default_max_change() -> f64 {
    match Integrator::default() {
        Integrator::Adaptive { max_relative_change, .. } => max_relative_change,
        Integrator::Fixed { .. } => 0.05,
    }
}
fn default_seed_fraction() -> f64 {
    1e-6
}
fn default_calibration() -> f64 {
    MediumOptions::default().calibration
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            velocity: VelocityKind::Thermal,
            doppler_tolerance: default_doppler_tolerance(),
            pumping: true,
            transit_rate: default_transit_rate(),
            dephasing_mhz: 0.0,
            rtol: default_rtol(),
            atol: default_atol(),
            steps: None,
            max_relative_change: default_max_change(),
        }
    }
}

impl Default for PropagationSection {
    fn default() -> Self {
        PropagationSection {
            seed_fraction: default_seed_fraction(),
            seed_blue_w_cm2: 0.0,
            calibration: default_calibration(),
            phase_mismatch_per_m: 0.0,
            pumping: false,
            follow_second: false,
            record_profiles: false,
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_output_dir(), stem: None }
    }
}

impl FieldSection {
    pub fn new(lower: &str, upper: &str) -> Self {
        FieldSection {
            lower: lower.into(),
            upper: upper.into(),
            wavelength_nm: None,
            power_mw: None,
            intensity_w_cm2: None,
            rabi_mhz: None,
            waist_um: default_waist_um(),
            detuning_mhz: 0.0,
            polarization: default_polarization(),
            direction: None,
        }
    }

    /// Beam area pi w^2, m^2.
    pub fn area(&self) -> f64 {
        PI * (self.waist_um * 1e-6).powi(2)
    }

    /// Intensity in W/m^2 when given as power or intensity.
    pub fn intensity(&self) -> Option<f64> {
        match (self.power_mw, self.intensity_w_cm2) {
            (Some(p), _) => Some(p * 1e-3 / self.area()),
            (None, Some(i)) => Some(i * 1e4),
            _ => None,
        }
    }

    /// Power in W when given as power or intensity.
    pub fn power(&self) -> Option<f64> {
        self.intensity().map(|i| i * self.area())
    }
}

fn path_err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{path}: {msg}"))
}

fn check_finite(path: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(path_err(path, format!("must be finite, got {x}")))
    }
}

fn check_positive(path: &str, x: f64) -> Result<()> {
    check_finite(path, x)?;
    if x > 0.0 {
        Ok(())
    } else {
        Err(path_err(path, format!("must be > 0, got {x}")))
    }
}

fn check_non_negative(path: &str, x: f64) -> Result<()> {
    check_finite(path, x)?;
    if x >= 0.0 {
        Ok(())
    } else {
        Err(path_err(path, format!("must be >= 0, got {x}")))
    }
}

/// Read, parse and validate a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_in(&text, Some(base))
        .map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
}

/// Parse and validate config text; relative paths resolve against the
/// working directory.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    parse_config_in(text, None)
}

fn parse_config_in(text: &str, base_dir: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    cfg.base_dir = base_dir;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Minimal config on a bundled scheme.
    pub fn new(scheme: &str, temperature_k: f64) -> Self {
        RunConfig {
            scheme: Some(scheme.into()),
            scheme_file: None,
            cell: CellSection {
                temperature_k: Some(temperature_k),
                temperature_c: None,
                length_cm: default_length_cm(),
                density_cm3: None,
            },
            fields: Vec::new(),
            scan: None,
            solver: SolverSection::default(),
            propagation: PropagationSection::default(),
            output: OutputSection::default(),
            base_dir: None,
        }
    }

    /// Canonical TOML form; parsing it gives back an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.scheme, &self.scheme_file) {
            (Some(_), Some(_)) => return Err(path_err("scheme", "give either `scheme` or `scheme_file`, not both")),
            (None, None) => return Err(path_err("scheme", "missing; set `scheme` or `scheme_file`")),
            (Some(name), None) => {
                get_scheme(name).map_err(|e| path_err("scheme", e))?;
            }
            (None, Some(_)) => {
                let p = self.scheme_path().unwrap_or_default();
                if !p.is_file() {
                    return Err(path_err("scheme_file", format!("{} does not exist", p.display())));
                }
            }
        }

        let c = &self.cell;
        match (c.temperature_k, c.temperature_c) {
            (Some(_), Some(_)) => {
                return Err(path_err("cell.temperature", "give either `temperature_k` or `temperature_c`, not both"))
            }
            (None, None) => return Err(path_err("cell.temperature", "missing; set `temperature_k` or `temperature_c`")),
            (Some(t), None) => check_positive("cell.temperature_k", t)?,
            (None, Some(t)) => {
                check_finite("cell.temperature_c", t)?;
                if !(t + CELSIUS_OFFSET > 0.0) {
                    return Err(path_err("cell.temperature_c", format!("{t} degC is at or below absolute zero")));
                }
            }
        }
        check_positive("cell.length_cm", c.length_cm)?;
        if let Some(n) = c.density_cm3 {
            check_non_negative("cell.density_cm3", n)?;
        }

        for (i, f) in self.fields.iter().enumerate() {
            let at = |k: &str| format!("fields[{i}].{k}");
            if f.lower.is_empty() || f.upper.is_empty() {
                return Err(path_err(&at("lower"), "level ids must be non-empty"));
            }
            if let Some(w) = f.wavelength_nm {
                check_positive(&at("wavelength_nm"), w)?;
            }
            let strengths = [f.power_mw, f.intensity_w_cm2, f.rabi_mhz].iter().filter(|x| x.is_some()).count();
            if strengths != 1 {
                return Err(path_err(&at("power_mw"), "give exactly one of `power_mw`, `intensity_w_cm2`, `rabi_mhz`"));
            }
            for (k, v) in [("power_mw", f.power_mw), ("intensity_w_cm2", f.intensity_w_cm2), ("rabi_mhz", f.rabi_mhz)] {
                if let Some(v) = v {
                    check_non_negative(&at(k), v)?;
                }
            }
            check_positive(&at("waist_um"), f.waist_um)?;
            check_finite(&at("detuning_mhz"), f.detuning_mhz)?;
            if let Some(d) = f.direction {
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(path_err(&at("direction"), "must be a finite non-zero vector"));
                }
            }
        }
        for (i, a) in self.fields.iter().enumerate() {
            if self.fields[..i].iter().any(|b| b.lower == a.lower && b.upper == a.upper) {
                return Err(path_err(&format!("fields[{i}]"), format!("duplicate field on {} -> {}", a.lower, a.upper)));
            }
        }

        if let Some(s) = &self.scan {
            check_finite("scan.start", s.start)?;
            check_finite("scan.stop", s.stop)?;
            if !(s.stop > s.start) {
                return Err(path_err("scan.stop", format!("range is empty: stop {} <= start {}", s.stop, s.start)));
            }
            if s.points < 2 {
                return Err(path_err("scan.points", format!("need at least 2 points, got {}", s.points)));
            }
            if s.spacing == Spacing::Log && !(s.start > 0.0) {
                return Err(path_err("scan.start", "log spacing needs start > 0"));
            }
            let positive_axis = matches!(
                s.axis,
                SweepAxis::Power | SweepAxis::Power1 | SweepAxis::Power2 | SweepAxis::Temperature
            );
            if positive_axis && !(s.start > 0.0) {
                return Err(path_err("scan.start", format!("{} axis needs start > 0", s.axis.unit())));
            }
        }

        let sv = &self.solver;
        check_positive("solver.doppler_tolerance", sv.doppler_tolerance)?;
        check_positive("solver.transit_rate", sv.transit_rate)?;
        check_non_negative("solver.dephasing_mhz", sv.dephasing_mhz)?;
        check_positive("solver.rtol", sv.rtol)?;
        check_positive("solver.atol", sv.atol)?;
        check_positive("solver.max_relative_change", sv.max_relative_change)?;
        if sv.steps == Some(0) {
            return Err(path_err("solver.steps", "must be >= 1"));
        }

        let p = &self.propagation;
        check_non_negative("propagation.seed_fraction", p.seed_fraction)?;
        check_non_negative("propagation.seed_blue_w_cm2", p.seed_blue_w_cm2)?;
        check_non_negative("propagation.calibration", p.calibration)?;
        check_finite("propagation.phase_mismatch_per_m", p.phase_mismatch_per_m)?;

        if self.output.dir.as_os_str().is_empty() {
            return Err(path_err("output.dir", "must be non-empty"));
        }
        Ok(())
    }

    pub fn scheme_path(&self) -> Option<PathBuf> {
        self.scheme_file.as_ref().map(|p| match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.clone(),
        })
    }

    pub fn load_scheme(&self) -> Result<LevelScheme> {
        match (&self.scheme, self.scheme_path()) {
            (Some(name), _) => get_scheme(name),
            (None, Some(path)) => LevelScheme::load(&path),
            (None, None) => Err(path_err("scheme", "missing")),
        }
    }

    /// Cell temperature, K.
    pub fn temperature(&self) -> f64 {
        match (self.cell.temperature_k, self.cell.temperature_c) {
            (Some(t), _) => t,
            (None, Some(c)) => c + CELSIUS_OFFSET,
            (None, None) => f64::NAN,
        }
    }

    pub fn cell_conditions(&self) -> Result<CellConditions> {
        let length = self.cell.length_cm * 1e-2;
        let t = self.temperature();
        match self.cell.density_cm3 {
            Some(n) => CellConditions::with_density(t, length, n),
            None => CellConditions::new(t, length),
        }
        .map_err(|e| path_err("cell", e))
    }

    /// Bloch-model fields with Rabi frequencies from power, intensity or
    /// the explicit value.
    pub fn field_specs(&self, scheme: &LevelScheme) -> Result<Vec<FieldSpec>> {
        self.fields
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let at = |k: &str| format!("fields[{i}].{k}");
                let mut spec = FieldSpec::on(scheme, &f.lower, &f.upper).map_err(|e| path_err(&at("lower"), e))?;
                if let Some(w) = f.wavelength_nm {
                    spec.wavelength_nm = w;
                }
                let rabi = match (f.rabi_mhz, f.intensity()) {
                    (Some(r), _) => TAU * r * 1e6,
                    (None, Some(i)) => {
                        let drive = scheme.drive(&f.lower, &f.upper).expect("checked by FieldSpec::on");
                        let a = scheme.drive_einstein_a(drive).map_err(|e| path_err(&at("lower"), e))?;
                        rabi_from_intensity(spec.wavelength_nm, a, i)
                    }
                    (None, None) => return Err(path_err(&at("power_mw"), "missing field strength")),
                };
                spec = spec.with_rabi(rabi).with_detuning(TAU * f.detuning_mhz * 1e6);
                spec.polarization = f.polarization;
                if let Some(d) = f.direction {
                    spec = spec.with_direction(d);
                }
                Ok(spec)
            })
            .collect()
    }

    pub fn scan_options(&self) -> ScanOptions {
        let sv = &self.solver;
        let mut opts = match sv.velocity {
            VelocityKind::Thermal => ScanOptions::thermal(self.temperature()),
            VelocityKind::Stationary => ScanOptions::stationary(),
        };
        if sv.velocity == VelocityKind::Thermal {
            opts.tolerance = Some(sv.doppler_tolerance);
            opts.pumping = sv.pumping.then_some(PumpingModel { transit_rate: sv.transit_rate });
        }
        opts.model = ModelOptions { dephasing: TAU * sv.dephasing_mhz * 1e6 };
        opts
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance { rtol: self.solver.rtol, atol: self.solver.atol, ..Tolerance::default() }
    }

    /// Propagation inputs from the two fields on the diamond drives. With
    /// `test_mode` the integrator uses fixed steps.
    pub fn propagation_config(&self, scheme: &LevelScheme, test_mode: bool) -> Result<PropagationConfig> {
        let [g, e, d, _] = scheme.diamond_indices().map_err(|e| path_err("scheme", e))?;
        let id = |i: usize| scheme.levels[i].id.as_str();
        let find = |lo: &str, up: &str| {
            self.fields.iter().position(|f| f.lower == lo && f.upper == up).ok_or_else(|| {
                path_err("fields", format!("propagation needs a field on {lo} -> {up}"))
            })
        };
        let i1 = find(id(g), id(e))?;
        let i2 = find(id(e), id(d))?;
        let (f1, f2) = (&self.fields[i1], &self.fields[i2]);
        let power = |i: usize, f: &FieldSection| {
            f.power().ok_or_else(|| {
                path_err(&format!("fields[{i}].power_mw"), "propagation needs `power_mw` or `intensity_w_cm2`")
            })
        };
        let mut cfg = PropagationConfig::new(self.cell_conditions()?, power(i1, f1)?, power(i2, f2)?);
        cfg.detuning1 = TAU * f1.detuning_mhz * 1e6;
        cfg.detuning2 = TAU * f2.detuning_mhz * 1e6;
        let p = &self.propagation;
        cfg.seed_fraction = p.seed_fraction;
        cfg.seed_blue = p.seed_blue_w_cm2 * 1e4;
        cfg.phase_mismatch = p.phase_mismatch_per_m;
        cfg.record_profiles = p.record_profiles;
        cfg.medium.calibration = p.calibration;
        cfg.medium.dephasing = TAU * self.solver.dephasing_mhz * 1e6;
        cfg.medium.pumping = p.pumping.then_some(PumpingModel { transit_rate: self.solver.transit_rate });
        cfg.medium.spot_radius = f1.waist_um.max(f2.waist_um) * 1e-6;
        cfg.integrator = match (self.solver.steps, test_mode) {
            (Some(steps), _) => Integrator::Fixed { steps },
            (None, true) => Integrator::Fixed { steps: 200 },
            (None, false) => match Integrator::default() {
                Integrator::Adaptive { min_steps, .. } => {
                    Integrator::Adaptive { max_relative_change: self.solver.max_relative_change, min_steps }
                }
                fixed => fixed,
            },
        };
        Ok(cfg)
    }

    /// Sweep values in the unit of the scan axis.
    pub fn sweep_values(&self) -> Result<Vec<f64>> {
        let s = self.scan.as_ref().ok_or_else(|| path_err("scan", "missing scan section"))?;
        let n = s.points;
        let values = match s.spacing {
            Spacing::Linear => ScanRange { start: s.start, stop: s.stop, points: n }.values()?,
            Spacing::Log => {
                let (a, b) = (s.start.ln(), s.stop.ln());
                (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
            }
        };
        Ok(values)
    }

    /// Spectral scan range in rad/s.
    pub fn spectral_range(&self) -> Result<(ScanAxis, ScanRange)> {
        let s = self.scan.as_ref().ok_or_else(|| path_err("scan", "missing scan section"))?;
        let axis = s
            .axis
            .spectral()
            .ok_or_else(|| path_err("scan.axis", "spectral scans need axis delta1, delta2 or sum"))?;
        if s.spacing != Spacing::Linear {
            return Err(path_err("scan.spacing", "spectral scans are linear"));
        }
        Ok((axis, ScanRange { start: TAU * s.start * 1e6, stop: TAU * s.stop * 1e6, points: s.points }))
    }

    pub fn velocity_model(&self) -> VelocityModel {
        self.scan_options().velocity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scheme = "rb85-blue"

[cell]
temperature_c = 60.3

[[fields]]
lower = "5S1/2"
upper = "5P3/2"
power_mw = 0.17

[[fields]]
lower = "5P3/2"
upper = "5D5/2"
power_mw = 0.65
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.cell.length_cm, 5.0);
        assert_eq!(cfg.fields[0].waist_um, 60.0);
        assert_eq!(cfg.fields[1].polarization, Polarization::SigmaPlus);
        assert!((cfg.temperature() - 333.45).abs() < 1e-9);
        let cell = cfg.cell_conditions().unwrap();
        assert!((cell.density() / 3e11 - 1.0).abs() < 0.3);
    }

    #[test]
    fn negative_temperature_names_the_field() {
        let text = MINIMAL.replace("temperature_c = 60.3", "temperature_k = -5.0");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("cell.temperature"), "{err}");
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = MINIMAL.replace("power_mw = 0.17", "power_mw = 0.17\nbogus = 1");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("line"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let err = parse_config_str("scheme = \"rb85-blue\"\n[cell\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("column"), "{err}");
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let again = parse_config_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn missing_scheme_file_is_rejected() {
        let text = MINIMAL.replace("scheme = \"rb85-blue\"", "scheme_file = \"/nonexistent/x.toml\"");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("scheme_file"), "{err}");
    }

    #[test]
    fn empty_scan_range_is_rejected() {
        let text = format!("{MINIMAL}\n[scan]\naxis = \"delta2\"\nstart = 10.0\nstop = 10.0\npoints = 5\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("scan.stop"), "{err}");
    }

    #[test]
    fn propagation_config_converts_units() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let scheme = cfg.load_scheme().unwrap();
        let p = cfg.propagation_config(&scheme, true).unwrap();
        assert!((p.power1 - 0.17e-3).abs() < 1e-12);
        assert!((p.power2 - 0.65e-3).abs() < 1e-12);
        assert!((p.cell.length - 0.05).abs() < 1e-15);
        assert!(matches!(p.integrator, Integrator::Fixed { .. }));
    }

    #[test]
    fn intensity_and_power_agree() {
        let mut f = FieldSection::new("5S1/2", "5P3/2");
        f.power_mw = Some(0.5);
        let i = f.intensity().unwrap();
        f.power_mw = None;
        f.intensity_w_cm2 = Some(i * 1e-4);
        assert!((f.power().unwrap() - 0.5e-3).abs() < 1e-15);
    }
}
