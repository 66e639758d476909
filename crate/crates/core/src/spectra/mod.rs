//! Doppler-averaged excitation spectra, Autler-Townes analysis and a Zeeman
//! optical-pumping rate model.

mod peaks;
mod velocity;
mod zeeman;

pub use peaks::{find_peaks, fwhm, Peak};
pub use velocity::{GridKind, VelocityGrid, SPAN_SIGMAS};
pub use zeeman::{clebsch_gordan, line_strength, zeeman_pumping, PolarizationPair, ZeemanOptions, ZeemanResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::LevelScheme;
use crate::constants::TAU;
use crate::error::{Error, Result};
use crate::liouville::{BlochModel, Drive, FieldSpec, ModelOptions};

/// Default number of Gauss-Hermite nodes.
pub const HERMITE_NODES: usize = 64;
/// Minimum peak prominence relative to the global maximum.
pub const MIN_PROMINENCE: f64 = 0.05;

/// Average `observable(v)` over the thermal distribution sampled by `grid`.
///
/// The result is cross-checked against a grid of doubled resolution; if the
/// two differ by more than `tolerance` relative to the mean magnitude of the
/// observable an [`Error::Accuracy`] is returned. The finer estimate is
/// returned on success.
pub fn doppler_average<F>(observable: F, grid: &VelocityGrid, tolerance: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let fine = grid.refined();
    let values = fine.nodes().iter().map(|&v| observable(v)).collect::<Result<Vec<_>>>()?;
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("observable is not finite on the velocity grid".into()));
    }
    let coarse_value = match grid.kind() {
        GridKind::Trapezoid => {
            let even: Vec<f64> = values.iter().step_by(2).copied().collect();
            grid.integrate(&even)
        }
        GridKind::GaussHermite => {
            let coarse = grid.nodes().iter().map(|&v| observable(v)).collect::<Result<Vec<_>>>()?;
            grid.integrate(&coarse)
        }
    };
    let fine_value = fine.integrate(&values);
    let scale: f64 = fine.weights().iter().zip(&values).map(|(w, f)| w * f.abs()).sum();
    let change = (fine_value - coarse_value).abs();
    if change > tolerance * scale {
        return Err(Error::Accuracy { change, tolerance: tolerance * scale });
    }
    Ok(fine_value)
}

/// Gauss-Hermite grid when every resonance is at least two node spacings
/// wide, otherwise a trapezoid grid graded around the resonances.
pub fn auto_grid(sigma: f64, resonances: &[(f64, f64)]) -> Result<VelocityGrid> {
    let hermite = VelocityGrid::gauss_hermite(HERMITE_NODES, sigma)?;
    let resolved = resonances
        .iter()
        .all(|&(v, w)| v.abs() > SPAN_SIGMAS * sigma || w >= 2.0 * hermite.spacing_near(v));
    if resolved {
        Ok(hermite)
    } else {
        VelocityGrid::graded(sigma, resonances)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanAxis {
    /// First field detuning.
    #[serde(rename = "delta1")]
    Delta1,
    /// Second field detuning.
    #[serde(rename = "delta2")]
    Delta2,
    /// Both detunings shifted by half the scan value, moving the two-photon
    /// detuning at fixed difference.
    #[serde(rename = "sum")]
    Sum,
}

impl std::str::FromStr for ScanAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta1" => Ok(ScanAxis::Delta1),
            "delta2" => Ok(ScanAxis::Delta2),
            "sum" => Ok(ScanAxis::Sum),
            other => Err(Error::Domain(format!("unknown scan axis `{other}`"))),
        }
    }
}

/// Detuning range, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl ScanRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.stop > self.start) {
            return Err(Error::Domain("scan needs stop > start and at least 2 points".into()));
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start + step * i as f64).collect())
    }
}

/// Velocity-selective loss to uncoupled hyperfine levels: open lines of the
/// first transition remove atoms at `loss_branching * R_scatter`, refilled
/// by transit at `transit_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpingModel {
    /// s^-1
    pub transit_rate: f64,
}

impl Default for PumpingModel {
    fn default() -> Self {
        PumpingModel { transit_rate: 2.0e6 }
    }
}

impl PumpingModel {
    /// Fraction of ladder atoms left in the coupled ground level for
    /// velocity `v` under a first-step field `(detuning, rabi, k)`.
    pub fn weight(&self, scheme: &LevelScheme, gamma: f64, drive: Drive, k: f64, v: f64) -> f64 {
        let Some(hf) = &scheme.hyperfine else { return 1.0 };
        let mut loss = 0.0;
        for line in &hf.open_lines {
            let s = 2.0 * drive.rabi * drive.rabi * line.relative_strength / (gamma * gamma);
            let delta = drive.detuning - k * v - TAU * line.offset_hz;
            let scatter = 0.5 * gamma * s / (1.0 + s + (2.0 * delta / gamma).powi(2));
            loss += line.loss_branching * scatter;
        }
        1.0 / (1.0 + loss / self.transit_rate)
    }

    /// Velocities and half-widths of the pumping holes.
    pub fn resonances(&self, scheme: &LevelScheme, gamma: f64, drive: Drive, k: f64) -> Vec<(f64, f64)> {
        let Some(hf) = &scheme.hyperfine else { return Vec::new() };
        hf.open_lines
            .iter()
            .map(|line| {
                let s = 2.0 * drive.rabi * drive.rabi * line.relative_strength / (gamma * gamma);
                ((drive.detuning - TAU * line.offset_hz) / k, 0.5 * gamma * (1.0 + s).sqrt() / k.abs())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VelocityModel {
    /// Atoms at rest.
    Stationary,
    /// Thermal average at this temperature, K.
    Thermal { temperature: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub velocity: VelocityModel,
    /// Level whose population is recorded; defaults to the diamond upper
    /// level or the highest level.
    pub observe: Option<String>,
    pub pumping: Option<PumpingModel>,
    pub model: ModelOptions,
    /// Relative accuracy gate of the velocity average; `None` skips it.
    pub tolerance: Option<f64>,
}

impl ScanOptions {
    pub fn thermal(temperature: f64) -> Self {
        ScanOptions {
            velocity: VelocityModel::Thermal { temperature },
            observe: None,
            pumping: Some(PumpingModel::default()),
            model: ModelOptions::default(),
            tolerance: Some(1e-3),
        }
    }

    pub fn stationary() -> Self {
        ScanOptions {
            velocity: VelocityModel::Stationary,
            observe: None,
            pumping: None,
            model: ModelOptions::default(),
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub scheme: String,
    pub observed_level: String,
    pub temperature: Option<f64>,
    /// Field detunings (rad/s) and Rabi frequencies (rad/s) before the scan
    /// offset is applied.
    pub fields: Vec<FieldSpec>,
    pub pumping: Option<PumpingModel>,
}

/// Sampled spectrum; detunings in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumScan {
    pub axis: ScanAxis,
    pub points: Vec<(f64, f64)>,
    pub metadata: ScanMetadata,
}

impl SpectrumScan {
    pub fn detunings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Location (rad/s) and value of the largest sample.
    pub fn maximum(&self) -> Option<(f64, f64)> {
        self.points.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Full width at half maximum, rad/s.
    pub fn fwhm(&self) -> Option<f64> {
        fwhm(&self.detunings(), &self.values())
    }

    pub fn check(&self) -> Result<()> {
        if self.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Domain("scan detunings must increase strictly".into()));
        }
        if self.points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::Domain("scan values must be finite".into()));
        }
        Ok(())
    }
}

fn observed_index(scheme: &LevelScheme, observe: Option<&str>) -> Result<usize> {
    match observe {
        Some(id) => scheme.index_of(id),
        None => match scheme.diamond_indices() {
            Ok([_, _, upper, _]) => Ok(upper),
            Err(_) => Ok((0..scheme.dim())
                .max_by(|&a, &b| scheme.levels[a].energy_hz.total_cmp(&scheme.levels[b].energy_hz))
                .unwrap_or(0)),
        },
    }
}

/// Single-atom excitation evaluator reused across scan points.
pub struct Excitation<'a> {
    scheme: &'a LevelScheme,
    model: BlochModel,
    fields: Vec<FieldSpec>,
    observed: usize,
    first_step: Option<usize>,
    gamma_first: f64,
    options: ScanOptions,
}

impl<'a> Excitation<'a> {
    pub fn new(scheme: &'a LevelScheme, fields: &[FieldSpec], options: ScanOptions) -> Result<Self> {
        let model = BlochModel::new(scheme, fields, options.model)?;
        let observed = observed_index(scheme, options.observe.as_deref())?;
        let ground = &scheme.levels[scheme.ground_index()].id;
        let first_step = fields.iter().position(|f| &f.lower == ground);
        let gamma_first = first_step
            .map(|i| scheme.level(&fields[i].upper).map(|l| l.decay_rate))
            .transpose()?
            .unwrap_or(0.0);
        Ok(Excitation { scheme, model, fields: fields.to_vec(), observed, first_step, gamma_first, options })
    }

    /// Observed population at velocity `v`, including the pumping weight.
    pub fn at_velocity(&self, drives: &[Drive], v: f64) -> Result<f64> {
        let ss = self.model.steady_state(drives, v, false)?;
        let mut value = ss.population(self.observed);
        if let (Some(p), Some(i)) = (self.options.pumping, self.first_step) {
            value *= p.weight(self.scheme, self.gamma_first, drives[i], self.fields[i].k_axial(), v);
        }
        Ok(value)
    }

    fn resonances(&self, drives: &[Drive]) -> Vec<(f64, f64)> {
        let mut r: Vec<(f64, f64)> =
            self.model.resonances(drives).iter().map(|r| (r.velocity, r.width)).collect();
        if let (Some(p), Some(i)) = (self.options.pumping, self.first_step) {
            r.extend(p.resonances(self.scheme, self.gamma_first, drives[i], self.fields[i].k_axial()));
        }
        r
    }

    /// Velocity-averaged (or stationary) observed population.
    pub fn evaluate(&self, drives: &[Drive]) -> Result<f64> {
        match self.options.velocity {
            VelocityModel::Stationary => self.at_velocity(drives, 0.0),
            VelocityModel::Thermal { temperature } => {
                let sigma = VelocityGrid::thermal_sigma(temperature, self.scheme.mass_amu)?;
                let grid = auto_grid(sigma, &self.resonances(drives))?;
                match self.options.tolerance {
                    Some(tol) => doppler_average(|v| self.at_velocity(drives, v), &grid, tol),
                    None => {
                        let values = grid
                            .nodes()
                            .iter()
                            .map(|&v| self.at_velocity(drives, v))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(grid.integrate(&values))
                    }
                }
            }
        }
    }

    pub fn base_drives(&self) -> Vec<Drive> {
        self.fields.iter().map(|f| Drive { detuning: f.detuning, rabi: f.rabi }).collect()
    }
}

/// Scan one detuning axis and record the (Doppler-averaged) population of
/// the observed level at each point.
pub fn scan_excitation(
    scheme: &LevelScheme,
    fields: &[FieldSpec],
    axis: ScanAxis,
    range: ScanRange,
    options: ScanOptions,
) -> Result<SpectrumScan> {
    let needed = match axis {
        ScanAxis::Delta1 => 1,
        ScanAxis::Delta2 | ScanAxis::Sum => 2,
    };
    if fields.len() < needed {
        return Err(Error::Domain(format!("scan axis {axis:?} needs {needed} fields")));
    }
    let detunings = range.values()?;
    let exc = Excitation::new(scheme, fields, options.clone())?;
    let base = exc.base_drives();
    let values = detunings
        .par_iter()
        .map(|&x| {
            let mut d = base.clone();
            match axis {
                ScanAxis::Delta1 => d[0].detuning += x,
                ScanAxis::Delta2 => d[1].detuning += x,
                ScanAxis::Sum => {
                    d[0].detuning += 0.5 * x;
                    d[1].detuning += 0.5 * x;
                }
            }
            exc.evaluate(&d)
        })
        .collect::<Result<Vec<_>>>()?;
    let temperature = match options.velocity {
        VelocityModel::Thermal { temperature } => Some(temperature),
        VelocityModel::Stationary => None,
    };
    Ok(SpectrumScan {
        axis,
        points: detunings.into_iter().zip(values).collect(),
        metadata: ScanMetadata {
            scheme: scheme.name.clone(),
            observed_level: scheme.levels[exc.observed].id.clone(),
            temperature,
            fields: fields.to_vec(),
            pumping: options.pumping,
        },
    })
}

/// Peak positions (rad/s) of a scan and their separation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutlerTownes {
    pub peaks: Vec<f64>,
    /// rad/s; `None` when fewer than two peaks are resolved.
    pub splitting: Option<f64>,
    pub resolved: bool,
}

/// The two most prominent peaks and their separation.
pub fn autler_townes_splitting(scan: &SpectrumScan) -> AutlerTownes {
    let mut peaks = find_peaks(&scan.detunings(), &scan.values(), MIN_PROMINENCE);
    peaks.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    peaks.truncate(2);
    let mut positions: Vec<f64> = peaks.iter().map(|p| p.position).collect();
    positions.sort_by(f64::total_cmp);
    let splitting = (positions.len() == 2).then(|| positions[1] - positions[0]);
    AutlerTownes { peaks: positions, splitting, resolved: splitting.is_some() }
}
