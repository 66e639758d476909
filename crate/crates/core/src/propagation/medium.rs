//! Local gain, absorption and coupling coefficients of the driven vapour.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::{CellConditions, LevelScheme};
use crate::constants::{angular_frequency, wavenumber, HBAR, SPEED_OF_LIGHT, TAU};
use crate::error::{Error, Result};
use crate::liouville::{BlochModel, Drive, FieldSpec, ModelOptions};
use crate::spectra::{PumpingModel, VelocityGrid};

/// Intensity below which a pump is treated as a weak probe, W/m^2.
pub const INTENSITY_FLOOR: f64 = 1e-6;

/// Coefficients of the coupled amplitude equations at one position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalCoefficients {
    /// Pump and blue intensity absorption, 1/m.
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha_bl: f64,
    /// Small-signal intensity gains, 1/m (never negative).
    pub g_ir: f64,
    pub g_bl: f64,
    /// Parametric coupling of the photon-flux amplitudes, 1/m.
    pub kappa: f64,
    /// IR saturation intensity, W/m^2.
    pub ir_saturation: f64,
    /// Velocity-averaged 5D - 6P inversion (per ladder atom).
    pub inversion: f64,
    /// |<rho_gd>| averaged over velocity.
    pub coherence: f64,
}

/// Anything that yields local coefficients from the local pump intensities.
pub trait CoefficientModel: Sync {
    fn coefficients(&self, i1: f64, i2: f64) -> Result<LocalCoefficients>;

    /// Detuning of the generated blue field from the zero-velocity line, rad/s.
    fn blue_detuning(&self) -> f64 {
        0.0
    }

    /// Detuning of the generated IR field, rad/s.
    fn ir_detuning(&self) -> f64 {
        0.0
    }
}

/// Position-independent coefficients for tests and analytic checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FixedCoefficients(pub LocalCoefficients);

impl CoefficientModel for FixedCoefficients {
    fn coefficients(&self, _: f64, _: f64) -> Result<LocalCoefficients> {
        Ok(self.0)
    }
}

/// Tunable parts of the medium model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumOptions {
    /// Global scale of the parametric coupling.
    pub calibration: f64,
    /// Extra coherence dephasing, rad/s.
    pub dephasing: f64,
    /// Hyperfine optical pumping on open lines. Off by default: under
    /// circular drive the stretched state closes the cycling transition.
    pub pumping: Option<PumpingModel>,
    /// Beam radius, m.
    pub spot_radius: f64,
}

impl Default for MediumOptions {
    fn default() -> Self {
        MediumOptions {
            calibration: 1.0,
            dephasing: 0.0,
            pumping: None,
            spot_radius: 60e-6,
        }
    }
}

/// Peak cross-section of a homogeneously broadened line, m^2.
pub fn peak_cross_section(wavelength_nm: f64, einstein_a: f64, coherence_decay: f64) -> f64 {
    let lambda = wavelength_nm * 1e-9;
    3.0 * lambda * lambda / TAU * einstein_a / (2.0 * coherence_decay)
}

/// Rabi frequency (rad/s) of intensity `i` (W/m^2) on a line with Einstein
/// coefficient `a` (rad/s).
pub fn rabi_from_intensity(wavelength_nm: f64, einstein_a: f64, i: f64) -> f64 {
    let w = angular_frequency(wavelength_nm);
    (6.0 * std::f64::consts::PI * SPEED_OF_LIGHT.powi(2) * einstein_a * i.max(0.0) / (HBAR * w.powi(3))).sqrt()
}

/// Fresnel-number overlap of a generated beam with the pumped volume.
pub fn overlap_factor(area: f64, wavelength_nm: f64, length: f64) -> f64 {
    (area / (wavelength_nm * 1e-9 * length)).min(1.0)
}

fn maxwell_pdf(v: f64, sigma: f64) -> f64 {
    (-0.5 * (v / sigma).powi(2)).exp() / ((TAU).sqrt() * sigma)
}

/// Physical coefficient model for one diamond and fixed laser detunings.
pub struct VapourMedium<'a> {
    scheme: &'a LevelScheme,
    model: BlochModel,
    grid: VelocityGrid,
    idx: [usize; 4],
    lambda: [f64; 4],
    k: [f64; 2],
    a_drive: [f64; 2],
    detuning: [f64; 2],
    /// Ladder-manifold density and total density, m^-3.
    n_ladder: f64,
    n_total: f64,
    sigma_v: f64,
    gamma_first: f64,
    sigma_ir: f64,
    sigma_bl: f64,
    gamma_ir: f64,
    gamma_bl: f64,
    eta_ir: f64,
    eta_bl: f64,
    ir_saturation: f64,
    delta_ir: f64,
    options: MediumOptions,
}

impl<'a> VapourMedium<'a> {
    pub fn new(scheme: &'a LevelScheme, cell: &CellConditions, detunings: [f64; 2], options: MediumOptions) -> Result<Self> {
        let idx = scheme.diamond_indices()?;
        let lambda = scheme.diamond_wavelengths()?;
        if !(options.spot_radius > 0.0) || !(options.calibration >= 0.0) {
            return Err(Error::Domain("spot radius must be > 0 and calibration >= 0".into()));
        }
        let ids: Vec<&str> = idx.iter().map(|&i| scheme.levels[i].id.as_str()).collect();
        let f1 = FieldSpec::on(scheme, ids[0], ids[1])?.with_detuning(detunings[0]);
        let f2 = FieldSpec::on(scheme, ids[1], ids[2])?.with_detuning(detunings[1]);
        let model = BlochModel::new(scheme, &[f1.clone(), f2.clone()], ModelOptions { dephasing: options.dephasing })?;
        let a_drive = [
            scheme.drive_einstein_a(scheme.drive(ids[0], ids[1]).expect("checked"))?,
            scheme.drive_einstein_a(scheme.drive(ids[1], ids[2]).expect("checked"))?,
        ];
        let k = [f1.k_axial(), f2.k_axial()];
        let gamma_first = scheme.levels[idx[1]].decay_rate;
        let sigma_v = VelocityGrid::thermal_sigma(cell.temperature, scheme.mass_amu)?;

        let drives0 = [Drive { detuning: detunings[0], rabi: 0.0 }, Drive { detuning: detunings[1], rabi: 0.0 }];
        let mut resonances: Vec<(f64, f64)> = model.resonances(&drives0).iter().map(|r| (r.velocity, r.width)).collect();
        if let Some(p) = options.pumping {
            resonances.extend(p.resonances(scheme, gamma_first, drives0[0], k[0]));
        }
        let grid = VelocityGrid::graded(sigma_v, &resonances)?;

        let fraction = scheme.hyperfine.as_ref().map_or(1.0, |h| h.ladder_fraction);
        let n_total = cell.density_si();
        let gamma_ir = scheme.coherence_decay(idx[2], idx[3]) + options.dephasing;
        let gamma_bl = scheme.coherence_decay(idx[3], idx[0]) + options.dephasing;
        let a_ir = scheme.channel_rate(ids[2], ids[3]);
        let a_bl = scheme.channel_rate(ids[3], ids[0]);
        let sigma_ir = peak_cross_section(lambda[2], a_ir, gamma_ir);
        let sigma_bl = peak_cross_section(lambda[3], a_bl, gamma_bl);
        let area = std::f64::consts::PI * options.spot_radius.powi(2);
        let ir_saturation = if sigma_ir > 0.0 {
            HBAR * angular_frequency(lambda[2]) * scheme.levels[idx[2]].decay_rate / sigma_ir
        } else {
            f64::INFINITY
        };

        let mut medium = VapourMedium {
            scheme,
            model,
            grid,
            idx,
            lambda,
            k,
            a_drive,
            detuning: detunings,
            n_ladder: n_total * fraction,
            n_total,
            sigma_v,
            gamma_first,
            sigma_ir,
            sigma_bl,
            gamma_ir,
            gamma_bl,
            eta_ir: overlap_factor(area, lambda[2], cell.length),
            eta_bl: overlap_factor(area, lambda[3], cell.length),
            ir_saturation,
            delta_ir: 0.0,
            options,
        };
        medium.delta_ir = k_ir_two_photon(&medium);
        Ok(medium)
    }

    /// Pick the IR frequency with the largest small-signal gain at the
    /// given pump intensities.
    pub fn lock_ir_frequency(&mut self, i1: f64, i2: f64) -> Result<()> {
        let profile = self.profile(i1, i2)?;
        let kir = wavenumber(self.lambda[2]);
        let nodes = self.grid.nodes();
        let mut best = (0.0, self.delta_ir, None);
        for (i, &v) in nodes.iter().enumerate().filter(|(_, v)| v.abs() < 4.0 * self.sigma_v) {
            let d = kir * v;
            let g = self.ir_gain_sum(&profile, d);
            if g > best.0 {
                best = (g, d, Some(i));
            }
        }
        self.delta_ir = best.1;
        // golden-section polish between the neighbouring nodes
        if let Some(i) = best.2 {
            let mut a = kir * nodes[i.saturating_sub(1)];
            let mut b = kir * nodes[(i + 1).min(nodes.len() - 1)];
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - r * (b - a);
            let mut d = a + r * (b - a);
            let (mut gc, mut gd) = (self.ir_gain_sum(&profile, c), self.ir_gain_sum(&profile, d));
            for _ in 0..60 {
                if gc > gd {
                    b = d;
                    d = c;
                    gd = gc;
                    c = b - r * (b - a);
                    gc = self.ir_gain_sum(&profile, c);
                } else {
                    a = c;
                    c = d;
                    gc = gd;
                    d = a + r * (b - a);
                    gd = self.ir_gain_sum(&profile, d);
                }
            }
            let x = 0.5 * (a + b);
            if self.ir_gain_sum(&profile, x) >= best.0 {
                self.delta_ir = x;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn overlap(&self) -> (f64, f64) {
        (self.eta_ir, self.eta_bl)
    }

    pub fn cross_sections(&self) -> (f64, f64) {
        (self.sigma_ir, self.sigma_bl)
    }

    pub fn rabi(&self, i1: f64, i2: f64) -> [f64; 2] {
        [
            rabi_from_intensity(self.lambda[0], self.a_drive[0], i1.max(INTENSITY_FLOOR)),
            rabi_from_intensity(self.lambda[1], self.a_drive[1], i2.max(INTENSITY_FLOOR)),
        ]
    }

    fn profile(&self, i1: f64, i2: f64) -> Result<Vec<NodeState>> {
        let rabi = self.rabi(i1, i2);
        let drives = [
            Drive { detuning: self.detuning[0], rabi: rabi[0] },
            Drive { detuning: self.detuning[1], rabi: rabi[1] },
        ];
        let [g, e, d, p] = self.idx;
        self.grid
            .nodes()
            .iter()
            .map(|&v| {
                let ss = self.model.steady_state(&drives, v, false)?;
                let weight = match self.options.pumping {
                    Some(pm) => pm.weight(self.scheme, self.gamma_first, drives[0], self.k[0], v),
                    None => 1.0,
                };
                let mut open = 0.0;
                if let Some(hf) = &self.scheme.hyperfine {
                    for line in &hf.open_lines {
                        let s = 2.0 * rabi[0].powi(2) * line.relative_strength / self.gamma_first.powi(2);
                        let delta = drives[0].detuning - self.k[0] * v - TAU * line.offset_hz;
                        open += 0.5 * self.gamma_first * s / (1.0 + s + (2.0 * delta / self.gamma_first).powi(2));
                    }
                }
                Ok(NodeState {
                    weight,
                    r1: rabi[0] * ss.rho[(g, e)].im,
                    r2: rabi[1] * ss.rho[(e, d)].im,
                    open,
                    inversion: ss.rho[(d, d)].re - ss.rho[(p, p)].re,
                    ground: ss.rho[(g, g)].re,
                    emitter: ss.rho[(p, p)].re,
                    coherence: ss.rho[(g, d)],
                })
            })
            .collect()
    }

    fn ir_gain_sum(&self, profile: &[NodeState], delta_ir: f64) -> f64 {
        let kir = wavenumber(self.lambda[2]);
        let g2 = self.gamma_ir * self.gamma_ir;
        profile
            .iter()
            .zip(self.grid.nodes())
            .zip(self.grid.weights())
            .map(|((s, &v), &w)| {
                let d = delta_ir - kir * v;
                w * s.weight * s.inversion * g2 / (g2 + d * d)
            })
            .sum()
    }

    fn spectator_absorption(&self, i1: f64) -> f64 {
        let Some(hf) = &self.scheme.hyperfine else { return 0.0 };
        let sigma0 = 3.0 * (self.lambda[0] * 1e-9).powi(2) / TAU;
        let half_width = 0.5 * self.gamma_first;
        hf.spectator_lines
            .iter()
            .map(|s| {
                let v = (self.detuning[0] - TAU * s.offset_hz) / self.k[0];
                let doppler = std::f64::consts::PI * half_width / self.k[0].abs() * maxwell_pdf(v, self.sigma_v);
                self.n_total * s.fraction * s.relative_strength * sigma0 * doppler
                    / (1.0 + i1.max(0.0) / s.saturation_intensity).sqrt()
            })
            .sum()
    }

    /// Interpolate a per-node quantity at velocity `v`.
    fn interpolate(&self, values: &[f64], v: f64) -> f64 {
        let nodes = self.grid.nodes();
        match nodes.partition_point(|&x| x < v) {
            0 => values[0],
            i if i >= nodes.len() => values[nodes.len() - 1],
            i => {
                let t = (v - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
                values[i - 1] * (1.0 - t) + values[i] * t
            }
        }
    }
}

fn k_ir_two_photon(m: &VapourMedium) -> f64 {
    let v = (m.detuning[0] + m.detuning[1]) / (m.k[0] + m.k[1]);
    wavenumber(m.lambda[2]) * v
}

struct NodeState {
    weight: f64,
    r1: f64,
    r2: f64,
    open: f64,
    inversion: f64,
    ground: f64,
    emitter: f64,
    coherence: Complex64,
}

impl CoefficientModel for VapourMedium<'_> {
    fn coefficients(&self, i1: f64, i2: f64) -> Result<LocalCoefficients> {
        if self.n_total == 0.0 {
            return Ok(LocalCoefficients { ir_saturation: self.ir_saturation, ..Default::default() });
        }
        let profile = self.profile(i1, i2)?;
        let w = self.grid.weights();
        let avg = |f: &dyn Fn(&NodeState) -> f64| -> f64 { profile.iter().zip(w).map(|(s, &wi)| wi * s.weight * f(s)).sum() };
        let floor1 = i1.max(INTENSITY_FLOOR);
        let floor2 = i2.max(INTENSITY_FLOOR);
        let hw1 = HBAR * angular_frequency(self.lambda[0]);
        let hw2 = HBAR * angular_frequency(self.lambda[1]);
        let alpha1 = self.n_ladder * hw1 * avg(&|s| s.r1 + s.open) / floor1 + self.spectator_absorption(i1);
        let alpha2 = self.n_ladder * hw2 * avg(&|s| s.r2) / floor2;

        let inversion = avg(&|s| s.inversion);
        let g_ir = (self.n_ladder * self.sigma_ir * self.eta_ir * self.ir_gain_sum(&profile, self.delta_ir)).max(0.0);

        // narrow blue line: sample the ground and emitter populations at the
        // resonant velocity class
        let kbl = wavenumber(self.lambda[3]);
        let v_bl = self.blue_detuning() / kbl;
        let doppler = std::f64::consts::PI * self.gamma_bl / kbl * maxwell_pdf(v_bl, self.sigma_v);
        let weights: Vec<f64> = profile.iter().map(|s| s.weight).collect();
        let ground: Vec<f64> = profile.iter().map(|s| s.ground).collect();
        let emitter: Vec<f64> = profile.iter().map(|s| s.emitter).collect();
        let lower = self.interpolate(&ground, v_bl) * self.interpolate(&weights, v_bl);
        let upper = self.interpolate(&emitter, v_bl) * self.interpolate(&weights, v_bl);
        let alpha_bl = self.n_ladder * self.sigma_bl * doppler * lower;
        let g_bl = self.n_ladder * self.sigma_bl * doppler * upper;

        let coherence: Complex64 = profile.iter().zip(w).map(|(s, &wi)| s.coherence * (wi * s.weight)).sum();
        let kappa = self.options.calibration
            * self.n_ladder
            * (self.sigma_ir * self.sigma_bl).sqrt()
            * coherence.norm()
            * (self.eta_ir * self.eta_bl).sqrt();

        Ok(LocalCoefficients {
            alpha1,
            alpha2,
            alpha_bl,
            g_ir,
            g_bl,
            kappa,
            ir_saturation: self.ir_saturation,
            inversion,
            coherence: coherence.norm(),
        })
    }

    fn blue_detuning(&self) -> f64 {
        self.detuning[0] + self.detuning[1] - self.delta_ir
    }

    fn ir_detuning(&self) -> f64 {
        self.delta_ir
    }
}
