//! One-dimensional propagation of the two pumps and the generated IR and
//! blue fields along the cell.
//!
//! Generated fields are carried as photon-flux amplitudes `b` with
//! `|b|^2` in photons m^-2 s^-1:
//!
//! ```text
//! db_IR/dz = g_IR / (1 + I_IR/I_sat) / 2 * b_IR + kappa * conj(b_BL) * exp(i dk z)
//! db_BL/dz = (g_BL - alpha_BL) / 2 * b_BL       + kappa * conj(b_IR) * exp(i dk z)
//! dI_j/dz  = -alpha_j I_j - hbar w_j S
//! ```
//!
//! where `S` is the parametric pair-generation rate. A second, passive pair
//! with no gain and no back-coupling measures how much blue light the seed
//! alone would produce (the seed throughput).

mod curves;
mod medium;

pub use curves::{
    density_curve, detuning_optimum, log_slope, power_curve, temperature_for_density, Curve, CurvePoint,
    DetuningProfile, PowerAxis, SecondDetuning,
};
pub use medium::{
    overlap_factor, peak_cross_section, rabi_from_intensity, CoefficientModel, FixedCoefficients, LocalCoefficients,
    MediumOptions, VapourMedium, INTENSITY_FLOOR,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::{doppler_fwhm, CellConditions, LevelScheme};
use crate::constants::{angular_frequency, HBAR, TAU};
use crate::error::{Error, Result};
use crate::ode::rk4_step;

/// Output exceeding this multiple of the seed throughput counts as above
/// threshold.
pub const THRESHOLD_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Integrator {
    /// Step limited by the local coefficients.
    Adaptive { max_relative_change: f64, min_steps: usize },
    /// Equal steps; bit-reproducible.
    Fixed { steps: usize },
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Adaptive { max_relative_change: 0.05, min_steps: 50 }
    }
}

/// Inputs of one propagation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub cell: CellConditions,
    /// Input pump powers, W.
    pub power1: f64,
    pub power2: f64,
    /// Laser detunings, rad/s.
    pub detuning1: f64,
    pub detuning2: f64,
    /// IR seed field relative to the IR saturation field.
    pub seed_fraction: f64,
    /// Blue seed intensity, W/m^2.
    pub seed_blue: f64,
    /// Phase mismatch, rad/m.
    pub phase_mismatch: f64,
    pub medium: MediumOptions,
    pub integrator: Integrator,
    pub record_profiles: bool,
}

impl PropagationConfig {
    /// Focused co-propagating beams at the given cell conditions.
    pub fn new(cell: CellConditions, power1: f64, power2: f64) -> Self {
        PropagationConfig {
            cell,
            power1,
            power2,
            detuning1: 0.0,
            detuning2: 0.0,
            seed_fraction: 1e-6,
            seed_blue: 0.0,
            phase_mismatch: 0.0,
            medium: MediumOptions::default(),
            integrator: Integrator::default(),
            record_profiles: false,
        }
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.medium.spot_radius.powi(2)
    }

    fn check(&self) -> Result<()> {
        let finite = [self.power1, self.power2, self.detuning1, self.detuning2, self.seed_fraction, self.seed_blue, self.phase_mismatch];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("propagation inputs must be finite".into()));
        }
        if self.power1 < 0.0 || self.power2 < 0.0 || self.seed_fraction < 0.0 || self.seed_blue < 0.0 {
            return Err(Error::Domain("powers and seeds must be >= 0".into()));
        }
        if let Integrator::Fixed { steps: 0 } = self.integrator {
            return Err(Error::Domain("fixed integrator needs at least one step".into()));
        }
        Ok(())
    }
}

/// Field state at one position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldAmplitudes {
    pub z: f64,
    /// Pump intensities, W/m^2.
    pub i1: f64,
    pub i2: f64,
    /// Photon-flux amplitudes, (photons m^-2 s^-1)^(1/2).
    pub ir: Complex64,
    pub bl: Complex64,
}

impl FieldAmplitudes {
    pub fn intensity_ir(&self, lambda_nm: f64) -> f64 {
        HBAR * angular_frequency(lambda_nm) * self.ir.norm_sqr()
    }

    pub fn intensity_bl(&self, lambda_nm: f64) -> f64 {
        HBAR * angular_frequency(lambda_nm) * self.bl.norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        [self.i1, self.i2, self.ir.re, self.ir.im, self.bl.re, self.bl.im].iter().all(|x| x.is_finite())
    }
}

/// One recorded position; intensities in W/m^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub z: f64,
    pub i1: f64,
    pub i2: f64,
    pub i_ir: f64,
    pub i_bl: f64,
    pub inversion: f64,
    pub coherence: f64,
    pub g_ir: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    pub profile: Vec<ProfilePoint>,
    pub output: FieldAmplitudes,
    /// Blue output power, W.
    pub output_power: f64,
    /// Blue power produced by the unamplified seed, W.
    pub seed_throughput: f64,
    pub ir_power: f64,
    /// Detunings of the generated fields from their zero-velocity lines, rad/s.
    pub ir_detuning: f64,
    pub blue_detuning: f64,
    pub steps: usize,
}

impl PropagationResult {
    pub fn above_threshold(&self) -> bool {
        self.output_power > THRESHOLD_FACTOR * self.seed_throughput
    }
}

const STATE: usize = 10;

fn derivative(c: &LocalCoefficients, hw: [f64; 4], dk: f64, z: f64, y: &[f64], dy: &mut [f64]) {
    let ir = Complex64::new(y[2], y[3]);
    let bl = Complex64::new(y[4], y[5]);
    let ir_p = Complex64::new(y[6], y[7]);
    let bl_p = Complex64::new(y[8], y[9]);
    let phase = Complex64::from_polar(1.0, dk * z);
    let i_ir = hw[2] * ir.norm_sqr();
    let g_ir = c.g_ir / (1.0 + i_ir / c.ir_saturation);
    let d_ir = 0.5 * g_ir * ir + c.kappa * bl.conj() * phase;
    let d_bl = 0.5 * (c.g_bl - c.alpha_bl) * bl + c.kappa * ir.conj() * phase;
    let d_bl_p = -0.5 * c.alpha_bl * bl_p + c.kappa * ir_p.conj() * phase;
    let pairs = 2.0 * (c.kappa * (ir * bl * phase.conj()).conj()).re;
    dy[0] = -c.alpha1 * y[0] - hw[0] * pairs;
    dy[1] = -c.alpha2 * y[1] - hw[1] * pairs;
    dy[2] = d_ir.re;
    dy[3] = d_ir.im;
    dy[4] = d_bl.re;
    dy[5] = d_bl.im;
    dy[6] = 0.0;
    dy[7] = 0.0;
    dy[8] = d_bl_p.re;
    dy[9] = d_bl_p.im;
}

/// Integrate the coupled equations through the cell for any coefficient
/// model. Wavelengths are those of the diamond in `scheme`.
pub fn propagate_with<M: CoefficientModel>(scheme: &LevelScheme, model: &M, config: &PropagationConfig) -> Result<PropagationResult> {
    config.check()?;
    let lambda = scheme.diamond_wavelengths()?;
    let hw = lambda.map(|l| HBAR * angular_frequency(l));
    let area = config.area();
    let length = config.cell.length;

    let c0 = model.coefficients(config.power1 / area, config.power2 / area).map_err(|e| at(0.0, e))?;
    let seed_ir = if c0.ir_saturation.is_finite() {
        config.seed_fraction * (c0.ir_saturation / hw[2]).sqrt()
    } else {
        0.0
    };
    let seed_bl = (config.seed_blue / hw[3]).sqrt();
    let mut y = [config.power1 / area, config.power2 / area, seed_ir, 0.0, seed_bl, 0.0, seed_ir, 0.0, 0.0, 0.0];
    let mut z = 0.0;
    let mut steps = 0;
    let mut profile = Vec::new();
    let mut coeff = c0;
    let record = |z: f64, y: &[f64; STATE], c: &LocalCoefficients, out: &mut Vec<ProfilePoint>| {
        out.push(ProfilePoint {
            z,
            i1: y[0],
            i2: y[1],
            i_ir: hw[2] * (y[2] * y[2] + y[3] * y[3]),
            i_bl: hw[3] * (y[4] * y[4] + y[5] * y[5]),
            inversion: c.inversion,
            coherence: c.coherence,
            g_ir: c.g_ir,
            kappa: c.kappa,
        })
    };
    if config.record_profiles {
        record(z, &y, &coeff, &mut profile);
    }
    while z < length * (1.0 - 1e-12) {
        let remaining = length - z;
        let h = match config.integrator {
            Integrator::Fixed { steps } => (length / steps as f64).min(remaining),
            Integrator::Adaptive { max_relative_change, min_steps } => {
                let hmax = length / min_steps as f64;
                let mut rate: f64 = 0.0;
                for (alpha, i, i0) in [(coeff.alpha1, y[0], config.power1 / area), (coeff.alpha2, y[1], config.power2 / area)] {
                    if i > 1e-6 * i0 {
                        rate = rate.max(alpha);
                    }
                }
                rate = rate.max(coeff.g_ir).max(2.0 * coeff.kappa).max(coeff.alpha_bl).max(coeff.g_bl);
                let h = if rate > 0.0 { max_relative_change / rate } else { hmax };
                h.clamp(length * 1e-6, hmax).min(remaining)
            }
        };
        let frozen = coeff;
        rk4_step(|zz, yy, dy| derivative(&frozen, hw, config.phase_mismatch, zz, yy, dy), z, &mut y, h);
        y[0] = y[0].max(0.0);
        y[1] = y[1].max(0.0);
        z += h;
        steps += 1;
        if y.iter().any(|x| !x.is_finite()) {
            return Err(at(z, Error::Domain("field amplitudes diverged".into())));
        }
        coeff = model.coefficients(y[0], y[1]).map_err(|e| at(z, e))?;
        if config.record_profiles {
            record(z, &y, &coeff, &mut profile);
        }
    }
    let output = FieldAmplitudes {
        z: length,
        i1: y[0],
        i2: y[1],
        ir: Complex64::new(y[2], y[3]),
        bl: Complex64::new(y[4], y[5]),
    };
    let passive = Complex64::new(y[8], y[9]);
    Ok(PropagationResult {
        profile,
        output,
        output_power: hw[3] * output.bl.norm_sqr() * area,
        seed_throughput: hw[3] * passive.norm_sqr() * area,
        ir_power: hw[2] * output.ir.norm_sqr() * area,
        ir_detuning: model.ir_detuning(),
        blue_detuning: model.blue_detuning(),
        steps,
    })
}

fn at(z: f64, source: Error) -> Error {
    Error::Propagation { z, source: Box::new(source) }
}

/// Propagate through the physical vapour model.
pub fn propagate(scheme: &LevelScheme, config: &PropagationConfig) -> Result<PropagationResult> {
    let mut medium = VapourMedium::new(scheme, &config.cell, [config.detuning1, config.detuning2], config.medium)?;
    let area = config.area();
    medium.lock_ir_frequency(config.power1 / area, config.power2 / area).map_err(|e| at(0.0, e))?;
    propagate_with(scheme, &medium, config)
}

/// |blue detuning| relative to the Doppler width (FWHM) of the blue line.
pub fn blue_within_doppler(scheme: &LevelScheme, result: &PropagationResult, temperature: f64) -> Result<f64> {
    let lambda = scheme.diamond_wavelengths()?;
    let width = doppler_fwhm(lambda[3], temperature, scheme.mass_amu)?;
    Ok((result.blue_detuning / TAU).abs() / width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::get_scheme;

    fn fixed(c: LocalCoefficients, length: f64, seed_blue: f64) -> (LevelScheme, FixedCoefficients, PropagationConfig) {
        let s = get_scheme("rb85-blue").unwrap();
        let cell = CellConditions::new(333.0, length).unwrap();
        let mut cfg = PropagationConfig::new(cell, 1e-4, 1e-4);
        cfg.seed_blue = seed_blue;
        cfg.integrator = Integrator::Fixed { steps: 400 };
        (s, FixedCoefficients(c), cfg)
    }

    #[test]
    fn no_seed_no_coupling_no_blue() {
        let c = LocalCoefficients { g_ir: 50.0, ir_saturation: 1.0, ..Default::default() };
        let (s, m, mut cfg) = fixed(c, 0.05, 0.0);
        cfg.seed_fraction = 0.0;
        let r = propagate_with(&s, &m, &cfg).unwrap();
        assert_eq!(r.output_power, 0.0);
    }

    #[test]
    fn linear_gain_doubles_exponent() {
        let g = 30.0;
        let c = LocalCoefficients { g_bl: g, ir_saturation: f64::INFINITY, ..Default::default() };
        let (s, m, cfg) = fixed(c, 0.05, 1e-3);
        let short = propagate_with(&s, &m, &cfg).unwrap();
        let mut long_cfg = cfg.clone();
        long_cfg.cell = CellConditions::new(333.0, 0.1).unwrap();
        let long = propagate_with(&s, &m, &long_cfg).unwrap();
        let ratio = long.output_power / short.output_power;
        assert!((ratio / (g * 0.05).exp() - 1.0).abs() < 1e-6, "{ratio}");
    }

    #[test]
    fn absorption_only_is_non_increasing() {
        let c = LocalCoefficients { alpha1: 20.0, alpha2: 5.0, alpha_bl: 3.0, ir_saturation: 1.0, ..Default::default() };
        let (s, m, mut cfg) = fixed(c, 0.05, 1e-3);
        cfg.record_profiles = true;
        let r = propagate_with(&s, &m, &cfg).unwrap();
        for w in r.profile.windows(2) {
            assert!(w[1].i1 <= w[0].i1 && w[1].i2 <= w[0].i2 && w[1].i_bl <= w[0].i_bl && w[1].i_ir <= w[0].i_ir);
        }
        assert!((r.output.i1 / (1e-4 / cfg.area()) - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn parametric_coupling_conserves_pairs() {
        let c = LocalCoefficients { kappa: 20.0, ir_saturation: 100.0, ..Default::default() };
        let (s, m, mut cfg) = fixed(c, 0.05, 0.0);
        cfg.seed_fraction = 1.0;
        cfg.record_profiles = true;
        cfg.integrator = Integrator::Fixed { steps: 2000 };
        let r = propagate_with(&s, &m, &cfg).unwrap();
        let lambda = s.diamond_wavelengths().unwrap();
        let hw = lambda.map(|l| HBAR * angular_frequency(l));
        // Manley-Rowe: IR photons gained = blue photons gained
        let first = r.profile.first().unwrap();
        let last = r.profile.last().unwrap();
        let d_ir = (last.i_ir - first.i_ir) / hw[2];
        let d_bl = (last.i_bl - first.i_bl) / hw[3];
        assert!((d_ir / d_bl - 1.0).abs() < 1e-6);
        let d1 = (first.i1 - last.i1) / hw[0];
        assert!((d1 / d_bl - 1.0).abs() < 1e-6);
        assert!(r.seed_throughput > 0.0 && r.output_power > r.seed_throughput);
    }

    #[test]
    fn fixed_steps_are_reproducible() {
        let c = LocalCoefficients { g_ir: 40.0, kappa: 5.0, alpha1: 3.0, ir_saturation: 1e-3, ..Default::default() };
        let (s, m, cfg) = fixed(c, 0.05, 0.0);
        let a = propagate_with(&s, &m, &cfg).unwrap();
        let b = propagate_with(&s, &m, &cfg).unwrap();
        assert_eq!(a.output_power.to_bits(), b.output_power.to_bits());
    }
}
