//! Atomic data: level-scheme registry, vapour density and Doppler widths,
//! wavelength bookkeeping.

mod scheme;

pub use scheme::{
    linewidth_hz, DecayChannel, Diamond, DriveTransition, Hyperfine, Level, LevelScheme, OpenLine,
    SpectatorLine, WAVELENGTH_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::constants::{ATOMIC_MASS_UNIT, BOLTZMANN, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Validity window of the vapour-pressure law, K.
pub const DENSITY_RANGE_K: (f64, f64) = (250.0, 500.0);

/// Killian vapour-pressure constants: log10(p / dyn cm^-2) = A - B / T.
const KILLIAN_A: f64 = 10.55;
const KILLIAN_B: f64 = 4132.0;

/// Saturated Rb vapour pressure in Pa.
pub fn vapor_pressure(temperature: f64) -> Result<f64> {
    let (lo, hi) = DENSITY_RANGE_K;
    if !(lo..=hi).contains(&temperature) {
        return Err(Error::Domain(format!(
            "temperature {temperature} K outside the vapour-pressure validity window [{lo}, {hi}] K"
        )));
    }
    // 1 dyn/cm^2 = 0.1 Pa
    Ok(0.1 * 10f64.powf(KILLIAN_A - KILLIAN_B / temperature))
}

/// Number density of saturated Rb vapour, cm^-3.
pub fn vapor_number_density(temperature: f64) -> Result<f64> {
    let p = vapor_pressure(temperature)?;
    Ok(p / (BOLTZMANN * temperature) * 1e-6)
}

/// Thermal one-dimensional velocity spread sqrt(kT/m), m/s.
pub fn thermal_velocity(temperature: f64, mass_amu: f64) -> f64 {
    (BOLTZMANN * temperature / (mass_amu * ATOMIC_MASS_UNIT)).sqrt()
}

/// Doppler FWHM in Hz of a line at `wavelength_nm`.
pub fn doppler_fwhm(wavelength_nm: f64, temperature: f64, mass_amu: f64) -> Result<f64> {
    if !(wavelength_nm > 0.0 && temperature > 0.0 && mass_amu > 0.0) {
        return Err(Error::Domain(format!(
            "doppler width needs positive inputs (wavelength {wavelength_nm} nm, T {temperature} K, mass {mass_amu} u)"
        )));
    }
    let nu0 = SPEED_OF_LIGHT / (wavelength_nm * 1e-9);
    let v = (8.0 * std::f64::consts::LN_2 * BOLTZMANN * temperature / (mass_amu * ATOMIC_MASS_UNIT))
        .sqrt();
    Ok(nu0 / SPEED_OF_LIGHT * v)
}

/// Wavelength closing the four-photon energy budget:
/// 1/out = 1/first + 1/second - 1/idler.
pub fn closure_wavelength(first_nm: f64, second_nm: f64, idler_nm: f64) -> Result<f64> {
    if !(first_nm > 0.0 && second_nm > 0.0 && idler_nm > 0.0) {
        return Err(Error::Domain("closure wavelengths must be positive".into()));
    }
    let inv = 1.0 / first_nm + 1.0 / second_nm - 1.0 / idler_nm;
    if !(inv > 0.0) || !inv.is_finite() {
        return Err(Error::Domain(format!(
            "no positive-frequency solution for ({first_nm}, {second_nm}, {idler_nm}) nm"
        )));
    }
    Ok(1.0 / inv)
}

const BUNDLED: &[(&str, &str)] = &[
    ("rb85-blue", include_str!("../../schemes/rb85-blue.toml")),
    ("rb85-blue-d32", include_str!("../../schemes/rb85-blue-d32.toml")),
    ("rb-uv", include_str!("../../schemes/rb-uv.toml")),
];

/// Names of the compiled-in schemes.
pub fn scheme_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// Look up a bundled scheme by name.
pub fn get_scheme(name: &str) -> Result<LevelScheme> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownScheme(name.to_string()))?;
    LevelScheme::from_toml_str(text)
}

/// Vapour cell: temperature, length and (optionally overridden) density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConditions {
    /// K
    pub temperature: f64,
    /// m
    pub length: f64,
    density: f64,
    overridden: bool,
}

impl CellConditions {
    pub fn new(temperature: f64, length: f64) -> Result<Self> {
        Self::check(temperature, length)?;
        Ok(Self { temperature, length, density: vapor_number_density(temperature)?, overridden: false })
    }

    /// Cell with an explicitly supplied number density (cm^-3).
    pub fn with_density(temperature: f64, length: f64, density: f64) -> Result<Self> {
        Self::check(temperature, length)?;
        if !(density >= 0.0) || !density.is_finite() {
            return Err(Error::Domain(format!("density override {density} cm^-3 must be >= 0")));
        }
        Ok(Self { temperature, length, density, overridden: true })
    }

    fn check(temperature: f64, length: f64) -> Result<()> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::Domain(format!("cell temperature {temperature} K must be > 0")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Domain(format!("cell length {length} m must be > 0")));
        }
        Ok(())
    }

    /// Number density, cm^-3.
    pub fn density(&self) -> f64 {
        self.density
    }

    /// Number density, m^-3.
    pub fn density_si(&self) -> f64 {
        self.density * 1e6
    }

    pub fn is_overridden(&self) -> bool {
        self.overridden
    }
}
