//! Physical constants (SI, CODATA 2018).

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const TAU: f64 = std::f64::consts::TAU;

/// Angular frequency (rad/s) of light with the given vacuum wavelength in nm.
pub fn angular_frequency(wavelength_nm: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)
}

/// Vacuum wavenumber (rad/m) for a wavelength in nm.
pub fn wavenumber(wavelength_nm: f64) -> f64 {
    TAU / (wavelength_nm * 1e-9)
}

pub fn celsius_to_kelvin(celsius: f64) -> f64 {
    celsius + 273.15
}

/// MHz (cyclic) to rad/s.
pub fn mhz_to_rad(mhz: f64) -> f64 {
    TAU * mhz * 1e6
}

/// rad/s to MHz (cyclic).
pub fn rad_to_mhz(rad: f64) -> f64 {
    rad / (TAU * 1e6)
}
