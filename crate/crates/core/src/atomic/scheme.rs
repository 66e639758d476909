//! Level schemes: levels, driven transitions, radiative decay channels and
//! the hyperfine metadata used as detuning landmarks.

use serde::{Deserialize, Serialize};

use crate::constants::{SPEED_OF_LIGHT, TAU};
use crate::error::{Error, Result};

/// Relative tolerance for wavelength bookkeeping checks.
pub const WAVELENGTH_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub id: String,
    /// Energy above the ground level, Hz.
    pub energy_hz: f64,
    /// Total radiative decay rate, rad/s.
    pub decay_rate: f64,
    /// Free-form quantum labels (J, F, ...).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub quantum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayChannel {
    pub from: String,
    pub to: String,
    pub branching: f64,
    pub wavelength_nm: f64,
}

/// A laser-driven transition of the scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveTransition {
    pub lower: String,
    pub upper: String,
    pub wavelength_nm: f64,
    /// Einstein A coefficient (rad/s) setting the dipole strength. When
    /// absent it is taken from the matching decay channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub einstein_a: Option<f64>,
}

/// Roles of the four levels closing the diamond
/// ground -> intermediate -> upper -> emitter -> ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diamond {
    pub ground: String,
    pub intermediate: String,
    pub upper: String,
    pub emitter: String,
}

/// A hyperfine line of the first drive that is not part of the modelled
/// ladder but shares its ground manifold. Atoms resonant with it are
/// optically pumped out of the ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenLine {
    pub label: String,
    /// Offset from the ladder's first-drive resonance, Hz.
    pub offset_hz: f64,
    /// Line strength relative to the ladder transition.
    pub relative_strength: f64,
    /// Probability that a decay from the open upper level leaves the manifold.
    pub loss_branching: f64,
}

/// Doppler-broadened absorber on the first-drive wavelength belonging to a
/// different ground manifold. Only its linear (saturable) absorption is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectatorLine {
    pub label: String,
    pub offset_hz: f64,
    /// Fraction of the total number density in the absorbing manifold.
    pub fraction: f64,
    /// Line strength relative to the ladder transition.
    pub relative_strength: f64,
    /// Effective saturation intensity, W/m^2.
    pub saturation_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperfine {
    pub ground_splitting_hz: f64,
    /// Fraction of the total number density in the ladder's ground manifold.
    pub ladder_fraction: f64,
    /// Intermediate-level hyperfine intervals, Hz from the ladder's F'.
    #[serde(default)]
    pub intermediate_offsets_hz: Vec<f64>,
    #[serde(default)]
    pub open_lines: Vec<OpenLine>,
    #[serde(default)]
    pub spectator_lines: Vec<SpectatorLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelScheme {
    pub name: String,
    pub mass_amu: f64,
    pub levels: Vec<Level>,
    pub drives: Vec<DriveTransition>,
    #[serde(default)]
    pub decays: Vec<DecayChannel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diamond: Option<Diamond>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperfine: Option<Hyperfine>,
}

fn relative_mismatch(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

impl LevelScheme {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scheme: LevelScheme =
            toml::from_str(text).map_err(|e| Error::Config(format!("scheme file: {e}")))?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise scheme: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// A bare two-level atom, handy for calibrating the solvers.
    pub fn two_level(wavelength_nm: f64, decay_rate: f64) -> Self {
        let energy = SPEED_OF_LIGHT / (wavelength_nm * 1e-9);
        LevelScheme {
            name: "two-level".into(),
            mass_amu: 85.0,
            levels: vec![
                Level { id: "g".into(), energy_hz: 0.0, decay_rate: 0.0, quantum: String::new() },
                Level { id: "e".into(), energy_hz: energy, decay_rate, quantum: String::new() },
            ],
            drives: vec![DriveTransition {
                lower: "g".into(),
                upper: "e".into(),
                wavelength_nm,
                einstein_a: Some(decay_rate.max(f64::MIN_POSITIVE)),
            }],
            decays: vec![DecayChannel {
                from: "e".into(),
                to: "g".into(),
                branching: 1.0,
                wavelength_nm,
            }],
            diamond: None,
            hyperfine: None,
        }
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidScheme { scheme: self.name.clone(), reason: reason.into() }
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| self.invalid(format!("unknown level `{id}`")))
    }

    pub fn level(&self, id: &str) -> Result<&Level> {
        Ok(&self.levels[self.index_of(id)?])
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// Index of the lowest level.
    pub fn ground_index(&self) -> usize {
        self.levels
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.energy_hz.total_cmp(&b.1.energy_hz))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Wavelength (nm) implied by the energy difference of two levels.
    pub fn transition_wavelength_nm(&self, a: &str, b: &str) -> Result<f64> {
        let de = (self.level(a)?.energy_hz - self.level(b)?.energy_hz).abs();
        if de <= 0.0 {
            return Err(self.invalid(format!("levels `{a}` and `{b}` are degenerate")));
        }
        Ok(SPEED_OF_LIGHT / de * 1e9)
    }

    pub fn drive(&self, lower: &str, upper: &str) -> Option<&DriveTransition> {
        self.drives.iter().find(|d| d.lower == lower && d.upper == upper)
    }

    pub fn decay(&self, from: &str, to: &str) -> Option<&DecayChannel> {
        self.decays.iter().find(|d| d.from == from && d.to == to)
    }

    /// Einstein A coefficient (rad/s) of a drive transition.
    pub fn drive_einstein_a(&self, drive: &DriveTransition) -> Result<f64> {
        if let Some(a) = drive.einstein_a {
            return Ok(a);
        }
        let channel = self.decay(&drive.upper, &drive.lower).ok_or_else(|| {
            self.invalid(format!(
                "drive {} -> {} has neither an einstein_a nor a decay channel",
                drive.lower, drive.upper
            ))
        })?;
        Ok(self.level(&drive.upper)?.decay_rate * channel.branching)
    }

    /// Partial decay rate (rad/s) along a listed channel, zero if absent.
    pub fn channel_rate(&self, from: &str, to: &str) -> f64 {
        match (self.decay(from, to), self.level(from)) {
            (Some(c), Ok(l)) => l.decay_rate * c.branching,
            _ => 0.0,
        }
    }

    /// Check every structural and bookkeeping invariant.
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(self.invalid("no levels"));
        }
        if !(self.mass_amu > 0.0) {
            return Err(self.invalid("mass must be positive"));
        }
        for (i, l) in self.levels.iter().enumerate() {
            if self.levels[..i].iter().any(|o| o.id == l.id) {
                return Err(self.invalid(format!("duplicate level `{}`", l.id)));
            }
            if !l.energy_hz.is_finite() || l.energy_hz < 0.0 {
                return Err(self.invalid(format!("level `{}` has invalid energy", l.id)));
            }
            if !l.decay_rate.is_finite() || l.decay_rate < 0.0 {
                return Err(self.invalid(format!("level `{}` has negative decay rate", l.id)));
            }
        }
        let ground = &self.levels[self.ground_index()];
        if ground.energy_hz != 0.0 {
            return Err(self.invalid("ground level energy must be 0"));
        }
        if ground.decay_rate != 0.0 {
            return Err(self.invalid("ground level must not decay"));
        }

        for d in &self.drives {
            let lo = self.level(&d.lower)?;
            let up = self.level(&d.upper)?;
            if up.energy_hz <= lo.energy_hz {
                return Err(self.invalid(format!("drive {} -> {} is not upward", d.lower, d.upper)));
            }
            let implied = self.transition_wavelength_nm(&d.lower, &d.upper)?;
            if relative_mismatch(d.wavelength_nm, implied) > WAVELENGTH_TOLERANCE {
                return Err(self.invalid(format!(
                    "drive {} -> {} wavelength {} nm disagrees with level energies ({implied:.4} nm)",
                    d.lower, d.upper, d.wavelength_nm
                )));
            }
            self.drive_einstein_a(d)?;
        }
        for (i, d) in self.drives.iter().enumerate() {
            if self.drives[..i].iter().any(|o| o.lower == d.lower && o.upper == d.upper) {
                return Err(self.invalid(format!("duplicate drive {} -> {}", d.lower, d.upper)));
            }
        }

        for c in &self.decays {
            let from = self.level(&c.from)?;
            let to = self.level(&c.to)?;
            if !(0.0..=1.0).contains(&c.branching) {
                return Err(self.invalid(format!("branching {} -> {} outside [0, 1]", c.from, c.to)));
            }
            if to.energy_hz >= from.energy_hz {
                return Err(self.invalid(format!("decay {} -> {} is not downward", c.from, c.to)));
            }
            let implied = self.transition_wavelength_nm(&c.from, &c.to)?;
            if relative_mismatch(c.wavelength_nm, implied) > WAVELENGTH_TOLERANCE {
                return Err(self.invalid(format!(
                    "decay {} -> {} wavelength {} nm disagrees with level energies ({implied:.4} nm)",
                    c.from, c.to, c.wavelength_nm
                )));
            }
        }
        for l in &self.levels {
            let total: f64 = self.decays.iter().filter(|c| c.from == l.id).map(|c| c.branching).sum();
            if total > 1.0 + 1e-12 {
                return Err(self.invalid(format!("branchings out of `{}` sum to {total}", l.id)));
            }
        }

        if let Some(d) = &self.diamond {
            self.check_diamond(d)?;
        }
        if let Some(h) = &self.hyperfine {
            if !(0.0..=1.0).contains(&h.ladder_fraction) {
                return Err(self.invalid("ladder_fraction outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn check_diamond(&self, d: &Diamond) -> Result<()> {
        let first = self
            .drive(&d.ground, &d.intermediate)
            .ok_or_else(|| self.invalid("diamond first step is not a drive transition"))?;
        let second = self
            .drive(&d.intermediate, &d.upper)
            .ok_or_else(|| self.invalid("diamond second step is not a drive transition"))?;
        let ir = self
            .decay(&d.upper, &d.emitter)
            .ok_or_else(|| self.invalid("diamond upper -> emitter decay channel missing"))?;
        let bl = self
            .decay(&d.emitter, &d.ground)
            .ok_or_else(|| self.invalid("diamond emitter -> ground decay channel missing"))?;
        let pumped = 1.0 / first.wavelength_nm + 1.0 / second.wavelength_nm;
        let emitted = 1.0 / ir.wavelength_nm + 1.0 / bl.wavelength_nm;
        if relative_mismatch(emitted, pumped) > WAVELENGTH_TOLERANCE {
            return Err(self.invalid(format!(
                "diamond does not close: pump {pumped:.6e} vs emitted {emitted:.6e} nm^-1"
            )));
        }
        Ok(())
    }

    /// Diamond level indices (ground, intermediate, upper, emitter).
    pub fn diamond_indices(&self) -> Result<[usize; 4]> {
        let d = self.diamond.as_ref().ok_or_else(|| self.invalid("scheme has no diamond"))?;
        Ok([
            self.index_of(&d.ground)?,
            self.index_of(&d.intermediate)?,
            self.index_of(&d.upper)?,
            self.index_of(&d.emitter)?,
        ])
    }

    /// Wavelengths (nm) of the diamond: first drive, second drive, IR, blue.
    pub fn diamond_wavelengths(&self) -> Result<[f64; 4]> {
        let d = self.diamond.as_ref().ok_or_else(|| self.invalid("scheme has no diamond"))?;
        let w1 = self.drive(&d.ground, &d.intermediate).map(|t| t.wavelength_nm);
        let w2 = self.drive(&d.intermediate, &d.upper).map(|t| t.wavelength_nm);
        let ir = self.decay(&d.upper, &d.emitter).map(|c| c.wavelength_nm);
        let bl = self.decay(&d.emitter, &d.ground).map(|c| c.wavelength_nm);
        match (w1, w2, ir, bl) {
            (Some(a), Some(b), Some(c), Some(e)) => Ok([a, b, c, e]),
            _ => Err(self.invalid("incomplete diamond")),
        }
    }

    /// Coherence decay rate between two levels from radiative widths, rad/s.
    pub fn coherence_decay(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.levels[i].decay_rate + self.levels[j].decay_rate)
    }

    /// Longest finite lifetime among decaying levels, s.
    pub fn max_lifetime(&self) -> Option<f64> {
        self.levels
            .iter()
            .filter(|l| l.decay_rate > 0.0)
            .map(|l| 1.0 / l.decay_rate)
            .max_by(f64::total_cmp)
    }

    /// Copy with every level's decay rate scaled, branchings untouched.
    pub fn with_scaled_decay(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for l in &mut s.levels {
            l.decay_rate *= factor;
        }
        for d in &mut s.drives {
            if let Some(a) = d.einstein_a.as_mut() {
                *a *= factor;
            }
        }
        s
    }
}

/// Natural linewidth (Hz, FWHM) for a decay rate in rad/s.
pub fn linewidth_hz(decay_rate: f64) -> f64 {
    decay_rate / TAU
}
