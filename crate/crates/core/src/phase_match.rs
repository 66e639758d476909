//! Planar vector phase matching for `k1 + k2 = k_IR + k_BL`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::{wavenumber, TAU};
use crate::error::{Error, Result};

const DIRECTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveVector {
    pub label: String,
    /// rad/m
    pub magnitude: f64,
    pub direction: Vector3<f64>,
}

impl WaveVector {
    pub fn new(label: impl Into<String>, magnitude: f64, direction: Vector3<f64>) -> Result<Self> {
        if !(magnitude > 0.0) || !magnitude.is_finite() {
            return Err(Error::Domain(format!("wave vector magnitude {magnitude} must be positive")));
        }
        if (direction.norm() - 1.0).abs() > DIRECTION_TOLERANCE {
            return Err(Error::Domain(format!("direction has norm {}, expected 1", direction.norm())));
        }
        Ok(WaveVector { label: label.into(), magnitude, direction })
    }

    /// `2 pi n / lambda` along `direction` (normalised here).
    pub fn from_wavelength(label: impl Into<String>, wavelength_nm: f64, index: f64, direction: Vector3<f64>) -> Result<Self> {
        if !(wavelength_nm > 0.0) || !(index > 0.0) {
            return Err(Error::Domain("wavelength and index must be positive".into()));
        }
        let norm = direction.norm();
        if !(norm > 0.0) {
            return Err(Error::Domain("direction must be non-zero".into()));
        }
        Self::new(label, index * wavenumber(wavelength_nm), direction / norm)
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.direction * self.magnitude
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// Both generated fields forward of the pump plane normal.
    #[serde(rename = "co")]
    Co,
    /// Infrared emitted against the summed pump wave vector.
    #[serde(rename = "counter")]
    Counter,
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "co" => Ok(Branch::Co),
            "counter" => Ok(Branch::Counter),
            other => Err(Error::Domain(format!("unknown branch `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchSolution {
    pub k1: WaveVector,
    pub k2: WaveVector,
    pub k_ir: WaveVector,
    pub k_bl: WaveVector,
    /// `k1 + k2 - k_IR - k_BL`, rad/m.
    pub residual: Vector3<f64>,
    /// Signed emission angles from the pump bisector, rad, in (-pi, pi].
    pub angle_ir: f64,
    pub angle_bl: f64,
    pub branch: Branch,
    /// Unit normal of the working plane used to sign the angles.
    pub normal: Vector3<f64>,
    bisector: Vector3<f64>,
}

impl PhaseMatchSolution {
    pub fn mismatch(&self) -> f64 {
        self.residual.norm()
    }

    pub fn recompute_residual(&self) -> Vector3<f64> {
        self.k1.vector() + self.k2.vector() - self.k_ir.vector() - self.k_bl.vector()
    }

    pub fn bisector(&self) -> Vector3<f64> {
        self.bisector
    }

    /// Signed angle of `direction` from the bisector about the plane normal.
    pub fn angle_of(&self, direction: &Vector3<f64>) -> f64 {
        signed_angle(&self.bisector, direction, &self.normal)
    }

    pub fn pump_angles(&self) -> (f64, f64) {
        (self.angle_of(&self.k1.direction), self.angle_of(&self.k2.direction))
    }
}

fn signed_angle(from: &Vector3<f64>, to: &Vector3<f64>, normal: &Vector3<f64>) -> f64 {
    let a = normal.dot(&from.cross(to)).atan2(from.dot(to));
    if a <= -std::f64::consts::PI {
        a + TAU
    } else {
        a
    }
}

fn any_perpendicular(v: &Vector3<f64>) -> Vector3<f64> {
    let trial = if v.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    (trial - v * v.dot(&trial)).normalize()
}

/// Solve for in-plane directions of the generated fields with fixed
/// magnitudes that minimise `|Delta k|`.
///
/// Infeasible magnitudes never fail: the closest configuration is returned
/// and its residual is the diagnostic.
pub fn solve_planar(k1: &WaveVector, k2: &WaveVector, k_ir: f64, k_bl: f64, branch: Branch) -> Result<PhaseMatchSolution> {
    if !(k_ir > 0.0) || !(k_bl > 0.0) || !k_ir.is_finite() || !k_bl.is_finite() {
        return Err(Error::Domain("generated wave-vector magnitudes must be positive".into()));
    }
    let cross = k1.direction.cross(&k2.direction);
    let normal = if cross.norm() > 1e-14 { cross.normalize() } else { k1.direction.cross(&any_perpendicular(&k1.direction)) };
    let sum = k1.vector() + k2.vector();
    let big_k = sum.norm();
    let ex = if big_k > 0.0 { sum / big_k } else { k1.direction };
    let ey = normal.cross(&ex);
    let bis = k1.direction + k2.direction;
    let bisector = if bis.norm() > 1e-14 { bis.normalize() } else { ex };

    let (alpha, beta) = match branch {
        Branch::Co => co_angles(big_k, k_bl, k_ir),
        Branch::Counter => (0.0, std::f64::consts::PI),
    };
    let dir = |a: f64| ex * a.cos() + ey * a.sin();
    let k_bl_vec = WaveVector::new("BL", k_bl, dir(alpha).normalize())?;
    let k_ir_vec = WaveVector::new("IR", k_ir, dir(beta).normalize())?;
    let residual = sum - k_ir_vec.vector() - k_bl_vec.vector();
    let angle_bl = signed_angle(&bisector, &k_bl_vec.direction, &normal);
    let angle_ir = signed_angle(&bisector, &k_ir_vec.direction, &normal);
    Ok(PhaseMatchSolution {
        k1: k1.clone(),
        k2: k2.clone(),
        k_ir: k_ir_vec,
        k_bl: k_bl_vec,
        residual,
        angle_ir,
        angle_bl,
        branch,
        normal,
        bisector,
    })
}

/// Angles of `k_BL` (alpha) and `k_IR` (beta) from the summed pump vector,
/// both restricted to the forward half plane.
fn co_angles(big_k: f64, a: f64, b: f64) -> (f64, f64) {
    if big_k >= a + b {
        return (0.0, 0.0);
    }
    if big_k >= (a - b).abs() {
        let ca = ((big_k * big_k + a * a - b * b) / (2.0 * big_k * a)).clamp(-1.0, 1.0);
        let cb = ((big_k * big_k + b * b - a * a) / (2.0 * big_k * b)).clamp(-1.0, 1.0);
        if ca >= 0.0 && cb >= 0.0 {
            return (ca.acos(), -cb.acos());
        }
    }
    constrained_minimum(big_k, a, b)
}

/// Residual-minimising angles over the forward half plane: for each alpha
/// the best beta is explicit, leaving a 1-D search.
fn constrained_minimum(big_k: f64, a: f64, b: f64) -> (f64, f64) {
    let half = std::f64::consts::FRAC_PI_2;
    let best_beta = |alpha: f64| {
        let rx = big_k - a * alpha.cos();
        let ry = -a * alpha.sin();
        ry.atan2(rx).clamp(-half, half)
    };
    let cost = |alpha: f64| {
        let beta = best_beta(alpha);
        let rx = big_k - a * alpha.cos() - b * beta.cos();
        let ry = -a * alpha.sin() - b * beta.sin();
        rx * rx + ry * ry
    };
    let n = 2000;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=n {
        let alpha = -half + std::f64::consts::PI * i as f64 / n as f64;
        let c = cost(alpha);
        if c < best.0 {
            best = (c, alpha);
        }
    }
    // golden-section refinement around the best grid point
    let h = std::f64::consts::PI / n as f64;
    let (mut lo, mut hi) = ((best.1 - h).max(-half), (best.1 + h).min(half));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if cost(x1) < cost(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let mut alpha = 0.5 * (lo + hi);
    if cost(alpha) > best.0 {
        alpha = best.1;
    }
    // prefer the BL on the positive side of the plane
    if alpha < 0.0 && (cost(-alpha) - cost(alpha)).abs() <= 1e-15 * big_k * big_k {
        alpha = -alpha;
    }
    (alpha, best_beta(alpha))
}

/// One field of a collinear co-propagating configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollinearField {
    pub wavelength_nm: f64,
    pub index: f64,
    /// True for the generated fields (IR, BL), false for the pumps.
    pub generated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexSolution {
    pub index: f64,
    pub deviation: f64,
}

/// Refractive index of the free field that closes the collinear budget
/// `k1 + k2 = k_IR + k_BL` given the other three fields.
pub fn compensating_index(others: &[CollinearField; 3], free_wavelength_nm: f64, free_generated: bool) -> Result<IndexSolution> {
    if !(free_wavelength_nm > 0.0) || others.iter().any(|f| !(f.wavelength_nm > 0.0) || !(f.index > 0.0)) {
        return Err(Error::Domain("wavelengths and indices must be positive".into()));
    }
    if others.iter().filter(|f| f.generated).count() + usize::from(free_generated) != 2 {
        return Err(Error::Domain("need exactly two pumps and two generated fields".into()));
    }
    let budget: f64 = others
        .iter()
        .map(|f| {
            let k = f.index / f.wavelength_nm;
            if f.generated == free_generated { -k } else { k }
        })
        .sum();
    let index = budget * free_wavelength_nm;
    if !(index > 0.0) {
        return Err(Error::Infeasible(format!("required index {index} is not positive")));
    }
    Ok(IndexSolution { index, deviation: index - 1.0 })
}

/// Transverse offsets, m, after `distance` along the bisector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamOffsets {
    pub k1: f64,
    pub k2: f64,
    pub ir: f64,
    pub bl: f64,
}

pub fn beam_walk(solution: &PhaseMatchSolution, distance: f64) -> BeamOffsets {
    let (a1, a2) = solution.pump_angles();
    BeamOffsets {
        k1: distance * a1.tan(),
        k2: distance * a2.tan(),
        ir: distance * solution.angle_ir.tan(),
        bl: distance * solution.angle_bl.tan(),
    }
}

/// Vacuum wave vectors of the two pumps crossing at `theta` in the x-z
/// plane, symmetric about +z.
pub fn crossed_pumps(lambda1_nm: f64, lambda2_nm: f64, theta: f64) -> Result<(WaveVector, WaveVector)> {
    let d1 = Vector3::new((0.5 * theta).sin(), 0.0, (0.5 * theta).cos());
    let d2 = Vector3::new(-(0.5 * theta).sin(), 0.0, (0.5 * theta).cos());
    Ok((
        WaveVector::from_wavelength("k1", lambda1_nm, 1.0, d1)?,
        WaveVector::from_wavelength("k2", lambda2_nm, 1.0, d2)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::closure_wavelength;

    fn vacuum(theta: f64) -> (WaveVector, WaveVector, f64, f64) {
        let bl = closure_wavelength(780.241, 775.978, 5233.208).unwrap();
        let (k1, k2) = crossed_pumps(780.241, 775.978, theta).unwrap();
        (k1, k2, wavenumber(5233.208), wavenumber(bl))
    }

    #[test]
    fn collinear_vacuum_closes() {
        let (k1, k2, ir, bl) = vacuum(0.0);
        let s = solve_planar(&k1, &k2, ir, bl, Branch::Co).unwrap();
        assert!(s.mismatch() < 1e-9 * bl);
        let c = solve_planar(&k1, &k2, ir, bl, Branch::Counter).unwrap();
        assert!((c.mismatch() / (2.0 * ir) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn crossed_pumps_bracket_the_blue() {
        let theta = 0.01;
        let (k1, k2, ir, bl) = vacuum(theta);
        let s = solve_planar(&k1, &k2, ir, bl, Branch::Co).unwrap();
        assert!(s.mismatch() < 1e-9 * bl);
        assert!(s.angle_bl.abs() < theta);
        let (a1, a2) = s.pump_angles();
        assert!(a1.min(a2) < s.angle_bl && s.angle_bl < a1.max(a2));
        let w = beam_walk(&s, 0.5);
        assert!(((w.k1 - w.k2).abs() - 5e-3).abs() < 1e-5);
        assert!(w.k1.min(w.k2) < w.bl && w.bl < w.k1.max(w.k2));
    }

    #[test]
    fn mirror_symmetry() {
        let (k1, k2, ir, bl) = vacuum(0.01);
        let (m1, m2, _, _) = vacuum(-0.01);
        let a = solve_planar(&k1, &k2, ir, bl, Branch::Co).unwrap();
        let b = solve_planar(&m1, &m2, ir, bl, Branch::Co).unwrap();
        assert!((a.k_bl.direction.x + b.k_bl.direction.x).abs() < 1e-12);
        assert!((a.k_ir.direction.x + b.k_ir.direction.x).abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_best_effort() {
        let (k1, k2, ir, bl) = vacuum(0.0);
        let s = solve_planar(&k1, &k2, ir, 0.9 * bl, Branch::Co).unwrap();
        assert!((s.mismatch() - 0.1 * bl).abs() < 1e-6 * bl);
        let t = solve_planar(&k1, &k2, ir, 1.2 * bl, Branch::Co).unwrap();
        assert!(t.mismatch() > 0.0);
        assert!(t.k_ir.direction.dot(&s.bisector()) >= -1e-12);
        assert!((t.recompute_residual() - t.residual).norm() <= 1e-12 * bl);
    }

    #[test]
    fn vacuum_index_budget() {
        let bl = closure_wavelength(780.241, 775.978, 5233.208).unwrap();
        let pump = |l, n| CollinearField { wavelength_nm: l, index: n, generated: false };
        let ir = CollinearField { wavelength_nm: 5233.208, index: 1.0, generated: true };
        let s = compensating_index(&[pump(780.241, 1.0), pump(775.978, 1.0), ir], bl, true).unwrap();
        assert!((s.index - 1.0).abs() < 1e-14);
        let s = compensating_index(&[pump(780.241, 1.0 + 1e-6), pump(775.978, 1.0 + 1e-6), ir], bl, true).unwrap();
        let expected = (bl / 780.241 + bl / 775.978) * 1e-6;
        assert!((s.deviation - expected).abs() < 1e-12);
        let bad = compensating_index(&[pump(780.241, 1.0), pump(775.978, 1.0), ir], 300.0, false);
        assert!(bad.is_err() || bad.unwrap().index > 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(WaveVector::new("x", 1.0, Vector3::new(0.0, 0.0, 1.1)).is_err());
        assert!(WaveVector::new("x", -1.0, Vector3::z()).is_err());
        let (k1, k2, ir, _) = vacuum(0.0);
        assert!(solve_planar(&k1, &k2, ir, 0.0, Branch::Co).is_err());
    }
}
