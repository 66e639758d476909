//! Ground-state Zeeman optical pumping on `F -> F + 1` with the excited
//! state adiabatically eliminated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::rk4_step;

fn factorial(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>` from the Racah formula.
/// All angular momenta are given doubled (`2j`, `2m`) so half-integers work.
pub fn clebsch_gordan(j1: i64, m1: i64, j2: i64, m2: i64, j: i64, m: i64) -> f64 {
    if m1 + m2 != m || m1.abs() > j1 || m2.abs() > j2 || m.abs() > j {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j + m) % 2 != 0 {
        return 0.0;
    }
    if j < (j1 - j2).abs() || j > j1 + j2 || (j1 + j2 + j) % 2 != 0 {
        return 0.0;
    }
    let h = |x: i64| x / 2;
    let prefactor = ((j + 1) as f64 * factorial(h(j + j1 - j2)) * factorial(h(j - j1 + j2))
        * factorial(h(j1 + j2 - j))
        / factorial(h(j1 + j2 + j + 2)))
    .sqrt()
        * (factorial(h(j + m)) * factorial(h(j - m)) * factorial(h(j1 - m1)) * factorial(h(j1 + m1))
            * factorial(h(j2 - m2))
            * factorial(h(j2 + m2)))
        .sqrt();
    let mut sum = 0.0;
    for k in 0..=h(j1 + j2 - j) {
        let terms = [
            h(j1 + j2 - j) - k,
            h(j1 - m1) - k,
            h(j2 + m2) - k,
            h(j - j2 + m1) + k,
            h(j - j1 - m2) + k,
        ];
        if terms.iter().any(|&t| t < 0) {
            continue;
        }
        let denom = factorial(k) * terms.iter().map(|&t| factorial(t)).product::<f64>();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign / denom;
    }
    prefactor * sum
}

/// Relative strength of `|F m> -> |F' m+q>`, the squared Clebsch-Gordan
/// coefficient `<F m; 1 q | F' m+q>^2`.
pub fn line_strength(f: i64, m: i64, q: i64, f_up: i64) -> f64 {
    clebsch_gordan(2 * f, 2 * m, 2, 2 * q, 2 * f_up, 2 * (m + q)).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolarizationPair {
    #[serde(rename = "sigma+sigma+")]
    SigmaPlusSigmaPlus,
    #[serde(rename = "sigma+sigma-")]
    SigmaPlusSigmaMinus,
    #[serde(rename = "lin-par-lin")]
    LinParallel,
    #[serde(rename = "lin-perp-lin")]
    LinPerpendicular,
}

impl PolarizationPair {
    pub const ALL: [PolarizationPair; 4] = [
        PolarizationPair::SigmaPlusSigmaPlus,
        PolarizationPair::SigmaPlusSigmaMinus,
        PolarizationPair::LinParallel,
        PolarizationPair::LinPerpendicular,
    ];

    /// Spherical components `(q, weight)` of each field with the
    /// quantisation axis along the first field's polarisation (linear) or
    /// propagation direction (circular).
    pub fn components(self) -> ([(i64, f64); 2], [(i64, f64); 2]) {
        use PolarizationPair::*;
        let plus = [(1, 1.0), (0, 0.0)];
        let minus = [(-1, 1.0), (0, 0.0)];
        let pi = [(0, 1.0), (1, 0.0)];
        let perp = [(1, 0.5), (-1, 0.5)];
        match self {
            SigmaPlusSigmaPlus => (plus, plus),
            SigmaPlusSigmaMinus => (plus, minus),
            LinParallel => (pi, pi),
            LinPerpendicular => (pi, perp),
        }
    }

    pub fn label(self) -> &'static str {
        use PolarizationPair::*;
        match self {
            SigmaPlusSigmaPlus => "sigma+sigma+",
            SigmaPlusSigmaMinus => "sigma+sigma-",
            LinParallel => "lin-par-lin",
            LinPerpendicular => "lin-perp-lin",
        }
    }
}

impl std::str::FromStr for PolarizationPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::Domain(format!("unknown polarization pair `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeemanOptions {
    /// Ground hyperfine quantum number; the pumped line is `F -> F + 1`.
    pub f_ground: i64,
    /// On-resonance saturation parameter of the first field.
    pub saturation: f64,
    /// RK4 step in excited-state lifetimes.
    pub step: f64,
}

impl Default for ZeemanOptions {
    fn default() -> Self {
        ZeemanOptions { f_ground: 3, saturation: 0.5, step: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeemanResult {
    pub pair: PolarizationPair,
    /// Sublevel populations for `m = -F..=F`.
    pub populations: Vec<f64>,
    /// Population in the sublevel with the largest |m| pumped towards.
    pub stretched_fraction: f64,
    /// `sum_m p_m sum_q1 sum_q2 w1 w2 CG^2(F m -> F+1) CG^2(F+1 -> F+2)`.
    pub two_step_weight: f64,
    /// Largest per-step change of the total population.
    pub max_norm_drift: f64,
}

/// Rate-equation optical pumping from a uniform ground distribution for
/// `duration` excited-state lifetimes.
pub fn zeeman_pumping(pair: PolarizationPair, duration: f64, options: ZeemanOptions) -> Result<ZeemanResult> {
    let f = options.f_ground;
    if f < 0 || !(duration >= 0.0) || !(options.saturation > 0.0) || !(options.step > 0.0) {
        return Err(Error::Domain("invalid Zeeman pumping parameters".into()));
    }
    let dim = (2 * f + 1) as usize;
    let fe = f + 1;
    let (first, second) = pair.components();
    let index = |m: i64| (m + f) as usize;

    // out[m]: pumping rate out of m; feed[m][m2]: rate of return to m2
    let mut out = vec![0.0; dim];
    let mut feed = vec![vec![0.0; dim]; dim];
    for m in -f..=f {
        for &(q, w) in &first {
            if w == 0.0 {
                continue;
            }
            let rate = 0.5 * options.saturation * w * line_strength(f, m, q, fe);
            if rate == 0.0 {
                continue;
            }
            out[index(m)] += rate;
            let me = m + q;
            for m2 in -f..=f {
                let b = line_strength(f, m2, me - m2, fe);
                feed[index(m)][index(m2)] += rate * b;
            }
        }
    }

    let mut p = vec![1.0 / dim as f64; dim];
    let steps = (duration / options.step).ceil() as usize;
    let h = if steps > 0 { duration / steps as f64 } else { 0.0 };
    let mut drift: f64 = 0.0;
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
        for d in dy.iter_mut() {
            *d = 0.0;
        }
        for m in 0..dim {
            dy[m] -= out[m] * y[m];
            for m2 in 0..dim {
                dy[m2] += feed[m][m2] * y[m];
            }
        }
    };
    for s in 0..steps {
        let before: f64 = p.iter().sum();
        rk4_step(rhs, s as f64 * h, &mut p, h);
        drift = drift.max((p.iter().sum::<f64>() - before).abs());
    }

    let stretched = match first[0].0 {
        1 => p[dim - 1],
        -1 => p[0],
        _ => p[index(0)],
    };
    let mut weight = 0.0;
    for m in -f..=f {
        for &(q1, w1) in &first {
            let a = w1 * line_strength(f, m, q1, fe);
            if a == 0.0 {
                continue;
            }
            for &(q2, w2) in &second {
                weight += p[index(m)] * a * w2 * line_strength(fe, m + q1, q2, fe + 1);
            }
        }
    }
    Ok(ZeemanResult {
        pair,
        populations: p,
        stretched_fraction: stretched,
        two_step_weight: weight,
        max_norm_drift: drift,
    })
}
