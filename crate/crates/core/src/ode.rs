//! Explicit Runge-Kutta integrators on flat `f64` state vectors.

use crate::error::{Error, Result};

/// Error-control settings for [`dormand_prince`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step guess; zero picks one from the horizon.
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, initial_step: 0.0, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` through every time in `outputs`
/// (ascending), calling `observe` at each one. The step is adapted with
/// the usual mixed absolute/relative error norm and lands exactly on each
/// output time.
pub fn dormand_prince<F, O>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    tol: Tolerance,
    mut observe: O,
) -> Result<Stats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut stats = Stats::default();

    let horizon = outputs.last().copied().unwrap_or(t0) - t0;
    let mut h = if tol.initial_step > 0.0 { tol.initial_step } else { (horizon.abs() * 1e-6).max(1e-300) };
    rhs(t, &y, &mut k[0]);

    for &target in outputs {
        if target < t {
            return Err(Error::Domain(format!("output time {target} precedes current time {t}")));
        }
        while t < target {
            if stats.accepted + stats.rejected >= tol.max_steps {
                return Err(Error::Stiffness { time: t, step: h });
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            if step < t.abs().max(horizon.abs()) * 1e-15 && !last {
                return Err(Error::Stiffness { time: t, step });
            }

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += step * A[s][j] * kj[i];
                    }
                    stage[i] = acc;
                }
                rhs(t + C[s] * step, &stage, &mut k[s]);
            }
            // FSAL: stage 7 was evaluated at the fifth-order solution.
            let mut err = 0.0f64;
            for i in 0..n {
                let mut sol = y[i];
                let mut e = 0.0;
                for s in 0..7 {
                    sol += step * B[s] * k[s][i];
                    e += step * E[s] * k[s][i];
                }
                y_new[i] = sol;
                let scale = tol.atol + tol.rtol * y[i].abs().max(sol.abs());
                err = err.max((e / scale).abs());
            }

            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                stats.accepted += 1;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = step * grow;
                } else {
                    h = h.max(step * grow.min(1.0));
                }
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.25)).clamp(0.1, 0.9);
                if h < t.abs().max(horizon.abs()) * 1e-15 {
                    return Err(Error::Stiffness { time: t, step: h });
                }
            }
        }
        observe(t, &y);
    }
    Ok(stats)
}

/// One classical fourth-order Runge-Kutta step of size `h`.
pub fn rk4_step<F>(mut rhs: F, t: f64, y: &mut [f64], h: f64)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs(t, y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(t + h, &tmp, &mut k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut end = 0.0;
        dormand_prince(
            |_, y, d| d[0] = -2.0 * y[0],
            0.0,
            &[1.0],
            &[3.0],
            Tolerance::default(),
            |_, y| end = y[0],
        )
        .unwrap();
        assert!((end - (-6.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_outputs() {
        let times: Vec<f64> = (1..=20).map(|i| i as f64 * 0.5).collect();
        let mut seen = Vec::new();
        dormand_prince(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &times,
            Tolerance::default(),
            |t, y| seen.push((t, y[0])),
        )
        .unwrap();
        assert_eq!(seen.len(), times.len());
        for (t, x) in seen {
            assert!((x - t.cos()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn step_budget_exhaustion_reports_stiffness() {
        let tol = Tolerance { max_steps: 10, ..Tolerance::default() };
        let r = dormand_prince(|_, y, d| d[0] = -1e6 * y[0], 0.0, &[1.0], &[1.0], tol, |_, _| {});
        assert!(matches!(r, Err(Error::Stiffness { .. })));
    }

    #[test]
    fn rk4_matches_exponential() {
        let mut y = [1.0];
        for i in 0..100 {
            rk4_step(|_, y, d| d[0] = -y[0], i as f64 * 0.01, &mut y, 0.01);
        }
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }
}
