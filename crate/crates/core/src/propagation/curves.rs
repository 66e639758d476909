//! Parameter sweeps over propagation runs: pump power, density and the
//! first-laser detuning.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{propagate, PropagationConfig, PropagationResult, THRESHOLD_FACTOR};
use crate::atomic::{vapor_number_density, CellConditions, LevelScheme, DENSITY_RANGE_K};
use crate::error::{Error, Result};
use crate::spectra::fwhm;

/// Log-log slope below which the density curve counts as saturated.
pub const SATURATION_SLOPE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    /// Blue output, W.
    pub output: f64,
    pub seed_throughput: f64,
    pub ir_power: f64,
    pub blue_detuning: f64,
    pub above_threshold: bool,
}

impl CurvePoint {
    fn from_run(x: f64, r: &PropagationResult) -> Self {
        CurvePoint {
            x,
            output: r.output_power,
            seed_throughput: r.seed_throughput,
            ir_power: r.ir_power,
            blue_detuning: r.blue_detuning,
            above_threshold: r.above_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
    /// Where output first reaches the threshold factor times the seed
    /// throughput, interpolated log-log between the bracketing points.
    pub threshold: Option<f64>,
    /// Least-squares log-log slope over the points above threshold.
    pub slope_above: Option<f64>,
    /// First x above threshold where the local log-log slope drops below
    /// [`SATURATION_SLOPE`].
    pub saturation: Option<f64>,
}

impl Curve {
    fn from_points(points: Vec<CurvePoint>) -> Self {
        let threshold_index = points.iter().position(|p| p.above_threshold);
        let threshold = threshold_index.map(|i| match i {
            0 => points[0].x,
            _ => threshold_crossing(&points[i - 1], &points[i]),
        });
        let (slope_above, saturation) = match threshold_index {
            Some(i) => {
                let above = &points[i..];
                let xs: Vec<f64> = above.iter().map(|p| p.x).collect();
                let ys: Vec<f64> = above.iter().map(|p| p.output).collect();
                let saturation = above
                    .windows(2)
                    .find(|w| w[0].output > 0.0 && w[1].output > 0.0 && pair_slope(&w[0], &w[1]) < SATURATION_SLOPE)
                    .map(|w| w[0].x);
                (log_slope(&xs, &ys), saturation)
            }
            None => (None, None),
        };
        Curve { points, threshold, slope_above, saturation }
    }

    /// Log-log slope between consecutive points.
    pub fn local_slopes(&self) -> Vec<(f64, f64)> {
        self.points
            .windows(2)
            .filter(|w| w[0].output > 0.0 && w[1].output > 0.0)
            .map(|w| ((w[0].x * w[1].x).sqrt(), pair_slope(&w[0], &w[1])))
            .collect()
    }
}

fn threshold_crossing(below: &CurvePoint, above: &CurvePoint) -> f64 {
    let lr = |p: &CurvePoint| (p.output / p.seed_throughput).ln();
    let (r0, r1) = (lr(below), lr(above));
    let target = THRESHOLD_FACTOR.ln();
    if !(r0.is_finite() && r1.is_finite()) || r1 <= r0 || below.x <= 0.0 {
        return above.x;
    }
    let f = ((target - r0) / (r1 - r0)).clamp(0.0, 1.0);
    (below.x.ln() + f * (above.x / below.x).ln()).exp()
}

fn pair_slope(a: &CurvePoint, b: &CurvePoint) -> f64 {
    (b.output / a.output).ln() / (b.x / a.x).ln()
}

/// Least-squares slope of `ln y` against `ln x` over positive points.
pub fn log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerAxis {
    /// Both pumps at half the given total power.
    #[serde(rename = "total")]
    Total,
    #[serde(rename = "first")]
    First,
    #[serde(rename = "second")]
    Second,
}

impl std::str::FromStr for PowerAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "total" => Ok(PowerAxis::Total),
            "first" | "780" => Ok(PowerAxis::First),
            "second" | "776" => Ok(PowerAxis::Second),
            other => Err(Error::Domain(format!("unknown power axis `{other}`"))),
        }
    }
}

fn run_all<T: Sync>(
    scheme: &LevelScheme,
    items: &[T],
    configure: impl Fn(&T) -> Result<(f64, PropagationConfig)> + Sync,
) -> Result<Vec<CurvePoint>> {
    items
        .par_iter()
        .map(|item| {
            let (x, cfg) = configure(item)?;
            let r = propagate(scheme, &cfg)?;
            Ok(CurvePoint::from_run(x, &r))
        })
        .collect()
}

/// Blue output versus input power (W) on one axis, other settings from
/// `base`.
pub fn power_curve(scheme: &LevelScheme, base: &PropagationConfig, axis: PowerAxis, powers: &[f64]) -> Result<Curve> {
    check_increasing(powers, "powers")?;
    let points = run_all(scheme, powers, |&p| {
        let mut cfg = base.clone();
        match axis {
            PowerAxis::Total => {
                cfg.power1 = 0.5 * p;
                cfg.power2 = 0.5 * p;
            }
            PowerAxis::First => cfg.power1 = p,
            PowerAxis::Second => cfg.power2 = p,
        }
        Ok((p, cfg))
    })?;
    Ok(Curve::from_points(points))
}

/// Blue output versus number density (cm^-3) for cell temperatures (K).
pub fn density_curve(scheme: &LevelScheme, base: &PropagationConfig, temperatures: &[f64]) -> Result<Curve> {
    check_increasing(temperatures, "temperatures")?;
    let points = run_all(scheme, temperatures, |&t| {
        let mut cfg = base.clone();
        cfg.cell = CellConditions::new(t, base.cell.length)?;
        Ok((vapor_number_density(t)?, cfg))
    })?;
    Ok(Curve::from_points(points))
}

fn check_increasing(x: &[f64], what: &str) -> Result<()> {
    if x.len() < 2 || x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!("{what} must be strictly increasing with at least 2 entries")));
    }
    Ok(())
}

/// Temperature (K) at which the vapour reaches `density` (cm^-3).
pub fn temperature_for_density(density: f64) -> Result<f64> {
    let (mut lo, mut hi) = DENSITY_RANGE_K;
    if !(density >= vapor_number_density(lo)?) || !(density <= vapor_number_density(hi)?) {
        return Err(Error::Domain(format!("density {density:e} cm^-3 outside the vapour-pressure range")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if vapor_number_density(mid)? < density {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// How the second laser is set while the first is scanned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SecondDetuning {
    /// Keep the configured second detuning.
    Fixed,
    /// Keep the second laser resonant with the velocity class addressed by
    /// the first: `delta2 = base + (k2 / k1) * delta1`.
    Follow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningProfile {
    /// Density, cm^-3.
    pub density: f64,
    /// (first detuning rad/s, blue output W), sorted by detuning.
    pub points: Vec<(f64, f64)>,
    /// Detuning of the largest output, rad/s.
    pub optimum: f64,
    /// Width of the output profile, rad/s.
    pub fwhm: Option<f64>,
}

/// Scan the first detuning over `detunings` (rad/s), refine around the best
/// point and report the optimum and the profile width.
pub fn detuning_optimum(
    scheme: &LevelScheme,
    base: &PropagationConfig,
    detunings: &[f64],
    second: SecondDetuning,
) -> Result<DetuningProfile> {
    check_increasing(detunings, "detunings")?;
    let lambda = scheme.diamond_wavelengths()?;
    let ratio = lambda[0] / lambda[1];
    let configure = |&d: &f64| {
        let mut cfg = base.clone();
        cfg.detuning1 = d;
        if second == SecondDetuning::Follow {
            cfg.detuning2 = base.detuning2 + ratio * d;
        }
        Ok((d, cfg))
    };
    let mut points: Vec<(f64, f64)> =
        run_all(scheme, detunings, configure)?.into_iter().map(|p| (p.x, p.output)).collect();

    let best = argmax(&points);
    let left = if best > 0 { points[best - 1].0 } else { points[best].0 };
    let right = if best + 1 < points.len() { points[best + 1].0 } else { points[best].0 };
    let centre = points[best].0;
    let refine: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .flat_map(|f| [centre + f * (left - centre), centre + f * (right - centre)])
        .filter(|&d| d != centre)
        .collect();
    if !refine.is_empty() {
        let extra = run_all(scheme, &refine, configure)?;
        points.extend(extra.into_iter().map(|p| (p.x, p.output)));
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|a, b| a.0 == b.0);
    }
    let optimum = points[argmax(&points)].0;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(DetuningProfile { density: base.cell.density(), fwhm: fwhm(&xs, &ys), optimum, points })
}

fn argmax(points: &[(f64, f64)]) -> usize {
    points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x: Vec<f64> = (1..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(1.5)).collect();
        assert!((log_slope(&x, &y).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_density() {
        let t = temperature_for_density(3.0e11).unwrap();
        assert!((vapor_number_density(t).unwrap() / 3.0e11 - 1.0).abs() < 1e-10);
        assert!(temperature_for_density(1e20).is_err());
    }

    #[test]
    fn curve_markers() {
        let pts: Vec<CurvePoint> = [(1.0, 1.0), (2.0, 1.0), (4.0, 100.0), (8.0, 1000.0), (16.0, 1050.0)]
            .iter()
            .map(|&(x, y)| CurvePoint {
                x,
                output: y,
                seed_throughput: 1.0,
                ir_power: 0.0,
                blue_detuning: 0.0,
                above_threshold: y > THRESHOLD_FACTOR,
            })
            .collect();
        let c = Curve::from_points(pts);
        // 10x crossing halfway in log between ratios 1 and 100
        let t = c.threshold.unwrap();
        assert!((t - 2.0 * 2f64.sqrt()).abs() < 1e-12, "{t}");
        assert_eq!(c.saturation, Some(8.0));
    }
}
