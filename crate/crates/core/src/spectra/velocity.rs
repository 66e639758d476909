//! Maxwell-Boltzmann velocity quadrature along the beam axis.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::atomic::thermal_velocity;
use crate::error::{Error, Result};

/// Half-span of the trapezoid grids in units of the rms velocity.
pub const SPAN_SIGMAS: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    GaussHermite,
    Trapezoid,
}

/// Nodes (m/s) and normalised weights for averaging over the 1-D thermal
/// distribution `exp(-v^2 / 2 sigma^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    sigma: f64,
    kind: GridKind,
}

impl VelocityGrid {
    pub fn thermal_sigma(temperature: f64, mass_amu: f64) -> Result<f64> {
        if !(temperature > 0.0) || !(mass_amu > 0.0) {
            return Err(Error::Domain("temperature and mass must be positive".into()));
        }
        Ok(thermal_velocity(temperature, mass_amu))
    }

    /// `n`-point Gauss-Hermite rule (Golub-Welsch).
    pub fn gauss_hermite(n: usize, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if n == 0 {
            return Err(Error::Domain("quadrature needs at least one node".into()));
        }
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // enforce exact mirror symmetry
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let scale = std::f64::consts::SQRT_2 * sigma;
        let nodes = pairs.iter().map(|p| p.0 * scale).collect();
        let weights = normalise(pairs.iter().map(|p| p.1).collect());
        Ok(VelocityGrid { nodes, weights, sigma, kind: GridKind::GaussHermite })
    }

    /// Equally spaced trapezoid rule over `+-SPAN_SIGMAS * sigma`.
    pub fn uniform(n: usize, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if n < 3 {
            return Err(Error::Domain("uniform grid needs at least 3 nodes".into()));
        }
        let half = SPAN_SIGMAS * sigma;
        let nodes = (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect();
        Ok(Self::trapezoid(nodes, sigma))
    }

    /// Trapezoid grid refined around each resonance `(velocity, half-width)`
    /// and its mirror image: spacing `width / 6` near the centre, growing
    /// geometrically to the background spacing `sigma / 8`.
    pub fn graded(sigma: f64, resonances: &[(f64, f64)]) -> Result<Self> {
        check_sigma(sigma)?;
        let half = SPAN_SIGMAS * sigma;
        let coarse = sigma / 8.0;
        let mut nodes: Vec<f64> = (0..=(2.0 * half / coarse).round() as usize)
            .map(|i| -half + i as f64 * coarse)
            .collect();
        for &(centre, width) in resonances {
            if !centre.is_finite() || !(width > 0.0) || centre.abs() > half {
                continue;
            }
            let fine = (width / 6.0).min(coarse);
            for c in [centre, -centre] {
                let mut offset = 0.0;
                let mut step = fine;
                while offset < 8.0 * coarse {
                    for x in [c + offset, c - offset] {
                        if x.abs() < half {
                            nodes.push(x);
                        }
                    }
                    offset += step;
                    if offset > 3.0 * width {
                        step = (step * 1.1).min(coarse);
                    }
                }
            }
        }
        nodes.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::with_capacity(nodes.len());
        for x in nodes {
            match merged.last() {
                Some(&last) if x - last < 1e-9 * sigma => {}
                _ => merged.push(x),
            }
        }
        let mirrored: Vec<f64> = merged.iter().rev().map(|x| -x).collect();
        let symmetric = merged
            .iter()
            .zip(&mirrored)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Ok(Self::trapezoid(symmetric, sigma))
    }

    fn trapezoid(nodes: Vec<f64>, sigma: f64) -> Self {
        let n = nodes.len();
        let weights = (0..n)
            .map(|i| {
                let left = if i == 0 { nodes[0] } else { nodes[i - 1] };
                let right = if i + 1 == n { nodes[n - 1] } else { nodes[i + 1] };
                0.5 * (right - left) * (-0.5 * (nodes[i] / sigma).powi(2)).exp()
            })
            .collect();
        VelocityGrid { nodes, weights: normalise(weights), sigma, kind: GridKind::Trapezoid }
    }

    /// Grid with twice the resolution: `2n` Hermite nodes, or the midpoints
    /// inserted for trapezoid grids.
    pub fn refined(&self) -> Self {
        match self.kind {
            GridKind::GaussHermite => {
                Self::gauss_hermite(2 * self.nodes.len(), self.sigma).expect("valid grid")
            }
            GridKind::Trapezoid => {
                let mut nodes = Vec::with_capacity(2 * self.nodes.len());
                for w in self.nodes.windows(2) {
                    nodes.push(w[0]);
                    nodes.push(0.5 * (w[0] + w[1]));
                }
                nodes.extend(self.nodes.last());
                Self::trapezoid(nodes, self.sigma)
            }
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn rms_velocity(&self) -> f64 {
        self.sigma
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Smallest node spacing within one rms velocity of `v`.
    pub fn spacing_near(&self, v: f64) -> f64 {
        self.nodes
            .windows(2)
            .filter(|w| (0.5 * (w[0] + w[1]) - v).abs() <= self.sigma)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("rms velocity {sigma} must be positive")))
    }
}

fn normalise(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}
