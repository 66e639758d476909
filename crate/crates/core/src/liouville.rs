//! Rotating-wave Bloch equations for a driven multi-level atom moving with
//! velocity `v` along the beam axis.
//!
//! The Liouvillian is assembled as an explicit superoperator acting on the
//! row-major vectorisation `vec(rho)[i * n + j] = rho[i][j]`:
//!
//! `L(rho) = -i [H, rho] + sum_c gamma_c (J_c rho J_c^+ - {J_c^+ J_c, rho} / 2) - dephasing`
//!
//! with one rotating frame per driven transition. The driven transitions
//! must form a forest so that every level gets a unique frame frequency.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::LevelScheme;
use crate::constants::wavenumber;
use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Condition estimates above this are treated as a degenerate null space.
pub const MAX_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    #[serde(rename = "sigma+")]
    SigmaPlus,
    #[serde(rename = "sigma-")]
    SigmaMinus,
    #[serde(rename = "lin")]
    Linear,
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma+" | "s+" => Ok(Polarization::SigmaPlus),
            "sigma-" | "s-" => Ok(Polarization::SigmaMinus),
            "lin" | "linear" | "pi" => Ok(Polarization::Linear),
            other => Err(Error::Domain(format!("unknown polarization `{other}`"))),
        }
    }
}

/// One optical field driving a transition of the scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub lower: String,
    pub upper: String,
    pub wavelength_nm: f64,
    /// Detuning from the zero-velocity resonance, rad/s.
    pub detuning: f64,
    /// Rabi frequency, rad/s.
    pub rabi: f64,
    /// Unit propagation direction; the atomic velocity is along +z.
    pub direction: [f64; 3],
    pub polarization: Polarization,
}

impl FieldSpec {
    /// Resonant, zero-amplitude field along +z on a drive of `scheme`.
    pub fn on(scheme: &LevelScheme, lower: &str, upper: &str) -> Result<Self> {
        let drive = scheme.drive(lower, upper).ok_or_else(|| {
            Error::UnsupportedConfiguration(format!("{lower} -> {upper} is not a drive transition"))
        })?;
        Ok(FieldSpec {
            lower: lower.into(),
            upper: upper.into(),
            wavelength_nm: drive.wavelength_nm,
            detuning: 0.0,
            rabi: 0.0,
            direction: [0.0, 0.0, 1.0],
            polarization: Polarization::SigmaPlus,
        })
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_rabi(mut self, rabi: f64) -> Self {
        self.rabi = rabi;
        self
    }

    pub fn with_direction(mut self, direction: [f64; 3]) -> Self {
        self.direction = direction;
        self
    }

    /// Projection of the wave vector on the velocity axis, rad/m.
    pub fn k_axial(&self) -> f64 {
        wavenumber(self.wavelength_nm) * self.direction[2]
    }

    fn check(&self) -> Result<()> {
        if !(self.rabi >= 0.0) || !self.rabi.is_finite() {
            return Err(Error::Domain(format!("Rabi frequency {} must be >= 0", self.rabi)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::Domain("detuning must be finite".into()));
        }
        let norm = self.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("field direction has norm {norm}, expected 1")));
        }
        Ok(())
    }
}

/// Per-evaluation field parameters (detuning and Rabi frequency, rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub detuning: f64,
    pub rabi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Extra dephasing added to every coherence, rad/s.
    pub dephasing: f64,
}

#[derive(Debug, Clone)]
struct Edge {
    lower: usize,
    upper: usize,
    k_axial: f64,
}

/// Frame assignment: level `child` inherits the frame of `parent` shifted by
/// `sign` times the detuning of edge `edge`.
#[derive(Debug, Clone, Copy)]
struct FrameStep {
    edge: usize,
    parent: usize,
    child: usize,
    sign: f64,
}

/// Static part of the Bloch equations for a scheme and a set of fields.
/// Detunings, Rabi frequencies and velocity are supplied per evaluation.
#[derive(Debug, Clone)]
pub struct BlochModel {
    n: usize,
    ground: usize,
    gamma: Vec<f64>,
    transfers: Vec<(usize, usize, f64)>,
    dephasing: f64,
    edges: Vec<Edge>,
    frame_steps: Vec<FrameStep>,
    /// Reduced variable set: (i, j) pairs within one coherently coupled
    /// component plus every population.
    reduced: Vec<(usize, usize)>,
    reduced_index: Vec<Option<usize>>,
}

impl BlochModel {
    pub fn new(scheme: &LevelScheme, fields: &[FieldSpec], options: ModelOptions) -> Result<Self> {
        scheme.validate()?;
        let n = scheme.dim();
        let ground = scheme.ground_index();
        if !(options.dephasing >= 0.0) {
            return Err(Error::Domain("dephasing must be >= 0".into()));
        }

        let mut edges = Vec::with_capacity(fields.len());
        for f in fields {
            f.check()?;
            if scheme.drive(&f.lower, &f.upper).is_none() {
                return Err(Error::UnsupportedConfiguration(format!(
                    "{} -> {} is not a drive transition of `{}`",
                    f.lower, f.upper, scheme.name
                )));
            }
            let lower = scheme.index_of(&f.lower)?;
            let upper = scheme.index_of(&f.upper)?;
            if edges.iter().any(|e: &Edge| e.lower == lower && e.upper == upper) {
                return Err(Error::UnsupportedConfiguration(format!(
                    "two fields drive {} -> {}",
                    f.lower, f.upper
                )));
            }
            edges.push(Edge { lower, upper, k_axial: f.k_axial() });
        }

        // Breadth-first frame assignment; a cycle has no consistent frame.
        let mut component = vec![usize::MAX; n];
        let mut frame_steps = Vec::new();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scheme.levels[a].energy_hz.total_cmp(&scheme.levels[b].energy_hz));
        let mut used = vec![false; edges.len()];
        for &root in &order {
            if component[root] != usize::MAX {
                continue;
            }
            component[root] = root;
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(level) = queue.pop_front() {
                for (ei, e) in edges.iter().enumerate() {
                    if used[ei] || (e.lower != level && e.upper != level) {
                        continue;
                    }
                    used[ei] = true;
                    let (other, sign) = if e.lower == level { (e.upper, 1.0) } else { (e.lower, -1.0) };
                    if component[other] != usize::MAX {
                        return Err(Error::UnsupportedConfiguration(
                            "driven transitions form a closed loop; no rotating frame exists".into(),
                        ));
                    }
                    component[other] = root;
                    frame_steps.push(FrameStep { edge: ei, parent: level, child: other, sign });
                    queue.push_back(other);
                }
            }
        }

        let gamma: Vec<f64> = scheme.levels.iter().map(|l| l.decay_rate).collect();
        let mut transfers = Vec::new();
        for (i, level) in scheme.levels.iter().enumerate() {
            if level.decay_rate == 0.0 {
                continue;
            }
            let mut listed = 0.0;
            for c in scheme.decays.iter().filter(|c| c.from == level.id) {
                let to = scheme.index_of(&c.to)?;
                let rate = level.decay_rate * c.branching;
                if rate > 0.0 {
                    transfers.push((i, to, rate));
                }
                listed += c.branching;
            }
            let rest = (1.0 - listed).max(0.0) * level.decay_rate;
            if rest > 0.0 {
                transfers.push((i, ground, rest));
            }
        }

        let mut reduced = Vec::new();
        let mut reduced_index = vec![None; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j || component[i] == component[j] {
                    reduced_index[i * n + j] = Some(reduced.len());
                    reduced.push((i, j));
                }
            }
        }

        Ok(BlochModel {
            n,
            ground,
            gamma,
            transfers,
            dephasing: options.dephasing,
            edges,
            frame_steps,
            reduced,
            reduced_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn field_count(&self) -> usize {
        self.edges.len()
    }

    /// Velocity classes where each level is resonant with its frame root,
    /// with the homogeneous half-width of that resonance in velocity units.
    pub fn resonances(&self, drives: &[Drive]) -> Vec<Resonance> {
        let n = self.n;
        let mut detuning = vec![0.0; n];
        let mut k = vec![0.0; n];
        let mut root: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        for step in &self.frame_steps {
            let e = &self.edges[step.edge];
            detuning[step.child] = detuning[step.parent] + step.sign * drives[step.edge].detuning;
            k[step.child] = k[step.parent] + step.sign * e.k_axial;
            root[step.child] = root[step.parent];
            let kk = k[step.child];
            if kk.abs() > 0.0 {
                let r = root[step.child];
                let c = step.child;
                let decay = 0.5 * (self.gamma[r] + self.gamma[c]) + self.dephasing;
                out.push(Resonance { velocity: detuning[c] / kk, width: decay / kk.abs() });
            }
            // single-edge resonance of a non-root parent
            if step.parent != root[step.parent] {
                let decay = 0.5 * (self.gamma[step.parent] + self.gamma[step.child]) + self.dephasing;
                if e.k_axial.abs() > 0.0 {
                    out.push(Resonance {
                        velocity: drives[step.edge].detuning / e.k_axial,
                        width: decay / e.k_axial.abs(),
                    });
                }
            }
        }
        out
    }

    /// Rotating-frame Hamiltonian (rad/s) at velocity `v`.
    pub fn hamiltonian(&self, drives: &[Drive], v: f64) -> DMatrix<Complex64> {
        let n = self.n;
        let mut frame = vec![0.0; n];
        for step in &self.frame_steps {
            let e = &self.edges[step.edge];
            let effective = drives[step.edge].detuning - e.k_axial * v;
            frame[step.child] = frame[step.parent] + step.sign * effective;
        }
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = Complex64::new(-frame[i], 0.0);
        }
        for (e, d) in self.edges.iter().zip(drives) {
            h[(e.lower, e.upper)] += Complex64::new(0.5 * d.rabi, 0.0);
            h[(e.upper, e.lower)] += Complex64::new(0.5 * d.rabi, 0.0);
        }
        h
    }

    /// Sparse superoperator entries (row, column, value) over the full
    /// vectorised density matrix.
    fn triplets(&self, drives: &[Drive], v: f64) -> Vec<(usize, usize, Complex64)> {
        let n = self.n;
        let h = self.hamiltonian(drives, v);
        let idx = |i: usize, j: usize| i * n + j;
        let mut out = Vec::with_capacity(n * n * 4);
        for i in 0..n {
            for j in 0..n {
                let row = idx(i, j);
                let mut diag = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    // -i H_ik rho_kj
                    let hik = h[(i, k)];
                    if hik != Complex64::new(0.0, 0.0) {
                        if k == i {
                            diag += -I * hik;
                        } else {
                            out.push((row, idx(k, j), -I * hik));
                        }
                    }
                    // +i rho_ik H_kj
                    let hkj = h[(k, j)];
                    if hkj != Complex64::new(0.0, 0.0) {
                        if k == j {
                            diag += I * hkj;
                        } else {
                            out.push((row, idx(i, k), I * hkj));
                        }
                    }
                }
                diag -= 0.5 * (self.gamma[i] + self.gamma[j]);
                if i != j {
                    diag -= self.dephasing;
                }
                if diag != Complex64::new(0.0, 0.0) {
                    out.push((row, row, diag));
                }
            }
        }
        for &(from, to, rate) in &self.transfers {
            out.push((idx(to, to), idx(from, from), Complex64::new(rate, 0.0)));
        }
        out
    }

    /// Full Liouvillian at velocity `v`.
    pub fn generator(&self, drives: &[Drive], v: f64) -> Result<Generator> {
        self.check_drives(drives)?;
        let m = self.n * self.n;
        let mut matrix = DMatrix::zeros(m, m);
        for (r, c, val) in self.triplets(drives, v) {
            matrix[(r, c)] += val;
        }
        Ok(Generator { n: self.n, matrix })
    }

    fn check_drives(&self, drives: &[Drive]) -> Result<()> {
        if drives.len() != self.edges.len() {
            return Err(Error::Domain(format!(
                "expected {} drive parameters, got {}",
                self.edges.len(),
                drives.len()
            )));
        }
        for d in drives {
            if !(d.rabi >= 0.0) || !d.rabi.is_finite() || !d.detuning.is_finite() {
                return Err(Error::Domain(format!("invalid drive parameters {d:?}")));
            }
        }
        Ok(())
    }

    /// Steady state from the reduced linear system with the ground-state
    /// population equation replaced by the trace condition.
    ///
    /// With `estimate_condition` the 1-norm condition number of the bordered
    /// system is computed from its explicit inverse and checked against
    /// [`MAX_CONDITION`].
    pub fn steady_state(&self, drives: &[Drive], v: f64, estimate_condition: bool) -> Result<SteadyState> {
        self.check_drives(drives)?;
        let n = self.n;
        let m = self.reduced.len();
        let mut a = DMatrix::<Complex64>::zeros(m, m);
        for (r, c, val) in self.triplets(drives, v) {
            let (Some(rr), Some(cc)) = (self.reduced_index[r], self.reduced_index[c]) else {
                continue;
            };
            a[(rr, cc)] += val;
        }
        let system = a.clone();
        let trace_row = self.reduced_index[self.ground * n + self.ground].expect("population is reduced");
        for c in 0..m {
            a[(trace_row, c)] = Complex64::new(0.0, 0.0);
        }
        for i in 0..n {
            let c = self.reduced_index[i * n + i].expect("population is reduced");
            a[(trace_row, c)] = Complex64::new(1.0, 0.0);
        }

        let norm1 = |mat: &DMatrix<Complex64>| {
            (0..mat.ncols())
                .map(|c| mat.column(c).iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let lu = a.clone().lu();
        let (x, condition) = if estimate_condition {
            let inv = lu.try_inverse().ok_or(Error::NumericalDegeneracy { condition: f64::INFINITY })?;
            let cond = norm1(&a) * norm1(&inv);
            if !(cond < MAX_CONDITION) {
                return Err(Error::NumericalDegeneracy { condition: cond });
            }
            (inv.column(trace_row).into_owned(), Some(cond))
        } else {
            let mut b = DVector::zeros(m);
            b[trace_row] = Complex64::new(1.0, 0.0);
            let x = lu.solve(&b).ok_or(Error::NumericalDegeneracy { condition: f64::INFINITY })?;
            (x, None)
        };
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalDegeneracy { condition: condition.unwrap_or(f64::INFINITY) });
        }
        let residual = (&system * &x).iter().map(|z| z.norm()).fold(0.0, f64::max);

        let mut rho = DMatrix::zeros(n, n);
        for (k, &(i, j)) in self.reduced.iter().enumerate() {
            rho[(i, j)] = x[k];
        }
        Ok(SteadyState { rho, residual, velocity: v, condition })
    }
}

/// Resonant velocity class, m/s, and its half-width, m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance {
    pub velocity: f64,
    pub width: f64,
}

/// Explicit Liouvillian matrix over the row-major vectorised density matrix.
#[derive(Debug, Clone)]
pub struct Generator {
    n: usize,
    pub matrix: DMatrix<Complex64>,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let v = DVector::from_iterator(self.n * self.n, rho.transpose().iter().copied());
        let out = &self.matrix * v;
        DMatrix::from_row_slice(self.n, self.n, out.as_slice())
    }

    /// Largest |sum of diagonal-row entries| over all columns; zero for a
    /// trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let n = self.n;
        (0..n * n)
            .map(|c| (0..n).map(|i| self.matrix[(i * n + i, c)]).sum::<Complex64>().norm())
            .fold(0.0, f64::max)
    }
}

/// Steady-state density matrix for one velocity class.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DMatrix<Complex64>,
    /// max |L(rho)| over the solved equations.
    pub residual: f64,
    /// m/s along the beam axis.
    pub velocity: f64,
    pub condition: Option<f64>,
}

impl SteadyState {
    pub fn population(&self, i: usize) -> f64 {
        self.rho[(i, i)].re
    }

    /// Check trace, Hermiticity and positivity.
    pub fn check(&self, tol: f64) -> Result<()> {
        check_density_matrix(&self.rho, tol)
    }
}

/// Trace one, Hermitian and eigenvalues >= -tol (Hermiticity and trace to
/// `tol`, positivity to `100 * tol`).
pub fn check_density_matrix(rho: &DMatrix<Complex64>, tol: f64) -> Result<()> {
    let trace = rho.trace();
    if (trace - Complex64::new(1.0, 0.0)).norm() > tol {
        return Err(Error::Domain(format!("trace {trace} differs from 1")));
    }
    let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > tol {
        return Err(Error::Domain(format!("density matrix not Hermitian ({herm:.3e})")));
    }
    let sym = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -100.0 * tol {
        return Err(Error::Domain(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(())
}

fn drives_of(fields: &[FieldSpec]) -> Vec<Drive> {
    fields.iter().map(|f| Drive { detuning: f.detuning, rabi: f.rabi }).collect()
}

/// Liouvillian for `fields` acting on atoms with axial velocity `v`.
pub fn build_generator(scheme: &LevelScheme, fields: &[FieldSpec], v: f64) -> Result<Generator> {
    BlochModel::new(scheme, fields, ModelOptions::default())?.generator(&drives_of(fields), v)
}

/// Steady state with condition estimate.
pub fn steady_state(scheme: &LevelScheme, fields: &[FieldSpec], v: f64) -> Result<SteadyState> {
    steady_state_with(scheme, fields, v, ModelOptions::default())
}

pub fn steady_state_with(
    scheme: &LevelScheme,
    fields: &[FieldSpec],
    v: f64,
    options: ModelOptions,
) -> Result<SteadyState> {
    BlochModel::new(scheme, fields, options)?.steady_state(&drives_of(fields), v, true)
}

/// Density matrices sampled along a time evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DMatrix<Complex64>>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&DMatrix<Complex64>> {
        self.states.last()
    }

    /// Largest |tr(rho) - tr(rho0)| along the trajectory.
    pub fn trace_drift(&self) -> f64 {
        let Some(first) = self.states.first() else { return 0.0 };
        let t0 = first.trace();
        self.states.iter().map(|r| (r.trace() - t0).norm()).fold(0.0, f64::max)
    }
}

/// Integrate `d rho / dt = L(rho)` from `rho0` at t = 0, sampling at `times`.
pub fn time_evolve(
    scheme: &LevelScheme,
    fields: &[FieldSpec],
    v: f64,
    rho0: &DMatrix<Complex64>,
    times: &[f64],
    tol: Tolerance,
) -> Result<Trajectory> {
    let model = BlochModel::new(scheme, fields, ModelOptions::default())?;
    evolve_model(&model, &drives_of(fields), v, rho0, times, tol)
}

pub fn evolve_model(
    model: &BlochModel,
    drives: &[Drive],
    v: f64,
    rho0: &DMatrix<Complex64>,
    times: &[f64],
    tol: Tolerance,
) -> Result<Trajectory> {
    let n = model.dim();
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::Domain(format!("initial state must be {n}x{n}")));
    }
    check_density_matrix(rho0, 1e-9)?;
    model.check_drives(drives)?;
    let triplets = model.triplets(drives, v);

    let mut y0 = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            y0.push(rho0[(i, j)].re);
            y0.push(rho0[(i, j)].im);
        }
    }
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
        dy.iter_mut().for_each(|d| *d = 0.0);
        for &(r, c, val) in &triplets {
            let z = Complex64::new(y[2 * c], y[2 * c + 1]);
            let p = val * z;
            dy[2 * r] += p.re;
            dy[2 * r + 1] += p.im;
        }
    };
    let mut out = Trajectory { times: Vec::new(), states: Vec::new() };
    ode::dormand_prince(rhs, 0.0, &y0, times, tol, |t, y| {
        let rho = DMatrix::from_fn(n, n, |i, j| {
            let k = i * n + j;
            Complex64::new(y[2 * k], y[2 * k + 1])
        });
        out.times.push(t);
        out.states.push(rho);
    })?;
    Ok(out)
}

/// Coherence magnitude on one edge of the diamond.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCoherence {
    pub lower: String,
    pub upper: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observables {
    pub populations: Vec<f64>,
    /// rho(upper) - rho(emitter) for diamond schemes.
    pub inversion: Option<f64>,
    pub coherences: Vec<EdgeCoherence>,
}

/// Populations, diamond inversion and the four edge coherences.
pub fn observables(scheme: &LevelScheme, state: &SteadyState) -> Observables {
    let n = state.rho.nrows();
    let populations = (0..n).map(|i| state.rho[(i, i)].re).collect();
    let (inversion, coherences) = match scheme.diamond_indices() {
        Ok([g, e, d, p]) => {
            let edges = [(g, e), (e, d), (p, d), (g, p)];
            let coh = edges
                .iter()
                .map(|&(a, b)| EdgeCoherence {
                    lower: scheme.levels[a].id.clone(),
                    upper: scheme.levels[b].id.clone(),
                    magnitude: state.rho[(a, b)].norm(),
                })
                .collect();
            (Some(state.rho[(d, d)].re - state.rho[(p, p)].re), coh)
        }
        Err(_) => (None, Vec::new()),
    };
    Observables { populations, inversion, coherences }
}
