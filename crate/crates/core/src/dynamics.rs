//! Linear and nonlinear NMQSD trajectories and two-times propagators.
//!
//! Every step `[t_j, t_{j+1})` holds the noise at its left value `z*_j` and
//! advances the linear equation
//!
//! ```text
//! ∂_t ψ = (-iH + z*_t L - c(t) L†L) ψ
//! ```
//!
//! with one classical RK4 step, evaluating the memory coefficient `c` at the
//! stage times. Products of step maps give the two-times propagators, so
//! the cocycle law holds up to rounding.

use alloc::boxed::Box;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::kernels::{CorrelationKernel, NoisePath, TimeGrid};
use crate::linalg::{self, CMatrix, CVector, C64, I, ZERO};
use crate::models::{solve_jc_ansatz, Ansatz, AnsatzTable, MemoryProfile, SystemModel};
use crate::{Error, Result};

/// Norms above this abort a trajectory.
pub const OVERFLOW_NORM: f64 = 1e150;

/// Below this, `L ψ` has no component transverse to `ψ` and the noise
/// cannot be read off the trajectory.
pub const IDENTIFIABILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryMode {
    /// Unnormalized solutions of the linear equation.
    Linear,
    /// Linear solutions rescaled to unit norm; the squared norms are kept as weights.
    NormalizedLinear,
    /// Normalized solutions of the nonlinear equation, driven by the shifted process.
    Nonlinear,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<CVector>,
    pub norms: Vec<f64>,
    /// `‖ψ_j‖²` of the unnormalized linear solution (normalized-linear mode only).
    pub weights: Option<Vec<f64>>,
    /// Noise fed to the linear flow; the shifted process for nonlinear runs.
    pub driving: NoisePath,
    /// The unshifted sample.
    pub raw_noise: NoisePath,
    pub mode: TrajectoryMode,
}

impl Trajectory {
    pub fn normalized_state(&self, j: usize) -> CVector {
        let n = self.states[j].norm();
        &self.states[j] / C64::new(n, 0.0)
    }
}

/// `A_s^t`, carrying the linear solution from `s` to `t` along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimesPropagator {
    pub s: f64,
    pub t: f64,
    pub matrix: CMatrix,
}

impl TwoTimesPropagator {
    /// Smallest over largest singular value.
    pub fn singular_value_ratio(&self) -> f64 {
        let sv = self.matrix.singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 { 0.0 } else { min / max }
    }

    /// `A† A`.
    pub fn gram(&self) -> CMatrix {
        self.matrix.adjoint() * &self.matrix
    }
}

/// Linear NMQSD flow of one model on one grid, with the memory term
/// precomputed at every RK4 stage.
#[derive(Debug, Clone)]
pub struct LinearFlow {
    model: SystemModel,
    grid: TimeGrid,
    profile: MemoryProfile,
    table: Option<AnsatzTable>,
    /// `-iH - c L†L` at (start, mid, end) of each step.
    drift: Vec<[CMatrix; 3]>,
}

impl LinearFlow {
    pub fn new(model: &SystemModel, grid: &TimeGrid) -> Result<Self> {
        if grid.t0() != 0.0 {
            return Err(Error::InvalidGrid("trajectory grids start at t = 0"));
        }
        let table = match model.ansatz() {
            Ansatz::JaynesCummings { omega } => Some(solve_jc_ansatz(omega, model.kernel(), grid)?),
            _ => None,
        };
        let profile = match &table {
            Some(t) => t.profile(),
            None => MemoryProfile::from_kernel(model.kernel(), grid)?,
        };
        let ldl = model.coupling_squared();
        let h_part = model.hamiltonian() * (-I);
        let drift = (0..grid.n_steps())
            .map(|j| profile.stages(j).map(|c| &h_part - &ldl * c))
            .collect();
        Ok(Self { model: model.clone(), grid: *grid, profile, table, drift })
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn profile(&self) -> &MemoryProfile {
        &self.profile
    }

    /// The solved ansatz table for Jaynes-Cummings models.
    pub fn ansatz_table(&self) -> Option<&AnsatzTable> {
        self.table.as_ref()
    }

    fn stage_generators(&self, j: usize, z_conj: C64) -> [CMatrix; 3] {
        let zl = self.model.coupling() * z_conj;
        let [a, m, b] = &self.drift[j];
        [a + &zl, m + &zl, b + &zl]
    }

    /// One RK4 step `t_j -> t_{j+1}` with the noise held at `z_conj`.
    pub fn step(&self, j: usize, z_conj: C64, psi: &CVector) -> CVector {
        let h = self.grid.dt();
        let [g0, gm, g1] = self.stage_generators(j, z_conj);
        let k1 = &g0 * psi;
        let k2 = &gm * (psi + &k1 * C64::new(0.5 * h, 0.0));
        let k3 = &gm * (psi + &k2 * C64::new(0.5 * h, 0.0));
        let k4 = &g1 * (psi + &k3 * C64::new(h, 0.0));
        psi + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
    }

    /// One RK4 step of the nonlinear equation with the shifted noise held at
    /// `z_conj`. On top of the linear generator this carries `<L†> c(t) L`,
    /// the part of `-(L† - <L†>) c(t) L` that normalization does not absorb,
    /// with `<L†>` taken in each stage state.
    pub fn step_nonlinear(&self, j: usize, z_conj: C64, psi: &CVector) -> CVector {
        let h = self.grid.dt();
        let [g0, gm, g1] = self.stage_generators(j, z_conj);
        let [c0, cm, c1] = self.profile.stages(j);
        let l = self.model.coupling();
        let rhs = |g: &CMatrix, c: C64, x: &CVector| -> CVector {
            let lx = l * x;
            let l_dag = x.dotc(&lx).conj() / C64::new(x.norm_squared(), 0.0);
            g * x + lx * (l_dag * c)
        };
        let k1 = rhs(&g0, c0, psi);
        let k2 = rhs(&gm, cm, &(psi + &k1 * C64::new(0.5 * h, 0.0)));
        let k3 = rhs(&gm, cm, &(psi + &k2 * C64::new(0.5 * h, 0.0)));
        let k4 = rhs(&g1, c1, &(psi + &k3 * C64::new(h, 0.0)));
        psi + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
    }

    /// The linear map of [`step`](Self::step).
    pub fn step_matrix(&self, j: usize, z_conj: C64) -> CMatrix {
        let h = self.grid.dt();
        let [g0, gm, g1] = self.stage_generators(j, z_conj);
        let id = linalg::identity(self.model.dim());
        let k1 = g0.clone();
        let k2 = &gm * (&id + &k1 * C64::new(0.5 * h, 0.0));
        let k3 = &gm * (&id + &k2 * C64::new(0.5 * h, 0.0));
        let k4 = &g1 * (&id + &k3 * C64::new(h, 0.0));
        id + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
    }

    fn check_path(&self, path: &NoisePath, last_step: usize) -> Result<()> {
        let pg = path.grid();
        if pg.t0() != self.grid.t0() || (pg.dt() - self.grid.dt()).abs() > 1e-12 * self.grid.dt() {
            return Err(Error::InvalidGrid("path grid does not match the flow grid"));
        }
        if pg.len() < last_step || last_step > self.grid.n_steps() {
            return Err(Error::Dimension { expected: last_step, found: pg.len() });
        }
        Ok(())
    }

    /// Advances `psi` from node `j0` to node `j1` along `path`.
    pub fn propagate(&self, psi: &CVector, path: &NoisePath, j0: usize, j1: usize) -> Result<CVector> {
        self.check_path(path, j1)?;
        let mut psi = psi.clone();
        for j in j0..j1 {
            psi = self.step(j, path.conj_value(j), &psi);
            check_overflow(psi.norm(), self.grid.time(j + 1))?;
        }
        Ok(psi)
    }
}

fn check_overflow(norm: f64, time: f64) -> Result<()> {
    if !norm.is_finite() || norm > OVERFLOW_NORM {
        return Err(Error::Overflow { time });
    }
    Ok(())
}

fn check_initial(flow: &LinearFlow, psi0: &CVector) -> Result<()> {
    if psi0.len() != flow.model.dim() {
        return Err(Error::Dimension { expected: flow.model.dim(), found: psi0.len() });
    }
    if (psi0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("initial state must be normalized"));
    }
    Ok(())
}

/// Unnormalized linear trajectory along `path`.
pub fn integrate_linear(flow: &LinearFlow, path: &NoisePath, psi0: &CVector) -> Result<Trajectory> {
    check_initial(flow, psi0)?;
    let n = flow.grid.n_steps();
    flow.check_path(path, n)?;
    let mut states = Vec::with_capacity(n + 1);
    let mut norms = Vec::with_capacity(n + 1);
    states.push(psi0.clone());
    norms.push(psi0.norm());
    for j in 0..n {
        let next = flow.step(j, path.conj_value(j), &states[j]);
        let norm = next.norm();
        check_overflow(norm, flow.grid.time(j + 1))?;
        states.push(next);
        norms.push(norm);
    }
    Ok(Trajectory {
        grid: flow.grid,
        states,
        norms,
        weights: None,
        driving: path.clone(),
        raw_noise: path.clone(),
        mode: TrajectoryMode::Linear,
    })
}

/// Linear trajectory rescaled to unit norm, keeping `‖ψ_j‖²` as weights.
pub fn integrate_normalized(flow: &LinearFlow, path: &NoisePath, psi0: &CVector) -> Result<Trajectory> {
    let mut traj = integrate_linear(flow, path, psi0)?;
    let weights = traj.norms.iter().map(|n| n * n).collect();
    for (psi, norm) in traj.states.iter_mut().zip(traj.norms.iter_mut()) {
        *psi /= C64::new(*norm, 0.0);
        *norm = 1.0;
    }
    traj.weights = Some(weights);
    traj.mode = TrajectoryMode::NormalizedLinear;
    Ok(traj)
}

/// Running value of `Σ_{k<=j} α(t_j - t_k) x_k dt` on the lattice.
#[derive(Debug)]
enum ShiftAccumulator {
    Dirac { kappa: f64 },
    Exponential { decay: Vec<C64>, weight: Vec<C64>, acc: Vec<C64> },
    Direct { lags: Vec<C64>, history: Vec<C64>, dt: f64 },
}

impl ShiftAccumulator {
    fn new(kernel: &CorrelationKernel, grid: &TimeGrid) -> Result<Self> {
        let h = grid.dt();
        Ok(match kernel {
            CorrelationKernel::Dirac { kappa } => Self::Dirac { kappa: *kappa },
            CorrelationKernel::OrnsteinUhlenbeck { kappa, gamma } => Self::Exponential {
                decay: alloc::vec![C64::new((-gamma * h).exp(), 0.0)],
                weight: alloc::vec![C64::new(0.5 * kappa * gamma * h, 0.0)],
                acc: alloc::vec![ZERO],
            },
            CorrelationKernel::ModeSum(modes) => Self::Exponential {
                decay: modes.iter().map(|m| C64::from_polar(1.0, -m.frequency * h)).collect(),
                weight: modes.iter().map(|m| C64::new(m.coupling.norm_sqr() * h, 0.0)).collect(),
                acc: alloc::vec![ZERO; modes.len()],
            },
            CorrelationKernel::Tabulated(_) => Self::Direct {
                lags: kernel.lattice_lags(h, grid.len())?,
                history: Vec::with_capacity(grid.len()),
                dt: h,
            },
        })
    }

    fn push(&mut self, x: C64) -> C64 {
        match self {
            Self::Dirac { kappa } => x * *kappa,
            Self::Exponential { decay, weight, acc } => {
                let mut total = ZERO;
                for ((a, d), w) in acc.iter_mut().zip(decay.iter()).zip(weight.iter()) {
                    *a = *a * d + w * x;
                    total += *a;
                }
                total
            }
            Self::Direct { lags, history, dt } => {
                history.push(x);
                let j = history.len() - 1;
                history.iter().enumerate().map(|(k, v)| lags[j - k] * v).sum::<C64>() * *dt
            }
        }
    }
}

/// Nonlinear trajectory, renormalized every step and driven by the shifted
/// process `z~_j = z_j + Σ_{k<=j} α(t_j - t_k) <L>_k dt`, where `<L>_k` is
/// taken in the normalized state at the left end of step `k`.
pub fn integrate_nonlinear(flow: &LinearFlow, raw_path: &NoisePath, psi0: &CVector) -> Result<Trajectory> {
    check_initial(flow, psi0)?;
    let n = flow.grid.n_steps();
    flow.check_path(raw_path, n)?;
    let l = flow.model.coupling();
    let mut shift = ShiftAccumulator::new(flow.model.kernel(), &flow.grid)?;
    let mut states = Vec::with_capacity(n + 1);
    let mut norms = Vec::with_capacity(n + 1);
    let mut driving = Vec::with_capacity(n + 1);
    let mut psi = psi0 / C64::new(psi0.norm(), 0.0);
    for j in 0..=n {
        let expect_l = psi.dotc(&(l * &psi));
        let z_shifted = raw_path.value(j) + shift.push(expect_l);
        driving.push(z_shifted.conj());
        states.push(psi.clone());
        norms.push(psi.norm());
        if j == n {
            break;
        }
        let next = flow.step_nonlinear(j, z_shifted.conj(), &psi);
        let norm = next.norm();
        check_overflow(norm, flow.grid.time(j + 1))?;
        if norm == 0.0 {
            return Err(Error::Overflow { time: flow.grid.time(j + 1) });
        }
        psi = next / C64::new(norm, 0.0);
    }
    let raw = raw_path.slice(0, n)?;
    Ok(Trajectory {
        grid: flow.grid,
        states,
        norms,
        weights: None,
        driving: NoisePath::new(flow.grid, driving)?,
        raw_noise: raw,
        mode: TrajectoryMode::Nonlinear,
    })
}

fn node_pair(grid: &TimeGrid, s: f64, t: f64) -> Result<(usize, usize)> {
    let i = grid.node(s)?;
    let k = grid.node(t)?;
    if i > k {
        return Err(Error::invalid("propagators need s <= t"));
    }
    Ok((i, k))
}

/// `A_s^t` from the product of RK4 step maps.
pub fn propagator_numeric(flow: &LinearFlow, path: &NoisePath, s: f64, t: f64) -> Result<TwoTimesPropagator> {
    let (i, k) = node_pair(&flow.grid, s, t)?;
    propagator_numeric_nodes(flow, path, i, k)
}

pub(crate) fn propagator_numeric_nodes(
    flow: &LinearFlow,
    path: &NoisePath,
    i: usize,
    k: usize,
) -> Result<TwoTimesPropagator> {
    flow.check_path(path, k)?;
    let mut a = linalg::identity(flow.model.dim());
    for j in i..k {
        a = flow.step_matrix(j, path.conj_value(j)) * a;
        check_overflow(a.norm(), flow.grid.time(j + 1))?;
    }
    Ok(TwoTimesPropagator { s: flow.grid.time(i), t: flow.grid.time(k), matrix: a })
}

/// Per-step weights `w_j = ∫_{t_j}^{t_{j+1}} exp(-iωτ - ∫_s^τ F) dτ`
/// (Simpson, `F` linear within the step) and `∫_s^t F`.
pub(crate) fn jc_noise_weights(omega: f64, profile: &MemoryProfile, i: usize, k: usize) -> (Vec<C64>, C64) {
    let grid = profile.grid();
    let h = grid.dt();
    let mut phi = ZERO;
    let mut weights = Vec::with_capacity(k - i);
    for j in i..k {
        let [a, m, _] = profile.stages(j);
        let t = grid.time(j);
        let phi_mid = phi + (a + m) * (0.25 * h);
        let phi_end = phi + profile.step_integral(j);
        let g = |tau: f64, p: C64| (-(I * omega * tau) - p).exp();
        let w = (g(t, phi) + g(t + 0.5 * h, phi_mid) * 4.0 + g(t + h, phi_end)) * (h / 6.0);
        weights.push(w);
        phi = phi_end;
    }
    (weights, phi)
}

pub(crate) fn jc_propagator_from_profile(
    omega: f64,
    profile: &MemoryProfile,
    path: &NoisePath,
    i: usize,
    k: usize,
) -> TwoTimesPropagator {
    let grid = profile.grid();
    let (s, t) = (grid.time(i), grid.time(k));
    let (weights, phi) = jc_noise_weights(omega, profile, i, k);
    let integral: C64 = (i..k).zip(weights.iter()).map(|(j, w)| path.conj_value(j) * w).sum();
    let upper = (-(I * (0.5 * omega * (t - s))) - phi).exp();
    let lower = (I * (0.5 * omega * (t - s))).exp();
    let off = (I * (0.5 * omega * (s + t))).exp() * integral;
    let matrix = CMatrix::from_row_slice(2, 2, &[upper, ZERO, off, lower]);
    TwoTimesPropagator { s, t, matrix }
}

/// Closed-form Jaynes-Cummings propagator. Only `z*` on `[s, t)` enters.
pub fn propagator_analytic_jc(table: &AnsatzTable, path: &NoisePath, s: f64, t: f64) -> Result<TwoTimesPropagator> {
    let (i, k) = node_pair(table.grid(), s, t)?;
    if path.grid().len() < k || path.grid().t0() != 0.0 {
        return Err(Error::InvalidGrid("path does not cover [0, t) on the table grid"));
    }
    Ok(jc_propagator_from_profile(table.omega(), &table.profile(), path, i, k))
}

pub(crate) fn dephasing_propagator_from_profile(
    omega: f64,
    coupling: f64,
    profile: &MemoryProfile,
    path: &NoisePath,
    i: usize,
    k: usize,
) -> TwoTimesPropagator {
    let grid = profile.grid();
    let (s, t) = (grid.time(i), grid.time(k));
    let theta = profile.integral(i, k);
    let noise: C64 = (i..k).map(|j| path.conj_value(j)).sum::<C64>() * grid.dt();
    let common = -(theta * (coupling * coupling));
    let rot = I * (0.5 * omega * (t - s));
    let up = (common - rot + noise * coupling).exp();
    let down = (common + rot - noise * coupling).exp();
    TwoTimesPropagator { s, t, matrix: CMatrix::from_row_slice(2, 2, &[up, ZERO, ZERO, down]) }
}

/// Closed-form dephasing propagator
/// `exp(-i(ω/2)(t-s)σ_z - (r/κ)² Θ(t,s) + (r/κ) ∫_s^t z* dτ σ_z)`.
pub fn propagator_analytic_dephasing(
    omega: f64,
    r: f64,
    kappa: f64,
    kernel: &CorrelationKernel,
    path: &NoisePath,
    s: f64,
    t: f64,
) -> Result<TwoTimesPropagator> {
    let grid = path.grid();
    if grid.t0() != 0.0 {
        return Err(Error::InvalidGrid("path grid must start at t = 0"));
    }
    let (i, k) = node_pair(grid, s, t)?;
    let sub = grid.subgrid(0, k)?;
    let profile = MemoryProfile::from_kernel(kernel, &sub)?;
    Ok(dephasing_propagator_from_profile(omega, r / kappa, &profile, path, i, k))
}

/// Builds `A_s^t` for one model on one grid: closed forms for the
/// Jaynes-Cummings and dephasing models, step-map products otherwise.
#[derive(Debug, Clone)]
pub enum Propagators {
    JaynesCummings { omega: f64, profile: MemoryProfile },
    Dephasing { omega: f64, coupling: f64, profile: MemoryProfile },
    Numeric(Box<LinearFlow>),
}

impl Propagators {
    pub fn for_model(model: &SystemModel, grid: &TimeGrid) -> Result<Self> {
        if grid.t0() != 0.0 {
            return Err(Error::InvalidGrid("propagator grids must start at t = 0"));
        }
        Ok(match model.ansatz() {
            Ansatz::JaynesCummings { omega } => {
                let table = solve_jc_ansatz(omega, model.kernel(), grid)?;
                Self::JaynesCummings { omega, profile: table.profile() }
            }
            Ansatz::Dephasing { omega, r, kappa } => Self::Dephasing {
                omega,
                coupling: r / kappa,
                profile: MemoryProfile::from_kernel(model.kernel(), grid)?,
            },
            Ansatz::StaticL => Self::Numeric(Box::new(LinearFlow::new(model, grid)?)),
        })
    }

    /// Same as [`for_model`](Self::for_model) but always integrates numerically.
    pub fn numeric(model: &SystemModel, grid: &TimeGrid) -> Result<Self> {
        Ok(Self::Numeric(Box::new(LinearFlow::new(model, grid)?)))
    }

    pub fn grid(&self) -> &TimeGrid {
        match self {
            Self::JaynesCummings { profile, .. } | Self::Dephasing { profile, .. } => profile.grid(),
            Self::Numeric(flow) => flow.grid(),
        }
    }

    /// `A` between grid nodes `i <= k`; `path` must start at `t = 0` and
    /// cover nodes `i..k`.
    pub fn between(&self, path: &NoisePath, i: usize, k: usize) -> Result<TwoTimesPropagator> {
        if i > k || k > self.grid().n_steps() {
            return Err(Error::invalid("propagator nodes out of range"));
        }
        if path.grid().t0() != 0.0 || path.grid().len() < k {
            return Err(Error::InvalidGrid("path does not cover the propagation interval"));
        }
        let a = match self {
            Self::JaynesCummings { omega, profile } => jc_propagator_from_profile(*omega, profile, path, i, k),
            Self::Dephasing { omega, coupling, profile } => {
                dephasing_propagator_from_profile(*omega, *coupling, profile, path, i, k)
            }
            Self::Numeric(flow) => return propagator_numeric_nodes(flow, path, i, k),
        };
        if !a.matrix.iter().all(|v| v.re.is_finite() && v.im.is_finite()) || a.matrix.norm() > OVERFLOW_NORM {
            return Err(Error::Overflow { time: a.t });
        }
        Ok(a)
    }
}

/// Reads the driving noise back off a trajectory.
///
/// On each step the noise is constant, so the half-step central difference
/// `(ψ_{j+1} - ψ_j)/dt` at the step midpoint, projected orthogonally to the
/// state, gives `z*_j` by least squares against `P L ψ`. The last node
/// never drives the flow and repeats the previous value.
pub fn recover_noise(flow: &LinearFlow, states: &[CVector]) -> Result<NoisePath> {
    let n = flow.grid.n_steps();
    if states.len() != n + 1 {
        return Err(Error::Dimension { expected: n + 1, found: states.len() });
    }
    let h = flow.grid.dt();
    let l = flow.model.coupling();
    let h_part = flow.model.hamiltonian() * (-I);
    let ldl = flow.model.coupling_squared();
    let unit = |v: &CVector| v / C64::new(v.norm(), 0.0);
    let mut values = Vec::with_capacity(n + 1);
    for j in 0..n {
        let a = unit(&states[j]);
        let b = unit(&states[j + 1]);
        let mid = unit(&(&a + &b));
        let project = |v: CVector| {
            let overlap = mid.dotc(&v);
            v - &mid * overlap
        };
        let lpsi = project(l * &mid);
        let denom = lpsi.norm_squared();
        if denom.sqrt() < IDENTIFIABILITY_TOL {
            return Err(Error::UnidentifiableNoise { step: j });
        }
        let [_, c_mid, _] = flow.profile.stages(j);
        let drift = (&h_part - &ldl * c_mid) * &mid;
        let residual = project((&b - &a) / C64::new(h, 0.0) - drift);
        values.push(lpsi.dotc(&residual) / denom);
    }
    values.push(values.last().copied().unwrap_or(ZERO));
    NoisePath::new(flow.grid, values)
}
