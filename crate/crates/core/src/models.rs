//! Open-system instances and their noise-independent memory terms.
//!
//! For every supported model the ansatz operator is proportional to the
//! coupling, `O(t,s) = f(t,s) L`, so the memory term of the linear
//! equation collapses to
//!
//! ```text
//! L† ∫_0^t α(t-s) O(t,s) ds = c(t) L†L
//! ```
//!
//! with `c = F` for the Jaynes-Cummings model and `c = K` (the integrated
//! kernel) when `f ≡ 1`.

use alloc::vec::Vec;

use crate::kernels::{CorrelationKernel, TimeGrid};
use crate::linalg::{self, is_hermitian, CMatrix, C64, I, ZERO};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ansatz {
    /// `H = (ω/2) σ_z`, `L = σ_-`, `O(t,s) = f(t,s) σ_-`.
    JaynesCummings { omega: f64 },
    /// `H = (ω/2) σ_z`, `L = (r/κ) σ_z`, `O(t,s) = L`.
    Dephasing { omega: f64, r: f64, kappa: f64 },
    /// User model for which the caller asserts `O(t,s) = L` is exact.
    StaticL,
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    hamiltonian: CMatrix,
    coupling: CMatrix,
    kernel: CorrelationKernel,
    ansatz: Ansatz,
}

impl SystemModel {
    pub fn jaynes_cummings(omega: f64, kernel: CorrelationKernel) -> Result<Self> {
        kernel.validate()?;
        let h = linalg::sigma_z() * C64::new(0.5 * omega, 0.0);
        Ok(Self {
            hamiltonian: h,
            coupling: linalg::sigma_minus(),
            kernel,
            ansatz: Ansatz::JaynesCummings { omega },
        })
    }

    pub fn dephasing(omega: f64, r: f64, kappa: f64, kernel: CorrelationKernel) -> Result<Self> {
        kernel.validate()?;
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::invalid("dephasing time scale kappa must be positive"));
        }
        let h = linalg::sigma_z() * C64::new(0.5 * omega, 0.0);
        let l = linalg::sigma_z() * C64::new(r / kappa, 0.0);
        Ok(Self { hamiltonian: h, coupling: l, kernel, ansatz: Ansatz::Dephasing { omega, r, kappa } })
    }

    /// A model where `O(t,s) = L` is claimed to be exact. Nothing here
    /// verifies that claim.
    pub fn static_coupling(hamiltonian: CMatrix, coupling: CMatrix, kernel: CorrelationKernel) -> Result<Self> {
        kernel.validate()?;
        let dim = hamiltonian.nrows();
        if dim == 0 {
            return Err(Error::invalid("system dimension must be positive"));
        }
        linalg::check_square(&hamiltonian, dim)?;
        linalg::check_square(&coupling, dim)?;
        if !is_hermitian(&hamiltonian, 1e-12 * (1.0 + linalg::max_abs_entry(&hamiltonian))) {
            return Err(Error::invalid("Hamiltonian must be Hermitian"));
        }
        Ok(Self { hamiltonian, coupling, kernel, ansatz: Ansatz::StaticL })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn coupling(&self) -> &CMatrix {
        &self.coupling
    }

    pub fn kernel(&self) -> &CorrelationKernel {
        &self.kernel
    }

    pub fn ansatz(&self) -> Ansatz {
        self.ansatz
    }

    pub fn coupling_squared(&self) -> CMatrix {
        self.coupling.adjoint() * &self.coupling
    }

    /// Same system with another kernel.
    pub fn with_kernel(&self, kernel: CorrelationKernel) -> Result<Self> {
        kernel.validate()?;
        Ok(Self { kernel, ..self.clone() })
    }
}

/// Solution of the Jaynes-Cummings ansatz system
/// `∂_t f(t,s) = (iω + F(t)) f(t,s)`, `f(s,s) = 1`,
/// `F(t) = ∫_0^t α(t-s) f(t,s) ds`.
#[derive(Debug, Clone)]
pub struct AnsatzTable {
    grid: TimeGrid,
    omega: f64,
    /// Row `i` holds `f(t_i, s_j)` for `j = 0..=i`.
    f: Vec<C64>,
    rates: Vec<C64>,
    /// `F(0+)`: `κ/2` for the Dirac kernel, `0` otherwise.
    initial_rate: C64,
}

impl AnsatzTable {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `f(t_i, s_j)` for `j <= i`.
    pub fn f(&self, i: usize, j: usize) -> C64 {
        assert!(j <= i, "f(t,s) is only defined for s <= t");
        self.f[i * (i + 1) / 2 + j]
    }

    /// `F(t_i)`.
    pub fn rate(&self, i: usize) -> C64 {
        self.rates[i]
    }

    pub fn rates(&self) -> &[C64] {
        &self.rates
    }

    /// `M(t_i) = F(t_i) σ_-`.
    pub fn memory(&self, i: usize) -> CMatrix {
        linalg::sigma_minus() * self.rates[i]
    }

    /// Memory coefficient profile used by integrators: `F` linear within each step.
    pub fn profile(&self) -> MemoryProfile {
        let n = self.grid.n_steps();
        let stages = (0..n)
            .map(|j| {
                let start = if j == 0 { self.initial_rate } else { self.rates[j] };
                let end = self.rates[j + 1];
                [start, (start + end) * 0.5, end]
            })
            .collect();
        MemoryProfile { grid: self.grid, nodes: self.rates.clone(), stages }
    }
}

/// Marches the ansatz system in `t`. `F(t_i)` uses the trapezoidal rule in
/// `s`, which reproduces `F = κ/2` for the lattice Dirac kernel, and `f` is
/// propagated with the trapezoidal integral of `iω + F`. The implicit
/// dependence of `F(t_i)` on itself is resolved by fixed-point iteration.
pub fn solve_jc_ansatz(omega: f64, kernel: &CorrelationKernel, grid: &TimeGrid) -> Result<AnsatzTable> {
    kernel.validate()?;
    let n = grid.len();
    let h = grid.dt();
    let lags = kernel.lattice_lags(h, n)?;
    let mut f = Vec::with_capacity(n * (n + 1) / 2);
    let mut rates = Vec::with_capacity(n);
    f.push(C64::new(1.0, 0.0));
    rates.push(ZERO);

    let mut base = Vec::with_capacity(n);
    for i in 1..n {
        let prev = (i - 1) * i / 2;
        let carry = (I * omega * h + rates[i - 1] * (0.5 * h)).exp();
        base.clear();
        base.extend(f[prev..prev + i].iter().map(|v| v * carry));

        // F_i = a + B exp(h F_i / 2)
        let a = lags[0] * (0.5 * h);
        let mut b = lags[i] * base[0] * (if i == 0 { 0.0 } else { 0.5 * h });
        for j in 1..i {
            b += lags[i - j] * base[j] * h;
        }
        let mut rate = rates[i - 1];
        let mut converged = false;
        for _ in 0..200 {
            let next = a + b * (rate * (0.5 * h)).exp();
            let delta = (next - rate).norm();
            rate = next;
            if !rate.is_finite() {
                break;
            }
            if delta <= 1e-15 * (1.0 + rate.norm()) {
                converged = true;
                break;
            }
        }
        if !converged || !rate.is_finite() {
            return Err(Error::Overflow { time: grid.time(i) });
        }
        let close = (rate * (0.5 * h)).exp();
        f.extend(base.iter().map(|v| v * close));
        f.push(C64::new(1.0, 0.0));
        rates.push(rate);
    }

    let initial_rate = if kernel.is_markovian() { kernel.integral_right(0.0)? } else { ZERO };
    Ok(AnsatzTable { grid: *grid, omega, f, rates, initial_rate })
}

/// Scalar memory coefficient `c(t)` at the nodes and at the three RK4
/// stage times (start, midpoint, end) of every step. Stage values at a
/// step start are right limits, which matters only for the Dirac kernel
/// at `t = 0`.
#[derive(Debug, Clone)]
pub struct MemoryProfile {
    grid: TimeGrid,
    nodes: Vec<C64>,
    stages: Vec<[C64; 3]>,
}

impl MemoryProfile {
    /// `c = K(t) = ∫_0^t α`, exact per kernel family.
    pub fn from_kernel(kernel: &CorrelationKernel, grid: &TimeGrid) -> Result<Self> {
        let nodes = grid.times().map(|t| kernel.integral(t)).collect::<Result<Vec<_>>>()?;
        let stages = (0..grid.n_steps())
            .map(|j| {
                let t = grid.time(j);
                Ok([
                    kernel.integral_right(t)?,
                    kernel.integral(t + 0.5 * grid.dt())?,
                    kernel.integral(grid.time(j + 1))?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: *grid, nodes, stages })
    }

    /// Profile of a model; Jaynes-Cummings models solve their ansatz table.
    pub fn for_model(model: &SystemModel, grid: &TimeGrid) -> Result<Self> {
        match model.ansatz() {
            Ansatz::JaynesCummings { omega } => Ok(solve_jc_ansatz(omega, model.kernel(), grid)?.profile()),
            _ => Self::from_kernel(model.kernel(), grid),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `c(t_j)`.
    pub fn node(&self, j: usize) -> C64 {
        self.nodes[j]
    }

    /// `[c(t_j+), c(t_j + dt/2), c(t_{j+1})]`.
    pub fn stages(&self, j: usize) -> [C64; 3] {
        self.stages[j]
    }

    /// Simpson estimate of `∫ c` over step `j`.
    pub fn step_integral(&self, j: usize) -> C64 {
        let [a, m, b] = self.stages[j];
        (a + m * 4.0 + b) * (self.grid.dt() / 6.0)
    }

    /// `∫_{t_i}^{t_k} c`, `i <= k`.
    pub fn integral(&self, i: usize, k: usize) -> C64 {
        (i..k).map(|j| self.step_integral(j)).sum()
    }
}

/// `L† M(t_i) = L† ∫_0^{t_i} α(t_i - s) O(t_i, s) ds` at every node.
pub fn memory_operator(model: &SystemModel, grid: &TimeGrid) -> Result<Vec<CMatrix>> {
    let profile = MemoryProfile::for_model(model, grid)?;
    let ldl = model.coupling_squared();
    Ok((0..grid.len()).map(|j| &ldl * profile.node(j)).collect())
}

/// `Θ(t_k, t_i) = ∫_{t_i}^{t_k} K(τ) dτ` from a `K` profile.
pub fn theta(profile: &MemoryProfile, i: usize, k: usize) -> C64 {
    profile.integral(i, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_max: f64, dt: f64) -> TimeGrid {
        TimeGrid::spanning(t_max, dt).unwrap()
    }

    #[test]
    fn dirac_rate_is_half_kappa() {
        let table = solve_jc_ansatz(1.3, &CorrelationKernel::dirac(0.8), &grid(1.0, 0.01)).unwrap();
        assert_eq!(table.rate(0), ZERO);
        for i in 1..table.grid().len() {
            assert!((table.rate(i) - C64::new(0.4, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_of_f_is_one() {
        let table = solve_jc_ansatz(1.0, &CorrelationKernel::ornstein_uhlenbeck(1.0, 2.0), &grid(1.0, 0.05)).unwrap();
        for i in 0..table.grid().len() {
            assert_eq!(table.f(i, i), C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn f_factorizes_through_rate_integral() {
        // f(t,s) = exp(iω(t-s) + ∫_s^t F)
        let omega = 0.7;
        let g = grid(1.0, 0.01);
        let table = solve_jc_ansatz(omega, &CorrelationKernel::ornstein_uhlenbeck(1.0, 1.5), &g).unwrap();
        let (i, j) = (80, 30);
        let mut phi = ZERO;
        for k in j..i {
            phi += (table.rate(k) + table.rate(k + 1)) * (0.5 * g.dt());
        }
        let expect = (I * omega * (g.time(i) - g.time(j)) + phi).exp();
        assert!((table.f(i, j) - expect).norm() < 1e-12);
    }

    #[test]
    fn memory_operator_vanishes_at_zero() {
        let model = SystemModel::dephasing(1.0, 0.5, 1.0, CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0)).unwrap();
        let m = memory_operator(&model, &grid(1.0, 0.1)).unwrap();
        assert!(m[0].iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn dephasing_memory_is_scaled_identity() {
        let model = SystemModel::dephasing(1.0, 0.5, 2.0, CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0)).unwrap();
        let g = grid(1.0, 0.1);
        let m = memory_operator(&model, &g).unwrap();
        let k1 = 0.5 * (1.0 - (-1.0f64).exp());
        let expect = linalg::identity(2) * C64::new(0.0625 * k1, 0.0);
        assert!((&m[10] - expect).iter().all(|x| x.norm() < 1e-14));
    }

    #[test]
    fn static_model_rejects_non_hermitian_hamiltonian() {
        let h = linalg::sigma_minus();
        let err = SystemModel::static_coupling(h, linalg::sigma_z(), CorrelationKernel::dirac(1.0));
        assert!(err.is_err());
    }
}
