//! Independent references for the unravelings: the Jaynes-Cummings and
//! dephasing master equations, and an exact total-system simulation of a
//! system coupled to a few truncated bosonic modes.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::kernels::{CorrelationKernel, Mode, TimeGrid};
use crate::linalg::{self, hermitian_eigenvalues, CMatrix, CVector, C64, I, ZERO};
use crate::models::{AnsatzTable, MemoryProfile};
use crate::{Error, Result};

/// Largest total Hilbert dimension [`exact_few_mode`] accepts by default.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Top-level population above which a truncated bath is flagged.
pub const LEAKAGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub grid: TimeGrid,
    pub rho: Vec<CMatrix>,
}

impl DensityMatrix {
    pub fn trace(&self, j: usize) -> C64 {
        self.rho[j].trace()
    }

    pub fn min_eigenvalue(&self, j: usize) -> f64 {
        hermitian_eigenvalues(&self.rho[j]).first().copied().unwrap_or(0.0)
    }
}

/// RK4 march of `dρ/dt = gen(c, ρ)` where `c` is the memory coefficient at
/// the stage time.
fn march<G>(profile: &MemoryProfile, rho0: &CMatrix, generator: G) -> DensityMatrix
where
    G: Fn(C64, &CMatrix) -> CMatrix,
{
    let grid = *profile.grid();
    let h = grid.dt();
    let mut rho = Vec::with_capacity(grid.len());
    rho.push(rho0.clone());
    for j in 0..grid.n_steps() {
        let [c0, cm, c1] = profile.stages(j);
        let x = &rho[j];
        let k1 = generator(c0, x);
        let k2 = generator(cm, &(x + &k1 * C64::new(0.5 * h, 0.0)));
        let k3 = generator(cm, &(x + &k2 * C64::new(0.5 * h, 0.0)));
        let k4 = generator(c1, &(x + &k3 * C64::new(h, 0.0)));
        let next = x + (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
        rho.push(next);
    }
    DensityMatrix { grid, rho }
}

fn check_rho0(rho0: &CMatrix, dim: usize) -> Result<()> {
    linalg::check_square(rho0, dim)?;
    if !linalg::is_hermitian(rho0, 1e-12) || (rho0.trace() - C64::new(1.0, 0.0)).norm() > 1e-8 {
        return Err(Error::invalid("initial density matrix must be Hermitian with unit trace"));
    }
    Ok(())
}

/// `dρ/dt = -i[(ω/2)σ_z + Im F σ_+σ_-, ρ] + Re F ([σ_-ρ, σ_+] + [σ_-, ρσ_+])`.
pub fn evolve_jc_master(table: &AnsatzTable, rho0: &CMatrix) -> Result<DensityMatrix> {
    check_rho0(rho0, 2)?;
    let sm = linalg::sigma_minus();
    let sp = linalg::sigma_plus();
    let n_op = &sp * &sm;
    let h0 = linalg::sigma_z() * C64::new(0.5 * table.omega(), 0.0);
    let profile = table.profile();
    Ok(march(&profile, rho0, |f, rho| {
        let h = &h0 + &n_op * C64::new(f.im, 0.0);
        let unitary = (&h * rho - rho * &h) * (-I);
        let jump = &sm * rho * &sp * C64::new(2.0, 0.0) - &n_op * rho - rho * &n_op;
        unitary + jump * C64::new(f.re, 0.0)
    }))
}

/// `dρ/dt = -i[(ω/2)σ_z, ρ] + (r/κ)² Re K(t) ([σ_zρ, σ_z] + [σ_z, ρσ_z])`.
pub fn evolve_dephasing_master(
    omega: f64,
    r: f64,
    kappa: f64,
    kernel: &CorrelationKernel,
    rho0: &CMatrix,
    grid: &TimeGrid,
) -> Result<DensityMatrix> {
    check_rho0(rho0, 2)?;
    kernel.validate()?;
    let sz = linalg::sigma_z();
    let h0 = &sz * C64::new(0.5 * omega, 0.0);
    let c2 = (r / kappa) * (r / kappa);
    let profile = MemoryProfile::from_kernel(kernel, grid)?;
    Ok(march(&profile, rho0, |k, rho| {
        let unitary = (&h0 * rho - rho * &h0) * (-I);
        let dephase = (&sz * rho * &sz - rho) * C64::new(2.0 * c2 * k.re, 0.0);
        unitary + dephase
    }))
}

/// Truncated bosonic bath: one Fock cutoff per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBath {
    modes: Vec<Mode>,
    cutoffs: Vec<usize>,
}

impl ModeBath {
    pub fn new(modes: Vec<Mode>, cutoffs: Vec<usize>) -> Result<Self> {
        if modes.len() != cutoffs.len() {
            return Err(Error::Dimension { expected: modes.len(), found: cutoffs.len() });
        }
        if cutoffs.iter().any(|&c| c < 2) {
            return Err(Error::invalid("every Fock cutoff must be at least 2"));
        }
        Ok(Self { modes, cutoffs })
    }

    /// All modes truncated at the same cutoff.
    pub fn uniform(modes: Vec<Mode>, cutoff: usize) -> Result<Self> {
        let n = modes.len();
        Self::new(modes, alloc::vec![cutoff; n])
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    /// Dimension of the truncated bath Hilbert space.
    pub fn dim(&self) -> usize {
        self.cutoffs.iter().product()
    }
}

/// Zero-temperature correlation function of the bath, `Σ |g|² e^{-iωτ}`.
pub fn kernel_of(bath: &ModeBath) -> CorrelationKernel {
    CorrelationKernel::ModeSum(bath.modes.clone())
}

#[derive(Debug, Clone)]
pub struct FewModeResult {
    pub rho: DensityMatrix,
    /// Largest population, over time, of top Fock levels that `L ⊗ a†`
    /// would push past the cutoff.
    pub leakage: f64,
    pub leakage_flagged: bool,
}

/// Total-system Schrödinger evolution in the interaction picture of the
/// bath, `H_tot(t) = H ⊗ 1 + Σ (g* L ⊗ a† e^{iωt} + g L† ⊗ a e^{-iωt})`,
/// from `|ψ0> ⊗ |0...0>`, reduced to the system at every node.
pub fn exact_few_mode(
    hamiltonian: &CMatrix,
    coupling: &CMatrix,
    bath: &ModeBath,
    psi0: &CVector,
    grid: &TimeGrid,
    max_dim: usize,
) -> Result<FewModeResult> {
    let d = hamiltonian.nrows();
    linalg::check_square(hamiltonian, d)?;
    linalg::check_square(coupling, d)?;
    if psi0.len() != d {
        return Err(Error::Dimension { expected: d, found: psi0.len() });
    }
    let b = bath.dim();
    if d.saturating_mul(b) > max_dim {
        return Err(Error::invalid("total Hilbert dimension exceeds the configured bound"));
    }
    let system = FewModeSystem::new(hamiltonian, coupling, bath);
    let mut psi = CVector::zeros(d * b);
    for s in 0..d {
        psi[s * b] = psi0[s];
    }
    let h = grid.dt();
    let mut rho = Vec::with_capacity(grid.len());
    let mut leakage = system.top_level_population(&psi);
    rho.push(system.reduce(&psi));
    for j in 0..grid.n_steps() {
        let t = grid.time(j);
        let k1 = system.apply(t, &psi);
        let k2 = system.apply(t + 0.5 * h, &(&psi + &k1 * C64::new(0.5 * h, 0.0)));
        let k3 = system.apply(t + 0.5 * h, &(&psi + &k2 * C64::new(0.5 * h, 0.0)));
        let k4 = system.apply(t + h, &(&psi + &k3 * C64::new(h, 0.0)));
        psi += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
        leakage = leakage.max(system.top_level_population(&psi));
        rho.push(system.reduce(&psi));
    }
    Ok(FewModeResult {
        rho: DensityMatrix { grid: *grid, rho },
        leakage,
        leakage_flagged: leakage > LEAKAGE_TOL,
    })
}

struct FewModeSystem<'a> {
    h: &'a CMatrix,
    l: &'a CMatrix,
    l_dag: CMatrix,
    bath: &'a ModeBath,
    strides: Vec<usize>,
    dim_bath: usize,
}

impl<'a> FewModeSystem<'a> {
    fn new(h: &'a CMatrix, l: &'a CMatrix, bath: &'a ModeBath) -> Self {
        let mut strides = alloc::vec![1; bath.cutoffs.len()];
        for k in (0..bath.cutoffs.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * bath.cutoffs[k + 1];
        }
        Self { h, l, l_dag: l.adjoint(), bath, strides, dim_bath: bath.dim() }
    }

    fn occupation(&self, mode: usize, b: usize) -> usize {
        (b / self.strides[mode]) % self.bath.cutoffs[mode]
    }

    /// `-i H_tot(t) ψ`.
    fn apply(&self, t: f64, psi: &CVector) -> CVector {
        let d = self.h.nrows();
        let nb = self.dim_bath;
        let mut out = CVector::zeros(d * nb);
        for so in 0..d {
            for si in 0..d {
                let hv = self.h[(so, si)];
                if hv == ZERO {
                    continue;
                }
                for b in 0..nb {
                    out[so * nb + b] += hv * psi[si * nb + b];
                }
            }
        }
        for (m, mode) in self.bath.modes.iter().enumerate() {
            let up = mode.coupling.conj() * C64::from_polar(1.0, mode.frequency * t);
            let down = mode.coupling * C64::from_polar(1.0, -mode.frequency * t);
            let stride = self.strides[m];
            let top = self.bath.cutoffs[m] - 1;
            for so in 0..d {
                for si in 0..d {
                    let lv = self.l[(so, si)];
                    let ldv = self.l_dag[(so, si)];
                    if lv == ZERO && ldv == ZERO {
                        continue;
                    }
                    for b in 0..nb {
                        let amp = psi[si * nb + b];
                        if amp == ZERO {
                            continue;
                        }
                        let n = self.occupation(m, b);
                        if n < top && lv != ZERO {
                            let f = ((n + 1) as f64).sqrt();
                            out[so * nb + b + stride] += up * lv * amp * f;
                        }
                        if n > 0 && ldv != ZERO {
                            let f = (n as f64).sqrt();
                            out[so * nb + b - stride] += down * ldv * amp * f;
                        }
                    }
                }
            }
        }
        out * (-I)
    }

    fn top_level_population(&self, psi: &CVector) -> f64 {
        let d = self.h.nrows();
        let nb = self.dim_bath;
        let mut total = 0.0;
        for m in 0..self.bath.modes.len() {
            let top = self.bath.cutoffs[m] - 1;
            for b in (0..nb).filter(|&b| self.occupation(m, b) == top) {
                for so in 0..d {
                    let v: C64 = (0..d).map(|si| self.l[(so, si)] * psi[si * nb + b]).sum();
                    total += v.norm_sqr();
                }
            }
        }
        total
    }

    fn reduce(&self, psi: &CVector) -> CMatrix {
        let d = self.h.nrows();
        let nb = self.dim_bath;
        CMatrix::from_fn(d, d, |a, c| (0..nb).map(|k| psi[a * nb + k] * psi[c * nb + k].conj()).sum())
    }
}
