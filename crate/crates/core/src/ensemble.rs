//! Monte Carlo estimators of the reduced state and of the squared-norm
//! statistics of linear trajectories.
//!
//! Trajectories are generated in fixed chunks, and the chunk sums are folded in
//! index order. The result for a given seed is therefore identical for any
//! number of worker threads.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use nalgebra::DMatrix;

use crate::dynamics::{integrate_linear, integrate_nonlinear, integrate_normalized, LinearFlow};
use crate::kernels::{derive_seed, Continuation, GaussianProcess, TimeGrid};
use crate::linalg::{CMatrix, CVector, C64};
use crate::models::SystemModel;
use crate::par::{self, CHUNK};
use crate::{Error, Result};

/// Share of aborted trajectories above which an estimate is flagged.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnravelMode {
    /// Mean of unnormalized linear projectors.
    Linear,
    /// Mean of normalized projectors weighted by the squared linear norm.
    NormalizedWeighted,
    /// Mean of normalized projectors of nonlinear trajectories.
    Nonlinear,
}

/// Running first and second entrywise moments of a matrix-valued sample.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    sum: CMatrix,
    sum_sq: DMatrix<f64>,
    count: usize,
}

impl Moments {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        Self { sum: CMatrix::zeros(rows, cols), sum_sq: DMatrix::zeros(rows, cols), count: 0 }
    }

    pub(crate) fn push(&mut self, x: &CMatrix) {
        self.sum += x;
        self.sum_sq.zip_apply(x, |s, v| *s += v.norm_sqr());
        self.count += 1;
    }

    pub(crate) fn merge(&mut self, other: &Moments) {
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
        self.count += other.count;
    }

    pub(crate) fn count(&self) -> usize {
        self.count
    }

    pub(crate) fn mean(&self) -> CMatrix {
        if self.count == 0 {
            return self.sum.clone();
        }
        &self.sum / C64::new(self.count as f64, 0.0)
    }

    /// Largest entrywise standard error of the mean.
    pub(crate) fn stderr(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(self.sum_sq.iter())
            .map(|(s, q)| {
                let m = s / n;
                let var = (q / n - m.norm_sqr()).max(0.0) * n / (n - 1.0);
                (var / n).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Per-node moments over `n` samples, plus the number of samples that
/// overflowed. Any other error aborts the whole estimate.
pub(crate) fn accumulate<F>(n: usize, shape: (usize, usize), nodes: usize, sample: F) -> Result<(Vec<Moments>, usize)>
where
    F: Fn(usize) -> Result<Vec<CMatrix>> + Sync + Send,
{
    let n_chunks = n.div_ceil(CHUNK);
    let chunks = par::map_indices(0..n_chunks, |c| -> Result<(Vec<Moments>, usize)> {
        let mut acc = alloc::vec![Moments::new(shape.0, shape.1); nodes];
        let mut aborted = 0;
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            match sample(i) {
                Ok(values) => acc.iter_mut().zip(values.iter()).for_each(|(m, v)| m.push(v)),
                Err(Error::Overflow { .. }) => aborted += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((acc, aborted))
    });
    let mut total = alloc::vec![Moments::new(shape.0, shape.1); nodes];
    let mut aborted = 0;
    for chunk in chunks {
        let (acc, a) = chunk?;
        total.iter_mut().zip(acc.iter()).for_each(|(t, m)| t.merge(m));
        aborted += a;
    }
    Ok((total, aborted))
}

pub(crate) fn within_abort_budget(aborted: usize, n: usize) -> bool {
    (aborted as f64) <= MAX_ABORT_FRACTION * n as f64
}

#[derive(Debug, Clone)]
pub struct UnravelEstimate {
    pub grid: TimeGrid,
    pub rho_hat: Vec<CMatrix>,
    /// Largest entrywise standard error at each node.
    pub stderr: Vec<f64>,
    pub n_traj: usize,
    pub n_aborted: usize,
    /// False when more than 1% of the trajectories aborted.
    pub valid: bool,
    pub mode: UnravelMode,
}

/// Estimates the reduced state on `grid` from `n_traj` trajectories.
pub fn estimate_rho(
    model: &SystemModel,
    psi0: &CVector,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    mode: UnravelMode,
) -> Result<UnravelEstimate> {
    if n_traj < 2 {
        return Err(Error::invalid("an ensemble needs at least two trajectories"));
    }
    let flow = LinearFlow::new(model, grid)?;
    let process = GaussianProcess::new(model.kernel(), grid)?;
    let d = model.dim();
    let (moments, n_aborted) = accumulate(n_traj, (d, d), grid.len(), |i| {
        let path = process.sample(seed, i as u64);
        Ok(match mode {
            UnravelMode::Linear => {
                let traj = integrate_linear(&flow, &path, psi0)?;
                traj.states.iter().map(|psi| psi * psi.adjoint()).collect()
            }
            UnravelMode::NormalizedWeighted => {
                let traj = integrate_normalized(&flow, &path, psi0)?;
                let weights = traj.weights.as_deref().unwrap_or_default();
                traj.states
                    .iter()
                    .zip(weights)
                    .map(|(psi, w)| psi * psi.adjoint() * C64::new(*w, 0.0))
                    .collect()
            }
            UnravelMode::Nonlinear => {
                let traj = integrate_nonlinear(&flow, &path, psi0)?;
                traj.states.iter().map(|psi| psi * psi.adjoint()).collect()
            }
        })
    })?;
    Ok(UnravelEstimate {
        grid: *grid,
        rho_hat: moments.iter().map(Moments::mean).collect(),
        stderr: moments.iter().map(Moments::stderr).collect(),
        n_traj,
        n_aborted,
        valid: within_abort_budget(n_aborted, n_traj),
        mode,
    })
}

/// Conditional test of the martingale property for one fixed past.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalNorm {
    pub past_index: usize,
    /// `‖ψ_s‖²` along the fixed past.
    pub norm_sq_s: f64,
    /// Monte Carlo mean of `‖ψ_t‖²` over continuations of the past.
    pub conditional_mean: f64,
    pub stderr: f64,
    pub n_aborted: usize,
}

impl ConditionalNorm {
    /// `|E[‖ψ_t‖² | past] - ‖ψ_s‖²|` in units of the standard error.
    pub fn deviation_in_stderr(&self) -> f64 {
        (self.conditional_mean - self.norm_sq_s).abs() / self.stderr
    }
}

#[derive(Debug, Clone)]
pub struct NormStats {
    pub grid: TimeGrid,
    pub mean_sq_norm: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_traj: usize,
    pub n_aborted: usize,
    pub valid: bool,
    pub s: f64,
    pub t: f64,
    pub conditional: Vec<ConditionalNorm>,
}

/// Unconditional mean of `‖ψ_t‖²` on `grid`, and for each of `n_pasts`
/// sampled pasts on `[0, s]` the conditional mean of `‖ψ_t‖²` over
/// `n_traj` continuations.
#[allow(clippy::too_many_arguments)]
pub fn norm_statistics(
    model: &SystemModel,
    psi0: &CVector,
    grid: &TimeGrid,
    n_traj: usize,
    seed: u64,
    s: f64,
    t: f64,
    n_pasts: usize,
) -> Result<NormStats> {
    if n_traj < 2 {
        return Err(Error::invalid("an ensemble needs at least two trajectories"));
    }
    let is = grid.node(s)?;
    let it = grid.node(t)?;
    if is >= it {
        return Err(Error::invalid("norm statistics need s < t"));
    }
    let flow = LinearFlow::new(model, grid)?;
    let process = GaussianProcess::new(model.kernel(), grid)?;
    let uncond_seed = derive_seed(seed, 0);
    let (moments, n_aborted) = accumulate(n_traj, (1, 1), grid.len(), |i| {
        let traj = integrate_linear(&flow, &process.sample(uncond_seed, i as u64), psi0)?;
        Ok(traj.norms.iter().map(|n| CMatrix::from_element(1, 1, C64::new(n * n, 0.0))).collect())
    })?;

    let past_grid = grid.subgrid(0, is)?;
    let past_process = GaussianProcess::new(model.kernel(), &past_grid)?;
    let future = Continuation::new(model.kernel(), &past_grid, it - is + 1)?;
    let mut conditional = Vec::with_capacity(n_pasts);
    for p in 0..n_pasts {
        let past = past_process.sample(derive_seed(seed, 1), p as u64);
        let psi_s = flow.propagate(psi0, &past, 0, is)?;
        let mean = future.mean(&past)?;
        let cont_seed = derive_seed(seed, 2 + p as u64);
        let (m, aborted) = accumulate(n_traj, (1, 1), 1, |i| {
            let path = future.sample(&past, &mean, cont_seed, i as u64)?;
            let psi_t = flow.propagate(&psi_s, &path, is, it)?;
            Ok(alloc::vec![CMatrix::from_element(1, 1, C64::new(psi_t.norm_squared(), 0.0))])
        })?;
        conditional.push(ConditionalNorm {
            past_index: p,
            norm_sq_s: psi_s.norm_squared(),
            conditional_mean: m[0].mean()[(0, 0)].re,
            stderr: m[0].stderr(),
            n_aborted: aborted,
        });
    }
    Ok(NormStats {
        grid: *grid,
        mean_sq_norm: moments.iter().map(|m| m.mean()[(0, 0)].re).collect(),
        stderr: moments.iter().map(Moments::stderr).collect(),
        n_traj,
        n_aborted,
        valid: within_abort_budget(n_aborted, n_traj)
            && conditional.iter().all(|c| within_abort_budget(c.n_aborted, n_traj)),
        s: grid.time(is),
        t: grid.time(it),
        conditional,
    })
}
