//! Environmental correlation kernels and the colored complex Gaussian
//! process `z*_t` they define.
//!
//! Paths live on uniform [`TimeGrid`]s and are read as piecewise constant
//! with the left node value held over each step. A path stores the values
//! of `z*` (the quantity multiplying the coupling operator); the process
//! moments are `E[z_j] = E[z_j z_k] = 0` and `E[z_j z*_k] = α(t_j - t_k)`.
//!
//! The Dirac kernel `κ δ(τ)` is represented on the lattice as
//! `E[z_j z*_k] = (κ/dt) δ_jk`.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{cholesky_jittered, CMatrix, CVector, C64, ZERO};
use crate::{par, Error, Result};

/// Uniform time grid `t_j = t0 + j dt`, `j = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n_steps: usize) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::InvalidGrid("t0 must be finite"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid("dt must be positive"));
        }
        Ok(Self { t0, dt, n_steps })
    }

    /// Grid on `[0, t_max]`; `t_max` is rounded to the nearest multiple of `dt`.
    pub fn spanning(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid("dt must be positive"));
        }
        if !(t_max.is_finite() && t_max >= dt * (1.0 - 1e-9)) {
            return Err(Error::InvalidGrid("t_max must be at least dt"));
        }
        Self::new(0.0, dt, (t_max / dt).round() as usize)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |j| self.time(j))
    }

    /// Index of the node at time `t`, tolerating rounding of order `1e-6 dt`.
    pub fn node(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.dt;
        let j = x.round();
        if (x - j).abs() > 1e-6 || j < 0.0 || j as usize > self.n_steps {
            return Err(Error::OffGrid { time: t });
        }
        Ok(j as usize)
    }

    /// Nodes `j0..=j1` as a grid of their own.
    pub fn subgrid(&self, j0: usize, j1: usize) -> Result<Self> {
        if j0 > j1 || j1 > self.n_steps {
            return Err(Error::InvalidGrid("subgrid range out of bounds"));
        }
        Self::new(self.time(j0), self.dt, j1 - j0)
    }

    /// The `n_nodes` nodes following the end of this grid.
    pub fn continuation(&self, n_nodes: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidGrid("a continuation needs at least one node"));
        }
        Self::new(self.end() + self.dt, self.dt, n_nodes - 1)
    }

    /// Whether `next` starts one step after this grid ends, with the same spacing.
    pub fn abuts(&self, next: &TimeGrid) -> bool {
        (self.dt - next.dt).abs() <= 1e-9 * self.dt
            && (next.t0 - (self.end() + self.dt)).abs() <= 1e-6 * self.dt
    }
}

/// One realization of `z*` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid: TimeGrid,
    values: Vec<C64>,
}

impl NoisePath {
    pub fn new(grid: TimeGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: alloc::vec![ZERO; grid.len()] }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Values of `z*_j`.
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// `z*_j`.
    pub fn conj_value(&self, j: usize) -> C64 {
        self.values[j]
    }

    /// `z_j`.
    pub fn value(&self, j: usize) -> C64 {
        self.values[j].conj()
    }

    pub fn last(&self) -> C64 {
        self.values[self.values.len() - 1]
    }

    /// Appends a path that starts one step after this one ends.
    pub fn concat(&self, next: &NoisePath) -> Result<NoisePath> {
        if !self.grid.abuts(&next.grid) {
            return Err(Error::InvalidGrid("paths do not abut"));
        }
        let grid = TimeGrid::new(self.grid.t0, self.grid.dt, self.grid.n_steps + next.grid.len())?;
        let mut values = self.values.clone();
        values.extend_from_slice(&next.values);
        Ok(Self { grid, values })
    }

    /// Nodes `j0..=j1`.
    pub fn slice(&self, j0: usize, j1: usize) -> Result<NoisePath> {
        let grid = self.grid.subgrid(j0, j1)?;
        Ok(Self { grid, values: self.values[j0..=j1].to_vec() })
    }
}

/// A single bath mode: coupling `g` and frequency `ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub coupling: C64,
    pub frequency: f64,
}

/// `α(τ)` sampled at `τ = k dτ`, `k >= 0`, linearly interpolated in between
/// and continued to negative lags by Hermiticity.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    dtau: f64,
    values: Vec<C64>,
}

impl TabulatedKernel {
    pub fn new(dtau: f64, values: Vec<C64>) -> Result<Self> {
        if !(dtau.is_finite() && dtau > 0.0) {
            return Err(Error::invalid("tabulated kernel spacing must be positive"));
        }
        if values.is_empty() {
            return Err(Error::invalid("tabulated kernel needs at least one value"));
        }
        if values[0].im.abs() > 1e-12 * (1.0 + values[0].re.abs()) {
            return Err(Error::invalid("alpha(0) must be real for a Hermitian kernel"));
        }
        Ok(Self { dtau, values })
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn max_lag(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dtau
    }

    fn locate(&self, tau: f64) -> Result<(usize, f64)> {
        let x = tau / self.dtau;
        let last = (self.values.len() - 1) as f64;
        if x > last + 1e-9 {
            return Err(Error::KernelRange { requested: tau, covered: self.max_lag() });
        }
        let x = x.min(last);
        let k = (x.floor() as usize).min(self.values.len() - 1);
        Ok((k, x - k as f64))
    }

    fn value(&self, tau: f64) -> Result<C64> {
        let (k, frac) = self.locate(tau.abs())?;
        let v = if k + 1 < self.values.len() {
            self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
        } else {
            self.values[k]
        };
        Ok(if tau < 0.0 { v.conj() } else { v })
    }

    fn integral(&self, t: f64) -> Result<C64> {
        let (k, frac) = self.locate(t)?;
        let h = self.dtau;
        let mut acc = ZERO;
        for i in 0..k {
            acc += (self.values[i] + self.values[i + 1]) * (0.5 * h);
        }
        if frac > 0.0 {
            let end = self.values[k] * (1.0 - frac) + self.values[k + 1] * frac;
            acc += (self.values[k] + end) * (0.5 * frac * h);
        }
        Ok(acc)
    }
}

/// Hermitian correlation function `α(τ)`, `α(-τ) = conj(α(τ))`.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationKernel {
    /// `κ δ(τ)`.
    Dirac { kappa: f64 },
    /// `(κΓ/2) exp(-Γ|τ|)`.
    OrnsteinUhlenbeck { kappa: f64, gamma: f64 },
    /// `Σ |g|² exp(-iωτ)`.
    ModeSum(Vec<Mode>),
    Tabulated(TabulatedKernel),
}

impl CorrelationKernel {
    pub fn dirac(kappa: f64) -> Self {
        Self::Dirac { kappa }
    }

    pub fn ornstein_uhlenbeck(kappa: f64, gamma: f64) -> Self {
        Self::OrnsteinUhlenbeck { kappa, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Dirac { kappa } if !(kappa.is_finite() && *kappa > 0.0) => {
                Err(Error::invalid("Dirac kernel needs kappa > 0"))
            }
            Self::OrnsteinUhlenbeck { kappa, gamma }
                if !(kappa.is_finite() && *kappa > 0.0 && gamma.is_finite() && *gamma > 0.0) =>
            {
                Err(Error::invalid("Ornstein-Uhlenbeck kernel needs kappa > 0 and gamma > 0"))
            }
            Self::ModeSum(modes)
                if modes.iter().any(|m| !(m.frequency.is_finite() && m.coupling.is_finite())) =>
            {
                Err(Error::invalid("mode couplings and frequencies must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// `κ δ(τ)` kernels need lattice regularization.
    pub fn is_markovian(&self) -> bool {
        matches!(self, Self::Dirac { .. })
    }

    /// `α(τ)` for regular kernels. The Dirac kernel has no pointwise value;
    /// use [`lattice_value`](Self::lattice_value).
    pub fn value(&self, tau: f64) -> Result<C64> {
        match self {
            Self::Dirac { .. } => Err(Error::invalid("the Dirac kernel has no pointwise value")),
            Self::OrnsteinUhlenbeck { kappa, gamma } => {
                Ok(C64::new(0.5 * kappa * gamma * (-gamma * tau.abs()).exp(), 0.0))
            }
            Self::ModeSum(modes) => Ok(modes
                .iter()
                .map(|m| C64::from_polar(m.coupling.norm_sqr(), -m.frequency * tau))
                .sum()),
            Self::Tabulated(table) => table.value(tau),
        }
    }

    /// Covariance `E[z_j z*_k]` for nodes separated by `tau` on a grid of spacing `dt`.
    pub fn lattice_value(&self, tau: f64, dt: f64) -> Result<C64> {
        match self {
            Self::Dirac { kappa } => {
                Ok(if tau.abs() < 0.5 * dt { C64::new(kappa / dt, 0.0) } else { ZERO })
            }
            _ => self.value(tau),
        }
    }

    /// `K(t) = ∫_0^t α(τ) dτ`, `t >= 0`. The Dirac kernel contributes half its
    /// weight at the endpoint, so `K(t) = κ/2` for `t > 0` and `K(0) = 0`.
    pub fn integral(&self, t: f64) -> Result<C64> {
        if t <= 0.0 {
            return Ok(ZERO);
        }
        self.integral_right(t)
    }

    /// Right limit `K(t+)`. Differs from [`integral`](Self::integral) only
    /// for the Dirac kernel at `t = 0`.
    pub fn integral_right(&self, t: f64) -> Result<C64> {
        let t = t.max(0.0);
        match self {
            Self::Dirac { kappa } => Ok(C64::new(0.5 * kappa, 0.0)),
            Self::OrnsteinUhlenbeck { kappa, gamma } => {
                Ok(C64::new(0.5 * kappa * (1.0 - (-gamma * t).exp()), 0.0))
            }
            Self::ModeSum(modes) => Ok(modes
                .iter()
                .map(|m| {
                    let w = m.frequency;
                    let g2 = m.coupling.norm_sqr();
                    if (w * t).abs() < 1e-8 {
                        C64::new(g2 * t, -0.5 * g2 * w * t * t)
                    } else {
                        // (1 - e^{-iωt}) / (iω)
                        let e = C64::from_polar(1.0, -w * t);
                        (C64::new(1.0, 0.0) - e) / C64::new(0.0, w) * g2
                    }
                })
                .sum()),
            Self::Tabulated(table) => table.integral(t),
        }
    }

    /// Real variance scale `α(0)` on the lattice, used to size Cholesky jitter.
    pub fn lattice_variance(&self, dt: f64) -> f64 {
        self.lattice_value(0.0, dt).map(|v| v.re).unwrap_or(1.0)
    }

    /// `α(k dt)` for `k = 0..n`.
    pub fn lattice_lags(&self, dt: f64, n: usize) -> Result<Vec<C64>> {
        (0..n).map(|k| self.lattice_value(k as f64 * dt, dt)).collect()
    }
}

/// `C_jk = α(t_j - t_k)` on the grid; the Dirac kernel gives `(κ/dt) I`.
pub fn build_covariance(kernel: &CorrelationKernel, grid: &TimeGrid) -> Result<CMatrix> {
    kernel.validate()?;
    let n = grid.len();
    let lags = kernel.lattice_lags(grid.dt(), n)?;
    Ok(CMatrix::from_fn(n, n, |j, k| if j >= k { lags[j - k] } else { lags[k - j].conj() }))
}

/// Random stream for sample `index` of a run seeded with `seed`. Streams of
/// one seed never overlap, so batch results do not depend on scheduling.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent seed for a sub-experiment (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut x = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Vector of i.i.d. circular standard complex normals, `E|ξ|² = 1`, `E ξ² = 0`.
fn circular_normals(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    CVector::from_iterator(
        n,
        (0..n).map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re * s, im * s)
        }),
    )
}

/// Factorized law of the process on one grid; draws many paths cheaply.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    grid: TimeGrid,
    factor: CMatrix,
    jitter: f64,
}

impl GaussianProcess {
    pub fn new(kernel: &CorrelationKernel, grid: &TimeGrid) -> Result<Self> {
        let cov = build_covariance(kernel, grid)?;
        let (factor, jitter) = cholesky_jittered(&cov, kernel.lattice_variance(grid.dt()))?;
        Ok(Self { grid: *grid, factor, jitter })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Diagonal jitter that was needed to factorize the covariance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Path number `index` of the stream family `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> NoisePath {
        let mut rng = stream_rng(seed, index);
        let xi = circular_normals(&mut rng, self.grid.len());
        let z = &self.factor * xi;
        NoisePath { grid: self.grid, values: z.iter().map(|v| v.conj()).collect() }
    }

    pub fn sample_many(&self, n: usize, seed: u64) -> Vec<NoisePath> {
        par::map_indices(0..n, |i| self.sample(seed, i as u64))
    }
}

/// Gaussian law of the continuation on `future` given the path on `past`,
/// obtained by Schur-complement conditioning of the joint covariance.
#[derive(Debug, Clone)]
pub struct ConditionalProcess {
    past_grid: Option<TimeGrid>,
    future_grid: TimeGrid,
    /// `C_fp C_pp^{-1}`, maps past `z` values to the conditional mean.
    gain: CMatrix,
    factor: CMatrix,
}

impl ConditionalProcess {
    pub fn new(
        kernel: &CorrelationKernel,
        past_grid: Option<&TimeGrid>,
        future_grid: &TimeGrid,
    ) -> Result<Self> {
        let Some(past_grid) = past_grid else {
            let uncond = GaussianProcess::new(kernel, future_grid)?;
            return Ok(Self {
                past_grid: None,
                future_grid: *future_grid,
                gain: CMatrix::zeros(future_grid.len(), 0),
                factor: uncond.factor,
            });
        };
        if !past_grid.abuts(future_grid) {
            return Err(Error::InvalidGrid("future grid must continue the past grid"));
        }
        let p = past_grid.len();
        let m = future_grid.len();
        let joint = TimeGrid::new(past_grid.t0(), past_grid.dt(), p + m - 1)?;
        let cov = build_covariance(kernel, &joint)?;
        let scale = kernel.lattice_variance(joint.dt());
        let c_pp = cov.view((0, 0), (p, p)).into_owned();
        let c_pf = cov.view((0, p), (p, m)).into_owned();
        let c_ff = cov.view((p, p), (m, m)).into_owned();

        let (l_p, _) = cholesky_jittered(&c_pp, scale)?;
        let y = l_p
            .solve_lower_triangular(&c_pf)
            .ok_or(Error::Factorization { jitter: 0.0 })?;
        let x = l_p
            .adjoint()
            .solve_upper_triangular(&y)
            .ok_or(Error::Factorization { jitter: 0.0 })?;
        let gain = x.adjoint();
        let schur = &c_ff - &gain * &c_pf;
        let schur = (&schur + schur.adjoint()) * C64::new(0.5, 0.0);
        let (factor, _) = cholesky_jittered(&schur, scale)?;
        Ok(Self { past_grid: Some(*past_grid), future_grid: *future_grid, gain, factor })
    }

    pub fn future_grid(&self) -> &TimeGrid {
        &self.future_grid
    }

    /// Conditional mean of `z` (not `z*`) on the future nodes.
    pub fn conditional_mean(&self, past: Option<&NoisePath>) -> Result<CVector> {
        match (self.past_grid, past) {
            (None, _) => Ok(CVector::zeros(self.future_grid.len())),
            (Some(grid), Some(path)) => {
                if path.grid().len() != grid.len() {
                    return Err(Error::Dimension { expected: grid.len(), found: path.grid().len() });
                }
                let z_past = CVector::from_iterator(grid.len(), path.values().iter().map(|v| v.conj()));
                Ok(&self.gain * z_past)
            }
            (Some(_), None) => Err(Error::invalid("a past path is required")),
        }
    }

    pub fn sample(&self, past: Option<&NoisePath>, seed: u64, index: u64) -> Result<NoisePath> {
        let mean = self.conditional_mean(past)?;
        Ok(self.sample_around(&mean, seed, index))
    }

    /// Sample given a precomputed [`conditional_mean`](Self::conditional_mean).
    pub fn sample_around(&self, mean: &CVector, seed: u64, index: u64) -> NoisePath {
        let mut rng = stream_rng(seed, index);
        let xi = circular_normals(&mut rng, self.future_grid.len());
        let z = mean + &self.factor * xi;
        NoisePath { grid: self.future_grid, values: z.iter().map(|v| v.conj()).collect() }
    }
}

/// Continuations of a past on `[0, s]` through the present `s`.
///
/// The step leaving `s` is driven by `z_s`, so only the history strictly
/// before `s` is conditioned on and `z_s` is redrawn with the future. For
/// white noise this keeps the increment at `s` independent of the history.
#[derive(Debug, Clone)]
pub struct Continuation {
    past_grid: TimeGrid,
    process: ConditionalProcess,
}

impl Continuation {
    /// `n_nodes` counts the redrawn nodes, starting at the last node of `past_grid`.
    pub fn new(kernel: &CorrelationKernel, past_grid: &TimeGrid, n_nodes: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidGrid("a continuation needs at least one node"));
        }
        let n = past_grid.n_steps();
        let future = TimeGrid::new(past_grid.end(), past_grid.dt(), n_nodes - 1)?;
        let history = if n == 0 { None } else { Some(past_grid.subgrid(0, n - 1)?) };
        let process = ConditionalProcess::new(kernel, history.as_ref(), &future)?;
        Ok(Self { past_grid: *past_grid, process })
    }

    /// Conditional mean of `z` on the redrawn nodes.
    pub fn mean(&self, past: &NoisePath) -> Result<CVector> {
        if past.grid().len() != self.past_grid.len() {
            return Err(Error::Dimension { expected: self.past_grid.len(), found: past.grid().len() });
        }
        match self.history(past)? {
            Some(h) => self.process.conditional_mean(Some(&h)),
            None => self.process.conditional_mean(None),
        }
    }

    /// History of `past` joined to one continuation, on a grid from the start of `past`.
    pub fn sample(&self, past: &NoisePath, mean: &CVector, seed: u64, index: u64) -> Result<NoisePath> {
        let next = self.process.sample_around(mean, seed, index);
        match self.history(past)? {
            Some(h) => h.concat(&next),
            None => Ok(next),
        }
    }

    fn history(&self, past: &NoisePath) -> Result<Option<NoisePath>> {
        let n = past.grid().n_steps();
        if n == 0 { Ok(None) } else { past.slice(0, n - 1).map(Some) }
    }
}

/// `n` independent paths on `grid`, deterministic in `seed`.
pub fn sample_paths(
    kernel: &CorrelationKernel,
    grid: &TimeGrid,
    n: usize,
    seed: u64,
) -> Result<Vec<NoisePath>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    Ok(GaussianProcess::new(kernel, grid)?.sample_many(n, seed))
}

/// `n` continuations on `future_grid` drawn from the law conditioned on
/// `past`. Without a past this is [`sample_paths`].
pub fn conditional_sample(
    kernel: &CorrelationKernel,
    past: Option<&NoisePath>,
    future_grid: &TimeGrid,
    n: usize,
    seed: u64,
) -> Result<Vec<NoisePath>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let process = ConditionalProcess::new(kernel, past.map(|p| p.grid()), future_grid)?;
    let mean = process.conditional_mean(past)?;
    Ok(par::map_indices(0..n, |i| process.sample_around(&mean, seed, i as u64)))
}
