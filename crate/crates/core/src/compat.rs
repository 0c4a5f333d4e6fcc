//! Audits of the measurement interpretation with a constant weight
//! functional: the normalization identity `E[(A_0^t)† A_0^t] = 1` and the
//! conditional identity `E[(A_s^t)† A_s^t | z on [0, s]] = 1`.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::dynamics::{jc_propagator_from_profile, Propagators, TwoTimesPropagator};
use crate::ensemble::{accumulate, within_abort_budget, Moments};
use crate::kernels::{Continuation, CorrelationKernel, GaussianProcess, NoisePath, TimeGrid};
use crate::linalg::{self, operator_norm, CMatrix, C64, I, ZERO};
use crate::models::{Ansatz, AnsatzTable, SystemModel};
use crate::{Error, Result};

/// Weight attached to a sampled path when averaging `A† A`.
///
/// The audits here use [`UnitWeight`]. Other weights can be plugged in to
/// test candidate instruments; no search over them is provided.
pub trait PathWeight: Sync {
    /// Weight of `path` for propagation from node `s` to node `t`.
    fn weight(&self, path: &NoisePath, s: usize, t: usize) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UnitWeight;

impl PathWeight for UnitWeight {
    fn weight(&self, _: &NoisePath, _: usize, _: usize) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct CompatReport {
    pub ansatz: Ansatz,
    pub kernel: CorrelationKernel,
    pub s: f64,
    pub t: f64,
    pub past: NoisePath,
    pub n_cond: usize,
    /// Monte Carlo mean of `(A_s^t)† A_s^t` over continuations of the past.
    pub estimate: CMatrix,
    /// The closed form when the model has one, the identity otherwise.
    pub reference: CMatrix,
    pub reference_is_closed_form: bool,
    /// Operator norm of `estimate - reference`.
    pub residual: f64,
    /// Operator norm of `estimate - 1`.
    pub identity_residual: f64,
    /// Largest entrywise standard error of `estimate`.
    pub stderr: f64,
    pub n_aborted: usize,
    pub valid: bool,
}

/// `exp` of the σ_z-affine exponent of the conditional mean of `A† A` for
/// the dephasing model with an OU kernel, with `κ` shared by kernel and
/// model. `re_z_s` is the real part of the noise at `s`.
pub fn closed_form_dephasing_ou(kappa: f64, gamma: f64, r: f64, s: f64, t: f64, re_z_s: f64) -> CMatrix {
    closed_form_dephasing_ou_general(kappa, gamma, r, kappa, s, t, re_z_s)
}

/// As [`closed_form_dephasing_ou`], with the kernel strength `kappa_kernel`
/// and the model's `κ` (in `c = r/κ`) set independently.
pub fn closed_form_dephasing_ou_general(
    kappa_kernel: f64,
    gamma: f64,
    r: f64,
    kappa_model: f64,
    s: f64,
    t: f64,
    re_z_s: f64,
) -> CMatrix {
    let c = r / kappa_model;
    let span = t - s;
    let decay = 1.0 - (-gamma * span).exp();
    let even = c * c * kappa_kernel / gamma
        * (((-gamma * s).exp() - (-gamma * t).exp()) - 2.0 * decay + 0.5 * (1.0 - (-2.0 * gamma * span).exp()));
    let odd = 2.0 * c / gamma * re_z_s * decay;
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = C64::new((even + odd).exp(), 0.0);
    m[(1, 1)] = C64::new((even - odd).exp(), 0.0);
    m
}

fn closed_form_for(model: &SystemModel, s: f64, t: f64, re_z_s: f64) -> Option<CMatrix> {
    match (model.ansatz(), model.kernel()) {
        (Ansatz::Dephasing { r, kappa, .. }, CorrelationKernel::OrnsteinUhlenbeck { kappa: kk, gamma }) => {
            Some(closed_form_dephasing_ou_general(*kk, *gamma, r, kappa, s, t, re_z_s))
        }
        _ => None,
    }
}

/// Grid `[0, t]` on the lattice of `past`, with the node indices of `s` and `t`.
fn extend_past(past: &NoisePath, s: f64, t: f64) -> Result<(TimeGrid, usize, usize)> {
    let pg = past.grid();
    if pg.t0() != 0.0 {
        return Err(Error::InvalidGrid("the past must start at t = 0"));
    }
    if (pg.end() - s).abs() > 1e-9 * pg.dt().max(s) {
        return Err(Error::OffGrid { time: s });
    }
    let k = ((t / pg.dt()) + 0.5).floor();
    if k < 0.0 || (k * pg.dt() - t).abs() > 1e-6 * pg.dt() {
        return Err(Error::OffGrid { time: t });
    }
    let k = k as usize;
    let i = pg.n_steps();
    if k <= i {
        return Err(Error::invalid("compatibility audits need s < t"));
    }
    Ok((TimeGrid::new(0.0, pg.dt(), k)?, i, k))
}

/// Conditional compatibility audit with unit weight.
pub fn audit_compatibility(
    model: &SystemModel,
    past: &NoisePath,
    s: f64,
    t: f64,
    n_cond: usize,
    seed: u64,
) -> Result<CompatReport> {
    audit_compatibility_weighted(model, past, s, t, n_cond, seed, &UnitWeight)
}

/// Draws `n_cond` continuations of `past` from `s` to `t`, averages the
/// weighted `(A_s^t)† A_s^t`, and compares with the reference.
pub fn audit_compatibility_weighted<W: PathWeight>(
    model: &SystemModel,
    past: &NoisePath,
    s: f64,
    t: f64,
    n_cond: usize,
    seed: u64,
    weight: &W,
) -> Result<CompatReport> {
    if n_cond < 2 {
        return Err(Error::invalid("an audit needs at least two continuations"));
    }
    let (grid, i, k) = extend_past(past, s, t)?;
    let props = Propagators::for_model(model, &grid)?;
    let future = Continuation::new(model.kernel(), past.grid(), k - i + 1)?;
    let mean = future.mean(past)?;
    let d = model.dim();
    let (moments, n_aborted) = accumulate(n_cond, (d, d), 1, |n| {
        let path = future.sample(past, &mean, seed, n as u64)?;
        let a = props.between(&path, i, k)?;
        Ok(alloc::vec![a.gram() * C64::new(weight.weight(&path, i, k), 0.0)])
    })?;
    let estimate = moments[0].mean();
    let (s, t) = (grid.time(i), grid.time(k));
    // The history ends one node before s; its last value is the conditioning point.
    let closed = if i == 0 { None } else { closed_form_for(model, s, t, past.value(i - 1).re) };
    let identity = linalg::identity(d);
    let reference = closed.clone().unwrap_or_else(|| identity.clone());
    Ok(CompatReport {
        ansatz: model.ansatz(),
        kernel: model.kernel().clone(),
        s,
        t,
        past: past.clone(),
        n_cond,
        residual: operator_norm(&(&estimate - &reference)),
        identity_residual: operator_norm(&(&estimate - &identity)),
        estimate,
        reference,
        reference_is_closed_form: closed.is_some(),
        stderr: moments[0].stderr(),
        n_aborted,
        valid: within_abort_budget(n_aborted, n_cond),
    })
}

/// The two independent entries of `(A_s^t)† A_s^t` for the
/// Jaynes-Cummings model along one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcFunctionalSample {
    /// Upper-left entry: `e^{-2 Re ∫F} + |∫ z* e^{-iωτ-∫F}|²`, never negative.
    pub h: f64,
    /// Upper-right entry.
    pub j: C64,
}

impl JcFunctionalSample {
    pub fn from_propagator(a: &TwoTimesPropagator) -> Self {
        let g = a.gram();
        Self { h: g[(0, 0)].re, j: g[(0, 1)] }
    }
}

/// `h` and `j` along `path` between nodes at `s` and `t` of the table grid.
pub fn jc_functional_sample(table: &AnsatzTable, path: &NoisePath, s: f64, t: f64) -> Result<JcFunctionalSample> {
    let a = crate::dynamics::propagator_analytic_jc(table, path, s, t)?;
    Ok(JcFunctionalSample::from_propagator(&a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcMoments {
    pub h_mean: f64,
    pub h_stderr: f64,
    pub j_mean: C64,
    pub j_stderr: f64,
    pub n_cond: usize,
}

/// Conditional means of `h` and `j` over continuations of `past` to `t`.
pub fn jc_conditional_moments(
    table: &AnsatzTable,
    kernel: &CorrelationKernel,
    past: &NoisePath,
    t: f64,
    n_cond: usize,
    seed: u64,
) -> Result<JcMoments> {
    if n_cond < 2 {
        return Err(Error::invalid("conditional moments need at least two continuations"));
    }
    let s = past.grid().end();
    let (grid, i, k) = extend_past(past, s, t)?;
    if table.grid().n_steps() < k || table.grid().dt() != grid.dt() {
        return Err(Error::InvalidGrid("ansatz table does not cover [0, t] on the past lattice"));
    }
    let profile = table.profile();
    let future = Continuation::new(kernel, past.grid(), k - i + 1)?;
    let mean = future.mean(past)?;
    let (m, _) = accumulate(n_cond, (1, 1), 2, |n| {
        let path = future.sample(past, &mean, seed, n as u64)?;
        let sample = JcFunctionalSample::from_propagator(&jc_propagator_from_profile(table.omega(), &profile, &path, i, k));
        Ok(alloc::vec![CMatrix::from_element(1, 1, C64::new(sample.h, 0.0)), CMatrix::from_element(1, 1, sample.j)])
    })?;
    Ok(JcMoments {
        h_mean: m[0].mean()[(0, 0)].re,
        h_stderr: m[0].stderr(),
        j_mean: m[1].mean()[(0, 0)],
        j_stderr: m[1].stderr(),
        n_cond: m[0].count(),
    })
}

/// `∫_s^t α(τ - u) exp(iωτ - ∫_s^τ F*) dτ`, which must vanish for every
/// `u < s` if the Jaynes-Cummings scheme is compatible. Simpson per step,
/// with `F` linear within each step.
pub fn jc_kernel_residual(table: &AnsatzTable, kernel: &CorrelationKernel, s: f64, t: f64, u: f64) -> Result<C64> {
    let grid = table.grid();
    let i = grid.node(s)?;
    let k = grid.node(t)?;
    if k < i || u < 0.0 || u >= s {
        return Err(Error::invalid("the residual needs 0 <= u < s <= t"));
    }
    if matches!(kernel, CorrelationKernel::Dirac { .. }) {
        return Ok(ZERO);
    }
    let profile = table.profile();
    let h = grid.dt();
    let omega = table.omega();
    let g = |tau: f64, phi: C64| -> Result<C64> { Ok(kernel.value(tau - u)? * (I * omega * tau - phi.conj()).exp()) };
    let mut phi = ZERO;
    let mut total = ZERO;
    for j in i..k {
        let [a, m, _] = profile.stages(j);
        let tj = grid.time(j);
        let phi_mid = phi + (a + m) * (0.25 * h);
        let phi_end = phi + profile.step_integral(j);
        total += (g(tj, phi)? + g(tj + 0.5 * h, phi_mid)? * 4.0 + g(tj + h, phi_end)?) * (h / 6.0);
        phi = phi_end;
    }
    Ok(total)
}

/// Eight points spread uniformly over `[0, s)`.
pub fn default_u_panel(s: f64) -> Vec<f64> {
    (0..8).map(|k| s * k as f64 / 8.0).collect()
}

#[derive(Debug, Clone)]
pub struct NormalizationReport {
    pub t: f64,
    /// Monte Carlo mean of `(A_0^t)† A_0^t`.
    pub estimate: CMatrix,
    /// Operator norm of `estimate - 1`.
    pub residual: f64,
    pub stderr: f64,
    pub n: usize,
    pub n_aborted: usize,
    pub valid: bool,
}

/// Unconditional check of `E[(A_0^t)† A_0^t] = 1` with `t` the end of `grid`.
pub fn check_normalization(model: &SystemModel, grid: &TimeGrid, n: usize, seed: u64) -> Result<NormalizationReport> {
    if n < 2 {
        return Err(Error::invalid("a normalization check needs at least two paths"));
    }
    let props = Propagators::for_model(model, grid)?;
    let process = GaussianProcess::new(model.kernel(), grid)?;
    let d = model.dim();
    let k = grid.n_steps();
    let (m, n_aborted): (Vec<Moments>, usize) = accumulate(n, (d, d), 1, |i| {
        let a = props.between(&process.sample(seed, i as u64), 0, k)?;
        Ok(alloc::vec![a.gram()])
    })?;
    let estimate = m[0].mean();
    Ok(NormalizationReport {
        t: grid.end(),
        residual: operator_norm(&(&estimate - linalg::identity(d))),
        stderr: m[0].stderr(),
        estimate,
        n,
        n_aborted,
        valid: within_abort_budget(n_aborted, n),
    })
}
