use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nmqsd_core::compat::{audit_compatibility, check_normalization, default_u_panel, jc_conditional_moments, jc_kernel_residual, CompatReport};
use nmqsd_core::dynamics::{integrate_linear, integrate_nonlinear, integrate_normalized, propagator_numeric, LinearFlow, TrajectoryMode};
use nmqsd_core::ensemble::{estimate_rho, norm_statistics, UnravelMode};
use nmqsd_core::kernels::{derive_seed, sample_paths, CorrelationKernel, GaussianProcess, NoisePath, TimeGrid};
use nmqsd_core::linalg::{hermitian_eigenvalues, projector, trace_distance};
use nmqsd_core::models::{solve_jc_ansatz, Ansatz, SystemModel};
use nmqsd_core::reference::{evolve_dephasing_master, evolve_jc_master, exact_few_mode, DensityMatrix, DEFAULT_MAX_DIM};
use nmqsd_core::{CMatrix, C64};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{EnsembleMode, OracleKind, RunConfig, Task};
use crate::io;
use crate::Result;

/// Seed tag of the fixed past drawn for audits.
const PAST_TAG: u64 = 0x7061_7374;
const NORMALIZATION_TAG: u64 = 0x6e6f_726d;

/// Written as `manifest.json` next to the data files of every run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub task: &'static str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub workers: usize,
    pub wall_time_s: f64,
    pub status: &'static str,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub summary: Value,
}

struct Context<'a> {
    config: &'a RunConfig,
    out: &'a Path,
    outputs: Vec<String>,
    warnings: Vec<String>,
}

impl Context<'_> {
    fn file(&mut self, name: String) -> PathBuf {
        let path = self.out.join(&name);
        self.outputs.push(name);
        path
    }
}

/// Validates `config`, executes its task with `workers` threads (all
/// available when `None`), writes the data files and `manifest.json` into
/// `out`, and returns the manifest.
///
/// Invalid configurations fail before anything is written. Numerical
/// failures still leave a manifest with `status = "error"`.
pub fn run(config: &RunConfig, out: &Path, workers: Option<usize>) -> Result<Manifest> {
    config.validate()?;
    let task = config.task()?;
    fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build()?;
    let start = Instant::now();
    let mut ctx = Context { config, out, outputs: Vec::new(), warnings: Vec::new() };
    let result = pool.install(|| execute(task, &mut ctx));
    let (status, error, summary) = match &result {
        Ok(summary) => ("ok", None, summary.clone()),
        Err(e) => ("error", Some(e.to_string()), Value::Null),
    };
    let manifest = Manifest {
        tool: "nmqsd",
        version: env!("CARGO_PKG_VERSION"),
        core_version: nmqsd_core::VERSION,
        task: task.name(),
        config_sha256: format!("{:x}", Sha256::digest(config.to_toml().as_bytes())),
        seed: config.ensemble.map(|e| e.seed),
        workers: pool.current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        status,
        error,
        warnings: ctx.warnings,
        outputs: ctx.outputs,
        summary,
    };
    io::write_json(&out.join("manifest.json"), &serde_json::to_value(&manifest)?)?;
    result.map(|_| manifest)
}

fn execute(task: Task, ctx: &mut Context<'_>) -> Result<Value> {
    match task {
        Task::Noise => noise(ctx),
        Task::Trajectory => trajectory(ctx),
        Task::Unravel => unravel(ctx),
        Task::Norms => norms(ctx),
        Task::Compat => compat(ctx),
        Task::Oracle => oracle(ctx),
        Task::JcResidual => jc_residual(ctx),
    }
}

fn noise(ctx: &mut Context<'_>) -> Result<Value> {
    let kernel = ctx.config.kernel()?;
    let grid = ctx.config.time_grid()?;
    let ens = ctx.config.ensemble(1)?;
    let process = GaussianProcess::new(&kernel, &grid)?;
    let paths = process.sample_many(ens.n_traj, ens.seed);
    io::write_noise_long(&ctx.file("noise.csv".into()), &paths)?;
    // The first attempt always carries 1e-10 alpha(0); only escalation is news.
    let base = 1e-10 * kernel.lattice_variance(grid.dt());
    if process.jitter() > 1.5 * base {
        ctx.warnings.push(format!("covariance factorized with jitter {:e}", process.jitter()));
    }
    Ok(json!({ "n_paths": paths.len(), "nodes": grid.len(), "jitter": process.jitter() }))
}

fn trajectory(ctx: &mut Context<'_>) -> Result<Value> {
    let model = ctx.config.model()?;
    let psi0 = ctx.config.initial_state()?;
    let grid = ctx.config.time_grid()?;
    let ens = ctx.config.ensemble(1)?;
    let opts = ctx.config.trajectory.unwrap_or_default();
    let mode: TrajectoryMode = opts.mode.unwrap_or(EnsembleMode::Linear).into();
    let flow = LinearFlow::new(&model, &grid)?;
    let paths = sample_paths(model.kernel(), &grid, ens.n_traj, ens.seed)?;
    let mut propagators = Vec::new();
    let mut aborted = 0;
    for (i, path) in paths.iter().enumerate() {
        let traj = match mode {
            TrajectoryMode::Linear => integrate_linear(&flow, path, &psi0),
            TrajectoryMode::NormalizedLinear => integrate_normalized(&flow, path, &psi0),
            TrajectoryMode::Nonlinear => integrate_nonlinear(&flow, path, &psi0),
        };
        let traj = match traj {
            Ok(t) => t,
            Err(e @ nmqsd_core::Error::Overflow { .. }) => {
                ctx.warnings.push(format!("trajectory {i} aborted: {e}"));
                aborted += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        io::write_trajectory(&ctx.file(format!("trajectory_{i:04}.csv")), &traj)?;
        io::write_noise(&ctx.file(format!("noise_{i:04}.csv")), &traj.driving)?;
        if mode == TrajectoryMode::Nonlinear {
            io::write_noise(&ctx.file(format!("raw_noise_{i:04}.csv")), &traj.raw_noise)?;
        }
        if opts.propagators.unwrap_or(false) {
            let a = propagator_numeric(&flow, path, 0.0, grid.end())?;
            propagators.push(json!({ "path_id": i, "s": a.s, "t": a.t, "matrix": io::matrix(&a.matrix) }));
        }
    }
    if !propagators.is_empty() {
        io::write_json(&ctx.file("propagators.json".into()), &Value::Array(propagators))?;
    }
    Ok(json!({ "n_traj": paths.len(), "n_aborted": aborted, "mode": format!("{mode:?}") }))
}

/// Master-equation solution for the two models that have one.
fn master(model: &SystemModel, rho0: &CMatrix, grid: &TimeGrid) -> Result<Option<DensityMatrix>> {
    Ok(match model.ansatz() {
        Ansatz::JaynesCummings { omega } => {
            Some(evolve_jc_master(&solve_jc_ansatz(omega, model.kernel(), grid)?, rho0)?)
        }
        Ansatz::Dephasing { omega, r, kappa } => {
            Some(evolve_dephasing_master(omega, r, kappa, model.kernel(), rho0, grid)?)
        }
        Ansatz::StaticL => None,
    })
}

fn unravel(ctx: &mut Context<'_>) -> Result<Value> {
    let model = ctx.config.model()?;
    let psi0 = ctx.config.initial_state()?;
    let grid = ctx.config.time_grid()?;
    let ens = ctx.config.ensemble(2)?;
    let mode: UnravelMode = ens.mode.unwrap_or(EnsembleMode::Linear).into();
    let est = estimate_rho(&model, &psi0, &grid, ens.n_traj, ens.seed, mode)?;
    if !est.valid {
        ctx.warnings.push(format!("{} of {} trajectories aborted; estimate flagged invalid", est.n_aborted, est.n_traj));
    }
    let reference = master(&model, &projector(&psi0), &grid)?;
    let distance: Vec<Option<f64>> = (0..grid.len())
        .map(|j| reference.as_ref().map(|m| trace_distance(&est.rho_hat[j], &m.rho[j])))
        .collect();
    let series: Vec<Value> = grid
        .times()
        .enumerate()
        .map(|(j, t)| json!({ "t": t, "rho": io::matrix(&est.rho_hat[j]), "stderr": est.stderr[j] }))
        .collect();
    io::write_json(
        &ctx.file("rho_hat.json".into()),
        &json!({
            "mode": format!("{mode:?}"),
            "n_traj": est.n_traj,
            "n_aborted": est.n_aborted,
            "valid": est.valid,
            "series": series,
        }),
    )?;
    let rows: Vec<Vec<f64>> = grid
        .times()
        .enumerate()
        .map(|(j, t)| vec![t, est.rho_hat[j].trace().re, est.stderr[j], distance[j].unwrap_or(f64::NAN)])
        .collect();
    io::write_table(&ctx.file("unravel.csv".into()), &["t", "trace", "stderr", "master_trace_distance"], &rows)?;
    let last = grid.n_steps();
    Ok(json!({
        "mode": format!("{mode:?}"),
        "n_traj": est.n_traj,
        "n_aborted": est.n_aborted,
        "valid": est.valid,
        "final_trace": est.rho_hat[last].trace().re,
        "final_stderr": est.stderr[last],
        "final_master_trace_distance": distance[last],
    }))
}

fn norms(ctx: &mut Context<'_>) -> Result<Value> {
    let model = ctx.config.model()?;
    let psi0 = ctx.config.initial_state()?;
    let grid = ctx.config.time_grid()?;
    let ens = ctx.config.ensemble(2)?;
    let cfg = ctx.config.norms()?;
    let stats = norm_statistics(&model, &psi0, &grid, ens.n_traj, ens.seed, cfg.s, cfg.t, cfg.n_pasts)?;
    if !stats.valid {
        ctx.warnings.push("more than 1% of trajectories aborted; statistics flagged invalid".into());
    }
    let rows: Vec<Vec<f64>> =
        grid.times().enumerate().map(|(j, t)| vec![t, stats.mean_sq_norm[j], stats.stderr[j]]).collect();
    io::write_table(&ctx.file("norms.csv".into()), &["t", "mean_sq_norm", "stderr"], &rows)?;
    let conditional: Vec<Value> = stats
        .conditional
        .iter()
        .map(|c| {
            json!({
                "past_index": c.past_index,
                "norm_sq_s": c.norm_sq_s,
                "conditional_mean": c.conditional_mean,
                "stderr": c.stderr,
                "deviation_in_stderr": c.deviation_in_stderr(),
                "n_aborted": c.n_aborted,
            })
        })
        .collect();
    io::write_json(
        &ctx.file("norms.json".into()),
        &json!({ "s": stats.s, "t": stats.t, "n_traj": stats.n_traj, "conditional": conditional }),
    )?;
    let max_uncond = (1..grid.len())
        .map(|j| (stats.mean_sq_norm[j] - 1.0).abs() / stats.stderr[j])
        .fold(0.0, f64::max);
    let max_cond = stats.conditional.iter().map(|c| c.deviation_in_stderr()).fold(0.0, f64::max);
    Ok(json!({
        "max_unconditional_deviation_in_stderr": max_uncond,
        "max_conditional_deviation_in_stderr": max_cond,
        "martingale_violated": max_cond > 5.0,
        "n_aborted": stats.n_aborted,
    }))
}

/// A past on `[0, s]`. `re_z_s` pins the real part of the conditioning
/// value, the last history node before `s`.
fn fixed_past(kernel: &CorrelationKernel, grid: &TimeGrid, s: f64, re_z_s: Option<f64>, seed: u64) -> Result<NoisePath> {
    let past_grid = grid.subgrid(0, grid.node(s)?)?;
    let mut past = GaussianProcess::new(kernel, &past_grid)?.sample(derive_seed(seed, PAST_TAG), 0);
    if let Some(x) = re_z_s {
        let j = conditioning_node(&past);
        past.values_mut()[j].re = x;
    }
    Ok(past)
}

fn conditioning_node(past: &NoisePath) -> usize {
    past.grid().n_steps().saturating_sub(1)
}

fn compat_json(report: &CompatReport) -> Value {
    json!({
        "ansatz": format!("{:?}", report.ansatz),
        "kernel": format!("{:?}", report.kernel),
        "s": report.s,
        "t": report.t,
        "n_cond": report.n_cond,
        "past": report.past.values().iter().map(|v| io::complex(*v)).collect::<Vec<_>>(),
        "estimate": io::matrix(&report.estimate),
        "reference": io::matrix(&report.reference),
        "reference_is_closed_form": report.reference_is_closed_form,
        "residual": report.residual,
        "identity_residual": report.identity_residual,
        "stderr": report.stderr,
        "n_aborted": report.n_aborted,
        "valid": report.valid,
    })
}

fn compat(ctx: &mut Context<'_>) -> Result<Value> {
    let config = ctx.config;
    let model = config.model()?;
    let kernel = config.kernel()?;
    let grid = config.time_grid()?;
    let seed = config.ensemble(0)?.seed;
    let cfg = config.compat()?;
    let past = fixed_past(&kernel, &grid, cfg.s, cfg.re_z_s, seed)?;
    let report = audit_compatibility(&model, &past, cfg.s, cfg.t, cfg.n_cond, seed)?;
    if !report.valid {
        ctx.warnings.push(format!("{} of {} continuations aborted; audit flagged invalid", report.n_aborted, report.n_cond));
    }
    io::write_json(&ctx.file("compat.json".into()), &compat_json(&report))?;
    let mut summary = json!({
        "residual": report.residual,
        "identity_residual": report.identity_residual,
        "stderr": report.stderr,
        "estimate_diagonal": [report.estimate[(0, 0)].re, report.estimate[(1, 1)].re],
        "reference_is_closed_form": report.reference_is_closed_form,
        "re_z_s": past.values()[conditioning_node(&past)].re,
    });
    if report.reference_is_closed_form {
        summary["closed_form"] = json!([report.reference[(0, 0)].re, report.reference[(1, 1)].re]);
    }
    if cfg.normalization.unwrap_or(false) {
        let sub = grid.subgrid(0, grid.node(cfg.t)?)?;
        let norm = check_normalization(&model, &sub, cfg.n_cond, derive_seed(seed, NORMALIZATION_TAG))?;
        io::write_json(
            &ctx.file("normalization.json".into()),
            &json!({ "t": norm.t, "estimate": io::matrix(&norm.estimate), "residual": norm.residual, "stderr": norm.stderr, "n": norm.n, "n_aborted": norm.n_aborted }),
        )?;
        summary["normalization_residual"] = json!(norm.residual);
        summary["normalization_stderr"] = json!(norm.stderr);
    }
    if let (Some(gammas), Some(rs), Ansatz::Dephasing { omega, kappa, .. }, CorrelationKernel::OrnsteinUhlenbeck { kappa: kernel_kappa, .. }) =
        (&cfg.gammas, &cfg.rs, model.ansatz(), &kernel)
    {
        let mut rows = Vec::new();
        for &gamma in gammas {
            let kernel = CorrelationKernel::ornstein_uhlenbeck(*kernel_kappa, gamma);
            let past = fixed_past(&kernel, &grid, cfg.s, cfg.re_z_s, seed)?;
            for &r in rs {
                let model = SystemModel::dephasing(omega, r, kappa, kernel.clone())?;
                let rep = audit_compatibility(&model, &past, cfg.s, cfg.t, cfg.n_cond, seed)?;
                rows.push(vec![
                    gamma,
                    r,
                    rep.s,
                    rep.t,
                    rep.residual,
                    rep.identity_residual,
                    rep.stderr,
                    rep.reference[(0, 0)].re,
                    rep.reference[(1, 1)].re,
                    rep.estimate[(0, 0)].re,
                    rep.estimate[(1, 1)].re,
                ]);
            }
        }
        io::write_table(
            &ctx.file("compat_sweep.csv".into()),
            &["gamma", "r", "s", "t", "residual", "identity_residual", "stderr", "reference_00", "reference_11", "estimate_00", "estimate_11"],
            &rows,
        )?;
        summary["sweep_points"] = json!(rows.len());
    }
    Ok(summary)
}

fn density_json(kind: &str, rho: &DensityMatrix) -> Value {
    let series: Vec<Value> =
        rho.grid.times().enumerate().map(|(j, t)| json!({ "t": t, "rho": io::matrix(&rho.rho[j]) })).collect();
    json!({ "kind": kind, "series": series })
}

fn oracle(ctx: &mut Context<'_>) -> Result<Value> {
    let config = ctx.config;
    let model = config.model()?;
    let psi0 = config.initial_state()?;
    let grid = config.time_grid()?;
    let cfg = config.oracle()?;
    let (kind, rho, leakage) = match cfg.kind {
        OracleKind::Master => {
            if let (true, Ansatz::JaynesCummings { omega }) = (cfg.export_ansatz.unwrap_or(false), model.ansatz()) {
                let table = solve_jc_ansatz(omega, model.kernel(), &grid)?;
                io::write_ansatz_f(&ctx.file("ansatz_f.csv".into()), &table)?;
                io::write_ansatz_rate(&ctx.file("ansatz_rate.csv".into()), &table)?;
            }
            let rho = master(&model, &projector(&psi0), &grid)?.expect("validated: model has a master equation");
            ("master", rho, None)
        }
        OracleKind::FewMode => {
            let bath = config.bath()?;
            let res = exact_few_mode(
                model.hamiltonian(),
                model.coupling(),
                &bath,
                &psi0,
                &grid,
                cfg.max_dim.unwrap_or(DEFAULT_MAX_DIM),
            )?;
            if res.leakage_flagged {
                ctx.warnings.push(format!("Fock cutoff leakage {} exceeds tolerance", res.leakage));
            }
            ("few-mode", res.rho, Some((res.leakage, res.leakage_flagged)))
        }
    };
    io::write_json(&ctx.file("density.json".into()), &density_json(kind, &rho))?;
    let last = grid.n_steps();
    let min_eig = rho.rho.iter().map(|r| hermitian_eigenvalues(r)[0]).fold(f64::INFINITY, f64::min);
    let max_trace_err = rho.rho.iter().map(|r| (r.trace() - C64::new(1.0, 0.0)).norm()).fold(0.0, f64::max);
    let mut summary = json!({
        "kind": kind,
        "final_populations": (0..model.dim()).map(|k| rho.rho[last][(k, k)].re).collect::<Vec<_>>(),
        "min_eigenvalue": min_eig,
        "max_trace_error": max_trace_err,
    });
    if let Some((leak, flagged)) = leakage {
        summary["leakage"] = json!(leak);
        summary["leakage_flagged"] = json!(flagged);
    }
    Ok(summary)
}

fn jc_residual(ctx: &mut Context<'_>) -> Result<Value> {
    let config = ctx.config;
    let model = config.model()?;
    let grid = config.time_grid()?;
    let cfg = config.jc_residual()?;
    let Ansatz::JaynesCummings { omega } = model.ansatz() else { unreachable!("validated") };
    let table = solve_jc_ansatz(omega, model.kernel(), &grid)?;
    let us = cfg.u.clone().unwrap_or_else(|| default_u_panel(cfg.s));
    let mut rows = Vec::with_capacity(us.len());
    for &u in &us {
        let r = jc_kernel_residual(&table, model.kernel(), cfg.s, cfg.t, u)?;
        rows.push(vec![u, r.re, r.im, r.norm()]);
    }
    io::write_table(&ctx.file("jc_residual.csv".into()), &["u", "re", "im", "abs"], &rows)?;
    let mut summary = json!({ "max_abs_residual": rows.iter().map(|r| r[3]).fold(0.0, f64::max) });
    if let Some(n_cond) = cfg.n_cond {
        let seed = config.ensemble(0)?.seed;
        let past = fixed_past(model.kernel(), &grid, cfg.s, None, seed)?;
        let m = jc_conditional_moments(&table, model.kernel(), &past, cfg.t, n_cond, seed)?;
        summary["h_mean"] = json!(m.h_mean);
        summary["h_stderr"] = json!(m.h_stderr);
        summary["j_mean"] = io::complex(m.j_mean);
        summary["j_stderr"] = json!(m.j_stderr);
    }
    Ok(summary)
}
