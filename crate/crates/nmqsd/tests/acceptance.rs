//! Acceptance criteria. Each test writes one `[AC-nn] PASS|FAIL` line to
//! stderr (uncaptured) and then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nmqsd::RunConfig;
use nmqsd_core::compat::{
    audit_compatibility, closed_form_dephasing_ou, default_u_panel, jc_conditional_moments, jc_kernel_residual,
};
use nmqsd_core::dynamics::{
    integrate_linear, propagator_analytic_dephasing, propagator_analytic_jc, propagator_numeric, recover_noise,
    LinearFlow,
};
use nmqsd_core::ensemble::{estimate_rho, norm_statistics, UnravelEstimate, UnravelMode};
use nmqsd_core::kernels::{
    build_covariance, sample_paths, CorrelationKernel, GaussianProcess, Mode, NoisePath, TimeGrid,
};
use nmqsd_core::linalg::{self, excited, ground, operator_norm, plus_state, projector, trace_distance};
use nmqsd_core::models::{solve_jc_ansatz, SystemModel};
use nmqsd_core::reference::{evolve_dephasing_master, evolve_jc_master, exact_few_mode, kernel_of, ModeBath, DEFAULT_MAX_DIM};
use nmqsd_core::{CMatrix, Error, C64};

fn verdict(id: u8, title: &str, pass: bool, detail: String) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[AC-{id:02}] {status} {title}: {detail}");
    assert!(pass, "AC-{id:02} {title}: {detail}");
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn ou(kappa: f64, gamma: f64) -> CorrelationKernel {
    CorrelationKernel::ornstein_uhlenbeck(kappa, gamma)
}

/// A past on `[0, s]` whose conditioning value (the node before `s`) has real part `re_z_s`.
fn pinned_past(kernel: &CorrelationKernel, s: f64, dt: f64, re_z_s: f64, seed: u64) -> NoisePath {
    let grid = TimeGrid::spanning(s, dt).unwrap();
    let mut past = GaussianProcess::new(kernel, &grid).unwrap().sample(seed, 0);
    let j = grid.n_steps() - 1;
    past.values_mut()[j].re = re_z_s;
    past
}

#[test]
fn ac01_noise_law() {
    let kernel = ou(1.0, 2.0);
    let grid = TimeGrid::new(0.0, 0.1, 19).unwrap();
    let c = build_covariance(&kernel, &grid).unwrap();
    let n = 100_000;
    let paths = sample_paths(&kernel, &grid, n, 1).unwrap();
    let m = grid.len();
    let mut cov = CMatrix::zeros(m, m);
    let mut pseudo = CMatrix::zeros(m, m);
    for p in &paths {
        for j in 0..m {
            for k in 0..m {
                cov[(j, k)] += p.value(j) * p.value(k).conj();
                pseudo[(j, k)] += p.value(j) * p.value(k);
            }
        }
    }
    let scale = C64::new(1.0 / n as f64, 0.0);
    let alpha0 = c[(0, 0)].re;
    let cov_err = max_entry(&(cov * scale - &c)) / alpha0;
    let pseudo_err = max_entry(&(pseudo * scale)) / alpha0;
    verdict(
        1,
        "noise law",
        cov_err < 0.02 && pseudo_err < 0.02,
        format!("covariance error {cov_err:.4} alpha(0), pseudo-covariance {pseudo_err:.4} alpha(0), limit 0.02"),
    );
}

#[test]
fn ac02_markov_ansatz_value() {
    let mut worst: f64 = 0.0;
    for kappa in [0.3, 1.0, 2.5] {
        let grid = TimeGrid::spanning(5.0, 0.01).unwrap();
        let table = solve_jc_ansatz(1.0, &CorrelationKernel::dirac(kappa), &grid).unwrap();
        for j in 1..grid.len() {
            worst = worst.max((table.rate(j) - C64::new(0.5 * kappa, 0.0)).norm());
        }
    }
    verdict(2, "Markov ansatz value", worst < 1e-8, format!("max |F - kappa/2| = {worst:.2e}, limit 1e-8"));
}

#[test]
fn ac03_analytic_propagators() {
    let kernel = ou(1.0, 2.0);
    let grid = TimeGrid::spanning(2.0, 1e-3).unwrap();
    let jc = SystemModel::jaynes_cummings(1.0, kernel.clone()).unwrap();
    let deph = SystemModel::dephasing(1.0, 0.7, 1.0, kernel.clone()).unwrap();
    let jc_flow = LinearFlow::new(&jc, &grid).unwrap();
    let deph_flow = LinearFlow::new(&deph, &grid).unwrap();
    let table = solve_jc_ansatz(1.0, &kernel, &grid).unwrap();
    let paths = sample_paths(&kernel, &grid, 20, 3).unwrap();
    let (mut err_jc, mut err_deph): (f64, f64) = (0.0, 0.0);
    for (i, path) in paths.iter().enumerate() {
        let s = grid.time((i * 37) % 1000);
        let t = grid.time(1000 + (i * 53) % 1001);
        let numeric = propagator_numeric(&jc_flow, path, s, t).unwrap();
        let analytic = propagator_analytic_jc(&table, path, s, t).unwrap();
        err_jc = err_jc.max(max_entry(&(numeric.matrix - analytic.matrix)));
        let numeric = propagator_numeric(&deph_flow, path, s, t).unwrap();
        let analytic = propagator_analytic_dephasing(1.0, 0.7, 1.0, &kernel, path, s, t).unwrap();
        err_deph = err_deph.max(max_entry(&(numeric.matrix - analytic.matrix)));
    }
    verdict(
        3,
        "analytic propagators",
        err_jc < 1e-5 && err_deph < 1e-5,
        format!("max entry error JC {err_jc:.2e}, dephasing {err_deph:.2e}, limit 1e-5"),
    );
}

#[test]
fn ac04_cocycle() {
    let kernel = ou(1.0, 2.0);
    let grid = TimeGrid::spanning(2.0, 0.01).unwrap();
    let h = CMatrix::from_row_slice(2, 2, &[C64::new(0.5, 0.0), C64::new(0.2, 0.1), C64::new(0.2, -0.1), C64::new(-0.5, 0.0)]);
    let l = CMatrix::from_row_slice(2, 2, &[C64::new(0.3, 0.0), C64::new(0.8, 0.0), C64::new(0.0, 0.0), C64::new(-0.3, 0.0)]);
    let models = [
        ("jaynes-cummings", SystemModel::jaynes_cummings(1.0, kernel.clone()).unwrap()),
        ("dephasing", SystemModel::dephasing(1.0, 0.5, 1.0, kernel.clone()).unwrap()),
        ("static", SystemModel::static_coupling(h, l, kernel.clone()).unwrap()),
    ];
    let path = &sample_paths(&kernel, &grid, 1, 4).unwrap()[0];
    let mut lines = Vec::new();
    let mut worst: f64 = 0.0;
    let mut worst_ratio: f64 = 1.0;
    for (name, model) in &models {
        let flow = LinearFlow::new(model, &grid).unwrap();
        let mut err: f64 = 0.0;
        let mut state = 0x2545_F491_4F6C_DD1Du64;
        for _ in 0..50 {
            let mut idx = [0usize; 3];
            for v in idx.iter_mut() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                *v = (state % grid.len() as u64) as usize;
            }
            idx.sort_unstable();
            let [s, r, t] = idx.map(|k| grid.time(k));
            let a_st = propagator_numeric(&flow, path, s, t).unwrap();
            let a_sr = propagator_numeric(&flow, path, s, r).unwrap();
            let a_rt = propagator_numeric(&flow, path, r, t).unwrap();
            err = err.max(operator_norm(&(&a_st.matrix - &a_rt.matrix * &a_sr.matrix)));
            worst_ratio = worst_ratio.min(a_st.singular_value_ratio());
        }
        worst = worst.max(err);
        lines.push(format!("{name} {err:.2e}"));
    }
    verdict(
        4,
        "cocycle",
        worst < 1e-8 && worst_ratio > 1e-12,
        format!("{}; limit 1e-8; min singular value ratio {worst_ratio:.2e}", lines.join(", ")),
    );
}

fn compare_with_master(est: &UnravelEstimate, master: &[CMatrix], grid: &TimeGrid) -> (bool, String) {
    let mut ok = est.valid;
    let mut parts = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let j = grid.node(t).unwrap();
        let d = trace_distance(&est.rho_hat[j], &master[j]);
        let bound = (5.0 * est.stderr[j]).max(5e-2);
        ok &= d < bound;
        parts.push(format!("t={t}: {d:.4} < {bound:.4}"));
    }
    (ok, parts.join(", "))
}

#[test]
fn ac05_unraveling_matches_master_equations() {
    let grid = TimeGrid::spanning(2.0, 0.01).unwrap();
    let n = 10_000;

    let kernel = ou(1.0, 2.0);
    let jc = SystemModel::jaynes_cummings(1.0, kernel.clone()).unwrap();
    let est = estimate_rho(&jc, &excited(), &grid, n, 51, UnravelMode::Linear).unwrap();
    let master = evolve_jc_master(&solve_jc_ansatz(1.0, &kernel, &grid).unwrap(), &projector(&excited())).unwrap();
    let (ok_jc, jc_detail) = compare_with_master(&est, &master.rho, &grid);

    let kernel = ou(1.0, 1.0);
    let deph = SystemModel::dephasing(1.0, 0.5, 1.0, kernel.clone()).unwrap();
    let est = estimate_rho(&deph, &plus_state(), &grid, n, 52, UnravelMode::Linear).unwrap();
    let master = evolve_dephasing_master(1.0, 0.5, 1.0, &kernel, &projector(&plus_state()), &grid).unwrap();
    let (ok_deph, deph_detail) = compare_with_master(&est, &master.rho, &grid);

    verdict(
        5,
        "unraveling vs master equation",
        ok_jc && ok_deph,
        format!("JC [{jc_detail}]; dephasing [{deph_detail}]"),
    );
}

#[test]
fn ac06_mode_equivalence() {
    let grid = TimeGrid::spanning(2.0, 0.01).unwrap();
    let n = 10_000;
    let cases = [
        ("JC", SystemModel::jaynes_cummings(1.0, ou(1.0, 2.0)).unwrap(), excited()),
        ("dephasing", SystemModel::dephasing(1.0, 0.5, 1.0, ou(1.0, 1.0)).unwrap(), plus_state()),
    ];
    let modes = [UnravelMode::Linear, UnravelMode::NormalizedWeighted, UnravelMode::Nonlinear];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, model, psi0) in &cases {
        let ests: Vec<UnravelEstimate> =
            modes.iter().map(|&m| estimate_rho(model, psi0, &grid, n, 61, m).unwrap()).collect();
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in a + 1..3 {
                for j in [50, 100, 200] {
                    let d = trace_distance(&ests[a].rho_hat[j], &ests[b].rho_hat[j]);
                    let combined = (ests[a].stderr[j].powi(2) + ests[b].stderr[j].powi(2)).sqrt();
                    ok &= d < 5.0 * combined && ests[a].valid && ests[b].valid;
                    worst = worst.max(d / (5.0 * combined));
                }
            }
        }
        parts.push(format!("{name} worst distance / (5 combined stderr) = {worst:.3}"));
    }
    verdict(6, "mode equivalence", ok, parts.join(", "));
}

#[test]
fn ac07_exact_oracle_unraveling() {
    let modes = vec![
        Mode { coupling: C64::new(0.4, 0.0), frequency: 0.8 },
        Mode { coupling: C64::new(0.3, 0.1), frequency: 1.0 },
        Mode { coupling: C64::new(0.5, 0.0), frequency: 1.4 },
    ];
    let bath = ModeBath::uniform(modes, 2).unwrap();
    let omega = 1.0;
    let grid = TimeGrid::spanning(1.0, 0.01).unwrap();
    let h = linalg::sigma_z() * C64::new(0.5 * omega, 0.0);
    let exact = exact_few_mode(&h, &linalg::sigma_minus(), &bath, &excited(), &grid, DEFAULT_MAX_DIM).unwrap();
    let model = SystemModel::jaynes_cummings(omega, kernel_of(&bath)).unwrap();
    let est = estimate_rho(&model, &excited(), &grid, 10_000, 71, UnravelMode::Linear).unwrap();
    let mut ok = !exact.leakage_flagged && est.valid;
    let mut parts = Vec::new();
    for t in [0.5, 1.0] {
        let j = grid.node(t).unwrap();
        let d = trace_distance(&exact.rho.rho[j], &est.rho_hat[j]);
        ok &= d < 5e-2;
        parts.push(format!("t={t}: {d:.4}"));
    }
    verdict(7, "exact few-mode oracle", ok, format!("{}; limit 5e-2; leakage {:.1e}", parts.join(", "), exact.leakage));
}

#[test]
fn ac08_norm_martingale_dichotomy() {
    let grid = TimeGrid::spanning(2.0, 0.01).unwrap();
    let n = 10_000;
    let bath = vec![Mode { coupling: C64::new(0.5, 0.0), frequency: 1.0 }, Mode { coupling: C64::new(0.3, 0.2), frequency: 2.0 }];
    let kernels = [
        ("Dirac", CorrelationKernel::dirac(1.0)),
        ("OU", ou(1.0, 1.0)),
        ("modes", CorrelationKernel::ModeSum(bath)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, kernel) in &kernels {
        let models = [
            SystemModel::dephasing(1.0, 0.5, 1.0, kernel.clone()).unwrap(),
            SystemModel::jaynes_cummings(1.0, kernel.clone()).unwrap(),
        ];
        for (m, model) in models.iter().enumerate() {
            let psi0 = if m == 0 { plus_state() } else { excited() };
            let stats = norm_statistics(model, &psi0, &grid, n, 81, 1.0, 2.0, 0).unwrap();
            let worst = (1..grid.len())
                .map(|j| (stats.mean_sq_norm[j] - 1.0).abs() / stats.stderr[j])
                .fold(0.0, f64::max);
            ok &= worst < 5.0 && stats.valid;
            parts.push(format!("{name}/{} max |E|psi|^2 - 1|/stderr {worst:.2}", if m == 0 { "deph" } else { "JC" }));
        }
    }

    let dirac = SystemModel::dephasing(1.0, 0.5, 1.0, CorrelationKernel::dirac(1.0)).unwrap();
    let stats = norm_statistics(&dirac, &plus_state(), &grid, n, 82, 1.0, 2.0, 5).unwrap();
    let dirac_worst = stats.conditional.iter().map(|c| c.deviation_in_stderr()).fold(0.0, f64::max);
    ok &= dirac_worst < 5.0;

    let ou_model = SystemModel::dephasing(1.0, 1.0, 1.0, ou(1.0, 1.0)).unwrap();
    let stats = norm_statistics(&ou_model, &plus_state(), &grid, n, 83, 1.0, 2.0, 5).unwrap();
    let ou_worst = stats.conditional.iter().map(|c| c.deviation_in_stderr()).fold(0.0, f64::max);
    ok &= ou_worst > 5.0;

    verdict(
        8,
        "norm martingale dichotomy",
        ok,
        format!(
            "{}; conditional Dirac max {dirac_worst:.2} stderr (< 5), OU max {ou_worst:.2} stderr (> 5)",
            parts.join(", ")
        ),
    );
}

#[test]
fn ac09_compatibility_audit() {
    let n = 10_000;
    let dt = 0.01;

    // (a) Markov limit.
    let dirac = CorrelationKernel::dirac(1.0);
    let model = SystemModel::dephasing(1.0, 0.5, 1.0, dirac.clone()).unwrap();
    let past = &sample_paths(&dirac, &TimeGrid::spanning(1.0, dt).unwrap(), 1, 90).unwrap()[0];
    let a = audit_compatibility(&model, past, 1.0, 2.0, n, 91).unwrap();
    let ok_a = a.residual < 5.0 * a.stderr && !a.reference_is_closed_form;

    // (b) closed form on a (Γ, r) panel, with the worked point pinned at Re z_s = 0.
    let mut ok_b = true;
    let mut worst_b: f64 = 0.0;
    let mut derived = f64::NAN;
    for gamma in [0.5, 1.0, 2.0] {
        let kernel = ou(1.0, gamma);
        for r in [0.5, 0.75, 1.0] {
            let model = SystemModel::dephasing(1.0, r, 1.0, kernel.clone()).unwrap();
            let worked = gamma == 1.0 && r == 1.0;
            let past = if worked {
                pinned_past(&kernel, 1.0, dt, 0.0, 92)
            } else {
                sample_paths(&kernel, &TimeGrid::spanning(1.0, dt).unwrap(), 1, 93).unwrap().remove(0)
            };
            let rep = audit_compatibility(&model, &past, 1.0, 2.0, n, 94).unwrap();
            ok_b &= rep.reference_is_closed_form && rep.residual < 5.0 * rep.stderr;
            worst_b = worst_b.max(rep.residual / rep.stderr);
            if worked {
                derived = rep.reference[(0, 0)].re;
                let closed = closed_form_dephasing_ou(1.0, 1.0, 1.0, 1.0, 2.0, 0.0);
                ok_b &= (derived - 0.5493).abs() < 5e-4 && (closed[(1, 1)].re - derived).abs() < 1e-15;
            }
        }
    }

    // (c) compatibility is restored as κΓ grows.
    let fine = 2e-3;
    let residual_at = |gamma: f64| {
        let kernel = ou(1.0, gamma);
        let model = SystemModel::dephasing(1.0, 1.0, 1.0, kernel.clone()).unwrap();
        let past = pinned_past(&kernel, 1.0, fine, 0.0, 95);
        audit_compatibility(&model, &past, 1.0, 2.0, 4_000, 96).unwrap().identity_residual
    };
    let (slow, fast) = (residual_at(1.0), residual_at(100.0));
    let ok_c = fast < slow;

    // (d) short times: t - s = min(1/Γ, κ)/100.
    let kernel = ou(1.0, 1.0);
    let model = SystemModel::dephasing(1.0, 1.0, 1.0, kernel.clone()).unwrap();
    let past = pinned_past(&kernel, 1.0, 1e-3, 0.0, 97);
    let d = audit_compatibility(&model, &past, 1.0, 1.01, n, 98).unwrap();
    let ok_d = d.identity_residual < 1e-2;

    verdict(
        9,
        "compatibility audit",
        ok_a && ok_b && ok_c && ok_d,
        format!(
            "(a) Dirac residual {:.4} vs 5 stderr {:.4}; (b) worst residual/stderr {worst_b:.2}, worked point {derived:.5} (~0.5493); \
             (c) residual kappa*Gamma=100 {fast:.4} < kappa*Gamma=1 {slow:.4}; (d) short-time residual {:.4} < 1e-2",
            a.residual,
            5.0 * a.stderr,
            d.identity_residual
        ),
    );
}

#[test]
fn ac10_jc_criterion_residual() {
    let (s, t) = (1.0, 2.0);
    let dirac = CorrelationKernel::dirac(1.0);
    let grid = TimeGrid::spanning(t, 0.01).unwrap();
    let table = solve_jc_ansatz(1.0, &dirac, &grid).unwrap();
    let dirac_max = default_u_panel(s)
        .iter()
        .map(|&u| jc_kernel_residual(&table, &dirac, s, t, u).unwrap().norm())
        .fold(0.0, f64::max);

    let kernel = ou(1.0, 1.0);
    let residual = |dt: f64, u: f64| {
        let grid = TimeGrid::spanning(t, dt).unwrap();
        let table = solve_jc_ansatz(1.0, &kernel, &grid).unwrap();
        jc_kernel_residual(&table, &kernel, s, t, u).unwrap()
    };
    let mut ok_ou = true;
    let mut worst_margin = f64::INFINITY;
    for u in default_u_panel(s) {
        let coarse = residual(0.01, u);
        let fine = residual(0.005, u);
        let quad_err = (coarse - fine).norm();
        ok_ou &= fine.norm() > 10.0 * quad_err;
        worst_margin = worst_margin.min(fine.norm() / quad_err);
    }

    let past = &sample_paths(&dirac, &TimeGrid::spanning(s, 0.01).unwrap(), 1, 100).unwrap()[0];
    let m = jc_conditional_moments(&table, &dirac, past, t, 10_000, 101).unwrap();
    let ok_h = (m.h_mean - 1.0).abs() < 5.0 * m.h_stderr;
    let ok_j = m.j_mean.norm() < 5.0 * m.j_stderr;

    verdict(
        10,
        "JC criterion residual",
        dirac_max < 1e-10 && ok_ou && ok_h && ok_j,
        format!(
            "Dirac max |R| {dirac_max:.1e}; OU min |R|/quadrature error {worst_margin:.1} (> 10); \
             E[h] = {:.4} +- {:.4}, |E[j]| = {:.4} (5 stderr {:.4})",
            m.h_mean,
            m.h_stderr,
            m.j_mean.norm(),
            5.0 * m.j_stderr
        ),
    );
}

#[test]
fn ac11_noise_round_trip() {
    let kernel = ou(1.0, 1.0);
    let grid = TimeGrid::spanning(1.0, 1e-3).unwrap();
    let model = SystemModel::dephasing(1.0, 0.5, 1.0, kernel.clone()).unwrap();
    let flow = LinearFlow::new(&model, &grid).unwrap();
    let mut worst: f64 = 0.0;
    for path in sample_paths(&kernel, &grid, 5, 110).unwrap() {
        let traj = integrate_linear(&flow, &path, &plus_state()).unwrap();
        let states: Vec<_> = (0..grid.len()).map(|j| traj.normalized_state(j)).collect();
        let recovered = recover_noise(&flow, &states).unwrap();
        for j in 0..grid.n_steps() {
            worst = worst.max((recovered.values()[j] - path.values()[j]).norm());
        }
    }
    let jc = SystemModel::jaynes_cummings(1.0, kernel.clone()).unwrap();
    let jc_flow = LinearFlow::new(&jc, &grid).unwrap();
    let path = &sample_paths(&kernel, &grid, 1, 111).unwrap()[0];
    let traj = integrate_linear(&jc_flow, path, &ground()).unwrap();
    let states: Vec<_> = (0..grid.len()).map(|j| traj.normalized_state(j)).collect();
    let unidentifiable = matches!(recover_noise(&jc_flow, &states), Err(Error::UnidentifiableNoise { step: 0 }));
    verdict(
        11,
        "noise round trip",
        worst < 1e-3 && unidentifiable,
        format!("max recovery error {worst:.2e} (< 1e-3); JC ground state unidentifiable: {unidentifiable}"),
    );
}

fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn ac12_reproducibility() {
    let base = r#"
        [kernel]
        family = "ou"
        kappa = 1.0
        gamma = 2.0

        [model]
        kind = "jaynes-cummings"
        omega = 1.0
        initial_state = "excited"

        [grid]
        t_max = 1.0
        dt = 0.01

        [ensemble]
        n_traj = 200
        seed = 7
        mode = "nonlinear"

        [trajectory]
        mode = "nonlinear"
        propagators = true

        [norms]
        s = 0.5
        t = 1.0
        n_pasts = 2

        [compat]
        s = 0.5
        t = 1.0
        n_cond = 200
        normalization = true

        [oracle]
        kind = "master"
        export_ansatz = true

        [jc_residual]
        s = 0.5
        t = 1.0
        n_cond = 200
    "#;
    let tmp = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut compared = 0;
    for task in ["noise", "trajectory", "unravel", "norms", "compat", "oracle", "jc-residual"] {
        let config = RunConfig::from_toml(&format!("task = \"{task}\"\n{base}")).unwrap();
        let a = tmp.path().join(format!("{task}-a"));
        let b = tmp.path().join(format!("{task}-b"));
        let ma = nmqsd::run(&config, &a, Some(1)).unwrap();
        let mb = nmqsd::run(&config, &b, Some(2)).unwrap();
        let (fa, fb) = (data_files(&a), data_files(&b));
        ok &= !fa.is_empty() && fa == fb && ma.config_sha256 == mb.config_sha256 && ma.summary == mb.summary;
        compared += fa.len();
    }
    verdict(12, "reproducibility", ok, format!("{compared} data files byte-identical across two runs (1 and 2 workers)"));
}
