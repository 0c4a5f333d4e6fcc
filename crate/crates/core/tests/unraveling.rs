use nmqsd_core::ensemble::{estimate_rho, UnravelMode};
use nmqsd_core::kernels::{CorrelationKernel, TimeGrid};
use nmqsd_core::linalg::{excited, plus_state, projector, trace_distance};
use nmqsd_core::models::{solve_jc_ansatz, SystemModel};
use nmqsd_core::reference::{evolve_dephasing_master, evolve_jc_master};

#[test]
fn nonlinear_dephasing_ensemble_matches_master_equation() {
    let kernel = CorrelationKernel::ornstein_uhlenbeck(1.0, 1.0);
    let model = SystemModel::dephasing(1.0, 0.5, 1.0, kernel.clone()).unwrap();
    let grid = TimeGrid::spanning(1.0, 0.01).unwrap();
    let est = estimate_rho(&model, &plus_state(), &grid, 10_000, 21, UnravelMode::Nonlinear).unwrap();
    let master = evolve_dephasing_master(1.0, 0.5, 1.0, &kernel, &projector(&plus_state()), &grid).unwrap();
    let j = grid.n_steps();
    assert!(trace_distance(&est.rho_hat[j], &master.rho[j]) < 5e-2);
    assert!(est.valid);
}

#[test]
fn linear_jc_ensemble_matches_master_equation() {
    let kernel = CorrelationKernel::ornstein_uhlenbeck(1.0, 2.0);
    let model = SystemModel::jaynes_cummings(1.0, kernel.clone()).unwrap();
    let grid = TimeGrid::spanning(2.0, 0.01).unwrap();
    let est = estimate_rho(&model, &excited(), &grid, 10_000, 22, UnravelMode::Linear).unwrap();
    let table = solve_jc_ansatz(1.0, &kernel, &grid).unwrap();
    let master = evolve_jc_master(&table, &projector(&excited())).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let j = grid.node(t).unwrap();
        let bound = (5.0 * est.stderr[j]).max(5e-2);
        assert!(trace_distance(&est.rho_hat[j], &master.rho[j]) < bound);
        assert!((est.rho_hat[j].trace().re - 1.0).abs() < 5.0 * est.stderr[j] + 1e-12);
    }
}

#[test]
fn nonlinear_jc_population_tracks_master_equation() {
    let kernel = CorrelationKernel::ornstein_uhlenbeck(1.0, 2.0);
    let model = SystemModel::jaynes_cummings(1.0, kernel.clone()).unwrap();
    let grid = TimeGrid::spanning(2.0, 0.01).unwrap();
    let est = estimate_rho(&model, &excited(), &grid, 4_000, 23, UnravelMode::Nonlinear).unwrap();
    let master = evolve_jc_master(&solve_jc_ansatz(1.0, &kernel, &grid).unwrap(), &projector(&excited())).unwrap();
    for t in [1.0, 2.0] {
        let j = grid.node(t).unwrap();
        let gap = (est.rho_hat[j][(0, 0)] - master.rho[j][(0, 0)]).norm();
        assert!(gap < 5.0 * est.stderr[j], "t = {t}: gap {gap}, stderr {}", est.stderr[j]);
    }
}
