use num_complex::Complex64;

use symnoise_core::grid::TimeGrid;
use symnoise_core::noise::{trajectory_seed, NoiseChannel, NoiseModel, PsdSpec, SynthesisPlan};
use symnoise_core::operator::{embed_qubit_operator, is_unitary, max_abs, pauli_x, pauli_z};
use symnoise_core::propagation::{
    ensemble_average, noisy_propagator, noisy_trajectory, EnsembleConfig, PropagatorCache, Schedule,
};
use symnoise_core::CMatrix;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn plus() -> CMatrix {
    CMatrix::from_element(2, 2, c(0.5))
}

fn dephasing(psd: PsdSpec) -> NoiseModel {
    NoiseModel::independent(vec![NoiseChannel { operator: pauli_z(), psd }]).unwrap()
}

#[test]
fn dephasing_coherence_matches_phase_variance() {
    let psd = PsdSpec::lorentzian(0.5, 0.4);
    let grid = TimeGrid::new(0.005, 400).unwrap();
    let model = dephasing(psd.clone());
    let schedule = Schedule::constant(grid, CMatrix::zeros(2, 2), None).unwrap();
    let cfg = EnsembleConfig { keep_states: true, antithetic: true, ..EnsembleConfig::new(20_000, 8) };
    let ens = ensemble_average(&schedule, &model, &cfg, &plus()).unwrap();

    // Phase phi = 2 int beta: Var(phi) = 4 sum_m a_m^2 * 2 (1 - cos w_m T) / w_m^2
    // for the synthesised modes, and <sigma_x> = exp(-Var(phi) / 2).
    let plan = SynthesisPlan::new(&model, grid, None).unwrap();
    let t = grid.duration();
    let dw = plan.mode_spacing();
    let var_phi: f64 = plan
        .mode_frequencies()
        .iter()
        .map(|&w| 4.0 * psd.density(w) * dw / std::f64::consts::PI * 2.0 * (1.0 - (w * t).cos()) / (w * w))
        .sum();
    let exact = (-0.5 * var_phi).exp();
    let values: Vec<f64> = ens.states.unwrap().iter().map(|r| 2.0 * r[(0, 1)].re).collect();
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    assert!((mean - exact).abs() < 4.0 * sd / m.sqrt(), "{mean} vs {exact}");
    assert!(max_abs(&(ens.mean_state.clone() - ens.mean_state.adjoint())) < 1e-14);
    assert!((ens.mean_state.trace().re - 1.0).abs() < 1e-12);
}

#[test]
fn propagators_stay_unitary() {
    let grid = TimeGrid::new(0.01, 300).unwrap();
    let model = dephasing(PsdSpec::Pink { amplitude: 1.0, omega_ir: 0.5, omega_uv: 50.0 });
    let schedule = Schedule::constant(grid, pauli_x() * c(2.0), None).unwrap();
    let plan = SynthesisPlan::new(&model, grid, None).unwrap();
    for i in 0..5 {
        let traj = plan.sample(trajectory_seed(1, i), false);
        let u = noisy_propagator(&schedule, &model, &traj).unwrap();
        assert!(is_unitary(&u));
        let rho = noisy_trajectory(&schedule, &model, &traj, &plus()).unwrap();
        let direct = &u * plus() * u.adjoint();
        assert!(max_abs(&(rho - direct)) < 1e-10);
    }
}

#[test]
fn silent_noise_reproduces_ideal_evolution() {
    let grid = TimeGrid::new(0.02, 100).unwrap();
    let model = dephasing(PsdSpec::White { s0: 0.0, omega_uv: 10.0 });
    let h0 = pauli_x() * c(0.8) + pauli_z() * c(0.3);
    let schedule = Schedule::constant(grid, h0.clone(), None).unwrap();
    let ens = ensemble_average(&schedule, &model, &EnsembleConfig::new(4, 1), &plus()).unwrap();
    // exp(-i h t) for a 2x2 traceless h: cos(|h| t) I - i sin(|h| t) h / |h|.
    let norm = (0.8f64 * 0.8 + 0.3 * 0.3).sqrt();
    let t = grid.duration();
    let u = CMatrix::identity(2, 2) * c((norm * t).cos()) - h0 * Complex64::new(0.0, (norm * t).sin() / norm);
    let exact = &u * plus() * u.adjoint();
    assert!(max_abs(&(ens.mean_state - exact)) < 1e-10);
}

#[test]
fn ensembles_are_identical_for_any_worker_count() {
    let n = 2;
    let grid = TimeGrid::new(0.02, 100).unwrap();
    let psd = PsdSpec::Lorentzian { variance: 0.3, tau_c: 0.5, omega_uv: 100.0 };
    let channels = (0..n)
        .map(|i| NoiseChannel { operator: embed_qubit_operator(&pauli_z(), i, n), psd: psd.clone() })
        .collect();
    let model = NoiseModel::independent(channels).unwrap();
    let h0 = embed_qubit_operator(&pauli_x(), 0, n) + embed_qubit_operator(&pauli_x(), 1, n);
    let schedule = Schedule::constant(grid, h0, None).unwrap();
    let rho = CMatrix::from_element(4, 4, c(0.25));
    let run = |threads| {
        let cfg = EnsembleConfig { threads: Some(threads), checkpoints: vec![50, 100], ..EnsembleConfig::new(77, 3) };
        ensemble_average(&schedule, &model, &cfg, &rho).unwrap()
    };
    let one = run(1);
    for threads in [2, 3, 5] {
        let other = run(threads);
        assert_eq!(other.mean_state, one.mean_state);
        assert_eq!(other.checkpoints, one.checkpoints);
    }
}

#[test]
fn collective_dephasing_keeps_each_trajectory_symmetric() {
    let n = 3;
    let grid = TimeGrid::new(0.02, 150).unwrap();
    let psd = PsdSpec::Pink { amplitude: 0.5, omega_ir: 0.1, omega_uv: 10.0 };
    let channels = (0..n)
        .map(|i| NoiseChannel { operator: embed_qubit_operator(&pauli_z(), i, n), psd: psd.clone() })
        .collect();
    let model = NoiseModel::fully_correlated(channels).unwrap();
    let mut h0 = CMatrix::zeros(8, 8);
    for i in 0..n {
        h0 += embed_qubit_operator(&pauli_x(), i, n);
    }
    let schedule = Schedule::constant(grid, h0, None).unwrap();
    let plan = SynthesisPlan::new(&model, grid, None).unwrap();
    // Fully symmetric state |+++>; the symmetric subspace of three qubits
    // is spanned by the Dicke states, so the projector onto it is the
    // average over all qubit permutations.
    let rho0 = CMatrix::from_element(8, 8, c(0.125));
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut sym = CMatrix::zeros(8, 8);
    for p in perms {
        for x in 0..8usize {
            let y = (0..3).fold(0, |acc, k| acc | (((x >> k) & 1) << p[k]));
            sym[(y, x)] += c(1.0 / 6.0);
        }
    }
    for i in 0..4 {
        let rho = noisy_trajectory(&schedule, &model, &plan.sample(trajectory_seed(4, i), false), &rho0).unwrap();
        let inside = (&sym * &rho * &sym).trace().re;
        assert!((inside - 1.0).abs() < 1e-10, "population {inside}");
    }
}

#[test]
fn cached_propagators_match_direct_products() {
    let grid = TimeGrid::new(0.05, 40).unwrap();
    let h = pauli_x() * c(1.1);
    let schedule = Schedule::constant(grid, h.clone(), None).unwrap();
    let cache = PropagatorCache::build(&schedule).unwrap();
    let t = grid.duration();
    let u = CMatrix::identity(2, 2) * c((1.1 * t).cos()) - pauli_x() * Complex64::new(0.0, (1.1 * t).sin());
    assert!(max_abs(&(cache.total() - u)) < 1e-12);
}
