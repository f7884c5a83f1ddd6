use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symnoise_core::basis::{build_qbasis, sector_decompose, QBasis};
use symnoise_core::fff::*;
use symnoise_core::grid::TimeGrid;
use symnoise_core::noise::{NoiseChannel, NoiseModel, PsdSpec};
use symnoise_core::operator::{embed_qubit_operator, pauli_x, pauli_y, pauli_z};
use symnoise_core::propagation::{PropagatorCache, Schedule};
use symnoise_core::CMatrix;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn qubit_setup(h0: CMatrix, q: CMatrix, grid: TimeGrid) -> (QBasis, PropagatorCache) {
    let basis = build_qbasis(&sector_decompose(&q, None).unwrap());
    let schedule = Schedule::constant(grid, h0, Some(q)).unwrap();
    (basis, PropagatorCache::build(&schedule).unwrap())
}

fn plus_state() -> CMatrix {
    CMatrix::from_element(2, 2, c(0.5))
}

#[test]
fn white_dephasing_matches_closed_form() {
    let s0 = 0.05;
    let grid = TimeGrid::new(0.01, 100).unwrap();
    let (basis, cache) = qubit_setup(CMatrix::zeros(2, 2), pauli_z(), grid);
    let model = NoiseModel::independent(vec![NoiseChannel {
        operator: pauli_z(),
        psd: PsdSpec::White { s0, omega_uv: 200.0 },
    }])
    .unwrap();
    let cm = control_matrix(&cache, &basis, &model).unwrap();
    let params = coherence_params(&cm, &model, CovarianceSource::Continuous).unwrap();
    let t = grid.duration();
    // Only the sigma_z / sqrt(2) direction carries weight: chi1 = -S0 T.
    let (i, j) = params.chi1.iamax_full();
    assert_eq!((i, j), (0, 0));
    assert_relative_eq!(params.chi1[(0, 0)], -s0 * t, max_relative = 1e-2);
    assert!(params.chi2.amax() < 1e-12);

    let cum = assemble_cumulant(&params, &basis).unwrap();
    let rho = predict_average_state(&cum, &plus_state(), &basis);
    assert_relative_eq!(rho[(0, 1)].re, 0.5 * (-2.0 * s0 * t).exp(), max_relative = 1e-2);
    assert_relative_eq!(rho[(0, 0)].re, 0.5, epsilon = 1e-12);
}

#[test]
fn fast_and_literal_assembly_agree() {
    let q = embed_qubit_operator(&pauli_z(), 0, 2) + embed_qubit_operator(&pauli_z(), 1, 2);
    let basis = build_qbasis(&sector_decompose(&q, None).unwrap());
    let d = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let params = CoherenceParams {
        chi1: (&a + a.transpose()) * 0.5,
        chi2: (&b - b.transpose()) * 0.5,
        active: (0..d).collect(),
    };
    let fast = assemble_cumulant(&params, &basis).unwrap().matrix();
    let literal = assemble_cumulant_literal(&params, &basis);
    assert!((fast - literal).amax() < 1e-10);
}

fn driven_qubit(duration: f64, steps: usize, psd: PsdSpec) -> (QBasis, PropagatorCache, NoiseModel) {
    let grid = TimeGrid::new(duration / steps as f64, steps).unwrap();
    let h0 = pauli_x() * c(1.3);
    let (basis, cache) = qubit_setup(h0, pauli_x(), grid);
    let model = NoiseModel::independent(vec![NoiseChannel { operator: pauli_z() + pauli_y() * c(0.4), psd }]).unwrap();
    (basis, cache, model)
}

#[test]
fn cumulant_spectrum_is_dissipative() {
    let (basis, cache, model) = driven_qubit(2.0, 100, PsdSpec::lorentzian(0.1, 1.0));
    let cm = control_matrix(&cache, &basis, &model).unwrap();
    let params = coherence_params(&cm, &model, CovarianceSource::Synthesized { modes: None }).unwrap();
    assert!(params.chi2.amax() > 0.0);
    let cum = assemble_cumulant(&params, &basis).unwrap();
    let rep = spectrum_report(&cum);
    assert!(rep.max_sym_eigenvalue <= 1e-12 * rep.sym_norm);
    assert!(rep.identity_residual < 1e-12);
    assert!(rep.sym_asymmetry < 1e-12);
    assert!(rep.max_asym_real < 1e-10);
    assert!(rep.asym_norm > 0.0);
}

#[test]
fn time_and_frequency_routes_agree() {
    let (basis, cache, model) = driven_qubit(2.0, 100, PsdSpec::lorentzian(0.1, 1.0));
    let cm = control_matrix(&cache, &basis, &model).unwrap();
    let time = coherence_params(&cm, &model, CovarianceSource::Continuous).unwrap();
    let omega = default_omega_grid(&model, cm.grid.duration());
    let freq = FilterFunctions::compute(&cm, &model, omega).unwrap().coherence_params(&model);
    let scale1 = time.chi1.amax();
    let scale2 = time.chi2.amax();
    assert!(scale2 > 0.0);
    assert!((&time.chi1 - &freq.chi1).amax() <= 0.01 * scale1, "chi1 {} vs {}", time.chi1, freq.chi1);
    assert!((&time.chi2 - &freq.chi2).amax() <= 0.01 * scale2, "chi2 {} vs {}", time.chi2, freq.chi2);
}

#[test]
fn zero_noise_gives_zero_cumulant() {
    let grid = TimeGrid::new(0.01, 50).unwrap();
    let (basis, cache) = qubit_setup(pauli_z(), pauli_z(), grid);
    let model = NoiseModel::independent(vec![NoiseChannel {
        operator: pauli_x(),
        psd: PsdSpec::White { s0: 0.0, omega_uv: 100.0 },
    }])
    .unwrap();
    let cm = control_matrix(&cache, &basis, &model).unwrap();
    let params = coherence_params(&cm, &model, CovarianceSource::Continuous).unwrap();
    let cum = assemble_cumulant(&params, &basis).unwrap();
    assert!(cum.is_zero());
    let ss = steady_state(&cum, &basis, 0, NoiseClass::Breaking, &plus_state()).unwrap();
    assert_eq!(ss.extrapolation_time, 0.0);
}

#[test]
fn breaking_noise_relaxes_to_maximally_mixed() {
    let grid = TimeGrid::new(0.01, 100).unwrap();
    let (basis, cache) = qubit_setup(CMatrix::zeros(2, 2), pauli_z(), grid);
    let channels = vec![
        NoiseChannel { operator: pauli_x(), psd: PsdSpec::White { s0: 0.02, omega_uv: 100.0 } },
        NoiseChannel { operator: pauli_z(), psd: PsdSpec::White { s0: 0.01, omega_uv: 100.0 } },
    ];
    let model = NoiseModel::independent(channels).unwrap();
    assert_eq!(noise_class(&model, &basis, 1e-9).unwrap(), NoiseClass::Breaking);
    let cm = control_matrix(&cache, &basis, &model).unwrap();
    let params = coherence_params(&cm, &model, CovarianceSource::Continuous).unwrap();
    let cum = assemble_cumulant(&params, &basis).unwrap();
    let up = CMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c(1.0) } else { c(0.0) });
    let sector = basis.spectrum.sector_index(1.0);
    let ss = steady_state(&cum, &basis, sector, NoiseClass::Breaking, &up).unwrap();
    assert!(ss.distance_to_expected < 1e-9, "{}", ss.distance_to_expected);
    assert!(ss.projection_mismatch < 1e-9);
    assert_eq!(ss.kernel_dim, 1);
    assert!(!ss.extra_conserved);
}

#[test]
fn preserving_noise_keeps_the_sector() {
    let grid = TimeGrid::new(0.01, 100).unwrap();
    let (basis, cache) = qubit_setup(CMatrix::zeros(2, 2), pauli_z(), grid);
    let model = NoiseModel::independent(vec![NoiseChannel {
        operator: pauli_z(),
        psd: PsdSpec::White { s0: 0.05, omega_uv: 100.0 },
    }])
    .unwrap();
    assert_eq!(noise_class(&model, &basis, 1e-9).unwrap(), NoiseClass::Preserving);
    let cm = control_matrix(&cache, &basis, &model).unwrap();
    let params = coherence_params(&cm, &model, CovarianceSource::Continuous).unwrap();
    let cum = assemble_cumulant(&params, &basis).unwrap();
    let report = structure_check(&cum, &basis, NoiseClass::Preserving, 0, 1e-10);
    assert!(report.passed);
    let up = CMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c(1.0) } else { c(0.0) });
    let sector = basis.spectrum.sector_index(1.0);
    let ss = steady_state(&cum, &basis, sector, NoiseClass::Preserving, &up).unwrap();
    assert!(ss.distance_to_expected < 1e-9);
    assert_eq!(ss.reachable_kernel_dim, ss.expected_kernel_dim);
}

#[test]
fn dephasing_bounds_for_sector_state() {
    let s0 = 0.02;
    let grid = TimeGrid::new(0.01, 100).unwrap();
    let (basis, cache) = qubit_setup(CMatrix::zeros(2, 2), pauli_z(), grid);
    let model = NoiseModel::independent(vec![NoiseChannel {
        operator: pauli_x(),
        psd: PsdSpec::White { s0, omega_uv: 200.0 },
    }])
    .unwrap();
    let cm = control_matrix(&cache, &basis, &model).unwrap();
    let params = coherence_params(&cm, &model, CovarianceSource::Continuous).unwrap();
    let cum = assemble_cumulant(&params, &basis).unwrap();
    let omega = default_omega_grid(&model, grid.duration());
    let ffs = FilterFunctions::compute(&cm, &model, omega).unwrap();
    let up = CMatrix::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c(1.0) } else { c(0.0) });
    let sector = basis.spectrum.sector_index(1.0);
    let rep = distance_and_bounds(&cum, &up, &ffs, &model, &basis, sector);
    // Spin-flip population S0 T to first order; the overlap bound is tight here.
    assert_relative_eq!(rep.distance, s0 * grid.duration(), max_relative = 2e-2);
    assert_relative_eq!(rep.overlap_bound, rep.distance, max_relative = 2e-2);
    assert!(rep.overlap_bound <= rep.white_noise_bound);
    assert_eq!(rep.n_q, 0);
    assert_eq!(rep.n_qq, vec![(1 - sector, 2)]);
}
