use approx::assert_abs_diff_eq;
use nalgebra::{Matrix4, SymmetricEigen};
use noisesense_core::config::{Profile, RunConfig};
use noisesense_core::dynamics::{
    dark_state, ideal_stirap_propagate, lindblad_rhs, population, rk4_step, FrameKind, IdealStirapParams,
    IntegratorConfig, QuantumState,
};
use noisesense_core::efficiency::{Protocol, SimConfig};
use noisesense_core::model::{to_complex, DriveTag, Ket4, Mat4, PulseParams, C64};
use proptest::prelude::*;

fn short_sim() -> SimConfig {
    RunConfig::profile(Profile::Smoke).sim_config()
}

fn hermitian(entries: &[f64]) -> Mat4 {
    let mut m = Mat4::zeros();
    let mut k = 0;
    for r in 0..4 {
        m[(r, r)] = C64::new(entries[k], 0.0);
        k += 1;
        for c in r + 1..4 {
            m[(r, c)] = C64::new(entries[k], entries[k + 1]);
            m[(c, r)] = m[(r, c)].conj();
            k += 2;
        }
    }
    m
}

#[test]
fn default_protocol_norm_and_transfer() {
    let p = Protocol::new(&SimConfig::default(), DriveTag::Equal).unwrap();
    for (d1, d2) in [(0.0, 0.0), (0.01, -0.005)] {
        let run = p.run(d1, d2, None).unwrap();
        assert!(run.norm_drift <= 1e-8, "drift {} at ({d1}, {d2})", run.norm_drift);
    }
    let xi = p.efficiency_point(0.0, 0.0).unwrap();
    assert!(xi >= 0.9, "xi = {xi}");
}

#[test]
fn step_halving_converges() {
    let sim = SimConfig::default();
    let fine = SimConfig {
        integrator: IntegratorConfig {
            resolution_factor: 2 * sim.integrator.resolution_factor,
            ..sim.integrator
        },
        ..sim
    };
    for (d1, d2) in [(0.0, 0.0), (0.004, 0.008)] {
        let a = Protocol::new(&sim, DriveTag::Equal).unwrap().efficiency_point(d1, d2).unwrap();
        let b = Protocol::new(&fine, DriveTag::Equal).unwrap().efficiency_point(d1, d2).unwrap();
        assert!((a - b).abs() < 1e-6, "({d1}, {d2}): {a} vs {b}");
    }
}

#[test]
fn lab_and_interaction_frames_agree() {
    let sim = short_sim();
    let lab = SimConfig {
        integrator: IntegratorConfig {
            frame: FrameKind::Lab,
            resolution_factor: 200,
            ..sim.integrator
        },
        ..sim
    };
    for tag in DriveTag::ALL {
        let a = Protocol::new(&sim, tag).unwrap().efficiency_point(0.003, -0.002).unwrap();
        let b = Protocol::new(&lab, tag).unwrap().efficiency_point(0.003, -0.002).unwrap();
        assert!((a - b).abs() < 1e-6, "{tag}: {a} vs {b}");
    }
}

#[test]
fn correlated_noise_never_populates_odd_dark_state() {
    // Correlated shifts do not couple |2> and |3>, and the symmetric drive
    // does not reach |3>.
    let p = Protocol::new(&short_sim(), DriveTag::Equal).unwrap();
    let run = p.run(0.004, 0.004, None).unwrap();
    assert!(run.state.populations()[3] < 1e-20);
    let run = p.run(0.004, -0.004, None).unwrap();
    assert!(run.state.populations()[3] > 1e-6);
}

#[test]
fn lindblad_keeps_a_physical_state() {
    let p = Protocol::new(&short_sim(), DriveTag::Equal).unwrap();
    let jumps = vec![
        (to_complex(&p.ops.noise1), 1e-3),
        (to_complex(&p.ops.noise2), 5e-4),
    ];
    let run = p.lindblad(&jumps).unwrap();
    assert!(run.trace_drift < 1e-8);
    assert!(run.hermiticity_error < 1e-12);
    assert!(run.min_eigenvalue > -1e-10);
    let noiseless = p.efficiency_point(0.0, 0.0).unwrap();
    let xi = p.efficiency_lindblad(&jumps).unwrap();
    assert!(xi < noiseless, "{xi} vs {noiseless}");
}

#[test]
fn strong_dephasing_stays_hermitian_over_the_full_window() {
    // Small eta gives the largest jump operator; roundoff must not grow.
    let p = Protocol::new(&SimConfig::default(), DriveTag::Equal).unwrap();
    let (c1, c2) = noisesense_core::noise::correlated_split(0.1).unwrap();
    let run = p.lindblad(&[(to_complex(&p.ops.noise(c1, c2)), 1e-3)]).unwrap();
    assert!(run.hermiticity_error < 1e-12, "{:e}", run.hermiticity_error);
    assert!(run.trace_drift < 1e-8);
}

#[test]
fn ideal_stirap_follows_dark_state() {
    let pulse = PulseParams::default();
    let run = ideal_stirap_propagate(&IdealStirapParams {
        pulse,
        ..Default::default()
    })
    .unwrap();
    let target = dark_state(pulse.t_end, &pulse);
    let overlap = target.dotc(&run.state).norm_sqr();
    assert!(overlap > 0.99, "overlap {overlap}");
    assert!(run.populations[2] < 1e-3);

    // A two-photon detuning far larger than the Rabi frequency blocks the
    // transfer.
    let detuned = ideal_stirap_propagate(&IdealStirapParams {
        pulse,
        delta: 0.5,
        ..Default::default()
    })
    .unwrap();
    assert!(detuned.populations[1] < 0.1, "{:?}", detuned.populations);
}

#[test]
fn initial_state_has_small_ee_overlap() {
    let p = Protocol::new(&short_sim(), DriveTag::Equal).unwrap();
    let s = &p.ops.spectrum;
    assert_abs_diff_eq!(
        population(&QuantumState::basis(0), p.readout()),
        (0.5 * s.theta_e).sin().powi(2),
        epsilon = 1e-15
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rk4_matches_exact_exponential(
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        amps in prop::collection::vec(-1.0f64..1.0, 8),
        dt in 1e-3f64..5e-2,
    ) {
        let h = hermitian(&entries);
        let psi = Ket4::from_fn(|k, _| C64::new(amps[2 * k], amps[2 * k + 1]));
        let eig = SymmetricEigen::new(h);
        let exact = eig.eigenvectors
            * Mat4::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * dt)))
            * eig.eigenvectors.adjoint()
            * psi;
        let step = rk4_step(&h, &h, &h, dt, &psi);
        let scale = psi.norm();
        // Local error of a fourth-order method with ||H|| <= 4.
        prop_assert!((step - exact).norm() <= scale * (4.0 * dt).powi(5) / 60.0 + 1e-14);
    }

    #[test]
    fn lindblad_rhs_is_traceless_and_hermitian(
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        op in prop::collection::vec(-1.0f64..1.0, 16),
        rate in 0.0f64..1.0,
        amps in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let h = hermitian(&entries);
        let o = hermitian(&op);
        let psi = Ket4::from_fn(|k, _| C64::new(amps[2 * k], amps[2 * k + 1]));
        let rho = psi * psi.adjoint();
        let d = lindblad_rhs(&h, &[(o, rate)], &rho);
        prop_assert!(d.trace().norm() < 1e-12);
        prop_assert!((d - d.adjoint()).camax() < 1e-12);
    }

    #[test]
    fn lindblad_rhs_without_jumps_is_commutator(entries in prop::collection::vec(-1.0f64..1.0, 16)) {
        let h = hermitian(&entries);
        let rho = to_complex(&Matrix4::from_diagonal_element(0.25));
        prop_assert!(lindblad_rhs(&h, &[], &rho).camax() < 1e-15);
    }
}
