use approx::assert_abs_diff_eq;
use nalgebra::Matrix4;
use noisesense_core::model::{
    carrier_frequencies, drive_waveform, eigensystem, h_control_asymmetric, h_system_product, h_total_lab,
    pauli, pulse_envelopes, resolve_drive_condition, to_complex, DriveCondition, DriveTag, PulseParams,
    SensorOperators, SystemParams, DEFAULT_DRIVE_POWER,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = SystemParams> {
    (0.2f64..3.0, 0.2f64..3.0, 0.01f64..2.0).prop_map(|(eps1, eps2, g)| SystemParams { eps1, eps2, g })
}

#[test]
fn default_carriers() {
    let spec = eigensystem(&SystemParams::default());
    let (wp, ws) = carrier_frequencies(&PulseParams::default(), &spec);
    assert_abs_diff_eq!(wp, 1.280776, epsilon = 1e-6);
    assert_abs_diff_eq!(ws, 0.780776, epsilon = 1e-6);
    let detuned = PulseParams {
        delta_p: 0.01,
        delta_s: -0.02,
        ..PulseParams::default()
    };
    let (wp2, ws2) = carrier_frequencies(&detuned, &spec);
    assert_abs_diff_eq!(wp - wp2, 0.01, epsilon = 1e-15);
    assert_abs_diff_eq!(ws2 - ws, 0.02, epsilon = 1e-15);
}

#[test]
fn drive_conditions_share_power() {
    let (p, s) = resolve_drive_condition(&DriveCondition::new(DriveTag::Equal, DEFAULT_DRIVE_POWER));
    assert_abs_diff_eq!(p, 0.05, epsilon = 1e-15);
    assert_abs_diff_eq!(s, 0.05, epsilon = 1e-15);
    let (p, s) = resolve_drive_condition(&DriveCondition::new(DriveTag::PumpDouble, DEFAULT_DRIVE_POWER));
    assert_abs_diff_eq!(p, 2.0 * s, epsilon = 1e-15);
    assert_abs_diff_eq!(s, 0.001f64.sqrt(), epsilon = 1e-15);
    let (p, s) = resolve_drive_condition(&DriveCondition::new(DriveTag::StokesDouble, DEFAULT_DRIVE_POWER));
    assert_abs_diff_eq!(s, 2.0 * p, epsilon = 1e-15);
}

#[test]
fn counterintuitive_order() {
    let p = PulseParams::default();
    let (op, os) = pulse_envelopes(-p.tau, &p);
    assert!(os > op);
    let (op, os) = pulse_envelopes(p.tau, &p);
    assert_abs_diff_eq!(op, 0.05, epsilon = 1e-15);
    assert!(op > os);
    let (op, os) = pulse_envelopes(0.0, &p);
    assert_abs_diff_eq!(op, os, epsilon = 1e-15);
    assert_abs_diff_eq!(op, 0.05 * (-0.49f64).exp(), epsilon = 1e-15);
}

#[test]
fn noise_operator_structure_at_identical_qubits() {
    let ops = SensorOperators::new(&SystemParams::default());
    let s = &ops.spectrum;
    let c = s.theta_e.cos();
    let k = 0.5 / (2.0 * s.eps_e) * 0.5;
    for n in [&ops.noise1, &ops.noise2] {
        // half cos(theta_e) (|1><1| - |0><0|) plus a |0><1| term of size g/(4 eps_e)
        assert_abs_diff_eq!(n[(1, 1)], 0.5 * c, epsilon = 1e-14);
        assert_abs_diff_eq!(n[(0, 0)], -0.5 * c, epsilon = 1e-14);
        assert_abs_diff_eq!(n[(0, 1)].abs(), k, epsilon = 1e-14);
        assert_abs_diff_eq!(n[(2, 3)].abs(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(n[(2, 2)], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(n[(3, 3)], 0.0, epsilon = 1e-14);
    }
    // Correlated noise cannot couple the odd states; anticorrelated noise
    // touches only them.
    let sum = ops.noise(1.0, 1.0);
    let diff = ops.noise(1.0, -1.0);
    assert_abs_diff_eq!(sum[(2, 3)], 0.0, epsilon = 1e-14);
    for (r, col) in [(0, 0), (1, 1), (0, 1)] {
        assert_abs_diff_eq!(diff[(r, col)], 0.0, epsilon = 1e-14);
    }
    assert_abs_diff_eq!(diff[(2, 3)].abs(), 1.0, epsilon = 1e-14);
}

#[test]
fn control_couples_only_across_parity() {
    let ops = SensorOperators::new(&SystemParams::default());
    let s = &ops.spectrum;
    let c = &ops.control;
    for (r, col) in [(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (2, 3)] {
        assert_abs_diff_eq!(c[(r, col)], 0.0, epsilon = 1e-14);
    }
    assert_abs_diff_eq!(c[(0, 2)].abs(), s.alpha.abs(), epsilon = 1e-14);
    assert_abs_diff_eq!(c[(1, 2)].abs(), s.beta.abs(), epsilon = 1e-14);
    // |3> is dark to the symmetric drive for identical qubits.
    assert_abs_diff_eq!(c[(0, 3)], 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(c[(1, 3)], 0.0, epsilon = 1e-14);
}

#[test]
fn waveform_at_pump_peak() {
    let p = PulseParams::default();
    let spec = eigensystem(&SystemParams::default());
    let w = drive_waveform(p.tau, &p, &spec).unwrap();
    let (wp, ws) = carrier_frequencies(&p, &spec);
    let (op, os) = pulse_envelopes(p.tau, &p);
    let expected = os * (ws * p.tau).cos() / spec.beta + op * (wp * p.tau).cos() / spec.alpha;
    assert_abs_diff_eq!(w, expected, epsilon = 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eigensystem_diagonalizes(p in params()) {
        let s = eigensystem(&p);
        let d = s.to_eigenbasis(&h_system_product(&p));
        let e = s.energies();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { e[r] } else { 0.0 };
                prop_assert!((d[(r, c)] - want).abs() < 1e-12);
            }
        }
        let orth = s.eigvecs.transpose() * s.eigvecs - Matrix4::identity();
        prop_assert!(orth.amax() < 1e-14);
        prop_assert!((s.alpha.powi(2) + s.beta.powi(2) - 4.0).abs() < 1e-12);
        prop_assert!(s.eps_e >= s.eps_o);
    }

    #[test]
    fn asymmetric_control_matches_projection(p in params(), w1 in -1.0f64..1.0, w2 in -1.0f64..1.0) {
        let s = eigensystem(&p);
        let numeric = s.to_eigenbasis(&(w1 * pauli::x1() + w2 * pauli::x2()));
        let analytic = h_control_asymmetric(w1, w2, &s);
        prop_assert!((to_complex(&numeric) - analytic).camax() < 1e-12);
    }

    #[test]
    fn total_hamiltonian_is_hermitian(t in -10000.0f64..10000.0, d1 in -0.05f64..0.05, d2 in -0.05f64..0.05) {
        let sys = SystemParams::default();
        let h = h_total_lab(t, &sys, &PulseParams::default(), &eigensystem(&sys), d1, d2).unwrap();
        prop_assert!((h - h.adjoint()).camax() < 1e-14);
    }
}
