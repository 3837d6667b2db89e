//! Ideal three-level ladder STIRAP in the rotating frame, used as a reference
//! for the four-level sensor dynamics.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::rk4_step;
use super::TimeGrid;
use crate::error::Result;
use crate::model::{pulse_envelopes, PulseParams, C64};

/// Three-level model `Delta |1><1| + Delta_p |2><2| + (Omega_p |0><2| + Omega_s |2><1| + h.c.)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealStirapParams {
    /// Two-photon detuning.
    pub delta: f64,
    /// Single-photon detuning.
    pub delta_p: f64,
    pub pulse: PulseParams,
    /// Steps per period of the fastest scale in the rotating frame.
    pub resolution_factor: u32,
}

impl Default for IdealStirapParams {
    fn default() -> Self {
        Self {
            delta: 0.0,
            delta_p: 0.0,
            pulse: PulseParams::default(),
            resolution_factor: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IdealStirapRun {
    /// Final populations of `|0>, |1>, |2>`.
    pub populations: [f64; 3],
    pub state: Vector3<C64>,
}

pub fn ideal_stirap_hamiltonian(t: f64, p: &IdealStirapParams) -> Matrix3<C64> {
    let (op, os) = pulse_envelopes(t, &p.pulse);
    let mut h = Matrix3::<C64>::zeros();
    h[(1, 1)] = C64::new(p.delta, 0.0);
    h[(2, 2)] = C64::new(p.delta_p, 0.0);
    h[(0, 2)] = C64::new(0.5 * op, 0.0);
    h[(2, 0)] = h[(0, 2)];
    h[(2, 1)] = C64::new(0.5 * os, 0.0);
    h[(1, 2)] = h[(2, 1)];
    h
}

/// Dark state `cos(theta)|0> - sin(theta)|1>` with `tan(theta) = Omega_p/Omega_s`.
pub fn dark_state(t: f64, pulse: &PulseParams) -> Vector3<C64> {
    let (op, os) = pulse_envelopes(t, pulse);
    let theta = op.atan2(os);
    Vector3::new(
        C64::new(theta.cos(), 0.0),
        C64::new(-theta.sin(), 0.0),
        C64::new(0.0, 0.0),
    )
}

/// Propagates from `|0>` over the pulse window.
pub fn ideal_stirap_propagate(p: &IdealStirapParams) -> Result<IdealStirapRun> {
    p.pulse.validate()?;
    let fastest = p
        .pulse
        .omega_p_max
        .max(p.pulse.omega_s_max)
        .max(p.delta.abs())
        .max(p.delta_p.abs())
        .max(1.0 / p.pulse.width);
    let dt = 2.0 * std::f64::consts::PI / (fastest * p.resolution_factor.max(1) as f64);
    let grid = TimeGrid::new(p.pulse.window(), dt)?;

    let mut psi = Vector3::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let mut h_start = ideal_stirap_hamiltonian(grid.t_start, p);
    for step in 0..grid.steps {
        let t = grid.time(step);
        let h_mid = ideal_stirap_hamiltonian(t + 0.5 * grid.dt, p);
        let h_end = ideal_stirap_hamiltonian(grid.time(step + 1), p);
        psi = rk4_step(&h_start, &h_mid, &h_end, grid.dt, &psi);
        h_start = h_end;
    }
    Ok(IdealStirapRun {
        populations: std::array::from_fn(|k| psi[k].norm_sqr()),
        state: psi,
    })
}
