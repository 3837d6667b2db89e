use nalgebra::{SMatrix, SVector};

use super::{
    Herm4, LabHamiltonian, Propagator, QuantumState, Recording, Stage, StepGenerator, TrajectoryRow,
};
use crate::error::{Error, Result};
use crate::model::{Ket4, Mat4, C64};

const MINUS_I: C64 = C64::new(0.0, -1.0);

/// One classical RK4 step of `i d psi/dt = H(t) psi` given `H` at the start,
/// midpoint and end of the step.
#[inline]
pub fn rk4_step<const N: usize>(
    h_start: &SMatrix<C64, N, N>,
    h_mid: &SMatrix<C64, N, N>,
    h_end: &SMatrix<C64, N, N>,
    dt: f64,
    psi: &SVector<C64, N>,
) -> SVector<C64, N> {
    let half = C64::new(0.5 * dt, 0.0);
    let full = C64::new(dt, 0.0);
    let k1 = (h_start * psi) * MINUS_I;
    let k2 = (h_mid * (psi + k1 * half)) * MINUS_I;
    let k3 = (h_mid * (psi + k2 * half)) * MINUS_I;
    let k4 = (h_end * (psi + k3 * full)) * MINUS_I;
    psi + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0)
}

/// [`rk4_step`] for a four-level state with compact Hermitian generators.
#[inline]
pub fn rk4_step_herm(
    h_start: &Herm4,
    h_mid: &Herm4,
    h_end: &Herm4,
    dt: f64,
    psi: &[C64; 4],
) -> [C64; 4] {
    let axpy = |a: &[C64; 4], k: &[C64; 4], s: f64| -> [C64; 4] {
        std::array::from_fn(|i| a[i] + k[i] * s)
    };
    let k1 = h_start.apply_minus_i(psi);
    let k2 = h_mid.apply_minus_i(&axpy(psi, &k1, 0.5 * dt));
    let k3 = h_mid.apply_minus_i(&axpy(psi, &k2, 0.5 * dt));
    let k4 = h_end.apply_minus_i(&axpy(psi, &k3, dt));
    let s = dt / 6.0;
    std::array::from_fn(|i| psi[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * s)
}

#[derive(Clone, Debug)]
pub struct SchrodingerRun {
    /// Lab-frame state at the end of the window.
    pub state: QuantumState,
    /// `|<psi|psi> - 1|` at the end of the window.
    pub norm_drift: f64,
    pub trajectory: Vec<TrajectoryRow>,
}

impl Propagator {
    /// Integrates `i d psi/dt = H(t) psi` over the grid. `hamiltonian_at`
    /// returns the lab-frame Hamiltonian in the eigenbasis. No renormalization
    /// is applied; a norm drift beyond the tolerance is an error.
    pub fn propagate_schrodinger<F>(
        &self,
        hamiltonian_at: F,
        initial: &QuantumState,
        record: Option<&Recording>,
    ) -> Result<SchrodingerRun>
    where
        F: Fn(f64) -> Mat4,
    {
        let generator = LabHamiltonian {
            hamiltonian_at,
            grid: &self.grid,
            frame: &self.frame,
        };
        self.evolve_schrodinger(&generator, initial, record)
    }

    /// Same as [`Propagator::propagate_schrodinger`] for a generator that is
    /// already expressed in the integration frame.
    pub fn evolve_schrodinger<G: StepGenerator>(
        &self,
        generator: &G,
        initial: &QuantumState,
        record: Option<&Recording>,
    ) -> Result<SchrodingerRun> {
        let grid = &self.grid;
        let to_lab = |psi: &Ket4, step: usize| -> Ket4 {
            psi.component_mul(&generator.phases(step, Stage::Start).map(|z| z.conj()))
        };

        let psi0 = initial
            .amplitudes
            .component_mul(&generator.phases(0, Stage::Start));
        let mut psi: [C64; 4] = psi0.into();
        let mut trajectory = Vec::new();
        for step in 0..grid.steps {
            if let Some(rec) = record {
                if step % rec.stride == 0 {
                    trajectory.push(rec.row(grid.time(step), &to_lab(&Ket4::from(psi), step)));
                }
            }
            let h_start = generator.hamiltonian(step, Stage::Start);
            let h_mid = generator.hamiltonian(step, Stage::Mid);
            let h_end = generator.hamiltonian(step, Stage::End);
            psi = rk4_step_herm(&h_start, &h_mid, &h_end, grid.dt, &psi);
        }
        let state = QuantumState {
            amplitudes: to_lab(&Ket4::from(psi), grid.steps),
        };
        if let Some(rec) = record {
            trajectory.push(rec.row(grid.t_end(), &state.amplitudes));
        }
        let norm_drift = (state.norm_sqr() - 1.0).abs();
        if !(norm_drift <= self.norm_tolerance) {
            return Err(Error::IntegrationQuality {
                quantity: "state norm",
                drift: norm_drift,
                tolerance: self.norm_tolerance,
            });
        }
        Ok(SchrodingerRun {
            state,
            norm_drift,
            trajectory,
        })
    }
}
