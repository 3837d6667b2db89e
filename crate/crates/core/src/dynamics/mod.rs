//! Time integration of the Schrödinger and Lindblad equations for the
//! four-level sensor, plus the ideal three-level STIRAP reference model.
//!
//! All propagation uses fixed-step classical RK4. The caller always supplies
//! the lab-frame Hamiltonian in the eigenbasis; the integrator may internally
//! move to the interaction picture of the static energies (an exact change of
//! frame, no rotating-wave approximation) and returns lab-frame states.

mod lindblad;
mod schrodinger;
mod sensor;
mod stirap;
mod trajectory;

pub use lindblad::{lindblad_rhs, LindbladRun};
pub use schrodinger::{rk4_step, rk4_step_herm, SchrodingerRun};
pub use sensor::{DriveTable, SensorGenerator};
pub use stirap::{dark_state, ideal_stirap_propagate, IdealStirapParams, IdealStirapRun};
pub use trajectory::{write_trajectory, Recording, TrajectoryRow};

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ket4, Mat4, C64};

/// Pure state in the eigenbasis `|0>..|3>`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub amplitudes: Ket4,
}

impl QuantumState {
    pub fn basis(k: usize) -> Self {
        let mut amplitudes = Ket4::zeros();
        amplitudes[k] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn populations(&self) -> [f64; 4] {
        std::array::from_fn(|k| self.amplitudes[k].norm_sqr())
    }
}

/// Density matrix in the eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub entries: Mat4,
}

impl DensityMatrix {
    pub fn pure(state: &QuantumState) -> Self {
        Self {
            entries: state.amplitudes * state.amplitudes.adjoint(),
        }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            entries: Mat4::identity() * C64::new(0.25, 0.0),
        }
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.entries - self.entries.adjoint()).camax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }

    pub fn populations(&self) -> [f64; 4] {
        std::array::from_fn(|k| self.entries[(k, k)].re)
    }
}

/// `|<target|psi>|^2`.
pub fn population(state: &QuantumState, target: &Ket4) -> f64 {
    target.dotc(&state.amplitudes).norm_sqr()
}

/// `<target|rho|target>`.
pub fn population_rho(rho: &DensityMatrix, target: &Ket4) -> f64 {
    target.dotc(&(rho.entries * target)).re
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    Lab,
    Interaction,
}

/// Frame used internally by the integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frame {
    Lab,
    /// Interaction picture with respect to `diag(energies)`.
    Interaction {
        energies: [f64; 4],
    },
}

impl Frame {
    /// `diag(e^{i E_k t})`, or ones in the lab frame.
    #[inline]
    pub fn phases(&self, t: f64) -> Vector4<C64> {
        match self {
            Frame::Lab => Vector4::repeat(C64::new(1.0, 0.0)),
            Frame::Interaction { energies } => {
                Vector4::from_fn(|k, _| C64::from_polar(1.0, energies[k] * t))
            }
        }
    }

    /// Generator in this frame from the lab-frame Hamiltonian.
    #[inline]
    pub fn hamiltonian(&self, h_lab: &Mat4, t: f64) -> Mat4 {
        match self {
            Frame::Lab => *h_lab,
            Frame::Interaction { energies } => {
                let p = self.phases(t);
                let mut h = *h_lab;
                for k in 0..4 {
                    h[(k, k)] -= energies[k];
                }
                conjugate_by_phases(&h, &p)
            }
        }
    }

    /// `P O P^dagger` for a lab-frame operator (no energy shift).
    #[inline]
    pub fn operator(&self, op: &Mat4, t: f64) -> Mat4 {
        match self {
            Frame::Lab => *op,
            Frame::Interaction { .. } => conjugate_by_phases(op, &self.phases(t)),
        }
    }

    pub fn state_to_frame(&self, psi: &Ket4, t: f64) -> Ket4 {
        psi.component_mul(&self.phases(t))
    }

    pub fn state_to_lab(&self, psi: &Ket4, t: f64) -> Ket4 {
        psi.component_mul(&self.phases(t).map(|z| z.conj()))
    }

    pub fn rho_to_frame(&self, rho: &Mat4, t: f64) -> Mat4 {
        conjugate_by_phases(rho, &self.phases(t))
    }

    pub fn rho_to_lab(&self, rho: &Mat4, t: f64) -> Mat4 {
        conjugate_by_phases(rho, &self.phases(t).map(|z| z.conj()))
    }
}

#[inline]
fn conjugate_by_phases(m: &Mat4, p: &Vector4<C64>) -> Mat4 {
    Mat4::from_fn(|j, k| m[(j, k)] * p[j] * p[k].conj())
}

/// Position inside an RK4 step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Start,
    Mid,
    End,
}

impl Stage {
    #[inline]
    pub fn half_index(self, step: usize) -> usize {
        2 * step
            + match self {
                Stage::Start => 0,
                Stage::Mid => 1,
                Stage::End => 2,
            }
    }
}

const UPPER: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Hermitian 4x4 matrix stored as its real diagonal and upper triangle
/// (row-major: 01, 02, 03, 12, 13, 23).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Herm4 {
    pub diag: [f64; 4],
    pub upper: [C64; 6],
}

impl Herm4 {
    /// Reads the diagonal real parts and the upper triangle; the lower
    /// triangle is assumed to be its conjugate.
    pub fn from_matrix(m: &Mat4) -> Self {
        Self {
            diag: std::array::from_fn(|k| m[(k, k)].re),
            upper: std::array::from_fn(|n| m[UPPER[n]]),
        }
    }

    pub fn to_matrix(&self) -> Mat4 {
        let mut m = Mat4::zeros();
        for k in 0..4 {
            m[(k, k)] = C64::new(self.diag[k], 0.0);
        }
        for (n, &(j, k)) in UPPER.iter().enumerate() {
            m[(j, k)] = self.upper[n];
            m[(k, j)] = self.upper[n].conj();
        }
        m
    }

    /// `-i H v`.
    #[inline(always)]
    pub fn apply_minus_i(&self, v: &[C64; 4]) -> [C64; 4] {
        let [h01, h02, h03, h12, h13, h23] = self.upper;
        let d = self.diag;
        let hv = [
            v[0] * d[0] + h01 * v[1] + h02 * v[2] + h03 * v[3],
            h01.conj() * v[0] + v[1] * d[1] + h12 * v[2] + h13 * v[3],
            h02.conj() * v[0] + h12.conj() * v[1] + v[2] * d[2] + h23 * v[3],
            h03.conj() * v[0] + h13.conj() * v[1] + h23.conj() * v[2] + v[3] * d[3],
        ];
        hv.map(|z| C64::new(z.im, -z.re))
    }
}

/// Supplies the generator in the integration frame, step by step. Values may
/// be discontinuous between steps (piecewise-constant noise), so the end of
/// one step is not assumed equal to the start of the next.
pub trait StepGenerator {
    fn hamiltonian(&self, step: usize, stage: Stage) -> Herm4;

    /// `diag(e^{i E_k t})` of the integration frame at the same point.
    fn phases(&self, step: usize, stage: Stage) -> Vector4<C64>;
}

/// Adapts a lab-frame `H(t)` closure to a grid and frame. The closure must
/// return a Hermitian matrix; only its upper triangle is read.
pub struct LabHamiltonian<'a, F> {
    pub hamiltonian_at: F,
    pub grid: &'a TimeGrid,
    pub frame: &'a Frame,
}

impl<F: Fn(f64) -> Mat4> StepGenerator for LabHamiltonian<'_, F> {
    #[inline]
    fn hamiltonian(&self, step: usize, stage: Stage) -> Herm4 {
        let t = self.grid.half_time(stage.half_index(step));
        Herm4::from_matrix(&self.frame.hamiltonian(&(self.hamiltonian_at)(t), t))
    }

    #[inline]
    fn phases(&self, step: usize, stage: Stage) -> Vector4<C64> {
        self.frame
            .phases(self.grid.half_time(stage.half_index(step)))
    }
}

#[inline]
pub(crate) fn conjugate_by(m: &Mat4, p: &Vector4<C64>) -> Mat4 {
    conjugate_by_phases(m, p)
}

/// Uniform time grid over a protocol window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(window: (f64, f64), max_dt: f64) -> Result<Self> {
        let (t0, t1) = window;
        if !(max_dt > 0.0) || !(t1 > t0) {
            return Err(Error::Config(format!(
                "invalid time grid: window {window:?}, dt {max_dt}"
            )));
        }
        let steps = ((t1 - t0) / max_dt).ceil() as usize;
        Ok(Self {
            t_start: t0,
            dt: (t1 - t0) / steps as f64,
            steps,
        })
    }

    #[inline]
    pub fn time(&self, step: usize) -> f64 {
        self.t_start + step as f64 * self.dt
    }

    /// Time at half-step index `k` (`t_start + k dt / 2`).
    #[inline]
    pub fn half_time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * 0.5 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.steps)
    }
}

/// Fixed-step integration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    /// Steps per period of the fastest retained oscillation.
    pub resolution_factor: u32,
    /// Added to `2 omega_p` when picking the fastest frequency.
    pub frequency_slack: f64,
    pub frame: FrameKind,
    /// Allowed drift of the state norm or density-matrix trace.
    pub norm_tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            resolution_factor: 72,
            frequency_slack: 0.0,
            frame: FrameKind::Interaction,
            norm_tolerance: 1e-6,
        }
    }
}

impl IntegratorConfig {
    pub fn omega_fast(&self, omega_p: f64) -> f64 {
        2.0 * omega_p.abs() + self.frequency_slack.abs()
    }

    pub fn time_step(&self, omega_p: f64) -> f64 {
        2.0 * std::f64::consts::PI / (self.omega_fast(omega_p) * self.resolution_factor as f64)
    }

    pub fn propagator(
        &self,
        window: (f64, f64),
        omega_p: f64,
        energies: [f64; 4],
    ) -> Result<Propagator> {
        if self.resolution_factor == 0 {
            return Err(Error::Config("resolution_factor must be at least 1".into()));
        }
        let frame = match self.frame {
            FrameKind::Lab => Frame::Lab,
            FrameKind::Interaction => Frame::Interaction { energies },
        };
        Ok(Propagator {
            grid: TimeGrid::new(window, self.time_step(omega_p))?,
            frame,
            norm_tolerance: self.norm_tolerance,
        })
    }
}

/// A time grid, an integration frame and quality tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagator {
    pub grid: TimeGrid,
    pub frame: Frame,
    pub norm_tolerance: f64,
}
