//! Tabulated drive for the sensor Hamiltonian. The drive waveform and frame
//! phases depend only on the drive condition and the grid, so one table
//! serves every noise realization.

use nalgebra::{Matrix4, Vector4};

use super::{Frame, Herm4, Propagator, Stage, StepGenerator, TimeGrid, UPPER};
use crate::model::{SensorOperators, TwoToneDrive, C64};

/// `W(t)`, `e^{i eps_e t}` and `e^{i eps_o t}` at every half-step of a grid.
#[derive(Clone, Debug)]
pub struct DriveTable {
    grid: TimeGrid,
    /// Static energies left on the diagonal: zero in the interaction
    /// picture, `H_S` in the lab frame.
    diag_offset: [f64; 4],
    waveform: Vec<f64>,
    even_phase: Vec<C64>,
    odd_phase: Vec<C64>,
}

impl DriveTable {
    /// The interaction frame of `propagator` must be that of
    /// `ops.spectrum.energies()`.
    pub fn new(drive: &TwoToneDrive, ops: &SensorOperators, propagator: &Propagator) -> Self {
        let grid = &propagator.grid;
        let n = 2 * grid.steps + 1;
        let (eps_e, eps_o, diag_offset) = match propagator.frame {
            Frame::Lab => (0.0, 0.0, ops.spectrum.energies()),
            Frame::Interaction { .. } => (ops.spectrum.eps_e, ops.spectrum.eps_o, [0.0; 4]),
        };
        let mut waveform = Vec::with_capacity(n);
        let mut even_phase = Vec::with_capacity(n);
        let mut odd_phase = Vec::with_capacity(n);
        for k in 0..n {
            let t = grid.half_time(k);
            waveform.push(drive.waveform(t));
            even_phase.push(C64::from_polar(1.0, eps_e * t));
            odd_phase.push(C64::from_polar(1.0, eps_o * t));
        }
        Self {
            grid: *grid,
            diag_offset,
            waveform,
            even_phase,
            odd_phase,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Frame phases for energies `{-eps_e, eps_e, eps_o, -eps_o}`.
    #[inline]
    fn phases_at(&self, k: usize) -> Vector4<C64> {
        let e = self.even_phase[k];
        let o = self.odd_phase[k];
        Vector4::new(e.conj(), e, o, o.conj())
    }

    /// Generator with fixed splitting shifts.
    pub fn with_static_noise<'a>(
        &'a self,
        ops: &'a SensorOperators,
        delta1: f64,
        delta2: f64,
    ) -> SensorGenerator<'a> {
        SensorGenerator {
            table: self,
            ops,
            noise: NoiseTerm::Fixed(ops.noise(delta1, delta2)),
        }
    }

    /// Generator with piecewise-constant splitting shifts, one `(delta1,
    /// delta2)` pair per `steps_per_segment` integration steps.
    pub fn with_segment_noise<'a>(
        &'a self,
        ops: &'a SensorOperators,
        segments: &'a [(f64, f64)],
        steps_per_segment: usize,
    ) -> SensorGenerator<'a> {
        SensorGenerator {
            table: self,
            ops,
            noise: NoiseTerm::Segments {
                values: segments,
                steps_per_segment: steps_per_segment.max(1),
            },
        }
    }
}

enum NoiseTerm<'a> {
    Fixed(Matrix4<f64>),
    Segments {
        values: &'a [(f64, f64)],
        steps_per_segment: usize,
    },
}

pub struct SensorGenerator<'a> {
    table: &'a DriveTable,
    ops: &'a SensorOperators,
    noise: NoiseTerm<'a>,
}

impl StepGenerator for SensorGenerator<'_> {
    #[inline]
    fn hamiltonian(&self, step: usize, stage: Stage) -> Herm4 {
        let k = stage.half_index(step);
        let w = self.table.waveform[k];
        let p = self.table.phases_at(k);
        let noise = match &self.noise {
            NoiseTerm::Fixed(n) => *n,
            NoiseTerm::Segments {
                values,
                steps_per_segment,
            } => {
                let (d1, d2) = values[step / steps_per_segment];
                self.ops.noise(d1, d2)
            }
        };
        let c = &self.ops.control;
        let mut h = Herm4::default();
        for k in 0..4 {
            h.diag[k] = self.table.diag_offset[k] + noise[(k, k)] + w * c[(k, k)];
        }
        for (n, &(j, k)) in UPPER.iter().enumerate() {
            h.upper[n] = (p[j] * p[k].conj()) * (w * c[(j, k)] + noise[(j, k)]);
        }
        h
    }

    #[inline]
    fn phases(&self, step: usize, stage: Stage) -> Vector4<C64> {
        self.table.phases_at(stage.half_index(step))
    }
}
