use std::io::Write;

use crate::model::Ket4;

/// Sampling request for population histories.
#[derive(Clone, Debug)]
pub struct Recording {
    /// Record every `stride` steps (plus the final time).
    pub stride: usize,
    /// Extra readout state, normally `|ee>`.
    pub readout: Ket4,
}

impl Recording {
    pub fn new(stride: usize, readout: Ket4) -> Self {
        Self {
            stride: stride.max(1),
            readout,
        }
    }

    pub(crate) fn row(&self, t: f64, psi: &Ket4) -> TrajectoryRow {
        TrajectoryRow {
            t,
            populations: std::array::from_fn(|k| psi[k].norm_sqr()),
            readout: self.readout.dotc(psi).norm_sqr(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub populations: [f64; 4],
    pub readout: f64,
}

/// Tab-separated `t P0 P1 P2 P3 P_ee`.
pub fn write_trajectory<W: Write>(mut out: W, rows: &[TrajectoryRow]) -> std::io::Result<()> {
    writeln!(out, "# t\tP0\tP1\tP2\tP3\tP_ee")?;
    for r in rows {
        let [p0, p1, p2, p3] = r.populations;
        writeln!(
            out,
            "{}\t{p0:.10e}\t{p1:.10e}\t{p2:.10e}\t{p3:.10e}\t{:.10e}",
            r.t, r.readout
        )?;
    }
    Ok(())
}
