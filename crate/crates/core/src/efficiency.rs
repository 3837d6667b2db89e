//! Protocol efficiency `xi = <ee| rho_f |ee>` for every noise class and drive
//! condition, the three-component feature vector, and `xi(delta1, delta2)`
//! maps.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    population, population_rho, DensityMatrix, DriveTable, IntegratorConfig, LindbladRun,
    Propagator, QuantumState, Recording, SchrodingerRun,
};
use crate::error::{Error, Result};
use crate::model::{
    resolve_drive_condition, DriveCondition, DriveTag, Ket4, Mat4, PulseParams, SensorOperators,
    SystemParams, TwoToneDrive, DEFAULT_DRIVE_POWER,
};
use crate::noise::{
    correlated_split, gauss_hermite_rule, jump_operators, NoiseSampleParams, NoiseStrength,
};

/// Physics and numerics shared by every efficiency evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub system: SystemParams,
    /// Pulse shape and window; the peak amplitudes are set per drive
    /// condition from `power`.
    pub pulse: PulseParams,
    /// `(Omega_p^max)^2 + (Omega_s^max)^2`, shared by all drive conditions.
    pub power: f64,
    pub integrator: IntegratorConfig,
    /// Gauss-Hermite nodes for the (anti)correlated quasistatic average.
    pub quadrature_1d: usize,
    /// Nodes per axis of the tensor rule for independent quasistatic noise.
    pub quadrature_2d: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            pulse: PulseParams::default(),
            power: DEFAULT_DRIVE_POWER,
            integrator: IntegratorConfig::default(),
            quadrature_1d: 15,
            quadrature_2d: 9,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.pulse.validate()?;
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::Config(format!(
                "drive power must be positive (got {})",
                self.power
            )));
        }
        if self.quadrature_1d == 0 || self.quadrature_2d == 0 {
            return Err(Error::Config("quadrature orders must be at least 1".into()));
        }
        Ok(())
    }
}

/// One drive condition prepared for repeated propagation: operators, time
/// grid and the tabulated drive.
pub struct Protocol {
    pub tag: DriveTag,
    pub ops: SensorOperators,
    pub pulse: PulseParams,
    pub drive: TwoToneDrive,
    pub propagator: Propagator,
    table: DriveTable,
    readout: Ket4,
}

impl Protocol {
    pub fn new(sim: &SimConfig, tag: DriveTag) -> Result<Self> {
        sim.validate()?;
        let ops = SensorOperators::new(&sim.system);
        let pulse = sim
            .pulse
            .with_amplitudes(resolve_drive_condition(&DriveCondition::new(
                tag, sim.power,
            )));
        let drive = TwoToneDrive::new(&pulse, &ops.spectrum)?;
        let propagator =
            sim.integrator
                .propagator(pulse.window(), drive.omega_p, ops.spectrum.energies())?;
        let table = DriveTable::new(&drive, &ops, &propagator);
        let readout = ops.spectrum.ee_state();
        Ok(Self {
            tag,
            ops,
            pulse,
            drive,
            propagator,
            table,
            readout,
        })
    }

    pub fn readout(&self) -> &Ket4 {
        &self.readout
    }

    /// Schrödinger propagation from `|0>` with fixed shifts.
    pub fn run(
        &self,
        delta1: f64,
        delta2: f64,
        record: Option<&Recording>,
    ) -> Result<SchrodingerRun> {
        let generator = self.table.with_static_noise(&self.ops, delta1, delta2);
        self.propagator
            .evolve_schrodinger(&generator, &QuantumState::basis(0), record)
    }

    /// Single-realization efficiency `xi(delta1, delta2)`.
    pub fn efficiency_point(&self, delta1: f64, delta2: f64) -> Result<f64> {
        let run = self.run(delta1, delta2, None)?;
        Ok(population(&run.state, &self.readout))
    }

    /// Efficiency with piecewise-constant shifts, one pair per
    /// `steps_per_segment` integration steps.
    pub fn efficiency_segments(
        &self,
        shifts: &[(f64, f64)],
        steps_per_segment: usize,
    ) -> Result<f64> {
        let needed = self
            .propagator
            .grid
            .steps
            .div_ceil(steps_per_segment.max(1));
        if shifts.len() < needed {
            return Err(Error::Config(format!(
                "{} noise segments supplied, {needed} needed",
                shifts.len()
            )));
        }
        let generator = self
            .table
            .with_segment_noise(&self.ops, shifts, steps_per_segment);
        let run = self
            .propagator
            .evolve_schrodinger(&generator, &QuantumState::basis(0), None)?;
        Ok(population(&run.state, &self.readout))
    }

    /// Noiseless Hamiltonian with Lindblad dissipation, from `|0><0|`.
    pub fn lindblad(&self, jumps: &[(Mat4, f64)]) -> Result<LindbladRun> {
        let generator = self.table.with_static_noise(&self.ops, 0.0, 0.0);
        self.propagator.evolve_lindblad(
            &generator,
            jumps,
            &DensityMatrix::pure(&QuantumState::basis(0)),
        )
    }

    pub fn efficiency_lindblad(&self, jumps: &[(Mat4, f64)]) -> Result<f64> {
        Ok(population_rho(&self.lindblad(jumps)?.rho, &self.readout))
    }

    /// Gaussian average of `xi(delta, eta delta)`, `delta ~ N(0, sigma^2)`.
    pub fn quasistatic_correlated(&self, eta: f64, sigma: f64, order: usize) -> Result<f64> {
        correlated_split(eta)?;
        let rule = gauss_hermite_rule(order, sigma)?;
        let values = rule
            .nodes
            .par_iter()
            .map(|&d| self.efficiency_point(d, eta * d))
            .collect::<Result<Vec<f64>>>()?;
        Ok(weighted_sum(&rule.weights, &values))
    }

    /// Average over independent `delta_i ~ N(0, sigma_i^2)` on an
    /// `order x order` tensor rule.
    pub fn quasistatic_uncorrelated(&self, sigma1: f64, sigma2: f64, order: usize) -> Result<f64> {
        let r1 = gauss_hermite_rule(order, sigma1)?;
        let r2 = gauss_hermite_rule(order, sigma2)?;
        let points: Vec<(usize, usize)> = (0..order)
            .flat_map(|i| (0..order).map(move |j| (i, j)))
            .collect();
        let values = points
            .par_iter()
            .map(|&(i, j)| self.efficiency_point(r1.nodes[i], r2.nodes[j]))
            .collect::<Result<Vec<f64>>>()?;
        let weights: Vec<f64> = points
            .iter()
            .map(|&(i, j)| r1.weights[i] * r2.weights[j])
            .collect();
        Ok(weighted_sum(&weights, &values))
    }

    pub fn markovian(&self, p: &NoiseSampleParams) -> Result<f64> {
        self.efficiency_lindblad(&jump_operators(p, &self.ops)?)
    }

    /// Class-appropriate efficiency for one sample.
    pub fn efficiency(&self, p: &NoiseSampleParams, sim: &SimConfig) -> Result<f64> {
        p.validate()?;
        match p.strength {
            NoiseStrength::Quasistatic { eta, sigma } => {
                self.quasistatic_correlated(eta, sigma, sim.quadrature_1d)
            }
            NoiseStrength::QuasistaticIndependent { sigma1, sigma2 } => {
                self.quasistatic_uncorrelated(sigma1, sigma2, sim.quadrature_2d)
            }
            NoiseStrength::Markovian { .. } | NoiseStrength::MarkovianIndependent { .. } => {
                self.markovian(p)
            }
        }
    }
}

fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// `(xi_equal, xi_pump_double, xi_stokes_double)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub xi_equal: f64,
    pub xi_pump_double: f64,
    pub xi_stokes_double: f64,
}

impl FeatureVector {
    /// Feature order as stored in datasets and fed to the classifier.
    pub const ORDER: [DriveTag; 3] = DriveTag::ALL;

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            xi_equal: v[0],
            xi_pump_double: v[1],
            xi_stokes_double: v[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.xi_equal, self.xi_pump_double, self.xi_stokes_double]
    }
}

/// The three drive conditions prepared once and reused across samples.
pub struct ProtocolSet {
    pub sim: SimConfig,
    protocols: Vec<Protocol>,
}

impl ProtocolSet {
    pub fn new(sim: &SimConfig) -> Result<Self> {
        let protocols = FeatureVector::ORDER
            .iter()
            .map(|&tag| Protocol::new(sim, tag))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sim: *sim,
            protocols,
        })
    }

    pub fn get(&self, tag: DriveTag) -> &Protocol {
        &self.protocols[FeatureVector::ORDER.iter().position(|&t| t == tag).unwrap()]
    }

    pub fn feature_vector(&self, p: &NoiseSampleParams) -> Result<FeatureVector> {
        let mut v = [0.0; 3];
        for (slot, protocol) in v.iter_mut().zip(&self.protocols) {
            *slot = protocol.efficiency(p, &self.sim)?;
        }
        Ok(FeatureVector::from_array(v))
    }

    /// Noiseless efficiency for each drive condition.
    pub fn noiseless(&self) -> Result<FeatureVector> {
        let mut v = [0.0; 3];
        for (slot, protocol) in v.iter_mut().zip(&self.protocols) {
            *slot = protocol.efficiency_point(0.0, 0.0)?;
        }
        Ok(FeatureVector::from_array(v))
    }
}

pub fn efficiency_point(sim: &SimConfig, delta1: f64, delta2: f64, tag: DriveTag) -> Result<f64> {
    Protocol::new(sim, tag)?.efficiency_point(delta1, delta2)
}

pub fn efficiency_quasistatic_correlated(
    sim: &SimConfig,
    eta: f64,
    sigma: f64,
    tag: DriveTag,
) -> Result<f64> {
    Protocol::new(sim, tag)?.quasistatic_correlated(eta, sigma, sim.quadrature_1d)
}

pub fn efficiency_quasistatic_uncorrelated(
    sim: &SimConfig,
    sigma1: f64,
    sigma2: f64,
    tag: DriveTag,
) -> Result<f64> {
    Protocol::new(sim, tag)?.quasistatic_uncorrelated(sigma1, sigma2, sim.quadrature_2d)
}

pub fn efficiency_markovian(sim: &SimConfig, p: &NoiseSampleParams, tag: DriveTag) -> Result<f64> {
    Protocol::new(sim, tag)?.markovian(p)
}

pub fn feature_vector(sim: &SimConfig, p: &NoiseSampleParams) -> Result<FeatureVector> {
    ProtocolSet::new(sim)?.feature_vector(p)
}

/// Square grid of `(delta1, delta2)` values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for MapGrid {
    fn default() -> Self {
        Self {
            min: -0.025,
            max: 0.025,
            points: 41,
        }
    }
}

impl MapGrid {
    /// Evenly spaced axis; a single point sits at the midpoint.
    pub fn axis(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![0.5 * (self.min + self.max)],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyMap {
    pub tag: DriveTag,
    pub delta1_axis: Vec<f64>,
    pub delta2_axis: Vec<f64>,
    /// `values[i][j] = xi(delta1_axis[i], delta2_axis[j])`.
    pub values: Vec<Vec<f64>>,
}

impl EfficiencyMap {
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at the grid point closest to `(delta1, delta2)`.
    pub fn nearest(&self, delta1: f64, delta2: f64) -> f64 {
        let closest = |axis: &[f64], x: f64| {
            (0..axis.len())
                .min_by(|&a, &b| (axis[a] - x).abs().total_cmp(&(axis[b] - x).abs()))
                .unwrap()
        };
        self.values[closest(&self.delta1_axis, delta1)][closest(&self.delta2_axis, delta2)]
    }
}

pub fn efficiency_map(protocol: &Protocol, grid: &MapGrid) -> Result<EfficiencyMap> {
    if grid.points == 0 || !(grid.max >= grid.min) {
        return Err(Error::Config(format!("invalid map grid {grid:?}")));
    }
    let axis = grid.axis();
    let n = axis.len();
    let flat = (0..n * n)
        .into_par_iter()
        .map(|k| protocol.efficiency_point(axis[k / n], axis[k % n]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EfficiencyMap {
        tag: protocol.tag,
        delta1_axis: axis.clone(),
        delta2_axis: axis,
        values: flat.chunks(n).map(<[f64]>::to_vec).collect(),
    })
}

/// Writes `delta1 delta2 xi` rows, a blank line after each `delta1` scan
/// line, and two blank lines between maps.
pub fn write_map<W: Write>(mut out: W, maps: &[EfficiencyMap]) -> std::io::Result<()> {
    for (m, map) in maps.iter().enumerate() {
        if m > 0 {
            writeln!(out, "\n")?;
        }
        writeln!(out, "# drive {}", map.tag)?;
        writeln!(out, "# delta1 delta2 xi")?;
        for (i, &d1) in map.delta1_axis.iter().enumerate() {
            for (j, &d2) in map.delta2_axis.iter().enumerate() {
                writeln!(out, "{d1:.6e} {d2:.6e} {:.12}", map.values[i][j])?;
            }
            if i + 1 < map.delta1_axis.len() {
                writeln!(out)?;
            }
        }
    }
    Ok(())
}
