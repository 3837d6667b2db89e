//! Run configuration shared by the command-line tool and the tests, with the
//! `full`, `fast` and `smoke` profiles.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{MlpArchitecture, TrainConfig};
use crate::dynamics::IntegratorConfig;
use crate::efficiency::{MapGrid, SimConfig};
use crate::error::{Error, Result};
use crate::model::{PulseParams, SystemParams, DEFAULT_DRIVE_POWER};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub g: f64,
    /// Gaussian width `T`.
    pub pulse_width: f64,
    /// `tau / T`.
    pub delay_ratio: f64,
    /// The window is `[-k T, k T]`.
    pub window_widths: f64,
    pub delta_p: f64,
    pub delta_s: f64,
    /// `(Omega_p^max)^2 + (Omega_s^max)^2`.
    pub power: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            eps1: 1.0,
            eps2: 1.0,
            g: 0.5,
            pulse_width: 2000.0,
            delay_ratio: 0.7,
            window_widths: 5.0,
            delta_p: 0.0,
            delta_s: 0.0,
            power: DEFAULT_DRIVE_POWER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub samples_per_class: usize,
    pub master_seed: u64,
    pub split_seed: u64,
    /// Defaults to `<out_dir>/cache` when absent.
    pub cache_dir: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            samples_per_class: 500,
            master_seed: 2024,
            split_seed: 7,
            cache_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsConfig,
    pub integrator: IntegratorConfig,
    pub quadrature_1d: usize,
    pub quadrature_2d: usize,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub hidden_layers: Vec<usize>,
    pub map: MapGrid,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::profile(Profile::Full)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Paper parameters and dataset size.
    Full,
    /// Paper physics, 100 samples per class, coarser quadrature.
    Fast,
    /// Shorter pulses and tiny sizes for wiring checks; not physically
    /// comparable to the other two.
    Smoke,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Full => "full",
            Profile::Fast => "fast",
            Profile::Smoke => "smoke",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "fast" => Ok(Profile::Fast),
            "smoke" => Ok(Profile::Smoke),
            _ => Err(Error::Config(format!(
                "unknown profile '{s}' (expected full, fast or smoke)"
            ))),
        }
    }
}

impl RunConfig {
    pub fn profile(profile: Profile) -> Self {
        let full = Self {
            physics: PhysicsConfig::default(),
            integrator: IntegratorConfig::default(),
            quadrature_1d: 15,
            quadrature_2d: 9,
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            hidden_layers: vec![64, 32, 32, 32],
            map: MapGrid::default(),
            out_dir: PathBuf::from("out"),
        };
        match profile {
            Profile::Full => full,
            Profile::Fast => Self {
                quadrature_1d: 11,
                quadrature_2d: 7,
                dataset: DatasetConfig {
                    samples_per_class: 100,
                    ..full.dataset
                },
                ..full
            },
            Profile::Smoke => Self {
                physics: PhysicsConfig {
                    pulse_width: 400.0,
                    ..full.physics
                },
                quadrature_1d: 5,
                quadrature_2d: 3,
                dataset: DatasetConfig {
                    samples_per_class: 5,
                    ..full.dataset
                },
                train: TrainConfig {
                    epochs: 10,
                    ..full.train
                },
                map: MapGrid {
                    points: 5,
                    ..full.map
                },
                ..full
            },
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let p = &self.physics;
        let pulse = PulseParams {
            tau: p.delay_ratio * p.pulse_width,
            t_start: -p.window_widths * p.pulse_width,
            t_end: p.window_widths * p.pulse_width,
            delta_p: p.delta_p,
            delta_s: p.delta_s,
            ..PulseParams::with_width(p.pulse_width, 0.0, 0.0)
        };
        SimConfig {
            system: SystemParams {
                eps1: p.eps1,
                eps2: p.eps2,
                g: p.g,
            },
            pulse,
            power: p.power,
            integrator: self.integrator,
            quadrature_1d: self.quadrature_1d,
            quadrature_2d: self.quadrature_2d,
        }
    }

    pub fn architecture(&self) -> MlpArchitecture {
        MlpArchitecture::with_hidden(&self.hidden_layers)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.dataset
            .cache_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config().validate()?;
        self.architecture().validate()?;
        if self.hidden_layers.is_empty() {
            return Err(Error::Config(
                "at least one hidden layer is required".into(),
            ));
        }
        if self.dataset.samples_per_class == 0 {
            return Err(Error::Config("samples_per_class must be at least 1".into()));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if self.integrator.resolution_factor == 0 {
            return Err(Error::Config("resolution_factor must be at least 1".into()));
        }
        Ok(())
    }
}
