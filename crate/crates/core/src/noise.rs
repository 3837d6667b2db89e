//! The six noise classes: parameter sampling, Gauss-Hermite rules for the
//! quasistatic averages, Lindblad jump operators for the white-noise classes,
//! and a stochastic-trajectory reference for the Markovian limit.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::efficiency::Protocol;
use crate::error::{Error, Result};
use crate::model::{to_complex, Mat4, SensorOperators};
use crate::seed::child_seed;

/// Standard deviation of the base quasistatic shift, in units of `eps`.
pub const BASE_SIGMA: f64 = 0.01;
/// Range of `|eta|` for the (anti)correlated classes.
pub const ETA_RANGE: (f64, f64) = (0.1, 5.0);
/// Range of every white-noise rate.
pub const RATE_RANGE: (f64, f64) = (1e-4, 1e-3);
/// Range of the uncorrelated quasistatic standard deviations.
pub const SIGMA_RANGE: (f64, f64) = (BASE_SIGMA / 5.0, 5.0 * BASE_SIGMA);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseClass {
    NmCorrelated,
    NmAnticorrelated,
    NmUncorrelated,
    MCorrelated,
    MAnticorrelated,
    MUncorrelated,
}

impl NoiseClass {
    pub const ALL: [NoiseClass; 6] = [
        NoiseClass::NmCorrelated,
        NoiseClass::NmAnticorrelated,
        NoiseClass::NmUncorrelated,
        NoiseClass::MCorrelated,
        NoiseClass::MAnticorrelated,
        NoiseClass::MUncorrelated,
    ];
    pub const COUNT: usize = 6;

    /// Integer label used by the classifier.
    pub fn label(self) -> usize {
        self as usize
    }

    pub fn from_label(label: usize) -> Option<Self> {
        Self::ALL.get(label).copied()
    }

    pub fn is_markovian(self) -> bool {
        self.label() >= 3
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseClass::NmCorrelated => "nm-correlated",
            NoiseClass::NmAnticorrelated => "nm-anticorrelated",
            NoiseClass::NmUncorrelated => "nm-uncorrelated",
            NoiseClass::MCorrelated => "m-correlated",
            NoiseClass::MAnticorrelated => "m-anticorrelated",
            NoiseClass::MUncorrelated => "m-uncorrelated",
        }
    }
}

impl fmt::Display for NoiseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(label) = s.parse::<usize>() {
            return Self::from_label(label)
                .ok_or_else(|| Error::Config(format!("unknown noise class label {label}")));
        }
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown noise class '{s}'")))
    }
}

/// Strength parameters of one noise instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseStrength {
    /// `delta1 ~ N(0, sigma^2)`, `delta2 = eta * delta1`.
    Quasistatic { eta: f64, sigma: f64 },
    /// Independent `delta_i ~ N(0, sigma_i^2)`.
    QuasistaticIndependent { sigma1: f64, sigma2: f64 },
    /// White noise `chi` of rate `gamma` with `delta2 = eta * delta1`.
    Markovian { eta: f64, gamma: f64 },
    /// Independent white noise on each qubit.
    MarkovianIndependent { gamma1: f64, gamma2: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSampleParams {
    pub class: NoiseClass,
    pub strength: NoiseStrength,
    pub seed: u64,
}

impl NoiseSampleParams {
    pub fn new(class: NoiseClass, strength: NoiseStrength, seed: u64) -> Result<Self> {
        let p = Self {
            class,
            strength,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks that the strength variant matches the class and that every
    /// parameter is usable (finite, positive where required, `eta != 0`).
    pub fn validate(&self) -> Result<()> {
        use NoiseClass::*;
        use NoiseStrength::*;
        let bad = |what: &str| Err(Error::Config(format!("{what} in {:?}", self)));
        let eta_ok = |eta: f64, class: NoiseClass| {
            eta.is_finite()
                && eta != 0.0
                && (eta > 0.0) == matches!(class, NmCorrelated | MCorrelated)
        };
        match (self.class, self.strength) {
            (NmCorrelated | NmAnticorrelated, Quasistatic { eta, sigma }) => {
                if !eta_ok(eta, self.class) {
                    return bad("eta has the wrong sign or is zero");
                }
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return bad("sigma must be non-negative");
                }
            }
            (NmUncorrelated, QuasistaticIndependent { sigma1, sigma2 }) => {
                if !(sigma1 >= 0.0 && sigma2 >= 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
                    return bad("sigmas must be non-negative");
                }
            }
            (MCorrelated | MAnticorrelated, Markovian { eta, gamma }) => {
                if !eta_ok(eta, self.class) {
                    return bad("eta has the wrong sign or is zero");
                }
                if !(gamma >= 0.0 && gamma.is_finite()) {
                    return bad("gamma must be non-negative");
                }
            }
            (MUncorrelated, MarkovianIndependent { gamma1, gamma2 }) => {
                if !(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
                    return bad("rates must be non-negative");
                }
            }
            _ => return bad("noise strength does not match the class"),
        }
        Ok(())
    }
}

/// Uniform draw of a class instance within the documented ranges.
pub fn draw_sample_params(class: NoiseClass, seed: u64) -> NoiseSampleParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (eta_lo, eta_hi) = ETA_RANGE;
    let (rate_lo, rate_hi) = RATE_RANGE;
    let (sig_lo, sig_hi) = SIGMA_RANGE;
    let strength = match class {
        NoiseClass::NmCorrelated => NoiseStrength::Quasistatic {
            eta: rng.gen_range(eta_lo..=eta_hi),
            sigma: BASE_SIGMA,
        },
        NoiseClass::NmAnticorrelated => NoiseStrength::Quasistatic {
            eta: -rng.gen_range(eta_lo..=eta_hi),
            sigma: BASE_SIGMA,
        },
        NoiseClass::NmUncorrelated => NoiseStrength::QuasistaticIndependent {
            sigma1: rng.gen_range(sig_lo..=sig_hi),
            sigma2: rng.gen_range(sig_lo..=sig_hi),
        },
        NoiseClass::MCorrelated => NoiseStrength::Markovian {
            eta: rng.gen_range(eta_lo..=eta_hi),
            gamma: rng.gen_range(rate_lo..=rate_hi),
        },
        NoiseClass::MAnticorrelated => NoiseStrength::Markovian {
            eta: -rng.gen_range(eta_lo..=eta_hi),
            gamma: rng.gen_range(rate_lo..=rate_hi),
        },
        NoiseClass::MUncorrelated => NoiseStrength::MarkovianIndependent {
            gamma1: rng.gen_range(rate_lo..=rate_hi),
            gamma2: rng.gen_range(rate_lo..=rate_hi),
        },
    };
    NoiseSampleParams {
        class,
        strength,
        seed,
    }
}

/// Nodes and weights for `E[f(delta)]`, `delta ~ N(0, sigma^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl QuadratureRule {
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Hermite rule for the Gaussian measure (Golub-Welsch on the
/// probabilists' Hermite recurrence). Nodes are ascending and exactly
/// symmetric about zero.
pub fn gauss_hermite_rule(n: usize, sigma: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::Config("quadrature order must be at least 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!(
            "quadrature sigma must be non-negative (got {sigma})"
        )));
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let j = n - 1 - i;
        nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
        weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
    }
    let total: f64 = weights.iter().sum();
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        *x *= sigma;
        *w /= total;
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        order: n,
    })
}

/// Splits perfectly (anti)correlated shifts `delta2 = eta delta1` as
/// `delta1 = c1 chi`, `delta2 = c2 chi` with `c1 = 1/sqrt|eta|` and
/// `c2 = sgn(eta) sqrt|eta|`, so that `chi` carries the noise rate.
pub fn correlated_split(eta: f64) -> Result<(f64, f64)> {
    if !(eta.is_finite() && eta != 0.0) {
        return Err(Error::Config(format!(
            "correlation parameter must be finite and non-zero (got {eta})"
        )));
    }
    let r = eta.abs().sqrt();
    Ok((1.0 / r, eta.signum() * r))
}

/// Lindblad jump operators `(O_k, gamma_k)` in the eigenbasis for the
/// Markovian classes.
pub fn jump_operators(p: &NoiseSampleParams, ops: &SensorOperators) -> Result<Vec<(Mat4, f64)>> {
    p.validate()?;
    match p.strength {
        NoiseStrength::Markovian { eta, gamma } => {
            let (c1, c2) = correlated_split(eta)?;
            Ok(vec![(to_complex(&ops.noise(c1, c2)), gamma)])
        }
        NoiseStrength::MarkovianIndependent { gamma1, gamma2 } => Ok(vec![
            (to_complex(&ops.noise1), gamma1),
            (to_complex(&ops.noise2), gamma2),
        ]),
        _ => Err(Error::Config(format!(
            "jump operators exist only for Markovian classes (got {})",
            p.class
        ))),
    }
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Summary of `values` summed in index order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / n).sqrt(),
            samples: values.len(),
        }
    }
}

pub const MIN_ORACLE_TRAJECTORIES: usize = 100;

/// Averages `P_ee(t_f)` over Schrödinger trajectories driven by
/// piecewise-constant Gaussian noise, each segment of length `dt_noise` with
/// variance `gamma / dt_noise`. `dt_noise` must be an integer multiple of the
/// protocol's integration step. Trajectory `i` uses the child seed
/// `(p.seed, i)`.
pub fn white_noise_oracle(
    p: &NoiseSampleParams,
    protocol: &Protocol,
    n_traj: usize,
    dt_noise: f64,
) -> Result<McEstimate> {
    p.validate()?;
    if n_traj < MIN_ORACLE_TRAJECTORIES {
        return Err(Error::Config(format!(
            "white-noise oracle needs at least {MIN_ORACLE_TRAJECTORIES} trajectories (got {n_traj})"
        )));
    }
    let dt = protocol.propagator.grid.dt;
    let ratio = dt_noise / dt;
    let per_segment = ratio.round();
    if !(per_segment >= 1.0 && (ratio - per_segment).abs() <= 1e-9 * per_segment) {
        return Err(Error::Config(format!(
            "noise segment {dt_noise} is not an integer multiple of the integration step {dt}"
        )));
    }
    let per_segment = per_segment as usize;
    let segments = protocol.propagator.grid.steps.div_ceil(per_segment);
    let seg_dt = per_segment as f64 * dt;

    enum Source {
        Shared { c1: f64, c2: f64, sd: f64 },
        Independent { sd1: f64, sd2: f64 },
    }
    let source = match p.strength {
        NoiseStrength::Markovian { eta, gamma } => {
            let (c1, c2) = correlated_split(eta)?;
            Source::Shared {
                c1,
                c2,
                sd: (gamma / seg_dt).sqrt(),
            }
        }
        NoiseStrength::MarkovianIndependent { gamma1, gamma2 } => Source::Independent {
            sd1: (gamma1 / seg_dt).sqrt(),
            sd2: (gamma2 / seg_dt).sqrt(),
        },
        _ => {
            return Err(Error::Config(format!(
                "the white-noise oracle applies only to Markovian classes (got {})",
                p.class
            )))
        }
    };

    let values = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(p.seed, &[i as u64]));
            let shifts: Vec<(f64, f64)> = (0..segments)
                .map(|_| match source {
                    Source::Shared { c1, c2, sd } => {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let chi = sd * z;
                        (c1 * chi, c2 * chi)
                    }
                    Source::Independent { sd1, sd2 } => {
                        let a: f64 = StandardNormal.sample(&mut rng);
                        let b: f64 = StandardNormal.sample(&mut rng);
                        (sd1 * a, sd2 * b)
                    }
                })
                .collect();
            protocol.efficiency_segments(&shifts, per_segment)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McEstimate::from_values(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn draws_respect_ranges() {
        for seed in 0..200 {
            for class in NoiseClass::ALL {
                let p = draw_sample_params(class, seed);
                p.validate().unwrap();
                assert_eq!(p, draw_sample_params(class, seed));
                match p.strength {
                    NoiseStrength::Quasistatic { eta, sigma } => {
                        assert!((ETA_RANGE.0..=ETA_RANGE.1).contains(&eta.abs()));
                        assert_eq!(sigma, BASE_SIGMA);
                    }
                    NoiseStrength::QuasistaticIndependent { sigma1, sigma2 } => {
                        assert!(
                            (0.002..=0.05).contains(&sigma1) && (0.002..=0.05).contains(&sigma2)
                        );
                    }
                    NoiseStrength::Markovian { eta, gamma } => {
                        assert!((ETA_RANGE.0..=ETA_RANGE.1).contains(&eta.abs()));
                        assert!((1e-4..=1e-3).contains(&gamma));
                    }
                    NoiseStrength::MarkovianIndependent { gamma1, gamma2 } => {
                        assert!((1e-4..=1e-3).contains(&gamma1) && (1e-4..=1e-3).contains(&gamma2));
                        assert_ne!(gamma1, gamma2);
                    }
                }
            }
        }
    }

    #[test]
    fn class_labels_round_trip() {
        for c in NoiseClass::ALL {
            assert_eq!(NoiseClass::from_label(c.label()), Some(c));
            assert_eq!(c.as_str().parse::<NoiseClass>().unwrap(), c);
        }
        assert!(NoiseClass::from_label(6).is_none());
        assert!("7".parse::<NoiseClass>().is_err());
    }

    #[test]
    fn mismatched_strength_rejected() {
        let p = NoiseSampleParams {
            class: NoiseClass::MCorrelated,
            strength: NoiseStrength::Markovian {
                eta: -1.0,
                gamma: 1e-4,
            },
            seed: 0,
        };
        assert!(p.validate().is_err());
        let p = NoiseSampleParams {
            class: NoiseClass::NmUncorrelated,
            strength: NoiseStrength::Markovian {
                eta: 1.0,
                gamma: 1e-4,
            },
            seed: 0,
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn gauss_hermite_moments() {
        let r = gauss_hermite_rule(1, 0.3).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert_eq!(r.weights, vec![1.0]);
        let s = 0.01;
        for n in [2, 3, 9, 15, 21] {
            let r = gauss_hermite_rule(n, s).unwrap();
            assert_abs_diff_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(r.expectation(|x| x * x), s * s, epsilon = 1e-18);
            if n >= 3 {
                assert_abs_diff_eq!(
                    r.expectation(|x| x.powi(4)) / s.powi(4),
                    3.0,
                    epsilon = 1e-12
                );
            }
            assert_abs_diff_eq!(r.expectation(|x| x.powi(3)), 0.0, epsilon = 1e-20);
        }
        // exact up to degree 2n - 1: E[x^(2n-2)] = (2n-3)!!
        let r = gauss_hermite_rule(6, 1.0).unwrap();
        assert_abs_diff_eq!(r.expectation(|x| x.powi(10)), 945.0, epsilon = 1e-9);
        assert!(gauss_hermite_rule(0, 1.0).is_err());
    }

    #[test]
    fn correlated_split_reproduces_eta() {
        for eta in [0.1, 1.0, 3.7, -0.4, -5.0] {
            let (c1, c2) = correlated_split(eta).unwrap();
            assert_abs_diff_eq!(c2 / c1, eta, epsilon = 1e-14);
        }
        assert!(correlated_split(0.0).is_err());
    }
}
