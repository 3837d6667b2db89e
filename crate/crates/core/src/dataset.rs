//! Dataset generation with per-sample seeds and an on-disk cache, the
//! stratified 3:1:1 split, a line-oriented file format and feature
//! standardization.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::efficiency::{FeatureVector, ProtocolSet, SimConfig};
use crate::error::{Error, Result};
use crate::noise::{draw_sample_params, NoiseClass, NoiseSampleParams, NoiseStrength};
use crate::seed::child_seed;

pub const GENERATOR_VERSION: &str = concat!("noisesense-", env!("CARGO_PKG_VERSION"));

const HEADER: &str =
    "# noisesense dataset v1; features xi_equal xi_pump_double xi_stokes_double = final |ee> \
population for Omega_p = Omega_s, Omega_p = 2 Omega_s, Omega_s = 2 Omega_p (dimensionless); \
eta dimensionless; sigma*, gamma* in units of eps";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: FeatureVector,
    pub label: usize,
    pub params: NoiseSampleParams,
    pub seed: u64,
    pub generator_version: String,
}

impl Sample {
    pub fn class(&self) -> NoiseClass {
        self.params.class
    }
}

/// Seed of sample `index` of `class` under `master_seed`.
pub fn sample_seed(master_seed: u64, class: NoiseClass, index: usize) -> u64 {
    child_seed(master_seed, &[class.label() as u64, index as u64])
}

/// Draws the parameters of one sample and computes its features.
pub fn compute_sample(protocols: &ProtocolSet, class: NoiseClass, seed: u64) -> Result<Sample> {
    let params = draw_sample_params(class, seed);
    let features = protocols.feature_vector(&params)?;
    Ok(Sample {
        features,
        label: class.label(),
        params,
        seed,
        generator_version: GENERATOR_VERSION.to_string(),
    })
}

#[derive(Clone, Debug, Default)]
pub struct GenerateOptions {
    /// One JSON file per child seed; reused when the stored simulation
    /// settings match.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleFailure {
    pub class: NoiseClass,
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct GenerationReport {
    /// Successful samples in `(class, index)` order.
    pub samples: Vec<Sample>,
    pub failures: Vec<SampleFailure>,
    pub cache_hits: usize,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    sim: SimConfig,
    sample: Sample,
}

fn cache_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("{seed:016x}.json"))
}

fn read_cache(dir: &Path, seed: u64, sim: &SimConfig, class: NoiseClass) -> Option<Sample> {
    let text = fs::read_to_string(cache_path(dir, seed)).ok()?;
    let entry: CacheEntry = serde_json::from_str(&text).ok()?;
    let fresh = entry.sim == *sim
        && entry.sample.seed == seed
        && entry.sample.params.class == class
        && entry.sample.generator_version == GENERATOR_VERSION;
    fresh.then_some(entry.sample)
}

fn write_cache(dir: &Path, sim: &SimConfig, sample: &Sample) -> Result<()> {
    let path = cache_path(dir, sample.seed);
    let tmp = path.with_extension("tmp");
    fs::write(
        &tmp,
        serde_json::to_string(&CacheEntry {
            sim: *sim,
            sample: sample.clone(),
        })?,
    )?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Generates `samples_per_class` samples of every class. Failed samples are
/// reported and skipped; generation continues.
pub fn generate_dataset(
    samples_per_class: usize,
    master_seed: u64,
    sim: &SimConfig,
    opts: &GenerateOptions,
) -> Result<GenerationReport> {
    if samples_per_class == 0 {
        return Err(Error::Config("samples_per_class must be at least 1".into()));
    }
    if let Some(dir) = &opts.cache_dir {
        fs::create_dir_all(dir)?;
    }
    let jobs: Vec<(NoiseClass, usize)> = NoiseClass::ALL
        .iter()
        .flat_map(|&c| (0..samples_per_class).map(move |i| (c, i)))
        .collect();
    let seeds: Vec<u64> = jobs
        .iter()
        .map(|&(c, i)| sample_seed(master_seed, c, i))
        .collect();
    let cached: Vec<Option<Sample>> = match &opts.cache_dir {
        Some(dir) => jobs
            .iter()
            .zip(&seeds)
            .map(|(&(c, _), &s)| read_cache(dir, s, sim, c))
            .collect(),
        None => vec![None; jobs.len()],
    };
    let cache_hits = cached.iter().filter(|c| c.is_some()).count();
    let missing = jobs.len() - cache_hits;
    log::info!(
        "{} samples requested, {cache_hits} cached, {missing} to compute",
        jobs.len()
    );

    let protocols = if missing > 0 {
        Some(ProtocolSet::new(sim)?)
    } else {
        None
    };
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Result<Sample>> = jobs
        .par_iter()
        .zip(seeds.par_iter())
        .zip(cached.into_par_iter())
        .map(|((&(class, _), &seed), cached)| {
            if let Some(sample) = cached {
                return Ok(sample);
            }
            let sample = compute_sample(protocols.as_ref().unwrap(), class, seed)?;
            if let Some(dir) = &opts.cache_dir {
                write_cache(dir, sim, &sample)?;
            }
            let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            if n % 10 == 0 || n == missing {
                log::info!("computed {n}/{missing} samples");
            }
            Ok(sample)
        })
        .collect();

    let mut report = GenerationReport {
        cache_hits,
        ..Default::default()
    };
    for ((class, index), (result, seed)) in jobs.into_iter().zip(results.into_iter().zip(seeds)) {
        match result {
            Ok(sample) => report.samples.push(sample),
            Err(e) => {
                log::warn!("sample {class}/{index} (seed {seed}) failed: {e}");
                report.failures.push(SampleFailure {
                    class,
                    index,
                    seed,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub split_seed: u64,
}

pub const MIN_SAMPLES_PER_CLASS: usize = 5;

/// Per-class shuffle, then a 3:1:1 partition of each class.
pub fn split_dataset(samples: &[Sample], split_seed: u64) -> Result<DatasetSplit> {
    let mut by_class: BTreeMap<usize, Vec<&Sample>> = BTreeMap::new();
    for s in samples {
        by_class.entry(s.label).or_default().push(s);
    }
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        split_seed,
    };
    for class in NoiseClass::ALL {
        let members = by_class.remove(&class.label()).unwrap_or_default();
        let n = members.len();
        if n < MIN_SAMPLES_PER_CLASS {
            return Err(Error::TooFewSamples {
                class: class.label(),
                count: n,
                needed: MIN_SAMPLES_PER_CLASS,
            });
        }
        let mut members = members;
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(split_seed, &[class.label() as u64]));
        members.shuffle(&mut rng);
        let n_train = (3 * n + 2) / 5;
        let n_val = (n + 2) / 5;
        for (k, s) in members.into_iter().enumerate() {
            let target = if k < n_train {
                &mut split.train
            } else if k < n_train + n_val {
                &mut split.validation
            } else {
                &mut split.test
            };
            target.push(s.clone());
        }
    }
    if let Some((&label, _)) = by_class.iter().next() {
        return Err(Error::Config(format!("sample with unknown label {label}")));
    }
    Ok(split)
}

fn strength_fields(s: &NoiseStrength) -> Vec<(&'static str, f64)> {
    match *s {
        NoiseStrength::Quasistatic { eta, sigma } => vec![("eta", eta), ("sigma", sigma)],
        NoiseStrength::QuasistaticIndependent { sigma1, sigma2 } => {
            vec![("sigma1", sigma1), ("sigma2", sigma2)]
        }
        NoiseStrength::Markovian { eta, gamma } => vec![("eta", eta), ("gamma", gamma)],
        NoiseStrength::MarkovianIndependent { gamma1, gamma2 } => {
            vec![("gamma1", gamma1), ("gamma2", gamma2)]
        }
    }
}

/// Writes the header and one `key=value` record per sample. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_dataset<W: Write>(mut out: W, samples: &[Sample]) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    for s in samples {
        let f = s.features;
        write!(
            out,
            "label={} xi_equal={} xi_pump_double={} xi_stokes_double={} class={}",
            s.label, f.xi_equal, f.xi_pump_double, f.xi_stokes_double, s.params.class
        )?;
        for (k, v) in strength_fields(&s.params.strength) {
            write!(out, " {k}={v}")?;
        }
        writeln!(out, " seed={} generator={}", s.seed, s.generator_version)?;
    }
    Ok(())
}

pub fn save_dataset(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, samples)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn parse_record(line: &str) -> std::result::Result<Sample, String> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for token in line.split_whitespace() {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found '{token}'"))?;
        if fields.insert(k, v).is_some() {
            return Err(format!("duplicate field '{k}'"));
        }
    }
    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| format!("missing field '{k}'"))
    };
    let num = |k: &str| -> std::result::Result<f64, String> {
        let v = get(k)?;
        let x: f64 = v
            .parse()
            .map_err(|_| format!("field '{k}' is not a number: '{v}'"))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("field '{k}' is not finite"))
        }
    };
    let label: usize = get("label")?
        .parse()
        .map_err(|_| format!("label is not an integer: '{}'", fields["label"]))?;
    let class = NoiseClass::from_label(label).ok_or_else(|| format!("unknown label {label}"))?;
    if let Some(named) = fields.get("class") {
        if *named != class.as_str() {
            return Err(format!("class '{named}' does not match label {label}"));
        }
    }
    let strength = match class {
        NoiseClass::NmCorrelated | NoiseClass::NmAnticorrelated => NoiseStrength::Quasistatic {
            eta: num("eta")?,
            sigma: num("sigma")?,
        },
        NoiseClass::NmUncorrelated => NoiseStrength::QuasistaticIndependent {
            sigma1: num("sigma1")?,
            sigma2: num("sigma2")?,
        },
        NoiseClass::MCorrelated | NoiseClass::MAnticorrelated => NoiseStrength::Markovian {
            eta: num("eta")?,
            gamma: num("gamma")?,
        },
        NoiseClass::MUncorrelated => NoiseStrength::MarkovianIndependent {
            gamma1: num("gamma1")?,
            gamma2: num("gamma2")?,
        },
    };
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| format!("seed is not an unsigned integer: '{}'", fields["seed"]))?;
    let params = NoiseSampleParams::new(class, strength, seed).map_err(|e| e.to_string())?;
    Ok(Sample {
        features: FeatureVector::from_array([
            num("xi_equal")?,
            num("xi_pump_double")?,
            num("xi_stokes_double")?,
        ]),
        label,
        params,
        seed,
        generator_version: get("generator")?.to_string(),
    })
}

pub fn read_dataset<R: Read>(input: R, path: &Path) -> Result<Vec<Sample>> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(input).lines();
    match lines.next() {
        Some(first) => {
            let first = first?;
            if !first.starts_with("# noisesense dataset v1") {
                return Err(err(
                    1,
                    "missing dataset header line '# noisesense dataset v1 ...'".into(),
                ));
            }
        }
        None => return Err(err(1, "empty file: missing dataset header".into())),
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        samples.push(parse_record(trimmed).map_err(|m| err(i + 2, m))?);
    }
    Ok(samples)
}

pub fn load_dataset(path: &Path) -> Result<Vec<Sample>> {
    read_dataset(fs::File::open(path)?, path)
}

/// FNV-1a hash of a byte stream, used as a dataset checksum.
pub fn checksum(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn dataset_checksum(samples: &[Sample]) -> u64 {
    let mut buf = Vec::new();
    write_dataset(&mut buf, samples).expect("writing to memory cannot fail");
    checksum(&buf)
}

/// Per-feature mean and standard deviation fitted on the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Zero marks a constant feature, passed through unchanged.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Config(
                "cannot fit standardization on an empty set".into(),
            ));
        }
        let dim = rows[0].len();
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, x), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (x - m).powi(2);
            }
        }
        for (k, s) in std.iter_mut().enumerate() {
            *s = (*s / n as f64).sqrt();
            if *s == 0.0 || !s.is_finite() {
                log::warn!(
                    "feature {k} is constant on the training set; passing it through unscaled"
                );
                *s = 0.0;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn fit_samples(samples: &[Sample]) -> Result<Self> {
        Self::fit(&samples.iter().map(features_of).collect::<Vec<_>>())
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| if s == 0.0 { v } else { (v - m) / s })
            .collect()
    }
}

pub fn features_of(s: &Sample) -> Vec<f64> {
    s.features.to_array().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(class: NoiseClass, i: usize) -> Sample {
        let params = draw_sample_params(class, i as u64);
        Sample {
            features: FeatureVector::from_array([0.1 * i as f64, 1.0 / 3.0, class.label() as f64]),
            label: class.label(),
            params,
            seed: i as u64,
            generator_version: GENERATOR_VERSION.into(),
        }
    }

    #[test]
    fn split_sizes() {
        let samples: Vec<Sample> = NoiseClass::ALL
            .iter()
            .flat_map(|&c| (0..5).map(move |i| fake(c, i)))
            .collect();
        let s = split_dataset(&samples, 1).unwrap();
        assert_eq!(
            (s.train.len(), s.validation.len(), s.test.len()),
            (18, 6, 6)
        );
        let samples: Vec<Sample> = NoiseClass::ALL
            .iter()
            .flat_map(|&c| (0..4).map(move |i| fake(c, i)))
            .collect();
        assert!(matches!(
            split_dataset(&samples, 1),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn record_round_trip() {
        let samples: Vec<Sample> = NoiseClass::ALL.iter().map(|&c| fake(c, 3)).collect();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &samples).unwrap();
        let back = read_dataset(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, samples);
    }

    #[test]
    fn constant_feature_passes_through() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let st = Standardizer::fit(&rows).unwrap();
        assert_eq!(st.transform(&[2.0, 5.0]), vec![0.0, 5.0]);
        assert_eq!(st.std[1], 0.0);
    }
}
