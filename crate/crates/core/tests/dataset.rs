use std::fs;
use std::path::Path;

use noisesense_core::config::{Profile, RunConfig};
use noisesense_core::dataset::{
    dataset_checksum, generate_dataset, load_dataset, read_dataset, sample_seed, save_dataset, split_dataset,
    write_dataset, GenerateOptions, Sample, Standardizer, GENERATOR_VERSION,
};
use noisesense_core::efficiency::FeatureVector;
use noisesense_core::error::Error;
use noisesense_core::noise::{draw_sample_params, NoiseClass};
use proptest::prelude::*;

/// Synthetic samples with made-up features; no physics involved.
fn synthetic(per_class: &[usize], salt: u64) -> Vec<Sample> {
    let mut out = Vec::new();
    for (label, &n) in per_class.iter().enumerate() {
        let class = NoiseClass::from_label(label).unwrap();
        for i in 0..n {
            let seed = sample_seed(salt, class, i);
            let u = (seed >> 11) as f64 / (1u64 << 53) as f64;
            out.push(Sample {
                features: FeatureVector::from_array([u, 0.5 * u + 0.1, 1.0 - u / 3.0]),
                label,
                params: draw_sample_params(class, seed),
                seed,
                generator_version: GENERATOR_VERSION.into(),
            });
        }
    }
    out
}

fn parse(text: &str) -> Result<Vec<Sample>, Error> {
    read_dataset(text.as_bytes(), Path::new("mem.txt"))
}

#[test]
fn generation_is_deterministic_and_cached() {
    let sim = RunConfig::profile(Profile::Smoke).sim_config();
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let opts = GenerateOptions {
        cache_dir: Some(cache.clone()),
    };
    let a = generate_dataset(1, 5, &sim, &opts).unwrap();
    assert!(a.failures.is_empty());
    assert_eq!(a.cache_hits, 0);
    assert_eq!(a.samples.len(), 6);
    for (k, s) in a.samples.iter().enumerate() {
        assert_eq!(s.label, k);
        assert!(s.features.to_array().iter().all(|x| (0.0..=1.0 + 1e-9).contains(x)));
    }

    let b = generate_dataset(1, 5, &sim, &GenerateOptions::default()).unwrap();
    assert_eq!(a.samples, b.samples);

    let c = generate_dataset(1, 5, &sim, &opts).unwrap();
    assert_eq!(c.cache_hits, 6);
    assert_eq!(dataset_checksum(&a.samples), dataset_checksum(&c.samples));

    // A corrupted entry is recomputed, not trusted.
    let victim = fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    fs::write(&victim, "{ not json").unwrap();
    let d = generate_dataset(1, 5, &sim, &opts).unwrap();
    assert_eq!(d.cache_hits, 5);
    assert_eq!(d.samples, a.samples);

    // A different physics configuration does not reuse the cache.
    let mut other = sim;
    other.power *= 1.5;
    let e = generate_dataset(1, 5, &other, &opts).unwrap();
    assert_eq!(e.cache_hits, 0);
    assert_ne!(e.samples[0].features, a.samples[0].features);

    assert!(generate_dataset(0, 5, &sim, &opts).is_err());
}

#[test]
fn file_round_trip_is_exact() {
    let samples = synthetic(&[3, 3, 3, 3, 3, 3], 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/data.txt");
    save_dataset(&path, &samples).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, samples);
    assert_eq!(dataset_checksum(&back), dataset_checksum(&samples));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# noisesense dataset v1"));
}

#[test]
fn parse_errors_name_the_line() {
    let samples = synthetic(&[1, 1, 0, 0, 0, 0], 3);
    let mut buf = Vec::new();
    write_dataset(&mut buf, &samples).unwrap();
    let good = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = good.lines().collect();

    let line_of = |e: Error| match e {
        Error::Parse { line, message, .. } => (line, message),
        other => panic!("expected a parse error, got {other}"),
    };

    let (line, _) = line_of(parse("label=0\n").unwrap_err());
    assert_eq!(line, 1);

    let broken = format!("{}\n{}\n{}", lines[0], lines[1], lines[2].replace("xi_equal=", "xi_equal=abc"));
    let (line, msg) = line_of(parse(&broken).unwrap_err());
    assert_eq!(line, 3);
    assert!(msg.contains("xi_equal"), "{msg}");

    let broken = format!("{}\n\n# comment\n{}", lines[0], lines[1].replace("label=0", "label=9"));
    let (line, msg) = line_of(parse(&broken).unwrap_err());
    assert_eq!(line, 4);
    assert!(msg.contains("label"), "{msg}");

    let broken = format!("{}\n{} stray", lines[0], lines[1]);
    assert_eq!(line_of(parse(&broken).unwrap_err()).0, 2);

    let missing = format!("{}\n{}", lines[0], lines[1].replace(" seed=", " sed="));
    assert!(line_of(parse(&missing).unwrap_err()).1.contains("seed"));

    let e = load_dataset(Path::new("/no/such/dataset.txt")).unwrap_err();
    assert!(matches!(e, Error::Io(_)), "{e}");
}

#[test]
fn split_rejects_thin_classes() {
    let samples = synthetic(&[5, 5, 5, 4, 5, 5], 1);
    match split_dataset(&samples, 0).unwrap_err() {
        Error::TooFewSamples { class, count, needed } => {
            assert_eq!((class, count, needed), (3, 4, 5));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn standardizer_fits_training_statistics() {
    let rows = vec![vec![1.0, 5.0, 2.0], vec![3.0, 5.0, 4.0], vec![5.0, 5.0, 9.0]];
    let st = Standardizer::fit(&rows).unwrap();
    assert_eq!(st.mean, vec![3.0, 5.0, 5.0]);
    assert!((st.std[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(st.std[1], 0.0);
    // Constant features pass through untouched.
    assert_eq!(st.transform(&[3.0, 7.0, 5.0]), vec![0.0, 7.0, 0.0]);
    let z: Vec<Vec<f64>> = rows.iter().map(|r| st.transform(r)).collect();
    for k in [0, 2] {
        let mean: f64 = z.iter().map(|r| r[k]).sum::<f64>() / 3.0;
        let var: f64 = z.iter().map(|r| r[k] * r[k]).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-15 && (var - 1.0).abs() < 1e-12);
    }
    assert!(Standardizer::fit(&[]).is_err());
}

proptest! {
    #[test]
    fn split_is_a_stratified_partition(
        counts in prop::collection::vec(5usize..40, 6),
        split_seed in any::<u64>(),
    ) {
        let samples = synthetic(&counts, 11);
        let split = split_dataset(&samples, split_seed).unwrap();
        let mut seen: Vec<u64> = split.train.iter().chain(&split.validation).chain(&split.test).map(|s| s.seed).collect();
        seen.sort_unstable();
        let mut all: Vec<u64> = samples.iter().map(|s| s.seed).collect();
        all.sort_unstable();
        prop_assert_eq!(seen, all);
        for (label, &n) in counts.iter().enumerate() {
            let count = |set: &[Sample]| set.iter().filter(|s| s.label == label).count();
            let (tr, va, te) = (count(&split.train), count(&split.validation), count(&split.test));
            prop_assert_eq!(tr + va + te, n);
            prop_assert!((tr as f64 - 0.6 * n as f64).abs() <= 1.0);
            prop_assert!((va as f64 - 0.2 * n as f64).abs() <= 1.0);
            prop_assert!(va >= 1 && te >= 1);
        }
        prop_assert_eq!(split_dataset(&samples, split_seed).unwrap(), split);
    }
}
