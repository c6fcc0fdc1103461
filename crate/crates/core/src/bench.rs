//! Extraction/match timing and Gaussian noise robustness.
//!
//! Extraction time is modeled as `t_e = K1 · S · Γ · l` and match time as
//! `t_m = K2 · S · Γ · l` for image size `S`, image count `Γ` and feature
//! length `l`. Timed sections exclude disk I/O and report the median over
//! repetitions.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature::{
    extract_feature, extract_features, extract_features_serial, Descriptor, FeatureConfig,
    FeatureVector,
};
use crate::image::{GrayImage, LabeledDataset};
use crate::recognition::{nearest, recognition_rate};

/// Adds zero-mean Gaussian noise of the given variance, rounding and
/// clamping each pixel to `[0, 255]`.
pub fn add_gaussian_noise(image: &GrayImage, variance: f64, seed: u64) -> Result<GrayImage> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be a finite non-negative number, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(image.clone());
    }
    let normal =
        Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(image.map(|p| {
        let noisy = f64::from(p) + normal.sample(&mut rng);
        noisy.round().clamp(0.0, 255.0) as u8
    }))
}

/// Wall-clock samples of one measured operation.
#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub samples: Vec<f64>,
    /// Work items per repetition: images extracted or distances computed.
    pub operations: usize,
}

impl Timing {
    pub fn median_seconds(&self) -> f64 {
        median(&self.samples)
    }
}

pub fn median(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

fn check_repetitions(repetitions: usize) -> Result<()> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument(
            "repetitions must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Times feature extraction of every dataset image. Images are already in
/// memory. `threads > 1` extracts on a dedicated worker pool of that size.
///
/// Returns the timing and the features of the last repetition.
pub fn time_extraction(
    dataset: &LabeledDataset,
    config: &FeatureConfig,
    repetitions: usize,
    threads: usize,
) -> Result<(Timing, Vec<FeatureVector>)> {
    check_repetitions(repetitions)?;
    let pool = if threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut samples = Vec::with_capacity(repetitions);
    let mut features = Vec::new();
    for _ in 0..repetitions {
        let start = Instant::now();
        features = match &pool {
            Some(pool) => pool.install(|| extract_features(dataset, config))?,
            None => extract_features_serial(dataset, config)?,
        };
        samples.push(start.elapsed().as_secs_f64());
        black_box(&features);
    }
    Ok((
        Timing {
            samples,
            operations: dataset.image_count(),
        },
        features,
    ))
}

/// Times one full single-threaded leave-one-out matching pass: every
/// feature is compared against every other one, `Γ (Γ − 1)` distances.
pub fn time_matching(features: &[FeatureVector], repetitions: usize) -> Result<Timing> {
    check_repetitions(repetitions)?;
    if features.len() < 2 {
        return Err(Error::TooFewImages {
            needed: 2,
            found: features.len(),
        });
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        for (p, probe) in features.iter().enumerate() {
            let candidates = features
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != p)
                .map(|(g, f)| (g, f.values()));
            black_box(nearest(probe.values(), candidates)?);
        }
        samples.push(start.elapsed().as_secs_f64());
    }
    Ok(Timing {
        samples,
        operations: features.len() * (features.len() - 1),
    })
}

/// One line of a timing report.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub descriptor: Descriptor,
    pub order: usize,
    pub width: usize,
    pub height: usize,
    pub image_count: usize,
    pub feature_len: usize,
    pub extraction_seconds: f64,
    pub match_seconds: f64,
    pub repetitions: usize,
    pub threads: usize,
}

/// Extraction and matching medians for one configuration.
pub fn benchmark(
    dataset: &LabeledDataset,
    config: &FeatureConfig,
    repetitions: usize,
    threads: usize,
) -> Result<TimingRow> {
    let (extraction, features) = time_extraction(dataset, config, repetitions, threads)?;
    let matching = time_matching(&features, repetitions)?;
    let (width, height) = dataset.entries()[0].image.dimensions();
    Ok(TimingRow {
        descriptor: config.descriptor,
        order: config.order,
        width,
        height,
        image_count: dataset.image_count(),
        feature_len: config.feature_len(),
        extraction_seconds: extraction.median_seconds(),
        match_seconds: matching.median_seconds(),
        repetitions,
        threads: threads.max(1),
    })
}

pub fn write_timing_csv<W: Write>(rows: &[TimingRow], out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "descriptor",
        "order",
        "width",
        "height",
        "gamma_count",
        "feature_len",
        "t_e_sec",
        "t_m_sec",
        "reps",
        "threads",
    ])?;
    for r in rows {
        csv.write_record([
            r.descriptor.name().to_owned(),
            r.order.to_string(),
            r.width.to_string(),
            r.height.to_string(),
            r.image_count.to_string(),
            r.feature_len.to_string(),
            format!("{:.6}", r.extraction_seconds),
            format!("{:.6}", r.match_seconds),
            r.repetitions.to_string(),
            r.threads.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Recognition rate at one noise level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisePoint {
    pub variance: f64,
    pub rate: f64,
}

/// Clean features form the gallery; each image's noisy copy probes it.
///
/// Noise seeds are derived per variance and per image from `seed`, so the
/// sweep is deterministic regardless of thread count.
pub fn noise_sweep(
    dataset: &LabeledDataset,
    config: &FeatureConfig,
    variances: &[f64],
    seed: u64,
) -> Result<Vec<NoisePoint>> {
    if variances.is_empty() {
        return Err(Error::InvalidArgument("no noise variances given".into()));
    }
    let gallery = extract_features(dataset, config)?;
    let labels: Vec<&str> = dataset.labels().collect();
    variances
        .iter()
        .enumerate()
        .map(|(vi, &variance)| {
            let mut seeds = ChaCha8Rng::seed_from_u64(seed);
            seeds.set_stream(vi as u64);
            let image_seeds: Vec<u64> = (0..dataset.image_count())
                .map(|_| seeds.next_u64())
                .collect();
            let matches = dataset
                .entries()
                .par_iter()
                .zip(&image_seeds)
                .enumerate()
                .map(|(i, (entry, &s))| {
                    let noisy = add_gaussian_noise(&entry.image, variance, s)?;
                    let probe = extract_feature(&noisy, config)?;
                    let candidates = gallery.iter().map(FeatureVector::values).enumerate();
                    let (matched, _) = nearest(probe.values(), candidates)?;
                    Ok(usize::from(labels[matched] == labels[i]))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum();
            Ok(NoisePoint {
                variance,
                rate: recognition_rate(matches, dataset.image_count()),
            })
        })
        .collect()
}
