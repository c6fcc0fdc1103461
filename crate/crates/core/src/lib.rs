//! Local directional gradient pattern (LDGP) face descriptors.
//!
//! The crate covers the whole recognition pipeline:
//!
//! - [`image`]: 8-bit grayscale images, PGM/PNG loading, dataset ingestion and
//!   a seeded synthetic dataset generator.
//! - [`derivative`]: directional derivative fields of any order in the
//!   0°, 45°, 90° and 135° directions.
//! - [`ldgp`]: the 6-bit LDGP micropattern built from four same-order
//!   derivatives of a pixel.
//! - [`baseline`]: LBP (8 bits) and LDP (4 × 8 bits) code images.
//! - [`feature`]: uniform quantization, region grids and concatenated
//!   spatial histograms.
//! - [`recognition`]: L1 distance, 1-NN classification, leave-one-out and
//!   stratified probe/gallery split evaluation.
//! - [`bench`]: extraction/match timing and Gaussian noise robustness sweeps.
//!
//! Derivative arithmetic is generic over the signed integer sample type
//! (see [`Sample`]); the aliases at the crate root fix the common choices.
//!
//! ```
//! use ldgp_core::{ldgp_code, Descriptor, FeatureConfig, GrayImage, extract_feature};
//!
//! // Derivatives 1, -3, -1, 2 in the 0°, 45°, 90°, 135° directions.
//! assert_eq!(ldgp_code(1, -3, -1, 2), 0b110000);
//!
//! let image = GrayImage::from_fn(16, 16, |x, y| (x * 7 + y * 13) as u8);
//! let config = FeatureConfig::new(Descriptor::Ldgp, 2, 4, 4, 8).unwrap();
//! let feature = extract_feature(&image, &config).unwrap();
//! assert_eq!(feature.len(), 128);
//! ```

pub mod baseline;
pub mod bench;
pub mod derivative;
mod error;
pub mod feature;
pub mod image;
pub mod ldgp;
pub mod recognition;

pub use baseline::{lbp_image, ldp_image, ldp_image_with};
pub use bench::{
    add_gaussian_noise, benchmark, median, noise_sweep, time_extraction, time_matching,
    write_timing_csv, NoisePoint, Timing, TimingRow,
};
pub use derivative::{derivative_field, derivative_fields, Direction, Field, Sample, MAX_ORDER};
pub use error::{Error, Result};
pub use feature::{
    extract_feature, extract_features, extract_features_serial, histogram_codes, partition_regions,
    quantize_code, Descriptor, FeatureConfig, FeatureEntry, FeatureFile, FeatureVector, Region,
};
pub use image::{
    load_dataset, load_image, synth_dataset, DatasetSource, Entry, GrayImage, LabeledDataset,
};
pub use ldgp::{encode_pair, ldgp_code, ldgp_image, ldgp_image_with, CodeImage};
pub use recognition::{
    evaluate_loo, evaluate_loo_features, evaluate_split_kfold, l1_distance, nn_classify,
    probe_quotas, recognition_rate, write_eval_csv, AbsDiff, Decision, EvalReport, Gallery, Match,
    SplitReport,
};

/// Derivative field over 32-bit samples; valid up to order 20.
pub type DerivativeField = Field<i32>;
/// Derivative field over 64-bit samples, for orders beyond what `i32` holds.
pub type WideDerivativeField = Field<i64>;
/// Derivative field over 16-bit samples; valid up to order 7.
pub type CompactDerivativeField = Field<i16>;
