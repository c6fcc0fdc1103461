//! Spatial histogram features.
//!
//! A code image is split into a grid of regions, each region's codes are
//! uniformly quantized into `bins` bins and counted, and the per-region
//! histograms are concatenated region-major, then code-image-major, then bin.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{lbp_image, ldp_image};
use crate::derivative::MAX_ORDER;
use crate::error::{Error, Result};
use crate::image::{GrayImage, LabeledDataset};
use crate::ldgp::{ldgp_image, CodeImage, LDGP_BITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Descriptor {
    Ldgp,
    Ldp,
    Lbp,
}

impl Descriptor {
    pub const fn code_bits(self) -> u8 {
        match self {
            Descriptor::Ldgp => LDGP_BITS,
            Descriptor::Ldp | Descriptor::Lbp => 8,
        }
    }

    /// Code images produced per input image.
    pub const fn code_images(self) -> usize {
        match self {
            Descriptor::Ldp => 4,
            Descriptor::Ldgp | Descriptor::Lbp => 1,
        }
    }

    /// Pattern bits per pixel.
    pub const fn pattern_bits(self) -> usize {
        self.code_bits() as usize * self.code_images()
    }

    pub const fn uses_order(self) -> bool {
        !matches!(self, Descriptor::Lbp)
    }

    pub const fn name(self) -> &'static str {
        match self {
            Descriptor::Ldgp => "ldgp",
            Descriptor::Ldp => "ldp",
            Descriptor::Lbp => "lbp",
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Descriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ldgp" => Ok(Descriptor::Ldgp),
            "ldp" => Ok(Descriptor::Ldp),
            "lbp" => Ok(Descriptor::Lbp),
            other => Err(Error::InvalidArgument(format!(
                "unknown descriptor `{other}`"
            ))),
        }
    }
}

/// Everything needed to turn an image into a [`FeatureVector`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureConfig {
    pub descriptor: Descriptor,
    pub order: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub bins: usize,
}

impl FeatureConfig {
    pub fn new(
        descriptor: Descriptor,
        order: usize,
        grid_rows: usize,
        grid_cols: usize,
        bins: usize,
    ) -> Result<Self> {
        let config = Self {
            descriptor,
            order,
            grid_rows,
            grid_cols,
            bins,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.descriptor.uses_order() && !(2..=MAX_ORDER + 1).contains(&self.order) {
            return Err(Error::InvalidOrder {
                order: self.order,
                reason: "pattern order must be between 2 and 21",
            });
        }
        check_bins(self.bins, self.descriptor.code_bits())?;
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::InvalidArgument(
                "region grid must be at least 1x1".into(),
            ));
        }
        Ok(())
    }

    pub fn regions(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// `regions × bins × code images`.
    pub fn feature_len(&self) -> usize {
        self.regions() * self.bins * self.descriptor.code_images()
    }

    /// Checks the grid against concrete image dimensions.
    pub fn check_dimensions(&self, width: usize, height: usize) -> Result<()> {
        if self.grid_rows > height || self.grid_cols > width {
            return Err(Error::GridTooLarge {
                rows: self.grid_rows,
                cols: self.grid_cols,
                width,
                height,
            });
        }
        Ok(())
    }

    /// Runs the configured codec.
    pub fn code_images(&self, image: &GrayImage) -> Result<Vec<CodeImage>> {
        Ok(match self.descriptor {
            Descriptor::Ldgp => vec![ldgp_image(image, self.order)?],
            Descriptor::Ldp => ldp_image(image, self.order)?.into(),
            Descriptor::Lbp => vec![lbp_image(image)?],
        })
    }
}

fn check_bins(bins: usize, code_bits: u8) -> Result<()> {
    if !bins.is_power_of_two() {
        return Err(Error::InvalidBins {
            bins,
            reason: "bin count must be a power of two",
        });
    }
    if bins > 1 << code_bits {
        return Err(Error::InvalidBins {
            bins,
            reason: "more bins than distinct codes",
        });
    }
    Ok(())
}

/// Uniform quantization: `floor(code × bins / 2^code_bits)`.
pub fn quantize_code(code: u32, code_bits: u8, bins: usize) -> Result<usize> {
    check_bins(bins, code_bits)?;
    if u64::from(code) >= 1u64 << code_bits {
        return Err(Error::InvalidArgument(format!(
            "code {code} does not fit in {code_bits} bits"
        )));
    }
    Ok((code >> (u32::from(code_bits) - bins.trailing_zeros())) as usize)
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Region {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }
}

/// Floor-boundary grid: region `(r, c)` spans rows `[r·H/R, (r+1)·H/R)` and
/// columns `[c·W/C, (c+1)·W/C)`. Regions are returned row-major.
pub fn partition_regions(
    width: usize,
    height: usize,
    grid_rows: usize,
    grid_cols: usize,
) -> Result<Vec<Region>> {
    if grid_rows == 0 || grid_cols == 0 {
        return Err(Error::InvalidArgument(
            "region grid must be at least 1x1".into(),
        ));
    }
    if grid_rows > height || grid_cols > width {
        return Err(Error::GridTooLarge {
            rows: grid_rows,
            cols: grid_cols,
            width,
            height,
        });
    }
    let mut regions = Vec::with_capacity(grid_rows * grid_cols);
    for r in 0..grid_rows {
        for c in 0..grid_cols {
            regions.push(Region {
                x0: c * width / grid_cols,
                x1: (c + 1) * width / grid_cols,
                y0: r * height / grid_rows,
                y1: (r + 1) * height / grid_rows,
            });
        }
    }
    Ok(regions)
}

/// Index of the floor-boundary cell containing each coordinate.
fn cell_of(extent: usize, cells: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(extent);
    let mut cell = 0;
    for i in 0..extent {
        while i >= (cell + 1) * extent / cells {
            cell += 1;
        }
        out.push(cell);
    }
    out
}

/// A concatenated spatial histogram.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureVector {
    values: Vec<u32>,
    config: FeatureConfig,
}

impl FeatureVector {
    /// Wraps raw counts; the length must match `config.feature_len()`.
    pub fn from_values(config: FeatureConfig, values: Vec<u32>) -> Result<Self> {
        if values.len() != config.feature_len() {
            return Err(Error::LengthMismatch(config.feature_len(), values.len()));
        }
        Ok(Self { values, config })
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<u32> {
        self.values
    }

    /// Histogram of one region and code image.
    pub fn histogram(&self, region: usize, code_image: usize) -> &[u32] {
        let bins = self.config.bins;
        let start = (region * self.config.descriptor.code_images() + code_image) * bins;
        &self.values[start..start + bins]
    }
}

/// Histograms already computed code images under `config`.
pub fn histogram_codes(codes: &[CodeImage], config: &FeatureConfig) -> Result<FeatureVector> {
    let first = codes
        .first()
        .ok_or_else(|| Error::InvalidArgument("no code images".into()))?;
    let (w, h) = (first.width(), first.height());
    config.check_dimensions(w, h)?;
    let n_images = codes.len();
    let bins = config.bins;
    let shift = u32::from(first.code_bits()) - bins.trailing_zeros();
    let col_cell = cell_of(w, config.grid_cols);
    let row_cell = cell_of(h, config.grid_rows);
    let stride = n_images * bins;

    let mut values = vec![0u32; config.regions() * stride];
    for (k, image) in codes.iter().enumerate() {
        debug_assert_eq!((image.width(), image.height()), (w, h));
        for (y, row) in image.codes().chunks_exact(w).enumerate() {
            let row_base = row_cell[y] * config.grid_cols;
            for (&code, &cc) in row.iter().zip(&col_cell) {
                let region = row_base + cc;
                values[region * stride + k * bins + (code as usize >> shift)] += 1;
            }
        }
    }
    Ok(FeatureVector {
        values,
        config: *config,
    })
}

pub fn extract_feature(image: &GrayImage, config: &FeatureConfig) -> Result<FeatureVector> {
    config.check_dimensions(image.width(), image.height())?;
    let codes = config.code_images(image)?;
    histogram_codes(&codes, config)
}

/// Features of every dataset image, in dataset order, computed on the
/// current rayon pool. Output does not depend on the pool size.
pub fn extract_features(
    dataset: &LabeledDataset,
    config: &FeatureConfig,
) -> Result<Vec<FeatureVector>> {
    dataset
        .entries()
        .par_iter()
        .map(|e| extract_feature(&e.image, config))
        .collect()
}

/// Same as [`extract_features`] but entirely on the calling thread.
pub fn extract_features_serial(
    dataset: &LabeledDataset,
    config: &FeatureConfig,
) -> Result<Vec<FeatureVector>> {
    dataset
        .images()
        .map(|img| extract_feature(img, config))
        .collect()
}

/// On-disk feature set. Field order is part of the format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub descriptor: Descriptor,
    pub order: usize,
    pub grid: [usize; 2],
    pub bins: usize,
    pub entries: Vec<FeatureEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub path: String,
    pub label: String,
    pub vector: Vec<u32>,
}

impl FeatureFile {
    pub fn new(
        config: &FeatureConfig,
        dataset: &LabeledDataset,
        features: &[FeatureVector],
    ) -> Result<Self> {
        if dataset.image_count() != features.len() {
            return Err(Error::LengthMismatch(dataset.image_count(), features.len()));
        }
        let entries = dataset
            .entries()
            .iter()
            .zip(features)
            .map(|(e, f)| FeatureEntry {
                path: e.path.to_string_lossy().into_owned(),
                label: e.label.clone(),
                vector: f.values().to_vec(),
            })
            .collect();
        Ok(Self {
            descriptor: config.descriptor,
            order: config.order,
            grid: [config.grid_rows, config.grid_cols],
            bins: config.bins,
            entries,
        })
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::synth_dataset;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantization_examples() {
        assert_eq!(quantize_code(63, 6, 8).unwrap(), 7);
        assert_eq!(quantize_code(48, 6, 8).unwrap(), 6);
        assert_eq!(quantize_code(8, 6, 8).unwrap(), 1);
        assert_eq!(quantize_code(255, 8, 256).unwrap(), 255);
        assert!(matches!(
            quantize_code(1, 6, 12),
            Err(Error::InvalidBins { .. })
        ));
        assert!(quantize_code(1, 6, 128).is_err());
        assert!(quantize_code(64, 6, 8).is_err());
    }

    #[test]
    fn partition_examples() {
        let even = partition_regions(8, 8, 4, 4).unwrap();
        assert_eq!(even.len(), 16);
        assert!(even.iter().all(|r| r.width() == 2 && r.height() == 2));

        // floor(k * 10 / 4) for k = 0..=4 is 0, 2, 5, 7, 10.
        let uneven = partition_regions(10, 10, 4, 4).unwrap();
        let widths: Vec<usize> = uneven[..4].iter().map(Region::width).collect();
        let heights: Vec<usize> = uneven.iter().step_by(4).map(Region::height).collect();
        assert_eq!(widths, vec![2, 3, 2, 3]);
        assert_eq!(heights, vec![2, 3, 2, 3]);

        assert_eq!(
            partition_regions(5, 5, 1, 1).unwrap(),
            vec![Region {
                x0: 0,
                y0: 0,
                x1: 5,
                y1: 5
            }]
        );
        assert!(matches!(
            partition_regions(3, 8, 4, 4),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn constant_image_feature() {
        let img = GrayImage::filled(8, 8, 90);
        let config = FeatureConfig::new(Descriptor::Ldgp, 2, 2, 2, 8).unwrap();
        let f = extract_feature(&img, &config).unwrap();
        assert_eq!(f.len(), 32);
        for (i, &v) in f.values().iter().enumerate() {
            assert_eq!(v, if i % 8 == 0 { 16 } else { 0 });
        }
    }

    #[test]
    fn feature_lengths() {
        let img = GrayImage::from_fn(16, 16, |x, y| (x * y) as u8);
        let ldgp = FeatureConfig::new(Descriptor::Ldgp, 2, 4, 4, 8).unwrap();
        let ldp = FeatureConfig {
            descriptor: Descriptor::Ldp,
            ..ldgp
        };
        let lbp = FeatureConfig {
            descriptor: Descriptor::Lbp,
            ..ldgp
        };
        assert_eq!(extract_feature(&img, &ldgp).unwrap().len(), 128);
        assert_eq!(extract_feature(&img, &ldp).unwrap().len(), 512);
        assert_eq!(extract_feature(&img, &lbp).unwrap().len(), 128);
    }

    #[test]
    fn config_validation() {
        assert!(FeatureConfig::new(Descriptor::Ldgp, 2, 4, 4, 64).is_ok());
        assert!(FeatureConfig::new(Descriptor::Ldgp, 2, 4, 4, 128).is_err());
        assert!(FeatureConfig::new(Descriptor::Ldp, 2, 4, 4, 256).is_ok());
        assert!(FeatureConfig::new(Descriptor::Ldp, 1, 4, 4, 8).is_err());
        assert!(FeatureConfig::new(Descriptor::Lbp, 0, 4, 4, 8).is_ok());
        assert!(FeatureConfig::new(Descriptor::Ldgp, 2, 0, 4, 8).is_err());
        assert!(FeatureConfig::new(Descriptor::Ldgp, 2, 4, 4, 24).is_err());
        assert_eq!("LDP".parse::<Descriptor>().unwrap(), Descriptor::Ldp);
        assert!("lvp".parse::<Descriptor>().is_err());
    }

    /// Loops every pixel, finds its region by scanning rectangles and
    /// increments the matching count.
    fn naive_feature(img: &GrayImage, config: &FeatureConfig) -> Vec<u32> {
        let codes = config.code_images(img).unwrap();
        let regions = partition_regions(
            img.width(),
            img.height(),
            config.grid_rows,
            config.grid_cols,
        )
        .unwrap();
        let n = codes.len();
        let mut out = vec![0u32; regions.len() * n * config.bins];
        let levels = 1usize << config.descriptor.code_bits();
        for (k, code_image) in codes.iter().enumerate() {
            for y in 0..img.height() {
                for x in 0..img.width() {
                    let r = regions
                        .iter()
                        .position(|r| (r.x0..r.x1).contains(&x) && (r.y0..r.y1).contains(&y))
                        .unwrap();
                    let bin = code_image.get(x, y) as usize * config.bins / levels;
                    out[(r * n + k) * config.bins + bin] += 1;
                }
            }
        }
        out
    }

    #[test]
    fn histograms_match_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let img = GrayImage::from_fn(12, 12, |_, _| rng.random());
        for descriptor in [Descriptor::Ldgp, Descriptor::Ldp, Descriptor::Lbp] {
            for (rows, cols, bins, order) in
                [(4, 4, 8, 2), (3, 5, 16, 3), (1, 1, 32, 2), (5, 2, 64, 4)]
            {
                let config = FeatureConfig::new(descriptor, order, rows, cols, bins).unwrap();
                let f = extract_feature(&img, &config).unwrap();
                assert_eq!(
                    f.values(),
                    naive_feature(&img, &config).as_slice(),
                    "{config:?}"
                );
            }
        }
    }

    #[test]
    fn parallel_extraction_is_identical() {
        let ds = synth_dataset(3, 4, 20, 24, 2).unwrap();
        let config = FeatureConfig::new(Descriptor::Ldp, 2, 4, 4, 16).unwrap();
        let serial = extract_features_serial(&ds, &config).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let parallel = pool.install(|| extract_features(&ds, &config)).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn feature_file_field_order() {
        let ds = synth_dataset(1, 1, 8, 8, 0).unwrap();
        let config = FeatureConfig::new(Descriptor::Ldgp, 2, 1, 1, 8).unwrap();
        let features = extract_features(&ds, &config).unwrap();
        let file = FeatureFile::new(&config, &ds, &features).unwrap();
        let mut buf = Vec::new();
        file.write_json(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            r#"{"descriptor":"ldgp","order":2,"grid":[1,1],"bins":8,"entries":[{"path":"synthetic/0000/0000.pgm","label":"0000","vector":["#
        ), "{text}");
        let back: FeatureFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
    }

    proptest! {
        #[test]
        fn region_histograms_sum_to_region_area(
            w in 2usize..20, h in 2usize..20, seed in any::<u64>(),
            rows in 1usize..5, cols in 1usize..5,
        ) {
            prop_assume!(rows <= h && cols <= w);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(w, h, |_, _| rng.random());
            let regions = partition_regions(w, h, rows, cols).unwrap();
            prop_assert_eq!(regions.iter().map(Region::area).sum::<usize>(), w * h);
            for descriptor in [Descriptor::Ldgp, Descriptor::Ldp] {
                let config = FeatureConfig::new(descriptor, 2, rows, cols, 8).unwrap();
                let f = extract_feature(&img, &config).unwrap();
                prop_assert_eq!(f.len(), config.feature_len());
                for (i, region) in regions.iter().enumerate() {
                    for k in 0..descriptor.code_images() {
                        prop_assert_eq!(f.histogram(i, k).iter().sum::<u32>() as usize, region.area());
                    }
                }
            }
        }

        #[test]
        fn quantization_is_monotone_and_onto(bits in 1u8..=8, log_bins in 0u32..=8) {
            prop_assume!(log_bins <= u32::from(bits));
            let bins = 1usize << log_bins;
            let mut seen = vec![false; bins];
            let mut last = 0;
            for code in 0..(1u32 << bits) {
                let q = quantize_code(code, bits, bins).unwrap();
                prop_assert!(q >= last && q < bins);
                prop_assert_eq!(q, code as usize * bins >> bits);
                seen[q] = true;
                last = q;
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }
}
