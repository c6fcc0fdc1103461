//! Grayscale images, file loading and labeled datasets.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A row-major grid of 8-bit intensities.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension {
                path: PathBuf::new(),
            });
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    ///
    /// Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be non-zero");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel lookup with coordinates clamped into the image (replicate border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Applies `f` to every pixel.
    pub fn map(&self, mut f: impl FnMut(u8) -> u8) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Checks the minimum size every descriptor pipeline needs.
    pub fn ensure_descriptor_size(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::ImageTooSmall {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Writes the image as a binary (P5) PGM.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_pgm(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// Loads a PGM (P2 or P5, maxval ≤ 255) or, with the `png` feature, a PNG image.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::UnreadableFile {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    decode_image(&bytes, path)
}

fn decode_image(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    match bytes {
        [b'P', b'2', ..] | [b'P', b'5', ..] => decode_pgm(bytes, path),
        [0x89, b'P', b'N', b'G', ..] => decode_png(bytes, path),
        _ => Err(Error::UnsupportedFormat {
            path: path.to_owned(),
            reason: "not a PGM or PNG file".into(),
        }),
    }
}

struct PgmReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self) -> Option<u64> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let unreadable = |reason: &str| Error::UnreadableFile {
        path: path.to_owned(),
        reason: reason.to_owned(),
    };
    let binary = bytes[1] == b'5';
    let mut reader = PgmReader { bytes, pos: 2 };
    let width = reader
        .next_number()
        .ok_or_else(|| unreadable("missing width"))?;
    let height = reader
        .next_number()
        .ok_or_else(|| unreadable("missing height"))?;
    let maxval = reader
        .next_number()
        .ok_or_else(|| unreadable("missing maxval"))?;
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension {
            path: path.to_owned(),
        });
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat {
            path: path.to_owned(),
            reason: format!("maxval {maxval} (only 1..=255 supported)"),
        });
    }
    let count = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| unreadable("dimensions overflow"))?;

    let pixels = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(reader.pos) {
            Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
            _ => return Err(unreadable("malformed header")),
        }
        let body = &bytes[reader.pos..];
        if body.len() < count {
            return Err(unreadable("truncated raster"));
        }
        body[..count].to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        for _ in 0..count {
            let v = reader
                .next_number()
                .ok_or_else(|| unreadable("truncated raster"))?;
            if v > maxval {
                return Err(unreadable("sample exceeds maxval"));
            }
            pixels.push(v as u8);
        }
        pixels
    };
    Ok(GrayImage {
        width: width as usize,
        height: height as usize,
        pixels,
    })
}

/// Integer luma, `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((weighted + 500) / 1000) as u8
}

#[cfg(feature = "png")]
fn decode_png(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    use ::image::{DynamicImage, ImageFormat};

    let decoded = ::image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| {
        Error::UnreadableFile {
            path: path.to_owned(),
            reason: e.to_string(),
        }
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension {
            path: path.to_owned(),
        });
    }
    let pixels = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

#[cfg(not(feature = "png"))]
fn decode_png(_bytes: &[u8], path: &Path) -> Result<GrayImage> {
    Err(Error::UnsupportedFormat {
        path: path.to_owned(),
        reason: "PNG support not compiled in".into(),
    })
}

/// One labeled image of a dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub image: GrayImage,
    pub label: String,
    pub path: PathBuf,
}

/// An ordered collection of labeled images.
///
/// Entries are kept sorted by `(label, path)` so every load of the same
/// source yields the same order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDataset {
    entries: Vec<Entry>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn from_entries(mut entries: Vec<Entry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        entries.sort_by(|a, b| (&a.label, &a.path).cmp(&(&b.label, &b.path)));
        let class_count = entries
            .iter()
            .map(|e| e.label.as_str())
            .collect::<BTreeSet<_>>()
            .len();
        Ok(Self {
            entries,
            class_count,
        })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn images(&self) -> impl ExactSizeIterator<Item = &GrayImage> {
        self.entries.iter().map(|e| &e.image)
    }

    pub fn labels(&self) -> impl ExactSizeIterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    /// Number of distinct labels.
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Number of images.
    pub fn image_count(&self) -> usize {
        self.entries.len()
    }

    /// Indices of the entries of each class, classes in label order.
    pub fn class_indices(&self) -> Vec<(&str, Vec<usize>)> {
        let mut classes: Vec<(&str, Vec<usize>)> = Vec::with_capacity(self.class_count);
        for (i, e) in self.entries.iter().enumerate() {
            match classes.last_mut() {
                Some((label, members)) if *label == e.label => members.push(i),
                _ => classes.push((e.label.as_str(), vec![i])),
            }
        }
        classes
    }

    /// Returns a dataset with every image replaced by `f(image)`.
    pub fn map_images(&self, f: impl Fn(usize, &GrayImage) -> GrayImage + Sync) -> Self {
        let entries = self
            .entries
            .par_iter()
            .enumerate()
            .map(|(i, e)| Entry {
                image: f(i, &e.image),
                label: e.label.clone(),
                path: e.path.clone(),
            })
            .collect();
        Self {
            entries,
            class_count: self.class_count,
        }
    }

    /// Every image appears `times` times; copies get a `#k` path suffix.
    pub fn repeated(&self, times: usize) -> Result<Self> {
        let mut entries = Vec::with_capacity(self.entries.len() * times);
        for e in &self.entries {
            for k in 0..times {
                let mut path = e.path.clone().into_os_string();
                path.push(format!("#{k}"));
                entries.push(Entry {
                    image: e.image.clone(),
                    label: e.label.clone(),
                    path: path.into(),
                });
            }
        }
        Self::from_entries(entries)
    }

    /// The first `count` entries in dataset order.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        Self::from_entries(self.entries.iter().take(count).cloned().collect())
    }
}

/// Where a dataset comes from.
#[derive(Clone, Debug)]
pub enum DatasetSource {
    /// `root/<class_id>/<image files>`.
    Directory(PathBuf),
    /// CSV lines `relative_path,label`, paths relative to the manifest's directory.
    Manifest(PathBuf),
}

const IMAGE_EXTENSIONS: [&str; 3] = ["pgm", "pnm", "png"];

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

pub fn load_dataset(source: &DatasetSource) -> Result<LabeledDataset> {
    let listing = match source {
        DatasetSource::Directory(root) => list_directory(root)?,
        DatasetSource::Manifest(manifest) => list_manifest(manifest)?,
    };
    if listing.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let entries = listing
        .into_par_iter()
        .map(|(path, label)| {
            let image = load_image(&path)?;
            Ok(Entry { image, label, path })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::from_entries(entries)
}

fn list_directory(root: &Path) -> Result<Vec<(PathBuf, String)>> {
    let mut listing = Vec::new();
    for class_dir in fs::read_dir(root)? {
        let class_dir = class_dir?;
        if !class_dir.file_type()?.is_dir() {
            continue;
        }
        let label = class_dir.file_name().to_string_lossy().into_owned();
        for file in fs::read_dir(class_dir.path())? {
            let path = file?.path();
            if path.is_file() && has_image_extension(&path) {
                listing.push((path, label.clone()));
            }
        }
    }
    Ok(listing)
}

fn list_manifest(manifest: &Path) -> Result<Vec<(PathBuf, String)>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::UnreadableFile {
        path: manifest.to_owned(),
        reason: e.to_string(),
    })?;
    let base = manifest.parent().unwrap_or_else(|| Path::new(""));
    let mut seen = HashSet::new();
    let mut listing = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (rel, label) = line.rsplit_once(',').ok_or_else(|| Error::Manifest {
            line: i + 1,
            reason: "expected `relative_path,label`".into(),
        })?;
        let (rel, label) = (rel.trim(), label.trim());
        if rel.is_empty() || label.is_empty() {
            return Err(Error::Manifest {
                line: i + 1,
                reason: "empty path or label".into(),
            });
        }
        if !seen.insert(rel.to_owned()) {
            return Err(Error::DuplicatePath(rel.to_owned()));
        }
        listing.push((base.join(rel), label.to_owned()));
    }
    Ok(listing)
}

/// Seeded synthetic face stand-in.
///
/// Each class gets a smooth random base image (a few Gaussian blobs, an
/// oriented sinusoid and fixed fine texture). Variants add a small brightness
/// offset and ±2 pixel noise, so images of one class stay much closer to
/// each other than to other classes.
pub fn synth_dataset(
    classes: usize,
    per_class: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes == 0 || per_class == 0 || width == 0 || height == 0 {
        return Err(Error::InvalidArgument(
            "synthetic dataset counts and dimensions must be at least 1".into(),
        ));
    }
    let mut entries = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        let base = synth_base(&mut rng, width, height);
        for variant in 0..per_class {
            let offset: i32 = rng.random_range(-6..=6);
            let image = base.map(|p| {
                let jitter: i32 = rng.random_range(-2..=2);
                (i32::from(p) + offset + jitter).clamp(0, 255) as u8
            });
            entries.push(Entry {
                image,
                label: format!("{class:04}"),
                path: PathBuf::from(format!("synthetic/{class:04}/{variant:04}.pgm")),
            });
        }
    }
    LabeledDataset::from_entries(entries)
}

fn synth_base(rng: &mut ChaCha8Rng, width: usize, height: usize) -> GrayImage {
    let (w, h) = (width as f64, height as f64);
    let scale = w.max(h);
    let blobs: Vec<(f64, f64, f64, f64)> = (0..5)
        .map(|_| {
            let cx = rng.random_range(0.0..w);
            let cy = rng.random_range(0.0..h);
            let sigma = rng.random_range(scale / 10.0..scale / 3.0);
            let amp = rng.random_range(40.0..100.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (cx, cy, sigma, amp)
        })
        .collect();
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let freq = rng.random_range(1.0..4.0) * std::f64::consts::TAU / scale;
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let wave_amp = rng.random_range(15.0..35.0);
    let (dx, dy) = (angle.cos() * freq, angle.sin() * freq);

    GrayImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let mut v = 128.0 + wave_amp * (fx * dx + fy * dy + phase).sin();
        for &(cx, cy, sigma, amp) in &blobs {
            let d2 = (fx - cx).powi(2) + (fy - cy).powi(2);
            v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
        }
        v += f64::from(rng.random_range(-6i32..=6));
        v.round().clamp(0.0, 255.0) as u8
    })
}
