//! L1 matching, 1-NN classification and evaluation protocols.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feature::{extract_features, FeatureConfig, FeatureVector};
use crate::image::LabeledDataset;

/// Integer element types L1 distances can be taken over.
pub trait AbsDiff: Copy {
    fn abs_diff_u64(self, other: Self) -> u64;

    /// `Σ |x_i − y_i|` over equal-length slices.
    fn l1(x: &[Self], y: &[Self]) -> u64;
}

macro_rules! abs_diff_impl {
    // Up to 32 bits: a u64 sum cannot overflow for any realistic length.
    (narrow: $($t:ty)*) => ($(
        impl AbsDiff for $t {
            #[inline]
            fn abs_diff_u64(self, other: Self) -> u64 {
                u64::from(self.abs_diff(other))
            }

            #[inline]
            fn l1(x: &[Self], y: &[Self]) -> u64 {
                x.iter().zip(y).map(|(&a, &b)| u64::from(a.abs_diff(b))).sum()
            }
        }
    )*);
    (wide: $($t:ty)*) => ($(
        impl AbsDiff for $t {
            #[inline]
            fn abs_diff_u64(self, other: Self) -> u64 {
                self.abs_diff(other) as u64
            }

            fn l1(x: &[Self], y: &[Self]) -> u64 {
                x.iter()
                    .zip(y)
                    .fold(0u64, |acc, (&a, &b)| acc.saturating_add(a.abs_diff(b) as u64))
            }
        }
    )*);
}

abs_diff_impl!(narrow: u8 u16 u32 i8 i16 i32);
abs_diff_impl!(wide: u64 i64 usize isize);

/// `Σ |x_i − y_i|` in exact integer arithmetic. Sums over 64-bit elements
/// saturate at `u64::MAX`.
pub fn l1_distance<T: AbsDiff>(x: &[T], y: &[T]) -> Result<u64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    Ok(T::l1(x, y))
}

/// Enrolled features with their class labels.
#[derive(Clone, Debug)]
pub struct Gallery {
    features: Vec<FeatureVector>,
    labels: Vec<String>,
}

impl Gallery {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<String>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch(features.len(), labels.len()));
        }
        if let Some(first) = features.first() {
            for f in &features[1..] {
                if f.config() != first.config() {
                    return Err(Error::InvalidArgument(
                        "gallery features come from different configurations".into(),
                    ));
                }
                if f.len() != first.len() {
                    return Err(Error::LengthMismatch(first.len(), f.len()));
                }
            }
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Result of one 1-NN lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Match {
    pub label: String,
    pub index: usize,
    pub distance: u64,
}

/// Nearest gallery entry by L1 distance; ties go to the lowest index.
pub fn nn_classify(probe: &FeatureVector, gallery: &Gallery) -> Result<Match> {
    let (index, distance) = nearest(
        probe.values(),
        gallery
            .features
            .iter()
            .map(FeatureVector::values)
            .enumerate(),
    )?;
    Ok(Match {
        label: gallery.labels[index].clone(),
        index,
        distance,
    })
}

/// Argmin over `(index, vector)` candidates with lowest-index tie-break.
pub(crate) fn nearest<'a>(
    probe: &[u32],
    candidates: impl Iterator<Item = (usize, &'a [u32])>,
) -> Result<(usize, u64)> {
    let mut best: Option<(usize, u64)> = None;
    for (i, v) in candidates {
        if v.len() != probe.len() {
            return Err(Error::LengthMismatch(probe.len(), v.len()));
        }
        let d = u32::l1(probe, v);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.ok_or(Error::EmptyGallery)
}

/// One probe's outcome. Indices refer to dataset entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub probe: usize,
    pub matched: usize,
    pub distance: u64,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalReport {
    pub decisions: Vec<Decision>,
}

impl EvalReport {
    /// Probes whose nearest neighbor shares their class.
    pub fn matches(&self) -> usize {
        self.decisions.iter().filter(|d| d.correct).count()
    }

    pub fn total(&self) -> usize {
        self.decisions.len()
    }

    /// `100 × matches / total`.
    pub fn recognition_rate(&self) -> f64 {
        recognition_rate(self.matches(), self.total())
    }

    /// Per-probe rows followed by the `#gamma` summary line.
    pub fn write_csv<W: Write>(&self, dataset: &LabeledDataset, out: W) -> Result<()> {
        write_eval_csv(
            dataset,
            &self.decisions,
            self.recognition_rate(),
            self.matches(),
            self.total(),
            out,
        )
    }
}

pub fn recognition_rate(matches: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    100.0 * matches as f64 / total as f64
}

/// Writes per-probe decisions and a trailing `#gamma,<value>,Nm,<int>,Nt,<int>` line.
pub fn write_eval_csv<W: Write>(
    dataset: &LabeledDataset,
    decisions: &[Decision],
    gamma: f64,
    matches: usize,
    total: usize,
    out: W,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record([
        "probe_path",
        "probe_label",
        "match_path",
        "match_label",
        "distance",
        "correct",
    ])?;
    let entries = dataset.entries();
    for d in decisions {
        let (probe, matched) = (&entries[d.probe], &entries[d.matched]);
        csv.write_record([
            probe.path.to_string_lossy().as_ref(),
            &probe.label,
            matched.path.to_string_lossy().as_ref(),
            &matched.label,
            &d.distance.to_string(),
            if d.correct { "1" } else { "0" },
        ])?;
    }
    csv.write_record([
        "#gamma",
        &format!("{gamma:.4}"),
        "Nm",
        &matches.to_string(),
        "Nt",
        &total.to_string(),
    ])?;
    csv.flush()?;
    Ok(())
}

/// Classifies each probe against the gallery subset; runs on the current rayon pool.
fn classify_subset(
    features: &[FeatureVector],
    labels: &[&str],
    probes: &[usize],
    gallery: &[usize],
) -> Result<EvalReport> {
    let decisions = probes
        .par_iter()
        .map(|&p| {
            let candidates = gallery
                .iter()
                .filter(|&&g| g != p)
                .map(|&g| (g, features[g].values()));
            let (matched, distance) = nearest(features[p].values(), candidates)?;
            Ok(Decision {
                probe: p,
                matched,
                distance,
                correct: labels[matched] == labels[p],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport { decisions })
}

/// Leave-one-out over precomputed features.
pub fn evaluate_loo_features(features: &[FeatureVector], labels: &[&str]) -> Result<EvalReport> {
    if features.len() < 2 {
        return Err(Error::TooFewImages {
            needed: 2,
            found: features.len(),
        });
    }
    let all: Vec<usize> = (0..features.len()).collect();
    classify_subset(features, labels, &all, &all)
}

/// Every image probes against all remaining images.
pub fn evaluate_loo(dataset: &LabeledDataset, config: &FeatureConfig) -> Result<EvalReport> {
    if dataset.image_count() < 2 {
        return Err(Error::TooFewImages {
            needed: 2,
            found: dataset.image_count(),
        });
    }
    let features = extract_features(dataset, config)?;
    let labels: Vec<&str> = dataset.labels().collect();
    evaluate_loo_features(&features, &labels)
}

/// Per-fold reports of a probe/gallery split evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitReport {
    pub folds: Vec<EvalReport>,
}

impl SplitReport {
    /// Mean of the per-fold recognition rates.
    pub fn average_rate(&self) -> f64 {
        let sum: f64 = self.folds.iter().map(EvalReport::recognition_rate).sum();
        sum / self.folds.len() as f64
    }

    /// All folds' rows in fold order, then the averaged `#gamma` line with
    /// summed match and probe counts.
    pub fn write_csv<W: Write>(&self, dataset: &LabeledDataset, out: W) -> Result<()> {
        let decisions: Vec<Decision> = self
            .folds
            .iter()
            .flat_map(|f| f.decisions.iter().copied())
            .collect();
        let matches = self.folds.iter().map(EvalReport::matches).sum();
        write_eval_csv(
            dataset,
            &decisions,
            self.average_rate(),
            matches,
            decisions.len(),
            out,
        )
    }
}

/// Number of probes drawn from each class.
///
/// The total is `round(fraction × Γ)`. Each class first gets
/// `floor(fraction × w_i)`; the remainder goes to the classes with the
/// largest fractional parts, skipping classes that would lose their last
/// gallery image.
pub fn probe_quotas(class_sizes: &[(&str, usize)], fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "probe fraction {fraction} must lie strictly between 0 and 1"
        )));
    }
    let total: usize = class_sizes.iter().map(|&(_, n)| n).sum();
    let target = (fraction * total as f64).round() as usize;
    if target == 0 {
        return Err(Error::InvalidArgument(format!(
            "probe fraction {fraction} selects no probes from {total} images"
        )));
    }
    let mut quotas: Vec<usize> = class_sizes
        .iter()
        .map(|&(_, n)| (fraction * n as f64).floor() as usize)
        .collect();
    let mut remaining = target - quotas.iter().sum::<usize>();

    let mut order: Vec<usize> = (0..class_sizes.len()).collect();
    let frac = |i: usize| {
        let exact = fraction * class_sizes[i].1 as f64;
        exact - exact.floor()
    };
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for &i in &order {
        if remaining == 0 {
            break;
        }
        if quotas[i] + 1 < class_sizes[i].1 {
            quotas[i] += 1;
            remaining -= 1;
        }
    }
    if remaining > 0 {
        let full = order
            .iter()
            .find(|&&i| quotas[i] + 1 >= class_sizes[i].1)
            .map_or_else(String::new, |&i| class_sizes[i].0.to_owned());
        return Err(Error::EmptyGalleryClass(full));
    }
    Ok(quotas)
}

/// Stratified random probe/gallery splits averaged over `folds` draws.
///
/// Each fold shuffles every class independently and takes that class's
/// quota of probes; the rest of the dataset forms the gallery. The shuffles
/// come from one ChaCha8 stream seeded with `seed`, consumed fold by fold.
pub fn evaluate_split_kfold(
    dataset: &LabeledDataset,
    config: &FeatureConfig,
    probe_fraction: f64,
    folds: usize,
    seed: u64,
) -> Result<SplitReport> {
    if folds == 0 {
        return Err(Error::InvalidArgument(
            "fold count must be at least 1".into(),
        ));
    }
    let classes = dataset.class_indices();
    let sizes: Vec<(&str, usize)> = classes.iter().map(|(l, m)| (*l, m.len())).collect();
    let quotas = probe_quotas(&sizes, probe_fraction)?;

    let features = extract_features(dataset, config)?;
    let labels: Vec<&str> = dataset.labels().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(folds);
    for _ in 0..folds {
        let mut is_probe = vec![false; dataset.image_count()];
        for ((_, members), &quota) in classes.iter().zip(&quotas) {
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            for &i in &shuffled[..quota] {
                is_probe[i] = true;
            }
        }
        let (probes, gallery): (Vec<usize>, Vec<usize>) =
            (0..dataset.image_count()).partition(|&i| is_probe[i]);
        reports.push(classify_subset(&features, &labels, &probes, &gallery)?);
    }
    Ok(SplitReport { folds: reports })
}
