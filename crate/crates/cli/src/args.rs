use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use ldgp_core::Descriptor;

/// LDGP face descriptors: feature extraction, recognition evaluation and benchmarks.
#[derive(Debug, Parser)]
#[command(name = "ldgp", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract spatial histogram features of every dataset image to JSON.
    Extract {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        feature: FeatureArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Leave-one-out 1-NN evaluation; writes per-probe CSV with a gamma summary line.
    EvalLoo {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        feature: FeatureArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Stratified random probe/gallery splits averaged over several folds.
    EvalSplit {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        feature: FeatureArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Fraction of each class drawn as probes, strictly between 0 and 1.
        #[arg(long, default_value_t = 0.5)]
        probe_fraction: f64,
        /// Number of random splits to average.
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Median extraction and LOO match times per descriptor.
    BenchTime {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        feature: FeatureArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Descriptors to time, comma separated (overrides --descriptor).
        #[arg(long, value_delimiter = ',', default_value = "ldgp,ldp")]
        descriptors: Vec<Descriptor>,
        /// Timed repetitions per measurement; the median is reported.
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Recognition rate of noisy probes against the clean gallery.
    BenchNoise {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        feature: FeatureArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Descriptors to sweep, comma separated (overrides --descriptor).
        #[arg(long, value_delimiter = ',', default_value = "ldgp")]
        descriptors: Vec<Descriptor>,
        /// Gaussian noise variances in intensity², comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        variances: Vec<f64>,
    },
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset root laid out as <root>/<class>/<image>.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// CSV manifest of `relative_path,label` lines; takes precedence over --dataset.
    #[arg(long, value_name = "CSV")]
    pub manifest: Option<PathBuf>,
    /// Generate a synthetic dataset of CLASSESxPER_CLASS images instead.
    #[arg(long, value_name = "CxN", conflicts_with_all = ["dataset", "manifest"])]
    pub synthetic: Option<Pair>,
    /// Synthetic image size.
    #[arg(long, value_name = "WxH", default_value = "64x64")]
    pub size: Pair,
    /// Seed for synthetic data, splits and noise.
    #[arg(long, env = "LDGP_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[arg(long, default_value = "ldgp")]
    pub descriptor: Descriptor,
    /// Pattern order n (derivatives of order n-1); ignored by LBP.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Region grid as ROWSxCOLS region counts.
    #[arg(long, value_name = "RxC", default_value = "4x4", conflicts_with = "tile")]
    pub grid: Pair,
    /// Region size in pixels as WxH; converted to grid counts per image size.
    #[arg(long, value_name = "WxH")]
    pub tile: Option<Pair>,
    /// Histogram bins per region and code image (power of two).
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads for extraction and evaluation.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

/// Two positive integers written `AxB`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair(pub usize, pub usize);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected AxB, got `{s}`"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("`{v}` is not a positive integer"))
        };
        Ok(Pair(parse(a)?, parse(b)?))
    }
}
