mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use ldgp_core::{
    benchmark, evaluate_loo, evaluate_split_kfold, extract_features, load_dataset, noise_sweep,
    synth_dataset, write_timing_csv, DatasetSource, Descriptor, FeatureConfig, FeatureFile,
    LabeledDataset,
};

use crate::args::{Cli, Command, DatasetArgs, FeatureArgs, RunArgs};

/// Failures split by exit status: bad flags exit 2, everything else 1.
enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

impl From<ldgp_core::Error> for Failure {
    fn from(e: ldgp_core::Error) -> Self {
        Failure::Run(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => Cli::command().error(ErrorKind::InvalidValue, msg).exit(),
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Extract { data, feature, run } => {
            let (dataset, config) = prepare(&data, &feature, feature.descriptor, &run)?;
            let features = extract_features(&dataset, &config)?;
            let file = FeatureFile::new(&config, &dataset, &features)?;
            write_output(&run, |out| file.write_json(out))?;
            summary(
                &run,
                format!(
                    "extracted {} features of length {} ({} order {}, grid {}x{}, {} bins)",
                    features.len(),
                    config.feature_len(),
                    config.descriptor,
                    config.order,
                    config.grid_rows,
                    config.grid_cols,
                    config.bins
                ),
            );
        }
        Command::EvalLoo { data, feature, run } => {
            let (dataset, config) = prepare(&data, &feature, feature.descriptor, &run)?;
            let report = evaluate_loo(&dataset, &config)?;
            write_output(&run, |out| report.write_csv(&dataset, out))?;
            summary(
                &run,
                format!(
                    "gamma={:.4} Nm={} Nt={}",
                    report.recognition_rate(),
                    report.matches(),
                    report.total()
                ),
            );
        }
        Command::EvalSplit {
            data,
            feature,
            run,
            probe_fraction,
            folds,
        } => {
            if !(probe_fraction > 0.0 && probe_fraction < 1.0) {
                return Err(usage(format!(
                    "--probe-fraction must lie strictly between 0 and 1, got {probe_fraction}"
                )));
            }
            if folds == 0 {
                return Err(usage("--folds must be at least 1"));
            }
            let (dataset, config) = prepare(&data, &feature, feature.descriptor, &run)?;
            let report = evaluate_split_kfold(&dataset, &config, probe_fraction, folds, data.seed)?;
            write_output(&run, |out| report.write_csv(&dataset, out))?;
            let per_fold: Vec<String> = report
                .folds
                .iter()
                .map(|f| format!("{:.2}", f.recognition_rate()))
                .collect();
            summary(
                &run,
                format!(
                    "gamma={:.4} over {folds} folds [{}]",
                    report.average_rate(),
                    per_fold.join(" ")
                ),
            );
        }
        Command::BenchTime {
            data,
            feature,
            run,
            descriptors,
            reps,
        } => {
            if reps == 0 {
                return Err(usage("--reps must be at least 1"));
            }
            let (dataset, configs) = prepare_many(&data, &feature, &descriptors, &run)?;
            let mut rows = Vec::new();
            for config in &configs {
                rows.push(benchmark(&dataset, config, reps, 1)?);
            }
            if run.threads > 1 {
                for config in &configs {
                    rows.push(benchmark(&dataset, config, reps, run.threads)?);
                }
            }
            write_output(&run, |out| write_timing_csv(&rows, out))?;
            let parts: Vec<String> = rows
                .iter()
                .map(|r| {
                    format!(
                        "{}[{}t] t_e={:.4}s t_m={:.4}s",
                        r.descriptor, r.threads, r.extraction_seconds, r.match_seconds
                    )
                })
                .collect();
            summary(&run, parts.join(" | "));
        }
        Command::BenchNoise {
            data,
            feature,
            run,
            descriptors,
            variances,
        } => {
            if let Some(v) = variances.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(usage(format!("noise variance must be non-negative, got {v}")));
            }
            let (dataset, configs) = prepare_many(&data, &feature, &descriptors, &run)?;
            let mut rows = Vec::new();
            for config in &configs {
                for point in noise_sweep(&dataset, config, &variances, data.seed)? {
                    rows.push((config, point));
                }
            }
            write_output(&run, |out| {
                let mut csv = csv::Writer::from_writer(out);
                csv.write_record(["descriptor", "order", "variance", "gamma"])
                    .map_err(ldgp_core::Error::from)?;
                for (config, point) in &rows {
                    csv.write_record([
                        config.descriptor.name().to_owned(),
                        config.order.to_string(),
                        point.variance.to_string(),
                        format!("{:.4}", point.rate),
                    ])
                    .map_err(ldgp_core::Error::from)?;
                }
                csv.flush()?;
                Ok(())
            })?;
            let parts: Vec<String> = rows
                .iter()
                .map(|(c, p)| format!("{}@{}={:.2}", c.descriptor, p.variance, p.rate))
                .collect();
            summary(&run, parts.join(" "));
        }
    }
    Ok(())
}

fn prepare(
    data: &DatasetArgs,
    feature: &FeatureArgs,
    descriptor: Descriptor,
    run: &RunArgs,
) -> Result<(LabeledDataset, FeatureConfig), Failure> {
    let (dataset, mut configs) = prepare_many(data, feature, &[descriptor], run)?;
    Ok((dataset, configs.remove(0)))
}

/// Validates flags, sets up the worker pool and loads the dataset.
fn prepare_many(
    data: &DatasetArgs,
    feature: &FeatureArgs,
    descriptors: &[Descriptor],
    run: &RunArgs,
) -> Result<(LabeledDataset, Vec<FeatureConfig>), Failure> {
    if run.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    if descriptors.is_empty() {
        return Err(usage("no descriptors given"));
    }
    // Validate everything that does not depend on image size up front.
    let mut configs = descriptors
        .iter()
        .map(|&d| {
            FeatureConfig::new(d, feature.order, feature.grid.0, feature.grid.1, feature.bins)
                .map_err(|e| usage(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    rayon::ThreadPoolBuilder::new()
        .num_threads(run.threads)
        .build_global()
        .context("configuring worker threads")?;

    let dataset = load(data)?;
    if let Some(tile) = feature.tile {
        let (w, h) = dataset.entries()[0].image.dimensions();
        if dataset.images().any(|img| img.dimensions() != (w, h)) {
            return Err(usage("--tile needs every image to have the same size; use --grid"));
        }
        let rows = (h / tile.1).max(1);
        let cols = (w / tile.0).max(1);
        for config in &mut configs {
            *config = FeatureConfig::new(config.descriptor, config.order, rows, cols, config.bins)
                .map_err(|e| usage(e.to_string()))?;
        }
    }
    for img in dataset.images() {
        for config in &configs {
            config
                .check_dimensions(img.width(), img.height())
                .map_err(|e| usage(e.to_string()))?;
        }
    }
    Ok((dataset, configs))
}

fn load(data: &DatasetArgs) -> anyhow::Result<LabeledDataset> {
    if let Some(counts) = data.synthetic {
        let ds = synth_dataset(counts.0, counts.1, data.size.0, data.size.1, data.seed)?;
        return Ok(ds);
    }
    let source = match (&data.manifest, &data.dataset) {
        (Some(manifest), _) => DatasetSource::Manifest(manifest.clone()),
        (None, Some(dir)) => DatasetSource::Directory(dir.clone()),
        (None, None) => bail!("one of --dataset, --manifest or --synthetic is required"),
    };
    let ds = load_dataset(&source).with_context(|| format!("loading {}", describe(&source)))?;
    Ok(ds)
}

fn describe(source: &DatasetSource) -> String {
    match source {
        DatasetSource::Directory(p) | DatasetSource::Manifest(p) => display(p),
    }
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn write_output(
    run: &RunArgs,
    write: impl FnOnce(&mut dyn Write) -> ldgp_core::Result<()>,
) -> anyhow::Result<()> {
    match &run.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", display(path)))?;
            let mut out = BufWriter::new(file);
            write(&mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            write(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

/// One-line summary: stdout when results go to a file, stderr otherwise.
fn summary(run: &RunArgs, line: String) {
    if run.out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}
