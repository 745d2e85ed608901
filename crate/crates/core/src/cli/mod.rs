//! Experiment runner behind the `fedadp` binary: loads a config, runs every
//! seed x strategy pair, and writes plot-ready CSV plus a JSON summary.
//!
//! Output files depend only on the config; `threads` changes wall time only.

mod config;
mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{DatasetConfig, ExperimentConfig, ModelConfig, PartitionConfig, TrainSection};
pub use output::{
    compare_csv, reduction_cell, reduction_table, rounds_cell, rounds_csv, summary_json,
    COMPARE_SCHEMA, ROUNDS_SCHEMA,
};

use crate::aggregation::StrategyTag;
use crate::data::{self, Dataset};
use crate::engine::{self, ExperimentResult};
use crate::error::{Error, Result};
use crate::metrics;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config_path: PathBuf,
    /// Overrides `output_dir` from the config.
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// One finished `(strategy, seed)` run.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub num_nodes: usize,
    pub result: ExperimentResult,
}

/// Median-over-seeds statistics for one strategy and target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSummary {
    pub median_rounds: Option<f64>,
    pub best_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub output_dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub summary: BTreeMap<StrategyTag, Vec<(f64, TargetSummary)>>,
    pub files: Vec<PathBuf>,
}

fn datasets(config: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    match &config.dataset {
        DatasetConfig::Synthetic {
            samples,
            test_samples,
            dim,
            classes,
            seed: data_seed,
        } => data::generate_synthetic_split(
            *samples,
            *test_samples,
            *dim,
            *classes,
            data_seed.unwrap_or(seed),
        ),
        DatasetConfig::Idx {
            images,
            labels,
            test_images,
            test_labels,
        } => {
            let train = data::load_idx(images, labels)?;
            let test = data::load_idx(test_images, test_labels)?;
            if test.input_dim() != train.input_dim() {
                return Err(Error::config(
                    "dataset.idx.test_images",
                    format!(
                        "image size {} differs from the training images ({})",
                        test.input_dim(),
                        train.input_dim()
                    ),
                ));
            }
            if test.num_classes() > train.num_classes() {
                return Err(Error::config(
                    "dataset.idx.test_labels",
                    "contains labels absent from the training labels",
                ));
            }
            let test = Dataset::new(
                test.features().to_vec(),
                test.input_dim(),
                test.labels().to_vec(),
                train.num_classes(),
            )?;
            Ok((train, test))
        }
    }
}

/// Run every `(strategy, seed)` pair listed by the config, in a thread pool
/// of `threads` workers (rayon's default when `None`).
pub fn execute(
    config: &ExperimentConfig,
    strategies: &[StrategyTag],
    threads: Option<usize>,
) -> Result<Vec<SeedRun>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::config("--threads", "must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("--threads", e.to_string()))?;

    // IDX data is shared by every seed; synthetic data may vary per seed.
    let shared = match config.dataset {
        DatasetConfig::Idx { .. } => Some(datasets(config, 0)?),
        DatasetConfig::Synthetic { seed: Some(s), .. } => Some(datasets(config, s)?),
        DatasetConfig::Synthetic { seed: None, .. } => None,
    };
    let jobs: Vec<(StrategyTag, u64)> = strategies
        .iter()
        .flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();

    pool.install(|| {
        jobs.par_iter()
            .map(|&(strategy, seed)| {
                let owned;
                let (train, test) = match &shared {
                    Some((train, test)) => (train, test),
                    None => {
                        owned = datasets(config, seed)?;
                        (&owned.0, &owned.1)
                    }
                };
                train.check_all_classes_present()?;
                let spec = config.model_spec(train.input_dim(), train.num_classes())?;
                let plan = config.plan(seed)?;
                let result = engine::run_experiment(
                    train,
                    test,
                    &plan,
                    &spec,
                    &config.train_config(strategy, seed),
                    &config.targets,
                )?;
                Ok(SeedRun {
                    seed,
                    num_nodes: plan.len(),
                    result,
                })
            })
            .collect()
    })
}

pub fn summarize(
    runs: &[SeedRun],
    targets: &[f64],
) -> BTreeMap<StrategyTag, Vec<(f64, TargetSummary)>> {
    let mut by_strategy: BTreeMap<StrategyTag, Vec<&SeedRun>> = BTreeMap::new();
    for run in runs {
        by_strategy.entry(run.result.strategy).or_default().push(run);
    }
    by_strategy
        .into_iter()
        .map(|(strategy, runs)| {
            let best: Vec<f64> = runs
                .iter()
                .map(|r| metrics::best_accuracy(&r.result.records))
                .collect();
            let best_accuracy = metrics::median(&best).unwrap_or(0.0);
            let per_target = targets
                .iter()
                .map(|&target| {
                    let rounds: Vec<Option<usize>> = runs
                        .iter()
                        .map(|r| metrics::rounds_to_target(&r.result.records, target))
                        .collect();
                    (
                        target,
                        TargetSummary {
                            median_rounds: metrics::median_rounds(&rounds),
                            best_accuracy,
                        },
                    )
                })
                .collect();
            (strategy, per_target)
        })
        .collect()
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

fn prepare(opts: &RunOptions) -> Result<(ExperimentConfig, PathBuf)> {
    let config = ExperimentConfig::load(&opts.config_path)?;
    let out = opts.out.clone().unwrap_or_else(|| config.output_dir.clone());
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok((config, out))
}

fn run_csv_path(out: &Path, strategy: StrategyTag, seed: u64) -> PathBuf {
    out.join(format!("{strategy}_seed{seed}.csv"))
}

/// `run` subcommand: one CSV per strategy and seed, plus `summary.json`.
pub fn run(opts: &RunOptions) -> Result<Report> {
    let (config, out) = prepare(opts)?;
    let runs = execute(&config, &config.strategies, opts.threads)?;
    let mut files = Vec::new();
    for run in &runs {
        let csv = rounds_csv(&run.result.records, run.result.strategy, run.seed, run.num_nodes);
        write(run_csv_path(&out, run.result.strategy, run.seed), &csv, &mut files)?;
    }
    let summary = summarize(&runs, &config.targets);
    write(out.join("summary.json"), &summary_json(&summary), &mut files)?;
    Ok(Report {
        output_dir: out,
        runs,
        summary,
        files,
    })
}

/// `compare` subcommand: both strategies on identical seeds, a side-by-side
/// curve CSV, the rounds-reduction table, and `summary.json`.
pub fn compare(opts: &RunOptions) -> Result<Report> {
    let (config, out) = prepare(opts)?;
    let runs = execute(&config, &[StrategyTag::FedAvg, StrategyTag::FedAdp], opts.threads)?;
    let mut files = Vec::new();
    write(out.join("compare.csv"), &compare_csv(&runs), &mut files)?;
    let summary = summarize(&runs, &config.targets);
    write(out.join("reduction.csv"), &reduction_table(&summary), &mut files)?;
    write(out.join("summary.json"), &summary_json(&summary), &mut files)?;
    Ok(Report {
        output_dir: out,
        runs,
        summary,
        files,
    })
}
