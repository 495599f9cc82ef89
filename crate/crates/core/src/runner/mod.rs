//! Experiment orchestration: configuration, the training loop, run
//! directories, plots, multi-run sweeps and post-hoc embeddings.
//!
//! A run directory holds:
//!
//! | file | contents |
//! |------|----------|
//! | `config.txt` | the resolved [`RunConfig`] as `key=value` lines |
//! | `metrics.csv` | one [`EpochRecord`] per epoch |
//! | `discriminator.skf`, `policy.skf` | final parameters, `SKF1` format |
//! | `summary.json` | headline numbers |
//! | `*.svg` | written by [`plot`] |
//! | `embedding.csv`, `embedding.json` | written by [`embed`] |

mod artifacts;
mod config;
mod embed;
mod plot;
mod sweep;
mod training;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub use artifacts::{
    decode_checkpoint, encode_checkpoint, format_g9, metrics_header, read_checkpoint, read_metrics,
    write_checkpoint, write_metrics, EpochRecord,
};
pub use config::{output_root, RunConfig, OUTPUT_ROOT_VAR};
pub use embed::{embed, load_run, EmbedOptions, EmbedSummary};
pub use plot::{plot, render_line_chart, Series};
pub use sweep::{sweep, SweepRow};
pub use training::{
    build_models, build_selector, discriminator_spec, final_state_features, mean_state_features,
    models_from_params, policy_head, policy_spec, run_training, run_training_with, sample_rollouts,
    stream_rng, RngStream, Rollout, TrainedRun, DISC_BATCH, GRID_ACTIONS, REPLAY_CAPACITY,
};

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DISCRIMINATOR_FILE: &str = "discriminator.skf";
pub const POLICY_FILE: &str = "policy.skf";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub config: RunConfig,
    pub epochs: usize,
    pub final_eff_skills: f64,
    /// Median over epochs after the DP initialisation phase (all epochs for
    /// other strategies).
    pub median_eff_skills: f64,
    pub final_mean_reward: f64,
    pub final_disc_loss: f64,
    pub final_counts: Vec<u64>,
}

impl RunSummary {
    pub fn from_run(run: &TrainedRun, run_dir: PathBuf) -> Self {
        let skip = match run.config.strategy {
            crate::goal_select::Strategy::Dp => run.config.num_goals,
            _ => 0,
        };
        let post: Vec<f64> = run
            .records
            .iter()
            .skip(skip)
            .map(|r| r.eff_skills)
            .collect();
        let last = run.records.last().expect("a validated run has epochs");
        Self {
            run_dir,
            config: run.config.clone(),
            epochs: run.records.len(),
            final_eff_skills: last.eff_skills,
            median_eff_skills: median(&post),
            final_mean_reward: last.mean_reward,
            final_disc_loss: last.disc_loss,
            final_counts: last.counts.clone(),
        }
    }
}

/// Median of `values` (mean of the middle pair for even lengths); NaN when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Trains and writes the run directory.
pub fn train(config: &RunConfig) -> Result<RunSummary> {
    train_with(config, |_| {})
}

pub fn train_with(config: &RunConfig, on_epoch: impl FnMut(&EpochRecord)) -> Result<RunSummary> {
    config.validate()?;
    let run = run_training_with(config, on_epoch)?;
    let dir = config.run_dir();
    write_run(&run, &dir)
}

/// Writes every artifact of a finished run into `dir`.
pub fn write_run(run: &TrainedRun, dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(CONFIG_FILE), run.config.to_text().as_bytes())?;
    let mut csv = Vec::new();
    write_metrics(&mut csv, run.config.num_goals, &run.records)?;
    write_file(&dir.join(METRICS_FILE), &csv)?;
    write_checkpoint(&dir.join(DISCRIMINATOR_FILE), run.discriminator.params())?;
    write_checkpoint(&dir.join(POLICY_FILE), run.policy.params())?;
    let summary = RunSummary::from_run(run, dir.to_path_buf());
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write_file(&dir.join(SUMMARY_FILE), &json)?;
    Ok(summary)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
