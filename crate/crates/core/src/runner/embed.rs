use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{discriminability_score, tsne_embed, TsneConfig};
use crate::discriminator::Discriminator;
use crate::error::Result;
use crate::policy::Policy;

use super::artifacts::{format_g9, read_checkpoint};
use super::plot::EMBEDDING_CSV;
use super::training::{
    final_state_features, mean_state_features, models_from_params, sample_rollouts, stream_rng,
    RngStream,
};
use super::{write_file, RunConfig, CONFIG_FILE, DISCRIMINATOR_FILE, POLICY_FILE};

pub const EMBEDDING_JSON: &str = "embedding.json";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmbedOptions {
    /// Evaluation episodes per skill.
    pub per_goal: usize,
    /// t-SNE settings; the seed is replaced by the run's seed.
    pub tsne: TsneConfig,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            per_goal: 100,
            tsne: TsneConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbedSummary {
    pub run_dir: PathBuf,
    pub rows: usize,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub iterations: usize,
    /// Held-out accuracy of the run's discriminator on final states of
    /// fresh episodes.
    pub discriminability: f64,
}

/// Reloads a run's config and final models.
pub fn load_run(run_dir: &Path) -> Result<(RunConfig, Discriminator, Policy)> {
    let config = RunConfig::load(&run_dir.join(CONFIG_FILE))?;
    let disc = read_checkpoint(&run_dir.join(DISCRIMINATOR_FILE))?;
    let policy = read_checkpoint(&run_dir.join(POLICY_FILE))?;
    let (disc, policy) = models_from_params(&config, disc, policy)?;
    Ok((config, disc, policy))
}

/// Samples evaluation episodes from a finished run, embeds their trajectory
/// means with t-SNE and writes `embedding.csv` (`skill,x,y`) and
/// `embedding.json`.
pub fn embed(run_dir: &Path, opts: &EmbedOptions) -> Result<EmbedSummary> {
    let (config, disc, policy) = load_run(run_dir)?;

    let mut rng = stream_rng(config.seed, RngStream::Embedding);
    let rollouts = sample_rollouts(&policy, config.env, opts.per_goal, &mut rng)?;
    let features = mean_state_features(&rollouts)?;
    let tsne = TsneConfig {
        seed: config.seed,
        ..opts.tsne
    };
    let result = tsne_embed(&features, &tsne)?;

    let mut heldout_rng = stream_rng(config.seed, RngStream::Heldout);
    let heldout = sample_rollouts(&policy, config.env, opts.per_goal, &mut heldout_rng)?;
    let discriminability = discriminability_score(&disc, &final_state_features(&heldout)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["skill", "x", "y"])?;
    for (label, y) in features.labels().iter().zip(&result.embedding) {
        w.write_record([label.index().to_string(), format_g9(y[0]), format_g9(y[1])])?;
    }
    let csv = w.into_inner().map_err(|e| crate::error::Error::Format {
        what: "embedding csv".into(),
        detail: e.to_string(),
    })?;
    write_file(&run_dir.join(EMBEDDING_CSV), &csv)?;

    let summary = EmbedSummary {
        run_dir: run_dir.to_path_buf(),
        rows: features.len(),
        initial_kl: result.initial_kl,
        final_kl: result.final_kl,
        iterations: result.iterations,
        discriminability,
    };
    let mut json = serde_json::to_vec_pretty(&summary)?;
    json.push(b'\n');
    write_file(&run_dir.join(EMBEDDING_JSON), &json)?;
    Ok(summary)
}
