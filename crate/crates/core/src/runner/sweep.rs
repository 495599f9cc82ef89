use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::artifacts::format_g9;
use super::{median, train, write_file, RunConfig, RunSummary};

/// Outcome of one sweep entry; failures are kept, not propagated.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub config: RunConfig,
    pub outcome: std::result::Result<RunSummary, String>,
}

const AGGREGATE_HEADER: [&str; 14] = [
    "row",
    "env",
    "strategy",
    "seed",
    "status",
    "eff_skills",
    "mean_reward",
    "eff_skills_median",
    "eff_skills_min",
    "eff_skills_max",
    "mean_reward_median",
    "mean_reward_min",
    "mean_reward_max",
    "error",
];

/// Trains every config (concurrently, one run per worker) and writes
/// `aggregate_path`: one `run` row per config in input order, then one
/// `summary` row per (env, strategy) in order of first appearance.
pub fn sweep(configs: &[RunConfig], aggregate_path: &Path) -> Result<Vec<SweepRow>> {
    if configs.is_empty() {
        return Err(Error::contract("sweep needs at least one config"));
    }
    let rows: Vec<SweepRow> = configs
        .par_iter()
        .map(|cfg| SweepRow {
            config: cfg.clone(),
            outcome: train(cfg).map_err(|e| e.to_string()),
        })
        .collect();
    write_file(aggregate_path, &aggregate_csv(&rows)?)?;
    Ok(rows)
}

fn stats(values: &[f64]) -> [String; 3] {
    if values.is_empty() {
        return Default::default();
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [format_g9(median(values)), format_g9(min), format_g9(max)]
}

fn aggregate_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_HEADER)?;
    let mut groups: Vec<(String, String)> = Vec::new();
    for row in rows {
        let key = (
            row.config.env.name().to_string(),
            row.config.strategy.name().to_string(),
        );
        if !groups.contains(&key) {
            groups.push(key.clone());
        }
        let (status, eff, reward, error) = match &row.outcome {
            Ok(s) => (
                "ok",
                format_g9(s.final_eff_skills),
                format_g9(s.final_mean_reward),
                String::new(),
            ),
            Err(e) => ("error", String::new(), String::new(), e.clone()),
        };
        let mut rec = vec![
            "run".to_string(),
            key.0,
            key.1,
            row.config.seed.to_string(),
            status.into(),
            eff,
            reward,
        ];
        rec.extend(std::iter::repeat_n(String::new(), 6));
        rec.push(error);
        w.write_record(&rec)?;
    }
    for (env, strategy) in groups {
        let done: Vec<&RunSummary> = rows
            .iter()
            .filter(|r| r.config.env.name() == env && r.config.strategy.name() == strategy)
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect();
        let eff: Vec<f64> = done.iter().map(|s| s.final_eff_skills).collect();
        let reward: Vec<f64> = done.iter().map(|s| s.final_mean_reward).collect();
        let mut rec = vec![
            "summary".to_string(),
            env,
            strategy,
            String::new(),
            format!("{} ok", done.len()),
            String::new(),
            String::new(),
        ];
        rec.extend(stats(&eff));
        rec.extend(stats(&reward));
        rec.push(String::new());
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Format {
        what: "aggregate csv".into(),
        detail: e.to_string(),
    })
}
