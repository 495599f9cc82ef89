use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use skillforge::analysis::TsneConfig;
use skillforge::envs::EnvKind;
use skillforge::goal_select::Strategy;
use skillforge::runner::{self, EmbedOptions, RunConfig};

#[derive(Parser)]
#[command(
    name = "skillforge",
    version,
    about = "Skill discovery with learned goal selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write its run directory (metrics, checkpoints, plots).
    Train(TrainArgs),
    /// Render SVG charts for an existing run directory.
    Plot { run_dir: PathBuf },
    /// Train every combination of seeds, strategies and environments.
    Sweep(SweepArgs),
    /// Sample episodes from a trained run and embed them with t-SNE.
    Embed(EmbedArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    env: Option<EnvKind>,
    /// Skip chart rendering.
    #[arg(long)]
    no_plot: bool,
    /// Suppress per-epoch progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seed: Vec<u64>,
    /// Comma-separated strategies.
    #[arg(long, value_delimiter = ',', default_value = "dp,uniform,vic")]
    strategy: Vec<Strategy>,
    /// Comma-separated environments; defaults to the config's.
    #[arg(long, value_delimiter = ',')]
    env: Vec<EnvKind>,
    /// Root directory for run directories and `aggregate.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    run_dir: PathBuf,
    /// Evaluation episodes per skill.
    #[arg(long, default_value_t = 100)]
    per_goal: usize,
    #[arg(long, default_value_t = TsneConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = TsneConfig::default().perplexity)]
    perplexity: f64,
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects key=value, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output_dir = Some(out);
    }
    if let Some(s) = args.strategy {
        cfg.strategy = s;
    }
    if let Some(e) = args.env {
        cfg.env = e;
    }
    cfg.validate()?;
    let total = cfg.total_epochs();
    let quiet = args.quiet;
    let summary = runner::train_with(&cfg, |r| {
        if !quiet {
            eprintln!(
                "epoch {:>5}/{total}  goal {:>3}  eff_skills {:>7.3}  reward {:>8.4}  disc_loss {:>7.4}",
                r.epoch + 1,
                r.goal,
                r.eff_skills,
                r.mean_reward,
                r.disc_loss
            );
        }
    })?;
    if !args.no_plot {
        runner::plot(&summary.run_dir)?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let base = base_config(&args.common)?;
    let root = args.out.unwrap_or_else(runner::output_root);
    let envs = if args.env.is_empty() {
        vec![base.env]
    } else {
        args.env
    };
    let mut configs = Vec::new();
    for &env in &envs {
        for &strategy in &args.strategy {
            for &seed in &args.seed {
                let mut cfg = RunConfig {
                    env,
                    strategy,
                    seed,
                    ..base.clone()
                };
                cfg.output_dir = Some(root.join(cfg.run_name()));
                configs.push(cfg);
            }
        }
    }
    std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    let aggregate = root.join("aggregate.csv");
    let rows = runner::sweep(&configs, &aggregate)?;
    let failed: Vec<_> = rows.iter().filter(|r| r.outcome.is_err()).collect();
    for row in &failed {
        eprintln!(
            "run {} failed: {}",
            row.config.run_name(),
            row.outcome
                .as_ref()
                .err()
                .map(String::as_str)
                .unwrap_or_default()
        );
    }
    println!("{}", aggregate.display());
    if !failed.is_empty() {
        bail!("{} of {} runs failed", failed.len(), rows.len());
    }
    Ok(())
}

fn embed(args: EmbedArgs) -> Result<()> {
    let opts = EmbedOptions {
        per_goal: args.per_goal,
        tsne: TsneConfig {
            max_iters: args.max_iters,
            perplexity: args.perplexity,
            ..TsneConfig::default()
        },
    };
    let summary = runner::embed(&args.run_dir, &opts)?;
    runner::plot(&args.run_dir)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Plot { run_dir } => runner::plot(&run_dir)
            .map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
            })
            .map_err(Into::into),
        Command::Sweep(a) => sweep(a),
        Command::Embed(a) => embed(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
