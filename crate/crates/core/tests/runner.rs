use std::path::Path;

use skillforge::envs::EnvKind;
use skillforge::goal_select::Strategy;
use skillforge::runner::{
    embed, metrics_header, plot, read_metrics, render_line_chart, run_training, sweep, train,
    EmbedOptions, RunConfig, Series, CONFIG_FILE, DISCRIMINATOR_FILE, METRICS_FILE, POLICY_FILE,
    SUMMARY_FILE,
};
use skillforge::Error;

fn small(strategy: Strategy, seed: u64) -> RunConfig {
    RunConfig {
        env: EnvKind::Gridworld,
        strategy,
        num_goals: 3,
        steps_per_epoch: 200,
        num_epochs: 6,
        eta: 10,
        tau: 20,
        seed,
        ..RunConfig::default()
    }
}

fn in_dir(mut cfg: RunConfig, dir: &Path) -> RunConfig {
    cfg.output_dir = Some(dir.join(cfg.run_name()));
    cfg
}

#[test]
fn uniform_keeps_every_goal_in_play() {
    let run = run_training(&small(Strategy::Uniform, 0)).unwrap();
    assert_eq!(run.records.len(), 6);
    for r in &run.records {
        assert!((r.eff_skills - 3.0).abs() < 1e-12);
        assert!(r.dp.is_none());
    }
}

#[test]
fn dp_initialisation_visits_each_goal_once() {
    let cfg = RunConfig {
        num_epochs: 1,
        ..small(Strategy::Dp, 4)
    };
    let run = run_training(&cfg).unwrap();
    assert_eq!(run.records.len(), 4);
    for (i, r) in run.records.iter().take(3).enumerate() {
        assert!(r.counts.iter().all(|&c| c <= 1));
        assert_eq!(r.counts.iter().sum::<u64>(), i as u64 + 1);
        assert!((r.eff_skills - (3 - i) as f64).abs() < 1e-12);
    }
    assert_eq!(run.records[2].counts, vec![1, 1, 1]);
}

#[test]
fn counts_track_the_epoch_index() {
    for strategy in [Strategy::Uniform, Strategy::Vic, Strategy::Dp] {
        let run = run_training(&small(strategy, 1)).unwrap();
        for r in &run.records {
            assert_eq!(r.counts.iter().sum::<u64>(), r.epoch as u64 + 1);
            assert_eq!(r.p_goal.len(), 3);
            assert!((r.p_goal.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sa = train(&in_dir(small(Strategy::Dp, 7), a.path())).unwrap();
    let sb = train(&in_dir(small(Strategy::Dp, 7), b.path())).unwrap();
    for file in [METRICS_FILE, DISCRIMINATOR_FILE, POLICY_FILE] {
        let x = std::fs::read(sa.run_dir.join(file)).unwrap();
        let y = std::fs::read(sb.run_dir.join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
    let config = |dir: &Path| {
        let mut cfg = RunConfig::load(&dir.join(CONFIG_FILE)).unwrap();
        cfg.output_dir = None;
        cfg
    };
    assert_eq!(config(&sa.run_dir), config(&sb.run_dir));
    let c = tempfile::tempdir().unwrap();
    let sc = train(&in_dir(small(Strategy::Dp, 8), c.path())).unwrap();
    assert_ne!(
        std::fs::read(sa.run_dir.join(METRICS_FILE)).unwrap(),
        std::fs::read(sc.run_dir.join(METRICS_FILE)).unwrap()
    );
}

#[test]
fn metrics_schema_is_shared_across_strategies() {
    let dir = tempfile::tempdir().unwrap();
    for (strategy, rows) in [
        (Strategy::Uniform, 6),
        (Strategy::Vic, 6),
        (Strategy::Dp, 9),
    ] {
        let summary = train(&in_dir(small(strategy, 2), dir.path())).unwrap();
        let path = summary.run_dir.join(METRICS_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, metrics_header(3).join(","));
        let records = read_metrics(&path).unwrap();
        assert_eq!(records.len(), rows);
        assert_eq!(
            records.iter().all(|r| r.dp.is_some()),
            strategy == Strategy::Dp
        );
        assert!(summary.run_dir.join(SUMMARY_FILE).exists());
    }
}

#[test]
fn invalid_config_lists_every_problem() {
    let cfg = RunConfig {
        num_goals: 1,
        tau: 0,
        temperature: -1.0,
        ..RunConfig::default()
    };
    match run_training(&cfg) {
        Err(Error::InvalidConfig(problems)) => assert!(problems.len() >= 3, "{problems:?}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn sweep_writes_run_and_summary_rows() {
    let dir = tempfile::tempdir().unwrap();
    let configs: Vec<RunConfig> = [Strategy::Uniform, Strategy::Dp]
        .into_iter()
        .flat_map(|s| (0..5).map(move |seed| small(s, seed)))
        .map(|cfg| {
            in_dir(
                RunConfig {
                    num_epochs: 2,
                    ..cfg
                },
                dir.path(),
            )
        })
        .collect();
    let aggregate = dir.path().join("aggregate.csv");
    let rows = sweep(&configs, &aggregate).unwrap();
    assert!(rows.iter().all(|r| r.outcome.is_ok()));
    let mut reader = csv::Reader::from_path(&aggregate).unwrap();
    let kinds: Vec<String> = reader
        .records()
        .map(|r| r.unwrap()[0].to_string())
        .collect();
    assert_eq!(kinds.iter().filter(|k| *k == "run").count(), 10);
    assert_eq!(kinds.iter().filter(|k| *k == "summary").count(), 2);
    assert!(sweep(&[], &aggregate).is_err());
}

#[test]
fn plot_and_embed_fill_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let summary = train(&in_dir(small(Strategy::Dp, 3), dir.path())).unwrap();
    let charts = plot(&summary.run_dir).unwrap();
    assert_eq!(charts.len(), 4);
    let opts = EmbedOptions {
        per_goal: 40,
        ..EmbedOptions::default()
    };
    let mut tsne = opts.tsne;
    tsne.max_iters = 300;
    let e = embed(&summary.run_dir, &EmbedOptions { tsne, ..opts }).unwrap();
    assert_eq!(e.rows, 120);
    assert!(e.final_kl <= e.initial_kl);
    assert!((0.0..=1.0).contains(&e.discriminability));
    let csv = std::fs::read_to_string(summary.run_dir.join("embedding.csv")).unwrap();
    assert_eq!(csv.lines().count(), 121);
    assert_eq!(plot(&summary.run_dir).unwrap().len(), 5);
}

#[test]
fn line_chart_matches_fixture() {
    let series = vec![
        Series {
            name: "dp".into(),
            points: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0), (3.0, 4.5)],
        },
        Series {
            name: "uniform & vic".into(),
            points: vec![(0.0, 2.0), (3.0, 2.0)],
        },
        Series {
            name: "single".into(),
            points: vec![(1.5, 0.5)],
        },
    ];
    let svg = render_line_chart("Effective skills", "epoch", "exp(H)", &series, Some(0.0));
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/line_chart.svg");
    if std::env::var_os("SKILLFORGE_BLESS").is_some() {
        std::fs::write(&fixture, &svg).unwrap();
    }
    assert_eq!(svg, std::fs::read_to_string(&fixture).unwrap());
}
