use std::path::Path;
use std::process::Command;

fn skillforge(args: &[&str], out_root: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_skillforge"))
        .args(args)
        .env("SKILLFORGE_OUT", out_root)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 10] = [
    "--set",
    "env=gridworld",
    "--set",
    "num_goals=3",
    "--set",
    "steps_per_epoch=200",
    "--set",
    "eta=10",
    "--set",
    "tau=20",
];

#[test]
fn train_writes_a_plotted_run_directory() {
    let root = tempfile::tempdir().unwrap();
    let mut args = vec![
        "train",
        "--quiet",
        "--seed",
        "3",
        "--strategy",
        "vic",
        "--set",
        "num_epochs=3",
    ];
    args.extend(SMALL);
    let out = skillforge(&args, root.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = root.path().join("gridworld-vic-seed3");
    for f in [
        "config.txt",
        "metrics.csv",
        "summary.json",
        "policy.skf",
        "discriminator.skf",
        "effective_skills.svg",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["epochs"], 3);

    let replot = skillforge(&["plot", run.to_str().unwrap()], root.path());
    assert!(replot.status.success());
    assert_eq!(String::from_utf8_lossy(&replot.stdout).lines().count(), 4);
}

#[test]
fn config_file_and_flags_combine() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("small.txt");
    std::fs::write(
        &cfg,
        "env=gridworld\nnum_goals=3\nsteps_per_epoch=100\neta=5\ntau=10\nnum_epochs=2\n",
    )
    .unwrap();
    let run = root.path().join("explicit");
    let out = skillforge(
        &[
            "train",
            "--quiet",
            "--no-plot",
            "--config",
            cfg.to_str().unwrap(),
            "--strategy",
            "uniform",
            "--out",
            run.to_str().unwrap(),
        ],
        root.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(text.contains("strategy=uniform"));
    assert!(text.contains("steps_per_epoch=100"));
    assert!(!run.join("effective_skills.svg").exists());
}

#[test]
fn sweep_writes_an_aggregate() {
    let root = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--seed",
        "0,1",
        "--strategy",
        "uniform,dp",
        "--set",
        "num_epochs=1",
    ];
    args.extend(SMALL);
    let out = skillforge(&args, root.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let aggregate = std::fs::read_to_string(root.path().join("aggregate.csv")).unwrap();
    assert_eq!(
        aggregate.lines().filter(|l| l.starts_with("run,")).count(),
        4
    );
    assert_eq!(
        aggregate
            .lines()
            .filter(|l| l.starts_with("summary,"))
            .count(),
        2
    );
}

#[test]
fn invalid_settings_fail_with_every_problem() {
    let root = tempfile::tempdir().unwrap();
    let out = skillforge(
        &["train", "--set", "num_goals=1", "--set", "temperature=0"],
        root.path(),
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("num_goals") && err.contains("temperature"),
        "{err}"
    );
}
