use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::goal_select::Strategy;

/// Environment variable that replaces the default output root.
pub const OUTPUT_ROOT_VAR: &str = "SKILLFORGE_OUT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

/// Everything that determines a training run. Two equal configs produce
/// byte-identical artifacts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub env: EnvKind,
    pub strategy: Strategy,
    pub num_goals: usize,
    pub steps_per_epoch: usize,
    /// Epochs after the DP initialisation phase (which adds `num_goals` more).
    pub num_epochs: usize,
    pub eta: usize,
    pub tau: usize,
    pub temperature: f64,
    /// Gaussian components in the continuous-action policy.
    pub components: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub hidden_units: usize,
    pub policy_lr: f64,
    pub disc_lr: f64,
    pub seed: u64,
    /// Run directory. When unset, a name derived from env, strategy and seed
    /// is placed under the output root.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Box2d,
            strategy: Strategy::Dp,
            num_goals: 20,
            steps_per_epoch: 1000,
            num_epochs: 500,
            eta: 250,
            tau: 250,
            temperature: 0.1,
            components: 4,
            alpha: 0.1,
            gamma: 0.99,
            hidden_units: 32,
            policy_lr: 3e-4,
            disc_lr: 3e-4,
            seed: 0,
            output_dir: None,
        }
    }
}

const KEYS: [&str; 16] = [
    "env",
    "strategy",
    "num_goals",
    "steps_per_epoch",
    "num_epochs",
    "eta",
    "tau",
    "temperature",
    "components",
    "alpha",
    "gamma",
    "hidden_units",
    "policy_lr",
    "disc_lr",
    "seed",
    "output_dir",
];

impl RunConfig {
    /// Lists every violated invariant rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_goals < 2 {
            problems.push(format!("num_goals must be >= 2, got {}", self.num_goals));
        }
        let episode_len = self.env.build().episode_len();
        if self.steps_per_epoch == 0 || !self.steps_per_epoch.is_multiple_of(episode_len) {
            problems.push(format!(
                "steps_per_epoch must be a positive multiple of the episode length {episode_len}, got {}",
                self.steps_per_epoch
            ));
        }
        if self.num_epochs == 0 {
            problems.push("num_epochs must be >= 1".into());
        }
        if self.tau == 0 {
            problems.push("tau must be >= 1".into());
        }
        if self.tau + self.eta + 1 > self.steps_per_epoch {
            problems.push(format!(
                "tau + eta + 1 = {} exceeds steps_per_epoch = {}",
                self.tau + self.eta + 1,
                self.steps_per_epoch
            ));
        }
        for (name, value) in [
            ("temperature", self.temperature),
            ("policy_lr", self.policy_lr),
            ("disc_lr", self.disc_lr),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                problems.push(format!("{name} must be positive, got {value}"));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            problems.push(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            problems.push(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.components == 0 {
            problems.push("components must be >= 1".into());
        }
        if self.hidden_units == 0 {
            problems.push("hidden_units must be >= 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    pub fn run_name(&self) -> String {
        format!(
            "{}-{}-seed{}",
            self.env.name(),
            self.strategy.name(),
            self.seed
        )
    }

    pub fn run_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(dir) => dir.clone(),
            None => output_root().join(self.run_name()),
        }
    }

    /// Total epochs including the DP initialisation phase.
    pub fn total_epochs(&self) -> usize {
        match self.strategy {
            Strategy::Dp => self.num_epochs + self.num_goals,
            _ => self.num_epochs,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |detail: String| Error::Format {
            what: format!("config value for {key}"),
            detail,
        };
        fn num<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value.parse::<T>().map_err(|e| format!("{value:?}: {e}"))
        }
        match key {
            "env" => self.env = value.parse()?,
            "strategy" => self.strategy = value.parse()?,
            "num_goals" => self.num_goals = num(value).map_err(bad)?,
            "steps_per_epoch" => self.steps_per_epoch = num(value).map_err(bad)?,
            "num_epochs" => self.num_epochs = num(value).map_err(bad)?,
            "eta" => self.eta = num(value).map_err(bad)?,
            "tau" => self.tau = num(value).map_err(bad)?,
            "temperature" => self.temperature = num(value).map_err(bad)?,
            "components" => self.components = num(value).map_err(bad)?,
            "alpha" => self.alpha = num(value).map_err(bad)?,
            "gamma" => self.gamma = num(value).map_err(bad)?,
            "hidden_units" => self.hidden_units = num(value).map_err(bad)?,
            "policy_lr" => self.policy_lr = num(value).map_err(bad)?,
            "disc_lr" => self.disc_lr = num(value).map_err(bad)?,
            "seed" => self.seed = num(value).map_err(bad)?,
            "output_dir" => {
                self.output_dir = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            other => {
                return Err(Error::Format {
                    what: "config key".into(),
                    detail: format!("unknown key {other:?} (known: {})", KEYS.join(", ")),
                })
            }
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
                what: "config line".into(),
                detail: format!("line {}: expected key=value, got {line:?}", lineno + 1),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Serialises every field, one `key=value` per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        line("env", self.env.name().into());
        line("strategy", self.strategy.name().into());
        line("num_goals", self.num_goals.to_string());
        line("steps_per_epoch", self.steps_per_epoch.to_string());
        line("num_epochs", self.num_epochs.to_string());
        line("eta", self.eta.to_string());
        line("tau", self.tau.to_string());
        line("temperature", self.temperature.to_string());
        line("components", self.components.to_string());
        line("alpha", self.alpha.to_string());
        line("gamma", self.gamma.to_string());
        line("hidden_units", self.hidden_units.to_string());
        line("policy_lr", self.policy_lr.to_string());
        line("disc_lr", self.disc_lr.to_string());
        line("seed", self.seed.to_string());
        line(
            "output_dir",
            self.output_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        out
    }
}

/// `$SKILLFORGE_OUT` when set and nonempty, else `runs`.
pub fn output_root() -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUTPUT_ROOT),
    }
}
