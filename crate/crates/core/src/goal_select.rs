//! Goal-selection strategies.
//!
//! * **Uniform**: every goal with probability `1/|G|`.
//! * **VIC**: a categorical prior whose logits are reinforced by the epoch's
//!   intrinsic return (REINFORCE on the chosen goal, EMA baseline).
//! * **Diversity Progress (DP)**: during each epoch the per-step prediction
//!   errors of every goal are stored in an [`ErrorBuffer`]. At the end of the
//!   epoch the learning progress of each goal is the drop between two smoothed
//!   windows `tau` steps apart; the mean (normalised) progress over *all*
//!   goals is credited to the goal that was pursued. Selection probabilities
//!   are `softmax(dp / temperature)`. The first `|G|` epochs visit every goal
//!   once, in random order, before the softmax takes over.
//!
//! Step indices passed to [`window_mean_errors`] are 1-based positions within
//! the current epoch: row `t` is the error vector observed after the `t`-th
//! environment step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Goal;
use crate::error::{check_dim, Error, Result};
use crate::numkit::{sample_categorical, softmax};

/// Ring buffer of per-step error vectors, one row per step, one column per goal.
#[derive(Clone, Debug)]
pub struct ErrorBuffer {
    num_goals: usize,
    capacity: usize,
    rows: Vec<f64>,
    written: usize,
}

impl ErrorBuffer {
    pub fn new(num_goals: usize, capacity: usize) -> Result<Self> {
        if num_goals == 0 || capacity == 0 {
            return Err(Error::contract(
                "error buffer needs goals and capacity >= 1",
            ));
        }
        Ok(Self {
            num_goals,
            capacity,
            rows: vec![0.0; num_goals * capacity],
            written: 0,
        })
    }

    pub fn num_goals(&self) -> usize {
        self.num_goals
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of rows pushed since the last [`ErrorBuffer::clear`].
    pub fn steps_written(&self) -> usize {
        self.written
    }

    pub fn is_full(&self) -> bool {
        self.written >= self.capacity
    }

    pub fn clear(&mut self) {
        self.written = 0;
    }

    pub fn push(&mut self, errors: &[f64]) -> Result<()> {
        check_dim("error row", self.num_goals, errors.len())?;
        if let Some(bad) = errors.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::contract(format!(
                "prediction error {bad} outside [0, 1]"
            )));
        }
        let slot = self.written % self.capacity;
        self.rows[slot * self.num_goals..(slot + 1) * self.num_goals].copy_from_slice(errors);
        self.written += 1;
        Ok(())
    }

    /// Error vector of 1-based step `step`, if it is still buffered.
    pub fn row(&self, step: usize) -> Option<&[f64]> {
        let oldest = self.written.saturating_sub(self.capacity) + 1;
        if step < oldest || step > self.written {
            return None;
        }
        let slot = (step - 1) % self.capacity;
        Some(&self.rows[slot * self.num_goals..(slot + 1) * self.num_goals])
    }
}

/// Smoothed errors at `t+1` and at `t+1-tau`, each averaged over `eta + 1` steps.
pub fn window_mean_errors(
    buf: &ErrorBuffer,
    t_plus_1: usize,
    eta: usize,
    tau: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let earliest = t_plus_1
        .checked_sub(tau + eta)
        .filter(|&s| s >= 1)
        .ok_or_else(|| {
            Error::contract(format!(
                "step {t_plus_1} lacks history for tau={tau}, eta={eta}"
            ))
        })?;
    if buf.row(earliest).is_none() || buf.row(t_plus_1).is_none() {
        return Err(Error::contract(format!(
            "steps {earliest}..={t_plus_1} are not all buffered"
        )));
    }
    let window = |end: usize| -> Vec<f64> {
        let mut acc = vec![0.0; buf.num_goals];
        for i in 0..=eta {
            let row = buf.row(end - i).expect("range checked above");
            acc.iter_mut().zip(row).for_each(|(a, e)| *a += e);
        }
        let n = (eta + 1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    };
    Ok((window(t_plus_1), window(t_plus_1 - tau)))
}

/// `then - now` per goal: positive when errors fell.
pub fn lp_per_goal(means_now: &[f64], means_then: &[f64]) -> Result<Vec<f64>> {
    check_dim(
        "learning-progress inputs",
        means_now.len(),
        means_then.len(),
    )?;
    Ok(means_then
        .iter()
        .zip(means_now)
        .map(|(then, now)| then - now)
        .collect())
}

/// Mean learning progress over goals after scaling by the largest magnitude.
/// Lies in `[-1, 1]`; all-zero progress maps to zero.
pub fn diversity_progress(lp: &[f64]) -> f64 {
    if lp.is_empty() {
        return 0.0;
    }
    let max_abs = lp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return 0.0;
    }
    lp.iter().map(|v| v / max_abs).sum::<f64>() / lp.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct DpState {
    dp: Vec<f64>,
    p_goal: Vec<f64>,
    eta: usize,
    tau: usize,
    temperature: f64,
    /// Goals not yet visited during initialisation, ascending.
    init_remaining: Vec<Goal>,
}

impl DpState {
    pub fn new(
        num_goals: usize,
        eta: usize,
        tau: usize,
        temperature: f64,
        steps_per_epoch: usize,
    ) -> Result<Self> {
        validate_dp_params(num_goals, eta, tau, temperature, steps_per_epoch)?;
        Ok(Self {
            dp: vec![0.0; num_goals],
            p_goal: vec![1.0 / num_goals as f64; num_goals],
            eta,
            tau,
            temperature,
            init_remaining: (0..num_goals).map(Goal).collect(),
        })
    }

    /// A state whose initialisation phase is already complete.
    pub fn with_dp(dp: Vec<f64>, eta: usize, tau: usize, temperature: f64) -> Result<Self> {
        if dp.is_empty() || dp.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("dp vector must be nonempty and finite"));
        }
        let p_goal = softmax_dp(&dp, temperature)?;
        Ok(Self {
            dp,
            p_goal,
            eta,
            tau,
            temperature,
            init_remaining: Vec::new(),
        })
    }

    pub fn dp(&self) -> &[f64] {
        &self.dp
    }

    /// The learned goal distribution (uniform until initialisation ends).
    pub fn p_goal(&self) -> &[f64] {
        &self.p_goal
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn in_init_phase(&self) -> bool {
        !self.init_remaining.is_empty()
    }

    /// Distribution the next goal will be drawn from.
    pub fn selection_distribution(&self) -> Vec<f64> {
        if self.init_remaining.is_empty() {
            return self.p_goal.clone();
        }
        let mut p = vec![0.0; self.dp.len()];
        let share = 1.0 / self.init_remaining.len() as f64;
        for g in &self.init_remaining {
            p[g.index()] = share;
        }
        p
    }

    pub fn select_goal<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Goal {
        if self.init_remaining.is_empty() {
            Goal(sample_categorical(&self.p_goal, rng))
        } else {
            let i = rng.random_range(0..self.init_remaining.len());
            self.init_remaining.remove(i)
        }
    }

    /// Credits this epoch's diversity progress to `pursued`. Once every goal
    /// has been visited, renormalises `p_goal`. Returns the credited value.
    pub fn dp_epoch_update(&mut self, buf: &ErrorBuffer, pursued: Goal) -> Result<f64> {
        if pursued.index() >= self.dp.len() {
            return Err(Error::contract(format!(
                "pursued goal {pursued} out of range for {} goals",
                self.dp.len()
            )));
        }
        check_dim("error buffer goals", self.dp.len(), buf.num_goals())?;
        if !buf.is_full() {
            return Err(Error::contract(format!(
                "dp update needs a full epoch, buffer holds {} of {} steps",
                buf.steps_written(),
                buf.capacity()
            )));
        }
        let (now, then) = window_mean_errors(buf, buf.steps_written(), self.eta, self.tau)?;
        let value = diversity_progress(&lp_per_goal(&now, &then)?);
        self.dp[pursued.index()] = value;
        if self.init_remaining.is_empty() {
            self.p_goal = softmax_dp(&self.dp, self.temperature)?;
        }
        Ok(value)
    }
}

fn softmax_dp(dp: &[f64], temperature: f64) -> Result<Vec<f64>> {
    softmax(dp, temperature)
}

pub fn validate_dp_params(
    num_goals: usize,
    eta: usize,
    tau: usize,
    temperature: f64,
    steps_per_epoch: usize,
) -> Result<()> {
    let mut problems = Vec::new();
    if num_goals == 0 {
        problems.push("num_goals must be >= 1".to_string());
    }
    if tau < 1 {
        problems.push("tau must be >= 1".to_string());
    }
    if tau + eta + 1 > steps_per_epoch {
        problems.push(format!(
            "tau + eta + 1 = {} exceeds steps_per_epoch = {steps_per_epoch}",
            tau + eta + 1
        ));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        problems.push(format!("temperature must be positive, got {temperature}"));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(problems))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VicState {
    logits: Vec<f64>,
    lr: f64,
    ema_decay: f64,
    baseline: Option<f64>,
}

impl VicState {
    pub const DEFAULT_LR: f64 = 0.1;
    pub const DEFAULT_EMA_DECAY: f64 = 0.9;

    pub fn new(num_goals: usize, lr: f64, ema_decay: f64) -> Result<Self> {
        if num_goals == 0 {
            return Err(Error::contract("VIC needs at least one goal"));
        }
        if !(lr > 0.0) || !(0.0..1.0).contains(&ema_decay) {
            return Err(Error::contract("VIC needs lr > 0 and ema_decay in [0, 1)"));
        }
        Ok(Self {
            logits: vec![0.0; num_goals],
            lr,
            ema_decay,
            baseline: None,
        })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    pub fn p_goal(&self) -> Vec<f64> {
        softmax(&self.logits, 1.0).expect("VIC logits stay finite")
    }

    /// Moves the chosen goal's logit by `lr * (return - baseline)`, then folds
    /// the return into the EMA baseline. The first return seeds the baseline.
    pub fn vic_update(&mut self, goal: Goal, epoch_return: f64) -> Result<()> {
        if goal.index() >= self.logits.len() {
            return Err(Error::contract(format!("goal {goal} out of range")));
        }
        if !epoch_return.is_finite() {
            return Err(Error::contract("VIC return must be finite"));
        }
        let baseline = self.baseline.unwrap_or(epoch_return);
        self.logits[goal.index()] += self.lr * (epoch_return - baseline);
        self.baseline = Some(self.ema_decay * baseline + (1.0 - self.ema_decay) * epoch_return);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Uniform,
    Vic,
    Dp,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Vic => "vic",
            Strategy::Dp => "dp",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(Strategy::Uniform),
            "vic" => Ok(Strategy::Vic),
            "dp" => Ok(Strategy::Dp),
            other => Err(Error::Format {
                what: "strategy name".into(),
                detail: format!("unknown strategy {other:?} (expected uniform, vic or dp)"),
            }),
        }
    }
}

/// A goal-selection strategy together with its state.
#[derive(Clone, Debug, PartialEq)]
pub enum GoalSelector {
    Uniform { num_goals: usize },
    Vic(VicState),
    Dp(DpState),
}

impl GoalSelector {
    pub fn strategy(&self) -> Strategy {
        match self {
            GoalSelector::Uniform { .. } => Strategy::Uniform,
            GoalSelector::Vic(_) => Strategy::Vic,
            GoalSelector::Dp(_) => Strategy::Dp,
        }
    }

    pub fn num_goals(&self) -> usize {
        match self {
            GoalSelector::Uniform { num_goals } => *num_goals,
            GoalSelector::Vic(v) => v.logits.len(),
            GoalSelector::Dp(d) => d.dp.len(),
        }
    }

    pub fn select_goal<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Goal {
        match self {
            GoalSelector::Uniform { num_goals } => Goal(rng.random_range(0..*num_goals)),
            GoalSelector::Vic(v) => Goal(sample_categorical(&v.p_goal(), rng)),
            GoalSelector::Dp(d) => d.select_goal(rng),
        }
    }

    /// Distribution the next goal will be drawn from.
    pub fn selection_distribution(&self) -> Vec<f64> {
        match self {
            GoalSelector::Uniform { num_goals } => vec![1.0 / *num_goals as f64; *num_goals],
            GoalSelector::Vic(v) => v.p_goal(),
            GoalSelector::Dp(d) => d.selection_distribution(),
        }
    }

    /// `p(g)`, the goal prior used in the intrinsic reward.
    pub fn goal_prior(&self) -> Vec<f64> {
        match self {
            GoalSelector::Dp(d) => d.p_goal.clone(),
            other => other.selection_distribution(),
        }
    }

    pub fn dp(&self) -> Option<&[f64]> {
        match self {
            GoalSelector::Dp(d) => Some(&d.dp),
            _ => None,
        }
    }

    pub fn in_init_phase(&self) -> bool {
        matches!(self, GoalSelector::Dp(d) if d.in_init_phase())
    }

    /// Epoch-end bookkeeping for the pursued goal.
    pub fn end_epoch(&mut self, buf: &ErrorBuffer, pursued: Goal, epoch_return: f64) -> Result<()> {
        match self {
            GoalSelector::Uniform { .. } => Ok(()),
            GoalSelector::Vic(v) => v.vic_update(pursued, epoch_return),
            GoalSelector::Dp(d) => d.dp_epoch_update(buf, pursued).map(|_| ()),
        }
    }
}
