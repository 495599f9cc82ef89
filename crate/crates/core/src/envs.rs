//! Deterministic environments behind one [`Environment`] interface.
//!
//! [`Box2d`] is the continuous navigation box: the agent starts at the center
//! of `[0,1]^2`, moves by at most 0.05 per axis and is projected back onto the
//! box when it would leave it. [`GridWorld`] is a small discrete world whose
//! state space is tiny enough to enumerate in tests.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Index of a skill's goal-defining variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Goal(pub usize);

impl Goal {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for Goal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub step_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ActionSpec {
    ContinuousBox { low: Vec<f64>, high: Vec<f64> },
    Discrete { num_actions: usize },
}

impl ActionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ActionSpec::ContinuousBox { low, high } => {
                check_dim("action bounds", low.len(), high.len())?;
                if low.iter().zip(high).any(|(l, h)| !(l < h)) {
                    return Err(Error::contract("action bounds need low < high"));
                }
                Ok(())
            }
            ActionSpec::Discrete { num_actions } if *num_actions == 0 => {
                Err(Error::contract("discrete action space is empty"))
            }
            ActionSpec::Discrete { .. } => Ok(()),
        }
    }

    /// Clamps a continuous action into the box; discrete actions pass through.
    pub fn clamp(&self, action: &Action) -> Action {
        match (self, action) {
            (ActionSpec::ContinuousBox { low, high }, Action::Continuous(a)) => Action::Continuous(
                a.iter()
                    .zip(low.iter().zip(high))
                    .map(|(&v, (&l, &h))| v.clamp(l, h))
                    .collect(),
            ),
            _ => action.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

/// One environment step, carrying the intrinsic reward it earned.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub action: Action,
    pub next_state: EnvState,
    pub goal: Goal,
    pub reward: f64,
}

pub trait Environment: Send + Sync {
    fn observation_dim(&self) -> usize;
    fn action_spec(&self) -> ActionSpec;
    fn episode_len(&self) -> usize;
    fn reset(&self) -> EnvState;
    fn step(&self, state: &EnvState, action: &Action) -> Result<EnvState>;

    fn is_episode_over(&self, state: &EnvState) -> bool {
        state.step_index >= self.episode_len()
    }
}

pub const BOX2D_ACTION_LIMIT: f64 = 0.05;
pub const BOX2D_EPISODE_LEN: usize = 100;

pub fn box2d_reset() -> EnvState {
    EnvState {
        observation: vec![0.5, 0.5],
        step_index: 0,
    }
}

/// Applies an action, clamping it to `[-0.05, 0.05]^2` and the result to `[0,1]^2`.
pub fn box2d_step(state: &EnvState, action: &[f64]) -> EnvState {
    let observation = state
        .observation
        .iter()
        .zip(action)
        .map(|(&s, &a)| {
            let a = a.clamp(-BOX2D_ACTION_LIMIT, BOX2D_ACTION_LIMIT);
            (s + a).clamp(0.0, 1.0)
        })
        .collect();
    EnvState {
        observation,
        step_index: state.step_index + 1,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Box2d;

impl Environment for Box2d {
    fn observation_dim(&self) -> usize {
        2
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::ContinuousBox {
            low: vec![-BOX2D_ACTION_LIMIT; 2],
            high: vec![BOX2D_ACTION_LIMIT; 2],
        }
    }

    fn episode_len(&self) -> usize {
        BOX2D_EPISODE_LEN
    }

    fn reset(&self) -> EnvState {
        box2d_reset()
    }

    fn step(&self, state: &EnvState, action: &Action) -> Result<EnvState> {
        check_dim("box2d observation", 2, state.observation.len())?;
        match action {
            Action::Continuous(a) => {
                check_dim("box2d action", 2, a.len())?;
                if a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::contract("box2d action must be finite"));
                }
                Ok(box2d_step(state, a))
            }
            Action::Discrete(_) => Err(Error::contract("box2d takes continuous actions")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
        GridAction::Stay,
    ];

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::contract(format!("grid action index {index} out of range 0..5")))
    }

    fn delta(self) -> (isize, isize) {
        match self {
            GridAction::Up => (0, 1),
            GridAction::Down => (0, -1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
            GridAction::Stay => (0, 0),
        }
    }
}

/// `size x size` cells addressed as `(col, row)`, row increasing upward.
/// Observations are the cell coordinates divided by `size - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridWorld {
    size: usize,
    episode_len: usize,
}

impl Default for GridWorld {
    fn default() -> Self {
        Self {
            size: 9,
            episode_len: 100,
        }
    }
}

impl GridWorld {
    pub fn new(size: usize, episode_len: usize) -> Result<Self> {
        if size < 2 || episode_len == 0 {
            return Err(Error::contract("grid needs size >= 2 and episode_len >= 1"));
        }
        Ok(Self { size, episode_len })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn center(&self) -> (usize, usize) {
        (self.size / 2, self.size / 2)
    }

    pub fn state_at(&self, cell: (usize, usize), step_index: usize) -> EnvState {
        let scale = (self.size - 1) as f64;
        EnvState {
            observation: vec![cell.0 as f64 / scale, cell.1 as f64 / scale],
            step_index,
        }
    }

    pub fn cell_of(&self, state: &EnvState) -> Result<(usize, usize)> {
        check_dim("grid observation", 2, state.observation.len())?;
        let scale = (self.size - 1) as f64;
        let to_cell = |v: f64| -> Result<usize> {
            let c = (v * scale).round();
            if !(0.0..=scale).contains(&c) {
                return Err(Error::contract(format!("observation {v} is off the grid")));
            }
            Ok(c as usize)
        };
        Ok((
            to_cell(state.observation[0])?,
            to_cell(state.observation[1])?,
        ))
    }
}

/// Moves one cell in the chosen direction; walls block movement.
pub fn grid_step(grid: &GridWorld, state: &EnvState, action: usize) -> Result<EnvState> {
    let dir = GridAction::from_index(action)?;
    let (col, row) = grid.cell_of(state)?;
    let (dc, dr) = dir.delta();
    let max = grid.size as isize - 1;
    let col = (col as isize + dc).clamp(0, max) as usize;
    let row = (row as isize + dr).clamp(0, max) as usize;
    Ok(grid.state_at((col, row), state.step_index + 1))
}

impl Environment for GridWorld {
    fn observation_dim(&self) -> usize {
        2
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec::Discrete {
            num_actions: GridAction::ALL.len(),
        }
    }

    fn episode_len(&self) -> usize {
        self.episode_len
    }

    fn reset(&self) -> EnvState {
        self.state_at(self.center(), 0)
    }

    fn step(&self, state: &EnvState, action: &Action) -> Result<EnvState> {
        match action {
            Action::Discrete(a) => grid_step(self, state, *a),
            Action::Continuous(_) => Err(Error::contract("gridworld takes discrete actions")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Box2d,
    Gridworld,
}

impl EnvKind {
    pub fn build(self) -> Box<dyn Environment> {
        match self {
            EnvKind::Box2d => Box::new(Box2d),
            EnvKind::Gridworld => Box::new(GridWorld::default()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Box2d => "box2d",
            EnvKind::Gridworld => "gridworld",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "box2d" => Ok(EnvKind::Box2d),
            "gridworld" => Ok(EnvKind::Gridworld),
            other => Err(Error::Format {
                what: "environment name".into(),
                detail: format!("unknown environment {other:?} (expected box2d or gridworld)"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: f64, y: f64) -> EnvState {
        EnvState {
            observation: vec![x, y],
            step_index: 0,
        }
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn reset_is_the_box_center() {
        let s = box2d_reset();
        assert_eq!(s.observation, vec![0.5, 0.5]);
        assert_eq!(s.step_index, 0);
        assert_eq!(Box2d.reset(), box2d_reset());
    }

    #[test]
    fn interior_step_adds_the_action() {
        let s = box2d_step(&at(0.5, 0.5), &[0.05, 0.05]);
        assert!(close(&s.observation, &[0.55, 0.55]));
        assert_eq!(s.step_index, 1);
    }

    #[test]
    fn boundary_step_projects_onto_the_box() {
        let s = box2d_step(&at(0.98, 0.5), &[0.05, -0.05]);
        assert!(close(&s.observation, &[1.0, 0.45]));
        let corner = box2d_step(&at(0.0, 0.0), &[-0.05, -0.05]);
        assert_eq!(corner.observation, vec![0.0, 0.0]);
    }

    #[test]
    fn oversized_actions_are_clamped() {
        let s = box2d_step(&at(0.5, 0.5), &[3.0, -9.0]);
        assert!(close(&s.observation, &[0.55, 0.45]));
    }

    #[test]
    fn box2d_rejects_bad_actions() {
        let s = box2d_reset();
        assert!(Box2d.step(&s, &Action::Discrete(0)).is_err());
        assert!(Box2d.step(&s, &Action::Continuous(vec![0.0])).is_err());
        assert!(Box2d
            .step(&s, &Action::Continuous(vec![f64::NAN, 0.0]))
            .is_err());
    }

    #[test]
    fn episode_ends_after_100_steps() {
        let env = Box2d;
        let mut s = env.reset();
        let mut steps = 0;
        while !env.is_episode_over(&s) {
            s = env
                .step(&s, &Action::Continuous(vec![0.01, -0.01]))
                .unwrap();
            steps += 1;
        }
        assert_eq!(steps, 100);
    }

    #[test]
    fn grid_moves_and_walls() {
        let grid = GridWorld::default();
        let center = grid.reset();
        assert_eq!(grid.cell_of(&center).unwrap(), (4, 4));
        let stay = grid_step(&grid, &center, 4).unwrap();
        assert_eq!(grid.cell_of(&stay).unwrap(), (4, 4));
        let up = grid_step(&grid, &center, 0).unwrap();
        assert_eq!(grid.cell_of(&up).unwrap(), (4, 5));
        assert!(close(&up.observation, &[0.5, 0.625]));
        let origin = grid.state_at((0, 0), 0);
        let left = grid_step(&grid, &origin, 2).unwrap();
        assert_eq!(grid.cell_of(&left).unwrap(), (0, 0));
        let down = grid_step(&grid, &origin, 1).unwrap();
        assert_eq!(grid.cell_of(&down).unwrap(), (0, 0));
        assert!(grid_step(&grid, &center, 5).is_err());
    }

    #[test]
    fn grid_enumeration_stays_on_grid() {
        let grid = GridWorld::default();
        for col in 0..9 {
            for row in 0..9 {
                let s = grid.state_at((col, row), 0);
                for a in 0..5 {
                    let next = grid_step(&grid, &s, a).unwrap();
                    let (c, r) = grid.cell_of(&next).unwrap();
                    assert!(c < 9 && r < 9);
                    assert!(c.abs_diff(col) + r.abs_diff(row) <= 1);
                }
            }
        }
    }

    #[test]
    fn env_kind_parses() {
        assert_eq!("box2d".parse::<EnvKind>().unwrap(), EnvKind::Box2d);
        assert_eq!("gridworld".parse::<EnvKind>().unwrap(), EnvKind::Gridworld);
        assert!("mujoco".parse::<EnvKind>().is_err());
    }

    #[test]
    fn action_spec_clamps_and_validates() {
        let spec = Box2d.action_spec();
        spec.validate().unwrap();
        assert_eq!(
            spec.clamp(&Action::Continuous(vec![1.0, -0.01])),
            Action::Continuous(vec![0.05, -0.01])
        );
        let bad = ActionSpec::ContinuousBox {
            low: vec![1.0],
            high: vec![1.0],
        };
        assert!(bad.validate().is_err());
    }
}
