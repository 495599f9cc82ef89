use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{effective_num_skills, trajectory_feature, FeatureMatrix};
use crate::discriminator::{prediction_errors, Discriminator, ReplayBuffer};
use crate::envs::{Action, EnvKind, Goal, Transition, BOX2D_ACTION_LIMIT};
use crate::error::Result;
use crate::goal_select::{DpState, ErrorBuffer, GoalSelector, Strategy, VicState};
use crate::numkit::{MlpSpec, Optimizer, ParamVector};
use crate::policy::{intrinsic_reward, Policy, PolicyHead};

use super::artifacts::EpochRecord;
use super::config::RunConfig;

pub const REPLAY_CAPACITY: usize = 10_000;
pub const DISC_BATCH: usize = 64;
pub const GRID_ACTIONS: usize = 5;

/// RNG streams derived from the run seed, so evaluation draws never shift
/// the training sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RngStream {
    Training = 0,
    Rollouts = 1,
    Heldout = 2,
    Embedding = 3,
}

pub fn stream_rng(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn policy_head(config: &RunConfig) -> PolicyHead {
    match config.env {
        EnvKind::Box2d => PolicyHead::Gmm {
            components: config.components,
            action_dim: 2,
        },
        EnvKind::Gridworld => PolicyHead::Categorical {
            num_actions: GRID_ACTIONS,
        },
    }
}

pub fn discriminator_spec(config: &RunConfig) -> MlpSpec {
    let obs_dim = config.env.build().observation_dim();
    MlpSpec::new(obs_dim, &[config.hidden_units], config.num_goals)
}

pub fn policy_spec(config: &RunConfig) -> MlpSpec {
    let obs_dim = config.env.build().observation_dim();
    MlpSpec::new(
        obs_dim + config.num_goals,
        &[config.hidden_units],
        policy_head(config).output_dim(),
    )
}

/// Freshly initialised discriminator and policy, drawn in that order.
pub fn build_models<R: Rng + ?Sized>(
    config: &RunConfig,
    rng: &mut R,
) -> Result<(Discriminator, Policy)> {
    let obs_dim = config.env.build().observation_dim();
    let disc = Discriminator::new(
        obs_dim,
        config.num_goals,
        &[config.hidden_units],
        Optimizer::adam(config.disc_lr),
        rng,
    )?;
    let policy = Policy::new(
        obs_dim,
        config.num_goals,
        policy_head(config),
        &[config.hidden_units],
        Optimizer::adam(config.policy_lr),
        BOX2D_ACTION_LIMIT.ln(),
        rng,
    )?;
    Ok((disc, policy))
}

pub fn models_from_params(
    config: &RunConfig,
    disc_params: ParamVector,
    policy_params: ParamVector,
) -> Result<(Discriminator, Policy)> {
    let obs_dim = config.env.build().observation_dim();
    let disc = Discriminator::from_params(
        discriminator_spec(config),
        disc_params,
        Optimizer::adam(config.disc_lr),
    )?;
    let policy = Policy::from_params(
        obs_dim,
        config.num_goals,
        policy_head(config),
        policy_spec(config),
        policy_params,
        Optimizer::adam(config.policy_lr),
    )?;
    Ok((disc, policy))
}

pub fn build_selector(config: &RunConfig) -> Result<GoalSelector> {
    Ok(match config.strategy {
        Strategy::Uniform => GoalSelector::Uniform {
            num_goals: config.num_goals,
        },
        Strategy::Vic => GoalSelector::Vic(VicState::new(
            config.num_goals,
            VicState::DEFAULT_LR,
            VicState::DEFAULT_EMA_DECAY,
        )?),
        Strategy::Dp => GoalSelector::Dp(DpState::new(
            config.num_goals,
            config.eta,
            config.tau,
            config.temperature,
            config.steps_per_epoch,
        )?),
    })
}

/// In-memory outcome of a run.
#[derive(Clone, Debug)]
pub struct TrainedRun {
    pub config: RunConfig,
    pub records: Vec<EpochRecord>,
    pub discriminator: Discriminator,
    pub policy: Policy,
    pub selector: GoalSelector,
}

pub fn run_training(config: &RunConfig) -> Result<TrainedRun> {
    run_training_with(config, |_| {})
}

/// Trains per `config`, calling `on_epoch` after each epoch's record is made.
pub fn run_training_with(
    config: &RunConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainedRun> {
    config.validate()?;
    let env = config.env.build();
    let spec = env.action_spec();
    let g_count = config.num_goals;
    let mut rng = stream_rng(config.seed, RngStream::Training);
    let (mut disc, mut policy) = build_models(config, &mut rng)?;
    let mut selector = build_selector(config)?;
    let mut replay = ReplayBuffer::new(REPLAY_CAPACITY, env.observation_dim())?;
    let mut errors = ErrorBuffer::new(g_count, config.steps_per_epoch)?;
    let mut counts = vec![0u64; g_count];
    let mut records = Vec::with_capacity(config.total_epochs());
    let episodes = config.steps_per_epoch / env.episode_len();
    let tracks_errors = config.strategy == Strategy::Dp;

    for epoch in 0..config.total_epochs() {
        let p_select = selector.selection_distribution();
        let prior = selector.goal_prior();
        let goal = selector.select_goal(&mut rng);
        let p_prior = prior[goal.index()];
        counts[goal.index()] += 1;
        errors.clear();

        let mut reward_sum = 0.0;
        let mut loss_sum = 0.0;
        for _ in 0..episodes {
            let mut state = env.reset();
            let mut episode = Vec::with_capacity(env.episode_len());
            while !env.is_episode_over(&state) {
                let action = policy.sample_action(&state.observation, goal, &mut rng)?;
                let next = env.step(&state, &spec.clamp(&action))?;
                let q = disc.predict(&next.observation)?;
                if tracks_errors {
                    errors.push(&prediction_errors(&q, goal)?)?;
                }
                let reward = intrinsic_reward(q[goal.index()], p_prior)?;
                reward_sum += reward;
                replay.push(&next.observation, goal)?;
                loss_sum += disc.update(&replay.sample(&mut rng, DISC_BATCH))?;
                // store the unclamped draw
                episode.push(Transition {
                    state: std::mem::replace(&mut state, next.clone()),
                    action,
                    next_state: next,
                    goal,
                    reward,
                });
            }
            policy.policy_update(&[episode], config.alpha, config.gamma)?;
        }

        let steps = config.steps_per_epoch as f64;
        let mean_reward = reward_sum / steps;
        selector.end_epoch(&errors, goal, mean_reward)?;
        let record = EpochRecord {
            epoch,
            goal: goal.index(),
            eff_skills: effective_num_skills(&p_select)?,
            mean_reward,
            disc_loss: loss_sum / steps,
            dp: selector.dp().map(<[f64]>::to_vec),
            p_goal: p_select,
            counts: counts.clone(),
        };
        on_epoch(&record);
        records.push(record);
    }

    Ok(TrainedRun {
        config: config.clone(),
        records,
        discriminator: disc,
        policy,
        selector,
    })
}

/// Observations visited by one evaluation episode, excluding the start state.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub goal: Goal,
    pub observations: Vec<Vec<f64>>,
}

/// `per_goal` episodes for every goal, goal-major, with frozen parameters.
pub fn sample_rollouts<R: Rng + ?Sized>(
    policy: &Policy,
    env: EnvKind,
    per_goal: usize,
    rng: &mut R,
) -> Result<Vec<Rollout>> {
    let env = env.build();
    let spec = env.action_spec();
    let mut out = Vec::with_capacity(per_goal * policy.num_goals());
    for g in 0..policy.num_goals() {
        for _ in 0..per_goal {
            let mut state = env.reset();
            let mut observations = Vec::with_capacity(env.episode_len());
            while !env.is_episode_over(&state) {
                let action: Action = policy.sample_action(&state.observation, Goal(g), rng)?;
                state = env.step(&state, &spec.clamp(&action))?;
                observations.push(state.observation.clone());
            }
            out.push(Rollout {
                goal: Goal(g),
                observations,
            });
        }
    }
    Ok(out)
}

/// Trajectory-mean features, the input to the t-SNE figure.
pub fn mean_state_features(rollouts: &[Rollout]) -> Result<FeatureMatrix> {
    let rows = rollouts
        .iter()
        .map(|r| trajectory_feature(&r.observations))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(rows, rollouts.iter().map(|r| r.goal).collect())
}

/// Final-state features, the input to the discriminability score.
pub fn final_state_features(rollouts: &[Rollout]) -> Result<FeatureMatrix> {
    let rows = rollouts
        .iter()
        .map(|r| {
            r.observations
                .last()
                .cloned()
                .ok_or_else(|| crate::error::Error::contract("rollout has no observations"))
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(rows, rollouts.iter().map(|r| r.goal).collect())
}
