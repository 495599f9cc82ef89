//! Goal-conditioned stochastic policy and its on-policy trainer.
//!
//! An MLP maps `observation ++ one_hot(goal)` to the parameters of the action
//! distribution. Continuous environments use a diagonal Gaussian mixture: for
//! each of the `K` components the network emits a log-weight, a mean vector
//! and a log-std vector, in that order. Discrete environments use a softmax
//! over action logits.
//!
//! Training is REINFORCE with a batch-mean baseline. The per-step reward is
//! the intrinsic reward plus `alpha * -log pi(a|s,g)`, a single-sample
//! estimate of the policy entropy.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::envs::{Action, Goal, Transition};
use crate::error::{check_dim, Error, Result};
use crate::numkit::{
    log_sum_exp, optimizer_step, sample_categorical, softmax, ForwardTrace, MlpSpec, OptState,
    Optimizer, ParamVector,
};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Lower bound on `q(g|s)` before taking its log in the intrinsic reward.
pub const Q_PROB_FLOOR: f64 = 1e-6;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `log q(g|s') - log p(g)`, with `q` floored at [`Q_PROB_FLOOR`].
pub fn intrinsic_reward(q_prob: f64, p_prob: f64) -> Result<f64> {
    if !(p_prob > 0.0 && p_prob <= 1.0 + 1e-12) {
        return Err(Error::contract(format!(
            "goal probability must lie in (0, 1], got {p_prob}"
        )));
    }
    if !(0.0..=1.0 + 1e-12).contains(&q_prob) {
        return Err(Error::contract(format!(
            "discriminator probability must lie in [0, 1], got {q_prob}"
        )));
    }
    let q = q_prob.max(Q_PROB_FLOOR);
    let ratio = q / p_prob;
    if (0.5..=2.0).contains(&ratio) {
        // exact sign near q == p
        Ok(((q - p_prob) / p_prob).ln_1p())
    } else {
        Ok(q.ln() - p_prob.ln())
    }
}

/// Diagonal Gaussian mixture over `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gmm {
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    log_stds: Vec<Vec<f64>>,
}

impl Gmm {
    /// `weight_logits` are normalised with a softmax.
    pub fn new(
        weight_logits: &[f64],
        means: Vec<Vec<f64>>,
        log_stds: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = weight_logits.len();
        if k == 0 {
            return Err(Error::contract("mixture needs at least one component"));
        }
        check_dim("mixture means", k, means.len())?;
        check_dim("mixture log-stds", k, log_stds.len())?;
        let dim = means[0].len();
        for (m, s) in means.iter().zip(&log_stds) {
            check_dim("component mean", dim, m.len())?;
            check_dim("component log-std", dim, s.len())?;
        }
        let lse = log_sum_exp(weight_logits);
        Ok(Self {
            log_weights: weight_logits.iter().map(|l| l - lse).collect(),
            means,
            log_stds,
        })
    }

    pub fn num_components(&self) -> usize {
        self.log_weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn log_stds(&self) -> &[Vec<f64>] {
        &self.log_stds
    }

    fn component_log_density(&self, k: usize, a: &[f64]) -> f64 {
        self.means[k]
            .iter()
            .zip(&self.log_stds[k])
            .zip(a)
            .map(|((&mu, &ls), &x)| {
                let z = (x - mu) * (-ls).exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum()
    }

    fn joint_log_terms(&self, a: &[f64]) -> Vec<f64> {
        (0..self.num_components())
            .map(|k| self.log_weights[k] + self.component_log_density(k, a))
            .collect()
    }

    pub fn log_density(&self, a: &[f64]) -> Result<f64> {
        check_dim("mixture action", self.dim(), a.len())?;
        Ok(log_sum_exp(&self.joint_log_terms(a)))
    }

    pub fn density(&self, a: &[f64]) -> Result<f64> {
        Ok(self.log_density(a)?.exp())
    }

    /// Posterior probability of each component having produced `a`.
    pub fn responsibilities(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_dim("mixture action", self.dim(), a.len())?;
        let terms = self.joint_log_terms(a);
        let lse = log_sum_exp(&terms);
        Ok(terms.iter().map(|t| (t - lse).exp()).collect())
    }

    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.weights(), rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.sample_component(rng);
        self.means[k]
            .iter()
            .zip(&self.log_stds[k])
            .map(|(&mu, &ls)| {
                let eps: f64 = StandardNormal.sample(rng);
                mu + ls.exp() * eps
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyHead {
    Gmm {
        components: usize,
        action_dim: usize,
    },
    Categorical {
        num_actions: usize,
    },
}

impl PolicyHead {
    pub fn output_dim(&self) -> usize {
        match *self {
            PolicyHead::Gmm {
                components,
                action_dim,
            } => components * (1 + 2 * action_dim),
            PolicyHead::Categorical { num_actions } => num_actions,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PolicyHead::Gmm {
                components,
                action_dim,
            } if components == 0 || action_dim == 0 => {
                Err(Error::contract("GMM head needs K >= 1 and action_dim >= 1"))
            }
            PolicyHead::Categorical { num_actions: 0 } => Err(Error::contract(
                "categorical head needs at least one action",
            )),
            _ => Ok(()),
        }
    }
}

/// The action distribution produced for one `(state, goal)` pair.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionDistribution {
    Gmm(Gmm),
    Categorical(Vec<f64>),
}

impl ActionDistribution {
    pub fn log_prob(&self, action: &Action) -> Result<f64> {
        match (self, action) {
            (ActionDistribution::Gmm(gmm), Action::Continuous(a)) => gmm.log_density(a),
            (ActionDistribution::Categorical(p), Action::Discrete(i)) => p
                .get(*i)
                .map(|v| v.ln())
                .ok_or_else(|| Error::contract(format!("action {i} out of range"))),
            _ => Err(Error::contract(
                "action kind does not match the policy head",
            )),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        match self {
            ActionDistribution::Gmm(gmm) => Action::Continuous(gmm.sample(rng)),
            ActionDistribution::Categorical(p) => Action::Discrete(sample_categorical(p, rng)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateDiagnostics {
    /// Mean undiscounted intrinsic return per trajectory.
    pub mean_return: f64,
    /// Mean of `-log pi(a|s,g)` over the batch's actions.
    pub mean_entropy: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct Policy {
    spec: MlpSpec,
    params: ParamVector,
    head: PolicyHead,
    obs_dim: usize,
    num_goals: usize,
    optimizer: Optimizer,
    opt_state: OptState,
}

impl Policy {
    /// Small random output layer; GMM log-std biases start at `initial_log_std`.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        num_goals: usize,
        head: PolicyHead,
        hidden: &[usize],
        optimizer: Optimizer,
        initial_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        head.validate()?;
        let spec = MlpSpec::new(obs_dim + num_goals, hidden, head.output_dim());
        spec.validate()?;
        let mut params = spec.init_params(rng, 0.01);
        if let PolicyHead::Gmm {
            components,
            action_dim,
        } = head
        {
            let bias = params.bias_range(spec.hidden_dims.len());
            let block = 1 + 2 * action_dim;
            let values = params.values_mut();
            for k in 0..components {
                for d in 0..action_dim {
                    values[bias.start + k * block + 1 + action_dim + d] =
                        initial_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX);
                }
            }
        }
        Self::from_params(obs_dim, num_goals, head, spec, params, optimizer)
    }

    pub fn from_params(
        obs_dim: usize,
        num_goals: usize,
        head: PolicyHead,
        spec: MlpSpec,
        params: ParamVector,
        optimizer: Optimizer,
    ) -> Result<Self> {
        head.validate()?;
        spec.validate()?;
        check_dim("policy input", obs_dim + num_goals, spec.input_dim)?;
        check_dim("policy output", head.output_dim(), spec.output_dim)?;
        if params.layout() != spec.layout().as_slice() {
            return Err(Error::contract("policy parameters do not match spec"));
        }
        let opt_state = optimizer.init_state(params.len());
        Ok(Self {
            spec,
            params,
            head,
            obs_dim,
            num_goals,
            optimizer,
            opt_state,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn head(&self) -> PolicyHead {
        self.head
    }

    pub fn num_goals(&self) -> usize {
        self.num_goals
    }

    fn network_input(&self, obs: &[f64], goal: Goal) -> Result<Vec<f64>> {
        check_dim("policy observation", self.obs_dim, obs.len())?;
        if goal.index() >= self.num_goals {
            return Err(Error::contract(format!(
                "goal {goal} out of range for {} goals",
                self.num_goals
            )));
        }
        let mut x = Vec::with_capacity(self.spec.input_dim);
        x.extend_from_slice(obs);
        x.extend((0..self.num_goals).map(|g| if g == goal.index() { 1.0 } else { 0.0 }));
        Ok(x)
    }

    fn distribution_from_output(&self, out: &[f64]) -> Result<ActionDistribution> {
        match self.head {
            PolicyHead::Gmm {
                components,
                action_dim,
            } => {
                let block = 1 + 2 * action_dim;
                let mut logits = Vec::with_capacity(components);
                let mut means = Vec::with_capacity(components);
                let mut log_stds = Vec::with_capacity(components);
                for chunk in out.chunks_exact(block) {
                    logits.push(chunk[0]);
                    means.push(chunk[1..1 + action_dim].to_vec());
                    log_stds.push(
                        chunk[1 + action_dim..]
                            .iter()
                            .map(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX))
                            .collect(),
                    );
                }
                Ok(ActionDistribution::Gmm(Gmm::new(&logits, means, log_stds)?))
            }
            PolicyHead::Categorical { .. } => {
                Ok(ActionDistribution::Categorical(softmax(out, 1.0)?))
            }
        }
    }

    pub fn distribution(&self, obs: &[f64], goal: Goal) -> Result<ActionDistribution> {
        let x = self.network_input(obs, goal)?;
        let out = crate::numkit::mlp_forward(&self.spec, &self.params, &x)?;
        self.distribution_from_output(&out)
    }

    /// Density (continuous head) or probability mass (categorical head).
    pub fn density(&self, obs: &[f64], goal: Goal, action: &Action) -> Result<f64> {
        Ok(self.log_prob(obs, goal, action)?.exp())
    }

    pub fn log_prob(&self, obs: &[f64], goal: Goal, action: &Action) -> Result<f64> {
        self.distribution(obs, goal)?.log_prob(action)
    }

    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        goal: Goal,
        rng: &mut R,
    ) -> Result<Action> {
        Ok(self.distribution(obs, goal)?.sample(rng))
    }

    /// `log pi(a|s,g)` and its gradient with respect to the raw network output.
    fn log_prob_output_grad(&self, out: &[f64], action: &Action) -> Result<(f64, Vec<f64>)> {
        match (self.head, action) {
            (
                PolicyHead::Gmm {
                    components,
                    action_dim,
                },
                Action::Continuous(a),
            ) => {
                let dist = self.distribution_from_output(out)?;
                let ActionDistribution::Gmm(gmm) = dist else {
                    unreachable!("GMM head yields a mixture")
                };
                let log_p = gmm.log_density(a)?;
                let resp = gmm.responsibilities(a)?;
                let weights = gmm.weights();
                let block = 1 + 2 * action_dim;
                let mut grad = vec![0.0; out.len()];
                for k in 0..components {
                    let base = k * block;
                    grad[base] = resp[k] - weights[k];
                    for d in 0..action_dim {
                        let mu = gmm.means()[k][d];
                        let ls = gmm.log_stds()[k][d];
                        let inv_var = (-2.0 * ls).exp();
                        let diff = a[d] - mu;
                        grad[base + 1 + d] = resp[k] * diff * inv_var;
                        let raw = out[base + 1 + action_dim + d];
                        if raw > LOG_STD_MIN && raw < LOG_STD_MAX {
                            grad[base + 1 + action_dim + d] =
                                resp[k] * (diff * diff * inv_var - 1.0);
                        }
                    }
                }
                Ok((log_p, grad))
            }
            (PolicyHead::Categorical { num_actions }, Action::Discrete(i)) => {
                if *i >= num_actions {
                    return Err(Error::contract(format!("action {i} out of range")));
                }
                let p = softmax(out, 1.0)?;
                let grad = p
                    .iter()
                    .enumerate()
                    .map(|(j, &pj)| if j == *i { 1.0 - pj } else { -pj })
                    .collect();
                Ok((p[*i].ln(), grad))
            }
            _ => Err(Error::contract(
                "action kind does not match the policy head",
            )),
        }
    }

    /// Gradient of `log pi(a|s,g)` with respect to the parameters.
    pub fn score(&self, obs: &[f64], goal: Goal, action: &Action) -> Result<ParamVector> {
        let x = self.network_input(obs, goal)?;
        let mut trace = self.spec.forward_trace(&self.params, &x)?;
        let (_, og) = self.log_prob_output_grad(trace.output(), action)?;
        let mut grad = self.params.zeros_like();
        self.spec
            .backprop_into(&self.params, &mut trace, &og, &mut grad)?;
        Ok(grad)
    }

    /// Ascent direction of the entropy-regularised REINFORCE objective,
    /// averaged over every step in the batch.
    pub fn policy_gradient(
        &self,
        trajectories: &[Vec<Transition>],
        alpha: f64,
        gamma: f64,
    ) -> Result<(ParamVector, UpdateDiagnostics)> {
        let total_steps: usize = trajectories.iter().map(Vec::len).sum();
        if total_steps == 0 {
            return Err(Error::contract(
                "policy update needs at least one transition",
            ));
        }

        struct StepRecord {
            trace: ForwardTrace,
            output_grad: Vec<f64>,
            ret: f64,
        }

        let mut records = Vec::with_capacity(total_steps);
        let mut sum_neg_log_p = 0.0;
        let mut sum_returns = 0.0;
        for traj in trajectories {
            let start = records.len();
            let mut shaped = Vec::with_capacity(traj.len());
            for tr in traj {
                if !tr.reward.is_finite() {
                    return Err(Error::contract("transition reward must be finite"));
                }
                let x = self.network_input(&tr.state.observation, tr.goal)?;
                let trace = self.spec.forward_trace(&self.params, &x)?;
                let (log_p, output_grad) = self.log_prob_output_grad(trace.output(), &tr.action)?;
                sum_neg_log_p -= log_p;
                shaped.push(tr.reward - alpha * log_p);
                records.push(StepRecord {
                    trace,
                    output_grad,
                    ret: 0.0,
                });
            }
            sum_returns += traj.iter().map(|t| t.reward).sum::<f64>();
            let mut running = 0.0;
            for (rec, r) in records[start..].iter_mut().zip(&shaped).rev() {
                running = r + gamma * running;
                rec.ret = running;
            }
        }

        let baseline = records.iter().map(|r| r.ret).sum::<f64>() / total_steps as f64;
        let mut grad = self.params.zeros_like();
        for rec in &mut records {
            let weight = (rec.ret - baseline) / total_steps as f64;
            if weight == 0.0 {
                continue;
            }
            let og: Vec<f64> = rec.output_grad.iter().map(|g| g * weight).collect();
            self.spec
                .backprop_into(&self.params, &mut rec.trace, &og, &mut grad)?;
        }
        let diagnostics = UpdateDiagnostics {
            mean_return: sum_returns / trajectories.len() as f64,
            mean_entropy: sum_neg_log_p / total_steps as f64,
            grad_norm: grad.norm(),
        };
        Ok((grad, diagnostics))
    }

    /// One optimizer step along [`Policy::policy_gradient`].
    pub fn policy_update(
        &mut self,
        trajectories: &[Vec<Transition>],
        alpha: f64,
        gamma: f64,
    ) -> Result<UpdateDiagnostics> {
        let (mut grad, diagnostics) = self.policy_gradient(trajectories, alpha, gamma)?;
        // optimizers descend; flip to ascend the objective
        grad.scale(-1.0);
        optimizer_step(
            &self.optimizer,
            &mut self.params,
            &grad,
            &mut self.opt_state,
        )?;
        Ok(diagnostics)
    }
}

/// Density of a single 1-D Gaussian, used as a closed-form reference.
pub fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(obs: &[f64]) -> EnvState {
        EnvState {
            observation: obs.to_vec(),
            step_index: 0,
        }
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let g = Gmm::new(&[0.0], vec![vec![0.0]], vec![vec![0.0]]).unwrap();
        let d = g.density(&[0.0]).unwrap();
        assert!((d - 0.39894).abs() < 1e-5);
        assert!((d - normal_pdf(0.0, 0.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn identical_components_match_single_component() {
        let one = Gmm::new(&[0.0], vec![vec![0.3]], vec![vec![-0.2]]).unwrap();
        let two = Gmm::new(&[1.0, 1.0], vec![vec![0.3]; 2], vec![vec![-0.2]; 2]).unwrap();
        for x in [-1.0, 0.0, 0.3, 2.5] {
            assert!((one.density(&[x]).unwrap() - two.density(&[x]).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_component_density_integrates_to_one() {
        let g = Gmm::new(
            &[0.3, -0.4],
            vec![vec![-1.5], vec![2.0]],
            vec![vec![-0.5], vec![0.4]],
        )
        .unwrap();
        let n = 20_000;
        let h = 20.0 / n as f64;
        let mut integral = 0.0;
        for i in 0..=n {
            let x = -10.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            integral += w * g.density(&[x]).unwrap();
        }
        assert!((integral * h - 1.0).abs() < 1e-3);
    }

    #[test]
    fn degenerate_component_samples_its_mean() {
        let g = Gmm::new(&[0.0], vec![vec![0.7, -0.2]], vec![vec![-40.0, -40.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = g.sample(&mut rng);
        assert!((a[0] - 0.7).abs() < 1e-9 && (a[1] + 0.2).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_seeded() {
        let g = Gmm::new(
            &[0.1, 0.2, -1.0],
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![vec![0.0]; 3],
        )
        .unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| g.sample(&mut rng)[0]).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn intrinsic_reward_cases() {
        assert_eq!(intrinsic_reward(0.05, 0.05).unwrap(), 0.0);
        assert!((intrinsic_reward(1.0, 1.0 / 20.0).unwrap() - 20f64.ln()).abs() < 1e-12);
        assert!((intrinsic_reward(1.0, 0.05).unwrap() - 2.9957).abs() < 1e-4);
        assert_eq!(intrinsic_reward(0.5, 0.5).unwrap(), 0.0);
        assert!((intrinsic_reward(0.0, 0.5).unwrap() - (1e-6f64.ln() - 0.5f64.ln())).abs() < 1e-12);
        assert!(intrinsic_reward(0.5, 0.0).is_err());
        assert!(intrinsic_reward(1.5, 0.5).is_err());
    }

    fn gmm_policy(seed: u64) -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Policy::new(
            2,
            3,
            PolicyHead::Gmm {
                components: 4,
                action_dim: 2,
            },
            &[16],
            Optimizer::default(),
            0.05f64.ln(),
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn policy_output_respects_initial_log_std_and_weights() {
        let p = gmm_policy(1);
        let ActionDistribution::Gmm(g) = p.distribution(&[0.5, 0.5], Goal(1)).unwrap() else {
            panic!("expected mixture");
        };
        assert_eq!(g.num_components(), 4);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for ls in g.log_stds().iter().flatten() {
            assert!((ls - 0.05f64.ln()).abs() < 0.1);
        }
        assert!(p.distribution(&[0.5, 0.5], Goal(3)).is_err());
        assert!(p.distribution(&[0.5], Goal(0)).is_err());
    }

    #[test]
    fn score_matches_finite_differences() {
        let p = gmm_policy(4);
        let obs = [0.2, 0.7];
        let action = Action::Continuous(vec![0.03, -0.02]);
        let g = p.score(&obs, Goal(2), &action).unwrap();
        let h = 1e-6;
        for i in (0..p.params.len()).step_by(7) {
            let mut plus = p.clone();
            plus.params.values_mut()[i] += h;
            let mut minus = p.clone();
            minus.params.values_mut()[i] -= h;
            let fd = (plus.log_prob(&obs, Goal(2), &action).unwrap()
                - minus.log_prob(&obs, Goal(2), &action).unwrap())
                / (2.0 * h);
            let denom = fd.abs().max(g.values()[i].abs()).max(1e-6);
            assert!(
                (fd - g.values()[i]).abs() / denom < 1e-4,
                "param {i}: {fd} vs {}",
                g.values()[i]
            );
        }
    }

    fn one_step(obs: &[f64], goal: Goal, action: Action, reward: f64) -> Transition {
        Transition {
            state: state(obs),
            action,
            next_state: state(obs),
            goal,
            reward,
        }
    }

    #[test]
    fn zero_reward_without_entropy_gives_zero_gradient() {
        let p = gmm_policy(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj: Vec<Transition> = (0..10)
            .map(|_| {
                let a = p.sample_action(&[0.5, 0.5], Goal(0), &mut rng).unwrap();
                one_step(&[0.5, 0.5], Goal(0), a, 0.0)
            })
            .collect();
        let (g, _) = p.policy_gradient(&[traj], 0.0, 0.99).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut p = gmm_policy(2);
        assert!(p.policy_update(&[], 0.1, 0.99).is_err());
        assert!(p.policy_update(&[vec![]], 0.1, 0.99).is_err());
    }

    #[test]
    fn categorical_bandit_learns_rewarded_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut p = Policy::new(
            1,
            1,
            PolicyHead::Categorical { num_actions: 2 },
            &[8],
            Optimizer::adam(1e-2),
            0.0,
            &mut rng,
        )
        .unwrap();
        for _ in 0..2000 {
            let batch: Vec<Vec<Transition>> = (0..8)
                .map(|_| {
                    let a = p.sample_action(&[0.0], Goal(0), &mut rng).unwrap();
                    let r = if a == Action::Discrete(0) { 1.0 } else { 0.0 };
                    vec![one_step(&[0.0], Goal(0), a, r)]
                })
                .collect();
            p.policy_update(&batch, 0.0, 0.99).unwrap();
        }
        let pa = p.density(&[0.0], Goal(0), &Action::Discrete(0)).unwrap();
        assert!(pa > 0.9, "pi(A) = {pa}");
    }
}
