//! The goal classifier `q(g | s)` and its replay store.
//!
//! The classifier is an MLP from an observation to one logit per goal. Its
//! probabilities feed both the intrinsic reward and the per-goal prediction
//! errors that Diversity Progress turns into learning progress.

use rand::Rng;

use crate::envs::Goal;
use crate::error::{check_dim, Error, Result};
use crate::numkit::{
    optimizer_step, softmax, ForwardTrace, MlpSpec, OptState, Optimizer, ParamVector,
};

#[derive(Clone, Debug)]
pub struct Discriminator {
    spec: MlpSpec,
    params: ParamVector,
    optimizer: Optimizer,
    opt_state: OptState,
    grad: ParamVector,
    trace: ForwardTrace,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        num_goals: usize,
        hidden: &[usize],
        optimizer: Optimizer,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim, hidden, num_goals);
        spec.validate()?;
        let params = spec.init_params(rng, 1.0);
        Self::from_params(spec, params, optimizer)
    }

    /// All-zero parameters: predicts the uniform distribution everywhere.
    pub fn zeroed(
        obs_dim: usize,
        num_goals: usize,
        hidden: &[usize],
        optimizer: Optimizer,
    ) -> Result<Self> {
        let spec = MlpSpec::new(obs_dim, hidden, num_goals);
        spec.validate()?;
        let params = ParamVector::zeros(spec.layout());
        Self::from_params(spec, params, optimizer)
    }

    pub fn from_params(spec: MlpSpec, params: ParamVector, optimizer: Optimizer) -> Result<Self> {
        spec.validate()?;
        if params.layout() != spec.layout().as_slice() {
            return Err(Error::contract(
                "discriminator parameters do not match spec",
            ));
        }
        let opt_state = optimizer.init_state(params.len());
        let grad = params.zeros_like();
        Ok(Self {
            spec,
            params,
            optimizer,
            opt_state,
            grad,
            trace: ForwardTrace::default(),
        })
    }

    pub fn num_goals(&self) -> usize {
        self.spec.output_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        crate::numkit::mlp_forward(&self.spec, &self.params, obs)
    }

    /// `q(. | obs)` as a probability vector over goals.
    pub fn predict(&self, obs: &[f64]) -> Result<Vec<f64>> {
        softmax(&self.logits(obs)?, 1.0)
    }

    pub fn prediction_errors(&self, next_obs: &[f64], pursued: Goal) -> Result<Vec<f64>> {
        prediction_errors(&self.predict(next_obs)?, pursued)
    }

    /// Mean cross-entropy of `batch` under the current parameters.
    pub fn loss(&self, batch: &[(&[f64], Goal)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::contract("loss of an empty batch"));
        }
        let mut total = 0.0;
        for &(obs, goal) in batch {
            self.check_goal(goal)?;
            let logits = self.logits(obs)?;
            total += cross_entropy(&logits, goal.index());
        }
        Ok(total / batch.len() as f64)
    }

    /// One optimizer step on the mean negative log-likelihood of `batch`.
    /// Returns the loss measured before the step.
    pub fn update(&mut self, batch: &[(&[f64], Goal)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::contract(
                "discriminator update needs a nonempty batch",
            ));
        }
        for &(_, goal) in batch {
            self.check_goal(goal)?;
        }
        self.grad.values_mut().iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        let mut out_grad = vec![0.0; self.num_goals()];
        for &(obs, goal) in batch {
            self.spec.forward_into(&self.params, obs, &mut self.trace)?;
            let logits = self.trace.output();
            total += cross_entropy(logits, goal.index());
            let probs = softmax(logits, 1.0)?;
            for (k, (o, p)) in out_grad.iter_mut().zip(&probs).enumerate() {
                let target = if k == goal.index() { 1.0 } else { 0.0 };
                *o = (p - target) * scale;
            }
            self.spec
                .backprop_into(&self.params, &mut self.trace, &out_grad, &mut self.grad)?;
        }
        optimizer_step(
            &self.optimizer,
            &mut self.params,
            &self.grad,
            &mut self.opt_state,
        )?;
        Ok(total * scale)
    }

    fn check_goal(&self, goal: Goal) -> Result<()> {
        if goal.index() >= self.num_goals() {
            return Err(Error::contract(format!(
                "goal {goal} out of range for {} goals",
                self.num_goals()
            )));
        }
        Ok(())
    }
}

fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    crate::numkit::log_sum_exp(logits) - logits[target]
}

/// Per-goal prediction errors: `1 - q(g|s)` for the pursued goal, `q(g|s)` otherwise.
pub fn prediction_errors(q: &[f64], pursued: Goal) -> Result<Vec<f64>> {
    if pursued.index() >= q.len() {
        return Err(Error::contract(format!(
            "pursued goal {pursued} out of range for {} goals",
            q.len()
        )));
    }
    Ok(q.iter()
        .enumerate()
        .map(|(g, &p)| if g == pursued.index() { 1.0 - p } else { p })
        .collect())
}

/// Fixed-capacity ring of `(observation, goal)` pairs; overwrites the oldest.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    observations: Vec<f64>,
    goals: Vec<Goal>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize) -> Result<Self> {
        if capacity == 0 || obs_dim == 0 {
            return Err(Error::contract(
                "replay buffer needs capacity and obs_dim >= 1",
            ));
        }
        Ok(Self {
            capacity,
            obs_dim,
            observations: Vec::with_capacity(capacity * obs_dim),
            goals: Vec::with_capacity(capacity),
            cursor: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &[f64], goal: Goal) -> Result<()> {
        check_dim("replay observation", self.obs_dim, obs.len())?;
        if self.goals.len() < self.capacity {
            self.observations.extend_from_slice(obs);
            self.goals.push(goal);
        } else {
            let at = self.cursor * self.obs_dim;
            self.observations[at..at + self.obs_dim].copy_from_slice(obs);
            self.goals[self.cursor] = goal;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, index: usize) -> (&[f64], Goal) {
        let at = index * self.obs_dim;
        (&self.observations[at..at + self.obs_dim], self.goals[index])
    }

    /// Uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<(&[f64], Goal)> {
        if self.is_empty() {
            return Vec::new();
        }
        (0..n)
            .map(|_| self.get(rng.random_range(0..self.len())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zeroed_model_predicts_uniform() {
        let d = Discriminator::zeroed(2, 4, &[8], Optimizer::default()).unwrap();
        let q = d.predict(&[0.3, 0.9]).unwrap();
        assert!(q.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let single = Discriminator::zeroed(2, 1, &[8], Optimizer::default()).unwrap();
        assert_eq!(single.predict(&[0.1, 0.2]).unwrap(), vec![1.0]);
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let d = Discriminator::zeroed(2, 4, &[8], Optimizer::default()).unwrap();
        assert!(d.predict(&[0.3]).is_err());
    }

    #[test]
    fn prediction_error_cases() {
        let e = prediction_errors(&[0.8, 0.15, 0.05], Goal(0)).unwrap();
        let expected = [0.2, 0.15, 0.05];
        assert!(e.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(
            prediction_errors(&[1.0, 0.0], Goal(0)).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            prediction_errors(&[0.25; 4], Goal(2)).unwrap(),
            vec![0.25, 0.25, 0.75, 0.25]
        );
        assert!(prediction_errors(&[0.5, 0.5], Goal(2)).is_err());
    }

    #[test]
    fn zero_init_loss_is_log_num_goals() {
        let mut d = Discriminator::zeroed(2, 4, &[8], Optimizer::default()).unwrap();
        let obs = [0.1, 0.2];
        let loss = d
            .update(&[(&obs[..], Goal(1)), (&obs[..], Goal(3))])
            .unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn perfect_prediction_has_zero_loss_and_no_movement() {
        let spec = MlpSpec::new(2, &[], 2);
        // Output bias 40 on goal 0: q(0|s) = 1 - 4e-18.
        let params = ParamVector::new(vec![0.0, 0.0, 0.0, 0.0, 40.0, 0.0], spec.layout()).unwrap();
        let mut d = Discriminator::from_params(spec, params.clone(), Optimizer::default()).unwrap();
        let obs = [0.4, 0.6];
        let loss = d.update(&[(&obs[..], Goal(0)); 8]).unwrap();
        assert!(loss.abs() < 1e-9);
        let moved = d
            .params()
            .values()
            .iter()
            .zip(params.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(moved < 1e-9, "moved {moved}");
    }

    #[test]
    fn update_rejects_empty_batch_and_bad_goal() {
        let mut d = Discriminator::zeroed(2, 3, &[4], Optimizer::default()).unwrap();
        assert!(d.update(&[]).is_err());
        assert!(d.update(&[(&[0.0, 0.0][..], Goal(3))]).is_err());
    }

    #[test]
    fn learns_linearly_separable_goals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut d = Discriminator::new(2, 2, &[16], Optimizer::adam(1e-2), &mut rng).unwrap();
        let data: Vec<([f64; 2], Goal)> = (0..40)
            .map(|i| {
                let x = rng.random::<f64>();
                let y = rng.random::<f64>();
                if i % 2 == 0 {
                    ([0.1 + 0.3 * x, y], Goal(0))
                } else {
                    ([0.6 + 0.3 * x, y], Goal(1))
                }
            })
            .collect();
        let batch: Vec<(&[f64], Goal)> = data.iter().map(|(o, g)| (&o[..], *g)).collect();
        for _ in 0..500 {
            d.update(&batch).unwrap();
        }
        assert!(d.loss(&batch).unwrap() < 0.1);
    }

    #[test]
    fn replay_overwrites_oldest_first() {
        let mut buf = ReplayBuffer::new(3, 1).unwrap();
        for i in 0..5 {
            buf.push(&[i as f64], Goal(i)).unwrap();
        }
        assert_eq!(buf.len(), 3);
        let goals: Vec<usize> = (0..3).map(|i| buf.get(i).1.index()).collect();
        assert_eq!(goals, vec![3, 4, 2]);
        assert!(buf.push(&[0.0, 1.0], Goal(0)).is_err());
    }

    #[test]
    fn replay_sampling_is_seeded() {
        let mut buf = ReplayBuffer::new(100, 2).unwrap();
        for i in 0..50 {
            buf.push(&[i as f64, 0.0], Goal(i % 3)).unwrap();
        }
        let a: Vec<f64> = buf
            .sample(&mut ChaCha8Rng::seed_from_u64(5), 10)
            .iter()
            .map(|(o, _)| o[0])
            .collect();
        let b: Vec<f64> = buf
            .sample(&mut ChaCha8Rng::seed_from_u64(5), 10)
            .iter()
            .map(|(o, _)| o[0])
            .collect();
        assert_eq!(a, b);
        assert!(ReplayBuffer::new(10, 2)
            .unwrap()
            .sample(&mut ChaCha8Rng::seed_from_u64(1), 4)
            .is_empty());
    }
}
