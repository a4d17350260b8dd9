//! DQN learners for agents (scalar head) and the mediator (vector head).
//!
//! Agent samples carry the k-step return and `γ^k`; mediator samples the
//! discounted reward vector between selections and `γ^τ`. The mediator's
//! successor value is the target network's vector for the leader with the
//! fairest `s'_r + Q̄(s', ·)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fairness::FairnessMeasure;
use crate::game::{argmax_lowest, AgentId};
use crate::harness::config::DqnConfig;
use crate::learner::{AgentObs, LeaderPolicy, SelectionObs, Selector, StepFeedback, Turn};
use crate::mediator::MediatorVariant;
use crate::nn::adam::Adam;
use crate::nn::checkpoint;
use crate::nn::net::Mlp;
use crate::nn::replay::{ReplayBuffer, Sample};
use crate::SimRng;

/// Output layout of the network.
#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    /// One value per action.
    Scalar,
    /// `agents` values per action, chosen between by `phi`.
    Vector { agents: usize, phi: FairnessMeasure, use_history: bool },
}

impl Head {
    pub fn width(&self) -> usize {
        match self {
            Head::Scalar => 1,
            Head::Vector { agents, .. } => *agents,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DqnCore {
    pub online: Mlp,
    pub target: Option<Mlp>,
    pub adam: Adam,
    pub buffer: ReplayBuffer,
    pub batch: usize,
    pub sync_every: u64,
    pub actions: usize,
    pub head: Head,
    steps: u64,
}

impl DqnCore {
    pub fn new(input: usize, actions: usize, head: Head, cfg: &DqnConfig, rng: &mut SimRng) -> Self {
        let online = Mlp::standard(input, cfg.hidden, actions * head.width(), rng);
        let target = (cfg.target_sync > 0).then(|| online.clone());
        Self {
            adam: Adam::new(online.param_count(), cfg.learning_rate),
            online,
            target,
            buffer: ReplayBuffer::new(cfg.buffer),
            batch: cfg.batch,
            sync_every: cfg.target_sync,
            actions,
            head,
            steps: 0,
        }
    }

    pub fn train_steps(&self) -> u64 {
        self.steps
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        self.online.forward(state).expect("state width fixed at construction")
    }

    /// Greedy action for the given outputs (and reward history).
    pub fn greedy(&self, outputs: &[f64], history: &[f64]) -> usize {
        match &self.head {
            Head::Scalar => argmax_lowest(outputs[..self.actions].iter().copied()),
            Head::Vector { agents, phi, use_history } => argmax_lowest((0..self.actions).map(|a| {
                let q = &outputs[a * agents..(a + 1) * agents];
                if *use_history {
                    let full: Vec<f64> = q.iter().zip(history).map(|(x, h)| x + h).collect();
                    phi.score(&full)
                } else {
                    phi.score(q)
                }
            })),
        }
    }

    fn target_for(&self, sample: &Sample) -> Vec<f64> {
        let width = self.head.width();
        if sample.discount == 0.0 {
            return sample.reward.clone();
        }
        let net = self.target.as_ref().unwrap_or(&self.online);
        let out = net.forward(&sample.next).expect("stored state width");
        let boot: Vec<f64> = match &self.head {
            Head::Scalar => vec![out.iter().copied().fold(f64::NEG_INFINITY, f64::max)],
            Head::Vector { .. } => {
                let a = self.greedy(&out, &sample.next_history);
                out[a * width..(a + 1) * width].to_vec()
            }
        };
        sample.reward.iter().zip(&boot).map(|(r, b)| r + sample.discount * b).collect()
    }

    /// One minibatch update. `None` while the buffer holds fewer samples
    /// than a batch.
    pub fn dqn_train_step(&mut self, rng: &mut SimRng) -> Option<f64> {
        if self.buffer.len() < self.batch {
            return None;
        }
        let width = self.head.width();
        let mut grads = vec![0.0; self.online.param_count()];
        let mut loss = 0.0;
        let scale = 1.0 / self.batch as f64;
        for _ in 0..self.batch {
            let sample = self.buffer.get(self.buffer.sample_index(rng));
            let target = self.target_for(sample);
            let cache = self.online.forward_cached(&sample.state).expect("stored state width");
            let out = cache.output();
            let mut grad_out = vec![0.0; out.len()];
            for k in 0..width {
                let idx = sample.action * width + k;
                let err = out[idx] - target[k];
                loss += err * err * scale;
                grad_out[idx] = 2.0 * err * scale;
            }
            self.online.backward(&cache, &grad_out, &mut grads);
        }
        self.adam.adam_step(&mut self.online.params, &grads);
        self.steps += 1;
        if self.sync_every > 0 && self.steps.is_multiple_of(self.sync_every) {
            self.target = Some(self.online.clone());
        }
        Some(loss)
    }

    /// Mean squared error of the batch against the current targets,
    /// without updating.
    pub fn evaluate_loss(&self, rng: &mut SimRng) -> Option<f64> {
        if self.buffer.len() < self.batch {
            return None;
        }
        let width = self.head.width();
        let mut loss = 0.0;
        for _ in 0..self.batch {
            let sample = self.buffer.get(self.buffer.sample_index(rng));
            let target = self.target_for(sample);
            let out = self.online.forward(&sample.state).expect("stored state width");
            for k in 0..width {
                loss += (out[sample.action * width + k] - target[k]).powi(2) / self.batch as f64;
            }
        }
        Some(loss)
    }

    fn load_online(&mut self, text: &str) -> Result<()> {
        let net = checkpoint::decode(text)?;
        if net.sizes() != self.online.sizes() {
            return Err(Error::Incompatible(format!(
                "network shape {:?} does not match {:?}",
                net.sizes(),
                self.online.sizes()
            )));
        }
        self.target = self.target.as_ref().map(|_| net.clone());
        self.online = net;
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct AgentPending {
    state: Vec<f64>,
    action: usize,
    r_hat: f64,
    k: usize,
}

/// Agent leader policy backed by a scalar-head DQN.
#[derive(Clone, Debug)]
pub struct DqnAgent {
    pub core: DqnCore,
    pub gamma: f64,
    epsilon: f64,
    learning: bool,
    pending: Option<AgentPending>,
}

impl DqnAgent {
    pub fn new(input: usize, actions: usize, gamma: f64, cfg: &DqnConfig, rng: &mut SimRng) -> Self {
        Self {
            core: DqnCore::new(input, actions, Head::Scalar, cfg, rng),
            gamma,
            epsilon: 0.0,
            learning: true,
            pending: None,
        }
    }

    fn flush(&mut self, next: Option<&[f64]>, rng: &mut SimRng) {
        let Some(p) = self.pending.take() else {
            return;
        };
        let (discount, next) = match next {
            Some(n) => (self.gamma.powi(p.k as i32), n.to_vec()),
            None => (0.0, Vec::new()),
        };
        self.core.buffer.push(Sample {
            state: p.state,
            action: p.action,
            reward: vec![p.r_hat],
            discount,
            next,
            next_history: Vec::new(),
        });
        self.core.dqn_train_step(rng);
    }
}

impl LeaderPolicy for DqnAgent {
    fn prepare(&mut self, learning: bool, epsilon: f64) {
        self.learning = learning;
        self.epsilon = epsilon;
        self.pending = None;
    }

    fn needs_features(&self) -> bool {
        true
    }

    fn lead(&mut self, obs: &AgentObs<'_>, actions: usize, rng: &mut SimRng) -> usize {
        let features = obs.features.expect("DQN agents need features");
        if self.learning {
            self.flush(Some(features), rng);
        }
        let actions = actions.min(self.core.actions);
        let action = if self.epsilon > 0.0 && rng.gen::<f64>() < self.epsilon {
            rng.gen_range(0..actions)
        } else {
            let q = self.core.q_values(features);
            argmax_lowest(q[..actions].iter().copied())
        };
        if self.learning {
            self.pending = Some(AgentPending { state: features.to_vec(), action, r_hat: 0.0, k: 0 });
        }
        action
    }

    fn observe(&mut self, reward: f64, _rng: &mut SimRng) {
        if let Some(p) = &mut self.pending {
            p.r_hat += self.gamma.powi(p.k as i32) * reward;
            p.k += 1;
        }
    }

    fn finish(&mut self, rng: &mut SimRng) {
        self.flush(None, rng);
    }

    fn save(&self) -> String {
        checkpoint::encode(&self.core.online)
    }

    fn load(&mut self, text: &str) -> Result<()> {
        self.core.load_online(text)
    }
}

#[derive(Clone, Debug)]
struct MediatorPending {
    state: Vec<f64>,
    leader: AgentId,
    acc: Vec<f64>,
    tau: usize,
}

/// Mediator backed by a vector-head DQN.
#[derive(Clone, Debug)]
pub struct DqnMediator {
    pub core: DqnCore,
    pub gamma: f64,
    label: String,
    use_history: bool,
    agents: usize,
    epsilon: f64,
    learning: bool,
    pending: Option<MediatorPending>,
}

impl DqnMediator {
    /// `state_width` excludes the reward history, which is appended to the
    /// input when the variant uses it.
    pub fn new(
        state_width: usize,
        agents: usize,
        phi: FairnessMeasure,
        gamma: f64,
        variant: MediatorVariant,
        cfg: &DqnConfig,
        rng: &mut SimRng,
    ) -> Self {
        let input = state_width + if variant.use_history { agents } else { 0 };
        let head = Head::Vector { agents, phi, use_history: variant.use_history };
        Self {
            core: DqnCore::new(input, agents, head, cfg, rng),
            gamma,
            label: variant.label().to_string(),
            use_history: variant.use_history,
            agents,
            epsilon: 0.0,
            learning: true,
            pending: None,
        }
    }

    fn input(&self, obs: &SelectionObs<'_>) -> Vec<f64> {
        let mut v = obs.features.expect("DQN mediator needs features").to_vec();
        if self.use_history {
            v.extend_from_slice(obs.history);
        }
        v
    }

    fn flush(&mut self, next: Option<(Vec<f64>, &[f64])>, rng: &mut SimRng) {
        let Some(p) = self.pending.take() else {
            return;
        };
        let (discount, next, next_history) = match next {
            Some((state, history)) => (self.gamma.powi(p.tau as i32), state, history.to_vec()),
            None => (0.0, Vec::new(), Vec::new()),
        };
        self.core.buffer.push(Sample { state: p.state, action: p.leader, reward: p.acc, discount, next, next_history });
        self.core.dqn_train_step(rng);
    }
}

impl Selector for DqnMediator {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn has_turn(&self) -> bool {
        true
    }

    fn needs_features(&self) -> bool {
        true
    }

    fn prepare(&mut self, turn: Turn, epsilon: f64) {
        self.learning = turn.selector_learns();
        self.epsilon = if self.learning { epsilon } else { 0.0 };
        self.pending = None;
    }

    fn select(&mut self, obs: &SelectionObs<'_>, rng: &mut SimRng) -> AgentId {
        let input = self.input(obs);
        if self.learning {
            self.flush(Some((input.clone(), obs.history)), rng);
        }
        let leader = if self.epsilon > 0.0 && rng.gen::<f64>() < self.epsilon {
            rng.gen_range(0..self.agents)
        } else {
            let q = self.core.q_values(&input);
            self.core.greedy(&q, obs.history)
        };
        if self.learning {
            self.pending = Some(MediatorPending { state: input, leader, acc: vec![0.0; self.agents], tau: 0 });
        }
        leader
    }

    fn observe(&mut self, feedback: &StepFeedback<'_>, _rng: &mut SimRng) {
        if let Some(p) = &mut self.pending {
            let w = self.gamma.powi(p.tau as i32);
            for (a, r) in p.acc.iter_mut().zip(feedback.metric) {
                *a += w * r;
            }
            p.tau += 1;
        }
    }

    fn finish(&mut self, rng: &mut SimRng) {
        self.flush(None, rng);
    }

    fn save(&self) -> String {
        checkpoint::encode(&self.core.online)
    }

    fn load(&mut self, text: &str) -> Result<()> {
        self.core.load_online(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn small_cfg() -> DqnConfig {
        DqnConfig { buffer: 1000, batch: 16, learning_rate: 1e-2, target_sync: 50, hidden: 16 }
    }

    #[test]
    fn underfull_buffer_is_a_no_op() {
        let mut rng = SimRng::seed_from_u64(0);
        let mut core = DqnCore::new(2, 2, Head::Scalar, &small_cfg(), &mut rng);
        assert_eq!(core.dqn_train_step(&mut rng), None);
        assert_eq!(core.train_steps(), 0);
    }

    #[test]
    fn regresses_to_a_terminal_reward() {
        let mut rng = SimRng::seed_from_u64(1);
        let mut core = DqnCore::new(2, 2, Head::Scalar, &small_cfg(), &mut rng);
        for _ in 0..32 {
            core.buffer.push(Sample {
                state: vec![1.0, 0.0],
                action: 1,
                reward: vec![3.0],
                discount: 0.0,
                next: vec![],
                next_history: vec![],
            });
        }
        for _ in 0..2000 {
            core.dqn_train_step(&mut rng);
        }
        assert!((core.q_values(&[1.0, 0.0])[1] - 3.0).abs() < 1e-2);
    }

    #[test]
    fn zero_discount_targets_are_rewards() {
        let mut rng = SimRng::seed_from_u64(2);
        let core = DqnCore::new(2, 2, Head::Scalar, &small_cfg(), &mut rng);
        let s = Sample { state: vec![0.0, 1.0], action: 0, reward: vec![1.5], discount: 0.0, next: vec![0.3, 0.3], next_history: vec![] };
        assert_eq!(core.target_for(&s), vec![1.5]);
    }

    #[test]
    fn fresh_loss_is_finite_and_non_negative() {
        let mut rng = SimRng::seed_from_u64(3);
        let head = Head::Vector { agents: 2, phi: FairnessMeasure::MinWelfare, use_history: true };
        let mut core = DqnCore::new(3, 2, head, &small_cfg(), &mut rng);
        for i in 0..20 {
            core.buffer.push(Sample {
                state: vec![i as f64 / 20.0, 1.0, 0.0],
                action: i % 2,
                reward: vec![1.0, 2.0],
                discount: 0.99,
                next: vec![0.5, 0.0, 1.0],
                next_history: vec![1.0, 2.0],
            });
        }
        let loss = core.evaluate_loss(&mut rng).unwrap();
        assert!(loss.is_finite() && loss >= 0.0);
    }

    #[test]
    fn vector_head_greedy_uses_history() {
        let mut rng = SimRng::seed_from_u64(4);
        let head = Head::Vector { agents: 2, phi: FairnessMeasure::MinWelfare, use_history: true };
        let core = DqnCore::new(1, 2, head, &small_cfg(), &mut rng);
        let out = [7.0, 2.0, 2.0, 7.0];
        assert_eq!(core.greedy(&out, &[0.0, 5.0]), 0);
        assert_eq!(core.greedy(&out, &[5.0, 0.0]), 1);
    }

    #[test]
    fn learns_a_two_state_chain() {
        // State 0: stop for 1, or move on for 0. State 1: stop for 2 or 0.
        // With γ = 0.9: Q(0) = [1, 1.8], Q(1) = [2, 0].
        let mut rng = SimRng::seed_from_u64(5);
        let mut core = DqnCore::new(2, 2, Head::Scalar, &small_cfg(), &mut rng);
        let s0 = vec![1.0, 0.0];
        let s1 = vec![0.0, 1.0];
        let terminal = |state: &Vec<f64>, action, r| Sample {
            state: state.clone(),
            action,
            reward: vec![r],
            discount: 0.0,
            next: vec![],
            next_history: vec![],
        };
        for _ in 0..50 {
            core.buffer.push(terminal(&s0, 0, 1.0));
            core.buffer.push(Sample {
                state: s0.clone(),
                action: 1,
                reward: vec![0.0],
                discount: 0.9,
                next: s1.clone(),
                next_history: vec![],
            });
            core.buffer.push(terminal(&s1, 0, 2.0));
            core.buffer.push(terminal(&s1, 1, 0.0));
        }
        for _ in 0..4000 {
            core.dqn_train_step(&mut rng);
        }
        let q0 = core.q_values(&s0);
        let q1 = core.q_values(&s1);
        for (got, want) in q0.iter().chain(&q1).zip([1.0, 1.8, 2.0, 0.0]) {
            assert!((got - want).abs() < 0.05, "{q0:?} {q1:?}");
        }
    }
}
