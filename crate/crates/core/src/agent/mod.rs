//! DQN and causal DQN agents.
//!
//! Both agents share one code path; the baseline is the causal agent with
//! the penalty weight forced to zero. The effect estimate is still computed
//! for the baseline so its metrics are comparable.

mod binning;
mod loss;
mod replay;

pub use binning::BinningRule;
pub use loss::{
    batch_peace, causal_loss, populate_outcomes, td_error, td_target, LossConfig, LossOutput,
    OutcomeRule, PenaltyMode,
};
pub use replay::{ReplayBuffer, Transition};

use crate::cartpole::{N_ACTIONS, STATE_DIM};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, NetworkParams, OptimizerState};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Dqn,
    Causal,
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(AgentKind::Dqn),
            "causal" => Ok(AgentKind::Causal),
            other => Err(Error::Config(format!(
                "unknown agent kind `{other}` (dqn|causal)"
            ))),
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentKind::Dqn => "dqn",
            AgentKind::Causal => "causal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub hidden: Vec<usize>,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync_episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            kind: AgentKind::Causal,
            hidden: vec![64, 64],
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            batch_size: 64,
            buffer_capacity: 10_000,
            target_sync_episodes: 10,
            epsilon_start: 1.0,
            epsilon_min: 0.01,
            epsilon_decay: 0.995,
        }
    }
}

impl AgentConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(STATE_DIM)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(N_ACTIONS))
            .collect()
    }

    /// Loss settings with the penalty switched off for the baseline agent.
    pub fn effective_loss(&self) -> LossConfig {
        let mut loss = self.loss.clone();
        if self.kind == AgentKind::Dqn {
            loss.lambda = 0.0;
        }
        loss
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.target_sync_episodes == 0 {
            return Err(Error::Config(
                "batch size, buffer capacity and target sync interval must be positive".into(),
            ));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_min", self.epsilon_min),
            ("epsilon_decay", self.epsilon_decay),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        let a = self.adam;
        if !(a.learning_rate > 0.0
            && a.epsilon > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2))
        {
            return Err(Error::Config(format!("invalid optimizer settings {a:?}")));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn greedy_action(params: &NetworkParams, state: &[f64]) -> Result<usize> {
    Ok(argmax(&params.predict(state)?))
}

/// Epsilon-greedy: one uniform draw decides whether to explore, a second
/// picks the random action.
pub fn select_action(
    params: &NetworkParams,
    state: &[f64],
    epsilon: f64,
    rng: &mut Rng,
) -> Result<usize> {
    if rng::uniform(rng) < epsilon {
        Ok(rng::below(rng, params.output_dim()))
    } else {
        greedy_action(params, state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub loss: f64,
    pub td_loss: f64,
    pub penalty: f64,
    pub peace: f64,
    pub n_degenerate_strata: usize,
}

/// Everything one training loop owns.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub online: NetworkParams,
    pub target: NetworkParams,
    pub optimizer: OptimizerState,
    pub buffer: ReplayBuffer,
    pub epsilon: f64,
    pub episodes_done: usize,
    loss: LossConfig,
}

impl Agent {
    pub fn new(config: AgentConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let online = NetworkParams::init_with(&config.layer_sizes(), rng)?;
        Ok(Self {
            target: online.clone(),
            optimizer: OptimizerState::new(&online, config.adam),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            epsilon: config.epsilon_start,
            episodes_done: 0,
            loss: config.effective_loss(),
            online,
            config,
        })
    }

    pub fn loss_config(&self) -> &LossConfig {
        &self.loss
    }

    pub fn act(&self, state: &[f64], rng: &mut Rng) -> Result<usize> {
        select_action(&self.online, state, self.epsilon, rng)
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn train_on_batch(&mut self, batch: &[Transition]) -> Result<StepMetrics> {
        let out = causal_loss(&self.online, &self.target, batch, &self.loss)?;
        self.optimizer.step(&mut self.online, &out.grads)?;
        Ok(StepMetrics {
            loss: out.loss,
            td_loss: out.td_loss,
            penalty: out.penalty,
            peace: out.estimate.peace,
            n_degenerate_strata: out.estimate.n_degenerate_strata,
        })
    }

    /// One optimizer step on a replay minibatch, once the buffer holds at
    /// least a full batch.
    pub fn train_step(&mut self, rng: &mut Rng) -> Result<Option<StepMetrics>> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch = self.buffer.sample(rng, self.config.batch_size);
        self.train_on_batch(&batch).map(Some)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Episode bookkeeping: epsilon decay and periodic target sync.
    pub fn end_episode(&mut self) {
        self.episodes_done += 1;
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_min);
        if self
            .episodes_done
            .is_multiple_of(self.config.target_sync_episodes)
        {
            self.sync_target();
        }
    }
}
