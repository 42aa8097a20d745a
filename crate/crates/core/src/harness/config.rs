use std::path::{Path, PathBuf};

use crate::agent::{AgentConfig, BinningRule, OutcomeRule, PenaltyMode};
use crate::cartpole::{EnvSpec, STATE_DIM};
use crate::error::{Error, Result};
use crate::kv::KvDoc;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub agent: AgentConfig,
    pub env: EnvSpec,
    pub max_episodes: usize,
    /// Solved when the rolling mean of the last `window` training rewards
    /// reaches this value.
    pub threshold: f64,
    pub window: usize,
    /// Greedy evaluation runs on episode 1 and every `eval_every` episodes
    /// after it; other rows repeat the latest result.
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            agent: AgentConfig::default(),
            env: EnvSpec::default(),
            max_episodes: 1000,
            threshold: 200.0,
            window: 10,
            eval_every: 10,
            eval_episodes: 1,
            out_dir: None,
        }
    }
}

fn penalty_mode_str(m: PenaltyMode) -> &'static str {
    match m {
        PenaltyMode::Scalar => "scalar",
        PenaltyMode::Differentiable => "differentiable",
    }
}

fn outcome_rule_str(r: OutcomeRule) -> &'static str {
    match r {
        OutcomeRule::TdTarget => "td_target",
        OutcomeRule::QValue => "q_value",
    }
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "agent.kind",
    "agent.gamma",
    "agent.lambda",
    "agent.penalty_floor",
    "agent.penalty_mode",
    "agent.outcome_rule",
    "agent.binning",
    "agent.smoothing",
    "agent.batch_size",
    "agent.buffer_capacity",
    "agent.target_sync_episodes",
    "agent.epsilon_start",
    "agent.epsilon_min",
    "agent.epsilon_decay",
    "net.hidden",
    "net.learning_rate",
    "net.beta1",
    "net.beta2",
    "net.epsilon",
    "env.gravity",
    "env.cart_mass",
    "env.pole_mass",
    "env.pole_half_length",
    "env.force_magnitude",
    "env.tau",
    "env.max_steps",
    "env.position_limit",
    "env.angle_limit",
    "train.max_episodes",
    "train.threshold",
    "train.window",
    "train.eval_every",
    "train.eval_episodes",
    "train.out",
];

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.contains(&key)
        || key
            .strip_prefix("agent.binning.dim")
            .and_then(|d| d.parse::<usize>().ok())
            .is_some_and(|d| d < STATE_DIM)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.env.validate()?;
        if self.max_episodes == 0 {
            return Err(Error::Config(
                "train.max_episodes must be at least 1".into(),
            ));
        }
        if self.window == 0 || self.eval_every == 0 {
            return Err(Error::Config(
                "train.window and train.eval_every must be at least 1".into(),
            ));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Config("train.threshold must be finite".into()));
        }
        Ok(())
    }

    /// Applies every entry of `doc` on top of `self`. Unknown keys are
    /// rejected so typos do not silently fall back to defaults.
    pub fn apply(&mut self, doc: &KvDoc) -> Result<()> {
        if let Some(key) = doc.keys().find(|k| !is_known(k)) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = doc.get($key)? {
                    $field = v;
                }
            };
        }
        set!("seed", self.seed);
        set!("agent.kind", self.agent.kind);
        set!("agent.gamma", self.agent.loss.gamma);
        set!("agent.lambda", self.agent.loss.lambda);
        set!("agent.penalty_floor", self.agent.loss.penalty_floor);
        set!("agent.smoothing", self.agent.loss.smoothing);
        set!("agent.batch_size", self.agent.batch_size);
        set!("agent.buffer_capacity", self.agent.buffer_capacity);
        set!(
            "agent.target_sync_episodes",
            self.agent.target_sync_episodes
        );
        set!("agent.epsilon_start", self.agent.epsilon_start);
        set!("agent.epsilon_min", self.agent.epsilon_min);
        set!("agent.epsilon_decay", self.agent.epsilon_decay);
        set!("net.learning_rate", self.agent.adam.learning_rate);
        set!("net.beta1", self.agent.adam.beta1);
        set!("net.beta2", self.agent.adam.beta2);
        set!("net.epsilon", self.agent.adam.epsilon);
        set!("env.gravity", self.env.gravity);
        set!("env.cart_mass", self.env.cart_mass);
        set!("env.pole_mass", self.env.pole_mass);
        set!("env.pole_half_length", self.env.pole_half_length);
        set!("env.force_magnitude", self.env.force_magnitude);
        set!("env.tau", self.env.tau);
        set!("env.max_steps", self.env.max_steps);
        set!("env.position_limit", self.env.position_limit);
        set!("env.angle_limit", self.env.angle_limit);
        set!("train.max_episodes", self.max_episodes);
        set!("train.threshold", self.threshold);
        set!("train.window", self.window);
        set!("train.eval_every", self.eval_every);
        set!("train.eval_episodes", self.eval_episodes);
        if let Some(hidden) = doc.get_list("net.hidden")? {
            self.agent.hidden = hidden;
        }
        if let Some(out) = doc.raw("train.out") {
            self.out_dir = Some(PathBuf::from(out));
        }
        if let Some(mode) = doc.raw("agent.penalty_mode") {
            self.agent.loss.penalty_mode = match mode {
                "scalar" => PenaltyMode::Scalar,
                "differentiable" => PenaltyMode::Differentiable,
                other => {
                    return Err(Error::Config(format!(
                        "agent.penalty_mode must be scalar or differentiable, got `{other}`"
                    )))
                }
            };
        }
        if let Some(rule) = doc.raw("agent.outcome_rule") {
            self.agent.loss.outcome_rule = match rule {
                "td_target" => OutcomeRule::TdTarget,
                "q_value" => OutcomeRule::QValue,
                other => {
                    return Err(Error::Config(format!(
                        "agent.outcome_rule must be td_target or q_value, got `{other}`"
                    )))
                }
            };
        }
        if let Some(binning) = doc.raw("agent.binning") {
            self.agent.loss.binning = match binning {
                "sign" => BinningRule::sign(STATE_DIM),
                "single" => BinningRule::single(STATE_DIM),
                "custom" => {
                    let dims = (0..STATE_DIM)
                        .map(|d| {
                            doc.get_list(&format!("agent.binning.dim{d}"))
                                .map(Option::unwrap_or_default)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    BinningRule::new(dims)?
                }
                other => {
                    return Err(Error::Config(format!(
                        "agent.binning must be sign, single or custom, got `{other}`"
                    )))
                }
            };
        }
        self.validate()
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let mut config = Self::default();
        config.apply(doc)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvDoc::load(path)?)
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        let a = &self.agent;
        doc.set("seed", self.seed);
        doc.set("agent.kind", a.kind);
        doc.set("agent.gamma", a.loss.gamma);
        doc.set("agent.lambda", a.loss.lambda);
        doc.set("agent.penalty_floor", a.loss.penalty_floor);
        doc.set("agent.penalty_mode", penalty_mode_str(a.loss.penalty_mode));
        doc.set("agent.outcome_rule", outcome_rule_str(a.loss.outcome_rule));
        doc.set("agent.binning", "custom");
        for (d, b) in a.loss.binning.boundaries().iter().enumerate() {
            doc.set_list(format!("agent.binning.dim{d}"), b);
        }
        doc.set("agent.smoothing", a.loss.smoothing);
        doc.set("agent.batch_size", a.batch_size);
        doc.set("agent.buffer_capacity", a.buffer_capacity);
        doc.set("agent.target_sync_episodes", a.target_sync_episodes);
        doc.set("agent.epsilon_start", a.epsilon_start);
        doc.set("agent.epsilon_min", a.epsilon_min);
        doc.set("agent.epsilon_decay", a.epsilon_decay);
        doc.set_list("net.hidden", &a.hidden);
        doc.set("net.learning_rate", a.adam.learning_rate);
        doc.set("net.beta1", a.adam.beta1);
        doc.set("net.beta2", a.adam.beta2);
        doc.set("net.epsilon", a.adam.epsilon);
        let e = &self.env;
        doc.set("env.gravity", e.gravity);
        doc.set("env.cart_mass", e.cart_mass);
        doc.set("env.pole_mass", e.pole_mass);
        doc.set("env.pole_half_length", e.pole_half_length);
        doc.set("env.force_magnitude", e.force_magnitude);
        doc.set("env.tau", e.tau);
        doc.set("env.max_steps", e.max_steps);
        doc.set("env.position_limit", e.position_limit);
        doc.set("env.angle_limit", e.angle_limit);
        doc.set("train.max_episodes", self.max_episodes);
        doc.set("train.threshold", self.threshold);
        doc.set("train.window", self.window);
        doc.set("train.eval_every", self.eval_every);
        doc.set("train.eval_episodes", self.eval_episodes);
        if let Some(out) = &self.out_dir {
            doc.set("train.out", out.display());
        }
        doc
    }
}
