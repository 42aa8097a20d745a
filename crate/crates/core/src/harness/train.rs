use std::path::{Path, PathBuf};

use rand::RngCore;

use super::config::RunConfig;
use super::metrics::{DuelResult, DuelRow, EpisodeRow, MetricsLog};
use crate::agent::{greedy_action, Agent, Transition};
use crate::cartpole::{self, EnvSpec};
use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::nn::NetworkParams;
use crate::rng;

/// Rolling-mean stopping rule over a full window of episode rewards.
#[derive(Debug, Clone)]
pub struct EarlyStop {
    window: usize,
    threshold: f64,
    recent: std::collections::VecDeque<f64>,
}

impl EarlyStop {
    pub fn new(window: usize, threshold: f64) -> Self {
        Self {
            window,
            threshold,
            recent: std::collections::VecDeque::with_capacity(window),
        }
    }

    /// Records one episode reward and reports whether the rule fires now.
    pub fn push(&mut self, reward: f64) -> bool {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(reward);
        self.recent.len() == self.window && self.rolling_mean() >= self.threshold
    }

    pub fn rolling_mean(&self) -> f64 {
        self.recent.iter().sum::<f64>() / self.recent.len().max(1) as f64
    }
}

/// 1-based episode at which the rule first fires for a reward sequence.
pub fn episodes_to_solve(rewards: &[f64], window: usize, threshold: f64) -> Option<usize> {
    let mut stop = EarlyStop::new(window, threshold);
    rewards.iter().position(|&r| stop.push(r)).map(|i| i + 1)
}

/// Independent seed for sub-stream `stream`, item `index`.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut r = rng::seeded(base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut s = r.next_u64();
    for _ in 0..=index % 4 {
        s = r.next_u64();
    }
    s ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

const EVAL_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub epsilon: f64,
    pub episode: usize,
    pub config: KvDoc,
}

impl Checkpoint {
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut name = path.as_os_str().to_owned();
        name.push(".meta");
        PathBuf::from(name)
    }

    /// Writes the parameter file at `path` and the key-value sidecar next to
    /// it.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.params.save(path)?;
        let mut meta = self.config.clone();
        meta.set("checkpoint.epsilon", self.epsilon);
        meta.set("checkpoint.episode", self.episode);
        meta.save(&Self::sidecar_path(path))
    }

    /// The sidecar is optional; a bare parameter file loads with defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let params = NetworkParams::load(path)?;
        let sidecar = Self::sidecar_path(path);
        let mut config = if sidecar.exists() {
            KvDoc::load(&sidecar)?
        } else {
            KvDoc::new()
        };
        let epsilon = config.get("checkpoint.epsilon")?.unwrap_or(0.0);
        let episode = config.get("checkpoint.episode")?.unwrap_or(0);
        let mut echo = KvDoc::new();
        for key in config.keys().filter(|k| !k.starts_with("checkpoint.")) {
            echo.set(key, config.raw(key).unwrap());
        }
        config = echo;
        Ok(Self {
            params,
            epsilon,
            episode,
            config,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub checkpoint: Checkpoint,
    pub log: MetricsLog,
    pub episodes_to_solve: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub scores: Vec<f64>,
}

impl Evaluation {
    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len().max(1) as f64
    }
}

/// Greedy rollouts; episode `i` starts from the reset drawn with
/// `derive_seed(seed, EVAL_STREAM, i)`.
pub fn evaluate(
    params: &NetworkParams,
    env: &EnvSpec,
    episodes: usize,
    seed: u64,
) -> Result<Evaluation> {
    let scores = (0..episodes)
        .map(|i| {
            let s = derive_seed(seed, EVAL_STREAM, i as u64);
            cartpole::rollout(env, s, |st| greedy_action(params, &st.observation()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation { scores })
}

/// Both agents play the same starting states each round.
pub fn duel(
    a: &NetworkParams,
    b: &NetworkParams,
    env: &EnvSpec,
    rounds: usize,
    episodes_per_round: usize,
    seed: u64,
) -> Result<DuelResult> {
    let rows = (1..=rounds)
        .map(|round| {
            let round_seed = derive_seed(seed, 2, round as u64);
            Ok(DuelRow {
                round,
                score_a: evaluate(a, env, episodes_per_round, round_seed)?.mean(),
                score_b: evaluate(b, env, episodes_per_round, round_seed)?.mean(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DuelResult { rows })
}

/// Trains until the rolling mean of training rewards reaches the threshold
/// or the episode budget runs out. Single-threaded and a pure function of
/// the config.
pub fn run_training(config: &RunConfig) -> Result<TrainingOutcome> {
    config.validate()?;
    let mut rng = rng::seeded(config.seed);
    let mut agent = Agent::new(config.agent.clone(), &mut rng)?;
    let mut stop = EarlyStop::new(config.window, config.threshold);
    let mut log = MetricsLog::default();
    let mut test_reward = 0.0;
    let mut solved = None;

    for episode in 1..=config.max_episodes {
        let epsilon = agent.epsilon;
        let mut state = cartpole::reset(&config.env, rng.next_u64());
        let mut train_reward = 0.0;
        let (mut peace_sum, mut loss_sum, mut penalty_sum, mut n_updates) = (0.0, 0.0, 0.0, 0usize);
        let mut step = 0;
        loop {
            step += 1;
            let wrap = |e: Error| Error::Training {
                episode,
                step,
                source: Box::new(e),
            };
            let obs = state.observation();
            let action = agent.act(&obs, &mut rng).map_err(wrap)?;
            let out = cartpole::step(&config.env, &state, action).map_err(wrap)?;
            train_reward += out.reward;
            agent.remember(Transition::new(
                obs,
                action,
                out.reward,
                out.state.observation(),
                out.failed,
            ));
            if let Some(m) = agent.train_step(&mut rng).map_err(wrap)? {
                peace_sum += m.peace;
                loss_sum += m.loss;
                penalty_sum += m.penalty;
                n_updates += 1;
            }
            state = out.state;
            if out.done {
                break;
            }
        }
        agent.end_episode();

        if (episode - 1) % config.eval_every == 0 {
            test_reward = evaluate(
                &agent.online,
                &config.env,
                config.eval_episodes,
                derive_seed(config.seed, 3, episode as u64),
            )?
            .mean();
        }
        let per_update = |v: f64| {
            if n_updates == 0 {
                0.0
            } else {
                v / n_updates as f64
            }
        };
        log.rows.push(EpisodeRow {
            episode,
            train_reward,
            test_reward,
            mean_peace: per_update(peace_sum),
            sum_peace: peace_sum,
            mean_loss: per_update(loss_sum),
            mean_penalty: per_update(penalty_sum),
            epsilon,
        });
        if stop.push(train_reward) {
            solved = Some(episode);
            break;
        }
    }

    Ok(TrainingOutcome {
        checkpoint: Checkpoint {
            params: agent.online,
            epsilon: agent.epsilon,
            episode: agent.episodes_done,
            config: config.to_kv(),
        },
        log,
        episodes_to_solve: solved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};

    #[test]
    fn stop_fires_on_first_full_window_at_threshold() {
        let rewards = [500.0, 10.0, 190.0, 200.0, 210.0, 200.0, 250.0];
        // window 3 means: [500,10,190]=233.3 fires at episode 3.
        assert_eq!(episodes_to_solve(&rewards, 3, 200.0), Some(3));
        // window 4: [500,10,190,200] = 225
        assert_eq!(episodes_to_solve(&rewards, 4, 200.0), Some(4));
        // window 2: 255, 100, 195, 205
        assert_eq!(episodes_to_solve(&rewards, 2, 200.0), Some(2));
        assert_eq!(episodes_to_solve(&rewards[1..], 2, 200.0), Some(4));
        // a single high episode never fires before the window is full
        assert_eq!(episodes_to_solve(&[1000.0], 2, 200.0), None);
        let ramp: Vec<f64> = (0..30).map(|i| i as f64 * 10.0).collect();
        // window 10 ending at 0-based index k has mean 10k - 45: 195 at k = 24,
        // 205 at k = 25 (episode 26)
        assert_eq!(episodes_to_solve(&ramp, 10, 200.0), Some(26));
        assert_eq!(episodes_to_solve(&ramp, 10, 195.0), Some(25));
        assert_eq!(episodes_to_solve(&ramp, 10, 205.0), Some(26));
        assert_eq!(episodes_to_solve(&ramp, 10, 205.5), Some(27));
    }

    #[test]
    fn derived_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for stream in 0..3 {
            for i in 0..100 {
                assert!(seen.insert(derive_seed(42, stream, i)));
            }
        }
    }

    fn balancing_policy() -> NetworkParams {
        // Q(s, 1) - Q(s, 0) = x + x_dot + 10 theta + 2 theta_dot
        let mut layer = Layer::zeros(4, 2, Activation::Identity);
        layer.weights[4..8].copy_from_slice(&[1.0, 1.0, 10.0, 2.0]);
        NetworkParams::from_layers(vec![layer]).unwrap()
    }

    #[test]
    fn balancing_policy_hits_the_cap() {
        let env = EnvSpec::default();
        let eval = evaluate(&balancing_policy(), &env, 5, 3).unwrap();
        assert_eq!(eval.scores, vec![500.0; 5]);
    }

    #[test]
    fn untrained_networks_score_low_on_average() {
        // Individual random nets vary widely (some balance for ~100 steps);
        // the population mean is what stays in range.
        let env = EnvSpec::default();
        let means: Vec<f64> = (0..50)
            .map(|seed| {
                let net = NetworkParams::init(&[4, 64, 64, 2], seed).unwrap();
                evaluate(&net, &env, 10, seed).unwrap().mean()
            })
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        assert!((5.0..=50.0).contains(&m), "{m}");
    }

    #[test]
    fn evaluation_is_deterministic() {
        let net = NetworkParams::init(&[4, 8, 2], 1).unwrap();
        let env = EnvSpec::default();
        assert_eq!(
            evaluate(&net, &env, 5, 9).unwrap(),
            evaluate(&net, &env, 5, 9).unwrap()
        );
    }

    #[test]
    fn duel_of_identical_agents_is_even() {
        let net = NetworkParams::init(&[4, 8, 2], 2).unwrap();
        let result = duel(&net, &net, &EnvSpec::default(), 10, 5, 4).unwrap();
        assert_eq!(result.rows.len(), 10);
        assert!(result.rows.iter().all(|r| r.score_a == r.score_b));
        let strong = duel(&balancing_policy(), &net, &EnvSpec::default(), 3, 2, 4).unwrap();
        assert!(strong.mean_a() > strong.mean_b());
    }

    #[test]
    fn single_episode_cap() {
        let config = RunConfig {
            max_episodes: 1,
            threshold: 1e9,
            ..Default::default()
        };
        let out = run_training(&config).unwrap();
        assert_eq!(out.log.rows.len(), 1);
        assert_eq!(out.episodes_to_solve, None);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.bin");
        let ckpt = Checkpoint {
            params: NetworkParams::init(&[4, 8, 2], 3).unwrap(),
            epsilon: 0.25,
            episode: 17,
            config: RunConfig::default().to_kv(),
        };
        ckpt.save(&path).unwrap();
        assert!(Checkpoint::sidecar_path(&path).ends_with("agent.bin.meta"));
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);

        std::fs::write(&path, b"garbage").unwrap();
        assert!(matches!(
            Checkpoint::load(&path),
            Err(Error::Checkpoint { .. })
        ));
    }
}
