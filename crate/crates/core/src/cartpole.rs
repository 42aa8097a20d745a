//! Cart-pole balancing with the classic-control constants and explicit
//! Euler integration.

use crate::error::{Error, Result};
use crate::rng;

pub const N_ACTIONS: usize = 2;
pub const STATE_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub pole_half_length: f64,
    pub force_magnitude: f64,
    pub tau: f64,
    pub max_steps: usize,
    pub position_limit: f64,
    pub angle_limit: f64,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            force_magnitude: 10.0,
            tau: 0.02,
            max_steps: 500,
            position_limit: 2.4,
            angle_limit: 12.0 * 2.0 * std::f64::consts::PI / 360.0,
        }
    }
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gravity", self.gravity),
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_half_length", self.pole_half_length),
            ("force_magnitude", self.force_magnitude),
            ("tau", self.tau),
            ("position_limit", self.position_limit),
            ("angle_limit", self.angle_limit),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "env.{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Config("env.max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: EnvState,
    pub reward: f64,
    /// Episode over, either by failure or by the step cap.
    pub done: bool,
    /// The pole fell or the cart left the track.
    pub failed: bool,
}

impl EnvState {
    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            x,
            x_dot,
            theta,
            theta_dot,
            steps: 0,
        }
    }

    pub fn observation(&self) -> [f64; STATE_DIM] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn failed(&self, spec: &EnvSpec) -> bool {
        self.x.abs() > spec.position_limit || self.theta.abs() > spec.angle_limit
    }

    pub fn is_terminal(&self, spec: &EnvSpec) -> bool {
        self.failed(spec) || self.steps >= spec.max_steps
    }

    pub fn mirrored(&self) -> Self {
        Self {
            x: -self.x,
            x_dot: -self.x_dot,
            theta: -self.theta,
            theta_dot: -self.theta_dot,
            steps: self.steps,
        }
    }
}

/// Every state component uniform in [-0.05, 0.05].
pub fn reset(_spec: &EnvSpec, seed: u64) -> EnvState {
    let mut r = rng::seeded(seed);
    let mut draw = || rng::uniform_range(&mut r, -0.05, 0.05);
    let (x, x_dot, theta, theta_dot) = (draw(), draw(), draw(), draw());
    EnvState::new(x, x_dot, theta, theta_dot)
}

pub fn step(spec: &EnvSpec, state: &EnvState, action: usize) -> Result<StepResult> {
    if action >= N_ACTIONS {
        return Err(Error::InvalidAction(action));
    }
    if state.is_terminal(spec) {
        return Err(Error::TerminalState);
    }
    let force = if action == 1 {
        spec.force_magnitude
    } else {
        -spec.force_magnitude
    };
    let (sin, cos) = state.theta.sin_cos();
    let total_mass = spec.cart_mass + spec.pole_mass;
    let pole_mass_length = spec.pole_mass * spec.pole_half_length;

    let temp = (force + pole_mass_length * state.theta_dot * state.theta_dot * sin) / total_mass;
    let theta_acc = (spec.gravity * sin - cos * temp)
        / (spec.pole_half_length * (4.0 / 3.0 - spec.pole_mass * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

    let next = EnvState {
        x: state.x + spec.tau * state.x_dot,
        x_dot: state.x_dot + spec.tau * x_acc,
        theta: state.theta + spec.tau * state.theta_dot,
        theta_dot: state.theta_dot + spec.tau * theta_acc,
        steps: state.steps + 1,
    };
    let failed = next.failed(spec);
    Ok(StepResult {
        state: next,
        reward: 1.0,
        done: failed || next.steps >= spec.max_steps,
        failed,
    })
}

/// Runs one episode under `policy`, returning the total reward.
pub fn rollout<F>(spec: &EnvSpec, seed: u64, mut policy: F) -> Result<f64>
where
    F: FnMut(&EnvState) -> Result<usize>,
{
    let mut state = reset(spec, seed);
    let mut total = 0.0;
    loop {
        let action = policy(&state)?;
        let out = step(spec, &state, action)?;
        total += out.reward;
        state = out.state;
        if out.done {
            return Ok(total);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_seeded_and_small() {
        let spec = EnvSpec::default();
        assert_eq!(reset(&spec, 5), reset(&spec, 5));
        assert_ne!(reset(&spec, 5), reset(&spec, 6));
        for seed in 0..1000 {
            let s = reset(&spec, seed);
            assert!(s.observation().iter().all(|v| v.abs() <= 0.05));
            assert_eq!(s.steps, 0);
        }
    }

    #[test]
    fn reset_means_are_centered() {
        let spec = EnvSpec::default();
        let mut sums = [0.0; 4];
        for seed in 0..10_000 {
            for (s, v) in sums.iter_mut().zip(reset(&spec, seed).observation()) {
                *s += v;
            }
        }
        for s in sums {
            assert!((s / 1e4).abs() < 0.005);
        }
    }

    #[test]
    fn push_right_from_rest() {
        let spec = EnvSpec::default();
        let out = step(&spec, &EnvState::new(0.0, 0.0, 0.0, 0.0), 1).unwrap();
        // temp = 10/1.1; theta_acc = -temp / (0.5 * (4/3 - 0.1/1.1)); x_acc = temp - 0.05*theta_acc/1.1
        let temp = 10.0 / 1.1;
        let theta_acc = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1));
        let x_acc = temp - 0.05 * theta_acc / 1.1;
        assert_eq!(out.state.x, 0.0);
        assert_eq!(out.state.theta, 0.0);
        assert!((out.state.x_dot - 0.02 * x_acc).abs() < 1e-12);
        assert!((out.state.theta_dot - 0.02 * theta_acc).abs() < 1e-12);
        assert!((out.state.x_dot - 0.1951).abs() < 1e-4);
        assert!((out.state.theta_dot + 0.2927).abs() < 1e-4);
        assert_eq!(out.reward, 1.0);
        assert!(!out.done);
    }

    #[test]
    fn actions_mirror_each_other() {
        let spec = EnvSpec::default();
        let left = step(&spec, &EnvState::new(0.0, 0.0, 0.0, 0.0), 0)
            .unwrap()
            .state;
        let right = step(&spec, &EnvState::new(0.0, 0.0, 0.0, 0.0), 1)
            .unwrap()
            .state;
        assert_eq!(left, right.mirrored());
    }

    #[test]
    fn terminal_states_cannot_step() {
        let spec = EnvSpec::default();
        let fallen = EnvState::new(0.0, 0.0, 0.3, 0.0);
        assert!(matches!(step(&spec, &fallen, 0), Err(Error::TerminalState)));
        let capped = EnvState {
            steps: 500,
            ..EnvState::new(0.0, 0.0, 0.0, 0.0)
        };
        assert!(matches!(step(&spec, &capped, 0), Err(Error::TerminalState)));
        assert!(matches!(
            step(&spec, &EnvState::new(0.0, 0.0, 0.0, 0.0), 2),
            Err(Error::InvalidAction(2))
        ));
    }

    #[test]
    fn episode_length_bounded_and_equals_return() {
        let spec = EnvSpec {
            max_steps: 50,
            ..Default::default()
        };
        // Alternating pushes keep the pole up well past 50 steps.
        let mut steps = 0;
        let ret = rollout(&spec, 1, |s| {
            steps += 1;
            Ok(s.steps % 2)
        })
        .unwrap();
        assert_eq!(ret, steps as f64);
        assert!(ret <= 50.0);
    }

    #[test]
    fn invalid_spec_rejected() {
        let spec = EnvSpec {
            tau: 0.0,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
        assert!(EnvSpec::default().validate().is_ok());
    }
}
