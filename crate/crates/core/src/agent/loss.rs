//! TD loss with the causal-effect penalty `lambda / (peace + floor)`.
//!
//! The effect is estimated on each minibatch with the action as treatment,
//! the binned state as stratum, and a reward-bearing outcome (see
//! [`OutcomeRule`]). A larger effect means a smaller penalty.

use super::binning::BinningRule;
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::nn::{ActivationTrace, GradientSet, NetworkParams};
use crate::peace::{CausalEffectEstimate, ObservationTriple, PeaceEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyMode {
    /// Penalty added to the loss value only; gradients come from the TD term.
    Scalar,
    /// Penalty computed on online Q-values and backpropagated through them.
    Differentiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeRule {
    /// `r + gamma * max_a' Q_target(s', a')`, or `r` at a terminal.
    TdTarget,
    /// `Q_online(s, a)`.
    QValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub penalty_floor: f64,
    pub penalty_mode: PenaltyMode,
    pub outcome_rule: OutcomeRule,
    pub binning: BinningRule,
    pub smoothing: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 1.0,
            penalty_floor: 1e-6,
            penalty_mode: PenaltyMode::Differentiable,
            outcome_rule: OutcomeRule::TdTarget,
            binning: BinningRule::sign(crate::cartpole::STATE_DIM),
            smoothing: 0.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must be in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.penalty_floor > 0.0 && self.penalty_floor.is_finite()) {
            return Err(Error::Config(format!(
                "penalty floor must be > 0, got {}",
                self.penalty_floor
            )));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::Config(format!(
                "smoothing must be >= 0, got {}",
                self.smoothing
            )));
        }
        Ok(())
    }

    /// The rule actually used for the estimate: differentiable mode always
    /// works on online Q-values.
    pub fn effective_outcome_rule(&self) -> OutcomeRule {
        match self.penalty_mode {
            PenaltyMode::Differentiable => OutcomeRule::QValue,
            PenaltyMode::Scalar => self.outcome_rule,
        }
    }

    pub fn penalty(&self, peace: f64) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda / (peace + self.penalty_floor)
        }
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Bootstrapped target `r + gamma * max_a' Q_target(s', a')`.
pub fn td_target(target_params: &NetworkParams, t: &Transition, gamma: f64) -> Result<f64> {
    if t.done {
        return Ok(t.reward);
    }
    let next = target_params.predict(&t.next_state)?;
    Ok(t.reward + gamma * max_of(&next))
}

pub fn td_error(
    params: &NetworkParams,
    target_params: &NetworkParams,
    t: &Transition,
    gamma: f64,
) -> Result<f64> {
    let q = params.predict(&t.state)?;
    Ok(td_target(target_params, t, gamma)? - q[t.action])
}

/// Computes each transition's outcome under `rule` and stores it in
/// `outcome_y`.
pub fn populate_outcomes(
    batch: &mut [Transition],
    rule: OutcomeRule,
    params: &NetworkParams,
    target_params: &NetworkParams,
    gamma: f64,
) -> Result<()> {
    for t in batch.iter_mut() {
        let y = match rule {
            OutcomeRule::TdTarget => td_target(target_params, t, gamma)?,
            OutcomeRule::QValue => params.predict(&t.state)?[t.action],
        };
        t.outcome_y = Some(y);
    }
    Ok(())
}

fn triples(
    batch: &[Transition],
    binning: &BinningRule,
    outcomes: &[f64],
) -> Vec<ObservationTriple> {
    batch
        .iter()
        .zip(outcomes)
        .map(|(t, &y)| ObservationTriple::new(t.action as i64, binning.key(&t.state), y))
        .collect()
}

/// Effect of the action on the chosen outcome within one minibatch.
pub fn batch_peace(
    batch: &[Transition],
    binning: &BinningRule,
    rule: OutcomeRule,
    params: &NetworkParams,
    target_params: &NetworkParams,
    gamma: f64,
) -> Result<CausalEffectEstimate> {
    let mut labelled = batch.to_vec();
    populate_outcomes(&mut labelled, rule, params, target_params, gamma)?;
    let outcomes: Vec<f64> = labelled.iter().map(|t| t.outcome_y.unwrap()).collect();
    PeaceEstimator::default().estimate(&triples(batch, binning, &outcomes))
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub td_loss: f64,
    pub penalty: f64,
    pub grads: GradientSet,
    pub estimate: CausalEffectEstimate,
}

/// Mean squared TD error plus the causal penalty, with the gradient of the
/// loss with respect to the online parameters.
pub fn causal_loss(
    params: &NetworkParams,
    target_params: &NetworkParams,
    batch: &[Transition],
    config: &LossConfig,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = batch.len() as f64;
    let mut traces: Vec<ActivationTrace> = Vec::with_capacity(batch.len());
    let mut q_taken = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let (q, trace) = params.forward(&t.state)?;
        q_taken.push(q[t.action]);
        traces.push(trace);
        targets.push(td_target(target_params, t, config.gamma)?);
    }

    let residuals: Vec<f64> = targets.iter().zip(&q_taken).map(|(y, q)| y - q).collect();
    let td_loss = residuals.iter().map(|d| d * d).sum::<f64>() / n;
    // d(td_loss)/dQ(s_j, a_j)
    let mut d_q: Vec<f64> = residuals.iter().map(|d| -2.0 * d / n).collect();

    let rule = config.effective_outcome_rule();
    let outcomes = match rule {
        OutcomeRule::TdTarget => &targets,
        OutcomeRule::QValue => &q_taken,
    };
    let obs = triples(batch, &config.binning, outcomes);
    let estimator = PeaceEstimator::new(config.smoothing);

    let differentiable = config.penalty_mode == PenaltyMode::Differentiable && config.lambda != 0.0;
    let (estimate, penalty) = if differentiable {
        let (estimate, d_peace) = estimator.estimate_with_outcome_gradient(&obs)?;
        let denom = estimate.peace + config.penalty_floor;
        let d_penalty = -config.lambda / (denom * denom);
        for (dq, dp) in d_q.iter_mut().zip(&d_peace) {
            *dq += d_penalty * dp;
        }
        let penalty = config.penalty(estimate.peace);
        (estimate, penalty)
    } else {
        let estimate = estimator.estimate(&obs)?;
        let penalty = config.penalty(estimate.peace);
        (estimate, penalty)
    };

    let loss = if config.lambda == 0.0 {
        td_loss
    } else {
        td_loss + penalty
    };
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(loss));
    }

    let mut grads = GradientSet::zeros_like(params);
    let mut out_grad = vec![0.0; params.output_dim()];
    for ((t, trace), dq) in batch.iter().zip(&traces).zip(&d_q) {
        out_grad.fill(0.0);
        out_grad[t.action] = *dq;
        params.backward_into(trace, &out_grad, &mut grads)?;
    }

    Ok(LossOutput {
        loss,
        td_loss,
        penalty,
        grads,
        estimate,
    })
}
