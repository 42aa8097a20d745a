use super::{GradientSet, NetworkParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state with bias-corrected updates.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    first_moment: GradientSet,
    second_moment: GradientSet,
}

impl OptimizerState {
    pub fn new(params: &NetworkParams, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first_moment: GradientSet::zeros_like(params),
            second_moment: GradientSet::zeros_like(params),
        }
    }

    /// Applies one update in place. Rejects non-finite gradients before
    /// touching any state.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &GradientSet) -> Result<()> {
        if !grads.matches_shape(params) || !self.first_moment.matches_shape(params) {
            return Err(Error::DimensionMismatch {
                expected: params.num_params(),
                actual: grads.iter().count(),
            });
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFinite {
                layer,
                stage: "optimizer step",
            });
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let m_correction = 1.0 - beta1.powi(t);
        let v_correction = 1.0 - beta2.powi(t);

        for (k, layer) in params.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[k];
            let m = &mut self.first_moment.layers[k];
            let v = &mut self.second_moment.layers[k];
            let pairs = layer
                .weights
                .iter_mut()
                .zip(&g.weights)
                .zip(m.weights.iter_mut().zip(v.weights.iter_mut()))
                .chain(
                    layer
                        .biases
                        .iter_mut()
                        .zip(&g.biases)
                        .zip(m.biases.iter_mut().zip(v.biases.iter_mut())),
                );
            for ((theta, &grad), (m, v)) in pairs {
                *m = beta1 * *m + (1.0 - beta1) * grad;
                *v = beta2 * *v + (1.0 - beta2) * grad * grad;
                let m_hat = *m / m_correction;
                let v_hat = *v / v_correction;
                *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            if layer
                .weights
                .iter()
                .chain(&layer.biases)
                .any(|v| !v.is_finite())
            {
                return Err(Error::NonFinite {
                    layer: k,
                    stage: "optimizer step",
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};

    fn scalar_net(value: f64) -> NetworkParams {
        let mut layer = Layer::zeros(1, 1, Activation::Identity);
        layer.weights[0] = value;
        NetworkParams::from_layers(vec![layer]).unwrap()
    }

    fn scalar_grad(net: &NetworkParams, w: f64) -> GradientSet {
        let mut g = GradientSet::zeros_like(net);
        g.layers[0].weights[0] = w;
        g
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut net = NetworkParams::init(&[3, 5, 2], 1).unwrap();
        let before = net.clone();
        let mut opt = OptimizerState::new(&net, AdamConfig::default());
        let zeros = GradientSet::zeros_like(&net);
        for _ in 0..3 {
            opt.step(&mut net, &zeros).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(opt.step, 3);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        let mut net = scalar_net(1.0);
        let config = AdamConfig {
            learning_rate: 0.1,
            ..Default::default()
        };
        let mut opt = OptimizerState::new(&net, config);
        let g = scalar_grad(&net, 0.5);
        opt.step(&mut net, &g).unwrap();
        // m = 0.05, v = 0.00025; corrected m = 0.5, v = 0.25.
        let expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((net.get(0) - expected).abs() < 1e-15);

        // second step with gradient -1:
        // m = 0.9*0.05 - 0.1 = -0.055, v = 0.999*0.00025 + 0.001 = 0.00124975
        let g = scalar_grad(&net, -1.0);
        opt.step(&mut net, &g).unwrap();
        let m_hat = -0.055 / (1.0 - 0.81);
        let v_hat: f64 = 0.00124975 / (1.0 - 0.998001);
        let expected2 = expected - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((net.get(0) - expected2).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut net = scalar_net(2.0);
        let mut opt = OptimizerState::new(&net, AdamConfig::default());
        let g = scalar_grad(&net, f64::NAN);
        let err = opt.step(&mut net, &g).unwrap_err();
        assert!(matches!(err, Error::NonFinite { layer: 0, .. }));
        assert_eq!(net.get(0), 2.0);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn identical_sequences_are_bitwise_identical() {
        let run = || {
            let mut net = NetworkParams::init(&[4, 8, 2], 5).unwrap();
            let mut opt = OptimizerState::new(&net, AdamConfig::default());
            for i in 0..20 {
                let x = [i as f64 * 0.1, -0.3, 0.2, 1.0];
                let (out, trace) = net.forward(&x).unwrap();
                let g = net.backward(&trace, &[out[0] - 1.0, out[1]]).unwrap();
                opt.step(&mut net, &g).unwrap();
            }
            net
        };
        let a = run();
        let b = run();
        for i in 0..a.num_params() {
            assert_eq!(a.get(i).to_bits(), b.get(i).to_bits());
        }
    }
}
