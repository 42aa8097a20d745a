//! Stratified estimation of the probabilistic easy variational causal effect.
//!
//! For a discrete treatment `x`, an observed covariate stratum `z` and a real
//! outcome `y`, the per-stratum variation is
//!
//! ```text
//! piev(z) = sum_{i=1..l} |E[y | x_i, z] - E[y | x_{i-1}, z]| * P(x_i | z) * P(x_{i-1} | z)
//! ```
//!
//! over the ordered treatment values `x_0 < ... < x_l` seen in the stratum,
//! and the effect is its expectation over the empirical stratum distribution,
//! `peace = sum_z P(z) * piev(z)`. All conditional quantities are empirical
//! frequencies and sample means.
//!
//! A stratum with fewer than two distinct treatment values has no adjacent
//! pair and contributes zero; such strata are counted in
//! [`CausalEffectEstimate::n_degenerate_strata`].

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One observation: treatment `x`, covariate stratum `z`, outcome `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationTriple {
    pub x: i64,
    pub z: u64,
    pub y: f64,
}

impl ObservationTriple {
    pub fn new(x: i64, z: u64, y: f64) -> Self {
        Self { x, z, y }
    }
}

/// Empirical conditional statistics of one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumStats {
    pub stratum: u64,
    /// Distinct treatment values, strictly increasing.
    pub values: Vec<i64>,
    /// `E[y | values[i], stratum]`.
    pub cond_mean: Vec<f64>,
    /// `P(values[i] | stratum)`.
    pub cond_prob: Vec<f64>,
    /// Number of samples behind each `cond_mean` entry.
    pub value_counts: Vec<usize>,
    pub count: usize,
}

impl StratumStats {
    pub fn is_degenerate(&self) -> bool {
        self.values.len() < 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalEffectEstimate {
    pub peace: f64,
    pub per_stratum_piev: BTreeMap<u64, f64>,
    pub stratum_weight: BTreeMap<u64, f64>,
    pub n_samples: usize,
    pub n_degenerate_strata: usize,
}

/// Estimator options. The default applies no smoothing, so conditional
/// probabilities are raw relative frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeaceEstimator {
    /// Additive (Laplace) constant applied to the per-value counts of each
    /// stratum before normalizing. Only observed values are smoothed.
    pub smoothing: f64,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl PeaceEstimator {
    pub fn new(smoothing: f64) -> Self {
        Self { smoothing }
    }

    pub fn build_strata(&self, samples: &[ObservationTriple]) -> Result<Vec<StratumStats>> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        // Each cell accumulates deviations from its first outcome, so a
        // constant cell has a mean equal to that constant with no rounding.
        let mut cells: BTreeMap<u64, BTreeMap<i64, (f64, CompensatedSum, usize)>> = BTreeMap::new();
        for (index, s) in samples.iter().enumerate() {
            if !s.y.is_finite() {
                return Err(Error::NonFiniteOutcome { index, value: s.y });
            }
            let cell = cells.entry(s.z).or_default().entry(s.x).or_insert((
                s.y,
                CompensatedSum::default(),
                0,
            ));
            cell.1.add(s.y - cell.0);
            cell.2 += 1;
        }

        let strata = cells
            .into_iter()
            .map(|(stratum, by_value)| {
                let count: usize = by_value.values().map(|(_, _, n)| n).sum();
                let denom = count as f64 + self.smoothing * by_value.len() as f64;
                let mut stats = StratumStats {
                    stratum,
                    values: Vec::with_capacity(by_value.len()),
                    cond_mean: Vec::with_capacity(by_value.len()),
                    cond_prob: Vec::with_capacity(by_value.len()),
                    value_counts: Vec::with_capacity(by_value.len()),
                    count,
                };
                for (x, (anchor, deviations, n)) in by_value {
                    stats.values.push(x);
                    stats.cond_mean.push(anchor + deviations.value() / n as f64);
                    stats.cond_prob.push((n as f64 + self.smoothing) / denom);
                    stats.value_counts.push(n);
                }
                stats
            })
            .collect();
        Ok(strata)
    }

    pub fn estimate(&self, samples: &[ObservationTriple]) -> Result<CausalEffectEstimate> {
        let strata = self.build_strata(samples)?;
        Ok(combine(&strata, samples.len()))
    }

    /// Estimates the effect together with its derivative with respect to
    /// every sample's outcome `y_j`.
    ///
    /// Strata and probabilities depend only on `(x, z)`, so the outcome
    /// enters through the conditional means alone:
    /// `d piev / d mean_i` collects `sign(mean_i - mean_{i-1}) p_i p_{i-1}`
    /// from the pair below and `-sign(mean_{i+1} - mean_i) p_{i+1} p_i` from
    /// the pair above, and `d mean_i / d y_j = 1 / n_i`. `sign(0)` is taken
    /// as 0, the zero subgradient of `|.|`.
    pub fn estimate_with_outcome_gradient(
        &self,
        samples: &[ObservationTriple],
    ) -> Result<(CausalEffectEstimate, Vec<f64>)> {
        let strata = self.build_strata(samples)?;
        let estimate = combine(&strata, samples.len());
        let total = samples.len() as f64;

        let mut cell_grad: BTreeMap<(u64, i64), f64> = BTreeMap::new();
        for st in &strata {
            let weight = st.count as f64 / total;
            let l = st.values.len();
            for i in 0..l {
                let mut d_mean = 0.0;
                if i >= 1 {
                    d_mean += sign(st.cond_mean[i] - st.cond_mean[i - 1])
                        * st.cond_prob[i]
                        * st.cond_prob[i - 1];
                }
                if i + 1 < l {
                    d_mean -= sign(st.cond_mean[i + 1] - st.cond_mean[i])
                        * st.cond_prob[i + 1]
                        * st.cond_prob[i];
                }
                cell_grad.insert(
                    (st.stratum, st.values[i]),
                    weight * d_mean / st.value_counts[i] as f64,
                );
            }
        }
        let grad = samples.iter().map(|s| cell_grad[&(s.z, s.x)]).collect();
        Ok((estimate, grad))
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn combine(strata: &[StratumStats], n_samples: usize) -> CausalEffectEstimate {
    let total = n_samples as f64;
    let mut per_stratum_piev = BTreeMap::new();
    let mut stratum_weight = BTreeMap::new();
    let mut peace = CompensatedSum::default();
    let mut n_degenerate_strata = 0;
    for st in strata {
        let piev = piev_for_stratum(st);
        let weight = st.count as f64 / total;
        if st.is_degenerate() {
            n_degenerate_strata += 1;
        }
        peace.add(weight * piev);
        per_stratum_piev.insert(st.stratum, piev);
        stratum_weight.insert(st.stratum, weight);
    }
    CausalEffectEstimate {
        peace: peace.value(),
        per_stratum_piev,
        stratum_weight,
        n_samples,
        n_degenerate_strata,
    }
}

/// Groups samples by stratum with raw frequencies and sample means.
pub fn build_strata(samples: &[ObservationTriple]) -> Result<Vec<StratumStats>> {
    PeaceEstimator::default().build_strata(samples)
}

/// Per-stratum variation over adjacent treatment values. Zero for a stratum
/// with fewer than two distinct values.
pub fn piev_for_stratum(stats: &StratumStats) -> f64 {
    stats
        .cond_mean
        .windows(2)
        .zip(stats.cond_prob.windows(2))
        .map(|(m, p)| (m[1] - m[0]).abs() * p[1] * p[0])
        .sum()
}

pub fn peace_from_samples(samples: &[ObservationTriple]) -> Result<CausalEffectEstimate> {
    PeaceEstimator::default().estimate(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(x: i64, z: u64, y: f64) -> ObservationTriple {
        ObservationTriple::new(x, z, y)
    }

    fn stats(values: Vec<i64>, cond_mean: Vec<f64>, cond_prob: Vec<f64>) -> StratumStats {
        let n = values.len();
        StratumStats {
            stratum: 0,
            values,
            cond_mean,
            cond_prob,
            value_counts: vec![1; n],
            count: n,
        }
    }

    #[test]
    fn two_point_stratum() {
        let strata = build_strata(&[t(0, 0, 1.0), t(1, 0, 3.0)]).unwrap();
        assert_eq!(strata.len(), 1);
        assert_eq!(strata[0].values, vec![0, 1]);
        assert_eq!(strata[0].cond_mean, vec![1.0, 3.0]);
        assert_eq!(strata[0].cond_prob, vec![0.5, 0.5]);
    }

    #[test]
    fn single_value_stratum() {
        let strata = build_strata(&[t(0, 0, 2.0), t(0, 0, 4.0)]).unwrap();
        assert_eq!(strata[0].values, vec![0]);
        assert_eq!(strata[0].cond_mean, vec![3.0]);
        assert_eq!(strata[0].cond_prob, vec![1.0]);
        assert_eq!(piev_for_stratum(&strata[0]), 0.0);
        let est = peace_from_samples(&[t(0, 0, 2.0), t(0, 0, 4.0)]).unwrap();
        assert_eq!(est.n_degenerate_strata, 1);
        assert_eq!(est.peace, 0.0);
    }

    #[test]
    fn values_are_sorted() {
        let strata = build_strata(&[t(5, 1, 0.0), t(-2, 1, 1.0), t(3, 1, 2.0)]).unwrap();
        assert_eq!(strata[0].values, vec![-2, 3, 5]);
        assert_eq!(strata[0].cond_mean, vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(build_strata(&[]), Err(Error::EmptySamples)));
    }

    #[test]
    fn nan_outcome_names_index() {
        let err = build_strata(&[t(0, 0, 1.0), t(1, 0, f64::NAN)]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteOutcome { index: 1, .. }));
        assert!(err.to_string().contains("index 1"));
    }

    #[test]
    fn piev_examples() {
        assert_eq!(
            piev_for_stratum(&stats(vec![0, 1], vec![4.2, 4.2], vec![0.5, 0.5])),
            0.0
        );
        assert_eq!(
            piev_for_stratum(&stats(vec![0, 1], vec![0.0, 1.0], vec![0.5, 0.5])),
            0.25
        );
        // |2-0|*0.3*0.2 + |3-2|*0.5*0.3
        let v = piev_for_stratum(&stats(
            vec![0, 1, 2],
            vec![0.0, 2.0, 3.0],
            vec![0.2, 0.3, 0.5],
        ));
        assert!((v - 0.27).abs() < 1e-15, "{v}");
    }

    #[test]
    fn expectation_over_equal_strata() {
        // stratum 0: means 0 and 0.8 with p = 0.5 each -> 0.2
        // stratum 1: means 0 and 1.6 with p = 0.5 each -> 0.4
        let samples = [t(0, 0, 0.0), t(1, 0, 0.8), t(0, 1, 0.0), t(1, 1, 1.6)];
        let est = peace_from_samples(&samples).unwrap();
        assert!((est.per_stratum_piev[&0] - 0.2).abs() < 1e-15);
        assert!((est.per_stratum_piev[&1] - 0.4).abs() < 1e-15);
        assert!((est.peace - 0.3).abs() < 1e-15);
        assert_eq!(est.stratum_weight[&0], 0.5);
        assert_eq!(est.n_samples, 4);
        assert_eq!(est.n_degenerate_strata, 0);
    }

    #[test]
    fn constant_outcome_has_no_effect() {
        let samples: Vec<_> = (0..30).map(|i| t(i % 3, (i % 4) as u64, 7.5)).collect();
        assert_eq!(peace_from_samples(&samples).unwrap().peace, 0.0);
    }

    #[test]
    fn smoothing_flattens_probabilities() {
        let samples = [t(0, 0, 0.0), t(0, 0, 0.0), t(0, 0, 0.0), t(1, 0, 1.0)];
        let raw = build_strata(&samples).unwrap();
        assert_eq!(raw[0].cond_prob, vec![0.75, 0.25]);
        let smoothed = PeaceEstimator::new(1.0).build_strata(&samples).unwrap();
        assert_eq!(smoothed[0].cond_prob, vec![4.0 / 6.0, 2.0 / 6.0]);
        let sum: f64 = smoothed[0].cond_prob.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn outcome_gradient_matches_finite_differences() {
        let samples = [
            t(0, 0, 0.3),
            t(1, 0, 1.1),
            t(1, 0, 0.7),
            t(2, 0, -0.4),
            t(0, 1, 2.0),
            t(1, 1, 0.5),
            t(1, 2, 0.9),
        ];
        let (est, grad) = PeaceEstimator::default()
            .estimate_with_outcome_gradient(&samples)
            .unwrap();
        assert_eq!(est, peace_from_samples(&samples).unwrap());
        let h = 1e-6;
        for j in 0..samples.len() {
            let mut plus = samples;
            let mut minus = samples;
            plus[j].y += h;
            minus[j].y -= h;
            let fd = (peace_from_samples(&plus).unwrap().peace
                - peace_from_samples(&minus).unwrap().peace)
                / (2.0 * h);
            assert!(
                (fd - grad[j]).abs() < 1e-8,
                "sample {j}: {fd} vs {}",
                grad[j]
            );
        }
        // the lone sample in a degenerate stratum has no influence
        assert_eq!(grad[6], 0.0);
    }
}
