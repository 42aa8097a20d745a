use std::fmt::Write as _;

use super::config::RunConfig;
use super::train::{duel, run_training, TrainingOutcome};
use crate::agent::AgentKind;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedComparison {
    pub seed: u64,
    pub dqn_episodes: Option<usize>,
    pub causal_episodes: Option<usize>,
    /// Duel means with the baseline as agent A and the causal agent as B.
    pub duel_dqn: f64,
    pub duel_causal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub max_episodes: usize,
    pub rows: Vec<SeedComparison>,
}

/// Median where an unsolved run counts as `max_episodes + 1`.
pub fn censored_median(values: &[Option<usize>], max_episodes: usize) -> f64 {
    let mut v: Vec<usize> = values
        .iter()
        .map(|e| e.unwrap_or(max_episodes + 1))
        .collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

impl ComparisonReport {
    pub fn median_dqn(&self) -> f64 {
        let v: Vec<_> = self.rows.iter().map(|r| r.dqn_episodes).collect();
        censored_median(&v, self.max_episodes)
    }

    pub fn median_causal(&self) -> f64 {
        let v: Vec<_> = self.rows.iter().map(|r| r.causal_episodes).collect();
        censored_median(&v, self.max_episodes)
    }

    pub fn duel_mean_dqn(&self) -> f64 {
        self.rows.iter().map(|r| r.duel_dqn).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn duel_mean_causal(&self) -> f64 {
        self.rows.iter().map(|r| r.duel_causal).sum::<f64>() / self.rows.len().max(1) as f64
    }

    pub fn causal_not_slower(&self) -> bool {
        self.median_causal() <= self.median_dqn()
    }

    pub fn table(&self) -> String {
        let fmt = |e: Option<usize>| {
            e.map_or_else(|| format!(">{}", self.max_episodes), |v| v.to_string())
        };
        let mut s = String::new();
        let _ = writeln!(s, "seed  dqn_solve  causal_solve  duel_dqn  duel_causal");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<5} {:>9}  {:>12}  {:>8.1}  {:>11.1}",
                r.seed,
                fmt(r.dqn_episodes),
                fmt(r.causal_episodes),
                r.duel_dqn,
                r.duel_causal
            );
        }
        let _ = writeln!(
            s,
            "median episodes-to-solve: dqn {:.1}, causal {:.1}",
            self.median_dqn(),
            self.median_causal()
        );
        let _ = writeln!(
            s,
            "duel mean score: dqn {:.1}, causal {:.1}",
            self.duel_mean_dqn(),
            self.duel_mean_causal()
        );
        s
    }
}

/// Trains both agents on matched seeds in parallel and duels each pair.
pub fn compare(
    base: &RunConfig,
    seeds: &[u64],
    rounds: usize,
    episodes_per_round: usize,
) -> Result<(ComparisonReport, Vec<(TrainingOutcome, TrainingOutcome)>)> {
    let configured = |seed: u64, kind: AgentKind| {
        let mut c = base.clone();
        c.seed = seed;
        c.agent.kind = kind;
        c
    };
    let results: Vec<Result<(TrainingOutcome, TrainingOutcome)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let dqn = configured(seed, AgentKind::Dqn);
                let causal = configured(seed, AgentKind::Causal);
                (
                    scope.spawn(move || run_training(&dqn)),
                    scope.spawn(move || run_training(&causal)),
                )
            })
            .collect();
        handles
            .into_iter()
            .map(|(a, b)| {
                Ok((
                    a.join().expect("training thread")?,
                    b.join().expect("training thread")?,
                ))
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(seeds.len());
    let mut outcomes = Vec::with_capacity(seeds.len());
    for (&seed, res) in seeds.iter().zip(results) {
        let (dqn, causal) = res?;
        let result = duel(
            &dqn.checkpoint.params,
            &causal.checkpoint.params,
            &base.env,
            rounds,
            episodes_per_round,
            seed,
        )?;
        rows.push(SeedComparison {
            seed,
            dqn_episodes: dqn.episodes_to_solve,
            causal_episodes: causal.episodes_to_solve,
            duel_dqn: result.mean_a(),
            duel_causal: result.mean_b(),
        });
        outcomes.push((dqn, causal));
    }
    Ok((
        ComparisonReport {
            max_episodes: base.max_episodes,
            rows,
        },
        outcomes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_with_censoring() {
        assert_eq!(censored_median(&[Some(3), Some(1), Some(2)], 10), 2.0);
        assert_eq!(censored_median(&[Some(3), None, Some(1), Some(2)], 10), 2.5);
        assert_eq!(censored_median(&[None, None, Some(5)], 10), 11.0);
    }

    #[test]
    fn table_lists_medians() {
        let report = ComparisonReport {
            max_episodes: 100,
            rows: vec![SeedComparison {
                seed: 1,
                dqn_episodes: None,
                causal_episodes: Some(40),
                duel_dqn: 20.0,
                duel_causal: 300.0,
            }],
        };
        let t = report.table();
        assert!(t.contains(">100"));
        assert!(t.contains("median episodes-to-solve: dqn 101.0, causal 40.0"));
        assert!(report.causal_not_slower());
    }
}
