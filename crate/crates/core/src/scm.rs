//! Tabulated structural causal models with a hidden-confounder layout.
//!
//! A covariate `z` drives both the treatment distribution `P(x | z)` and the
//! structural outcome `g(x, z)`; the outcome is `y = g(x, z) + u` with
//! additive noise `u` drawn independently of `(x, z)`. Because `g` is a
//! table, the interventional effect can be evaluated exactly and compared
//! with what the stratified estimator recovers from observational samples.

use std::path::Path;

use crate::error::{Error, Result};
use crate::kv::KvDoc;
use crate::peace::{peace_from_samples, ObservationTriple};
use crate::rng::{self, Rng};

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub mean: f64,
    pub variance: f64,
}

/// Tabulated decomposition `h1(x, z) + h2(z, u)` of the outcome function.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableParts {
    /// Noise values at which `h2` is tabulated.
    pub u_grid: Vec<f64>,
    /// `h1[z_idx][x_idx]`
    pub h1: Vec<Vec<f64>>,
    /// `h2[z_idx][u_idx]`
    pub h2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScmSpec {
    pub z_support: Vec<u64>,
    pub z_probs: Vec<f64>,
    /// Strictly increasing treatment values.
    pub x_support: Vec<i64>,
    /// `x_given_z[z_idx][x_idx] = P(x | z)`
    pub x_given_z: Vec<Vec<f64>>,
    /// `g[z_idx][x_idx]`
    pub g: Vec<Vec<f64>>,
    pub noise: NoiseSpec,
    pub separable: Option<SeparableParts>,
}

fn check_distribution(name: &str, probs: &[f64], problems: &mut Vec<String>) {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        problems.push(format!("{name} has a negative or non-finite probability"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        problems.push(format!("{name} sums to {sum}, not 1"));
    }
}

impl ScmSpec {
    /// Lists every violated invariant; empty when the model is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let nz = self.z_support.len();
        let nx = self.x_support.len();
        if nz == 0 {
            problems.push("z support is empty".into());
        }
        if nx == 0 {
            problems.push("x support is empty".into());
        }
        if self.z_probs.len() != nz {
            problems.push(format!(
                "z has {nz} values but {} probabilities",
                self.z_probs.len()
            ));
        } else if nz > 0 {
            check_distribution("z probabilities", &self.z_probs, &mut problems);
        }
        let mut sorted_z = self.z_support.clone();
        sorted_z.sort_unstable();
        sorted_z.dedup();
        if sorted_z.len() != nz {
            problems.push("z support contains duplicates".into());
        }
        if self.x_support.windows(2).any(|w| w[0] >= w[1]) {
            problems.push("x support is not strictly increasing".into());
        }
        if self.x_given_z.len() != nz {
            problems.push(format!(
                "P(x|z) has {} rows, expected {nz}",
                self.x_given_z.len()
            ));
        }
        for (zi, row) in self.x_given_z.iter().enumerate() {
            let label = format!("P(x|z={})", self.z_support.get(zi).copied().unwrap_or(0));
            if row.len() != nx {
                problems.push(format!("{label} has {} entries, expected {nx}", row.len()));
            } else {
                check_distribution(&label, row, &mut problems);
            }
        }
        if self.g.len() != nz || self.g.iter().any(|row| row.len() != nx) {
            problems.push(format!("g must be a {nz}x{nx} table"));
        }
        if self.g.iter().flatten().any(|v| !v.is_finite()) {
            problems.push("g has a non-finite entry".into());
        }
        if !self.noise.mean.is_finite()
            || !self.noise.variance.is_finite()
            || self.noise.variance < 0.0
        {
            problems.push(format!(
                "noise must have finite mean and nonnegative variance, got mean {} variance {}",
                self.noise.mean, self.noise.variance
            ));
        }
        if let Some(parts) = &self.separable {
            let nu = parts.u_grid.len();
            if parts.h1.len() != nz || parts.h1.iter().any(|r| r.len() != nx) {
                problems.push(format!("separable h1 must be a {nz}x{nx} table"));
            }
            if parts.h2.len() != nz || parts.h2.iter().any(|r| r.len() != nu) {
                problems.push(format!("separable h2 must be a {nz}x{nu} table"));
            }
        }
        problems
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.violations();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScm(problems))
        }
    }

    fn z_index(&self, z: u64) -> Result<usize> {
        self.z_support
            .iter()
            .position(|&v| v == z)
            .ok_or(Error::UnknownCovariate(z))
    }

    /// Full outcome function `g(x, z) + u`.
    pub fn outcome(&self, z_idx: usize, x_idx: usize, u: f64) -> f64 {
        self.g[z_idx][x_idx] + u
    }

    /// Attaches the trivial decomposition `h1 = g`, `h2(z, u) = u`.
    pub fn with_additive_parts(mut self, u_grid: Vec<f64>) -> Self {
        let h2 = self.z_support.iter().map(|_| u_grid.clone()).collect();
        self.separable = Some(SeparableParts {
            u_grid,
            h1: self.g.clone(),
            h2,
        });
        self
    }

    /// A random model with strictly positive treatment probabilities in every
    /// stratum and `g` entries in [-2, 2].
    pub fn random(seed: u64, n_z: usize, n_x: usize, noise_variance: f64) -> Self {
        let mut rng = rng::seeded(seed);
        let z_probs = random_simplex(&mut rng, n_z);
        let x_given_z = (0..n_z).map(|_| random_simplex(&mut rng, n_x)).collect();
        let g = (0..n_z)
            .map(|_| {
                (0..n_x)
                    .map(|_| rng::uniform_range(&mut rng, -2.0, 2.0))
                    .collect()
            })
            .collect();
        Self {
            z_support: (0..n_z as u64).collect(),
            z_probs,
            x_support: (0..n_x as i64).collect(),
            x_given_z,
            g,
            noise: NoiseSpec {
                mean: 0.0,
                variance: noise_variance,
            },
            separable: None,
        }
    }

    /// Two-stratum model in which `z = 1` makes treatment 1 likely and also
    /// raises the outcome, so pooling the strata overstates the effect.
    pub fn confounded_example() -> Self {
        Self {
            z_support: vec![0, 1],
            z_probs: vec![0.5, 0.5],
            x_support: vec![0, 1],
            x_given_z: vec![vec![0.8, 0.2], vec![0.2, 0.8]],
            g: vec![vec![0.0, 0.5], vec![3.0, 3.5]],
            noise: NoiseSpec {
                mean: 0.0,
                variance: 0.25,
            },
            separable: None,
        }
    }

    pub fn to_kv(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set_list("z.support", &self.z_support);
        doc.set_list("z.probs", &self.z_probs);
        doc.set_list("x.support", &self.x_support);
        for (zi, z) in self.z_support.iter().enumerate() {
            if let Some(row) = self.x_given_z.get(zi) {
                doc.set_list(format!("x_given_z.{z}"), row);
            }
            if let Some(row) = self.g.get(zi) {
                doc.set_list(format!("g.{z}"), row);
            }
        }
        doc.set("noise.mean", self.noise.mean);
        doc.set("noise.variance", self.noise.variance);
        if let Some(parts) = &self.separable {
            doc.set_list("separable.u_grid", &parts.u_grid);
            for (zi, z) in self.z_support.iter().enumerate() {
                doc.set_list(format!("separable.h1.{z}"), &parts.h1[zi]);
                doc.set_list(format!("separable.h2.{z}"), &parts.h2[zi]);
            }
        }
        doc
    }

    pub fn from_kv(doc: &KvDoc) -> Result<Self> {
        let z_support: Vec<u64> = doc.require_list("z.support")?;
        let per_z = |prefix: &str| -> Result<Vec<Vec<f64>>> {
            z_support
                .iter()
                .map(|z| doc.require_list(&format!("{prefix}.{z}")))
                .collect()
        };
        let separable = match doc.get_list::<f64>("separable.u_grid")? {
            Some(u_grid) => Some(SeparableParts {
                u_grid,
                h1: per_z("separable.h1")?,
                h2: per_z("separable.h2")?,
            }),
            None => None,
        };
        let spec = Self {
            z_probs: doc.require_list("z.probs")?,
            x_support: doc.require_list("x.support")?,
            x_given_z: per_z("x_given_z")?,
            g: per_z("g")?,
            noise: NoiseSpec {
                mean: doc.get("noise.mean")?.unwrap_or(0.0),
                variance: doc.get("noise.variance")?.unwrap_or(0.0),
            },
            separable,
            z_support,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KvDoc::load(path)?)
    }
}

fn random_simplex(rng: &mut Rng, n: usize) -> Vec<f64> {
    // Offset keeps every entry away from zero.
    let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng::uniform(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Draws `n` observational samples: `z ~ P(z)`, `x ~ P(x | z)`,
/// `y = g(x, z) + u` with Gaussian `u` independent of both.
pub fn sample_observational(spec: &ScmSpec, n: usize, seed: u64) -> Result<Vec<ObservationTriple>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let std_dev = spec.noise.variance.sqrt();
    let samples = (0..n)
        .map(|_| {
            let zi = rng::categorical(&mut rng, &spec.z_probs);
            let xi = rng::categorical(&mut rng, &spec.x_given_z[zi]);
            let u = rng::normal(&mut rng, spec.noise.mean, std_dev);
            ObservationTriple::new(
                spec.x_support[xi],
                spec.z_support[zi],
                spec.outcome(zi, xi, u),
            )
        })
        .collect();
    Ok(samples)
}

/// Interventional variation within stratum `z`, evaluated on the true `g`
/// over the full treatment support.
pub fn exact_piev(spec: &ScmSpec, z: u64) -> Result<f64> {
    let zi = spec.z_index(z)?;
    let g = &spec.g[zi];
    let p = &spec.x_given_z[zi];
    let mut total = 0.0;
    for i in 1..spec.x_support.len() {
        total += (g[i] - g[i - 1]).abs() * p[i] * p[i - 1];
    }
    Ok(total)
}

pub fn exact_peace(spec: &ScmSpec) -> Result<f64> {
    spec.validate()?;
    let mut total = 0.0;
    for (z, pz) in spec.z_support.iter().zip(&spec.z_probs) {
        total += pz * exact_piev(spec, *z)?;
    }
    Ok(total)
}

/// Largest deviation of `h1(x, z) + h2(z, u)` from `g(x, z) + u` over the
/// tabulated grid, compared against `tolerance`.
pub fn check_separability(spec: &ScmSpec, tolerance: f64) -> Result<bool> {
    let parts = spec
        .separable
        .as_ref()
        .ok_or(Error::MissingSeparableParts)?;
    let mut worst = 0.0f64;
    for zi in 0..spec.z_support.len() {
        for xi in 0..spec.x_support.len() {
            for (ui, &u) in parts.u_grid.iter().enumerate() {
                let dev = (parts.h1[zi][xi] + parts.h2[zi][ui] - spec.outcome(zi, xi, u)).abs();
                worst = worst.max(dev);
            }
        }
    }
    Ok(worst <= tolerance)
}

/// Effect estimate that ignores the covariate and pools every sample into a
/// single stratum.
pub fn naive_peace(samples: &[ObservationTriple]) -> Result<f64> {
    let pooled: Vec<_> = samples
        .iter()
        .map(|s| ObservationTriple::new(s.x, 0, s.y))
        .collect();
    Ok(peace_from_samples(&pooled)?.peace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationRow {
    pub seed: u64,
    pub exact: f64,
    pub estimate: f64,
    pub naive: f64,
}

impl IdentificationRow {
    pub fn relative_error(&self) -> f64 {
        (self.estimate - self.exact).abs() / self.exact.abs()
    }
}

/// Compares sampled estimates against the exact effect for a set of random
/// models (`n_z` in 2..=4, `n_x` in 2..=3, unit noise variance).
pub fn identification_suite(seeds: &[u64], n: usize) -> Result<Vec<IdentificationRow>> {
    seeds
        .iter()
        .map(|&seed| {
            let spec = ScmSpec::random(seed, 2 + (seed % 3) as usize, 2 + (seed % 2) as usize, 1.0);
            let samples = sample_observational(&spec, n, seed.wrapping_add(1000))?;
            Ok(IdentificationRow {
                seed,
                exact: exact_peace(&spec)?,
                estimate: peace_from_samples(&samples)?.peace,
                naive: naive_peace(&samples)?,
            })
        })
        .collect()
}
