//! Posterior sampling via Hamiltonian Monte Carlo.
//!
//! Chains integrate Hamiltonian trajectories on the unconstrained scale
//! (`[ln slope, grades...]`), with warm-up split into three windows: settle
//! the step size, estimate a diagonal mass matrix from the visited points,
//! then re-tune the step size under that metric. Each chain owns one stream
//! of a counter-based generator seeded from the run seed, so results are
//! bit-reproducible for a given configuration regardless of thread count.

mod hmc;
mod summary;

pub use summary::{hpd_interval, summarize, summarize_with_mass, Summary};

use crate::logbook::PreparedDataset;
use crate::model::{unconstrained_density_grad, ModelConfig};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// Leapfrog steps per unit of `max_leapfrog_depth`; trajectory lengths are
/// jittered uniformly over `1..=max_leapfrog_depth * STEPS_PER_DEPTH`.
pub(crate) const STEPS_PER_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup_iters: usize,
    pub sampling_iters: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_leapfrog_depth: usize,
    /// Sample grades only, holding the slope at this value.
    pub fixed_slope: Option<f64>,
    /// Worker threads for running chains; chains are independent, so the
    /// result does not depend on this.
    pub threads: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            warmup_iters: 1000,
            sampling_iters: 1000,
            seed: 0,
            target_accept: 0.8,
            max_leapfrog_depth: 10,
            fixed_slope: None,
            threads: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.chains < 1 {
            return Err(SamplerError::InvalidConfig("need at least one chain".into()));
        }
        if self.sampling_iters < 1 {
            return Err(SamplerError::InvalidConfig(
                "need at least one sampling iteration".into(),
            ));
        }
        if self.warmup_iters != 0 && self.warmup_iters < 100 {
            return Err(SamplerError::InvalidConfig(format!(
                "adaptation needs at least 100 warm-up iterations (got {}); use 0 to disable",
                self.warmup_iters
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(SamplerError::InvalidConfig(format!(
                "target acceptance must be in (0, 1), got {}",
                self.target_accept
            )));
        }
        if self.max_leapfrog_depth < 1 {
            return Err(SamplerError::InvalidConfig(
                "max leapfrog depth must be at least 1".into(),
            ));
        }
        if let Some(slope) = self.fixed_slope {
            if !(slope.is_finite() && slope > 0.0) {
                return Err(SamplerError::InvalidConfig(format!(
                    "fixed slope must be positive and finite, got {slope}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidData(String),
    #[error("dataset has no climbers")]
    EmptyDataset,
    #[error("log density is not finite at the initial point of chain {chain}")]
    NonFiniteDensity { chain: usize },
    #[error("need at least {needed} draws, got {got}")]
    TooFewDraws { needed: usize, got: usize },
}

/// A differentiable unnormalized log density on an unconstrained space.
pub trait Target: Sync {
    fn dim(&self) -> usize;
    /// Log density (up to an additive constant) and gradient at `z`;
    /// `None` when the density is not finite there.
    fn density_grad(&self, z: &[f64]) -> Option<(f64, Vec<f64>)>;
}

/// Posterior draws on the constrained scale, chain-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTrace {
    pub names: Vec<String>,
    pub chains: usize,
    pub draws_per_chain: usize,
    /// Row-major `[chains * draws_per_chain × dim]`; rows of chain `c` occupy
    /// the contiguous block starting at `c * draws_per_chain`.
    pub draws: Vec<f64>,
    /// Post-warm-up divergent transitions, per chain.
    pub divergences: Vec<usize>,
    /// Mean post-warm-up acceptance probability, per chain.
    pub accept_rates: Vec<f64>,
    pub warnings: Vec<String>,
}

impl PosteriorTrace {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn total_draws(&self) -> usize {
        self.chains * self.draws_per_chain
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.draws[i * d..(i + 1) * d]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.total_draws()).map(|i| self.row(i)[k]).collect()
    }

    pub fn chain_column(&self, chain: usize, k: usize) -> Vec<f64> {
        let start = chain * self.draws_per_chain;
        (start..start + self.draws_per_chain)
            .map(|i| self.row(i)[k])
            .collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.names.iter().position(|n| n == name).map(|k| self.column(k))
    }

    /// Delimited export: header of parameter labels with the chain id first,
    /// one row per draw.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "chain")?;
        for name in &self.names {
            write!(w, "\t{name}")?;
        }
        writeln!(w)?;
        for chain in 0..self.chains {
            for i in 0..self.draws_per_chain {
                write!(w, "{}", chain + 1)?;
                for value in self.row(chain * self.draws_per_chain + i) {
                    write!(w, "\t{value}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

struct PosteriorTarget<'a> {
    data: &'a PreparedDataset,
    config: &'a ModelConfig,
}

impl Target for PosteriorTarget<'_> {
    fn dim(&self) -> usize {
        1 + self.data.n_climbers() * self.data.n_pages as usize
    }

    fn density_grad(&self, z: &[f64]) -> Option<(f64, Vec<f64>)> {
        unconstrained_density_grad(z, self.data, self.config)
            .ok()
            .filter(|(value, _)| value.is_finite())
    }
}

/// Grades-only target with the slope pinned; the constant slope-prior and
/// Jacobian terms ride along harmlessly.
struct FixedSlopeTarget<'a> {
    data: &'a PreparedDataset,
    config: &'a ModelConfig,
    log_slope: f64,
}

impl Target for FixedSlopeTarget<'_> {
    fn dim(&self) -> usize {
        self.data.n_climbers() * self.data.n_pages as usize
    }

    fn density_grad(&self, z: &[f64]) -> Option<(f64, Vec<f64>)> {
        let mut full = Vec::with_capacity(1 + z.len());
        full.push(self.log_slope);
        full.extend_from_slice(z);
        let (value, grad) = unconstrained_density_grad(&full, self.data, self.config)
            .ok()
            .filter(|(value, _)| value.is_finite())?;
        Some((value, grad[1..].to_vec()))
    }
}

fn run_chains<T: Target + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    init_center: &[f64],
    init_jitter_sd: &[f64],
) -> Result<Vec<hmc::ChainOutput>, SamplerError> {
    let workers = config.threads.max(1).min(config.chains);
    if workers == 1 {
        return (0..config.chains)
            .map(|i| hmc::run_chain(target, config, init_center, init_jitter_sd, i))
            .collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<hmc::ChainOutput, SamplerError>>>> =
        (0..config.chains).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= config.chains {
                    break;
                }
                let out = hmc::run_chain(target, config, init_center, init_jitter_sd, i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("chain ran to completion"))
        .collect()
}

fn assemble_trace(
    outputs: Vec<hmc::ChainOutput>,
    names: Vec<String>,
    config: &SamplerConfig,
    raw_dim: usize,
    constrain: impl Fn(&[f64], &mut Vec<f64>),
) -> PosteriorTrace {
    let chains = outputs.len();
    let dim = names.len();
    let mut draws = Vec::with_capacity(chains * config.sampling_iters * dim);
    let mut divergences = Vec::with_capacity(chains);
    let mut accept_rates = Vec::with_capacity(chains);
    for output in &outputs {
        for i in 0..config.sampling_iters {
            constrain(&output.draws[i * raw_dim..(i + 1) * raw_dim], &mut draws);
        }
        divergences.push(output.divergences);
        accept_rates.push(output.accept_rate);
    }

    let mut warnings = Vec::new();
    let total_divergent: usize = divergences.iter().sum();
    let total = chains * config.sampling_iters;
    if total_divergent * 10 > total {
        warnings.push(format!(
            "divergence storm: {total_divergent} of {total} post-warm-up transitions diverged; \
             estimates are unreliable"
        ));
    }

    PosteriorTrace {
        names,
        chains,
        draws_per_chain: config.sampling_iters,
        draws,
        divergences,
        accept_rates,
        warnings,
    }
}

/// Draw from the posterior over `(slope, grades)` for a prepared dataset.
///
/// Bit-reproducible: the same data, configuration and seed give the same
/// trace on the same build.
pub fn sample(
    data: &PreparedDataset,
    model_config: &ModelConfig,
    sampler_config: &SamplerConfig,
) -> Result<PosteriorTrace, SamplerError> {
    model_config
        .validate()
        .map_err(|e| SamplerError::InvalidConfig(e.to_string()))?;
    sampler_config.validate()?;
    data.validate()
        .map_err(|e| SamplerError::InvalidData(e.to_string()))?;
    if data.n_climbers() == 0 {
        return Err(SamplerError::EmptyDataset);
    }

    let pages = data.n_pages as usize;
    let n_grades = data.n_climbers() * pages;
    let mut names = Vec::with_capacity(1 + n_grades);
    names.push("slope".to_string());
    for j in 1..=data.n_climbers() {
        for p in 1..=pages {
            names.push(format!("grade[{j}][{p}]"));
        }
    }

    match sampler_config.fixed_slope {
        None => {
            let target = PosteriorTarget {
                data,
                config: model_config,
            };
            let mut center = Vec::with_capacity(1 + n_grades);
            center.push(model_config.slope_prior_mean.ln());
            center.extend(std::iter::repeat(model_config.grade_prior_mean).take(n_grades));
            let mut jitter = vec![0.1; 1 + n_grades];
            jitter[0] = 0.0;
            let outputs = run_chains(&target, sampler_config, &center, &jitter)?;
            Ok(assemble_trace(
                outputs,
                names,
                sampler_config,
                1 + n_grades,
                |z, out| {
                    out.push(z[0].exp());
                    out.extend_from_slice(&z[1..]);
                },
            ))
        }
        Some(slope) => {
            let target = FixedSlopeTarget {
                data,
                config: model_config,
                log_slope: slope.ln(),
            };
            let center = vec![model_config.grade_prior_mean; n_grades];
            let jitter = vec![0.1; n_grades];
            let outputs = run_chains(&target, sampler_config, &center, &jitter)?;
            Ok(assemble_trace(
                outputs,
                names,
                sampler_config,
                n_grades,
                |z, out| {
                    out.push(slope);
                    out.extend_from_slice(z);
                },
            ))
        }
    }
}

/// Run the same Hamiltonian scheme on an arbitrary target (used by the
/// sampler's own diagnostics); draws are reported unconstrained.
pub fn sample_target<T: Target>(
    target: &T,
    sampler_config: &SamplerConfig,
) -> Result<PosteriorTrace, SamplerError> {
    sampler_config.validate()?;
    let dim = target.dim();
    let names = (1..=dim).map(|k| format!("z[{k}]")).collect();
    let center = vec![0.0; dim];
    let jitter = vec![1.0; dim];
    let outputs = run_chains(target, sampler_config, &center, &jitter)?;
    Ok(assemble_trace(
        outputs,
        names,
        sampler_config,
        dim,
        |z, out| out.extend_from_slice(z),
    ))
}
