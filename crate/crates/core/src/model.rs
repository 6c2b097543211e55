//! The dynamic paired-comparison model: a logistic send-probability with a
//! per-climber random walk over monthly grades.
//!
//! A send against a route of grade `x` by a climber at grade `g` succeeds with
//! probability `logit⁻¹(m·(g − x))`, where the slope `m` is shared by everyone
//! on the scale. Grades follow a random walk across the pages where a climber
//! has data and revert to the population prior outside that span. The density
//! is exposed as three separately evaluable components (slope prior, grade
//! priors, outcome likelihood) so their individual symmetries are testable.

use crate::logbook::PreparedDataset;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prior hyperparameters. Defaults anchor the grade prior to the Ewbank axis
/// (grade 18 is a solid amateur level); re-anchor `grade_prior_mean` when
/// analysing another system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub slope_prior_mean: f64,
    pub slope_prior_sd: f64,
    pub grade_prior_mean: f64,
    pub grade_prior_sd: f64,
    /// Random-walk standard deviation per page (month).
    pub walk_sd: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            slope_prior_mean: 0.69,
            slope_prior_sd: 0.3,
            grade_prior_mean: 18.0,
            grade_prior_sd: 5.0,
            walk_sd: 0.5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, sd) in [
            ("slope_prior_sd", self.slope_prior_sd),
            ("grade_prior_sd", self.grade_prior_sd),
            ("walk_sd", self.walk_sd),
        ] {
            if !(sd.is_finite() && sd > 0.0) {
                return Err(ModelError::Domain(format!("{name} must be positive, got {sd}")));
            }
        }
        Ok(())
    }
}

/// A point in parameter space: the positive slope and the climber-grade
/// matrix, stored row-major as `grades[climber * n_pages + (page - 1)]`.
///
/// The unconstrained image used by gradient-based sampling is
/// `[ln slope, grades...]`; the log-Jacobian of that map is `ln slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub slope: f64,
    pub grades: Vec<f64>,
}

impl ParameterState {
    pub fn dim(n_climbers: usize, n_pages: usize) -> usize {
        1 + n_climbers * n_pages
    }

    pub fn grade(&self, n_pages: usize, climber: usize, page: u32) -> f64 {
        self.grades[climber * n_pages + (page as usize - 1)]
    }

    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(1 + self.grades.len());
        z.push(self.slope.ln());
        z.extend_from_slice(&self.grades);
        z
    }

    pub fn from_unconstrained(z: &[f64]) -> ParameterState {
        ParameterState {
            slope: z[0].exp(),
            grades: z[1..].to_vec(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Numerically stable logit⁻¹; exact to within an ulp over the whole line.
fn inverse_logit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + eˣ) without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn normal_log_density(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Probability that a climber at `climber_grade` sends a route at
/// `route_grade` under slope `slope` (nats per grade increment).
pub fn send_probability(climber_grade: f64, route_grade: f64, slope: f64) -> f64 {
    inverse_logit(slope * (climber_grade - route_grade))
}

/// Expected failed attempts before the first success: the odds of failure,
/// `(1 − p) / p`.
pub fn expected_failures(p: f64) -> Result<f64, ModelError> {
    if p <= 0.0 {
        return Err(ModelError::Domain(format!(
            "send probability must be positive, got {p}"
        )));
    }
    Ok((1.0 - p) / p)
}

/// Inverse of [`expected_failures`]: `p = 1 / (E + 1)`.
pub fn p_from_failures(expected: f64) -> Result<f64, ModelError> {
    if expected < 0.0 {
        return Err(ModelError::Domain(format!(
            "expected failure count must be nonnegative, got {expected}"
        )));
    }
    Ok(1.0 / (expected + 1.0))
}

fn check_dims(state: &ParameterState, data: &PreparedDataset) -> Result<(), ModelError> {
    let want = data.n_climbers() * data.n_pages as usize;
    if state.grades.len() != want {
        return Err(ModelError::DimensionMismatch(format!(
            "state has {} grades, dataset needs {} ({} climbers x {} pages)",
            state.grades.len(),
            want,
            data.n_climbers(),
            data.n_pages
        )));
    }
    Ok(())
}

/// Log-density of the slope under its normal prior (constants included).
pub fn slope_prior_log_density(slope: f64, config: &ModelConfig) -> f64 {
    normal_log_density(slope, config.slope_prior_mean, config.slope_prior_sd)
}

/// Log-density of the full grade matrix: population prior over pages
/// 1..=min_page and (max_page+1)..=n_pages, random walk in between.
pub fn grade_priors_log_density(
    state: &ParameterState,
    data: &PreparedDataset,
    config: &ModelConfig,
) -> Result<f64, ModelError> {
    check_dims(state, data)?;
    let pages = data.n_pages as usize;
    let mut total = 0.0;
    for j in 0..data.n_climbers() {
        let row = &state.grades[j * pages..(j + 1) * pages];
        let lo = data.min_page[j] as usize;
        let hi = data.max_page[j] as usize;
        for &g in &row[..lo] {
            total += normal_log_density(g, config.grade_prior_mean, config.grade_prior_sd);
        }
        for i in lo..hi {
            total += normal_log_density(row[i], row[i - 1], config.walk_sd);
        }
        for &g in &row[hi..] {
            total += normal_log_density(g, config.grade_prior_mean, config.grade_prior_sd);
        }
    }
    Ok(total)
}

/// Bernoulli-logit log-likelihood over all outcomes.
pub fn bernoulli_log_likelihood(
    state: &ParameterState,
    data: &PreparedDataset,
) -> Result<f64, ModelError> {
    check_dims(state, data)?;
    let pages = data.n_pages as usize;
    let mut total = 0.0;
    for i in 0..data.n_ascents() {
        let g = state.grades[data.climber[i] as usize * pages + (data.page[i] as usize - 1)];
        let t = state.slope * (g - data.route_grade[i]);
        total -= if data.y[i] { softplus(-t) } else { softplus(t) };
    }
    Ok(total)
}

/// The joint log-posterior on the constrained scale (no Jacobian term; add
/// `ln slope` when evaluating on the unconstrained side).
pub fn log_posterior(
    state: &ParameterState,
    data: &PreparedDataset,
    config: &ModelConfig,
) -> Result<f64, ModelError> {
    Ok(slope_prior_log_density(state.slope, config)
        + grade_priors_log_density(state, data, config)?
        + bernoulli_log_likelihood(state, data)?)
}

/// Unconstrained log-density (posterior plus log-Jacobian) and its exact
/// analytic gradient, evaluated together at `z = [ln slope, grades...]`.
pub fn unconstrained_density_grad(
    z: &[f64],
    data: &PreparedDataset,
    config: &ModelConfig,
) -> Result<(f64, Vec<f64>), ModelError> {
    let pages = data.n_pages as usize;
    let want = 1 + data.n_climbers() * pages;
    if z.len() != want {
        return Err(ModelError::DimensionMismatch(format!(
            "unconstrained point has dimension {}, dataset needs {want}",
            z.len()
        )));
    }
    let slope = z[0].exp();
    let grades = &z[1..];
    let mut value = 0.0;
    let mut grad = vec![0.0; z.len()];

    // Slope prior plus the log-Jacobian of slope = exp(z[0]).
    value += normal_log_density(slope, config.slope_prior_mean, config.slope_prior_sd) + z[0];
    let mut dslope = -(slope - config.slope_prior_mean) / (config.slope_prior_sd * config.slope_prior_sd);

    let grade_var = config.grade_prior_sd * config.grade_prior_sd;
    let walk_var = config.walk_sd * config.walk_sd;
    for j in 0..data.n_climbers() {
        let base = j * pages;
        let row = &grades[base..base + pages];
        let lo = data.min_page[j] as usize;
        let hi = data.max_page[j] as usize;
        for (i, &g) in row[..lo].iter().enumerate() {
            value += normal_log_density(g, config.grade_prior_mean, config.grade_prior_sd);
            grad[1 + base + i] -= (g - config.grade_prior_mean) / grade_var;
        }
        for i in lo..hi {
            let step = row[i] - row[i - 1];
            value += normal_log_density(row[i], row[i - 1], config.walk_sd);
            grad[1 + base + i] -= step / walk_var;
            grad[1 + base + i - 1] += step / walk_var;
        }
        for (i, &g) in row[hi..].iter().enumerate() {
            value += normal_log_density(g, config.grade_prior_mean, config.grade_prior_sd);
            grad[1 + base + hi + i] -= (g - config.grade_prior_mean) / grade_var;
        }
    }

    for i in 0..data.n_ascents() {
        let slot = data.climber[i] as usize * pages + (data.page[i] as usize - 1);
        let diff = grades[slot] - data.route_grade[i];
        let t = slope * diff;
        let p = inverse_logit(t);
        let y = if data.y[i] { 1.0 } else { 0.0 };
        value -= if data.y[i] { softplus(-t) } else { softplus(t) };
        let residual = y - p;
        dslope += residual * diff;
        grad[1 + slot] += slope * residual;
    }

    // Chain rule through slope = exp(z[0]), then the Jacobian's own derivative.
    grad[0] = slope * dslope + 1.0;
    Ok((value, grad))
}

/// Gradient of the unconstrained density at a constrained state; dimension
/// `1 + C·P` with the slope coordinate first.
pub fn grad_log_posterior(
    state: &ParameterState,
    data: &PreparedDataset,
    config: &ModelConfig,
) -> Result<Vec<f64>, ModelError> {
    check_dims(state, data)?;
    let z = state.to_unconstrained();
    Ok(unconstrained_density_grad(&z, data, config)?.1)
}
