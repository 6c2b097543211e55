//! Hamiltonian transitions: leapfrog integration, dual-averaging step-size
//! adaptation, and diagonal mass-matrix estimation during warm-up.

use super::{SamplerConfig, SamplerError, Target, STEPS_PER_DEPTH};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Nesterov dual averaging of log step size toward a target acceptance rate.
struct DualAverage {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    iter: u64,
    target_accept: f64,
}

impl DualAverage {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(target_accept: f64, initial_step: f64) -> Self {
        DualAverage {
            mu: (10.0 * initial_step).ln(),
            log_eps: initial_step.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            iter: 0,
            target_accept,
        }
    }

    fn update(&mut self, accept_prob: f64) {
        self.iter += 1;
        let m = self.iter as f64;
        let w = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target_accept - accept_prob);
        self.log_eps = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let eta = m.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
    }

    /// Step size to integrate with while still adapting.
    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    /// Smoothed step size to freeze once adaptation ends.
    fn adapted(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Welford accumulator for the per-coordinate posterior variance.
struct RunningVariance {
    n: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    fn new(dim: usize) -> Self {
        RunningVariance {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn add(&mut self, z: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for k in 0..z.len() {
            let delta = z[k] - self.mean[k];
            self.mean[k] += delta / n;
            self.m2[k] += delta * (z[k] - self.mean[k]);
        }
    }

    /// Shrunk toward unit scale while the sample is small, so early noisy
    /// estimates cannot wreck the metric.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        let shrink = n / (n + 5.0);
        self.m2
            .iter()
            .map(|m2| (shrink * (m2 / (n - 1.0).max(1.0)) + 1e-3 * (1.0 - shrink)).max(1e-10))
            .collect()
    }
}

/// Current point with its cached density and gradient.
#[derive(Clone)]
struct Point {
    z: Vec<f64>,
    log_density: f64,
    grad: Vec<f64>,
}

impl Point {
    fn at<T: Target + ?Sized>(target: &T, z: Vec<f64>) -> Option<Point> {
        let (log_density, grad) = target.density_grad(&z)?;
        log_density.is_finite().then_some(Point {
            z,
            log_density,
            grad,
        })
    }
}

pub(super) struct ChainOutput {
    /// Post-warm-up draws, row-major `[sampling_iters × dim]`, unconstrained.
    pub draws: Vec<f64>,
    /// Divergent transitions after warm-up.
    pub divergences: usize,
    /// Mean acceptance probability after warm-up.
    pub accept_rate: f64,
}

struct Transition {
    point: Point,
    accept_prob: f64,
    diverged: bool,
}

/// Energy error beyond which a trajectory is declared divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

fn kinetic(p: &[f64], inv_mass: &[f64]) -> f64 {
    p.iter().zip(inv_mass).map(|(pk, im)| pk * pk * im).sum::<f64>() / 2.0
}

fn draw_momentum(rng: &mut ChaCha8Rng, inv_mass: &[f64]) -> Vec<f64> {
    inv_mass
        .iter()
        .map(|im| {
            let n: f64 = rng.sample(StandardNormal);
            n / im.sqrt()
        })
        .collect()
}

/// Leapfrog-integrate `steps` steps from `start`; `None` when the density
/// becomes non-finite along the way.
fn leapfrog<T: Target + ?Sized>(
    target: &T,
    start: &Point,
    p: &mut [f64],
    eps: f64,
    steps: usize,
    inv_mass: &[f64],
) -> Option<Point> {
    let mut z = start.z.clone();
    let mut grad = start.grad.clone();
    for (pk, gk) in p.iter_mut().zip(&grad) {
        *pk += 0.5 * eps * gk;
    }
    let mut log_density = start.log_density;
    for step in 0..steps {
        for k in 0..z.len() {
            z[k] += eps * inv_mass[k] * p[k];
        }
        let (value, g) = target.density_grad(&z)?;
        if !value.is_finite() {
            return None;
        }
        log_density = value;
        grad = g;
        let half = if step + 1 == steps { 0.5 } else { 1.0 };
        for (pk, gk) in p.iter_mut().zip(&grad) {
            *pk += half * eps * gk;
        }
    }
    Some(Point {
        z,
        log_density,
        grad,
    })
}

/// One Hamiltonian proposal with a jittered leapfrog step count.
fn transition<T: Target + ?Sized>(
    target: &T,
    current: Point,
    eps: f64,
    max_steps: usize,
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> Transition {
    let steps = rng.gen_range(1..=max_steps);
    let mut p = draw_momentum(rng, inv_mass);
    let h0 = -current.log_density + kinetic(&p, inv_mass);

    let proposal = leapfrog(target, &current, &mut p, eps, steps, inv_mass);
    let (accept_prob, diverged, proposal) = match proposal {
        None => (0.0, true, None),
        Some(point) => {
            let h1 = -point.log_density + kinetic(&p, inv_mass);
            let delta = h1 - h0;
            if !delta.is_finite() || delta > DIVERGENCE_THRESHOLD {
                (0.0, true, None)
            } else {
                ((-delta).min(0.0).exp(), false, Some(point))
            }
        }
    };

    let accepted = match &proposal {
        Some(_) => rng.gen::<f64>() < accept_prob,
        None => false,
    };
    Transition {
        point: if accepted {
            proposal.unwrap()
        } else {
            current
        },
        accept_prob,
        diverged,
    }
}

/// Stan-style bracketing search for a step size with one-step acceptance
/// near one half.
fn find_initial_step<T: Target + ?Sized>(
    target: &T,
    start: &Point,
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut eps = 1.0;
    let p0 = draw_momentum(rng, inv_mass);
    let h0 = -start.log_density + kinetic(&p0, inv_mass);
    let accept_of = |eps: f64, p0: &[f64]| -> f64 {
        let mut p = p0.to_vec();
        match leapfrog(target, start, &mut p, eps, 1, inv_mass) {
            None => 0.0,
            Some(point) => {
                let h1 = -point.log_density + kinetic(&p, inv_mass);
                (-(h1 - h0)).min(0.0).exp()
            }
        }
    };

    let mut accept = accept_of(eps, &p0);
    let go_up = accept > 0.5;
    for _ in 0..100 {
        eps *= if go_up { 2.0 } else { 0.5 };
        if !(1e-10..=1e10).contains(&eps) {
            break;
        }
        accept = accept_of(eps, &p0);
        if go_up != (accept > 0.5) {
            break;
        }
    }
    eps
}

/// Run one chain to completion. The chain owns generator stream
/// `chain_index + 1` of the run seed, so chains are independent and the
/// whole run is reproducible regardless of execution order.
pub(super) fn run_chain<T: Target + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    init_center: &[f64],
    init_jitter_sd: &[f64],
    chain_index: usize,
) -> Result<ChainOutput, SamplerError> {
    let dim = target.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain_index as u64 + 1);

    let z0: Vec<f64> = (0..dim)
        .map(|k| {
            let n: f64 = rng.sample(StandardNormal);
            init_center[k] + init_jitter_sd[k] * n
        })
        .collect();
    let mut current =
        Point::at(target, z0).ok_or(SamplerError::NonFiniteDensity { chain: chain_index })?;

    let mut inv_mass = vec![1.0; dim];
    let max_steps = config.max_leapfrog_depth * STEPS_PER_DEPTH;
    let warmup = config.warmup_iters;

    let eps0 = find_initial_step(target, &current, &inv_mass, &mut rng);
    let mut adapter = DualAverage::new(config.target_accept, eps0);
    let mut final_eps = eps0;

    if warmup > 0 {
        // Three windows: settle the step size, then estimate the metric,
        // then re-tune the step size under the new metric.
        let metric_start = (warmup as f64 * 0.15) as usize;
        let metric_end = (warmup as f64 * 0.90) as usize;
        let mut variance = RunningVariance::new(dim);

        for iter in 0..warmup {
            if iter == metric_end && variance.n >= 5 {
                inv_mass = variance.regularized_variance();
                let eps1 = find_initial_step(target, &current, &inv_mass, &mut rng);
                adapter = DualAverage::new(config.target_accept, eps1);
            }
            let result = transition(
                target,
                current,
                adapter.current(),
                max_steps,
                &inv_mass,
                &mut rng,
            );
            current = result.point;
            adapter.update(result.accept_prob);
            if (metric_start..metric_end).contains(&iter) {
                variance.add(&current.z);
            }
        }
        final_eps = adapter.adapted();
    }

    let mut draws = Vec::with_capacity(config.sampling_iters * dim);
    let mut divergences = 0;
    let mut accept_sum = 0.0;
    for _ in 0..config.sampling_iters {
        let result = transition(target, current, final_eps, max_steps, &inv_mass, &mut rng);
        current = result.point;
        if result.diverged {
            divergences += 1;
        }
        accept_sum += result.accept_prob;
        draws.extend_from_slice(&current.z);
    }

    Ok(ChainOutput {
        draws,
        divergences,
        accept_rate: accept_sum / config.sampling_iters as f64,
    })
}
