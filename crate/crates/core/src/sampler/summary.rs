//! Trace reductions: empirical HPD intervals, effective sample size via the
//! initial-monotone-sequence rule, and split-chain potential scale reduction.

use super::{PosteriorTrace, SamplerError};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub hpd_lower: f64,
    pub hpd_upper: f64,
    pub ess: f64,
    pub rhat: f64,
}

/// Narrowest contiguous interval over the sorted draws containing
/// `ceil(mass * n)` of them. Ties go to the lowest lower bound.
pub fn hpd_interval(draws: &[f64], mass: f64) -> Result<(f64, f64), SamplerError> {
    if draws.len() < 10 {
        return Err(SamplerError::TooFewDraws {
            needed: 10,
            got: draws.len(),
        });
    }
    if !(0.0 < mass && mass < 1.0) {
        return Err(SamplerError::InvalidConfig(format!(
            "interval mass must be in (0, 1), got {mass}"
        )));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let n = sorted.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);

    let mut best = (sorted[k - 1] - sorted[0], 0);
    for start in 1..=(n - k) {
        let width = sorted[start + k - 1] - sorted[start];
        if width < best.0 {
            best = (width, start);
        }
    }
    Ok((sorted[best.1], sorted[best.1 + k - 1]))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        // Identical values have zero variance even when their mean rounds.
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Effective sample size of one chain: n / τ with τ from the initial
/// monotone positive sequence of autocovariance pairs (lags computed
/// lazily, stopping at the first non-positive pair).
fn chain_ess(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let gamma = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let gamma0 = gamma(0);
    if gamma0 <= 0.0 {
        // Constant chain: no autocorrelation structure to correct for.
        return n as f64;
    }

    let mut tau = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (gamma(lag) + gamma(lag + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    tau -= 1.0; // lag-0 autocorrelation was counted twice in the first pair
    (n as f64 / tau.max(1.0 / n as f64)).min(n as f64)
}

/// Split-chain potential scale reduction. Each chain is halved so within-chain
/// drift shows up as between-chain variance; `NaN` when the within-chain
/// variance vanishes (constant trace).
fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for chain in chains {
        let half = chain.len() / 2;
        if half < 2 {
            return f64::NAN;
        }
        halves.push(&chain[..half]);
        halves.push(&chain[chain.len() - half..]);
    }
    let n = halves[0].len() as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let within = halves.iter().map(|h| sample_variance(h)).sum::<f64>() / m;
    let between = n * sample_variance(&means);
    if within <= 0.0 {
        return f64::NAN;
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}

fn summarize_column(name: &str, chains: &[Vec<f64>], mass: f64) -> Summary {
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let mut sorted = all.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));

    let (hpd_lower, hpd_upper) = match hpd_interval(&all, mass) {
        Ok(interval) => interval,
        // Too few draws for a meaningful narrowest window: report the range.
        Err(_) => (sorted[0], sorted[sorted.len() - 1]),
    };
    let ess: f64 = chains.iter().map(|c| chain_ess(c)).sum();
    Summary {
        name: name.to_string(),
        mean: mean(&all),
        median: median_of_sorted(&sorted),
        sd: sample_variance(&all).sqrt(),
        hpd_lower,
        hpd_upper,
        ess: ess.min(all.len() as f64),
        rhat: split_rhat(chains),
    }
}

/// Per-parameter summaries at the given HPD mass. When the trace carries a
/// slope column, a derived difficulty-ratio summary (its draw-wise exponential)
/// is appended.
pub fn summarize_with_mass(trace: &PosteriorTrace, mass: f64) -> Vec<Summary> {
    let mut out = Vec::with_capacity(trace.dim() + 1);
    for (k, name) in trace.names.iter().enumerate() {
        let chains: Vec<Vec<f64>> = (0..trace.chains)
            .map(|c| trace.chain_column(c, k))
            .collect();
        out.push(summarize_column(name, &chains, mass));
    }
    if let Some(k) = trace.names.iter().position(|n| n == "slope") {
        let chains: Vec<Vec<f64>> = (0..trace.chains)
            .map(|c| {
                trace
                    .chain_column(c, k)
                    .into_iter()
                    .map(f64::exp)
                    .collect()
            })
            .collect();
        out.push(summarize_column("difficulty_ratio", &chains, mass));
    }
    out
}

/// [`summarize_with_mass`] at the conventional 95%.
pub fn summarize(trace: &PosteriorTrace) -> Vec<Summary> {
    summarize_with_mass(trace, 0.95)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn brute_force_hpd(draws: &[f64], mass: f64) -> (f64, f64) {
        let mut sorted = draws.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
        (0..=n - k)
            .map(|i| (sorted[i], sorted[i + k - 1]))
            .min_by(|a, b| {
                let wa = a.1 - a.0;
                let wb = b.1 - b.0;
                wa.partial_cmp(&wb)
                    .unwrap()
                    .then(a.0.partial_cmp(&b.0).unwrap())
            })
            .unwrap()
    }

    #[test]
    fn hpd_on_uniform_ramp_takes_lowest_window() {
        let draws: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(hpd_interval(&draws, 0.95).unwrap(), (1.0, 95.0));
    }

    #[test]
    fn hpd_prefers_dense_regions() {
        let draws = [0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(hpd_interval(&draws, 0.5).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn hpd_of_constant_draws_is_a_point() {
        let draws = [3.25; 64];
        assert_eq!(hpd_interval(&draws, 0.95).unwrap(), (3.25, 3.25));
    }

    #[test]
    fn hpd_requires_enough_draws() {
        let draws = [1.0; 9];
        assert!(matches!(
            hpd_interval(&draws, 0.95),
            Err(SamplerError::TooFewDraws { needed: 10, got: 9 })
        ));
    }

    #[test]
    fn hpd_matches_brute_force_on_random_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(10..=400);
            let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let mass = rng.gen_range(0.05..0.99);
            assert_eq!(hpd_interval(&draws, mass).unwrap(), brute_force_hpd(&draws, mass));
        }
    }

    fn trace_from_chains(chains: Vec<Vec<f64>>) -> PosteriorTrace {
        let draws_per_chain = chains[0].len();
        PosteriorTrace {
            names: vec!["z".to_string()],
            chains: chains.len(),
            draws_per_chain,
            draws: chains.into_iter().flatten().collect(),
            divergences: vec![0],
            accept_rates: vec![1.0],
            warnings: vec![],
        }
    }

    #[test]
    fn constant_trace_degenerates_gracefully() {
        let trace = trace_from_chains(vec![vec![0.8; 50], vec![0.8; 50]]);
        let summary = &summarize(&trace)[0];
        assert_eq!(summary.sd, 0.0);
        assert_eq!((summary.hpd_lower, summary.hpd_upper), (0.8, 0.8));
        assert!(summary.rhat.is_nan());
        assert_relative_eq!(summary.mean, 0.8, epsilon = 1e-14);
        assert_eq!(summary.median, 0.8);
    }

    #[test]
    fn healthy_chains_have_rhat_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let chains: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let summary = &summarize(&trace_from_chains(chains))[0];
        assert!(
            summary.rhat > 0.99 && summary.rhat < 1.05,
            "rhat = {}",
            summary.rhat
        );
        // Independent draws: ess should be close to the total draw count.
        assert!(summary.ess > 2000.0, "ess = {}", summary.ess);
        assert!(summary.ess <= 4000.0);
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..500).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..500)
            .map(|_| 8.0 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let summary = &summarize(&trace_from_chains(vec![a, b]))[0];
        assert!(summary.rhat > 2.0, "rhat = {}", summary.rhat);
    }

    #[test]
    fn autocorrelated_chain_has_reduced_ess() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = 0.0;
        let rho: f64 = 0.9;
        let chain: Vec<f64> = (0..4000)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                x = rho * x + (1.0 - rho * rho).sqrt() * e;
                x
            })
            .collect();
        let n = chain.len() as f64;
        let summary = &summarize(&trace_from_chains(vec![chain]))[0];
        // AR(1) with rho = 0.9 has tau = (1+rho)/(1-rho) = 19.
        let expected = n / 19.0;
        assert!(
            summary.ess > expected * 0.5 && summary.ess < expected * 2.0,
            "ess = {} vs expected {expected}",
            summary.ess
        );
    }

    #[test]
    fn slope_traces_get_a_difficulty_ratio_row() {
        let trace = PosteriorTrace {
            names: vec!["slope".to_string()],
            chains: 1,
            draws_per_chain: 50,
            draws: vec![0.8; 50],
            divergences: vec![0],
            accept_rates: vec![1.0],
            warnings: vec![],
        };
        let summaries = summarize(&trace);
        assert_eq!(summaries.len(), 2);
        let ratio = &summaries[1];
        assert_eq!(ratio.name, "difficulty_ratio");
        assert_relative_eq!(ratio.mean, 0.8f64.exp(), epsilon = 1e-12);
        assert_relative_eq!(ratio.mean, 2.2255, epsilon = 1e-4);
    }

    #[test]
    fn ratio_mean_dominates_exp_of_slope_mean() {
        // Jensen: E[e^X] >= e^{E[X]}, with equality only for constant X.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let slope_draws: Vec<f64> = (0..1000)
            .map(|_| 0.7 + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let trace = PosteriorTrace {
            names: vec!["slope".to_string()],
            chains: 1,
            draws_per_chain: slope_draws.len(),
            draws: slope_draws,
            divergences: vec![0],
            accept_rates: vec![1.0],
            warnings: vec![],
        };
        let summaries = summarize(&trace);
        assert!(summaries[1].mean >= summaries[0].mean.exp());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// The reported interval covers the requested mass and no contiguous
        /// window of the same draw count is narrower.
        #[test]
        fn hpd_is_a_minimal_covering_window(
            draws in prop::collection::vec(-50.0f64..50.0, 10..200),
            mass in 0.05f64..0.95,
        ) {
            let (lo, hi) = hpd_interval(&draws, mass).unwrap();
            prop_assert!(lo <= hi);
            let n = draws.len();
            let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
            let covered = draws.iter().filter(|x| (lo..=hi).contains(x)).count();
            prop_assert!(covered >= k);

            let mut sorted = draws.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for start in 0..=(n - k) {
                prop_assert!(hi - lo <= sorted[start + k - 1] - sorted[start]);
            }
        }
    }
}
