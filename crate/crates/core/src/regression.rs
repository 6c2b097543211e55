//! The two least-squares cross-checks on the scale slope: per-climber
//! regression of empirical failure log-odds against grade, and the
//! community-wide exponential fit of successful-ascent counts against grade.

use crate::logbook::AscentRecord;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Failure/success tally of one climber at one grade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeOddsPoint {
    pub grade: f64,
    pub failures: u64,
    pub successes: u64,
}

impl GradeOddsPoint {
    /// ln(failures / successes). A climber who never failed at a grade would
    /// sit at −∞, so zero-failure points get the half-count correction
    /// ln((failures + ½)/(successes + ½)); [`Self::is_corrected`] flags them.
    pub fn log_odds(&self) -> f64 {
        if self.failures == 0 {
            (0.5 / (self.successes as f64 + 0.5)).ln()
        } else {
            (self.failures as f64 / self.successes as f64).ln()
        }
    }

    pub fn is_corrected(&self) -> bool {
        self.failures == 0
    }
}

/// Ordinary least squares of a response on one regressor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Response change per grade increment.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl RegressionFit {
    /// Grade where the fitted log-odds line crosses zero: the climber's
    /// even-odds grade. `None` for a flat line.
    pub fn grade_at_even_odds(&self) -> Option<f64> {
        (self.slope != 0.0).then(|| -self.intercept / self.slope)
    }
}

/// Successful-ascent counts by grade across a whole community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeHistogram {
    /// Sorted by grade; one entry per distinct grade.
    pub entries: Vec<(f64, u64)>,
}

impl GradeHistogram {
    /// Build from (grade, count) pairs, merging duplicates.
    pub fn from_counts(counts: impl IntoIterator<Item = (f64, u64)>) -> GradeHistogram {
        let mut merged: HashMap<u64, (f64, u64)> = HashMap::new();
        for (grade, count) in counts {
            let entry = merged.entry(grade.to_bits()).or_insert((grade, 0));
            entry.1 += count;
        }
        let mut entries: Vec<(f64, u64)> = merged.into_values().collect();
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite grades"));
        GradeHistogram { entries }
    }

    /// Tally the successful records of a logbook by grade.
    pub fn from_records(records: &[AscentRecord]) -> GradeHistogram {
        Self::from_counts(
            records
                .iter()
                .filter(|r| r.success)
                .map(|r| (r.grade.value, 1)),
        )
    }
}

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("climber {0:?} has no records")]
    NoData(String),
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("insufficient support: {0}")]
    InsufficientSupport(String),
}

/// Odds points for one climber plus the grades that had to be excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalOdds {
    /// Sorted by grade ascending.
    pub points: Vec<GradeOddsPoint>,
    /// Grades with zero successes (log-odds undefined) and the number of
    /// records they absorbed.
    pub excluded: Vec<(f64, u64)>,
}

/// Tally (grade, outcome) pairs into odds points, splitting off grades where
/// the log-odds is undefined for lack of any success.
pub fn odds_points_from_outcomes(
    outcomes: impl IntoIterator<Item = (f64, bool)>,
) -> EmpiricalOdds {
    let mut tallies: HashMap<u64, (f64, u64, u64)> = HashMap::new();
    for (grade, success) in outcomes {
        let entry = tallies.entry(grade.to_bits()).or_insert((grade, 0, 0));
        if success {
            entry.2 += 1;
        } else {
            entry.1 += 1;
        }
    }
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for (grade, failures, successes) in tallies.into_values() {
        if successes >= 1 {
            points.push(GradeOddsPoint {
                grade,
                failures,
                successes,
            });
        } else {
            excluded.push((grade, failures));
        }
    }
    points.sort_by(|a, b| a.grade.partial_cmp(&b.grade).expect("finite grades"));
    excluded.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite grades"));
    EmpiricalOdds { points, excluded }
}

/// Per-grade failure/success counts for one climber's records.
pub fn empirical_odds(
    records: &[AscentRecord],
    climber_id: &str,
) -> Result<EmpiricalOdds, RegressionError> {
    let outcomes: Vec<(f64, bool)> = records
        .iter()
        .filter(|r| r.climber_id == climber_id)
        .map(|r| (r.grade.value, r.success))
        .collect();
    if outcomes.is_empty() {
        return Err(RegressionError::NoData(climber_id.to_string()));
    }
    Ok(odds_points_from_outcomes(outcomes))
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let fitted = intercept + slope * x;
        ss_res += (y - fitted) * (y - fitted);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    // A flat response is fit perfectly by a flat line.
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r_squared)
}

/// Least-squares line through (grade, log-odds): the slope is this climber's
/// scale-slope estimate.
pub fn fit_climber_slope(points: &[GradeOddsPoint]) -> Result<RegressionFit, RegressionError> {
    if points.len() < 2 {
        return Err(RegressionError::DegenerateDesign(format!(
            "need at least 2 odds points, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.grade).collect();
    if xs.iter().all(|x| *x == xs[0]) {
        return Err(RegressionError::DegenerateDesign(format!(
            "all {} points share grade {}",
            xs.len(),
            xs[0]
        )));
    }
    let ys: Vec<f64> = points.iter().map(|p| p.log_odds()).collect();
    let (slope, intercept, r_squared) = ols(&xs, &ys);
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        n_points: points.len(),
    })
}

/// Exponential fit of a community histogram over `grade_range` (inclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityFit {
    /// OLS of ln(count) on grade.
    pub fit: RegressionFit,
    /// Decay rate per grade: the negated fitted slope, positive when counts
    /// thin out toward harder grades.
    pub decay_per_grade: f64,
    /// In-range grades dropped because their count was zero.
    pub excluded_zero_grades: Vec<f64>,
}

/// Fit ln(count) = intercept − r·grade over the grades inside the range.
pub fn fit_community_exponential(
    hist: &GradeHistogram,
    grade_range: (f64, f64),
) -> Result<CommunityFit, RegressionError> {
    let (lo, hi) = grade_range;
    if lo > hi {
        return Err(RegressionError::InsufficientSupport(format!(
            "empty grade range [{lo}, {hi}]"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded_zero_grades = Vec::new();
    for &(grade, count) in &hist.entries {
        if !(lo..=hi).contains(&grade) {
            continue;
        }
        if count == 0 {
            excluded_zero_grades.push(grade);
        } else {
            xs.push(grade);
            ys.push((count as f64).ln());
        }
    }
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        return Err(RegressionError::InsufficientSupport(format!(
            "{} usable grades with positive counts in [{lo}, {hi}]",
            xs.len()
        )));
    }
    let (slope, intercept, r_squared) = ols(&xs, &ys);
    Ok(CommunityFit {
        fit: RegressionFit {
            slope,
            intercept,
            r_squared,
            n_points: xs.len(),
        },
        decay_per_grade: -slope,
        excluded_zero_grades,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grades::{parse_grade, GradeSystem};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(climber: &str, grade: f64, success: bool) -> AscentRecord {
        AscentRecord {
            climber_id: climber.to_string(),
            route_id: format!("r{grade}-{success}"),
            date: "2020-01-01".parse().unwrap(),
            grade: parse_grade(&grade.to_string(), GradeSystem::Ewbank).unwrap(),
            tick: if success { "redpoint" } else { "attempt" }.to_string(),
            success,
        }
    }

    #[test]
    fn counts_fails_and_successes_per_grade() {
        let records = vec![
            rec("a", 20.0, false),
            rec("a", 20.0, false),
            rec("a", 20.0, false),
            rec("a", 20.0, true),
            rec("b", 20.0, true),
        ];
        let odds = empirical_odds(&records, "a").unwrap();
        assert_eq!(odds.points.len(), 1);
        let point = odds.points[0];
        assert_eq!((point.failures, point.successes), (3, 1));
        assert_relative_eq!(point.log_odds(), 3.0f64.ln(), epsilon = 1e-15);
        assert!(!point.is_corrected());
    }

    #[test]
    fn nine_fails_per_send_is_log_nine() {
        let point = GradeOddsPoint {
            grade: 25.0,
            failures: 9,
            successes: 1,
        };
        assert_relative_eq!(point.log_odds(), 9.0f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn zero_success_grades_are_excluded_and_accounted() {
        let records = vec![
            rec("a", 20.0, true),
            rec("a", 20.0, false),
            rec("a", 25.0, false),
            rec("a", 25.0, false),
        ];
        let odds = empirical_odds(&records, "a").unwrap();
        assert_eq!(odds.points.len(), 1);
        assert_eq!(odds.excluded, vec![(25.0, 2)]);
        let counted: u64 = odds
            .points
            .iter()
            .map(|p| p.failures + p.successes)
            .sum::<u64>()
            + odds.excluded.iter().map(|e| e.1).sum::<u64>();
        assert_eq!(counted, 4);
    }

    #[test]
    fn missing_climber_is_no_data() {
        let records = vec![rec("a", 20.0, true)];
        assert!(matches!(
            empirical_odds(&records, "ghost"),
            Err(RegressionError::NoData(_))
        ));
    }

    #[test]
    fn zero_failures_get_the_half_count_correction() {
        let point = GradeOddsPoint {
            grade: 18.0,
            failures: 0,
            successes: 3,
        };
        assert!(point.is_corrected());
        assert_relative_eq!(point.log_odds(), (0.5f64 / 3.5).ln(), epsilon = 1e-15);
    }

    /// Odds points whose log-odds sit exactly on slope·(grade − even_odds):
    /// count ratios are fixed and the grades solved for.
    fn exact_line_points(slope: f64, even_odds: f64) -> Vec<GradeOddsPoint> {
        [(1u64, 2u64), (1, 1), (2, 1), (4, 1), (9, 1)]
            .iter()
            .map(|&(failures, successes)| {
                let log_odds = (failures as f64 / successes as f64).ln();
                GradeOddsPoint {
                    grade: even_odds + log_odds / slope,
                    failures,
                    successes,
                }
            })
            .collect()
    }

    #[test]
    fn recovers_an_exact_line() {
        let fit = fit_climber_slope(&exact_line_points(0.65, 22.0)).unwrap();
        assert_relative_eq!(fit.slope, 0.65, epsilon = 1e-12);
        assert_relative_eq!(fit.grade_at_even_odds().unwrap(), 22.0, epsilon = 1e-9);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_points_fit_exactly() {
        let points = [
            GradeOddsPoint { grade: 20.0, failures: 1, successes: 1 },
            GradeOddsPoint { grade: 24.0, failures: 9, successes: 1 },
        ];
        let fit = fit_climber_slope(&points).unwrap();
        assert_eq!(fit.n_points, 2);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            fit.intercept + fit.slope * 24.0,
            9.0f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn equal_grades_are_degenerate() {
        let points = [
            GradeOddsPoint { grade: 21.0, failures: 1, successes: 1 },
            GradeOddsPoint { grade: 21.0, failures: 5, successes: 1 },
        ];
        assert!(matches!(
            fit_climber_slope(&points),
            Err(RegressionError::DegenerateDesign(_))
        ));
        assert!(fit_climber_slope(&points[..1]).is_err());
    }

    fn oracle_ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        // Cramer's rule on the raw normal equations.
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let det = n * sxx - sx * sx;
        ((n * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det)
    }

    #[test]
    fn matches_the_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(3..=12);
            let points: Vec<GradeOddsPoint> = (0..n)
                .map(|i| GradeOddsPoint {
                    grade: 15.0 + i as f64 + rng.gen_range(-0.3..0.3),
                    failures: rng.gen_range(0..40),
                    successes: rng.gen_range(1..40),
                })
                .collect();
            let fit = fit_climber_slope(&points).unwrap();
            let xs: Vec<f64> = points.iter().map(|p| p.grade).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.log_odds()).collect();
            let (slope, intercept) = oracle_ols(&xs, &ys);
            assert_relative_eq!(fit.slope, slope, epsilon = 1e-10);
            assert_relative_eq!(fit.intercept, intercept, epsilon = 1e-10);
        }
    }

    #[test]
    fn shifting_grades_shifts_only_the_even_odds_grade() {
        let points = exact_line_points(0.8, 24.0);
        let base = fit_climber_slope(&points).unwrap();
        let delta = 5.5;
        let shifted: Vec<GradeOddsPoint> = points
            .iter()
            .map(|p| GradeOddsPoint {
                grade: p.grade + delta,
                ..*p
            })
            .collect();
        let moved = fit_climber_slope(&shifted).unwrap();
        assert_relative_eq!(moved.slope, base.slope, epsilon = 1e-12);
        assert_relative_eq!(
            moved.grade_at_even_odds().unwrap(),
            base.grade_at_even_odds().unwrap() + delta,
            epsilon = 1e-9
        );
    }

    #[test]
    fn histogram_merges_and_sorts() {
        let hist = GradeHistogram::from_counts([(22.0, 3), (20.0, 5), (22.0, 2)]);
        assert_eq!(hist.entries, vec![(20.0, 5), (22.0, 5)]);

        let records = vec![rec("a", 20.0, true), rec("a", 20.0, false), rec("b", 21.0, true)];
        let from_records = GradeHistogram::from_records(&records);
        assert_eq!(from_records.entries, vec![(20.0, 1), (21.0, 1)]);
    }

    #[test]
    fn exact_exponential_counts_recover_the_decay() {
        // Counts halve per grade: decay per grade is exactly ln 2.
        let hist = GradeHistogram::from_counts([
            (20.0, 8000),
            (21.0, 4000),
            (22.0, 2000),
            (23.0, 1000),
        ]);
        let fit = fit_community_exponential(&hist, (20.0, 23.0)).unwrap();
        assert_relative_eq!(fit.decay_per_grade, 2.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(fit.fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.excluded_zero_grades.is_empty());
    }

    #[test]
    fn range_restricts_and_zero_counts_are_reported() {
        let hist = GradeHistogram::from_counts([
            (18.0, 999_999), // outside the range: ignored
            (20.0, 1000),
            (21.0, 500),
            (22.0, 0),
            (23.0, 125),
        ]);
        let fit = fit_community_exponential(&hist, (20.0, 23.0)).unwrap();
        assert_eq!(fit.excluded_zero_grades, vec![22.0]);
        assert_eq!(fit.fit.n_points, 3);
        assert_relative_eq!(fit.decay_per_grade, 2.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn too_little_support_is_an_error() {
        let hist = GradeHistogram::from_counts([(20.0, 10), (21.0, 0)]);
        assert!(matches!(
            fit_community_exponential(&hist, (20.0, 21.0)),
            Err(RegressionError::InsufficientSupport(_))
        ));
        assert!(fit_community_exponential(&hist, (25.0, 24.0)).is_err());
    }
}
