//! `gradescale regress`: the two lightweight slope estimators. Per-climber
//! mode fits ln(failures/successes) against grade for every climber in a
//! prepared dataset and averages the slopes; community mode fits ln(count)
//! against grade for a whole-community success histogram.

use std::path::{Path, PathBuf};

use gradescale::logbook::PreparedDataset;
use gradescale::regression::{
    fit_climber_slope, fit_community_exponential, odds_points_from_outcomes, GradeHistogram,
};

use crate::commands::{ensure_out_dir, load_for, read_json, required_out, write_text};
use crate::manifest::{RegressMode, RunManifest};
use crate::CliError;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// per-climber mode: prepared.json; community mode: a grade/count table
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "manifest",
        conflicts_with = "manifest"
    )]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "per-climber")]
    pub mode: RegressMode,
    /// Community mode: lowest grade included in the fit (default: data min)
    #[arg(long)]
    pub grade_min: Option<f64>,
    /// Community mode: highest grade included in the fit (default: data max)
    #[arg(long)]
    pub grade_max: Option<f64>,
    /// Output directory
    #[arg(long, value_name = "DIR", required_unless_present = "manifest")]
    pub out: Option<PathBuf>,
    /// Replay a saved manifest instead of passing flags
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
}

impl Args {
    pub fn into_manifest(self) -> Result<RunManifest, CliError> {
        if let Some(path) = &self.manifest {
            return load_for(path, "regress", self.out);
        }
        let mut manifest = RunManifest::base("regress", required_out(self.out)?);
        manifest.input = self.input;
        manifest.regress_mode = Some(self.mode);
        if let (Some(lo), Some(hi)) = (self.grade_min, self.grade_max) {
            manifest.grade_range = Some((lo, hi));
        } else if self.grade_min.is_some() || self.grade_max.is_some() {
            return Err(CliError::input(
                "--grade-min and --grade-max must be given together",
            ));
        }
        Ok(manifest)
    }
}

pub fn run(manifest: &RunManifest) -> Result<(), CliError> {
    let input = manifest.require(manifest.input.as_ref(), "input")?;
    let mode = manifest.require(manifest.regress_mode.as_ref(), "regress_mode")?;
    ensure_out_dir(&manifest.out_dir)?;
    match mode {
        RegressMode::PerClimber => {
            let dataset: PreparedDataset = read_json(&input)?;
            dataset.validate().map_err(CliError::from)?;
            let output = per_climber_output(&dataset)?;
            for (climber, reason) in &output.skipped {
                eprintln!("warning: climber {climber} skipped: {reason}");
            }
            write_text(&manifest.out_dir.join("climber_points.tsv"), &output.points_tsv)?;
            write_text(&manifest.out_dir.join("climber_fits.tsv"), &output.fits_tsv)?;
            write_text(
                &manifest.out_dir.join("regress_summary.tsv"),
                &output.summary_tsv,
            )?;
            manifest.save(&manifest.out_dir)?;
            eprintln!(
                "regress: mean per-climber slope {:.4} over {} climbers ({} skipped) -> {}",
                output.mean_slope,
                output.n_fit,
                output.skipped.len(),
                manifest.out_dir.display()
            );
        }
        RegressMode::Community => {
            let hist = parse_histogram(&input)?;
            let range = match manifest.grade_range {
                Some(range) => range,
                None => {
                    let grades = hist.entries.iter().map(|(g, _)| *g);
                    (
                        grades.clone().fold(f64::INFINITY, f64::min),
                        grades.fold(f64::NEG_INFINITY, f64::max),
                    )
                }
            };
            let community = fit_community_exponential(&hist, range)?;
            write_text(
                &manifest.out_dir.join("community_points.tsv"),
                &render_community_points(&hist, range),
            )?;
            let mut fit_tsv = String::from(
                "method\tslope\tintercept\tr_squared\tdecay_per_grade\tn_points\texcluded_zero_grades\n",
            );
            fit_tsv.push_str(&format!(
                "community_log_count_ols\t{}\t{}\t{}\t{}\t{}\t{}\n",
                community.fit.slope,
                community.fit.intercept,
                community.fit.r_squared,
                community.decay_per_grade,
                community.fit.n_points,
                community.excluded_zero_grades.len()
            ));
            write_text(&manifest.out_dir.join("community_fit.tsv"), &fit_tsv)?;
            let mut summary = String::from("method\testimate\tnote\n");
            summary.push_str(&format!(
                "community_log_count_ols\t{}\tdecay rate r of success counts per grade \
                 increment; distinct from the joint MCMC slope estimate\n",
                community.decay_per_grade
            ));
            write_text(&manifest.out_dir.join("regress_summary.tsv"), &summary)?;
            let mut resolved = manifest.clone();
            resolved.grade_range = Some(range);
            resolved.save(&manifest.out_dir)?;
            eprintln!(
                "regress: community decay {:.4} per grade over {} grades -> {}",
                community.decay_per_grade,
                community.fit.n_points,
                manifest.out_dir.display()
            );
        }
    }
    Ok(())
}

struct PerClimberOutput {
    points_tsv: String,
    fits_tsv: String,
    summary_tsv: String,
    mean_slope: f64,
    n_fit: usize,
    skipped: Vec<(String, String)>,
}

fn per_climber_output(dataset: &PreparedDataset) -> Result<PerClimberOutput, CliError> {
    let mut points_tsv =
        String::from("climber\tgrade\tsuccesses\tfailures\tlog_odds\tcorrected\n");
    let mut fits_tsv =
        String::from("climber\tslope\tintercept\tr_squared\teven_odds_grade\tn_points\n");
    let mut slopes = Vec::new();
    let mut skipped = Vec::new();

    for (j, climber) in dataset.climbers.iter().enumerate() {
        let outcomes = dataset
            .climber
            .iter()
            .zip(dataset.route_grade.iter().zip(&dataset.y))
            .filter(|(c, _)| **c as usize == j)
            .map(|(_, (grade, y))| (*grade, *y));
        let odds = odds_points_from_outcomes(outcomes);
        for point in &odds.points {
            points_tsv.push_str(&format!(
                "{climber}\t{}\t{}\t{}\t{}\t{}\n",
                point.grade,
                point.successes,
                point.failures,
                point.log_odds(),
                point.is_corrected() as u8
            ));
        }
        for (grade, failures) in &odds.excluded {
            points_tsv.push_str(&format!("{climber}\t{grade}\t0\t{failures}\tinf\t0\n"));
        }
        match fit_climber_slope(&odds.points) {
            Ok(fit) => {
                let even_odds = fit
                    .grade_at_even_odds()
                    .map_or("nan".to_string(), |g| g.to_string());
                fits_tsv.push_str(&format!(
                    "{climber}\t{}\t{}\t{}\t{even_odds}\t{}\n",
                    fit.slope, fit.intercept, fit.r_squared, fit.n_points
                ));
                slopes.push(fit.slope);
            }
            Err(e) => skipped.push((climber.clone(), e.to_string())),
        }
    }

    if slopes.is_empty() {
        return Err(CliError::input(
            "no climber had enough grade spread for a regression fit",
        ));
    }
    let mean_slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let mut summary_tsv = String::from("method\testimate\tnote\n");
    summary_tsv.push_str(&format!(
        "per_climber_log_odds_ols\t{mean_slope}\tmean of {} per-climber OLS slopes \
         ({} skipped); a per-climber average, distinct from the joint MCMC slope estimate\n",
        slopes.len(),
        skipped.len()
    ));
    Ok(PerClimberOutput {
        points_tsv,
        fits_tsv,
        summary_tsv,
        mean_slope,
        n_fit: slopes.len(),
        skipped,
    })
}

/// Read a two-column grade/count table (header row; comma or tab delimited).
fn parse_histogram(path: &Path) -> Result<GradeHistogram, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let header = text.lines().next().unwrap_or("");
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        .clone();
    let index_of = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::input(format!("{}: missing column {name:?}", path.display()))
        })
    };
    let grade_col = index_of("grade")?;
    let count_col = index_of("count")?;

    let mut counts = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 2;
        let row = row
            .map_err(|e| CliError::input(format!("{} row {row_number}: {e}", path.display())))?;
        let field = |col: usize| {
            row.get(col).ok_or_else(|| {
                CliError::input(format!("{} row {row_number}: short row", path.display()))
            })
        };
        let grade: f64 = field(grade_col)?.parse().map_err(|e| {
            CliError::input(format!("{} row {row_number}: bad grade: {e}", path.display()))
        })?;
        let count: u64 = field(count_col)?.parse().map_err(|e| {
            CliError::input(format!("{} row {row_number}: bad count: {e}", path.display()))
        })?;
        counts.push((grade, count));
    }
    if counts.is_empty() {
        return Err(CliError::input(format!(
            "{}: no histogram rows",
            path.display()
        )));
    }
    Ok(GradeHistogram::from_counts(counts))
}

fn render_community_points(hist: &GradeHistogram, range: (f64, f64)) -> String {
    let mut out = String::from("grade\tcount\tlog_count\tin_fit\n");
    for &(grade, count) in &hist.entries {
        let log_count = if count > 0 {
            (count as f64).ln().to_string()
        } else {
            "nan".to_string()
        };
        let in_fit = (range.0..=range.1).contains(&grade) && count > 0;
        out.push_str(&format!(
            "{grade}\t{count}\t{log_count}\t{}\n",
            in_fit as u8
        ));
    }
    out
}
