//! `gradescale fit`: HMC over the slope and climber-grade paths, written out
//! as a raw trace, per-parameter summaries, a one-row dataset summary and a
//! grade-through-time table.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gradescale::logbook::PreparedDataset;
use gradescale::sampler::{sample, summarize, SamplerConfig, Summary};

use crate::commands::{ensure_out_dir, load_for, read_json, required_out, write_text};
use crate::manifest::{RunManifest, RunMetadata, MANIFEST_FILE};
use crate::CliError;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Prepared dataset (prepared.json from the prepare subcommand)
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "manifest",
        conflicts_with = "manifest"
    )]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    /// Warm-up iterations per chain (step size and mass adaptation)
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    /// Post-warm-up draws per chain
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for chains; 0 means one per chain up to the CPU count
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Country label echoed into the dataset summary row
    #[arg(long)]
    pub country: Option<String>,
    /// Style label echoed into the dataset summary row
    #[arg(long)]
    pub style: Option<String>,
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
            return load_for(path, "fit", self.out);
        }
        let threads = if self.threads == 0 {
            let cores = std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1);
            self.chains.clamp(1, cores)
        } else {
            self.threads
        };
        let mut manifest = RunManifest::base("fit", required_out(self.out)?);
        manifest.input = self.input;
        manifest.model = Some(Default::default());
        manifest.sampler = Some(SamplerConfig {
            chains: self.chains,
            warmup_iters: self.warmup,
            sampling_iters: self.samples,
            seed: self.seed,
            threads,
            ..SamplerConfig::default()
        });
        manifest.seed = Some(self.seed);
        if self.country.is_some() || self.style.is_some() {
            manifest.metadata = Some(RunMetadata {
                country: self.country.unwrap_or_else(|| "-".to_string()),
                style: self.style.unwrap_or_else(|| "-".to_string()),
            });
        }
        Ok(manifest)
    }
}

pub fn run(manifest: &RunManifest) -> Result<(), CliError> {
    let input = manifest.require(manifest.input.as_ref(), "input")?;
    let sampler_config = manifest.require(manifest.sampler.as_ref(), "sampler")?;
    let model_config = manifest.model.clone().unwrap_or_default();

    let dataset: PreparedDataset = read_json(&input)?;
    dataset.validate().map_err(CliError::from)?;

    let started = Instant::now();
    let trace = sample(&dataset, &model_config, &sampler_config)?;
    let elapsed = started.elapsed().as_secs_f64();
    for warning in &trace.warnings {
        eprintln!("warning: {warning}");
    }
    let divergences: usize = trace.divergences.iter().sum();
    if divergences > 0 {
        eprintln!("warning: {divergences} divergent transitions after warm-up");
    }

    ensure_out_dir(&manifest.out_dir)?;
    let mut trace_tsv = Vec::new();
    trace
        .write_tsv(&mut trace_tsv)
        .map_err(|e| CliError::input(format!("cannot render trace: {e}")))?;
    let trace_tsv =
        String::from_utf8(trace_tsv).expect("trace is ascii");
    write_text(&manifest.out_dir.join("trace.tsv"), &trace_tsv)?;

    let summaries = summarize(&trace);
    write_text(
        &manifest.out_dir.join("summary.tsv"),
        &render_summaries(&summaries),
    )?;

    let ratio = summaries
        .iter()
        .find(|s| s.name == "difficulty_ratio")
        .expect("slope trace always yields a difficulty_ratio row");
    let thresholds = sibling_prepare_thresholds(&input);
    write_text(
        &manifest.out_dir.join("dataset_summary.tsv"),
        &render_dataset_summary(manifest.metadata.as_ref(), &dataset, ratio, thresholds),
    )?;
    write_text(
        &manifest.out_dir.join("grades_over_time.tsv"),
        &render_grades_over_time(&dataset, &summaries),
    )?;
    manifest.save(&manifest.out_dir)?;

    eprintln!(
        "fit: {} chains x {} draws in {elapsed:.1}s; mean d = {:.3} [{:.3}, {:.3}] -> {}",
        trace.chains,
        trace.draws_per_chain,
        ratio.mean,
        ratio.hpd_lower,
        ratio.hpd_upper,
        manifest.out_dir.display()
    );
    Ok(())
}

fn render_summaries(summaries: &[Summary]) -> String {
    let mut out = String::from("parameter\tmean\tmedian\tsd\thpd_lower\thpd_upper\tess\trhat\n");
    for s in summaries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            s.name, s.mean, s.median, s.sd, s.hpd_lower, s.hpd_upper, s.ess, s.rhat
        ));
    }
    out
}

/// One row shaped like the published dataset tables. `slope` is the
/// posterior mean of d = e^m, with 95% HPD bounds on d.
fn render_dataset_summary(
    metadata: Option<&RunMetadata>,
    dataset: &PreparedDataset,
    ratio: &Summary,
    thresholds: Option<(usize, usize)>,
) -> String {
    let default_meta = RunMetadata::default();
    let meta = metadata.unwrap_or(&default_meta);
    let (min_ascents, min_failures) = match thresholds {
        Some((a, f)) => (a.to_string(), f.to_string()),
        None => ("-".to_string(), "-".to_string()),
    };
    let mut out = String::from(
        "country\tstyle\tclimbers\tascents\tslope\thpd.lower\thpd.upper\t\
         min.ascents\tmin.failures\tgrade.type\tgame\n",
    );
    out.push_str(&format!(
        "{}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{}\t{}\t{}\t{}\n",
        meta.country,
        meta.style,
        dataset.climbers.len(),
        dataset.y.len(),
        ratio.mean,
        ratio.hpd_lower,
        ratio.hpd_upper,
        min_ascents,
        min_failures,
        dataset.system,
        dataset.game_mode
    ));
    out
}

/// Per-climber-page posterior of the grade: the data behind the
/// grade-through-time figures.
fn render_grades_over_time(dataset: &PreparedDataset, summaries: &[Summary]) -> String {
    let pages = dataset.n_pages as usize;
    let mut out = String::from("climber\tpage\tmean\thpd_lower\thpd_upper\n");
    for (j, climber) in dataset.climbers.iter().enumerate() {
        for p in 0..pages {
            let s = &summaries[1 + j * pages + p];
            debug_assert_eq!(s.name, format!("grade[{}][{}]", j + 1, p + 1));
            out.push_str(&format!(
                "{climber}\t{}\t{}\t{}\t{}\n",
                p + 1,
                s.mean,
                s.hpd_lower,
                s.hpd_upper
            ));
        }
    }
    out
}

/// Lift the activity thresholds from the prepare manifest sitting beside the
/// input dataset, when there is one.
fn sibling_prepare_thresholds(input: &Path) -> Option<(usize, usize)> {
    let manifest = RunManifest::load(&input.parent()?.join(MANIFEST_FILE)).ok()?;
    if manifest.command != "prepare" {
        return None;
    }
    Some((manifest.min_ascents?, manifest.min_failures?))
}
