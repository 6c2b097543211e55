//! `gradescale prepare`: raw logbook in, model-ready dataset out, with a
//! stage-by-stage processing report.

use std::path::PathBuf;

use chrono::{Datelike, Months, NaiveDate};
use gradescale::grades::GradeSystem;
use gradescale::logbook::{
    ingest, prepare, AscentRecord, GameMode, InputFormat, Ingested, PreparationSummary,
    PrepareOptions, TickPolicy,
};

use crate::commands::{ensure_out_dir, load_for, required_out, write_json, write_text};
use crate::manifest::RunManifest;
use crate::CliError;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Logbook file: delimited table (comma or tab) or a JSON array
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "manifest",
        conflicts_with = "manifest"
    )]
    pub input: Option<PathBuf>,
    /// Input encoding
    #[arg(long, default_value = "delimited")]
    pub format: InputFormat,
    /// Grade system the logbook is written in
    #[arg(long, default_value = "ewbank")]
    pub system: GradeSystem,
    /// attempt keeps every row; session keeps the best result per
    /// climber-route-day
    #[arg(long, default_value = "session")]
    pub game: GameMode,
    /// First day of the analysis window; defaults to the first of the
    /// earliest record's month
    #[arg(long, value_name = "DATE")]
    pub window_start: Option<NaiveDate>,
    /// Day after the window; defaults to the first of the month after the
    /// latest record
    #[arg(long, value_name = "DATE")]
    pub window_end: Option<NaiveDate>,
    /// Keep only climbers with at least this many records
    #[arg(long, default_value_t = 30)]
    pub min_ascents: usize,
    /// Keep only climbers with at least this many failures
    #[arg(long, default_value_t = 1)]
    pub min_failures: usize,
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
            return load_for(path, "prepare", self.out);
        }
        let mut manifest = RunManifest::base("prepare", required_out(self.out)?);
        manifest.input = self.input;
        manifest.format = Some(self.format);
        manifest.system = Some(self.system);
        manifest.game = Some(self.game);
        manifest.window_start = self.window_start;
        manifest.window_end = self.window_end;
        manifest.min_ascents = Some(self.min_ascents);
        manifest.min_failures = Some(self.min_failures);
        Ok(manifest)
    }
}

pub fn run(manifest: &RunManifest) -> Result<(), CliError> {
    let input = manifest.require(manifest.input.as_ref(), "input")?;
    let format = manifest.require(manifest.format.as_ref(), "format")?;
    let system = manifest.require(manifest.system.as_ref(), "system")?;
    let game = manifest.require(manifest.game.as_ref(), "game")?;
    let min_ascents = manifest.require(manifest.min_ascents.as_ref(), "min_ascents")?;
    let min_failures = manifest.require(manifest.min_failures.as_ref(), "min_failures")?;
    if !system.is_analysis_system() {
        return Err(CliError::input(format!(
            "{system} is a reporting-only system; analyse in ewbank, french, uiaa or vgrade"
        )));
    }

    let policy = TickPolicy::default_for(system);
    let ingested = ingest(&input, format, system, &policy)?;
    for (tick, count) in &ingested.unknown_ticks {
        eprintln!("warning: unknown tick {tick:?} on {count} row(s); dropped");
    }

    let (window_start, window_end) = resolve_window(
        &ingested.records,
        manifest.window_start,
        manifest.window_end,
    )?;
    let opts = PrepareOptions {
        game_mode: game,
        min_ascents,
        min_failures,
        window_start,
        window_end,
    };
    let (dataset, summary) = prepare(&ingested.records, &opts)?;
    for conflict in &summary.grade_conflicts {
        eprintln!(
            "warning: climber {} route {} on {}: grades {} and {} conflict; kept {}",
            conflict.climber_id,
            conflict.route_id,
            conflict.date,
            conflict.kept.render(),
            conflict.dropped.render(),
            conflict.kept.render()
        );
    }

    ensure_out_dir(&manifest.out_dir)?;
    write_json(&manifest.out_dir.join("prepared.json"), &dataset)?;
    write_text(
        &manifest.out_dir.join("processing_report.tsv"),
        &render_report(&ingested, &summary, system, &opts),
    )?;
    let mut resolved = manifest.clone();
    resolved.window_start = Some(window_start);
    resolved.window_end = Some(window_end);
    resolved.save(&manifest.out_dir)?;

    eprintln!(
        "prepared {} ascents from {} climbers over {} pages -> {}",
        dataset.y.len(),
        dataset.climbers.len(),
        dataset.n_pages,
        manifest.out_dir.join("prepared.json").display()
    );
    Ok(())
}

/// Fill in missing window edges from the data: the month containing the
/// earliest record through the month containing the latest, inclusive.
fn resolve_window(
    records: &[AscentRecord],
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
) -> Result<(NaiveDate, NaiveDate), CliError> {
    if let (Some(s), Some(e)) = (start, end) {
        return Ok((s, e));
    }
    let dates = records.iter().map(|r| r.date);
    let (earliest, latest) = match (dates.clone().min(), dates.max()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            return Err(CliError::input(
                "cannot derive a window from an empty logbook; pass --window-start and --window-end",
            ))
        }
    };
    let month_floor = |d: NaiveDate| {
        NaiveDate::from_ymd_opt(d.year(), d.month(), 1).expect("first of month exists")
    };
    Ok((
        start.unwrap_or_else(|| month_floor(earliest)),
        end.unwrap_or_else(|| month_floor(latest) + Months::new(1)),
    ))
}

fn render_report(
    ingested: &Ingested,
    summary: &PreparationSummary,
    system: GradeSystem,
    opts: &PrepareOptions,
) -> String {
    let mut out = String::new();
    out.push_str(&format!("# min_ascents\t{}\n", opts.min_ascents));
    out.push_str(&format!("# min_failures\t{}\n", opts.min_failures));
    out.push_str(&format!("# system\t{system}\n"));
    out.push_str(&format!("# game\t{}\n", opts.game_mode));
    out.push_str(&format!("# window_start\t{}\n", opts.window_start));
    out.push_str(&format!("# window_end\t{}\n", opts.window_end));
    out.push_str("stage\trows_in\trows_out\tnote\n");

    let mut ingest_notes = Vec::new();
    if ingested.ignored_rows > 0 {
        ingest_notes.push(format!("{} ignored-tick rows", ingested.ignored_rows));
    }
    let unknown_total: usize = ingested.unknown_ticks.values().sum();
    if unknown_total > 0 {
        let detail: Vec<String> = ingested
            .unknown_ticks
            .iter()
            .map(|(tick, n)| format!("{tick} x{n}"))
            .collect();
        ingest_notes.push(format!(
            "{unknown_total} unknown-tick rows ({})",
            detail.join(", ")
        ));
    }
    let ingest_note = if ingest_notes.is_empty() {
        "-".to_string()
    } else {
        ingest_notes.join("; ")
    };
    out.push_str(&format!(
        "ingest\t{}\t{}\t{}\n",
        ingested.rows_read,
        summary.records_in,
        ingest_note
    ));

    match summary.session_records {
        Some(after) => {
            let mut note = format!(
                "{} climber-route-day duplicates collapsed",
                summary.records_in - after
            );
            if !summary.grade_conflicts.is_empty() {
                note.push_str(&format!("; {} grade conflicts", summary.grade_conflicts.len()));
            }
            out.push_str(&format!(
                "aggregate\t{}\t{after}\t{note}\n",
                summary.records_in
            ));
        }
        None => {
            out.push_str(&format!(
                "aggregate\t{0}\t{0}\tskipped\n",
                summary.records_in
            ));
        }
    }

    let filter_in = summary.session_records.unwrap_or(summary.records_in);
    out.push_str(&format!(
        "filter\t{filter_in}\t{}\t{} of {} climbers retained\n",
        summary.records_retained, summary.climbers_retained, summary.climbers_seen
    ));
    out.push_str(&format!(
        "paginate\t{0}\t{0}\t{1} monthly pages\n",
        summary.records_retained, summary.n_pages
    ));
    out
}
