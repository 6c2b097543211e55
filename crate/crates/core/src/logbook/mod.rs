//! Logbook ingestion and preparation.
//!
//! Raw ascent rows become a [`PreparedDataset`] in a fixed order: ingest,
//! aggregate to sessions (session mode only), filter climbers by activity,
//! paginate onto monthly pages. The activity thresholds are applied after
//! aggregation in session mode, so "ascents" always means the records the
//! model will actually see.

mod ingest;

pub use ingest::{ingest, InputFormat, Ingested};

use crate::grades::{GradeSystem, GradeValue};
use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

/// One attempt (or session) outcome row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentRecord {
    pub climber_id: String,
    pub route_id: String,
    pub date: NaiveDate,
    pub grade: GradeValue,
    /// Normalized (lowercased, trimmed) tick token as logged.
    pub tick: String,
    pub success: bool,
}

/// How tick tokens map to outcomes. Tokens are matched case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickPolicy {
    pub success_ticks: BTreeSet<String>,
    pub failure_ticks: BTreeSet<String>,
    /// Ticks deliberately outside the game (e.g. top-rope laps): dropped and
    /// counted, never an error.
    #[serde(default)]
    pub ignored_ticks: BTreeSet<String>,
    /// What to do with a tick in none of the three sets.
    #[serde(default)]
    pub on_unknown: UnknownTickAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownTickAction {
    /// Drop the row, count it per token, and let the caller warn.
    #[default]
    Ignore,
    /// Abort ingestion on the first unknown token.
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickClass {
    Success,
    Failure,
    Ignored,
    Unknown,
}

impl TickPolicy {
    /// Default tick vocabulary for a grading system: clean-ascent ticks count
    /// as success ("send" replaces "redpoint" on boulders), explicit-failure
    /// ticks as failure, everything else is surfaced as unknown.
    pub fn default_for(system: GradeSystem) -> TickPolicy {
        let success: &[&str] = match system {
            GradeSystem::VGrade => &["send", "flash", "onsight"],
            _ => &["redpoint", "flash", "onsight"],
        };
        let failure = ["hangdog", "attempt", "working", "retreat"];
        TickPolicy {
            success_ticks: success.iter().map(|t| t.to_string()).collect(),
            failure_ticks: failure.iter().map(|t| t.to_string()).collect(),
            ignored_ticks: BTreeSet::new(),
            on_unknown: UnknownTickAction::Ignore,
        }
    }

    /// The three sets must be pairwise disjoint or classification is ambiguous.
    pub fn validate(&self) -> Result<(), LogbookError> {
        for token in &self.success_ticks {
            if self.failure_ticks.contains(token) || self.ignored_ticks.contains(token) {
                return Err(LogbookError::OverlappingTickSets(token.clone()));
            }
        }
        for token in &self.failure_ticks {
            if self.ignored_ticks.contains(token) {
                return Err(LogbookError::OverlappingTickSets(token.clone()));
            }
        }
        Ok(())
    }

    pub fn classify(&self, tick: &str) -> TickClass {
        let token = tick.trim().to_ascii_lowercase();
        if self.success_ticks.contains(&token) {
            TickClass::Success
        } else if self.failure_ticks.contains(&token) {
            TickClass::Failure
        } else if self.ignored_ticks.contains(&token) {
            TickClass::Ignored
        } else {
            TickClass::Unknown
        }
    }
}

/// Attempt games score every try; session games score the best result per
/// climber-route-day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameMode {
    Attempt,
    Session,
}

impl fmt::Display for GameMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameMode::Attempt => f.write_str("attempt"),
            GameMode::Session => f.write_str("session"),
        }
    }
}

impl FromStr for GameMode {
    type Err = LogbookError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "attempt" => Ok(GameMode::Attempt),
            "session" => Ok(GameMode::Session),
            _ => Err(LogbookError::UnknownGameMode(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum LogbookError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("row {row}: tick {tick:?} is in none of the configured tick sets")]
    UnknownTick { row: usize, tick: String },
    #[error("tick policy sets overlap on {0:?}")]
    OverlappingTickSets(String),
    #[error("unknown input format {0:?} (expected \"delimited\" or \"json\")")]
    UnknownFormat(String),
    #[error("unknown game mode {0:?} (expected \"attempt\" or \"session\")")]
    UnknownGameMode(String),
    #[error("window start {start} is not before window end {end}")]
    EmptyWindow { start: NaiveDate, end: NaiveDate },
    #[error(
        "record for climber {climber_id:?} on route {route_id:?} dated {date} \
         falls outside the window [{start}, {end})"
    )]
    RecordOutOfWindow {
        climber_id: String,
        route_id: String,
        date: NaiveDate,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("inconsistent dataset: {0}")]
    InvalidDataset(String),
}

/// Same route, same day, different logged grades; the first grade is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeConflict {
    pub climber_id: String,
    pub route_id: String,
    pub date: NaiveDate,
    pub kept: GradeValue,
    pub dropped: GradeValue,
}

#[derive(Debug, Clone)]
pub struct SessionAggregation {
    pub records: Vec<AscentRecord>,
    pub conflicts: Vec<GradeConflict>,
}

/// Collapse to one record per (climber, route, date): success if any attempt
/// that day succeeded. The representative row is the first success in the
/// group (else the first row), carrying the group's first-seen grade.
pub fn aggregate_sessions(records: &[AscentRecord]) -> SessionAggregation {
    let mut index: HashMap<(&str, &str, NaiveDate), usize> = HashMap::new();
    let mut out: Vec<AscentRecord> = Vec::new();
    let mut conflicts = Vec::new();
    let mut flagged: HashSet<usize> = HashSet::new();

    for record in records {
        let key = (record.climber_id.as_str(), record.route_id.as_str(), record.date);
        match index.get(&key) {
            None => {
                index.insert(key, out.len());
                out.push(record.clone());
            }
            Some(&slot) => {
                let kept = out[slot].grade;
                if record.grade != kept && flagged.insert(slot) {
                    conflicts.push(GradeConflict {
                        climber_id: record.climber_id.clone(),
                        route_id: record.route_id.clone(),
                        date: record.date,
                        kept,
                        dropped: record.grade,
                    });
                }
                if record.success && !out[slot].success {
                    out[slot] = record.clone();
                    out[slot].grade = kept;
                }
            }
        }
    }

    SessionAggregation {
        records: out,
        conflicts,
    }
}

/// Keep only climbers with at least `min_ascents` records and `min_failures`
/// failed outcomes among them. Idempotent; preserves record order.
pub fn filter_climbers(
    records: &[AscentRecord],
    min_ascents: usize,
    min_failures: usize,
) -> Vec<AscentRecord> {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for record in records {
        let entry = counts.entry(record.climber_id.as_str()).or_insert((0, 0));
        entry.0 += 1;
        if !record.success {
            entry.1 += 1;
        }
    }
    records
        .iter()
        .filter(|r| {
            let (ascents, failures) = counts[r.climber_id.as_str()];
            ascents >= min_ascents && failures >= min_failures
        })
        .cloned()
        .collect()
}

/// Observation arrays in the layout the likelihood consumes.
///
/// Pages are 1-based calendar months counted from the window start; climber
/// indices are 0-based positions in the sorted `climbers` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedDataset {
    pub system: GradeSystem,
    pub game_mode: GameMode,
    pub climbers: Vec<String>,
    pub n_pages: u32,
    pub min_page: Vec<u32>,
    pub max_page: Vec<u32>,
    pub y: Vec<bool>,
    pub page: Vec<u32>,
    pub climber: Vec<u32>,
    pub route_grade: Vec<f64>,
}

impl PreparedDataset {
    pub fn n_climbers(&self) -> usize {
        self.climbers.len()
    }

    pub fn n_ascents(&self) -> usize {
        self.y.len()
    }

    /// Structural consistency checks; run after deserializing from disk.
    pub fn validate(&self) -> Result<(), LogbookError> {
        let c = self.climbers.len();
        let n = self.y.len();
        if self.min_page.len() != c || self.max_page.len() != c {
            return Err(LogbookError::InvalidDataset(format!(
                "page-span arrays sized {}/{} for {c} climbers",
                self.min_page.len(),
                self.max_page.len()
            )));
        }
        if self.page.len() != n || self.climber.len() != n || self.route_grade.len() != n {
            return Err(LogbookError::InvalidDataset(format!(
                "ascent arrays sized {}/{}/{} for {n} outcomes",
                self.page.len(),
                self.climber.len(),
                self.route_grade.len()
            )));
        }
        for j in 0..c {
            if !(1 <= self.min_page[j]
                && self.min_page[j] <= self.max_page[j]
                && self.max_page[j] <= self.n_pages)
            {
                return Err(LogbookError::InvalidDataset(format!(
                    "climber {:?} has page span [{}, {}] outside 1..={}",
                    self.climbers[j], self.min_page[j], self.max_page[j], self.n_pages
                )));
            }
        }
        for i in 0..n {
            let j = self.climber[i] as usize;
            if j >= c {
                return Err(LogbookError::InvalidDataset(format!(
                    "ascent {i} references climber index {j} of {c}"
                )));
            }
            if !(self.min_page[j]..=self.max_page[j]).contains(&self.page[i]) {
                return Err(LogbookError::InvalidDataset(format!(
                    "ascent {i} on page {} outside climber {:?} span [{}, {}]",
                    self.page[i], self.climbers[j], self.min_page[j], self.max_page[j]
                )));
            }
            if !self.route_grade[i].is_finite() {
                return Err(LogbookError::InvalidDataset(format!(
                    "ascent {i} has non-finite route grade"
                )));
            }
        }
        Ok(())
    }
}

/// 1-based month index of `date` counted from the month of `start`.
fn month_page(date: NaiveDate, start: NaiveDate) -> i64 {
    let years = i64::from(date.year()) - i64::from(start.year());
    let months = i64::from(date.month()) - i64::from(start.month());
    years * 12 + months + 1
}

/// Assign monthly pages over `[window_start, window_end)` and pack the records
/// into model-ready arrays. A record on the first day of a month belongs to
/// that month; the page count covers every month the window touches.
pub fn paginate(
    records: &[AscentRecord],
    game_mode: GameMode,
    window_start: NaiveDate,
    window_end: NaiveDate,
) -> Result<PreparedDataset, LogbookError> {
    if window_start >= window_end {
        return Err(LogbookError::EmptyWindow {
            start: window_start,
            end: window_end,
        });
    }
    let last_day = window_end.pred_opt().expect("window end has a predecessor");
    let n_pages = month_page(last_day, window_start);
    debug_assert!(n_pages >= 1);

    let mut system: Option<GradeSystem> = None;
    for record in records {
        if record.date < window_start || record.date >= window_end {
            return Err(LogbookError::RecordOutOfWindow {
                climber_id: record.climber_id.clone(),
                route_id: record.route_id.clone(),
                date: record.date,
                start: window_start,
                end: window_end,
            });
        }
        match system {
            None => system = Some(record.grade.system),
            Some(s) if s != record.grade.system => {
                return Err(LogbookError::InvalidDataset(format!(
                    "mixed grade systems: {s} and {}",
                    record.grade.system
                )))
            }
            Some(_) => {}
        }
    }
    // An empty record set still yields a well-formed (zero-climber) dataset;
    // default the axis to Ewbank, the numeric scale.
    let system = system.unwrap_or(GradeSystem::Ewbank);

    let mut climbers: Vec<String> = records
        .iter()
        .map(|r| r.climber_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    climbers.sort();
    let climber_index: HashMap<&str, u32> = climbers
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u32))
        .collect();

    let c = climbers.len();
    let mut min_page = vec![u32::MAX; c];
    let mut max_page = vec![0u32; c];
    let mut y = Vec::with_capacity(records.len());
    let mut page = Vec::with_capacity(records.len());
    let mut climber = Vec::with_capacity(records.len());
    let mut route_grade = Vec::with_capacity(records.len());

    for record in records {
        let p = month_page(record.date, window_start) as u32;
        let j = climber_index[record.climber_id.as_str()];
        min_page[j as usize] = min_page[j as usize].min(p);
        max_page[j as usize] = max_page[j as usize].max(p);
        y.push(record.success);
        page.push(p);
        climber.push(j);
        route_grade.push(record.grade.value);
    }

    let dataset = PreparedDataset {
        system,
        game_mode,
        climbers,
        n_pages: n_pages as u32,
        min_page,
        max_page,
        y,
        page,
        climber,
        route_grade,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Stage-by-stage record accounting for the preparation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreparationSummary {
    pub game_mode: GameMode,
    pub records_in: usize,
    /// Record count after session aggregation; `None` when the stage was
    /// skipped (attempt mode).
    pub session_records: Option<usize>,
    pub grade_conflicts: Vec<GradeConflict>,
    pub climbers_seen: usize,
    pub climbers_retained: usize,
    pub records_retained: usize,
    pub min_ascents: usize,
    pub min_failures: usize,
    pub n_pages: u32,
}

#[derive(Debug, Clone)]
pub struct PrepareOptions {
    pub game_mode: GameMode,
    pub min_ascents: usize,
    pub min_failures: usize,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
}

/// The full preparation pipeline in its fixed order:
/// (session mode: aggregate) then filter then paginate.
pub fn prepare(
    records: &[AscentRecord],
    opts: &PrepareOptions,
) -> Result<(PreparedDataset, PreparationSummary), LogbookError> {
    let records_in = records.len();
    let climbers_seen = records
        .iter()
        .map(|r| r.climber_id.as_str())
        .collect::<HashSet<_>>()
        .len();

    let (working, session_records, grade_conflicts) = match opts.game_mode {
        GameMode::Attempt => (records.to_vec(), None, Vec::new()),
        GameMode::Session => {
            let agg = aggregate_sessions(records);
            let n = agg.records.len();
            (agg.records, Some(n), agg.conflicts)
        }
    };

    let filtered = filter_climbers(&working, opts.min_ascents, opts.min_failures);
    let dataset = paginate(&filtered, opts.game_mode, opts.window_start, opts.window_end)?;

    let summary = PreparationSummary {
        game_mode: opts.game_mode,
        records_in,
        session_records,
        grade_conflicts,
        climbers_seen,
        climbers_retained: dataset.n_climbers(),
        records_retained: dataset.n_ascents(),
        min_ascents: opts.min_ascents,
        min_failures: opts.min_failures,
        n_pages: dataset.n_pages,
    };
    Ok((dataset, summary))
}
