//! Grading systems as ordered numeric axes.
//!
//! Each system is represented by a ladder of canonical tokens; one ladder step
//! is exactly one unit on that system's axis. Absolute positions are fixed by
//! documented anchors (see the table constants below). Anchors are chosen so
//! that Ewbank, French and YDS agree numerically over the advanced range where
//! the systems correspond one-to-one, which keeps cross-system reports legible.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Version of the ladder tables shipped in this build. Bump on any table edit.
pub const LADDER_TABLE_VERSION: &str = "1";

/// The grading systems understood by the pipeline.
///
/// Ewbank, French, UIAA and VGrade are analysis systems (valid model inputs).
/// YDS is reporting-only: it appears as a conversion target, never as the axis
/// a dataset is analysed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradeSystem {
    Ewbank,
    French,
    Uiaa,
    VGrade,
    Yds,
}

impl GradeSystem {
    pub const ALL: [GradeSystem; 5] = [
        GradeSystem::Ewbank,
        GradeSystem::French,
        GradeSystem::Uiaa,
        GradeSystem::VGrade,
        GradeSystem::Yds,
    ];

    /// True for systems a dataset may be analysed on.
    pub fn is_analysis_system(self) -> bool {
        !matches!(self, GradeSystem::Yds)
    }

    pub fn name(self) -> &'static str {
        match self {
            GradeSystem::Ewbank => "ewbank",
            GradeSystem::French => "french",
            GradeSystem::Uiaa => "uiaa",
            GradeSystem::VGrade => "vgrade",
            GradeSystem::Yds => "yds",
        }
    }
}

impl fmt::Display for GradeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradeSystem {
    type Err = GradeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ewbank" | "ewbanks" => Ok(GradeSystem::Ewbank),
            "french" => Ok(GradeSystem::French),
            "uiaa" => Ok(GradeSystem::Uiaa),
            "vgrade" | "v-grade" | "v" => Ok(GradeSystem::VGrade),
            "yds" => Ok(GradeSystem::Yds),
            _ => Err(GradeError::UnknownSystem(s.to_string())),
        }
    }
}

/// A grade on one system's numeric axis. `value + 1.0` is exactly one grade
/// increment of that system; fractional values are meaningful (a 23.5 climber
/// sits between even odds on a 23 and a 24).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeValue {
    pub system: GradeSystem,
    pub value: f64,
}

impl GradeValue {
    pub fn new(system: GradeSystem, value: f64) -> Self {
        GradeValue { system, value }
    }

    /// Canonical text rendering: the ladder token when the value sits exactly
    /// on one, otherwise a plain decimal on the system's axis ("V" prefixed
    /// for the Vermin scale).
    pub fn render(&self) -> String {
        if let Some(token) = token_for_value(self.system, self.value) {
            return token.to_string();
        }
        match self.system {
            GradeSystem::VGrade => format!("V{}", self.value),
            _ => format!("{}", self.value),
        }
    }
}

impl fmt::Display for GradeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GradeError {
    #[error("unknown grade token {token:?} for system {system}")]
    UnknownGrade { token: String, system: GradeSystem },
    #[error("token {token:?} is not a {expected} grade (looks like {detected})")]
    SystemMismatch {
        token: String,
        expected: GradeSystem,
        detected: GradeSystem,
    },
    #[error("unknown grade system {0:?}")]
    UnknownSystem(String),
}

// --- Ladder tables -----------------------------------------------------------
//
// French sport ladder, anchored so that "7a" -> 23.0 (the Ewbank overlap in
// the advanced range). Enumeration below 6a follows the common letter-grade
// convention; only unit increments matter to the model, the anchor merely
// fixes where reports line up.
const FRENCH_LADDER: [&str; 32] = [
    "1", "2", "3", "4a", "4b", "4c", "5a", "5b", "5c", "6a", "6a+", "6b", "6b+", "6c", "6c+",
    "7a", "7a+", "7b", "7b+", "7c", "7c+", "8a", "8a+", "8b", "8b+", "8c", "8c+", "9a", "9a+",
    "9b", "9b+", "9c",
];
const FRENCH_OFFSET: f64 = 8.0; // index("7a") = 15, 15 + 8 = 23

// UIAA ladder with minus/plus steps from IV onward, anchored at "VII" -> 17.0.
// No cross-system conversion is defined for UIAA (conversion tables disagree
// on its interval widths), so the anchor only affects report legibility.
const UIAA_LADDER: [&str; 30] = [
    "I", "II", "III", "IV-", "IV", "IV+", "V-", "V", "V+", "VI-", "VI", "VI+", "VII-", "VII",
    "VII+", "VIII-", "VIII", "VIII+", "IX-", "IX", "IX+", "X-", "X", "X+", "XI-", "XI", "XI+",
    "XII-", "XII", "XII+",
];
const UIAA_OFFSET: f64 = 4.0; // index("VII") = 13, 13 + 4 = 17

// YDS fifth-class ladder, letter grades from 5.10. Anchored so that
// "5.11d" -> 23.0, aligning with the Ewbank correspondence table.
const YDS_LADDER: [&str; 34] = [
    "5.0", "5.1", "5.2", "5.3", "5.4", "5.5", "5.6", "5.7", "5.8", "5.9", "5.10a", "5.10b",
    "5.10c", "5.10d", "5.11a", "5.11b", "5.11c", "5.11d", "5.12a", "5.12b", "5.12c", "5.12d",
    "5.13a", "5.13b", "5.13c", "5.13d", "5.14a", "5.14b", "5.14c", "5.14d", "5.15a", "5.15b",
    "5.15c", "5.15d",
];
const YDS_OFFSET: f64 = 6.0; // index("5.11d") = 17, 17 + 6 = 23

// Ewbank is purely numeric and open-ended; the dumped table covers the range
// seen in practice. Vermin likewise uses face values V0..V17.
const EWBANK_TABLE_MAX: u32 = 40;
const VGRADE_TABLE_MAX: u32 = 17;

/// Correspondence between the three major sport systems over the advanced
/// range (Ewbank 23-39). Conversions outside these rows are unavailable.
const SPORT_CORRESPONDENCE: [(u32, &str, &str); 17] = [
    (23, "7a", "5.11d"),
    (24, "7a+", "5.12a"),
    (25, "7b", "5.12b"),
    (26, "7b+", "5.12c"),
    (27, "7c", "5.12d"),
    (28, "7c+", "5.13a"),
    (29, "8a", "5.13b"),
    (30, "8a+", "5.13c"),
    (31, "8b", "5.13d"),
    (32, "8b+", "5.14a"),
    (33, "8c", "5.14b"),
    (34, "8c+", "5.14c"),
    (35, "9a", "5.14d"),
    (36, "9a+", "5.15a"),
    (37, "9b", "5.15b"),
    (38, "9b+", "5.15c"),
    (39, "9c", "5.15d"),
];

/// The canonical (token, axis value) ladder for a system, for audit dumps and
/// round-trip checks.
pub fn ladder(system: GradeSystem) -> Vec<(String, f64)> {
    match system {
        GradeSystem::Ewbank => (1..=EWBANK_TABLE_MAX)
            .map(|n| (n.to_string(), f64::from(n)))
            .collect(),
        GradeSystem::VGrade => (0..=VGRADE_TABLE_MAX)
            .map(|n| (format!("V{n}"), f64::from(n)))
            .collect(),
        GradeSystem::French => FRENCH_LADDER
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i as f64 + FRENCH_OFFSET))
            .collect(),
        GradeSystem::Uiaa => UIAA_LADDER
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i as f64 + UIAA_OFFSET))
            .collect(),
        GradeSystem::Yds => YDS_LADDER
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i as f64 + YDS_OFFSET))
            .collect(),
    }
}

/// Parse a grade token of the stated system onto its numeric axis.
///
/// Ewbank accepts any non-negative decimal (the scale is purely numeric and
/// open-ended); the other systems accept exactly their ladder tokens. Slash
/// grades like "23/24" are rejected rather than averaged, so that ambiguous
/// entries cannot contaminate a regression axis. A token that belongs to a
/// different system's ladder is reported as a mismatch rather than unknown.
pub fn parse_grade(text: &str, system: GradeSystem) -> Result<GradeValue, GradeError> {
    let token = text.trim();
    if let Some(value) = parse_in_system(token, system) {
        return Ok(GradeValue { system, value });
    }
    for other in GradeSystem::ALL {
        if other == system {
            continue;
        }
        if parse_in_system(token, other).is_some() {
            return Err(GradeError::SystemMismatch {
                token: token.to_string(),
                expected: system,
                detected: other,
            });
        }
    }
    Err(GradeError::UnknownGrade {
        token: token.to_string(),
        system,
    })
}

fn parse_in_system(token: &str, system: GradeSystem) -> Option<f64> {
    match system {
        GradeSystem::Ewbank => parse_plain_decimal(token),
        GradeSystem::VGrade => {
            let rest = token.strip_prefix('V').or_else(|| token.strip_prefix('v'))?;
            let n: u32 = rest.parse().ok()?;
            (n <= VGRADE_TABLE_MAX).then(|| f64::from(n))
        }
        GradeSystem::French => {
            let lowered = token.to_ascii_lowercase();
            FRENCH_LADDER
                .iter()
                .position(|t| *t == lowered)
                .map(|i| i as f64 + FRENCH_OFFSET)
        }
        GradeSystem::Uiaa => {
            let upper = token.to_ascii_uppercase().replace('\u{2212}', "-");
            UIAA_LADDER
                .iter()
                .position(|t| *t == upper)
                .map(|i| i as f64 + UIAA_OFFSET)
        }
        GradeSystem::Yds => {
            let lowered = token.to_ascii_lowercase();
            YDS_LADDER
                .iter()
                .position(|t| *t == lowered)
                .map(|i| i as f64 + YDS_OFFSET)
        }
    }
}

// Digits and at most one dot: accepts "23" and "29.4", rejects "23/24",
// "1e3", "inf" and the empty string.
fn parse_plain_decimal(token: &str) -> Option<f64> {
    if token.is_empty() || !token.bytes().any(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut dots = 0;
    for b in token.bytes() {
        match b {
            b'0'..=b'9' => {}
            b'.' => dots += 1,
            _ => return None,
        }
    }
    if dots > 1 {
        return None;
    }
    token.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0)
}

fn token_for_value(system: GradeSystem, value: f64) -> Option<&'static str> {
    if !value.is_finite() || value.fract() != 0.0 {
        return None;
    }
    match system {
        GradeSystem::Ewbank => None, // rendered numerically
        GradeSystem::VGrade => None, // rendered as V{n}
        GradeSystem::French => {
            let idx = value - FRENCH_OFFSET;
            token_at(&FRENCH_LADDER, idx)
        }
        GradeSystem::Uiaa => {
            let idx = value - UIAA_OFFSET;
            token_at(&UIAA_LADDER, idx)
        }
        GradeSystem::Yds => {
            let idx = value - YDS_OFFSET;
            token_at(&YDS_LADDER, idx)
        }
    }
}

fn token_at(table: &'static [&'static str], idx: f64) -> Option<&'static str> {
    if idx < 0.0 || idx >= table.len() as f64 {
        return None;
    }
    Some(table[idx as usize])
}

/// Convert a grade for reporting, per the sport correspondence table.
///
/// Identity conversions always succeed. Otherwise only Ewbank/French/YDS over
/// the tabulated advanced range are convertible; everything else (UIAA and
/// Vermin pairs, grades outside the table, fractional values) yields `None`.
pub fn convert_for_report(grade: GradeValue, target: GradeSystem) -> Option<GradeValue> {
    if grade.system == target {
        return Some(grade);
    }
    let row = SPORT_CORRESPONDENCE.iter().find(|(ewbank, french, yds)| {
        let source_value = match grade.system {
            GradeSystem::Ewbank => f64::from(*ewbank),
            GradeSystem::French => parse_in_system(french, GradeSystem::French).unwrap(),
            GradeSystem::Yds => parse_in_system(yds, GradeSystem::Yds).unwrap(),
            GradeSystem::Uiaa | GradeSystem::VGrade => return false,
        };
        source_value == grade.value
    })?;
    let value = match target {
        GradeSystem::Ewbank => f64::from(row.0),
        GradeSystem::French => parse_in_system(row.1, GradeSystem::French).unwrap(),
        GradeSystem::Yds => parse_in_system(row.2, GradeSystem::Yds).unwrap(),
        GradeSystem::Uiaa | GradeSystem::VGrade => return None,
    };
    Some(GradeValue {
        system: target,
        value,
    })
}
