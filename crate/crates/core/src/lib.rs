//! Time-varying climber grades and the grade-scale slope from ascent logbooks.
//!
//! The pipeline turns raw logbook exports into a compact observation set
//! ([`logbook`]), fits a dynamic paired-comparison model over it by Hamiltonian
//! Monte Carlo ([`model`], [`sampler`]), and offers two ordinary-least-squares
//! estimators of the same slope for cross-checks ([`regression`]).
//! [`simulate`] generates synthetic logbooks with known ground truth so the
//! whole chain can be validated end to end, and [`grades`] pins down the
//! numeric axes the grading systems live on.

pub mod grades;
pub mod logbook;
pub mod model;
pub mod regression;
pub mod sampler;
pub mod simulate;
