//! `gradescale ladders`: print grade ladders and the sport-grade
//! correspondence table. Read-only; writes to stdout, no manifest.

use std::io::Write;

use gradescale::grades::{convert_for_report, ladder, GradeSystem, GradeValue};

use crate::CliError;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Print one system's ladder as value/label rows
    #[arg(long, required_unless_present = "correspondence")]
    pub system: Option<GradeSystem>,
    /// Print the Ewbank/French/YDS correspondence over the advanced range
    #[arg(long)]
    pub correspondence: bool,
}

pub fn run(args: &Args, out: &mut impl Write) -> Result<(), CliError> {
    let emit = |out: &mut dyn Write, line: String| {
        writeln!(out, "{line}").map_err(|e| CliError::input(format!("cannot write output: {e}")))
    };
    if let Some(system) = args.system {
        emit(out, "value\tlabel".to_string())?;
        for (label, value) in ladder(system) {
            emit(out, format!("{value}\t{label}"))?;
        }
    }
    if args.correspondence {
        emit(out, "ewbank\tfrench\tyds".to_string())?;
        for ewbank in 0..=60u32 {
            let grade = GradeValue {
                system: GradeSystem::Ewbank,
                value: ewbank as f64,
            };
            let french = convert_for_report(grade, GradeSystem::French);
            let yds = convert_for_report(grade, GradeSystem::Yds);
            if let (Some(french), Some(yds)) = (french, yds) {
                emit(
                    out,
                    format!("{ewbank}\t{}\t{}", french.render(), yds.render()),
                )?;
            }
        }
    }
    Ok(())
}
