use std::path::PathBuf;

use clap::Args;

use admrisk::eval::importance_report;
use admrisk::persist::load_model;

use crate::errors::CliResult;

#[derive(Args)]
pub struct ImportanceArgs {
    /// Trained bundle (.arx.json).
    #[arg(long)]
    pub model: PathBuf,

    /// Also write the table as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: ImportanceArgs, quiet: bool) -> CliResult<()> {
    let (bundle, _) = load_model(&args.model)?;
    let shares = bundle.scorer.importance()?;
    let rows = importance_report(&shares);

    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&rows)
            .map_err(|e| crate::errors::CliError::internal("cannot serialize table", e))?;
        std::fs::write(path, text)
            .map_err(|e| crate::errors::CliError::internal("cannot write table", e))?;
    }

    if !quiet {
        let display = hundredths(&rows);
        println!("{:<34} {:>14}", "Variable", "Importance (%)");
        for (row, percent) in rows.iter().zip(display) {
            println!("{:<34} {:>14}", row.feature, format_hundredths(percent));
        }
    }
    Ok(())
}

/// Two-decimal percentages by largest-remainder rounding, so the printed
/// column sums to exactly 100.00.
fn hundredths(rows: &[admrisk::eval::ImportanceRow]) -> Vec<i64> {
    let exact: Vec<f64> = rows.iter().map(|r| r.percent * 100.0).collect();
    let mut floored: Vec<i64> = exact.iter().map(|&v| v.floor() as i64).collect();
    let leftover = 10_000 - floored.iter().sum::<i64>();
    let mut by_remainder: Vec<usize> = (0..rows.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra)
    });
    for &i in by_remainder.iter().cycle().take(leftover.unsigned_abs() as usize) {
        floored[i] += leftover.signum();
    }
    floored
}

fn format_hundredths(value: i64) -> String {
    format!("{}.{:02}", value / 100, (value % 100).abs())
}
