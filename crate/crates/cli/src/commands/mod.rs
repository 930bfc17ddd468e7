pub mod evaluate;
pub mod importance;
pub mod score;
pub mod synth;
pub mod train;

use std::path::Path;

use admrisk::baselines::ProfundTable;
use admrisk::schema::{default_schema, CohortSchema};

use crate::errors::CliResult;

/// Schema for loading cohort CSVs: the standard 36-feature layout, or the
/// one implied by a generator config when the cohort was synthesized from
/// a custom one.
pub fn resolve_schema(schema_from: Option<&Path>) -> CliResult<CohortSchema> {
    match schema_from {
        Some(path) => {
            let config = admrisk::synth::GeneratorConfig::load(path)?;
            Ok(config.schema()?)
        }
        None => Ok(default_schema()),
    }
}

pub fn load_profund_table(path: Option<&Path>) -> CliResult<Option<ProfundTable>> {
    match path {
        Some(path) => Ok(Some(ProfundTable::load(path)?)),
        None => Ok(None),
    }
}

/// "mean [low, high]" with three decimals, as in the results tables.
pub fn format_summary(summary: &admrisk::eval::MetricSummary) -> String {
    format!(
        "{:.3} [{:.3}, {:.3}]",
        summary.mean, summary.ci_low, summary.ci_high
    )
}
