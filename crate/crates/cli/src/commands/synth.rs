use std::path::PathBuf;

use clap::Args;

use admrisk::synth;

use crate::errors::CliResult;

#[derive(Args)]
pub struct SynthArgs {
    /// Generator config JSON; the built-in published-marginals config when
    /// omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Cohort CSV to write.
    #[arg(long)]
    pub out: PathBuf,

    /// Ground-truth sidecar CSV (default: <out>.truth.csv).
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,

    /// Cohort size; overrides the config value.
    #[arg(long)]
    pub n: Option<usize>,

    /// Generator seed; overrides the config value.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: SynthArgs, quiet: bool) -> CliResult<()> {
    let mut config = match &args.config {
        Some(path) => synth::GeneratorConfig::load(path)?,
        None => synth::default_config(20_000, 42),
    };
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    let (cohort, truth) = synth::generate_cohort(&config)?;
    admrisk::dataset::write_csv(&cohort, &args.out)?;

    let truth_path = args.ground_truth.unwrap_or_else(|| {
        let mut name = args.out.file_stem().unwrap_or_default().to_os_string();
        name.push(".truth.csv");
        args.out.with_file_name(name)
    });
    synth::save_ground_truth(&truth, &truth_path)?;

    if !quiet {
        let positives = cohort
            .records
            .iter()
            .filter(|r| r.outcome == Some(1))
            .count();
        let prevalence = positives as f64 / cohort.len() as f64;
        let bayes = synth::bayes_auc(&truth)?;
        println!(
            "wrote {} records to {} (prevalence {:.4}, bayes AUC {:.4})",
            cohort.len(),
            args.out.display(),
            prevalence,
            bayes
        );
        println!("ground truth: {}", truth_path.display());
    }
    Ok(())
}
