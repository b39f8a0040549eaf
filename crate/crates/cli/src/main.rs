use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use realism_core::fixture::write_fixture;
use realism_core::pipeline::{
    build_transport, plan, render_text, run_pipeline, verify_report, PipelineConfig, PipelineError,
    Stage,
};

/// Realism evaluation of augmented driving images: embedding-space
/// distances, a VLM jury and the analyses built on them.
#[derive(Parser)]
#[command(name = "realism", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "realism.toml")]
    config: PathBuf,
    /// Replace both the split seed and the bootstrap seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Print what would run, including uncached judge calls, and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split the reals and fit the per-condition and background Gaussians.
    Fit,
    /// Score augmented and held-out real images.
    Score,
    /// Ask the jury about every augmented image.
    Judge(JuryFlags),
    /// Ask the jury about held-out real images.
    Baseline(JuryFlags),
    /// Classify jury rejections as semantic and/or realism failures.
    ClassifyFailures(JuryFlags),
    /// Build the report from cached artifacts and print a summary.
    Analyze,
    /// Write report.json and report.txt to the output directory.
    Report,
    /// Recompute acceptance figures in report.json from the verdict cache.
    Verify,
    /// Run every stage in order.
    Run(JuryFlags),
    /// Write the scripted demo dataset (mock judges, synthetic embeddings).
    DemoFixture {
        /// Directory to create.
        dir: PathBuf,
    },
}

#[derive(Args, Default)]
struct JuryFlags {
    /// Comma-separated judge ids to keep from the configuration.
    #[arg(long, value_delimiter = ',')]
    judges: Vec<String>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Verdict (or classification) cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl JuryFlags {
    fn apply(&self, config: &mut PipelineConfig, classify: bool) -> Result<(), PipelineError> {
        if !self.judges.is_empty() {
            let pool = if classify { &mut config.classifiers } else { &mut config.judges };
            for id in &self.judges {
                if !pool.iter().any(|j| &j.judge_id == id) {
                    return Err(PipelineError::Validation(format!("judge `{id}` is not configured")));
                }
            }
            pool.retain(|j| self.judges.contains(&j.judge_id));
        }
        if let Some(n) = self.max_retries {
            config.jury.max_retries = Some(n);
        }
        if let Some(n) = self.concurrency {
            config.jury.concurrency = n;
        }
        if let Some(p) = &self.cache {
            if classify {
                config.classification.cache = p.clone();
            } else {
                config.jury.cache = p.clone();
            }
        }
        config.validate()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, PipelineError> {
    if let Command::DemoFixture { dir } = &cli.command {
        let fx = write_fixture(dir).map_err(PipelineError::Validation)?;
        println!("wrote demo fixture; try: realism --config {} run", fx.config.display());
        return Ok(ExitCode::SUCCESS);
    }
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed_override {
        config.split.seed = seed;
        config.bootstrap.seed = seed;
    }
    let stages = match &cli.command {
        Command::Fit => vec![Stage::Fit],
        Command::Score => vec![Stage::Score],
        Command::Judge(f) => {
            f.apply(&mut config, false)?;
            vec![Stage::Judge]
        }
        Command::Baseline(f) => {
            f.apply(&mut config, false)?;
            vec![Stage::Baseline]
        }
        Command::ClassifyFailures(f) => {
            f.apply(&mut config, true)?;
            vec![Stage::Classify]
        }
        Command::Analyze => vec![Stage::Analyze],
        Command::Report => vec![Stage::Report],
        Command::Run(f) => {
            f.apply(&mut config, false)?;
            Stage::ALL.to_vec()
        }
        Command::Verify => {
            let outcome = verify_report(&config)?;
            for m in &outcome.mismatches {
                println!("MISMATCH {m}");
            }
            println!("verified {} figures, {} mismatches", outcome.checked, outcome.mismatches.len());
            return Ok(if outcome.ok() { ExitCode::SUCCESS } else { ExitCode::from(3) });
        }
        Command::DemoFixture { .. } => unreachable!("handled above"),
    };
    if cli.dry_run {
        for line in plan(&config, &stages)? {
            println!("{line}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let transport = build_transport(&config)?;
    let report = run_pipeline(&config, &stages, &transport)?;
    if let (Some(r), true) = (report, stages == [Stage::Analyze]) {
        print!("{}", render_text(&r));
    }
    Ok(ExitCode::SUCCESS)
}
