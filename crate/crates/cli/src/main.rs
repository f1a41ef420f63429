use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sctf_cli::commands::{ablate, embed, evaluate, prepare, report, train};
use sctf_cli::synth::{synthetic_run_config, write_synthetic_dataset, SynthSpec};
use sctf_cli::{Mode, RunConfig};
use sctf_core::{Error, ErrorKind, Result};

#[derive(Parser, Debug)]
#[command(
    name = "sctf",
    version,
    about = "Scattering transformer murmur detection pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CirCor-format dataset directory.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,

    /// Directory for manifests, embeddings, models and reports.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_parser = ["paths", "multiseg"])]
    mode: Option<String>,

    /// Use path-averaged scattering vectors without positions or attention.
    #[arg(long, global = true)]
    ablate_baseline: bool,

    /// Skip the positional encoding.
    #[arg(long, global = true)]
    no_pe: bool,

    /// Log-compress scattering coefficients.
    #[arg(long, global = true)]
    log_coeffs: bool,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    seed_split: Option<u64>,

    #[arg(long, global = true)]
    seed_oversample: Option<u64>,

    #[arg(long, global = true)]
    seed_proj: Option<u64>,

    /// Override any config key, e.g. `--set svm.c=10` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split patients and write the segment manifest.
    Prepare,
    /// Compute embeddings for every manifest segment.
    Embed,
    /// Select hyperparameters and train the classifier.
    Train,
    /// Score the held-out patients.
    Evaluate,
    /// Compare the full model against the path-averaged baseline.
    Ablate,
    /// Print the reports found in the output directory.
    Report,
    /// Write a synthetic dataset whose classes differ only in event order.
    Synth {
        /// Destination directory.
        dir: PathBuf,
        #[arg(long, default_value_t = 16)]
        patients_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the resolved configuration as TOML.
    Config,
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for assignment in &cli.overrides {
        cfg.apply_override(assignment)?;
    }
    if let Some(d) = &cli.dataset {
        cfg.dataset_dir = d.clone();
    }
    if let Some(o) = &cli.output {
        cfg.output_dir = o.clone();
    }
    if let Some(m) = &cli.mode {
        cfg.mode = m.parse::<Mode>()?;
    }
    cfg.ablate_baseline |= cli.ablate_baseline;
    cfg.log_coeffs |= cli.log_coeffs;
    if cli.no_pe {
        cfg.context.positional_encoding = false;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed_split {
        cfg.seeds.split = s;
    }
    if let Some(s) = cli.seed_oversample {
        cfg.seeds.oversample = s;
    }
    if let Some(s) = cli.seed_proj {
        cfg.seeds.projection = s;
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| Error::State(format!("worker pool: {e}")))?;
    }
    match cli.command {
        Command::Prepare => print!("{}", prepare::prepare(&cfg)?.render_text()),
        Command::Embed => {
            let s = embed::embed(&cfg)?;
            println!(
                "{} embeddings of dimension {} ({})",
                s.count,
                s.dim,
                s.kind.as_str()
            );
        }
        Command::Train => print!("{}", train::train(&cfg)?.render_text()),
        Command::Evaluate => print!("{}", evaluate::evaluate(&cfg)?.0.render_text()),
        Command::Ablate => print!("{}", ablate::ablate(&cfg)?.comparison.render_text()),
        Command::Report => print!("{}", report(&cfg)?),
        Command::Synth {
            dir,
            patients_per_class,
            seed,
        } => {
            let spec = SynthSpec {
                patients_per_class,
                seed,
                ..SynthSpec::default()
            };
            let n = write_synthetic_dataset(&dir, &spec)?;
            let config_path = dir.join("sctf.toml");
            let synth_cfg = synthetic_run_config(&dir, &cfg.output_dir);
            sctf_cli::artifacts::write_text(&config_path, &synth_cfg.to_toml())?;
            println!("wrote {n} patients to {}", dir.display());
            println!("matching configuration: {}", config_path.display());
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}
