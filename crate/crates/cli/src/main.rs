use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vsense_cli::{
    cmd_evaluate, cmd_generate, cmd_reconstruct, cmd_report, cmd_train, cmd_train_all, CliError, Layout,
    ReconstructRequest, RunConfig,
};
use vsense_core::training::Regime;

#[derive(Parser)]
#[command(name = "vsense", version, about = "Virtual sensing of flame images from pressure signals")]
struct Cli {
    /// JSON run configuration; defaults are used for absent fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides VSENSE_OUT and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated seed list.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Epochs for every regime.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    master_seed: Option<u64>,
    /// Comma-separated regime selection for `train all` and `evaluate`.
    #[arg(long, global = true, value_delimiter = ',')]
    regimes: Option<Vec<String>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the dataset and its manifest.
    Generate,
    /// Train the image autoencoder for every seed.
    Pretrain,
    /// Train one regime (or `all`) for every seed.
    Train { regime: String },
    /// Score all selected regimes on the test split.
    Evaluate,
    /// Dump true and reconstructed frames of one condition as PGM files.
    Reconstruct {
        regime: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Condition name or id.
        #[arg(long)]
        condition: String,
        /// First sample within the condition.
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
    /// Write the results table and training summary to report.txt.
    Report,
    /// Print the effective configuration and its hash.
    Config,
}

fn parse_regime(s: &str) -> Result<Regime, CliError> {
    Regime::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Regime::ALL.iter().map(|r| r.name()).collect();
        CliError::Config(format!("unknown regime {s:?}; expected one of {}", names.join(", ")))
    })
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Ok(dir) = std::env::var("VSENSE_OUT") {
        if !dir.is_empty() {
            cfg.out_dir = dir.into();
        }
    }
    if let Some(d) = &cli.out {
        cfg.out_dir = d.clone();
    }
    if let Some(s) = &cli.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(e) = cli.epochs {
        cfg.training.epochs = e;
        for o in cfg.training.overrides.values_mut() {
            o.epochs = None;
        }
    }
    if let Some(s) = cli.stride {
        cfg.dataset.stride = s;
    }
    if let Some(w) = cli.window {
        cfg.dataset.window_len = w;
    }
    if let Some(m) = cli.master_seed {
        cfg.dataset.master_seed = m;
    }
    if let Some(r) = &cli.regimes {
        cfg.regimes = r.iter().map(|s| parse_regime(s)).collect::<Result<_, _>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli)?;
    let layout = Layout::new(&cfg.out_dir);
    match cli.command {
        Command::Generate => {
            let m = cmd_generate(&cfg, &layout)?;
            println!(
                "dataset {} ({} train / {} test samples)",
                layout.dataset().display(),
                m.train_samples,
                m.test_samples
            );
            for c in &m.conditions {
                println!(
                    "  {:>2} {:<24} {:<5?} {:>5} samples  rms {:>7.1} Pa  peak {:>6.1} Hz (ratio {:.1})",
                    c.id, c.name, c.split, c.samples, c.oracle.rms, c.oracle.dominant_hz, c.oracle.peak_ratio
                );
            }
        }
        Command::Pretrain => {
            cmd_train(&cfg, &layout, Regime::AE)?;
        }
        Command::Train { regime } => {
            if regime.eq_ignore_ascii_case("all") {
                cmd_train_all(&cfg, &layout)?;
            } else {
                cmd_train(&cfg, &layout, parse_regime(&regime)?)?;
            }
        }
        Command::Evaluate => {
            let (_, table) = cmd_evaluate(&cfg, &layout)?;
            print!("{table}");
        }
        Command::Reconstruct { regime, seed, condition, start, count } => {
            let req = ReconstructRequest { regime: parse_regime(&regime)?, seed, condition, start, count };
            let s = cmd_reconstruct(&cfg, &layout, &req)?;
            println!("{} files in {}", s.files.len(), layout.reconstruction_dir(req.regime, seed).display());
            if let Some(std) = s.max_pixel_std {
                println!("max per-pixel std of reconstructions: {std:.4}");
            }
        }
        Command::Report => {
            print!("{}", cmd_report(&cfg, &layout)?);
        }
        Command::Config => {
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            println!("hash {}", cfg.hash());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
