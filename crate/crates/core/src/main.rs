use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use deadalpha::config::{PipelineConfig, Tolerances};
use deadalpha::factor_extract::RoundingMode;
use deadalpha::pipeline::{run_classify, run_extract, run_pipeline};
use deadalpha::synth::{generate_synthetic, write_dataset, SyntheticSpec};
use deadalpha::{AlphaLabel, Error};

#[derive(Parser)]
#[command(name = "deadalpha", version, about = "Risk factors from dead alphas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Key-value config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d_gram: Option<usize>,
    /// `trunc` or `round`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    positions: Option<PathBuf>,
    #[arg(long)]
    returns: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = PipelineConfig::from_file(&self.config)?;
        if let Some(d) = self.d {
            cfg.d = d;
        }
        if let Some(d) = self.d_gram {
            cfg.d_gram = Some(d);
        }
        if let Some(mode) = &self.mode {
            cfg.rounding_mode = mode.parse()?;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        if let Some(p) = &self.positions {
            cfg.positions = Some(p.clone());
        }
        if let Some(p) = &self.returns {
            cfg.returns = Some(p.clone());
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: classify, extract factors, neutralize good alphas.
    Run(ConfigArgs),
    /// Per-alpha statistics and labels only.
    Classify(ConfigArgs),
    /// Factors from a file of dead-alpha positions.
    Extract {
        #[arg(long)]
        positions: PathBuf,
        /// Gram averaging window in days.
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value = "trunc")]
        mode: String,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Generate a seeded synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 500)]
        n_alphas: usize,
        #[arg(long, default_value_t = 400)]
        n_dead: usize,
        #[arg(long, default_value_t = 50)]
        m_stocks: usize,
        #[arg(long, default_value_t = 60)]
        t_days: usize,
        #[arg(long, default_value_t = 10)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        n_factors: usize,
        #[arg(long, default_value_t = 0.7)]
        signal_decay: f64,
        #[arg(long, default_value_t = 0.01)]
        noise_scale: f64,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        dollar_neutral: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out_dir: PathBuf,
    },
}

fn execute(command: Command) -> Result<serde_json::Value, Error> {
    match command {
        Command::Run(args) => {
            let manifest = run_pipeline(&args.load()?)?;
            Ok(json!({ "status": "ok", "counts": manifest.counts }))
        }
        Command::Classify(args) => {
            let c = run_classify(&args.load()?)?;
            Ok(json!({
                "status": "ok",
                "dead": c.today(AlphaLabel::Dead).len(),
                "good": c.today(AlphaLabel::Good).len(),
                "indeterminate": c.today(AlphaLabel::Indeterminate).len(),
            }))
        }
        Command::Extract {
            positions,
            d,
            mode,
            out_dir,
        } => {
            let mode: RoundingMode = mode.parse()?;
            let f = run_extract(&positions, d, mode, &Tolerances::default(), &out_dir)?;
            Ok(json!({ "status": "ok", "k": f.k, "erank": f.erank }))
        }
        Command::Synth {
            n_alphas,
            n_dead,
            m_stocks,
            t_days,
            d,
            n_factors,
            signal_decay,
            noise_scale,
            dollar_neutral,
            seed,
            out_dir,
        } => {
            let spec = SyntheticSpec {
                n_alphas,
                n_dead_target: n_dead,
                m_stocks,
                t_days,
                d,
                n_factors,
                signal_decay,
                noise_scale,
                dollar_neutral,
                ..Default::default()
            };
            let data = generate_synthetic(&spec, seed)?;
            write_dataset(&data, &out_dir)?;
            Ok(json!({ "status": "ok", "out_dir": out_dir }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let code = err.exit_code();
            println!(
                "{}",
                json!({ "status": "error", "kind": err.kind(), "exit_code": code, "message": err.to_string() })
            );
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(code as u8)
        }
    }
}
