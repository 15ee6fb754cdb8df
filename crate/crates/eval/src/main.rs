use std::fs::File;
use std::io::{self, BufReader};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use coach_core::gateway::{GatewayConfig, GatewayMode};
use coach_core::ModelGateway;
use coach_eval::{annotate, corpus, metrics, simulate, stats};

#[derive(Parser)]
#[command(name = "coach-eval", version, about = "Evaluation and simulation tools for the negotiation coach")]
struct Cli {
    /// Gateway backend; defaults to ACE_GATEWAY_MODE or stub.
    #[arg(long, global = true)]
    gateway_mode: Option<GatewayMode>,
    /// Stub script for the stub gateway; defaults to ACE_STUB_SCRIPT.
    #[arg(long, global = true)]
    stub_script: Option<PathBuf>,
    /// Overrides the seed from a simulation config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label every dialogue in a corpus and print error counts.
    Annotate {
        corpus: PathBuf,
        /// Scenario file or directory; built-in scenarios are always available.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// JSON object of preparation sheets keyed by dialogue id.
        #[arg(long)]
        preps: Option<PathBuf>,
    },
    /// Score predicted labels against gold labels.
    Evaluate { pred: PathBuf, gold: PathBuf },
    /// Dataset statistics per scenario.
    Stats { corpus: PathBuf },
    /// Run a batch of simulated negotiations.
    Simulate {
        config: PathBuf,
        /// Earlier results CSV to compare deal prices against.
        #[arg(long)]
        against: Option<PathBuf>,
    },
}

fn gateway(cli: &Cli) -> Result<Arc<dyn ModelGateway>> {
    let mut cfg = GatewayConfig::from_env()?;
    if let Some(mode) = cli.gateway_mode {
        cfg.mode = mode;
    }
    if let Some(path) = &cli.stub_script {
        cfg.stub_script = Some(path.clone());
    }
    Ok(cfg.build()?)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Annotate { corpus: path, scenarios, preps } => {
            let records = corpus::read_corpus(path)?;
            let scenarios = corpus::read_scenarios(scenarios.as_deref())?;
            let preps = match preps {
                Some(p) => corpus::read_preps(p)?,
                None => Default::default(),
            };
            let gw = gateway(&cli)?;
            let (annotated, summary) = annotate::annotate_corpus(&records, &scenarios, &preps, gw.as_ref())?;
            for d in &summary.diagnostics {
                eprintln!("warning: {d}");
            }
            print!("{}", annotate::render_counts(&summary));
            match &cli.out {
                Some(out) => corpus::write_corpus(out, &annotated)?,
                None => println!("{}", serde_json::to_string_pretty(&annotated)?),
            }
        }
        Command::Evaluate { pred, gold } => {
            let report = metrics::evaluate(&corpus::read_corpus(pred)?, &corpus::read_corpus(gold)?)?;
            print!("{}", metrics::render_report(&report));
            let json = serde_json::to_string_pretty(&report)?;
            match &cli.out {
                Some(out) => std::fs::write(out, json + "\n").with_context(|| format!("writing {}", out.display()))?,
                None => println!("{json}"),
            }
        }
        Command::Stats { corpus: path } => {
            let rows = stats::dataset_stats(&corpus::read_corpus(path)?);
            print!("{}", stats::render_stats(&rows));
            if let Some(out) = &cli.out {
                std::fs::write(out, serde_json::to_string_pretty(&rows)? + "\n")?;
            }
        }
        Command::Simulate { config, against } => {
            let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = simulate::SimConfig::from_toml(&text)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let scenarios = corpus::read_scenarios(None)?;
            let Some(scenario) = scenarios.get(&cfg.scenario) else {
                bail!("unknown scenario {:?}", cfg.scenario);
            };
            let gw = gateway(&cli)?;
            let outcomes = simulate::simulate(&cfg, scenario, gw.as_ref())?;
            let rows: Vec<_> = outcomes.iter().map(|o| o.row.clone()).collect();
            match &cli.out {
                Some(out) => simulate::write_csv(File::create(out)?, &rows)?,
                None => simulate::write_csv(io::stdout().lock(), &rows)?,
            }
            let failed = outcomes.iter().filter(|o| o.error.is_some()).count();
            if let Some(summary) = simulate::summarize(&rows) {
                eprint!("{}", simulate::render_summary(&summary));
            }
            if failed > 0 {
                eprintln!("{failed} runs aborted by gateway errors");
            }
            if let Some(path) = against {
                let other = simulate::read_csv(BufReader::new(File::open(path)?))?;
                match simulate::compare(&rows, &other) {
                    Some(w) => eprintln!("welch t {:.6}  df {:.3}  p {:.6}", w.t, w.df, w.p_two_sided),
                    None => eprintln!("welch t undefined for these batches"),
                }
            }
        }
    }
    Ok(())
}
