use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cogmac_cli::commands::{self, Loaded, Sink};
use cogmac_cli::config::{parse_sweep, Overrides, Scenario};
use cogmac_cli::figures::{self, RECIPES};
use cogmac_cli::output::{sha256_hex, Format};
use cogmac_cli::CliError;

#[derive(Parser)]
#[command(name = "cogmac", version, about = "Throughput analysis, policy optimization and simulation for cognitive MAC protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory.
    #[arg(long, env = "COGMAC_OUT_DIR", default_value = "cogmac-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Master seed; overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Population sweep such as `M=1..400`, `M=2..60:2` or `M=5,10,20`.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args, Clone)]
struct WithConfig {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct SimArgs {
    #[command(flatten)]
    inner: WithConfig,
    /// Number of simulated slots.
    #[arg(long)]
    slots: Option<u64>,
    /// Number of shards the slots are split into.
    #[arg(long)]
    shards: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// ALOHA throughput over a population sweep.
    AnalyzeAloha(WithConfig),
    /// Cell model: detection radius, collision probabilities and throughput.
    Cell(WithConfig),
    /// Optimal CSMA sensing policies, with detection errors when a detector block is present.
    Optimize(WithConfig),
    /// Monte Carlo simulation of the scenario.
    Simulate(SimArgs),
    /// Loss of the heuristic policy relative to the optimal one.
    Compare(WithConfig),
    /// Regenerate the data behind a figure (`list` shows the recipes, `all` runs every one).
    Figures {
        recipe: String,
        #[command(flatten)]
        common: Common,
    },
}

fn sink(c: &Common) -> Sink {
    Sink {
        dir: c.out.clone(),
        format: c.format,
    }
}

fn load(w: &WithConfig, slots: Option<u64>, shards: Option<usize>) -> Result<Loaded, CliError> {
    let ov = Overrides {
        seed: w.common.seed,
        slots,
        shards,
        ms: w.common.sweep.as_deref().map(parse_sweep).transpose()?,
    };
    let (scenario, text) = Scenario::load(&w.config, &ov)?;
    Ok(Loaded {
        scenario,
        path: w.config.clone(),
        sha256: sha256_hex(text.as_bytes()),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::AnalyzeAloha(w) => commands::analyze_aloha(&load(&w, None, None)?, &sink(&w.common)),
        Command::Cell(w) => commands::cell(&load(&w, None, None)?, &sink(&w.common)),
        Command::Optimize(w) => commands::optimize(&load(&w, None, None)?, &sink(&w.common)),
        Command::Compare(w) => commands::compare(&load(&w, None, None)?, &sink(&w.common)),
        Command::Simulate(s) => commands::simulate(&load(&s.inner, s.slots, s.shards)?, &sink(&s.inner.common)),
        Command::Figures { recipe, common } => {
            let ms = common.sweep.as_deref().map(parse_sweep).transpose()?;
            let seed = common.seed.unwrap_or(0);
            match recipe.as_str() {
                "list" => {
                    for r in RECIPES {
                        println!("{:<18} {}", r.name, r.about);
                    }
                    Ok(())
                }
                "all" => RECIPES
                    .iter()
                    .try_for_each(|r| figures::run(r, seed, ms.clone(), &sink(&common))),
                name => {
                    let r = figures::find(name).ok_or_else(|| {
                        CliError::Usage(format!("unknown recipe `{name}`; run `cogmac figures list`"))
                    })?;
                    figures::run(r, seed, ms, &sink(&common))
                }
            }
        }
    }
}

fn main() -> ExitCode {
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
