use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cdss_core::config::{parse_case_list, parse_seed_list};
use cdss_core::metrics::RunSummary;
use cdss_core::{parse_scenario, run_campaign, run_simulation, Case, Error, RunSpec, ScenarioConfig};

#[derive(Parser)]
#[command(name = "cdss", version, about = "Coordinated TN/NTN spectrum sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Defaults to the reference scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override the epoch length in milliseconds.
    #[arg(long = "epoch-ms")]
    epoch_ms: Option<f64>,
    /// Output directory for per-run artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary table.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case with one seed.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        case: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run cases x seeds and aggregate.
    Campaign {
        #[command(flatten)]
        common: Common,
        /// Comma-separated case numbers.
        #[arg(long, default_value = "1,2,3,4")]
        case: String,
        /// Seed range `a..b` (inclusive) or comma list; defaults to the scenario's seeds.
        #[arg(long)]
        seeds: Option<String>,
        /// Run sequentially.
        #[arg(long)]
        serial: bool,
    },
    /// Parse and validate a scenario, then exit.
    Validate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Print the fully resolved scenario as TOML.
        #[arg(long)]
        print: bool,
    },
}

fn load_scenario(path: Option<&PathBuf>, epoch_ms: Option<f64>) -> Result<ScenarioConfig, Error> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut cfg = parse_scenario(&text).map_err(|e| match e {
        // An unreadable scenario is a configuration problem.
        Error::Io { path, source } => Error::Config {
            key: path.display().to_string(),
            reason: source.to_string(),
        },
        e => e,
    })?;
    if let Some(ms) = epoch_ms {
        cfg.sim.epoch_ms = ms;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn print_header() {
    println!(
        "{:<12} {:>5} {:>14} {:>8} {:>9} {:>6} {:>6} {:>8}",
        "case", "seed", "rx_bytes", "tn_share", "ntn_share", "on_ntn", "zero", "tn_min_s"
    );
}

fn print_row(s: &RunSummary) {
    println!(
        "{:<12} {:>5} {:>14} {:>8.3} {:>9.3} {:>6} {:>6} {:>8}",
        s.case_label,
        s.seed,
        s.total_rx_bytes,
        s.tn_share,
        s.ntn_share,
        s.ues_on_ntn,
        s.zero_throughput_ues,
        s.tn_min_reached_s.map_or("-".to_string(), |t| format!("{t:.2}")),
    )
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate { scenario, print } => {
            let cfg = load_scenario(scenario.as_ref(), None)?;
            if print {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            println!(
                "scenario ok: {} RBs in {} groups, {} seeds",
                cfg.band.total_rbs,
                cfg.band.num_groups,
                cfg.sim.seeds.len()
            );
        }
        Command::Run { common, case, seed } => {
            let cfg = load_scenario(common.scenario.as_ref(), common.epoch_ms)?;
            let case: Case = case.parse()?;
            let tn_min = cfg.cdss.tn_min;
            let store = run_simulation(&RunSpec::new(cfg, case, seed))?;
            if let Some(dir) = &common.out {
                store.write_outputs(dir, tn_min)?;
            }
            if !common.quiet {
                print_header();
                print_row(&store.summary(tn_min));
            }
        }
        Command::Campaign {
            common,
            case,
            seeds,
            serial,
        } => {
            let cfg = load_scenario(common.scenario.as_ref(), common.epoch_ms)?;
            let cases = parse_case_list(&case)?;
            let seeds = match seeds {
                Some(s) => parse_seed_list(&s)?,
                None => cfg.sim.seeds.clone(),
            };
            let result = run_campaign(&cfg, &cases, &seeds, !serial)?;
            if let Some(dir) = &common.out {
                result.write_outputs(dir, cfg.cdss.tn_min)?;
            }
            if !common.quiet {
                print_header();
                for r in &result.runs {
                    match &r.result {
                        Ok(m) => print_row(&m.summary(cfg.cdss.tn_min)),
                        Err(e) => println!("{:<12} {:>5} FAILED: {e}", r.case.label(), r.seed),
                    }
                }
                println!();
                println!(
                    "{:<12} {:>4} {:>16} {:>12} {:>8} {:>9} {:>6}",
                    "case", "runs", "rx_bytes_mean", "rx_ci95", "tn_share", "ntn_share", "zero"
                );
                for a in &result.aggregates {
                    println!(
                        "{:<12} {:>4} {:>16.0} {:>12.0} {:>8.3} {:>9.3} {:>6.3}",
                        a.case_label,
                        a.runs,
                        a.total_rx_bytes.mean,
                        a.total_rx_bytes.ci95,
                        a.tn_share.mean,
                        a.ntn_share.mean,
                        a.zero_throughput_fraction.mean
                    );
                }
            }
            let first_failure = result.failures().next().map(|f| {
                let reason = f.result.as_ref().err().map(ToString::to_string);
                format!("{} seed {} failed: {}", f.case, f.seed, reason.unwrap_or_default())
            });
            if let Some(msg) = first_failure {
                return Err(Error::Invariant(msg));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
