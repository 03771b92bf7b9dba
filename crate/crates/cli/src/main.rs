//! `msmaxmin`: run the lookahead allocation engine on instance files,
//! generate instances, sweep ratio experiments, and verify the engine
//! against its brute-force oracles.
//!
//! Exit codes: 0 success, 1 usage error, 2 file or validation error,
//! 3 oracle violation.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Value as Json, json};

use msmaxmin_core::engine::{Branch, EngineConfig, RunTrace, compute_c0, run};
use msmaxmin_core::gen::{GeneratorParams, gen_adversarial_flipflop, gen_random};
use msmaxmin_core::jsonl::{load_horizon, save_horizon};
use msmaxmin_core::model::Horizon;
use msmaxmin_core::ratio::Rho;
use msmaxmin_core::solvers::solver_by_name;
use msmaxmin_core::sweep::{SweepConfig, run_sweep};
use msmaxmin_core::verify::{VerifyScale, verify_all};

#[derive(Parser)]
#[command(
    name = "msmaxmin",
    version,
    about = "Multistage online maxmin allocation with lookahead"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Random,
    Flipflop,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the engine on an instance file; emit allocations and trace.
    Run {
        /// Instance file in the line format produced by `gen`.
        file: PathBuf,
        #[arg(short = 'w', long = "lookahead", default_value_t = 1)]
        lookahead: u32,
        /// Single-shot solver: exact or greedy.
        #[arg(long, default_value = "exact")]
        solver: String,
        /// Assumed approximation factor (decimal or fraction). Defaults to
        /// the solver's declared factor; required for the greedy solver.
        #[arg(long)]
        rho: Option<String>,
        /// Output path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Generate an instance file.
    Gen {
        #[arg(short = 'n', long, default_value_t = 3)]
        players: u32,
        #[arg(short = 'm', long, default_value_t = 4)]
        entities: u32,
        #[arg(long, default_value_t = 8)]
        tau: u32,
        #[arg(long, default_value_t = 1)]
        delta: u64,
        #[arg(long = "value-max", default_value_t = 9)]
        value_max: u64,
        /// Probability an entity is allowed at a player per step.
        #[arg(long, default_value_t = 0.6)]
        density: f64,
        /// Probability an entity's allowed set is re-rolled between steps.
        #[arg(long, default_value_t = 0.3)]
        churn: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Family::Random)]
        family: Family,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle verification suite; exits 3 on any violation.
    Verify {
        /// Base trial count; individual checks scale from it.
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Ratio experiments over a seed x delta x lookahead grid.
    Sweep {
        #[arg(short = 'n', long, default_value_t = 2)]
        players: u32,
        #[arg(short = 'm', long, default_value_t = 3)]
        entities: u32,
        #[arg(long, default_value_t = 8)]
        tau: u32,
        #[arg(long, default_value_t = 0.6)]
        density: f64,
        #[arg(long, default_value_t = 0.3)]
        churn: f64,
        #[arg(long = "value-max", default_value_t = 6)]
        value_max: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: u32,
        /// Stability rewards to sweep, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "0,1,5")]
        delta: Vec<u64>,
        /// Lookaheads to sweep, comma-separated.
        #[arg(short = 'w', long = "lookahead", value_delimiter = ',', default_value = "1,2")]
        lookahead: Vec<u32>,
        #[arg(long, default_value = "exact")]
        solver: String,
        #[arg(long)]
        rho: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Print the threshold weight and guaranteed competitive ratio.
    C0 {
        #[arg(long)]
        rho: String,
        #[arg(short = 'w', long = "lookahead", default_value_t = 1)]
        lookahead: u32,
    },
}

enum Failure {
    Usage(String),
    Validation(String),
    OracleViolation,
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::OracleViolation => 3,
        }
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are success, not usage errors.
            let benign = matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if benign { 0 } else { 1 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(msg) | Failure::Validation(msg) => eprintln!("error: {msg}"),
                Failure::OracleViolation => {}
            }
            f.code()
        }
    }
}

fn parse_rho(
    rho: &Option<String>,
    solver_name: &str,
) -> Result<Rho, Failure> {
    let declared = solver_by_name(solver_name)
        .map_err(|e| Failure::Usage(e.to_string()))?
        .declared_rho();
    match rho {
        Some(s) => Rho::parse(s).map_err(|e| Failure::Usage(e.to_string())),
        None => declared.ok_or_else(|| {
            Failure::Usage(format!(
                "solver {solver_name:?} declares no approximation factor; pass --rho"
            ))
        }),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| Failure::Validation(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::C0 { rho, lookahead } => {
            let rho = Rho::parse(&rho).map_err(|e| Failure::Usage(e.to_string()))?;
            let c0 = compute_c0(rho, lookahead).map_err(|e| Failure::Usage(e.to_string()))?;
            println!("c0 = {:.7}", c0.as_f64());
            println!("ratio = {:.7}", c0.competitive_ratio_f64());
            Ok(())
        }
        Command::Gen {
            players,
            entities,
            tau,
            delta,
            value_max,
            density,
            churn,
            seed,
            family,
            out,
        } => {
            let horizon = match family {
                Family::Random => gen_random(&GeneratorParams {
                    players,
                    entities,
                    tau,
                    lookahead: 1,
                    delta,
                    value_max,
                    availability_density: density,
                    churn,
                    seed,
                }),
                Family::Flipflop => gen_adversarial_flipflop(players, entities, tau, delta),
            }
            .map_err(|e| Failure::Usage(e.to_string()))?;
            emit(&out, &save_horizon(&horizon))
        }
        Command::Run {
            file,
            lookahead,
            solver,
            rho,
            out,
            format,
        } => {
            let text = std::fs::read_to_string(&file).map_err(|e| {
                Failure::Validation(format!("cannot read {}: {e}", file.display()))
            })?;
            let horizon =
                load_horizon(&text).map_err(|e| Failure::Validation(e.to_string()))?;
            let rho = parse_rho(&rho, &solver)?;
            let solver =
                solver_by_name(&solver).map_err(|e| Failure::Usage(e.to_string()))?;
            let config = EngineConfig::new(lookahead, horizon.delta(), rho)
                .map(EngineConfig::without_snapshots)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let trace = run(&horizon, solver.as_ref(), &config)
                .map_err(|e| Failure::Validation(e.to_string()))?;
            let content = match format {
                Format::Json => {
                    let mut s = trace_json(&trace, &horizon).to_string();
                    s.push('\n');
                    s
                }
                Format::Csv => trace_csv(&trace, &horizon),
            };
            emit(&out, &content)
        }
        Command::Verify { trials, seed } => {
            let scale = VerifyScale::from_trials(trials);
            let reports = verify_all(&scale, seed);
            let mut violated = false;
            for report in &reports {
                println!("{}", report.status_line());
                if !report.passed() {
                    violated = true;
                    for failure in &report.failures {
                        eprintln!("--- {} ---", report.name);
                        eprintln!("{failure}");
                    }
                }
            }
            if violated {
                Err(Failure::OracleViolation)
            } else {
                Ok(())
            }
        }
        Command::Sweep {
            players,
            entities,
            tau,
            density,
            churn,
            value_max,
            seed,
            trials,
            delta,
            lookahead,
            solver,
            rho,
            out,
            format,
        } => {
            let rho = parse_rho(&rho, &solver)?;
            let config = SweepConfig {
                base: GeneratorParams {
                    players,
                    entities,
                    tau,
                    lookahead: 1,
                    delta: 0,
                    value_max,
                    availability_density: density,
                    churn,
                    seed,
                },
                trials,
                lookaheads: lookahead,
                deltas: delta,
                solver,
                rho,
            };
            let report = run_sweep(&config).map_err(|e| Failure::Validation(e.to_string()))?;
            let content = match format {
                Format::Csv => report.to_csv(),
                Format::Json => {
                    let mut s = report.to_json().to_string();
                    s.push('\n');
                    s
                }
            };
            emit(&out, &content)
        }
    }
}

fn trace_json(trace: &RunTrace, horizon: &Horizon) -> Json {
    let allocations: Vec<Json> = trace
        .allocations
        .iter()
        .map(|a| {
            let mut assign = serde_json::Map::new();
            for (e, p) in a.iter() {
                assign.insert(
                    horizon.entity_names()[e.0 as usize].clone(),
                    Json::String(horizon.player_names()[p.0 as usize].clone()),
                );
            }
            json!({ "t": a.t(), "assign": assign })
        })
        .collect();
    let periods: Vec<Json> = trace
        .periods
        .iter()
        .map(|p| {
            json!({
                "start": p.start,
                "end": p.end,
                "left_reward": p.left_reward,
                "right_reward": p.right_reward,
                "stable_reward": p.stable_reward,
                "approx_value": p.approx_value,
                "chosen": match p.chosen {
                    Branch::Stable => "stable",
                    Branch::Approx => "approx",
                },
            })
        })
        .collect();
    json!({
        "config": {
            "lookahead": trace.lookahead,
            "delta": trace.delta,
            "rho": trace.rho.to_string(),
            "solver": trace.solver_name,
        },
        "allocations": allocations,
        "periods": periods,
        "summary": {
            "tau": trace.tau,
            "nu": trace.nu_total,
            "lambda_interval": trace.lambda_interval_total,
            "lambda_pairwise": trace.lambda_pairwise_total,
            "total_interval": trace.total_interval(),
            "total_pairwise": trace.total_pairwise(),
            "periods": trace.periods.len(),
            "solver_calls": trace.solver_calls,
        },
    })
}

fn trace_csv(trace: &RunTrace, horizon: &Horizon) -> String {
    let mut out = String::from("t,entity,player,value\n");
    for a in &trace.allocations {
        let inst = horizon.instance(a.t());
        for (e, p) in a.iter() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                a.t(),
                horizon.entity_names()[e.0 as usize],
                horizon.player_names()[p.0 as usize],
                inst.value(e, p)
            );
        }
    }
    out
}
