use std::path::PathBuf;
use std::process::ExitCode;

use bulkroute::generate::{generate, Kind, Params};
use bulkroute::harness::{experiment, oracle_values, run_online, RunConfig, SsAlg};
use bulkroute::instance::{Instance, Mode};
use bulkroute::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bulkroute", version, about = "Online multicommodity buy-at-bulk routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the online algorithm on an instance.
    Run {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        h: Option<usize>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        dmax: Option<f64>,
        #[arg(long, default_value = "greedy")]
        ss_alg: SsAlg,
        /// Compare against the offline optimum.
        #[arg(long)]
        oracle: bool,
        /// Per-arrival CSV; stdout when absent.
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the offline optimum, junction optimum and LP lower bound.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Write a generated instance.
    Generate {
        #[arg(long)]
        kind: Kind,
        #[arg(long, default_value = "")]
        params: Params,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run a suite of instances and write one CSV row per run.
    Experiment {
        #[arg(long)]
        suite: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::BudgetExceeded { .. } => ExitCode::from(3),
                Error::InvalidInput(_) | Error::Infeasible(_) | Error::Unreachable { .. } | Error::Json(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn execute(command: Command) -> bulkroute::Result<()> {
    match command {
        Command::Run { instance, mode, seed, h, kappa, dmax, ss_alg, oracle, rows, report } => {
            let inst = Instance::load(&instance)?;
            let config = RunConfig {
                mode,
                h,
                kappa,
                delta_max: dmax,
                seed,
                ss_alg,
                oracle,
                rows_out: rows.clone(),
                report_out: report.clone(),
            };
            let rep = run_online(&inst, &config)?;
            let csv = rep.rows_csv()?;
            match &rows {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            if let Some(path) = &report {
                std::fs::write(path, serde_json::to_string_pretty(&rep)? + "\n")?;
            }
            let t = &rep.totals;
            eprintln!(
                "total={} buy={} length={} penalty={} fallback={} dropped={} unserved={} epochs={}",
                t.total, t.buy, t.length, t.penalty, t.fallback_count, t.dropped_count, t.unserved_count, t.epochs
            );
            if let Some(o) = &rep.oracle {
                eprintln!("opt={} junction_opt={} lp_lb={} ratio={}", show(o.opt), show(o.junction_opt), show(o.lp_lb), show(rep.ratio));
            }
        }
        Command::Oracle { instance, mode } => {
            let inst = Instance::load(&instance)?;
            let routing = inst.routing(inst.resolve_mode(mode))?;
            let o = oracle_values(&routing.graph, &routing.pairs, routing.penalties.as_deref(), &routing.trivial)?;
            println!("opt={} junction_opt={} lp_lb={}", show(o.opt), show(o.junction_opt), show(o.lp_lb));
        }
        Command::Generate { kind, params, seed, out } => {
            generate(kind, &params, seed)?.save(&out)?;
        }
        Command::Experiment { suite, out } => {
            let (csv, summary) = experiment(&suite)?;
            std::fs::write(&out, csv)?;
            println!("{summary}");
        }
    }
    Ok(())
}
