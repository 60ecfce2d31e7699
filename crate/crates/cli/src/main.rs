use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chainsim::controller::{Controller, ExactError, ExactLimits, Plan};
use chainsim::kernel::{run, RunOptions, SimError};
use chainsim::report::{read_qoe_series, write_report, SUMMARY_FILE};
use chainsim::scenario::{parse_scenario, Diagnostic, Scenario};
use chainsim::service::path_metrics;
use chainsim::Fixed;

/// Unusable input: bad scenario, unreadable files, oversized oracle instance.
const EXIT_INPUT: u8 = 1;
/// An internal invariant broke during the run.
const EXIT_INTERNAL: u8 = 2;

#[derive(Parser)]
#[command(name = "chainsim", version, about = "QoE-driven service chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write summary.json, qoe_series.csv and db_dump.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override meta.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override policy.predictor_alpha.
        #[arg(long)]
        alpha: Option<f64>,
        /// Check all invariants after every event.
        #[arg(long)]
        strict_debug: bool,
        #[arg(long, hide = true)]
        inject_ledger_fault: bool,
    },
    /// Check a scenario file and print OK or every problem found.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Compare greedy and exhaustive embedding for each request on the idle network.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = ExactLimits::default().max_hosts)]
        max_hosts: usize,
        #[arg(long, default_value_t = ExactLimits::default().max_chain)]
        max_chain: usize,
        #[arg(long, default_value_t = ExactLimits::default().max_paths)]
        max_paths: usize,
    },
    /// Summarise the output directory of a previous run.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Print the QoE series of one flow.
        #[arg(long)]
        flow: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            alpha,
            strict_debug,
            inject_ledger_fault,
        } => {
            let mut options = RunOptions { strict_debug, ..RunOptions::default() };
            if inject_ledger_fault && !options.request_ledger_fault() {
                eprintln!("ERROR --inject-ledger-fault: not available in this build");
                return ExitCode::from(EXIT_INPUT);
            }
            cmd_run(&scenario, &out, seed, alpha, &options)
        }
        Command::Validate { scenario } => load(&scenario).map(|_| println!("OK")),
        Command::Oracle { scenario, max_hosts, max_chain, max_paths } => {
            cmd_oracle(&scenario, &ExactLimits { max_hosts, max_chain, max_paths })
        }
        Command::Report { out, flow } => cmd_report(&out, flow),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn print_diagnostics(diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{d}");
    }
}

fn load(path: &Path) -> Result<Scenario, u8> {
    let bytes = fs::read(path).map_err(|e| {
        eprintln!("ERROR {}: IoFailure: {e}", path.display());
        EXIT_INPUT
    })?;
    parse_scenario(&bytes).map_err(|d| {
        print_diagnostics(&d);
        EXIT_INPUT
    })
}

fn cmd_run(path: &Path, out: &Path, seed: Option<u64>, alpha: Option<f64>, options: &RunOptions) -> Result<(), u8> {
    let mut scenario = load(path)?;
    if let Some(s) = seed {
        scenario.meta.seed = s;
    }
    if let Some(a) = alpha {
        scenario.policy.predictor_alpha = a;
    }
    let report = run(&scenario, options).map_err(|e| match e {
        SimError::ScenarioInvalid(d) => {
            print_diagnostics(&d);
            EXIT_INPUT
        }
        other => {
            eprintln!("ERROR run: {other}");
            EXIT_INTERNAL
        }
    })?;
    let written = write_report(&report, out).map_err(|e| {
        eprintln!("ERROR output: {e}");
        EXIT_INPUT
    })?;
    let c = report.summary.counters;
    println!(
        "{}: {} requests, {} admitted, {} rejected, {} rerouted, {} migrated, {} degraded, {} failed, {} completed",
        report.summary.scenario,
        report.summary.requests,
        c.admitted,
        c.rejected(),
        c.rerouted,
        c.migrated,
        c.degraded,
        c.failed,
        c.completed
    );
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn latency(c: &Controller, vnfs: &[String], plan: &Plan) -> Fixed {
    let types = c.catalog().resolve(vnfs).expect("validated scenario");
    path_metrics(&plan.graph.segments, &types, c.net()).expect("plans use existing links").latency
}

fn cmd_oracle(path: &Path, limits: &ExactLimits) -> Result<(), u8> {
    let scenario = load(path)?;
    let controller = Controller::new(
        scenario.network_state(),
        scenario.vnf_catalog(),
        scenario.profiles.app_profiles.iter().cloned(),
        scenario.ela(),
        scenario.policy,
    );
    println!(
        "{:>8}  {:>8}  {:>8}  {:>10}  {:>10}  {:>8}",
        "request", "greedy", "exact", "greedy_ms", "exact_ms", "gap_ms"
    );
    let mut contained = true;
    for r in scenario.requests() {
        let greedy = controller.plan(&r).expect("validated scenario");
        let exact = match controller.exact(&r, limits).expect("validated scenario") {
            Err(ExactError::InstanceTooLarge(msg)) => {
                eprintln!("ERROR oracle: request {}: {msg}", r.id);
                return Err(EXIT_INPUT);
            }
            other => other,
        };
        let g = greedy.as_ref().ok().map(|p| latency(&controller, &r.vnfs, p));
        let e = exact.as_ref().ok().map(|p| latency(&controller, &r.vnfs, p));
        let show = |v: Option<Fixed>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        let gap = match (g, e) {
            (Some(g), Some(e)) => {
                contained &= e <= g;
                (g - e).to_string()
            }
            (Some(_), None) => {
                contained = false;
                "-".into()
            }
            _ => "-".into(),
        };
        let verdict = |admit: bool| if admit { "admit" } else { "reject" };
        println!(
            "{:>8}  {:>8}  {:>8}  {:>10}  {:>10}  {:>8}",
            r.id,
            verdict(g.is_some()),
            verdict(e.is_some()),
            show(g),
            show(e),
            gap
        );
    }
    if contained {
        Ok(())
    } else {
        eprintln!("ERROR oracle: greedy beat the exhaustive search");
        Err(EXIT_INTERNAL)
    }
}

fn cmd_report(out: &Path, flow: Option<u64>) -> Result<(), u8> {
    let rows = read_qoe_series(out, flow).map_err(|e| {
        eprintln!("ERROR report: {e}");
        EXIT_INPUT
    })?;
    if let Some(id) = flow {
        if rows.is_empty() {
            eprintln!("ERROR report: no samples for flow {id}");
            return Err(EXIT_INPUT);
        }
        println!("{:>8}  {:>8}  {:>6}  {:>7}  {:>6}  {:>7}", "time_ms", "mos", "q_bw", "q_delay", "q_loss", "q_stall");
        for r in &rows {
            println!(
                "{:>8}  {:>8.4}  {:>6.3}  {:>7.3}  {:>6.3}  {:>7.3}",
                r.time_ms, r.mos, r.q_bw, r.q_delay, r.q_loss, r.q_stall
            );
        }
        return Ok(());
    }

    let summary_path = out.join(SUMMARY_FILE);
    let summary: serde_json::Value = fs::read_to_string(&summary_path)
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .ok_or_else(|| {
            eprintln!("ERROR report: cannot read {}", summary_path.display());
            EXIT_INPUT
        })?;
    if let Some(counters) = summary["counters"].as_object() {
        for (k, v) in counters {
            println!("{k:>18}: {v}");
        }
    }
    let mut per_flow: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in rows {
        per_flow.entry(r.flow_id).or_default().push(r.mos);
    }
    println!();
    println!("{:>8}  {:>8}  {:>8}  {:>8}", "flow", "windows", "mean_mos", "min_mos");
    for (id, m) in per_flow {
        let mean = m.iter().sum::<f64>() / m.len() as f64;
        let min = m.iter().copied().fold(f64::INFINITY, f64::min);
        println!("{id:>8}  {:>8}  {mean:>8.4}  {min:>8.4}", m.len());
    }
    Ok(())
}
