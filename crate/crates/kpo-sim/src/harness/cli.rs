//! Command-line entry point.
//!
//! One verb per operation family: `validate` checks a config, `run` executes a single
//! (config, method) job, `sweep` runs the config's `[sweep]` grid, `compare` runs
//! several methods on one config, `alpha` exports the amplitude trajectory, and
//! `emit` produces figure data tables.
//!
//! Exit codes: 0 success, 1 validation or config failure (including bad flags),
//! 2 solver failure, 3 partial sweep failure (some grid jobs failed; the report is
//! still written).

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

use super::config::{load_config, ConfigDoc};
use super::figures::{emit_figure, FigureId};
use super::runner::{execute, Method, SimulationResult};
use super::sweep::{run_sweep, ComparisonReport, SweepPlan};

#[derive(Debug, Parser)]
#[command(
    name = "kpo-sim",
    version,
    about = "Simulates quantum annealing on networks of Kerr parametric oscillators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Parse a config file and check every physical constraint
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one simulation method over the full schedule
    Run {
        #[arg(long)]
        config: PathBuf,
        /// spin, fock_master, or fock_trajectories
        #[arg(long)]
        method: Method,
        /// Write the result CSV here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's ensemble seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's trajectory count
        #[arg(long = "n-traj")]
        n_traj: Option<usize>,
    },
    /// Run the config's [sweep] grid and compare methods per point
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Write the comparison CSV here (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker-pool size (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-traj")]
        n_traj: Option<usize>,
    },
    /// Compare several methods on a single config
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Repeatable; defaults to spin and fock_master
        #[arg(long = "method")]
        methods: Vec<Method>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "n-traj")]
        n_traj: Option<usize>,
    },
    /// Export the per-KPO amplitude trajectory
    Alpha {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit one figure's data table: fig2, fig3, fig4, fig5, or alpha
    Emit {
        figure: FigureId,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

/// Exit code for an error, grouping config/validation problems apart from solver
/// failures.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::InvalidDimension(_)
        | Error::Truncation { .. } => 1,
        _ => 2,
    }
}

fn apply_overrides(doc: &mut ConfigDoc, seed: Option<u64>, n_traj: Option<usize>) {
    if let Some(seed) = seed {
        doc.spec.settings.seed = seed;
    }
    if let Some(n_traj) = n_traj {
        doc.spec.settings.n_traj = n_traj;
    }
}

fn run_summary(res: &SimulationResult) -> String {
    let mut s = format!(
        "method {}: most likely {}{}\n",
        res.method,
        res.most_likely,
        if res.tie { " (tie)" } else { "" }
    );
    for (label, p) in &res.outcome_probabilities {
        s.push_str(&format!("  p({label}) = {p:.6}\n"));
    }
    if let Some(leak) = res.metadata.mean_leakage {
        s.push_str(&format!("  readout-window leakage = {leak:.6}\n"));
    }
    if res.metadata.leakage_warning {
        s.push_str("  warning: leakage exceeds 0.2; cat-basis readout unreliable\n");
    }
    s
}

fn report_summary(report: &ComparisonReport) -> String {
    let mut s = String::new();
    let jobs = report.points.len() * report.methods.len();
    s.push_str(&format!(
        "{} grid points x {} methods, {} of {} jobs failed\n",
        report.points.len(),
        report.methods.len(),
        report.n_failed,
        jobs
    ));
    if report.methods.len() >= 2 {
        let agreed = report
            .points
            .iter()
            .filter(|p| p.agreement == Some(true))
            .count();
        let compared = report
            .points
            .iter()
            .filter(|p| p.agreement.is_some())
            .count();
        s.push_str(&format!(
            "methods agree on the most-likely state at {agreed} of {compared} compared points\n"
        ));
    }
    for tr in &report.transitions {
        let along = match tr.crossing {
            Some(x) => format!("crossing at {x}"),
            None if tr.from_label == tr.to_label => "no transition".to_string(),
            None => "transition not localized".to_string(),
        };
        let slice = if tr.slice_coords.is_empty() {
            String::new()
        } else {
            let coords: Vec<String> = tr.slice_coords.iter().map(|v| v.to_string()).collect();
            format!(" [slice {}]", coords.join(", "))
        };
        s.push_str(&format!(
            "{} along {}{}: {} -> {}, {}\n",
            tr.method, tr.axis_path, slice, tr.from_label, tr.to_label, along
        ));
    }
    s
}

fn write_or_print(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Validate { config } => {
            let doc = load_config(&config)?;
            let n = doc.spec.network.n_kpos();
            let schedule = &doc.spec.network.schedule;
            println!(
                "ok: {n} KPO(s), {} coupling(s), schedule {} us",
                doc.spec.network.couplings.len(),
                schedule.total_time()
            );
            if let Some(sweep) = &doc.sweep {
                let points: usize = sweep.axes.iter().map(|(_, v)| v.len()).product();
                println!(
                    "sweep: {} axis/axes, {points} grid points, {} method(s)",
                    sweep.axes.len(),
                    sweep.methods.len()
                );
            }
            Ok(0)
        }
        Cmd::Run {
            config,
            method,
            out,
            seed,
            n_traj,
        } => {
            let mut doc = load_config(&config)?;
            apply_overrides(&mut doc, seed, n_traj);
            let res = execute(&doc.spec, method)?;
            if let Some(path) = &out {
                std::fs::write(path, res.to_csv())?;
                println!("wrote {}", path.display());
            }
            print!("{}", run_summary(&res));
            Ok(0)
        }
        Cmd::Sweep {
            config,
            out,
            jobs,
            seed,
            n_traj,
        } => {
            let mut doc = load_config(&config)?;
            apply_overrides(&mut doc, seed, n_traj);
            let mut plan = SweepPlan::from_doc(&doc)?;
            plan.jobs = jobs;
            let report = run_sweep(&plan)?;
            write_or_print(&report.to_csv(), out.as_ref())?;
            eprint!("{}", report_summary(&report));
            Ok(if report.n_failed > 0 { 3 } else { 0 })
        }
        Cmd::Compare {
            config,
            methods,
            out,
            jobs,
            seed,
            n_traj,
        } => {
            let mut doc = load_config(&config)?;
            apply_overrides(&mut doc, seed, n_traj);
            let methods = if methods.is_empty() {
                vec![Method::Spin, Method::FockMaster]
            } else {
                methods
            };
            let mut plan = SweepPlan::comparison(&doc.spec, &methods);
            plan.jobs = jobs;
            let report = run_sweep(&plan)?;
            write_or_print(&report.to_csv(), out.as_ref())?;
            eprint!("{}", report_summary(&report));
            Ok(if report.n_failed > 0 { 3 } else { 0 })
        }
        Cmd::Alpha { config, out } => {
            let doc = load_config(&config)?;
            let table = emit_figure(&doc, FigureId::Alpha, None)?;
            write_or_print(&table.to_csv(), out.as_ref())?;
            Ok(0)
        }
        Cmd::Emit {
            figure,
            config,
            out,
            jobs,
        } => {
            let doc = load_config(&config)?;
            let table = emit_figure(&doc, figure, jobs)?;
            write_or_print(&table.to_csv(), out.as_ref())?;
            Ok(0)
        }
    }
}

/// Parses the process arguments, runs the selected operation, and returns the exit
/// code for `main` to pass to [`std::process::exit`].
pub fn cli_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
