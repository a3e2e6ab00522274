//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use crate::config::{bundled_names, Scenario, BUNDLED};
use crate::output::{write_all, OutputOptions};
use crate::simulator::{colregs_metrics, run, Outcome};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_FAULT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "streamguide", version, about = "Stream-function guidance simulator for marine vessels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario (bundled name or TOML file).
    Run {
        scenario: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// List the bundled scenarios.
    List,
    /// Parse and validate a scenario without simulating it.
    Validate { scenario: String },
    /// Run several scenarios in parallel, one output directory each.
    Batch {
        /// Scenarios to run; all bundled ones when omitted.
        scenarios: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
        /// Worker threads (default: available parallelism).
        #[arg(long, short)]
        jobs: Option<usize>,
    },
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
    /// Write SVG plots per planning step plus a summary plot.
    #[arg(long)]
    pub plots: bool,
    /// Dump the stream function per planning step as TSV.
    #[arg(long)]
    pub field: bool,
}

impl OutputArgs {
    fn options(&self) -> OutputOptions {
        OutputOptions {
            plots: self.plots,
            field: self.field,
        }
    }
}

pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    ExitCode::from(execute(&cli))
}

pub fn execute(cli: &Cli) -> u8 {
    match &cli.command {
        Command::List => {
            list(&mut std::io::stdout().lock());
            EXIT_OK
        }
        Command::Validate { scenario } => match Scenario::resolve(scenario) {
            Ok(sc) => {
                println!(
                    "{}: ok ({} obstacles, target ({:.2}, {:.2}))",
                    sc.name,
                    sc.workspace.obstacles.len(),
                    sc.workspace.target.x,
                    sc.workspace.target.y
                );
                for s in &sc.snaps {
                    println!(
                        "  snapped {} ({:.2}, {:.2}) -> ({:.2}, {:.2})",
                        s.what, s.from[0], s.from[1], s.to[0], s.to[1]
                    );
                }
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Command::Run { scenario, out } => {
            let sc = match Scenario::resolve(scenario) {
                Ok(sc) => sc,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG;
                }
            };
            run_one(&sc, &out.out, out.options())
        }
        Command::Batch { scenarios, out, jobs } => {
            let names: Vec<String> = if scenarios.is_empty() {
                bundled_names().map(String::from).collect()
            } else {
                scenarios.clone()
            };
            // every scenario must load before anything runs
            let mut loaded = Vec::new();
            for n in &names {
                match Scenario::resolve(n) {
                    Ok(sc) => loaded.push(sc),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_CONFIG;
                    }
                }
            }
            batch(&loaded, &out.out, out.options(), jobs.unwrap_or_else(default_jobs))
        }
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn list<W: Write>(out: &mut W) {
    for (name, text) in BUNDLED {
        let sc = Scenario::parse(text, name).expect("bundled scenario is valid");
        let _ = writeln!(out, "{name}\t{} obstacles\t{}", sc.workspace.obstacles.len(), sc.description);
    }
}

/// Simulate and write artifacts; the exit status reflects the outcome.
pub fn run_one(sc: &Scenario, dir: &Path, opts: OutputOptions) -> u8 {
    info!("running {}", sc.name);
    let trace = run(sc);
    if let Err(e) = write_all(sc, &trace, dir, opts) {
        eprintln!("error: writing {}: {e}", dir.display());
        return EXIT_FAULT;
    }
    let s = &trace.summary;
    match &s.outcome {
        Outcome::Reached => println!(
            "{}: reached in {:.2} s, path {:.2} m, min clearance {}",
            sc.name,
            s.arrival_time.unwrap_or(s.final_time),
            s.path_length,
            clearance_text(&s.min_clearance, &trace.obstacle_radii)
        ),
        Outcome::Timeout => println!("{}: timeout at {:.2} s, {:.3} m from target", sc.name, s.final_time, s.final_distance),
        Outcome::Fault(why) => println!("{}: fault at {:.2} s: {why}", sc.name, s.final_time),
    }
    for e in colregs_metrics(&trace) {
        info!(
            "obstacle {} {:?}: passed on {:?} at {:.2} m",
            e.obstacle, e.encounter, e.side, e.min_clearance
        );
    }
    match s.outcome {
        Outcome::Reached => EXIT_OK,
        _ => EXIT_FAULT,
    }
}

fn clearance_text(clear: &[f64], radii: &[f64]) -> String {
    if clear.is_empty() {
        return "n/a".into();
    }
    let (c, r) = clear
        .iter()
        .zip(radii)
        .min_by(|a, b| (a.0 / a.1).total_cmp(&(b.0 / b.1)))
        .expect("non-empty");
    format!("{c:.2} m ({:.2} r)", c / r)
}

/// Worst exit status across the batch.
pub fn batch(scenarios: &[Scenario], root: &Path, opts: OutputOptions, jobs: usize) -> u8 {
    let next = AtomicUsize::new(0);
    let worst = Mutex::new(EXIT_OK);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, scenarios.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(sc) = scenarios.get(i) else { break };
                let code = run_one(sc, &root.join(&sc.name), opts);
                if code != EXIT_OK {
                    error!("{} finished with status {code}", sc.name);
                }
                let mut w = worst.lock().expect("status lock");
                *w = (*w).max(code);
            });
        }
    });
    worst.into_inner().expect("status lock")
}
