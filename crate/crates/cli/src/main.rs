use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use permtraffic::experiments::ExperimentConfig;
use permtraffic::sofic::SoficConfig;
use permtraffic::traffic::TrafficFixture;
use permtraffic::{build_string_assignment, Error, Guards, ModelFile};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "permtraffic", version, about = "Permutation models of graph products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Seed for all randomness; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Maximum number of vertex labelings per trace sum.
    #[arg(long, global = true)]
    guard_maps: Option<u128>,
    /// Maximum number of partition tuples per exhaustive search.
    #[arg(long, global = true)]
    guard_partitions: Option<u128>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a valid string assignment for a color graph; writes assignment.json.
    StringAssign { graph: PathBuf },
    /// Run the claim and exhaustive checks of a traffic fixture; writes report.json.
    TrafficCheck {
        fixture: PathBuf,
        #[arg(long = "n", short = 'n', default_value_t = 2)]
        n: usize,
    },
    /// Decay experiment; writes results.csv and summary.json.
    Converge { config: PathBuf },
    /// Certify a graph product representation; writes certificate.json and certificate.csv.
    SoficCertify { config: PathBuf },
}

enum Failure {
    Invariant(String),
    Input(String),
    Guard(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invariant(_) => 1,
            Failure::Input(_) => 2,
            Failure::Guard(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invariant(m) | Failure::Input(m) | Failure::Guard(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::GuardExceeded { .. } => Failure::Guard(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let path = dir.join(name);
    let mut s = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
    s.push('\n');
    fs::write(&path, s).map_err(|e| io_err(&path, e))
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<(), Failure> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

fn guards(c: &Common) -> Guards {
    let mut g = Guards::default();
    if let Some(m) = c.guard_maps {
        g.maps = m;
    }
    if let Some(p) = c.guard_partitions {
        g.partitions = p;
    }
    g
}

fn run(cli: Cli) -> Result<String, Failure> {
    let c = &cli.common;
    fs::create_dir_all(&c.out).map_err(|e| io_err(&c.out, e))?;
    let guards = guards(c);
    match &cli.command {
        Command::StringAssign { graph } => {
            let file: ModelFile =
                serde_json::from_str(&read(graph)?).map_err(|e| io_err(graph, e))?;
            let g = file.color_graph()?;
            let a = build_string_assignment(&g);
            write_json(&c.out, "assignment.json", &ModelFile::from_model(&g, Some(&a)))?;
            Ok(format!("ok {} strings", a.string_count()))
        }
        Command::TrafficCheck { fixture, n } => {
            let f = TrafficFixture::from_json(&read(fixture)?)?;
            let report = f.run_checks(*n, c.seed.unwrap_or(0), &guards)?;
            write_json(&c.out, "report.json", &report)?;
            match report.outcomes.iter().find(|o| !o.passed) {
                Some(o) => Err(Failure::Invariant(format!("FAIL {}: {}", o.check, o.detail))),
                None => Ok(format!("ok {} checks", report.outcomes.len())),
            }
        }
        Command::Converge { config } => {
            let mut cfg = ExperimentConfig::from_json(&read(config)?)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let result = cfg.run(&guards)?;
            write_csv(&c.out, "results.csv", &result.rows)?;
            write_json(&c.out, "summary.json", &result.summary)?;
            if result.summary.passed {
                Ok(format!("ok slope {:.4}", result.summary.slope.unwrap_or(f64::NAN)))
            } else {
                Err(Failure::Invariant(format!(
                    "FAIL decay: slope {:?} band {:?} monotone {}",
                    result.summary.slope, result.summary.slope_band, result.summary.monotone
                )))
            }
        }
        Command::SoficCertify { config } => {
            let mut cfg = SoficConfig::from_json(&read(config)?)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let cert = cfg.run(&guards)?;
            write_json(&c.out, "certificate.json", &cert)?;
            write_csv(&c.out, "certificate.csv", &cert.entries)?;
            if cert.max_deviation > cfg.threshold {
                Err(Failure::Invariant(format!(
                    "FAIL sofic-deviation: {} > {}",
                    cert.max_deviation, cfg.threshold
                )))
            } else {
                Ok(format!("ok max deviation {}", cert.max_deviation))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: workers: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.message().replace('\n', " "));
            ExitCode::from(f.code())
        }
    }
}
