//! Command-line front end: `build`, `dynamic` and `bench`.
//!
//! Exit codes: 0 on success, 1 on runtime or domain errors, 2 on usage or
//! parse errors. Output files are written to a temporary file in the target
//! directory and renamed into place, so a failed run leaves nothing behind.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::cost::{cost_tree, cost_unconstrained};
use crate::dynamic_tree::{DynamicConfig, DynamicTree, Request};
use crate::error::Error;
use crate::harness::experiments::{ledger_csv, run_experiment, ExperimentConfig, LedgerRow, TREE_KEY};
use crate::harness::fully_dynamic::cost_ratio;
use crate::model::Instance;
use crate::rng::RngHandle;
use crate::static_builder::build_tree_static;

#[derive(Debug, Parser)]
#[command(name = "tkm", version, about = "Explainable k-medians with randomized threshold trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a static threshold tree for an instance file.
    Build(BuildArgs),
    /// Replay a JSON Lines request stream through a dynamic tree.
    Dynamic(DynamicArgs),
    /// Run an experiment described by a JSON config.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Instance JSON: {"p", "d", "points", "centers"}.
    #[arg(long)]
    pub input: PathBuf,
    /// Norm exponent; defaults to the instance's own p.
    #[arg(long)]
    pub p: Option<f64>,
    /// Random seed.
    #[arg(long)]
    pub seed: u64,
    /// Output tree JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DynamicArgs {
    /// One request per line: {"op":"insert","coords":[..]} or {"op":"delete","id":n}.
    #[arg(long)]
    pub requests: PathBuf,
    /// Norm exponent.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Random seed.
    #[arg(long)]
    pub seed: u64,
    /// Per-request ledger CSV.
    #[arg(long)]
    pub ledger: PathBuf,
    /// Write the final tree JSON here (`null` when empty).
    #[arg(long)]
    pub final_tree: Option<PathBuf>,
    /// Centers must lie in [-bound, bound]^d.
    #[arg(long, default_value_t = 1.0)]
    pub bound: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV output path; the CSV goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for trials (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match run(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Build(a) => cmd_build(&a, out),
        Command::Dynamic(a) => cmd_dynamic(&a, out),
        Command::Bench(a) => cmd_bench(&a, out, err),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn say(out: &mut dyn Write, line: &str) -> CliResult<()> {
    writeln!(out, "{line}").map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn cmd_build(a: &BuildArgs, out: &mut dyn Write) -> CliResult<()> {
    let text = read(&a.input)?;
    let instance = Instance::from_json(&text)?;
    let p = a.p.unwrap_or(instance.p);
    let tree = build_tree_static(&instance.centers, p, &RngHandle::new(a.seed))?;
    let ct = cost_tree(&instance.points, &tree, &instance.centers, p)?;
    let cu = cost_unconstrained(&instance.points, &instance.centers, p)?;
    let (ratio, zero) = cost_ratio(ct, cu);
    write_atomic(&a.out, format!("{}\n", tree.to_json()).as_bytes())?;
    say(out, &format!("cost_tree = {ct}"))?;
    say(out, &format!("cost_unconstrained = {cu}"))?;
    say(out, &format!("ratio = {ratio}{}", if zero { " (zero-cost instance)" } else { "" }))
}

pub fn parse_requests(text: &str) -> CliResult<Vec<Request>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: Request =
            serde_json::from_str(line).map_err(|e| CliError::Usage(format!("line {}: {e}", i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

pub fn cmd_dynamic(a: &DynamicArgs, out: &mut dyn Write) -> CliResult<()> {
    let requests = parse_requests(&read(&a.requests)?)?;
    let mut tree: Option<DynamicTree> = None;
    let mut ledger = Vec::with_capacity(requests.len());
    for (i, req) in requests.iter().enumerate() {
        let fail = |e: Error| CliError::Runtime(format!("request {i}: {e}"));
        if tree.is_none() {
            let dim = match req {
                Request::Insert { coords } => coords.len(),
                Request::Delete { id } => return Err(fail(Error::UnknownCenter(*id))),
            };
            let config = DynamicConfig::boxed(a.p, dim, a.bound).map_err(fail)?;
            tree = Some(DynamicTree::new(config, RngHandle::new(a.seed).split(TREE_KEY)).map_err(fail)?);
        }
        let t = tree.as_mut().expect("created above");
        let start = Instant::now();
        let (_, stats) = t.process(req).map_err(fail)?;
        ledger.push(LedgerRow::new(i, req, &stats, start.elapsed().as_nanos() as u64));
    }
    let final_tree = tree.as_ref().and_then(DynamicTree::tree);
    write_atomic(&a.ledger, ledger_csv(&ledger)?.as_bytes())?;
    if let Some(path) = &a.final_tree {
        let json = final_tree.as_ref().map_or_else(|| "null".to_string(), |t| t.to_json());
        write_atomic(path, format!("{json}\n").as_bytes())?;
    }
    let total: usize = ledger.iter().map(|r| r.recourse).sum();
    say(out, &format!("requests = {}", ledger.len()))?;
    say(out, &format!("total_recourse = {total}"))?;
    say(out, &format!("final_centers = {}", tree.as_ref().map_or(0, DynamicTree::len)))
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = ExperimentConfig::from_json(&read(&a.config)?)?;
    let output = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(|| run_experiment(&cfg))?,
        None => run_experiment(&cfg)?,
    };
    match &a.out {
        Some(path) => {
            write_atomic(path, output.csv.as_bytes())?;
            for line in &output.summary {
                say(out, line)?;
            }
        }
        None => {
            write!(out, "{}", output.csv).map_err(|e| CliError::Runtime(e.to_string()))?;
            for line in &output.summary {
                say(err, line)?;
            }
        }
    }
    Ok(())
}
