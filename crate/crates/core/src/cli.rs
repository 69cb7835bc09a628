//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on domain failures (diagnostics, bad
//! configs, malformed traces), 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsl::{compile_assemblage, parse_assemblage_bytes, render_assemblage, AssemblageAst};
use crate::fsm::{validate_fsm, Finding};
use crate::plot::{forcefield_svg, trajectory_svg, ForcefieldSnapshot};
use crate::world::{
    compute_metrics, init_world, read_trace, run_simulation, write_trace, Metrics, ScenarioConfig,
};

#[derive(Debug, Parser)]
#[command(name = "schemasim", version, about = "Behavioral assemblages and motor-schema simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Emit {
    /// `<from> <releaser> <to>` rows in firing-priority order.
    Table,
    /// The machine re-rendered in assemblage notation.
    CanonicalText,
    /// Graphviz DOT.
    Diagram,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlotKind {
    Trajectory,
    Forcefield,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, validate and convert an assemblage source file.
    Compile {
        source: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        emit: Emit,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario and write trace.jsonl, metrics.json and manifest.json.
    #[command(group = clap::ArgGroup::new("seeding").required(true))]
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, group = "seeding")]
        seed: Option<u64>,
        /// Seed range `a..b` (exclusive) or `a..=b` (inclusive), run in
        /// parallel into `<out>/seed-<n>/`.
        #[arg(long, group = "seeding", value_parser = parse_seed_range)]
        seeds: Option<Range<u64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a trajectory (from a trace) or a force field (from a snapshot) as SVG.
    Plot {
        #[arg(value_enum)]
        kind: PlotKind,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Force-field cells along the longer side of the window.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Recompute metrics from a trace.
    Metrics {
        trace: PathBuf,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_seed_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err(format!("expected `a..b` or `a..=b`, got `{s}`"));
    };
    let a: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
    let end = if inclusive { b.checked_add(1).ok_or("range end overflows")? } else { b };
    if a >= end {
        return Err(format!("empty seed range `{s}`"));
    }
    Ok(a..end)
}

/// A failure reported to the user with exit status 1.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Entry point shared by the binary and tests; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Compile { source, emit, out } => cmd_compile(&source, emit, out.as_deref()),
        Command::Run { config, seed, seeds, out } => match (seed, seeds) {
            (Some(seed), _) => cmd_run(&config, seed, &out).map(|m| println!("{}", m.summary)),
            (None, Some(range)) => cmd_run_batch(&config, range, &out),
            (None, None) => unreachable!("clap enforces one seeding flag"),
        },
        Command::Plot { kind, input, out, grid } => cmd_plot(kind, &input, &out, grid),
        Command::Metrics { trace, out } => cmd_metrics(&trace, out.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(Failure(msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            1
        }
    }
}

fn emit_output(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn finding_location(ast: &AssemblageAst, finding: &Finding) -> (usize, usize) {
    let span = match finding {
        Finding::Unreachable(label) => ast
            .state_defs
            .iter()
            .find(|d| d.name.name == *label)
            .map(|d| d.name.span),
        _ => None,
    };
    span.map_or((ast.process_name.span.line, ast.process_name.span.column), |s| (s.line, s.column))
}

fn cmd_compile(source: &Path, emit: Emit, out: Option<&Path>) -> CmdResult {
    let name = source.display().to_string();
    let bytes = fs::read(source).map_err(|e| Failure(format!("{name}: {e}")))?;
    let report = |diags: Vec<crate::dsl::Diagnostic>| {
        for d in &diags {
            eprintln!("{}", d.render(&name));
        }
        Failure(String::new())
    };
    let ast = parse_assemblage_bytes(&bytes).map_err(report)?;
    let fsm = compile_assemblage(&ast).map_err(report)?;
    let findings = validate_fsm(&fsm).findings;
    if !findings.is_empty() {
        for f in &findings {
            let (line, col) = finding_location(&ast, f);
            eprintln!("{name}:{line}:{col}: {f}");
        }
        return Err(Failure(String::new()));
    }
    let text = match emit {
        Emit::Table => fsm.to_table(),
        Emit::CanonicalText => render_assemblage(&fsm)?,
        Emit::Diagram => fsm.to_dot(),
    };
    emit_output(out, &text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub seed: u64,
    pub output_dir: String,
    /// Seconds since the Unix epoch when the manifest was written.
    pub created_unix: u64,
    pub artifacts: Vec<Artifact>,
}

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub metrics: Metrics,
    pub summary: String,
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<Artifact, Failure> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    Ok(Artifact { name: name.into(), sha256: hex::encode(Sha256::digest(bytes)), bytes: bytes.len() as u64 })
}

pub fn metrics_json(m: &Metrics) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("metrics serialize");
    s.push('\n');
    s
}

fn summary(kind: &str, seed: u64, m: &Metrics) -> String {
    match m {
        Metrics::Foraging { ticks, completion_tick, delivered, total_attractors, .. } => {
            let n: u32 = delivered.values().sum();
            let done = completion_tick.map_or("none".to_string(), |t| t.to_string());
            format!("{kind} seed={seed} ticks={ticks} delivered={n}/{total_attractors} completion_tick={done}")
        }
        Metrics::Soccer { ticks, goals, .. } => {
            let g = |t| goals.get(&t).copied().unwrap_or(0);
            format!(
                "{kind} seed={seed} ticks={ticks} goals red={} blue={}",
                g(crate::arena::Team::Red),
                g(crate::arena::Team::Blue)
            )
        }
    }
}

fn cmd_run(config_path: &Path, seed: u64, out: &Path) -> Result<RunOutcome, Failure> {
    let config = ScenarioConfig::load(config_path)?;
    // Surface placement failures before anything is written.
    init_world(&config, seed)?;
    let result = run_simulation(&config, seed)?;
    fs::create_dir_all(out).map_err(|e| Failure(format!("{}: {e}", out.display())))?;

    let mut trace = Vec::new();
    write_trace(&result.trace, &mut trace)?;
    let artifacts = vec![
        write_artifact(out, "trace.jsonl", &trace)?,
        write_artifact(out, "metrics.json", metrics_json(&result.metrics).as_bytes())?,
    ];
    let manifest = RunManifest {
        config: config_path.display().to_string(),
        seed,
        output_dir: out.display().to_string(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        artifacts,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out.join("manifest.json"), text)?;
    let kind = serde_json::to_value(config.kind)?.as_str().unwrap_or("?").to_string();
    Ok(RunOutcome { summary: summary(&kind, seed, &result.metrics), manifest, metrics: result.metrics })
}

#[derive(Serialize)]
struct BatchEntry {
    seed: u64,
    metrics: Metrics,
}

fn cmd_run_batch(config_path: &Path, seeds: Range<u64>, out: &Path) -> CmdResult {
    let config = ScenarioConfig::load(config_path)?;
    for seed in seeds.clone() {
        init_world(&config, seed)?;
    }
    let outcomes: Vec<Result<RunOutcome, Failure>> = seeds
        .clone()
        .into_par_iter()
        .map(|seed| cmd_run(config_path, seed, &out.join(format!("seed-{seed}"))))
        .collect();
    let mut entries = Vec::new();
    for (seed, outcome) in seeds.zip(outcomes) {
        let outcome = outcome.map_err(|Failure(m)| Failure(format!("seed {seed}: {m}")))?;
        println!("{}", outcome.summary);
        entries.push(BatchEntry { seed, metrics: outcome.metrics });
    }
    let mut text = serde_json::to_string_pretty(&entries)?;
    text.push('\n');
    fs::write(out.join("batch.json"), text)?;
    Ok(())
}

fn cmd_plot(kind: PlotKind, input: &Path, out: &Path, grid: Option<usize>) -> CmdResult {
    let svg = match kind {
        PlotKind::Trajectory => {
            let file = fs::File::open(input).map_err(|e| Failure(format!("{}: {e}", input.display())))?;
            let is_empty = file.metadata()?.len() == 0;
            let trace = if is_empty { Vec::new() } else { read_trace(BufReader::new(file))? };
            trajectory_svg(&trace, crate::schemas::SchemaParams::default().bin_radius)
        }
        PlotKind::Forcefield => {
            let snapshot = ForcefieldSnapshot::load(input)?;
            if grid == Some(0) {
                return Err(Failure("--grid must be at least 1".into()));
            }
            let field = snapshot.evaluate(grid)?;
            forcefield_svg(&snapshot, &field)
        }
    };
    fs::write(out, svg).map_err(|e| Failure(format!("{}: {e}", out.display())))?;
    Ok(())
}

fn cmd_metrics(trace_path: &Path, out: Option<&Path>) -> CmdResult {
    let file = fs::File::open(trace_path).map_err(|e| Failure(format!("{}: {e}", trace_path.display())))?;
    let trace = read_trace(BufReader::new(file)).map_err(|e| Failure(format!("{}: {e}", trace_path.display())))?;
    emit_output(out, &metrics_json(&compute_metrics(&trace)))
}
