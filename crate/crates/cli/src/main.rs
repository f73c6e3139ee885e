use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use circuit_consensus::bench::run_bench;
use circuit_consensus::graph::{save_graph, validate, AttributionGraph, GraphDocument};
use circuit_consensus::pipeline::{aggregate_csv, run_manifest, RunManifest};
use circuit_consensus::synthetic::{generate_synthetic, SyntheticSpec};
use circuit_consensus::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "circuit-consensus", version, about = "Consensus circuits from multiply-pruned attribution graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run manifest and write its reports.
    Run {
        manifest: PathBuf,
        /// Overrides the manifest's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Per-logit influence seed, as `logit_id=value`. Repeatable.
        #[arg(long = "logit-seed", value_parser = parse_logit_seed)]
        logit_seeds: Vec<(String, f64)>,
    },
    /// Generate a synthetic graph from a generator spec file.
    Gen { spec: PathBuf, out: PathBuf },
    /// Check a graph file and print every violation.
    Validate { path: PathBuf },
    /// Time the pipeline stages on a generated graph.
    Bench {
        #[arg(long, default_value_t = 40_000)]
        edges: usize,
        #[arg(long, default_value_t = 25)]
        views: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

fn parse_logit_seed(s: &str) -> Result<(String, f64), String> {
    let (id, value) = s.split_once('=').ok_or_else(|| format!("expected logit_id=value, got {s:?}"))?;
    let value: f64 = value.parse().map_err(|e| format!("bad seed value {value:?}: {e}"))?;
    Ok((id.to_string(), value))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Parse(_)
        | Error::Validation(_)
        | Error::Infeasible(_)
        | Error::InvalidConfig(_)
        | Error::InvalidTau(_)
        | Error::InvalidArgument(_) => EXIT_VALIDATION,
        _ => EXIT_INTERNAL,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn cmd_run(manifest_path: &Path, output_dir: Option<PathBuf>, logit_seeds: Vec<(String, f64)>) -> Result<(), Error> {
    let mut manifest = RunManifest::from_json(&read(manifest_path)?)?;
    if let Some(dir) = output_dir {
        manifest.output_dir = dir;
    }
    manifest.logit_seeds.overrides.extend(logit_seeds);
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let outcome = run_manifest(&manifest, base)?;
    print!("{}", aggregate_csv(&outcome.aggregate));
    log::info!("reports written to {}", outcome.output_dir.display());
    Ok(())
}

fn cmd_gen(spec_path: &Path, out: &Path) -> Result<(), Error> {
    let spec: SyntheticSpec = serde_json::from_slice(&read(spec_path)?)?;
    let g = generate_synthetic(&spec)?;
    fs::write(out, save_graph(&g)).map_err(|source| Error::Io { path: out.display().to_string(), source })?;
    log::info!("wrote {} nodes, {} edges to {}", g.node_count(), g.edge_count(), out.display());
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<u8, Error> {
    let doc: GraphDocument = match serde_json::from_slice(&read(path)?) {
        Ok(doc) => doc,
        Err(e) => {
            println!("parse error: {e}");
            return Ok(EXIT_VALIDATION);
        }
    };
    let violations = validate(&doc);
    for v in &violations {
        println!("{}", v.message);
    }
    if violations.is_empty() {
        let g = AttributionGraph::from_document(doc)?;
        println!("ok: {} nodes, {} edges", g.node_count(), g.edge_count());
        Ok(0)
    } else {
        Ok(EXIT_VALIDATION)
    }
}

fn cmd_bench(edges: usize, views: usize, repeats: usize, as_json: bool) -> Result<(), Error> {
    let report = run_bench(edges, views, repeats)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    println!(
        "edges={} union={} views={} repeats={}",
        report.edges, report.union_edges, report.views, report.repeats
    );
    println!("{:<22}{:>12}{:>12}{:>12}", "stage", "median_ms", "min_ms", "max_ms");
    for s in &report.stages {
        println!("{:<22}{:>12.3}{:>12.3}{:>12.3}", s.stage, s.median_ms, s.min_ms, s.max_ms);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { manifest, output_dir, logit_seeds } => cmd_run(&manifest, output_dir, logit_seeds).map(|_| 0),
        Command::Gen { spec, out } => cmd_gen(&spec, &out).map(|_| 0),
        Command::Validate { path } => cmd_validate(&path),
        Command::Bench { edges, views, repeats, json } => cmd_bench(edges, views, repeats, json).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
