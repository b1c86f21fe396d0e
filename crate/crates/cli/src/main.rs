//! `geom`: command-line front end for the causal-geometry engine.
//!
//! Exit status: 0 pass, 1 invariant failure, 2 config error, 3 runtime error.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::{Format, Operation, Overrides, RunConfig};
use run::RunError;

#[derive(Parser)]
#[command(name = "geom", version, about = "Sprays, curvature, Weyl invariants and congruences of causal geometries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Catalog geometry name (overrides the config).
    #[arg(long, global = true)]
    geometry: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of sampled points (replaces any explicit list).
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Report path; the report goes to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// List catalog geometries, including any defined by --config.
    List,
    /// Defining function, spray and Hessian data at points.
    Eval,
    /// Integrate null geodesics and monitor conserved quantities.
    Geodesic,
    /// Connection, curvature and differential identity residuals.
    Invariants,
    /// Generalized Weyl tensor on the shadow space.
    Weyl,
    /// Compare Weyl data before and after a conformal rescaling.
    ConformalCheck,
    /// Vertex-cone congruences: Raychaudhuri residual and focusing.
    Raychaudhuri,
}

fn config_error(msg: &str) -> ExitCode {
    eprintln!("geom: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return config_error(&e.0),
        },
        None => RunConfig::default(),
    };
    let reg = match cfg.registry() {
        Ok(r) => r,
        Err(e) => return config_error(&e.0),
    };
    let overrides = Overrides {
        geometry: cli.geometry.clone(),
        seed: cli.seed,
        points: cli.points,
        tol: cli.tol,
        out: cli.out.as_ref().map(|p| p.display().to_string()),
        format: cli.format.map(|f| match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }),
    };
    cfg.apply(&overrides);
    let op = match cli.command {
        Command::List => return list(&reg, cfg.output.format),
        Command::Eval => Operation::Eval,
        Command::Geodesic => Operation::Geodesic,
        Command::Invariants => Operation::Invariants,
        Command::Weyl => Operation::Weyl,
        Command::ConformalCheck => Operation::ConformalCheck,
        Command::Raychaudhuri => Operation::Raychaudhuri,
    };
    if let Some(o) = cfg.operation {
        if o != op {
            eprintln!("geom: note: config operation '{}' overridden by command '{}'", o.name(), op.name());
        }
    }
    cfg.operation = Some(op);
    let g = match cfg.resolve_geometry(&reg) {
        Ok(g) => g,
        Err(e) => return config_error(&e.0),
    };
    let rep = match run::run(op, &cfg, &g) {
        Ok(r) => r,
        Err(RunError::Config(e)) => return config_error(&e.0),
        Err(RunError::Runtime(e)) => {
            eprintln!("geom: {e}");
            return ExitCode::from(3);
        }
    };
    let body = match cfg.output.format {
        Format::Json => rep.to_json(),
        Format::Csv => rep.to_csv(),
    };
    match &cfg.output.path {
        Some(p) => {
            if let Err(e) = std::fs::write(p, body) {
                eprintln!("geom: cannot write {p}: {e}");
                return ExitCode::from(3);
            }
            print!("{}", rep.summary());
        }
        None => {
            print!("{body}");
            eprint!("{}", rep.summary());
        }
    }
    ExitCode::from(rep.exit_code())
}

fn list(reg: &causal_geometry::catalog::Registry, format: Format) -> ExitCode {
    let entries = reg.list();
    match format {
        Format::Json => {
            let v: Vec<_> = entries
                .iter()
                .map(|e| json!({"name": e.name, "n": e.n, "k": e.k, "domain": e.domain, "provenance": e.provenance, "note": e.note}))
                .collect();
            println!("{}", serde_json::to_string_pretty(&v).expect("listing serializes"));
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let _ = w.write_record(["name", "n", "k", "domain", "provenance", "note"]);
            for e in &entries {
                let _ = w.write_record([e.name.clone(), e.n.to_string(), e.k.to_string(), e.domain.clone(), e.provenance.clone(), e.note.clone()]);
            }
            let _ = w.flush();
        }
    }
    ExitCode::SUCCESS
}
