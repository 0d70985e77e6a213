use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fraclap::experiments::{emit_csv, emit_plot, fit_rates, format_rates, parse_csv, run_convergence, RunConfig};
use fraclap::mesh::{build_disc_mesh, build_interval_mesh, refine_uniform};
use fraclap::{Error, Result};

#[derive(Parser)]
#[command(name = "fraclap", version, about = "Convergence studies for the integral fractional Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on a sequence of meshes and write the error table.
    Run(RunArgs),
    /// Print convergence orders from a CSV table.
    Rates { csv: PathBuf },
    /// Write a mesh of the refinement sequence.
    Mesh {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Refinements beyond the coarsest mesh.
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Run options. Each may also come from a `key = value` config file with
/// the flag names as keys; flags take precedence.
#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated fractional orders.
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    /// Local error region, `square:<side>`.
    #[arg(long)]
    subdomain: Option<String>,
    #[arg(long)]
    no_project_boundary: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Also compute the localized energy error.
    #[arg(long)]
    localized_energy: bool,
    /// Outer region of the localized energy cutoff, `square:<side>`.
    #[arg(long)]
    outer: Option<String>,
    /// Use the slower high-accuracy quadrature.
    #[arg(long)]
    high_accuracy: bool,
}

fn parse_error(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn parse_square(text: &str) -> Result<f64> {
    let side = text.strip_prefix("square:").ok_or_else(|| parse_error(format!("expected square:<side>, got {text}")))?;
    side.trim().parse().map_err(|_| parse_error(format!("bad square side {side}")))
}

fn parse_flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(parse_error(format!("{key} expects true or false, got {value}"))),
    }
}

/// Fills options missing from the command line with config file values.
fn merge_file(args: &mut RunArgs, text: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| parse_error(format!("line {}: expected key = value", i + 1)))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim().to_string());
        let number = |v: &str| v.parse::<usize>().map_err(|_| parse_error(format!("line {}: {key} expects an integer", i + 1)));
        match key.as_str() {
            "dim" => args.dim = args.dim.or(Some(number(&value)?)),
            "s" => args.s = args.s.take().or(Some(value)),
            "levels" => args.levels = args.levels.or(Some(number(&value)?)),
            "subdomain" => args.subdomain = args.subdomain.take().or(Some(value)),
            "no-project-boundary" => args.no_project_boundary |= parse_flag(&key, &value)?,
            "workers" => args.workers = args.workers.or(Some(number(&value)?)),
            "csv" => args.csv = args.csv.take().or(Some(value.into())),
            "svg" => args.svg = args.svg.take().or(Some(value.into())),
            "localized-energy" => args.localized_energy |= parse_flag(&key, &value)?,
            "outer" => args.outer = args.outer.take().or(Some(value)),
            "high-accuracy" => args.high_accuracy |= parse_flag(&key, &value)?,
            _ => return Err(parse_error(format!("line {}: unknown key {key}", i + 1))),
        }
    }
    Ok(())
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(d) = args.dim {
        cfg.dim = d;
    }
    if let Some(s) = &args.s {
        cfg.s_values = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| parse_error(format!("bad fractional order {v}"))))
            .collect::<Result<_>>()?;
    }
    if let Some(l) = args.levels {
        cfg.levels = l;
    }
    if let Some(sd) = &args.subdomain {
        cfg.subdomain_side = parse_square(sd)?;
    }
    if let Some(o) = &args.outer {
        cfg.outer_side = parse_square(o)?;
    }
    cfg.project_boundary = !args.no_project_boundary;
    cfg.workers = args.workers.unwrap_or(0);
    cfg.localized_energy = args.localized_energy;
    if args.high_accuracy {
        cfg.assembly = fraclap::assembly::AssemblyConfig::high_accuracy();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(mut args: RunArgs) -> Result<()> {
    if let Some(path) = args.config.clone() {
        merge_file(&mut args, &std::fs::read_to_string(path)?)?;
    }
    let csv = args.csv.clone().ok_or_else(|| Error::InvalidArgument("--csv is required".into()))?;
    let cfg = run_config(&args)?;
    let records = run_convergence(&cfg)?;
    for r in &records {
        match &r.failure {
            Some(f) => eprintln!("s={} level={} failed: {f}", r.s, r.level),
            None => eprintln!("s={} level={} ndof={} done in {:.1}s", r.s, r.level, r.ndof, r.wall_time_seconds),
        }
    }
    emit_csv(&records, &csv)?;
    if let Some(svg) = &args.svg {
        emit_plot(&records, svg)?;
    }
    print!("{}", format_rates(&fit_rates(&records)?));
    Ok(())
}

fn write_mesh(dim: usize, levels: usize, out: &std::path::Path) -> Result<()> {
    let mut m = if dim == 1 { build_interval_mesh(8)? } else { build_disc_mesh(16)? };
    for _ in 0..levels {
        m = refine_uniform(&m, true)?;
    }
    m.save(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Rates { csv } => std::fs::read_to_string(csv)
            .map_err(Error::from)
            .and_then(|t| parse_csv(&t))
            .and_then(|r| fit_rates(&r))
            .map(|rows| print!("{}", format_rates(&rows))),
        Command::Mesh { dim, levels, out } => write_mesh(dim, levels, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
