use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use ap_pusher::diagnostics::gc_transform;
use ap_pusher::harness::check::run_checks;
use ap_pusher::harness::report::{self, csv_writer, sci, PER_STEP_STATE_HEADER};
use ap_pusher::harness::{
    emit_reports, monotone_checks, rate_checks, read_sweep_csv, run_sweep, tables_from_rows,
    SweepConfig, SweepMode,
};
use ap_pusher::scheme_ap::{ap_solve, AugmentedState, SchemeParams};
use ap_pusher::{Error, FieldSelector, Potential, Vec2};

const EXIT_CONFIG: u8 = 2;
const EXIT_CELL_FAILED: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(version, about = "Asymptotic-preserving particle pusher for stiff magnetized characteristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write the per-step CSV.
    Simulate(SimulateArgs),
    /// Run an error sweep and write CSV, rate and manifest files.
    Sweep(SweepArgs),
    /// Fit rates from existing sweep CSVs.
    Rates(RatesArgs),
    /// Run the invariant suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    t_final: f64,
    #[arg(long, value_parser = parse_vec2, default_value = "2,2")]
    x0: Vec2,
    #[arg(long, value_parser = parse_vec2, default_value = "3,3")]
    v0: Vec2,
    /// `paper` or `uniform`.
    #[arg(long, default_value = "paper")]
    field: String,
    /// Field strength for `--field uniform`.
    #[arg(long, default_value_t = 1.0)]
    b0: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Runs every configured comparison when omitted.
    #[arg(long)]
    mode: Option<SweepMode>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "sweep-out")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RatesArgs {
    /// Sweep CSV files.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Directory for `rates.txt`; the report is printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_vec2(s: &str) -> Result<Vec2, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let a = a.parse::<f64>().map_err(|e| e.to_string())?;
            let b = b.parse::<f64>().map_err(|e| e.to_string())?;
            Ok(Vec2::new(a, b))
        }
        _ => Err(format!("expected two comma-separated numbers, got {s:?}")),
    }
}

fn is_config_error(err: &anyhow::Error) -> bool {
    matches!(
        err.downcast_ref::<Error>().map(Error::root),
        Some(Error::Config(_) | Error::InvalidParams(_) | Error::Io { .. } | Error::Csv { .. })
    )
}

fn load_config(path: Option<&Path>) -> ap_pusher::Result<SweepConfig> {
    match path {
        Some(p) => SweepConfig::load(p),
        None => Ok(SweepConfig::default()),
    }
}

fn simulate(args: SimulateArgs) -> anyhow::Result<u8> {
    let selector = match args.field.as_str() {
        "paper" => FieldSelector::Paper,
        "uniform" => FieldSelector::Uniform {
            b0: args.b0,
            phi: Potential::Zero,
        },
        other => return Err(Error::Config(format!("unknown field {other:?}")).into()),
    };
    let model = selector.build()?;
    let params = SchemeParams::new(args.eps, args.dt, args.t_final);
    params.validate()?;
    let traj = ap_solve(AugmentedState::from_phase(args.x0, args.v0), &params, model.as_ref())?;

    let rows = traj.states.iter().enumerate().map(|(n, s)| {
        let gc = gc_transform(s.x, s.e, s.w, args.eps, model.as_ref())?;
        let (iters, residual) = match n {
            0 => (0, 0.0),
            _ => (traj.steps[n - 1].fp_iterations, traj.steps[n - 1].fp_residual),
        };
        Ok::<_, Error>([
            n.to_string(),
            sci(s.t),
            sci(s.x.x1),
            sci(s.x.x2),
            sci(s.e),
            sci(s.w.x1),
            sci(s.w.x2),
            sci(gc.x_gc.x1),
            sci(gc.x_gc.x2),
            sci(gc.e_gc),
            iters.to_string(),
            sci(residual),
        ])
    });

    match &args.out {
        Some(path) => {
            let mut w = csv_writer(path)?;
            w.write_record(PER_STEP_STATE_HEADER)?;
            for row in rows {
                w.write_record(row?)?;
            }
            w.flush()?;
        }
        None => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(std::io::stdout().lock());
            w.write_record(PER_STEP_STATE_HEADER)?;
            for row in rows {
                w.write_record(row?)?;
            }
            w.flush()?;
        }
    }
    Ok(0)
}

fn sweep(args: SweepArgs) -> anyhow::Result<u8> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(w) = args.workers {
        cfg.parallel_workers = w;
    }
    cfg.validate()?;
    let modes = match args.mode {
        Some(m) => vec![m],
        None => cfg.comparisons.clone(),
    };
    let mut tables = Vec::new();
    for mode in modes {
        eprintln!("running {mode} sweep");
        tables.push(run_sweep(&cfg, mode)?);
    }
    let checks: Vec<_> = tables.iter().flat_map(rate_checks).collect();
    let monotone: Vec<_> = tables.iter().flat_map(monotone_checks).collect();
    let paths = emit_reports(&tables, &checks, &monotone, Some(&cfg), &args.out)?;
    print!("{}", report::rates_text(&checks, &monotone));
    eprintln!("wrote {}", paths.manifest.display());

    if tables.iter().any(|t| t.any_failed()) {
        return Ok(EXIT_CELL_FAILED);
    }
    if checks.iter().any(|c| !c.passed) || monotone.iter().any(|m| !m.passed) {
        return Ok(EXIT_ACCEPTANCE);
    }
    Ok(0)
}

fn rates(args: RatesArgs) -> anyhow::Result<u8> {
    let mut rows = Vec::new();
    for path in &args.csv {
        rows.extend(read_sweep_csv(path)?);
    }
    let tables = tables_from_rows(rows);
    let checks: Vec<_> = tables.iter().flat_map(rate_checks).collect();
    let monotone: Vec<_> = tables.iter().flat_map(monotone_checks).collect();
    let text = report::rates_text(&checks, &monotone);
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
            let path = dir.join("rates.txt");
            std::fs::write(&path, &text).with_context(|| path.display().to_string())?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    if checks.iter().any(|c| !c.passed) || monotone.iter().any(|m| !m.passed) {
        return Ok(EXIT_ACCEPTANCE);
    }
    Ok(0)
}

fn check(args: CheckArgs) -> anyhow::Result<u8> {
    let cfg = load_config(args.config.as_deref())?;
    let outcomes = run_checks(&cfg)?;
    for o in &outcomes {
        println!("{}", o.line());
    }
    Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { EXIT_ACCEPTANCE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Rates(a) => rates(a),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_config_error(&err) { EXIT_CONFIG } else { 1 })
        }
    }
}
