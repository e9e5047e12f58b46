use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teichcurve::cache;
use teichcurve::config::RunConfig;
use teichcurve::report::{check_rows_csv, curvature_rows_csv, curvature_table, parse_points, to_json, write_rows};
use teichcurve::verify::{run_suite, Session, Suite};
use teichcurve::{Error, Result};

#[derive(Parser)]
#[command(name = "teichcurve", version, about = "Curvature checks on the Teichmüller curve of a genus-2 surface")]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Mesh size
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Poincaré series truncation length
    #[arg(long = "L", global = true)]
    l: Option<usize>,
    /// Basis normalization: raw, wp or pointD
    #[arg(long, global = true)]
    norm: Option<String>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format: csv or json
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or refresh the cached group, mesh and basis
    Build,
    /// Run a verification suite
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Tabulate closed-form and finite-difference curvatures
    Report {
        /// File with one `x y` point per line
        #[arg(long)]
        points: Option<PathBuf>,
    },
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut c = RunConfig::load(cli.config.as_deref())?;
    if let Some(h) = cli.h {
        c.h = h;
    }
    if let Some(l) = cli.l {
        c.truncation_length = l;
    }
    if let Some(n) = &cli.norm {
        c.set("norm", n)?;
    }
    if let Some(o) = &cli.out {
        c.output_dir = o.clone();
    }
    if let Some(f) = &cli.format {
        c.set("format", f)?;
    }
    c.validate()?;
    Ok(c)
}

/// `Ok(true)` when every check passed.
fn run(cli: &Cli) -> Result<bool> {
    let c = config(cli)?;
    match &cli.command {
        Command::Build => {
            let b = cache::build(&c)?;
            for a in &b.artifacts {
                let state = if a.reused { "reused" } else { "built" };
                println!("{state} {} sha256={}", a.path.display(), a.sha256);
            }
            Ok(true)
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let session = Session::new(c)?;
            let rows = run_suite(&session, suite)?;
            let cfg = &session.config;
            let path = write_rows(
                &cfg.output_dir,
                &format!("verify-{}", suite.name()),
                cfg.format,
                check_rows_csv(&rows),
                || to_json(&rows),
            )?;
            let failed: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
            for r in &failed {
                eprintln!(
                    "FAIL [{}] {} ({}): value {:?}, reference {:?}, gap {:?} > tol {:?}",
                    r.suite, r.check, r.anchor, r.value, r.reference, r.gap, r.tol
                );
            }
            println!("{} checks, {} failed; report: {}", rows.len(), failed.len(), path.display());
            Ok(failed.is_empty())
        }
        Command::Report { points } => {
            let session = Session::new(c)?;
            let pts = match points {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    parse_points(&text)?
                }
                None => session.points.clone(),
            };
            let cfg = &session.config;
            let basis = &session.build.basis;
            let rows = curvature_table(
                session.surface(),
                basis,
                &session.phi0,
                &pts,
                cfg.fd_steps,
                cfg.oracle_floor,
            )?;
            let path = write_rows(&cfg.output_dir, "report", cfg.format, curvature_rows_csv(&rows), || {
                to_json(&rows)
            })?;
            let failed = rows.iter().filter(|r| !r.pass).count();
            println!("{} rows, {} failed; report: {}", rows.len(), failed, path.display());
            Ok(failed == 0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
