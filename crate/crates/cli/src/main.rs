use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use halfline_cli::commands::{self, Common, Outcome, SweepArgs};
use halfline_cli::output::Format;

const AFTER_HELP: &str = "\
Any tolerance field can be overridden with --tol-<name> <value>, for example
--tol-verdict-rel 1e-6 or --tol-scan-points 800.

Exit codes: 0 success, 1 input or runtime error, 2 hypotheses not met,
3 numerical violation of a checked bound or identity.";

#[derive(Debug, Parser)]
#[command(name = "halfline", version, about = "Negative spectra and Lieb-Thirring checks for half-line Schrödinger operators")]
#[command(after_help = AFTER_HELP)]
struct Cli {
    /// Problem file (TOML).
    #[arg(short, long, global = true)]
    input: Option<PathBuf>,
    #[arg(short, long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Seed for generated problems.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exponents for the γ-dependent bounds; repeat or separate by commas.
    #[arg(long, global = true, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Grid step of the discretized operator.
    #[arg(long = "grid-h", global = true)]
    grid_h: Option<f64>,
    /// Length of the discretized interval (both half-widths in 2D).
    #[arg(long = "grid-L", global = true)]
    grid_l: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Negative eigenvalues with multiplicities.
    Solve,
    /// Every applicable inequality report.
    Verify,
    /// Reports along a one-parameter family, plus a (parameter, slack) CSV.
    Sweep {
        /// Dotted path to a numeric leaf, e.g. problem.terms.0.profile.height.
        #[arg(long)]
        param: String,
        /// start:stop:count or a comma-separated list.
        #[arg(long)]
        values: String,
        /// Report whose slack goes into the series (default lt_main).
        #[arg(long)]
        metric: Option<String>,
        /// Series file; defaults to <input>.sweep.csv.
        #[arg(long)]
        series_out: Option<PathBuf>,
    },
    /// Remove the ground state and check the transformed operator.
    Darboux,
    /// Spectrum of a star graph.
    Graph,
    /// Half-plane bound with the boundary term.
    Halfspace {
        /// Also run at h/2 and compare slack signs.
        #[arg(long)]
        two_resolutions: bool,
    },
    /// Shooting eigenvalues next to the discretized operator.
    OracleCompare {
        /// Oracle eigenvalues below this are ignored.
        #[arg(long, default_value_t = 5e-3)]
        floor: f64,
    },
    /// Check the classical constants and their identities.
    ConstantsAudit,
}

/// Pulls `--tol-<name> <v>` and `--tol-<name>=<v>` out of the argument list.
fn split_tolerances(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, f64)>)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut tol = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(name) = a.strip_prefix("--tol-") else {
            rest.push(a);
            continue;
        };
        let (name, value) = match name.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| anyhow!("--tol-{name} needs a value"))?;
                (name.to_string(), v)
            }
        };
        let v: f64 = value.parse().with_context(|| format!("--tol-{name}: `{value}` is not a number"))?;
        tol.push((name.replace('-', "_"), v));
    }
    Ok((rest, tol))
}

fn run() -> Result<Outcome> {
    let (args, tol_overrides) = split_tolerances(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    let common = Common {
        input: cli.input,
        seed: cli.seed,
        gammas: cli.gamma,
        grid_h: cli.grid_h,
        grid_l: cli.grid_l,
        tol_overrides,
    };
    let out = match &cli.command {
        Command::Solve => commands::solve(&common),
        Command::Verify => commands::verify(&common),
        Command::Sweep { param, values, metric, series_out } => commands::sweep(
            &common,
            &SweepArgs { param, values, metric: metric.as_deref(), series_out: series_out.as_deref() },
        ),
        Command::Darboux => commands::darboux(&common),
        Command::Graph => commands::graph(&common),
        Command::Halfspace { two_resolutions } => commands::halfspace(&common, *two_resolutions),
        Command::OracleCompare { floor } => commands::oracle_compare(&common, *floor),
        Command::ConstantsAudit => commands::constants_audit(),
    }?;
    print!("{}", out.rendered.render(cli.format)?);
    Ok(out)
}

fn main() -> ExitCode {
    match run() {
        Ok(out) => ExitCode::from(out.status.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::error_code(&e))
        }
    }
}
