//! `interlace`: command-line runner for interlacement experiments.

mod commands;
mod config;
mod error;
mod output;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "interlace", version, about = "Random interlacement experiments in finite windows")]
pub struct Cli {
    /// Master seed; mandatory for stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory receiving CSV files and the manifest.
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the CSV column schema as JSON and exit.
    #[arg(long)]
    pub schema: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capacity and equilibrium measure of a finite set.
    Capacity(CapacityArgs),
    /// Sample the interlacement in a window.
    Sample(SampleArgs),
    /// Cluster statistics of a sampled or loaded configuration.
    Analyze(AnalyzeArgs),
    /// Seed events and the recursive bad event on a block hierarchy.
    #[command(name = "renorm-check")]
    RenormCheck(RenormArgs),
    /// Finite-size threshold proxies and their curves.
    Estimate(EstimateArgs),
    /// Effective-resistance profile of the diluted interlacement graph.
    Resistance(ResistanceArgs),
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long)]
    pub d: Option<usize>,
    /// cube, ball or points.
    #[arg(long)]
    pub shape: Option<String>,
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub radius: Option<usize>,
    /// Points as `x,y,z;x,y,z;...`.
    #[arg(long)]
    pub points: Option<String>,
    /// Largest dense system the potential solver may build.
    #[arg(long = "dense-cap")]
    pub dense_cap: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct SamplingArgs {
    #[arg(long)]
    pub d: Option<usize>,
    /// Radius of the centered ball window.
    #[arg(long)]
    pub radius: Option<usize>,
    /// Side of a cube window at the origin (instead of a ball).
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long)]
    pub u: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// exact or truncated.
    #[arg(long)]
    pub mode: Option<String>,
    /// Kill radius of truncated mode; defaults to four times the window radius.
    #[arg(long = "safety-radius")]
    pub safety_radius: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// sites.csv from `sample`; otherwise the sampling flags are used.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// vacant, occupied or noisy_vacant.
    #[arg(long)]
    pub field: Option<String>,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    /// Scale of the crossing and local-uniqueness events.
    #[arg(long = "L")]
    pub size: Option<usize>,
    /// Thickness of the slab restriction.
    #[arg(long)]
    pub slab: Option<usize>,
    /// Diameter bound of the component filter.
    #[arg(long)]
    pub diameter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenormArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "L0")]
    pub base: Option<usize>,
    #[arg(long)]
    pub l0: Option<usize>,
    /// Level of the recursive event.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub u: Option<f64>,
    /// Open probability of the bond dilution.
    #[arg(long)]
    pub p: Option<f64>,
    /// Density m(u) in the seed thresholds; defaults to 1 - exp(-u / g(0)).
    #[arg(long)]
    pub m: Option<f64>,
    /// Separation factor overriding l(d); requires --allow-override.
    #[arg(long)]
    pub separation: Option<u64>,
    /// Acknowledge running outside the proof regime.
    #[arg(long = "allow-override")]
    pub allow_override: bool,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long = "safety-radius")]
    pub safety_radius: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// u-star-eps, u-star-star, u-bar or curves.
    #[arg(long)]
    pub what: Option<String>,
    /// Noise strengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Sizes L, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "u-min")]
    pub u_min: Option<f64>,
    #[arg(long = "u-max")]
    pub u_max: Option<f64>,
    /// Points of the tabulated level grid.
    #[arg(long = "grid-points")]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Bisection tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Largest window, in vertices.
    #[arg(long = "max-window")]
    pub max_window: Option<usize>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long = "safety-radius")]
    pub safety_radius: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ResistanceArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub u: Option<f64>,
    /// constant:c, uniform:a,b or exp:lambda,floor.
    #[arg(long)]
    pub law: Option<String>,
    /// Radii, comma separated; overrides the N-min..N-max doubling sequence.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<usize>>,
    #[arg(long = "N-min")]
    pub n_min: Option<usize>,
    #[arg(long = "N-max")]
    pub n_max: Option<usize>,
    /// Open probability of the bond dilution.
    #[arg(long)]
    pub dilution: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long = "safety-radius")]
    pub safety_radius: Option<usize>,
    /// Also compute the full-lattice reference profile.
    #[arg(long = "lattice-reference")]
    pub lattice_reference: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.schema {
        println!("{}", serde_json::to_string_pretty(&schema::dump())?);
        return Ok(());
    }
    let Some(command) = cli.command.as_ref() else {
        return Err(CliError::Validation("no subcommand given (try --help)".into()));
    };
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let written = commands::dispatch(&cli, command, &file)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("interlace: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
