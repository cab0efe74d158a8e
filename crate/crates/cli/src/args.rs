use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hopf_core::integrate::IntegratorConfig;
use hopf_core::model::{scale_from_original, OriginalParams, Params};

use crate::failure::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "hopf-verifier",
    version,
    args_override_self = true,
    about = "Simulate and verify the scaled Hopf reaction system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one trajectory; writes trajectory.csv and summary.json.
    Simulate(SimulateArgs),
    /// Equilibria with their spectra and stability.
    Equilibria(EquilibriaArgs),
    /// Run the checks appropriate to the parameter regime; writes verify.json.
    Verify(VerifyArgs),
    /// Bifurcation table over a range of k; writes sweep.csv.
    Sweep(SweepArgs),
    /// Both branches of the stable manifold of E; writes p_u.csv, p_l.csv, manifold.json.
    Manifold(ManifoldArgs),
    /// Locate the periodic orbit; writes orbit.json and orbit.csv.
    Orbit(OrbitArgs),
    /// Time-averaged Lozinskii measure certificate; writes certificate.json.
    Bendixson(BendixsonArgs),
}

impl Command {
    pub const NAMES: [&'static str; 7] =
        ["simulate", "equilibria", "verify", "sweep", "manifold", "orbit", "bendixson"];
}

/// Either the scaled triple `--k --k3 --k5` or the rate constants
/// `--k1 --k2 --k3 --k4 --k5 --a`.
#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Scaled net growth rate k.
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    /// Rate constant k3.
    #[arg(long, allow_negative_numbers = true)]
    pub k3: Option<f64>,
    /// Rate constant k5.
    #[arg(long, allow_negative_numbers = true)]
    pub k5: Option<f64>,
    /// Rate constant k1 (with --k2 --k4 --a instead of --k).
    #[arg(long, allow_negative_numbers = true)]
    pub k1: Option<f64>,
    /// Rate constant k2.
    #[arg(long, allow_negative_numbers = true)]
    pub k2: Option<f64>,
    /// Rate constant k4.
    #[arg(long, allow_negative_numbers = true)]
    pub k4: Option<f64>,
    /// Outer reactant concentration A.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<Params, Failure> {
        let (k3, k5) = match (self.k3, self.k5) {
            (Some(k3), Some(k5)) => (k3, k5),
            _ => return Err(Failure::Config("--k3 and --k5 are required".into())),
        };
        let original = [self.k1, self.k2, self.k4, self.a];
        match (self.k, original.iter().any(Option::is_some)) {
            (Some(k), false) => Ok(Params::new(k, k3, k5)?),
            (None, true) => {
                let [Some(k1), Some(k2), Some(k4), Some(a)] = original else {
                    return Err(Failure::Config("rate constants need all of --k1 --k2 --k4 --a".into()));
                };
                let op = OriginalParams::new(k1, k2, k3, k4, k5, a)?;
                Ok(scale_from_original(&op)?.0)
            }
            (Some(_), true) => {
                Err(Failure::Config("give either --k or the rate constants --k1 --k2 --k4 --a, not both".into()))
            }
            (None, false) => Err(Failure::Config("missing --k (or --k1 --k2 --k4 --a)".into())),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// key=value file with default flag values; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for all random sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "HOPF_VERIFIER_JOBS")]
    pub jobs: Option<usize>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Relative integrator tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    /// Absolute integrator tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
}

impl CommonArgs {
    pub fn integrator(&self) -> Result<IntegratorConfig, Failure> {
        let cfg = IntegratorConfig::with_tolerances(self.rtol, self.atol);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub y0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub z0: f64,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    /// Start of the averaging window; defaults to t_end / 2.
    #[arg(long)]
    pub tail_start: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EquilibriaArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Record wall-clock time per check (makes the output run-dependent).
    #[arg(long)]
    pub timing: bool,
    /// Seeds for the orbit census in the oscillatory regime.
    #[arg(long, default_value_t = 50)]
    pub census_starts: usize,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub k3: f64,
    #[arg(long)]
    pub k5: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub k_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub k_max: f64,
    #[arg(long)]
    pub k_step: f64,
    /// Census seeds per oscillatory point; 0 skips the census.
    #[arg(long, default_value_t = 8)]
    pub census_starts: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct ManifoldArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Offset from E along the stable eigenvector.
    #[arg(long, default_value_t = 1e-7)]
    pub delta: f64,
}

#[derive(Args, Debug)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Initial section guess `x,z` on y = k; defaults to the unstable manifold of 0.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub guess: Option<Vec<f64>>,
    /// Run a census with this many seeds as well.
    #[arg(long, default_value_t = 0)]
    pub census: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Args, Debug)]
pub struct BendixsonArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Weight parameter in (0, 1/2); chosen automatically if absent.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 2000.0)]
    pub horizon: f64,
    /// Starts per axis of the start grid.
    #[arg(long, default_value_t = 4)]
    pub grid: usize,
    /// Lower corner of the start grid; estimated from persistence if absent.
    #[arg(long)]
    pub eta: Option<f64>,
}
