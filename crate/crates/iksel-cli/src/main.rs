use clap::{Args, Parser, Subcommand};
use iksel::kinematics::rotation::rotation_from_vector;
use iksel::{
    BuildParams, Pose, ReselectPolicy, RobotModel, ScalePreset, SeedDatabase, SelectionMetric,
    SelectorConfig, SolverConfig, SolverKind,
};
use iksel_cli::{ablation_sweep, run_batch, ReportFormat, RunSummary, SweepAxis, TrialSpec};
use nalgebra::{Matrix3, Vector3};
use std::path::PathBuf;
use std::time::Instant;

/// Seed-selected inverse kinematics: database builder and benchmark harness.
///
/// Every flag can also be set through an environment variable named after it
/// with the IKSEL_ prefix (e.g. IKSEL_RNG_SEED for --rng-seed); the flag wins
/// when both are present.
#[derive(Parser)]
#[command(name = "iksel", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Precompute a seed database for a robot model.
    Build(BuildCmd),
    /// Solve a single target pose and print the report as JSON.
    Solve(SolveCmd),
    /// Time a batch of solves against frozen random targets.
    Bench(BenchCmd),
    /// Re-run a benchmark along one configuration axis, same targets per row.
    Sweep(SweepCmd),
}

#[derive(Args)]
struct BuildCmd {
    /// Robot model TOML file.
    #[arg(long, env = "IKSEL_MODEL")]
    model: PathBuf,
    /// Output database path.
    #[arg(long, env = "IKSEL_OUT")]
    out: PathBuf,
    /// Grid preset: small, medium, or large.
    #[arg(long, env = "IKSEL_SCALE", conflicts_with = "divisions")]
    scale: Option<ScalePreset>,
    /// Explicit per-joint divisions, comma separated (e.g. 8,7,6,6,5,4).
    #[arg(long, env = "IKSEL_DIVISIONS", value_delimiter = ',')]
    divisions: Option<Vec<u32>>,
    /// Weight on the rotation-vector block of the lookup keys.
    #[arg(long, env = "IKSEL_ROTATION_WEIGHT", default_value_t = 1.0)]
    rotation_weight: f64,
    /// Relative singular-value cutoff for the stored pseudo-inverses.
    #[arg(long, env = "IKSEL_REL_CUTOFF", default_value_t = 1e-4)]
    rel_cutoff: f64,
}

#[derive(Args)]
struct SolverArgs {
    /// Iteration scheme: DLS, PINV, PINV_RR, CWLN, or CWPI.
    #[arg(long, env = "IKSEL_SOLVER", default_value = "DLS")]
    solver: SolverKind,
    /// Hard cap on Jacobian updates per solve call.
    #[arg(long, env = "IKSEL_MAX_ITERATIONS", default_value_t = 7)]
    max_iterations: u32,
    /// Convergence threshold on the position error, metres.
    #[arg(long, env = "IKSEL_POSITION_TOLERANCE", default_value_t = 1e-6)]
    position_tolerance: f64,
    /// Convergence threshold on the rotation error, radians.
    #[arg(long, env = "IKSEL_ROTATION_TOLERANCE", default_value_t = 1e-6)]
    rotation_tolerance: f64,
    /// Damping factor for DLS.
    #[arg(long, env = "IKSEL_DLS_DAMPING", default_value_t = 1e-4)]
    dls_damping: f64,
    /// Relative singular-value cutoff for the pseudo-inverse schemes.
    #[arg(long, env = "IKSEL_SOLVER_REL_CUTOFF", default_value_t = 1e-4)]
    rel_cutoff: f64,
    /// Abort when the error norm increases (defaults per scheme).
    #[arg(long, env = "IKSEL_MONOTONE")]
    monotone: Option<bool>,
    /// Weight on the rotation block of the combined error norm.
    #[arg(long, env = "IKSEL_ERROR_ROTATION_WEIGHT", default_value_t = 1.0)]
    error_rotation_weight: f64,
}

impl SolverArgs {
    fn to_config(&self, rng_seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.solver);
        cfg.max_iterations = self.max_iterations;
        cfg.position_tolerance = self.position_tolerance;
        cfg.rotation_tolerance = self.rotation_tolerance;
        cfg.dls_damping = self.dls_damping;
        cfg.rel_cutoff = self.rel_cutoff;
        if let Some(m) = self.monotone {
            cfg.enforce_monotone_decrease = m;
        }
        cfg.rotation_weight = self.error_rotation_weight;
        cfg.rng_seed = rng_seed;
        cfg
    }
}

#[derive(Args)]
struct SelectorArgs {
    /// Neighbours fetched from the database per query.
    #[arg(long, env = "IKSEL_K_CANDIDATES", default_value_t = 200)]
    k_candidates: usize,
    /// Total solve attempts per target, re-selections included.
    #[arg(long, env = "IKSEL_ATTEMPTS", default_value_t = 1)]
    attempts: u32,
    /// Top-ranked candidates eligible for re-selection.
    #[arg(long, env = "IKSEL_RESELECT_POOL", default_value_t = 20)]
    reselect_pool: usize,
    /// Seed ranking metric: joint_adjustment or workspace_proximity.
    #[arg(long, env = "IKSEL_METRIC", default_value = "joint_adjustment")]
    metric: SelectionMetric,
    /// Re-selection policy after a failed attempt.
    #[arg(long, env = "IKSEL_POLICY", default_value = "farthest_from_failures")]
    policy: ReselectPolicy,
    /// Use a fixed-radius key-space ball instead of k nearest neighbours.
    #[arg(long, env = "IKSEL_DELTA_BALL")]
    delta_ball: Option<f64>,
}

impl SelectorArgs {
    fn to_config(&self) -> SelectorConfig {
        SelectorConfig {
            k_candidates: self.k_candidates,
            max_attempts: self.attempts,
            reselect_pool_size: self.reselect_pool,
            metric: self.metric,
            reselect_policy: self.policy,
            delta_ball: self.delta_ball,
        }
    }
}

#[derive(Args)]
struct SolveCmd {
    /// Robot model TOML file.
    #[arg(long, env = "IKSEL_MODEL")]
    model: PathBuf,
    /// Seed database built for the same model.
    #[arg(long, env = "IKSEL_DB")]
    db: PathBuf,
    /// Target pose: x,y,z plus a rotation vector (6 numbers) or a row-major
    /// rotation matrix (12 numbers total).
    #[arg(long, env = "IKSEL_TARGET", allow_hyphen_values = true)]
    target: String,
    /// Seed for the randomized-restart scheme.
    #[arg(long, env = "IKSEL_RNG_SEED", default_value_t = 0)]
    rng_seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    selector: SelectorArgs,
}

#[derive(Args)]
struct BenchCmd {
    /// Robot model TOML file.
    #[arg(long, env = "IKSEL_MODEL")]
    model: PathBuf,
    /// Seed database built for the same model.
    #[arg(long, env = "IKSEL_DB")]
    db: PathBuf,
    /// Number of random targets to solve.
    #[arg(long, env = "IKSEL_TRIALS", default_value_t = 2000)]
    trials: usize,
    /// Seed for target generation and the solver; no entropy default.
    #[arg(long, env = "IKSEL_RNG_SEED", required = true)]
    rng_seed: Option<u64>,
    /// Worker threads; 1 is strictly sequential, 0 picks automatically.
    #[arg(long, env = "IKSEL_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Report format: csv or json.
    #[arg(long, env = "IKSEL_FORMAT", default_value = "csv")]
    format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long, env = "IKSEL_REPORT")]
    report: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    selector: SelectorArgs,
}

#[derive(Args)]
struct SweepCmd {
    /// Axis to vary: database_scale, solver_kind, selection_metric, or
    /// reselect_attempts.
    #[arg(long, env = "IKSEL_AXIS")]
    axis: SweepAxis,
    /// Axis values, comma separated (e.g. 1,3,5,10,20 or DLS,PINV,CWLN).
    #[arg(long, env = "IKSEL_VALUES", value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[command(flatten)]
    bench: BenchCmd,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(c) => cmd_build(c),
        Command::Solve(c) => cmd_solve(c),
        Command::Bench(c) => cmd_bench(c),
        Command::Sweep(c) => cmd_sweep(c),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// 0 success, 2 usage, 3 incompatible database, 4 I/O or file format.
fn exit_code(e: &iksel::Error) -> i32 {
    match e {
        iksel::Error::IncompatibleModel => 3,
        iksel::Error::Io(_) | iksel::Error::Format { .. } | iksel::Error::ModelParse(_) => 4,
        _ => 2,
    }
}

fn cmd_build(c: BuildCmd) -> iksel::Result<()> {
    let model = RobotModel::from_file(&c.model)?;
    let divisions = match (&c.scale, &c.divisions) {
        (Some(preset), None) => preset.divisions(model.dof())?,
        (None, Some(divs)) => divs.clone(),
        (None, None) => {
            return Err(iksel::Error::InvalidParameter(
                "pass either --scale or --divisions".into(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let params = BuildParams {
        rotation_weight: c.rotation_weight,
        rel_cutoff: c.rel_cutoff,
        ..BuildParams::new(divisions)
    };
    let started = Instant::now();
    let db = SeedDatabase::build(&model, &params)?;
    db.save(&c.out)?;
    let bytes = std::fs::metadata(&c.out)?.len();
    println!(
        "built {} records for {} in {:.2} s, wrote {} bytes to {}",
        db.len(),
        model.name(),
        started.elapsed().as_secs_f64(),
        bytes,
        c.out.display()
    );
    Ok(())
}

fn parse_target(text: &str) -> iksel::Result<Pose> {
    let numbers: Vec<f64> = text
        .split(|ch: char| ch == ',' || ch.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|_| {
                iksel::Error::InvalidParameter(format!("'{s}' in the target is not a number"))
            })
        })
        .collect::<iksel::Result<_>>()?;
    let position = |n: &[f64]| Vector3::new(n[0], n[1], n[2]);
    match numbers.len() {
        6 => Ok(Pose {
            position: position(&numbers),
            rotation: rotation_from_vector(&Vector3::new(numbers[3], numbers[4], numbers[5])),
        }),
        12 => {
            let r = Matrix3::from_row_slice(&numbers[3..12]);
            Pose::new(position(&numbers), r).map_err(|_| {
                iksel::Error::InvalidParameter(
                    "target rotation matrix is not orthonormal with determinant +1".into(),
                )
            })
        }
        n => Err(iksel::Error::InvalidParameter(format!(
            "target needs 6 numbers (position + rotation vector) or 12 \
             (position + row-major rotation matrix), got {n}"
        ))),
    }
}

fn load_pair(model: &PathBuf, db: &PathBuf) -> iksel::Result<(RobotModel, SeedDatabase)> {
    let model = RobotModel::from_file(model)?;
    let db = SeedDatabase::load(db, &model)?;
    Ok((model, db))
}

fn cmd_solve(c: SolveCmd) -> iksel::Result<()> {
    let (model, db) = load_pair(&c.model, &c.db)?;
    let target = parse_target(&c.target)?;
    let solver = c.solver.to_config(c.rng_seed);
    let selector = c.selector.to_config();
    let report = iksel::solve(&model, &db, &target, &solver, &selector)?;
    let out = std::io::stdout();
    serde_json::to_writer_pretty(out.lock(), &report).map_err(std::io::Error::from)?;
    println!();
    Ok(())
}

impl BenchCmd {
    fn trial_spec(&self) -> TrialSpec {
        let rng_seed = self.rng_seed.expect("clap enforces --rng-seed");
        TrialSpec {
            trials: self.trials,
            rng_seed,
            solver: self.solver.to_config(rng_seed),
            selector: self.selector.to_config(),
            jobs: self.jobs,
        }
    }

    fn write(&self, rows: &[RunSummary]) -> iksel::Result<()> {
        iksel_cli::write_report(rows, self.format, self.report.as_deref())
    }
}

fn cmd_bench(c: BenchCmd) -> iksel::Result<()> {
    let (model, db) = load_pair(&c.model, &c.db)?;
    let spec = c.trial_spec();
    configure_jobs(spec.jobs);
    let targets = iksel_cli::generate_targets(&model, spec.trials, spec.rng_seed);
    let row = run_batch(&model, &db, &targets, &spec)?;
    c.write(&[row])
}

fn cmd_sweep(c: SweepCmd) -> iksel::Result<()> {
    let (model, db) = load_pair(&c.bench.model, &c.bench.db)?;
    let spec = c.bench.trial_spec();
    configure_jobs(spec.jobs);
    let rows = ablation_sweep(&model, &db, &spec, c.axis, &c.values)?;
    c.bench.write(&rows)
}

/// Sizes the global rayon pool; jobs 0 or 1 leaves the default in place
/// (1 never touches rayon at all — batches run on the calling thread).
fn configure_jobs(jobs: usize) {
    if jobs > 1 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
}
