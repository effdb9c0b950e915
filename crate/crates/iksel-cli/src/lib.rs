//! Benchmark harness behind the `iksel` binary: reproducible target
//! generation, timed trial batches, ablation sweeps over one configuration
//! axis, and the CSV/JSON report writers.

use iksel::{
    solve, BuildParams, Pose, RobotModel, ScalePreset, SeedDatabase, SelectorConfig, SolverConfig,
    SolverKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

/// Everything a trial batch needs besides the model, database, and targets.
#[derive(Clone, Debug)]
pub struct TrialSpec {
    pub trials: usize,
    pub rng_seed: u64,
    pub solver: SolverConfig,
    pub selector: SelectorConfig,
    /// Worker threads; 1 runs strictly sequentially for timing-sensitive
    /// measurements, 0 uses the rayon default.
    pub jobs: usize,
}

impl TrialSpec {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            trials: 2000,
            rng_seed,
            solver: SolverConfig::new(SolverKind::Dls),
            selector: SelectorConfig::default(),
            jobs: 1,
        }
    }
}

/// One solved target, as it appears in the JSON report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    /// Target pose as position plus rotation vector.
    pub target: [f64; 6],
    pub success: bool,
    pub attempts: u32,
    pub iterations: u32,
    pub solve_ms: f64,
}

/// Aggregate of one batch; one CSV row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub axis_value: String,
    pub success_rate_pct: f64,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub trials: usize,
    pub rng_seed: u64,
    /// SHA-256 over the target poses; sweeps must show the same digest on
    /// every row since they share one frozen target set.
    pub target_digest: String,
    pub records: Vec<TrialRecord>,
}

/// FK poses of `n` uniformly sampled in-limit configurations. Reachable by
/// construction; the generating configurations are discarded.
pub fn generate_targets(model: &RobotModel, n: usize, rng_seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n)
        .map(|_| {
            let q = model.random_config(&mut rng);
            model.forward_kinematics(&q).expect("sampled within limits")
        })
        .collect()
}

pub fn target_digest(targets: &[Pose]) -> String {
    let mut h = Sha256::new();
    for t in targets {
        for v in t.position.iter() {
            h.update(v.to_le_bytes());
        }
        for v in t.rotation.iter() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn target_coords(t: &Pose) -> [f64; 6] {
    let w = t.rotation_vector();
    [
        t.position.x,
        t.position.y,
        t.position.z,
        w.x,
        w.y,
        w.z,
    ]
}

/// Runs one timed batch. The monotonic clock brackets the solve call only;
/// target generation, database residency, and report writing never count.
pub fn run_batch(
    model: &RobotModel,
    db: &SeedDatabase,
    targets: &[Pose],
    spec: &TrialSpec,
) -> iksel::Result<RunSummary> {
    if db.fingerprint() != &model.fingerprint() {
        return Err(iksel::Error::IncompatibleModel);
    }
    spec.solver.validate()?;
    spec.selector.validate()?;

    let solve_one = |(index, target): (usize, &Pose)| -> iksel::Result<TrialRecord> {
        let started = Instant::now();
        let report = solve(model, db, target, &spec.solver, &spec.selector)?;
        let solve_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok(TrialRecord {
            index,
            target: target_coords(target),
            success: report.success(),
            attempts: report.attempts_used,
            iterations: report.iterations_total,
            solve_ms,
        })
    };

    let records: Vec<TrialRecord> = if spec.jobs == 1 {
        targets
            .iter()
            .enumerate()
            .map(solve_one)
            .collect::<iksel::Result<_>>()?
    } else {
        targets
            .par_iter()
            .enumerate()
            .map(solve_one)
            .collect::<iksel::Result<_>>()?
    };

    let n = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let times: Vec<f64> = records.iter().map(|r| r.solve_ms).collect();
    let mean = times.iter().sum::<f64>() / n as f64;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n as f64;

    Ok(RunSummary {
        axis_value: spec.solver.kind.as_str().to_string(),
        success_rate_pct: 100.0 * successes as f64 / n as f64,
        mean_ms: mean,
        std_ms: var.sqrt(),
        min_ms: times.iter().copied().fold(f64::INFINITY, f64::min),
        max_ms: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        trials: n,
        rng_seed: spec.rng_seed,
        target_digest: target_digest(targets),
        records,
    })
}

/// The configuration axes the ablation sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    DatabaseScale,
    SolverKind,
    SelectionMetric,
    ReselectAttempts,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::DatabaseScale => "database_scale",
            SweepAxis::SolverKind => "solver_kind",
            SweepAxis::SelectionMetric => "selection_metric",
            SweepAxis::ReselectAttempts => "reselect_attempts",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = iksel::Error;

    fn from_str(s: &str) -> iksel::Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "database_scale" | "scale" => Ok(SweepAxis::DatabaseScale),
            "solver_kind" | "solver" => Ok(SweepAxis::SolverKind),
            "selection_metric" | "metric" => Ok(SweepAxis::SelectionMetric),
            "reselect_attempts" | "attempts" => Ok(SweepAxis::ReselectAttempts),
            other => Err(iksel::Error::InvalidParameter(format!(
                "unknown sweep axis '{other}'"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Runs one batch per axis value over a single frozen target set (generated
/// once from the spec's seed), so rows differ only in the swept setting.
/// For the database-scale axis each preset gets a freshly built database
/// inheriting the resident one's weight and cutoff; every other axis reuses
/// `db` untouched.
pub fn ablation_sweep(
    model: &RobotModel,
    db: &SeedDatabase,
    base: &TrialSpec,
    axis: SweepAxis,
    values: &[String],
) -> iksel::Result<Vec<RunSummary>> {
    if values.is_empty() {
        return Err(iksel::Error::InvalidParameter(
            "sweep needs at least one axis value".into(),
        ));
    }
    let targets = generate_targets(model, base.trials, base.rng_seed);
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut spec = base.clone();
        let mut scale_db = None;
        match axis {
            SweepAxis::DatabaseScale => {
                let preset: ScalePreset = value.parse()?;
                let params = BuildParams {
                    rotation_weight: db.rotation_weight(),
                    rel_cutoff: db.rel_cutoff(),
                    ..BuildParams::new(preset.divisions(model.dof())?)
                };
                scale_db = Some(SeedDatabase::build(model, &params)?);
            }
            SweepAxis::SolverKind => spec.solver.kind = value.parse()?,
            SweepAxis::SelectionMetric => spec.selector.metric = value.parse()?,
            SweepAxis::ReselectAttempts => {
                spec.selector.max_attempts = value.parse().map_err(|_| {
                    iksel::Error::InvalidParameter(format!(
                        "reselect-attempts value '{value}' is not an integer"
                    ))
                })?;
            }
        }
        let mut row = run_batch(model, scale_db.as_ref().unwrap_or(db), &targets, &spec)?;
        row.axis_value = canonical_axis_value(axis, value, &spec);
        rows.push(row);
    }
    Ok(rows)
}

fn canonical_axis_value(axis: SweepAxis, raw: &str, spec: &TrialSpec) -> String {
    match axis {
        SweepAxis::DatabaseScale => raw
            .parse::<ScalePreset>()
            .map(|p| p.as_str().to_string())
            .unwrap_or_else(|_| raw.to_string()),
        SweepAxis::SolverKind => spec.solver.kind.as_str().to_string(),
        SweepAxis::SelectionMetric => spec.selector.metric.as_str().to_string(),
        SweepAxis::ReselectAttempts => spec.selector.max_attempts.to_string(),
    }
}

pub fn write_csv(rows: &[RunSummary], mut out: impl Write) -> std::io::Result<()> {
    writeln!(
        out,
        "axis_value,success_rate_pct,mean_ms,std_ms,min_ms,max_ms,trials,rng_seed"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.axis_value,
            r.success_rate_pct,
            r.mean_ms,
            r.std_ms,
            r.min_ms,
            r.max_ms,
            r.trials,
            r.rng_seed
        )?;
    }
    Ok(())
}

/// Owned mirror of the JSON report layout, for readers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<RunSummary>,
}

#[derive(Serialize)]
struct BorrowedReport<'a> {
    rows: &'a [RunSummary],
}

pub fn write_json(rows: &[RunSummary], out: impl Write) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, &BorrowedReport { rows })
}

pub fn write_report(
    rows: &[RunSummary],
    format: ReportFormat,
    path: Option<&Path>,
) -> iksel::Result<()> {
    let render = |out: &mut dyn Write| -> iksel::Result<()> {
        match format {
            ReportFormat::Csv => write_csv(rows, out)?,
            ReportFormat::Json => {
                write_json(rows, &mut *out).map_err(std::io::Error::from)?;
                writeln!(out)?;
            }
        }
        Ok(())
    };
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p)?;
            render(&mut f)
        }
        None => render(&mut std::io::stdout().lock()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = iksel::Error;

    fn from_str(s: &str) -> iksel::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(iksel::Error::InvalidParameter(format!(
                "unknown report format '{other}' (expected csv or json)"
            ))),
        }
    }
}
