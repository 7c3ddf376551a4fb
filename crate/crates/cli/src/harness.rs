//! The experiment commands behind the CLI.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};
use sparsest_core::models::{gen_dpcp, gen_mcsbd, gen_odl, gen_psv, whiten_instance};
use sparsest_core::rng::seeded;
use sparsest_core::solvers::{
    init_spectral, round_lp, solve_deflated, solve_linf_relaxation, solve_with, Clock, Monitor,
};
use sparsest_core::sphere::sample_uniform_sphere;
use sparsest_core::{
    LossSpec, ModelKind, Objective, ProblemInstance, SolveResult, SolverConfig, SolverKind, Status,
    StepSchedule, TargetSet, UnitVector,
};

use crate::config::{odl_samples, ExperimentConfig, InitKind, KvConfig, ModelParams};
use crate::error::{exit, CliError, Result};
use crate::format::{
    atomic_write, fmt_f64, instance_meta, instance_text, points_text, read_points, summary_text, sweep_text,
    trace_text, PointCloud, SummaryRow, SweepRow,
};

/// Success thresholds reported in run summaries.
pub const SUCCESS_THRESHOLDS: [f64; 3] = [1e-4, 1e-6, 1e-8];

/// Sweep success: final distance at most this.
pub const SWEEP_SUCCESS_DIST: f64 = 1e-4;

/// Relative residuals at or below this count as zero when labeling points.
pub const RESIDUAL_FLOOR: f64 = 1e-8;

pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

pub fn generate(model: &ModelParams, seed: u64) -> Result<ProblemInstance> {
    model.validate()?;
    let inst = match model.kind {
        ModelKind::Dpcp => gen_dpcp(model.n, model.r, model.p1, model.p2, seed)?,
        ModelKind::Odl => gen_odl(model.n, model.p, model.theta, seed)?,
        ModelKind::Psv => gen_psv(model.p, model.n, model.theta, seed)?,
        ModelKind::Mcsbd => gen_mcsbd(model.n, model.p, model.theta, seed)?,
        ModelKind::Custom => return Err(CliError::config("custom instances are read from a file, not generated")),
    };
    Ok(inst)
}

/// Random initial points are drawn from their own stream so that they do not
/// depend on how much randomness the instance generator consumed.
pub fn initial_point(data: &DMatrix<f64>, init: InitKind, seed: u64) -> Result<UnitVector> {
    match init {
        InitKind::Spectral => Ok(init_spectral(data)?),
        InitKind::Random => {
            let mut rng = seeded(seed ^ 0x5eed_1417_c0de_0001);
            Ok(sample_uniform_sphere(data.nrows(), &mut rng)?)
        }
    }
}

/// SHA-256 of the 17-digit rendering of `q`.
pub fn point_hash(q: &UnitVector) -> String {
    let text: Vec<String> = q.as_slice().iter().map(|&x| fmt_f64(x)).collect();
    let digest = Sha256::digest(text.join(",").as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Aggregate statistics of a multi-seed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rows: Vec<SummaryRow>,
    /// Fraction of seeds with final distance at most each threshold.
    pub success: Vec<(f64, f64)>,
    pub median_iters: f64,
}

impl RunSummary {
    pub fn new(rows: Vec<SummaryRow>) -> Self {
        let total = rows.len().max(1) as f64;
        let success = SUCCESS_THRESHOLDS
            .iter()
            .map(|&t| {
                let hits = rows.iter().filter(|r| r.dist.is_some_and(|d| d <= t)).count();
                (t, hits as f64 / total)
            })
            .collect();
        let mut iters: Vec<usize> = rows.iter().map(|r| r.iters).collect();
        iters.sort_unstable();
        let median_iters = match iters.len() {
            0 => f64::NAN,
            m if m % 2 == 1 => iters[m / 2] as f64,
            m => (iters[m / 2 - 1] + iters[m / 2]) as f64 / 2.0,
        };
        RunSummary { rows, success, median_iters }
    }

    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| r.status == Status::SubproblemFail.name()) {
            exit::SOLVER
        } else if self.rows.iter().all(|r| r.status == Status::Converged.name()) {
            exit::OK
        } else {
            exit::NOT_CONVERGED
        }
    }

    pub fn comments(&self) -> Vec<(String, String)> {
        let mut out = vec![("runs".to_string(), self.rows.len().to_string())];
        for (t, rate) in &self.success {
            out.push((format!("success_at_{t:e}"), rate.to_string()));
        }
        out.push(("median_iters".to_string(), self.median_iters.to_string()));
        out
    }

    pub fn line(&self) -> String {
        let parts: Vec<String> = self.comments().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("summary {}", parts.join(" "))
    }
}

fn meta_lines(solver: &SolverKind, config: &SolverConfig, seed: u64, q0: &UnitVector) -> Vec<(String, String)> {
    vec![
        ("solver".to_string(), solver.to_string()),
        ("schedule".to_string(), config.schedule.to_string()),
        ("seed".to_string(), seed.to_string()),
        ("init_sha256".to_string(), point_hash(q0)),
    ]
}

/// One traced solve, optionally finished by LP rounding.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub q0: UnitVector,
    pub result: SolveResult,
    /// The point reported in the summary (rounded when requested).
    pub q_final: UnitVector,
    pub row: SummaryRow,
}

pub fn run_seed(
    cfg: &ExperimentConfig,
    inst: &ProblemInstance,
    seed: u64,
    trace_path: Option<&Path>,
) -> Result<SeedRun> {
    let obj = Objective::new(inst.data.clone(), cfg.loss)?;
    let q0 = initial_point(&inst.data, cfg.init, seed)?;
    let targets = if cfg.dist_tracking { inst.targets.as_ref() } else { None };
    let clock = WallClock::start();
    let mut monitor = Monitor::new().with_targets_opt(targets);
    if cfg.timing {
        monitor = monitor.with_clock(&clock);
    }
    let result = solve_with(cfg.solver, &obj, &q0, &cfg.solver_config, &monitor)?;
    let q_final = if cfg.round_lp {
        round_lp(&obj, &result.q_final, &cfg.solver_config.inner)?
    } else {
        result.q_final.clone()
    };
    let dist = match targets {
        Some(t) => Some(sparsest_core::diagnostics::dist_to_targets(&q_final, t)?),
        None => None,
    };
    let (f, _) = obj.eval(&q_final)?;
    let ms = if cfg.timing { clock.elapsed_ms() } else { 0.0 };
    if let Some(path) = trace_path {
        let mut run_cfg = cfg.clone();
        run_cfg.seeds = vec![seed];
        let meta = meta_lines(&cfg.solver, &cfg.solver_config, seed, &q0);
        let text = trace_text(&result.trace, &meta, &run_cfg.entries(), targets.is_some());
        atomic_write(path, text.as_bytes())?;
    }
    let row = SummaryRow {
        seed,
        dist,
        f,
        iters: result.iterations(),
        ms,
        status: result.status.name().to_string(),
    };
    Ok(SeedRun { seed, q0, result, q_final, row })
}

fn instance_stem(kind: ModelKind, seed: u64) -> String {
    format!("{kind}-seed{seed}")
}

/// Writes `<kind>-seed<seed>.csv` and its `.meta` record for every seed.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for &seed in &cfg.seeds {
        let inst = generate(&cfg.model, seed)?;
        let stem = instance_stem(inst.kind, seed);
        let csv = cfg.output_dir.join(format!("{stem}.csv"));
        atomic_write(&csv, instance_text(&inst).as_bytes())?;
        atomic_write(&cfg.output_dir.join(format!("{stem}.meta")), instance_meta(&inst).as_bytes())?;
        paths.push(csv);
    }
    Ok(paths)
}

/// Solves the configured instance file, or a generated instance per seed.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let loaded = match &cfg.instance {
        Some(path) => {
            let mut inst = crate::format::read_instance(path)?;
            if let Some(tp) = &cfg.targets {
                let t = crate::format::read_instance(tp)?;
                if t.data.nrows() != inst.dim() {
                    return Err(CliError::format(tp, 1, "target rows differ from the instance dimension"));
                }
                let mut columns = t.data;
                for mut c in columns.column_iter_mut() {
                    let norm = c.norm();
                    if !(norm > 0.0) {
                        return Err(CliError::format(tp, 1, "zero target column"));
                    }
                    c /= norm;
                }
                inst.targets = Some(TargetSet::SignedShifts { columns });
            }
            Some(inst)
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let mut inst = match &loaded {
            Some(inst) => inst.clone(),
            None => generate(&cfg.model, seed)?,
        };
        if cfg.whiten {
            inst = whiten_instance(&inst)?;
        }
        let path = cfg.output_dir.join(format!("trace-{}-seed{seed}.csv", cfg.solver.name()));
        rows.push(run_seed(cfg, &inst, seed, Some(&path))?.row);
    }
    let summary = RunSummary::new(rows);
    let text = summary_text(&summary.rows, &summary.comments());
    atomic_write(&cfg.output_dir.join("summary.csv"), text.as_bytes())?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Dpcp,
    Odl,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Dpcp => "dpcp",
            Figure::Odl => "odl",
        }
    }

    pub fn model(self) -> ModelParams {
        match self {
            Figure::Dpcp => ModelParams::defaults(ModelKind::Dpcp),
            Figure::Odl => ModelParams { p: odl_samples(64), ..ModelParams::defaults(ModelKind::Odl) },
        }
    }

    /// Per-solver settings of the convergence comparison.
    pub fn roster(self) -> Vec<KvConfig> {
        let rsg_eta = match self {
            // Subgradients of the DPCP objective have norms in the hundreds.
            Figure::Dpcp => "eta0=0.001 beta=0.9",
            Figure::Odl => "eta0=0.1 beta=0.97",
        };
        let lines = [
            "solver=rgd loss=logcosh mu=0.01 schedule=backtracking max_iters=1000 step_tol=1e-14".to_string(),
            "solver=rtr loss=logcosh mu=0.01 max_iters=200".to_string(),
            format!("solver=rsg loss=l1 schedule=geometric {rsg_eta} max_iters=1000"),
            "solver=manppa loss=l1 manppa_t=1 manppa_alpha=1 max_iters=30".to_string(),
            "solver=irls loss=l1 irls_delta=1e-12 max_iters=100".to_string(),
        ];
        lines
            .iter()
            .map(|l| {
                let pairs: Vec<&str> = l.split_whitespace().collect();
                KvConfig::from_overrides(&pairs).expect("roster entries are key=value")
            })
            .collect()
    }
}

impl std::str::FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dpcp" => Ok(Figure::Dpcp),
            "odl" => Ok(Figure::Odl),
            _ => Err(CliError::config(format!("unknown figure '{s}' (expected dpcp or odl)"))),
        }
    }
}

/// All five solver/loss pairs on one instance from one shared random
/// initial point; one trace per solver plus the initial point itself.
pub fn cmd_reproduce(figure: Figure, base: &KvConfig) -> Result<Vec<PathBuf>> {
    let seed_cfg = ExperimentConfig::resolve(base)?;
    let seed = seed_cfg.seeds[0];
    let model = figure.model();
    let inst = generate(&model, seed)?;
    let mut paths = Vec::new();
    let mut shared: Option<UnitVector> = None;
    for entry in figure.roster() {
        let mut kv = base.clone();
        for (k, v) in model.entries() {
            kv.set(k, v);
        }
        if model.kind == ModelKind::Odl {
            kv.set("p", model.p.to_string());
        }
        kv = kv.merged(&entry);
        kv.set("init", "random");
        kv.set("seeds", seed.to_string());
        let cfg = ExperimentConfig::resolve(&kv)?;
        let path = cfg.output_dir.join(format!("{}-{}.csv", figure.name(), cfg.solver.name()));
        let run = run_seed(&cfg, &inst, seed, Some(&path))?;
        match &shared {
            None => shared = Some(run.q0.clone()),
            Some(q) => debug_assert_eq!(q, &run.q0),
        }
        paths.push(path);
    }
    if let Some(q) = shared {
        let init_path = seed_cfg.output_dir.join(format!("{}-init.csv", figure.name()));
        let text: String = q.as_slice().iter().map(|&x| fmt_f64(x) + "\n").collect();
        atomic_write(&init_path, text.as_bytes())?;
    }
    Ok(paths)
}

/// Indices of the `k` columns of largest norm (ties to the lower index).
pub fn largest_columns(data: &DMatrix<f64>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.ncols()).collect();
    let norms: Vec<f64> = data.column_iter().map(|c| c.norm()).collect();
    idx.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// RSG restarted from normalized large columns of `Y`; the lowest objective
/// wins. The rows of a planted-sparse-vector instance are orthonormal, which
/// leaves the spectral initialization with no preferred direction.
pub fn rsg_multistart(obj: &Objective, starts: usize, config: &SolverConfig) -> Result<UnitVector> {
    let mut best: Option<(f64, UnitVector)> = None;
    for j in largest_columns(obj.data(), starts) {
        let col: DVector<f64> = obj.data().column(j).into_owned();
        let Ok(q0) = UnitVector::normalize(col) else {
            continue;
        };
        let res = solve_with(SolverKind::Rsg, obj, &q0, config, &Monitor::new())?;
        let (f, _) = obj.eval(&res.q_final)?;
        if best.as_ref().map_or(true, |(fb, _)| f < *fb) {
            best = Some((f, res.q_final));
        }
    }
    best.map(|(_, q)| q).ok_or_else(|| CliError::Solver(sparsest_core::Error::NonFinite))
}

pub const SWEEP_METHODS: [&str; 2] = ["linf", "rsg"];

/// Success rates of the l1/l-infinity relaxation and of multistart RSG on
/// planted sparse vector instances, per sparsity level.
pub fn cmd_sweep_psv(cfg: &ExperimentConfig) -> Result<(PathBuf, Vec<SweepRow>)> {
    let ModelParams { n, p, .. } = cfg.model;
    if cfg.thetas.is_empty() {
        return Err(CliError::config("theta grid must be non-empty"));
    }
    let mut rows = Vec::with_capacity(2 * cfg.thetas.len());
    for &theta in &cfg.thetas {
        let mut hits = [0usize; 2];
        for &seed in &cfg.seeds {
            let inst = gen_psv(p, n, theta, seed)?;
            let targets = inst.targets.as_ref().ok_or(CliError::Solver(sparsest_core::Error::MissingTargets))?;
            let obj = Objective::new(inst.data.clone(), LossSpec::l1())?;
            let (lp, _) = solve_linf_relaxation(&obj, &cfg.solver_config)?;
            let rsg = rsg_multistart(&obj, cfg.starts, &cfg.solver_config)?;
            for (i, q) in [&lp.q_final, &rsg].into_iter().enumerate() {
                if sparsest_core::diagnostics::dist_to_targets(q, targets)? <= SWEEP_SUCCESS_DIST {
                    hits[i] += 1;
                }
            }
        }
        for (i, method) in SWEEP_METHODS.iter().enumerate() {
            rows.push(SweepRow {
                theta,
                method: method.to_string(),
                success_rate: hits[i] as f64 / cfg.seeds.len() as f64,
            });
        }
    }
    let path = cfg.output_dir.join("sweep-psv.csv");
    let comments: Vec<(String, String)> =
        cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    atomic_write(&path, sweep_text(&rows, &comments).as_bytes())?;
    Ok((path, rows))
}

pub const INLIER: &str = "inlier";
pub const OUTLIER: &str = "outlier";
pub const SKIPPED: &str = "skipped";

#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    /// Unit normals of the fitted subspace, one per column.
    pub normals: DMatrix<f64>,
    pub labels: Vec<String>,
    /// `max_j |<b_j, y>| / |y|` per point (NaN for skipped points).
    pub residuals: Vec<f64>,
    pub skipped: usize,
}

/// Fits `codim` normals by repeated solve-and-deflate on the normalized
/// nonzero points and labels each point by its relative residual.
pub fn label_points(cloud: &PointCloud, cfg: &ExperimentConfig) -> Result<Labeling> {
    let n = cloud.dim();
    let kept: Vec<usize> = (0..cloud.points.len())
        .filter(|&i| cloud.points[i].iter().any(|&x| x != 0.0))
        .collect();
    if kept.len() < n || n < 2 {
        return Err(CliError::config(format!(
            "need at least n = {n} nonzero points in dimension >= 2, found {}",
            kept.len()
        )));
    }
    if cfg.codim + 1 > n {
        return Err(CliError::config(format!("codim {} must be below the dimension {n}", cfg.codim)));
    }
    let mut data = DMatrix::zeros(n, kept.len());
    for (j, &i) in kept.iter().enumerate() {
        let v = DVector::from_column_slice(&cloud.points[i]);
        let norm = v.norm();
        data.set_column(j, &(v / norm));
    }
    let obj = Objective::new(data, LossSpec::l1())?;
    let found = solve_deflated(&obj, cfg.codim, cfg.solver, &cfg.solver_config)?;
    let mut normals = DMatrix::zeros(n, found.len());
    for (j, b) in found.iter().enumerate() {
        normals.set_column(j, b.as_vector());
    }
    let threshold = cfg.tau.max(RESIDUAL_FLOOR);
    let mut labels = vec![SKIPPED.to_string(); cloud.points.len()];
    let mut residuals = vec![f64::NAN; cloud.points.len()];
    for (j, &i) in kept.iter().enumerate() {
        let y = obj.data().column(j);
        let res = normals.tr_mul(&y).amax();
        residuals[i] = res;
        labels[i] = if res <= threshold { INLIER } else { OUTLIER }.to_string();
    }
    Ok(Labeling { normals, labels, residuals, skipped: cloud.points.len() - kept.len() })
}

/// Writes `<stem>-labeled.csv` with the label column replaced.
pub fn cmd_label_pointcloud(points: &Path, cfg: &ExperimentConfig) -> Result<(PathBuf, Labeling)> {
    let cloud = read_points(points)?;
    let labeling = label_points(&cloud, cfg)?;
    let out = PointCloud {
        points: cloud.points,
        labels: labeling.labels.iter().cloned().map(Some).collect(),
    };
    let stem = points.file_stem().and_then(|s| s.to_str()).unwrap_or("points");
    let path = cfg.output_dir.join(format!("{stem}-labeled.csv"));
    atomic_write(&path, points_text(&out).as_bytes())?;
    Ok((path, labeling))
}

/// The geometric schedule used for RSG on the full-size DPCP problem.
pub const DPCP_RSG_SCHEDULE: StepSchedule = StepSchedule::Geometric { eta0: 1e-3, beta: 0.9, period: 1 };
