//! Flat `key=value` configuration. Sources are layered (defaults, config
//! file, command-line flags, trailing overrides) and the last one wins.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sparsest_core::{LossKind, LossSpec, ModelKind, SolverConfig, SolverKind, StepSchedule};

use crate::error::{CliError, Result};

/// Raw layered settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        KvConfig::default()
    }

    pub fn parse_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = KvConfig::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::format(origin, i + 1, format!("expected key=value, got '{line}'")))?;
            cfg.set(k.trim(), v.trim());
        }
        Ok(cfg)
    }

    /// Loads a config file. A trace CSV is accepted too: its embedded
    /// config reproduces the run.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if text.lines().any(|l| l.starts_with("iter,")) {
            return Ok(crate::format::read_trace(path)?.config);
        }
        KvConfig::parse_text(&text, path)
    }

    /// Parses `key=value` command-line overrides.
    pub fn from_overrides<S: AsRef<str>>(args: &[S]) -> Result<Self> {
        let mut cfg = KvConfig::new();
        for a in args {
            let a = a.as_ref();
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("override '{a}' is not key=value")))?;
            cfg.set(k.trim(), v.trim());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_ascii_lowercase().replace('-', "_"), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Layers `other` on top of `self`.
    pub fn merged(mut self, other: &KvConfig) -> Self {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None | Some("") | Some("auto") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::config(format!("{key}: cannot parse '{v}'"))),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn switch(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None | Some("") => Ok(default),
            Some("on") | Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("off") | Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(CliError::config(format!("{key}: expected on/off, got '{v}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Spectral,
    Random,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Spectral => "spectral",
            InitKind::Random => "random",
        }
    }
}

/// Model generation parameters. Unused fields stay at their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub n: usize,
    /// Samples (psv, odl) or channels (mcsbd); derived as p1 + p2 for dpcp.
    pub p: usize,
    pub r: usize,
    pub p1: usize,
    pub p2: usize,
    pub theta: f64,
}

impl ModelParams {
    pub fn defaults(kind: ModelKind) -> Self {
        let base = ModelParams { kind, n: 10, p: 1000, r: 1, p1: 0, p2: 0, theta: 0.1 };
        match kind {
            ModelKind::Dpcp => ModelParams { n: 100, p: 5000, r: 60, p1: 1500, p2: 3500, ..base },
            ModelKind::Odl => ModelParams { n: 64, p: odl_samples(64), theta: 0.25, ..base },
            ModelKind::Mcsbd => ModelParams { n: 32, p: 64, theta: 0.2, ..base },
            ModelKind::Psv | ModelKind::Custom => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(CliError::config(format!("n must be at least 2 (got n = {n})")));
        }
        match self.kind {
            ModelKind::Dpcp => {
                if self.r < 1 || self.r >= n {
                    return Err(CliError::config(format!(
                        "dpcp requires 1 <= r < n (got r = {}, n = {n})",
                        self.r
                    )));
                }
                if self.p1 + self.p2 == 0 {
                    return Err(CliError::config("dpcp requires p1 + p2 >= 1"));
                }
            }
            ModelKind::Psv if self.p <= n => {
                return Err(CliError::config(format!("psv requires p > n (got p = {}, n = {n})", self.p)));
            }
            _ => {}
        }
        if matches!(self.kind, ModelKind::Psv | ModelKind::Odl | ModelKind::Mcsbd)
            && !(self.theta > 0.0 && self.theta <= 1.0)
        {
            return Err(CliError::config(format!("theta must lie in (0, 1] (got {})", self.theta)));
        }
        Ok(())
    }

    /// `key=value` pairs meaningful for this model.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("model", self.kind.name().to_string()), ("n", self.n.to_string())];
        match self.kind {
            ModelKind::Dpcp => {
                out.push(("r", self.r.to_string()));
                out.push(("p1", self.p1.to_string()));
                out.push(("p2", self.p2.to_string()));
            }
            ModelKind::Custom => {}
            _ => {
                out.push(("p", self.p.to_string()));
                out.push(("theta", num(self.theta)));
            }
        }
        out
    }
}

/// `ceil(10 n^{1.5})`
pub fn odl_samples(n: usize) -> usize {
    (10.0 * (n as f64).powf(1.5)).ceil() as usize
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub loss: LossSpec,
    pub solver: SolverKind,
    pub solver_config: SolverConfig,
    pub init: InitKind,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Record wall-clock times; off gives byte-reproducible outputs.
    pub timing: bool,
    pub dist_tracking: bool,
    /// Finish each solve with one LP rounding step.
    pub round_lp: bool,
    pub whiten: bool,
    /// Instance CSV to solve instead of generating one per seed.
    pub instance: Option<PathBuf>,
    /// Matrix CSV of signed target columns for a custom instance.
    pub targets: Option<PathBuf>,
    /// PSV sweep grid.
    pub thetas: Vec<f64>,
    /// PSV sweep: RSG restarts from the largest-norm columns.
    pub starts: usize,
    /// Point-cloud labeling: number of normals and residual threshold.
    pub codim: usize,
    pub tau: f64,
}

pub const KNOWN_KEYS: &[&str] = &[
    "model", "n", "p", "r", "p1", "p2", "theta", "loss", "mu", "solver", "manppa_t", "manppa_alpha",
    "irls_delta", "max_iters", "grad_tol", "step_tol", "schedule", "eta0", "beta", "period", "exponent",
    "shrink", "armijo", "inner_rho", "inner_tol", "inner_max_iters", "tr_delta0", "tr_delta_max", "tr_rho1",
    "tr_rho2", "tr_cg_reduction", "init", "seeds", "output_dir", "timing", "dist_tracking", "round_lp",
    "whiten", "instance", "targets", "thetas", "starts", "codim", "tau",
];

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::config(format!("seeds: cannot parse '{s}' (use a list '1,2,3' or a range '0..20')"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(CliError::config("seeds must be non-empty"));
    }
    Ok(seeds)
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| CliError::config(format!("{key}: cannot parse '{t}'"))))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(CliError::config(format!("{key} must be non-empty")));
    }
    Ok(out)
}

/// Shortest round-tripping text, in exponent form for very small or large
/// magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-3..1e7).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

fn parse_loss_kind(s: &str) -> Result<LossKind> {
    match s {
        "l1" => Ok(LossKind::L1),
        "huber" => Ok(LossKind::Huber),
        "pseudo_huber" | "pseudo-huber" | "pseudohuber" => Ok(LossKind::PseudoHuber),
        "logcosh" => Ok(LossKind::LogCosh),
        _ => Err(CliError::config(format!("unknown loss '{s}'"))),
    }
}

pub fn loss_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::L1 => "l1",
        LossKind::Huber => "huber",
        LossKind::PseudoHuber => "pseudo_huber",
        LossKind::LogCosh => "logcosh",
    }
}

fn schedule_name(s: &StepSchedule) -> &'static str {
    match s {
        StepSchedule::Constant { .. } => "constant",
        StepSchedule::PolyDecay { .. } => "poly",
        StepSchedule::Geometric { .. } => "geometric",
        StepSchedule::Backtracking { .. } => "backtracking",
    }
}

impl ExperimentConfig {
    pub fn resolve(kv: &KvConfig) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(CliError::config(format!("unknown key '{k}'")));
        }
        let kind: ModelKind = match kv.get("model") {
            None | Some("") => ModelKind::Dpcp,
            Some(m) => m.parse().map_err(|_| CliError::config(format!("unknown model '{m}'")))?,
        };
        let d = ModelParams::defaults(kind);
        let mut model = ModelParams {
            kind,
            n: kv.or("n", d.n)?,
            p: d.p,
            r: kv.or("r", d.r)?,
            p1: kv.or("p1", d.p1)?,
            p2: kv.or("p2", d.p2)?,
            theta: kv.or("theta", d.theta)?,
        };
        model.p = match kind {
            ModelKind::Dpcp => model.p1 + model.p2,
            ModelKind::Odl => kv.or("p", odl_samples(model.n))?,
            _ => kv.or("p", d.p)?,
        };
        model.validate()?;

        let solver = match kv.get("solver").unwrap_or("rsg") {
            "manppa" => SolverKind::ManPpa {
                t: kv.or("manppa_t", 1.0)?,
                alpha: kv.or("manppa_alpha", 1.0)?,
            },
            "irls" => SolverKind::Irls { delta: kv.or("irls_delta", 1e-12)? },
            name => SolverKind::from_name(name).map_err(CliError::from)?,
        };

        let loss_kind = match kv.parsed::<String>("loss")? {
            Some(s) => parse_loss_kind(&s)?,
            None if solver.uses_l1() => LossKind::L1,
            None => LossKind::LogCosh,
        };
        let mu = kv.or("mu", sparsest_core::loss::DEFAULT_MU)?;
        let loss = if loss_kind == LossKind::L1 {
            LossSpec::l1()
        } else {
            LossSpec::new(loss_kind, mu)?
        };

        let schedule_kind = kv.parsed::<String>("schedule")?.unwrap_or_else(|| {
            if solver == SolverKind::Rgd { "backtracking".into() } else { "geometric".into() }
        });
        let schedule = match schedule_kind.as_str() {
            "constant" => StepSchedule::Constant { eta: kv.or("eta0", 0.1)? },
            "poly" => StepSchedule::PolyDecay {
                eta0: kv.or("eta0", 0.1)?,
                exponent: kv.or("exponent", 0.5)?,
            },
            "geometric" => StepSchedule::Geometric {
                eta0: kv.or("eta0", 0.1)?,
                beta: kv.or("beta", 0.97)?,
                period: kv.or("period", 1)?,
            },
            "backtracking" => StepSchedule::Backtracking {
                eta0: kv.or("eta0", 1.0)?,
                shrink: kv.or("shrink", 0.5)?,
                armijo: kv.or("armijo", 1e-4)?,
            },
            other => return Err(CliError::config(format!("unknown schedule '{other}'"))),
        };
        let base = SolverConfig::default();
        let mut sc = base.with_schedule(schedule);
        sc.max_iters = kv.or("max_iters", base.max_iters)?;
        sc.grad_tol = kv.or("grad_tol", base.grad_tol)?;
        sc.step_tol = kv.or("step_tol", base.step_tol)?;
        sc.inner.rho = kv.or("inner_rho", base.inner.rho)?;
        sc.inner.tol = kv.or("inner_tol", base.inner.tol)?;
        sc.inner.max_iters = kv.or("inner_max_iters", base.inner.max_iters)?;
        sc.tr.delta0 = kv.or("tr_delta0", base.tr.delta0)?;
        sc.tr.delta_max = kv.or("tr_delta_max", base.tr.delta_max)?;
        sc.tr.rho1 = kv.or("tr_rho1", base.tr.rho1)?;
        sc.tr.rho2 = kv.or("tr_rho2", base.tr.rho2)?;
        sc.tr.cg_reduction = kv.or("tr_cg_reduction", base.tr.cg_reduction)?;
        sc.validate()?;

        let init = match kv.get("init").unwrap_or("spectral") {
            "spectral" => InitKind::Spectral,
            "random" => InitKind::Random,
            other => return Err(CliError::config(format!("unknown init '{other}'"))),
        };
        let seeds = parse_seeds(kv.get("seeds").unwrap_or("0"))?;
        let thetas = parse_list("thetas", kv.get("thetas").unwrap_or("0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5"))?;
        let starts = kv.or("starts", 10usize)?;
        if starts == 0 {
            return Err(CliError::config("starts must be positive"));
        }
        let tau: f64 = kv.or("tau", 0.05)?;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(CliError::config("tau must be nonnegative"));
        }
        let codim = kv.or("codim", 1usize)?;
        if codim == 0 {
            return Err(CliError::config("codim must be positive"));
        }
        Ok(ExperimentConfig {
            model,
            loss,
            solver,
            solver_config: sc,
            init,
            seeds,
            output_dir: PathBuf::from(kv.get("output_dir").unwrap_or(".")),
            timing: kv.switch("timing", true)?,
            dist_tracking: kv.switch("dist_tracking", true)?,
            round_lp: kv.switch("round_lp", false)?,
            whiten: kv.switch("whiten", false)?,
            instance: kv.parsed::<String>("instance")?.map(PathBuf::from),
            targets: kv.parsed::<String>("targets")?.map(PathBuf::from),
            thetas,
            starts,
            codim,
            tau,
        })
    }

    /// Every resolved setting, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = match &self.instance {
            Some(path) => {
                let mut v = vec![("instance", path.display().to_string())];
                if let Some(t) = &self.targets {
                    v.push(("targets", t.display().to_string()));
                }
                v
            }
            None => self.model.entries(),
        };
        out.push(("loss", loss_name(self.loss.kind()).to_string()));
        if !self.loss.is_l1() {
            out.push(("mu", num(self.loss.mu())));
        }
        out.push(("solver", self.solver.name().to_string()));
        match self.solver {
            SolverKind::ManPpa { t, alpha } => {
                out.push(("manppa_t", num(t)));
                out.push(("manppa_alpha", num(alpha)));
            }
            SolverKind::Irls { delta } => out.push(("irls_delta", num(delta))),
            _ => {}
        }
        let sc = &self.solver_config;
        out.push(("max_iters", sc.max_iters.to_string()));
        out.push(("grad_tol", num(sc.grad_tol)));
        out.push(("step_tol", num(sc.step_tol)));
        out.push(("schedule", schedule_name(&sc.schedule).to_string()));
        match sc.schedule {
            StepSchedule::Constant { eta } => out.push(("eta0", num(eta))),
            StepSchedule::PolyDecay { eta0, exponent } => {
                out.push(("eta0", num(eta0)));
                out.push(("exponent", num(exponent)));
            }
            StepSchedule::Geometric { eta0, beta, period } => {
                out.push(("eta0", num(eta0)));
                out.push(("beta", num(beta)));
                out.push(("period", period.to_string()));
            }
            StepSchedule::Backtracking { eta0, shrink, armijo } => {
                out.push(("eta0", num(eta0)));
                out.push(("shrink", num(shrink)));
                out.push(("armijo", num(armijo)));
            }
        }
        out.push(("inner_rho", num(sc.inner.rho)));
        out.push(("inner_tol", num(sc.inner.tol)));
        out.push(("inner_max_iters", sc.inner.max_iters.to_string()));
        out.push(("tr_delta0", num(sc.tr.delta0)));
        out.push(("tr_delta_max", num(sc.tr.delta_max)));
        out.push(("tr_rho1", num(sc.tr.rho1)));
        out.push(("tr_rho2", num(sc.tr.rho2)));
        out.push(("tr_cg_reduction", num(sc.tr.cg_reduction)));
        out.push(("init", self.init.name().to_string()));
        out.push(("seeds", self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")));
        out.push(("output_dir", self.output_dir.display().to_string()));
        let sw = |b: bool| if b { "on" } else { "off" }.to_string();
        out.push(("timing", sw(self.timing)));
        out.push(("dist_tracking", sw(self.dist_tracking)));
        out.push(("round_lp", sw(self.round_lp)));
        out.push(("whiten", sw(self.whiten)));
        out.push(("thetas", join(&self.thetas)));
        out.push(("starts", self.starts.to_string()));
        out.push(("codim", self.codim.to_string()));
        out.push(("tau", num(self.tau)));
        out
    }

    /// The resolved settings as a config source; resolving it again gives
    /// back the same experiment.
    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        for (k, v) in self.entries() {
            kv.set(k, v);
        }
        kv
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
