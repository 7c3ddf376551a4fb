use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sparsest::harness::{self, Figure};
use sparsest::{exit, ExperimentConfig, KvConfig, Result};

#[derive(Parser, Debug)]
#[command(name = "sparsest", version, about = "Sparsest vector in a subspace: generate, solve, reproduce, sweep, label")]
struct Cli {
    /// Single seed (replaces the configured seed list).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key=value config file, or a trace CSV whose embedded config to reuse.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write instance CSVs and metadata records.
    Gen {
        /// key=value overrides.
        overrides: Vec<String>,
    },
    /// Run the configured solver over the seeds.
    Solve {
        /// Instance CSV (generated from the config when omitted).
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Matrix CSV of signed target columns for a custom instance.
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long, value_parser = ["on", "off"])]
        dist_tracking: Option<String>,
        overrides: Vec<String>,
    },
    /// Convergence traces of all five solvers on the DPCP or ODL setup.
    Reproduce {
        which: String,
        overrides: Vec<String>,
    },
    /// l1/l-infinity relaxation versus RSG on planted sparse vectors.
    SweepPsv {
        overrides: Vec<String>,
    },
    /// Label points as on/off a fitted subspace.
    LabelPointcloud {
        points: PathBuf,
        #[arg(long)]
        codim: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        overrides: Vec<String>,
    },
}

fn layered(cli: &Cli, defaults: &[(&str, &str)], extra: &[(&str, String)], overrides: &[String]) -> Result<KvConfig> {
    let mut kv = KvConfig::new();
    for (k, v) in defaults {
        kv.set(k, *v);
    }
    if let Some(path) = &cli.config {
        kv = kv.merged(&KvConfig::load(path)?);
    }
    if let Some(seed) = cli.seed {
        kv.set("seeds", seed.to_string());
    }
    if let Some(out) = &cli.out {
        kv.set("output_dir", out.display().to_string());
    }
    for (k, v) in extra {
        kv.set(k, v.clone());
    }
    Ok(kv.merged(&KvConfig::from_overrides(overrides)?))
}

fn run(cli: &Cli) -> Result<i32> {
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match &cli.cmd {
        Command::Gen { overrides } => {
            let cfg = ExperimentConfig::resolve(&layered(cli, &[], &[], overrides)?)?;
            for p in harness::cmd_gen(&cfg)? {
                say(format!("wrote {}", p.display()));
            }
            Ok(exit::OK)
        }
        Command::Solve { instance, targets, dist_tracking, overrides } => {
            let mut extra: Vec<(&str, String)> = dist_tracking.iter().map(|v| ("dist_tracking", v.clone())).collect();
            if let Some(p) = instance {
                extra.push(("instance", p.display().to_string()));
            }
            if let Some(p) = targets {
                extra.push(("targets", p.display().to_string()));
            }
            let cfg = ExperimentConfig::resolve(&layered(cli, &[], &extra, overrides)?)?;
            let summary = harness::cmd_solve(&cfg)?;
            say(summary.line());
            Ok(summary.exit_code())
        }
        Command::Reproduce { which, overrides } => {
            let figure: Figure = which.parse()?;
            let kv = layered(cli, &[], &[], overrides)?;
            for p in harness::cmd_reproduce(figure, &kv)? {
                say(format!("wrote {}", p.display()));
            }
            Ok(exit::OK)
        }
        Command::SweepPsv { overrides } => {
            let defaults = [("model", "psv"), ("n", "10"), ("p", "1000"), ("seeds", "0..20"), ("solver", "rsg")];
            let cfg = ExperimentConfig::resolve(&layered(cli, &defaults, &[], overrides)?)?;
            let (path, rows) = harness::cmd_sweep_psv(&cfg)?;
            for r in &rows {
                say(format!("theta={} {} {}", r.theta, r.method, r.success_rate));
            }
            say(format!("wrote {}", path.display()));
            Ok(exit::OK)
        }
        Command::LabelPointcloud { points, codim, tau, overrides } => {
            let mut extra = Vec::new();
            if let Some(c) = codim {
                extra.push(("codim", c.to_string()));
            }
            if let Some(t) = tau {
                extra.push(("tau", t.to_string()));
            }
            let defaults = [("model", "custom"), ("solver", "irls"), ("max_iters", "100"), ("codim", "1")];
            let cfg = ExperimentConfig::resolve(&layered(cli, &defaults, &extra, overrides)?)?;
            let (path, labeling) = harness::cmd_label_pointcloud(points, &cfg)?;
            if labeling.skipped > 0 {
                eprintln!("warning: skipped {} all-zero points", labeling.skipped);
            }
            let inliers = labeling.labels.iter().filter(|l| *l == harness::INLIER).count();
            say(format!("{inliers} inliers of {} points; wrote {}", labeling.labels.len(), path.display()));
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
