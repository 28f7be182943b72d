use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sms_core::experiments::{
    cmd_diagnose, cmd_groundstate, cmd_morse, cmd_multiplicity, cmd_sweep_eps, ExperimentConfig, RunRecord,
};
use sms_core::SmsError;

#[derive(Parser)]
#[command(name = "sms", version, about = "Concentrating solutions of a Schrödinger–Maxwell system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the shell preset instead of the ball defaults.
    #[arg(long)]
    shell: bool,
    #[arg(long)]
    out: Option<String>,
    /// Comma separated ε list.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    eps_over_h: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    perturbations: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, SmsError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None if self.shell => ExperimentConfig::shell_preset(),
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = &self.eps {
            cfg.eps = v.clone();
        }
        if let Some(v) = self.eps_over_h {
            cfg.eps_over_h = v;
        }
        if self.h.is_some() {
            cfg.h = self.h;
        }
        if let Some(v) = self.max_nodes {
            cfg.max_nodes = v;
        }
        if let Some(v) = self.p {
            cfg.p = v;
        }
        if let Some(v) = self.omega {
            cfg.omega = v;
        }
        if let Some(v) = self.q {
            cfg.q = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.perturbations {
            cfg.perturbations = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Radial ground state of −ΔU + U = U^{p−1}.
    Groundstate {
        #[arg(long, default_value_t = 4.3)]
        p: f64,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[arg(long, default_value = "sms-out")]
        out: PathBuf,
    },
    /// Least energy level along a decreasing ε list.
    SweepEps(ConfigArgs),
    /// Distinct solutions from topology-aware seeds.
    Multiplicity(ConfigArgs),
    /// Diagnostics of a saved solution.
    Diagnose {
        field: PathBuf,
        #[arg(long = "at-eps")]
        at_eps: Option<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Hessian spectra of a finished multiplicity run.
    Morse {
        run_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn exit_code(err: &SmsError) -> u8 {
    match err {
        SmsError::Config(_)
        | SmsError::InvalidParams(_)
        | SmsError::InvalidShape(_)
        | SmsError::ExponentOutOfRange(_)
        | SmsError::TooCoarse { .. }
        | SmsError::EmptyInterior
        | SmsError::UnknownTopology(_)
        | SmsError::EpsTooSmall { .. } => 2,
        SmsError::CgNonConvergence { .. } | SmsError::AllSeedsFailed => 3,
        _ => 1,
    }
}

fn report(run: &RunRecord) -> ExitCode {
    for a in &run.assertions {
        println!("{} {}: {}", if a.passed { "ok  " } else { "FAIL" }, a.name, a.detail);
    }
    println!("config {}", run.config_hash);
    if run.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    }
}

fn run(cli: Cli) -> Result<ExitCode, SmsError> {
    match cli.command {
        Command::Groundstate { p, dim, tol, out } => {
            let prof = cmd_groundstate(p, dim, tol, &out)?;
            println!("U(0) = {:.12}", prof.u0);
            println!("m_inf = {:.12}", prof.m_inf);
            println!("nehari residual = {:.3e}", prof.nehari_residual);
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepEps(args) => {
            let rec = cmd_sweep_eps(&args.resolve()?)?;
            println!("m_inf = {:.8}", rec.m_inf);
            for r in &rec.rows {
                match (&r.error, r.m_eps, r.rel_err) {
                    (None, Some(m), Some(e)) => println!("eps {:<6} nodes {:<8} m_eps {m:.8} rel_err {e:.5}", r.eps, r.nodes),
                    (err, ..) => println!("eps {:<6} failed: {}", r.eps, err.as_deref().unwrap_or("?")),
                }
            }
            if let Some(s) = rec.g_slope {
                println!("G slope = {s:.4}");
            }
            Ok(report(&rec.run))
        }
        Command::Multiplicity(args) => {
            let rec = cmd_multiplicity(&args.resolve()?)?;
            println!("{} seeds, {} converged, {} distinct (cat = {})", rec.seeds, rec.converged, rec.distinct, rec.topology.cat);
            for s in &rec.solutions {
                println!("  I/m_inf {:.6}  beta {:?}  conc {:.4}", s.energy_ratio, s.barycenter, s.concentration);
            }
            Ok(report(&rec.run))
        }
        Command::Diagnose { field, at_eps, cfg } => {
            let d = cmd_diagnose(&field, &cfg.resolve()?, at_eps)?;
            println!("{}", serde_json::to_string_pretty(&d)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Morse { run_dir, cfg } => {
            let rec = cmd_morse(&run_dir, &cfg.resolve()?)?;
            for s in &rec.spectra {
                println!("index {} near-zero {} eigenvalues {:?}", s.negative_count, s.near_zero_count, s.eigenvalues);
            }
            println!("{}: {}", rec.summary.status, rec.summary.note);
            Ok(report(&rec.run))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("SMS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
