//! Experiment drivers behind the `sms` command line.
//!
//! Every driver takes an [`ExperimentConfig`], writes its outputs under the
//! configured directory and returns a record whose tables carry the config
//! hash. Checks that the experiment is expected to pass are collected as
//! [`Assertion`]s rather than aborting the run.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SmsError};
use crate::functional::Problem;
use crate::grid::{build_domain, DomainGrid, DomainShape, Field, Point};
use crate::groundstate::{shoot_ground_state, RadialProfile};
use crate::morse::{lowest_spectrum_in, morse_consistency, MorseSummary, SpectrumReport};
use crate::nehari::{distinct_classes, estimate_m_eps, solve_critical_in, DescentOptions, SolveReport};
use crate::params::Params;
use crate::poisson::{CgOptions, Preconditioner};
use crate::topo::{
    admissible_seeds, barycenter, concentration_fraction, good_partition, in_outer_set, photograph,
    topology_catalog, DomainTopology,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How descent seeds are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeedSpec {
    /// Topology-aware generator; `count` points on rings for shells and tori.
    Auto { count: usize },
    Points { points: Vec<Point> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub shape: DomainShape,
    pub dim: usize,
    /// Fixed spacing; when absent `h = ε / eps_over_h`.
    pub h: Option<f64>,
    pub eps_over_h: f64,
    /// Upper bound on interior nodes; `h` is coarsened to respect it.
    pub max_nodes: usize,
    pub eps: Vec<f64>,
    pub omega: f64,
    pub q: f64,
    pub p: f64,
    pub r: f64,
    pub seeds: SeedSpec,
    /// Perturbed copies of each seed used by the multiplicity run.
    pub perturbations: usize,
    pub perturbation_amplitude: f64,
    /// Energy window `m_∞(1 + δ)` for accepted solutions.
    pub delta: f64,
    pub descent: DescentOptions,
    pub cg: CgOptions,
    pub spectrum_k: usize,
    pub spectrum_tol: f64,
    pub shoot_tol: f64,
    pub out_dir: String,
    pub rng_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            shape: DomainShape::ball(1.0),
            dim: 3,
            h: None,
            eps_over_h: 8.0,
            max_nodes: 96 * 96 * 96,
            eps: vec![0.4, 0.3, 0.2, 0.15],
            omega: 3.0,
            q: 2.0,
            p: 4.3,
            r: 1.0,
            seeds: SeedSpec::Auto { count: 2 },
            perturbations: 3,
            perturbation_amplitude: 0.05,
            delta: 0.1,
            descent: DescentOptions::default(),
            cg: CgOptions { preconditioner: Preconditioner::Ssor, ..CgOptions::default() },
            spectrum_k: 6,
            spectrum_tol: 1e-4,
            shoot_tol: 1e-13,
            out_dir: "sms-out".into(),
            rng_seed: 7,
        }
    }
}

impl ExperimentConfig {
    /// Shell preset: `R_in = 0.2`, `R_out = 1`, two antipodal seeds at ε = 0.15.
    pub fn shell_preset() -> Self {
        ExperimentConfig { shape: DomainShape::shell(0.2, 1.0), eps: vec![0.15], r: 0.4, ..Default::default() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| SmsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn params(&self, eps: f64) -> Result<Params> {
        Params::new(eps, self.omega, self.q, self.p, self.r)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SmsError::Config(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }
        if !(self.dim == 2 || self.dim == 3) {
            return bad(format!("dim must be 2 or 3, got {}", self.dim));
        }
        self.shape.validate(self.dim)?;
        if self.eps.is_empty() {
            return bad("eps list is empty".into());
        }
        for &eps in &self.eps {
            self.params(eps)?;
        }
        if let Some(inradius) = self.shape.inradius(self.dim) {
            // r = inradius leaves the centre as the only admissible seed
            if self.r > inradius {
                return bad(format!("r = {} exceeds the inradius {inradius}", self.r));
            }
        }
        if self.h.is_none() && !(self.eps_over_h >= 4.0) {
            return bad(format!("eps/h must be at least 4, got {}", self.eps_over_h));
        }
        if let Some(h) = self.h {
            if let Some(&e) = self.eps.iter().find(|&&e| e < 4.0 * h) {
                return Err(SmsError::EpsTooSmall { eps: e, h });
            }
        }
        if self.max_nodes == 0 || self.spectrum_k == 0 {
            return bad("max_nodes and spectrum_k must be positive".into());
        }
        if !(self.delta > 0.0 && self.perturbation_amplitude >= 0.0) {
            return bad("delta must be positive and perturbation_amplitude non-negative".into());
        }
        self.descent.validate()?;
        self.cg.validate()?;
        Ok(())
    }

    /// The grid used at a given ε, coarsened if needed to respect `max_nodes`.
    pub fn grid_for(&self, eps: f64) -> Result<Arc<DomainGrid>> {
        let mut h = self.h.unwrap_or(eps / self.eps_over_h);
        loop {
            let grid = build_domain(&self.shape, h, self.dim)?;
            if grid.len() <= self.max_nodes {
                if eps < 4.0 * h {
                    return Err(SmsError::EpsTooSmall { eps, h });
                }
                return Ok(grid);
            }
            h *= (grid.len() as f64 / self.max_nodes as f64).powf(1.0 / self.dim as f64) * 1.001;
        }
    }

    pub fn seed_points(&self) -> Result<Vec<Point>> {
        match &self.seeds {
            SeedSpec::Auto { count } => admissible_seeds(&self.shape, *count),
            SeedSpec::Points { points } => Ok(points.clone()),
        }
    }

    pub fn profile(&self) -> Result<RadialProfile> {
        shoot_ground_state(self.p, self.dim, self.shoot_tol)
    }

    fn out(&self) -> Result<PathBuf> {
        let dir = PathBuf::from(&self.out_dir);
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

/// A named check with its measured value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Assertion { name: name.into(), passed, detail }
    }
}

/// Common header of every run record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub assertions: Vec<Assertion>,
}

impl RunRecord {
    fn start(command: &str, cfg: &ExperimentConfig) -> Self {
        RunRecord {
            command: command.into(),
            config_hash: cfg.hash(),
            version: VERSION.into(),
            started_unix: now(),
            finished_unix: 0,
            assertions: Vec::new(),
        }
    }

    fn finish(&mut self) {
        self.finished_unix = now();
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Saves the field of a report next to its JSON and records the dump path.
fn persist_report(report: &mut SolveReport, dir: &Path, stem: &str) -> Result<()> {
    if let Some(field) = report.field() {
        let path = dir.join(format!("{stem}.smsfield"));
        field.save(&path)?;
        report.field_path = Some(path.to_string_lossy().into_owned());
    }
    write_json(&dir.join(format!("{stem}.json")), report)
}

fn eps_tag(eps: f64) -> String {
    format!("{eps}").replace('.', "p")
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Writes `<out>/groundstate_d<d>_p<p>.{csv,json}`.
pub fn cmd_groundstate(p: f64, d: usize, tol: f64, out: impl AsRef<Path>) -> Result<RadialProfile> {
    let profile = shoot_ground_state(p, d, tol)?;
    profile.export(out, &format!("groundstate_d{d}_p{}", eps_tag(p)))?;
    Ok(profile)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub h: f64,
    pub nodes: usize,
    pub m_eps: Option<f64>,
    pub rel_err: Option<f64>,
    pub g_w: Option<f64>,
    pub t_w: Option<f64>,
    pub i_phi: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub run: RunRecord,
    pub m_inf: f64,
    pub rows: Vec<SweepRow>,
    /// Slope of `log G_ε(W)` against `log ε`.
    pub g_slope: Option<f64>,
    pub reports: Vec<String>,
}

fn sweep_point(
    cfg: &ExperimentConfig,
    profile: &RadialProfile,
    eps: f64,
    dir: &Path,
) -> Result<(SweepRow, Option<String>)> {
    let start = std::time::Instant::now();
    let grid = cfg.grid_for(eps)?;
    let params = cfg.params(eps)?;
    let problem = Problem::new(&grid, params, cfg.cg)?;
    let seeds = cfg.seed_points()?;
    let photo = photograph(&problem, &seeds[0], profile)?;
    let i_phi = problem.energy(&photo.field)?.total;
    let (m_eps, mut reports) = estimate_m_eps(&problem, profile, &seeds, &cfg.descent)?;
    let best = reports
        .iter()
        .position(|r| r.converged && r.energy.total == m_eps)
        .expect("estimate comes from a converged report");
    let stem = format!("sweep_eps{}", eps_tag(eps));
    persist_report(&mut reports[best], dir, &stem)?;
    let row = SweepRow {
        eps,
        h: grid.h(),
        nodes: grid.len(),
        m_eps: Some(m_eps),
        rel_err: Some((m_eps - profile.m_inf).abs() / profile.m_inf),
        g_w: Some(photo.scalars_w.g),
        t_w: Some(photo.t),
        i_phi: Some(i_phi),
        iterations: Some(reports[best].iterations),
        wall_time_s: start.elapsed().as_secs_f64(),
        error: None,
    };
    Ok((row, Some(format!("{stem}.json"))))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

/// Sweeps the ε list: `m_ε`, `G_ε(W)`, `t_ε(W)` and `I_ε(Φ_ε)` per point,
/// written to `sweep.csv` and `sweep.json`. Failed points are recorded and
/// the sweep continues.
pub fn cmd_sweep_eps(cfg: &ExperimentConfig) -> Result<SweepRecord> {
    cfg.validate()?;
    if cfg.eps.len() < 3 {
        return Err(SmsError::Config("sweep needs at least 3 eps values".into()));
    }
    let dir = cfg.out()?;
    let mut run = RunRecord::start("sweep-eps", cfg);
    let profile = cfg.profile()?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &eps in &cfg.eps {
        match sweep_point(cfg, &profile, eps, &dir) {
            Ok((row, rep)) => {
                rows.push(row);
                reports.extend(rep);
            }
            Err(e) => rows.push(SweepRow {
                eps,
                h: cfg.h.unwrap_or(eps / cfg.eps_over_h),
                nodes: 0,
                m_eps: None,
                rel_err: None,
                g_w: None,
                t_w: None,
                i_phi: None,
                iterations: None,
                wall_time_s: 0.0,
                error: Some(e.to_string()),
            }),
        }
    }
    let hash = &run.config_hash;
    let mut csv = String::from("config_hash,eps,h,nodes,m_eps,rel_err,g_w,t_w,i_phi,iterations,error\n");
    for r in &rows {
        csv.push_str(&format!(
            "{hash},{},{},{},{},{},{},{},{},{},{}\n",
            r.eps,
            r.h,
            r.nodes,
            fmt_opt(r.m_eps),
            fmt_opt(r.rel_err),
            fmt_opt(r.g_w),
            fmt_opt(r.t_w),
            fmt_opt(r.i_phi),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    fs::write(dir.join("sweep.csv"), csv)?;

    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let g_slope = (ok.len() >= 2).then(|| {
        let xs: Vec<f64> = ok.iter().map(|r| r.eps.ln()).collect();
        let ys: Vec<f64> = ok.iter().map(|r| r.g_w.unwrap_or(f64::NAN).ln()).collect();
        regression_slope(&xs, &ys)
    });

    run.assertions.push(Assertion::new(
        "all points solved",
        ok.len() == rows.len(),
        format!("{} of {} points", ok.len(), rows.len()),
    ));
    // ε list in the given order is expected to decrease
    let errs: Vec<f64> = ok.iter().filter_map(|r| r.rel_err).collect();
    run.assertions.push(Assertion::new(
        "m_eps error strictly decreasing",
        errs.windows(2).all(|w| w[1] < w[0]),
        format!("{errs:?}"),
    ));
    if let Some(slope) = g_slope {
        run.assertions.push(Assertion::new(
            "G_eps(W) slope in [1.7, 2.3]",
            (1.7..=2.3).contains(&slope),
            format!("{slope:.4}"),
        ));
    }
    if let Some(last) = ok.last() {
        let t = last.t_w.unwrap_or(f64::NAN);
        run.assertions.push(Assertion::new("|t_eps(W) - 1| <= 0.05", (t - 1.0).abs() <= 0.05, format!("{t:.6}")));
        let ratio = last.i_phi.unwrap_or(f64::NAN) / profile.m_inf;
        run.assertions.push(Assertion::new("I(Phi) <= 1.1 m_inf", ratio <= 1.1, format!("{ratio:.6}")));
        let err = last.rel_err.unwrap_or(f64::NAN);
        run.assertions.push(Assertion::new("m_eps error <= 10%", err <= 0.1, format!("{err:.6}")));
    }
    run.finish();
    let record = SweepRecord { run, m_inf: profile.m_inf, rows, g_slope, reports };
    write_json(&dir.join("sweep.json"), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionEntry {
    pub report: String,
    pub field: String,
    pub energy: f64,
    pub energy_ratio: f64,
    pub barycenter: Point,
    pub in_outer_set: bool,
    pub concentration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiplicityRecord {
    pub run: RunRecord,
    pub eps: f64,
    pub h: f64,
    pub nodes: usize,
    pub m_inf: f64,
    pub topology: DomainTopology,
    pub seeds: usize,
    pub converged: usize,
    pub distinct: usize,
    pub solutions: Vec<SolutionEntry>,
    /// Largest barycenter distance between two distinct solutions.
    pub max_separation: f64,
}

/// The ε used by single-ε commands: the smallest in the list.
pub fn working_eps(cfg: &ExperimentConfig) -> f64 {
    cfg.eps.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Initial fields: the photograph at every seed, followed by
/// `perturbations` multiplicatively perturbed copies of each.
fn multiplicity_starts(cfg: &ExperimentConfig, problem: &Problem, profile: &RadialProfile) -> Result<Vec<Field>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut starts = Vec::new();
    for xi in cfg.seed_points()? {
        let base = photograph(problem, &xi, profile)?.field;
        starts.push(base.clone());
        for _ in 0..cfg.perturbations {
            let noise: Vec<f64> = (0..base.len()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let a = cfg.perturbation_amplitude;
            let values = base.values().iter().zip(&noise).map(|(v, z)| v * (1.0 + a * z)).collect();
            starts.push(Field::from_values(problem.grid(), values)?);
        }
    }
    Ok(starts)
}

/// Solves from topology-aware seeds at the working ε, keeps one solution
/// per distinctness class and checks them against the topological bound.
pub fn cmd_multiplicity(cfg: &ExperimentConfig) -> Result<MultiplicityRecord> {
    cfg.validate()?;
    let topology = topology_catalog(&cfg.shape, cfg.dim)?;
    let dir = cfg.out()?;
    let mut run = RunRecord::start("multiplicity", cfg);
    let profile = cfg.profile()?;
    let eps = working_eps(cfg);
    let grid = cfg.grid_for(eps)?;
    let params = cfg.params(eps)?;
    let problem = Problem::new(&grid, params, cfg.cg)?;
    let starts = multiplicity_starts(cfg, &problem, &profile)?;

    let results: Vec<Result<SolveReport>> = starts
        .par_iter()
        .map(|u0| {
            let local = Problem::new(&grid, params, cfg.cg)?;
            solve_critical_in(&local, u0, &cfg.descent)
        })
        .collect();
    let mut reports: Vec<SolveReport> = results.into_iter().collect::<Result<_>>()?;
    let converged = reports.iter().filter(|r| r.converged).count();
    if converged == 0 {
        return Err(SmsError::AllSeedsFailed);
    }
    let classes = distinct_classes(&reports, params.r);

    let mut solutions = Vec::new();
    for (i, &k) in classes.iter().enumerate() {
        let stem = format!("solution_{i}");
        let rep = &mut reports[k];
        let field = rep.field().expect("solver keeps the field");
        let beta = rep.barycenter;
        let concentration = concentration_fraction(field, &beta, 0.5 * params.r, params.p)?;
        persist_report(rep, &dir, &stem)?;
        solutions.push(SolutionEntry {
            report: format!("{stem}.json"),
            field: format!("{stem}.smsfield"),
            energy: rep.energy.total,
            energy_ratio: rep.energy.total / profile.m_inf,
            barycenter: beta,
            in_outer_set: in_outer_set(&beta, &grid, params.r),
            concentration,
        });
    }
    let mut max_separation = 0.0f64;
    for a in &solutions {
        for b in &solutions {
            max_separation = max_separation.max(grid.distance(&a.barycenter, &b.barycenter));
        }
    }

    let distinct = solutions.len();
    run.assertions.push(Assertion::new(
        "distinct solutions >= cat",
        distinct >= topology.cat,
        format!("{distinct} distinct, cat = {}", topology.cat),
    ));
    run.assertions.push(Assertion::new(
        "barycenters in outer set",
        solutions.iter().all(|s| s.in_outer_set),
        format!("{:?}", solutions.iter().map(|s| s.barycenter).collect::<Vec<_>>()),
    ));
    let worst = solutions.iter().map(|s| s.energy_ratio).fold(0.0, f64::max);
    run.assertions.push(Assertion::new(
        "energies <= (1 + delta) m_inf",
        worst <= 1.0 + cfg.delta,
        format!("max I/m_inf = {worst:.6}"),
    ));
    run.finish();
    let record = MultiplicityRecord {
        run,
        eps,
        h: grid.h(),
        nodes: grid.len(),
        m_inf: profile.m_inf,
        topology,
        seeds: starts.len(),
        converged,
        distinct,
        solutions,
        max_separation,
    };
    write_json(&dir.join("multiplicity.json"), &record)?;
    Ok(record)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub config_hash: String,
    pub eps: f64,
    pub nehari_residual: f64,
    pub nehari_relative: f64,
    pub energy: f64,
    /// `(½−1/p)‖u‖²_ε + ω(¼−1/p)G_ε(u)`
    pub energy_identity_g: f64,
    /// `¼‖u‖²_ε + (¼−1/p)|u⁺|^p_{ε,p}`
    pub energy_identity_b: f64,
    pub barycenter: Point,
    pub concentration: f64,
    /// `max_j (1/ε^d)∫_{P_j}|u⁺|^p`
    pub gamma: f64,
    pub partition_cells: usize,
    pub partition_nu: usize,
    pub partition_r2: f64,
    /// `(1/ε^d)|u⁺|^p_p`
    pub normalized_mass: f64,
    /// `2p/(p−2)·m_∞`
    pub mass_reference: f64,
}

/// Diagnostics of a saved solution at ε (the working ε when `None`).
pub fn cmd_diagnose(field_path: impl AsRef<Path>, cfg: &ExperimentConfig, eps: Option<f64>) -> Result<Diagnostics> {
    cfg.validate()?;
    let u = Field::load(&field_path)?;
    if !u.values().iter().any(|&v| v > 0.0) {
        return Err(SmsError::ZeroPositivePart);
    }
    let eps = eps.unwrap_or_else(|| working_eps(cfg));
    let params = cfg.params(eps)?;
    let profile = cfg.profile()?;
    let problem = Problem::new(u.grid(), params, cfg.cg)?;
    let s = problem.scalars(&u)?;
    let p = params.p;
    let energy = s.energy(&params).total;
    let beta = barycenter(&u, p)?;
    let part = good_partition(u.grid(), eps)?;
    let diag = Diagnostics {
        config_hash: cfg.hash(),
        eps,
        nehari_residual: s.nehari(&params),
        nehari_relative: s.nehari(&params).abs() / s.a,
        energy,
        energy_identity_g: (0.5 - 1.0 / p) * s.a + params.omega * (0.25 - 1.0 / p) * s.g,
        energy_identity_b: 0.25 * s.a + (0.25 - 1.0 / p) * s.b,
        barycenter: beta,
        concentration: concentration_fraction(&u, &beta, 0.5 * params.r, p)?,
        gamma: part.max_cell_mass(&u, p),
        partition_cells: part.cells.len(),
        partition_nu: part.nu,
        partition_r2: part.r2,
        normalized_mass: s.b,
        mass_reference: 2.0 * p / (p - 2.0) * profile.m_inf,
    };
    let dir = cfg.out()?;
    let stem = field_path.as_ref().file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    write_json(&dir.join(format!("{stem}.diagnose.json")), &diag)?;
    let mut csv = std::io::BufWriter::new(fs::File::create(dir.join(format!("{stem}.partition.csv")))?);
    part.write_csv(&u, p, &mut csv)?;
    Ok(diag)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseRecord {
    pub run: RunRecord,
    pub spectra: Vec<SpectrumReport>,
    pub summary: MorseSummary,
}

/// Spectra of every solution of a finished multiplicity run in `run_dir`.
/// Each spectrum is also added to its solution's report file.
pub fn cmd_morse(run_dir: impl AsRef<Path>, cfg: &ExperimentConfig) -> Result<MorseRecord> {
    cfg.validate()?;
    let run_dir = run_dir.as_ref();
    let text = fs::read_to_string(run_dir.join("multiplicity.json"))?;
    let mult: MultiplicityRecord = serde_json::from_str(&text)?;
    let params = cfg.params(mult.eps)?;
    let mut run = RunRecord::start("morse", cfg);

    let loaded: Vec<(PathBuf, SolveReport, Field)> = mult
        .solutions
        .iter()
        .map(|s| {
            let rpath = run_dir.join(&s.report);
            let report: SolveReport = serde_json::from_str(&fs::read_to_string(&rpath)?)?;
            let field = Field::load(run_dir.join(&s.field))?;
            Ok((rpath, report, field))
        })
        .collect::<Result<_>>()?;
    let spectra: Vec<SpectrumReport> = loaded
        .par_iter()
        .map(|(_, _, field)| {
            let problem = Problem::new(field.grid(), params, cfg.cg)?;
            lowest_spectrum_in(&problem, field, cfg.spectrum_k, cfg.spectrum_tol)
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::new();
    for ((rpath, report, _), spec) in loaded.into_iter().zip(&spectra) {
        let mut value = serde_json::to_value(&report)?;
        value["spectrum"] = serde_json::to_value(spec)?;
        write_json(&rpath, &value)?;
        entries.push((report, spec.clone()));
    }
    let summary = morse_consistency(&entries, &mult.topology);
    run.assertions.push(Assertion::new(
        "every minimizer has Morse index 1",
        summary.all_index_one,
        format!("{:?}", summary.indices),
    ));
    run.assertions.push(Assertion::new(
        "ray quotient negative",
        spectra.iter().all(|s| s.ray_quotient < 0.0),
        format!("{:?}", spectra.iter().map(|s| s.ray_quotient).collect::<Vec<_>>()),
    ));
    run.finish();
    let record = MorseRecord { run, spectra, summary };
    write_json(&run_dir.join("morse.json"), &record)?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_hash_is_stable() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), cfg.clone().hash());
        let other = ExperimentConfig { omega: 1.0, ..cfg.clone() };
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn config_roundtrip_and_schema() {
        let cfg = ExperimentConfig::shell_preset();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let wrong = ExperimentConfig { schema: 9, ..cfg };
        assert!(matches!(wrong.validate(), Err(SmsError::Config(_))));
    }

    #[test]
    fn rejects_large_cutoff_and_fine_eps() {
        let cfg = ExperimentConfig { r: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { h: Some(0.1), eps: vec![0.3], ..Default::default() };
        assert!(matches!(cfg.validate(), Err(SmsError::EpsTooSmall { .. })));
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [0.4f64, 0.3, 0.2].iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = [0.4f64, 0.3, 0.2].iter().map(|e| (3.0 * e * e).ln()).collect();
        assert!((regression_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
