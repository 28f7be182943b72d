//! Nehari projection and retraction-based descent.
//!
//! Every nonzero `w` with `w⁺ ≠ 0` has exactly one multiple `t·w` on the
//! Nehari manifold `N_ε = {N_ε(u) = 0}` when `p > 4`. Descent steps along
//! a tangential direction and maps back with that projection, so the line
//! search is one-dimensional on the manifold. The direction is the
//! tangential Sobolev gradient, optionally reshaped by limited-memory BFGS
//! in the ε-inner product; concentrated solutions on non-symmetric domains
//! drift along nearly flat translation modes that plain gradient steps
//! resolve only linearly.


use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmsError};
use crate::functional::{EnergyBreakdown, Problem, Scalars};
use crate::grid::{dot, Field, Point};
use crate::groundstate::RadialProfile;
use crate::params::Params;
use crate::poisson::CgOptions;
use crate::topo::{barycenter, photograph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentOptions {
    /// Stop when `‖g_tan‖_ε ≤ tol·‖u‖_ε`.
    pub tol: f64,
    /// Required `|N_ε(u)| / ‖u‖²_ε`.
    pub nehari_tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub step_floor: f64,
    /// L-BFGS pairs kept; 0 gives the plain projected gradient.
    pub memory: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-6,
            nehari_tol: 1e-9,
            max_iter: 2000,
            initial_step: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            step_floor: 1e-8,
            memory: 8,
        }
    }
}

impl DescentOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol", self.tol),
            ("nehari_tol", self.nehari_tol),
            ("initial_step", self.initial_step),
            ("armijo", self.armijo),
            ("step_floor", self.step_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(SmsError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(SmsError::InvalidParams(format!("backtrack must lie in (0,1), got {}", self.backtrack)));
        }
        if self.max_iter == 0 {
            return Err(SmsError::InvalidParams("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    StepFloor,
    NegativePart,
    NonPositiveEnergy,
}

/// Outcome of one descent run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub field: Option<Field>,
    /// Path of the `SMSFIELD` dump, when written.
    pub field_path: Option<String>,
    pub energy: EnergyBreakdown,
    /// `‖g_tan‖_ε / ‖u‖_ε` at the final iterate.
    pub grad_norm: f64,
    /// `|N_ε(u)|`
    pub nehari_abs: f64,
    pub norm_sq: f64,
    pub g_eps: f64,
    pub iterations: usize,
    pub barycenter: Point,
    pub min_value: f64,
    pub max_value: f64,
    /// `⟨H u, u⟩_ε`
    pub ray_hessian: f64,
    pub converged: bool,
    pub status: SolveStatus,
    pub poisson_solves: usize,
    pub wall_time_s: f64,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    pub fn field(&self) -> Option<&Field> {
        self.field.as_ref()
    }
}

/// The unique `t > 0` with `A + G t² = B t^{p−2}` (`G` already multiplied by ω).
pub fn project_t(a: f64, g: f64, b: f64, p: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(SmsError::ZeroPositivePart);
    }
    if !(a > 0.0 && g >= 0.0 && p > 4.0) || !(a.is_finite() && g.is_finite() && b.is_finite()) {
        return Err(SmsError::Projection(format!("need A>0, G≥0, p>4; got A={a}, G={g}, p={p}")));
    }
    // f(t)/t² = A/t² + G − B t^{p−4} is strictly decreasing
    let f = |t: f64| a + g * t * t - b * t.powf(p - 2.0);
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e150 {
            return Err(SmsError::Projection("root bracket not found".into()));
        }
    }
    if lo == 0.0 {
        lo = 1.0;
        while f(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-150 {
                return Err(SmsError::Projection("root bracket not found".into()));
            }
        }
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..3 {
        let df = 2.0 * g * t - (p - 2.0) * b * t.powf(p - 3.0);
        let next = t - f(t) / df;
        if !(next > lo * (1.0 - 1e-9) && next < hi * (1.0 + 1e-9)) {
            break;
        }
        t = next;
    }
    let h2 = (2.0 - p) * a + (4.0 - p) * g * t * t;
    if !(h2 < 0.0) {
        return Err(SmsError::Projection(format!("H''(t) = {h2} is not negative")));
    }
    Ok(t)
}

/// Projects `w` onto `N_ε`: returns `t·w`, `t` and the scalars of `w`.
/// The cache learns `ψ(t w) = t² ψ(w)`.
pub(crate) fn retract_raw(problem: &Problem, w: &[f64]) -> Result<(Vec<f64>, f64, Scalars)> {
    if !w.iter().any(|&v| v > 0.0) {
        return Err(SmsError::ZeroPositivePart);
    }
    let omega = problem.params().omega;
    let psi = if omega == 0.0 { vec![0.0; w.len()] } else { problem.psi_vec(w)? };
    let s = problem.scalars_with(w, &psi);
    let t = project_t(s.a, omega * s.g, s.b, problem.params().p)?;
    let u: Vec<f64> = w.iter().map(|v| t * v).collect();
    if omega != 0.0 {
        problem.seed_psi(u.clone(), psi.iter().map(|v| t * t * v).collect());
    }
    Ok((u, t, s))
}

pub fn retract_in(problem: &Problem, w: &Field) -> Result<(Field, f64)> {
    let (u, t, _) = retract_raw(problem, w.values())?;
    Ok((Field::from_values(problem.grid(), u)?, t))
}

/// `t_ε(w)·w` with default solver options.
pub fn retract(w: &Field, params: &Params) -> Result<Field> {
    let problem = Problem::new(w.grid(), *params, CgOptions::default())?;
    retract_in(&problem, w).map(|(u, _)| u)
}

pub fn solve_critical(u0: &Field, params: &Params, opts: &DescentOptions) -> Result<SolveReport> {
    let problem = Problem::new(u0.grid(), *params, CgOptions::default())?;
    solve_critical_in(&problem, u0, opts)
}

/// Two-loop recursion: `−H g` from the stored `(s, y)` pairs.
fn lbfgs_direction(problem: &Problem, g: &[f64], pairs: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * problem.inner_raw(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.last() {
        let gamma = problem.inner_raw(s, y) / problem.inner_raw(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * problem.inner_raw(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Tangential descent with Armijo backtracking on `I_ε ∘ retract`.
///
/// Non-convergence is reported through `converged`/`status`, not as an error.
pub fn solve_critical_in(problem: &Problem, u0: &Field, opts: &DescentOptions) -> Result<SolveReport> {
    opts.validate()?;
    let start = Instant::now();
    let params = *problem.params();
    let (mut u, _, _) = retract_raw(problem, u0.values())?;
    let mut psi = problem.psi_vec(&u)?;
    let mut s = problem.scalars_with(&u, &psi);
    let mut energy = s.energy(&params).total;
    let mut alpha_prev = 0.5 * opts.initial_step;
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut grad_rel;
    let mut iterations = 0;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;

    loop {
        let g = problem.gradient_raw(&u, &psi)?;
        let n = problem.normal_raw(&u, &psi)?;
        let nn = problem.inner_raw(&n, &n);
        let tangent = |v: &mut Vec<f64>| {
            let c = if nn > 0.0 { problem.inner_raw(v, &n) / nn } else { 0.0 };
            for (vi, ni) in v.iter_mut().zip(&n) {
                *vi -= c * ni;
            }
        };
        let mut gt = g;
        tangent(&mut gt);
        let gt2 = problem.inner_raw(&gt, &gt).max(0.0);
        let unorm = s.a.sqrt();
        grad_rel = gt2.sqrt() / unorm;
        let nehari_rel = s.nehari(&params).abs() / s.a;
        if grad_rel <= opts.tol && nehari_rel <= opts.nehari_tol {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        if let Some((u_old, g_old)) = last.take() {
            let sv: Vec<f64> = u.iter().zip(&u_old).map(|(a, b)| a - b).collect();
            let yv: Vec<f64> = gt.iter().zip(&g_old).map(|(a, b)| a - b).collect();
            let sy = problem.inner_raw(&sv, &yv);
            let scale = (problem.inner_raw(&sv, &sv) * problem.inner_raw(&yv, &yv)).sqrt();
            if sy > 1e-10 * scale {
                pairs.push((sv, yv, 1.0 / sy));
                if pairs.len() > opts.memory {
                    pairs.remove(0);
                }
            }
        }
        let mut d = if pairs.is_empty() { gt.iter().map(|v| -v).collect() } else { lbfgs_direction(problem, &gt, &pairs) };
        tangent(&mut d);
        let mut slope = problem.inner_raw(&gt, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = gt.iter().map(|v| -v).collect();
            slope = -gt2;
        }
        let quasi_newton = !pairs.is_empty();

        let mut alpha = if quasi_newton { 1.0 } else { (2.0 * alpha_prev).min(opts.initial_step) };
        let accepted = loop {
            let w: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if w.iter().any(|&v| v > 0.0) {
                let psi_w = if params.omega == 0.0 { vec![0.0; w.len()] } else { problem.psi_vec(&w)? };
                let sw = problem.scalars_with(&w, &psi_w);
                if let Ok(t) = project_t(sw.a, params.omega * sw.g, sw.b, params.p) {
                    let trial = sw.energy_on_ray(t, &params);
                    if trial <= energy + opts.armijo * alpha * slope {
                        break Some((w, psi_w, t));
                    }
                }
            }
            alpha *= opts.backtrack;
            if alpha < opts.step_floor {
                break None;
            }
        };
        let Some((w, psi_w, t)) = accepted else {
            if quasi_newton {
                // stale curvature pairs: restart from the gradient
                pairs.clear();
                continue;
            }
            status = SolveStatus::StepFloor;
            break;
        };
        if opts.memory > 0 {
            last = Some((u.clone(), gt));
        }
        u = w.iter().map(|v| t * v).collect();
        psi = psi_w.iter().map(|v| t * t * v).collect();
        if params.omega != 0.0 {
            problem.seed_psi(u.clone(), psi.clone());
        }
        s = problem.scalars_with(&u, &psi);
        energy = s.energy(&params).total;
        if !quasi_newton {
            alpha_prev = alpha;
        }
        iterations += 1;
        trace.push(TraceEntry { iteration: iterations, energy, grad_norm: grad_rel, step: alpha });
    }

    let field = Field::from_values(problem.grid(), u)?;
    let min_value = field.min_value();
    let max_value = field.max_value();
    let breakdown = s.energy(&params);
    let ray_hessian = problem.ray_hessian(&field)?;
    if status == SolveStatus::Converged {
        if min_value < -1e-8 * max_value {
            status = SolveStatus::NegativePart;
        } else if !(breakdown.total > 0.0) {
            status = SolveStatus::NonPositiveEnergy;
        }
    }
    Ok(SolveReport {
        barycenter: barycenter(&field, params.p)?,
        field: Some(field),
        field_path: None,
        energy: breakdown,
        grad_norm: grad_rel,
        nehari_abs: s.nehari(&params).abs(),
        norm_sq: s.a,
        g_eps: s.g,
        iterations,
        min_value,
        max_value,
        ray_hessian,
        converged: status == SolveStatus::Converged,
        status,
        poisson_solves: problem.poisson_solves(),
        wall_time_s: start.elapsed().as_secs_f64(),
        trace,
    })
}

/// Runs descent from the photograph at every seed, one thread per seed.
///
/// Returns the smallest converged energy and all reports in seed order.
pub fn estimate_m_eps(
    problem: &Problem,
    profile: &RadialProfile,
    seeds: &[Point],
    opts: &DescentOptions,
) -> Result<(f64, Vec<SolveReport>)> {
    let grid = problem.grid().clone();
    let (params, cg) = (*problem.params(), *problem.cg());
    let reports: Vec<Result<SolveReport>> = seeds
        .par_iter()
        .map(|xi| {
            let local = Problem::new(&grid, params, cg)?;
            let photo = photograph(&local, xi, profile)?;
            solve_critical_in(&local, &photo.field, opts)
        })
        .collect();
    let reports: Vec<SolveReport> = reports.into_iter().filter_map(|r| r.ok()).collect();
    let best = reports
        .iter()
        .filter(|r| r.converged)
        .map(|r| r.energy.total)
        .fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(SmsError::AllSeedsFailed);
    }
    Ok((best, reports))
}

/// Two solutions are distinct when their relative L² distance exceeds 0.1
/// or their barycenters are more than `r/2` apart.
pub fn distinct(a: &SolveReport, b: &SolveReport, r: f64) -> bool {
    let shift = (0..3).map(|k| (a.barycenter[k] - b.barycenter[k]).powi(2)).sum::<f64>().sqrt();
    if shift > 0.5 * r {
        return true;
    }
    match (a.field(), b.field()) {
        (Some(u), Some(v)) => {
            let (x, y) = (u.values(), v.values());
            if x.len() != y.len() {
                return true;
            }
            let diff: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            let scale = dot(x, x).sqrt().max(dot(y, y).sqrt());
            diff > 0.1 * scale
        }
        _ => false,
    }
}

/// Indices of one representative per class of converged solutions, lowest
/// energy first.
pub fn distinct_classes(reports: &[SolveReport], r: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..reports.len()).filter(|&i| reports[i].converged).collect();
    order.sort_by(|&i, &j| reports[i].energy.total.total_cmp(&reports[j].energy.total));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| distinct(&reports[i], &reports[k], r)) {
            kept.push(i);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_projections() {
        assert!((project_t(1.0, 0.0, 1.0, 5.0).unwrap() - 1.0).abs() < 1e-12);
        let t = project_t(2.0, 0.0, 1.0, 5.0).unwrap();
        assert!((t - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn tiny_and_huge_roots() {
        for (a, b) in [(1e-8, 1.0), (1e6, 1e-3)] {
            let t = project_t(a, 0.0, b, 4.5).unwrap();
            assert!((t - (a / b).powf(1.0 / 2.5)).abs() <= 1e-11 * t);
        }
    }

    #[test]
    fn zero_positive_part_rejected() {
        assert!(matches!(project_t(1.0, 1.0, 0.0, 5.0), Err(SmsError::ZeroPositivePart)));
    }
}
