//! Spectral diagnostics of `I''_ε` at critical points.
//!
//! The Hessian representative `φ ↦ hess_vec(u, φ)` is self-adjoint in
//! `⟨·,·⟩_ε`, so Lanczos in that inner product gives its extreme eigenvalues
//! from products alone. The spectrum accumulates at 1 from the identity part;
//! the interesting part is the bottom: one negative eigenvalue per Nehari
//! direction and a cluster of near-zero modes on symmetric domains.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmsError};
use crate::functional::Problem;
use crate::grid::Field;
use crate::nehari::SolveReport;
use crate::topo::DomainTopology;

/// Relative threshold below which an eigenvalue counts as zero.
pub const DEGENERACY_TOL: f64 = 1e-6;
const MAX_K: usize = 12;
const MEMORY_BUDGET: usize = 1 << 29;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Lowest Ritz values, ascending.
    pub eigenvalues: Vec<f64>,
    /// `‖H y − λ y‖_ε` of each returned pair.
    pub residuals: Vec<f64>,
    pub accepted: Vec<bool>,
    /// Morse index estimate: eigenvalues below `−zero_tol`.
    pub negative_count: usize,
    /// Eigenvalues with `|λ| < zero_tol`.
    pub near_zero_count: usize,
    pub lambda_max: f64,
    pub zero_tol: f64,
    /// `⟨H u, u⟩_ε / ⟨u, u⟩_ε`
    pub ray_quotient: f64,
    pub lanczos_steps: usize,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// The `k` lowest eigenpairs of the ε-Hessian at `u`, with residuals
/// certified by one extra product per pair.
pub fn lowest_spectrum_in(problem: &Problem, u: &Field, k: usize, tol: f64) -> Result<SpectrumReport> {
    if k == 0 || k > MAX_K {
        return Err(SmsError::InvalidParams(format!("k must lie in 1..={MAX_K}, got {k}")));
    }
    if !(tol > 0.0) {
        return Err(SmsError::InvalidParams("spectrum tolerance must be positive".into()));
    }
    if u.is_zero() {
        return Err(SmsError::ZeroField);
    }
    let n = u.len();
    let uv = u.values();
    let psi = problem.psi_vec(uv)?;
    let h = |phi: &[f64]| problem.hess_vec_raw(uv, &psi, phi);
    let inner = |a: &[f64], b: &[f64]| problem.inner_raw(a, b);

    let hu = h(uv)?;
    let ray_quotient = inner(&hu, uv) / inner(uv, uv);

    let max_steps = (MEMORY_BUDGET / (8 * n.max(1))).clamp(2 * k + 10, 300).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    // include u so the negative Nehari direction is present from the start
    let un = inner(uv, uv).sqrt();
    axpy(&mut v, 1.0 / un, uv);
    let nv = inner(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);

    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut ritz: Option<(Vec<f64>, DMatrix<f64>)> = None;

    for j in 0..max_steps {
        let mut w = h(&basis[j])?;
        let a = inner(&w, &basis[j]);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&w, b);
                axpy(&mut w, -c, b);
            }
        }
        let bnorm = inner(&w, &w).max(0.0).sqrt();
        let m = j + 1;
        let done = bnorm <= 1e-12 * a.abs().max(1.0) || m == max_steps;
        if m >= k && (m % 5 == 0 || done) {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vecs = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
            let converged = (0..k).all(|i| (bnorm * vecs[(m - 1, i)]).abs() <= 0.1 * tol * (vals[i].abs() + 1.0));
            ritz = Some((vals, vecs));
            if converged || done {
                break;
            }
        }
        beta.push(bnorm);
        w.iter_mut().for_each(|x| *x /= bnorm);
        basis.push(w);
    }
    let (vals, vecs) = ritz.ok_or_else(|| SmsError::InvalidParams("Lanczos produced no Ritz values".into()))?;
    let m = vecs.nrows();
    let lambda_max = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let zero_tol = DEGENERACY_TOL * lambda_max;

    let mut eigenvalues = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut accepted = Vec::with_capacity(k);
    for i in 0..k.min(m) {
        let mut y = vec![0.0; n];
        for (r, b) in basis.iter().take(m).enumerate() {
            axpy(&mut y, vecs[(r, i)], b);
        }
        let mut res = h(&y)?;
        axpy(&mut res, -vals[i], &y);
        let rn = inner(&res, &res).max(0.0).sqrt() / inner(&y, &y).sqrt();
        eigenvalues.push(vals[i]);
        residuals.push(rn);
        accepted.push(rn <= tol * vals[i].abs() + tol);
    }
    let negative_count = eigenvalues.iter().filter(|&&l| l < -zero_tol).count();
    let near_zero_count = eigenvalues.iter().filter(|&&l| l.abs() < zero_tol).count();
    Ok(SpectrumReport {
        eigenvalues,
        residuals,
        accepted,
        negative_count,
        near_zero_count,
        lambda_max,
        zero_tol,
        ray_quotient,
        lanczos_steps: m,
    })
}

pub fn lowest_spectrum(u: &Field, params: &crate::Params, k: usize, tol: f64) -> Result<SpectrumReport> {
    let problem = Problem::new(u.grid(), *params, crate::CgOptions::default())?;
    lowest_spectrum_in(&problem, u, k, tol)
}

/// Outcome of comparing observed Morse indices with the topological bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseSummary {
    pub status: String,
    /// Observed Morse indices, one per distinct solution.
    pub indices: Vec<usize>,
    /// Coefficients of `t P_t + t²(P_t − 1)`, lowest degree first.
    pub required: Vec<i64>,
    /// Coefficients of `Σ t^{μ(u)}` over the found solutions.
    pub observed: Vec<i64>,
    /// `2P₁ − 1`
    pub target: usize,
    pub found: usize,
    pub cat: usize,
    pub all_index_one: bool,
    pub near_zero_modes: Vec<usize>,
    pub consistent: bool,
    pub note: String,
}

/// `t P_t + t²(P_t − 1)` from the Betti numbers.
pub fn required_polynomial(topo: &DomainTopology) -> Vec<i64> {
    let deg = topo.betti.len() + 2;
    let mut c = vec![0i64; deg];
    for (k, &b) in topo.betti.iter().enumerate() {
        c[k + 1] += b as i64;
        c[k + 2] += b as i64;
    }
    c[2] -= 1;
    while c.len() > 1 && c.last() == Some(&0) {
        c.pop();
    }
    c
}

pub fn render_polynomial(c: &[i64]) -> String {
    let terms: Vec<String> = c
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(k, &v)| {
            let coef = if v == 1 && k > 0 { String::new() } else { v.to_string() };
            match k {
                0 => coef,
                1 => format!("{coef}t"),
                _ => format!("{coef}t^{k}"),
            }
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Checks the necessary conditions of the Morse relations at `t = 1`: every
/// found minimizer has index one and at least one index-one point exists.
/// The full polynomial comparison is reported, not asserted.
pub fn morse_consistency(entries: &[(SolveReport, SpectrumReport)], topo: &DomainTopology) -> MorseSummary {
    let required = required_polynomial(topo);
    let target = topo.morse_bound();
    if entries.is_empty() {
        return MorseSummary {
            status: "no data".into(),
            indices: vec![],
            required,
            observed: vec![],
            target,
            found: 0,
            cat: topo.cat,
            all_index_one: false,
            near_zero_modes: vec![],
            consistent: false,
            note: String::new(),
        };
    }
    let indices: Vec<usize> = entries.iter().map(|(_, s)| s.negative_count).collect();
    let near_zero_modes = entries.iter().map(|(_, s)| s.near_zero_count).collect();
    let top = indices.iter().copied().max().unwrap_or(0);
    let mut observed = vec![0i64; top + 1];
    for &m in &indices {
        observed[m] += 1;
    }
    let found = entries.len();
    let all_index_one = indices.iter().all(|&m| m == 1);
    let consistent = all_index_one && found >= found.min(topo.cat) && observed.get(1).copied().unwrap_or(0) >= 1;
    let note = if found < target {
        format!("found {found} minimizers of the {target} critical points predicted; saddle search out of scope")
    } else {
        format!("found {found} solutions; surplus index-one points belong to the t(1+t)Q(t) term")
    };
    MorseSummary {
        status: if consistent { "consistent".into() } else { "inconsistent".into() },
        indices,
        required,
        observed,
        target,
        found,
        cat: topo.cat,
        all_index_one,
        near_zero_modes,
        consistent,
        note,
    }
}
