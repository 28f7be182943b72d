//! Matrix-free conjugate gradients for `a·(−Δ_h) + b` with Dirichlet data.
//!
//! Two instances matter: the Poisson problem `−Δ_h ψ = q u²` that defines the
//! electrostatic potential, and `(−ε²Δ_h + 1) v = f`, the discrete adjoint of
//! the embedding of `H_ε` into `L^{p}` (the map usually written `i*_ε`).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SmsError};
use crate::grid::{dot, shifted_laplacian_into, ssor_apply, DomainGrid, Field};
use crate::params::Params;

/// Preconditioner for the shifted Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
    Ssor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CgOptions {
    /// Relative residual tolerance `‖A x − b‖ ≤ tol·‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed reduction order. Kernels here are sequential, so results are
    /// reproducible either way; the flag is recorded with every run.
    pub deterministic: bool,
    pub preconditioner: Preconditioner,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { tol: 1e-10, max_iter: 20000, deterministic: true, preconditioner: Preconditioner::None }
    }
}

impl CgOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(SmsError::InvalidParams(format!("CG tolerance must lie in (0,1), got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(SmsError::InvalidParams("CG max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Residual certificate of one solve, computed from the true residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgCertificate {
    pub iterations: usize,
    pub relative_residual: f64,
}

struct Operator<'a> {
    grid: &'a DomainGrid,
    a: f64,
    b: f64,
}

impl Operator<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        shifted_laplacian_into(self.grid, self.a, self.b, x, y);
    }

    fn precondition(&self, kind: Preconditioner, r: &[f64], z: &mut [f64]) {
        match kind {
            Preconditioner::None => z.copy_from_slice(r),
            Preconditioner::Jacobi => {
                let diag = self.a * (2 * self.grid.dim()) as f64 / (self.grid.h() * self.grid.h()) + self.b;
                for (zi, ri) in z.iter_mut().zip(r) {
                    *zi = ri / diag;
                }
            }
            Preconditioner::Ssor => ssor_apply(self.grid, self.a, self.b, 1.5, r, z),
        }
    }
}

/// Solves `(a·(−Δ_h) + b) x = rhs`, optionally from a starting guess.
///
/// The recurrence residual is re-checked against the true residual; CG is
/// restarted from the current iterate when the two disagree.
pub(crate) fn cg_solve(
    grid: &DomainGrid,
    a: f64,
    b: f64,
    rhs: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<(Vec<f64>, CgCertificate)> {
    opts.validate()?;
    let n = rhs.len();
    let op = Operator { grid, a, b };
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(SmsError::InvalidParams("right-hand side is not finite".into()));
    }
    if rhs_norm == 0.0 {
        return Ok((vec![0.0; n], CgCertificate { iterations: 0, relative_residual: 0.0 }));
    }
    let target = opts.tol * rhs_norm;
    let mut x = match x0 {
        Some(g) if g.len() == n => g.to_vec(),
        _ => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut ad = vec![0.0; n];
    let mut iterations = 0;

    let true_residual = |x: &[f64], r: &mut [f64], ad: &mut [f64]| -> f64 {
        op.apply(x, ad);
        for i in 0..n {
            r[i] = rhs[i] - ad[i];
        }
        dot(r, r).sqrt()
    };

    let mut res = true_residual(&x, &mut r, &mut ad);
    while res > target {
        if iterations >= opts.max_iter {
            return Err(SmsError::CgNonConvergence { iterations, residual: res / rhs_norm });
        }
        op.precondition(opts.preconditioner, &r, &mut z);
        d.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        loop {
            op.apply(&d, &mut ad);
            let dad = dot(&d, &ad);
            if !(dad > 0.0) {
                break;
            }
            let alpha = rz / dad;
            for i in 0..n {
                x[i] += alpha * d[i];
                r[i] -= alpha * ad[i];
            }
            iterations += 1;
            let rr = dot(&r, &r).sqrt();
            if rr <= 0.5 * target || iterations >= opts.max_iter {
                break;
            }
            op.precondition(opts.preconditioner, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                d[i] = z[i] + beta * d[i];
            }
        }
        res = true_residual(&x, &mut r, &mut ad);
    }
    Ok((x, CgCertificate { iterations, relative_residual: res / rhs_norm }))
}

/// Solves `−Δ_h v = rhs` and returns the residual certificate.
pub fn poisson_solve_certified(rhs: &Field, opts: &CgOptions) -> Result<(Field, CgCertificate)> {
    let (v, cert) = cg_solve(rhs.grid(), 1.0, 0.0, rhs.values(), None, opts)?;
    Ok((Field::from_values(rhs.grid(), v)?, cert))
}

/// Solves `−Δ_h v = rhs`.
pub fn poisson_solve(rhs: &Field, opts: &CgOptions) -> Result<Field> {
    poisson_solve_certified(rhs, opts).map(|(v, _)| v)
}

/// Tolerance for the discrete maximum principle check on ψ.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-10;

pub(crate) fn psi_raw(grid: &DomainGrid, q: f64, u: &[f64], guess: Option<&[f64]>, opts: &CgOptions) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = u.iter().map(|v| q * v * v).collect();
    let (psi, _) = cg_solve(grid, 1.0, 0.0, &rhs, guess, opts)?;
    check_max_principle(&psi)?;
    Ok(psi)
}

fn check_max_principle(psi: &[f64]) -> Result<()> {
    let (lo, hi) = psi.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo < -MAX_PRINCIPLE_TOL * hi.max(1.0) {
        return Err(SmsError::MaximumPrinciple(lo));
    }
    Ok(())
}

/// `ψ(u)`: the solution of `−Δ_h ψ = q u²`.
pub fn psi(u: &Field, params: &Params, opts: &CgOptions) -> Result<Field> {
    let v = psi_raw(u.grid(), params.q, u.values(), None, opts)?;
    Field::from_values(u.grid(), v)
}

/// `ψ'(u)[φ]`: the solution of `−Δ_h v = 2q u φ`.
pub fn psi_prime_apply(u: &Field, phi: &Field, params: &Params, opts: &CgOptions) -> Result<Field> {
    u.check_same_grid(phi)?;
    let rhs: Vec<f64> = u.values().iter().zip(phi.values()).map(|(a, b)| 2.0 * params.q * a * b).collect();
    let (v, _) = cg_solve(u.grid(), 1.0, 0.0, &rhs, None, opts)?;
    Field::from_values(u.grid(), v)
}

/// `i*_ε f`: the solution of `(−ε²Δ_h + 1) v = f`.
pub fn istar_eps(f: &Field, params: &Params, opts: &CgOptions) -> Result<Field> {
    let (v, _) = cg_solve(f.grid(), params.eps * params.eps, 1.0, f.values(), None, opts)?;
    Field::from_values(f.grid(), v)
}

/// Relative change above which ψ is solved from scratch instead of warm-started.
pub const WARM_START_THRESHOLD: f64 = 0.3;

/// Remembers ψ for recently seen fields.
///
/// Lookups are exact: a hit requires the SHA-256 of the field bytes and the
/// values themselves to match. On a miss the most recent entry seeds CG when
/// it is close enough to the new field.
#[derive(Debug, Default)]
pub struct PsiCache {
    entries: Vec<CacheEntry>,
    capacity: usize,
    hits: usize,
    solves: usize,
}

#[derive(Debug)]
struct CacheEntry {
    key: [u8; 32],
    u: Vec<f64>,
    psi: Vec<f64>,
}

pub(crate) fn content_hash(values: &[f64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().into()
}

impl PsiCache {
    pub fn new(capacity: usize) -> Self {
        PsiCache { entries: Vec::new(), capacity: capacity.max(1), hits: 0, solves: 0 }
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn solves(&self) -> usize {
        self.solves
    }

    fn lookup(&mut self, key: &[u8; 32], u: &[f64]) -> Option<Vec<f64>> {
        let pos = self.entries.iter().position(|e| &e.key == key && e.u == u)?;
        let entry = self.entries.remove(pos);
        let psi = entry.psi.clone();
        self.entries.push(entry);
        self.hits += 1;
        Some(psi)
    }

    /// Records a known `ψ(u)`, e.g. `t²ψ(w)` for `u = t·w`.
    pub fn insert(&mut self, u: Vec<f64>, psi: Vec<f64>) {
        let key = content_hash(&u);
        self.insert_keyed(key, u, psi);
    }

    fn insert_keyed(&mut self, key: [u8; 32], u: Vec<f64>, psi: Vec<f64>) {
        self.entries.retain(|e| e.key != key);
        if self.entries.len() >= self.capacity {
            self.entries.remove(0);
        }
        self.entries.push(CacheEntry { key, u, psi });
    }

    pub fn get_or_solve(&mut self, grid: &DomainGrid, q: f64, u: &[f64], opts: &CgOptions) -> Result<Vec<f64>> {
        let key = content_hash(u);
        if let Some(psi) = self.lookup(&key, u) {
            return Ok(psi);
        }
        let guess = self.entries.last().and_then(|e| {
            if e.u.len() != u.len() {
                return None;
            }
            let diff: f64 = e.u.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let norm = dot(u, u).sqrt();
            (norm > 0.0 && diff <= WARM_START_THRESHOLD * norm).then_some(&e.psi[..])
        });
        let psi = psi_raw(grid, q, u, guess, opts)?;
        self.solves += 1;
        self.insert_keyed(key, u.to_vec(), psi.clone());
        Ok(psi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape};

    #[test]
    fn zero_rhs_gives_zero() {
        let g = build_domain(&DomainShape::ball(1.0), 0.2, 3).unwrap();
        let v = poisson_solve(&Field::zeros(&g), &CgOptions::default()).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn preconditioners_agree() {
        let g = build_domain(&DomainShape::cube(0.0, 1.0), 0.05, 3).unwrap();
        let f = Field::from_fn(&g, |x| (x[0] * 3.0).sin() + x[1] * x[2]);
        let mut sols = Vec::new();
        for pc in [Preconditioner::None, Preconditioner::Jacobi, Preconditioner::Ssor] {
            let opts = CgOptions { preconditioner: pc, ..Default::default() };
            let (v, cert) = poisson_solve_certified(&f, &opts).unwrap();
            assert!(cert.relative_residual <= 1e-10);
            sols.push(v);
        }
        for s in &sols[1..] {
            let d = s.add_scaled(-1.0, &sols[0]).unwrap();
            assert!(d.l2_norm() <= 1e-8 * sols[0].l2_norm());
        }
    }

    #[test]
    fn non_convergence_reported() {
        let g = build_domain(&DomainShape::ball(1.0), 0.05, 3).unwrap();
        let f = Field::from_fn(&g, |_| 1.0);
        let opts = CgOptions { max_iter: 3, ..Default::default() };
        assert!(matches!(poisson_solve(&f, &opts), Err(SmsError::CgNonConvergence { .. })));
    }

    #[test]
    fn cache_hit_is_exact_and_warm_start_converges() {
        let g = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
        let opts = CgOptions::default();
        let u: Vec<f64> = g.coords().map(|x| 1.0 - x[0] * x[0]).collect();
        let mut cache = PsiCache::new(4);
        let a = cache.get_or_solve(&g, 1.0, &u, &opts).unwrap();
        let b = cache.get_or_solve(&g, 1.0, &u, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!((cache.hits(), cache.solves()), (1, 1));
        let u2: Vec<f64> = u.iter().map(|v| 1.01 * v).collect();
        let c = cache.get_or_solve(&g, 1.0, &u2, &opts).unwrap();
        for (x, y) in c.iter().zip(&a) {
            assert!((x - 1.0201 * y).abs() <= 1e-8 * y.abs().max(1e-3));
        }
    }
}
