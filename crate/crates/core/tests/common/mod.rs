//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sms_core::{DomainGrid, Field, Params};

/// Closed-form 1-D ground state `(p/2 sech²((p−2)x/2))^{1/(p−2)}`.
pub fn soliton_1d(p: f64, x: f64) -> f64 {
    let s = 1.0 / ((p - 2.0) * x / 2.0).cosh();
    (p / 2.0 * s * s).powf(1.0 / (p - 2.0))
}

fn rhs(r: f64, u: f64, v: f64, p: f64, d: usize) -> (f64, f64) {
    let damp = if r > 0.0 { (d as f64 - 1.0) / r * v } else { 0.0 };
    (v, u - u.abs().powf(p - 2.0) * u - damp)
}

/// Shooting on `u'' + (d−1)/r u' = u − u^{p−1}` with classical RK4 and
/// plain bisection on the overshoot/undershoot sign. Returns `U(0)`.
pub fn shoot_u0(p: f64, d: usize, dr: f64) -> f64 {
    let outcome = |a: f64| -> bool {
        // true: crosses zero (overshoot)
        let (mut r, mut u, mut v) = (dr, a, 0.0);
        // series start: u ≈ a + (a − a^{p−1}) r²/(2d)
        u += (a - a.powf(p - 1.0)) * dr * dr / (2.0 * d as f64);
        v += (a - a.powf(p - 1.0)) * dr / d as f64;
        while r < 40.0 {
            let (k1u, k1v) = rhs(r, u, v, p, d);
            let (k2u, k2v) = rhs(r + dr / 2.0, u + dr / 2.0 * k1u, v + dr / 2.0 * k1v, p, d);
            let (k3u, k3v) = rhs(r + dr / 2.0, u + dr / 2.0 * k2u, v + dr / 2.0 * k2v, p, d);
            let (k4u, k4v) = rhs(r + dr, u + dr * k3u, v + dr * k3v, p, d);
            u += dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            v += dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            r += dr;
            if u < 0.0 {
                return true;
            }
            if v > 0.0 {
                return false;
            }
        }
        false
    };
    let (mut lo, mut hi) = (1.0, 2.0);
    while !outcome(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if outcome(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Dense `−Δ_h` on the interior nodes.
pub fn dense_laplacian(grid: &DomainGrid) -> DMatrix<f64> {
    let n = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        l[(i, i)] = 2.0 * grid.dim() as f64 * inv_h2;
        for j in grid.neighbors(i).flatten() {
            l[(i, j)] = -inv_h2;
        }
    }
    l
}

/// Eigenvalues of `H x = λ M x`, ascending, where `H` is the Euclidean
/// Hessian of the discrete energy at `u` and `M` the ε-inner product matrix.
pub fn dense_hessian_spectrum(u: &Field, params: &Params) -> Vec<f64> {
    let grid = u.grid();
    let n = grid.len();
    let eps = params.eps;
    let w = grid.cell_volume() / eps.powi(grid.dim() as i32);
    let l = dense_laplacian(grid);
    let linv = l.clone().cholesky().expect("Laplacian is SPD").inverse();
    let uv = DMatrix::from_column_slice(n, 1, u.values());
    let u2 = uv.map(|x| params.q * x * x);
    let psi = &linv * u2;
    let mut m = &l * (eps * eps);
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    let mut h = m.clone();
    for i in 0..n {
        let ui = uv[i];
        let pos = if ui > 0.0 { ui.powf(params.p - 2.0) } else { 0.0 };
        h[(i, i)] += params.omega * psi[i] - (params.p - 1.0) * pos;
        for j in 0..n {
            h[(i, j)] += 2.0 * params.q * params.omega * ui * linv[(i, j)] * uv[j];
        }
    }
    h *= w;
    m *= w;
    let c = m.cholesky().expect("inner product matrix is SPD");
    let cinv = c.l().try_inverse().expect("triangular factor invertible");
    let s = &cinv * h * cinv.transpose();
    let sym = (&s + s.transpose()) * 0.5;
    let mut vals: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Smooth positive random field: a few random bumps.
pub fn random_bumps(grid: &Arc<DomainGrid>, rng: &mut ChaCha8Rng, eps: f64) -> Field {
    let bumps: Vec<([f64; 3], f64, f64)> = (0..4)
        .map(|_| {
            let c = [rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)];
            (c, rng.gen_range(0.5..2.0), rng.gen_range(1.0..2.0) * eps)
        })
        .collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(c, a, s)| {
                let d2: f64 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum();
                a * (-d2 / (s * s)).exp()
            })
            .sum()
    })
}

/// Random direction with O(1) entries.
pub fn random_direction(grid: &Arc<DomainGrid>, rng: &mut ChaCha8Rng) -> Field {
    let v = (0..grid.len()).map(|_| rng.gen::<f64>() - 0.5).collect();
    Field::from_values(grid, v).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
