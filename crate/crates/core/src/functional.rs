//! The reduced energy `I_ε` and its derivatives.
//!
//! All quantities use the scaled quadrature `(1/ε^d)·h^d·Σ`. Derivatives are
//! returned as Riesz representatives in `⟨·,·⟩_ε`, so a step of size one
//! along the gradient is dimensionally sensible.

use std::cell::RefCell;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmsError};
use crate::grid::{dot, inner_eps_raw, DomainGrid, Field};
use crate::params::Params;
use crate::poisson::{cg_solve, CgOptions, PsiCache};

/// The three terms of `I_ε` and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `½‖u‖²_ε`
    pub kinetic: f64,
    /// `(ω/4)G_ε(u)`
    pub coupling: f64,
    /// `(1/p)|u⁺|^p_{ε,p}`
    pub potential: f64,
    pub total: f64,
}

/// The scalar building blocks of `I_ε` on a ray:
/// `A = ‖u‖²_ε`, `G = G_ε(u)` and `B = |u⁺|^p_{ε,p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalars {
    pub a: f64,
    pub g: f64,
    pub b: f64,
}

impl Scalars {
    pub fn energy(&self, params: &Params) -> EnergyBreakdown {
        let kinetic = 0.5 * self.a;
        let coupling = 0.25 * params.omega * self.g;
        let potential = self.b / params.p;
        EnergyBreakdown { kinetic, coupling, potential, total: kinetic + coupling - potential }
    }

    /// `I_ε(t·u) = ½t²A + (ω/4)t⁴G − (t^p/p)B`
    pub fn energy_on_ray(&self, t: f64, params: &Params) -> f64 {
        0.5 * t * t * self.a + 0.25 * params.omega * t.powi(4) * self.g - t.powf(params.p) / params.p * self.b
    }

    /// `N_ε(u) = A + ωG − B`
    pub fn nehari(&self, params: &Params) -> f64 {
        self.a + params.omega * self.g - self.b
    }
}

pub(crate) fn pos_pow(v: f64, e: f64) -> f64 {
    if v > 0.0 {
        v.powf(e)
    } else {
        0.0
    }
}

/// Evaluation context: grid, parameters, solver options and a ψ cache.
///
/// Not `Sync`; create one per thread.
#[derive(Debug)]
pub struct Problem {
    grid: Arc<DomainGrid>,
    params: Params,
    cg: CgOptions,
    cache: RefCell<PsiCache>,
}

impl Problem {
    pub fn new(grid: &Arc<DomainGrid>, params: Params, cg: CgOptions) -> Result<Self> {
        params.validate()?;
        cg.validate()?;
        Ok(Problem { grid: grid.clone(), params, cg, cache: RefCell::new(PsiCache::new(4)) })
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn cg(&self) -> &CgOptions {
        &self.cg
    }

    /// Number of Poisson solves performed so far (cache misses).
    pub fn poisson_solves(&self) -> usize {
        self.cache.borrow().solves()
    }

    /// Quadrature weight `h^d/ε^d`.
    pub fn weight(&self) -> f64 {
        self.grid.cell_volume() / self.params.eps.powi(self.grid.dim() as i32)
    }

    fn check(&self, u: &Field) -> Result<()> {
        if self.grid.same_as(u.grid()) {
            Ok(())
        } else {
            Err(SmsError::GridMismatch)
        }
    }

    pub(crate) fn psi_vec(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.cache.borrow_mut().get_or_solve(&self.grid, self.params.q, u, &self.cg)
    }

    /// Registers a known `ψ(u)`.
    pub(crate) fn seed_psi(&self, u: Vec<f64>, psi: Vec<f64>) {
        self.cache.borrow_mut().insert(u, psi);
    }

    pub fn psi(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Field::from_values(&self.grid, self.psi_vec(u.values())?)
    }

    pub(crate) fn inner_raw(&self, u: &[f64], w: &[f64]) -> f64 {
        inner_eps_raw(&self.grid, self.params.eps, u, w)
    }

    pub fn inner(&self, u: &Field, w: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(w)?;
        Ok(self.inner_raw(u.values(), w.values()))
    }

    pub fn norm(&self, u: &Field) -> Result<f64> {
        Ok(self.inner(u, u)?.max(0.0).sqrt())
    }

    pub(crate) fn istar_raw(&self, f: &[f64]) -> Result<Vec<f64>> {
        let eps = self.params.eps;
        cg_solve(&self.grid, eps * eps, 1.0, f, None, &self.cg).map(|(v, _)| v)
    }

    pub(crate) fn poisson_raw(&self, f: &[f64]) -> Result<Vec<f64>> {
        cg_solve(&self.grid, 1.0, 0.0, f, None, &self.cg).map(|(v, _)| v)
    }

    pub(crate) fn scalars_with(&self, u: &[f64], psi: &[f64]) -> Scalars {
        let w = self.weight();
        let p = self.params.p;
        let a = self.inner_raw(u, u);
        let g = w * u.iter().zip(psi).map(|(v, s)| v * v * s).sum::<f64>();
        let b = w * u.iter().map(|&v| pos_pow(v, p)).sum::<f64>();
        Scalars { a, g, b }
    }

    pub(crate) fn scalars_raw(&self, u: &[f64]) -> Result<Scalars> {
        let psi = if self.params.omega == 0.0 { vec![0.0; u.len()] } else { self.psi_vec(u)? };
        Ok(self.scalars_with(u, &psi))
    }

    pub fn scalars(&self, u: &Field) -> Result<Scalars> {
        self.check(u)?;
        self.scalars_raw(u.values())
    }

    /// `G_ε(u) = (1/ε^d)h^dΣ u²ψ(u)`
    pub fn g_eps(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let psi = self.psi_vec(u.values())?;
        Ok(self.scalars_with(u.values(), &psi).g)
    }

    pub fn energy(&self, u: &Field) -> Result<EnergyBreakdown> {
        Ok(self.scalars(u)?.energy(&self.params))
    }

    pub(crate) fn gradient_raw(&self, u: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
        let (p, omega) = (self.params.p, self.params.omega);
        let f: Vec<f64> = u.iter().zip(psi).map(|(&v, &s)| pos_pow(v, p - 1.0) - omega * v * s).collect();
        let mut g = self.istar_raw(&f)?;
        for (gi, ui) in g.iter_mut().zip(u) {
            *gi = ui - *gi;
        }
        Ok(g)
    }

    /// `g = u − i*_ε((u⁺)^{p−1} − ω u ψ(u))`, the ε-Riesz representative of `I'_ε(u)`.
    pub fn sobolev_gradient(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let psi = self.psi_vec(u.values())?;
        Field::from_values(&self.grid, self.gradient_raw(u.values(), &psi)?)
    }

    /// `N_ε(u) = I'_ε(u)[u] = ‖u‖²_ε + ωG_ε(u) − |u⁺|^p_{ε,p}`
    pub fn nehari_residual(&self, u: &Field) -> Result<f64> {
        if u.is_zero() {
            return Err(SmsError::ZeroField);
        }
        Ok(self.scalars(u)?.nehari(&self.params))
    }

    pub(crate) fn normal_raw(&self, u: &[f64], psi: &[f64]) -> Result<Vec<f64>> {
        let (p, omega) = (self.params.p, self.params.omega);
        let f: Vec<f64> = u.iter().zip(psi).map(|(&v, &s)| 4.0 * omega * v * s - p * pos_pow(v, p - 1.0)).collect();
        let mut n = self.istar_raw(&f)?;
        for (ni, ui) in n.iter_mut().zip(u) {
            *ni += 2.0 * ui;
        }
        Ok(n)
    }

    /// ε-Riesz representative of `N'_ε(u)`:
    /// `n = 2u + i*_ε(4ωuψ(u) − p(u⁺)^{p−1})`.
    pub fn nehari_normal(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let psi = self.psi_vec(u.values())?;
        Field::from_values(&self.grid, self.normal_raw(u.values(), &psi)?)
    }

    pub(crate) fn hess_vec_raw(&self, u: &[f64], psi: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
        let Params { p, omega, q, .. } = self.params;
        let dpsi = if omega == 0.0 {
            vec![0.0; u.len()]
        } else {
            let rhs: Vec<f64> = u.iter().zip(phi).map(|(a, b)| 2.0 * q * a * b).collect();
            self.poisson_raw(&rhs)?
        };
        let f: Vec<f64> = (0..u.len())
            .map(|i| omega * (psi[i] * phi[i] + u[i] * dpsi[i]) - (p - 1.0) * pos_pow(u[i], p - 2.0) * phi[i])
            .collect();
        let mut h = self.istar_raw(&f)?;
        for (hi, fi) in h.iter_mut().zip(phi) {
            *hi += fi;
        }
        Ok(h)
    }

    /// ε-Riesz representative of `I''_ε(u)[φ, ·]`:
    /// `φ + i*_ε(ω(ψ(u)φ + u ψ'(u)[φ]) − (p−1)(u⁺)^{p−2}φ)`.
    pub fn hess_vec(&self, u: &Field, phi: &Field) -> Result<Field> {
        self.check(u)?;
        self.check(phi)?;
        let psi = self.psi_vec(u.values())?;
        Field::from_values(&self.grid, self.hess_vec_raw(u.values(), &psi, phi.values())?)
    }

    /// `⟨H u, u⟩_ε`, negative at every point of the Nehari manifold.
    pub fn ray_hessian(&self, u: &Field) -> Result<f64> {
        let h = self.hess_vec(u, u)?;
        self.inner(&h, u)
    }

    /// `(½−1/p)‖u‖²_ε + ω(¼−1/p)G_ε(u)`, equal to `I_ε(u)` on the Nehari manifold.
    pub fn nehari_energy(&self, u: &Field) -> Result<f64> {
        let s = self.scalars(u)?;
        let p = self.params.p;
        Ok((0.5 - 1.0 / p) * s.a + self.params.omega * (0.25 - 1.0 / p) * s.g)
    }

    /// Plain lattice dot product of two fields, scaled by `h^d/ε^d`.
    pub fn l2_eps(&self, u: &Field, w: &Field) -> f64 {
        self.weight() * dot(u.values(), w.values())
    }
}

fn default_problem(u: &Field, params: &Params) -> Result<Problem> {
    Problem::new(u.grid(), *params, CgOptions::default())
}

/// `G_ε(u)` with default solver options.
pub fn g_eps(u: &Field, params: &Params) -> Result<f64> {
    default_problem(u, params)?.g_eps(u)
}

pub fn energy(u: &Field, params: &Params) -> Result<EnergyBreakdown> {
    default_problem(u, params)?.energy(u)
}

pub fn sobolev_gradient(u: &Field, params: &Params) -> Result<Field> {
    default_problem(u, params)?.sobolev_gradient(u)
}

pub fn nehari_residual(u: &Field, params: &Params) -> Result<f64> {
    default_problem(u, params)?.nehari_residual(u)
}

pub fn hess_vec(u: &Field, phi: &Field, params: &Params) -> Result<Field> {
    default_problem(u, params)?.hess_vec(u, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_domain, DomainShape};

    fn setup() -> (Arc<DomainGrid>, Params) {
        let g = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
        (g, Params::new(0.5, 1.0, 1.0, 5.0, 0.5).unwrap())
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let (g, params) = setup();
        let e = energy(&Field::zeros(&g), &params).unwrap();
        assert_eq!(e, EnergyBreakdown::default());
        assert!(matches!(nehari_residual(&Field::zeros(&g), &params), Err(SmsError::ZeroField)));
    }

    #[test]
    fn breakdown_sums() {
        let (g, params) = setup();
        let u = Field::from_fn(&g, |x| 1.0 - x[0] * x[0] - x[1] * x[1] - x[2] * x[2]);
        let e = energy(&u, &params).unwrap();
        let sum = e.kinetic + e.coupling - e.potential;
        assert!((e.total - sum).abs() <= 1e-12 * e.total.abs());
    }

    #[test]
    fn omega_zero_drops_coupling() {
        let (g, params) = setup();
        let u = Field::from_fn(&g, |x| (1.0 - x[0] * x[0] - x[1] * x[1] - x[2] * x[2]).max(0.0) * 3.0);
        let e = energy(&u, &params.with_omega(0.0)).unwrap();
        assert_eq!(e.coupling, 0.0);
    }

    #[test]
    fn negative_field_has_positive_nehari_residual() {
        let (g, params) = setup();
        let u = Field::from_fn(&g, |x| -(1.0 - x[0] * x[0]));
        assert!(nehari_residual(&u, &params).unwrap() > 0.0);
    }
}
