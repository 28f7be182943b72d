//! Maps between the domain and low-energy functions.
//!
//! The photography map plants a truncated, rescaled ground state at a point
//! ξ and projects it onto the Nehari manifold; the barycenter map sends a
//! function back to a point. Together with the topology catalog they drive
//! the multiplicity experiments.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmsError};
use crate::functional::{pos_pow, Problem, Scalars};
use crate::grid::{DomainGrid, DomainShape, Field, Point};
use crate::groundstate::RadialProfile;
use crate::nehari::retract_raw;
use crate::params::Params;
use crate::poisson::CgOptions;

/// Piecewise-linear cutoff: 1 on `[0, r/2]`, 0 on `[r, ∞)`, slope `−2/r` between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub r: f64,
}

impl Cutoff {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(SmsError::InvalidParams(format!("cutoff radius must be positive, got {r}")));
        }
        Ok(Cutoff { r })
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.5 * self.r {
            1.0
        } else if s < self.r {
            2.0 * (1.0 - s / self.r)
        } else {
            0.0
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        if s > 0.5 * self.r && s < self.r {
            -2.0 / self.r
        } else {
            0.0
        }
    }
}

/// `d(ξ, ∂Ω) ≥ r` with ξ inside Ω.
pub fn is_admissible(grid: &DomainGrid, xi: &Point, r: f64) -> bool {
    grid.signed_distance(xi) <= -r * (1.0 - 1e-12)
}

/// `W_{ε,ξ}(x) = U((x−ξ)/ε)·χ(|x−ξ|)` sampled on the nodes, before projection.
pub fn sample_w(xi: &Point, profile: &RadialProfile, params: &Params, grid: &Arc<DomainGrid>) -> Result<Field> {
    if params.eps < 4.0 * grid.h() {
        return Err(SmsError::EpsTooSmall { eps: params.eps, h: grid.h() });
    }
    if profile.d != grid.dim() {
        return Err(SmsError::InvalidParams(format!(
            "profile is {}-dimensional, grid is {}-dimensional",
            profile.d,
            grid.dim()
        )));
    }
    if !is_admissible(grid, xi, params.r) {
        return Err(SmsError::NotAdmissible(format!("{xi:?} is closer than r = {} to the boundary", params.r)));
    }
    let chi = Cutoff::new(params.r)?;
    let w = Field::from_fn(grid, |x| {
        let s = grid.distance(&x, xi);
        let c = chi.eval(s);
        if c == 0.0 {
            0.0
        } else {
            c * profile.eval(s / params.eps)
        }
    });
    if w.is_zero() {
        return Err(SmsError::EpsTooSmall { eps: params.eps, h: grid.h() });
    }
    Ok(w)
}

/// Result of the photography map at one point.
#[derive(Debug, Clone)]
pub struct Photograph {
    /// `Φ_ε(ξ) = t_ε(W)·W`
    pub field: Field,
    /// The unprojected `W_{ε,ξ}`.
    pub w: Field,
    pub t: f64,
    /// `A, G, B` evaluated at `W`.
    pub scalars_w: Scalars,
}

pub fn photograph(problem: &Problem, xi: &Point, profile: &RadialProfile) -> Result<Photograph> {
    let w = sample_w(xi, profile, problem.params(), problem.grid())?;
    let (field, t, scalars_w) = retract_raw(problem, w.values())?;
    Ok(Photograph { field: Field::from_values(problem.grid(), field)?, w, t, scalars_w })
}

/// `Φ_ε(ξ)` with default solver options.
pub fn photography(xi: &Point, profile: &RadialProfile, params: &Params, grid: &Arc<DomainGrid>) -> Result<Field> {
    let problem = Problem::new(grid, *params, CgOptions::default())?;
    Ok(photograph(&problem, xi, profile)?.field)
}

/// `β(u) = ∫ x |u⁺|^p / ∫ |u⁺|^p`.
pub fn barycenter(u: &Field, p: f64) -> Result<Point> {
    let grid = u.grid();
    let mut num = [0.0; 3];
    let mut den = 0.0;
    for (i, &v) in u.values().iter().enumerate() {
        let m = pos_pow(v, p);
        if m > 0.0 {
            let x = grid.coord(i);
            for a in 0..3 {
                num[a] += m * x[a];
            }
            den += m;
        }
    }
    if !(den > 0.0) {
        return Err(SmsError::ZeroPositivePart);
    }
    Ok([num[0] / den, num[1] / den, num[2] / den])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// In Ω at distance at least `r` from the boundary.
    Inner,
    /// Within distance `r` of Ω but not inner.
    Outer,
    Neither,
}

pub fn inner_outer_membership(x: &Point, grid: &DomainGrid, r: f64) -> Membership {
    let sd = grid.signed_distance(x);
    if sd <= -r {
        Membership::Inner
    } else if sd <= r {
        Membership::Outer
    } else {
        Membership::Neither
    }
}

/// `Ω⁺ = {d(x, Ω) ≤ r}`, which contains the inner set.
pub fn in_outer_set(x: &Point, grid: &DomainGrid, r: f64) -> bool {
    inner_outer_membership(x, grid, r) != Membership::Neither
}

/// Fraction of `∫|u⁺|^p` carried by `B(center, radius)`.
pub fn concentration_fraction(u: &Field, center: &Point, radius: f64, p: f64) -> Result<f64> {
    let grid = u.grid();
    let mut inside = 0.0;
    let mut total = 0.0;
    for (i, &v) in u.values().iter().enumerate() {
        let m = pos_pow(v, p);
        total += m;
        if m > 0.0 && grid.distance(&grid.coord(i), center) < radius {
            inside += m;
        }
    }
    if !(total > 0.0) {
        return Err(SmsError::ZeroPositivePart);
    }
    Ok(inside / total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    /// Centre of the generating cube.
    pub center: Point,
    pub nodes: Vec<usize>,
}

/// Cubes of side ε intersected with Ω, with small boundary pieces merged
/// into a neighbour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodPartition {
    pub side: f64,
    pub cells: Vec<Cell>,
    /// Largest distance from a cell centre to one of its nodes.
    pub r2: f64,
    /// Smallest cell volume in units of `ε^d`.
    pub min_fill: f64,
    /// Largest number of cells meeting at a cube vertex.
    pub nu: usize,
}

pub fn good_partition(grid: &DomainGrid, eps: f64) -> Result<GoodPartition> {
    let h = grid.h();
    if eps < 4.0 * h {
        return Err(SmsError::EpsTooSmall { eps, h });
    }
    let dim = grid.dim();
    // cubes start at the lower corner of the shape (lattice corner for masks)
    let origin = match grid.shape().bounding_box() {
        Some((lo, _)) => lo,
        None => {
            let idx = grid.lattice_index(0);
            let x = grid.coord(0);
            let mut o = [0.0; 3];
            for a in 0..dim {
                o[a] = x[a] - idx[a] as f64 * h;
            }
            o
        }
    };
    let key_of = |x: &Point| -> [i64; 3] {
        let mut k = [0i64; 3];
        for a in 0..dim {
            k[a] = ((x[a] - origin[a]) / eps + 1e-9).floor() as i64;
        }
        k
    };
    let mut by_key: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for i in 0..grid.len() {
        by_key.entry(key_of(&grid.coord(i))).or_default().push(i);
    }
    let mut keys: Vec<[i64; 3]> = by_key.keys().copied().collect();
    keys.sort_unstable();

    let min_nodes = ((eps / 4.0).powi(dim as i32) / grid.cell_volume()).ceil() as usize;
    let is_small = |k: &[i64; 3]| by_key[k].len() < min_nodes.max(1);
    // host[k]: the key a cube's nodes end up in
    let mut host: HashMap<[i64; 3], [i64; 3]> = HashMap::new();
    for k in &keys {
        if !is_small(k) {
            host.insert(*k, *k);
        }
    }
    let big: Vec<[i64; 3]> = keys.iter().copied().filter(|k| !is_small(k)).collect();
    if big.is_empty() {
        // every cube is small: one cell holds everything
        for k in &keys {
            host.insert(*k, keys[0]);
        }
    } else {
        for k in keys.iter().filter(|k| is_small(k)) {
            let mut best: Option<([i64; 3], usize)> = None;
            for a in 0..dim {
                for delta in [-1, 1] {
                    let mut m = *k;
                    m[a] += delta;
                    if let Some(nodes) = by_key.get(&m) {
                        if !is_small(&m) && best.map_or(true, |(_, n)| nodes.len() > n) {
                            best = Some((m, nodes.len()));
                        }
                    }
                }
            }
            let target = match best {
                Some((m, _)) => m,
                None => *big
                    .iter()
                    .min_by_key(|m| (0..dim).map(|a| (m[a] - k[a]).pow(2)).sum::<i64>())
                    .expect("non-empty"),
            };
            host.insert(*k, target);
        }
    }

    let mut cell_index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut cells: Vec<Cell> = Vec::new();
    for k in &keys {
        let hk = host[k];
        let id = *cell_index.entry(hk).or_insert_with(|| {
            let mut center = [0.0; 3];
            for a in 0..dim {
                center[a] = origin[a] + (hk[a] as f64 + 0.5) * eps;
            }
            cells.push(Cell { id: cells.len(), center, nodes: Vec::new() });
            cells.len() - 1
        });
        cells[id].nodes.extend_from_slice(&by_key[k]);
    }
    for c in &mut cells {
        c.nodes.sort_unstable();
    }

    let mut r2 = 0.0f64;
    let mut min_fill = f64::INFINITY;
    for c in &cells {
        for &n in &c.nodes {
            r2 = r2.max(grid.distance(&grid.coord(n), &c.center));
        }
        min_fill = min_fill.min(c.nodes.len() as f64 * grid.cell_volume() / eps.powi(dim as i32));
    }

    // overlap of closed cells: distinct cells among the cubes sharing a vertex
    let mut nu = 1;
    let corners = 1usize << dim;
    for k in &keys {
        for v in 0..corners {
            let mut seen: Vec<usize> = Vec::with_capacity(corners);
            for c in 0..corners {
                let mut m = [k[0], k[1], k[2]];
                for a in 0..dim {
                    let bit_v = (v >> a) & 1;
                    let bit_c = (c >> a) & 1;
                    m[a] += bit_v as i64 - bit_c as i64;
                }
                if let Some(hk) = host.get(&m) {
                    let id = cell_index[hk];
                    if !seen.contains(&id) {
                        seen.push(id);
                    }
                }
            }
            nu = nu.max(seen.len());
        }
    }

    Ok(GoodPartition { side: eps, cells, r2, min_fill, nu })
}

impl GoodPartition {
    /// `(1/ε^d)∫_{P_j}|u⁺|^p` for every cell.
    pub fn cell_masses(&self, u: &Field, p: f64) -> Vec<f64> {
        let w = u.grid().cell_volume() / self.side.powi(u.grid().dim() as i32);
        let v = u.values();
        self.cells.iter().map(|c| w * c.nodes.iter().map(|&n| pos_pow(v[n], p)).sum::<f64>()).collect()
    }

    /// The largest cell mass, the measured constant `γ`.
    pub fn max_cell_mass(&self, u: &Field, p: f64) -> f64 {
        self.cell_masses(u, p).into_iter().fold(0.0, f64::max)
    }

    /// CSV with columns `cell,cx,cy,cz,nodes,mass`.
    pub fn write_csv(&self, u: &Field, p: f64, w: &mut impl Write) -> Result<()> {
        writeln!(w, "cell,cx,cy,cz,nodes,mass")?;
        for (c, m) in self.cells.iter().zip(self.cell_masses(u, p)) {
            writeln!(w, "{},{},{},{},{},{}", c.id, c.center[0], c.center[1], c.center[2], c.nodes.len(), m)?;
        }
        Ok(())
    }
}

/// Lusternik–Schnirelmann category and Betti numbers of a catalog shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTopology {
    pub cat: usize,
    /// `dim H_k` for `k = 0, 1, …`
    pub betti: Vec<usize>,
}

impl DomainTopology {
    /// `P_1 = Σ_k dim H_k`.
    pub fn p1(&self) -> usize {
        self.betti.iter().sum()
    }

    /// The lower bound `2P₁ − 1`.
    pub fn morse_bound(&self) -> usize {
        2 * self.p1() - 1
    }

    /// `P_t` rendered as a polynomial in `t`.
    pub fn poincare(&self) -> String {
        let terms: Vec<String> = self
            .betti
            .iter()
            .enumerate()
            .filter(|(_, &b)| b > 0)
            .map(|(k, &b)| {
                let coef = if b == 1 && k > 0 { String::new() } else { b.to_string() };
                match k {
                    0 => coef,
                    1 => format!("{coef}t"),
                    _ => format!("{coef}t^{k}"),
                }
            })
            .collect();
        terms.join(" + ")
    }
}

pub fn topology_catalog(shape: &DomainShape, dim: usize) -> Result<DomainTopology> {
    let contractible = DomainTopology { cat: 1, betti: vec![1] };
    Ok(match shape {
        DomainShape::Ball { .. } | DomainShape::Box { .. } => contractible,
        // an annulus retracts onto S¹, a spherical shell onto S²
        DomainShape::Shell { .. } if dim == 2 => DomainTopology { cat: 2, betti: vec![1, 1] },
        DomainShape::Shell { .. } => DomainTopology { cat: 2, betti: vec![1, 0, 1] },
        DomainShape::SolidTorus { .. } => DomainTopology { cat: 2, betti: vec![1, 1] },
        DomainShape::MaskFile { .. } => return Err(SmsError::UnknownTopology(shape.to_string())),
    })
}

/// Topology-aware seeds: the centre for contractible shapes, `count` equally
/// spaced points on the mid-sphere of a shell (equator) or on the core
/// circle of a torus.
pub fn admissible_seeds(shape: &DomainShape, count: usize) -> Result<Vec<Point>> {
    let ring = |c: &Point, radius: f64| -> Vec<Point> {
        let n = count.max(1);
        (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [c[0] + radius * th.cos(), c[1] + radius * th.sin(), c[2]]
            })
            .collect()
    };
    Ok(match shape {
        DomainShape::Ball { center, .. } => vec![*center],
        DomainShape::Box { lo, hi } => vec![[0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])]],
        DomainShape::Shell { center, r_in, r_out } => ring(center, 0.5 * (r_in + r_out)),
        DomainShape::SolidTorus { center, major, .. } => ring(center, *major),
        DomainShape::MaskFile { .. } => return Err(SmsError::UnknownTopology(shape.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_domain;

    #[test]
    fn cutoff_profile() {
        let chi = Cutoff::new(0.4).unwrap();
        for k in 0..=400 {
            let s = k as f64 * 0.001;
            let v = chi.eval(s);
            assert!((0.0..=1.0).contains(&v));
            if s <= 0.2 {
                assert_eq!(v, 1.0);
            }
            if s >= 0.4 {
                assert_eq!(v, 0.0);
            }
            assert!(chi.derivative(s).abs() <= 2.0 / 0.4 + 1e-15);
        }
    }

    #[test]
    fn membership_examples() {
        let g = build_domain(&DomainShape::ball(1.0), 0.1, 3).unwrap();
        assert_eq!(inner_outer_membership(&[0.0; 3], &g, 0.2), Membership::Inner);
        assert_eq!(inner_outer_membership(&[1.1, 0.0, 0.0], &g, 0.2), Membership::Outer);
        assert_eq!(inner_outer_membership(&[1.5, 0.0, 0.0], &g, 0.2), Membership::Neither);
    }

    #[test]
    fn catalog() {
        let ball = topology_catalog(&DomainShape::ball(1.0), 3).unwrap();
        assert_eq!((ball.cat, ball.morse_bound()), (1, 1));
        let shell = topology_catalog(&DomainShape::shell(0.2, 1.0), 3).unwrap();
        assert_eq!((shell.cat, shell.morse_bound(), shell.poincare().as_str()), (2, 3, "1 + t^2"));
        let torus = DomainShape::SolidTorus { center: [0.0; 3], major: 1.0, minor: 0.3 };
        let torus = topology_catalog(&torus, 3).unwrap();
        assert_eq!((torus.cat, torus.morse_bound(), torus.poincare().as_str()), (2, 3, "1 + t"));
        let mask = DomainShape::MaskFile { path: "x".into() };
        assert!(matches!(topology_catalog(&mask, 3), Err(SmsError::UnknownTopology(_))));
    }

    #[test]
    fn box_partition_tiles_exactly() {
        let g = build_domain(&DomainShape::cube(0.0, 1.0), 0.05, 3).unwrap();
        let part = good_partition(&g, 0.25).unwrap();
        let mut all: Vec<usize> = part.cells.iter().flat_map(|c| c.nodes.iter().copied()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..g.len()).collect::<Vec<_>>());
        assert_eq!(part.cells.len(), 64);
        assert!(part.nu <= 8);
    }
}
