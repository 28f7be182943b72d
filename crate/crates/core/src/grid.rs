//! Uniform Cartesian discretization of bounded domains.
//!
//! A [`DomainGrid`] is a lattice centred on the shape with spacing `h`; the
//! unknowns live on the nodes strictly inside the shape and every other
//! lattice node carries the homogeneous Dirichlet value 0. All quadratures are
//! `h^d` times a sum over interior nodes and the gradient energy is defined
//! through the same (2d+1)-point stencil used by the solvers, so discrete
//! summation by parts is exact.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmsError};
use crate::params::Params;

pub type Point = [f64; 3];

const NONE: u32 = u32::MAX;

/// Geometry of Ω. Lengths are in domain units; for `d = 2` the third
/// coordinate of every point is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainShape {
    Ball { center: Point, radius: f64 },
    Shell { center: Point, r_in: f64, r_out: f64 },
    Box { lo: Point, hi: Point },
    SolidTorus { center: Point, major: f64, minor: f64 },
    MaskFile { path: String },
}

impl DomainShape {
    pub fn ball(radius: f64) -> Self {
        DomainShape::Ball { center: [0.0; 3], radius }
    }

    pub fn shell(r_in: f64, r_out: f64) -> Self {
        DomainShape::Shell { center: [0.0; 3], r_in, r_out }
    }

    pub fn cube(lo: f64, hi: f64) -> Self {
        DomainShape::Box { lo: [lo; 3], hi: [hi; 3] }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(SmsError::InvalidShape(m));
        match self {
            DomainShape::Ball { radius, .. } if !(*radius > 0.0) => {
                bad(format!("ball radius must be positive, got {radius}"))
            }
            DomainShape::Shell { r_in, r_out, .. } if !(0.0 < *r_in && r_in < r_out) => {
                bad(format!("shell needs 0 < R_in < R_out, got R_in={r_in}, R_out={r_out}"))
            }
            DomainShape::Box { lo, hi } if (0..dim).any(|a| !(lo[a] < hi[a])) => {
                bad("box needs lo < hi componentwise".into())
            }
            DomainShape::SolidTorus { major, minor, .. } if !(0.0 < *minor && minor < major) => {
                bad(format!("torus needs 0 < minor < major, got {minor}, {major}"))
            }
            DomainShape::SolidTorus { .. } if dim != 3 => bad("solid torus is three-dimensional".into()),
            DomainShape::MaskFile { path } if path.chars().any(char::is_whitespace) => {
                bad("mask path must not contain whitespace".into())
            }
            _ => Ok(()),
        }
    }

    /// Signed distance to ∂Ω (negative inside). `None` for mask shapes,
    /// whose distance is computed on the lattice by [`DomainGrid`].
    pub fn signed_distance(&self, x: &Point, dim: usize) -> Option<f64> {
        let dist = |a: &Point, b: &Point| -> f64 {
            (0..dim).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
        };
        Some(match self {
            DomainShape::Ball { center, radius } => dist(x, center) - radius,
            DomainShape::Shell { center, r_in, r_out } => {
                let rho = dist(x, center);
                (r_in - rho).max(rho - r_out)
            }
            DomainShape::Box { lo, hi } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for k in 0..dim {
                    let c = 0.5 * (lo[k] + hi[k]);
                    let half = 0.5 * (hi[k] - lo[k]);
                    let q = (x[k] - c).abs() - half;
                    outside += q.max(0.0).powi(2);
                    inside = inside.max(q);
                }
                outside.sqrt() + inside.min(0.0)
            }
            DomainShape::SolidTorus { center, major, minor } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let dz = x[2] - center[2];
                let ring = (dx * dx + dy * dy).sqrt() - major;
                (ring * ring + dz * dz).sqrt() - minor
            }
            DomainShape::MaskFile { .. } => return None,
        })
    }

    /// Centre of the lattice and half extents of the bounding box.
    fn frame(&self) -> Option<(Point, Point)> {
        Some(match self {
            DomainShape::Ball { center, radius } => (*center, [*radius; 3]),
            DomainShape::Shell { center, r_out, .. } => (*center, [*r_out; 3]),
            DomainShape::Box { lo, hi } => {
                let mut c = [0.0; 3];
                let mut e = [0.0; 3];
                for k in 0..3 {
                    c[k] = 0.5 * (lo[k] + hi[k]);
                    e[k] = 0.5 * (hi[k] - lo[k]);
                }
                (c, e)
            }
            DomainShape::SolidTorus { center, major, minor } => {
                (*center, [major + minor, major + minor, *minor])
            }
            DomainShape::MaskFile { .. } => return None,
        })
    }

    fn narrowest_gap(&self, dim: usize) -> Option<f64> {
        Some(match self {
            DomainShape::Ball { radius, .. } => 2.0 * radius,
            DomainShape::Shell { r_in, r_out, .. } => r_out - r_in,
            DomainShape::Box { lo, hi } => (0..dim).map(|k| hi[k] - lo[k]).fold(f64::INFINITY, f64::min),
            DomainShape::SolidTorus { minor, .. } => 2.0 * minor,
            DomainShape::MaskFile { .. } => return None,
        })
    }

    /// Lower and upper corners of the bounding box.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        self.frame().map(|(c, e)| ([c[0] - e[0], c[1] - e[1], c[2] - e[2]], [c[0] + e[0], c[1] + e[1], c[2] + e[2]]))
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self, dim: usize) -> Option<f64> {
        self.narrowest_gap(dim).map(|g| 0.5 * g)
    }

    /// Diameter of the bounding box, an upper bound for diam(Ω).
    pub fn diameter(&self, dim: usize) -> Option<f64> {
        self.frame()
            .map(|(_, e)| 2.0 * (0..dim).map(|k| e[k] * e[k]).sum::<f64>().sqrt())
    }
}

fn fmt_point(p: &Point) -> String {
    format!("{},{},{}", p[0], p[1], p[2])
}

impl fmt::Display for DomainShape {
    /// Canonical, whitespace-free form used in field dump headers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainShape::Ball { center, radius } => write!(f, "ball:{}:{}", fmt_point(center), radius),
            DomainShape::Shell { center, r_in, r_out } => {
                write!(f, "shell:{}:{}:{}", fmt_point(center), r_in, r_out)
            }
            DomainShape::Box { lo, hi } => write!(f, "box:{}:{}", fmt_point(lo), fmt_point(hi)),
            DomainShape::SolidTorus { center, major, minor } => {
                write!(f, "torus:{}:{}:{}", fmt_point(center), major, minor)
            }
            DomainShape::MaskFile { path } => write!(f, "mask:{path}"),
        }
    }
}

impl FromStr for DomainShape {
    type Err = SmsError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SmsError::InvalidShape(format!("cannot parse shape string {s:?}"));
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let point = |t: &str| -> Result<Point> {
            let v: Vec<f64> = t.split(',').map(num).collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(bad());
            }
            Ok([v[0], v[1], v[2]])
        };
        if let Some(path) = s.strip_prefix("mask:") {
            return Ok(DomainShape::MaskFile { path: path.to_string() });
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["ball", c, r] => Ok(DomainShape::Ball { center: point(c)?, radius: num(r)? }),
            ["shell", c, a, b] => Ok(DomainShape::Shell { center: point(c)?, r_in: num(a)?, r_out: num(b)? }),
            ["box", lo, hi] => Ok(DomainShape::Box { lo: point(lo)?, hi: point(hi)? }),
            ["torus", c, a, b] => Ok(DomainShape::SolidTorus { center: point(c)?, major: num(a)?, minor: num(b)? }),
            _ => Err(bad()),
        }
    }
}

/// Occupancy mask read from a `SMSMASK v1` file.
///
/// Header: `SMSMASK v1 d=<d> h=<h> origin=<x,y,z> dims=<nx,ny,nz>`, then
/// `nx*ny*nz` characters `0`/`1` (whitespace ignored) with the x index
/// slowest and the z index fastest.
#[derive(Debug, Clone)]
struct MaskData {
    dim: usize,
    h: f64,
    origin: Point,
    dims: [usize; 3],
    bits: Vec<bool>,
}

fn header_fields(line: &str) -> std::collections::HashMap<&str, &str> {
    line.split_whitespace().filter_map(|t| t.split_once('=')).collect()
}

impl MaskData {
    fn load(path: &str) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let head = lines.next().ok_or_else(|| SmsError::Malformed("empty mask file".into()))?;
        if !head.starts_with("SMSMASK v1") {
            return Err(SmsError::Malformed("mask header must start with SMSMASK v1".into()));
        }
        let kv = header_fields(head);
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| SmsError::Malformed(format!("mask header lacks {k}")));
        let parse_f = |t: &str| t.parse::<f64>().map_err(|_| SmsError::Malformed(format!("bad number {t}")));
        let dim: usize = get("d")?.parse().map_err(|_| SmsError::Malformed("bad d".into()))?;
        let h = parse_f(get("h")?)?;
        let o: Vec<f64> = get("origin")?.split(',').map(parse_f).collect::<Result<_>>()?;
        let n: Vec<usize> = get("dims")?
            .split(',')
            .map(|t| t.parse().map_err(|_| SmsError::Malformed("bad dims".into())))
            .collect::<Result<_>>()?;
        if o.len() != 3 || n.len() != 3 || !(dim == 2 || dim == 3) || !(h > 0.0) {
            return Err(SmsError::Malformed("mask header has wrong arity".into()));
        }
        let bits: Vec<bool> = lines
            .flat_map(|l| l.chars())
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(SmsError::Malformed(format!("unexpected mask character {other:?}"))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != n[0] * n[1] * n[2] {
            return Err(SmsError::Malformed(format!(
                "mask body has {} cells, header says {}",
                bits.len(),
                n[0] * n[1] * n[2]
            )));
        }
        Ok(MaskData { dim, h, origin: [o[0], o[1], o[2]], dims: [n[0], n[1], n[2]], bits })
    }
}

/// Uniform lattice with an interior mask encoding Ω.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    shape: DomainShape,
    dim: usize,
    h: f64,
    origin: Point,
    dims: [usize; 3],
    lattice_to_node: Vec<u32>,
    nodes: Vec<[u32; 3]>,
    neighbors: Vec<u32>,
}

impl DomainGrid {
    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Lattice dimensions including the Dirichlet ring.
    pub fn lattice_dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lattice_index(&self, node: usize) -> [u32; 3] {
        self.nodes[node]
    }

    /// Interior node at a lattice index, if any.
    pub fn node_at(&self, idx: [i64; 3]) -> Option<usize> {
        for a in 0..3 {
            if idx[a] < 0 || idx[a] as usize >= self.dims[a] {
                return None;
            }
        }
        let lin = (idx[0] as usize * self.dims[1] + idx[1] as usize) * self.dims[2] + idx[2] as usize;
        match self.lattice_to_node[lin] {
            NONE => None,
            n => Some(n as usize),
        }
    }

    pub fn coord(&self, node: usize) -> Point {
        let idx = self.nodes[node];
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + idx[a] as f64 * self.h;
        }
        x
    }

    pub fn coords(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.coord(i))
    }

    /// Stencil neighbours of a node (`2d` entries, `None` for Dirichlet nodes).
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        let s = 2 * self.dim;
        self.neighbors[node * s..(node + 1) * s]
            .iter()
            .map(|&n| if n == NONE { None } else { Some(n as usize) })
    }

    /// Euclidean distance between two points using the active axes.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        (0..self.dim).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
    }

    /// Signed distance to ∂Ω. Analytic for catalog shapes; for mask domains
    /// the distance to the nearest non-interior lattice node (accurate to h).
    pub fn signed_distance(&self, x: &Point) -> f64 {
        if let Some(d) = self.shape.signed_distance(x, self.dim) {
            return d;
        }
        let inside = self.contains_lattice(x);
        let mut best = f64::INFINITY;
        for lin in 0..self.lattice_to_node.len() {
            let interior = self.lattice_to_node[lin] != NONE;
            if interior == inside {
                continue;
            }
            let k = lin % self.dims[2];
            let j = (lin / self.dims[2]) % self.dims[1];
            let i = lin / (self.dims[1] * self.dims[2]);
            let idx = [i, j, k];
            let mut p = [0.0; 3];
            for a in 0..self.dim {
                p[a] = self.origin[a] + idx[a] as f64 * self.h;
            }
            best = best.min(self.distance(x, &p));
        }
        if inside {
            -best
        } else {
            best
        }
    }

    fn contains_lattice(&self, x: &Point) -> bool {
        let mut idx = [0i64; 3];
        for a in 0..self.dim {
            idx[a] = ((x[a] - self.origin[a]) / self.h).round() as i64;
        }
        self.node_at(idx).is_some()
    }

    pub fn same_as(&self, other: &DomainGrid) -> bool {
        std::ptr::eq(self, other)
            || (self.dim == other.dim
                && self.h.to_bits() == other.h.to_bits()
                && self.nodes.len() == other.nodes.len()
                && self.shape == other.shape)
    }

    fn assemble(shape: DomainShape, dim: usize, h: f64, origin: Point, dims: [usize; 3], inside: impl Fn(usize, Point) -> bool) -> Result<Self> {
        let total = dims[0] * dims[1] * dims[2];
        let mut lattice_to_node = vec![NONE; total];
        let mut nodes = Vec::new();
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let lin = (i * dims[1] + j) * dims[2] + k;
                    let idx = [i, j, k];
                    let mut x = [0.0; 3];
                    for a in 0..dim {
                        x[a] = origin[a] + idx[a] as f64 * h;
                    }
                    // the outer lattice ring is always Dirichlet
                    let on_ring = (0..dim).any(|a| idx[a] == 0 || idx[a] + 1 == dims[a]);
                    if !on_ring && inside(lin, x) {
                        lattice_to_node[lin] = nodes.len() as u32;
                        nodes.push([i as u32, j as u32, k as u32]);
                    }
                }
            }
        }
        if nodes.is_empty() {
            return Err(SmsError::EmptyInterior);
        }
        let s = 2 * dim;
        let mut neighbors = vec![NONE; nodes.len() * s];
        for (n, idx) in nodes.iter().enumerate() {
            for a in 0..dim {
                for (side, delta) in [(0usize, -1i64), (1, 1)] {
                    let mut m = [idx[0] as usize, idx[1] as usize, idx[2] as usize];
                    m[a] = (m[a] as i64 + delta) as usize;
                    let lin = (m[0] * dims[1] + m[1]) * dims[2] + m[2];
                    neighbors[n * s + 2 * a + side] = lattice_to_node[lin];
                }
            }
        }
        Ok(DomainGrid { shape, dim, h, origin, dims, lattice_to_node, nodes, neighbors })
    }
}

/// Builds the lattice for `shape` with spacing `h` in dimension `dim` (2 or 3).
///
/// Catalog shapes get a lattice centred on the shape so that symmetric
/// domains give symmetric grids; nodes are ordered lexicographically by
/// lattice index (x slowest).
pub fn build_domain(shape: &DomainShape, h: f64, dim: usize) -> Result<Arc<DomainGrid>> {
    if !(dim == 2 || dim == 3) {
        return Err(SmsError::InvalidShape(format!("dimension must be 2 or 3, got {dim}")));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(SmsError::InvalidShape(format!("spacing must be positive, got {h}")));
    }
    shape.validate(dim)?;
    if let DomainShape::MaskFile { path } = shape {
        let mask = MaskData::load(path)?;
        if mask.dim != dim {
            return Err(SmsError::InvalidShape(format!("mask is {}-D, grid requested {dim}-D", mask.dim)));
        }
        if ((mask.h - h) / h).abs() > 1e-12 {
            return Err(SmsError::InvalidShape(format!("mask spacing {} differs from h = {h}", mask.h)));
        }
        // pad with one Dirichlet ring on each side
        let mut dims = [1usize; 3];
        let mut origin = [0.0; 3];
        for a in 0..dim {
            dims[a] = mask.dims[a] + 2;
            origin[a] = mask.origin[a] - h;
        }
        let md = mask.dims;
        let grid = DomainGrid::assemble(shape.clone(), dim, h, origin, dims, |lin, _| {
            let k = lin % dims[2];
            let j = (lin / dims[2]) % dims[1];
            let i = lin / (dims[1] * dims[2]);
            let (i, j) = (i - 1, j - 1);
            let k = if dim == 3 { k - 1 } else { k };
            mask.bits[(i * md[1] + j) * md[2] + k]
        })?;
        return Ok(Arc::new(grid));
    }

    let gap = shape.narrowest_gap(dim).expect("catalog shape");
    if gap < 4.0 * h {
        return Err(SmsError::TooCoarse { gap, h });
    }
    let (center, half) = shape.frame().expect("catalog shape");
    let mut dims = [1usize; 3];
    let mut origin = [0.0; 3];
    for a in 0..dim {
        let k = (half[a] / h).floor() as usize + 1;
        dims[a] = 2 * k + 1;
        origin[a] = center[a] - k as f64 * h;
    }
    let grid = DomainGrid::assemble(shape.clone(), dim, h, origin, dims, |_, x| {
        shape.signed_distance(&x, dim).expect("catalog shape") < 0.0
    })?;
    Ok(Arc::new(grid))
}

/// A real function on the interior nodes of a grid, zero elsewhere.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<DomainGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<DomainGrid>) -> Self {
        Field { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: &Arc<DomainGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SmsError::GridMismatch);
        }
        Ok(Field { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &Arc<DomainGrid>, f: impl Fn(Point) -> f64) -> Self {
        let values = grid.coords().map(f).collect();
        Field { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<DomainGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(SmsError::GridMismatch)
        }
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `self + a * other`
    pub fn add_scaled(&self, a: f64, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Ok(Field { grid: self.grid.clone(), values })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Plain lattice L² norm `sqrt(h^d Σ u²)`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * dot(&self.values, &self.values)).sqrt()
    }

    /// Writes the `SMSFIELD v1` dump: one text header line, then the values
    /// as little-endian IEEE-754 doubles in node order.
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "SMSFIELD v1 d={} h={} shape={} n={}",
            self.grid.dim,
            self.grid.h,
            self.grid.shape,
            self.values.len()
        )?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        self.write_dump(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Reads a dump, rebuilding its grid from the header.
    pub fn read_dump(r: impl Read) -> Result<Field> {
        let mut r = BufReader::new(r);
        let mut head = String::new();
        r.read_line(&mut head)?;
        let head = head.trim_end_matches('\n');
        if !head.starts_with("SMSFIELD v1 ") {
            return Err(SmsError::Malformed("missing SMSFIELD v1 header".into()));
        }
        let kv = header_fields(head);
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| SmsError::Malformed(format!("header lacks {k}")));
        let dim: usize = get("d")?.parse().map_err(|_| SmsError::Malformed("bad d".into()))?;
        let h: f64 = get("h")?.parse().map_err(|_| SmsError::Malformed("bad h".into()))?;
        let n: usize = get("n")?.parse().map_err(|_| SmsError::Malformed("bad n".into()))?;
        let shape: DomainShape = get("shape")?.parse()?;
        let grid = build_domain(&shape, h, dim)?;
        if grid.len() != n {
            return Err(SmsError::Malformed(format!("header n={n} but grid has {} nodes", grid.len())));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n {
            return Err(SmsError::Malformed(format!("expected {} payload bytes, found {}", 8 * n, bytes.len())));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Field::from_values(&grid, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Field> {
        Field::read_dump(fs::File::open(path)?)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = a·(−Δ_h x) + b·x` on the interior nodes.
pub(crate) fn shifted_laplacian_into(grid: &DomainGrid, a: f64, b: f64, x: &[f64], y: &mut [f64]) {
    let s = 2 * grid.dim;
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let diag = a * s as f64 * inv_h2 + b;
    let off = a * inv_h2;
    for (i, (yi, nb)) in y.iter_mut().zip(grid.neighbors.chunks_exact(s)).enumerate() {
        let mut acc = 0.0;
        for &n in nb {
            if n != NONE {
                acc += x[n as usize];
            }
        }
        *yi = diag * x[i] - off * acc;
    }
}

/// Forward/backward symmetric Gauss–Seidel sweep used as an SSOR preconditioner.
pub(crate) fn ssor_apply(grid: &DomainGrid, a: f64, b: f64, omega: f64, r: &[f64], z: &mut [f64]) {
    let s = 2 * grid.dim;
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let diag = a * s as f64 * inv_h2 + b;
    let off = a * inv_h2;
    let n = r.len();
    // (D/ω + L) y = r
    for i in 0..n {
        let mut acc = 0.0;
        for &m in &grid.neighbors[i * s..(i + 1) * s] {
            if m != NONE && (m as usize) < i {
                acc += z[m as usize];
            }
        }
        z[i] = (r[i] + off * acc) * omega / diag;
    }
    // z ← (2−ω)/ω · (D/ω) y
    let scale = (2.0 - omega) * diag / (omega * omega);
    for v in z.iter_mut() {
        *v *= scale;
    }
    // (D/ω + U) z = D y
    for i in (0..n).rev() {
        let mut acc = 0.0;
        for &m in &grid.neighbors[i * s..(i + 1) * s] {
            if m != NONE && (m as usize) > i {
                acc += z[m as usize];
            }
        }
        z[i] = (z[i] + off * acc) * omega / diag;
    }
}

/// Discrete `−Δ_h u` with zero Dirichlet data.
pub fn apply_laplacian(u: &Field) -> Field {
    let mut out = vec![0.0; u.len()];
    shifted_laplacian_into(&u.grid, 1.0, 0.0, &u.values, &mut out);
    Field { grid: u.grid.clone(), values: out }
}

/// ε-weighted H¹ inner product `(1/ε^d) h^d (ε²⟨−Δ_h u, w⟩ + ⟨u, w⟩)`.
pub fn inner_h1_eps(u: &Field, w: &Field, params: &Params) -> Result<f64> {
    u.check_same_grid(w)?;
    Ok(inner_eps_raw(&u.grid, params.eps, &u.values, &w.values))
}

pub(crate) fn inner_eps_raw(grid: &DomainGrid, eps: f64, u: &[f64], w: &[f64]) -> f64 {
    let mut lu = vec![0.0; u.len()];
    shifted_laplacian_into(grid, eps * eps, 1.0, u, &mut lu);
    grid.cell_volume() / eps.powi(grid.dim as i32) * dot(&lu, w)
}

/// `((1/ε^d) h^d Σ |g(u_i)|^t)^{1/t}` with `g` the identity or the positive part.
pub fn lp_norm_eps(u: &Field, t: f64, params: &Params, positive_part: bool) -> f64 {
    lp_pow_eps(u, t, params.eps, positive_part).powf(1.0 / t)
}

/// `(1/ε^d) h^d Σ |g(u_i)|^t` (the t-th power of [`lp_norm_eps`]).
pub fn lp_pow_eps(u: &Field, t: f64, eps: f64, positive_part: bool) -> f64 {
    let sum: f64 = if positive_part {
        u.values.iter().map(|&v| if v > 0.0 { v.powf(t) } else { 0.0 }).sum()
    } else {
        u.values.iter().map(|&v| v.abs().powf(t)).sum()
    };
    u.grid.cell_volume() / eps.powi(u.grid.dim as i32) * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_strict_interior_count() {
        let g = build_domain(&DomainShape::cube(0.0, 1.0), 0.25, 3).unwrap();
        assert_eq!(g.len(), 27);
    }

    #[test]
    fn invalid_shell_rejected() {
        let s = DomainShape::shell(0.5, 0.4);
        assert!(matches!(build_domain(&s, 0.01, 3), Err(SmsError::InvalidShape(_))));
    }

    #[test]
    fn too_coarse_rejected() {
        let s = DomainShape::ball(1.0);
        assert!(matches!(build_domain(&s, 0.6, 3), Err(SmsError::TooCoarse { .. })));
    }

    #[test]
    fn torus_needs_three_dimensions() {
        let s = DomainShape::SolidTorus { center: [0.0; 3], major: 1.0, minor: 0.3 };
        assert!(build_domain(&s, 0.05, 2).is_err());
        assert!(build_domain(&s, 0.05, 3).is_ok());
    }

    #[test]
    fn canonical_string_roundtrip() {
        for s in [
            DomainShape::ball(1.0),
            DomainShape::shell(0.2, 1.0),
            DomainShape::Box { lo: [0.0, -0.5, 0.25], hi: [1.0, 0.5, 1.5] },
            DomainShape::SolidTorus { center: [0.1, 0.0, 0.0], major: 0.7, minor: 0.25 },
            DomainShape::MaskFile { path: "/tmp/x.mask".into() },
        ] {
            let back: DomainShape = s.to_string().parse().unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn neighbors_of_corner_node_hit_dirichlet_ring() {
        let g = build_domain(&DomainShape::cube(0.0, 1.0), 0.25, 3).unwrap();
        let missing = g.neighbors(0).filter(Option::is_none).count();
        assert_eq!(missing, 3);
    }

    #[test]
    fn signed_distances() {
        let b = DomainShape::ball(1.0);
        assert!((b.signed_distance(&[0.0; 3], 3).unwrap() + 1.0).abs() < 1e-15);
        let s = DomainShape::shell(0.5, 1.0);
        assert!((s.signed_distance(&[0.75, 0.0, 0.0], 3).unwrap() + 0.25).abs() < 1e-15);
        assert!((s.signed_distance(&[0.0; 3], 3).unwrap() - 0.5).abs() < 1e-15);
        let c = DomainShape::cube(0.0, 1.0);
        assert!((c.signed_distance(&[0.5, 0.5, 0.9], 3).unwrap() + 0.1).abs() < 1e-12);
        assert!((c.signed_distance(&[1.3, 0.5, 0.5], 3).unwrap() - 0.3).abs() < 1e-12);
    }
}
