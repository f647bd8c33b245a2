//! Convex polytopes in low dimension: hulls, halfspace intersections,
//! separation, containment and box translation.

mod dd;
mod minnorm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dd::{cone_generators, ConeGenerators};
pub use minnorm::{min_norm_point, MinNorm};

/// Largest supported dimension.
pub const MAX_DIM: usize = 6;
/// Membership tolerance.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension {0} exceeds the supported maximum of 6")]
    DimensionTooHigh(usize),
    #[error("polytope needs at least one point")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl GeometryError {
    pub fn code(&self) -> &'static str {
        match self {
            GeometryError::DimensionTooHigh(_) => "DimensionTooHigh",
            GeometryError::Empty => "EmptyPolytope",
            GeometryError::DimensionMismatch { .. } => "DimensionMismatch",
        }
    }
}

/// `normal · p ≤ offset`, with a unit normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// Builds a halfspace, scaling the normal to unit length.
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        let n = norm(&normal);
        if n == 0.0 {
            return Halfspace { normal, offset };
        }
        Halfspace { normal: normal.iter().map(|x| x / n).collect(), offset: offset / n }
    }

    pub fn slack(&self, p: &[f64]) -> f64 {
        self.offset - dot(&self.normal, p)
    }
}

/// Convex polyhedron as vertices plus recession rays `-e_i` for the flagged
/// dimensions, together with its facet halfspaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub halfspaces: Vec<Halfspace>,
    pub downward_closed: Vec<bool>,
}

/// Per-dimension digitization error bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBox {
    pub down: Vec<f64>,
    pub up: Vec<f64>,
}

impl ErrorBox {
    pub fn zero(dim: usize) -> Self {
        ErrorBox { down: vec![0.0; dim], up: vec![0.0; dim] }
    }

    pub fn is_zero(&self) -> bool {
        self.down.iter().chain(&self.up).all(|x| *x == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shift {
    /// Shift by `-ε↓`.
    Down,
    /// Shift by `+ε↑`.
    Up,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dim(dim: usize) -> Result<(), GeometryError> {
    if dim > MAX_DIM {
        Err(GeometryError::DimensionTooHigh(dim))
    } else {
        Ok(())
    }
}

fn dedup_points(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !out.iter().any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= TOL)) {
            out.push(p.clone());
        }
    }
    out
}

/// Convex hull of `points` extended by `-e_i` rays for every flagged dimension.
pub fn hull(points: &[Vec<f64>], downward_closed: &[bool]) -> Result<Polytope, GeometryError> {
    let first = points.first().ok_or(GeometryError::Empty)?;
    let dim = first.len();
    check_dim(dim)?;
    if downward_closed.len() != dim {
        return Err(GeometryError::DimensionMismatch { expected: dim, got: downward_closed.len() });
    }
    for p in points {
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch { expected: dim, got: p.len() });
        }
    }
    let pts = dedup_points(points);
    // polar cone: (a, β) with a·p ≤ β for points and a·r ≤ 0 for rays
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for p in &pts {
        let mut r = p.clone();
        r.push(-1.0);
        rows.push(r);
    }
    for (i, &f) in downward_closed.iter().enumerate() {
        if f {
            let mut r = vec![0.0; dim + 1];
            r[i] = -1.0;
            rows.push(r);
        }
    }
    let gens = cone_generators(&rows, dim + 1);
    let mut halfspaces: Vec<Halfspace> = Vec::new();
    let push = |normal: &[f64], offset: f64, hs: &mut Vec<Halfspace>| {
        if norm(normal) <= 1e-12 {
            return;
        }
        let h = Halfspace::new(normal.to_vec(), offset);
        if !hs.iter().any(|g| g.normal.iter().zip(&h.normal).all(|(a, b)| (a - b).abs() <= 1e-9) && (g.offset - h.offset).abs() <= 1e-9) {
            hs.push(h);
        }
    };
    for l in &gens.lineality {
        let (a, beta) = l.split_at(dim);
        push(a, beta[0], &mut halfspaces);
        let na: Vec<f64> = a.iter().map(|x| -x).collect();
        push(&na, -beta[0], &mut halfspaces);
    }
    for r in &gens.rays {
        let (a, beta) = r.split_at(dim);
        push(a, beta[0], &mut halfspaces);
    }
    let vertices = extreme_points(&pts, &halfspaces, dim);
    Ok(Polytope { dim, vertices, halfspaces, downward_closed: downward_closed.to_vec() })
}

fn extreme_points(points: &[Vec<f64>], halfspaces: &[Halfspace], dim: usize) -> Vec<Vec<f64>> {
    points
        .iter()
        .filter(|p| {
            let tight: Vec<&[f64]> = halfspaces
                .iter()
                .filter(|h| h.slack(p).abs() <= 1e-11 * (1.0 + h.offset.abs()))
                .map(|h| h.normal.as_slice())
                .collect();
            dd::rank(&tight, dim) == dim
        })
        .cloned()
        .collect()
}

/// Polyhedron `{p | w·p ≤ b}`; vertices are enumerated by double description.
/// Without enough halfspaces to be pointed the vertex list is empty.
pub fn from_halfspaces(dim: usize, halfspaces: &[Halfspace], downward_closed: &[bool]) -> Result<Polytope, GeometryError> {
    check_dim(dim)?;
    let mut rows: Vec<Vec<f64>> = halfspaces
        .iter()
        .map(|h| {
            let mut r = h.normal.clone();
            r.push(-h.offset);
            r
        })
        .collect();
    let mut t = vec![0.0; dim + 1];
    t[dim] = -1.0;
    rows.push(t);
    let gens = cone_generators(&rows, dim + 1);
    let mut vertices = Vec::new();
    if gens.lineality.is_empty() {
        for r in &gens.rays {
            if r[dim] > 1e-9 {
                let v: Vec<f64> = r[..dim].iter().map(|x| x / r[dim]).collect();
                vertices.push(v);
            }
        }
    }
    let vertices = dedup_points(&vertices);
    Ok(Polytope { dim, vertices, halfspaces: halfspaces.to_vec(), downward_closed: downward_closed.to_vec() })
}

/// Halfspace membership with tolerance [`TOL`].
pub fn contains(poly: &Polytope, point: &[f64]) -> bool {
    poly.halfspaces.iter().all(|h| h.slack(point) >= -TOL)
}

/// Shifts every vertex by `-box.down` or `+box.up`.
pub fn translate(poly: &Polytope, error_box: &ErrorBox, sign: Shift) -> Polytope {
    let shift: Vec<f64> = match sign {
        Shift::Down => error_box.down.iter().map(|x| -x).collect(),
        Shift::Up => error_box.up.clone(),
    };
    Polytope {
        dim: poly.dim,
        vertices: poly.vertices.iter().map(|v| v.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect(),
        halfspaces: poly
            .halfspaces
            .iter()
            .map(|h| Halfspace { normal: h.normal.clone(), offset: h.offset + dot(&h.normal, &shift) })
            .collect(),
        downward_closed: poly.downward_closed.clone(),
    }
}

/// Nearest point of `conv(points) + cone(-e_i : flagged)` to `target`.
///
/// Returns the distance, the nearest point and convex weights over `points`
/// of a combination that dominates the nearest point in flagged dimensions.
pub fn nearest_point(points: &[Vec<f64>], downward_closed: &[bool], target: &[f64]) -> (f64, Vec<f64>, Vec<(usize, f64)>) {
    let dim = target.len();
    // the nearest point never lies below min(target, points) in flagged dimensions
    let lo: Vec<f64> = (0..dim)
        .map(|i| points.iter().map(|p| p[i]).fold(target[i], f64::min) - 1.0)
        .collect();
    let flagged: Vec<usize> = (0..dim).filter(|&i| downward_closed[i]).collect();
    let mut gens = Vec::with_capacity(points.len() << flagged.len());
    let mut origin = Vec::with_capacity(gens.capacity());
    for (k, p) in points.iter().enumerate() {
        for mask in 0u32..(1 << flagged.len()) {
            let mut q: Vec<f64> = p.iter().zip(target).map(|(a, t)| a - t).collect();
            for (b, &i) in flagged.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    q[i] = lo[i] - target[i];
                }
            }
            gens.push(q);
            origin.push(k);
        }
    }
    let mn = min_norm_point(&gens);
    let dist = norm(&mn.point);
    let nearest: Vec<f64> = mn.point.iter().zip(target).map(|(a, t)| a + t).collect();
    let mut weights: Vec<(usize, f64)> = Vec::new();
    for (g, w) in mn.weights {
        let k = origin[g];
        match weights.iter_mut().find(|e| e.0 == k) {
            Some(e) => e.1 += w,
            None => weights.push((k, w)),
        }
    }
    weights.sort_by_key(|e| e.0);
    (dist, nearest, weights)
}

/// Largest distance from a vertex of `over` to `under`, with the unit direction
/// from the nearest point of `under` to that vertex.
pub fn max_gap(under: &Polytope, over: &Polytope) -> (Vec<f64>, f64) {
    let dim = under.dim;
    let uniform = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for v in &over.vertices {
        let (d, near, _) = nearest_point(&under.vertices, &under.downward_closed, v);
        if d <= 1e-12 {
            continue;
        }
        let w: Vec<f64> = v.iter().zip(&near).map(|(a, b)| (a - b) / d).collect();
        let better = match &best {
            None => true,
            Some((bw, bd)) => d > bd + 1e-12 || ((d - bd).abs() <= 1e-12 && w < *bw),
        };
        if better {
            best = Some((w, d));
        }
    }
    best.unwrap_or((uniform, 0.0))
}
