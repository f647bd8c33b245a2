//! Double description method for the cone `{y | a·y ≤ 0 for every row a}`.

use nalgebra::DMatrix;

/// Extreme rays and a lineality basis of a polyhedral cone.
#[derive(Clone, Debug, Default)]
pub struct ConeGenerators {
    pub rays: Vec<Vec<f64>>,
    pub lineality: Vec<Vec<f64>>,
}

const EPS: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

/// Orthonormal basis of the null space of `rows` (each of length `dim`).
pub fn null_space(rows: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let m = rows.len().max(dim);
    let mut mat = DMatrix::<f64>::zeros(m, dim);
    for (i, r) in rows.iter().enumerate() {
        for j in 0..dim {
            mat[(i, j)] = r[j];
        }
    }
    let scale = rows.iter().map(|r| norm(r)).fold(0.0, f64::max).max(1.0);
    let svd = mat.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut out = Vec::new();
    for (k, sv) in svd.singular_values.iter().enumerate() {
        if *sv <= 1e-9 * scale {
            out.push(vt.row(k).iter().copied().collect());
        }
    }
    out
}

/// Numerical rank of a set of row vectors.
pub fn rank(rows: &[&[f64]], dim: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut mat = DMatrix::<f64>::zeros(rows.len(), dim);
    for (i, r) in rows.iter().enumerate() {
        for j in 0..dim {
            mat[(i, j)] = r[j];
        }
    }
    let scale = rows.iter().map(|r| norm(r)).fold(0.0, f64::max).max(1e-300);
    mat.rank(1e-9 * scale)
}

#[derive(Clone)]
struct Ray {
    v: Vec<f64>,
    zero: Vec<u64>,
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

fn popcount(a: &[u64]) -> u32 {
    a.iter().map(|x| x.count_ones()).sum()
}

/// Computes extreme rays of `{y ∈ ℝ^dim | a·y ≤ 0 ∀ a ∈ rows}` together with its lineality space.
pub fn cone_generators(rows: &[Vec<f64>], dim: usize) -> ConeGenerators {
    let lineality = null_space(rows, dim);
    let mut all: Vec<Vec<f64>> = rows.iter().map(|r| normalized(r.clone())).filter(|r| norm(r) > 0.0).collect();
    for l in &lineality {
        all.push(l.clone());
        all.push(l.iter().map(|x| -x).collect());
    }
    let m = all.len();
    let words = m.div_ceil(64).max(1);
    // pivoted Gram-Schmidt: take the row farthest from the current span each time
    let mut basis: Vec<usize> = Vec::new();
    let mut resid: Vec<Vec<f64>> = all.clone();
    while basis.len() < dim {
        let best = (0..m)
            .filter(|i| !basis.contains(i))
            .map(|i| (i, norm(&resid[i])))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let (i, len) = match best {
            Some(x) if x.1 > 1e-9 => x,
            _ => break,
        };
        basis.push(i);
        let q: Vec<f64> = resid[i].iter().map(|x| x / len).collect();
        for r in resid.iter_mut() {
            let c = dot(r, &q);
            r.iter_mut().zip(&q).for_each(|(x, y)| *x -= c * y);
        }
    }
    if basis.len() < dim {
        // cone is just {0} modulo lineality only when dim is zero; otherwise rows were degenerate
        return ConeGenerators { rays: Vec::new(), lineality };
    }
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for (i, &r) in basis.iter().enumerate() {
        for j in 0..dim {
            a[(i, j)] = all[r][j];
        }
    }
    let inv = a.try_inverse().expect("independent rows");
    let mut rays: Vec<Ray> = Vec::with_capacity(dim);
    for k in 0..dim {
        let v: Vec<f64> = (0..dim).map(|i| -inv[(i, k)]).collect();
        let v = normalized(v);
        let mut zero = vec![0u64; words];
        for (i, &r) in basis.iter().enumerate() {
            if i != k {
                set_bit(&mut zero, r);
            }
        }
        rays.push(Ray { v, zero });
    }
    let in_basis: Vec<bool> = (0..m).map(|i| basis.contains(&i)).collect();
    for i in 0..m {
        if in_basis[i] {
            continue;
        }
        let row = &all[i];
        let vals: Vec<f64> = rays.iter().map(|r| dot(row, &r.v)).collect();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut keep: Vec<Ray> = Vec::new();
        for (k, r) in rays.iter().enumerate() {
            if vals[k] > EPS {
                pos.push(k);
            } else if vals[k] < -EPS {
                neg.push(k);
                keep.push(r.clone());
            } else {
                let mut r = r.clone();
                set_bit(&mut r.zero, i);
                keep.push(r);
            }
        }
        if pos.is_empty() {
            rays = keep;
            continue;
        }
        let mut fresh = Vec::new();
        for &p in &pos {
            for &q in &neg {
                let common: Vec<u64> = rays[p].zero.iter().zip(&rays[q].zero).map(|(x, y)| x & y).collect();
                if (popcount(&common) as usize) + 2 < dim {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(k, r)| k == p || k == q || !subset(&common, &r.zero));
                if !adjacent {
                    continue;
                }
                let (vp, vq) = (vals[p], vals[q]);
                let v: Vec<f64> = rays[q].v.iter().zip(&rays[p].v).map(|(y, x)| vp * y - vq * x).collect();
                let v = normalized(v);
                let mut zero = common;
                set_bit(&mut zero, i);
                fresh.push(Ray { v, zero });
            }
        }
        keep.extend(fresh);
        rays = keep;
    }
    ConeGenerators { rays: rays.into_iter().map(|r| r.v).collect(), lineality }
}
