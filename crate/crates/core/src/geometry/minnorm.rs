//! Wolfe's minimum-norm-point algorithm over the convex hull of a finite point set.

use nalgebra::{DMatrix, DVector};

/// Result of a min-norm computation: the point and its convex weights over the inputs.
#[derive(Clone, Debug)]
pub struct MinNorm {
    pub point: Vec<f64>,
    pub weights: Vec<(usize, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(points: &[Vec<f64>], set: &[usize], coef: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (k, &i) in set.iter().enumerate() {
        for j in 0..dim {
            x[j] += coef[k] * points[i][j];
        }
    }
    x
}

/// Coefficients of the min-norm point of the affine hull of `set`, or `None` if singular.
fn affine_minimizer(points: &[Vec<f64>], set: &[usize]) -> Option<Vec<f64>> {
    let k = set.len();
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            m[(a, b)] = dot(&points[set[a]], &points[set[b]]);
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    let coef: Vec<f64> = (0..k).map(|i| sol[i]).collect();
    if coef.iter().any(|c| !c.is_finite()) {
        return None;
    }
    Some(coef)
}

/// Minimum-norm point of `conv(points)`.
pub fn min_norm_point(points: &[Vec<f64>]) -> MinNorm {
    assert!(!points.is_empty());
    let dim = points[0].len();
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let start = (0..points.len())
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .unwrap();
    let mut set = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();
    for _major in 0..10_000 {
        let xx = dot(&x, &x);
        let (j, best) = (0..points.len())
            .map(|i| (i, dot(&x, &points[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if best >= xx - tol || set.contains(&j) {
            break;
        }
        set.push(j);
        lambda.push(0.0);
        loop {
            let Some(alpha) = affine_minimizer(points, &set) else {
                // degenerate affine set: drop the newest point and stop
                set.pop();
                lambda.pop();
                let sum: f64 = lambda.iter().sum();
                lambda.iter_mut().for_each(|l| *l /= sum);
                x = combine(points, &set, &lambda, dim);
                return finish(x, set, lambda);
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                lambda = alpha;
                x = combine(points, &set, &lambda, dim);
                break;
            }
            let mut theta = 1.0f64;
            for k in 0..set.len() {
                if alpha[k] <= 1e-14 {
                    let denom = lambda[k] - alpha[k];
                    if denom > 0.0 {
                        theta = theta.min(lambda[k] / denom);
                    }
                }
            }
            for k in 0..set.len() {
                lambda[k] = theta * alpha[k] + (1.0 - theta) * lambda[k];
            }
            let mut k = 0;
            let mut removed = false;
            while k < set.len() {
                if lambda[k] <= 1e-14 {
                    set.remove(k);
                    lambda.remove(k);
                    removed = true;
                } else {
                    k += 1;
                }
            }
            if !removed {
                // numerical stall: drop the smallest weight
                let (k, _) = lambda.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
                set.remove(k);
                lambda.remove(k);
            }
            let sum: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= sum);
            x = combine(points, &set, &lambda, dim);
            if set.len() == 1 {
                break;
            }
        }
    }
    finish(x, set, lambda)
}

fn finish(point: Vec<f64>, set: Vec<usize>, lambda: Vec<f64>) -> MinNorm {
    MinNorm { point, weights: set.into_iter().zip(lambda).collect() }
}
