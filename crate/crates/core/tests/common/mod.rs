//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use kws_fewshot::linalg::Matrix;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / (na * nb)
}

fn cross_entropy(logits: &[f64], y: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    lse - logits[y]
}

/// Mean of each class's support rows, summed one element at a time.
pub fn brute_prototypes(support: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    support
        .iter()
        .map(|rows| {
            let mut c = vec![0.0; rows[0].len()];
            for r in rows {
                for (ci, v) in c.iter_mut().zip(r) {
                    *ci += v;
                }
            }
            c.iter().map(|v| v / rows.len() as f64).collect()
        })
        .collect()
}

/// Prototypical loss with logits `-d(q, c_k)`.
pub fn pn_value(support: &[Vec<Vec<f64>>], queries: &[(usize, Vec<f64>)]) -> f64 {
    let protos = brute_prototypes(support);
    let total: f64 = queries
        .iter()
        .map(|(y, q)| {
            let logits: Vec<f64> = protos.iter().map(|c| -dist(q, c)).collect();
            cross_entropy(&logits, *y)
        })
        .sum();
    total / queries.len() as f64
}

/// Angular prototypical loss with logits `w (cos - m [true]) + b`.
pub fn ap_value(
    support: &[Vec<Vec<f64>>],
    queries: &[(usize, Vec<f64>)],
    w: f64,
    b: f64,
    m: f64,
) -> f64 {
    let protos = brute_prototypes(support);
    let total: f64 = queries
        .iter()
        .map(|(y, q)| {
            let logits: Vec<f64> = protos
                .iter()
                .enumerate()
                .map(|(k, c)| w * (cosine(q, c) - if k == *y { m } else { 0.0 }) + b)
                .collect();
            cross_entropy(&logits, *y)
        })
        .sum();
    total / queries.len() as f64
}

/// Mean hinge over explicit `(anchor, positive, negative)` row triples.
pub fn tl_value(rows: &[Vec<f64>], triplets: &[(usize, usize, usize)], m: f64) -> f64 {
    triplets
        .iter()
        .map(|&(a, p, n)| (dist(&rows[a], &rows[p]) - dist(&rows[a], &rows[n]) + m).max(0.0))
        .sum::<f64>()
        / triplets.len() as f64
}

/// Central differences of `f` at `x`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let v = x[i];
            x[i] = v + h;
            let up = f(&x);
            x[i] = v - h;
            let down = f(&x);
            x[i] = v;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = dist(a, b);
    let scale = dist(a, &vec![0.0; a.len()]).max(dist(b, &vec![0.0; b.len()]));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Pairwise AUROC: fraction of (positive, negative) pairs ordered correctly,
/// ties counting one half.
pub fn pairwise_auroc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Splits a flat vector into `groups` of `per` rows of `dim` values.
pub fn unflatten(x: &[f64], groups: usize, per: usize, dim: usize) -> Vec<Vec<Vec<f64>>> {
    (0..groups)
        .map(|g| {
            (0..per)
                .map(|r| x[(g * per + r) * dim..(g * per + r + 1) * dim].to_vec())
                .collect()
        })
        .collect()
}
