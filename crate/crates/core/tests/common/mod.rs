//! Test-only generators and brute-force oracles. Nothing here calls into
//! the reduction engine or the crate's linear algebra.

#![allow(dead_code)]

use cubature_core::DiscreteMeasure;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `m` atoms uniform in `[lo, hi]^n` with weights uniform in `[0.1, 2]`.
pub fn random_measure(rng: &mut ChaCha8Rng, m: usize, n: usize, lo: f64, hi: f64) -> DiscreteMeasure {
    let coords: Vec<f64> = (0..m * n).map(|_| rng.gen_range(lo..=hi)).collect();
    let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..=2.0)).collect();
    DiscreteMeasure::new(n, coords, weights).unwrap()
}

/// Every exponent vector with `sum k_i a_i <= m`, by nested counting.
pub fn brute_force_exponents(weights: &[u32], m: u32) -> Vec<Vec<u32>> {
    let n = weights.len();
    let bounds: Vec<u32> = weights.iter().map(|&k| m / k).collect();
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    loop {
        let deg: u32 = cur.iter().zip(weights).map(|(a, k)| a * k).sum();
        if deg <= m {
            out.push(cur.clone());
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            if cur[i] < bounds[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
}

pub fn naive_monomial(exponents: &[u32], x: &[f64]) -> f64 {
    exponents.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product()
}

/// Solves the square or overdetermined system `cols * w = b` through the
/// normal equations with Gaussian elimination and partial pivoting.
/// Returns `None` for a singular system.
pub fn solve_normal_equations(cols: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            a[i][j] = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
        }
        a[i][k] = cols[i].iter().zip(b).map(|(x, y)| x * y).sum();
    }
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    Some((0..k).map(|i| a[i][k] / a[i][i]).collect())
}

/// All positive cubatures with at most `max_nodes` nodes drawn from
/// `points` that reproduce `target` under `embed`, found by enumerating
/// subsets and solving each small system.
pub fn enumerate_cubatures(
    points: &[Vec<f64>],
    embed: impl Fn(&[f64]) -> Vec<f64>,
    target: &[f64],
    max_nodes: usize,
) -> Vec<(Vec<usize>, Vec<f64>)> {
    let cols: Vec<Vec<f64>> = points.iter().map(|p| embed(p)).collect();
    let scale = 1.0 + target.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = Vec::new();
    let n = points.len();
    for mask in 1u64..(1 << n) {
        if mask.count_ones() as usize > max_nodes {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub: Vec<Vec<f64>> = subset.iter().map(|&i| cols[i].clone()).collect();
        let Some(w) = solve_normal_equations(&sub, target) else { continue };
        if w.iter().any(|&v| v <= 1e-12) {
            continue;
        }
        let ok = (0..target.len()).all(|j| {
            let q: f64 = sub.iter().zip(&w).map(|(c, wi)| c[j] * wi).sum();
            (q - target[j]).abs() <= 1e-9 * scale
        });
        if ok {
            out.push((subset, w));
        }
    }
    out
}

/// Numerical rank by Gaussian elimination with full pivoting.
pub fn oracle_rank(cols: &[Vec<f64>], rel_tol: f64) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let rows = cols[0].len();
    let mut a: Vec<Vec<f64>> = (0..rows).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let ncols = cols.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rank = 0;
    let mut used_cols = vec![false; ncols];
    let mut used_rows = vec![false; rows];
    loop {
        let mut best = (0, 0, 0.0f64);
        for i in 0..rows {
            if used_rows[i] {
                continue;
            }
            for j in 0..ncols {
                if !used_cols[j] && a[i][j].abs() > best.2 {
                    best = (i, j, a[i][j].abs());
                }
            }
        }
        if best.2 <= rel_tol * scale {
            return rank;
        }
        let (p, q, _) = best;
        used_rows[p] = true;
        used_cols[q] = true;
        rank += 1;
        for i in 0..rows {
            if i != p {
                let f = a[i][q] / a[p][q];
                for j in 0..ncols {
                    a[i][j] -= f * a[p][j];
                }
            }
        }
    }
}
