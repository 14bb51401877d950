//! Dense column-major matrices and a Householder QR with column pivoting.
//!
//! Feature matrices are stored one atom per column, so a column is a
//! contiguous slice.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_columns<C: AsRef<[f64]>>(rows: usize, columns: &[C]) -> Self {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            assert_eq!(c.len(), rows, "column has wrong length");
            data.extend_from_slice(c);
        }
        Self { rows, cols: columns.len(), data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.col(j), &mut y);
            }
        }
        y
    }

    pub fn max_col_norm(&self) -> f64 {
        (0..self.cols).map(|j| norm2(self.col(j))).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Absolute rank threshold for a matrix whose largest column norm is
/// `max_col_norm`: `rows * eps * max_col_norm`.
pub fn rank_tolerance(rows: usize, max_col_norm: f64) -> f64 {
    rows.max(1) as f64 * f64::EPSILON * max_col_norm
}

/// Householder QR with column pivoting, stopped once the largest remaining
/// column norm falls to `tol` or below.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    // Packed R (upper part) in column-major order; `perm[j]` is the
    // original column now in position j.
    qr: Matrix,
    perm: Vec<usize>,
    rank: usize,
    householder: Vec<(Vec<f64>, f64)>,
}

impl PivotedQr {
    pub fn factor(a: &Matrix, tol: f64) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = (0..n).map(|j| norm2(qr.col(j))).collect();
        let mut householder = Vec::new();
        let steps = m.min(n);
        let mut rank = 0;

        for k in 0..steps {
            let (p, &pnorm) = norms[k..]
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |best, (i, v)| if *v > *best.1 { (i, v) } else { best });
            let p = p + k;
            if pnorm <= tol {
                break;
            }
            if p != k {
                swap_cols(&mut qr, k, p);
                perm.swap(k, p);
                norms.swap(k, p);
            }

            // Reflector annihilating qr[k+1.., k].
            let x = &qr.col(k)[k..];
            let alpha = norm2(x);
            let mut v = x.to_vec();
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * alpha;
            let vnorm2 = dot(&v, &v);
            let beta = if vnorm2 > 0.0 { 2.0 / vnorm2 } else { 0.0 };

            for j in k..n {
                let col = &mut qr.col_mut(j)[k..];
                let s = beta * dot(&v, col);
                if s != 0.0 {
                    axpy(-s, &v, col);
                }
            }
            {
                let col = qr.col_mut(k);
                col[k] = -sign * alpha;
                for c in col[k + 1..].iter_mut() {
                    *c = 0.0;
                }
            }
            householder.push((v, beta));
            rank = k + 1;

            // Exact recomputation of the trailing norms keeps the
            // pivoting honest on small buffers.
            for j in k + 1..n {
                norms[j] = norm2(&qr.col(j)[k + 1..]);
            }
        }

        Self { qr, perm, rank, householder }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Basis of the numerical null space, one vector per non-pivot column,
    /// each scaled to unit max-norm. Vector i has a one at the original
    /// position of the (rank + i)-th pivoted column.
    pub fn null_basis(&self) -> Vec<Vec<f64>> {
        let n = self.qr.cols;
        let r = self.rank;
        let mut out = Vec::with_capacity(n - r);
        for free in r..n {
            // Solve R11 z = R12[:, free] by back substitution.
            let mut z: Vec<f64> = self.qr.col(free)[..r].to_vec();
            for i in (0..r).rev() {
                let mut s = z[i];
                for j in i + 1..r {
                    s -= self.qr.get(i, j) * z[j];
                }
                z[i] = s / self.qr.get(i, i);
            }
            let mut c = vec![0.0; n];
            for i in 0..r {
                c[self.perm[i]] = -z[i];
            }
            c[self.perm[free]] = 1.0;
            let scale = norm_inf(&c);
            if scale.is_finite() && scale > 0.0 {
                c.iter_mut().for_each(|v| *v /= scale);
            }
            out.push(c);
        }
        out
    }

    /// Least-squares solution of `A x = b` for a full-column-rank `A`.
    /// Returns `None` when the factorization is rank deficient.
    pub fn solve_least_squares(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.qr.cols;
        if self.rank < n {
            return None;
        }
        let mut y = b.to_vec();
        for (k, (v, beta)) in self.householder.iter().enumerate() {
            let tail = &mut y[k..];
            let s = beta * dot(v, tail);
            axpy(-s, v, tail);
        }
        let mut z = y[..n].to_vec();
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.qr.get(i, j) * z[j];
            }
            z[i] = s / self.qr.get(i, i);
        }
        let mut x = vec![0.0; n];
        for (pos, &orig) in self.perm.iter().enumerate() {
            x[orig] = z[pos];
        }
        Some(x)
    }
}

fn swap_cols(a: &mut Matrix, i: usize, j: usize) {
    if i == j {
        return;
    }
    let rows = a.rows;
    let (lo, hi) = (i.min(j), i.max(j));
    let (left, right) = a.data.split_at_mut(hi * rows);
    left[lo * rows..(lo + 1) * rows].swap_with_slice(&mut right[..rows]);
}

/// Outcome of a null-direction search.
#[derive(Debug, Clone, PartialEq)]
pub enum NullSpace {
    /// A null vector scaled to unit max-norm.
    Vector(Vec<f64>),
    /// The columns are linearly independent at the rank tolerance.
    FullRank,
}

/// Finds `c != 0` with `columns * c ~ 0` by rank-revealing QR, using the
/// tolerance from [`rank_tolerance`].
pub fn find_null_vector(columns: &Matrix) -> Result<NullSpace> {
    if !columns.is_finite() {
        return Err(Error::Invalid("feature matrix has non-finite entries".into()));
    }
    let tol = rank_tolerance(columns.rows(), columns.max_col_norm());
    let qr = PivotedQr::factor(columns, tol);
    Ok(match qr.null_basis().into_iter().next() {
        Some(c) => NullSpace::Vector(c),
        None => NullSpace::FullRank,
    })
}
