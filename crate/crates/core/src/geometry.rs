//! Cone and convex-hull membership of moment vectors.
//!
//! Membership of `E` in `cone{y_1, ..., y_M}` is decided by a dense
//! phase-1 simplex on `{W >= 0 : Y W = E}` with Bland's rule. A feasible
//! outcome carries a basic solution (at most D nonzero weights); an
//! infeasible one carries the phase-1 dual vector `l`, which satisfies
//! `l . y_a <= 0` for every column and `l . E > 0`. Both are re-checked
//! against the input before being reported; a result that fails its own
//! check is reported as indeterminate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::basis::{MonomialBasis, MultiIndex};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, Matrix};
use crate::measure::DiscreteMeasure;

/// Residual tolerance for witnesses, relative to `1 + |E|_inf`.
pub const FEAS_TOL: f64 = 1e-9;
/// Margin a separating functional must clear.
pub const CERT_TOL: f64 = 1e-9;
/// Iteration cap, as a multiple of `D + M`.
pub const ITERATION_CAP_FACTOR: usize = 50;
/// Allowed deviation of the constant moment from 1 in hull queries.
pub const HULL_MASS_TOL: f64 = 1e-12;

const PIVOT_EPS: f64 = 1e-12;
const REDUCED_COST_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    /// Iteration cap hit, or the numerical answer failed re-verification.
    Indeterminate,
}

/// Functional `l` with `l . y <= offset` on every column and
/// `l . E > offset`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatingFunctional {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl SeparatingFunctional {
    /// Largest `l . y_a - offset` over the columns and `l . E - offset`.
    pub fn margins(&self, target: &[f64], columns: &Matrix) -> (f64, f64) {
        let worst = (0..columns.cols())
            .map(|a| dot(&self.normal, columns.col(a)) - self.offset)
            .fold(f64::NEG_INFINITY, f64::max);
        (worst, dot(&self.normal, target) - self.offset)
    }

    pub fn separates(&self, target: &[f64], columns: &Matrix, tol: f64) -> bool {
        let (worst, at_target) = self.margins(target, columns);
        worst <= tol && at_target > tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<SeparatingFunctional>,
    pub iterations: usize,
    /// `|Y W - E|_inf` of the witness, when one is present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl FeasibilityResult {
    fn indeterminate(iterations: usize) -> Self {
        Self { status: FeasibilityStatus::Indeterminate, weights: None, certificate: None, iterations, residual: None }
    }
}

/// Decides `target ∈ cone{columns}`.
pub fn cone_membership(target: &[f64], columns: &Matrix) -> Result<FeasibilityResult> {
    if target.len() != columns.rows() {
        return Err(Error::DimensionMismatch { expected: columns.rows(), got: target.len() });
    }
    if !columns.is_finite() || target.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite entries in membership query".into()));
    }
    let cap = ITERATION_CAP_FACTOR * (columns.rows() + columns.cols());
    let outcome = phase_one(columns, target, cap);
    let scale = 1.0 + norm_inf(target);

    match outcome {
        PhaseOne::CapExceeded { iterations } => Ok(FeasibilityResult::indeterminate(iterations)),
        PhaseOne::Optimal { weights, objective, dual, iterations } => {
            if objective <= FEAS_TOL * scale {
                let fitted = columns.mul_vec(&weights);
                let residual = fitted.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if residual <= FEAS_TOL * scale && weights.iter().all(|&w| w >= 0.0) {
                    return Ok(FeasibilityResult {
                        status: FeasibilityStatus::Feasible,
                        weights: Some(weights),
                        certificate: None,
                        iterations,
                        residual: Some(residual),
                    });
                }
                return Ok(FeasibilityResult::indeterminate(iterations));
            }
            let norm = norm_inf(&dual);
            if !(norm > 0.0) {
                return Ok(FeasibilityResult::indeterminate(iterations));
            }
            let cert = SeparatingFunctional { normal: dual.iter().map(|v| v / norm).collect(), offset: 0.0 };
            if cert.separates(target, columns, CERT_TOL) {
                Ok(FeasibilityResult {
                    status: FeasibilityStatus::Infeasible,
                    weights: None,
                    certificate: Some(cert),
                    iterations,
                    residual: None,
                })
            } else {
                Ok(FeasibilityResult::indeterminate(iterations))
            }
        }
    }
}

/// Decides `target ∈ conv{columns}`. Feature 0 is taken to be the
/// constant: `target[0]` must be 1 and row 0 of the columns is forced to
/// ones, which adds the constraint `sum W = 1`.
pub fn hull_membership(target: &[f64], columns: &Matrix) -> Result<FeasibilityResult> {
    if target.is_empty() || columns.rows() == 0 {
        return Err(Error::Invalid("hull membership needs at least the constant feature".into()));
    }
    if (target[0] - 1.0).abs() > HULL_MASS_TOL {
        return Err(Error::Invalid(format!("constant moment must be 1 for hull membership, got {}", target[0])));
    }
    let mut lifted = columns.clone();
    for a in 0..lifted.cols() {
        lifted.set(0, a, 1.0);
    }
    cone_membership(target, &lifted)
}

/// Decides whether `moments` (one value per basis multi-index) are the
/// moments of a positive measure supported on `grid`. On success the
/// second value is such a measure, with at most `D` atoms.
pub fn truncated_moment_feasible(
    moments: &BTreeMap<MultiIndex, f64>,
    grid: &[Vec<f64>],
    basis: &MonomialBasis,
) -> Result<(FeasibilityResult, Option<DiscreteMeasure>)> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty candidate grid".into()));
    }
    for key in moments.keys() {
        if key.len() != basis.num_vars() || basis.position(key).is_none() {
            return Err(Error::Invalid(format!("moment key ({key}) is not in the basis")));
        }
    }
    let mut target = Vec::with_capacity(basis.dimension());
    for alpha in basis.indices() {
        let v = moments.get(alpha).ok_or_else(|| Error::Invalid(format!("missing moment for ({alpha})")))?;
        target.push(*v);
    }
    let mass = target[0];
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Invalid(format!("total mass must be positive, got {mass}")));
    }
    target.iter_mut().for_each(|v| *v /= mass);
    target[0] = 1.0;

    let d = basis.dimension();
    let mut data = vec![0.0; d * grid.len()];
    for (p, out) in grid.iter().zip(data.chunks_exact_mut(d)) {
        basis.evaluate_into(p, out)?;
    }
    let columns = Matrix::from_col_major(d, grid.len(), data);
    let result = hull_membership(&target, &columns)?;

    let witness = match (&result.status, &result.weights) {
        (FeasibilityStatus::Feasible, Some(w)) => {
            let (points, weights): (Vec<&Vec<f64>>, Vec<f64>) =
                grid.iter().zip(w).filter(|(_, &w)| w > 0.0).map(|(p, &w)| (p, w * mass)).unzip();
            Some(DiscreteMeasure::from_points(&points, weights)?)
        }
        _ => None,
    };
    Ok((result, witness))
}

enum PhaseOne {
    Optimal { weights: Vec<f64>, objective: f64, dual: Vec<f64>, iterations: usize },
    CapExceeded { iterations: usize },
}

/// Minimizes the sum of artificials for `A W + s = b` (rows sign-flipped
/// so `b >= 0`), entering structural columns by Bland's rule.
fn phase_one(a: &Matrix, b: &[f64], cap: usize) -> PhaseOne {
    let (m, n) = (a.rows(), a.cols());
    let width = n + m + 1;
    let rhs = n + m;
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();

    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        for j in 0..n {
            t[i][j] = sign[i] * a.get(i, j);
        }
        t[i][n + i] = 1.0;
        t[i][rhs] = sign[i] * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut cost = vec![0.0; width];
    for row in &t {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[rhs] -= row[rhs];
    }

    let scale = 1.0 + a.data().iter().chain(b).fold(0.0f64, |s, v| s.max(v.abs()));
    let rc_eps = REDUCED_COST_EPS * scale;

    let mut iterations = 0;
    while let Some(enter) = (0..n).find(|&j| cost[j] < -rc_eps) {
        // Ratio test; ties go to the smallest basic variable.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let p = t[i][enter];
            if p > PIVOT_EPS {
                let ratio = t[i][rhs] / p;
                let better = match leave {
                    None => true,
                    Some((r, best)) => ratio < best || (ratio == best && basis[i] < basis[r]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leave else {
            // Phase 1 is bounded below; an empty ratio test means the
            // reduced cost is rounding noise.
            cost[enter] = 0.0;
            continue;
        };
        if iterations >= cap {
            return PhaseOne::CapExceeded { iterations };
        }
        iterations += 1;
        pivot(&mut t, &mut cost, row, enter);
        basis[row] = enter;
    }

    let mut weights = vec![0.0; n];
    let mut objective = 0.0;
    for (i, &var) in basis.iter().enumerate() {
        let v = t[i][rhs].max(0.0);
        if var < n {
            weights[var] = v;
        } else {
            objective += v;
        }
    }
    // u_i = c_B . B^{-1} e_i, read off the artificial columns.
    let dual: Vec<f64> = (0..m)
        .map(|i| {
            let u: f64 = basis.iter().enumerate().filter(|(_, &v)| v >= n).map(|(r, _)| t[r][n + i]).sum();
            sign[i] * u
        })
        .collect();
    PhaseOne::Optimal { weights, objective, dual, iterations }
}

fn pivot(t: &mut [Vec<f64>], cost: &mut [f64], row: usize, col: usize) {
    let p = t[row][col];
    t[row].iter_mut().for_each(|v| *v /= p);
    t[row][col] = 1.0;
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, &pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            r[col] = 0.0;
        }
    }
    let f = cost[col];
    if f != 0.0 {
        for (v, &pv) in cost.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
        cost[col] = 0.0;
    }
}
