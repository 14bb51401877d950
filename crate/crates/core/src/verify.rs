//! Independent check of a claimed cubature against its source measure.
//!
//! Moments are recomputed from scratch in the original coordinates with
//! compensated sums; nothing computed during reduction is reused.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::measure::{eval_atom, moments_and_absolute, DiscreteMeasure, FeatureMap};
use crate::recomb::Cubature;
use crate::sum::{compensated_sum, CompensatedSum};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// `|Q_j - E_j| / A_j` where `E_j = sum_a w_a f_j(x_a)`,
    /// `A_j = sum_a w_a |f_j(x_a)|` and `Q_j` is the cubature sum.
    pub per_moment_residual_rel: Vec<f64>,
    pub max_residual_rel: f64,
    pub weights_positive: bool,
    pub support_ok: bool,
    pub cardinality_ok: bool,
    pub mass_gap_rel: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn verify_cubature<F: FeatureMap + ?Sized>(
    measure: &DiscreteMeasure,
    cubature: &Cubature,
    features: &F,
    tol: f64,
) -> Result<VerificationReport> {
    if !(tol > 0.0) {
        return Err(Error::Invalid(format!("tolerance must be positive, got {tol}")));
    }
    let k = cubature.weights.len();
    if cubature.node_indices.len() != k || cubature.nodes.len() != k {
        return Err(Error::Invalid("cubature has mismatched node, index and weight counts".into()));
    }
    if let Some(&index) = cubature.node_indices.iter().find(|&&i| i >= measure.len()) {
        return Err(Error::IndexOutOfRange { index, atoms: measure.len() });
    }

    let mut seen = cubature.node_indices.clone();
    seen.sort_unstable();
    seen.dedup();
    let support_ok = seen.len() == k
        && cubature
            .node_indices
            .iter()
            .zip(&cubature.nodes)
            .all(|(&i, node)| node.as_slice() == measure.atom(i));
    let weights_positive = cubature.weights.iter().all(|&w| w > 0.0 && w.is_finite());
    let d = features.dimension();
    let cardinality_ok = (1..=d).contains(&k);

    let (target, absolute) = moments_and_absolute(measure, features, Execution::default())?;
    let mut sums = vec![CompensatedSum::new(); d];
    let mut phi = vec![0.0; d];
    for (node, (&idx, &w)) in cubature.nodes.iter().zip(cubature.node_indices.iter().zip(&cubature.weights)) {
        eval_atom(features, idx, node, &mut phi)?;
        for j in 0..d {
            sums[j].add(w * phi[j]);
        }
    }
    let per_moment_residual_rel: Vec<f64> = sums
        .iter()
        .zip(target.iter().zip(&absolute))
        .map(|(q, (&e, &a))| {
            let mut diff = *q;
            diff.add(-e);
            let gap = diff.value().abs();
            if gap == 0.0 {
                0.0
            } else {
                gap / a.max(f64::MIN_POSITIVE)
            }
        })
        .collect();
    let max_residual_rel = per_moment_residual_rel.iter().copied().fold(0.0, f64::max);

    let mass = measure.total_mass();
    let mut gap = CompensatedSum::new();
    gap.add(compensated_sum(cubature.weights.iter().copied()));
    gap.add(-mass);
    let mass_gap_rel = gap.value().abs() / mass;

    let mass_ok = features.constant_feature().is_none() || mass_gap_rel <= tol;
    let passed = max_residual_rel <= tol && weights_positive && support_ok && cardinality_ok && mass_ok;
    Ok(VerificationReport {
        per_moment_residual_rel,
        max_residual_rel,
        weights_positive,
        support_ok,
        cardinality_ok,
        mass_gap_rel,
        tol,
        passed,
    })
}
