//! Weighted-degree monomial bases.
//!
//! A [`DegreeFunction`] assigns each variable `x_i` an integer degree
//! `k_i >= 1`; the monomial `x^a` then has weighted degree `sum k_i a_i`.
//! [`MonomialBasis`] lists every exponent vector of weighted degree at most
//! `m`, ordered by weighted degree and, within a degree, by descending
//! lexicographic order of the exponents. Entry 0 is always the constant.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the number of basis entries.
pub const DEFAULT_DIMENSION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DegreeFunction {
    weights: Vec<u32>,
}

impl DegreeFunction {
    pub fn new(weights: Vec<u32>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidBasis("number of variables must be at least 1".into()));
        }
        if let Some(i) = weights.iter().position(|&k| k == 0) {
            return Err(Error::InvalidBasis(format!("degree weight of variable {i} must be >= 1")));
        }
        Ok(Self { weights })
    }

    /// All variables of degree one.
    pub fn standard(num_vars: usize) -> Result<Self> {
        Self::new(vec![1; num_vars])
    }

    pub fn num_vars(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn degree_of(&self, index: &MultiIndex) -> u64 {
        index
            .exponents()
            .iter()
            .zip(&self.weights)
            .map(|(&a, &k)| a as u64 * k as u64)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zero(num_vars: usize) -> Self {
        Self(vec![0; num_vars])
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Plain (unweighted) total degree.
    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&a| a as u64).sum()
    }

    /// Evaluates `x^a` by direct powering. Used as a reference path; the
    /// basis evaluates through its recurrence instead.
    pub fn eval_naive(&self, point: &[f64]) -> f64 {
        self.0.iter().zip(point).map(|(&a, &x)| x.powi(a as i32)).product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for MultiIndex {
    type Err = Error;

    /// Parses the comma-separated form produced by `Display`, e.g. `"2,0"`.
    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Invalid(format!("bad exponent tuple {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }
}

/// Basis configuration block as it appears in JSON config and moment files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub num_vars: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_weights: Option<Vec<u32>>,
    pub max_degree: u32,
}

impl BasisSpec {
    pub fn build(&self) -> Result<MonomialBasis> {
        let weights = match &self.degree_weights {
            Some(w) => {
                if w.len() != self.num_vars {
                    return Err(Error::InvalidBasis(format!(
                        "{} degree weights given for {} variables",
                        w.len(),
                        self.num_vars
                    )));
                }
                w.clone()
            }
            None => vec![1; self.num_vars],
        };
        build_basis(self.num_vars, &weights, self.max_degree)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    degree_fn: DegreeFunction,
    max_degree: u32,
    indices: Vec<MultiIndex>,
    // For entry j > 0: (entry holding x^a / x_var, var).
    recurrence: Vec<(usize, usize)>,
}

pub fn build_basis(num_vars: usize, weights: &[u32], max_degree: u32) -> Result<MonomialBasis> {
    build_basis_capped(num_vars, weights, max_degree, DEFAULT_DIMENSION_CAP)
}

pub fn build_basis_capped(
    num_vars: usize,
    weights: &[u32],
    max_degree: u32,
    cap: usize,
) -> Result<MonomialBasis> {
    if num_vars == 0 {
        return Err(Error::InvalidBasis("number of variables must be at least 1".into()));
    }
    if weights.len() != num_vars {
        return Err(Error::InvalidBasis(format!(
            "{} degree weights given for {num_vars} variables",
            weights.len()
        )));
    }
    let degree_fn = DegreeFunction::new(weights.to_vec())?;

    let mut found = Vec::new();
    let mut current = vec![0u32; num_vars];
    enumerate(weights, 0, max_degree as u64, &mut current, &mut found, cap)?;

    // Graded by weighted degree, then descending lexicographic.
    found.sort_by(|(da, a): &(u64, Vec<u32>), (db, b)| da.cmp(db).then_with(|| b.cmp(a)));
    let indices: Vec<MultiIndex> = found.into_iter().map(|(_, e)| MultiIndex(e)).collect();

    let position: HashMap<&[u32], usize> =
        indices.iter().enumerate().map(|(j, a)| (a.exponents(), j)).collect();
    let mut recurrence = Vec::with_capacity(indices.len());
    recurrence.push((0, 0));
    let mut parent = vec![0u32; num_vars];
    for alpha in &indices[1..] {
        let var = alpha.exponents().iter().position(|&a| a > 0).expect("non-constant");
        parent.copy_from_slice(alpha.exponents());
        parent[var] -= 1;
        let p = position[parent.as_slice()];
        recurrence.push((p, var));
    }

    Ok(MonomialBasis { degree_fn, max_degree, indices, recurrence })
}

fn enumerate(
    weights: &[u32],
    var: usize,
    budget: u64,
    current: &mut Vec<u32>,
    out: &mut Vec<(u64, Vec<u32>)>,
    cap: usize,
) -> Result<()> {
    if var == weights.len() {
        if out.len() >= cap {
            return Err(Error::DimensionCap { cap });
        }
        let deg = current.iter().zip(weights).map(|(&a, &k)| a as u64 * k as u64).sum();
        out.push((deg, current.clone()));
        return Ok(());
    }
    let k = weights[var] as u64;
    let mut a = 0u64;
    while a * k <= budget {
        current[var] = a as u32;
        enumerate(weights, var + 1, budget - a * k, current, out, cap)?;
        a += 1;
    }
    current[var] = 0;
    Ok(())
}

impl MonomialBasis {
    pub fn degree_fn(&self) -> &DegreeFunction {
        &self.degree_fn
    }

    pub fn num_vars(&self) -> usize {
        self.degree_fn.num_vars()
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn dimension(&self) -> usize {
        self.indices.len()
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|a| a == index)
    }

    pub fn spec(&self) -> BasisSpec {
        BasisSpec {
            num_vars: self.num_vars(),
            degree_weights: Some(self.degree_fn.weights().to_vec()),
            max_degree: self.max_degree,
        }
    }

    pub fn id(&self) -> String {
        let w: Vec<String> = self.degree_fn.weights().iter().map(|k| k.to_string()).collect();
        format!("monomial(N={};k=[{}];m={})", self.num_vars(), w.join(","), self.max_degree)
    }

    /// Writes φ(point) into `out`, one multiplication per entry.
    pub fn evaluate_into(&self, point: &[f64], out: &mut [f64]) -> Result<()> {
        if point.len() != self.num_vars() {
            return Err(Error::DimensionMismatch { expected: self.num_vars(), got: point.len() });
        }
        if let Some((coord, &value)) = point.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite { coord, value });
        }
        assert_eq!(out.len(), self.dimension(), "output buffer has wrong length");
        out[0] = 1.0;
        for j in 1..out.len() {
            let (p, var) = self.recurrence[j];
            out[j] = out[p] * point[var];
        }
        Ok(())
    }

    pub fn evaluate_embedding(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dimension()];
        self.evaluate_into(point, &mut out)?;
        Ok(out)
    }
}

pub fn basis_dimension(basis: &MonomialBasis) -> usize {
    basis.dimension()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exps(b: &MonomialBasis) -> Vec<Vec<u32>> {
        b.indices().iter().map(|a| a.exponents().to_vec()).collect()
    }

    #[test]
    fn univariate_is_powers() {
        let b = build_basis(1, &[1], 4).unwrap();
        assert_eq!(exps(&b), vec![vec![0], vec![1], vec![2], vec![3], vec![4]]);
        assert_eq!(basis_dimension(&b), 5);
        assert_eq!(basis_dimension(&build_basis(1, &[1], 5).unwrap()), 6);
    }

    #[test]
    fn weighted_two_variables() {
        let b = build_basis(2, &[1, 2], 3).unwrap();
        assert_eq!(
            exps(&b),
            vec![vec![0, 0], vec![1, 0], vec![2, 0], vec![0, 1], vec![3, 0], vec![1, 1]]
        );
        assert_eq!(b.dimension(), 6);
    }

    #[test]
    fn standard_dimension_matches_binomial() {
        assert_eq!(build_basis(2, &[1, 1], 2).unwrap().dimension(), 6);
        assert_eq!(build_basis(4, &[1; 4], 6).unwrap().dimension(), 210);
        assert_eq!(build_basis(3, &[1; 3], 3).unwrap().dimension(), 20);
    }

    #[test]
    fn degree_zero_is_constant_only() {
        let b = build_basis(3, &[1, 1, 1], 0).unwrap();
        assert_eq!(b.dimension(), 1);
        assert_eq!(b.evaluate_embedding(&[5.0, -2.0, 7.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_basis(0, &[], 2), Err(Error::InvalidBasis(_))));
        assert!(matches!(build_basis(2, &[1, 0], 2), Err(Error::InvalidBasis(_))));
        assert!(matches!(build_basis(2, &[1], 2), Err(Error::InvalidBasis(_))));
        assert!(matches!(build_basis_capped(3, &[1; 3], 10, 100), Err(Error::DimensionCap { cap: 100 })));
    }

    #[test]
    fn evaluation_examples() {
        let b = build_basis(1, &[1], 3).unwrap();
        assert_eq!(b.evaluate_embedding(&[0.0]).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let b = build_basis(1, &[1], 4).unwrap();
        assert_eq!(b.evaluate_embedding(&[2.0]).unwrap(), vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        // (0,0),(1,0),(2,0),(0,1),(3,0),(1,1) at (2,3)
        let b = build_basis(2, &[1, 2], 3).unwrap();
        assert_eq!(b.evaluate_embedding(&[2.0, 3.0]).unwrap(), vec![1.0, 2.0, 4.0, 3.0, 8.0, 6.0]);
    }

    #[test]
    fn evaluation_rejects_non_finite() {
        let b = build_basis(2, &[1, 1], 2).unwrap();
        assert!(matches!(b.evaluate_embedding(&[1.0, f64::NAN]), Err(Error::NonFinite { coord: 1, .. })));
        assert!(matches!(b.evaluate_embedding(&[f64::INFINITY, 0.0]), Err(Error::NonFinite { coord: 0, .. })));
        assert!(matches!(b.evaluate_embedding(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn spec_defaults_to_unit_weights() {
        let spec: BasisSpec = serde_json::from_str(r#"{"num_vars": 2, "max_degree": 2}"#).unwrap();
        assert_eq!(spec.build().unwrap().dimension(), 6);
        let frac = serde_json::from_str::<BasisSpec>(r#"{"num_vars": 1, "degree_weights": [1.5], "max_degree": 2}"#);
        assert!(frac.is_err());
    }

    #[test]
    fn multi_index_string_form() {
        let a: MultiIndex = "2, 0".parse().unwrap();
        assert_eq!(a, MultiIndex::new(vec![2, 0]));
        assert_eq!(a.to_string(), "2,0");
        assert!("2;0".parse::<MultiIndex>().is_err());
    }
}
