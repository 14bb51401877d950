//! Discrete positive measures and their moments against a feature system.

mod io;

pub use io::{load_measure, load_measure_path, MeasureFormat};

use serde::Serialize;

use crate::basis::MonomialBasis;
use crate::error::{Error, Result};
use crate::exec::{try_map_ordered, Execution};
use crate::linalg::Matrix;
use crate::sum::{compensated_sum, CompensatedSum};

/// Atoms per block in the blocked loops over a measure. Fixed so the
/// summation tree never depends on the thread count.
pub(crate) const ATOM_BLOCK: usize = 2048;

/// Finitely many atoms in R^N carrying strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    num_vars: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// `atoms` is row-major, `num_vars` coordinates per atom.
    pub fn new(num_vars: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::Invalid("atoms need at least one coordinate".into()));
        }
        if weights.is_empty() {
            return Err(Error::NoAtoms);
        }
        if atoms.len() != num_vars * weights.len() {
            return Err(Error::Invalid(format!(
                "{} coordinates for {} atoms of dimension {num_vars}",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(i) = atoms.iter().position(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("atom {}: non-finite coordinate {}", i / num_vars, atoms[i])));
        }
        if let Some((atom, &weight)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::NonPositiveWeight { atom, weight });
        }
        Ok(Self { num_vars, atoms, weights })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P], weights: Vec<f64>) -> Result<Self> {
        let num_vars = points.first().map(|p| p.as_ref().len()).ok_or(Error::NoAtoms)?;
        let mut atoms = Vec::with_capacity(points.len() * num_vars);
        for (i, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != num_vars {
                return Err(Error::Invalid(format!("atom {i}: expected {num_vars} coordinates, got {}", p.len())));
            }
            atoms.extend_from_slice(p);
        }
        Self::new(num_vars, atoms, weights)
    }

    pub fn unit_weights<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        Self::from_points(points, vec![1.0; points.len()])
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.num_vars..(i + 1) * self.num_vars]
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.atoms.chunks_exact(self.num_vars)
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// Same atoms under new weights.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.num_vars, self.atoms.clone(), weights)
    }
}

/// A finite family of real functions on R^N, evaluated pointwise.
pub trait FeatureMap: Sync {
    fn num_vars(&self) -> usize;

    fn dimension(&self) -> usize;

    fn id(&self) -> String;

    fn evaluate_into(&self, point: &[f64], out: &mut [f64]) -> Result<()>;

    /// Whether the span of the features is unchanged by per-coordinate
    /// affine maps `x_i -> a_i + b_i x_i` with `b_i != 0`.
    fn affine_invariant(&self) -> bool {
        false
    }

    /// Index of a feature that is identically one, if any.
    fn constant_feature(&self) -> Option<usize> {
        None
    }

    /// Polynomial degree covered by the features, when that is meaningful.
    fn max_degree(&self) -> Option<u32> {
        None
    }
}

impl FeatureMap for MonomialBasis {
    fn num_vars(&self) -> usize {
        MonomialBasis::num_vars(self)
    }

    fn dimension(&self) -> usize {
        MonomialBasis::dimension(self)
    }

    fn id(&self) -> String {
        MonomialBasis::id(self)
    }

    fn evaluate_into(&self, point: &[f64], out: &mut [f64]) -> Result<()> {
        MonomialBasis::evaluate_into(self, point, out)
    }

    fn affine_invariant(&self) -> bool {
        true
    }

    fn constant_feature(&self) -> Option<usize> {
        Some(0)
    }

    fn max_degree(&self) -> Option<u32> {
        Some(MonomialBasis::max_degree(self))
    }
}

type Evaluator = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// User-supplied features, e.g. orthogonal polynomials or any other
/// dictionary whose push-forward moments should be matched.
pub struct FunctionDictionary {
    id: String,
    num_vars: usize,
    size: usize,
    constant: Option<usize>,
    eval: Box<Evaluator>,
}

impl FunctionDictionary {
    pub fn new<F>(id: impl Into<String>, num_vars: usize, size: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if size == 0 {
            return Err(Error::Invalid("dictionary needs at least one feature".into()));
        }
        Ok(Self { id: id.into(), num_vars, size, constant: None, eval: Box::new(eval) })
    }

    /// Declares feature `index` to be identically one.
    pub fn with_constant_feature(mut self, index: usize) -> Self {
        self.constant = Some(index);
        self
    }
}

impl std::fmt::Debug for FunctionDictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionDictionary")
            .field("id", &self.id)
            .field("num_vars", &self.num_vars)
            .field("size", &self.size)
            .finish_non_exhaustive()
    }
}

impl FeatureMap for FunctionDictionary {
    fn num_vars(&self) -> usize {
        self.num_vars
    }

    fn dimension(&self) -> usize {
        self.size
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn evaluate_into(&self, point: &[f64], out: &mut [f64]) -> Result<()> {
        if point.len() != self.num_vars {
            return Err(Error::DimensionMismatch { expected: self.num_vars, got: point.len() });
        }
        (self.eval)(point, out);
        if let Some((coord, &value)) = out.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { coord, value });
        }
        Ok(())
    }

    fn constant_feature(&self) -> Option<usize> {
        self.constant
    }
}

/// Moments `sum_a w_a f_j(x_a)` of a measure against a feature system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentVector {
    pub values: Vec<f64>,
    pub features_id: String,
}

pub(crate) fn eval_atom<F: FeatureMap + ?Sized>(features: &F, atom: usize, point: &[f64], out: &mut [f64]) -> Result<()> {
    features
        .evaluate_into(point, out)
        .map_err(|e| Error::FeatureEval { atom, msg: e.to_string() })
}

fn check_features<F: FeatureMap + ?Sized>(measure: &DiscreteMeasure, features: &F) -> Result<()> {
    if features.dimension() == 0 {
        return Err(Error::Invalid("feature system is empty".into()));
    }
    if features.num_vars() != measure.num_vars() {
        return Err(Error::DimensionMismatch { expected: features.num_vars(), got: measure.num_vars() });
    }
    Ok(())
}

fn blocks(len: usize) -> Vec<(usize, usize)> {
    (0..len).step_by(ATOM_BLOCK).map(|s| (s, (s + ATOM_BLOCK).min(len))).collect()
}

/// D x M matrix whose column `a` is the feature vector of atom `a`.
pub fn feature_matrix<F: FeatureMap + ?Sized>(measure: &DiscreteMeasure, features: &F) -> Result<Matrix> {
    feature_matrix_with(measure, features, Execution::default())
}

pub fn feature_matrix_with<F: FeatureMap + ?Sized>(
    measure: &DiscreteMeasure,
    features: &F,
    exec: Execution,
) -> Result<Matrix> {
    check_features(measure, features)?;
    let d = features.dimension();
    let parts = try_map_ordered(exec, &blocks(measure.len()), |&(s, e)| {
        let mut data = vec![0.0; (e - s) * d];
        for (a, out) in (s..e).zip(data.chunks_exact_mut(d)) {
            eval_atom(features, a, measure.atom(a), out)?;
        }
        Ok::<_, Error>(data)
    })?;
    Ok(Matrix::from_col_major(d, measure.len(), parts.concat()))
}

pub fn moment_vector<F: FeatureMap + ?Sized>(measure: &DiscreteMeasure, features: &F) -> Result<MomentVector> {
    moment_vector_with(measure, features, Execution::default())
}

pub fn moment_vector_with<F: FeatureMap + ?Sized>(
    measure: &DiscreteMeasure,
    features: &F,
    exec: Execution,
) -> Result<MomentVector> {
    let (values, _) = moments_and_absolute(measure, features, exec)?;
    Ok(MomentVector { values, features_id: features.id() })
}

/// Signed moments together with `sum_a w_a |f_j(x_a)|`, the scale that
/// relative residuals are measured against.
pub(crate) fn moments_and_absolute<F: FeatureMap + ?Sized>(
    measure: &DiscreteMeasure,
    features: &F,
    exec: Execution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_features(measure, features)?;
    let d = features.dimension();
    let partials = try_map_ordered(exec, &blocks(measure.len()), |&(s, e)| {
        let mut signed = vec![CompensatedSum::new(); d];
        let mut absolute = vec![CompensatedSum::new(); d];
        let mut phi = vec![0.0; d];
        for a in s..e {
            eval_atom(features, a, measure.atom(a), &mut phi)?;
            let w = measure.weights[a];
            for j in 0..d {
                let t = w * phi[j];
                signed[j].add(t);
                absolute[j].add(t.abs());
            }
        }
        Ok::<_, Error>((signed, absolute))
    })?;
    let mut signed = vec![CompensatedSum::new(); d];
    let mut absolute = vec![CompensatedSum::new(); d];
    for (s, a) in &partials {
        for j in 0..d {
            signed[j].merge(&s[j]);
            absolute[j].merge(&a[j]);
        }
    }
    Ok((signed.iter().map(CompensatedSum::value).collect(), absolute.iter().map(CompensatedSum::value).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;

    #[test]
    fn rejects_invalid_measures() {
        assert!(matches!(DiscreteMeasure::new(1, vec![], vec![]), Err(Error::NoAtoms)));
        assert!(matches!(
            DiscreteMeasure::new(1, vec![0.0, 1.0], vec![1.0, 0.0]),
            Err(Error::NonPositiveWeight { atom: 1, .. })
        ));
        assert!(DiscreteMeasure::new(1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(2, vec![0.0, 1.0, 2.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn feature_matrix_columns() {
        let mu = DiscreteMeasure::unit_weights(&[[-1.0], [1.0]]).unwrap();
        let b = build_basis(1, &[1], 2).unwrap();
        let y = feature_matrix(&mu, &b).unwrap();
        assert_eq!(y.col(0), &[1.0, -1.0, 1.0]);
        assert_eq!(y.col(1), &[1.0, 1.0, 1.0]);

        let origin = DiscreteMeasure::unit_weights(&[[0.0, 0.0]]).unwrap();
        let b = build_basis(2, &[1, 2], 4).unwrap();
        let y = feature_matrix(&origin, &b).unwrap();
        assert_eq!(y.col(0)[0], 1.0);
        assert!(y.col(0)[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_dictionary_gives_row_of_ones() {
        let mu = DiscreteMeasure::unit_weights(&[[0.3], [2.0], [-7.0]]).unwrap();
        let dict = FunctionDictionary::new("one", 1, 1, |_, out| out[0] = 1.0).unwrap();
        let y = feature_matrix(&mu, &dict).unwrap();
        assert_eq!(y.data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn dictionary_failures_carry_atom_index() {
        let mu = DiscreteMeasure::unit_weights(&[[1.0], [0.0]]).unwrap();
        let dict = FunctionDictionary::new("inv", 1, 1, |x, out| out[0] = 1.0 / x[0]).unwrap();
        assert!(matches!(feature_matrix(&mu, &dict), Err(Error::FeatureEval { atom: 1, .. })));
        assert!(matches!(moment_vector(&mu, &dict), Err(Error::FeatureEval { atom: 1, .. })));
    }

    #[test]
    fn moment_examples() {
        let b2 = build_basis(1, &[1], 2).unwrap();
        let mu = DiscreteMeasure::unit_weights(&[[-1.0], [1.0]]).unwrap();
        assert_eq!(moment_vector(&mu, &b2).unwrap().values, vec![2.0, 0.0, 2.0]);

        let mu = DiscreteMeasure::unit_weights(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        assert_eq!(moment_vector(&mu, &b2).unwrap().values, vec![5.0, 10.0, 30.0]);

        let b0 = build_basis(2, &[1, 1], 0).unwrap();
        let mu = DiscreteMeasure::from_points(&[[1.0, 2.0], [3.0, 4.0]], vec![0.25, 2.5]).unwrap();
        assert_eq!(moment_vector(&mu, &b0).unwrap().values, vec![2.75]);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let pts: Vec<[f64; 2]> = (0..10_000).map(|i| [(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let w: Vec<f64> = (0..10_000).map(|i| 1.0 + (i % 7) as f64).collect();
        let mu = DiscreteMeasure::from_points(&pts, w).unwrap();
        let b = build_basis(2, &[1, 1], 4).unwrap();
        let seq = moment_vector_with(&mu, &b, Execution::Sequential).unwrap();
        let par = moment_vector_with(&mu, &b, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        let ys = feature_matrix_with(&mu, &b, Execution::Sequential).unwrap();
        let yp = feature_matrix_with(&mu, &b, Execution::Parallel).unwrap();
        assert_eq!(ys, yp);
    }
}
