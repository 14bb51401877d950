//! Compression of discrete positive measures into positive cubature
//! formulas, and moment-cone feasibility.
//!
//! Given atoms `x_a` in R^N with positive weights `w_a`, [`recomb`] selects
//! at most `D` of the atoms and new positive weights so that every feature
//! moment `sum_a w_a f_j(x_a)` is preserved, where the features are a
//! weighted-degree monomial basis of dimension `D` ([`basis`]) or any
//! user-supplied dictionary ([`measure::FunctionDictionary`]).
//! [`geometry`] decides whether a moment vector lies in the cone or convex
//! hull of embedded candidate points, returning either representing
//! weights or a separating functional. [`verify`] re-checks a claimed
//! cubature independently of the reduction path.

pub mod basis;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod linalg;
pub mod measure;
pub mod recomb;
pub mod sum;
pub mod verify;

pub use basis::{basis_dimension, build_basis, BasisSpec, DegreeFunction, MonomialBasis, MultiIndex};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{
    cone_membership, hull_membership, truncated_moment_feasible, FeasibilityResult, FeasibilityStatus,
    SeparatingFunctional,
};
pub use linalg::{find_null_vector, Matrix, NullSpace};
pub use measure::{
    feature_matrix, load_measure, moment_vector, DiscreteMeasure, FeatureMap, FunctionDictionary, MeasureFormat,
    MomentVector,
};
pub use recomb::{
    cubature_for_basis, cubature_of_degree, elimination_step, reduce, reduce_streaming, Cubature, CubatureOptions,
    ReduceOptions, ReductionReport, Rescaling,
};
pub use verify::{verify_cubature, VerificationReport};
