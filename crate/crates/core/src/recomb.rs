//! Carathéodory recombination of discrete measures.
//!
//! Repeatedly finds a direction `c` in the null space of the feature
//! matrix and moves the weights along it until one weight hits zero. The
//! weighted feature sum never changes, weights stay positive, and once no
//! null direction is left at most rank (<= D) atoms remain.
//!
//! Work happens in buffers of a bounded number of atoms. One pivoted QR
//! yields a whole null basis for a buffer; after each elimination the
//! remaining basis vectors are updated to vanish at the eliminated atom,
//! and the buffer is refactored once the basis runs out or an updated
//! vector has drifted off the null space.

use serde::Serialize;

use crate::basis::{build_basis, MonomialBasis};
use crate::error::{Error, Result};
use crate::exec::{map_ordered, try_map_ordered, Execution};
use crate::linalg::{axpy, norm2, norm_inf, rank_tolerance, Matrix, PivotedQr};
use crate::measure::{eval_atom, feature_matrix_with, moments_and_absolute, DiscreteMeasure, FeatureMap};
use crate::sum::CompensatedSum;

/// Buffer size of [`reduce`], in multiples of the feature dimension.
const REDUCE_WINDOW_FACTOR: usize = 2;
/// Leaf block size of [`reduce_streaming`], in multiples of its buffer.
const STREAM_BLOCK_BUFFERS: usize = 64;
/// An updated null vector is retired once its residual exceeds this
/// multiple of the rank tolerance.
const DRIFT_FACTOR: f64 = 1e4;

/// Per-coordinate affine map `x -> (x - center) / half_width` taking the
/// atoms' bounding box onto `[-1, 1]^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rescaling {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl Rescaling {
    pub fn identity(num_vars: usize) -> Self {
        Self { center: vec![0.0; num_vars], half_width: vec![1.0; num_vars] }
    }

    pub fn fit(measure: &DiscreteMeasure) -> Self {
        let n = measure.num_vars();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for atom in measure.atoms() {
            for i in 0..n {
                lo[i] = lo[i].min(atom[i]);
                hi[i] = hi[i].max(atom[i]);
            }
        }
        let center = lo.iter().zip(&hi).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        let half_width = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| {
                let h = 0.5 * b - 0.5 * a;
                if h > 0.0 {
                    h
                } else {
                    1.0
                }
            })
            .collect();
        Self { center, half_width }
    }

    pub fn apply(&self, point: &[f64], out: &mut [f64]) {
        for i in 0..point.len() {
            out[i] = (point[i] - self.center[i]) / self.half_width[i];
        }
    }

    pub fn apply_measure(&self, measure: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        let n = measure.num_vars();
        let mut coords = vec![0.0; measure.coordinates().len()];
        for (src, dst) in measure.atoms().zip(coords.chunks_exact_mut(n)) {
            self.apply(src, dst);
        }
        DiscreteMeasure::new(n, coords, measure.weights().to_vec())
    }
}

/// Positive cubature: a subset of the source atoms with new weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cubature {
    pub node_indices: Vec<usize>,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub degree: Option<u32>,
    pub basis_id: String,
}

impl Cubature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The cubature as a measure in its own right.
    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::from_points(&self.nodes, self.weights.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub initial_atoms: usize,
    pub final_atoms: usize,
    pub elimination_steps: usize,
    pub detected_rank: usize,
    /// Max over features of `|Q_j - E_j| / (1 + |E_j|)` in the working
    /// (rescaled) coordinates.
    pub max_moment_residual_rel: f64,
    pub rescaling: Rescaling,
    pub factorizations: usize,
    pub streamed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceOptions {
    pub execution: Execution,
    /// Rescale atoms onto `[-1, 1]^N` when the features allow it.
    pub rescale: bool,
    /// Re-solve the surviving weights by least squares against the full
    /// moment vector, kept only if they stay positive and fit better.
    pub polish: bool,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        Self { execution: Execution::default(), rescale: true, polish: true }
    }
}

/// Moves `weights` along `direction` until the first weight reaches zero.
///
/// If no entry of `direction` is positive it is negated first. The step is
/// `t = min { w_j / c_j : c_j > 0 }` with ties going to the smallest index;
/// that entry is set to exactly zero and its index returned.
pub fn elimination_step(weights: &mut [f64], direction: &mut [f64]) -> Result<usize> {
    assert_eq!(weights.len(), direction.len(), "weights and direction differ in length");
    if direction.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroDirection);
    }
    if !direction.iter().any(|&c| c > 0.0) {
        direction.iter_mut().for_each(|c| *c = -*c);
    }
    let mut best: Option<(usize, f64)> = None;
    for (j, (&w, &c)) in weights.iter().zip(direction.iter()).enumerate() {
        if c > 0.0 {
            let t = w / c;
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((j, t));
            }
        }
    }
    let (pivot, t) = best.expect("direction has a positive entry");
    for (w, &c) in weights.iter_mut().zip(direction.iter()) {
        if c != 0.0 {
            *w -= t * c;
            if *w < 0.0 {
                *w = 0.0;
            }
        }
    }
    weights[pivot] = 0.0;
    Ok(pivot)
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    steps: usize,
    max_rank: usize,
    factorizations: usize,
}

impl Stats {
    fn absorb(&mut self, other: Stats) {
        self.steps += other.steps;
        self.max_rank = self.max_rank.max(other.max_rank);
        self.factorizations += other.factorizations;
    }
}

/// Atoms under consideration: source index, feature column, weight.
#[derive(Debug, Clone)]
struct Buffer {
    d: usize,
    idx: Vec<usize>,
    feats: Vec<f64>,
    w: Vec<f64>,
}

impl Buffer {
    fn new(d: usize) -> Self {
        Self { d, idx: Vec::new(), feats: Vec::new(), w: Vec::new() }
    }

    fn len(&self) -> usize {
        self.idx.len()
    }

    fn push(&mut self, index: usize, column: &[f64], weight: f64) {
        self.idx.push(index);
        self.feats.extend_from_slice(column);
        self.w.push(weight);
    }

    fn append(&mut self, other: Buffer) {
        self.idx.extend(other.idx);
        self.feats.extend(other.feats);
        self.w.extend(other.w);
    }

    fn drop_zero_weights(&mut self) {
        let d = self.d;
        let mut keep = 0;
        for i in 0..self.idx.len() {
            if self.w[i] > 0.0 {
                if keep != i {
                    self.idx[keep] = self.idx[i];
                    self.w[keep] = self.w[i];
                    self.feats.copy_within(i * d..(i + 1) * d, keep * d);
                }
                keep += 1;
            }
        }
        self.idx.truncate(keep);
        self.w.truncate(keep);
        self.feats.truncate(keep * d);
    }

    fn matrix(&self) -> Matrix {
        Matrix::from_col_major(self.d, self.len(), self.feats.clone())
    }

    /// Eliminates atoms until the buffer's columns are linearly
    /// independent at the rank tolerance.
    fn recombine(&mut self, stats: &mut Stats) {
        loop {
            if self.is_empty() {
                return;
            }
            let y = self.matrix();
            let tol = rank_tolerance(self.d, y.max_col_norm());
            let qr = PivotedQr::factor(&y, tol);
            stats.factorizations += 1;
            stats.max_rank = stats.max_rank.max(qr.rank());
            let mut basis = qr.null_basis();
            if basis.is_empty() {
                return;
            }
            for i in 0..basis.len() {
                let (head, tail) = basis.split_at_mut(i + 1);
                let c = &mut head[i];
                if i > 0 {
                    let scale = norm_inf(c);
                    if !(scale > 0.0) || !scale.is_finite() {
                        continue;
                    }
                    c.iter_mut().for_each(|v| *v /= scale);
                    if norm2(&y.mul_vec(c)) > DRIFT_FACTOR * tol.max(f64::MIN_POSITIVE) {
                        break;
                    }
                }
                let pivot = match elimination_step(&mut self.w, c) {
                    Ok(j) => j,
                    Err(_) => continue,
                };
                stats.steps += 1;
                let cp = c[pivot];
                for v in tail.iter_mut() {
                    let f = v[pivot] / cp;
                    if f != 0.0 {
                        axpy(-f, c, v);
                    }
                    v[pivot] = 0.0;
                }
            }
            self.drop_zero_weights();
        }
    }

    fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }
}

/// Reduces `measure` to at most `features.dimension()` of its own atoms
/// with positive weights and the same feature moments.
pub fn reduce<F: FeatureMap + ?Sized>(measure: &DiscreteMeasure, features: &F) -> Result<(Cubature, ReductionReport)> {
    reduce_with(measure, features, &ReduceOptions::default())
}

pub fn reduce_with<F: FeatureMap + ?Sized>(
    measure: &DiscreteMeasure,
    features: &F,
    opts: &ReduceOptions,
) -> Result<(Cubature, ReductionReport)> {
    let (rescaling, working) = prepare(measure, features, opts)?;
    let y = feature_matrix_with(&working, features, opts.execution)?;
    let d = features.dimension();
    let window = REDUCE_WINDOW_FACTOR * d;
    let mut stats = Stats::default();
    let mut buf = Buffer::new(d);
    for a in 0..working.len() {
        buf.push(a, y.col(a), working.weights()[a]);
        if buf.len() >= window {
            buf.recombine(&mut stats);
        }
    }
    buf.recombine(&mut stats);
    finish(measure, &working, features, buf, stats, rescaling, false, opts)
}

/// Divide-and-conquer variant that never materializes the full feature
/// matrix. Atoms are cut into fixed leaf blocks; each leaf is streamed
/// through a buffer of `buffer_factor * D` atoms, and leaf survivors are
/// merged pairwise in a fixed binary tree. Leaves and merges of one tree
/// level run concurrently under [`Execution::Parallel`].
pub fn reduce_streaming<F: FeatureMap + ?Sized>(
    measure: &DiscreteMeasure,
    features: &F,
    buffer_factor: usize,
) -> Result<(Cubature, ReductionReport)> {
    reduce_streaming_with(measure, features, buffer_factor, &ReduceOptions::default())
}

pub fn reduce_streaming_with<F: FeatureMap + ?Sized>(
    measure: &DiscreteMeasure,
    features: &F,
    buffer_factor: usize,
    opts: &ReduceOptions,
) -> Result<(Cubature, ReductionReport)> {
    if buffer_factor < 2 {
        return Err(Error::Invalid(format!("buffer factor must be at least 2, got {buffer_factor}")));
    }
    let (rescaling, working) = prepare(measure, features, opts)?;
    let d = features.dimension();
    let window = buffer_factor * d;
    let leaf = STREAM_BLOCK_BUFFERS * window;
    let m = working.len();
    let ranges: Vec<(usize, usize)> = (0..m).step_by(leaf).map(|s| (s, (s + leaf).min(m))).collect();

    let leaves = try_map_ordered(opts.execution, &ranges, |&(s, e)| {
        let mut stats = Stats::default();
        let mut buf = Buffer::new(d);
        let mut phi = vec![0.0; d];
        for a in s..e {
            eval_atom(features, a, working.atom(a), &mut phi)?;
            buf.push(a, &phi, working.weights()[a]);
            if buf.len() >= window {
                buf.recombine(&mut stats);
            }
        }
        buf.recombine(&mut stats);
        Ok::<_, Error>((buf, stats))
    })?;

    let mut level = leaves;
    while level.len() > 1 {
        let mut pairs = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(left) = it.next() {
            pairs.push((left, it.next()));
        }
        level = map_ordered(opts.execution, &pairs, |(left, right)| {
            let (mut buf, mut stats) = left.clone();
            if let Some((rbuf, rstats)) = right {
                buf.append(rbuf.clone());
                stats.absorb(*rstats);
                buf.recombine(&mut stats);
            }
            (buf, stats)
        });
    }
    let (buf, stats) = level.pop().unwrap_or_else(|| (Buffer::new(d), Stats::default()));
    finish(measure, &working, features, buf, stats, rescaling, true, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubatureOptions {
    pub reduce: ReduceOptions,
    pub buffer_factor: usize,
    /// Use the streaming path when `M > streaming_threshold * D`.
    pub streaming_threshold: usize,
}

impl Default for CubatureOptions {
    fn default() -> Self {
        Self { reduce: ReduceOptions::default(), buffer_factor: 2, streaming_threshold: 16 }
    }
}

/// Cubature formula of weighted degree `max_degree` supported on atoms of
/// `measure`, with at most `dim A_{deg <= m}` nodes.
pub fn cubature_of_degree(
    measure: &DiscreteMeasure,
    num_vars: usize,
    degree_weights: &[u32],
    max_degree: u32,
) -> Result<(Cubature, ReductionReport)> {
    let basis = build_basis(num_vars, degree_weights, max_degree)?;
    cubature_for_basis(measure, &basis, &CubatureOptions::default())
}

pub fn cubature_for_basis(
    measure: &DiscreteMeasure,
    basis: &MonomialBasis,
    opts: &CubatureOptions,
) -> Result<(Cubature, ReductionReport)> {
    if measure.num_vars() != basis.num_vars() {
        return Err(Error::DimensionMismatch { expected: basis.num_vars(), got: measure.num_vars() });
    }
    let reduce_opts = ReduceOptions { rescale: true, ..opts.reduce };
    let (mut cubature, report) = if measure.len() > opts.streaming_threshold * basis.dimension() {
        reduce_streaming_with(measure, basis, opts.buffer_factor, &reduce_opts)?
    } else {
        reduce_with(measure, basis, &reduce_opts)?
    };
    cubature.degree = Some(basis.max_degree());
    Ok((cubature, report))
}

fn prepare<F: FeatureMap + ?Sized>(
    measure: &DiscreteMeasure,
    features: &F,
    opts: &ReduceOptions,
) -> Result<(Rescaling, DiscreteMeasure)> {
    if features.dimension() == 0 {
        return Err(Error::Invalid("feature system is empty".into()));
    }
    if features.num_vars() != measure.num_vars() {
        return Err(Error::DimensionMismatch { expected: features.num_vars(), got: measure.num_vars() });
    }
    if opts.rescale && features.affine_invariant() {
        let r = Rescaling::fit(measure);
        let working = r.apply_measure(measure)?;
        Ok((r, working))
    } else {
        Ok((Rescaling::identity(measure.num_vars()), measure.clone()))
    }
}

fn residual_rel(columns: &Matrix, weights: &[f64], target: &[f64]) -> f64 {
    (0..columns.rows())
        .map(|j| {
            let mut acc = CompensatedSum::new();
            for (a, &w) in weights.iter().enumerate() {
                acc.add(w * columns.get(j, a));
            }
            acc.add(-target[j]);
            acc.value().abs() / (1.0 + target[j].abs())
        })
        .fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn finish<F: FeatureMap + ?Sized>(
    source: &DiscreteMeasure,
    working: &DiscreteMeasure,
    features: &F,
    mut buf: Buffer,
    stats: Stats,
    rescaling: Rescaling,
    streamed: bool,
    opts: &ReduceOptions,
) -> Result<(Cubature, ReductionReport)> {
    // Present nodes in source order.
    let mut order: Vec<usize> = (0..buf.len()).collect();
    order.sort_by_key(|&i| buf.idx[i]);
    let d = buf.d;
    let mut sorted = Buffer::new(d);
    for &i in &order {
        sorted.push(buf.idx[i], &buf.feats[i * d..(i + 1) * d], buf.w[i]);
    }
    buf = sorted;

    // elimination that would be exact without rounding; the polish below absorbs them.
    // elimination that was exact in exact arithmetic; the polish below absorbs them.
    let total: f64 = buf.w.iter().sum();
    let floor = d as f64 * f64::EPSILON * total;
    if buf.w.iter().any(|&w| w <= floor) && buf.w.iter().any(|&w| w > floor) {
        buf.w.iter_mut().filter(|w| **w <= floor).for_each(|w| *w = 0.0);
        buf.drop_zero_weights();
    }

    let (target, _) = moments_and_absolute(working, features, opts.execution)?;
    let y = buf.matrix();
    let mut residual = residual_rel(&y, &buf.w, &target);
    if opts.polish && !buf.is_empty() {
        let qr = PivotedQr::factor(&y, rank_tolerance(d, y.max_col_norm()));
        if let Some(w) = qr.solve_least_squares(&target) {
            if w.iter().all(|&v| v > 0.0 && v.is_finite()) {
                let r = residual_rel(&y, &w, &target);
                if r < residual {
                    residual = r;
                    buf.w = w;
                }
            }
        }
    }

    let k = buf.len();
    let report = ReductionReport {
        initial_atoms: source.len(),
        final_atoms: k,
        elimination_steps: stats.steps,
        detected_rank: stats.max_rank.max(k),
        max_moment_residual_rel: residual,
        rescaling,
        factorizations: stats.factorizations,
        streamed,
    };
    let cubature = Cubature {
        nodes: buf.idx.iter().map(|&i| source.atom(i).to_vec()).collect(),
        node_indices: buf.idx,
        weights: buf.w,
        degree: features.max_degree(),
        basis_id: features.id(),
    };
    Ok((cubature, report))
}
