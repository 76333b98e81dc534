//! Basis transition probability matrices (BTPMs).
//!
//! A channel has a BTPM with respect to an input basis when the images of the
//! basis projectors commute; their common eigenbasis is the output basis and
//! the eigenvalue rows are the transition probabilities. This module extracts
//! BTPMs from Kraus sets, builds Kraus sets back from BTPMs, classifies the
//! symmetry of a BTPM and recovers the `(p_k, π)` form of two-input
//! quasi-symmetric channels.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::quantum::{
    commutator, hermitian_eigen, max_abs, real, ComplexMatrix, KrausSet, QuantumError,
};

/// Row sums must equal one within this tolerance.
pub const ROW_SUM_TOL: f64 = 1e-10;
/// Basis images whose commutators exceed this (max-norm) have no BTPM.
pub const COMMUTATION_TOL: f64 = 1e-9;
/// Eigenvalue gap below which an eigenspace is treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;
/// Tolerance for multiset comparisons in classification.
pub const MULTISET_TOL: f64 = 1e-10;
/// Default seed for the random diagonalization weights.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum BtpmError {
    #[error("invalid BTPM: {0}")]
    Invalid(String),
    #[error("input basis is not orthonormal (max |B^dag B - I| = {0:e})")]
    BasisNotOrthonormal(f64),
    #[error("simultaneous diagonalization failed: residual off-diagonal {residual:e} for basis image {index}")]
    NumericalDegeneracy { index: usize, residual: f64 },
    #[error("channel is {0}, not quasi-symmetric")]
    NotQuasiSymmetric(SymmetryClass),
    #[error("operation needs a two-input BTPM, got {0} inputs")]
    NotTwoInput(usize),
    #[error("no permutation maps row 0 onto row 1 within group {0:?}")]
    ClassificationInconsistency(Vec<usize>),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Row-stochastic matrix `A[i][k] = Pr(|k'⟩ | |i⟩)` with basis labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Btpm {
    probs: Vec<Vec<f64>>,
    input_labels: Vec<String>,
    output_labels: Vec<String>,
}

fn default_labels(n: usize, primed: bool) -> Vec<String> {
    (0..n)
        .map(|i| {
            if primed {
                format!("|{i}'>")
            } else {
                format!("|{i}>")
            }
        })
        .collect()
}

impl Btpm {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self, BtpmError> {
        let n = probs.len();
        let m = probs.first().map_or(0, Vec::len);
        Self::with_labels(probs, default_labels(n, false), default_labels(m, true))
    }

    pub fn with_labels(
        probs: Vec<Vec<f64>>,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self, BtpmError> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(BtpmError::Invalid(
                "BTPM must have at least one row and column".into(),
            ));
        }
        let m = probs[0].len();
        for (i, row) in probs.iter().enumerate() {
            if row.len() != m {
                return Err(BtpmError::Invalid(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(BtpmError::Invalid(format!(
                    "row {i} has entry {bad} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(BtpmError::Invalid(format!("row {i} sums to {sum}")));
            }
        }
        if input_labels.len() != probs.len() || output_labels.len() != m {
            return Err(BtpmError::Invalid(
                "label counts do not match matrix shape".into(),
            ));
        }
        Ok(Self {
            probs,
            input_labels,
            output_labels,
        })
    }

    /// `[[p, 1−p], [1−p, p]]`.
    pub fn binary_symmetric(stay: f64) -> Result<Self, BtpmError> {
        Self::new(vec![vec![stay, 1.0 - stay], vec![1.0 - stay, stay]])
    }

    pub fn identity(dim: usize) -> Self {
        let probs = (0..dim)
            .map(|i| (0..dim).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(probs).expect("identity is row-stochastic")
    }

    pub fn input_dim(&self) -> usize {
        self.probs.len()
    }

    pub fn output_dim(&self) -> usize {
        self.probs[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.probs[i][k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.probs.iter().map(|r| r[k]).collect()
    }

    pub fn input_labels(&self) -> &[String] {
        &self.input_labels
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    /// Same matrix with columns sorted lexicographically descending by
    /// `(A[0][k], A[1][k], …)`; labels follow their columns.
    pub fn canonical_column_order(&self) -> Self {
        let order = descending_column_order(&self.probs);
        self.permute_columns(&order)
    }

    /// Column `k` of the result is column `order[k]` of `self`.
    pub fn permute_columns(&self, order: &[usize]) -> Self {
        Self {
            probs: self
                .probs
                .iter()
                .map(|r| order.iter().map(|&k| r[k]).collect())
                .collect(),
            input_labels: self.input_labels.clone(),
            output_labels: order
                .iter()
                .map(|&k| self.output_labels[k].clone())
                .collect(),
        }
    }

    /// Largest elementwise difference; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &Btpm) -> f64 {
        if self.input_dim() != other.input_dim() || self.output_dim() != other.output_dim() {
            return f64::INFINITY;
        }
        self.probs
            .iter()
            .flatten()
            .zip(other.probs.iter().flatten())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

impl fmt::Display for Btpm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, row) in self.input_labels.iter().zip(&self.probs) {
            write!(f, "{label}:")?;
            for p in row {
                write!(f, " {p:.6}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn descending_column_order(probs: &[Vec<f64>]) -> Vec<usize> {
    let m = probs[0].len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        // 1e-12 ties absorb eigensolver noise
        for row in probs {
            if (row[b] - row[a]).abs() < 1e-12 {
                continue;
            }
            return row[b].total_cmp(&row[a]);
        }
        a.cmp(&b)
    });
    order
}

/// A BTPM together with the bases it was measured in. Basis vectors are
/// matrix columns.
#[derive(Debug, Clone)]
pub struct ExtractedBtpm {
    pub btpm: Btpm,
    pub input_basis: ComplexMatrix,
    pub output_basis: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub enum BtpmVerdict {
    Found(ExtractedBtpm),
    /// The basis images fail to commute; `max_commutator` is the largest
    /// max-norm of `[E(|i⟩⟨i|), E(|j⟩⟨j|)]`.
    NoBtpm {
        max_commutator: f64,
    },
}

impl BtpmVerdict {
    pub fn found(&self) -> Option<&ExtractedBtpm> {
        match self {
            BtpmVerdict::Found(e) => Some(e),
            BtpmVerdict::NoBtpm { .. } => None,
        }
    }

    pub fn into_found(self) -> Option<ExtractedBtpm> {
        match self {
            BtpmVerdict::Found(e) => Some(e),
            BtpmVerdict::NoBtpm { .. } => None,
        }
    }
}

/// Images `E(|i⟩⟨i|)` of the basis projectors.
pub fn basis_images(k: &KrausSet, input_basis: &ComplexMatrix) -> Vec<ComplexMatrix> {
    (0..input_basis.ncols())
        .map(|i| {
            let v = input_basis.column(i);
            k.apply_matrix(&(v * v.adjoint()))
        })
        .collect()
}

pub fn max_basis_commutator(images: &[ComplexMatrix]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            worst = worst.max(max_abs(&commutator(&images[i], &images[j])));
        }
    }
    worst
}

/// Splits sorted eigenvalue indices into runs separated by gaps ≥ `DEGENERACY_GAP`.
fn eigen_groups(values: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (idx, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (v - values[*g.last().unwrap()]).abs() < DEGENERACY_GAP => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

fn select_columns(m: &ComplexMatrix, cols: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Refines an orthonormal block `v` until every image is diagonal on it,
/// diagonalizing against `images[next..]` one at a time.
fn refine_block(
    v: ComplexMatrix,
    images: &[ComplexMatrix],
    next: usize,
    out: &mut Vec<ComplexMatrix>,
) {
    if v.ncols() == 1 || next == images.len() {
        out.push(v);
        return;
    }
    let restricted = v.adjoint() * &images[next] * &v;
    let (values, vectors) = hermitian_eigen(&restricted);
    let rotated = &v * vectors;
    for group in eigen_groups(&values) {
        refine_block(select_columns(&rotated, &group), images, next + 1, out);
    }
}

/// Extracts the BTPM of `k` with respect to `input_basis` (columns), or
/// reports that the basis images do not commute.
pub fn extract_btpm(
    k: &KrausSet,
    input_basis: &ComplexMatrix,
    seed: u64,
) -> Result<BtpmVerdict, BtpmError> {
    let n = k.input_dim();
    if input_basis.nrows() != n || input_basis.ncols() != n {
        return Err(QuantumError::DimensionMismatch(format!(
            "input basis is {}x{}, channel input dim is {n}",
            input_basis.nrows(),
            input_basis.ncols()
        ))
        .into());
    }
    let ortho = max_abs(&(input_basis.adjoint() * input_basis - ComplexMatrix::identity(n, n)));
    if ortho > 1e-10 {
        return Err(BtpmError::BasisNotOrthonormal(ortho));
    }

    let images = basis_images(k, input_basis);
    let worst = max_basis_commutator(&images);
    if worst >= COMMUTATION_TOL {
        return Ok(BtpmVerdict::NoBtpm {
            max_commutator: worst,
        });
    }

    let m = k.output_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut combo = ComplexMatrix::zeros(m, m);
    for img in &images {
        combo += img * real(rng.gen_range(0.5..1.5));
    }
    let (values, vectors) = hermitian_eigen(&combo);
    let mut blocks = Vec::new();
    for group in eigen_groups(&values) {
        let block = select_columns(&vectors, &group);
        if group.len() == 1 {
            blocks.push(block);
        } else {
            refine_block(block, &images, 0, &mut blocks);
        }
    }
    let mut basis_cols: Vec<ComplexMatrix> = Vec::with_capacity(m);
    for b in blocks {
        for c in 0..b.ncols() {
            basis_cols.push(b.columns(c, 1).into_owned());
        }
    }
    let output_basis = ComplexMatrix::from_fn(m, m, |r, c| basis_cols[c][(r, 0)]);

    let mut probs = vec![vec![0.0; m]; n];
    for (i, img) in images.iter().enumerate() {
        let d = output_basis.adjoint() * img * &output_basis;
        let mut off: f64 = 0.0;
        for r in 0..m {
            for c in 0..m {
                if r != c {
                    off = off.max(d[(r, c)].norm());
                }
            }
            probs[i][r] = d[(r, r)].re.clamp(0.0, 1.0);
        }
        if off > 1e-8 {
            return Err(BtpmError::NumericalDegeneracy {
                index: i,
                residual: off,
            });
        }
    }

    let order = descending_column_order(&probs);
    let probs: Vec<Vec<f64>> = probs
        .iter()
        .map(|r| order.iter().map(|&c| r[c]).collect())
        .collect();
    let output_basis = select_columns(&output_basis, &order);
    Ok(BtpmVerdict::Found(ExtractedBtpm {
        btpm: Btpm::new(probs)?,
        input_basis: input_basis.clone(),
        output_basis,
    }))
}

fn round12(x: f64) -> i64 {
    (x * 1e12).round() as i64
}

/// Involution `π` on columns with `A[1][π(k)] == A[0][k]` (12-decimal
/// match). Columns whose two entries agree are fixed points when
/// `allow_fixed` is set; otherwise they are paired up and only all-zero
/// columns may stay fixed.
fn involutive_pairing(row0: &[f64], row1: &[f64], allow_fixed: bool) -> Option<Vec<usize>> {
    let m = row0.len();
    let mut pi: Vec<Option<usize>> = vec![None; m];
    for k in 0..m {
        if pi[k].is_some() {
            continue;
        }
        let (a, b) = (round12(row0[k]), round12(row1[k]));
        if a == b && (allow_fixed || a == 0) {
            pi[k] = Some(k);
            continue;
        }
        let partner = (k + 1..m)
            .find(|&j| pi[j].is_none() && round12(row0[j]) == b && round12(row1[j]) == a)?;
        pi[k] = Some(partner);
        pi[partner] = Some(k);
    }
    pi.into_iter().collect()
}

/// Fixed-point-free (on the support) involution pairing the columns of a
/// two-input BTPM, when one exists. This is the `π` used by
/// [`kraus_from_btpm`] for its coherent construction.
pub fn coherent_pairing(b: &Btpm) -> Option<Vec<usize>> {
    if b.input_dim() != 2 {
        return None;
    }
    involutive_pairing(b.row(0), b.row(1), false)
}

/// Builds a Kraus set reproducing the BTPM on its basis projectors, with
/// computational input and output bases.
///
/// Two-input BTPMs whose columns pair up into an involution get the
/// coherent form `E_k = √p_k (|k⟩⟨0| + |π(k)⟩⟨1|)`. Otherwise, when
/// `M ≥ N`, input `i` is routed through a cyclic shift:
/// `E_k|i⟩ = √A[i][k+i] |k+i⟩` (indices mod `M`). Narrower outputs fall back
/// to measure-and-prepare operators `√A[i][k] |k⟩⟨i|`.
pub fn kraus_from_btpm(b: &Btpm) -> KrausSet {
    let n = b.input_dim();
    let m = b.output_dim();
    let mut ops = Vec::new();
    if n == 2 {
        if let Some(pi) = coherent_pairing(b) {
            for k in 0..m {
                let amp = real(b.get(0, k).sqrt());
                let mut e = ComplexMatrix::zeros(m, 2);
                e[(k, 0)] = amp;
                e[(pi[k], 1)] = amp;
                ops.push(e);
            }
            return KrausSet::new(ops).expect("paired construction is complete");
        }
    }
    if m >= n {
        for k in 0..m {
            let mut e = ComplexMatrix::zeros(m, n);
            for i in 0..n {
                let out = (k + i) % m;
                e[(out, i)] = real(b.get(i, out).sqrt());
            }
            ops.push(e);
        }
    } else {
        for i in 0..n {
            for k in 0..m {
                let mut e = ComplexMatrix::zeros(m, n);
                e[(k, i)] = real(b.get(i, k).sqrt());
                ops.push(e);
            }
        }
    }
    KrausSet::new(ops).expect("shifted construction is complete")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryTag {
    FullySymmetric,
    QuasiSymmetric,
    InputSymmetricOnly,
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SymmetryClass {
    pub tag: SymmetryTag,
    /// Column groups forming the quasi-symmetric sub-matrices; a single
    /// group for fully symmetric channels, absent otherwise.
    pub partition: Option<Vec<Vec<usize>>>,
}

impl SymmetryClass {
    pub fn is_fully_symmetric(&self) -> bool {
        self.tag == SymmetryTag::FullySymmetric
    }

    pub fn is_quasi_symmetric(&self) -> bool {
        matches!(
            self.tag,
            SymmetryTag::FullySymmetric | SymmetryTag::QuasiSymmetric
        )
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.tag)
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn multiset_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && sorted(a)
            .iter()
            .zip(sorted(b).iter())
            .all(|(x, y)| (x - y).abs() <= MULTISET_TOL)
}

fn rows_are_permutations(rows: &[Vec<f64>]) -> bool {
    rows.iter().all(|r| multiset_eq(r, &rows[0]))
}

pub fn classify(b: &Btpm) -> SymmetryClass {
    let input_symmetric = rows_are_permutations(b.rows());
    if !input_symmetric {
        return SymmetryClass {
            tag: SymmetryTag::Asymmetric,
            partition: None,
        };
    }
    let columns: Vec<Vec<f64>> = (0..b.output_dim()).map(|k| b.column(k)).collect();
    if columns.iter().all(|c| multiset_eq(c, &columns[0])) {
        return SymmetryClass {
            tag: SymmetryTag::FullySymmetric,
            partition: Some(vec![(0..b.output_dim()).collect()]),
        };
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, col) in columns.iter().enumerate() {
        match groups.iter_mut().find(|g| multiset_eq(&columns[g[0]], col)) {
            Some(g) => g.push(k),
            None => groups.push(vec![k]),
        }
    }
    let verified = groups.iter().all(|g| {
        let sub: Vec<Vec<f64>> = b
            .rows()
            .iter()
            .map(|r| g.iter().map(|&k| r[k]).collect())
            .collect();
        rows_are_permutations(&sub)
    });
    if verified {
        SymmetryClass {
            tag: SymmetryTag::QuasiSymmetric,
            partition: Some(groups),
        }
    } else {
        SymmetryClass {
            tag: SymmetryTag::InputSymmetricOnly,
            partition: None,
        }
    }
}

/// `E_k|0⟩ = √p_k|k'⟩`, `E_k|1⟩ = √p_k|π(k)'⟩` description of a two-input
/// quasi-symmetric channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqscCanonicalForm {
    pub probs: Vec<f64>,
    pub permutation: Vec<usize>,
}

impl QqscCanonicalForm {
    pub fn is_self_inverse(&self) -> bool {
        self.permutation
            .iter()
            .enumerate()
            .all(|(k, &j)| self.permutation[j] == k)
    }

    /// Output distribution for the input `q|0⟩⟨0| + (1−q)|1⟩⟨1|`:
    /// entry `k` is `q·p_k + (1−q)·p_{π⁻¹(k)}`.
    pub fn output_distribution(&self, q: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.probs.iter().map(|p| q * p).collect();
        for (k, &target) in self.permutation.iter().enumerate() {
            out[target] += (1.0 - q) * self.probs[k];
        }
        out
    }
}

pub fn qqsc_canonical_form(b: &Btpm) -> Result<QqscCanonicalForm, BtpmError> {
    if b.input_dim() != 2 {
        return Err(BtpmError::NotTwoInput(b.input_dim()));
    }
    let class = classify(b);
    let partition = match &class.partition {
        Some(p) if class.is_quasi_symmetric() => p.clone(),
        _ => return Err(BtpmError::NotQuasiSymmetric(class)),
    };
    let (row0, row1) = (b.row(0), b.row(1));
    let m = b.output_dim();
    let mut permutation = vec![usize::MAX; m];
    for group in &partition {
        let g0: Vec<f64> = group.iter().map(|&k| row0[k]).collect();
        let g1: Vec<f64> = group.iter().map(|&k| row1[k]).collect();
        let local = involutive_pairing(&g0, &g1, true)
            .or_else(|| greedy_matching(&g0, &g1))
            .ok_or_else(|| BtpmError::ClassificationInconsistency(group.clone()))?;
        for (slot, &target) in local.iter().enumerate() {
            permutation[group[slot]] = group[target];
        }
    }
    Ok(QqscCanonicalForm {
        probs: row0.to_vec(),
        permutation,
    })
}

/// Any bijection with `row1[π(k)] == row0[k]`, identity preferred.
fn greedy_matching(row0: &[f64], row1: &[f64]) -> Option<Vec<usize>> {
    let m = row0.len();
    let mut used = vec![false; m];
    let mut pi = vec![usize::MAX; m];
    for k in 0..m {
        if round12(row1[k]) == round12(row0[k]) {
            pi[k] = k;
            used[k] = true;
        }
    }
    for k in 0..m {
        if pi[k] != usize::MAX {
            continue;
        }
        let j = (0..m).find(|&j| !used[j] && round12(row1[j]) == round12(row0[k]))?;
        pi[k] = j;
        used[j] = true;
    }
    Some(pi)
}

/// Dense copy, handy for linear algebra on the probabilities.
pub fn to_matrix(b: &Btpm) -> DMatrix<f64> {
    DMatrix::from_fn(b.input_dim(), b.output_dim(), |i, k| b.get(i, k))
}
