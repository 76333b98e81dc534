//! Dense complex linear algebra and density-operator primitives.
//!
//! Subsystems are indexed big-endian: subsystem 0 is the most significant
//! tensor factor. All entropies are in bits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type ComplexMatrix = DMatrix<C64>;
pub type StateVector = DVector<C64>;

/// Max elementwise |ρ − ρ†| accepted for a density operator.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Max |tr ρ − 1| accepted for a density operator.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues in [−EIGEN_TOL, 0) are treated as zero.
pub const EIGEN_TOL: f64 = 1e-10;
/// Eigenvalues outside [−EIGEN_HARD_LIMIT, 1 + EIGEN_HARD_LIMIT] signal a bug upstream.
pub const EIGEN_HARD_LIMIT: f64 = 1e-8;
/// Max elementwise ‖Σ E†E − I‖ accepted for a Kraus set.
pub const COMPLETENESS_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("eigenvalue {0:e} outside [-1e-8, 1+1e-8]")]
    EigenvalueOutOfRange(f64),
    #[error("incomplete Kraus set: max |sum E^dag E - I| = {0:e}")]
    Incomplete(f64),
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest elementwise modulus of `m`.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let (values, vectors) = raw_eigen(m);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted = order.iter().map(|&i| values[i]).collect();
    let vectors = ComplexMatrix::from_fn(m.nrows(), m.ncols(), |r, col| vectors[(r, order[col])]);
    (sorted, vectors)
}

pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

// The tridiagonal QR in nalgebra can return NaN on large, highly degenerate
// inputs (e.g. low-rank density operators with many exact zeros). In that
// case shift by a norm bound so the matrix is positive semidefinite, where
// singular values and left singular vectors are the eigenpairs.
fn raw_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().all(|v| v.is_finite())
        && eig
            .eigenvectors
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    {
        return (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors);
    }
    let shift = m.norm() + 1.0;
    let n = m.nrows();
    let shifted = m + ComplexMatrix::identity(n, n) * real(shift);
    let svd = shifted.svd(true, false);
    let values = svd.singular_values.iter().map(|s| s - shift).collect();
    (values, svd.u.expect("requested U"))
}

/// −Σ p log₂ p with 0·log 0 = 0.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

/// Von Neumann entropy of a raw matrix, checking Hermiticity first.
pub fn matrix_entropy(m: &ComplexMatrix) -> Result<f64, QuantumError> {
    let herm = hermiticity_error(m);
    if herm > HERMITIAN_TOL {
        return Err(QuantumError::InvalidState(format!(
            "matrix is not Hermitian (max |rho - rho^dag| = {herm:e})"
        )));
    }
    let mut probs = Vec::with_capacity(m.nrows());
    for lambda in hermitian_eigenvalues(m) {
        if !(-EIGEN_HARD_LIMIT..=1.0 + EIGEN_HARD_LIMIT).contains(&lambda) {
            return Err(QuantumError::EigenvalueOutOfRange(lambda));
        }
        probs.push(lambda.clamp(0.0, 1.0));
    }
    Ok(shannon_entropy(&probs))
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates all density-operator invariants.
    pub fn new(matrix: ComplexMatrix) -> Result<Self, QuantumError> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(QuantumError::InvalidState(format!(
                "density operator must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermiticity_error(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(QuantumError::InvalidState(format!(
                "not Hermitian (max |rho - rho^dag| = {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QuantumError::InvalidState(format!("trace {tr} != 1")));
        }
        if let Some(&min) = hermitian_eigenvalues(&matrix).first() {
            if min < -EIGEN_TOL {
                return Err(QuantumError::InvalidState(format!(
                    "negative eigenvalue {min:e}"
                )));
            }
        }
        Ok(Self { matrix })
    }

    /// Skips the eigenvalue check; used for results of trace-preserving maps
    /// on already validated inputs.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_square());
        Self { matrix }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self, QuantumError> {
        let d = probs.len();
        Self::new(ComplexMatrix::from_fn(d, d, |r, col| {
            if r == col {
                real(probs[r])
            } else {
                C64::default()
            }
        }))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(ComplexMatrix::identity(dim, dim) * real(1.0 / dim as f64))
    }

    /// |ψ⟩⟨ψ| for a normalized ket.
    pub fn pure(ket: &StateVector) -> Result<Self, QuantumError> {
        let norm = ket.norm();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(QuantumError::InvalidState(format!("ket norm {norm} != 1")));
        }
        Ok(Self::from_trusted(ket * ket.adjoint()))
    }

    /// Σ_i p_i |b_i⟩⟨b_i| over the columns of `basis`.
    pub fn mixture_in_basis(probs: &[f64], basis: &ComplexMatrix) -> Result<Self, QuantumError> {
        if basis.ncols() != probs.len() {
            return Err(QuantumError::DimensionMismatch(format!(
                "{} weights for {} basis vectors",
                probs.len(),
                basis.ncols()
            )));
        }
        let d = basis.nrows();
        let mut m = ComplexMatrix::zeros(d, d);
        for (i, &p) in probs.iter().enumerate() {
            let v = basis.column(i);
            m += (v * v.adjoint()) * real(p);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn entropy(&self) -> Result<f64, QuantumError> {
        von_neumann_entropy(self)
    }
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64, QuantumError> {
    matrix_entropy(rho.matrix())
}

pub fn tensor_product(a: &DensityOperator, b: &DensityOperator) -> DensityOperator {
    DensityOperator::from_trusted(a.matrix().kronecker(b.matrix()))
}

/// Maps a multi-index (big-endian digits) to a flat index.
fn flat_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

fn digits_of(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &n) in out.iter_mut().zip(dims).rev() {
        *slot = index % n;
        index /= n;
    }
    out
}

/// Reduced operator on the `keep` subsystems, kept in their original order.
pub fn partial_trace(
    rho: &DensityOperator,
    subsystem_dims: &[usize],
    keep: &[usize],
) -> Result<DensityOperator, QuantumError> {
    partial_trace_matrix(rho.matrix(), subsystem_dims, keep).map(DensityOperator::from_trusted)
}

pub fn partial_trace_matrix(
    m: &ComplexMatrix,
    subsystem_dims: &[usize],
    keep: &[usize],
) -> Result<ComplexMatrix, QuantumError> {
    let total: usize = subsystem_dims.iter().product();
    if subsystem_dims.is_empty() || total != m.nrows() || !m.is_square() {
        return Err(QuantumError::DimensionMismatch(format!(
            "subsystem dims {subsystem_dims:?} do not factor a {}x{} operator",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() {
        return Err(QuantumError::DimensionMismatch("keep set is empty".into()));
    }
    if let Some(&bad) = kept.iter().find(|&&k| k >= subsystem_dims.len()) {
        return Err(QuantumError::DimensionMismatch(format!(
            "subsystem {bad} out of range for {} subsystems",
            subsystem_dims.len()
        )));
    }
    let traced: Vec<usize> = (0..subsystem_dims.len())
        .filter(|i| !kept.contains(i))
        .collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&i| subsystem_dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| subsystem_dims[i]).collect();
    let kd: usize = kept_dims.iter().product();
    let td: usize = traced_dims.iter().product();

    // full[k * td + t] = flat index of (kept digits k, traced digits t)
    let mut full = vec![0usize; kd * td];
    let mut digits = vec![0usize; subsystem_dims.len()];
    for k in 0..kd {
        let kdig = digits_of(k, &kept_dims);
        for (slot, &sub) in kdig.iter().zip(&kept) {
            digits[sub] = *slot;
        }
        for t in 0..td {
            let tdig = digits_of(t, &traced_dims);
            for (slot, &sub) in tdig.iter().zip(&traced) {
                digits[sub] = *slot;
            }
            full[k * td + t] = flat_index(&digits, subsystem_dims);
        }
    }
    Ok(ComplexMatrix::from_fn(kd, kd, |r, col| {
        (0..td)
            .map(|t| m[(full[r * td + t], full[col * td + t])])
            .sum()
    }))
}

/// Completeness-satisfying list of operators, each `output_dim × input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    input_dim: usize,
    output_dim: usize,
    operators: Vec<ComplexMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self, QuantumError> {
        let first = operators
            .first()
            .ok_or_else(|| QuantumError::DimensionMismatch("empty Kraus set".into()))?;
        let (output_dim, input_dim) = first.shape();
        if let Some(op) = operators
            .iter()
            .find(|op| op.shape() != (output_dim, input_dim))
        {
            return Err(QuantumError::DimensionMismatch(format!(
                "operator shapes differ: {:?} vs {:?}",
                op.shape(),
                (output_dim, input_dim)
            )));
        }
        let set = Self {
            input_dim,
            output_dim,
            operators,
        };
        let err = set.completeness_error();
        if err > COMPLETENESS_TOL {
            return Err(QuantumError::Incomplete(err));
        }
        Ok(set)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            input_dim: dim,
            output_dim: dim,
            operators: vec![ComplexMatrix::identity(dim, dim)],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// max |Σ E†E − I|.
    pub fn completeness_error(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.input_dim, self.input_dim);
        for e in &self.operators {
            sum += e.adjoint() * e;
        }
        max_abs(&(sum - ComplexMatrix::identity(self.input_dim, self.input_dim)))
    }

    /// Σ_k E_k ρ E_k† on a raw matrix, no validation.
    pub fn apply_matrix(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.output_dim, self.output_dim);
        for e in &self.operators {
            out += e * rho * e.adjoint();
        }
        out
    }
}

pub fn apply_kraus(k: &KrausSet, rho: &DensityOperator) -> Result<DensityOperator, QuantumError> {
    if k.input_dim() != rho.dim() {
        return Err(QuantumError::DimensionMismatch(format!(
            "Kraus input dim {} vs state dim {}",
            k.input_dim(),
            rho.dim()
        )));
    }
    Ok(DensityOperator::from_trusted(k.apply_matrix(rho.matrix())))
}

/// Applies a Kraus set to one tensor factor of a raw operator, leaving the
/// other factors untouched. The factor keeps its dimension.
pub fn apply_local_kraus(
    m: &ComplexMatrix,
    subsystem_dims: &[usize],
    target: usize,
    k: &KrausSet,
) -> Result<ComplexMatrix, QuantumError> {
    let total: usize = subsystem_dims.iter().product();
    if total != m.nrows() || !m.is_square() || target >= subsystem_dims.len() {
        return Err(QuantumError::DimensionMismatch(format!(
            "cannot address subsystem {target} of {subsystem_dims:?} in a {}x{} operator",
            m.nrows(),
            m.ncols()
        )));
    }
    let d = subsystem_dims[target];
    if k.input_dim() != d || k.output_dim() != d {
        return Err(QuantumError::DimensionMismatch(format!(
            "local Kraus set is {}->{} but subsystem has dim {d}",
            k.input_dim(),
            k.output_dim()
        )));
    }
    let stride: usize = subsystem_dims[target + 1..].iter().product();
    let block = d * stride;
    // index = hi * block + x * stride + lo
    let split = |idx: usize| (idx - (idx / block) * block) / stride;
    let with = |idx: usize, x: usize| idx - split(idx) * stride + x * stride;

    let mut out = ComplexMatrix::zeros(total, total);
    let mut left = ComplexMatrix::zeros(total, total);
    for e in k.operators() {
        // left = (I ⊗ E ⊗ I) m
        for r in 0..total {
            let x = split(r);
            for col in 0..total {
                let mut acc = C64::default();
                for y in 0..d {
                    acc += e[(x, y)] * m[(with(r, y), col)];
                }
                left[(r, col)] = acc;
            }
        }
        // out += left (I ⊗ E† ⊗ I)
        for col in 0..total {
            let x = split(col);
            for r in 0..total {
                let mut acc = C64::default();
                for y in 0..d {
                    acc += left[(r, with(col, y))] * e[(x, y)].conj();
                }
                out[(r, col)] += acc;
            }
        }
    }
    Ok(out)
}

/// Σ_i √p_i |i⟩|i⟩ (system ⊗ reference) for a state diagonal in the
/// computational basis.
pub fn purify(rho: &DensityOperator) -> Result<StateVector, QuantumError> {
    let d = rho.dim();
    let m = rho.matrix();
    for r in 0..d {
        for col in 0..d {
            if r != col && m[(r, col)].norm() >= 1e-12 {
                return Err(QuantumError::Unsupported(format!(
                    "purification needs a diagonal state; entry ({r},{col}) = {}",
                    m[(r, col)]
                )));
            }
        }
    }
    let mut ket = StateVector::zeros(d * d);
    for i in 0..d {
        ket[i * d + i] = real(m[(i, i)].re.max(0.0).sqrt());
    }
    Ok(ket)
}
