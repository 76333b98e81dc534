//! Coherent information, entropy exchange and the single-letter maximum over
//! diagonal two-level inputs.

use serde::Serialize;
use thiserror::Error;

use crate::btpm::{self, Btpm, BtpmError, QqscCanonicalForm};
use crate::channels;
use crate::quantum::{
    self, apply_kraus, hermiticity_error, matrix_entropy, shannon_entropy, ComplexMatrix,
    DensityOperator, KrausSet, QuantumError,
};

/// Tolerance on the entropy-exchange matrix being a density operator.
pub const EXCHANGE_TOL: f64 = 1e-8;
/// Default number of sweep points over q ∈ [0, 1].
pub const DEFAULT_GRID: usize = 1001;
/// Values within this of the maximum count as ties when locating the argmax.
pub const ARGMAX_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CoherentError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Btpm(#[from] BtpmError),
    #[error("entropy-exchange matrix is not a density operator: {0}")]
    Numerical(String),
    #[error("input dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("sweep needs an odd grid size of at least 3, got {0}")]
    BadGrid(usize),
    #[error("sweep needs a two-dimensional input, got {0}")]
    NotTwoDimensional(usize),
    #[error("closed form needs a self-inverse permutation")]
    NotInvolution,
    #[error("quasi-symmetric channel peaked at q = {q_star}, not 1/2")]
    OffCenterMaximum { q_star: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherentInfoResult {
    /// `output_entropy − entropy_exchange`; may be negative.
    pub value: f64,
    pub output_entropy: f64,
    pub entropy_exchange: f64,
}

/// `W_ij = tr(E_i ρ E_j†)`.
pub fn exchange_matrix(k: &KrausSet, rho: &DensityOperator) -> Result<ComplexMatrix, QuantumError> {
    if k.input_dim() != rho.dim() {
        return Err(QuantumError::DimensionMismatch(format!(
            "Kraus input dim {} vs state dim {}",
            k.input_dim(),
            rho.dim()
        )));
    }
    let ops = k.operators();
    let applied: Vec<ComplexMatrix> = ops.iter().map(|e| e * rho.matrix()).collect();
    Ok(ComplexMatrix::from_fn(ops.len(), ops.len(), |i, j| {
        // tr(E_i ρ E_j†) = Σ (E_i ρ)_{ab} conj(E_j)_{ab}
        applied[i]
            .iter()
            .zip(ops[j].iter())
            .map(|(x, y)| x * y.conj())
            .sum()
    }))
}

pub fn entropy_exchange(k: &KrausSet, rho: &DensityOperator) -> Result<f64, CoherentError> {
    let w = exchange_matrix(k, rho)?;
    let herm = hermiticity_error(&w);
    let tr = w.trace();
    if herm > EXCHANGE_TOL || (tr.re - 1.0).abs() > EXCHANGE_TOL || tr.im.abs() > EXCHANGE_TOL {
        return Err(CoherentError::Numerical(format!(
            "hermiticity error {herm:e}, trace {tr}"
        )));
    }
    let w = (&w + w.adjoint()) * quantum::real(0.5);
    Ok(matrix_entropy(&w)?)
}

/// `S(Q') − S_e` with `S_e` from the exchange matrix.
pub fn coherent_information(
    k: &KrausSet,
    rho: &DensityOperator,
) -> Result<CoherentInfoResult, CoherentError> {
    let output_entropy = apply_kraus(k, rho)?.entropy()?;
    let entropy_exchange = entropy_exchange(k, rho)?;
    Ok(CoherentInfoResult {
        value: output_entropy - entropy_exchange,
        output_entropy,
        entropy_exchange,
    })
}

/// `S(RQ')` from the explicit purified evolution `(E ⊗ I_R)|QR⟩`.
/// Only defined for states diagonal in the computational basis.
pub fn entropy_exchange_purified(
    k: &KrausSet,
    rho: &DensityOperator,
) -> Result<f64, CoherentError> {
    let ket = quantum::purify(rho)?;
    if k.input_dim() != rho.dim() {
        return Err(QuantumError::DimensionMismatch(format!(
            "Kraus input dim {} vs state dim {}",
            k.input_dim(),
            rho.dim()
        ))
        .into());
    }
    let joint = &ket * ket.adjoint();
    let id = ComplexMatrix::identity(rho.dim(), rho.dim());
    let lifted: Vec<ComplexMatrix> = k.operators().iter().map(|e| e.kronecker(&id)).collect();
    let mut out = ComplexMatrix::zeros(lifted[0].nrows(), lifted[0].nrows());
    for e in &lifted {
        out += e * &joint * e.adjoint();
    }
    Ok(matrix_entropy(&out)?)
}

/// Cross-check route for [`coherent_information`] through the purification.
pub fn coherent_information_purified(
    k: &KrausSet,
    rho: &DensityOperator,
) -> Result<CoherentInfoResult, CoherentError> {
    let output_entropy = apply_kraus(k, rho)?.entropy()?;
    let entropy_exchange = entropy_exchange_purified(k, rho)?;
    Ok(CoherentInfoResult {
        value: output_entropy - entropy_exchange,
        output_entropy,
        entropy_exchange,
    })
}

/// Coherent information at the maximally mixed input.
pub fn uniform_coherent_information(k: &KrausSet) -> Result<f64, CoherentError> {
    let d = k.input_dim();
    if !d.is_power_of_two() {
        return Err(CoherentError::NotPowerOfTwo(d));
    }
    Ok(coherent_information(k, &DensityOperator::maximally_mixed(d))?.value)
}

/// Uniform coherent information of the channel [`btpm::kraus_from_btpm`]
/// builds for `b`.
pub fn uniform_coherent_information_btpm(b: &Btpm) -> Result<f64, CoherentError> {
    uniform_coherent_information(&btpm::kraus_from_btpm(b))
}

/// `H(q·p_k + (1−q)·p_π(k)) − H(p)` for a canonical form with an involutive `π`.
pub fn qqsc_closed_form(
    form: &QqscCanonicalForm,
    q: f64,
) -> Result<CoherentInfoResult, CoherentError> {
    if !form.is_self_inverse() {
        return Err(CoherentError::NotInvolution);
    }
    let output_entropy = shannon_entropy(&form.output_distribution(q));
    let entropy_exchange = shannon_entropy(&form.probs);
    Ok(CoherentInfoResult {
        value: output_entropy - entropy_exchange,
        output_entropy,
        entropy_exchange,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub q_star: f64,
    pub i_star: f64,
    pub curve: Vec<(f64, f64)>,
}

pub fn sweep_grid(grid_size: usize) -> Result<Vec<f64>, CoherentError> {
    if grid_size < 3 || grid_size.is_multiple_of(2) {
        return Err(CoherentError::BadGrid(grid_size));
    }
    let steps = (grid_size - 1) as f64;
    Ok((0..grid_size).map(|j| j as f64 / steps).collect())
}

/// Grid argmax; ties within [`ARGMAX_TIE_TOL`] resolve toward q = ½.
pub fn grid_argmax(curve: &[(f64, f64)]) -> (f64, f64) {
    let best = curve.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    curve
        .iter()
        .filter(|p| p.1 >= best - ARGMAX_TIE_TOL)
        .min_by(|a, b| (a.0 - 0.5).abs().total_cmp(&(b.0 - 0.5).abs()))
        .copied()
        .expect("nonempty grid")
}

/// Evaluates `I(q|b₀⟩⟨b₀| + (1−q)|b₁⟩⟨b₁|, E)` on a uniform grid, where
/// `b₀, b₁` are the columns of `input_basis`.
pub fn mslci_sweep(
    k: &KrausSet,
    input_basis: &ComplexMatrix,
    grid_size: usize,
) -> Result<SweepResult, CoherentError> {
    if k.input_dim() != 2 {
        return Err(CoherentError::NotTwoDimensional(k.input_dim()));
    }
    let grid = sweep_grid(grid_size)?;
    let mut curve = Vec::with_capacity(grid.len());
    for q in grid {
        let rho = DensityOperator::mixture_in_basis(&[q, 1.0 - q], input_basis)?;
        curve.push((q, coherent_information(k, &rho)?.value));
    }
    let (q_star, i_star) = grid_argmax(&curve);
    Ok(SweepResult {
        q_star,
        i_star,
        curve,
    })
}

/// Sweep for the channel built from `b`. When `b` is quasi-symmetric and its
/// columns pair into an involution, the maximum must sit at q = ½.
pub fn mslci_sweep_btpm(b: &Btpm, grid_size: usize) -> Result<SweepResult, CoherentError> {
    if b.input_dim() != 2 {
        return Err(CoherentError::NotTwoDimensional(b.input_dim()));
    }
    let k = btpm::kraus_from_btpm(b);
    let result = mslci_sweep(&k, &channels::computational_basis(2), grid_size)?;
    let covered = btpm::classify(b).is_quasi_symmetric() && btpm::coherent_pairing(b).is_some();
    if covered && result.q_star != 0.5 {
        return Err(CoherentError::OffCenterMaximum {
            q_star: result.q_star,
        });
    }
    Ok(result)
}
