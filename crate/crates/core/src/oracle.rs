//! Dense density-matrix simulation of the combining circuit, used to check
//! the closed-form coordinate-channel results for `N ≤ 4`.
//!
//! Qubits are ordered `(Q₁..Q_N, R₁..R_N)`, big-endian. After the channel
//! acts, the outputs `V_j` sit where the inputs `Q_j` were.

use serde::Serialize;
use thiserror::Error;

use crate::btpm::{self, BtpmError, ExtractedBtpm};
use crate::channels;
use crate::coherent::{self, CoherentError, SweepResult};
use crate::polarize::index_bit;
use crate::quantum::{
    apply_local_kraus, matrix_entropy, partial_trace_matrix, real, ComplexMatrix, KrausSet,
    QuantumError, C64,
};

/// Largest block length the oracle will simulate.
pub const MAX_ORACLE_N: usize = 4;
/// Pass threshold for the exhaustive combined-channel symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle supports N ∈ {{1, 2, 4}}, got {0}")]
    Unsupported(usize),
    #[error("coordinate index {index} outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("base channel must act on a qubit, got {0}→{1}")]
    NotQubit(usize, usize),
    #[error("input parameter q = {0} outside [0, 1]")]
    BadParameter(f64),
    #[error("base channel has no BTPM (max commutator {0:e})")]
    NoBtpm(f64),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Btpm(#[from] BtpmError),
    #[error(transparent)]
    Coherent(#[from] CoherentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gate {
    Cnot { control: usize, target: usize },
    Swap(usize, usize),
}

impl Gate {
    /// Action on a computational basis index over `n` qubits.
    pub fn apply_to_index(&self, x: usize, n: usize) -> usize {
        let mask = |q: usize| 1usize << (n - 1 - q);
        match *self {
            Gate::Cnot { control, target } => {
                if x & mask(control) != 0 {
                    x ^ mask(target)
                } else {
                    x
                }
            }
            Gate::Swap(a, b) => {
                let (ba, bb) = (x & mask(a) != 0, x & mask(b) != 0);
                if ba == bb {
                    x
                } else {
                    x ^ mask(a) ^ mask(b)
                }
            }
        }
    }
}

/// Gate list realizing `U_N` on qubits `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CircuitSpec {
    pub n: usize,
    pub gates: Vec<Gate>,
}

impl CircuitSpec {
    /// Maps a basis input `Q` to the encoded basis state `C`.
    pub fn simulate_basis(&self, q: usize) -> usize {
        self.gates
            .iter()
            .fold(q, |x, g| g.apply_to_index(x, self.n))
    }
}

fn check_n(n: usize) -> Result<(), OracleError> {
    if n == 0 || !n.is_power_of_two() || n > MAX_ORACLE_N {
        return Err(OracleError::Unsupported(n));
    }
    Ok(())
}

fn build_into(n: usize, offset: usize, gates: &mut Vec<Gate>) {
    if n == 1 {
        return;
    }
    for j in 0..n / 2 {
        gates.push(Gate::Cnot {
            control: offset + 2 * j + 1,
            target: offset + 2 * j,
        });
    }
    // Reverse shuffle: odd-position wires to the first half, even to the
    // second, realized as a selection sort of SWAPs.
    let target: Vec<usize> = (0..n / 2)
        .map(|k| 2 * k)
        .chain((0..n / 2).map(|k| 2 * k + 1))
        .collect();
    let mut wires: Vec<usize> = (0..n).collect();
    for (pos, &want) in target.iter().enumerate() {
        let at = wires.iter().position(|&w| w == want).expect("permutation");
        if at != pos {
            gates.push(Gate::Swap(offset + pos, offset + at));
            wires.swap(pos, at);
        }
    }
    build_into(n / 2, offset, gates);
    build_into(n / 2, offset + n / 2, gates);
}

/// Recursive combining circuit: a CNOT layer, the reverse shuffle, then two
/// copies of `U_{N/2}`.
pub fn build_circuit(n: usize) -> Result<CircuitSpec, OracleError> {
    check_n(n)?;
    let mut gates = Vec::new();
    build_into(n, 0, &mut gates);
    Ok(CircuitSpec { n, gates })
}

fn check_qubit(k: &KrausSet) -> Result<(), OracleError> {
    if k.input_dim() != 2 || k.output_dim() != 2 {
        return Err(OracleError::NotQubit(k.input_dim(), k.output_dim()));
    }
    Ok(())
}

/// Joint state after the channels, as a `4^N`-dimensional operator over
/// `(V₁..V_N, R₁..R_N)`. Input `Q_i` is `q|b₀⟩⟨b₀| + (1−q)|b₁⟩⟨b₁|` in the
/// columns of `basis`; every other input is maximally mixed. The circuit
/// acts in the same basis.
fn evolved_state(
    base: &KrausSet,
    basis: &ComplexMatrix,
    n: usize,
    i: usize,
    q: f64,
) -> Result<ComplexMatrix, OracleError> {
    let circuit = build_circuit(n)?;
    let total = 2 * n;
    let dim = 1usize << total;
    let mut ket = vec![C64::default(); dim];
    for x in 0..1usize << n {
        let amp: f64 = (0..n)
            .map(|j| {
                let bit = index_bit(x, n, j);
                if j + 1 == i {
                    if bit == 0 {
                        q
                    } else {
                        1.0 - q
                    }
                } else {
                    0.5
                }
            })
            .map(f64::sqrt)
            .product();
        if amp == 0.0 {
            continue;
        }
        let c = circuit.simulate_basis(x);
        ket[(c << n) | x] = real(amp);
    }
    let psi = ComplexMatrix::from_column_slice(dim, 1, &ket);
    let mut rho = &psi * psi.adjoint();
    let dims = vec![2; total];
    let rotate = KrausSet::new(vec![basis.clone()])?;
    for j in 0..n {
        rho = apply_local_kraus(&rho, &dims, j, &rotate)?;
        rho = apply_local_kraus(&rho, &dims, j, base)?;
    }
    Ok(rho)
}

/// `S(V, R₁^{i−1}) − S(V, R₁^{i})`: coherent information of the coordinate
/// channel `E_N^{(i)}` with input parameter `q`, computed on the full state.
pub fn simulate_coordinate(
    base: &KrausSet,
    n: usize,
    i: usize,
    q: f64,
) -> Result<f64, OracleError> {
    simulate_coordinate_in_basis(base, &channels::computational_basis(2), n, i, q)
}

/// [`simulate_coordinate`] with inputs and circuit expressed in the columns
/// of `basis`.
pub fn simulate_coordinate_in_basis(
    base: &KrausSet,
    basis: &ComplexMatrix,
    n: usize,
    i: usize,
    q: f64,
) -> Result<f64, OracleError> {
    check_qubit(base)?;
    check_n(n)?;
    if i == 0 || i > n {
        return Err(OracleError::IndexOutOfRange { index: i, n });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(OracleError::BadParameter(q));
    }
    let rho = evolved_state(base, basis, n, i, q)?;
    let dims = vec![2; 2 * n];
    let without: Vec<usize> = (0..n + i - 1).collect();
    let with: Vec<usize> = (0..n + i).collect();
    let s_without = matrix_entropy(&partial_trace_matrix(&rho, &dims, &without)?)?;
    let s_with = matrix_entropy(&partial_trace_matrix(&rho, &dims, &with)?)?;
    Ok(s_without - s_with)
}

/// Grid sweep of [`simulate_coordinate`] over `q`.
pub fn sweep_coordinate(
    base: &KrausSet,
    n: usize,
    i: usize,
    grid_size: usize,
) -> Result<SweepResult, OracleError> {
    let curve = coherent::sweep_grid(grid_size)?
        .into_iter()
        .map(|q| Ok((q, simulate_coordinate(base, n, i, q)?)))
        .collect::<Result<Vec<_>, OracleError>>()?;
    let (q_star, i_star) = coherent::grid_argmax(&curve);
    Ok(SweepResult {
        q_star,
        i_star,
        curve,
    })
}

fn tensor_basis_vector(basis: &ComplexMatrix, bits: usize, n: usize) -> ComplexMatrix {
    (0..n).fold(ComplexMatrix::from_element(1, 1, real(1.0)), |acc, j| {
        acc.kronecker(&basis.column(index_bit(bits, n, j) as usize).into_owned())
    })
}

/// `Pr_N(V|Q)` for every basis pair, by preparing `|Q·G_N⟩` through the
/// circuit, applying the channel to each qubit and measuring in the output
/// basis.
pub fn simulate_combined_distribution(
    base: &KrausSet,
    extracted: &ExtractedBtpm,
    n: usize,
) -> Result<Vec<Vec<f64>>, OracleError> {
    check_qubit(base)?;
    let circuit = build_circuit(n)?;
    let dim = 1usize << n;
    let dims = vec![2; n];
    let outputs: Vec<ComplexMatrix> = (0..dim)
        .map(|v| tensor_basis_vector(&extracted.output_basis, v, n))
        .collect();
    let mut table = Vec::with_capacity(dim);
    for q in 0..dim {
        let c = circuit.simulate_basis(q);
        let ket = tensor_basis_vector(&extracted.input_basis, c, n);
        let mut rho = &ket * ket.adjoint();
        for j in 0..n {
            rho = apply_local_kraus(&rho, &dims, j, base)?;
        }
        table.push(
            outputs
                .iter()
                .map(|o| (o.adjoint() * &rho * o)[(0, 0)].re)
                .collect(),
        );
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryVerdict {
    pub passed: bool,
    pub max_violation: f64,
    pub checks: usize,
    pub tolerance: f64,
}

/// Exhaustive check of `Pr_N(V|Q) = Pr_N((a·G_N)·V | Q ⊕ a)` over all
/// `a, Q, V`, where `b·V` applies the output permutation `π_{b_j}` to each
/// `V_j`. `π₁` comes from the canonical pairing of the base BTPM, falling
/// back to the swap when the base is not quasi-symmetric.
pub fn verify_combined_symmetry(
    base: &KrausSet,
    input_basis: &ComplexMatrix,
    n: usize,
    seed: u64,
) -> Result<SymmetryVerdict, OracleError> {
    check_qubit(base)?;
    check_n(n)?;
    let extracted = match btpm::extract_btpm(base, input_basis, seed)? {
        btpm::BtpmVerdict::Found(e) => e,
        btpm::BtpmVerdict::NoBtpm { max_commutator } => {
            return Err(OracleError::NoBtpm(max_commutator))
        }
    };
    let pi1 = btpm::qqsc_canonical_form(&extracted.btpm)
        .map(|f| f.permutation)
        .unwrap_or_else(|_| vec![1, 0]);
    let act = |b: usize, v: usize| -> usize {
        (0..n).fold(0, |acc, j| {
            let vj = index_bit(v, n, j) as usize;
            let moved = if index_bit(b, n, j) == 1 { pi1[vj] } else { vj };
            (acc << 1) | moved
        })
    };
    let table = simulate_combined_distribution(base, &extracted, n)?;
    let circuit = build_circuit(n)?;
    let dim = 1usize << n;
    let mut worst: f64 = 0.0;
    for a in 0..dim {
        let ag = circuit.simulate_basis(a);
        for q in 0..dim {
            for v in 0..dim {
                worst = worst.max((table[q][v] - table[q ^ a][act(ag, v)]).abs());
            }
        }
    }
    Ok(SymmetryVerdict {
        passed: worst < SYMMETRY_TOL,
        max_violation: worst,
        checks: dim * dim * dim,
        tolerance: SYMMETRY_TOL,
    })
}

/// One Kraus branch `F_k = E_{k₁} ⊗ … ⊗ E_{k_N}` acting on `|Q·G_N⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub q: usize,
    pub kraus: Vec<usize>,
    /// Output basis index when the branch lands on a single basis vector.
    pub v: Option<usize>,
    /// Squared norm of `F_k|Q·G_N⟩`.
    pub weight: f64,
}

/// Enumerates all Kraus branches for each basis input. For channels whose
/// Kraus operators map basis vectors to basis vectors, every branch has a
/// definite `v` and the branch weights add up to `Pr_N(V|Q)`.
pub fn enumerate_branches(
    base: &KrausSet,
    extracted: &ExtractedBtpm,
    n: usize,
) -> Result<Vec<Branch>, OracleError> {
    check_qubit(base)?;
    let circuit = build_circuit(n)?;
    let dim = 1usize << n;
    let ops = base.operators();
    let outputs: Vec<ComplexMatrix> = (0..dim)
        .map(|v| tensor_basis_vector(&extracted.output_basis, v, n))
        .collect();
    let branches = ops.len().pow(n as u32);
    let mut out = Vec::with_capacity(dim * branches);
    for q in 0..dim {
        let ket = tensor_basis_vector(&extracted.input_basis, circuit.simulate_basis(q), n);
        for b in 0..branches {
            let kraus: Vec<usize> = (0..n)
                .map(|j| b / ops.len().pow((n - 1 - j) as u32) % ops.len())
                .collect();
            let f = kraus
                .iter()
                .fold(ComplexMatrix::from_element(1, 1, real(1.0)), |acc, &k| {
                    acc.kronecker(&ops[k])
                });
            let image = f * &ket;
            let weight = image.norm_squared();
            let overlaps: Vec<f64> = outputs
                .iter()
                .map(|o| (o.adjoint() * &image)[(0, 0)].norm_sqr())
                .collect();
            let v = overlaps
                .iter()
                .position(|&p| weight > 0.0 && (p - weight).abs() < 1e-12 * weight.max(1.0));
            out.push(Branch {
                q,
                kraus,
                v,
                weight,
            });
        }
    }
    Ok(out)
}
