//! The polar transform on two-input channels: the GF(2) generator matrix,
//! the classical minus/plus recursion, closed-form coordinate BTPMs, and
//! polarization reports.
//!
//! Binary vectors of length `N` map to integers big-endian, so `u₁` is the
//! most significant bit. This matches the qubit ordering used by the oracle.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::btpm::{self, Btpm, BtpmError, SymmetryClass};
use crate::coherent::{self, CoherentError};

/// Tolerance on the row sums of a classical channel.
pub const CHANNEL_SUM_TOL: f64 = 1e-10;
/// Probabilities are rounded to this many decimals when merging symbols.
pub const MERGE_DECIMALS: i32 = 12;
/// Largest block length built without quantization in auto mode.
pub const EXACT_THRESHOLD: usize = 16;
/// Default output alphabet size for quantized construction.
pub const DEFAULT_MU: usize = 256;
/// Largest `N` for which `2^N × 2^N` combined matrices are materialized.
pub const MAX_COMBINED_N: usize = 12;
/// Conservation tolerance checked by exact-mode reports.
pub const SUM_CHECK_TOL: f64 = 1e-8;
/// Slack allowed on `I_i ∈ [0, 1]`.
pub const RANGE_TOL: f64 = 1e-9;

/// LLR pre-binning used before adjacent merging in quantized mode.
const LLR_BINS: usize = 8192;
const LLR_CLIP: f64 = 40.0;

#[derive(Debug, Error)]
pub enum PolarizeError {
    #[error("block length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("coordinate index {index} outside 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("polarization needs a 2×2 base BTPM, got {0}×{1}")]
    NotBinary(usize, usize),
    #[error("base channel is not fully symmetric: {0}")]
    NotFullySymmetric(SymmetryClass),
    #[error("N = {n} exceeds the limit of {limit} for dense combined matrices")]
    ResourceLimit { n: usize, limit: usize },
    #[error("quantization needs at least 2 output symbols, got {0}")]
    BadMu(usize),
    #[error("report invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Btpm(#[from] BtpmError),
    #[error(transparent)]
    Coherent(#[from] CoherentError),
}

fn log2_exact(n: usize) -> Result<u32, PolarizeError> {
    if n == 0 || !n.is_power_of_two() {
        return Err(PolarizeError::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros())
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// Bit `j` (0-based position, `u₁` first) of a big-endian index over `n` bits.
pub fn index_bit(index: usize, n: usize, j: usize) -> u8 {
    ((index >> (n - 1 - j)) & 1) as u8
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

pub fn index_to_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|j| index_bit(index, n, j)).collect()
}

/// `G_N = B_N F^{⊗n}` over GF(2), rows stored as 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    n: u32,
    size: usize,
    words: usize,
    rows: Vec<Vec<u64>>,
}

impl GeneratorMatrix {
    pub fn new(size: usize) -> Result<Self, PolarizeError> {
        let n = log2_exact(size)?;
        let words = size.div_ceil(64);
        let rows = (0..size)
            .map(|r| {
                let rev = bit_reverse(r, n);
                let mut row = vec![0u64; words];
                for c in 0..size {
                    if c & rev == c {
                        row[c / 64] |= 1 << (c % 64);
                    }
                }
                row
            })
            .collect();
        Ok(Self {
            n,
            size,
            words,
            rows,
        })
    }

    /// `log₂ N`.
    pub fn log_size(&self) -> u32 {
        self.n
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r][c / 64] >> (c % 64) & 1 == 1
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        (0..self.size)
            .map(|r| (0..self.size).map(|c| self.get(r, c) as u8).collect())
            .collect()
    }

    /// `u·G_N`, XOR-ing whole rows a word at a time.
    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>, PolarizeError> {
        if u.len() != self.size {
            return Err(PolarizeError::LengthMismatch {
                expected: self.size,
                got: u.len(),
            });
        }
        let mut acc = vec![0u64; self.words];
        for (r, &bit) in u.iter().enumerate() {
            if bit & 1 == 1 {
                for (a, w) in acc.iter_mut().zip(&self.rows[r]) {
                    *a ^= w;
                }
            }
        }
        Ok((0..self.size)
            .map(|c| (acc[c / 64] >> (c % 64) & 1) as u8)
            .collect())
    }

    /// [`encode`](Self::encode) on big-endian indices. Needs `N ≤ 64`.
    pub fn encode_index(&self, u: usize) -> usize {
        debug_assert!(self.size <= 64);
        let mut out = 0usize;
        for r in 0..self.size {
            if index_bit(u, self.size, r) == 1 {
                out ^= self.row_index(r);
            }
        }
        out
    }

    fn row_index(&self, r: usize) -> usize {
        (0..self.size).fold(0, |acc, c| (acc << 1) | self.get(r, c) as usize)
    }

    pub fn multiply(&self, other: &GeneratorMatrix) -> Vec<Vec<u8>> {
        (0..self.size)
            .map(|r| {
                let mut acc = vec![0u64; self.words];
                for k in 0..self.size {
                    if self.get(r, k) {
                        for (a, w) in acc.iter_mut().zip(&other.rows[k]) {
                            *a ^= w;
                        }
                    }
                }
                (0..self.size)
                    .map(|c| (acc[c / 64] >> (c % 64) & 1) as u8)
                    .collect()
            })
            .collect()
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for c in 0..self.size {
            let (w, b) = (c / 64, c % 64);
            let Some(p) = (rank..self.size).find(|&r| rows[r][w] >> b & 1 == 1) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[w] >> b & 1 == 1 {
                    for (a, x) in row.iter_mut().zip(&pivot) {
                        *a ^= x;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn is_invertible(&self) -> bool {
        self.rank() == self.size
    }
}

pub fn generator_matrix(size: usize) -> Result<GeneratorMatrix, PolarizeError> {
    GeneratorMatrix::new(size)
}

/// Binary-input channel as a list of `(p(y|0), p(y|1))` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBinaryChannel {
    symbols: Vec<(f64, f64)>,
}

impl ClassicalBinaryChannel {
    pub fn new(symbols: Vec<(f64, f64)>) -> Result<Self, PolarizeError> {
        if symbols.is_empty() {
            return Err(PolarizeError::InvalidChannel("no output symbols".into()));
        }
        if let Some((y, _)) = symbols
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.0 >= 0.0 && s.1 >= 0.0 && s.0.is_finite() && s.1.is_finite()))
        {
            return Err(PolarizeError::InvalidChannel(format!(
                "symbol {y} has a negative or non-finite probability"
            )));
        }
        let (s0, s1) = sums(&symbols);
        if (s0 - 1.0).abs() > CHANNEL_SUM_TOL || (s1 - 1.0).abs() > CHANNEL_SUM_TOL {
            return Err(PolarizeError::InvalidChannel(format!(
                "rows sum to {s0} and {s1}"
            )));
        }
        Ok(Self { symbols })
    }

    /// Crossover `eps`.
    pub fn bsc(eps: f64) -> Result<Self, PolarizeError> {
        Self::new(vec![(1.0 - eps, eps), (eps, 1.0 - eps)])
    }

    pub fn perfect() -> Self {
        Self {
            symbols: vec![(1.0, 0.0), (0.0, 1.0)],
        }
    }

    /// Output independent of the input.
    pub fn useless() -> Self {
        Self {
            symbols: vec![(1.0, 1.0)],
        }
    }

    /// Rows of a 2-input BTPM read as a classical channel.
    pub fn from_btpm(b: &Btpm) -> Result<Self, PolarizeError> {
        if b.input_dim() != 2 {
            return Err(PolarizeError::NotBinary(b.input_dim(), b.output_dim()));
        }
        Self::new(
            (0..b.output_dim())
                .map(|k| (b.get(0, k), b.get(1, k)))
                .collect(),
        )
    }

    pub fn to_btpm(&self) -> Result<Btpm, PolarizeError> {
        Ok(Btpm::new(vec![
            self.symbols.iter().map(|s| s.0).collect(),
            self.symbols.iter().map(|s| s.1).collect(),
        ])?)
    }

    pub fn symbols(&self) -> &[(f64, f64)] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn row_sums(&self) -> (f64, f64) {
        sums(&self.symbols)
    }

    /// Rows equal as multisets within `tol`.
    pub fn rows_are_permutations(&self, tol: f64) -> bool {
        let mut r0: Vec<f64> = self.symbols.iter().map(|s| s.0).collect();
        let mut r1: Vec<f64> = self.symbols.iter().map(|s| s.1).collect();
        r0.sort_by(f64::total_cmp);
        r1.sort_by(f64::total_cmp);
        r0.iter().zip(&r1).all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Sums symbols whose pairs agree to [`MERGE_DECIMALS`] decimals.
    /// Output is sorted by the rounded key, so it is deterministic.
    pub fn merge_identical(&self) -> Self {
        Self {
            symbols: merge_identical(self.symbols.iter().copied()),
        }
    }
}

fn sums(symbols: &[(f64, f64)]) -> (f64, f64) {
    symbols
        .iter()
        .fold((0.0, 0.0), |(a, b), s| (a + s.0, b + s.1))
}

fn round_key(p: f64) -> i64 {
    (p * 10f64.powi(MERGE_DECIMALS)).round() as i64
}

fn merge_identical(symbols: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut merged: BTreeMap<(i64, i64), (f64, f64)> = BTreeMap::new();
    for (a, b) in symbols {
        if a == 0.0 && b == 0.0 {
            continue;
        }
        let e = merged
            .entry((round_key(a), round_key(b)))
            .or_insert((0.0, 0.0));
        e.0 += a;
        e.1 += b;
    }
    merged.into_values().collect()
}

/// Minus step without merging; symbol order `(y₁, y₂)`.
pub fn polar_step_minus_raw(w: &ClassicalBinaryChannel) -> ClassicalBinaryChannel {
    let s = &w.symbols;
    let mut out = Vec::with_capacity(s.len() * s.len());
    for &(a0, a1) in s {
        for &(b0, b1) in s {
            out.push((0.5 * (a0 * b0 + a1 * b1), 0.5 * (a1 * b0 + a0 * b1)));
        }
    }
    ClassicalBinaryChannel { symbols: out }
}

/// Plus step without merging; symbol order `(y₁, y₂, u₁)`.
pub fn polar_step_plus_raw(w: &ClassicalBinaryChannel) -> ClassicalBinaryChannel {
    let s = &w.symbols;
    let mut out = Vec::with_capacity(2 * s.len() * s.len());
    for &(a0, a1) in s {
        for &(b0, b1) in s {
            out.push((0.5 * a0 * b0, 0.5 * a1 * b1));
            out.push((0.5 * a1 * b0, 0.5 * a0 * b1));
        }
    }
    ClassicalBinaryChannel { symbols: out }
}

fn minus_pairs(s: &[(f64, f64)]) -> impl Iterator<Item = (f64, f64)> + '_ {
    s.iter().flat_map(move |&(a0, a1)| {
        s.iter()
            .map(move |&(b0, b1)| (0.5 * (a0 * b0 + a1 * b1), 0.5 * (a1 * b0 + a0 * b1)))
    })
}

fn plus_pairs(s: &[(f64, f64)]) -> impl Iterator<Item = (f64, f64)> + '_ {
    s.iter().flat_map(move |&(a0, a1)| {
        s.iter().flat_map(move |&(b0, b1)| {
            [
                (0.5 * a0 * b0, 0.5 * a1 * b1),
                (0.5 * a1 * b0, 0.5 * a0 * b1),
            ]
        })
    })
}

pub fn polar_step_minus(w: &ClassicalBinaryChannel) -> ClassicalBinaryChannel {
    ClassicalBinaryChannel {
        symbols: merge_identical(minus_pairs(&w.symbols)),
    }
}

pub fn polar_step_plus(w: &ClassicalBinaryChannel) -> ClassicalBinaryChannel {
    ClassicalBinaryChannel {
        symbols: merge_identical(plus_pairs(&w.symbols)),
    }
}

/// Contribution of one output symbol to the uniform-input mutual information.
fn symbol_capacity(a: f64, b: f64) -> f64 {
    let m = a + b;
    let term = |p: f64| {
        if p > 0.0 {
            0.5 * p * (2.0 * p / m).log2()
        } else {
            0.0
        }
    };
    term(a) + term(b)
}

/// Uniform-input mutual information in bits.
pub fn shannon_capacity_uniform(w: &ClassicalBinaryChannel) -> f64 {
    w.symbols.iter().map(|&(a, b)| symbol_capacity(a, b)).sum()
}

/// How coordinate channels are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConstructionMode {
    /// Only bit-identical symbols are merged; capacities are exact.
    Exact,
    /// Degrading merge down to `mu` symbols after every step; a lower bound.
    Quantized { mu: usize },
}

impl ConstructionMode {
    /// Exact up to [`EXACT_THRESHOLD`], quantized beyond.
    pub fn auto(n: usize, mu: usize) -> Self {
        if n <= EXACT_THRESHOLD {
            Self::Exact
        } else {
            Self::Quantized { mu }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Self::Exact)
    }
}

impl std::fmt::Display for ConstructionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Exact => write!(f, "exact"),
            Self::Quantized { mu } => write!(f, "quantized({mu})"),
        }
    }
}

#[derive(Clone, Copy)]
struct MergeCandidate {
    loss: f64,
    left: usize,
    stamp: (u64, u64),
}

impl PartialEq for MergeCandidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for MergeCandidate {}

impl PartialOrd for MergeCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MergeCandidate {
    // Reversed so the max-heap pops the smallest loss; ties go to the left.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .loss
            .total_cmp(&self.loss)
            .then_with(|| other.left.cmp(&self.left))
    }
}

fn llr_bin(a: f64, b: f64) -> usize {
    if b == 0.0 {
        return LLR_BINS + 1;
    }
    if a == 0.0 {
        return 0;
    }
    let llr = (a / b).ln().clamp(-LLR_CLIP, LLR_CLIP);
    let t = (llr + LLR_CLIP) / (2.0 * LLR_CLIP);
    1 + ((t * LLR_BINS as f64) as usize).min(LLR_BINS - 1)
}

/// Degrading quantization to at most `mu` symbols.
///
/// Symbols are first pooled into fixed log-likelihood-ratio bins, then
/// neighbours in LLR order are merged greedily by smallest capacity loss.
/// Every merge is a degradation, so capacity can only go down.
pub fn quantize(
    w: &ClassicalBinaryChannel,
    mu: usize,
) -> Result<ClassicalBinaryChannel, PolarizeError> {
    if mu < 2 {
        return Err(PolarizeError::BadMu(mu));
    }
    Ok(ClassicalBinaryChannel {
        symbols: quantize_symbols(&w.symbols, mu),
    })
}

fn quantize_symbols(symbols: &[(f64, f64)], mu: usize) -> Vec<(f64, f64)> {
    if symbols.len() <= mu {
        return symbols.to_vec();
    }
    let mut bins = vec![(0.0, 0.0); LLR_BINS + 2];
    for &(a, b) in symbols {
        if a == 0.0 && b == 0.0 {
            continue;
        }
        let bin = &mut bins[llr_bin(a, b)];
        bin.0 += a;
        bin.1 += b;
    }
    let mut sym: Vec<(f64, f64)> = bins.into_iter().filter(|s| s.0 + s.1 > 0.0).collect();
    let n = sym.len();
    if n <= mu {
        return sym;
    }

    let mut alive = vec![true; n];
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut next: Vec<Option<usize>> = (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect();
    let mut version = vec![0u64; n];
    let loss = |s: &[(f64, f64)], l: usize, r: usize| {
        let (a, b) = (s[l], s[r]);
        symbol_capacity(a.0, a.1) + symbol_capacity(b.0, b.1)
            - symbol_capacity(a.0 + b.0, a.1 + b.1)
    };
    let mut heap = BinaryHeap::with_capacity(n);
    for l in 0..n - 1 {
        heap.push(MergeCandidate {
            loss: loss(&sym, l, l + 1),
            left: l,
            stamp: (0, 0),
        });
    }
    let mut count = n;
    while count > mu {
        let Some(c) = heap.pop() else { break };
        let l = c.left;
        let Some(r) = next[l] else { continue };
        if !alive[l] || c.stamp != (version[l], version[r]) {
            continue;
        }
        sym[l].0 += sym[r].0;
        sym[l].1 += sym[r].1;
        alive[r] = false;
        next[l] = next[r];
        if let Some(rr) = next[r] {
            prev[rr] = Some(l);
        }
        version[l] += 1;
        count -= 1;
        if let Some(p) = prev[l] {
            heap.push(MergeCandidate {
                loss: loss(&sym, p, l),
                left: p,
                stamp: (version[p], version[l]),
            });
        }
        if let Some(nx) = next[l] {
            heap.push(MergeCandidate {
                loss: loss(&sym, l, nx),
                left: l,
                stamp: (version[l], version[nx]),
            });
        }
    }
    sym.into_iter()
        .zip(alive)
        .filter_map(|(s, a)| a.then_some(s))
        .collect()
}

fn step(w: &ClassicalBinaryChannel, plus: bool, mode: ConstructionMode) -> ClassicalBinaryChannel {
    let merged = if plus {
        polar_step_plus(w)
    } else {
        polar_step_minus(w)
    };
    match mode {
        ConstructionMode::Exact => merged,
        ConstructionMode::Quantized { mu } => ClassicalBinaryChannel {
            symbols: quantize_symbols(&merged.symbols, mu),
        },
    }
}

fn check_mode(mode: ConstructionMode) -> Result<(), PolarizeError> {
    match mode {
        ConstructionMode::Quantized { mu } if mu < 2 => Err(PolarizeError::BadMu(mu)),
        _ => Ok(()),
    }
}

/// `W_N^{(i)}` for `i ∈ 1..=N`. The bits of `i − 1`, most significant
/// first, select minus (0) or plus (1) at each level.
pub fn coordinate_channel(
    base: &ClassicalBinaryChannel,
    n: usize,
    i: usize,
    mode: ConstructionMode,
) -> Result<ClassicalBinaryChannel, PolarizeError> {
    let levels = log2_exact(n)? as usize;
    if i == 0 || i > n {
        return Err(PolarizeError::IndexOutOfRange { index: i, n });
    }
    check_mode(mode)?;
    let mut w = base.clone();
    for level in 0..levels {
        w = step(&w, index_bit(i - 1, levels, level) == 1, mode);
    }
    Ok(w)
}

/// All `N` coordinate channels in index order, built level by level so
/// shared prefixes are computed once. Levels are processed in parallel.
pub fn all_coordinate_channels(
    base: &ClassicalBinaryChannel,
    n: usize,
    mode: ConstructionMode,
) -> Result<Vec<ClassicalBinaryChannel>, PolarizeError> {
    let levels = log2_exact(n)?;
    check_mode(mode)?;
    let mut level = vec![base.clone()];
    for _ in 0..levels {
        level = level
            .par_iter()
            .flat_map_iter(|w| [step(w, false, mode), step(w, true, mode)])
            .collect();
    }
    Ok(level)
}

fn require_binary_qsc(base: &Btpm) -> Result<(), PolarizeError> {
    if base.input_dim() != 2 || base.output_dim() != 2 {
        return Err(PolarizeError::NotBinary(
            base.input_dim(),
            base.output_dim(),
        ));
    }
    let class = btpm::classify(base);
    if !class.is_fully_symmetric() {
        return Err(PolarizeError::NotFullySymmetric(class));
    }
    Ok(())
}

fn require_dense_n(n: usize) -> Result<(), PolarizeError> {
    if n > MAX_COMBINED_N {
        return Err(PolarizeError::ResourceLimit {
            n,
            limit: MAX_COMBINED_N,
        });
    }
    Ok(())
}

/// `Pr_N(V|Q) = Π_j Pr(V_j | C_j)` with `C = Q·G_N`; a `2^N × 2^N` BTPM.
pub fn combined_channel_btpm(base: &Btpm, n: usize) -> Result<Btpm, PolarizeError> {
    require_binary_qsc(base)?;
    require_dense_n(n)?;
    let g = generator_matrix(n)?;
    let dim = 1usize << n;
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|q| {
            let c = g.encode_index(q);
            (0..dim)
                .map(|v| {
                    (0..n)
                        .map(|j| base.get(index_bit(c, n, j) as usize, index_bit(v, n, j) as usize))
                        .product()
                })
                .collect()
        })
        .collect();
    Ok(Btpm::new(rows)?)
}

/// One row of the classical combined channel, by the recursion
/// `W_N(y|u) = W_{N/2}(y_first | u_odd ⊕ u_even) · W_{N/2}(y_second | u_even)`.
fn classical_row(base: &Btpm, u: &[u8]) -> Vec<f64> {
    if u.len() == 1 {
        return base.row(u[0] as usize).to_vec();
    }
    let odd_xor_even: Vec<u8> = u.chunks(2).map(|p| p[0] ^ p[1]).collect();
    let even: Vec<u8> = u.chunks(2).map(|p| p[1]).collect();
    let first = classical_row(base, &odd_xor_even);
    let second = classical_row(base, &even);
    first
        .iter()
        .flat_map(|a| second.iter().map(move |b| a * b))
        .collect()
}

/// Transition matrix of the classical combined channel `W_N`, computed by
/// recursion on `N` without the generator matrix.
pub fn classical_combined_tpm(base: &Btpm, n: usize) -> Result<Vec<Vec<f64>>, PolarizeError> {
    require_binary_qsc(base)?;
    require_dense_n(n)?;
    log2_exact(n)?;
    Ok((0..1usize << n)
        .into_par_iter()
        .map(|u| classical_row(base, &index_to_bits(u, n)))
        .collect())
}

/// The two BTPM rows of the coordinate channel `E_N^{(i)}`, over the `2^N`
/// output basis vectors: `2^{i−1} W_N^{(i)}(y, 0^{i−1} | u_i)`.
pub fn coordinate_btpm_from_classical(
    base: &Btpm,
    n: usize,
    i: usize,
) -> Result<ClassicalBinaryChannel, PolarizeError> {
    require_binary_qsc(base)?;
    require_dense_n(n)?;
    log2_exact(n)?;
    if i == 0 || i > n {
        return Err(PolarizeError::IndexOutOfRange { index: i, n });
    }
    let tail = n - i;
    let scale = 2f64.powi(i as i32 - 1) / 2f64.powi(n as i32 - 1);
    let row = |ui: usize| -> Vec<f64> {
        let mut acc = vec![0.0; 1 << n];
        for t in 0..1usize << tail {
            let u = (ui << tail) | t;
            for (a, w) in acc
                .iter_mut()
                .zip(classical_row(base, &index_to_bits(u, n)))
            {
                *a += w;
            }
        }
        acc.iter_mut().for_each(|a| *a *= scale);
        acc
    };
    let (r0, r1) = (row(0), row(1));
    ClassicalBinaryChannel::new(r0.into_iter().zip(r1).collect())
}

/// MSLCI of `E_N^{(i)}`, as the uniform capacity of `W_N^{(i)}`.
pub fn coordinate_mslci(
    base: &Btpm,
    n: usize,
    i: usize,
    mode: ConstructionMode,
) -> Result<f64, PolarizeError> {
    require_binary_qsc(base)?;
    let w = ClassicalBinaryChannel::from_btpm(base)?;
    Ok(shannon_capacity_uniform(&coordinate_channel(
        &w, n, i, mode,
    )?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodFraction {
    pub delta: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub sum_check: f64,
    pub range: f64,
    pub merge_decimals: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub i: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationReport {
    pub n: usize,
    /// Uniform coherent information of the base channel.
    pub base_channel_mslci: f64,
    pub per_index: Vec<IndexValue>,
    /// `Σ I_i`.
    pub sum_check: f64,
    /// `N · base_channel_mslci`.
    pub sum_expected: f64,
    pub good_fraction: Vec<GoodFraction>,
    pub construction_mode: ConstructionMode,
    pub tolerances: Tolerances,
}

impl PolarizationReport {
    pub fn values(&self) -> Vec<f64> {
        self.per_index.iter().map(|p| p.value).collect()
    }

    /// Range check on every `I_i`, plus conservation in exact mode.
    pub fn check_invariants(&self) -> Result<(), PolarizeError> {
        if self.per_index.len() != self.n {
            return Err(PolarizeError::InvariantViolation(format!(
                "{} entries for N = {}",
                self.per_index.len(),
                self.n
            )));
        }
        if let Some(p) = self
            .per_index
            .iter()
            .find(|p| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&p.value))
        {
            return Err(PolarizeError::InvariantViolation(format!(
                "I_{} = {} outside [0, 1]",
                p.i, p.value
            )));
        }
        let gap = (self.sum_check - self.sum_expected).abs();
        if self.construction_mode.is_exact() && gap >= SUM_CHECK_TOL {
            return Err(PolarizeError::InvariantViolation(format!(
                "sum {} differs from N·I = {} by {gap:e}",
                self.sum_check, self.sum_expected
            )));
        }
        Ok(())
    }
}

/// Fraction of values with `I ≥ 1 − δ`.
pub fn good_fraction(values: &[f64], delta: f64) -> f64 {
    values.iter().filter(|&&v| v >= 1.0 - delta).count() as f64 / values.len() as f64
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Coordinate MSLCI for every index, with sums and good fractions. The
/// report is returned even when an invariant fails; callers decide via
/// [`PolarizationReport::check_invariants`].
pub fn polarization_report(
    base: &Btpm,
    n: usize,
    deltas: &[f64],
    mode: ConstructionMode,
) -> Result<PolarizationReport, PolarizeError> {
    require_binary_qsc(base)?;
    let w = ClassicalBinaryChannel::from_btpm(base)?;
    let values: Vec<f64> = all_coordinate_channels(&w, n, mode)?
        .par_iter()
        .map(shannon_capacity_uniform)
        .collect();
    let base_channel_mslci = coherent::uniform_coherent_information_btpm(base)?;
    Ok(PolarizationReport {
        n,
        base_channel_mslci,
        sum_check: values.iter().sum(),
        sum_expected: n as f64 * base_channel_mslci,
        good_fraction: deltas
            .iter()
            .map(|&delta| GoodFraction {
                delta,
                fraction: good_fraction(&values, delta),
            })
            .collect(),
        per_index: values
            .into_iter()
            .enumerate()
            .map(|(k, value)| IndexValue { i: k + 1, value })
            .collect(),
        construction_mode: mode,
        tolerances: Tolerances {
            sum_check: SUM_CHECK_TOL,
            range: RANGE_TOL,
            merge_decimals: MERGE_DECIMALS,
        },
    })
}
