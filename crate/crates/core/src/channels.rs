//! Built-in qubit channels and bases.
//!
//! The flip channels take the probability `p` of leaving the state alone:
//! `{√p·I, √(1−p)·X}` and `{√p·I, √(1−p)·Z}`.

use crate::quantum::{real, ComplexMatrix, KrausSet, QuantumError};

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(1.0), real(0.0)])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])
}

pub fn hadamard() -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_row_slice(2, 2, &[real(s), real(s), real(s), real(-s)])
}

/// Columns are |0⟩, |1⟩, ...
pub fn computational_basis(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Columns are |+⟩, |−⟩.
pub fn x_basis() -> ComplexMatrix {
    hadamard()
}

fn check_probability(p: f64) -> Result<(), QuantumError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(QuantumError::InvalidState(format!(
            "stay probability {p} outside [0, 1]"
        )))
    }
}

/// Bit flip with stay probability `p`.
pub fn bit_flip(p: f64) -> Result<KrausSet, QuantumError> {
    check_probability(p)?;
    KrausSet::new(vec![
        ComplexMatrix::identity(2, 2) * real(p.sqrt()),
        pauli_x() * real((1.0 - p).sqrt()),
    ])
}

/// Phase flip with stay probability `p`.
pub fn phase_flip(p: f64) -> Result<KrausSet, QuantumError> {
    check_probability(p)?;
    KrausSet::new(vec![
        ComplexMatrix::identity(2, 2) * real(p.sqrt()),
        pauli_z() * real((1.0 - p).sqrt()),
    ])
}

/// `{√½·I, √½·H}`. Unital, so its computational-basis images commute.
pub fn identity_hadamard_mix() -> KrausSet {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    KrausSet::new(vec![
        ComplexMatrix::identity(2, 2) * real(s),
        hadamard() * real(s),
    ])
    .expect("I and H are unitary")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_channels_are_complete() {
        for p in [0.0, 0.3, 0.9, 1.0] {
            assert!(bit_flip(p).unwrap().completeness_error() < 1e-15);
            assert!(phase_flip(p).unwrap().completeness_error() < 1e-15);
        }
        assert!(bit_flip(1.2).is_err());
        assert!(phase_flip(-0.1).is_err());
    }
}
