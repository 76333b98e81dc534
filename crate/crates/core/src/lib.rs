//! Channel polarization for two-dimensional-input quantum symmetric channels.
//!
//! The crate classifies qubit channels through their basis transition
//! probability matrices, evaluates single-letter coherent information, builds
//! the combined and coordinate channels of the CNOT/SWAP polar transform and
//! checks the closed-form results against a dense density-matrix simulation.

pub mod btpm;
pub mod channels;
pub mod cli;
pub mod coherent;
pub mod oracle;
pub mod polarize;
pub mod quantum;
