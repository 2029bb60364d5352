//! Synthesis, simulation and resource estimation of a reversible
//! Metropolis-Hastings walk for integer linear programs.
//!
//! An instance is encoded in two's complement on `n * d` qubits. One walk
//! step proposes a uniformly random point, counts satisfied constraints,
//! rotates a coin by the acceptance probability, swaps on acceptance of a
//! feasible candidate and reflects about the clean ancilla subspace.

pub mod anneal;
pub mod arith;
pub mod circuit;
pub mod error;
pub mod ilp;
pub mod sim;
pub mod spectral;
pub mod sweep;
pub mod walk;

pub use error::{CircuitError, Error, InstanceError, Result};
pub use ilp::{parse_instance, Constraint, IlpInstance, LinearForm, Sense};
pub use walk::AcceptanceMode;
