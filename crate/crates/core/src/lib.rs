//! Reachability analysis and safety falsification for linear
//! differential-algebraic systems `E x' = A x + B u` of tractability index 1 to 3.
//!
//! The pipeline is:
//!
//! 1. lift the input-driven system to an autonomous pencil ([`model`]),
//! 2. build the matrix chain, fix admissible projectors and decouple into one
//!    ODE subsystem plus algebraic-constraint subsystems ([`decoupling`]),
//! 3. check the initial star set against the consistent space ([`consistency`]),
//! 4. propagate the ODE basis and lift it back through the reachable-set
//!    projector ([`reachability`]),
//! 5. run one linear feasibility problem per time step against the unsafe
//!    polyhedron and emit a concrete trace on violation ([`safety`]).

pub mod consistency;
pub mod decoupling;
mod error;
pub mod integrate;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod reachability;
pub mod safety;
pub mod starset;
pub mod synthetic;
mod tolerance;

pub use error::{DaeError, Result};
pub use tolerance::TolerancePolicy;

pub use consistency::{build_consistent_matrix, check_initial_star, ConsistencyCertificate};
pub use decoupling::{
    compute_index_and_chain, decouple, make_admissible, Decomposition, DecoupledSystem,
    MatrixChain,
};
pub use model::{AutonomousDae, DaeSystem, InputModel};
pub use reachability::{compute_reach, PropagationMode, ReachResult, ReachSettings};
pub use safety::{verify, UnsafeSpec, VerificationOutcome, VerifyStatus};
pub use starset::StarSet;

/// Dense real matrix used throughout the crate.
pub type RealMatrix = nalgebra::DMatrix<f64>;
/// Dense real column vector.
pub type RealVector = nalgebra::DVector<f64>;
