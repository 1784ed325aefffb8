//! SDP-based quantifiers for quantum steering, measurement incompatibility,
//! and entanglement, together with their device-independent moment-matrix
//! relaxations.
//!
//! The crate is organized around a small dense complex linear-algebra layer
//! ([`linalg`]), a self-contained primal-dual interior-point solver for
//! dense semidefinite programs ([`solver`]), Bell-scenario bookkeeping
//! ([`quantum`]), and the quantifiers themselves:
//!
//! * [`steering`]: local-hidden-state tests, steering robustness, consistent
//!   steering robustness, steerable weight, steering-equivalent observables;
//! * [`incompat`]: joint measurability, incompatibility robustness and weight;
//! * [`entanglement`]: generalized robustness of entanglement (PPT relaxation
//!   and the closed form for isotropic states);
//! * [`amm`]: assemblage moment matrices and the device-independent lower
//!   bounds built on them (including the tripartite construction);
//! * [`npa`]: bipartite moment matrices, quantum-set membership, nonlocal
//!   robustness, and device-independent entanglement bounds.

pub mod amm;
pub mod entanglement;
pub mod error;
pub mod incompat;
pub mod linalg;
pub mod npa;
pub mod quantum;
pub mod solver;
pub mod steering;
pub mod tol;
pub mod words;

pub use error::Error;
pub use linalg::ComplexMatrix;
pub use quantum::{
    Assemblage, BellFunctional, Correlation, MeasurementAssemblage, Scenario,
    TripartiteAssemblage,
};
pub use solver::{SdpProblem, SdpSolution, SolveStatus, SolverOptions};
