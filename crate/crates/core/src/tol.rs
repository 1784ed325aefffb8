//! Central numerical tolerances.
//!
//! Interior-point solutions carry residuals of order 1e-8, so validation
//! thresholds sit one to two orders of magnitude above solver precision.

/// Maximum entrywise asymmetry for a matrix to count as Hermitian.
pub const HERMITIAN: f64 = 1e-10;

/// Minimum eigenvalue for a matrix to count as positive semidefinite.
pub const PSD_MIN_EIG: f64 = -1e-9;

/// Trace / probability normalization checks.
pub const NORMALIZATION: f64 = 1e-9;

/// No-signaling consistency of assemblages and correlations.
pub const CONSISTENCY: f64 = 1e-8;

/// Feasibility verdicts from slack-minimizing SDP probes.
pub const FEASIBILITY: f64 = 1e-7;

/// Relative eigenvalue cutoff when projecting onto the range of a
/// rank-deficient reduced state.
pub const RANGE_CUTOFF: f64 = 1e-9;

/// Idempotency defect allowed for projective measurements.
pub const PROJECTIVE: f64 = 1e-8;
