//! Numerical tolerances shared by the solver, the engine and the checks.

/// Absolute feasibility tolerance in MW (nodal balance, branch limits, bounds).
pub const FEAS_MW: f64 = 1e-6;

/// Relative optimality tolerance for dispatch cost.
pub const OPT_REL: f64 = 1e-6;

/// Sector weights must sum to one within this tolerance.
pub const WEIGHT_SUM: f64 = 1e-9;

/// KKT tolerance for the non-negative least squares solver.
pub const NNLS_KKT: f64 = 1e-8;
