//! Numeric thresholds shared across modules.

/// A certificate passes when its minimal log-margin is at least `-PASS_TOLERANCE`.
pub const PASS_TOLERANCE: f64 = 1e-9;

/// Relative slack allowed in the intrinsic-metric sum before reporting a failure.
pub const INTRINSIC_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Added before flooring so that values a rounding error below an integer land on it.
pub const FLOOR_NUDGE: f64 = 1e-12;

/// Floors whose argument lies within this distance of an integer are flagged.
pub const FLOOR_WARNING_BAND: f64 = 1e-9;

/// Kernel values below this are treated as underflow and flagged instead of compared.
pub const KERNEL_FLOOR: f64 = 1e-300;

/// Largest vertex count accepted by the dense eigensolver.
pub const MAX_DENSE_VERTICES: usize = 4096;

/// Relative offset used to evaluate left limits `r(1 - LEFT_LIMIT_OFFSET)` at jump points.
pub const LEFT_LIMIT_OFFSET: f64 = 1e-12;

/// Eigen-residual bound relative to the spectral radius.
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-9;

/// `||f - P_t f||_2` below this fraction of `||f||_2` is indistinguishable from zero.
pub const SEMIGROUP_ROUNDOFF: f64 = 1e-13;
