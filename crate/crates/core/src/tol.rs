//! Numerical tolerances shared by every module.

/// Structural zero test (trace-free, triangularity, skewness).
pub const STRUCTURAL: f64 = 1e-12;

/// Membership of a matrix in the complement `m` after projection.
pub const MEMBERSHIP: f64 = 1e-10;

/// Smallest admissible |det g| for orthonormalization.
pub const SINGULAR_DET: f64 = 1e-12;

/// Tolerance on det g = 1 for Iwasawa factorization input.
pub const UNIT_DET: f64 = 1e-8;

/// Positive-definiteness floor for Gram matrices of inner products on `m`.
pub const GRAM_EIGEN_FLOOR: f64 = 1e-10;

/// Agreement threshold between an integrated trajectory and a closed form.
pub const TRAJECTORY_AGREEMENT: f64 = 1e-8;

/// Scale-aware structural zero: `|value| <= STRUCTURAL * max(1, scale)`.
pub(crate) fn is_structural_zero(value: f64, scale: f64) -> bool {
    value.abs() <= STRUCTURAL * scale.max(1.0)
}
