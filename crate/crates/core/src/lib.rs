//! Harmonic maps into `SL(n, R)/SO(n, R)` and geodesics of its invariant
//! connections.
//!
//! The space is handled in the global chart `A × N⁺` given by the Iwasawa
//! factorization. A map is harmonic for an invariant connection with
//! connection function `β` exactly when `d*μ_F − Σ_i β(μ_F(e_i), μ_F(e_i))`
//! vanishes; [`darboux::harmonic_residual`] evaluates that residual on flat
//! grids and [`geodesics`] integrates its one-dimensional specialization.

pub mod connections;
pub mod darboux;
pub mod densecore;
pub mod error;
pub mod geodesics;
pub mod iwasawa;
pub mod lie_algebra;
pub mod par;
pub mod sampling;
pub mod tol;
pub mod verify;

pub use connections::{beta_eval, ConnectionFn, ConnectionKind, InnerProduct};
pub use darboux::{ChartMap, CodiffSign, Convention};
pub use densecore::{log_unipotent, mat_exp, orthonormalize_columns, SquareMatrix};
pub use error::{Error, Result};
pub use iwasawa::{decompose_kan, from_chart, to_chart, ChartPoint, IwasawaFactors};
pub use lie_algebra::{project_m, split_cartan, split_iwasawa, ComplementChoice};
pub use par::Exec;
