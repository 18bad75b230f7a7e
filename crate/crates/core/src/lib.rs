//! Numerical lab for the derivative NLS with a quintic term,
//!
//! ```text
//! i u_t = -u_xx - i |u|^2 u_x - b |u|^4 u,
//! ```
//!
//! on a periodic box large enough that solitons and their perturbations
//! decay to round-off before reaching the edge.

pub mod error;
pub mod evolver;
pub mod experiment;
pub mod field;
pub mod gkdv;
pub mod grid;
pub mod linop;
pub mod modulation;
pub mod par;
pub mod soliton;

pub use error::{LabError, Result};
pub use field::{apply_lambda, ComplexField};
pub use grid::Grid;
pub use par::Exec;
