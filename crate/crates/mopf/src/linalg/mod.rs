//! Small dense and sparse linear-algebra kernels used by the solvers.

pub mod dense;
pub mod sparse;

pub use dense::DenseLu;
pub use sparse::{reverse_cuthill_mckee, CscMatrix, LdlFactor, LdlSymbolic};
