//! Numerical engine for regular causal geometries.
//!
//! A geometry is given by a defining function `G(x, v)` on phase space, homogeneous
//! of degree `k != 1` in the velocity, whose zero set is the null cone. From exact
//! jets of `G` the crate builds the null spray, the Ehresmann connection, the
//! curvature and tidal tensors, the generalized Weyl tensor on the shadow space,
//! and the expansion/shear/rotation of vertex-cone congruences.

pub mod catalog;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod field;
pub mod jet;
pub mod linalg;
pub mod ode;
pub mod oracle;
pub mod pipeline;
pub mod raychaudhuri;
pub mod spray;
pub mod weyl;

pub use error::{GeomError, Result};
pub use field::ScalarField;
pub use jet::{evaluate_jets, euler_residuals, Jet, JetTable, PhasePoint};
