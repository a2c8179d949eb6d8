//! The 2-D radial heat semigroup, the Duhamel–Picard construction of the
//! regular solution issuing from φ*, and the residual checks comparing it
//! with the stationary solution.

pub mod duhamel;
pub mod grid;
pub mod kernel;
pub mod oracles;
pub mod report;

pub use duhamel::{picard_solve, stationary_residual, HeatConfig, HeatSolver, PicardDiagnostics, PicardSolution};
pub use grid::{RadialField, RadialGrid};
pub use kernel::{heat_apply, FnSource, ProfileForcing, ProfileSource, RadialSource};
pub use oracles::{ell, integral_formula, monotonicity_check, validity_scale, EnvelopeOracle, MonotonicityReport};
pub use report::{nonuniqueness_report, origin_excess, u0_bounds, NonuniquenessReport, U0Bounds};
