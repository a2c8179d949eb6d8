//! Near-origin region in the variable ρ = 2|log r|.

pub mod asymptotics;
pub mod oracles;
pub mod solver;

pub use asymptotics::{forcing, g_terms, kernel, phi_leading, total_forcing, KERNEL_SCALE};
pub use solver::{inner_profile, solve_eta, EtaConfig, EtaDiagnostics, EtaSolution, InnerOperator};
