//! Outward shooting from the inner region and the critical mass m*.

pub mod mstar;
pub mod profile;
pub mod radial;

pub use mstar::{classify, find_mstar, find_r_and_rinf, match_inner, MatchPoints, MstarResult, ShootConfig, ShootOutcome};
pub use profile::{assemble_phistar, ProfileConfig, ProfileTable, SolitonProfile};
pub use radial::{energy, integrate_radial, EventKind, OdeState, RadialOptions};
