//! Conformal pseudometrics of curvature −4 on the unit disk.
//!
//! Blaschke products with prescribed zeros or critical points, solvers for the
//! Gauss curvature equation `Δu = k(z) e^{2u}`, exhaustion and Perron schemes,
//! and numerical checks of the surrounding identities and inequalities.

pub mod analysis_spaces;
pub mod analytic;
pub mod blaschke;
pub mod disk_core;
pub mod error;
pub mod gauss_solver;
pub mod maximal;
pub mod metrics;
pub mod numeric;

pub use disk_core::C64;
pub use error::{Error, ErrorClass, Result};
