//! Exact and empirical tools for prime values of systems of integer linear
//! forms: complexity, local densities and singular series, the Buchstab
//! function, segmented sieving, admissible residues, box counts and the
//! Maier matrix experiment.

pub mod admissible;
pub mod buchstab;
pub mod error;
pub mod highprec;
pub mod linalg;
pub mod linear_forms;
pub mod local_densities;
pub mod maier;
pub mod patterns;
pub mod sieve;

pub use error::{Error, Result};
pub use linear_forms::{Complexity, LinearForm, LinearSystem};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
