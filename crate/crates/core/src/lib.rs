//! Negative spectra of matrix Schrödinger operators -d²/dx² - V(x) on the
//! half-line with Robin boundary matrix φ'(0) = 𝔖 φ(0), the Riccati and
//! commutation machinery built on the ground state, and evaluators for the
//! associated Lieb-Thirring type inequalities.

pub mod config;
pub mod constants;
pub mod darboux;
pub mod error;
pub mod fdoracle;
pub mod graphs;
pub mod halfspace;
pub mod hermitian;
pub mod inequalities;
pub mod model;
pub mod propagator;
pub mod spectrum;
pub(crate) mod quadrature;

pub use config::Tolerances;
pub use error::{Error, Result};
pub use hermitian::{CMatrix, EigenDecomposition, HermitianMatrix};
pub use num_complex::Complex64;
pub use model::{PotentialSpec, PotentialTerm, Problem, ScalarProfile, Side};
pub use spectrum::{find_spectrum, BranchTable, Level, SearchOptions, Spectrum};
