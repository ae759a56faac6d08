//! Numerical laboratory for Wigner random matrices: entry laws, ensemble
//! generation, spectra, Stieltjes transforms, resolvent identities and
//! convergence-rate experiments.

pub mod entry_laws;
pub mod ensemble;
pub mod spectral;
pub mod stieltjes;
pub mod resolvent_lab;
pub mod experiments;
pub mod cli;
