//! Potentials and nonlinearities, with sampled checks of the hypotheses the
//! solver relies on.

pub mod nonlinearity;
pub mod potential;

pub use nonlinearity::{
    critical_exponent, validate_nonlinearity, CustomNonlinearity, NonlinValues,
    NonlinearityCheck, NonlinearityKind, NonlinearityReport, NonlinearitySpec,
};
pub use potential::{
    sample_potential, validate_potential, PotentialReport, PotentialSpec, Well,
};
