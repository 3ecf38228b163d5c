//! Pseudospectral Nehari-manifold solver for the semiclassical fractional
//! Schrödinger equation `ε^{2α}(-Δ)^α u + V(x)u = f(u)` with an asymptotically
//! linear (saturable) nonlinearity, plus the experiment harness around it.
//!
//! Work happens in rescaled variables on a periodic box: [`spectral`] holds
//! the operators, [`variational`] the energy and Nehari projection,
//! [`solver`] the constrained descent, [`localization`] the per-well branch
//! machinery, [`diagnostics`] the concentration checks and [`experiment`]
//! the end-to-end commands.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod config;
pub mod diagnostics;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod localization;
pub mod models;
pub mod solver;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{Field, Grid, GridShape};
