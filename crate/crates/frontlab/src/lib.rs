//! Front dynamics of a three-component, singularly perturbed reaction-diffusion
//! system near a triple-zero eigenvalue: steady fronts, spectra, normal forms,
//! reduced dynamics, frozen-frame simulation and continuation.

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod banded;
pub mod continuation;
pub mod error;
pub mod linalg;
pub mod model;
pub mod normal_form;
pub mod pde;
pub mod reduced;
pub mod spectral;
pub mod steady;
pub mod tables;

pub use error::{Error, Result};
pub use model::{FieldState, Grid, Params};
