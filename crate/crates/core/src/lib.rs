//! Cahn–Hilliard–Navier–Stokes solver with a logarithmic Flory–Huggins potential.

pub mod app;
pub mod diagnostics;
pub mod error;
pub mod femspace;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod potential;
pub mod scenarios;
pub mod scheme;

pub use error::{Error, Result};
