//! Spectral variational solver for subharmonic orbits of `T`-periodic
//! Hamiltonian systems `ẋ = J H'(t, x)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod audit;
pub mod cli;
pub mod config;
pub mod dual;
pub mod error;
pub mod expr;
pub mod hamiltonian;
pub mod plot;
pub mod quadrature;
pub mod saddle;
pub mod scan;
pub mod spectral;

pub use error::{Error, Result};
