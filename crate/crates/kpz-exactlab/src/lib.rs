//! Exact solvability toolkit for flat-interface KPZ lattice models.
//!
//! The crate has three layers:
//!
//! * numerics: contour quadrature on circles ([`contour_quad`]) and an
//!   exact-rational residue oracle ([`residue`]) used to validate it;
//! * kernels: transition kernels for discrete-time TASEP with parallel
//!   update and flat initial data ([`tasep_kernels`]), their polynuclear
//!   growth and Airy(1) limits ([`png_kernels`]), and Fredholm determinants
//!   built from them ([`fredholm`]);
//! * sampling: direct simulators and small-system enumeration oracles
//!   ([`dynamics`]) together with the scaling glue that compares simulation
//!   against the exact one-point law ([`scaling`]).

pub mod contour_quad;
pub mod dynamics;
pub mod error;
pub mod fredholm;
pub mod harness;
pub mod png_kernels;
pub mod residue;
pub mod scaling;
pub mod tasep_kernels;

pub use error::{Error, Result};
