//! Generalized Besov-type and Triebel-Lizorkin-type quasi-norms on
//! periodically sampled fields.
//!
//! The library computes `B` and `F` quasi-norms weighted by a Morrey-type
//! weight function `phi`, their sequence-space counterparts, atomic
//! analysis/synthesis through a reproducing formula on the frequency
//! lattice, and a verification harness that turns the embedding and maximal
//! inequalities of the underlying theory into bounded-ratio property checks.
//!
//! The continuum is replaced by a periodic torus `[0, 2^m)^d` sampled at
//! spacing `2^-n`; every supremum over dyadic cubes is truncated to the
//! levels `-m ..= j_max` that tile the domain.

pub mod analysis;
pub mod atoms;
pub mod cli;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod phi;
pub mod spaces;

pub use error::{Error, Result};
