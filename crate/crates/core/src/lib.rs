//! GL(1) analytic toolkit over Q and real quadratic fields.

pub mod arith;
pub mod cli;
pub mod coda;
pub mod delta;
pub mod error;
pub mod hecke;
pub mod local;
pub mod mellin;
pub mod nf;
pub mod quad;
pub mod report;
pub mod residue;
pub mod special;
pub mod sunit;
pub mod unfold;
pub mod voronoi;

pub use error::{Error, Result};
