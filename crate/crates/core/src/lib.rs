//! Exact p-adic engine for finite-rank sigma-modules over the affine
//! line/space: L-functions by Euler products and by the extended Monsky trace
//! formula, Hodge-Newton unit-root extraction, limiting modules and the
//! explicit unit-root L-function, with every identity checked as a congruence
//! modulo (p^N, T^{D_T+1}).

pub mod analytics;
pub mod error;
pub mod euler;
pub mod lseries;
pub mod matrix;
pub mod padic;
pub mod series;
pub mod sigma;
pub mod suite;
pub mod trace;
pub mod unitroot;

pub use error::{Error, Result};
