//! Null geodesics, U(n) parallel transport, the broken light-ray transform
//! and gauge reconstruction on model Lorentzian spacetimes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod gauge;
pub mod geometry;
pub mod linalg;
pub mod reconstruction;
pub mod symcalc;
pub mod transport;

pub use error::{Admissibility, Error, Result};
pub use linalg::{CMatrix, CVector, UnitaryMatrix};
