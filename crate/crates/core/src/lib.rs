// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod mesh;
pub mod norms;
pub mod pairs;
pub mod projections;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
