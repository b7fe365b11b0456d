#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod io;
pub mod mixture;
pub mod model;
pub mod quadrature;
pub mod sampler;
