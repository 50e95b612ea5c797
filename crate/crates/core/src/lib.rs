// Negated comparisons below are deliberate: `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod black_scholes;
pub mod calibration;
pub mod error;
pub mod fourier;
pub mod levy;
pub mod mc;
pub mod nig;
pub mod power;
pub mod quadrature;
pub mod roots;
pub mod shortcut;
pub mod special;
