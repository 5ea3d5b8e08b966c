// `!(x > 0.0)` guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fft;
pub mod garch;
pub mod neural;
pub mod pipeline;
pub mod series;
pub mod vmd;
