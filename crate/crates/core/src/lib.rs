// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffgeo;
pub mod distance;
pub mod el;
pub mod error;
pub mod functionals;
pub mod mesh;
pub mod obj;
pub mod optimizer;
pub mod weights;
