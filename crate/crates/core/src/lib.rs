// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod gridfn;
pub mod matching;
pub mod measure;
pub mod operator;
