//! Configuration, scenarios, file formats and the experiment harness for
//! `mtcover`.

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod formats;
pub mod plot;
pub mod run;
pub mod scenario;
pub mod verify;
