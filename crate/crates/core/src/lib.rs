//! Multitask coverage on graphs with federated partitioning and online
//! learning of unknown demand fields.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration
//! and the command line live in the companion `mtcover-cli` crate.

#![no_std]
// `!(x > 0.0)` is how validation rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bounds;
pub mod coverage;
pub mod demand;
pub mod dsmlc;
pub mod error;
pub mod fmc;
pub mod graph;
pub mod mtgp;
pub mod regret;
pub mod rmlc;
pub mod sim;

pub use coverage::{
    coverage_cost, equitable_partition, h_inf, is_mcep, multitask_centers, multitask_cost,
    ServiceModel,
};
pub use demand::{synthesize_gaussian_mixture, DemandField, Kernel};
pub use dsmlc::{run_dsmlc, EpochConfig, EstimateSource};
pub use error::{Error, Result};
pub use fmc::{fmc_step, run_to_convergence, CommSchedule, FmcState};
pub use graph::{Configuration, Covering, Edge, Environment, Vertex};
pub use mtgp::{MtgpPosterior, MtgpPrior};
pub use regret::{instantaneous_regret, Phase, RegretTrace};
pub use rmlc::{run_rmlc, RmlcConfig};
pub use sim::{Problem, RunLog, StepLog};
