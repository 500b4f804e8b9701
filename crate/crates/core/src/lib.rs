//! Simulation engine and method library for Bayesian borrowing of treatment
//! effects between a source study and a target clinical trial.
//!
//! The crate has three layers:
//!
//! * analysis: posterior representations ([`posterior`]), the nine borrowing
//!   methods under the normal-likelihood model ([`methods`]), and the exact
//!   binomial-likelihood model ([`binomial`]);
//! * simulation: endpoint-specific data generators and drift machinery
//!   ([`datagen`]), case-study presets ([`presets`]), Monte-Carlo operating
//!   characteristics ([`oc`]) and prior effective sample size ([`ess`]);
//! * operations: scenario-grid configuration ([`config`]), the parallel
//!   study runner ([`runner`]), the persisted results table ([`results`])
//!   and plot-data emission ([`plotdata`]).

pub mod binomial;
pub mod config;
pub mod datagen;
pub mod error;
pub mod ess;
pub mod methods;
pub mod oc;
pub mod plotdata;
pub mod posterior;
pub mod presets;
pub mod quad;
pub mod results;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod summary;

pub use error::{Error, Result};
