//! Synthetic inflammation time-series pipeline.
//!
//! Stages, in dependency order: a stochastic agent-based tissue model
//! ([`engine`]) parameterized by a rule matrix ([`mrm`]); cohort ingestion
//! and binning ([`cohort`]); envelope construction and encompassment
//! scoring ([`envelope`]); genetic-algorithm calibration that archives every
//! non-falsified matrix ([`calibrate`]); committee-based active learning
//! that maps the viable-region boundary ([`explore`]); synthetic cohort
//! generation from region samples ([`synth`]); and drift / separability
//! reporting ([`validate`]). [`pseudo`] fabricates a stand-in clinical
//! cohort for end-to-end runs without real data.

// Parameter validations are written `!(x > 0.0)` rather than `x <= 0.0`
// so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod channel;
pub mod cohort;
pub mod engine;
pub mod envelope;
pub mod error;
pub mod explore;
pub mod mrm;
pub mod pseudo;
pub mod rng;
pub mod synth;
pub mod validate;

pub use channel::{Channel, ALL_CHANNELS, EXPORTED_CHANNELS, N_CHANNELS, N_EXPORTED};
pub use cohort::{
    bin_times, normalize, BinnedDataset, CohortDataset, Divisors, NormalizedDataset, Observation,
};
pub use engine::{
    classify_outcome, run, Outcome, PerChannel, SimConfig, SimState, TrajectoryRecord,
};
pub use envelope::{build_envelope, encompassment, group_envelope, Band, EnvelopeModel};
pub use error::{Error, Result};
pub use mrm::{baseline, Genome, Mrm, Rule, ALL_RULES, GENOME_LEN, N_RULES};
