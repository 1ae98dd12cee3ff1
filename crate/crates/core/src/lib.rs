//! Held-out predictive evaluation (HOPE) for exponential-family random graph
//! models: fit with held-out dyad states treated as missing, simulate them
//! conditionally, and score the predictions at dyad, node and graph level.

pub mod datasets;
pub mod descriptives;
pub mod estimation;
pub mod graph;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod terms;

pub use descriptives::{descriptives, Descriptives};
pub use graph::{dyad_index, Dyad, DyadSet, Graph, GraphError, PartialGraph};
pub use terms::{Model, ModelError, ModelSpec, TermSpec};
pub use estimation::{fit, EstimationError, EstimatorConfig, FitResult, Method};
pub use sampler::{Proposal, SamplerConfig, SamplerError};
