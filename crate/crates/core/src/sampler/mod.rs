//! Data-augmented Gibbs sampler: kernels, chain schedule and in-memory
//! draw storage.

mod chain;
mod config;
mod kernels;
mod state;

pub use chain::{run_chain, run_chain_into, Draw, DrawSink, DrawStore, Progress, RunControl, RunOutcome};
pub use config::{InitMode, SamplerConfig};
pub use kernels::{ItemConditional, Sampler};
pub use state::{Cell, ChainState, LatentState, ObservedIndex};
