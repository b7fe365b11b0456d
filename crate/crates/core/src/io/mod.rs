//! File formats: vote records, synthetic data, draws directories and
//! diagnostic reports.

pub mod draws;
pub mod report;
pub mod simulate;
pub mod votes;

pub use draws::{read_draws, write_draws, DrawWriter, DrawsDir, Manifest, Roster, RunStatus};
pub use simulate::{simulate_votes, write_truth, Simulated, SimulationOptions};
pub use votes::{filter_votes, load_votes, read_vote_records, write_roster, write_votes, CastCodeMap, FilterReport};
