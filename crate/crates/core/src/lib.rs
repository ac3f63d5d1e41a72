//! Detection of correlated events in grant-free random access.
//!
//! Devices that observe the same event either share a codeword (joint
//! source-channel coding, JSC) or transmit their own (separate coding, SSC).
//! A hybrid AMP receiver recovers the event states; an exact enumeration
//! oracle and a Monte-Carlo harness support evaluation.

pub mod amp;
pub mod channel;
pub mod codebooks;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;

pub use amp::{detect, gamp_iterate, AmpSettings, BlockPrior};
pub use channel::{encode, transmit};
pub use codebooks::{
    assemble_system_matrix, gen_gaussian_codebooks, gen_orthogonal_codebooks, CodebookSet, SystemMatrix,
};
pub use error::{Error, Result};
pub use harness::{
    compare_with_oracle, estimate_error_rate, run_sweep, run_trial, Axis, CodebookKind, OracleComparison,
    ResultRow, StopRule, SweepSpec, TrialOutcome,
};
pub use model::{
    local_estimates, sample_channel, sample_events, Coding, EventVector, LocalEstimates, PosteriorBeliefs,
    ReceivedSignal, ScenarioConfig, TransmitState,
};
pub use oracle::{exact_event_posteriors, exact_map_detect, exact_posterior, ExactPosterior};
