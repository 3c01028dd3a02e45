//! Online trust inference: a grid posterior over each tracked dyad's trust,
//! updated window by window against a fitted rate model, and its risk-aware
//! summaries.

mod filter;
mod posterior;
mod summary;

pub use filter::{
    grid_log_likelihoods, human_robot_dyads, infer_offline, update_posterior, InferenceConfig,
    ObservationWindow, TrustTelemetry, TrustTracker,
};
pub use posterior::{init_prior, TrustGrid, TrustPosterior, DEFAULT_GRID_POINTS};
pub use summary::{summarize, summarize_distribution, RiskMode, TrustSummary};
