//! Relational event histories, sufficient statistics, event rates and the
//! temporal/ordinal likelihoods built on them.

mod attrs;
mod event;
pub mod io;
mod ledger;
pub(crate) mod likelihood;
mod model;
mod sampler;

pub use attrs::{AttributeSet, AttributeTimeline, TRUST};
pub use event::{candidates, ActorId, Candidate, Dyad, EventHistory, EventType, RelationalEvent};
pub use likelihood::{
    next_event_distribution, ordinal_log_likelihood, temporal_log_likelihood,
    window_log_likelihood, CompiledEvents, EventDistribution, LikelihoodMode,
};
pub use model::{
    compute_statistics, event_rate, past_weight, validate_specs, RateModel, StatisticSpec,
    TypeSet, ETA_CLAMP,
};
pub use sampler::EventSampler;
