//! Discrete-time search-and-rescue team simulation: world dynamics, the
//! template protocol, robot planners, synthetic operators and episodes.

pub mod audit;
pub mod episode;
pub mod log;
pub mod operator;
pub mod policy;
pub mod protocol;
pub mod scenario;
pub mod session;
pub mod world;

pub use audit::audit_log;
pub use episode::{default_specs, run_episode, Condition, EpisodeOutcome, EpisodeSetup, ShareOptions};
pub use log::{read_log, write_log, EpisodeMetrics, LogHeader, LogRecord};
pub use operator::{OperatorParams, SyntheticOperator};
pub use protocol::{CommandMessage, HumanCommand};
pub use scenario::{generate_scenario, Cell, ScenarioConfig, ScenarioParams};
pub use session::{Session, TickOutcome};
pub use world::{Action, Completion, SubTask, SubTaskKind, WorldState};
