//! Line-delimited episode logs shared by synthetic runs and live sessions.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{ControllerConfig, ControllerTelemetry};
use crate::error::{Error, Result};
use crate::rem::RateModel;
use crate::sim::episode::{Condition, ShareOptions};
use crate::sim::protocol::CommandMessage;
use crate::sim::scenario::ScenarioConfig;
use crate::sim::world::{Action, Completion};
use crate::trust::{InferenceConfig, TrustTelemetry};

pub const LOG_VERSION: u32 = 1;

/// Everything needed to re-derive the episode's telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    /// Digest of the model and inference settings.
    pub config_hash: String,
    pub seed: u64,
    pub condition: Condition,
    pub scenario: ScenarioConfig,
    pub model: RateModel,
    pub inference: InferenceConfig,
    pub controller: ControllerConfig,
    pub share: ShareOptions,
    /// Reported trust per robot at the start of the episode.
    pub priors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Mission complete without an explosion.
    pub success: bool,
    pub exploded: bool,
    pub ticks: u64,
    /// ticks * dt.
    pub duration: f64,
    /// Human-issued commands.
    pub n_commands: usize,
    pub conflicts: usize,
    pub refusals: usize,
    pub repairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Header(Box<LogHeader>),
    Message(CommandMessage),
    Action {
        tick: u64,
        agent: usize,
        #[serde(flatten)]
        action: Action,
    },
    Completion {
        tick: u64,
        #[serde(flatten)]
        completion: Completion,
    },
    Trust(TrustTelemetry),
    Controller(ControllerTelemetry),
    /// Latent state of a synthetic operator, one record per window.
    Operator { k: usize, trust: Vec<f64>, knows_leak: bool },
    Metrics(EpisodeMetrics),
}

/// Hex digest of the settings that determine the trust telemetry.
pub fn config_hash(model: &RateModel, inference: &InferenceConfig) -> Result<String> {
    let doc = serde_json::json!({ "model": model, "inference": inference });
    let bytes = serde_json::to_vec(&doc).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_log(mut out: impl Write, records: &[LogRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::invalid(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn log_to_string(records: &[LogRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_log(&mut buf, records)?;
    String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))
}

/// Parses a log. The first record must be the header; a line that does not
/// parse is reported with its line number.
pub fn read_log(input: impl BufRead) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if out.is_empty() && !matches!(rec, LogRecord::Header(_)) {
            return Err(Error::parse(i + 1, "log must start with a header record"));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::parse(1, "empty log"));
    }
    Ok(out)
}
