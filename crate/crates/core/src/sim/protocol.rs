use serde::{Deserialize, Serialize};

use crate::controller::TemplateId;
use crate::rem::io::Vocabulary;
use crate::rem::{ActorId, EventType, RelationalEvent};

/// Event classes seen by the relational event model.
pub const EVENT_TYPES: [&str; 5] = ["status_query", "instruct", "obey_reply", "refuse_reply", "info_or_explain"];
pub const STATUS_QUERY: EventType = EventType(0);
pub const INSTRUCT: EventType = EventType(1);
pub const OBEY_REPLY: EventType = EventType(2);
pub const REFUSE_REPLY: EventType = EventType(3);
pub const INFO_OR_EXPLAIN: EventType = EventType(4);

pub fn event_family(t: TemplateId) -> EventType {
    match t {
        TemplateId::StatusQuery => STATUS_QUERY,
        TemplateId::InstructGoto => INSTRUCT,
        TemplateId::ObeyReply => OBEY_REPLY,
        TemplateId::RefuseReply | TemplateId::RefuseReplyCarry => REFUSE_REPLY,
        _ => INFO_OR_EXPLAIN,
    }
}

/// Actor names: the human first, then one name per robot.
pub fn vocabulary(n_robots: usize) -> Vocabulary {
    let mut actors = vec!["H".to_string()];
    actors.extend((1..=n_robots).map(|r| format!("R{r}")));
    Vocabulary {
        actors,
        types: EVENT_TYPES.iter().map(|s| s.to_string()).collect(),
    }
}

/// One template sentence between two team members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandMessage {
    pub tick: u64,
    pub sender: usize,
    pub receiver: usize,
    pub template: TemplateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub building: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    pub text: String,
    /// The message tells the human about the gas leak.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub discloses_hazard: bool,
}

impl CommandMessage {
    pub fn event(&self, dt: f64) -> RelationalEvent {
        RelationalEvent::new(
            ActorId(self.sender),
            ActorId(self.receiver),
            event_family(self.template),
            self.tick as f64 * dt,
        )
    }
}

/// What the operator can ask of a robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum HumanCommand {
    StatusQuery { robot: usize },
    InstructGoto { robot: usize, building: usize },
}

impl HumanCommand {
    pub fn robot(&self) -> usize {
        match *self {
            HumanCommand::StatusQuery { robot } | HumanCommand::InstructGoto { robot, .. } => robot,
        }
    }
}
