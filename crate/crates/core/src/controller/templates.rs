use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_TEMPLATES: &str = include_str!("templates.json");

/// Fixed sentence grammar shared by the operator and the robots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    StatusQuery,
    InstructGoto,
    StatusReply,
    StatusReplyIdle,
    StatusReplyCarry,
    ObeyReply,
    RefuseReply,
    RefuseReplyCarry,
    ExplainDecision,
    InfoShare,
    RepairApology,
    RepairDenial,
    RepairControl,
    RepairConveyUncertainty,
    RepairShowCriticalStates,
}

impl TemplateId {
    pub const ALL: [TemplateId; 15] = [
        TemplateId::StatusQuery,
        TemplateId::InstructGoto,
        TemplateId::StatusReply,
        TemplateId::StatusReplyIdle,
        TemplateId::StatusReplyCarry,
        TemplateId::ObeyReply,
        TemplateId::RefuseReply,
        TemplateId::RefuseReplyCarry,
        TemplateId::ExplainDecision,
        TemplateId::InfoShare,
        TemplateId::RepairApology,
        TemplateId::RepairDenial,
        TemplateId::RepairControl,
        TemplateId::RepairConveyUncertainty,
        TemplateId::RepairShowCriticalStates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::StatusQuery => "status_query",
            TemplateId::InstructGoto => "instruct_goto",
            TemplateId::StatusReply => "status_reply",
            TemplateId::StatusReplyIdle => "status_reply_idle",
            TemplateId::StatusReplyCarry => "status_reply_carry",
            TemplateId::ObeyReply => "obey_reply",
            TemplateId::RefuseReply => "refuse_reply",
            TemplateId::RefuseReplyCarry => "refuse_reply_carry",
            TemplateId::ExplainDecision => "explain_decision",
            TemplateId::InfoShare => "info_share",
            TemplateId::RepairApology => "repair_apology",
            TemplateId::RepairDenial => "repair_denial",
            TemplateId::RepairControl => "repair_control",
            TemplateId::RepairConveyUncertainty => "repair_convey_uncertainty",
            TemplateId::RepairShowCriticalStates => "repair_show_critical_states",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Protocol(format!("unknown template id {s:?}")))
    }
}

/// Slot values substituted into `{name}` placeholders.
pub type Slots = BTreeMap<String, String>;

pub fn slots<const N: usize>(pairs: [(&str, String); N]) -> Slots {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    text: BTreeMap<TemplateId, String>,
}

impl TemplateSet {
    /// Parses a JSON object keyed by template id. Every id must be present.
    pub fn from_json(src: &str) -> Result<Self> {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(src).map_err(|e| Error::Protocol(format!("template file: {e}")))?;
        let mut text = BTreeMap::new();
        for (k, v) in raw {
            text.insert(k.parse::<TemplateId>()?, v);
        }
        if let Some(missing) = TemplateId::ALL.iter().find(|t| !text.contains_key(t)) {
            return Err(Error::Protocol(format!("template {missing} missing")));
        }
        Ok(Self { text })
    }

    pub fn raw(&self, id: TemplateId) -> &str {
        &self.text[&id]
    }

    /// Fills every placeholder; a placeholder without a slot is a protocol error.
    pub fn render(&self, id: TemplateId, slots: &Slots) -> Result<String> {
        let src = self.raw(id);
        let mut out = String::with_capacity(src.len() + 16);
        let mut rest = src;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| Error::Protocol(format!("unterminated slot in template {id}")))?;
            let name = &rest[open + 1..open + close];
            let value = slots
                .get(name)
                .ok_or_else(|| Error::Protocol(format!("template {id} needs slot {name:?}")))?;
            out.push_str(value);
            rest = &rest[open + close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::from_json(DEFAULT_TEMPLATES).expect("bundled templates are complete")
    }
}
