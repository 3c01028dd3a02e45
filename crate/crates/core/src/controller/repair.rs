use serde::{Deserialize, Serialize};

use crate::controller::autonomy::ViolationCause;
use crate::controller::templates::{slots, Slots, TemplateId, TemplateSet};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairKind {
    Apology,
    Denial,
    Control,
    ConveyUncertainty,
    ShowCriticalStates,
}

impl RepairKind {
    pub fn template(self) -> TemplateId {
        match self {
            RepairKind::Apology => TemplateId::RepairApology,
            RepairKind::Denial => TemplateId::RepairDenial,
            RepairKind::Control => TemplateId::RepairControl,
            RepairKind::ConveyUncertainty => TemplateId::RepairConveyUncertainty,
            RepairKind::ShowCriticalStates => TemplateId::RepairShowCriticalStates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairStrategy {
    pub kind: RepairKind,
    pub template: TemplateId,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairContext {
    pub has_uncertainty_estimate: bool,
    pub robot_at_fault: bool,
    pub critical_state_present: bool,
    /// Building the robot is prioritizing.
    pub building: Option<usize>,
    /// Estimated probability of a dangerous condition there.
    pub danger_probability: Option<f64>,
    /// Robot's confidence in its own plan.
    pub confidence: Option<f64>,
    pub critical_state: Option<String>,
}

fn percent(p: f64) -> String {
    format!("{:.0}%", 100.0 * p.clamp(0.0, 1.0))
}

fn building(ctx: &RepairContext) -> String {
    ctx.building.map_or_else(|| "?".to_string(), |b| b.to_string())
}

/// Rule table from violation cause to repair. The first strategy is the
/// primary one; showing critical states is appended when one is present.
pub fn select_repair(
    cause: ViolationCause,
    ctx: &RepairContext,
    templates: &TemplateSet,
) -> Result<Vec<RepairStrategy>> {
    let (kind, fill): (RepairKind, Slots) = match cause {
        ViolationCause::TeamingOnset => (
            RepairKind::ConveyUncertainty,
            slots([("confidence", percent(ctx.confidence.unwrap_or(0.5)))]),
        ),
        ViolationCause::PerceivedUnethical => {
            let probability = match (ctx.has_uncertainty_estimate, ctx.danger_probability) {
                (true, Some(p)) => percent(p),
                _ => "unknown".to_string(),
            };
            (
                RepairKind::Control,
                slots([("building", building(ctx)), ("probability", probability)]),
            )
        }
        ViolationCause::CounterCommand if ctx.robot_at_fault => (RepairKind::Apology, Slots::new()),
        ViolationCause::CounterCommand => (RepairKind::Denial, Slots::new()),
    };
    let mut out = vec![RepairStrategy {
        kind,
        template: kind.template(),
        message: templates.render(kind.template(), &fill)?,
    }];
    if ctx.critical_state_present {
        let state = ctx
            .critical_state
            .clone()
            .unwrap_or_else(|| format!("dangerous condition in Building {}", building(ctx)));
        let k = RepairKind::ShowCriticalStates;
        out.push(RepairStrategy {
            kind: k,
            template: k.template(),
            message: templates.render(k.template(), &slots([("state", state)]))?,
        });
    }
    Ok(out)
}
