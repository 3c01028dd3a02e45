use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rem::attrs::AttributeSet;
use crate::rem::event::{ActorId, Dyad, EventHistory, EventType};

/// Bound applied to the linear predictor before exponentiation.
pub const ETA_CLAMP: f64 = 500.0;

/// A nonempty, sorted set of event types.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TypeSet(Vec<EventType>);

impl TypeSet {
    pub fn new(types: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<EventType> = types.into_iter().map(EventType).collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::invalid("event type subset must be nonempty"));
        }
        Ok(Self(v))
    }

    pub fn single(k: usize) -> Self {
        Self(vec![EventType(k)])
    }

    pub fn contains(&self, k: EventType) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = EventType> + '_ {
        self.0.iter().copied()
    }

    fn max(&self) -> EventType {
        *self.0.last().expect("nonempty")
    }
}

impl TryFrom<Vec<usize>> for TypeSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        TypeSet::new(v)
    }
}

impl From<TypeSet> for Vec<usize> {
    fn from(s: TypeSet) -> Self {
        s.0.into_iter().map(|k| k.0).collect()
    }
}

/// One sufficient statistic entering the log-linear rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticSpec {
    Intercept,
    /// Past weight of i->j events of the same type k.
    Inertia {
        #[serde(default)]
        half_life: f64,
    },
    /// Past weight of j->i events; `types = None` counts every type.
    Reciprocity {
        #[serde(default)]
        types: Option<TypeSet>,
        #[serde(default)]
        half_life: f64,
    },
    /// Sender covariate, optionally restricted to a subset of event types.
    SenderAttr {
        name: String,
        #[serde(default)]
        types: Option<TypeSet>,
    },
    /// Dyadic trust, active only for the gated event types.
    TrustGate { types: TypeSet },
}

impl StatisticSpec {
    pub fn inertia() -> Self {
        StatisticSpec::Inertia { half_life: 0.0 }
    }

    pub fn reciprocity() -> Self {
        StatisticSpec::Reciprocity {
            types: None,
            half_life: 0.0,
        }
    }

    pub fn sender_attr(name: &str) -> Self {
        StatisticSpec::SenderAttr {
            name: name.to_owned(),
            types: None,
        }
    }

    pub fn trust_gate(types: TypeSet) -> Self {
        StatisticSpec::TrustGate { types }
    }

    pub fn half_life(&self) -> Option<f64> {
        match self {
            StatisticSpec::Inertia { half_life } | StatisticSpec::Reciprocity { half_life, .. } => {
                Some(*half_life)
            }
            _ => None,
        }
    }

    pub fn depends_on_trust(&self) -> bool {
        matches!(self, StatisticSpec::TrustGate { .. })
    }

    fn validate(&self, n_types: Option<usize>) -> Result<()> {
        if let Some(h) = self.half_life() {
            if !(h >= 0.0) || !h.is_finite() {
                return Err(Error::invalid(format!("half-life {h} must be finite and >= 0")));
            }
        }
        let subset = match self {
            StatisticSpec::Reciprocity { types, .. } | StatisticSpec::SenderAttr { types, .. } => {
                types.as_ref()
            }
            StatisticSpec::TrustGate { types } => Some(types),
            _ => None,
        };
        if let (Some(set), Some(k)) = (subset, n_types) {
            if set.max().0 >= k {
                return Err(Error::invalid(format!(
                    "gated type {} outside 0..{k}",
                    set.max().0
                )));
            }
        }
        Ok(())
    }
}

/// Validates a statistic list: exactly one intercept, well-formed parameters.
pub fn validate_specs(specs: &[StatisticSpec], n_types: Option<usize>) -> Result<()> {
    let intercepts = specs
        .iter()
        .filter(|s| matches!(s, StatisticSpec::Intercept))
        .count();
    if intercepts != 1 {
        return Err(Error::invalid(format!(
            "a model needs exactly one intercept statistic, found {intercepts}"
        )));
    }
    specs.iter().try_for_each(|s| s.validate(n_types))
}

/// Statistic specifications, their coefficients and a constant baseline hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub specs: Vec<StatisticSpec>,
    pub theta: Vec<f64>,
    pub baseline: f64,
}

impl RateModel {
    pub fn new(specs: Vec<StatisticSpec>, theta: Vec<f64>, baseline: f64) -> Result<Self> {
        validate_specs(&specs, None)?;
        if theta.len() != specs.len() {
            return Err(Error::invalid(format!(
                "theta has {} entries for {} statistics",
                theta.len(),
                specs.len()
            )));
        }
        if !(baseline > 0.0) || !baseline.is_finite() {
            return Err(Error::invalid(format!("baseline {baseline} must be positive")));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("theta must be finite"));
        }
        Ok(Self {
            specs,
            theta,
            baseline,
        })
    }

    /// Zero coefficients and unit baseline.
    pub fn uniform(specs: Vec<StatisticSpec>) -> Result<Self> {
        let p = specs.len();
        Self::new(specs, vec![0.0; p], 1.0)
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.specs.clone(), theta, self.baseline)
    }

    pub fn n_stats(&self) -> usize {
        self.specs.len()
    }

    pub fn validate_for(&self, history: &EventHistory) -> Result<()> {
        validate_specs(&self.specs, Some(history.n_types()))
    }

    pub fn depends_on_trust(&self) -> bool {
        self.specs.iter().any(StatisticSpec::depends_on_trust)
    }

    /// Clamped linear predictor theta . stats.
    pub fn linear_predictor(&self, stats: &[f64]) -> f64 {
        linear_predictor(&self.theta, stats)
    }
}

pub(crate) fn linear_predictor(theta: &[f64], stats: &[f64]) -> f64 {
    let eta: f64 = theta.iter().zip(stats).map(|(t, s)| t * s).sum();
    eta.clamp(-ETA_CLAMP, ETA_CLAMP)
}

pub(crate) fn decay(elapsed: f64, half_life: f64) -> f64 {
    if half_life == 0.0 {
        1.0
    } else {
        (-elapsed / half_life).exp2()
    }
}

/// Accumulated (optionally decayed) weight of i->j events with a type in
/// `types` (all types when `None`) that happened strictly before `t`.
pub fn past_weight(
    history: &EventHistory,
    i: ActorId,
    j: ActorId,
    types: Option<&TypeSet>,
    t: f64,
    half_life: f64,
) -> f64 {
    history
        .events()
        .iter()
        .take_while(|e| e.time < t)
        .filter(|e| e.sender == i && e.receiver == j)
        .filter(|e| types.is_none_or(|s| s.contains(e.event_type)))
        .map(|e| e.weight * decay(t - e.time, half_life))
        .sum()
}

/// Statistic vector S(i, j, k, t) by direct scan of the history.
pub fn compute_statistics(
    model: &RateModel,
    history: &EventHistory,
    attrs: &AttributeSet,
    dyad: Dyad,
    k: EventType,
    t: f64,
) -> Vec<f64> {
    model
        .specs
        .iter()
        .map(|spec| statistic_value(spec, history, attrs, dyad, k, t))
        .collect()
}

fn statistic_value(
    spec: &StatisticSpec,
    history: &EventHistory,
    attrs: &AttributeSet,
    dyad: Dyad,
    k: EventType,
    t: f64,
) -> f64 {
    match spec {
        StatisticSpec::Intercept => 1.0,
        StatisticSpec::Inertia { half_life } => past_weight(
            history,
            dyad.sender,
            dyad.receiver,
            Some(&TypeSet(vec![k])),
            t,
            *half_life,
        ),
        StatisticSpec::Reciprocity { types, half_life } => past_weight(
            history,
            dyad.receiver,
            dyad.sender,
            types.as_ref(),
            t,
            *half_life,
        ),
        StatisticSpec::SenderAttr { name, types } => {
            if types.as_ref().is_none_or(|s| s.contains(k)) {
                attrs.actor(dyad.sender, name)
            } else {
                0.0
            }
        }
        StatisticSpec::TrustGate { types } => {
            if types.contains(k) {
                attrs.trust(dyad)
            } else {
                0.0
            }
        }
    }
}

/// lambda_ijk(t) = baseline * exp(theta . S), with the exponent clamped.
pub fn event_rate(
    model: &RateModel,
    history: &EventHistory,
    attrs: &AttributeSet,
    dyad: Dyad,
    k: EventType,
    t: f64,
) -> f64 {
    let stats = compute_statistics(model, history, attrs, dyad, k, t);
    model.baseline * model.linear_predictor(&stats).exp()
}
