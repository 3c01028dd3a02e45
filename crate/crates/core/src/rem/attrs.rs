use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rem::event::{ActorId, Dyad};

pub const TRUST: &str = "trust";

/// Individual, relational and environmental covariates in force over an interval.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributeSet {
    actor_attrs: BTreeMap<ActorId, BTreeMap<String, f64>>,
    dyad_attrs: BTreeMap<Dyad, BTreeMap<String, f64>>,
    env_attrs: BTreeMap<String, f64>,
}

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_actor(&mut self, actor: ActorId, name: &str, value: f64) -> Result<()> {
        check_finite(name, value)?;
        self.actor_attrs
            .entry(actor)
            .or_default()
            .insert(name.to_owned(), value);
        Ok(())
    }

    pub fn with_actor(mut self, actor: ActorId, name: &str, value: f64) -> Result<Self> {
        self.set_actor(actor, name, value)?;
        Ok(self)
    }

    pub fn set_dyad(&mut self, dyad: Dyad, name: &str, value: f64) -> Result<()> {
        check_finite(name, value)?;
        if name == TRUST && !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!("trust {value} for {dyad} outside [0,1]")));
        }
        self.dyad_attrs
            .entry(dyad)
            .or_default()
            .insert(name.to_owned(), value);
        Ok(())
    }

    pub fn set_trust(&mut self, dyad: Dyad, value: f64) -> Result<()> {
        self.set_dyad(dyad, TRUST, value)
    }

    pub fn with_trust(mut self, dyad: Dyad, value: f64) -> Result<Self> {
        self.set_trust(dyad, value)?;
        Ok(self)
    }

    pub fn set_env(&mut self, name: &str, value: f64) -> Result<()> {
        check_finite(name, value)?;
        self.env_attrs.insert(name.to_owned(), value);
        Ok(())
    }

    /// Missing entries read as 0.
    pub fn actor(&self, actor: ActorId, name: &str) -> f64 {
        self.actor_attrs
            .get(&actor)
            .and_then(|m| m.get(name))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn dyad(&self, dyad: Dyad, name: &str) -> f64 {
        self.dyad_attrs
            .get(&dyad)
            .and_then(|m| m.get(name))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn trust(&self, dyad: Dyad) -> f64 {
        self.dyad(dyad, TRUST)
    }

    pub fn env(&self, name: &str) -> f64 {
        self.env_attrs.get(name).copied().unwrap_or(0.0)
    }

    pub fn actor_entries(&self) -> impl Iterator<Item = (ActorId, &str, f64)> {
        self.actor_attrs
            .iter()
            .flat_map(|(a, m)| m.iter().map(move |(k, v)| (*a, k.as_str(), *v)))
    }

    pub fn dyad_entries(&self) -> impl Iterator<Item = (Dyad, &str, f64)> {
        self.dyad_attrs
            .iter()
            .flat_map(|(d, m)| m.iter().map(move |(k, v)| (*d, k.as_str(), *v)))
    }

    pub fn env_entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.env_attrs.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("attribute {name} = {value} is not finite")))
    }
}

/// Supplies the attribute set in force for the interval that ends at event
/// `index` of a history. `index == history.len()` asks for the set in force
/// after the last event (used for trailing survival terms).
pub trait AttributeTimeline {
    fn attrs_at(&self, index: usize) -> &AttributeSet;
}

impl AttributeTimeline for AttributeSet {
    fn attrs_at(&self, _index: usize) -> &AttributeSet {
        self
    }
}

/// One attribute set per event; indices past the end reuse the last set.
impl AttributeTimeline for [AttributeSet] {
    fn attrs_at(&self, index: usize) -> &AttributeSet {
        &self[index.min(self.len() - 1)]
    }
}

impl AttributeTimeline for Vec<AttributeSet> {
    fn attrs_at(&self, index: usize) -> &AttributeSet {
        self.as_slice().attrs_at(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_attributes_read_as_zero() {
        let a = AttributeSet::new();
        let d = Dyad::new(ActorId(0), ActorId(1)).unwrap();
        assert_eq!(a.actor(ActorId(3), "is_human"), 0.0);
        assert_eq!(a.trust(d), 0.0);
        assert_eq!(a.env("emergency_active"), 0.0);
    }

    #[test]
    fn trust_must_lie_in_unit_interval() {
        let d = Dyad::new(ActorId(0), ActorId(1)).unwrap();
        let mut a = AttributeSet::new();
        assert!(a.set_trust(d, 1.2).is_err());
        assert!(a.set_trust(d, -0.1).is_err());
        a.set_trust(d, 0.7).unwrap();
        assert_eq!(a.trust(d), 0.7);
        // other dyad attributes are unrestricted
        a.set_dyad(d, "distance", 4.0).unwrap();
        assert!(a.set_env("x", f64::INFINITY).is_err());
    }
}
