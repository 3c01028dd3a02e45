use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventType(pub usize);

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k{}", self.0)
    }
}

/// An ordered (sender, receiver) pair. Self-dyads are never constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dyad {
    pub sender: ActorId,
    pub receiver: ActorId,
}

impl Dyad {
    pub fn new(sender: ActorId, receiver: ActorId) -> Result<Self> {
        if sender == receiver {
            return Err(Error::invalid(format!("self-dyad {sender}->{receiver}")));
        }
        Ok(Self { sender, receiver })
    }

    pub fn reversed(self) -> Self {
        Self {
            sender: self.receiver,
            receiver: self.sender,
        }
    }
}

impl fmt::Display for Dyad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.sender, self.receiver)
    }
}

/// One directed, typed, weighted interaction at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationalEvent {
    pub sender: ActorId,
    pub receiver: ActorId,
    pub event_type: EventType,
    pub weight: f64,
    pub time: f64,
}

impl RelationalEvent {
    pub fn new(sender: ActorId, receiver: ActorId, event_type: EventType, time: f64) -> Self {
        Self {
            sender,
            receiver,
            event_type,
            weight: 1.0,
            time,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn dyad(&self) -> Dyad {
        Dyad {
            sender: self.sender,
            receiver: self.receiver,
        }
    }

    fn validate(&self, n_actors: usize, n_types: usize) -> Result<()> {
        if self.sender == self.receiver {
            return Err(Error::invalid(format!(
                "self-addressed event from {}",
                self.sender
            )));
        }
        if self.sender.0 >= n_actors || self.receiver.0 >= n_actors {
            return Err(Error::invalid(format!(
                "event {}->{} references an actor outside 0..{n_actors}",
                self.sender, self.receiver
            )));
        }
        if self.event_type.0 >= n_types {
            return Err(Error::invalid(format!(
                "event type {} outside 0..{n_types}",
                self.event_type.0
            )));
        }
        if !self.time.is_finite() || self.time < 0.0 {
            return Err(Error::invalid(format!("event time {} is not a finite nonnegative real", self.time)));
        }
        if !(self.weight >= 0.0) || !self.weight.is_finite() {
            return Err(Error::invalid(format!("event weight {} must be finite and >= 0", self.weight)));
        }
        Ok(())
    }
}

/// A time-ordered event sequence over a fixed actor set and type vocabulary.
///
/// Events are kept in non-decreasing time order; ties keep insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventHistory {
    n_actors: usize,
    n_types: usize,
    events: Vec<RelationalEvent>,
}

impl EventHistory {
    pub fn new(n_actors: usize, n_types: usize) -> Result<Self> {
        if n_actors < 2 {
            return Err(Error::invalid("an event history needs at least two actors"));
        }
        if n_types == 0 {
            return Err(Error::invalid("an event history needs at least one event type"));
        }
        Ok(Self {
            n_actors,
            n_types,
            events: Vec::new(),
        })
    }

    pub fn from_events(
        n_actors: usize,
        n_types: usize,
        events: impl IntoIterator<Item = RelationalEvent>,
    ) -> Result<Self> {
        let mut history = Self::new(n_actors, n_types)?;
        for event in events {
            history.push(event)?;
        }
        Ok(history)
    }

    /// Appends an event. Rejects events that would break time ordering.
    pub fn push(&mut self, event: RelationalEvent) -> Result<()> {
        event.validate(self.n_actors, self.n_types)?;
        if let Some(last) = self.events.last() {
            if event.time < last.time {
                return Err(Error::NonMonotoneTime {
                    index: self.events.len(),
                    time: event.time,
                    previous: last.time,
                });
            }
        }
        self.events.push(event);
        Ok(())
    }

    pub fn n_actors(&self) -> usize {
        self.n_actors
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn events(&self) -> &[RelationalEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// All ordered pairs of distinct actors, sender-major.
    pub fn dyads(&self) -> impl Iterator<Item = Dyad> + '_ {
        dyads(self.n_actors)
    }

    pub fn n_dyads(&self) -> usize {
        self.n_actors * (self.n_actors - 1)
    }

    /// Number of (dyad, type) candidates competing for the next event.
    pub fn n_candidates(&self) -> usize {
        self.n_dyads() * self.n_types
    }

    /// Index of the first event with time strictly greater than `t`.
    pub fn partition_after(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// Index of the first event with time at or after `t`.
    pub fn partition_before(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time < t)
    }

    /// A copy holding only the events with time <= `t`.
    pub fn truncated(&self, t: f64) -> Self {
        Self {
            n_actors: self.n_actors,
            n_types: self.n_types,
            events: self.events[..self.partition_after(t)].to_vec(),
        }
    }
}

pub(crate) fn dyads(n_actors: usize) -> impl Iterator<Item = Dyad> {
    (0..n_actors).flat_map(move |i| {
        (0..n_actors).filter(move |&j| j != i).map(move |j| Dyad {
            sender: ActorId(i),
            receiver: ActorId(j),
        })
    })
}

/// One (sender, receiver, type) slot of the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub dyad: Dyad,
    pub event_type: EventType,
}

/// Candidates in canonical order: dyads sender-major, types innermost.
pub fn candidates(n_actors: usize, n_types: usize) -> impl Iterator<Item = Candidate> {
    dyads(n_actors).flat_map(move |dyad| {
        (0..n_types).map(move |k| Candidate {
            dyad,
            event_type: EventType(k),
        })
    })
}

pub(crate) fn candidate_index(n_actors: usize, n_types: usize, c: Candidate) -> usize {
    let i = c.dyad.sender.0;
    let j = c.dyad.receiver.0;
    let j_slot = if j > i { j - 1 } else { j };
    (i * (n_actors - 1) + j_slot) * n_types + c.event_type.0
}
