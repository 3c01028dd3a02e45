//! Line-delimited event logs and attribute snapshot documents.
//!
//! Event log: the first non-blank line is a header `{"types": [...], "actors": [...]}`
//! naming the event types (and optionally the actors) in index order; each
//! following line is one event `{"t": 1.5, "i": "H", "j": "R1", "k": "status_query", "w": 1.0}`.
//! `w` defaults to 1. Without an `actors` list actors are numbered in order of
//! first appearance.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rem::attrs::AttributeSet;
use crate::rem::event::{ActorId, Dyad, EventHistory, EventType, RelationalEvent};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub actors: Vec<String>,
    pub types: Vec<String>,
}

impl Vocabulary {
    pub fn actor(&self, name: &str) -> Option<ActorId> {
        self.actors.iter().position(|a| a == name).map(ActorId)
    }

    pub fn event_type(&self, name: &str) -> Option<EventType> {
        self.types.iter().position(|k| k == name).map(EventType)
    }

    pub fn actor_name(&self, a: ActorId) -> &str {
        &self.actors[a.0]
    }

    pub fn type_name(&self, k: EventType) -> &str {
        &self.types[k.0]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    types: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    actors: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRecord {
    t: f64,
    i: String,
    j: String,
    k: String,
    #[serde(default = "unit_weight")]
    w: f64,
}

fn unit_weight() -> f64 {
    1.0
}

pub fn read_event_log(reader: impl BufRead) -> Result<(Vocabulary, EventHistory)> {
    let mut header: Option<Header> = None;
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: Header = serde_json::from_str(&line)
                .map_err(|e| Error::parse(line_no, format!("bad header record: {e}")))?;
            if h.types.is_empty() {
                return Err(Error::parse(line_no, "header declares no event types"));
            }
            header = Some(h);
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(line_no, format!("bad event record: {e}")))?;
        records.push((line_no, rec));
    }
    let header = header.ok_or_else(|| Error::parse(1, "missing header record"))?;

    let actors = match header.actors {
        Some(a) => a,
        None => {
            let mut seen: Vec<String> = Vec::new();
            for (_, r) in &records {
                for name in [&r.i, &r.j] {
                    if !seen.contains(name) {
                        seen.push(name.clone());
                    }
                }
            }
            seen
        }
    };
    let vocab = Vocabulary {
        actors,
        types: header.types,
    };
    let mut history = EventHistory::new(vocab.actors.len().max(2), vocab.types.len())?;
    for (line_no, r) in records {
        let lookup_actor = |name: &str| {
            vocab
                .actor(name)
                .ok_or_else(|| Error::parse(line_no, format!("unknown actor {name:?}")))
        };
        let sender = lookup_actor(&r.i)?;
        let receiver = lookup_actor(&r.j)?;
        let k = vocab
            .event_type(&r.k)
            .ok_or_else(|| Error::parse(line_no, format!("unknown event type {:?}", r.k)))?;
        let event = RelationalEvent::new(sender, receiver, k, r.t).with_weight(r.w);
        history
            .push(event)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
    }
    Ok((vocab, history))
}

pub fn write_event_log(mut out: impl Write, vocab: &Vocabulary, history: &EventHistory) -> Result<()> {
    let header = Header {
        types: vocab.types.clone(),
        actors: Some(vocab.actors.clone()),
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))?;
    for e in history.events() {
        let rec = EventRecord {
            t: e.time,
            i: vocab.actor_name(e.sender).to_owned(),
            j: vocab.actor_name(e.receiver).to_owned(),
            k: vocab.type_name(e.event_type).to_owned(),
            w: e.weight,
        };
        writeln!(out, "{}", serde_json::to_string(&rec).expect("event serializes"))?;
    }
    Ok(())
}

/// Attribute snapshot keyed by actor name, dyad and environment variable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttributeSnapshot {
    #[serde(default)]
    pub actors: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub dyads: Vec<DyadAttributes>,
    #[serde(default)]
    pub env: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadAttributes {
    pub sender: String,
    pub receiver: String,
    pub attrs: BTreeMap<String, f64>,
}

impl AttributeSnapshot {
    pub fn resolve(&self, vocab: &Vocabulary) -> Result<AttributeSet> {
        let actor = |name: &str| {
            vocab
                .actor(name)
                .ok_or_else(|| Error::invalid(format!("attribute snapshot names unknown actor {name:?}")))
        };
        let mut set = AttributeSet::new();
        for (name, attrs) in &self.actors {
            let a = actor(name)?;
            for (k, v) in attrs {
                set.set_actor(a, k, *v)?;
            }
        }
        for d in &self.dyads {
            let dyad = Dyad::new(actor(&d.sender)?, actor(&d.receiver)?)?;
            for (k, v) in &d.attrs {
                set.set_dyad(dyad, k, *v)?;
            }
        }
        for (k, v) in &self.env {
            set.set_env(k, *v)?;
        }
        Ok(set)
    }

    pub fn from_set(set: &AttributeSet, vocab: &Vocabulary) -> Self {
        let mut snap = AttributeSnapshot::default();
        for (a, k, v) in set.actor_entries() {
            snap.actors
                .entry(vocab.actor_name(a).to_owned())
                .or_default()
                .insert(k.to_owned(), v);
        }
        let mut by_dyad: BTreeMap<Dyad, BTreeMap<String, f64>> = BTreeMap::new();
        for (d, k, v) in set.dyad_entries() {
            by_dyad.entry(d).or_default().insert(k.to_owned(), v);
        }
        snap.dyads = by_dyad
            .into_iter()
            .map(|(d, attrs)| DyadAttributes {
                sender: vocab.actor_name(d.sender).to_owned(),
                receiver: vocab.actor_name(d.receiver).to_owned(),
                attrs,
            })
            .collect();
        for (k, v) in set.env_entries() {
            snap.env.insert(k.to_owned(), v);
        }
        snap
    }
}

/// A snapshot in force for events with time <= `until` (the last segment may
/// omit `until`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSegment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<f64>,
    #[serde(flatten)]
    pub snapshot: AttributeSnapshot,
}

/// Either one snapshot for the whole history or a piecewise-constant sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeDocument {
    Segmented { segments: Vec<AttributeSegment> },
    Single(AttributeSnapshot),
}

impl AttributeDocument {
    /// One attribute set per event of `history`.
    pub fn timeline(&self, vocab: &Vocabulary, history: &EventHistory) -> Result<Vec<AttributeSet>> {
        match self {
            AttributeDocument::Single(s) => {
                let set = s.resolve(vocab)?;
                Ok(vec![set; history.len().max(1)])
            }
            AttributeDocument::Segmented { segments } => {
                if segments.is_empty() {
                    return Err(Error::invalid("attribute document has no segments"));
                }
                let resolved = segments
                    .iter()
                    .map(|s| s.snapshot.resolve(vocab))
                    .collect::<Result<Vec<_>>>()?;
                let mut out = Vec::with_capacity(history.len());
                let mut seg = 0;
                for e in history.events() {
                    while seg + 1 < segments.len()
                        && segments[seg].until.is_some_and(|u| e.time > u)
                    {
                        seg += 1;
                    }
                    out.push(resolved[seg].clone());
                }
                if out.is_empty() {
                    out.push(resolved[0].clone());
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_events() {
        let text = r#"{"types":["status_query","instruct"],"actors":["H","R1","R2"]}
{"t":1.0,"i":"H","j":"R1","k":"status_query"}

{"t":2.5,"i":"R1","j":"H","k":"instruct","w":0.5}
"#;
        let (vocab, h) = read_event_log(text.as_bytes()).unwrap();
        assert_eq!(vocab.actors, vec!["H", "R1", "R2"]);
        assert_eq!(h.len(), 2);
        assert_eq!(h.events()[1].weight, 0.5);
        assert_eq!(h.events()[1].event_type, EventType(1));
        let mut buf = Vec::new();
        write_event_log(&mut buf, &vocab, &h).unwrap();
        let (v2, h2) = read_event_log(buf.as_slice()).unwrap();
        assert_eq!((vocab, h), (v2, h2));
    }

    #[test]
    fn actors_default_to_first_appearance() {
        let text = "{\"types\":[\"a\"]}\n{\"t\":0,\"i\":\"x\",\"j\":\"y\",\"k\":\"a\"}\n{\"t\":1,\"i\":\"z\",\"j\":\"x\",\"k\":\"a\"}\n";
        let (vocab, _) = read_event_log(text.as_bytes()).unwrap();
        assert_eq!(vocab.actors, vec!["x", "y", "z"]);
    }

    #[test]
    fn errors_name_the_line() {
        let text = "{\"types\":[\"a\"],\"actors\":[\"x\",\"y\"]}\n{\"t\":2,\"i\":\"x\",\"j\":\"y\",\"k\":\"a\"}\n{\"t\":1,\"i\":\"x\",\"j\":\"y\",\"k\":\"a\"}\n";
        match read_event_log(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "{\"types\":[\"a\"],\"actors\":[\"x\",\"y\"]}\n{\"t\":2,\"i\":\"x\",\"j\":\"q\",\"k\":\"a\"}\n";
        assert!(matches!(read_event_log(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_event_log("not json".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_event_log("".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn segmented_attributes_follow_event_times() {
        let vocab = Vocabulary {
            actors: vec!["H".into(), "R".into()],
            types: vec!["a".into()],
        };
        let h = EventHistory::from_events(
            2,
            1,
            [0.5, 1.0, 1.5].map(|t| RelationalEvent::new(ActorId(0), ActorId(1), EventType(0), t)),
        )
        .unwrap();
        let doc: AttributeDocument = serde_json::from_str(
            r#"{"segments":[
                {"until":1.0,"dyads":[{"sender":"H","receiver":"R","attrs":{"trust":0.2}}]},
                {"dyads":[{"sender":"H","receiver":"R","attrs":{"trust":0.9}}]}]}"#,
        )
        .unwrap();
        let tl = doc.timeline(&vocab, &h).unwrap();
        let d = Dyad::new(ActorId(0), ActorId(1)).unwrap();
        let trust: Vec<f64> = tl.iter().map(|a| a.trust(d)).collect();
        assert_eq!(trust, vec![0.2, 0.2, 0.9]);

        let bad: AttributeDocument =
            serde_json::from_str(r#"{"dyads":[{"sender":"H","receiver":"R","attrs":{"trust":1.5}}]}"#).unwrap();
        assert!(bad.timeline(&vocab, &h).is_err());
    }
}
