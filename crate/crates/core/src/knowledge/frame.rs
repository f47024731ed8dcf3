use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a frame. Ordering is natural: `KEY-2 < KEY-10`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameId(String);

impl FrameId {
    pub fn new(s: impl Into<String>) -> Self {
        FrameId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Splits `CONCEPT-n` into `("CONCEPT", Some(n))`.
    pub fn split_counter(&self) -> (&str, Option<u64>) {
        match self.0.rsplit_once('-') {
            Some((head, tail)) if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) => {
                (head, tail.parse().ok())
            }
            _ => (&self.0, None),
        }
    }
}

impl Ord for FrameId {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, an) = self.split_counter();
        let (b, bn) = other.split_counter();
        a.cmp(b).then(an.cmp(&bn)).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for FrameId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FrameId {
    fn from(s: &str) -> Self {
        FrameId(s.to_string())
    }
}

impl From<String> for FrameId {
    fn from(s: String) -> Self {
        FrameId(s)
    }
}

impl PartialEq<str> for FrameId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for FrameId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// A property value: a symbolic literal, a number, or a reference to another frame.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Sym(String),
    Num(i64),
    Ref(FrameId),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    pub fn reference(id: impl Into<FrameId>) -> Self {
        Value::Ref(id.into())
    }

    pub fn as_ref_id(&self) -> Option<&FrameId> {
        match self {
            Value::Ref(id) => Some(id),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<i64> {
        match self {
            Value::Num(n) => Some(*n),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Sym(s) => f.write_str(s),
            Value::Num(n) => write!(f, "{n}"),
            Value::Ref(id) => write!(f, "#{id}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Concept,
    Instance,
}

/// Typed property-graph node. Concept frames carry their parents under `is-a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub id: FrameId,
    pub concept: String,
    pub kind: FrameKind,
    pub properties: BTreeMap<String, Vec<Value>>,
    /// Tick at which the frame was asserted.
    #[serde(default)]
    pub asserted_at: u64,
}

impl Frame {
    pub fn instance(id: impl Into<FrameId>, concept: impl Into<String>) -> Self {
        Frame {
            id: id.into(),
            concept: concept.into(),
            kind: FrameKind::Instance,
            properties: BTreeMap::new(),
            asserted_at: 0,
        }
    }

    pub fn concept(name: &str, parents: &[&str]) -> Self {
        let mut f = Frame {
            id: FrameId::new(name),
            concept: name.to_string(),
            kind: FrameKind::Concept,
            properties: BTreeMap::new(),
            asserted_at: 0,
        };
        if !parents.is_empty() {
            f.properties.insert(
                IS_A.to_string(),
                parents.iter().map(|p| Value::reference(*p)).collect(),
            );
        }
        f
    }

    pub fn with(mut self, prop: &str, value: Value) -> Self {
        self.properties.entry(prop.to_string()).or_default().push(value);
        self
    }

    pub fn get(&self, prop: &str) -> &[Value] {
        self.properties.get(prop).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn first(&self, prop: &str) -> Option<&Value> {
        self.get(prop).first()
    }

    pub fn first_ref(&self, prop: &str) -> Option<&FrameId> {
        self.get(prop).iter().find_map(Value::as_ref_id)
    }

    pub fn first_sym(&self, prop: &str) -> Option<&str> {
        self.get(prop).iter().find_map(Value::as_sym)
    }

    pub fn has(&self, prop: &str) -> bool {
        self.properties.get(prop).is_some_and(|v| !v.is_empty())
    }

    /// Replaces all values of `prop`.
    pub fn set(&mut self, prop: &str, values: Vec<Value>) {
        if values.is_empty() {
            self.properties.remove(prop);
        } else {
            self.properties.insert(prop.to_string(), values);
        }
    }

    pub fn parents(&self) -> impl Iterator<Item = &FrameId> {
        self.get(IS_A).iter().filter_map(Value::as_ref_id)
    }
}

pub const IS_A: &str = "is-a";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_id_ordering() {
        let mut ids: Vec<FrameId> = ["KEY-10", "KEY-2", "KEY-1", "MUG-1", "ALL"]
            .into_iter()
            .map(FrameId::from)
            .collect();
        ids.sort();
        let got: Vec<&str> = ids.iter().map(FrameId::as_str).collect();
        assert_eq!(got, ["ALL", "KEY-1", "KEY-2", "KEY-10", "MUG-1"]);
    }

    #[test]
    fn counter_split() {
        assert_eq!(
            FrameId::from("ENTRY-WAY-3").split_counter(),
            ("ENTRY-WAY", Some(3))
        );
        assert_eq!(FrameId::from("ENTRY-WAY").split_counter(), ("ENTRY-WAY", None));
    }
}
