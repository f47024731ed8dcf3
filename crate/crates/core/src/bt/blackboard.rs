use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Typed blackboard value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BbValue {
    Flag(bool),
    Num(f64),
    Cell(i32, i32),
    Ref(String),
    /// Command id plus its verb.
    Command(u64, String),
    List(Vec<String>),
}

/// Key/value store with declared defaults and a write counter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Blackboard {
    values: BTreeMap<String, BbValue>,
    defaults: BTreeMap<String, BbValue>,
    version: u64,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares the value unset reads of `key` return.
    pub fn declare(&mut self, key: &str, default: BbValue) {
        self.defaults.insert(key.to_string(), default);
    }

    pub fn get(&self, key: &str) -> Option<&BbValue> {
        self.values.get(key).or_else(|| self.defaults.get(key))
    }

    pub fn set(&mut self, key: &str, value: BbValue) {
        self.values.insert(key.to_string(), value);
        self.version += 1;
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
        self.version += 1;
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Unset and undeclared flags read as false.
    pub fn flag(&self, key: &str) -> bool {
        matches!(self.get(key), Some(BbValue::Flag(true)))
    }

    pub fn num(&self, key: &str) -> f64 {
        match self.get(key) {
            Some(BbValue::Num(n)) => *n,
            _ => 0.0,
        }
    }

    pub fn cell(&self, key: &str) -> Option<(i32, i32)> {
        match self.get(key) {
            Some(BbValue::Cell(x, y)) => Some((*x, *y)),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.get(key) {
            Some(BbValue::Ref(s)) => Some(s),
            _ => None,
        }
    }

    pub fn command(&self, key: &str) -> Option<(u64, &str)> {
        match self.get(key) {
            Some(BbValue::Command(id, verb)) => Some((*id, verb)),
            _ => None,
        }
    }

    pub fn list(&self, key: &str) -> &[String] {
        match self.get(key) {
            Some(BbValue::List(v)) => v,
            _ => &[],
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_version() {
        let mut bb = Blackboard::new();
        assert!(!bb.flag("collision"));
        assert_eq!(bb.num("battery"), 0.0);
        bb.declare("battery", BbValue::Num(100.0));
        assert_eq!(bb.num("battery"), 100.0);
        assert_eq!(bb.version(), 0);
        bb.set("collision", BbValue::Flag(true));
        bb.set("collision", BbValue::Flag(true));
        assert_eq!(bb.version(), 2);
        assert!(bb.flag("collision"));
    }
}
