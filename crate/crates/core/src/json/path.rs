use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::JsonValue;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathStep {
    Key(String),
    Index(usize),
}

/// A location inside a JSON document. The empty path is the root.
///
/// Textual form is a JSON Pointer (`/actor/spt:userId`, `/items/0`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct JsonPath(Vec<PathStep>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid JSON pointer {pointer:?}: {reason}")]
pub struct PathError {
    pub pointer: String,
    pub reason: &'static str,
}

impl JsonPath {
    pub fn root() -> Self {
        JsonPath(Vec::new())
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn key(&self, key: impl Into<String>) -> Self {
        let mut steps = self.0.clone();
        steps.push(PathStep::Key(key.into()));
        JsonPath(steps)
    }

    pub fn index(&self, index: usize) -> Self {
        let mut steps = self.0.clone();
        steps.push(PathStep::Index(index));
        JsonPath(steps)
    }

    /// True if `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &JsonPath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Parses a JSON Pointer. Numeric segments become indices.
    pub fn parse_pointer(pointer: &str) -> Result<Self, PathError> {
        if pointer.is_empty() {
            return Ok(JsonPath::root());
        }
        let Some(rest) = pointer.strip_prefix('/') else {
            return Err(PathError {
                pointer: pointer.to_owned(),
                reason: "must start with '/'",
            });
        };
        let mut steps = Vec::new();
        for raw in rest.split('/') {
            let seg = raw.replace("~1", "/").replace("~0", "~");
            let is_index = !seg.is_empty()
                && seg.bytes().all(|b| b.is_ascii_digit())
                && (seg == "0" || !seg.starts_with('0'));
            match seg.parse::<usize>() {
                Ok(i) if is_index => steps.push(PathStep::Index(i)),
                _ => steps.push(PathStep::Key(seg)),
            }
        }
        Ok(JsonPath(steps))
    }
}

impl From<Vec<PathStep>> for JsonPath {
    fn from(steps: Vec<PathStep>) -> Self {
        JsonPath(steps)
    }
}

impl FromStr for JsonPath {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JsonPath::parse_pointer(s)
    }
}

impl fmt::Display for JsonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.0 {
            match step {
                PathStep::Key(k) => write!(f, "/{}", k.replace('~', "~0").replace('/', "~1"))?,
                PathStep::Index(i) => write!(f, "/{i}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for JsonPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for JsonPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        JsonPath::parse_pointer(&s).map_err(serde::de::Error::custom)
    }
}

/// Value at `path`, or `None` when any step is missing. Never fails: an
/// index into a non-array or a key into a non-object is simply absent.
pub fn get_path<'a>(value: &'a JsonValue, path: &JsonPath) -> Option<&'a JsonValue> {
    path.0.iter().try_fold(value, |cur, step| match (step, cur) {
        (PathStep::Key(k), JsonValue::Object(m)) => m.get(k),
        (PathStep::Index(i), JsonValue::Array(a)) => a.get(*i),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json::parse_json;

    #[test]
    fn nested_lookup() {
        let v = parse_json(r#"{"a":{"b":2}}"#).unwrap();
        let p = JsonPath::root().key("a").key("b");
        assert_eq!(get_path(&v, &p), Some(&JsonValue::number(2.0)));
    }

    #[test]
    fn missing_key_is_absent() {
        let v = parse_json(r#"{"a":1}"#).unwrap();
        assert_eq!(get_path(&v, &JsonPath::root().key("z")), None);
    }

    #[test]
    fn mismatched_steps_are_absent() {
        let v = parse_json(r#"{"a":[1,2],"s":"x"}"#).unwrap();
        assert_eq!(get_path(&v, &JsonPath::root().key("a").key("0")), None);
        assert_eq!(get_path(&v, &JsonPath::root().key("s").index(0)), None);
        assert_eq!(
            get_path(&v, &JsonPath::root().key("a").index(1)),
            Some(&JsonValue::number(2.0))
        );
        assert_eq!(get_path(&v, &JsonPath::root()), Some(&v));
    }

    #[test]
    fn pointer_text_round_trip() {
        let p = JsonPath::root().key("actor").key("spt:userId").index(3).key("a/b~c");
        let text = p.to_string();
        assert_eq!(text, "/actor/spt:userId/3/a~1b~0c");
        assert_eq!(JsonPath::parse_pointer(&text).unwrap(), p);
        assert!(JsonPath::parse_pointer("actor").is_err());
        assert_eq!(
            JsonPath::parse_pointer("/01").unwrap(),
            JsonPath::root().key("01")
        );
    }

    #[test]
    fn prefix_relation() {
        let a = JsonPath::root().key("a");
        let ab = a.key("b");
        assert!(a.is_prefix_of(&ab));
        assert!(a.is_prefix_of(&a));
        assert!(!ab.is_prefix_of(&a));
    }
}
