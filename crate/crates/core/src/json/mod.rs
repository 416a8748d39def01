//! In-memory JSON values shared by every other module.
//!
//! [`JsonValue`] keeps object keys in insertion order so that documents
//! survive a parse/serialize cycle unchanged, and stores every number as a
//! finite `f64` ([`Number`]).

mod parse;
mod path;

use std::fmt;

use indexmap::IndexMap;

pub use parse::{parse_json, parse_json_with_warnings, JsonError, ParseWarning};
pub use path::{get_path, JsonPath, PathError, PathStep};

/// Object representation: keys are unique and keep insertion order.
pub type Map = IndexMap<String, JsonValue>;

/// A finite JSON number.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Number(f64);

impl Number {
    /// Returns `None` for NaN and infinities.
    pub fn new(value: f64) -> Option<Self> {
        value.is_finite().then_some(Number(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// True when the value has no fractional part.
    pub fn is_integral(self) -> bool {
        self.0.fract() == 0.0
    }

    /// The value as an `i64` when it is integral and exactly representable.
    pub fn as_i64(self) -> Option<i64> {
        // 2^53: beyond this not every integer is representable as f64
        const EXACT: f64 = 9_007_199_254_740_992.0;
        (self.is_integral() && self.0.abs() <= EXACT).then_some(self.0 as i64)
    }
}

impl Eq for Number {}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_i64() {
            Some(i) => write!(f, "{i}"),
            None => {
                let n = serde_json::Number::from_f64(self.0).expect("finite");
                write!(f, "{n}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum JsonValue {
    #[default]
    Null,
    Bool(bool),
    Number(Number),
    String(String),
    Array(Vec<JsonValue>),
    Object(Map),
}

impl JsonValue {
    /// Builds a number value; non-finite input becomes `Null`.
    pub fn number(value: f64) -> Self {
        Number::new(value).map_or(JsonValue::Null, JsonValue::Number)
    }

    pub fn is_null(&self) -> bool {
        matches!(self, JsonValue::Null)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            JsonValue::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            JsonValue::Number(n) => Some(n.get()),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            JsonValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&Vec<JsonValue>> {
        match self {
            JsonValue::Array(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_object(&self) -> Option<&Map> {
        match self {
            JsonValue::Object(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_object_mut(&mut self) -> Option<&mut Map> {
        match self {
            JsonValue::Object(m) => Some(m),
            _ => None,
        }
    }

    /// Member lookup; `None` for missing keys and non-objects.
    pub fn get(&self, key: &str) -> Option<&JsonValue> {
        self.as_object().and_then(|m| m.get(key))
    }

    /// Short lowercase name of the value's JSON type.
    pub fn type_name(&self) -> &'static str {
        match self {
            JsonValue::Null => "null",
            JsonValue::Bool(_) => "boolean",
            JsonValue::Number(_) => "number",
            JsonValue::String(_) => "string",
            JsonValue::Array(_) => "array",
            JsonValue::Object(_) => "object",
        }
    }

    /// Compact single-line serialization (also what `Display` prints).
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("JsonValue serialization is infallible")
    }

    pub fn to_pretty_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("JsonValue serialization is infallible")
    }
}

impl fmt::Display for JsonValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json_string())
    }
}

impl From<bool> for JsonValue {
    fn from(b: bool) -> Self {
        JsonValue::Bool(b)
    }
}

impl From<f64> for JsonValue {
    fn from(n: f64) -> Self {
        JsonValue::number(n)
    }
}

impl From<i64> for JsonValue {
    fn from(n: i64) -> Self {
        JsonValue::number(n as f64)
    }
}

impl From<u32> for JsonValue {
    fn from(n: u32) -> Self {
        JsonValue::number(f64::from(n))
    }
}

impl From<u64> for JsonValue {
    fn from(n: u64) -> Self {
        JsonValue::number(n as f64)
    }
}

impl From<&str> for JsonValue {
    fn from(s: &str) -> Self {
        JsonValue::String(s.to_owned())
    }
}

impl From<String> for JsonValue {
    fn from(s: String) -> Self {
        JsonValue::String(s)
    }
}

impl From<Vec<JsonValue>> for JsonValue {
    fn from(v: Vec<JsonValue>) -> Self {
        JsonValue::Array(v)
    }
}

impl From<Map> for JsonValue {
    fn from(m: Map) -> Self {
        JsonValue::Object(m)
    }
}

impl From<serde_json::Value> for JsonValue {
    fn from(v: serde_json::Value) -> Self {
        match v {
            serde_json::Value::Null => JsonValue::Null,
            serde_json::Value::Bool(b) => JsonValue::Bool(b),
            serde_json::Value::Number(n) => JsonValue::number(n.as_f64().unwrap_or(f64::NAN)),
            serde_json::Value::String(s) => JsonValue::String(s),
            serde_json::Value::Array(a) => JsonValue::Array(a.into_iter().map(Into::into).collect()),
            serde_json::Value::Object(o) => {
                JsonValue::Object(o.into_iter().map(|(k, v)| (k, v.into())).collect())
            }
        }
    }
}

/// Builds a [`JsonValue`] from JSON-like syntax. Only meant for tests and
/// fixtures; panics on malformed input.
#[macro_export]
macro_rules! json {
    ($($tt:tt)+) => {
        $crate::json::JsonValue::from(::serde_json::json!($($tt)+))
    };
}
