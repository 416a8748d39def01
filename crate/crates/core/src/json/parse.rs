use std::cell::RefCell;
use std::fmt;

use serde::de::{self, DeserializeSeed, MapAccess, SeqAccess, Visitor};
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{JsonValue, Map, Number};

/// Syntax error in JSON text. Line and column are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("JSON syntax error at line {line}, column {column}: {message}")]
pub struct JsonError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl From<serde_json::Error> for JsonError {
    fn from(e: serde_json::Error) -> Self {
        // serde_json appends " at line X column Y" to the Display text
        let text = e.to_string();
        let message = match text.rfind(" at line ") {
            Some(i) => text[..i].to_owned(),
            None => text,
        };
        JsonError {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

/// Non-fatal finding reported while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// The key appeared more than once in one object; the last value won.
    DuplicateKey(String),
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::DuplicateKey(k) => write!(f, "duplicate object key {k:?}, last value kept"),
        }
    }
}

/// Parses one JSON document. Duplicate keys are logged at warn level.
pub fn parse_json(text: &str) -> Result<JsonValue, JsonError> {
    let (value, warnings) = parse_json_with_warnings(text)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(value)
}

/// Like [`parse_json`] but hands the warnings back to the caller.
pub fn parse_json_with_warnings(text: &str) -> Result<(JsonValue, Vec<ParseWarning>), JsonError> {
    let warnings = RefCell::new(Vec::new());
    let mut de = serde_json::Deserializer::from_str(text);
    let value = ValueSeed { warnings: &warnings }.deserialize(&mut de)?;
    de.end()?;
    Ok((value, warnings.into_inner()))
}

struct ValueSeed<'a> {
    warnings: &'a RefCell<Vec<ParseWarning>>,
}

impl<'de> DeserializeSeed<'de> for ValueSeed<'_> {
    type Value = JsonValue;

    fn deserialize<D: Deserializer<'de>>(self, deserializer: D) -> Result<JsonValue, D::Error> {
        deserializer.deserialize_any(ValueVisitor {
            warnings: self.warnings,
        })
    }
}

struct ValueVisitor<'a> {
    warnings: &'a RefCell<Vec<ParseWarning>>,
}

impl ValueVisitor<'_> {
    fn number<E: de::Error>(v: f64) -> Result<JsonValue, E> {
        Number::new(v)
            .map(JsonValue::Number)
            .ok_or_else(|| E::custom("non-finite number"))
    }
}

impl<'de> Visitor<'de> for ValueVisitor<'_> {
    type Value = JsonValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("any JSON value")
    }

    fn visit_unit<E>(self) -> Result<JsonValue, E> {
        Ok(JsonValue::Null)
    }

    fn visit_none<E>(self) -> Result<JsonValue, E> {
        Ok(JsonValue::Null)
    }

    fn visit_bool<E>(self, v: bool) -> Result<JsonValue, E> {
        Ok(JsonValue::Bool(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<JsonValue, E> {
        Self::number(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<JsonValue, E> {
        Self::number(v as f64)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<JsonValue, E> {
        Self::number(v)
    }

    fn visit_str<E>(self, v: &str) -> Result<JsonValue, E> {
        Ok(JsonValue::String(v.to_owned()))
    }

    fn visit_string<E>(self, v: String) -> Result<JsonValue, E> {
        Ok(JsonValue::String(v))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<JsonValue, A::Error> {
        let mut out = Vec::with_capacity(seq.size_hint().unwrap_or(0));
        while let Some(v) = seq.next_element_seed(ValueSeed {
            warnings: self.warnings,
        })? {
            out.push(v);
        }
        Ok(JsonValue::Array(out))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<JsonValue, A::Error> {
        let mut map = Map::with_capacity(access.size_hint().unwrap_or(0));
        while let Some(key) = access.next_key::<String>()? {
            let value = access.next_value_seed(ValueSeed {
                warnings: self.warnings,
            })?;
            // a repeated key keeps its first position and takes the last value
            if let Some(_previous) = map.insert(key.clone(), value) {
                self.warnings
                    .borrow_mut()
                    .push(ParseWarning::DuplicateKey(key));
            }
        }
        Ok(JsonValue::Object(map))
    }
}

impl<'de> Deserialize<'de> for JsonValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let warnings = RefCell::new(Vec::new());
        let value = ValueSeed {
            warnings: &warnings,
        }
        .deserialize(deserializer)?;
        for w in warnings.into_inner() {
            log::warn!("{w}");
        }
        Ok(value)
    }
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.as_i64() {
            Some(i) => serializer.serialize_i64(i),
            None => serializer.serialize_f64(self.get()),
        }
    }
}

impl Serialize for JsonValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            JsonValue::Null => serializer.serialize_unit(),
            JsonValue::Bool(b) => serializer.serialize_bool(*b),
            JsonValue::Number(n) => n.serialize(serializer),
            JsonValue::String(s) => serializer.serialize_str(s),
            JsonValue::Array(items) => {
                let mut seq = serializer.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            JsonValue::Object(map) => {
                let mut m = serializer.serialize_map(Some(map.len()))?;
                for (k, v) in map {
                    m.serialize_entry(k, v)?;
                }
                m.end()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_object() {
        let v = parse_json(r#"{"a":1}"#).unwrap();
        let mut expected = Map::new();
        expected.insert("a".into(), JsonValue::number(1.0));
        assert_eq!(v, JsonValue::Object(expected));
    }

    #[test]
    fn rejects_trailing_slice_syntax() {
        let err = parse_json("[1,2,3][1:3]").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.column >= 8, "{err}");
    }

    #[test]
    fn rejects_nan_and_overflow() {
        assert!(parse_json("NaN").is_err());
        assert!(parse_json("[Infinity]").is_err());
        assert!(parse_json("1e400").is_err());
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_json("{\n  \"a\": 1 2\n}").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(!err.message.contains("at line"));
    }

    #[test]
    fn duplicate_keys_keep_last_value_and_warn() {
        let (v, warnings) = parse_json_with_warnings(r#"{"a":1,"b":2,"a":3}"#).unwrap();
        assert_eq!(v.to_string(), r#"{"a":3,"b":2}"#);
        assert_eq!(warnings, vec![ParseWarning::DuplicateKey("a".into())]);
    }

    #[test]
    fn key_order_survives_round_trip() {
        let text = r#"{"z":1,"a":{"y":[true,null,"s"],"b":2.5}}"#;
        assert_eq!(parse_json(text).unwrap().to_string(), text);
    }
}
