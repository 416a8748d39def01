use crate::json::JsonValue;
use crate::pattern::Pattern;

use super::ast::Prepared;
use super::error::{RawError, RuntimeErrorKind};
use super::timefmt::TimeFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Round,
    ParseTime,
    Boolean,
    Test,
    String,
    Number,
    Size,
    Not,
    Contains,
    IsObject,
    IsArray,
    IsString,
    IsNumber,
    IsBoolean,
    UuidValidate,
}

const TABLE: &[(&str, Builtin, usize, usize)] = &[
    ("round", Builtin::Round, 1, 1),
    ("parse-time", Builtin::ParseTime, 2, 2),
    ("boolean", Builtin::Boolean, 1, 1),
    ("test", Builtin::Test, 2, 2),
    ("string", Builtin::String, 1, 1),
    ("number", Builtin::Number, 1, 2),
    ("size", Builtin::Size, 1, 1),
    ("not", Builtin::Not, 1, 1),
    ("contains", Builtin::Contains, 2, 2),
    ("is-object", Builtin::IsObject, 1, 1),
    ("is-array", Builtin::IsArray, 1, 1),
    ("is-string", Builtin::IsString, 1, 1),
    ("is-number", Builtin::IsNumber, 1, 1),
    ("is-boolean", Builtin::IsBoolean, 1, 1),
    ("uuid-validate", Builtin::UuidValidate, 1, 1),
];

impl Builtin {
    pub fn lookup(name: &str) -> Option<Builtin> {
        TABLE.iter().find(|e| e.0 == name).map(|e| e.1)
    }

    pub fn name(self) -> &'static str {
        TABLE.iter().find(|e| e.1 == self).map(|e| e.0).expect("in table")
    }

    /// Inclusive (min, max) argument count.
    pub fn arity(self) -> (usize, usize) {
        TABLE.iter().find(|e| e.1 == self).map(|e| (e.2, e.3)).expect("in table")
    }

    /// Compiles a literal argument that would otherwise be compiled on every
    /// call: the regex of `test` and the format of `parse-time`.
    pub(crate) fn prepare(self, arg_index: usize, literal: &JsonValue) -> Option<Result<Prepared, String>> {
        let text = literal.as_str()?;
        match (self, arg_index) {
            (Builtin::Test, 1) => Some(Pattern::new(text).map(Prepared::Pattern).map_err(|e| e.to_string())),
            (Builtin::ParseTime, 1) => Some(TimeFormat::compile(text).map(Prepared::TimeFormat)),
            _ => None,
        }
    }
}

/// JSLT truthiness: null, false, 0, and empty strings, arrays and objects
/// are false; everything else is true.
pub fn truthy(v: &JsonValue) -> bool {
    match v {
        JsonValue::Null => false,
        JsonValue::Bool(b) => *b,
        JsonValue::Number(n) => n.get() != 0.0,
        JsonValue::String(s) => !s.is_empty(),
        JsonValue::Array(a) => !a.is_empty(),
        JsonValue::Object(o) => !o.is_empty(),
    }
}

fn number_result(offset: usize, n: f64) -> Result<JsonValue, RawError> {
    if n.is_finite() {
        Ok(JsonValue::number(n))
    } else {
        Err(RawError::new(RuntimeErrorKind::InvalidArgument, offset, "numeric result is not finite"))
    }
}

pub(crate) fn apply(
    builtin: Builtin,
    args: Vec<JsonValue>,
    prepared: Option<&Prepared>,
    offset: usize,
) -> Result<JsonValue, RawError> {
    let name = builtin.name();
    let type_err = |what: &JsonValue| RawError::type_error(offset, format!("{name}() cannot take {}", what.type_name()));
    let mut args = args.into_iter();
    let first = args.next().unwrap_or_default();
    match builtin {
        Builtin::Round => match &first {
            JsonValue::Null => Ok(JsonValue::Null),
            JsonValue::Number(n) => number_result(offset, n.get().round()),
            other => Err(type_err(other)),
        },
        Builtin::ParseTime => {
            let format_arg = args.next().unwrap_or_default();
            let input = match &first {
                JsonValue::Null => return Ok(JsonValue::Null),
                JsonValue::String(s) => s,
                other => return Err(type_err(other)),
            };
            let compiled;
            let format = match prepared {
                Some(Prepared::TimeFormat(f)) => f,
                _ => {
                    let text = format_arg.as_str().ok_or_else(|| type_err(&format_arg))?;
                    compiled = TimeFormat::compile(text)
                        .map_err(|m| RawError::new(RuntimeErrorKind::InvalidArgument, offset, m))?;
                    &compiled
                }
            };
            format
                .parse(input)
                .map(JsonValue::number)
                .map_err(|m| RawError::new(RuntimeErrorKind::TimeFormat(input.clone()), offset, m))
        }
        Builtin::Boolean => Ok(JsonValue::Bool(truthy(&first))),
        Builtin::Not => Ok(JsonValue::Bool(!truthy(&first))),
        Builtin::Test => {
            let regex_arg = args.next().unwrap_or_default();
            let input = match &first {
                JsonValue::Null => return Ok(JsonValue::Bool(false)),
                JsonValue::String(s) => s,
                other => return Err(type_err(other)),
            };
            let compiled;
            let pattern = match prepared {
                Some(Prepared::Pattern(p)) => p,
                _ => {
                    let text = regex_arg.as_str().ok_or_else(|| type_err(&regex_arg))?;
                    compiled = Pattern::new(text)
                        .map_err(|e| RawError::new(RuntimeErrorKind::InvalidArgument, offset, e.to_string()))?;
                    &compiled
                }
            };
            Ok(JsonValue::Bool(pattern.is_match(input)))
        }
        Builtin::String => Ok(match first {
            JsonValue::String(s) => JsonValue::String(s),
            other => JsonValue::String(other.to_json_string()),
        }),
        Builtin::Number => {
            let fallback = args.next();
            match &first {
                JsonValue::Null => Ok(JsonValue::Null),
                JsonValue::Number(_) => Ok(first),
                JsonValue::String(s) => match s.trim().parse::<f64>() {
                    Ok(n) if n.is_finite() => Ok(JsonValue::number(n)),
                    _ => fallback.ok_or_else(|| {
                        RawError::new(
                            RuntimeErrorKind::InvalidArgument,
                            offset,
                            format!("number() cannot parse {s:?}"),
                        )
                    }),
                },
                other => fallback.ok_or_else(|| type_err(other)),
            }
        }
        Builtin::Size => match &first {
            JsonValue::Null => Ok(JsonValue::Null),
            JsonValue::String(s) => Ok(JsonValue::from(s.chars().count() as u64)),
            JsonValue::Array(a) => Ok(JsonValue::from(a.len() as u64)),
            JsonValue::Object(o) => Ok(JsonValue::from(o.len() as u64)),
            other => Err(type_err(other)),
        },
        Builtin::Contains => {
            let haystack = args.next().unwrap_or_default();
            Ok(JsonValue::Bool(match &haystack {
                JsonValue::Null => false,
                JsonValue::Array(items) => items.contains(&first),
                JsonValue::Object(map) => first.as_str().is_some_and(|k| map.contains_key(k)),
                JsonValue::String(s) => match &first {
                    JsonValue::String(needle) => s.contains(needle.as_str()),
                    other => s.contains(&other.to_json_string()),
                },
                other => return Err(type_err(other)),
            }))
        }
        Builtin::IsObject => Ok(JsonValue::Bool(matches!(first, JsonValue::Object(_)))),
        Builtin::IsArray => Ok(JsonValue::Bool(matches!(first, JsonValue::Array(_)))),
        Builtin::IsString => Ok(JsonValue::Bool(matches!(first, JsonValue::String(_)))),
        Builtin::IsNumber => Ok(JsonValue::Bool(matches!(first, JsonValue::Number(_)))),
        Builtin::IsBoolean => Ok(JsonValue::Bool(matches!(first, JsonValue::Bool(_)))),
        Builtin::UuidValidate => Ok(JsonValue::Bool(match &first {
            // hyphenated form only; `parse_str` alone would also accept braces and urns
            JsonValue::String(s) => s.len() == 36 && uuid::Uuid::try_parse(s).is_ok(),
            _ => false,
        })),
    }
}
