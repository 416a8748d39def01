//! Event validation with exhaustive mismatch reporting.
//!
//! Mismatches come out in document order of the event; missing required
//! properties of an object follow the mismatches found inside it.

use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::json::{JsonPath, JsonValue, Map};
use crate::registry::{
    Properties, PropertyDef, PropertyType, Registry, RegistryError, ResolvedSchema, SchemaKind, CUSTOM,
};

/// Name of the event property that declares the event's schema id.
pub const SCHEMA_PROPERTY: &str = "schema";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MismatchKind {
    MissingRequired,
    WrongType,
    PatternFailed,
    UnknownProperty,
    EnumViolation,
    CustomNonString,
    BadSchemaDeclaration,
}

impl MismatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MismatchKind::MissingRequired => "missing-required",
            MismatchKind::WrongType => "wrong-type",
            MismatchKind::PatternFailed => "pattern-failed",
            MismatchKind::UnknownProperty => "unknown-property",
            MismatchKind::EnumViolation => "enum-violation",
            MismatchKind::CustomNonString => "custom-nonstring",
            MismatchKind::BadSchemaDeclaration => "bad-schema-declaration",
        }
    }
}

impl fmt::Display for MismatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for MismatchKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub path: JsonPath,
    pub kind: MismatchKind,
    pub expected: String,
    /// The offending value, abbreviated when large; `null` when absent.
    pub found: JsonValue,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_root() { "/".to_string() } else { self.path.to_string() };
        write!(f, "{} at {path}: expected {}, found {}", self.kind, self.expected, self.found)
    }
}

impl Mismatch {
    pub fn to_json(&self) -> JsonValue {
        let mut m = Map::new();
        m.insert("path".into(), self.path.to_string().into());
        m.insert("kind".into(), self.kind.as_str().into());
        m.insert("expected".into(), self.expected.as_str().into());
        m.insert("found".into(), self.found.clone());
        JsonValue::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationTarget {
    /// The schema named by the event's own `schema` property.
    SelfDeclared,
    Explicit { title: String, version: u32 },
    /// Latest version of a title; `None` takes the title the event declares.
    Latest(Option<String>),
}

const EXCERPT_LIMIT: usize = 80;

fn excerpt(v: &JsonValue) -> JsonValue {
    match v {
        JsonValue::Array(_) | JsonValue::Object(_) => {
            let text = v.to_json_string();
            if text.len() <= EXCERPT_LIMIT {
                v.clone()
            } else {
                let cut = (0..=EXCERPT_LIMIT).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
                JsonValue::String(format!("{}...", &text[..cut]))
            }
        }
        JsonValue::String(s) if s.len() > EXCERPT_LIMIT => {
            let cut = (0..=EXCERPT_LIMIT).rev().find(|&i| s.is_char_boundary(i)).unwrap_or(0);
            JsonValue::String(format!("{}...", &s[..cut]))
        }
        _ => v.clone(),
    }
}

/// Picks the schema an event is checked against. A missing or unknown
/// self-declaration is returned as a mismatch.
pub fn target_schema(
    registry: &Registry,
    event: &JsonValue,
    target: &ValidationTarget,
) -> Result<Result<Arc<ResolvedSchema>, Mismatch>, RegistryError> {
    let declared = || -> Result<Arc<crate::registry::SchemaDoc>, Mismatch> {
        let path = JsonPath::root().key(SCHEMA_PROPERTY);
        let bad = |found: &JsonValue| Mismatch {
            path: path.clone(),
            kind: MismatchKind::BadSchemaDeclaration,
            expected: "the id of a registered event schema".into(),
            found: excerpt(found),
        };
        let value = event.get(SCHEMA_PROPERTY).unwrap_or(&JsonValue::Null);
        let doc = value.as_str().and_then(|url| registry.doc_by_url(url)).ok_or_else(|| bad(value))?;
        if doc.kind() != SchemaKind::Event {
            return Err(bad(value));
        }
        Ok(doc.clone())
    };
    Ok(match target {
        ValidationTarget::SelfDeclared => match declared() {
            Ok(doc) => Ok(registry.resolve_id(&doc.id)?),
            Err(m) => Err(m),
        },
        ValidationTarget::Explicit { title, version } => Ok(registry.resolve(title, *version)?),
        ValidationTarget::Latest(Some(title)) => Ok(registry.resolve(title, registry.latest_version(title)?)?),
        ValidationTarget::Latest(None) => match declared() {
            Ok(doc) => Ok(registry.resolve(&doc.title, registry.latest_version(&doc.title)?)?),
            Err(m) => Err(m),
        },
    })
}

/// Every mismatch between `event` and the targeted schema; empty means valid.
pub fn validate(registry: &Registry, event: &JsonValue, target: &ValidationTarget) -> Result<Vec<Mismatch>, RegistryError> {
    Ok(match target_schema(registry, event, target)? {
        Ok(schema) => validate_resolved(registry, &schema, event),
        Err(m) => vec![m],
    })
}

/// Checks `value` against an already resolved schema.
pub fn validate_resolved(registry: &Registry, schema: &ResolvedSchema, value: &JsonValue) -> Vec<Mismatch> {
    let mut v = Walker {
        registry,
        out: Vec::new(),
    };
    v.object(
        &schema.properties,
        &schema.required,
        value,
        &JsonPath::root(),
        schema.kind() == SchemaKind::Event,
        &format!("object ({})", schema.id),
    );
    v.out
}

/// Checks one value against one property definition.
pub fn validate_property(registry: &Registry, def: &PropertyDef, value: &JsonValue) -> Vec<Mismatch> {
    let mut v = Walker {
        registry,
        out: Vec::new(),
    };
    v.value(def, value, &JsonPath::root());
    v.out
}

struct Walker<'r> {
    registry: &'r Registry,
    out: Vec<Mismatch>,
}

impl Walker<'_> {
    fn push(&mut self, path: &JsonPath, kind: MismatchKind, expected: impl Into<String>, found: &JsonValue) {
        self.out.push(Mismatch {
            path: path.clone(),
            kind,
            expected: expected.into(),
            found: excerpt(found),
        });
    }

    fn object(
        &mut self,
        properties: &Properties,
        required: &[String],
        value: &JsonValue,
        path: &JsonPath,
        allow_custom: bool,
        what: &str,
    ) {
        let Some(obj) = value.as_object() else {
            self.push(path, MismatchKind::WrongType, what, value);
            return;
        };
        for (key, v) in obj {
            let at = path.key(key.as_str());
            if allow_custom && key == CUSTOM {
                self.custom(v, &at, true);
            } else if let Some(def) = properties.get(key) {
                self.value(def, v, &at);
            } else {
                self.push(&at, MismatchKind::UnknownProperty, "no such property", v);
            }
        }
        for name in required {
            if !obj.contains_key(name) {
                self.push(
                    &path.key(name.as_str()),
                    MismatchKind::MissingRequired,
                    "a required property",
                    &JsonValue::Null,
                );
            }
        }
    }

    /// `custom` is an object whose leaves are all strings.
    fn custom(&mut self, value: &JsonValue, path: &JsonPath, top: bool) {
        match value {
            JsonValue::Object(obj) => {
                for (k, v) in obj {
                    self.custom(v, &path.key(k.as_str()), false);
                }
            }
            JsonValue::String(_) if !top => {}
            other => {
                let expected = if top { "an object of string values" } else { "a string" };
                self.push(path, MismatchKind::CustomNonString, expected, other);
            }
        }
    }

    fn value(&mut self, def: &PropertyDef, value: &JsonValue, path: &JsonPath) {
        match &def.ty {
            PropertyType::String { pattern } => match value {
                JsonValue::String(s) => {
                    if let Some(p) = pattern {
                        if !p.is_match(s) {
                            self.push(path, MismatchKind::PatternFailed, format!("string matching {}", p.source()), value);
                        }
                    }
                }
                _ => self.push(path, MismatchKind::WrongType, "string", value),
            },
            PropertyType::Number => {
                if !matches!(value, JsonValue::Number(_)) {
                    self.push(path, MismatchKind::WrongType, "number", value);
                }
            }
            PropertyType::Enum(values) => {
                if !values.contains(value) {
                    let list: Vec<String> = values.iter().map(|v| v.to_json_string()).collect();
                    self.push(path, MismatchKind::EnumViolation, format!("one of [{}]", list.join(", ")), value);
                }
            }
            PropertyType::Array(items) => match value {
                JsonValue::Array(elems) => {
                    for (i, e) in elems.iter().enumerate() {
                        self.value(items, e, &path.index(i));
                    }
                }
                _ => self.push(path, MismatchKind::WrongType, "array", value),
            },
            PropertyType::Ref(id) => {
                let schema = self
                    .registry
                    .resolve_id(id)
                    .expect("registry invariants guarantee references resolve");
                self.object(
                    &schema.properties,
                    &schema.required,
                    value,
                    path,
                    false,
                    &format!("object ({id})"),
                );
            }
            PropertyType::Compound { properties, required } => {
                self.object(properties, required, value, path, false, "object");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json;
    use std::path::Path;

    fn registry() -> Registry {
        Registry::load_repo(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/repo")).unwrap()
    }

    fn view_item() -> JsonValue {
        json!({
            "schema": "https://schemas.example.org/schemas/event/view-item/2",
            "@id": "6f1c2a9e-3b4d-4e5f-8a7b-1c2d3e4f5a6b",
            "@type": "View",
            "actor": {"@id": "a"},
            "object": {"@id": "o", "category": "c"},
            "published": "2019-03-14T09:26:53Z"
        })
    }

    fn kinds(m: &[Mismatch]) -> Vec<(String, &'static str)> {
        m.iter().map(|m| (m.path.to_string(), m.kind.as_str())).collect()
    }

    #[test]
    fn valid_event_has_no_mismatches() {
        let r = registry();
        assert!(validate(&r, &view_item(), &ValidationTarget::SelfDeclared).unwrap().is_empty());
    }

    #[test]
    fn reports_everything_in_document_order() {
        let r = registry();
        let mut e = view_item();
        let m = e.as_object_mut().unwrap();
        m.shift_remove("published");
        m.insert("@type".into(), json!("Look"));
        m.insert("zzz".into(), json!(1));
        m.insert("custom".into(), json!({"experiment": 3, "ok": "x"}));
        m.insert("object".into(), json!({"@id": 5, "price": {"amount": "1"}}));
        let got = kinds(&validate(&r, &e, &ValidationTarget::SelfDeclared).unwrap());
        assert_eq!(
            got,
            [
                ("/@type".to_string(), "enum-violation"),
                ("/object/@id".into(), "wrong-type"),
                ("/object/price/amount".into(), "wrong-type"),
                ("/object/category".into(), "missing-required"),
                ("/zzz".into(), "unknown-property"),
                ("/custom/experiment".into(), "custom-nonstring"),
                ("/published".into(), "missing-required"),
            ]
        );
    }

    #[test]
    fn custom_must_be_an_object_of_strings() {
        let r = registry();
        let mut e = view_item();
        e.as_object_mut().unwrap().insert("custom".into(), json!("flat"));
        let got = kinds(&validate(&r, &e, &ValidationTarget::SelfDeclared).unwrap());
        assert_eq!(got, [("/custom".to_string(), "custom-nonstring")]);
        // custom is only allowed at the event's top level
        e.as_object_mut().unwrap().insert("custom".into(), json!({"a": {"b": "c"}}));
        e.as_object_mut().unwrap().insert("object".into(), json!({"@id": "o", "category": "c", "custom": {}}));
        let got = kinds(&validate(&r, &e, &ValidationTarget::SelfDeclared).unwrap());
        assert_eq!(got, [("/object/custom".to_string(), "unknown-property")]);
    }

    #[test]
    fn bad_declarations_and_explicit_targets() {
        let r = registry();
        let mut e = view_item();
        e.as_object_mut()
            .unwrap()
            .insert("schema".into(), json!("https://schemas.example.org/schemas/object/actor/0"));
        let got = kinds(&validate(&r, &e, &ValidationTarget::SelfDeclared).unwrap());
        assert_eq!(got, [("/schema".to_string(), "bad-schema-declaration")]);
        e.as_object_mut().unwrap().shift_remove("schema");
        assert_eq!(validate(&r, &e, &ValidationTarget::Latest(None)).unwrap().len(), 1);
        let explicit = ValidationTarget::Explicit {
            title: "View Item".into(),
            version: 2,
        };
        let got = kinds(&validate(&r, &e, &explicit).unwrap());
        assert_eq!(got, [("/schema".to_string(), "missing-required")]);
        let unknown = ValidationTarget::Latest(Some("Nope".into()));
        assert!(validate(&r, &e, &unknown).is_err());
    }

    #[test]
    fn patterns_and_excerpts() {
        let r = registry();
        let mut e = view_item();
        e.as_object_mut().unwrap().insert("@id".into(), json!("x".repeat(200)));
        let m = validate(&r, &e, &ValidationTarget::SelfDeclared).unwrap();
        assert_eq!(m[0].kind, MismatchKind::PatternFailed);
        assert!(m[0].found.as_str().unwrap().len() < 100);
        assert!(m[0].to_string().starts_with("pattern-failed at /@id"));
    }

    #[test]
    fn tombstones_accept_nothing_but_the_empty_object() {
        let r = registry();
        let schema = r.resolve("Like Item", 2).unwrap();
        assert!(validate_resolved(&r, &schema, &json!({})).is_empty());
        assert_eq!(validate_resolved(&r, &schema, &json!({"a": 1}))[0].kind, MismatchKind::UnknownProperty);
    }
}
