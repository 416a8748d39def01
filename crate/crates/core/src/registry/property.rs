use indexmap::IndexMap;

use crate::json::{JsonPath, JsonValue, Map};
use crate::pattern::Pattern;

use super::id::SchemaId;

/// Property name → definition, in authoring order.
pub type Properties = IndexMap<String, PropertyDef>;

/// Name of the reserved free-form event subtree.
pub const CUSTOM: &str = "custom";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyDef {
    pub description: Option<String>,
    pub ty: PropertyType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyType {
    String { pattern: Option<Pattern> },
    Number,
    /// Non-empty list of allowed scalar values.
    Enum(Vec<JsonValue>),
    Array(Box<PropertyDef>),
    /// Reference to a pinned object schema version.
    Ref(SchemaId),
    /// Inline object with its own properties and required list.
    Compound { properties: Properties, required: Vec<String> },
}

/// A malformed schema document; `at` is a JSON pointer into the document.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("at '{at}': {message}")]
pub struct SchemaError {
    pub at: String,
    pub message: String,
}

impl SchemaError {
    pub(crate) fn new(at: &JsonPath, message: impl Into<String>) -> Self {
        SchemaError {
            at: at.to_string(),
            message: message.into(),
        }
    }
}

fn check_keys(obj: &Map, allowed: &[&str], at: &JsonPath) -> Result<(), SchemaError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(SchemaError::new(&at.key(k.as_str()), format!("unknown keyword '{k}'"))),
        None => Ok(()),
    }
}

fn string_field(obj: &Map, key: &str, at: &JsonPath) -> Result<Option<String>, SchemaError> {
    match obj.get(key) {
        None => Ok(None),
        Some(JsonValue::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(SchemaError::new(
            &at.key(key),
            format!("'{key}' must be a string, not {}", other.type_name()),
        )),
    }
}

pub(crate) fn parse_required(value: Option<&JsonValue>, at: &JsonPath) -> Result<Vec<String>, SchemaError> {
    let Some(value) = value else {
        return Ok(Vec::new());
    };
    let at = at.key("required");
    let items = value
        .as_array()
        .ok_or_else(|| SchemaError::new(&at, "'required' must be an array of names"))?;
    let mut names: Vec<String> = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let name = item
            .as_str()
            .ok_or_else(|| SchemaError::new(&at.index(i), "required names must be strings"))?;
        if names.iter().any(|n| n == name) {
            return Err(SchemaError::new(&at.index(i), format!("'{name}' listed twice")));
        }
        names.push(name.to_string());
    }
    Ok(names)
}

pub(crate) fn parse_properties(value: Option<&JsonValue>, at: &JsonPath) -> Result<Properties, SchemaError> {
    let at = at.key("properties");
    let obj = value
        .ok_or_else(|| SchemaError::new(&at, "'properties' is missing"))?
        .as_object()
        .ok_or_else(|| SchemaError::new(&at, "'properties' must be an object"))?;
    let mut props = Properties::with_capacity(obj.len());
    for (name, def) in obj {
        if name.is_empty() {
            return Err(SchemaError::new(&at, "empty property name"));
        }
        props.insert(name.clone(), PropertyDef::from_json(def, &at.key(name.as_str()))?);
    }
    Ok(props)
}

impl PropertyDef {
    pub fn new(ty: PropertyType) -> Self {
        PropertyDef { description: None, ty }
    }

    pub fn from_json(value: &JsonValue, at: &JsonPath) -> Result<Self, SchemaError> {
        let obj = value
            .as_object()
            .ok_or_else(|| SchemaError::new(at, "a property definition must be an object"))?;
        let description = string_field(obj, "description", at)?;
        let ty = if let Some(target) = obj.get("$ref") {
            check_keys(obj, &["$ref", "description"], at)?;
            let text = target
                .as_str()
                .ok_or_else(|| SchemaError::new(&at.key("$ref"), "'$ref' must be a schema id string"))?;
            PropertyType::Ref(SchemaId::parse(text).map_err(|e| SchemaError::new(&at.key("$ref"), e.to_string()))?)
        } else if let Some(values) = obj.get("enum") {
            check_keys(obj, &["enum", "description"], at)?;
            let at = at.key("enum");
            let values = values
                .as_array()
                .ok_or_else(|| SchemaError::new(&at, "'enum' must be an array"))?;
            if values.is_empty() {
                return Err(SchemaError::new(&at, "'enum' must list at least one value"));
            }
            for (i, v) in values.iter().enumerate() {
                if !matches!(v, JsonValue::String(_) | JsonValue::Number(_)) {
                    return Err(SchemaError::new(&at.index(i), "enum values must be strings or numbers"));
                }
                if values[..i].contains(v) {
                    return Err(SchemaError::new(&at.index(i), format!("enum value {v} listed twice")));
                }
            }
            PropertyType::Enum(values.clone())
        } else {
            let ty = string_field(obj, "type", at)?
                .ok_or_else(|| SchemaError::new(at, "expected one of 'type', 'enum' or '$ref'"))?;
            match ty.as_str() {
                "string" => {
                    check_keys(obj, &["type", "description", "pattern"], at)?;
                    let pattern = match string_field(obj, "pattern", at)? {
                        Some(src) => {
                            Some(Pattern::new(&src).map_err(|e| SchemaError::new(&at.key("pattern"), e.to_string()))?)
                        }
                        None => None,
                    };
                    PropertyType::String { pattern }
                }
                "number" => {
                    check_keys(obj, &["type", "description"], at)?;
                    PropertyType::Number
                }
                "array" => {
                    check_keys(obj, &["type", "description", "items"], at)?;
                    let items = obj
                        .get("items")
                        .ok_or_else(|| SchemaError::new(at, "an array property needs 'items'"))?;
                    PropertyType::Array(Box::new(PropertyDef::from_json(items, &at.key("items"))?))
                }
                "object" => {
                    check_keys(obj, &["type", "description", "properties", "required"], at)?;
                    let properties = parse_properties(obj.get("properties"), at)?;
                    let required = parse_required(obj.get("required"), at)?;
                    check_required_declared(&properties, &required, at)?;
                    PropertyType::Compound { properties, required }
                }
                other => {
                    return Err(SchemaError::new(
                        &at.key("type"),
                        format!("unsupported type '{other}'"),
                    ))
                }
            }
        };
        Ok(PropertyDef { description, ty })
    }

    pub fn to_json(&self) -> JsonValue {
        let mut obj = Map::new();
        match &self.ty {
            PropertyType::String { pattern } => {
                obj.insert("type".into(), "string".into());
                if let Some(p) = pattern {
                    obj.insert("pattern".into(), p.source().into());
                }
            }
            PropertyType::Number => {
                obj.insert("type".into(), "number".into());
            }
            PropertyType::Enum(values) => {
                obj.insert("enum".into(), JsonValue::Array(values.clone()));
            }
            PropertyType::Array(items) => {
                obj.insert("type".into(), "array".into());
                obj.insert("items".into(), items.to_json());
            }
            PropertyType::Ref(id) => {
                obj.insert("$ref".into(), id.to_string().into());
            }
            PropertyType::Compound { properties, required } => {
                obj.insert("type".into(), "object".into());
                obj.insert("properties".into(), properties_to_json(properties));
                if !required.is_empty() {
                    obj.insert("required".into(), required_to_json(required));
                }
            }
        }
        if let Some(d) = &self.description {
            obj.insert("description".into(), d.as_str().into());
        }
        JsonValue::Object(obj)
    }

    /// Structural equality that ignores descriptions at every level.
    pub fn same_definition(&self, other: &PropertyDef) -> bool {
        match (&self.ty, &other.ty) {
            (PropertyType::Array(a), PropertyType::Array(b)) => a.same_definition(b),
            (
                PropertyType::Compound {
                    properties: pa,
                    required: ra,
                },
                PropertyType::Compound {
                    properties: pb,
                    required: rb,
                },
            ) => {
                same_required(ra, rb)
                    && pa.len() == pb.len()
                    && pa.iter().all(|(k, a)| pb.get(k).is_some_and(|b| a.same_definition(b)))
            }
            (a, b) => a == b,
        }
    }

    /// Every schema id this definition references, depth first.
    pub fn refs(&self) -> Vec<&SchemaId> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a SchemaId>) {
        match &self.ty {
            PropertyType::Ref(id) => out.push(id),
            PropertyType::Array(items) => items.collect_refs(out),
            PropertyType::Compound { properties, .. } => {
                for p in properties.values() {
                    p.collect_refs(out);
                }
            }
            _ => {}
        }
    }
}

pub(crate) fn same_required(a: &[String], b: &[String]) -> bool {
    a.len() == b.len() && a.iter().all(|n| b.contains(n))
}

pub(crate) fn check_required_declared(properties: &Properties, required: &[String], at: &JsonPath) -> Result<(), SchemaError> {
    match required.iter().find(|r| !properties.contains_key(r.as_str())) {
        Some(name) => Err(SchemaError::new(
            &at.key("required"),
            format!("required property '{name}' is not declared"),
        )),
        None => Ok(()),
    }
}

pub fn properties_to_json(properties: &Properties) -> JsonValue {
    JsonValue::Object(properties.iter().map(|(k, v)| (k.clone(), v.to_json())).collect())
}

pub(crate) fn required_to_json(required: &[String]) -> JsonValue {
    JsonValue::Array(required.iter().map(|r| JsonValue::from(r.as_str())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json;

    fn parse(v: JsonValue) -> Result<PropertyDef, SchemaError> {
        PropertyDef::from_json(&v, &JsonPath::root())
    }

    #[test]
    fn every_type_round_trips() {
        let docs = [
            json!({"type": "string", "pattern": "^a+$", "description": "d"}),
            json!({"type": "number"}),
            json!({"enum": ["User", "Device"]}),
            json!({"type": "array", "items": {"type": "string"}}),
            json!({"$ref": "https://h/schemas/object/actor/0"}),
            json!({"type": "object", "properties": {"a": {"type": "number"}}, "required": ["a"]}),
        ];
        for doc in docs {
            let def = parse(doc.clone()).unwrap();
            assert_eq!(def.to_json(), doc);
        }
    }

    #[test]
    fn strictness() {
        assert!(parse(json!({"type": "number", "pattern": "x"})).is_err());
        assert!(parse(json!({"type": "integer"})).is_err());
        assert!(parse(json!({"enum": []})).is_err());
        assert!(parse(json!({"enum": [true]})).is_err());
        assert!(parse(json!({"type": "array"})).is_err());
        assert!(parse(json!({"$ref": "nope"})).is_err());
        assert!(parse(json!({"type": "string", "pattern": "(a)\\1"})).is_err());
        let e = parse(json!({"type": "object", "properties": {}, "required": ["x"]})).unwrap_err();
        assert!(e.message.contains("'x'"));
        let e = parse(json!({"type": "object", "properties": {"a": {"type": "string", "format": "email"}}})).unwrap_err();
        assert_eq!(e.at, "/properties/a/format");
    }

    #[test]
    fn same_definition_ignores_descriptions() {
        let a = parse(json!({"type": "object", "properties": {"x": {"type": "number", "description": "one"}}})).unwrap();
        let b = parse(json!({"type": "object", "properties": {"x": {"type": "number"}}})).unwrap();
        assert!(a.same_definition(&b));
        assert_ne!(a, b);
        let c = parse(json!({"type": "object", "properties": {"x": {"type": "number"}}, "required": ["x"]})).unwrap();
        assert!(!b.same_definition(&c));
    }
}
