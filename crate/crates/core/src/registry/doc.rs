use crate::json::{parse_json, JsonPath, JsonValue, Map};

use super::id::{slugify, SchemaId, SchemaKind};
use super::property::{
    check_required_declared, parse_properties, parse_required, properties_to_json, required_to_json, same_required,
    Properties, SchemaError, CUSTOM,
};

/// One version of one schema, as stored in the repository.
#[derive(Debug, Clone)]
pub struct SchemaDoc {
    pub id: SchemaId,
    pub title: String,
    pub description: Option<String>,
    /// The pinned `allOf` parent.
    pub parent: Option<SchemaId>,
    pub properties: Properties,
    pub required: Vec<String>,
    raw: String,
}

impl PartialEq for SchemaDoc {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.title == other.title && self.same_body(other) && self.description == other.description
    }
}

impl SchemaDoc {
    /// Builds a document and renders its canonical file text.
    pub fn new(
        id: SchemaId,
        title: impl Into<String>,
        description: Option<String>,
        parent: Option<SchemaId>,
        properties: Properties,
        required: Vec<String>,
    ) -> Self {
        let mut doc = SchemaDoc {
            id,
            title: title.into(),
            description,
            parent,
            properties,
            required,
            raw: String::new(),
        };
        doc.raw = doc.to_json().to_pretty_string() + "\n";
        doc
    }

    /// A tombstone: same title, no parent, no properties.
    pub fn tombstone(id: SchemaId, title: impl Into<String>) -> Self {
        SchemaDoc::new(id, title, None, None, Properties::new(), Vec::new())
    }

    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let root = JsonPath::root();
        let value = parse_json(text).map_err(|e| SchemaError::new(&root, e.to_string()))?;
        let mut doc = SchemaDoc::from_json(&value)?;
        doc.raw = text.to_string();
        Ok(doc)
    }

    pub fn from_json(value: &JsonValue) -> Result<Self, SchemaError> {
        let root = JsonPath::root();
        let obj = value
            .as_object()
            .ok_or_else(|| SchemaError::new(&root, "a schema must be a JSON object"))?;
        const KEYS: &[&str] = &["id", "title", "description", "allOf", "properties", "required"];
        if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(SchemaError::new(&root.key(k.as_str()), format!("unknown keyword '{k}'")));
        }
        let text = |key: &str| -> Result<String, SchemaError> {
            obj.get(key)
                .and_then(JsonValue::as_str)
                .map(str::to_string)
                .ok_or_else(|| SchemaError::new(&root.key(key), format!("'{key}' must be a string")))
        };
        let id_text = text("id")?;
        let id = SchemaId::parse(&id_text).map_err(|e| SchemaError::new(&root.key("id"), e.to_string()))?;
        let title = text("title")?;
        if slugify(&title) != id.slug {
            return Err(SchemaError::new(
                &root.key("title"),
                format!("title '{title}' does not match slug '{}' of the id", id.slug),
            ));
        }
        let description = match obj.get("description") {
            None => None,
            Some(_) => Some(text("description")?),
        };
        let parent = match obj.get("allOf") {
            None => None,
            Some(v) => Some(parse_all_of(v, &root.key("allOf"))?),
        };
        let properties = parse_properties(obj.get("properties"), &root)?;
        if properties.contains_key(CUSTOM) {
            return Err(SchemaError::new(
                &root.key("properties").key(CUSTOM),
                "'custom' is reserved and cannot be declared",
            ));
        }
        let required = parse_required(obj.get("required"), &root)?;
        if parent.is_none() {
            check_required_declared(&properties, &required, &root)?;
        }
        let doc = SchemaDoc::new(id, title, description, parent, properties, required);
        Ok(doc)
    }

    pub fn to_json(&self) -> JsonValue {
        let mut obj = Map::new();
        obj.insert("id".into(), self.id.to_string().into());
        obj.insert("title".into(), self.title.as_str().into());
        if let Some(d) = &self.description {
            obj.insert("description".into(), d.as_str().into());
        }
        if let Some(p) = &self.parent {
            obj.insert("allOf".into(), p.to_string().into());
        }
        obj.insert("properties".into(), properties_to_json(&self.properties));
        if !self.required.is_empty() {
            obj.insert("required".into(), required_to_json(&self.required));
        }
        JsonValue::Object(obj)
    }

    pub fn kind(&self) -> SchemaKind {
        self.id.kind
    }

    pub fn version(&self) -> u32 {
        self.id.version
    }

    /// The file text this document was loaded from, or its canonical rendering.
    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn is_tombstone(&self) -> bool {
        self.properties.is_empty() && self.parent.is_none()
    }

    /// Equal parent, properties and required list; descriptions ignored.
    pub fn same_body(&self, other: &SchemaDoc) -> bool {
        self.parent == other.parent
            && same_required(&self.required, &other.required)
            && self.properties.len() == other.properties.len()
            && self
                .properties
                .iter()
                .all(|(k, a)| other.properties.get(k).is_some_and(|b| a.same_definition(b)))
    }
}

/// `"allOf"` is either an id string or `[{"$ref": id}]`.
fn parse_all_of(value: &JsonValue, at: &JsonPath) -> Result<SchemaId, SchemaError> {
    let text = match value {
        JsonValue::String(s) => s.as_str(),
        JsonValue::Array(items) => match items.as_slice() {
            [JsonValue::Object(o)] if o.len() == 1 => o
                .get("$ref")
                .and_then(JsonValue::as_str)
                .ok_or_else(|| SchemaError::new(&at.index(0), "expected {\"$ref\": <id>}"))?,
            _ => return Err(SchemaError::new(at, "allOf must hold exactly one {\"$ref\": <id>}")),
        },
        _ => return Err(SchemaError::new(at, "allOf must be an id or [{\"$ref\": <id>}]")),
    };
    SchemaId::parse(text).map_err(|e| SchemaError::new(at, e.to_string()))
}
