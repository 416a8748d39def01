use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemaKind {
    Event,
    Object,
}

impl SchemaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemaKind::Event => "event",
            SchemaKind::Object => "object",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "event" => Some(SchemaKind::Event),
            "object" => Some(SchemaKind::Object),
            _ => None,
        }
    }
}

impl fmt::Display for SchemaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `https://<host>/schemas/<kind>/<slug>/<version>`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemaId {
    pub host: String,
    pub kind: SchemaKind,
    pub slug: String,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("'{text}' is not a schema id: {reason}")]
pub struct IdError {
    pub text: String,
    pub reason: &'static str,
}

impl SchemaId {
    pub fn new(host: impl Into<String>, kind: SchemaKind, slug: impl Into<String>, version: u32) -> Self {
        SchemaId {
            host: host.into(),
            kind,
            slug: slug.into(),
            version,
        }
    }

    pub fn parse(text: &str) -> Result<Self, IdError> {
        let err = |reason| IdError {
            text: text.to_string(),
            reason,
        };
        let rest = text.strip_prefix("https://").ok_or_else(|| err("expected an https:// URL"))?;
        let parts: Vec<&str> = rest.split('/').collect();
        let [host, "schemas", kind, slug, version] = parts.as_slice() else {
            return Err(err("expected https://<host>/schemas/<kind>/<slug>/<version>"));
        };
        if host.is_empty() {
            return Err(err("empty host"));
        }
        let kind = SchemaKind::parse(kind).ok_or_else(|| err("kind must be 'event' or 'object'"))?;
        if !is_slug(slug) {
            return Err(err("slug must be lowercase letters, digits and '-'"));
        }
        if version.is_empty() || !version.bytes().all(|b| b.is_ascii_digit()) || (version.len() > 1 && version.starts_with('0')) {
            return Err(err("version must be a non-negative integer"));
        }
        let version = version.parse().map_err(|_| err("version out of range"))?;
        Ok(SchemaId::new(*host, kind, *slug, version))
    }

    pub fn with_version(&self, version: u32) -> Self {
        SchemaId {
            version,
            ..self.clone()
        }
    }

    /// Path relative to the repository root: `<kind>/<slug>/<version>.json`.
    pub fn relative_path(&self) -> std::path::PathBuf {
        [self.kind.as_str(), &self.slug, &format!("{}.json", self.version)].iter().collect()
    }

    /// Path component of the URL, as served: `/schemas/<kind>/<slug>/<version>`.
    pub fn url_path(&self) -> String {
        format!("/schemas/{}/{}/{}", self.kind, self.slug, self.version)
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "https://{}{}", self.host, self.url_path())
    }
}

impl FromStr for SchemaId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemaId::parse(s)
    }
}

impl Serialize for SchemaId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SchemaId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        SchemaId::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn is_slug(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('-')
        && !s.ends_with('-')
        && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

/// "View Item" → "view-item". Runs of other characters collapse to one '-'.
pub fn slugify(title: &str) -> String {
    let mut out = String::with_capacity(title.len());
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_round_trips() {
        let text = "https://schemas.example.org/schemas/event/view-item/3";
        let id = SchemaId::parse(text).unwrap();
        assert_eq!(id.kind, SchemaKind::Event);
        assert_eq!(id.slug, "view-item");
        assert_eq!(id.version, 3);
        assert_eq!(id.to_string(), text);
        assert_eq!(id.relative_path(), std::path::Path::new("event/view-item/3.json"));
    }

    #[test]
    fn malformed_ids() {
        for bad in [
            "http://h/schemas/event/a/0",
            "https://h/schemas/thing/a/0",
            "https://h/schemas/event/A/0",
            "https://h/schemas/event/a/01",
            "https://h/schemas/event/a/-1",
            "https://h/schemas/event/a",
            "https://h/other/event/a/0",
            "https:///schemas/event/a/0",
        ] {
            assert!(SchemaId::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("View Item"), "view-item");
        assert_eq!(slugify("Click UIElement"), "click-uielement");
        assert_eq!(slugify("  Odd -- Title!"), "odd-title");
    }
}
