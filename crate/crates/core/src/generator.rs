//! Random valid events for a schema, optionally pinned to a fixed fragment.
//!
//! A fragment assigns values to paths; containers on those paths are always
//! generated, the values are written verbatim, and the result is validated.
//! A fragment the schema cannot accept makes generation fail with
//! [`GenError::Unsatisfiable`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::json::{JsonPath, JsonValue, Map, PathStep};
use crate::pattern::{PatternError, DEFAULT_MAX_REPEAT};
use crate::registry::{Properties, PropertyDef, PropertyType, Registry, RegistryError, ResolvedSchema, SchemaKind};
use crate::validator::{validate_resolved, Mismatch, SCHEMA_PROPERTY};

pub use crate::pattern::generate_from_pattern;

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 -_";

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    pub max_array_len: usize,
    pub max_string_len: usize,
    /// Assignments that must appear verbatim; no path may prefix another.
    pub fragment: Vec<(JsonPath, JsonValue)>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            max_array_len: 3,
            max_string_len: 24,
            fragment: Vec::new(),
        }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenConfig {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("{0} is tombstoned")]
    Tombstoned(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("fragment paths {0} and {1} overlap")]
    OverlappingFragment(JsonPath, JsonPath),
    #[error("fragment cannot be embedded: {}", describe(.0))]
    Unsatisfiable(Vec<Mismatch>),
}

fn describe(mismatches: &[Mismatch]) -> String {
    mismatches.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Leaf assignments of a partial event: every non-object value with its path.
/// An empty object becomes a single assignment.
pub fn fragment_from_partial(partial: &JsonValue) -> Vec<(JsonPath, JsonValue)> {
    fn walk(v: &JsonValue, path: JsonPath, out: &mut Vec<(JsonPath, JsonValue)>) {
        match v {
            JsonValue::Object(m) if !m.is_empty() => {
                for (k, child) in m {
                    walk(child, path.key(k.as_str()), out);
                }
            }
            _ => out.push((path, v.clone())),
        }
    }
    let mut out = Vec::new();
    walk(partial, JsonPath::root(), &mut out);
    out
}

pub fn generate_valid(registry: &Registry, title: &str, version: u32, cfg: &GenConfig) -> Result<JsonValue, GenError> {
    let schema = registry.resolve(title, version)?;
    generate_for(registry, &schema, cfg)
}

pub fn generate_for(registry: &Registry, schema: &ResolvedSchema, cfg: &GenConfig) -> Result<JsonValue, GenError> {
    if schema.tombstoned {
        return Err(GenError::Tombstoned(schema.id.to_string()));
    }
    for (i, (a, _)) in cfg.fragment.iter().enumerate() {
        for (b, _) in &cfg.fragment[i + 1..] {
            if a.is_prefix_of(b) || b.is_prefix_of(a) {
                return Err(GenError::OverlappingFragment(a.clone(), b.clone()));
            }
        }
    }
    let mut g = Generator {
        registry,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let paths: Vec<&[PathStep]> = cfg.fragment.iter().map(|(p, _)| p.steps()).collect();
    let mut event = g.object(&schema.properties, &schema.required, &paths)?;
    if schema.kind() == SchemaKind::Event && schema.properties.contains_key(SCHEMA_PROPERTY) {
        if let JsonValue::Object(m) = &mut event {
            m.insert(SCHEMA_PROPERTY.to_string(), schema.id.to_string().into());
        }
    }
    if cfg.fragment.is_empty() {
        return Ok(event);
    }
    let mut misplaced = Vec::new();
    for (path, value) in &cfg.fragment {
        if let Err(m) = place(&mut event, path, value.clone()) {
            misplaced.push(m);
        }
    }
    if !misplaced.is_empty() {
        return Err(GenError::Unsatisfiable(misplaced));
    }
    let mismatches = validate_resolved(registry, schema, &event);
    if mismatches.is_empty() {
        Ok(event)
    } else {
        Err(GenError::Unsatisfiable(mismatches))
    }
}

/// Writes `value` at `path`, creating missing containers on the way.
fn place(root: &mut JsonValue, path: &JsonPath, value: JsonValue) -> Result<(), Mismatch> {
    let mut cur = root;
    let mut at = JsonPath::root();
    for step in path.steps() {
        let crossing = |found: &JsonValue, at: &JsonPath, expected: &str| Mismatch {
            path: at.clone(),
            kind: crate::validator::MismatchKind::WrongType,
            expected: format!("{expected} on the fragment path"),
            found: found.clone(),
        };
        match step {
            PathStep::Key(k) => {
                if cur.is_null() {
                    *cur = JsonValue::Object(Map::new());
                }
                let JsonValue::Object(m) = cur else {
                    return Err(crossing(cur, &at, "an object"));
                };
                at = at.key(k.as_str());
                cur = m.entry(k.clone()).or_insert(JsonValue::Null);
            }
            PathStep::Index(i) => {
                if cur.is_null() {
                    *cur = JsonValue::Array(Vec::new());
                }
                let JsonValue::Array(items) = cur else {
                    return Err(crossing(cur, &at, "an array"));
                };
                if items.len() <= *i {
                    items.resize(*i + 1, JsonValue::Null);
                }
                at = at.index(*i);
                cur = &mut items[*i];
            }
        }
    }
    *cur = value;
    Ok(())
}

struct Generator<'a> {
    registry: &'a Registry,
    cfg: &'a GenConfig,
    rng: ChaCha8Rng,
}

/// Fragment path suffixes that continue below the step `step`.
fn below<'p>(paths: &[&'p [PathStep]], step: &PathStep) -> Vec<&'p [PathStep]> {
    paths
        .iter()
        .filter(|p| p.first() == Some(step))
        .map(|p| &p[1..])
        .collect()
}

impl Generator<'_> {
    fn object(&mut self, properties: &Properties, required: &[String], paths: &[&[PathStep]]) -> Result<JsonValue, GenError> {
        let mut out = Map::new();
        for (name, def) in properties {
            let sub = below(paths, &PathStep::Key(name.clone()));
            let include = self.rng.random_bool(0.5) || required.contains(name) || !sub.is_empty();
            if include {
                let value = self.value(def, &sub)?;
                out.insert(name.clone(), value);
            }
        }
        Ok(JsonValue::Object(out))
    }

    fn value(&mut self, def: &PropertyDef, paths: &[&[PathStep]]) -> Result<JsonValue, GenError> {
        Ok(match &def.ty {
            PropertyType::String { pattern: Some(p) } => JsonValue::String(p.generate(&mut self.rng, DEFAULT_MAX_REPEAT)?),
            PropertyType::String { pattern: None } => {
                let len = self.rng.random_range(0..=self.cfg.max_string_len);
                let s: String = (0..len)
                    .map(|_| ALPHABET[self.rng.random_range(0..ALPHABET.len())] as char)
                    .collect();
                JsonValue::String(s)
            }
            PropertyType::Number => {
                if self.rng.random_bool(0.5) {
                    JsonValue::number(self.rng.random_range(0..10_000) as f64)
                } else {
                    JsonValue::number(self.rng.random_range(-1000.0..1000.0))
                }
            }
            PropertyType::Enum(values) => values[self.rng.random_range(0..values.len())].clone(),
            PropertyType::Array(items) => {
                // arrays reach far enough to hold every pinned index
                let min = paths
                    .iter()
                    .filter_map(|p| match p.first() {
                        Some(PathStep::Index(i)) => Some(i + 1),
                        _ => None,
                    })
                    .max()
                    .unwrap_or(0);
                let len = self.rng.random_range(0..=self.cfg.max_array_len).max(min);
                let mut out = Vec::with_capacity(len);
                for i in 0..len {
                    let sub = below(paths, &PathStep::Index(i));
                    out.push(self.value(items, &sub)?);
                }
                JsonValue::Array(out)
            }
            PropertyType::Ref(id) => {
                let schema = self.registry.resolve_id(id)?;
                self.object(&schema.properties, &schema.required, paths)?
            }
            PropertyType::Compound { properties, required } => self.object(properties, required, paths)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json;

    #[test]
    fn partial_events_flatten_to_leaves() {
        let frag = fragment_from_partial(&json!({"actor": {"spt:userId": "x", "tags": [1]}, "e": {}}));
        let paths: Vec<String> = frag.iter().map(|(p, _)| p.to_string()).collect();
        assert_eq!(paths, ["/actor/spt:userId", "/actor/tags", "/e"]);
    }

    #[test]
    fn place_creates_containers_and_reports_crossings() {
        let mut v = json!({"a": 1});
        place(&mut v, &"/b/c".parse().unwrap(), json!(2)).unwrap();
        place(&mut v, &"/d/1".parse().unwrap(), json!(3)).unwrap();
        assert_eq!(v, json!({"a": 1, "b": {"c": 2}, "d": [null, 3]}));
        assert!(place(&mut v, &"/a/x".parse().unwrap(), json!(0)).is_err());
    }

    fn registry() -> Registry {
        Registry::load_repo(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/repo")).unwrap()
    }

    #[test]
    fn same_seed_same_event() {
        let r = registry();
        let a = generate_valid(&r, "Save Search", 2, &GenConfig::with_seed(9)).unwrap();
        let b = generate_valid(&r, "Save Search", 2, &GenConfig::with_seed(9)).unwrap();
        let c = generate_valid(&r, "Save Search", 2, &GenConfig::with_seed(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(
            a.get(SCHEMA_PROPERTY).and_then(JsonValue::as_str),
            Some("https://schemas.example.org/schemas/event/save-search/2")
        );
    }

    #[test]
    fn fragments_are_embedded_or_rejected() {
        let r = registry();
        let cfg = |frag: JsonValue| GenConfig {
            fragment: fragment_from_partial(&frag),
            ..GenConfig::with_seed(4)
        };
        let ok = generate_valid(&r, "View Item", 2, &cfg(json!({"object": {"price": {"amount": 3}}}))).unwrap();
        let price = ok.get("object").and_then(|o| o.get("price")).unwrap();
        assert_eq!(price.get("amount"), Some(&json!(3)));
        let bad = generate_valid(&r, "View Item", 2, &cfg(json!({"object": {"price": 3}})));
        assert!(matches!(bad, Err(GenError::Unsatisfiable(_))));
        let tomb = generate_valid(&r, "Like Item", 2, &GenConfig::default());
        assert!(matches!(tomb, Err(GenError::Tombstoned(_))));
        let overlap = GenConfig {
            fragment: vec![("/a".parse().unwrap(), json!(1)), ("/a/b".parse().unwrap(), json!(1))],
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_valid(&r, "View Item", 2, &overlap),
            Err(GenError::OverlappingFragment(..))
        ));
    }
}
