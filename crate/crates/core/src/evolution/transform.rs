use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::generator::{generate_valid, GenConfig};
use crate::jslt::JsltProgram;
use crate::json::JsonValue;
use crate::registry::{Registry, SchemaKind};
use crate::validator::{validate_resolved, Mismatch, SCHEMA_PROPERTY};

use super::diff::{diff, is_breaking};
use super::EvolutionError;

/// Directory below a repository root that holds transform programs, laid
/// out as `<slug>/<from>-to-<to>.jslt`.
pub const TRANSFORMS_DIR: &str = "transforms";

/// Registered transforms, keyed by title and source version.
#[derive(Debug, Clone, Default)]
pub struct TransformSet {
    steps: BTreeMap<(String, u32), Arc<JsltProgram>>,
}

impl TransformSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `<repo>/transforms`; a missing directory is an empty set.
    pub fn load(repo: &Path, registry: &Registry) -> Result<Self, EvolutionError> {
        let mut set = TransformSet::new();
        let dir = repo.join(TRANSFORMS_DIR);
        if !dir.is_dir() {
            return Ok(set);
        }
        for slug_dir in sorted_entries(&dir)? {
            if !slug_dir.is_dir() {
                continue;
            }
            let slug = slug_dir.file_name().and_then(|s| s.to_str()).unwrap_or_default();
            let title = registry
                .title_for_slug(slug)
                .ok_or_else(|| EvolutionError::BadTransformFile {
                    path: slug_dir.clone(),
                    reason: format!("no schema has slug '{slug}'"),
                })?
                .to_string();
            for file in sorted_entries(&slug_dir)? {
                if file.extension().and_then(|e| e.to_str()) != Some("jslt") {
                    continue;
                }
                let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                let (from, to) = parse_step_name(stem).ok_or_else(|| EvolutionError::BadTransformFile {
                    path: file.clone(),
                    reason: "expected a name like '1-to-2.jslt'".into(),
                })?;
                let source = fs::read_to_string(&file).map_err(|e| EvolutionError::io(&file, e))?;
                let program = JsltProgram::compile(&source).map_err(|error| EvolutionError::Compile {
                    path: file.clone(),
                    error,
                })?;
                set.register(registry, &title, from, to, program)
                    .map_err(|e| EvolutionError::BadTransformFile {
                        path: file.clone(),
                        reason: e.to_string(),
                    })?;
            }
        }
        Ok(set)
    }

    /// Adds the transform for `title` from version `from` to `to = from + 1`.
    pub fn register(
        &mut self,
        registry: &Registry,
        title: &str,
        from: u32,
        to: u32,
        program: JsltProgram,
    ) -> Result<(), EvolutionError> {
        if to != from + 1 {
            return Err(EvolutionError::NotAdjacent {
                title: title.into(),
                from,
                to,
            });
        }
        registry.doc(title, to)?;
        self.steps.insert((title.to_string(), from), Arc::new(program));
        Ok(())
    }

    pub fn get(&self, title: &str, from: u32) -> Option<&Arc<JsltProgram>> {
        self.steps.get(&(title.to_string(), from))
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(title, from)` for every registered step.
    pub fn keys(&self) -> impl Iterator<Item = (&str, u32)> {
        self.steps.keys().map(|(t, v)| (t.as_str(), *v))
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>, EvolutionError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| EvolutionError::io(dir, e))? {
        out.push(entry.map_err(|e| EvolutionError::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn parse_step_name(stem: &str) -> Option<(u32, u32)> {
    let (a, b) = stem.split_once("-to-")?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// One hop of a chain. `program` is `None` for an identity step.
#[derive(Debug, Clone)]
pub struct ChainStep {
    pub from: u32,
    pub to: u32,
    pub breaking: bool,
    pub program: Option<Arc<JsltProgram>>,
}

/// The steps that carry data of `title` from version `from` to the latest
/// version. Non-breaking steps without a registered program are identities;
/// a breaking step must have one.
#[derive(Debug, Clone)]
pub struct Chain {
    pub title: String,
    pub steps: Vec<ChainStep>,
}

pub fn compose_chain(
    registry: &Registry,
    transforms: &TransformSet,
    title: &str,
    from: u32,
) -> Result<Chain, EvolutionError> {
    let latest = registry.latest_version(title)?;
    registry.doc(title, from)?;
    let mut steps = Vec::new();
    for v in from..latest {
        let breaking = is_breaking(&diff(registry, title, v, v + 1)?);
        let program = transforms.get(title, v).cloned();
        if breaking && program.is_none() {
            return Err(EvolutionError::MissingTransform {
                title: title.into(),
                from: v,
                to: v + 1,
            });
        }
        steps.push(ChainStep {
            from: v,
            to: v + 1,
            breaking,
            program,
        });
    }
    Ok(Chain {
        title: title.into(),
        steps,
    })
}

impl Chain {
    pub fn target_version(&self) -> Option<u32> {
        self.steps.last().map(|s| s.to)
    }

    /// Runs every step. Event outputs get their `schema` rewritten to the
    /// step's target id, and each output is validated against that version
    /// unless it is a tombstone.
    pub fn apply(&self, registry: &Registry, value: &JsonValue) -> Result<JsonValue, EvolutionError> {
        let mut cur = value.clone();
        for (index, step) in self.steps.iter().enumerate() {
            if let Some(program) = &step.program {
                cur = program.evaluate(&cur).map_err(|error| EvolutionError::TransformFailed {
                    title: self.title.clone(),
                    step: index,
                    from: step.from,
                    to: step.to,
                    error,
                })?;
            }
            let schema = registry.resolve(&self.title, step.to)?;
            if schema.kind() == SchemaKind::Event {
                if let JsonValue::Object(m) = &mut cur {
                    m.insert(SCHEMA_PROPERTY.into(), schema.id.to_string().into());
                }
            }
            if !schema.tombstoned {
                let mismatches = validate_resolved(registry, &schema, &cur);
                if !mismatches.is_empty() {
                    return Err(EvolutionError::ChainInvalid {
                        title: self.title.clone(),
                        step: index,
                        from: step.from,
                        to: step.to,
                        mismatches,
                    });
                }
            }
        }
        Ok(cur)
    }
}

/// Moves an event to the latest version of the title it declares.
pub fn transform_to_latest(
    registry: &Registry,
    transforms: &TransformSet,
    event: &JsonValue,
) -> Result<JsonValue, EvolutionError> {
    let declared = event.get(SCHEMA_PROPERTY).and_then(JsonValue::as_str);
    let doc = declared
        .and_then(|url| registry.doc_by_url(url))
        .ok_or_else(|| EvolutionError::Undeclared(declared.map(str::to_string)))?;
    compose_chain(registry, transforms, &doc.title, doc.version())?.apply(registry, event)
}

/// A step whose output failed validation for a generated input.
#[derive(Debug, Clone)]
pub struct StepFailure {
    pub title: String,
    pub from: u32,
    pub to: u32,
    pub seed: u64,
    pub input: JsonValue,
    pub reason: String,
    pub mismatches: Vec<Mismatch>,
}

/// Runs every registered step of `title` on `samples` generated inputs
/// (seeds `0..samples`) and validates each output.
pub fn verify_transforms(
    registry: &Registry,
    transforms: &TransformSet,
    title: &str,
    samples: u64,
) -> Result<Vec<StepFailure>, EvolutionError> {
    let latest = registry.latest_version(title)?;
    let mut failures = Vec::new();
    for from in 0..latest {
        let Some(program) = transforms.get(title, from) else {
            continue;
        };
        if registry.doc(title, from)?.is_tombstone() {
            continue;
        }
        let chain = Chain {
            title: title.into(),
            steps: vec![ChainStep {
                from,
                to: from + 1,
                breaking: true,
                program: Some(program.clone()),
            }],
        };
        for seed in 0..samples {
            let input = generate_valid(registry, title, from, &GenConfig::with_seed(seed))?;
            if let Err(e) = chain.apply(registry, &input) {
                let mismatches = match &e {
                    EvolutionError::ChainInvalid { mismatches, .. } => mismatches.clone(),
                    _ => Vec::new(),
                };
                failures.push(StepFailure {
                    title: title.into(),
                    from,
                    to: from + 1,
                    seed,
                    input,
                    reason: e.to_string(),
                    mismatches,
                });
            }
        }
    }
    Ok(failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json;

    fn repo() -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/repo")
    }

    #[test]
    fn identity_for_additive_steps_and_programs_for_breaking_ones() {
        let r = Registry::load_repo(&repo()).unwrap();
        let t = TransformSet::load(&repo(), &r).unwrap();
        let chain = compose_chain(&r, &t, "Like Item", 0).unwrap();
        let shape: Vec<(u32, bool, bool)> = chain.steps.iter().map(|s| (s.from, s.breaking, s.program.is_some())).collect();
        assert_eq!(shape, [(0, false, false), (1, true, true), (2, true, true)]);
        assert_eq!(chain.target_version(), Some(3));
        assert!(compose_chain(&r, &t, "Like Item", 3).unwrap().steps.is_empty());
        assert!(matches!(
            compose_chain(&r, &TransformSet::new(), "Post Item", 0),
            Err(EvolutionError::MissingTransform { from: 0, to: 1, .. })
        ));
    }

    #[test]
    fn failing_step_is_reported_by_index() {
        let r = Registry::load_repo(&repo()).unwrap();
        let mut t = TransformSet::new();
        t.register(&r, "Post Item", 0, 1, JsltProgram::compile(".").unwrap()).unwrap();
        t.register(&r, "Post Item", 1, 2, JsltProgram::compile(".").unwrap()).unwrap();
        let event = generate_valid(&r, "Post Item", 0, &GenConfig::with_seed(1)).unwrap();
        let err = compose_chain(&r, &t, "Post Item", 0).unwrap().apply(&r, &event).unwrap_err();
        match err {
            EvolutionError::ChainInvalid { step, from, to, mismatches, .. } => {
                assert_eq!((step, from, to), (0, 0, 1));
                assert_eq!(mismatches[0].path.to_string(), "/origin");
            }
            other => panic!("{other}"),
        }
        assert!(matches!(
            t.register(&r, "Post Item", 0, 2, JsltProgram::compile(".").unwrap()),
            Err(EvolutionError::NotAdjacent { .. })
        ));
    }

    #[test]
    fn schema_property_follows_the_chain() {
        let r = Registry::load_repo(&repo()).unwrap();
        let t = TransformSet::load(&repo(), &r).unwrap();
        let event = generate_valid(&r, "Send Message", 0, &GenConfig::with_seed(3)).unwrap();
        let out = transform_to_latest(&r, &t, &event).unwrap();
        assert_eq!(
            out.get("schema").and_then(JsonValue::as_str),
            Some("https://schemas.example.org/schemas/event/send-message/2")
        );
        assert!(matches!(
            transform_to_latest(&r, &t, &json!({"schema": "nope"})),
            Err(EvolutionError::Undeclared(_))
        ));
    }

    #[test]
    fn verification_catches_bad_programs() {
        let r = Registry::load_repo(&repo()).unwrap();
        let good = TransformSet::load(&repo(), &r).unwrap();
        assert!(verify_transforms(&r, &good, "Save Search", 10).unwrap().is_empty());
        let mut bad = TransformSet::new();
        bad.register(&r, "Vehicle", 1, 2, JsltProgram::compile(r#"{"fuel": "coal", * : .}"#).unwrap())
            .unwrap();
        let failures = verify_transforms(&r, &bad, "Vehicle", 5).unwrap();
        assert_eq!(failures.len(), 5);
        assert_eq!(failures[0].mismatches[0].path.to_string(), "/fuel");
    }

    #[test]
    fn step_names() {
        assert_eq!(parse_step_name("3-to-4"), Some((3, 4)));
        assert_eq!(parse_step_name("3-4"), None);
    }
}
