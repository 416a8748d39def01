//! Versioned schema store.
//!
//! A repository directory holds one file per schema version at
//! `<kind>/<slug>/<version>.json`, an optional `registry.json` with the host
//! name and base titles, and `releases.json` with the release tags. Every
//! version is immutable once written; tombstones and revivals are new
//! versions.

mod doc;
mod id;
mod property;
mod release;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use doc::SchemaDoc;
pub use id::{slugify, IdError, SchemaId, SchemaKind};
pub use property::{properties_to_json, Properties, PropertyDef, PropertyType, SchemaError, CUSTOM};
pub use release::{bump, ReleaseTag};

pub const CONFIG_FILE: &str = "registry.json";
pub const RELEASES_FILE: &str = "releases.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RegistryConfig {
    pub host: String,
    /// Title every alive event schema must inherit from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_event: Option<String>,
    /// Title every alive object schema must inherit from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_object: Option<String>,
}

impl RegistryConfig {
    pub fn new(host: impl Into<String>) -> Self {
        RegistryConfig {
            host: host.into(),
            base_event: None,
            base_object: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{}: {error}", path.display())]
    InFile { path: PathBuf, error: Box<RegistryError> },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Config(String),
    #[error("file is at {found} but its id says {expected}")]
    Misplaced { expected: String, found: String },
    #[error("'{title}' has versions up to {max} but is missing version {missing}")]
    NonContiguous { title: String, missing: u32, max: u32 },
    #[error("version {found} of '{title}' cannot be registered; next version is {expected}")]
    WrongVersion { title: String, expected: u32, found: u32 },
    #[error("cycle through {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join(" -> "))]
    Cycle(Vec<SchemaId>),
    #[error("{from} references {to}, which {reason}")]
    Dangling { from: SchemaId, to: SchemaId, reason: &'static str },
    #[error("id {id} belongs to host '{found}', registry host is '{expected}'")]
    ForeignHost { id: SchemaId, expected: String, found: String },
    #[error("slug '{slug}' of '{title}' is already used by '{other}'")]
    SlugTaken { slug: String, title: String, other: String },
    #[error("'{title}' is a {expected} schema, not {found}")]
    KindChanged { title: String, expected: SchemaKind, found: SchemaKind },
    #[error("{id}: required property '{name}' is neither declared nor inherited")]
    RequiredUndeclared { id: SchemaId, name: String },
    #[error("{id} must inherit from the base schema '{base}'")]
    MissingBase { id: SchemaId, base: String },
    #[error("unknown schema '{0}'")]
    UnknownTitle(String),
    #[error("'{title}' has no version {version}")]
    UnknownVersion { title: String, version: u32 },
    #[error("unknown schema id {0}")]
    UnknownId(String),
    #[error("'{0}' is already tombstoned")]
    AlreadyTombstoned(String),
    #[error("'{0}' is unchanged from its latest version")]
    NoChange(String),
    #[error("release {found} does not follow {previous}")]
    ReleaseOrder { previous: semver::Version, found: semver::Version },
    #[error("release {version} names {title} version {linear}, which does not exist")]
    ReleaseSnapshot { version: semver::Version, title: String, linear: u32 },
    #[error("cannot tag a release of an empty registry")]
    EmptyRelease,
}

impl RegistryError {
    fn in_file(self, path: &Path) -> Self {
        RegistryError::InFile {
            path: path.to_path_buf(),
            error: Box::new(self),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        RegistryError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

/// A child property that replaces an inherited one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Override {
    pub property: String,
    pub parent: SchemaId,
    pub child: SchemaId,
}

/// A schema with its inheritance chain flattened. References stay symbolic.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedSchema {
    pub id: SchemaId,
    pub title: String,
    pub properties: Properties,
    /// Union of the required lists along the chain, parents first.
    pub required: Vec<String>,
    /// The schema that supplied each property.
    pub origin: IndexMap<String, SchemaId>,
    pub overrides: Vec<Override>,
    pub tombstoned: bool,
}

impl ResolvedSchema {
    pub fn kind(&self) -> SchemaKind {
        self.id.kind
    }

    pub fn is_required(&self, name: &str) -> bool {
        self.required.iter().any(|r| r == name)
    }

    /// Names of properties that come from an ancestor.
    pub fn inherited(&self) -> impl Iterator<Item = &str> {
        self.origin.iter().filter(|(_, id)| **id != self.id).map(|(k, _)| k.as_str())
    }
}

/// The editable part of a schema version; the id is assigned on registration.
#[derive(Debug, Clone, Default)]
pub struct SchemaBody {
    pub description: Option<String>,
    pub parent: Option<SchemaId>,
    pub properties: Properties,
    pub required: Vec<String>,
}

#[derive(Debug, Clone)]
struct History {
    kind: SchemaKind,
    slug: String,
    versions: Vec<Arc<SchemaDoc>>,
}

#[derive(Debug, Clone)]
pub struct Registry {
    config: RegistryConfig,
    root: Option<PathBuf>,
    titles: BTreeMap<String, History>,
    slugs: HashMap<String, String>,
    releases: Vec<ReleaseTag>,
    resolved: HashMap<SchemaId, Arc<ResolvedSchema>>,
}

impl Registry {
    /// An empty registry that lives only in memory.
    pub fn new(config: RegistryConfig) -> Self {
        Registry {
            config,
            root: None,
            titles: BTreeMap::new(),
            slugs: HashMap::new(),
            releases: Vec::new(),
            resolved: HashMap::new(),
        }
    }

    /// Creates an empty repository directory with a config file.
    pub fn init_repo(dir: &Path, config: RegistryConfig) -> Result<Self, RegistryError> {
        fs::create_dir_all(dir).map_err(|e| RegistryError::io(dir, e))?;
        let path = dir.join(CONFIG_FILE);
        let text = serde_json::to_string_pretty(&config).expect("config serializes") + "\n";
        write_new(&path, &text)?;
        let mut r = Registry::new(config);
        r.root = Some(dir.to_path_buf());
        Ok(r)
    }

    pub fn load_repo(dir: &Path) -> Result<Self, RegistryError> {
        let files = schema_files(dir)?;
        let config_path = dir.join(CONFIG_FILE);
        let mut docs = Vec::with_capacity(files.len());
        for (path, rel) in &files {
            let text = fs::read_to_string(path).map_err(|e| RegistryError::io(path, e))?;
            let doc = SchemaDoc::parse(&text).map_err(|e| RegistryError::from(e).in_file(path))?;
            let expected = doc.id.relative_path();
            if expected != *rel {
                return Err(RegistryError::Misplaced {
                    expected: expected.display().to_string(),
                    found: rel.display().to_string(),
                }
                .in_file(path));
            }
            docs.push((path.clone(), doc));
        }
        let config = if config_path.exists() {
            let text = fs::read_to_string(&config_path).map_err(|e| RegistryError::io(&config_path, e))?;
            serde_json::from_str(&text).map_err(|e| RegistryError::Config(e.to_string()).in_file(&config_path))?
        } else if let Some((_, doc)) = docs.first() {
            RegistryConfig::new(doc.id.host.clone())
        } else {
            return Err(RegistryError::Config(format!(
                "{} has no schemas and no {CONFIG_FILE}",
                dir.display()
            )));
        };
        let mut registry = Registry::new(config);
        registry.root = Some(dir.to_path_buf());
        registry.insert_all(docs)?;
        let releases_path = dir.join(RELEASES_FILE);
        if releases_path.exists() {
            let text = fs::read_to_string(&releases_path).map_err(|e| RegistryError::io(&releases_path, e))?;
            let tags: Vec<ReleaseTag> = serde_json::from_str(&text)
                .map_err(|e| RegistryError::Config(e.to_string()).in_file(&releases_path))?;
            for tag in tags {
                registry.check_release(&tag).map_err(|e| e.in_file(&releases_path))?;
                registry.releases.push(tag);
            }
        }
        Ok(registry)
    }

    /// Builds a registry from documents held in memory, with the same checks
    /// as [`Registry::load_repo`].
    pub fn from_docs(config: RegistryConfig, docs: Vec<SchemaDoc>) -> Result<Self, RegistryError> {
        let mut registry = Registry::new(config);
        let docs = docs
            .into_iter()
            .map(|d| (PathBuf::from(d.id.relative_path()), d))
            .collect();
        registry.insert_all(docs)?;
        Ok(registry)
    }

    fn insert_all(&mut self, mut docs: Vec<(PathBuf, SchemaDoc)>) -> Result<(), RegistryError> {
        docs.sort_by(|a, b| (&a.1.title, a.1.version()).cmp(&(&b.1.title, b.1.version())));
        let mut paths = HashMap::new();
        for (path, doc) in docs {
            self.check_identity(&doc).map_err(|e| e.in_file(&path))?;
            let title = doc.title.clone();
            let version = doc.version();
            let history = self.titles.entry(title.clone()).or_insert_with(|| History {
                kind: doc.kind(),
                slug: doc.id.slug.clone(),
                versions: Vec::new(),
            });
            if version as usize != history.versions.len() {
                return Err(RegistryError::NonContiguous {
                    title,
                    missing: history.versions.len() as u32,
                    max: version,
                }
                .in_file(&path));
            }
            self.slugs.insert(doc.id.slug.clone(), title);
            paths.insert(doc.id.clone(), path);
            history.versions.push(Arc::new(doc));
        }
        self.check_acyclic()?;
        let mut ids: Vec<SchemaId> = paths.keys().cloned().collect();
        ids.sort();
        for id in &ids {
            let doc = self.doc_by_id(id).expect("inserted above").clone();
            self.check_links(&doc).map_err(|e| e.in_file(&paths[id]))?;
        }
        // parents before children so every resolution finds its parent cached
        for id in self.topological_order() {
            let resolved = self.resolve_uncached(&id).map_err(|e| e.in_file(&paths[&id]))?;
            self.resolved.insert(id, Arc::new(resolved));
        }
        Ok(())
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    pub fn host(&self) -> &str {
        &self.config.host
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    /// A copy that never writes to disk.
    pub fn detached(&self) -> Self {
        Registry {
            root: None,
            ..self.clone()
        }
    }

    pub fn titles(&self) -> impl Iterator<Item = &str> {
        self.titles.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.titles.is_empty()
    }

    pub fn kind_of(&self, title: &str) -> Option<SchemaKind> {
        self.titles.get(title).map(|h| h.kind)
    }

    pub fn slug_of(&self, title: &str) -> Option<&str> {
        self.titles.get(title).map(|h| h.slug.as_str())
    }

    pub fn title_for_slug(&self, slug: &str) -> Option<&str> {
        self.slugs.get(slug).map(String::as_str)
    }

    pub fn history(&self, title: &str) -> Result<&[Arc<SchemaDoc>], RegistryError> {
        self.titles
            .get(title)
            .map(|h| h.versions.as_slice())
            .ok_or_else(|| RegistryError::UnknownTitle(title.to_string()))
    }

    pub fn latest_version(&self, title: &str) -> Result<u32, RegistryError> {
        Ok(self.history(title)?.len() as u32 - 1)
    }

    pub fn latest(&self, title: &str) -> Result<&Arc<SchemaDoc>, RegistryError> {
        Ok(self.history(title)?.last().expect("histories are non-empty"))
    }

    pub fn doc(&self, title: &str, version: u32) -> Result<&Arc<SchemaDoc>, RegistryError> {
        self.history(title)?
            .get(version as usize)
            .ok_or_else(|| RegistryError::UnknownVersion {
                title: title.to_string(),
                version,
            })
    }

    pub fn doc_by_id(&self, id: &SchemaId) -> Option<&Arc<SchemaDoc>> {
        if id.host != self.config.host {
            return None;
        }
        let title = self.slugs.get(&id.slug)?;
        let history = &self.titles[title];
        if history.kind != id.kind {
            return None;
        }
        history.versions.get(id.version as usize)
    }

    /// Looks up a document by the text of its id URL.
    pub fn doc_by_url(&self, url: &str) -> Option<&Arc<SchemaDoc>> {
        SchemaId::parse(url).ok().and_then(|id| self.doc_by_id(&id))
    }

    pub fn resolve(&self, title: &str, version: u32) -> Result<Arc<ResolvedSchema>, RegistryError> {
        let doc = self.doc(title, version)?;
        Ok(self.resolved[&doc.id].clone())
    }

    pub fn resolve_id(&self, id: &SchemaId) -> Result<Arc<ResolvedSchema>, RegistryError> {
        self.resolved
            .get(id)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownId(id.to_string()))
    }

    /// The id the next version of `title` will get.
    pub fn next_id(&self, title: &str, kind: SchemaKind) -> SchemaId {
        let version = self.titles.get(title).map_or(0, |h| h.versions.len() as u32);
        SchemaId::new(self.config.host.clone(), kind, slugify(title), version)
    }

    /// Appends a new version built from `body`; returns its linear version.
    pub fn register_version(&mut self, title: &str, kind: SchemaKind, body: SchemaBody) -> Result<u32, RegistryError> {
        let id = self.next_id(title, kind);
        let doc = SchemaDoc::new(id, title, body.description, body.parent, body.properties, body.required);
        self.register_doc(doc)
    }

    /// Appends a complete document whose id must name the next version.
    pub fn register_doc(&mut self, doc: SchemaDoc) -> Result<u32, RegistryError> {
        self.check_identity(&doc)?;
        let expected = self.titles.get(&doc.title).map_or(0, |h| h.versions.len() as u32);
        if doc.version() != expected {
            return Err(RegistryError::WrongVersion {
                title: doc.title.clone(),
                expected,
                found: doc.version(),
            });
        }
        if let Some(history) = self.titles.get(&doc.title) {
            let latest = history.versions.last().expect("histories are non-empty");
            if latest.same_body(&doc) {
                return Err(if doc.is_tombstone() {
                    RegistryError::AlreadyTombstoned(doc.title.clone())
                } else {
                    RegistryError::NoChange(doc.title.clone())
                });
            }
        }
        let refs_self = doc.parent.as_ref() == Some(&doc.id)
            || doc.properties.values().any(|p| p.refs().contains(&&doc.id));
        if refs_self {
            return Err(RegistryError::Cycle(vec![doc.id.clone(), doc.id.clone()]));
        }
        self.check_links(&doc)?;
        let resolved = self.resolve_with(&doc)?;
        if let Some(root) = &self.root {
            let path = root.join(doc.id.relative_path());
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| RegistryError::io(dir, e))?;
            }
            write_new(&path, doc.raw())?;
        }
        let version = doc.version();
        let history = self.titles.entry(doc.title.clone()).or_insert_with(|| History {
            kind: doc.kind(),
            slug: doc.id.slug.clone(),
            versions: Vec::new(),
        });
        self.slugs.insert(doc.id.slug.clone(), doc.title.clone());
        self.resolved.insert(doc.id.clone(), Arc::new(resolved));
        history.versions.push(Arc::new(doc));
        Ok(version)
    }

    /// Appends an empty version that retires `title`.
    pub fn tombstone(&mut self, title: &str) -> Result<u32, RegistryError> {
        let latest = self.latest(title)?;
        if latest.is_tombstone() {
            return Err(RegistryError::AlreadyTombstoned(title.to_string()));
        }
        let doc = SchemaDoc::tombstone(latest.id.with_version(latest.version() + 1), title);
        self.register_doc(doc)
    }

    pub fn releases(&self) -> &[ReleaseTag] {
        &self.releases
    }

    pub fn latest_release(&self) -> Option<&ReleaseTag> {
        self.releases.last()
    }

    pub fn tag_release(&mut self, breaking_since_last: bool, major_override: bool) -> Result<ReleaseTag, RegistryError> {
        self.tag_release_at(breaking_since_last, major_override, Utc::now())
    }

    /// Tags the current state. The first tag bumps from 0.0.0.
    pub fn tag_release_at(
        &mut self,
        breaking_since_last: bool,
        major_override: bool,
        timestamp: DateTime<Utc>,
    ) -> Result<ReleaseTag, RegistryError> {
        if self.titles.is_empty() {
            return Err(RegistryError::EmptyRelease);
        }
        let previous = self
            .releases
            .last()
            .map_or(semver::Version::new(0, 0, 0), |t| t.version.clone());
        let tag = ReleaseTag {
            version: bump(&previous, breaking_since_last, major_override),
            snapshot: self
                .titles
                .iter()
                .map(|(t, h)| (t.clone(), h.versions.len() as u32 - 1))
                .collect(),
            timestamp,
        };
        self.check_release(&tag)?;
        if let Some(root) = &self.root {
            let mut all = self.releases.clone();
            all.push(tag.clone());
            let path = root.join(RELEASES_FILE);
            let text = serde_json::to_string_pretty(&all).expect("tags serialize") + "\n";
            fs::write(&path, text).map_err(|e| RegistryError::io(&path, e))?;
        }
        self.releases.push(tag.clone());
        Ok(tag)
    }

    fn check_release(&self, tag: &ReleaseTag) -> Result<(), RegistryError> {
        if let Some(prev) = self.releases.last() {
            if tag.version <= prev.version {
                return Err(RegistryError::ReleaseOrder {
                    previous: prev.version.clone(),
                    found: tag.version.clone(),
                });
            }
        }
        for (title, &linear) in &tag.snapshot {
            if self.doc(title, linear).is_err() {
                return Err(RegistryError::ReleaseSnapshot {
                    version: tag.version.clone(),
                    title: title.clone(),
                    linear,
                });
            }
        }
        Ok(())
    }

    /// Host, slug and kind agree with what the registry already knows.
    fn check_identity(&self, doc: &SchemaDoc) -> Result<(), RegistryError> {
        if doc.id.host != self.config.host {
            return Err(RegistryError::ForeignHost {
                id: doc.id.clone(),
                expected: self.config.host.clone(),
                found: doc.id.host.clone(),
            });
        }
        if let Some(other) = self.slugs.get(&doc.id.slug) {
            if *other != doc.title {
                return Err(RegistryError::SlugTaken {
                    slug: doc.id.slug.clone(),
                    title: doc.title.clone(),
                    other: other.clone(),
                });
            }
        }
        if let Some(h) = self.titles.get(&doc.title) {
            if h.kind != doc.kind() {
                return Err(RegistryError::KindChanged {
                    title: doc.title.clone(),
                    expected: h.kind,
                    found: doc.kind(),
                });
            }
        }
        Ok(())
    }

    /// Parent and references exist, are alive and have the right kind.
    fn check_links(&self, doc: &SchemaDoc) -> Result<(), RegistryError> {
        let target = |to: &SchemaId, kind: SchemaKind| -> Result<(), RegistryError> {
            let dangling = |reason| RegistryError::Dangling {
                from: doc.id.clone(),
                to: to.clone(),
                reason,
            };
            let found = self.doc_by_id(to).ok_or_else(|| dangling("does not exist"))?;
            if found.kind() != kind {
                return Err(dangling("has the wrong kind"));
            }
            if found.is_tombstone() {
                return Err(dangling("is tombstoned"));
            }
            Ok(())
        };
        if let Some(parent) = &doc.parent {
            target(parent, doc.kind())?;
        }
        for prop in doc.properties.values() {
            for r in prop.refs() {
                target(r, SchemaKind::Object)?;
            }
        }
        if doc.is_tombstone() {
            return Ok(());
        }
        let base = match doc.kind() {
            SchemaKind::Event => &self.config.base_event,
            SchemaKind::Object => &self.config.base_object,
        };
        if let Some(base) = base {
            if *base != doc.title && !self.chain_reaches(doc, base) {
                return Err(RegistryError::MissingBase {
                    id: doc.id.clone(),
                    base: base.clone(),
                });
            }
        }
        Ok(())
    }

    fn chain_reaches(&self, doc: &SchemaDoc, base: &str) -> bool {
        let mut cur = doc.parent.as_ref().and_then(|p| self.doc_by_id(p));
        // the chain is acyclic, so this terminates
        while let Some(d) = cur {
            if d.title == base {
                return true;
            }
            cur = d.parent.as_ref().and_then(|p| self.doc_by_id(p));
        }
        false
    }

    fn edges<'a>(&'a self, doc: &'a SchemaDoc) -> impl Iterator<Item = &'a SchemaId> + 'a {
        doc.parent
            .iter()
            .chain(doc.properties.values().flat_map(|p| p.refs()))
            .filter(move |id| self.doc_by_id(id).is_some())
    }

    fn all_ids(&self) -> Vec<SchemaId> {
        self.titles
            .values()
            .flat_map(|h| h.versions.iter().map(|d| d.id.clone()))
            .collect()
    }

    fn check_acyclic(&self) -> Result<(), RegistryError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut marks: HashMap<SchemaId, Mark> = HashMap::new();
        for start in self.all_ids() {
            if marks.contains_key(&start) {
                continue;
            }
            // iterative DFS; `path` holds the active chain
            let mut path: Vec<(SchemaId, Vec<SchemaId>)> = Vec::new();
            let children = |id: &SchemaId| -> Vec<SchemaId> {
                let doc = self.doc_by_id(id).expect("edges point at existing docs");
                self.edges(doc).cloned().collect()
            };
            marks.insert(start.clone(), Mark::Active);
            path.push((start.clone(), children(&start)));
            while let Some((_, pending)) = path.last_mut() {
                match pending.pop() {
                    Some(next) => match marks.get(&next) {
                        Some(Mark::Done) => {}
                        Some(Mark::Active) => {
                            let from = path.iter().position(|(id, _)| *id == next).expect("active ids are on the path");
                            let mut cycle: Vec<SchemaId> = path[from..].iter().map(|(id, _)| id.clone()).collect();
                            cycle.push(next);
                            return Err(RegistryError::Cycle(cycle));
                        }
                        None => {
                            marks.insert(next.clone(), Mark::Active);
                            let c = children(&next);
                            path.push((next, c));
                        }
                    },
                    None => {
                        let (id, _) = path.pop().expect("non-empty");
                        marks.insert(id, Mark::Done);
                    }
                }
            }
        }
        Ok(())
    }

    /// Ids ordered so that every parent precedes its children.
    fn topological_order(&self) -> Vec<SchemaId> {
        let mut order = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut ids = self.all_ids();
        ids.sort();
        for id in ids {
            let mut chain = Vec::new();
            let mut cur = Some(id);
            while let Some(c) = cur {
                if !seen.insert(c.clone()) {
                    break;
                }
                let doc = self.doc_by_id(&c).expect("exists");
                cur = doc.parent.clone();
                chain.push(c);
            }
            order.extend(chain.into_iter().rev());
        }
        order
    }

    fn resolve_uncached(&self, id: &SchemaId) -> Result<ResolvedSchema, RegistryError> {
        let doc = self.doc_by_id(id).ok_or_else(|| RegistryError::UnknownId(id.to_string()))?;
        self.resolve_with(doc)
    }

    /// Flattens `doc` over its (already resolved) parent.
    fn resolve_with(&self, doc: &SchemaDoc) -> Result<ResolvedSchema, RegistryError> {
        let mut out = ResolvedSchema {
            id: doc.id.clone(),
            title: doc.title.clone(),
            properties: Properties::new(),
            required: Vec::new(),
            origin: IndexMap::new(),
            overrides: Vec::new(),
            tombstoned: doc.is_tombstone(),
        };
        if let Some(parent_id) = &doc.parent {
            let parent = self.resolve_id(parent_id)?;
            out.properties = parent.properties.clone();
            out.required = parent.required.clone();
            out.origin = parent.origin.clone();
        }
        for (name, def) in &doc.properties {
            if let Some(prev) = out.origin.get(name) {
                let o = Override {
                    property: name.clone(),
                    parent: prev.clone(),
                    child: doc.id.clone(),
                };
                log::debug!("{} overrides '{}' inherited from {}", o.child, o.property, o.parent);
                out.overrides.push(o);
            }
            out.properties.insert(name.clone(), def.clone());
            out.origin.insert(name.clone(), doc.id.clone());
        }
        for name in &doc.required {
            if !out.properties.contains_key(name) {
                return Err(RegistryError::RequiredUndeclared {
                    id: doc.id.clone(),
                    name: name.clone(),
                });
            }
            if !out.required.contains(name) {
                out.required.push(name.clone());
            }
        }
        Ok(out)
    }
}

/// `(absolute path, path relative to dir)` of every schema file.
fn schema_files(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>, RegistryError> {
    if !dir.is_dir() {
        return Err(RegistryError::io(dir, "not a directory"));
    }
    let mut out = Vec::new();
    for kind in [SchemaKind::Event, SchemaKind::Object] {
        let kind_dir = dir.join(kind.as_str());
        if !kind_dir.is_dir() {
            continue;
        }
        for slug in read_dir_sorted(&kind_dir)? {
            if !slug.is_dir() {
                continue;
            }
            for file in read_dir_sorted(&slug)? {
                if file.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let rel = file.strip_prefix(dir).expect("under dir").to_path_buf();
                out.push((file, rel));
            }
        }
    }
    Ok(out)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>, RegistryError> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| RegistryError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| RegistryError::io(dir, e))?;
    entries.sort();
    Ok(entries)
}

fn write_new(path: &Path, text: &str) -> Result<(), RegistryError> {
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| RegistryError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| RegistryError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json::{parse_json, JsonPath};

    fn props(v: &str) -> Properties {
        let value = parse_json(v).unwrap();
        property::parse_properties(Some(&value), &JsonPath::root()).unwrap()
    }

    fn registry() -> Registry {
        let mut r = Registry::new(RegistryConfig::new("h"));
        r.register_version(
            "Event",
            SchemaKind::Event,
            SchemaBody {
                properties: props(r#"{"@id": {"type": "string"}, "published": {"type": "string"}}"#),
                required: vec!["@id".into()],
                ..Default::default()
            },
        )
        .unwrap();
        r
    }

    fn child(r: &Registry, props_json: &str, required: &[&str]) -> SchemaBody {
        SchemaBody {
            parent: Some(r.doc("Event", r.latest_version("Event").unwrap()).unwrap().id.clone()),
            properties: props(props_json),
            required: required.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn versions_start_at_zero_and_increment() {
        let mut r = registry();
        assert_eq!(r.latest_version("Event").unwrap(), 0);
        let body = SchemaBody {
            properties: props(r#"{"@id": {"type": "string"}}"#),
            ..Default::default()
        };
        assert_eq!(r.register_version("Event", SchemaKind::Event, body.clone()).unwrap(), 1);
        assert!(matches!(
            r.register_version("Event", SchemaKind::Event, body),
            Err(RegistryError::NoChange(_))
        ));
    }

    #[test]
    fn inheritance_flattens_and_unions_required() {
        let mut r = registry();
        let body = child(&r, r#"{"object": {"type": "string"}}"#, &["object"]);
        r.register_version("View Item", SchemaKind::Event, body).unwrap();
        let resolved = r.resolve("View Item", 0).unwrap();
        assert_eq!(resolved.properties.keys().collect::<Vec<_>>(), ["@id", "published", "object"]);
        assert_eq!(resolved.required, ["@id", "object"]);
        assert_eq!(resolved.inherited().collect::<Vec<_>>(), ["@id", "published"]);
    }

    #[test]
    fn child_override_wins_with_diagnostic() {
        let mut r = registry();
        let body = child(&r, r#"{"published": {"type": "number"}}"#, &[]);
        r.register_version("Odd", SchemaKind::Event, body).unwrap();
        let resolved = r.resolve("Odd", 0).unwrap();
        assert_eq!(resolved.properties["published"].ty, PropertyType::Number);
        assert_eq!(resolved.overrides.len(), 1);
        assert_eq!(resolved.overrides[0].property, "published");
    }

    #[test]
    fn required_may_name_inherited_properties() {
        let mut r = registry();
        let body = child(&r, r#"{}"#, &["published"]);
        r.register_version("Strict", SchemaKind::Event, body).unwrap();
        assert_eq!(r.resolve("Strict", 0).unwrap().required, ["@id", "published"]);
        let bad = child(&r, r#"{}"#, &["nope"]);
        assert!(matches!(
            r.register_version("Bad", SchemaKind::Event, bad),
            Err(RegistryError::RequiredUndeclared { .. })
        ));
    }

    #[test]
    fn tombstone_and_revive() {
        let mut r = registry();
        let body = child(&r, r#"{"object": {"type": "string"}}"#, &[]);
        r.register_version("Like Item", SchemaKind::Event, body.clone()).unwrap();
        assert_eq!(r.tombstone("Like Item").unwrap(), 1);
        let dead = r.resolve("Like Item", 1).unwrap();
        assert!(dead.tombstoned && dead.properties.is_empty());
        assert!(matches!(r.tombstone("Like Item"), Err(RegistryError::AlreadyTombstoned(_))));
        assert_eq!(r.register_version("Like Item", SchemaKind::Event, body).unwrap(), 2);
        assert!(!r.resolve("Like Item", 2).unwrap().tombstoned);
        assert!(matches!(r.tombstone("Nope"), Err(RegistryError::UnknownTitle(_))));
    }

    #[test]
    fn links_must_exist_with_right_kind() {
        let mut r = registry();
        let event_id = r.doc("Event", 0).unwrap().id.clone();
        let as_ref = format!(r#"{{"o": {{"$ref": "{event_id}"}}}}"#);
        let e = r.register_version("X", SchemaKind::Event, child(&r, &as_ref, &[])).unwrap_err();
        assert!(matches!(e, RegistryError::Dangling { reason: "has the wrong kind", .. }));
        let missing = r#"{"o": {"$ref": "https://h/schemas/object/ghost/0"}}"#;
        let e = r.register_version("X", SchemaKind::Event, child(&r, missing, &[])).unwrap_err();
        assert!(matches!(e, RegistryError::Dangling { reason: "does not exist", .. }));
        let own = SchemaBody {
            parent: Some(SchemaId::parse("https://h/schemas/event/x/0").unwrap()),
            properties: props(r#"{"a": {"type": "number"}}"#),
            ..Default::default()
        };
        assert!(matches!(r.register_version("X", SchemaKind::Event, own), Err(RegistryError::Cycle(_))));
    }

    #[test]
    fn cycles_are_found_on_load() {
        let a = SchemaDoc::parse(
            r#"{"id":"https://h/schemas/object/a/0","title":"A","properties":{"b":{"$ref":"https://h/schemas/object/b/0"}}}"#,
        )
        .unwrap();
        let b = SchemaDoc::parse(
            r#"{"id":"https://h/schemas/object/b/0","title":"B","properties":{"a":{"$ref":"https://h/schemas/object/a/0"}}}"#,
        )
        .unwrap();
        let e = Registry::from_docs(RegistryConfig::new("h"), vec![a, b]).unwrap_err();
        assert!(matches!(e, RegistryError::Cycle(ref c) if c.len() == 3), "{e}");
    }

    #[test]
    fn versions_must_be_contiguous() {
        let doc = SchemaDoc::parse(r#"{"id":"https://h/schemas/object/a/1","title":"A","properties":{"x":{"type":"number"}}}"#)
            .unwrap();
        let e = Registry::from_docs(RegistryConfig::new("h"), vec![doc]).unwrap_err();
        assert!(e.to_string().contains("missing version 0"), "{e}");
    }

    #[test]
    fn base_schema_is_enforced() {
        let mut config = RegistryConfig::new("h");
        config.base_event = Some("Event".into());
        let mut r = Registry::new(config);
        let base = SchemaBody {
            properties: props(r#"{"@id": {"type": "string"}}"#),
            ..Default::default()
        };
        r.register_version("Event", SchemaKind::Event, base.clone()).unwrap();
        let e = r.register_version("Orphan", SchemaKind::Event, base).unwrap_err();
        assert!(matches!(e, RegistryError::MissingBase { .. }));
    }

    #[test]
    fn release_tags_follow_bump_rules() {
        let mut r = registry();
        let t0 = Utc::now();
        let versions: Vec<String> = [(false, false), (true, false), (false, true), (false, false)]
            .iter()
            .map(|&(b, m)| r.tag_release_at(b, m, t0).unwrap().version.to_string())
            .collect();
        assert_eq!(versions, ["0.0.1", "0.1.0", "1.0.0", "1.0.1"]);
        assert_eq!(r.latest_release().unwrap().snapshot["Event"], 0);
        assert!(matches!(
            Registry::new(RegistryConfig::new("h")).tag_release(false, false),
            Err(RegistryError::EmptyRelease)
        ));
    }
}
