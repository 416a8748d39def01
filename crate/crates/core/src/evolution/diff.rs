use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;

use crate::json::{JsonPath, JsonValue, Map, PathStep};
use crate::pattern::Pattern;
use crate::registry::{PropertyDef, PropertyType, Registry, RegistryError, ResolvedSchema};

/// A property definition with references expanded and descriptions dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    String { pattern: Option<Pattern> },
    Number,
    Enum(Vec<JsonValue>),
    Array(Box<Node>),
    Object(SchemaTree),
}

/// An object level of an expanded schema.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SchemaTree {
    pub properties: IndexMap<String, Node>,
    pub required: Vec<String>,
}

/// A node together with whether its parent requires it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub node: Node,
    pub required: bool,
}

impl Node {
    pub fn to_json(&self) -> JsonValue {
        let mut m = Map::new();
        match self {
            Node::String { pattern } => {
                m.insert("type".into(), "string".into());
                if let Some(p) = pattern {
                    m.insert("pattern".into(), p.source().into());
                }
            }
            Node::Number => {
                m.insert("type".into(), "number".into());
            }
            Node::Enum(values) => {
                m.insert("enum".into(), JsonValue::Array(values.clone()));
            }
            Node::Array(items) => {
                m.insert("type".into(), "array".into());
                m.insert("items".into(), items.to_json());
            }
            Node::Object(tree) => {
                m.insert("type".into(), "object".into());
                m.insert(
                    "properties".into(),
                    JsonValue::Object(tree.properties.iter().map(|(k, v)| (k.clone(), v.to_json())).collect()),
                );
                if !tree.required.is_empty() {
                    m.insert(
                        "required".into(),
                        JsonValue::Array(tree.required.iter().map(|r| JsonValue::from(r.as_str())).collect()),
                    );
                }
            }
        }
        JsonValue::Object(m)
    }
}

impl SchemaTree {
    pub fn from_resolved(registry: &Registry, schema: &ResolvedSchema) -> Result<Self, RegistryError> {
        tree(registry, schema.properties.iter(), &schema.required)
    }

    pub fn is_required(&self, name: &str) -> bool {
        self.required.iter().any(|r| r == name)
    }

    fn slot(&self, name: &str) -> Option<Slot> {
        self.properties.get(name).map(|node| Slot {
            node: node.clone(),
            required: self.is_required(name),
        })
    }

    fn set_required(&mut self, name: &str, required: bool) {
        self.required.retain(|r| r != name);
        if required {
            self.required.push(name.to_string());
        }
    }
}

impl SchemaTree {
    /// Structural equality with requiredness compared as a set.
    pub fn same_as(&self, other: &SchemaTree) -> bool {
        self.properties == other.properties
            && self.required.len() == other.required.len()
            && self.required.iter().all(|r| other.is_required(r))
    }
}

fn tree<'a>(
    registry: &Registry,
    props: impl Iterator<Item = (&'a String, &'a PropertyDef)>,
    required: &[String],
) -> Result<SchemaTree, RegistryError> {
    let mut out = SchemaTree {
        properties: IndexMap::new(),
        required: required.to_vec(),
    };
    for (name, def) in props {
        out.properties.insert(name.clone(), node(registry, def)?);
    }
    Ok(out)
}

fn node(registry: &Registry, def: &PropertyDef) -> Result<Node, RegistryError> {
    Ok(match &def.ty {
        PropertyType::String { pattern } => Node::String { pattern: pattern.clone() },
        PropertyType::Number => Node::Number,
        PropertyType::Enum(v) => Node::Enum(v.clone()),
        PropertyType::Array(items) => Node::Array(Box::new(node(registry, items)?)),
        PropertyType::Ref(id) => {
            let target = registry.resolve_id(id)?;
            Node::Object(tree(registry, target.properties.iter(), &target.required)?)
        }
        PropertyType::Compound { properties, required } => Node::Object(tree(registry, properties.iter(), required)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Add,
    Modify,
    Remove,
    Rename,
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChangeKind::Add => "add",
            ChangeKind::Modify => "modify",
            ChangeKind::Remove => "remove",
            ChangeKind::Rename => "rename",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeOp {
    pub kind: ChangeKind,
    /// Location of the property in the older version.
    pub path: JsonPath,
    pub before: Option<Slot>,
    pub after: Option<Slot>,
    /// `(old name, new name)` for renames.
    pub rename: Option<(String, String)>,
}

impl ChangeOp {
    /// Everything except adding an optional property breaks consumers or
    /// old data.
    pub fn is_breaking(&self) -> bool {
        match self.kind {
            ChangeKind::Add => self.after.as_ref().is_some_and(|s| s.required),
            _ => true,
        }
    }

    pub fn to_json(&self) -> JsonValue {
        let slot = |s: &Slot| {
            let mut m = Map::new();
            m.insert("definition".into(), s.node.to_json());
            m.insert("required".into(), JsonValue::Bool(s.required));
            JsonValue::Object(m)
        };
        let mut m = Map::new();
        m.insert("op".into(), self.kind.to_string().into());
        m.insert("path".into(), self.path.to_string().into());
        if let Some((old, new)) = &self.rename {
            m.insert("from".into(), old.as_str().into());
            m.insert("to".into(), new.as_str().into());
        }
        if let Some(b) = &self.before {
            m.insert("before".into(), slot(b));
        }
        if let Some(a) = &self.after {
            m.insert("after".into(), slot(a));
        }
        m.insert("breaking".into(), JsonValue::Bool(self.is_breaking()));
        JsonValue::Object(m)
    }
}

impl fmt::Display for ChangeOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rename {
            Some((_, new)) => write!(f, "rename {} -> {new}", self.path),
            None => write!(f, "{} {}", self.kind, self.path),
        }
    }
}

pub fn is_breaking(ops: &[ChangeOp]) -> bool {
    ops.iter().any(ChangeOp::is_breaking)
}

/// Changes that turn the property tree of `a` into that of `b`.
pub fn diff_trees(a: &SchemaTree, b: &SchemaTree) -> Vec<ChangeOp> {
    let mut ops = Vec::new();
    diff_level(a, b, &JsonPath::root(), &mut ops);
    ops
}

fn diff_level(a: &SchemaTree, b: &SchemaTree, at: &JsonPath, ops: &mut Vec<ChangeOp>) {
    let removed: Vec<&String> = a.properties.keys().filter(|k| !b.properties.contains_key(*k)).collect();
    let mut added: Vec<&String> = b.properties.keys().filter(|k| !a.properties.contains_key(*k)).collect();
    for name in &removed {
        let before = a.slot(name).expect("removed key exists in a");
        let twin = added
            .iter()
            .position(|k| b.slot(k).expect("added key exists in b") == before);
        match twin {
            Some(i) => {
                let new = added.remove(i);
                ops.push(ChangeOp {
                    kind: ChangeKind::Rename,
                    path: at.key(name.as_str()),
                    before: Some(before.clone()),
                    after: Some(before),
                    rename: Some(((*name).clone(), new.clone())),
                });
            }
            None => ops.push(ChangeOp {
                kind: ChangeKind::Remove,
                path: at.key(name.as_str()),
                before: Some(before),
                after: None,
                rename: None,
            }),
        }
    }
    for (name, node_a) in &a.properties {
        let Some(node_b) = b.properties.get(name) else {
            continue;
        };
        let (ra, rb) = (a.is_required(name), b.is_required(name));
        if node_a == node_b && ra == rb {
            continue;
        }
        let path = at.key(name.as_str());
        match (node_a, node_b) {
            (Node::Object(ta), Node::Object(tb)) if ra == rb => diff_level(ta, tb, &path, ops),
            _ => ops.push(ChangeOp {
                kind: ChangeKind::Modify,
                path,
                before: a.slot(name),
                after: b.slot(name),
                rename: None,
            }),
        }
    }
    for name in added {
        ops.push(ChangeOp {
            kind: ChangeKind::Add,
            path: at.key(name.as_str()),
            before: None,
            after: b.slot(name),
            rename: None,
        });
    }
}

/// Replays `ops` on a tree; the inverse check of [`diff_trees`].
pub fn apply_ops(tree: &SchemaTree, ops: &[ChangeOp]) -> Result<SchemaTree, String> {
    let mut out = tree.clone();
    for op in ops {
        let steps = op.path.steps();
        let Some((PathStep::Key(last), parents)) = steps.split_last() else {
            return Err(format!("{op}: path must end in a property name"));
        };
        let mut level = &mut out;
        for step in parents {
            let PathStep::Key(k) = step else {
                return Err(format!("{op}: array steps are not schema paths"));
            };
            level = match level.properties.get_mut(k) {
                Some(Node::Object(t)) => t,
                _ => return Err(format!("{op}: '{k}' is not an object property")),
            };
        }
        match op.kind {
            ChangeKind::Add | ChangeKind::Modify => {
                let after = op.after.as_ref().ok_or_else(|| format!("{op}: missing definition"))?;
                level.properties.insert(last.clone(), after.node.clone());
                level.set_required(last, after.required);
            }
            ChangeKind::Remove => {
                level.properties.shift_remove(last);
                level.set_required(last, false);
            }
            ChangeKind::Rename => {
                let (_, new) = op.rename.as_ref().ok_or_else(|| format!("{op}: missing new name"))?;
                let node = level
                    .properties
                    .shift_remove(last)
                    .ok_or_else(|| format!("{op}: nothing to rename"))?;
                let required = level.is_required(last);
                level.set_required(last, false);
                level.properties.insert(new.clone(), node);
                level.set_required(new, required);
            }
        }
    }
    Ok(out)
}

/// Diff between two versions of one title.
pub fn diff(registry: &Registry, title: &str, from: u32, to: u32) -> Result<Vec<ChangeOp>, RegistryError> {
    let a = SchemaTree::from_resolved(registry, &*registry.resolve(title, from)?)?;
    let b = SchemaTree::from_resolved(registry, &*registry.resolve(title, to)?)?;
    Ok(diff_trees(&a, &b))
}
