//! Schema evolution: structural diffs between versions, transform chains
//! that carry data forward, and consumer impact checks for proposals.
//!
//! A change is breaking unless it only adds optional properties. Breaking
//! steps need a registered JSLT transform; other steps may omit one and are
//! then treated as identities.

mod diff;
mod impact;
mod transform;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use diff::{apply_ops, diff, diff_trees, is_breaking, ChangeKind, ChangeOp, Node, SchemaTree, Slot};
pub use impact::{change_impact_test, ConsumerSample, ImpactOutcome, ImpactReport, Polarity};
pub use transform::{
    compose_chain, transform_to_latest, verify_transforms, Chain, ChainStep, StepFailure, TransformSet,
    TRANSFORMS_DIR,
};

use crate::generator::GenError;
use crate::jslt::{CompileError, RuntimeError};
use crate::registry::{Registry, RegistryError};
use crate::validator::Mismatch;

#[derive(Debug, thiserror::Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("proposal rejected: {0}")]
    Proposal(RegistryError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: {error}", path.display())]
    Compile { path: PathBuf, error: CompileError },
    #[error("{}: {reason}", path.display())]
    BadTransformFile { path: PathBuf, reason: String },
    #[error("{}: {reason}", path.display())]
    BadSample { path: PathBuf, reason: String },
    #[error("'{title}': a transform must go from one version to the next, not {from} to {to}")]
    NotAdjacent { title: String, from: u32, to: u32 },
    #[error("'{title}' {from} -> {to} is breaking and has no transform")]
    MissingTransform { title: String, from: u32, to: u32 },
    #[error("'{title}' step {step} ({from} -> {to}) failed: {error}")]
    TransformFailed {
        title: String,
        step: usize,
        from: u32,
        to: u32,
        error: RuntimeError,
    },
    #[error("'{title}' step {step} ({from} -> {to}) produced invalid output: {}", describe(.mismatches))]
    ChainInvalid {
        title: String,
        step: usize,
        from: u32,
        to: u32,
        mismatches: Vec<Mismatch>,
    },
    #[error("event does not declare a registered schema (found {0:?})")]
    Undeclared(Option<String>),
}

fn describe(mismatches: &[Mismatch]) -> String {
    mismatches.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl EvolutionError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        EvolutionError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

/// Counts of breaking and total version transitions across all titles.
pub fn breaking_transitions(registry: &Registry) -> Result<(usize, usize), RegistryError> {
    let mut breaking = 0;
    let mut total = 0;
    for title in registry.titles() {
        let latest = registry.latest_version(title)?;
        for v in 0..latest {
            total += 1;
            if is_breaking(&diff(registry, title, v, v + 1)?) {
                breaking += 1;
            }
        }
    }
    Ok((breaking, total))
}

/// Whether any title changed in a breaking way after the versions in
/// `snapshot`. Titles absent from the snapshot count from nothing, so their
/// first version is an addition.
pub fn breaking_since(registry: &Registry, snapshot: &BTreeMap<String, u32>) -> Result<bool, RegistryError> {
    for title in registry.titles() {
        let latest = registry.latest_version(title)?;
        let Some(&from) = snapshot.get(title) else {
            continue;
        };
        for v in from..latest {
            if is_breaking(&diff(registry, title, v, v + 1)?) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
