use std::path::PathBuf;

use semschema_core::evolution::{breaking_transitions, compose_chain, diff, transform_to_latest, TransformSet};
use semschema_core::generator::{generate_valid, GenConfig};
use semschema_core::json::parse_json;
use semschema_core::registry::Registry;
use semschema_core::validator::{validate, ValidationTarget};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load() -> (Registry, TransformSet) {
    let dir = fixtures().join("repo");
    let r = Registry::load_repo(&dir).unwrap();
    let t = TransformSet::load(&dir, &r).unwrap();
    (r, t)
}

#[test]
fn repo_shape() {
    let (r, t) = load();
    assert_eq!(r.titles().count(), 12);
    for title in r.titles() {
        assert!(r.latest_version(title).unwrap() >= 2, "{title}");
    }
    assert!(r.doc("Like Item", 2).unwrap().is_tombstone());
    assert!(!r.resolve("Like Item", 3).unwrap().tombstoned);
    assert_eq!(breaking_transitions(&r).unwrap(), (16, 25));
    assert_eq!(t.len(), 16);
}

#[test]
fn breaking_steps_have_transforms() {
    let (r, t) = load();
    for title in r.titles() {
        for v in 0..=r.latest_version(title).unwrap() {
            compose_chain(&r, &t, title, v).unwrap_or_else(|e| panic!("{title}@{v}: {e}"));
        }
    }
}

#[test]
fn chains_reach_latest() {
    let (r, t) = load();
    for title in r.titles() {
        let latest = r.latest_version(title).unwrap();
        for v in 0..=latest {
            if r.doc(title, v).unwrap().is_tombstone() {
                continue;
            }
            let chain = compose_chain(&r, &t, title, v).unwrap();
            for seed in 0..20 {
                let input = generate_valid(&r, title, v, &GenConfig::with_seed(seed)).unwrap();
                chain
                    .apply(&r, &input)
                    .unwrap_or_else(|e| panic!("{title}@{v} seed {seed}: {e}\ninput {input}"));
            }
        }
    }
}

#[test]
fn example_events_validate() {
    let (r, t) = load();
    let text = std::fs::read_to_string(fixtures().join("events/view-item.json")).unwrap();
    let event = parse_json(&text).unwrap();
    assert_eq!(validate(&r, &event, &ValidationTarget::SelfDeclared).unwrap(), vec![]);
    let mixed = std::fs::read_to_string(fixtures().join("events/mixed-versions.ndjson")).unwrap();
    for line in mixed.lines() {
        let e = parse_json(line).unwrap();
        assert_eq!(validate(&r, &e, &ValidationTarget::SelfDeclared).unwrap(), vec![], "{line}");
        let out = transform_to_latest(&r, &t, &e).unwrap();
        assert_eq!(validate(&r, &out, &ValidationTarget::Latest(None)).unwrap(), vec![], "{out}");
    }
    let ops = diff(&r, "View Item", 1, 2).unwrap();
    assert_eq!(ops.len(), 1, "{ops:?}");
}
