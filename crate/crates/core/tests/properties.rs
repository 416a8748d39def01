use std::fs;
use std::path::PathBuf;
use std::sync::OnceLock;

use chrono::{TimeZone, Utc};
use indexmap::IndexMap;
use proptest::prelude::*;
use semschema_core::dqt::{CheckModule, Counters, MetricKey, RunConfig, Runner, SamplerConfig, SamplingStrategy, Tags};
use semschema_core::evolution::{apply_ops, diff_trees, Node, SchemaTree};
use semschema_core::generator::{generate_valid, GenConfig};
use semschema_core::json::{parse_json, JsonValue, Map};
use semschema_core::pattern::{generate_from_pattern, Pattern};
use semschema_core::registry::Registry;
use semschema_core::validator::validate_resolved;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn registry() -> &'static Registry {
    static R: OnceLock<Registry> = OnceLock::new();
    R.get_or_init(|| Registry::load_repo(&fixtures().join("repo")).unwrap())
}

fn json_value() -> impl Strategy<Value = JsonValue> {
    let leaf = prop_oneof![
        Just(JsonValue::Null),
        any::<bool>().prop_map(JsonValue::Bool),
        (-1e12f64..1e12).prop_map(JsonValue::number),
        any::<i32>().prop_map(|n| JsonValue::number(n as f64)),
        "\\PC{0,12}".prop_map(JsonValue::String),
    ];
    leaf.prop_recursive(4, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..6).prop_map(JsonValue::Array),
            prop::collection::vec(("[a-z@:]{1,6}", inner), 0..6)
                .prop_map(|kv| JsonValue::Object(kv.into_iter().collect::<Map>())),
        ]
    })
}

const PATTERNS: &[&str] = &[
    "^[a-z]+-[0-9]+$",
    "^sdrn:[^:]+:user:[0-9]{1,8}$",
    "^(web|ios|android)$",
    "^[A-Z][a-z]{2,5}( [A-Z][a-z]{2,5})?$",
    "^urn:[a-f0-9]{8}-[a-f0-9]{4}$",
    "^x?y*z+\\d\\w$",
];

fn leaf_node() -> impl Strategy<Value = Node> {
    prop_oneof![
        Just(Node::Number),
        Just(Node::String { pattern: None }),
        prop::sample::select(PATTERNS).prop_map(|p| Node::String {
            pattern: Some(Pattern::new(p).unwrap())
        }),
        prop::collection::vec(0u8..4, 1..3)
            .prop_map(|v| Node::Enum(v.into_iter().map(|n| JsonValue::number(n as f64)).collect())),
    ]
}

fn schema_tree() -> impl Strategy<Value = SchemaTree> {
    let node = leaf_node().prop_recursive(2, 16, 4, |inner| {
        prop_oneof![
            inner.clone().prop_map(|n| Node::Array(Box::new(n))),
            level(inner).prop_map(Node::Object),
        ]
    });
    level(node)
}

fn level(node: impl Strategy<Value = Node> + Clone) -> impl Strategy<Value = SchemaTree> {
    prop::collection::vec((prop::sample::select(&["a", "b", "c", "d", "e"][..]), node, any::<bool>()), 0..5).prop_map(
        |entries| {
            let mut properties = IndexMap::new();
            let mut required = Vec::new();
            for (name, node, req) in entries {
                if properties.insert(name.to_string(), node).is_none() && req {
                    required.push(name.to_string());
                }
            }
            SchemaTree { properties, required }
        },
    )
}

fn metric_key() -> impl Strategy<Value = MetricKey> {
    (
        prop::sample::select(&["m.valid", "m.invalid", "n.valid"][..]),
        prop::sample::select(&["web", "ios"][..]),
        prop::option::of(0i64..3),
    )
        .prop_map(|(metric, tracker, window)| MetricKey {
            metric: metric.into(),
            tags: Tags::from([("trackerType".to_string(), tracker.to_string())]),
            window: window.map(|w| Utc.timestamp_opt(w * 60, 0).unwrap()),
        })
}

fn counters(entries: &[(MetricKey, u64)]) -> Counters {
    let mut c = Counters::default();
    for (k, n) in entries {
        c.add(k.clone(), *n);
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn json_text_round_trips(v in json_value()) {
        let text = v.to_json_string();
        prop_assert_eq!(parse_json(&text).unwrap(), v.clone());
        prop_assert_eq!(parse_json(&v.to_pretty_string()).unwrap(), v);
    }

    #[test]
    fn generated_strings_match_their_pattern(p in prop::sample::select(PATTERNS), seed in any::<u64>()) {
        let s = generate_from_pattern(p, seed).unwrap();
        prop_assert!(regex::Regex::new(p).unwrap().is_match(&s), "{} !~ {}", s, p);
        prop_assert_eq!(generate_from_pattern(p, seed).unwrap(), s);
    }

    #[test]
    fn generated_events_validate(index in any::<prop::sample::Index>(), seed in any::<u64>()) {
        let r = registry();
        let pairs: Vec<(&str, u32)> = r
            .titles()
            .flat_map(|t| (0..=r.latest_version(t).unwrap()).map(move |v| (t, v)))
            .filter(|(t, v)| !r.resolve(t, *v).unwrap().tombstoned)
            .collect();
        let (title, version) = *index.get(&pairs);
        let value = generate_valid(r, title, version, &GenConfig::with_seed(seed)).unwrap();
        let schema = r.resolve(title, version).unwrap();
        let mismatches = validate_resolved(r, &schema, &value);
        prop_assert!(mismatches.is_empty(), "{title}@{version}: {mismatches:?}");
    }

    #[test]
    fn applied_diff_reproduces_target(a in schema_tree(), b in schema_tree()) {
        let ops = diff_trees(&a, &b);
        let replayed = apply_ops(&a, &ops).unwrap();
        prop_assert!(replayed.same_as(&b), "{:?}\n{:?}", replayed, b);
        prop_assert!(diff_trees(&a, &a).is_empty());
    }

    #[test]
    fn counter_merge_ignores_order(entries in prop::collection::vec((metric_key(), 1u64..5), 0..40), split in any::<prop::sample::Index>()) {
        let cut = if entries.is_empty() { 0 } else { split.index(entries.len() + 1) };
        let (left, right) = entries.split_at(cut);
        let whole = counters(&entries);
        prop_assert_eq!(counters(left).merge(counters(right)), whole.clone());
        prop_assert_eq!(counters(right).merge(counters(left)), whole.clone());
        let mut reversed = entries.clone();
        reversed.reverse();
        prop_assert_eq!(counters(&reversed), whole);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // every applicable event lands in exactly one of valid, invalid or error
    #[test]
    fn check_outcomes_are_conserved(picks in prop::collection::vec(any::<prop::sample::Index>(), 1..200)) {
        let pool: Vec<String> = fs::read_to_string(fixtures().join("events/dqt-1000.ndjson"))
            .unwrap()
            .lines()
            .map(str::to_string)
            .chain(["{\"actor\":{\"spt:userId\":7}}".to_string(), "not json".to_string()])
            .collect();
        let lines: Vec<&String> = picks.iter().map(|i| i.get(&pool)).collect();
        let modules = CheckModule::load_dir(&fixtures().join("dqt")).unwrap();
        let config = RunConfig {
            sampler: SamplerConfig::new(1.0, SamplingStrategy::HashOfId).unwrap(),
            ..RunConfig::default()
        };
        let runner = Runner::new(&modules, Some(registry()), config).unwrap();
        let summary = runner.run_lines(&lines);
        prop_assert_eq!(summary.sampled + summary.parse_errors, lines.len() as u64);
        for name in ["user_id_format", "age_range", "schema_compliance"] {
            let t = summary.check_totals(name);
            prop_assert_eq!(t.applicable, t.valid + t.invalid + t.error, "{}", name);
            prop_assert!(t.applicable + t.filter_error <= summary.sampled);
        }
    }
}
