use std::fs;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use semschema_core::dqt::{CheckModule, RunConfig, Runner, SamplerConfig, SamplingStrategy};
use semschema_core::jslt::JsltProgram;
use semschema_core::json::parse_json;
use semschema_core::registry::Registry;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn jslt(c: &mut Criterion) {
    let program = JsltProgram::compile(&fs::read_to_string(fixtures().join("jslt/listing1.jslt")).unwrap()).unwrap();
    let input = parse_json(&fs::read_to_string(fixtures().join("jslt/listing1-input.json")).unwrap()).unwrap();
    c.bench_function("listing1 transform", |b| b.iter(|| program.evaluate(&input).unwrap()));
}

fn dqt(c: &mut Criterion) {
    let registry = Registry::load_repo(&fixtures().join("repo")).unwrap();
    let modules = CheckModule::load_dir(&fixtures().join("dqt")).unwrap();
    let lines: Vec<String> = fs::read_to_string(fixtures().join("events/dqt-1000.ndjson"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    let config = RunConfig {
        sampler: SamplerConfig::new(1.0, SamplingStrategy::HashOfId).unwrap(),
        ..RunConfig::default()
    };
    let runner = Runner::new(&modules, Some(&registry), config).unwrap();
    let mut group = c.benchmark_group("dqt");
    group.throughput(Throughput::Elements(lines.len() as u64));
    group.bench_function("all checks, full sampling", |b| b.iter(|| runner.run_lines(&lines)));
    group.finish();
}

criterion_group!(benches, jslt, dqt);
criterion_main!(benches);
