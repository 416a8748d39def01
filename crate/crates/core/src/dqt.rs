//! Consumer-defined data quality checks over a sampled event stream.
//!
//! A check module is one JSON file whose keys are check names and whose
//! values are `{description, solutionUrl, filter, check}` records; the file
//! stem names the owning consumer. Each sampled event runs every check: the
//! filter decides applicability, the check decides validity, and the outcome
//! increments a counter tagged with the event type, tracker type and tenant.
//!
//! Counters per check and tag set obey
//! `applicable = valid + invalid + error`, where check runtime errors are
//! reported as `<check>.invalid` carrying the tag `error=check`. Filter
//! errors make a check not applicable and are counted in `<check>.filter_error`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::jslt::{truthy, CompileError, JsltProgram, RuntimeError};
use crate::json::{parse_json, JsonValue, Map};
use crate::registry::Registry;
use crate::validator::{validate, ValidationTarget};

pub const PARSE_ERROR_METRIC: &str = "parse_error";
/// Name of the built-in check that validates events against their declared schema.
pub const SCHEMA_CHECK: &str = "schema_compliance";
pub const UNKNOWN_TAG: &str = "unknown";
pub const ERROR_TAG: &str = "error";

#[derive(Debug, thiserror::Error)]
pub enum DqtError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: {message}", path.display())]
    BadModule { path: PathBuf, message: String },
    #[error("{}: check '{check}', {field}: {error}", path.display())]
    Compile {
        path: PathBuf,
        check: String,
        field: &'static str,
        error: CompileError,
    },
    #[error("check '{check}' is defined by both '{first}' and '{second}'")]
    DuplicateCheck { check: String, first: String, second: String },
    #[error("sampling rate must be in (0, 1], got {0}")]
    BadRate(f64),
    #[error("reading events")]
    Read(#[source] io::Error),
    #[error("writing metrics")]
    Sink(#[source] io::Error),
}

#[derive(Debug, Clone)]
pub struct CheckDef {
    pub name: String,
    pub description: String,
    pub solution_url: String,
    pub filter: JsltProgram,
    pub check: JsltProgram,
}

/// Result of one check on one event.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckOutcome {
    NotApplicable,
    FilterError(RuntimeError),
    Valid,
    Invalid,
    CheckError(RuntimeError),
}

impl CheckOutcome {
    pub fn applicable(&self) -> bool {
        matches!(self, CheckOutcome::Valid | CheckOutcome::Invalid | CheckOutcome::CheckError(_))
    }

    /// `None` when the check did not apply.
    pub fn valid(&self) -> Option<bool> {
        match self {
            CheckOutcome::Valid => Some(true),
            CheckOutcome::Invalid | CheckOutcome::CheckError(_) => Some(false),
            _ => None,
        }
    }
}

impl CheckDef {
    pub fn compile(
        name: impl Into<String>,
        description: impl Into<String>,
        solution_url: impl Into<String>,
        filter: &str,
        check: &str,
    ) -> Result<Self, (&'static str, CompileError)> {
        Ok(CheckDef {
            name: name.into(),
            description: description.into(),
            solution_url: solution_url.into(),
            filter: JsltProgram::compile(filter).map_err(|e| ("filter", e))?,
            check: JsltProgram::compile(check).map_err(|e| ("check", e))?,
        })
    }

    /// The filter runs first; the check runs only when the filter's value is
    /// truthy.
    pub fn run(&self, event: &JsonValue) -> CheckOutcome {
        match self.filter.evaluate(event) {
            Err(e) => return CheckOutcome::FilterError(e),
            Ok(v) if !truthy(&v) => return CheckOutcome::NotApplicable,
            Ok(_) => {}
        }
        match self.check.evaluate(event) {
            Ok(v) if truthy(&v) => CheckOutcome::Valid,
            Ok(_) => CheckOutcome::Invalid,
            Err(e) => CheckOutcome::CheckError(e),
        }
    }
}

pub fn run_check(check: &CheckDef, event: &JsonValue) -> CheckOutcome {
    check.run(event)
}

#[derive(Debug, Clone)]
pub struct CheckModule {
    pub owner: String,
    pub checks: Vec<CheckDef>,
}

impl CheckModule {
    pub fn parse(owner: impl Into<String>, text: &str, path: &Path) -> Result<Self, DqtError> {
        let bad = |message: String| DqtError::BadModule {
            path: path.to_path_buf(),
            message,
        };
        let value = parse_json(text).map_err(|e| bad(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| bad("a check module must be an object".into()))?;
        if obj.is_empty() {
            return Err(bad("a check module must define at least one check".into()));
        }
        let mut checks = Vec::with_capacity(obj.len());
        for (name, record) in obj {
            let rec = record
                .as_object()
                .ok_or_else(|| bad(format!("check '{name}' must be an object")))?;
            if let Some(k) = rec
                .keys()
                .find(|k| !["description", "solutionUrl", "filter", "check"].contains(&k.as_str()))
            {
                return Err(bad(format!("check '{name}': unknown key '{k}'")));
            }
            let field = |key: &str| -> Result<&str, DqtError> {
                rec.get(key)
                    .and_then(JsonValue::as_str)
                    .ok_or_else(|| bad(format!("check '{name}': '{key}' must be a string")))
            };
            let description = field("description")?;
            let solution_url = field("solutionUrl")?;
            let def = CheckDef::compile(name.as_str(), description, solution_url, field("filter")?, field("check")?)
                .map_err(|(field, error)| DqtError::Compile {
                    path: path.to_path_buf(),
                    check: name.clone(),
                    field,
                    error,
                })?;
            checks.push(def);
        }
        Ok(CheckModule {
            owner: owner.into(),
            checks,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DqtError> {
        let text = fs::read_to_string(path).map_err(|e| DqtError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let owner = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        CheckModule::parse(owner, &text, path)
    }

    /// Every `*.json` file in `dir`, sorted by name. Check names must be
    /// unique across the returned modules.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>, DqtError> {
        let io = |e: io::Error| DqtError::Io {
            path: dir.to_path_buf(),
            message: e.to_string(),
        };
        let mut files = Vec::new();
        for entry in fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                files.push(path);
            }
        }
        files.sort();
        let modules = files.iter().map(|p| CheckModule::load(p)).collect::<Result<Vec<_>, _>>()?;
        check_unique(&modules)?;
        Ok(modules)
    }
}

fn check_unique(modules: &[CheckModule]) -> Result<(), DqtError> {
    let mut seen: HashMap<&str, &str> = HashMap::new();
    for m in modules {
        for c in &m.checks {
            if let Some(first) = seen.insert(&c.name, &m.owner) {
                return Err(DqtError::DuplicateCheck {
                    check: c.name.clone(),
                    first: first.to_string(),
                    second: m.owner.clone(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingStrategy {
    /// Keyed on the event's `@id` (the line text when absent); reruns pick
    /// the same events regardless of order.
    HashOfId,
    /// Keyed on the seed and the line number.
    SeededRandom { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub rate: f64,
    pub strategy: SamplingStrategy,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            rate: 0.01,
            strategy: SamplingStrategy::HashOfId,
        }
    }
}

impl SamplerConfig {
    pub fn new(rate: f64, strategy: SamplingStrategy) -> Result<Self, DqtError> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(DqtError::BadRate(rate));
        }
        Ok(SamplerConfig { rate, strategy })
    }

    pub fn selects(&self, event: &JsonValue, line: &str, index: u64) -> bool {
        if self.rate >= 1.0 {
            return true;
        }
        let mut h = Sha256::new();
        match self.strategy {
            SamplingStrategy::HashOfId => match event.get("@id").and_then(JsonValue::as_str) {
                Some(id) => h.update(id.as_bytes()),
                None => h.update(line.as_bytes()),
            },
            SamplingStrategy::SeededRandom { seed } => {
                h.update(seed.to_le_bytes());
                h.update(index.to_le_bytes());
            }
        }
        let digest = h.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        // top 53 bits give a uniform draw in [0, 1)
        let unit = (u64::from_be_bytes(head) >> 11) as f64 / (1u64 << 53) as f64;
        unit < self.rate
    }
}

/// Tag set attached to every metric of one event.
pub type Tags = BTreeMap<String, String>;

/// `eventType` from `@type`, `trackerType` from `tracker.type`, `tenant` from
/// the last `:` segment of `provider.@id`.
pub fn event_tags(event: &JsonValue) -> Tags {
    let text = |v: Option<&JsonValue>| v.and_then(JsonValue::as_str).map(str::to_string);
    let mut tags = Tags::new();
    let event_type = text(event.get("@type"));
    let tracker = text(event.get("tracker").and_then(|t| t.get("type")));
    let tenant = text(event.get("provider").and_then(|p| p.get("@id")))
        .map(|id| id.rsplit(':').next().unwrap_or_default().to_string())
        .filter(|t| !t.is_empty());
    tags.insert("eventType".into(), event_type.unwrap_or_else(|| UNKNOWN_TAG.into()));
    tags.insert("trackerType".into(), tracker.unwrap_or_else(|| UNKNOWN_TAG.into()));
    tags.insert("tenant".into(), tenant.unwrap_or_else(|| UNKNOWN_TAG.into()));
    tags
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetricKey {
    pub metric: String,
    pub tags: Tags,
    /// Start of the window holding the event's `published` time; `None` when
    /// the event has no parseable `published`.
    pub window: Option<DateTime<Utc>>,
}

/// Merge-safe counters: merging is commutative and associative.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    counts: HashMap<MetricKey, u64>,
}

impl Counters {
    pub fn add(&mut self, key: MetricKey, n: u64) {
        *self.counts.entry(key).or_insert(0) += n;
    }

    pub fn merge(mut self, other: Counters) -> Counters {
        let (mut big, small) = if self.counts.len() >= other.counts.len() {
            (std::mem::take(&mut self.counts), other.counts)
        } else {
            (other.counts, std::mem::take(&mut self.counts))
        };
        for (k, n) in small {
            *big.entry(k).or_insert(0) += n;
        }
        Counters { counts: big }
    }

    pub fn get(&self, key: &MetricKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    /// Sum over every tag set and window for one metric name.
    pub fn total(&self, metric: &str) -> u64 {
        self.counts.iter().filter(|(k, _)| k.metric == metric).map(|(_, n)| n).sum()
    }

    /// All counters in a stable order.
    pub fn sorted(&self) -> Vec<(&MetricKey, u64)> {
        let mut out: Vec<_> = self.counts.iter().map(|(k, n)| (k, *n)).collect();
        out.sort();
        out
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// One emitted metric line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricLine {
    pub metric: String,
    pub tags: Tags,
    pub count: u64,
    pub window: Option<String>,
}

impl MetricLine {
    fn new(key: &MetricKey, count: u64) -> Self {
        MetricLine {
            metric: key.metric.clone(),
            tags: key.tags.clone(),
            count,
            window: key.window.map(|w| w.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
        }
    }

    pub fn to_json(&self) -> JsonValue {
        let mut m = Map::new();
        m.insert("metric".into(), self.metric.as_str().into());
        m.insert(
            "tags".into(),
            JsonValue::Object(self.tags.iter().map(|(k, v)| (k.clone(), v.as_str().into())).collect()),
        );
        m.insert("count".into(), JsonValue::number(self.count as f64));
        m.insert("window".into(), self.window.as_deref().map_or(JsonValue::Null, JsonValue::from));
        JsonValue::Object(m)
    }
}

pub trait MetricSink {
    fn emit(&mut self, line: &MetricLine) -> io::Result<()>;

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Writes one JSON object per line.
pub struct NdjsonSink<W: Write> {
    out: W,
}

impl<W: Write> NdjsonSink<W> {
    pub fn new(out: W) -> Self {
        NdjsonSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> MetricSink for NdjsonSink<W> {
    fn emit(&mut self, line: &MetricLine) -> io::Result<()> {
        writeln!(self.out, "{}", line.to_json())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[derive(Debug, Default)]
pub struct MemorySink {
    pub lines: Vec<MetricLine>,
}

impl MetricSink for MemorySink {
    fn emit(&mut self, line: &MetricLine) -> io::Result<()> {
        self.lines.push(line.clone());
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sampler: SamplerConfig,
    pub window_secs: i64,
    /// Adds the [`SCHEMA_CHECK`] check, which validates every sampled event
    /// against the schema it declares.
    pub schema_compliance: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sampler: SamplerConfig::default(),
            window_secs: 60,
            schema_compliance: true,
        }
    }
}

/// Totals for one check and tag set, summed over windows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CheckTotals {
    pub applicable: u64,
    pub valid: u64,
    pub invalid: u64,
    pub error: u64,
    pub filter_error: u64,
}

impl CheckTotals {
    pub fn valid_percentage(&self) -> Option<f64> {
        (self.applicable > 0).then(|| 100.0 * self.valid as f64 / self.applicable as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub lines: u64,
    pub parse_errors: u64,
    pub sampled: u64,
    pub counters: Counters,
    /// Keyed by check name and tag set.
    pub checks: BTreeMap<(String, Tags), CheckTotals>,
}

impl RunSummary {
    /// Totals for one check over every tag set.
    pub fn check_totals(&self, check: &str) -> CheckTotals {
        let mut t = CheckTotals::default();
        for ((name, _), c) in &self.checks {
            if name == check {
                t.applicable += c.applicable;
                t.valid += c.valid;
                t.invalid += c.invalid;
                t.error += c.error;
                t.filter_error += c.filter_error;
            }
        }
        t
    }

    /// Valid percentage of one check per window, in time order.
    pub fn series(&self, check: &str) -> Vec<(Option<DateTime<Utc>>, f64)> {
        let mut by_window: BTreeMap<Option<DateTime<Utc>>, (u64, u64)> = BTreeMap::new();
        let valid = format!("{check}.valid");
        let invalid = format!("{check}.invalid");
        for (key, n) in self.counters.sorted() {
            let slot = by_window.entry(key.window).or_default();
            if key.metric == valid {
                slot.0 += n;
                slot.1 += n;
            } else if key.metric == invalid {
                slot.1 += n;
            }
        }
        by_window
            .into_iter()
            .filter(|(_, (_, all))| *all > 0)
            .map(|(w, (v, all))| (w, 100.0 * v as f64 / all as f64))
            .collect()
    }
}

/// Checks and settings for a stream run.
pub struct Runner<'a> {
    checks: Vec<&'a CheckDef>,
    registry: Option<&'a Registry>,
    config: RunConfig,
}

impl<'a> Runner<'a> {
    /// `registry` is needed only for the schema compliance check.
    pub fn new(modules: &'a [CheckModule], registry: Option<&'a Registry>, config: RunConfig) -> Result<Self, DqtError> {
        check_unique(modules)?;
        if !(config.sampler.rate > 0.0 && config.sampler.rate <= 1.0) {
            return Err(DqtError::BadRate(config.sampler.rate));
        }
        Ok(Runner {
            checks: modules.iter().flat_map(|m| &m.checks).collect(),
            registry,
            config,
        })
    }

    fn window(&self, event: &JsonValue) -> Option<DateTime<Utc>> {
        let published = event.get("published")?.as_str()?;
        let t = DateTime::parse_from_rfc3339(published).ok()?.with_timezone(&Utc);
        let size = self.config.window_secs.max(1);
        let start = t.timestamp().div_euclid(size) * size;
        Utc.timestamp_opt(start, 0).single()
    }

    /// Counts one line; returns the line's contribution.
    fn line(&self, index: u64, line: &str, acc: &mut Partial) {
        if line.trim().is_empty() {
            return;
        }
        acc.lines += 1;
        let event = match parse_json(line) {
            Ok(v) if v.as_object().is_some() => v,
            _ => {
                acc.parse_errors += 1;
                acc.counters.add(
                    MetricKey {
                        metric: PARSE_ERROR_METRIC.into(),
                        tags: Tags::new(),
                        window: None,
                    },
                    1,
                );
                return;
            }
        };
        if !self.config.sampler.selects(&event, line, index) {
            return;
        }
        acc.sampled += 1;
        let tags = event_tags(&event);
        let window = self.window(&event);
        let mut bump = |metric: String, tags: &Tags| {
            acc.counters.add(
                MetricKey {
                    metric,
                    tags: tags.clone(),
                    window,
                },
                1,
            );
        };
        for check in &self.checks {
            let name = &check.name;
            match check.run(&event) {
                CheckOutcome::NotApplicable => {}
                CheckOutcome::FilterError(_) => bump(format!("{name}.filter_error"), &tags),
                CheckOutcome::Valid => bump(format!("{name}.valid"), &tags),
                CheckOutcome::Invalid => bump(format!("{name}.invalid"), &tags),
                CheckOutcome::CheckError(_) => {
                    let mut t = tags.clone();
                    t.insert(ERROR_TAG.into(), "check".into());
                    bump(format!("{name}.invalid"), &t);
                }
            }
        }
        if let (true, Some(registry)) = (self.config.schema_compliance, self.registry) {
            let ok = matches!(validate(registry, &event, &ValidationTarget::SelfDeclared), Ok(m) if m.is_empty());
            let outcome = if ok { "valid" } else { "invalid" };
            bump(format!("{SCHEMA_CHECK}.{outcome}"), &tags);
        }
    }

    /// Processes `lines`, in parallel, and returns the merged counters.
    pub fn run_lines<S: AsRef<str> + Sync>(&self, lines: &[S]) -> RunSummary {
        let partial = lines
            .par_iter()
            .enumerate()
            .fold(Partial::default, |mut acc, (i, l)| {
                self.line(i as u64, l.as_ref(), &mut acc);
                acc
            })
            .reduce(Partial::default, Partial::merge);
        self.summarize(partial)
    }

    /// Reads NDJSON from `input` in batches, then flushes every counter to `sink`.
    pub fn run_stream<R: BufRead, K: MetricSink + ?Sized>(&self, input: R, sink: &mut K) -> Result<RunSummary, DqtError> {
        const BATCH: usize = 8192;
        let mut total = Partial::default();
        let mut batch: Vec<String> = Vec::with_capacity(BATCH);
        let mut offset = 0u64;
        let mut lines = input.lines();
        loop {
            batch.clear();
            for line in lines.by_ref().take(BATCH) {
                batch.push(line.map_err(DqtError::Read)?);
            }
            if batch.is_empty() {
                break;
            }
            let part = batch
                .par_iter()
                .enumerate()
                .fold(Partial::default, |mut acc, (i, l)| {
                    self.line(offset + i as u64, l, &mut acc);
                    acc
                })
                .reduce(Partial::default, Partial::merge);
            offset += batch.len() as u64;
            total = total.merge(part);
        }
        let summary = self.summarize(total);
        for (key, n) in summary.counters.sorted() {
            sink.emit(&MetricLine::new(key, n)).map_err(DqtError::Sink)?;
        }
        sink.flush().map_err(DqtError::Sink)?;
        Ok(summary)
    }

    fn summarize(&self, p: Partial) -> RunSummary {
        let mut checks: BTreeMap<(String, Tags), CheckTotals> = BTreeMap::new();
        for (key, n) in p.counters.sorted() {
            let Some((name, outcome)) = key.metric.rsplit_once('.') else {
                continue;
            };
            let mut tags = key.tags.clone();
            let errored = tags.remove(ERROR_TAG).is_some();
            let t = checks.entry((name.to_string(), tags)).or_default();
            match outcome {
                "valid" => t.valid += n,
                "invalid" if errored => t.error += n,
                "invalid" => t.invalid += n,
                "filter_error" => t.filter_error += n,
                _ => continue,
            }
            if outcome != "filter_error" {
                t.applicable += n;
            }
        }
        RunSummary {
            lines: p.lines,
            parse_errors: p.parse_errors,
            sampled: p.sampled,
            counters: p.counters,
            checks,
        }
    }
}

#[derive(Default)]
struct Partial {
    lines: u64,
    parse_errors: u64,
    sampled: u64,
    counters: Counters,
}

impl Partial {
    fn merge(self, other: Partial) -> Partial {
        Partial {
            lines: self.lines + other.lines,
            parse_errors: self.parse_errors + other.parse_errors,
            sampled: self.sampled + other.sampled,
            counters: self.counters.merge(other.counters),
        }
    }
}

/// Runs `modules` over an NDJSON stream and writes the metrics to `sink`.
pub fn run_stream<R: BufRead, K: MetricSink + ?Sized>(
    modules: &[CheckModule],
    registry: Option<&Registry>,
    input: R,
    config: RunConfig,
    sink: &mut K,
) -> Result<RunSummary, DqtError> {
    Runner::new(modules, registry, config)?.run_stream(input, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::json;

    const LISTING: &str = r#"{
  "user_id_format": {
    "description": "User ID must be a number",
    "solutionUrl": "https://example.org/user-ids",
    "filter": ".actor.\"spt:userId\"",
    "check": "test(.actor.\"spt:userId\", \"^sdrn:[^:]+:user:\")"
  }
}"#;

    fn module() -> CheckModule {
        CheckModule::parse("user-modeling", LISTING, Path::new("user-modeling.json")).unwrap()
    }

    #[test]
    fn filter_gates_the_check() {
        let m = module();
        let c = &m.checks[0];
        assert_eq!(c.run(&json!({"actor": {}})), CheckOutcome::NotApplicable);
        assert_eq!(c.run(&json!({"actor": {"spt:userId": "sdrn:cp:user:9"}})), CheckOutcome::Valid);
        assert_eq!(c.run(&json!({"actor": {"spt:userId": "bob"}})), CheckOutcome::Invalid);
        assert!(matches!(c.run(&json!({"actor": {"spt:userId": 5}})), CheckOutcome::CheckError(_)));
    }

    #[test]
    fn tags_come_from_the_envelope() {
        let tags = event_tags(&json!({
            "@type": "View", "tracker": {"type": "web"}, "provider": {"@id": "sdrn:schibsted:client:tenant-a"}
        }));
        assert_eq!(tags["eventType"], "View");
        assert_eq!(tags["trackerType"], "web");
        assert_eq!(tags["tenant"], "tenant-a");
        assert_eq!(event_tags(&json!({}))["tenant"], UNKNOWN_TAG);
    }

    #[test]
    fn counts_conserve_and_errors_are_tagged() {
        let lines = [
            r#"{"@id":"1","actor":{"spt:userId":"sdrn:a:user:1"},"published":"2020-01-01T00:00:30Z"}"#,
            r#"{"@id":"2","actor":{"spt:userId":"nope"},"published":"2020-01-01T00:01:30Z"}"#,
            r#"{"@id":"3","actor":{"spt:userId":7}}"#,
            r#"{"@id":"4"}"#,
            "not json",
            "[1]",
        ];
        let modules = [module()];
        let cfg = RunConfig {
            sampler: SamplerConfig::new(1.0, SamplingStrategy::HashOfId).unwrap(),
            schema_compliance: false,
            ..Default::default()
        };
        let mut sink = MemorySink::default();
        let text = lines.join("\n");
        let s = run_stream(&modules, None, text.as_bytes(), cfg, &mut sink).unwrap();
        assert_eq!((s.lines, s.parse_errors, s.sampled), (6, 2, 4));
        let t = s.check_totals("user_id_format");
        assert_eq!((t.applicable, t.valid, t.invalid, t.error), (3, 1, 1, 1));
        assert_eq!(t.applicable, t.valid + t.invalid + t.error);
        let errored = sink.lines.iter().find(|l| l.tags.contains_key(ERROR_TAG)).unwrap();
        assert_eq!(errored.metric, "user_id_format.invalid");
        assert!(sink.lines.iter().any(|l| l.window.as_deref() == Some("2020-01-01T00:01:00Z")));
        assert_eq!(s.series("user_id_format").len(), 3);
    }

    #[test]
    fn rejects_bad_modules_and_rates() {
        let p = Path::new("m.json");
        assert!(CheckModule::parse("m", "{}", p).is_err());
        assert!(CheckModule::parse("m", r#"{"c": {"description":"","solutionUrl":"","filter":"(","check":"true"}}"#, p).is_err());
        assert!(SamplerConfig::new(0.0, SamplingStrategy::HashOfId).is_err());
        assert!(SamplerConfig::new(1.5, SamplingStrategy::HashOfId).is_err());
        assert!(check_unique(&[module(), module()]).is_err());
    }

    #[test]
    fn hash_sampling_ignores_order() {
        let s = SamplerConfig::new(0.3, SamplingStrategy::HashOfId).unwrap();
        let ev = |i: u32| json!({"@id": format!("id-{i}")});
        let picked: Vec<u32> = (0..200).filter(|&i| s.selects(&ev(i), "", i as u64)).collect();
        let again: Vec<u32> = (0..200).rev().filter(|&i| s.selects(&ev(i), "", 999)).collect();
        let mut again = again;
        again.reverse();
        assert_eq!(picked, again);
        assert!(!picked.is_empty() && picked.len() < 200);
    }
}
