//! Command line definitions and dispatch.
//!
//! Every command writes results to stdout and failures to stderr as NDJSON.
//! Exit codes: 0 success, 1 a check failed (invalid events, failing
//! consumers, broken transforms), 2 usage or input errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use semschema_core::dqt::{CheckModule, NdjsonSink, RunConfig, Runner, SamplerConfig, SamplingStrategy};
use semschema_core::evolution::{
    breaking_since, change_impact_test, diff, is_breaking, transform_to_latest, verify_transforms, ConsumerSample,
    TransformSet,
};
use semschema_core::generator::{fragment_from_partial, generate_valid, GenConfig};
use semschema_core::jslt::JsltProgram;
use semschema_core::json::{parse_json, JsonValue, Map};
use semschema_core::registry::{properties_to_json, Registry, RegistryConfig, SchemaDoc};
use semschema_core::validator::{validate, ValidationTarget};

use crate::server::{serve, ServerConfig};

#[derive(Debug, Parser)]
#[command(name = "semschema", version, about = "Semantic schema registry and data quality tooling")]
pub struct Cli {
    /// Schema repository directory.
    #[arg(long, global = true, default_value = ".")]
    pub repo: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create, inspect and change schemas.
    #[command(subcommand)]
    Schema(SchemaCmd),
    /// Validate NDJSON events.
    Validate(ValidateArgs),
    /// Generate random valid instances of a schema.
    Generate(GenerateArgs),
    /// Structural changes between two versions of a title.
    Diff(DiffArgs),
    /// Move events to the latest version, or check registered transforms.
    Transform(TransformArgs),
    /// Test a proposed schema version against consumer samples.
    ImpactTest(ImpactArgs),
    /// Evaluate a JSLT program.
    Jslt(JsltArgs),
    /// Data quality checks.
    #[command(subcommand)]
    Dqt(DqtCmd),
    /// Run the schema server.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum SchemaCmd {
    /// Create an empty repository.
    Init {
        #[arg(long)]
        host: String,
        #[arg(long)]
        base_event: Option<String>,
        #[arg(long)]
        base_object: Option<String>,
    },
    /// List titles with their kind and latest version.
    List,
    /// Print a stored schema document.
    Show { schema: String },
    /// Print a schema with its inheritance flattened.
    Resolve { schema: String },
    /// Register a document file as the next version of its title.
    Register { file: PathBuf },
    /// Retire a title by publishing an empty version.
    Tombstone { title: String },
    /// Tag a release; breaking changes since the last tag are detected.
    Tag {
        /// Force a major bump.
        #[arg(long)]
        major: bool,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["schema", "latest", "self_declared"])))]
pub struct ValidateArgs {
    /// `title` or `title@version`; a bare title means its latest version.
    #[arg(long)]
    pub schema: Option<String>,
    /// Latest version of the title each event declares.
    #[arg(long)]
    pub latest: bool,
    /// The exact version each event declares.
    #[arg(long = "self")]
    pub self_declared: bool,
    /// NDJSON file, or `-` for stdin.
    pub events: String,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// `title` or `title@version`.
    pub schema: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// JSON file with a partial instance that must appear verbatim.
    #[arg(long)]
    pub fragment: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    pub title: String,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["to_latest", "verify"])))]
pub struct TransformArgs {
    /// NDJSON file of events, or `-` for stdin.
    #[arg(long, value_name = "EVENTS")]
    pub to_latest: Option<String>,
    /// Run every registered transform on generated inputs.
    #[arg(long)]
    pub verify: bool,
    /// Generated inputs per step for `--verify`.
    #[arg(long, default_value_t = 50, requires = "verify")]
    pub samples: u64,
}

#[derive(Debug, Args)]
pub struct ImpactArgs {
    #[arg(long)]
    pub proposal: PathBuf,
    /// Directory of consumer sample files.
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["expr", "file"])))]
pub struct JsltArgs {
    /// Program text.
    #[arg(long, short)]
    pub expr: Option<String>,
    /// Program file.
    #[arg(long, short)]
    pub file: Option<PathBuf>,
    /// A JSON document or NDJSON stream; `-` for stdin.
    #[arg(default_value = "-")]
    pub input: String,
}

#[derive(Debug, Subcommand)]
pub enum DqtCmd {
    /// Run check modules over an NDJSON event stream.
    Run(DqtRunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Strategy {
    Hash,
    Random,
}

#[derive(Debug, Args)]
pub struct DqtRunArgs {
    /// Directory of check module files.
    #[arg(long)]
    pub modules: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub rate: f64,
    #[arg(long, value_enum, default_value_t = Strategy::Hash)]
    pub strategy: Strategy,
    /// Seed for `--strategy random`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// NDJSON file, or `-` for stdin.
    #[arg(long)]
    pub events: String,
    /// Output file, or `stdout`.
    #[arg(long, default_value = "stdout")]
    pub sink: String,
    #[arg(long, default_value_t = 60)]
    pub window_secs: i64,
    /// Skip validating events against their declared schema.
    #[arg(long)]
    pub no_schema_check: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Allow `/reload`.
    #[arg(long)]
    pub writable: bool,
}

/// Standard streams of one invocation.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

fn diagnostic(message: impl ToString) -> String {
    let mut m = Map::new();
    m.insert("error".into(), message.to_string().into());
    JsonValue::Object(m).to_string()
}

/// Parses `args` and runs the command; returns the exit code.
pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(io.stdout, "{e}");
                return 0;
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            let _ = writeln!(io.stderr, "{}", diagnostic(first));
            return 2;
        }
    };
    match dispatch(cli, io) {
        Ok(code) => code,
        // the reader went away, as with `| head`; nothing left to report to
        Err(e) if closed_pipe(&e) => 0,
        Err(e) => {
            let _ = writeln!(io.stderr, "{}", diagnostic(format!("{e:#}")));
            2
        }
    }
}

fn closed_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|cause| {
        cause
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn dispatch(cli: Cli, io: &mut Io<'_>) -> anyhow::Result<i32> {
    let repo = cli.repo;
    match cli.command {
        Command::Schema(cmd) => schema(&repo, cmd, io),
        Command::Validate(a) => validate_cmd(&repo, a, io),
        Command::Generate(a) => generate(&repo, a, io),
        Command::Diff(a) => diff_cmd(&repo, a, io),
        Command::Transform(a) => transform(&repo, a, io),
        Command::ImpactTest(a) => impact(&repo, a, io),
        Command::Jslt(a) => jslt(a, io),
        Command::Dqt(DqtCmd::Run(a)) => dqt_run(&repo, a, io),
        Command::Serve(a) => {
            let cfg = ServerConfig {
                bind: a.bind,
                registry_dir: repo,
                read_only: !a.writable,
            };
            tokio::runtime::Runtime::new()?.block_on(serve(cfg))?;
            Ok(0)
        }
    }
}

fn load(repo: &Path) -> anyhow::Result<Registry> {
    Registry::load_repo(repo).with_context(|| format!("loading repository {}", repo.display()))
}

/// `title` or `title@version`.
fn title_version(r: &Registry, spec: &str) -> anyhow::Result<(String, u32)> {
    if let Some((title, v)) = spec.rsplit_once('@') {
        if let Ok(v) = v.parse::<u32>() {
            return Ok((title.to_string(), v));
        }
    }
    Ok((spec.to_string(), r.latest_version(spec)?))
}

fn read_input(io: &mut Io<'_>, source: &str) -> anyhow::Result<String> {
    let mut text = String::new();
    if source == "-" {
        io.stdin.read_to_string(&mut text)?;
    } else {
        File::open(source)
            .with_context(|| format!("opening {source}"))?
            .read_to_string(&mut text)?;
    }
    Ok(text)
}

fn line_error(line: usize, message: impl ToString) -> String {
    let mut m = Map::new();
    m.insert("line".into(), JsonValue::number(line as f64));
    m.insert("error".into(), message.to_string().into());
    JsonValue::Object(m).to_string()
}

fn schema(repo: &Path, cmd: SchemaCmd, io: &mut Io<'_>) -> anyhow::Result<i32> {
    match cmd {
        SchemaCmd::Init {
            host,
            base_event,
            base_object,
        } => {
            let config = RegistryConfig {
                host,
                base_event,
                base_object,
            };
            Registry::init_repo(repo, config)?;
            writeln!(io.stdout, "{}", JsonValue::from(format!("initialized {}", repo.display())))?;
        }
        SchemaCmd::List => {
            let r = load(repo)?;
            for title in r.titles() {
                let latest = r.latest(title)?;
                let mut m = Map::new();
                m.insert("title".into(), title.into());
                m.insert("kind".into(), latest.kind().as_str().into());
                m.insert("latest".into(), JsonValue::from(latest.version()));
                m.insert("tombstoned".into(), JsonValue::Bool(latest.is_tombstone()));
                m.insert("id".into(), latest.id.to_string().into());
                writeln!(io.stdout, "{}", JsonValue::Object(m))?;
            }
        }
        SchemaCmd::Show { schema } => {
            let r = load(repo)?;
            let (title, v) = title_version(&r, &schema)?;
            write!(io.stdout, "{}", r.doc(&title, v)?.raw())?;
        }
        SchemaCmd::Resolve { schema } => {
            let r = load(repo)?;
            let (title, v) = title_version(&r, &schema)?;
            let s = r.resolve(&title, v)?;
            let mut m = Map::new();
            m.insert("id".into(), s.id.to_string().into());
            m.insert("title".into(), s.title.as_str().into());
            m.insert("tombstoned".into(), JsonValue::Bool(s.tombstoned));
            m.insert("properties".into(), properties_to_json(&s.properties));
            m.insert(
                "required".into(),
                JsonValue::Array(s.required.iter().map(|x| x.as_str().into()).collect()),
            );
            let overrides = s
                .overrides
                .iter()
                .map(|o| {
                    let mut m = Map::new();
                    m.insert("property".into(), o.property.as_str().into());
                    m.insert("parent".into(), o.parent.to_string().into());
                    JsonValue::Object(m)
                })
                .collect();
            m.insert("overrides".into(), JsonValue::Array(overrides));
            writeln!(io.stdout, "{}", JsonValue::Object(m).to_pretty_string())?;
        }
        SchemaCmd::Register { file } => {
            let mut r = load(repo)?;
            let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let doc = SchemaDoc::parse(&text).map_err(|e| anyhow!("{}: {e}", file.display()))?;
            let id = doc.id.to_string();
            r.register_doc(doc)?;
            writeln!(io.stdout, "{}", JsonValue::from(format!("registered {id}")))?;
        }
        SchemaCmd::Tombstone { title } => {
            let mut r = load(repo)?;
            let v = r.tombstone(&title)?;
            writeln!(io.stdout, "{}", JsonValue::from(format!("tombstoned {title} at version {v}")))?;
        }
        SchemaCmd::Tag { major } => {
            let mut r = load(repo)?;
            let breaking = match r.latest_release() {
                Some(tag) => breaking_since(&r, &tag.snapshot.clone())?,
                None => false,
            };
            let tag = r.tag_release(breaking, major)?;
            let mut m = Map::new();
            m.insert("version".into(), tag.version.to_string().into());
            m.insert("breaking".into(), JsonValue::Bool(breaking));
            writeln!(io.stdout, "{}", JsonValue::Object(m))?;
        }
    }
    Ok(0)
}

fn validate_cmd(repo: &Path, a: ValidateArgs, io: &mut Io<'_>) -> anyhow::Result<i32> {
    let r = load(repo)?;
    let target = match (&a.schema, a.latest) {
        (Some(spec), _) => match spec.rsplit_once('@').and_then(|(t, v)| Some((t, v.parse::<u32>().ok()?))) {
            Some((title, version)) => ValidationTarget::Explicit {
                title: title.to_string(),
                version,
            },
            None => ValidationTarget::Latest(Some(spec.clone())),
        },
        (None, true) => ValidationTarget::Latest(None),
        (None, false) => ValidationTarget::SelfDeclared,
    };
    let text = read_input(io, &a.events)?;
    let mut invalid = 0usize;
    let mut total = 0usize;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        total += 1;
        let n = i + 1;
        let event = match parse_json(line) {
            Ok(e) => e,
            Err(e) => {
                invalid += 1;
                writeln!(io.stdout, "{}", line_error(n, e))?;
                continue;
            }
        };
        let mismatches = validate(&r, &event, &target)?;
        if !mismatches.is_empty() {
            invalid += 1;
        }
        for m in mismatches {
            let mut j = m.to_json();
            if let JsonValue::Object(o) = &mut j {
                o.insert("line".into(), JsonValue::number(n as f64));
            }
            writeln!(io.stdout, "{j}")?;
        }
    }
    let mut m = Map::new();
    m.insert("events".into(), JsonValue::number(total as f64));
    m.insert("invalid".into(), JsonValue::number(invalid as f64));
    writeln!(io.stderr, "{}", JsonValue::Object(m))?;
    Ok(if invalid == 0 { 0 } else { 1 })
}

fn generate(repo: &Path, a: GenerateArgs, io: &mut Io<'_>) -> anyhow::Result<i32> {
    let r = load(repo)?;
    let (title, v) = title_version(&r, &a.schema)?;
    let fragment = match &a.fragment {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            fragment_from_partial(&parse_json(&text)?)
        }
        None => Vec::new(),
    };
    for i in 0..a.count {
        let cfg = GenConfig {
            seed: a.seed.wrapping_add(i),
            fragment: fragment.clone(),
            ..GenConfig::default()
        };
        writeln!(io.stdout, "{}", generate_valid(&r, &title, v, &cfg)?)?;
    }
    Ok(0)
}

fn diff_cmd(repo: &Path, a: DiffArgs, io: &mut Io<'_>) -> anyhow::Result<i32> {
    let r = load(repo)?;
    let ops = diff(&r, &a.title, a.from, a.to)?;
    for op in &ops {
        writeln!(io.stdout, "{}", op.to_json())?;
    }
    let mut m = Map::new();
    m.insert("changes".into(), JsonValue::number(ops.len() as f64));
    m.insert("breaking".into(), JsonValue::Bool(is_breaking(&ops)));
    writeln!(io.stderr, "{}", JsonValue::Object(m))?;
    Ok(0)
}

fn transform(repo: &Path, a: TransformArgs, io: &mut Io<'_>) -> anyhow::Result<i32> {
    let r = load(repo)?;
    let transforms = TransformSet::load(repo, &r)?;
    if a.verify {
        let mut failed = 0;
        for title in r.titles() {
            for f in verify_transforms(&r, &transforms, title, a.samples)? {
                failed += 1;
                let mut m = Map::new();
                m.insert("title".into(), f.title.as_str().into());
                m.insert("from".into(), JsonValue::from(f.from));
                m.insert("to".into(), JsonValue::from(f.to));
                m.insert("seed".into(), JsonValue::from(f.seed));
                m.insert("error".into(), f.reason.into());
                writeln!(io.stdout, "{}", JsonValue::Object(m))?;
            }
        }
        return Ok(if failed == 0 { 0 } else { 1 });
    }
    let source = a.to_latest.expect("clap requires a mode");
    let text = read_input(io, &source)?;
    let mut failed = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let result = parse_json(line)
            .map_err(anyhow::Error::from)
            .and_then(|e| Ok(transform_to_latest(&r, &transforms, &e)?));
        match result {
            Ok(out) => writeln!(io.stdout, "{out}")?,
            Err(e) => {
                failed += 1;
                writeln!(io.stderr, "{}", line_error(i + 1, e))?;
            }
        }
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

fn impact(repo: &Path, a: ImpactArgs, io: &mut Io<'_>) -> anyhow::Result<i32> {
    let r = load(repo)?;
    let text = fs::read_to_string(&a.proposal).with_context(|| format!("reading {}", a.proposal.display()))?;
    let proposal = SchemaDoc::parse(&text).map_err(|e| anyhow!("{}: {e}", a.proposal.display()))?;
    let samples = ConsumerSample::load_dir(&a.samples)?;
    let report = change_impact_test(&r, proposal, &samples, &GenConfig::with_seed(a.seed))?;
    for o in &report.outcomes {
        let mut m = Map::new();
        m.insert("consumer".into(), o.consumer.as_str().into());
        m.insert("polarity".into(), serde_json::to_value(o.polarity)?.into());
        m.insert("result".into(), if o.passed { "pass" } else { "fail" }.into());
        m.insert("diagnostic".into(), o.diagnostic.as_str().into());
        writeln!(io.stdout, "{}", JsonValue::Object(m))?;
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn jslt(a: JsltArgs, io: &mut Io<'_>) -> anyhow::Result<i32> {
    let source = match (&a.expr, &a.file) {
        (Some(e), _) => e.clone(),
        (None, Some(f)) => fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?,
        (None, None) => bail!("one of --expr or --file is required"),
    };
    let program = JsltProgram::compile(&source)?;
    let text = read_input(io, &a.input)?;
    // a single document, possibly spanning lines, or else one per line
    let inputs: Vec<(usize, Result<JsonValue, String>)> = match parse_json(&text) {
        Ok(v) => vec![(1, Ok(v))],
        Err(_) => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, parse_json(l).map_err(|e| e.to_string())))
            .collect(),
    };
    let mut failed = 0;
    for (n, input) in inputs {
        match input.and_then(|v| program.evaluate(&v).map_err(|e| e.to_string())) {
            Ok(out) => writeln!(io.stdout, "{out}")?,
            Err(e) => {
                failed += 1;
                writeln!(io.stderr, "{}", line_error(n, e))?;
            }
        }
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

fn dqt_run(repo: &Path, a: DqtRunArgs, io: &mut Io<'_>) -> anyhow::Result<i32> {
    let modules = CheckModule::load_dir(&a.modules)?;
    let registry = if a.no_schema_check { None } else { Some(load(repo)?) };
    let strategy = match a.strategy {
        Strategy::Hash => SamplingStrategy::HashOfId,
        Strategy::Random => SamplingStrategy::SeededRandom { seed: a.seed },
    };
    let config = RunConfig {
        sampler: SamplerConfig::new(a.rate, strategy)?,
        window_secs: a.window_secs,
        schema_compliance: !a.no_schema_check,
    };
    let runner = Runner::new(&modules, registry.as_ref(), config)?;
    let summary = if a.events == "-" {
        run_to_sink(&runner, &mut *io.stdin, &a.sink, io.stdout)?
    } else {
        let file = File::open(&a.events).with_context(|| format!("opening {}", a.events))?;
        run_to_sink(&runner, &mut BufReader::new(file), &a.sink, io.stdout)?
    };
    let mut m = Map::new();
    m.insert("lines".into(), JsonValue::from(summary.lines));
    m.insert("parseErrors".into(), JsonValue::from(summary.parse_errors));
    m.insert("sampled".into(), JsonValue::from(summary.sampled));
    let mut checks = Map::new();
    for ((name, _), _) in &summary.checks {
        if checks.contains_key(name) {
            continue;
        }
        let t = summary.check_totals(name);
        let mut c = Map::new();
        c.insert("applicable".into(), JsonValue::from(t.applicable));
        c.insert("valid".into(), JsonValue::from(t.valid));
        c.insert("invalid".into(), JsonValue::from(t.invalid));
        c.insert("error".into(), JsonValue::from(t.error));
        c.insert("filterError".into(), JsonValue::from(t.filter_error));
        c.insert(
            "validPercentage".into(),
            t.valid_percentage().map_or(JsonValue::Null, JsonValue::number),
        );
        checks.insert(name.clone(), JsonValue::Object(c));
    }
    m.insert("checks".into(), JsonValue::Object(checks));
    writeln!(io.stderr, "{}", JsonValue::Object(m))?;
    Ok(0)
}

fn run_to_sink(
    runner: &Runner<'_>,
    input: &mut dyn BufRead,
    sink: &str,
    stdout: &mut dyn Write,
) -> anyhow::Result<semschema_core::dqt::RunSummary> {
    if sink == "stdout" || sink == "-" {
        let mut sink = NdjsonSink::new(stdout);
        Ok(runner.run_stream(input, &mut sink)?)
    } else {
        let file = File::create(sink).with_context(|| format!("creating {sink}"))?;
        let mut sink = NdjsonSink::new(BufWriter::new(file));
        Ok(runner.run_stream(input, &mut sink)?)
    }
}

/// Runs with the process's standard streams.
pub fn main_with_std_io() -> i32 {
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    let stderr = io::stderr();
    let mut stderr = stderr.lock();
    let mut io = Io {
        stdin: &mut stdin,
        stdout: &mut stdout,
        stderr: &mut stderr,
    };
    let code = run(std::env::args_os(), &mut io);
    let _ = io.stdout.flush();
    code
}
