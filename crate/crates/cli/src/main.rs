use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use recdata::io::{self, ColumnMap, ExportProfile, FormatKind, FormatSpec, Framework};
use recdata::metrics::{self, Axis};
use recdata::pipeline::{self, ExecContext, Mode, PipelineConfig, StepStatus};
use recdata::processing::{self, BinarizeMode, KCoreMode, RatingThreshold, TimeKeep};
use recdata::registry::{self, Catalog};
use recdata::splitting::{self, Direction, FoldSet, Order, SplitResult, Stratify, TemporalMode};
use recdata::{Dataset, Digest, Error, Params, ProvenanceStep, StepCategory, StepChecksum};

/// Like `println!`, but a closed stdout is not an error.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "recdata", version, about = "Reproducible recommendation dataset preparation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a pipeline document; prints the recorded document, or the
    /// verification report with --verify.
    Run(RunArgs),
    /// Print dataset metrics.
    Stats(StatsArgs),
    /// Rewrite a file in another format.
    Convert(ConvertArgs),
    /// Apply one processing operation.
    Process(ProcessArgs),
    /// Split a dataset into train/test(/val) files.
    Split(SplitArgs),
    /// Write split files for a recommendation framework.
    Export(ExportArgs),
    /// Fetch a catalog dataset into the cache, or list the catalog.
    Download(DownloadArgs),
    /// Print the content checksum of a dataset.
    Checksum(ChecksumArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Tabular,
    Inline,
    Json,
}

impl From<Kind> for FormatKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Tabular => FormatKind::Tabular,
            Kind::Inline => FormatKind::Inline,
            Kind::Json => FormatKind::Json,
        }
    }
}

/// Input format. Without --format, `.json`/`.jsonl` files are read as JSON
/// and everything else as tabular; `.csv` defaults to a comma separator.
#[derive(Args, Clone, Default)]
struct InFormat {
    #[arg(long, value_enum)]
    format: Option<Kind>,
    /// Field separator; `\t`, `tab` and `space` are accepted.
    #[arg(long)]
    sep: Option<String>,
    /// Skip the first line.
    #[arg(long)]
    header: bool,
    #[arg(long, value_name = "N")]
    user_col: Option<usize>,
    #[arg(long, value_name = "N")]
    item_col: Option<usize>,
    #[arg(long, value_name = "N")]
    rating_col: Option<usize>,
    #[arg(long, value_name = "N")]
    timestamp_col: Option<usize>,
    /// Skip lines starting with this prefix.
    #[arg(long, value_name = "PREFIX")]
    comment: Option<String>,
}

#[derive(Args, Clone, Default)]
struct OutFormat {
    #[arg(long = "to", value_enum, value_name = "FORMAT")]
    to: Option<Kind>,
    #[arg(long, value_name = "SEP")]
    to_sep: Option<String>,
    /// Write a header line (tabular output).
    #[arg(long)]
    to_header: bool,
    /// Write a JSON array instead of JSON lines.
    #[arg(long)]
    to_json_array: bool,
}

fn guess_kind(path: &Path) -> (FormatKind, &'static str) {
    let name = path.to_string_lossy().to_ascii_lowercase();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    if name.ends_with(".json") || name.ends_with(".jsonl") {
        (FormatKind::Json, "\t")
    } else if name.ends_with(".csv") {
        (FormatKind::Tabular, ",")
    } else {
        (FormatKind::Tabular, "\t")
    }
}

fn build_spec(kind: FormatKind, sep: Option<&str>, default_sep: &str) -> FormatSpec {
    let sep = sep
        .map(|s| io::unescape_separator(s.to_string()))
        .unwrap_or_else(|| default_sep.to_string());
    match kind {
        FormatKind::Tabular => FormatSpec::tabular(&sep),
        FormatKind::Inline => FormatSpec::inline(&sep),
        FormatKind::Json => FormatSpec::json(),
    }
}

impl InFormat {
    fn spec(&self, path: &Path) -> Result<FormatSpec, Failure> {
        let (guessed, default_sep) = guess_kind(path);
        let kind = self.format.map(FormatKind::from).unwrap_or(guessed);
        let mut spec = build_spec(kind, self.sep.as_deref(), default_sep);
        spec.has_header = self.header;
        if let Some(c) = &self.comment {
            spec = spec.with_comment(c);
        }
        let cols = [self.user_col, self.item_col, self.rating_col, self.timestamp_col];
        if cols.iter().any(Option::is_some) {
            if kind != FormatKind::Tabular {
                return Err(Failure::Usage("column flags apply to tabular input only".into()));
            }
            spec.columns = Some(ColumnMap {
                user: self.user_col.unwrap_or(0),
                item: self.item_col.unwrap_or(1),
                rating: self.rating_col,
                timestamp: self.timestamp_col,
            });
        }
        spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(spec)
    }
}

impl OutFormat {
    /// Without flags, a `.json`, `.jsonl`, `.csv` or `.tsv` output name
    /// picks the format; any other name keeps the input's.
    fn spec(&self, path: &Path, input: &FormatSpec) -> Result<FormatSpec, Failure> {
        let name = path.to_string_lossy().to_ascii_lowercase();
        let known = [".json", ".jsonl", ".csv", ".tsv"]
            .iter()
            .any(|e| name.trim_end_matches(".gz").ends_with(e));
        let mut spec = match self.to {
            None if self.to_sep.is_none() && !known => {
                let mut s = input.clone();
                s.columns = None;
                s.has_header = false;
                s.comment = None;
                s
            }
            kind => {
                let (guessed, default_sep) = guess_kind(path);
                build_spec(
                    kind.map(FormatKind::from).unwrap_or(guessed),
                    self.to_sep.as_deref(),
                    default_sep,
                )
            }
        };
        spec.has_header = self.to_header;
        if self.to_json_array {
            spec.json_layout = io::JsonLayout::Array;
        }
        spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Compare every step against the document's checksums; exit 3 on any
    /// difference.
    #[arg(long)]
    verify: bool,
    /// Write the recorded document here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Directory relative paths resolve against (default: the document's).
    #[arg(long)]
    base_dir: Option<PathBuf>,
    #[command(flatten)]
    registry: RegistryArgs,
}

#[derive(Args, Clone)]
struct RegistryArgs {
    /// Cache directory (default: $RECDATA_CACHE_DIR or ~/.cache/recdata).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Never download; use only verified cached archives.
    #[arg(long)]
    offline: bool,
    /// Catalog file replacing the built-in one.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

impl RegistryArgs {
    fn catalog(&self) -> Result<Catalog, Failure> {
        Ok(match &self.catalog {
            Some(p) => Catalog::load(p)?,
            None => Catalog::builtin(),
        })
    }

    fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(registry::default_cache_dir)
    }
}

#[derive(Args)]
struct StatsArgs {
    input: PathBuf,
    #[command(flatten)]
    format: InFormat,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Also print popularity classes for users or items.
    #[arg(long, value_enum)]
    popularity: Option<AxisArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Users,
    Items,
}

#[derive(Args)]
struct ConvertArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    format: InFormat,
    #[command(flatten)]
    to: OutFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum KCoreArg {
    User,
    Item,
    Iterative,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("operation").required(true).multiple(false))]
struct ProcessArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    format: InFormat,
    #[command(flatten)]
    to: OutFormat,
    /// Keep ratings >= T, set to 1.
    #[arg(long, value_name = "T", group = "operation")]
    binarize: Option<f64>,
    /// With --binarize: keep every row and rate it 0 or 1.
    #[arg(long, requires = "binarize")]
    zero_one: bool,
    /// k-core filter.
    #[arg(long, value_name = "K", group = "operation")]
    kcore: Option<usize>,
    #[arg(long, value_enum, default_value = "iterative", requires = "kcore")]
    kcore_mode: KCoreArg,
    #[arg(long, value_name = "N", requires = "kcore")]
    max_rounds: Option<usize>,
    /// Keep users with at least N interactions.
    #[arg(long, value_name = "N", group = "operation")]
    cold_users: Option<usize>,
    /// Keep ratings >= a number, `global_mean` or `user_mean`.
    #[arg(long, value_name = "T", group = "operation")]
    min_rating: Option<String>,
    /// Keep timestamps < T.
    #[arg(long, value_name = "T", group = "operation", allow_hyphen_values = true)]
    before: Option<i64>,
    /// Keep timestamps >= T.
    #[arg(long, value_name = "T", group = "operation", allow_hyphen_values = true)]
    after: Option<i64>,
    /// Drop repeated records.
    #[arg(long, group = "operation")]
    dedup: bool,
    /// Write the dataset's history as a pipeline document.
    #[arg(long, value_name = "FILE")]
    history: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    RandomHoldout,
    TemporalHoldout,
    FixedTimestamp,
    BestRatio,
    LeaveNOut,
    LeaveNIn,
    KRepeated,
    CrossValidation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OrderArg {
    Temporal,
    Random,
}

#[derive(Args)]
struct SplitArgs {
    input: PathBuf,
    /// Directory for train/test/val files (folds go to fold_<i>/).
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[command(flatten)]
    format: InFormat,
    #[command(flatten)]
    to: OutFormat,
    #[arg(long)]
    test_ratio: Option<f64>,
    #[arg(long)]
    val_ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Apply the strategy within each user's history.
    #[arg(long)]
    user: bool,
    /// Cutoff timestamp for fixed-timestamp.
    #[arg(long, allow_hyphen_values = true)]
    cutoff: Option<i64>,
    /// n for leave-n strategies.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Order for leave-n strategies.
    #[arg(long, value_enum, default_value = "temporal")]
    order: OrderArg,
    /// Repetitions or folds.
    #[arg(long)]
    k: Option<usize>,
    /// Write the history as a pipeline document.
    #[arg(long, value_name = "FILE")]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    train: PathBuf,
    test: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    /// Built-in profile name.
    #[arg(long, required_unless_present = "profile")]
    framework: Option<String>,
    /// Profile file replacing the built-in ones.
    #[arg(long, conflicts_with = "framework")]
    profile: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    format: InFormat,
}

#[derive(Args)]
struct DownloadArgs {
    #[arg(required_unless_present = "list")]
    name: Option<String>,
    #[arg(long, required_unless_present = "list")]
    version: Option<String>,
    /// Expected MD5, for entries the catalog does not pin.
    #[arg(long)]
    md5: Option<String>,
    /// List catalog entries.
    #[arg(long)]
    list: bool,
    #[command(flatten)]
    registry: RegistryArgs,
}

#[derive(Args)]
struct ChecksumArgs {
    input: PathBuf,
    #[command(flatten)]
    format: InFormat,
}

enum Failure {
    Usage(String),
    Op(Error),
    Mismatch,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Op(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Op(e)) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(1)
        }
        Err(Failure::Mismatch) => ExitCode::from(3),
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run(a) => run(a),
        Command::Stats(a) => stats(a),
        Command::Convert(a) => convert(a),
        Command::Process(a) => process(a),
        Command::Split(a) => split(a),
        Command::Export(a) => export(a),
        Command::Download(a) => download(a),
        Command::Checksum(a) => {
            let spec = a.format.spec(&a.input)?;
            let d = io::read(&a.input, &spec)?;
            out!("{}", d.checksum());
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        Failure::Op(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

/// Writes through a temporary file in the same directory, so a failure
/// never leaves a truncated `path` behind.
fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err = |e: std::io::Error| {
        Failure::Op(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(text.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let catalog = a.registry.catalog()?;
    let text = read_text(&a.config)?;
    let config = pipeline::parse_config_with(&text, &catalog)?;
    let base_dir = a.base_dir.clone().unwrap_or_else(|| match a.config.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    });
    let ctx = ExecContext {
        base_dir,
        cache_dir: a.registry.cache_dir(),
        offline: a.registry.offline,
        catalog,
        load_override: None,
    };
    let mode = if a.verify { Mode::Verify } else { Mode::Record };
    let result = pipeline::execute(&config, mode, &ctx)?;
    let document = pipeline::export_history(&result);
    if let Some(out) = &a.output {
        write_text(out, &document)?;
    }
    if !a.verify {
        if a.output.is_none() {
            let _ = write!(std::io::stdout().lock(), "{document}");
        }
        for s in &result.report.steps {
            if let StepStatus::Mismatch(_) = s.status {
                eprintln!(
                    "warning: step {} ({}) differs from the document's checksum",
                    s.step, s.operation
                );
            }
        }
        return Ok(());
    }
    let mut out = std::io::stdout().lock();
    for s in &result.report.steps {
        let line = match &s.status {
            StepStatus::Match => "match".to_string(),
            StepStatus::Skipped => "skipped".to_string(),
            StepStatus::Missing => "missing expected checksum".to_string(),
            StepStatus::Mismatch(diffs) => {
                let parts: Vec<String> = diffs
                    .iter()
                    .map(|d| {
                        let show = |x: Option<Digest>| x.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
                        let key = if d.key.is_empty() {
                            String::new()
                        } else {
                            format!("{} ", d.key)
                        };
                        format!("{key}expected {} got {}", show(d.expected), show(d.actual))
                    })
                    .collect();
                format!("MISMATCH {}", parts.join("; "))
            }
        };
        let _ = writeln!(out, "step {} {}: {line}", s.step, s.operation);
    }
    let passed = result.report.passed();
    let _ = writeln!(out, "{}", if passed { "verified" } else { "verification failed" });
    if passed {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}

fn stats(a: StatsArgs) -> Result<(), Failure> {
    let spec = a.format.spec(&a.input)?;
    let d = io::read(&a.input, &spec)?;
    let report = metrics::metrics_report(&d)?;
    let classes = a
        .popularity
        .map(|axis| {
            let axis = match axis {
                AxisArg::Users => Axis::Users,
                AxisArg::Items => Axis::Items,
            };
            metrics::popularity_classify(&d, axis)
        })
        .transpose()?;
    if a.json {
        let mut v = serde_json::to_value(&report).expect("report serializes");
        if let Some(c) = &classes {
            v["popularity"] = serde_json::to_value(c).expect("classes serialize");
        }
        out!("{}", serde_json::to_string_pretty(&v).expect("json"));
        return Ok(());
    }
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    out!("users\t{}", report.n_users);
    out!("items\t{}", report.n_items);
    out!("interactions\t{}", report.n_interactions);
    out!("space_size\t{}", report.space_size);
    out!("shape\t{}", report.shape);
    out!("density\t{}", report.density);
    out!("gini_users\t{}", report.gini_users);
    out!("gini_items\t{}", report.gini_items);
    out!("mean_profile_user\t{}", report.mean_profile_user);
    out!("mean_profile_item\t{}", report.mean_profile_item);
    out!("mean_rating_user\t{}", opt(report.mean_rating_user));
    out!("mean_rating_item\t{}", opt(report.mean_rating_item));
    if let Some(c) = classes {
        out!("quartiles\t{}\t{}\t{}", c.quartiles[0], c.quartiles[1], c.quartiles[2]);
        for (id, class) in &c.classes {
            out!("{id}\t{class:?}");
        }
    }
    Ok(())
}

fn convert(a: ConvertArgs) -> Result<(), Failure> {
    let spec = a.format.spec(&a.input)?;
    let out_spec = a.to.spec(&a.output, &spec)?;
    let d = io::read(&a.input, &spec)?;
    let written = io::write(&d, &a.output, &out_spec)?;
    for w in written.history().last().into_iter().flat_map(|s| s.warnings()) {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn write_history(path: &Path, history: &[ProvenanceStep]) -> Result<(), Failure> {
    write_text(path, &PipelineConfig::from_history(history).to_yaml())
}

fn process(a: ProcessArgs) -> Result<(), Failure> {
    let spec = a.format.spec(&a.input)?;
    let out_spec = a.to.spec(&a.output, &spec)?;
    let min_rating = a
        .min_rating
        .as_deref()
        .map(|t| match t {
            "global_mean" => Ok(RatingThreshold::GlobalMean),
            "user_mean" => Ok(RatingThreshold::UserMean),
            n => f64::from_str(n)
                .ok()
                .filter(|x| x.is_finite())
                .map(RatingThreshold::Fixed)
                .ok_or_else(|| {
                    Failure::Usage(format!(
                        "--min-rating: expected a number, global_mean or user_mean, got {n:?}"
                    ))
                }),
        })
        .transpose()?;
    if a.kcore == Some(0) || a.cold_users == Some(0) || a.max_rounds == Some(0) {
        return Err(Failure::Usage("counts must be at least 1".into()));
    }
    let d = io::read(&a.input, &spec)?;
    let out = if let Some(t) = a.binarize {
        let mode = if a.zero_one {
            BinarizeMode::ZeroOne
        } else {
            BinarizeMode::DropBelow
        };
        processing::binarize(&d, t, mode)?
    } else if let Some(k) = a.kcore {
        let mode = match a.kcore_mode {
            KCoreArg::User => KCoreMode::User,
            KCoreArg::Item => KCoreMode::Item,
            KCoreArg::Iterative => KCoreMode::Iterative,
        };
        processing::kcore(&d, k, mode, a.max_rounds)?
    } else if let Some(n) = a.cold_users {
        processing::drop_cold_users(&d, n)?
    } else if let Some(t) = min_rating {
        processing::filter_by_rating(&d, t)?
    } else if let Some(t) = a.before {
        processing::filter_by_time(&d, t, TimeKeep::Before)?
    } else if let Some(t) = a.after {
        processing::filter_by_time(&d, t, TimeKeep::After)?
    } else {
        processing::deduplicate(&d)
    };
    eprintln!("{} -> {} interactions", d.len(), out.len());
    let written = io::write(&out, &a.output, &out_spec)?;
    if let Some(h) = &a.history {
        write_history(h, written.history())?;
    }
    Ok(())
}

fn extension(spec: &FormatSpec) -> &'static str {
    match spec.kind {
        FormatKind::Tabular if spec.separator == "," => "csv",
        FormatKind::Tabular => "tsv",
        FormatKind::Inline => "txt",
        FormatKind::Json => "jsonl",
    }
}

fn write_split(s: &SplitResult, dir: &Path, spec: &FormatSpec) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| {
        Failure::Op(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })?;
    let ext = extension(spec);
    for (name, part) in s.parts() {
        let path = dir.join(format!("{name}.{ext}"));
        io::write(part, &path, spec)?;
        out!("{name}\t{}\t{}\t{}", part.len(), s.checksums[name], path.display());
    }
    for w in s.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// History of a split written by [`write_split`]: the split step followed by
/// an export of all parts into `dir`, as a pipeline would replay it.
fn split_history(train: &Dataset, dir: &Path, spec: &FormatSpec) -> Vec<ProvenanceStep> {
    let mut p = Params::new();
    p.insert("output_path".into(), dir.display().to_string().into());
    p.extend(spec.to_params());
    let mut history = train.history().to_vec();
    history.push(ProvenanceStep::new(StepCategory::Export, spec.kind.operation(), p));
    history
}

fn split(a: SplitArgs) -> Result<(), Failure> {
    let spec = a.format.spec(&a.input)?;
    let out_spec = a.to.spec(&a.out_dir.join("x"), &spec)?;
    let stratify = if a.user { Stratify::User } else { Stratify::System };
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Failure::Usage(format!("--strategy needs {flag}")));
    let need_k = || a.k.ok_or_else(|| Failure::Usage("--strategy needs --k".into()));
    if let Some(r) = a.test_ratio {
        if !(r > 0.0 && r < 1.0) {
            return Err(Failure::Usage(format!("--test-ratio must be in (0, 1), got {r}")));
        }
    }
    // Validate every flag before reading anything.
    type Single = Box<dyn Fn(&Dataset) -> recdata::Result<SplitResult>>;
    type Repeated = Box<dyn Fn(&Dataset) -> recdata::Result<FoldSet>>;
    enum Plan {
        One(Single),
        Many(Repeated),
    }
    let seed = a.seed;
    let plan = match a.strategy {
        StrategyArg::RandomHoldout => {
            let (t, v) = (need(a.test_ratio, "--test-ratio")?, a.val_ratio.unwrap_or(0.0));
            if v.is_nan() || v < 0.0 || t + v >= 1.0 {
                return Err(Failure::Usage("--val-ratio must be >= 0 with test + val below 1".into()));
            }
            Plan::One(Box::new(move |d| splitting::random_holdout(d, t, v, seed, stratify)))
        }
        StrategyArg::TemporalHoldout => {
            let t = need(a.test_ratio, "--test-ratio")?;
            Plan::One(Box::new(move |d| {
                splitting::temporal_split(d, TemporalMode::ByRatio(t, stratify))
            }))
        }
        StrategyArg::FixedTimestamp => {
            let c = a
                .cutoff
                .ok_or_else(|| Failure::Usage("--strategy fixed-timestamp needs --cutoff".into()))?;
            Plan::One(Box::new(move |d| {
                splitting::temporal_split(d, TemporalMode::FixedTimestamp(c))
            }))
        }
        StrategyArg::BestRatio => {
            let t = need(a.test_ratio, "--test-ratio")?;
            Plan::One(Box::new(move |d| {
                splitting::temporal_split(d, TemporalMode::BestRatioCutoff(t))
            }))
        }
        StrategyArg::LeaveNOut | StrategyArg::LeaveNIn => {
            if a.n == 0 {
                return Err(Failure::Usage("--n must be at least 1".into()));
            }
            let dir = if a.strategy == StrategyArg::LeaveNOut {
                Direction::Out
            } else {
                Direction::In
            };
            let order = if a.order == OrderArg::Random {
                Order::Random(seed)
            } else {
                Order::Temporal
            };
            let n = a.n;
            Plan::One(Box::new(move |d| splitting::leave_n_split(d, n, dir, order)))
        }
        StrategyArg::KRepeated => {
            let (k, t) = (need_k()?, need(a.test_ratio, "--test-ratio")?);
            if k == 0 {
                return Err(Failure::Usage("--k must be at least 1".into()));
            }
            Plan::Many(Box::new(move |d| splitting::k_repeated_holdout(d, k, t, seed, stratify)))
        }
        StrategyArg::CrossValidation => {
            let k = need_k()?;
            if k < 2 {
                return Err(Failure::Usage("--k must be at least 2".into()));
            }
            Plan::Many(Box::new(move |d| splitting::cross_validation(d, k, seed, stratify)))
        }
    };
    let d = io::read(&a.input, &spec)?;
    match plan {
        Plan::One(f) => {
            let s = f(&d)?;
            write_split(&s, &a.out_dir, &out_spec)?;
            if let Some(h) = &a.history {
                write_history(h, &split_history(&s.train, &a.out_dir, &out_spec))?;
            }
        }
        Plan::Many(f) => {
            let folds = f(&d)?;
            for (i, s) in folds.folds.iter().enumerate() {
                out!("fold {}", i + 1);
                write_split(s, &a.out_dir.join(format!("fold_{}", i + 1)), &out_spec)?;
            }
            if let (Some(h), Some(first)) = (&a.history, folds.folds.first()) {
                let mut history = split_history(&first.train, &a.out_dir, &out_spec);
                let n = history.len();
                let step = &mut history[n - 2];
                step.checksum = Some(StepChecksum::Folds(folds.digests()));
                step.outcome.shift_remove("fold");
                write_history(h, &history)?;
            }
        }
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<(), Failure> {
    let profile = match (&a.framework, &a.profile) {
        (_, Some(p)) => ExportProfile::from_yaml(&read_text(p)?)?,
        (Some(name), None) => ExportProfile::builtin(Framework::from_str(name).map_err(|e| Failure::Usage(e.to_string()))?),
        (None, None) => unreachable!("clap requires one"),
    };
    let spec = a.format.spec(&a.train)?;
    let train = io::read(&a.train, &spec)?;
    let test = io::read(&a.test, &spec)?;
    let val = a.val.as_ref().map(|v| io::read(v, &spec)).transpose()?;
    let outcome = io::export_split(&train, &test, val.as_ref(), &profile, &a.out_dir)?;
    for f in &outcome.manifest.files {
        out!("{}\t{}\t{}\t{}", f.split, f.rows, f.md5, f.path.display());
    }
    Ok(())
}

fn download(a: DownloadArgs) -> Result<(), Failure> {
    let catalog = a.registry.catalog()?;
    if a.list {
        for d in &catalog.datasets {
            let md5 = d.md5.map(|m| m.to_string()).unwrap_or_else(|| "unpinned".into());
            let how = if d.manual { "manual" } else { "auto" };
            out!("{}\t{}\t{:?}\t{how}\t{md5}\t{}", d.name, d.version, d.format.kind, d.url);
        }
        return Ok(());
    }
    let (name, version) = (a.name.as_deref().unwrap(), a.version.as_deref().unwrap());
    let mut desc = catalog.resolve(name, version)?.clone();
    if let Some(m) = &a.md5 {
        desc.md5 = Some(Digest::from_str(m).map_err(|e| Failure::Usage(e.to_string()))?);
    }
    let fetched = registry::fetch(&desc, &a.registry.cache_dir(), a.registry.offline)?;
    eprintln!(
        "{}",
        if fetched.downloaded {
            "downloaded and verified"
        } else {
            "verified cached copy"
        }
    );
    out!("{}\t{}", fetched.md5, fetched.path.display());
    Ok(())
}
