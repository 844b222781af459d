use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::PipelineConfig;
use super::ops::{Op, SplitOp};
use crate::dataset::{Dataset, Digest, Params, ProvenanceStep, SplitDigests, StepCategory, StepChecksum};
use crate::error::{Error, Result};
use crate::io::{self, export_split, ExportProfile, FormatKind, FormatSpec};
use crate::processing;
use crate::registry::{self, Catalog};
use crate::splitting::{self, FoldSet, SplitResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Compute and record checksums; expected values, if any, are still
    /// compared and reported.
    #[default]
    Record,
    /// Every non-export step must carry an expected checksum that matches.
    Verify,
}

/// Where a pipeline finds its inputs.
#[derive(Clone, Debug)]
pub struct ExecContext {
    /// Relative paths in step parameters are resolved against this.
    pub base_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub offline: bool,
    pub catalog: Catalog,
    /// Used instead of running the load step, e.g. for tests without
    /// network access. The load step's parameters are still recorded.
    pub load_override: Option<Dataset>,
}

impl Default for ExecContext {
    fn default() -> Self {
        ExecContext {
            base_dir: PathBuf::from("."),
            cache_dir: registry::default_cache_dir(),
            offline: false,
            catalog: Catalog::builtin(),
            load_override: None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum PipelineOutput {
    Single(Dataset),
    Split(SplitResult),
    Folds(FoldSet),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigestMismatch {
    /// `""` for scalar checksums, else `test`, `val`, `train` (prefixed with
    /// the fold number for fold splits).
    pub key: String,
    pub expected: Option<Digest>,
    pub actual: Option<Digest>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepStatus {
    Match,
    Mismatch(Vec<DigestMismatch>),
    /// The document has no expected checksum for this step.
    Missing,
    /// Export steps carry no checksum.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepReport {
    /// 1-based.
    pub step: usize,
    pub operation: String,
    pub status: StepStatus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub mode: Mode,
    pub steps: Vec<StepReport>,
}

impl VerificationReport {
    /// No mismatches, and in verify mode no missing checksums either.
    pub fn passed(&self) -> bool {
        self.steps.iter().all(|s| match s.status {
            StepStatus::Match | StepStatus::Skipped => true,
            StepStatus::Missing => self.mode == Mode::Record,
            StepStatus::Mismatch(_) => false,
        })
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &StepReport> {
        self.steps.iter().filter(|s| matches!(s.status, StepStatus::Mismatch(_)))
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub output: PipelineOutput,
    /// One entry per step: the document's parameters with computed
    /// checksums.
    pub history: Vec<ProvenanceStep>,
    pub report: VerificationReport,
}

impl PipelineResult {
    /// The executed steps as a pipeline document.
    pub fn to_config(&self) -> PipelineConfig {
        PipelineConfig::from_history(&self.history)
    }
}

/// Renders the executed history as a document accepted by
/// [`super::parse_config`].
pub fn export_history(result: &PipelineResult) -> String {
    result.to_config().to_yaml()
}

enum State {
    Empty,
    Single(Dataset),
    Split(SplitResult),
    Folds(FoldSet),
}

/// Runs the steps in order. Step failures abort with the step number;
/// checksum differences are collected in the report and execution goes on.
pub fn execute(config: &PipelineConfig, mode: Mode, ctx: &ExecContext) -> Result<PipelineResult> {
    config.validate(&ctx.catalog)?;
    let mut state = State::Empty;
    let mut history = Vec::with_capacity(config.steps.len());
    let mut reports = Vec::with_capacity(config.steps.len());
    for (i, step) in config.steps.iter().enumerate() {
        let n = i + 1;
        let op = Op::parse(n, step, &ctx.catalog)?;
        let wrap = |e: Error| Error::Step {
            step: n,
            operation: step.operation.clone(),
            source: Box::new(e),
        };
        let mut archive_md5 = None;
        let (next, outcome) = match (&op, state) {
            (Op::LoadRegistry { .. } | Op::LoadFile { .. }, _) => {
                let d = load(&op, ctx).map_err(wrap)?;
                archive_md5 = d
                    .history()
                    .last()
                    .and_then(|s| s.outcome.get("archive_md5"))
                    .and_then(|v| v.as_str())
                    .map(str::to_string);
                let outcome = last_outcome(&d);
                (State::Single(d), outcome)
            }
            (Op::Split(s), State::Single(d)) => split(s, &d, ctx).map_err(wrap)?,
            (Op::ExportFramework { framework, output_path }, st) => {
                let out = ctx.base_dir.join(output_path);
                let profile = ExportProfile::builtin(*framework);
                let st = match st {
                    State::Split(s) => State::Split(export_parts(&s, &profile, &out).map_err(wrap)?),
                    State::Folds(f) => {
                        let mut folds = Vec::with_capacity(f.folds.len());
                        for (k, s) in f.folds.iter().enumerate() {
                            folds.push(export_parts(s, &profile, &out.join(format!("fold_{}", k + 1))).map_err(wrap)?);
                        }
                        State::Folds(FoldSet { folds, kind: f.kind })
                    }
                    _ => return Err(wrap(Error::BadArgument(format!("{framework} export needs a split")))),
                };
                (st, Params::new())
            }
            (Op::ExportFile { spec, output_path }, st) => {
                let out = ctx.base_dir.join(output_path);
                let st = match st {
                    State::Single(d) => State::Single(io::write(&d, &out, spec).map_err(wrap)?),
                    State::Split(s) => State::Split(write_parts(&s, spec, &out).map_err(wrap)?),
                    State::Folds(f) => {
                        let mut folds = Vec::with_capacity(f.folds.len());
                        for (k, s) in f.folds.iter().enumerate() {
                            folds.push(write_parts(s, spec, &out.join(format!("fold_{}", k + 1))).map_err(wrap)?);
                        }
                        State::Folds(FoldSet { folds, kind: f.kind })
                    }
                    State::Empty => unreachable!("validated: load comes first"),
                };
                (st, Params::new())
            }
            (op, State::Single(d)) => {
                let d = process(op, &d).map_err(wrap)?;
                let outcome = last_outcome(&d);
                (State::Single(d), outcome)
            }
            _ => unreachable!("validated step order"),
        };
        state = next;

        let computed = match (&step.name, &state) {
            (StepCategory::Export, _) => None,
            (_, State::Single(d)) => Some(StepChecksum::Single(d.checksum())),
            (_, State::Split(s)) => Some(StepChecksum::Split(s.digests())),
            (_, State::Folds(f)) => Some(StepChecksum::Folds(f.digests())),
            (_, State::Empty) => None,
        };
        let status = match (&computed, &step.checksum) {
            (None, _) => StepStatus::Skipped,
            (Some(_), None) => StepStatus::Missing,
            (Some(actual), Some(expected)) => compare(expected, actual, archive_md5.as_deref()),
        };
        let recorded = ProvenanceStep {
            name: step.name,
            operation: step.operation.clone(),
            params: step.params.clone(),
            checksum: computed,
            outcome,
        };
        state = restamp(state, &recorded);
        history.push(recorded);
        reports.push(StepReport {
            step: n,
            operation: step.operation.clone(),
            status,
        });
    }
    let output = match state {
        State::Single(d) => PipelineOutput::Single(d),
        State::Split(s) => PipelineOutput::Split(s),
        State::Folds(f) => PipelineOutput::Folds(f),
        State::Empty => unreachable!("validated: at least one step"),
    };
    Ok(PipelineResult {
        output,
        history,
        report: VerificationReport { mode, steps: reports },
    })
}

fn last_outcome(d: &Dataset) -> Params {
    d.history().last().map(|s| s.outcome.clone()).unwrap_or_default()
}

/// Makes the datasets' own histories agree with the pipeline history: the
/// load step replaces whatever history the loaded data had, later steps keep
/// their per-part checksums and outcome but take the document's operation
/// and parameters.
fn restamp(state: State, step: &ProvenanceStep) -> State {
    let fix = |mut d: Dataset| {
        if step.name == StepCategory::Load {
            return d.rebased(step.clone());
        }
        if let Some(last) = d.last_step_mut() {
            if last.name == step.name {
                last.operation = step.operation.clone();
                last.params = step.params.clone();
            }
        }
        d
    };
    let fix_split = |s: SplitResult| SplitResult {
        train: fix(s.train),
        test: fix(s.test),
        val: s.val.map(fix),
        checksums: s.checksums,
    };
    match state {
        State::Single(d) => State::Single(fix(d)),
        State::Split(s) => State::Split(fix_split(s)),
        State::Folds(f) => State::Folds(FoldSet {
            folds: f.folds.into_iter().map(fix_split).collect(),
            kind: f.kind,
        }),
        State::Empty => State::Empty,
    }
}

fn compare(expected: &StepChecksum, actual: &StepChecksum, archive_md5: Option<&str>) -> StepStatus {
    let mut diffs = Vec::new();
    let mut one = |key: String, e: Option<Digest>, a: Option<Digest>| {
        if e != a {
            diffs.push(DigestMismatch {
                key,
                expected: e,
                actual: a,
            });
        }
    };
    let mut split = |prefix: &str, e: Option<&SplitDigests>, a: Option<&SplitDigests>| {
        one(format!("{prefix}test"), e.map(|x| x.test), a.map(|x| x.test));
        one(format!("{prefix}val"), e.and_then(|x| x.val), a.and_then(|x| x.val));
        one(format!("{prefix}train"), e.map(|x| x.train), a.map(|x| x.train));
    };
    match (expected, actual) {
        (StepChecksum::Single(e), StepChecksum::Single(a)) => {
            // A load step may pin the downloaded archive instead of the parsed data.
            let archive_match = archive_md5.is_some_and(|m| Digest::from_str(m).ok() == Some(*e));
            if e != a && !archive_match {
                diffs.push(DigestMismatch {
                    key: String::new(),
                    expected: Some(*e),
                    actual: Some(*a),
                });
            }
        }
        (StepChecksum::Split(e), StepChecksum::Split(a)) => split("", Some(e), Some(a)),
        (StepChecksum::Folds(e), StepChecksum::Folds(a)) => {
            for k in 0..e.len().max(a.len()) {
                split(&format!("fold{}.", k + 1), e.get(k), a.get(k));
            }
        }
        _ => diffs.push(DigestMismatch {
            key: "shape".into(),
            expected: None,
            actual: None,
        }),
    }
    if diffs.is_empty() {
        StepStatus::Match
    } else {
        StepStatus::Mismatch(diffs)
    }
}

fn load(op: &Op, ctx: &ExecContext) -> Result<Dataset> {
    if let Some(d) = &ctx.load_override {
        return Ok(d.clone());
    }
    match op {
        Op::LoadFile { path, spec } => io::read(ctx.base_dir.join(path), spec),
        Op::LoadRegistry { name, version, md5 } => {
            let mut desc = ctx.catalog.resolve(name, version)?.clone();
            if let Some(m) = md5 {
                desc.md5 = Some(Digest::from_str(m)?);
            }
            registry::fetch_and_load(&desc, &ctx.cache_dir, ctx.offline)
        }
        _ => unreachable!("not a load"),
    }
}

fn process(op: &Op, d: &Dataset) -> Result<Dataset> {
    match *op {
        Op::Binarize { threshold, mode } => processing::binarize(d, threshold, mode),
        Op::KCore { k, mode, max_rounds } => processing::kcore(d, k, mode, max_rounds),
        Op::ColdUsers { min } => processing::drop_cold_users(d, min),
        Op::FilterByRating(t) => processing::filter_by_rating(d, t),
        Op::FilterByTime { cutoff, keep } => processing::filter_by_time(d, cutoff, keep),
        Op::Deduplicate => Ok(processing::deduplicate(d)),
        _ => unreachable!("not a process step"),
    }
}

fn split(op: &SplitOp, d: &Dataset, ctx: &ExecContext) -> Result<(State, Params)> {
    let outcome = |s: &SplitResult| s.train.history().last().map(|x| x.outcome.clone()).unwrap_or_default();
    let single = |s: SplitResult| {
        let o = outcome(&s);
        (State::Split(s), o)
    };
    Ok(match op {
        SplitOp::Random {
            test,
            val,
            seed,
            stratify,
        } => single(splitting::random_holdout(d, *test, *val, *seed, *stratify)?),
        SplitOp::Temporal(mode) => single(splitting::temporal_split(d, *mode)?),
        SplitOp::LeaveN { n, direction, order } => single(splitting::leave_n_split(d, *n, *direction, *order)?),
        SplitOp::KRepeated { k, test, seed, stratify } => (
            State::Folds(splitting::k_repeated_holdout(d, *k, *test, *seed, *stratify)?),
            Params::new(),
        ),
        SplitOp::CrossValidation { k, seed, stratify } => (
            State::Folds(splitting::cross_validation(d, *k, *seed, *stratify)?),
            Params::new(),
        ),
        SplitOp::Precomputed { train, test, val, spec } => {
            let val = val.as_ref().map(|v| ctx.base_dir.join(v));
            single(splitting::precomputed_split(
                ctx.base_dir.join(train),
                ctx.base_dir.join(test),
                val.as_deref(),
                spec,
            )?)
        }
    })
}

fn export_parts(s: &SplitResult, profile: &ExportProfile, out: &Path) -> Result<SplitResult> {
    let e = export_split(&s.train, &s.test, s.val.as_ref(), profile, out)?;
    Ok(SplitResult {
        train: e.train,
        test: e.test,
        val: e.val,
        checksums: s.checksums.clone(),
    })
}

fn extension(spec: &FormatSpec) -> &'static str {
    match spec.kind {
        FormatKind::Tabular if spec.separator == "," => "csv",
        FormatKind::Tabular => "tsv",
        FormatKind::Inline => "txt",
        FormatKind::Json => "jsonl",
    }
}

/// Writes each part to `<out>/<part>.<ext>`.
fn write_parts(s: &SplitResult, spec: &FormatSpec, out: &Path) -> Result<SplitResult> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ext = extension(spec);
    let write = |name: &str, d: &Dataset| io::write(d, out.join(format!("{name}.{ext}")), spec);
    Ok(SplitResult {
        train: write("train", &s.train)?,
        test: write("test", &s.test)?,
        val: s.val.as_ref().map(|v| write("val", v)).transpose()?,
        checksums: s.checksums.clone(),
    })
}
