//! Command-line pipeline: validate inputs, report, compare, export and serve.
//!
//! Exit codes: 0 success, 2 validation or comparison error, 3 unreadable input.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classification::{ClassificationError, ClassificationTable, Strictness};
use crate::geo::export_geojson;
use crate::issues::{issues_to_csv, Issue};
use crate::nace::{Level, Taxonomy, TaxonomyError};
use crate::registry::{ingest_registry_path, RegistryError, StubGeocoder};
use crate::report::{render_comparison, render_table, RenderFormat, ReportFilter, ReportLevel, ReportQuery, Reporter};
use crate::scoping::{build_inventory, parse_decisions, Inventory, ScopeMode, VerificationDecision};
use crate::ChainStep;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<TaxonomyError> for CliError {
    fn from(e: TaxonomyError) -> Self {
        match e {
            TaxonomyError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Invalid(format!("taxonomy: {other}")),
        }
    }
}

impl From<ClassificationError> for CliError {
    fn from(e: ClassificationError) -> Self {
        match e {
            ClassificationError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Invalid(format!("classification: {other}")),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "flw-scope", version, about = "Scope potential food-wastage generators from business registries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// NACE taxonomy file (`code;name`).
    #[arg(long, value_name = "PATH")]
    pub taxonomy: PathBuf,
    /// Typology file; `NAME=PATH` applies to one registry only.
    #[arg(long, value_name = "[NAME=]PATH")]
    pub classification: Vec<String>,
    /// Registry CSV for a municipality.
    #[arg(long, value_name = "NAME=PATH")]
    pub registry: Vec<String>,
    /// Offline geocoder table (`address;longitude;latitude`).
    #[arg(long, value_name = "PATH")]
    pub geocoder: Option<PathBuf>,
    /// Decisions document (JSON list); created by `serve` when absent.
    #[arg(long, value_name = "PATH")]
    pub decisions: Option<PathBuf>,
    #[arg(long, default_value = "include-pending", value_name = "include-pending|confirmed-only")]
    pub mode: ScopeMode,
    /// Treat classification coverage gaps as errors.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check taxonomy and classification coverage and consistency.
    Validate {
        #[command(flatten)]
        inputs: InputArgs,
    },
    /// Count generators of one registry per step and NACE level.
    Report {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, default_value = "step")]
        level: ReportLevel,
        /// Chain step or NACE code prefix.
        #[arg(long)]
        filter: Option<ReportFilter>,
        #[arg(long)]
        keep_zeros: bool,
        /// Output file; `.md` renders Markdown, anything else CSV.
        #[arg(long, value_name = "PATH")]
        out: Vec<PathBuf>,
    },
    /// Side-by-side counts for two or more registries.
    Compare {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, default_value = "step")]
        level: ReportLevel,
        #[arg(long, value_name = "PATH")]
        out: Vec<PathBuf>,
    },
    /// Write the GeoJSON point layer.
    Export {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, default_value = "step")]
        categorize_by: ReportLevel,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Serve the dataset, reports and decision intake on loopback.
    Serve {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, default_value_t = 8750)]
        port: u16,
        #[arg(long, default_value = "step")]
        categorize_by: ReportLevel,
        /// Directory of static workbench files served under `/`.
        #[arg(long, value_name = "DIR")]
        assets: Option<PathBuf>,
    },
}

/// Validated input and output locations for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub taxonomy_path: PathBuf,
    pub classification_path: Option<PathBuf>,
    /// Per-municipality classification files.
    pub classification_overrides: BTreeMap<String, PathBuf>,
    /// In command-line order.
    pub registries: Vec<(String, PathBuf)>,
    pub geocoder_stub_path: Option<PathBuf>,
    pub decisions_path: Option<PathBuf>,
    pub mode: ScopeMode,
    pub strictness: Strictness,
    pub outputs: Vec<PathBuf>,
}

fn split_named(raw: &str) -> Option<(&str, &str)> {
    let (name, path) = raw.split_once('=')?;
    let name = name.trim();
    (!name.is_empty() && !name.contains(['/', '\\'])).then_some((name, path))
}

impl RunConfig {
    pub fn from_inputs(inputs: &InputArgs, outputs: Vec<PathBuf>) -> Result<Self, CliError> {
        let mut registries = Vec::new();
        let mut names = BTreeSet::new();
        for raw in &inputs.registry {
            let (name, path) = split_named(raw)
                .ok_or_else(|| CliError::Invalid(format!("--registry {raw:?} must be NAME=PATH")))?;
            if !names.insert(name.to_string()) {
                return Err(CliError::Invalid(format!("municipality id {name:?} given twice")));
            }
            registries.push((name.to_string(), PathBuf::from(path)));
        }
        let mut classification_path = None;
        let mut classification_overrides = BTreeMap::new();
        for raw in &inputs.classification {
            match split_named(raw) {
                Some((name, path)) => {
                    if !names.contains(name) {
                        return Err(CliError::Invalid(format!("--classification {name}=... names no registry")));
                    }
                    if classification_overrides.insert(name.to_string(), PathBuf::from(path)).is_some() {
                        return Err(CliError::Invalid(format!("two classifications for {name:?}")));
                    }
                }
                None => {
                    if classification_path.replace(PathBuf::from(raw)).is_some() {
                        return Err(CliError::Invalid("more than one default --classification".into()));
                    }
                }
            }
        }
        let config = RunConfig {
            taxonomy_path: inputs.taxonomy.clone(),
            classification_path,
            classification_overrides,
            registries,
            geocoder_stub_path: inputs.geocoder.clone(),
            decisions_path: inputs.decisions.clone(),
            mode: inputs.mode,
            strictness: if inputs.strict { Strictness::Strict } else { Strictness::Lenient },
            outputs,
        };
        config.check()?;
        Ok(config)
    }

    /// Every referenced input exists and every registry has a classification.
    pub fn check(&self) -> Result<(), CliError> {
        let mut inputs: Vec<&Path> = vec![&self.taxonomy_path];
        inputs.extend(self.classification_path.as_deref());
        inputs.extend(self.classification_overrides.values().map(PathBuf::as_path));
        inputs.extend(self.registries.iter().map(|(_, p)| p.as_path()));
        inputs.extend(self.geocoder_stub_path.as_deref());
        if let Some(missing) = inputs.into_iter().find(|p| !p.is_file()) {
            return Err(CliError::Io(format!("{}: no such file", missing.display())));
        }
        let ids: BTreeSet<&str> = self.registries.iter().map(|(n, _)| n.as_str()).collect();
        if ids.len() != self.registries.len() {
            return Err(CliError::Invalid("municipality ids must be unique".into()));
        }
        if self.classification_path.is_none() {
            if let Some((name, _)) = self.registries.iter().find(|(n, _)| !self.classification_overrides.contains_key(n)) {
                return Err(CliError::Invalid(format!("no --classification for registry {name}")));
            }
            if self.registries.is_empty() && self.classification_overrides.is_empty() {
                return Err(CliError::Invalid("--classification is required".into()));
            }
        }
        Ok(())
    }

    pub fn classification_for(&self, municipality: &str) -> &Path {
        self.classification_overrides
            .get(municipality)
            .or(self.classification_path.as_ref())
            .expect("checked by RunConfig::check")
    }

    /// Distinct classification files, default first.
    pub fn classification_paths(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = self.classification_path.iter().map(PathBuf::as_path).collect();
        for p in self.classification_overrides.values() {
            if !out.contains(&p.as_path()) {
                out.push(p);
            }
        }
        out
    }
}

/// Loaded inputs with one inventory per registry, before any decisions.
#[derive(Debug, Clone)]
pub struct Session {
    pub taxonomy: Taxonomy,
    /// Classification of the first registry (or the default one).
    pub classification: ClassificationTable,
    pub inventories: Vec<Inventory>,
    /// Issues per registry: classification gaps, row rejections, scoping failures.
    pub issues: Vec<Vec<Issue>>,
    pub decisions: Vec<VerificationDecision>,
}

pub fn load_session(config: &RunConfig) -> Result<Session, CliError> {
    let taxonomy = Taxonomy::from_path(&config.taxonomy_path)?;
    let mut tables: BTreeMap<&Path, (ClassificationTable, Vec<Issue>)> = BTreeMap::new();
    for path in config.classification_paths() {
        tables.insert(path, ClassificationTable::from_path(path, &taxonomy, config.strictness)?);
    }
    let geocoder = match &config.geocoder_stub_path {
        Some(p) => StubGeocoder::from_path(p).map_err(|e| CliError::Io(e.to_string()))?,
        None => StubGeocoder::new(),
    };
    let mut inventories = Vec::new();
    let mut issues = Vec::new();
    for (name, path) in &config.registries {
        let (table, gap_issues) = &tables[config.classification_for(name)];
        let ingested = ingest_registry_path(path, name).map_err(|e| match e {
            RegistryError::UnreadableDocument(_) => CliError::Io(e.to_string()),
            other => CliError::Invalid(format!("{}: {other}", path.display())),
        })?;
        let mut inventory = build_inventory(&ingested.records, table, &geocoder);
        inventory.municipalities.insert(name.clone());
        let mut all = gap_issues.clone();
        all.extend(ingested.issues);
        all.extend(inventory.issues.iter().cloned());
        issues.push(all);
        inventories.push(inventory);
    }
    let first = config.registries.first().map(|(n, _)| config.classification_for(n));
    let first = first.or(config.classification_paths().first().copied()).expect("checked by RunConfig::check");
    let classification = tables[first].0.clone();
    let decisions = match &config.decisions_path {
        Some(p) => read_decisions(p)?,
        None => Vec::new(),
    };
    Ok(Session { taxonomy, classification, inventories, issues, decisions })
}

/// A missing decisions file reads as no decisions.
pub fn read_decisions(path: &Path) -> Result<Vec<VerificationDecision>, CliError> {
    match std::fs::read_to_string(path) {
        Ok(text) if text.trim().is_empty() => Ok(Vec::new()),
        Ok(text) => parse_decisions(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(CliError::Io(format!("{}: {e}", path.display()))),
    }
}

/// Apply the decisions that belong to the inventory's municipalities.
pub fn apply_decisions(inventory: &Inventory, decisions: &[VerificationDecision]) -> Result<Inventory, CliError> {
    let relevant: Vec<VerificationDecision> = decisions
        .iter()
        .filter(|d| inventory.municipalities.contains(d.entity_id.municipality()))
        .cloned()
        .collect();
    inventory.apply_verifications(&relevant).map_err(|e| CliError::Invalid(format!("decisions: {e}")))
}

/// Parse `args` (program name first) and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_io(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with_io<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Validate { inputs } => cmd_validate(&RunConfig::from_inputs(&inputs, Vec::new())?, out, err),
        Command::Report { inputs, level, filter, keep_zeros, out: files } => {
            let config = RunConfig::from_inputs(&inputs, files)?;
            let query = ReportQuery { level, mode: config.mode, filter, keep_zeros };
            cmd_report(&config, &query, out, err)
        }
        Command::Compare { inputs, level, out: files } => cmd_compare(&RunConfig::from_inputs(&inputs, files)?, level, out, err),
        Command::Export { inputs, categorize_by, out: file } => {
            cmd_export(&RunConfig::from_inputs(&inputs, file.into_iter().collect())?, categorize_by, out, err)
        }
        Command::Serve { inputs, port, categorize_by, assets } => {
            if let Some(dir) = &assets {
                if !dir.is_dir() {
                    return Err(CliError::Io(format!("{}: not a directory", dir.display())));
                }
            }
            let config = RunConfig::from_inputs(&inputs, Vec::new())?;
            let state = crate::serve::ServeState::from_config(&config, categorize_by, assets)?;
            let _ = writeln!(err, "serving {} entities on http://127.0.0.1:{port}", state.entity_count());
            crate::serve::run_blocking(state, port).map_err(|e| CliError::Io(format!("serve: {e}")))?;
            Ok(EXIT_OK)
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// `report.csv` gets `report.issues.csv` next to it.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    output.with_file_name(format!("{stem}.issues.csv"))
}

pub fn cmd_validate(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let taxonomy = Taxonomy::from_path(&config.taxonomy_path)?;
    let mut failed = false;
    for path in config.classification_paths() {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let check = ClassificationTable::check(&text, &taxonomy);
        let _ = writeln!(out, "classification {} version={}", path.display(), check.table.version());
        let _ = writeln!(out, "classes={} classified={} gaps={}", taxonomy.classes().count(), check.table.len(), check.gaps.len());
        for gap in &check.gaps {
            let _ = writeln!(out, "gap {gap}");
        }
        for e in &check.errors {
            let _ = writeln!(out, "error {e}");
        }
        for level in [Level::Section, Level::Division, Level::Group] {
            for node in check.table.upper_level_consistency_report(&taxonomy, level) {
                let _ = writeln!(out, "warning mixed {} {node}", level.name());
            }
        }
        failed |= !check.errors.is_empty();
        if config.strictness == Strictness::Strict && !check.gaps.is_empty() {
            failed = true;
        }
    }
    if !failed && !config.registries.is_empty() {
        let session = load_session(config)?;
        for ((name, _), issues) in config.registries.iter().zip(&session.issues) {
            let _ = writeln!(out, "registry {name} issues={}", issues.len());
        }
    }
    if failed {
        let _ = writeln!(err, "validation failed");
        return Ok(EXIT_INVALID);
    }
    Ok(EXIT_OK)
}

fn write_outputs(config: &RunConfig, render: impl Fn(RenderFormat) -> String, issues: &[Issue]) -> Result<(), CliError> {
    let mut sidecars = BTreeSet::new();
    for path in &config.outputs {
        write_file(path, &render(RenderFormat::for_path(path)))?;
        sidecars.insert(sidecar_path(path));
    }
    for path in sidecars {
        write_file(&path, &issues_to_csv(issues))?;
    }
    Ok(())
}

pub fn cmd_report(config: &RunConfig, query: &ReportQuery, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    if config.registries.len() != 1 {
        return Err(CliError::Invalid("report needs exactly one --registry".into()));
    }
    let session = load_session(config)?;
    let inventory = apply_decisions(&session.inventories[0], &session.decisions)?;
    let reporter = Reporter::new(&session.taxonomy, &session.classification);
    let table = reporter.aggregate(&inventory, query).map_err(|e| CliError::Invalid(e.to_string()))?;
    write_outputs(config, |fmt| render_table(&table, fmt), &session.issues[0])?;
    let _ = writeln!(out, "total={}", table.total);
    for step in ChainStep::ALL {
        let _ = writeln!(out, "{}={}", step.code(), table.step_total(step));
    }
    if !session.issues[0].is_empty() {
        let _ = writeln!(err, "{} issues recorded", session.issues[0].len());
    }
    Ok(EXIT_OK)
}

pub fn cmd_compare(config: &RunConfig, level: ReportLevel, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    if config.registries.len() < 2 {
        return Err(CliError::Invalid("compare needs at least two --registry".into()));
    }
    let session = load_session(config)?;
    let inventories = session
        .inventories
        .iter()
        .map(|inv| apply_decisions(inv, &session.decisions))
        .collect::<Result<Vec<_>, _>>()?;
    let reporter = Reporter::new(&session.taxonomy, &session.classification);
    let refs: Vec<&Inventory> = inventories.iter().collect();
    let report = reporter.compare(&refs, level, config.mode).map_err(|e| CliError::Invalid(e.to_string()))?;
    let issues: Vec<Issue> = session.issues.concat();
    write_outputs(config, |fmt| render_comparison(&report, fmt), &issues)?;
    let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let _ = writeln!(out, "municipalities={}", report.municipalities.join(","));
    let _ = writeln!(out, "total={}", join(&report.totals));
    for step in ChainStep::ALL {
        let _ = writeln!(out, "{}={}", step.code(), join(report.step_totals(step)));
    }
    if !issues.is_empty() {
        let _ = writeln!(err, "{} issues recorded", issues.len());
    }
    Ok(EXIT_OK)
}

/// Merge the session's inventories (all built on one classification version)
/// and apply its decisions.
pub fn merged_inventory(session: &Session) -> Result<Inventory, CliError> {
    let merged = if session.inventories.is_empty() {
        Inventory::empty(session.classification.version())
    } else {
        Inventory::merge(&session.inventories).map_err(|e| CliError::Invalid(e.to_string()))?
    };
    apply_decisions(&merged, &session.decisions)
}

pub fn cmd_export(config: &RunConfig, categorize_by: ReportLevel, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    if config.registries.is_empty() {
        return Err(CliError::Invalid("export needs at least one --registry".into()));
    }
    let session = load_session(config)?;
    let inventory = merged_inventory(&session)?;
    let document = export_geojson(&inventory, &session.taxonomy, config.mode, categorize_by);
    let text = document.to_geojson();
    match config.outputs.first() {
        Some(path) => {
            write_file(path, &text)?;
            let _ = writeln!(out, "features={}", document.features.len());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
            let _ = writeln!(err, "features={}", document.features.len());
        }
    }
    Ok(EXIT_OK)
}
