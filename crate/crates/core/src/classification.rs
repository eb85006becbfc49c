//! Per-class food-wastage typology and agrifood-chain step.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::issues::{Issue, IssueKind};
use crate::nace::{normalize_code, CodeError, Level, NaceCode, Taxonomy};

/// Potential as a food-wastage generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FwTypology {
    #[serde(rename = "PFW")]
    Pfw,
    #[serde(rename = "NPFW")]
    Npfw,
    #[serde(rename = "IV")]
    Iv,
}

impl FwTypology {
    pub fn as_str(self) -> &'static str {
        match self {
            FwTypology::Pfw => "PFW",
            FwTypology::Npfw => "NPFW",
            FwTypology::Iv => "IV",
        }
    }

    /// PFW and IV classes belong to the inventory scope; NPFW never does.
    pub fn in_scope(self) -> bool {
        self != FwTypology::Npfw
    }
}

impl fmt::Display for FwTypology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FwTypology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PFW" => Ok(FwTypology::Pfw),
            "NPFW" => Ok(FwTypology::Npfw),
            "IV" => Ok(FwTypology::Iv),
            _ => Err(s.trim().to_string()),
        }
    }
}

/// Step of the agrifood chain, in chain order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChainStep {
    #[serde(rename = "PRODUCTION")]
    Production,
    #[serde(rename = "MANUFACTURING")]
    Manufacturing,
    #[serde(rename = "DISTRIBUTION_RETAIL")]
    DistributionAndRetail,
    #[serde(rename = "CONSUMPTION")]
    Consumption,
}

impl ChainStep {
    pub const ALL: [ChainStep; 4] = [
        ChainStep::Production,
        ChainStep::Manufacturing,
        ChainStep::DistributionAndRetail,
        ChainStep::Consumption,
    ];

    /// File-format spelling.
    pub fn code(self) -> &'static str {
        match self {
            ChainStep::Production => "PRODUCTION",
            ChainStep::Manufacturing => "MANUFACTURING",
            ChainStep::DistributionAndRetail => "DISTRIBUTION_RETAIL",
            ChainStep::Consumption => "CONSUMPTION",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ChainStep::Production => "Production",
            ChainStep::Manufacturing => "Manufacturing",
            ChainStep::DistributionAndRetail => "Distribution and Retail",
            ChainStep::Consumption => "Consumption",
        }
    }
}

impl fmt::Display for ChainStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ChainStep {
    type Err = String;

    /// Accepts the file spelling and loose variants such as `Distribution and Retail`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "PRODUCTION" => Ok(ChainStep::Production),
            "MANUFACTURING" => Ok(ChainStep::Manufacturing),
            "DISTRIBUTIONRETAIL" | "DISTRIBUTIONANDRETAIL" | "DISTRIBUTION" => Ok(ChainStep::DistributionAndRetail),
            "CONSUMPTION" => Ok(ChainStep::Consumption),
            _ => Err(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassificationEntry {
    pub class_code: NaceCode,
    pub typology: FwTypology,
    /// Present exactly when the typology is PFW or IV.
    pub step: Option<ChainStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Strict,
    Lenient,
}

#[derive(Debug, thiserror::Error)]
pub enum ClassificationError {
    #[error("cannot read classification {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `class_code;typology;step`")]
    MalformedRow { line: usize },
    #[error("line {line}: {source}")]
    MalformedCode {
        line: usize,
        #[source]
        source: CodeError,
    },
    #[error("line {line}: {code} is a {level}, not a class")]
    NotAClass { line: usize, code: NaceCode, level: Level },
    #[error("line {line}: unknown typology code {value:?}")]
    UnknownTypologyCode { line: usize, value: String },
    #[error("line {line}: unknown chain step {value:?}")]
    UnknownStep { line: usize, value: String },
    #[error("line {line}: {code} is NPFW but carries a chain step")]
    StepOnNpfw { line: usize, code: NaceCode },
    #[error("line {line}: {code} is PFW/IV but has no chain step")]
    MissingStepOnPfwOrIv { line: usize, code: NaceCode },
    #[error("line {line}: {code} is not in the taxonomy")]
    UnknownClass { line: usize, code: NaceCode },
    #[error("line {line}: {code} classified twice")]
    DuplicateEntry { line: usize, code: NaceCode },
    #[error("{} taxonomy classes have no classification: {}", .0.len(), join_codes(.0))]
    CoverageGap(Vec<NaceCode>),
}

fn join_codes(codes: &[NaceCode]) -> String {
    codes.iter().map(NaceCode::as_str).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationTable {
    entries: BTreeMap<NaceCode, ClassificationEntry>,
    version: String,
}

/// Everything found while checking a classification document: the valid
/// entries, every row violation, and the taxonomy classes left uncovered.
#[derive(Debug)]
pub struct ClassificationCheck {
    pub table: ClassificationTable,
    pub errors: Vec<ClassificationError>,
    pub gaps: Vec<NaceCode>,
}

impl ClassificationCheck {
    pub fn gap_issues(&self) -> Vec<Issue> {
        self.gaps
            .iter()
            .map(|c| Issue::new(IssueKind::CoverageGap, "class has no food-wastage typology").with_code(c.as_str()))
            .collect()
    }
}

impl ClassificationTable {
    pub fn from_path(path: impl AsRef<Path>, taxonomy: &Taxonomy, strictness: Strictness) -> Result<(Self, Vec<Issue>), ClassificationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ClassificationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::load(&text, taxonomy, strictness)
    }

    /// Load and validate against `taxonomy`. The first violation is returned
    /// as the error; in strict mode, coverage gaps are an error, in lenient
    /// mode they come back as `CoverageGap` issues.
    pub fn load(text: &str, taxonomy: &Taxonomy, strictness: Strictness) -> Result<(Self, Vec<Issue>), ClassificationError> {
        let mut check = Self::check(text, taxonomy);
        if !check.errors.is_empty() {
            return Err(check.errors.swap_remove(0));
        }
        if strictness == Strictness::Strict && !check.gaps.is_empty() {
            return Err(ClassificationError::CoverageGap(check.gaps));
        }
        let issues = check.gap_issues();
        Ok((check.table, issues))
    }

    /// Validate every row without stopping at the first problem.
    pub fn check(text: &str, taxonomy: &Taxonomy) -> ClassificationCheck {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        let mut version = None;
        let mut seen_header = false;

        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version.get_or_insert_with(|| v.trim().to_string());
                }
                continue;
            }
            let fields: Vec<&str> = trimmed.split(';').map(str::trim).collect();
            if !seen_header && fields.first().is_some_and(|f| f.eq_ignore_ascii_case("class_code")) {
                seen_header = true;
                continue;
            }
            seen_header = true;
            match parse_row(line, &fields, taxonomy) {
                Ok(entry) => {
                    if entries.contains_key(&entry.class_code) {
                        errors.push(ClassificationError::DuplicateEntry { line, code: entry.class_code });
                    } else {
                        entries.insert(entry.class_code.clone(), entry);
                    }
                }
                Err(e) => errors.push(e),
            }
        }

        let gaps = taxonomy.classes().filter(|c| !entries.contains_key(*c)).cloned().collect();
        let version = version.unwrap_or_else(|| content_version(text));
        ClassificationCheck { table: ClassificationTable { entries, version }, errors, gaps }
    }

    /// Build a table from already-validated entries.
    pub fn from_entries(entries: impl IntoIterator<Item = ClassificationEntry>, version: impl Into<String>) -> Self {
        let entries = entries.into_iter().map(|e| (e.class_code.clone(), e)).collect();
        ClassificationTable { entries, version: version.into() }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, code: &NaceCode) -> Option<&ClassificationEntry> {
        self.entries.get(code)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ClassificationEntry> + '_ {
        self.entries.values()
    }

    pub fn classify(&self, code: &NaceCode) -> Result<FwTypology, UnknownClass> {
        self.entry(code).map(|e| e.typology).ok_or_else(|| UnknownClass(code.clone()))
    }

    pub fn step_of(&self, code: &NaceCode) -> Result<Option<ChainStep>, UnknownClass> {
        self.entry(code).map(|e| e.step).ok_or_else(|| UnknownClass(code.clone()))
    }

    /// Nodes at `level` that mix in-scope classes (PFW or IV) with NPFW
    /// classes, so that scoping at that level would include non-generators
    /// or drop generators. Counts are per typology over classified classes.
    pub fn upper_level_consistency_report(&self, taxonomy: &Taxonomy, level: Level) -> Vec<MixedNode> {
        let mut per_node: BTreeMap<NaceCode, BTreeMap<FwTypology, usize>> = BTreeMap::new();
        for entry in self.entries.values() {
            let Ok(node) = taxonomy.ancestor_at(&entry.class_code, level) else { continue };
            *per_node.entry(node).or_default().entry(entry.typology).or_default() += 1;
        }
        per_node
            .into_iter()
            .filter(|(_, counts)| {
                counts.contains_key(&FwTypology::Npfw) && counts.keys().any(|t| t.in_scope())
            })
            .map(|(code, counts)| MixedNode { code, counts })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("class {0} is not classified")]
pub struct UnknownClass(pub NaceCode);

/// An upper-level node mixing typologies among its classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MixedNode {
    pub code: NaceCode,
    pub counts: BTreeMap<FwTypology, usize>,
}

impl fmt::Display for MixedNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.code)?;
        for (t, n) in &self.counts {
            write!(f, " {t}={n}")?;
        }
        Ok(())
    }
}

fn parse_row(line: usize, fields: &[&str], taxonomy: &Taxonomy) -> Result<ClassificationEntry, ClassificationError> {
    let (code_raw, typology_raw, step_raw) = match fields {
        [c, t] => (*c, *t, ""),
        [c, t, s] => (*c, *t, *s),
        _ => return Err(ClassificationError::MalformedRow { line }),
    };
    let code = normalize_code(code_raw).map_err(|source| ClassificationError::MalformedCode { line, source })?;
    if code.level() != Level::Class {
        let level = code.level();
        return Err(ClassificationError::NotAClass { line, code, level });
    }
    let typology: FwTypology = typology_raw
        .parse()
        .map_err(|value| ClassificationError::UnknownTypologyCode { line, value })?;
    let step = match step_raw {
        "" | "-" => None,
        s => Some(s.parse::<ChainStep>().map_err(|value| ClassificationError::UnknownStep { line, value })?),
    };
    match (typology, step) {
        (FwTypology::Npfw, Some(_)) => return Err(ClassificationError::StepOnNpfw { line, code }),
        (FwTypology::Pfw | FwTypology::Iv, None) => {
            return Err(ClassificationError::MissingStepOnPfwOrIv { line, code })
        }
        _ => {}
    }
    if !taxonomy.contains(&code) {
        return Err(ClassificationError::UnknownClass { line, code });
    }
    Ok(ClassificationEntry { class_code: code, typology, step })
}

fn content_version(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}
