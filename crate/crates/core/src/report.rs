//! Reporting data tables: counts per chain step at a chosen NACE depth,
//! shares, class rankings and municipality comparisons.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classification::{ChainStep, ClassificationTable};
use crate::nace::{normalize_code, Level, LookupError, NaceCode, Taxonomy};
use crate::scoping::{ensure_same_version, ClassificationMismatch, Inventory, ScopeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportLevel {
    Step,
    Section,
    Division,
    Group,
    Class,
}

impl ReportLevel {
    pub const ALL: [ReportLevel; 5] =
        [ReportLevel::Step, ReportLevel::Section, ReportLevel::Division, ReportLevel::Group, ReportLevel::Class];

    pub fn nace_level(self) -> Option<Level> {
        match self {
            ReportLevel::Step => None,
            ReportLevel::Section => Some(Level::Section),
            ReportLevel::Division => Some(Level::Division),
            ReportLevel::Group => Some(Level::Group),
            ReportLevel::Class => Some(Level::Class),
        }
    }

    /// Number of NACE codes in a row path at this level.
    pub fn depth(self) -> usize {
        match self {
            ReportLevel::Step => 0,
            ReportLevel::Section => 1,
            ReportLevel::Division => 2,
            ReportLevel::Group => 3,
            ReportLevel::Class => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReportLevel::Step => "step",
            ReportLevel::Section => "section",
            ReportLevel::Division => "division",
            ReportLevel::Group => "group",
            ReportLevel::Class => "class",
        }
    }
}

impl From<Level> for ReportLevel {
    fn from(level: Level) -> Self {
        match level {
            Level::Section => ReportLevel::Section,
            Level::Division => ReportLevel::Division,
            Level::Group => ReportLevel::Group,
            Level::Class => ReportLevel::Class,
        }
    }
}

impl fmt::Display for ReportLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReportLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReportLevel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown level {s:?} (expected step, section, division, group or class)"))
    }
}

/// Restricts a report to one chain step or one NACE subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReportFilter {
    Step(ChainStep),
    Code(NaceCode),
}

impl FromStr for ReportFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(step) = s.parse::<ChainStep>() {
            return Ok(ReportFilter::Step(step));
        }
        normalize_code(s)
            .map(ReportFilter::Code)
            .map_err(|e| format!("filter {s:?} is neither a chain step nor a NACE code: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    pub step: ChainStep,
    /// Section first; length equals the report level's depth.
    pub path: Vec<NaceCode>,
    pub labels: Vec<String>,
    pub count: u64,
}

impl ReportRow {
    pub fn name(&self) -> &str {
        self.labels.last().map(String::as_str).unwrap_or(self.step.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportTable {
    pub level: ReportLevel,
    /// Sorted by (step, path).
    pub rows: Vec<ReportRow>,
    pub total: u64,
}

impl ReportTable {
    pub fn step_total(&self, step: ChainStep) -> u64 {
        self.rows.iter().filter(|r| r.step == step).map(|r| r.count).sum()
    }

    pub fn row(&self, step: ChainStep, last: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.step == step && r.path.last().map(NaceCode::as_str) == Some(last))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("filter code {0} is not in the taxonomy")]
    BadFilter(NaceCode),
    #[error("class {0} is missing from the taxonomy")]
    UnknownCode(NaceCode),
    #[error("share denominator is zero")]
    ZeroDenominator,
    #[error("selector code {code} is deeper than the {level} report")]
    SelectorTooDeep { code: NaceCode, level: ReportLevel },
    #[error("a comparison needs at least two inventories")]
    NotEnoughInventories,
    #[error(transparent)]
    ClassificationMismatch(#[from] ClassificationMismatch),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportQuery {
    pub level: ReportLevel,
    pub mode: ScopeMode,
    pub filter: Option<ReportFilter>,
    /// Emit rows for in-scope classes with no entities.
    pub keep_zeros: bool,
}

impl ReportQuery {
    pub fn at(level: ReportLevel) -> Self {
        ReportQuery { level, mode: ScopeMode::IncludePending, filter: None, keep_zeros: false }
    }

    pub fn mode(mut self, mode: ScopeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn filter(mut self, filter: ReportFilter) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn keep_zeros(mut self, keep: bool) -> Self {
        self.keep_zeros = keep;
        self
    }
}

/// Aggregates inventories against the taxonomy and classification they were built on.
#[derive(Debug, Clone, Copy)]
pub struct Reporter<'a> {
    pub taxonomy: &'a Taxonomy,
    pub classification: &'a ClassificationTable,
}

impl<'a> Reporter<'a> {
    pub fn new(taxonomy: &'a Taxonomy, classification: &'a ClassificationTable) -> Self {
        Reporter { taxonomy, classification }
    }

    fn path(&self, class: &NaceCode, level: ReportLevel) -> Result<Vec<NaceCode>, ReportError> {
        let mut chain = self.taxonomy.ancestors(class).map_err(|e| match e {
            LookupError::UnknownCode(c) | LookupError::LevelNotDeeper { code: c, .. } => ReportError::UnknownCode(c),
        })?;
        chain.reverse();
        chain.push(class.clone());
        chain.truncate(level.depth());
        Ok(chain)
    }

    fn matches(&self, filter: Option<&ReportFilter>, step: ChainStep, class: &NaceCode) -> bool {
        match filter {
            None => true,
            Some(ReportFilter::Step(s)) => *s == step,
            Some(ReportFilter::Code(code)) => self.taxonomy.is_within(class, code),
        }
    }

    pub fn aggregate(&self, inventory: &Inventory, query: &ReportQuery) -> Result<ReportTable, ReportError> {
        if let Some(ReportFilter::Code(code)) = &query.filter {
            if !self.taxonomy.contains(code) {
                return Err(ReportError::BadFilter(code.clone()));
            }
        }
        let mut counts: BTreeMap<(ChainStep, Vec<NaceCode>), u64> = BTreeMap::new();
        for entry in inventory.effective_entries(query.mode) {
            if self.matches(query.filter.as_ref(), entry.step, &entry.class_code) {
                *counts.entry((entry.step, self.path(&entry.class_code, query.level)?)).or_default() += 1;
            }
        }
        if query.keep_zeros {
            for entry in self.classification.entries() {
                let Some(step) = entry.step else { continue };
                if self.taxonomy.contains(&entry.class_code)
                    && self.matches(query.filter.as_ref(), step, &entry.class_code)
                {
                    counts.entry((step, self.path(&entry.class_code, query.level)?)).or_default();
                }
            }
        }
        let rows: Vec<ReportRow> = counts
            .into_iter()
            .map(|((step, path), count)| {
                let labels = path.iter().map(|c| self.taxonomy.name(c).unwrap_or_default().to_string()).collect();
                ReportRow { step, path, labels, count }
            })
            .collect();
        let total = rows.iter().map(|r| r.count).sum();
        Ok(ReportTable { level: query.level, rows, total })
    }

    /// Side-by-side counts, one column per inventory, plus per-step totals.
    pub fn compare(&self, inventories: &[&Inventory], level: ReportLevel, mode: ScopeMode) -> Result<ComparisonReport, ReportError> {
        if inventories.len() < 2 {
            return Err(ReportError::NotEnoughInventories);
        }
        ensure_same_version(inventories.iter().copied())?;
        let query = ReportQuery::at(level).mode(mode);
        let tables = inventories.iter().map(|inv| self.aggregate(inv, &query)).collect::<Result<Vec<_>, _>>()?;
        let n = tables.len();

        let mut merged: BTreeMap<RowKey, (Vec<String>, Vec<u64>)> = BTreeMap::new();
        for (col, table) in tables.iter().enumerate() {
            for row in &table.rows {
                let slot = merged.entry((row.step, row.path.clone())).or_insert_with(|| (row.labels.clone(), vec![0; n]));
                slot.1[col] = row.count;
            }
        }
        let rows = merged
            .into_iter()
            .map(|((step, path), (labels, counts))| ComparisonRow { step, path, labels, counts })
            .collect();
        let step_totals = ChainStep::ALL
            .into_iter()
            .map(|s| (s, tables.iter().map(|t| t.step_total(s)).collect()))
            .collect();
        Ok(ComparisonReport {
            level,
            municipalities: inventories.iter().map(|inv| municipality_label(inv)).collect(),
            rows,
            step_totals,
            totals: tables.iter().map(|t| t.total).collect(),
        })
    }
}

type RowKey = (ChainStep, Vec<NaceCode>);

fn municipality_label(inventory: &Inventory) -> String {
    inventory.municipalities.iter().cloned().collect::<Vec<_>>().join("+")
}

/// Classes within `step` by entity count, descending, ties by code ascending.
pub fn rank_classes(inventory: &Inventory, step: ChainStep, top_n: usize) -> Vec<(NaceCode, u64)> {
    let mut counts: BTreeMap<&NaceCode, u64> = BTreeMap::new();
    for e in inventory.effective_entries(ScopeMode::IncludePending) {
        if e.step == step {
            *counts.entry(&e.class_code).or_default() += 1;
        }
    }
    let mut ranked: Vec<(NaceCode, u64)> = counts.into_iter().map(|(c, n)| (c.clone(), n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    ranked
}

/// Selects report rows by step and/or a NACE code on the row path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selector {
    pub step: Option<ChainStep>,
    pub code: Option<NaceCode>,
}

impl Selector {
    pub fn step(step: ChainStep) -> Self {
        Selector { step: Some(step), code: None }
    }

    pub fn within(mut self, code: NaceCode) -> Self {
        self.code = Some(code);
        self
    }

    fn sum(&self, table: &ReportTable) -> Result<u64, ReportError> {
        let idx = match &self.code {
            None => None,
            Some(code) => {
                let depth = ReportLevel::from(code.level()).depth();
                if depth > table.level.depth() {
                    return Err(ReportError::SelectorTooDeep { code: code.clone(), level: table.level });
                }
                Some((depth - 1, code))
            }
        };
        Ok(table
            .rows
            .iter()
            .filter(|r| self.step.is_none_or(|s| s == r.step))
            .filter(|r| idx.is_none_or(|(i, code)| &r.path[i] == code))
            .map(|r| r.count)
            .sum())
    }
}

/// An exact ratio of two counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Share {
    pub numerator: u64,
    pub denominator: u64,
}

impl Share {
    pub fn ratio(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Percentage with one decimal, rounded half up, computed in integers.
    pub fn percent(&self) -> String {
        let tenths = (self.numerator * 2000 + self.denominator) / (2 * self.denominator);
        format!("{}.{}%", tenths / 10, tenths % 10)
    }
}

impl fmt::Display for Share {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({})", self.numerator, self.denominator, self.percent())
    }
}

pub fn share_of(table: &ReportTable, numerator: &Selector, denominator: &Selector) -> Result<Share, ReportError> {
    let num = numerator.sum(table)?;
    let den = denominator.sum(table)?;
    if den == 0 {
        return Err(ReportError::ZeroDenominator);
    }
    Ok(Share { numerator: num, denominator: den })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonRow {
    pub step: ChainStep,
    pub path: Vec<NaceCode>,
    pub labels: Vec<String>,
    /// One count per municipality column.
    pub counts: Vec<u64>,
}

impl ComparisonRow {
    pub fn name(&self) -> &str {
        self.labels.last().map(String::as_str).unwrap_or(self.step.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComparisonReport {
    pub level: ReportLevel,
    pub municipalities: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    pub step_totals: Vec<(ChainStep, Vec<u64>)>,
    pub totals: Vec<u64>,
}

impl ComparisonReport {
    pub fn step_totals(&self, step: ChainStep) -> &[u64] {
        self.step_totals.iter().find(|(s, _)| *s == step).map(|(_, v)| v.as_slice()).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Csv,
    Markdown,
}

impl RenderFormat {
    /// `.md`/`.markdown` → Markdown, anything else → CSV.
    pub fn for_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("md" | "markdown") => RenderFormat::Markdown,
            _ => RenderFormat::Csv,
        }
    }
}

const CSV_PATH_COLUMNS: [&str; 6] = ["step", "section", "division", "group", "class", "name"];

fn csv_prefix(step: &str, path: &[NaceCode], name: &str) -> Vec<String> {
    let mut cells = vec![step.to_string()];
    cells.extend((0..4).map(|i| path.get(i).map(|c| c.to_string()).unwrap_or_default()));
    cells.push(name.to_string());
    cells
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn render_table(table: &ReportTable, format: RenderFormat) -> String {
    match format {
        RenderFormat::Csv => {
            let mut rows = vec![CSV_PATH_COLUMNS.iter().map(|s| s.to_string()).chain(["count".to_string()]).collect()];
            for r in &table.rows {
                let mut cells = csv_prefix(r.step.code(), &r.path, r.name());
                cells.push(r.count.to_string());
                rows.push(cells);
            }
            if !table.rows.is_empty() {
                let mut cells = csv_prefix("TOTAL", &[], "");
                cells.push(table.total.to_string());
                rows.push(cells);
            }
            csv_string(rows)
        }
        RenderFormat::Markdown => {
            let mut out = format!("# Potential food-wastage generators by {}\n", table.level);
            if table.rows.is_empty() {
                return out;
            }
            let depth = table.level.depth();
            if depth == 0 {
                out.push_str("\n| Step | Count |\n|---|---:|\n");
                for r in &table.rows {
                    writeln!(out, "| {} | {} |", r.step.label(), r.count).unwrap();
                }
            } else {
                let headers = ["Section", "Division", "Group", "Class"];
                for step in ChainStep::ALL {
                    let rows: Vec<_> = table.rows.iter().filter(|r| r.step == step).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    writeln!(out, "\n## {}\n", step.label()).unwrap();
                    writeln!(out, "| {} | Name | Count |", headers[..depth].join(" | ")).unwrap();
                    writeln!(out, "|{}---|---:|", "---|".repeat(depth)).unwrap();
                    for r in rows {
                        let codes: Vec<&str> = r.path.iter().map(NaceCode::as_str).collect();
                        writeln!(out, "| {} | {} | {} |", codes.join(" | "), md_cell(r.name()), r.count).unwrap();
                    }
                    writeln!(out, "\nStep total: {}", table.step_total(step)).unwrap();
                }
            }
            writeln!(out, "\n**Total: {}**", table.total).unwrap();
            out
        }
    }
}

pub fn render_comparison(report: &ComparisonReport, format: RenderFormat) -> String {
    let per_step_rows = report.level != ReportLevel::Step;
    match format {
        RenderFormat::Csv => {
            let mut header: Vec<String> = CSV_PATH_COLUMNS.iter().map(|s| s.to_string()).collect();
            header.extend(report.municipalities.iter().cloned());
            let mut rows = vec![header];
            let counts = |v: &[u64]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>();
            if per_step_rows {
                for r in &report.rows {
                    let mut cells = csv_prefix(r.step.code(), &r.path, r.name());
                    cells.extend(counts(&r.counts));
                    rows.push(cells);
                }
            }
            for (step, totals) in &report.step_totals {
                let mut cells = csv_prefix(step.code(), &[], step.label());
                cells.extend(counts(totals));
                rows.push(cells);
            }
            let mut cells = csv_prefix("TOTAL", &[], "");
            cells.extend(counts(&report.totals));
            rows.push(cells);
            csv_string(rows)
        }
        RenderFormat::Markdown => {
            let mut out = format!("# Comparison by {}: {}\n", report.level, report.municipalities.join(" vs "));
            let cols = report.municipalities.iter().map(|m| md_cell(m)).collect::<Vec<_>>().join(" | ");
            let num_align = "---:|".repeat(report.municipalities.len());
            let joined = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" | ");
            if per_step_rows {
                let depth = report.level.depth();
                let headers = ["Section", "Division", "Group", "Class"];
                for step in ChainStep::ALL {
                    let rows: Vec<_> = report.rows.iter().filter(|r| r.step == step).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    writeln!(out, "\n## {}\n", step.label()).unwrap();
                    writeln!(out, "| {} | Name | {cols} |", headers[..depth].join(" | ")).unwrap();
                    writeln!(out, "|{}---|{num_align}", "---|".repeat(depth)).unwrap();
                    for r in rows {
                        let codes: Vec<&str> = r.path.iter().map(NaceCode::as_str).collect();
                        writeln!(out, "| {} | {} | {} |", codes.join(" | "), md_cell(r.name()), joined(&r.counts)).unwrap();
                    }
                }
            }
            writeln!(out, "\n## Totals by step\n\n| Step | {cols} |\n|---|{num_align}").unwrap();
            for (step, totals) in &report.step_totals {
                writeln!(out, "| {} | {} |", step.label(), joined(totals)).unwrap();
            }
            writeln!(out, "| **Total** | {} |", joined(&report.totals)).unwrap();
            out
        }
    }
}
