//! Row-level and dataset-level problems that are reported instead of aborting.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    MalformedCode,
    NotClassLevel,
    MissingLocation,
    MalformedCoordinate,
    CoordinateOutOfRange,
    DuplicateSuspect,
    UnknownClass,
    GeocodeFailed,
    CoverageGap,
}

impl IssueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::MalformedCode => "malformed_code",
            IssueKind::NotClassLevel => "not_class_level",
            IssueKind::MissingLocation => "missing_location",
            IssueKind::MalformedCoordinate => "malformed_coordinate",
            IssueKind::CoordinateOutOfRange => "coordinate_out_of_range",
            IssueKind::DuplicateSuspect => "duplicate_suspect",
            IssueKind::UnknownClass => "unknown_class",
            IssueKind::GeocodeFailed => "geocode_failed",
            IssueKind::CoverageGap => "coverage_gap",
        }
    }

    /// Whether an issue of this kind removes its row from further processing.
    /// The rest are informational.
    pub fn rejects_row(self) -> bool {
        !matches!(self, IssueKind::DuplicateSuspect | IssueKind::CoverageGap)
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub municipality: Option<String>,
    /// 1-based data row (header excluded) in the source document.
    pub row: Option<usize>,
    pub entity_id: Option<String>,
    pub code: Option<String>,
    pub detail: String,
}

impl Issue {
    pub fn new(kind: IssueKind, detail: impl Into<String>) -> Self {
        Issue { kind, municipality: None, row: None, entity_id: None, code: None, detail: detail.into() }
    }

    pub fn at_row(mut self, municipality: &str, row: usize) -> Self {
        self.municipality = Some(municipality.to_string());
        self.row = Some(row);
        self
    }

    pub fn for_entity(mut self, entity_id: impl ToString) -> Self {
        self.entity_id = Some(entity_id.to_string());
        self
    }

    pub fn with_code(mut self, code: impl Into<String>) -> Self {
        self.code = Some(code.into());
        self
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(m) = &self.municipality {
            write!(f, " [{m}")?;
            if let Some(r) = self.row {
                write!(f, " row {r}")?;
            }
            write!(f, "]")?;
        }
        if let Some(code) = &self.code {
            write!(f, " {code}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Write issues as CSV with a fixed header.
pub fn issues_to_csv(issues: &[Issue]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "municipality", "row", "entity_id", "code", "detail"]).unwrap();
    for i in issues {
        let row = i.row.map(|r| r.to_string()).unwrap_or_default();
        w.write_record([
            i.kind.as_str(),
            i.municipality.as_deref().unwrap_or(""),
            &row,
            i.entity_id.as_deref().unwrap_or(""),
            i.code.as_deref().unwrap_or(""),
            &i.detail,
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
