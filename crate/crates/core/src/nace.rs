//! NACE Rev. 2 codes and the Section → Division → Group → Class hierarchy.
//!
//! Codes are accepted in the dotted form used by EUROSTAT (`01.11`) and in the
//! decimal-comma form common in Spanish-locale tables (`01,11`). Everything
//! is stored in the canonical dotted, zero-padded form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Depth of a node in the NACE hierarchy, shallowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Section,
    Division,
    Group,
    Class,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Section, Level::Division, Level::Group, Level::Class];

    pub fn name(self) -> &'static str {
        match self {
            Level::Section => "section",
            Level::Division => "division",
            Level::Group => "group",
            Level::Class => "class",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodeError {
    #[error("empty NACE code")]
    Empty,
    #[error("malformed NACE code {0:?}")]
    Malformed(String),
}

/// A normalized NACE code. The level is always consistent with the text shape:
/// `A`..`U` for sections, `DD` for divisions, `DD.D` for groups, `DD.DD` for classes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NaceCode {
    text: String,
    level: Level,
}

/// Normalize a raw code string into its canonical form.
pub fn normalize_code(raw: &str) -> Result<NaceCode, CodeError> {
    let cleaned: String = raw
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| if c == ',' { '.' } else { c })
        .collect();
    if cleaned.is_empty() {
        return Err(CodeError::Empty);
    }
    let malformed = || CodeError::Malformed(raw.trim().to_string());

    if cleaned.len() == 1 && cleaned.chars().all(|c| c.is_ascii_alphabetic()) {
        let letter = cleaned.to_ascii_uppercase();
        return if ('A'..='U').contains(&letter.chars().next().unwrap()) {
            Ok(NaceCode { text: letter, level: Level::Section })
        } else {
            Err(malformed())
        };
    }

    let (division, rest) = match cleaned.split_once('.') {
        Some((d, r)) => (d, Some(r)),
        None => (cleaned.as_str(), None),
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(division) || division.len() > 2 {
        return Err(malformed());
    }
    let division = format!("{division:0>2}");
    match rest {
        None => Ok(NaceCode { text: division, level: Level::Division }),
        Some(r) if all_digits(r) && r.len() == 1 => {
            Ok(NaceCode { text: format!("{division}.{r}"), level: Level::Group })
        }
        Some(r) if all_digits(r) && r.len() == 2 => {
            Ok(NaceCode { text: format!("{division}.{r}"), level: Level::Class })
        }
        Some(_) => Err(malformed()),
    }
}

impl NaceCode {
    pub fn parse(raw: &str) -> Result<Self, CodeError> {
        normalize_code(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn level(&self) -> Level {
        self.level
    }

    /// The parent derivable from the digits alone. Divisions and sections
    /// return `None`; a division's section needs the taxonomy mapping.
    pub fn numeric_parent(&self) -> Option<NaceCode> {
        match self.level {
            Level::Class => Some(NaceCode { text: self.text[..4].to_string(), level: Level::Group }),
            Level::Group => Some(NaceCode { text: self.text[..2].to_string(), level: Level::Division }),
            Level::Division | Level::Section => None,
        }
    }

    /// The ancestor (or self) at a numeric level, if derivable from the digits.
    pub fn truncate(&self, level: Level) -> Option<NaceCode> {
        if level > self.level || level == Level::Section || self.level == Level::Section {
            return (level == self.level).then(|| self.clone());
        }
        let len = match level {
            Level::Division => 2,
            Level::Group => 4,
            Level::Class => 5,
            Level::Section => unreachable!(),
        };
        Some(NaceCode { text: self.text[..len].to_string(), level })
    }
}

impl fmt::Display for NaceCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl FromStr for NaceCode {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_code(s)
    }
}

impl Serialize for NaceCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for NaceCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        normalize_code(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyNode {
    pub code: NaceCode,
    pub name: String,
    pub parent: Option<NaceCode>,
    pub children: Vec<NaceCode>,
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("cannot read taxonomy {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    MalformedCode {
        line: usize,
        #[source]
        source: CodeError,
    },
    #[error("line {line}: expected `code;name`")]
    MalformedRow { line: usize },
    #[error("{0} has no ancestor row")]
    OrphanNode(NaceCode),
    #[error("duplicate code {0}")]
    DuplicateCode(NaceCode),
    #[error("taxonomy document contains no nodes")]
    EmptyTaxonomy,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LookupError {
    #[error("unknown code {0}")]
    UnknownCode(NaceCode),
    #[error("{level} is not deeper than {code}")]
    LevelNotDeeper { code: NaceCode, level: Level },
}

/// An immutable, fully linked NACE hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    nodes: BTreeMap<NaceCode, TaxonomyNode>,
    division_to_section: BTreeMap<NaceCode, NaceCode>,
}

impl Taxonomy {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parse the semicolon-delimited `code;name` format. Divisions belong to
    /// the most recent section row above them; groups and classes are linked
    /// by their digit prefix once every row has been read.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut rows: Vec<(NaceCode, String)> = Vec::new();
        let mut division_to_section = BTreeMap::new();
        let mut current_section: Option<NaceCode> = None;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (code_raw, name) = line
                .split_once(';')
                .ok_or(TaxonomyError::MalformedRow { line: line_no })?;
            if rows.is_empty() && code_raw.trim().eq_ignore_ascii_case("code") {
                continue;
            }
            let code = normalize_code(code_raw)
                .map_err(|source| TaxonomyError::MalformedCode { line: line_no, source })?;
            let name = name.trim().trim_matches('"').to_string();
            match code.level() {
                Level::Section => current_section = Some(code.clone()),
                Level::Division => match &current_section {
                    Some(section) => {
                        division_to_section.entry(code.clone()).or_insert_with(|| section.clone());
                    }
                    None => return Err(TaxonomyError::OrphanNode(code)),
                },
                Level::Group | Level::Class => {}
            }
            rows.push((code, name));
        }

        if rows.is_empty() {
            return Err(TaxonomyError::EmptyTaxonomy);
        }

        let mut nodes: BTreeMap<NaceCode, TaxonomyNode> = BTreeMap::new();
        for (code, name) in &rows {
            if nodes.contains_key(code) {
                return Err(TaxonomyError::DuplicateCode(code.clone()));
            }
            let parent = match code.level() {
                Level::Section => None,
                Level::Division => division_to_section.get(code).cloned(),
                Level::Group | Level::Class => code.numeric_parent(),
            };
            nodes.insert(
                code.clone(),
                TaxonomyNode { code: code.clone(), name: name.clone(), parent, children: Vec::new() },
            );
        }
        for (code, _) in &rows {
            let Some(parent) = nodes[code].parent.clone() else { continue };
            match nodes.get_mut(&parent) {
                Some(parent_node) => parent_node.children.push(code.clone()),
                None => return Err(TaxonomyError::OrphanNode(code.clone())),
            }
        }

        Ok(Taxonomy { nodes, division_to_section })
    }

    pub fn node(&self, code: &NaceCode) -> Option<&TaxonomyNode> {
        self.nodes.get(code)
    }

    pub fn contains(&self, code: &NaceCode) -> bool {
        self.nodes.contains_key(code)
    }

    pub fn name(&self, code: &NaceCode) -> Option<&str> {
        self.nodes.get(code).map(|n| n.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn section_of_division(&self, division: &NaceCode) -> Option<&NaceCode> {
        self.division_to_section.get(division)
    }

    /// Every node at `level`, in code order.
    pub fn codes_at(&self, level: Level) -> impl Iterator<Item = &NaceCode> + '_ {
        self.nodes.keys().filter(move |c| c.level() == level)
    }

    pub fn classes(&self) -> impl Iterator<Item = &NaceCode> + '_ {
        self.codes_at(Level::Class)
    }

    /// Ancestors from the immediate parent up to the section.
    pub fn ancestors(&self, code: &NaceCode) -> Result<Vec<NaceCode>, LookupError> {
        let mut node = self.nodes.get(code).ok_or_else(|| LookupError::UnknownCode(code.clone()))?;
        let mut out = Vec::with_capacity(3);
        while let Some(parent) = &node.parent {
            out.push(parent.clone());
            node = &self.nodes[parent];
        }
        Ok(out)
    }

    /// The ancestor-or-self of `code` at `level`.
    pub fn ancestor_at(&self, code: &NaceCode, level: Level) -> Result<NaceCode, LookupError> {
        if !self.contains(code) {
            return Err(LookupError::UnknownCode(code.clone()));
        }
        if code.level() == level {
            return Ok(code.clone());
        }
        self.ancestors(code)?
            .into_iter()
            .find(|c| c.level() == level)
            .ok_or_else(|| LookupError::LevelNotDeeper { code: code.clone(), level })
    }

    /// All nodes at `level` under `code`.
    pub fn descendants_at(&self, code: &NaceCode, level: Level) -> Result<BTreeSet<NaceCode>, LookupError> {
        let node = self.nodes.get(code).ok_or_else(|| LookupError::UnknownCode(code.clone()))?;
        if level <= code.level() {
            return Err(LookupError::LevelNotDeeper { code: code.clone(), level });
        }
        let mut out = BTreeSet::new();
        let mut stack: Vec<&NaceCode> = node.children.iter().collect();
        while let Some(child) = stack.pop() {
            if child.level() == level {
                out.insert(child.clone());
            } else {
                stack.extend(self.nodes[child].children.iter());
            }
        }
        Ok(out)
    }

    /// True when `code` is `ancestor` or lies beneath it.
    pub fn is_within(&self, code: &NaceCode, ancestor: &NaceCode) -> bool {
        code == ancestor
            || self
                .ancestors(code)
                .map(|list| list.contains(ancestor))
                .unwrap_or(false)
    }
}
