//! Registry ⋈ classification join: the inventory of potential generators and
//! its in-situ verification state.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classification::{ChainStep, ClassificationTable, FwTypology};
use crate::issues::{Issue, IssueKind};
use crate::nace::NaceCode;
use crate::registry::{geolocate, EntityId, GeoPoint, Geocoder, RegistryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerificationStatus {
    /// PFW entries need no visit.
    NotRequired,
    Pending,
    ConfirmedGenerator,
    ExcludedNonGenerator,
}

impl VerificationStatus {
    pub const ALL: [VerificationStatus; 4] = [
        VerificationStatus::NotRequired,
        VerificationStatus::Pending,
        VerificationStatus::ConfirmedGenerator,
        VerificationStatus::ExcludedNonGenerator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerificationStatus::NotRequired => "not_required",
            VerificationStatus::Pending => "pending",
            VerificationStatus::ConfirmedGenerator => "confirmed_generator",
            VerificationStatus::ExcludedNonGenerator => "excluded_non_generator",
        }
    }
}

/// Which entries count as the measurement scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScopeMode {
    /// Everything except entries excluded on site.
    #[default]
    IncludePending,
    /// PFW entries plus IV entries confirmed on site.
    ConfirmedOnly,
}

impl ScopeMode {
    pub fn admits(self, status: VerificationStatus) -> bool {
        match self {
            ScopeMode::IncludePending => status != VerificationStatus::ExcludedNonGenerator,
            ScopeMode::ConfirmedOnly => {
                matches!(status, VerificationStatus::NotRequired | VerificationStatus::ConfirmedGenerator)
            }
        }
    }
}

impl FromStr for ScopeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "includepending" => Ok(ScopeMode::IncludePending),
            "confirmedonly" => Ok(ScopeMode::ConfirmedOnly),
            _ => Err(format!("unknown mode {s:?} (expected include-pending or confirmed-only)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InventoryEntry {
    pub entity_id: EntityId,
    pub name: String,
    pub class_code: NaceCode,
    pub typology: FwTypology,
    pub step: ChainStep,
    pub point: GeoPoint,
    pub status: VerificationStatus,
    pub municipality: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inventory {
    /// Sorted by entity id.
    pub entries: Vec<InventoryEntry>,
    pub classification_version: String,
    pub municipalities: BTreeSet<String>,
    pub excluded_npfw: usize,
    /// Records that could not be scoped (unknown class, no point).
    pub issues: Vec<Issue>,
}

/// Join records with the classification, keeping PFW and IV classes.
pub fn build_inventory(records: &[RegistryRecord], classification: &ClassificationTable, geocoder: &dyn Geocoder) -> Inventory {
    let mut entries = Vec::new();
    let mut issues = Vec::new();
    let mut excluded_npfw = 0;
    let mut municipalities = BTreeSet::new();

    for record in records {
        municipalities.insert(record.municipality.clone());
        let Some(entry) = classification.entry(&record.class_code) else {
            issues.push(
                Issue::new(IssueKind::UnknownClass, "class code absent from the classification")
                    .at_row(&record.municipality, record.row)
                    .for_entity(&record.entity_id)
                    .with_code(record.class_code.as_str()),
            );
            continue;
        };
        let (typology, step) = match (entry.typology, entry.step) {
            (FwTypology::Npfw, _) => {
                excluded_npfw += 1;
                continue;
            }
            (t, Some(step)) => (t, step),
            (_, None) => unreachable!("validated classification gives every PFW/IV class a step"),
        };
        let point = match geolocate(record, geocoder) {
            Ok(p) => p,
            Err(e) => {
                issues.push(
                    Issue::new(IssueKind::GeocodeFailed, e.to_string())
                        .at_row(&record.municipality, record.row)
                        .for_entity(&record.entity_id)
                        .with_code(record.class_code.as_str()),
                );
                continue;
            }
        };
        let status = match typology {
            FwTypology::Iv => VerificationStatus::Pending,
            _ => VerificationStatus::NotRequired,
        };
        entries.push(InventoryEntry {
            entity_id: record.entity_id.clone(),
            name: record.name.clone(),
            class_code: record.class_code.clone(),
            typology,
            step,
            point,
            status,
            municipality: record.municipality.clone(),
        });
    }
    entries.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));

    Inventory {
        entries,
        classification_version: classification.version().to_string(),
        municipalities,
        excluded_npfw,
        issues,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Confirmed,
    Excluded,
}

impl Outcome {
    pub fn status(self) -> VerificationStatus {
        match self {
            Outcome::Confirmed => VerificationStatus::ConfirmedGenerator,
            Outcome::Excluded => VerificationStatus::ExcludedNonGenerator,
        }
    }
}

/// A recorded on-site verification result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationDecision {
    pub entity_id: EntityId,
    pub outcome: Outcome,
    pub note: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerificationError {
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("{0} is a PFW entry and needs no verification")]
    NotVerifiable(EntityId),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecisionFormatError {
    #[error("decisions document is not a JSON list: {0}")]
    NotAList(String),
    #[error("decision #{index}: {detail}")]
    MalformedDecision { index: usize, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("inventories use different classification versions: {0:?}")]
pub struct ClassificationMismatch(pub Vec<String>);

impl Inventory {
    pub fn empty(classification_version: impl Into<String>) -> Self {
        Inventory {
            entries: Vec::new(),
            classification_version: classification_version.into(),
            municipalities: BTreeSet::new(),
            excluded_npfw: 0,
            issues: Vec::new(),
        }
    }

    pub fn entry(&self, id: &EntityId) -> Option<&InventoryEntry> {
        self.entries.binary_search_by(|e| e.entity_id.cmp(id)).ok().map(|i| &self.entries[i])
    }

    /// Check that every decision targets an IV entry, without applying anything.
    pub fn check_decisions(&self, decisions: &[VerificationDecision]) -> Result<(), VerificationError> {
        for d in decisions {
            match self.entry(&d.entity_id) {
                None => return Err(VerificationError::UnknownEntity(d.entity_id.clone())),
                Some(e) if e.typology != FwTypology::Iv => {
                    return Err(VerificationError::NotVerifiable(d.entity_id.clone()))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// A new inventory with decisions applied in list order (last write wins).
    pub fn apply_verifications(&self, decisions: &[VerificationDecision]) -> Result<Inventory, VerificationError> {
        self.check_decisions(decisions)?;
        let last: HashMap<&EntityId, Outcome> = decisions.iter().map(|d| (&d.entity_id, d.outcome)).collect();
        let mut next = self.clone();
        for entry in &mut next.entries {
            if let Some(outcome) = last.get(&entry.entity_id) {
                entry.status = outcome.status();
            }
        }
        Ok(next)
    }

    pub fn effective_entries(&self, mode: ScopeMode) -> Vec<&InventoryEntry> {
        self.entries.iter().filter(|e| mode.admits(e.status)).collect()
    }

    pub fn status_counts(&self) -> BTreeMap<VerificationStatus, usize> {
        let mut counts: BTreeMap<_, _> = VerificationStatus::ALL.iter().map(|s| (*s, 0)).collect();
        for e in &self.entries {
            *counts.get_mut(&e.status).unwrap() += 1;
        }
        counts
    }

    /// Records seen by the build: entries, NPFW exclusions and row issues.
    pub fn accounted_records(&self) -> usize {
        self.entries.len() + self.excluded_npfw + self.issues.len()
    }

    /// Union of several municipalities' inventories built on one classification.
    pub fn merge(inventories: &[Inventory]) -> Result<Inventory, ClassificationMismatch> {
        ensure_same_version(inventories.iter())?;
        let mut merged = Inventory::empty(inventories.first().map(|i| i.classification_version.clone()).unwrap_or_default());
        for inv in inventories {
            merged.entries.extend(inv.entries.iter().cloned());
            merged.municipalities.extend(inv.municipalities.iter().cloned());
            merged.excluded_npfw += inv.excluded_npfw;
            merged.issues.extend(inv.issues.iter().cloned());
        }
        merged.entries.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
        Ok(merged)
    }
}

pub(crate) fn ensure_same_version<'a>(inventories: impl Iterator<Item = &'a Inventory>) -> Result<(), ClassificationMismatch> {
    let versions: BTreeSet<&str> = inventories.map(|i| i.classification_version.as_str()).collect();
    if versions.len() > 1 {
        return Err(ClassificationMismatch(versions.into_iter().map(str::to_string).collect()));
    }
    Ok(())
}

/// Parse the shared decisions document: a JSON list of
/// `{entity_id, outcome, note, timestamp}` objects.
pub fn parse_decisions(text: &str) -> Result<Vec<VerificationDecision>, DecisionFormatError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DecisionFormatError::NotAList(e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(DecisionFormatError::NotAList("top-level value is not a list".into()));
    };
    items
        .iter()
        .enumerate()
        .map(|(index, item)| parse_decision(item).map_err(|detail| DecisionFormatError::MalformedDecision { index, detail }))
        .collect()
}

fn parse_decision(item: &Value) -> Result<VerificationDecision, String> {
    let obj = item.as_object().ok_or("not an object")?;
    let text = |key: &str| -> Result<Option<&str>, String> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(format!("{key} must be a string")),
        }
    };
    let entity_id = text("entity_id")?
        .ok_or("missing entity_id")?
        .parse::<EntityId>()
        .map_err(|e| e.to_string())?;
    let outcome = match text("outcome")?.ok_or("missing outcome")? {
        "confirmed" => Outcome::Confirmed,
        "excluded" => Outcome::Excluded,
        other => return Err(format!("outcome {other:?} is not \"confirmed\" or \"excluded\"")),
    };
    let note = text("note")?.unwrap_or("").to_string();
    let raw_ts = text("timestamp")?.ok_or("missing timestamp")?;
    let timestamp = DateTime::parse_from_rfc3339(raw_ts)
        .map_err(|e| format!("timestamp {raw_ts:?}: {e}"))?
        .with_timezone(&Utc);
    Ok(VerificationDecision { entity_id, outcome, note, timestamp })
}

/// Serialize decisions in the shared format, in list order.
pub fn decisions_to_json(decisions: &[VerificationDecision]) -> String {
    let items: Vec<Value> = decisions
        .iter()
        .map(|d| {
            serde_json::json!({
                "entity_id": d.entity_id.to_string(),
                "outcome": d.outcome,
                "note": d.note,
                "timestamp": d.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            })
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&items).unwrap();
    out.push('\n');
    out
}
