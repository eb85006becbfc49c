//! GeoJSON point layer of potential generators.
//!
//! Output is canonical so that exports can be compared byte for byte: keys
//! are sorted, coordinates are `[longitude, latitude]` with exactly six
//! decimals, features are ordered by entity id. No `crs` member is written;
//! RFC 7946 fixes WGS-84.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::value::RawValue;
use serde_json::Value;

use crate::nace::Taxonomy;
use crate::registry::GeoPoint;
use crate::report::ReportLevel;
use crate::scoping::{parse_decisions, DecisionFormatError, Inventory, ScopeMode, VerificationDecision};

/// Property keys present on every feature.
pub const PROPERTY_KEYS: [&str; 12] = [
    "category",
    "class_code",
    "class_name",
    "division",
    "entity_id",
    "group",
    "municipality",
    "name",
    "section",
    "status",
    "step",
    "typology",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PointFeature {
    pub point: GeoPoint,
    pub properties: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDocument {
    pub categorize_by: ReportLevel,
    pub features: Vec<PointFeature>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("feature document has no features")]
    EmptyDocument,
    #[error("invalid GeoJSON: {0}")]
    Invalid(String),
}

/// Property key holding the category value for a level.
pub fn category_key(level: ReportLevel) -> &'static str {
    match level {
        ReportLevel::Step => "step",
        ReportLevel::Section => "section",
        ReportLevel::Division => "division",
        ReportLevel::Group => "group",
        ReportLevel::Class => "class_code",
    }
}

/// Point features for the effective entries of `inventory`.
pub fn export_geojson(inventory: &Inventory, taxonomy: &Taxonomy, mode: ScopeMode, categorize_by: ReportLevel) -> FeatureDocument {
    let features = inventory
        .effective_entries(mode)
        .into_iter()
        .map(|e| {
            let mut ancestors = taxonomy.ancestors(&e.class_code).unwrap_or_default();
            ancestors.reverse();
            let at = |i: usize| ancestors.get(i).map(|c| c.to_string()).unwrap_or_default();
            let mut props: BTreeMap<String, String> = [
                ("class_code", e.class_code.to_string()),
                ("class_name", taxonomy.name(&e.class_code).unwrap_or_default().to_string()),
                ("division", at(1)),
                ("entity_id", e.entity_id.to_string()),
                ("group", at(2)),
                ("municipality", e.municipality.clone()),
                ("name", e.name.clone()),
                ("section", at(0)),
                ("status", e.status.as_str().to_string()),
                ("step", e.step.code().to_string()),
                ("typology", e.typology.as_str().to_string()),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            let category = props[category_key(categorize_by)].clone();
            props.insert("category".into(), category);
            PointFeature { point: e.point, properties: props }
        })
        .collect();
    FeatureDocument { categorize_by, features }
}

#[derive(Serialize)]
struct GeometryOut<'a> {
    coordinates: &'a RawValue,
    #[serde(rename = "type")]
    kind: &'static str,
}

#[derive(Serialize)]
struct FeatureOut<'a> {
    geometry: GeometryOut<'a>,
    properties: &'a BTreeMap<String, String>,
    #[serde(rename = "type")]
    kind: &'static str,
}

#[derive(Serialize)]
struct CollectionOut<'a> {
    categorize_by: ReportLevel,
    features: Vec<FeatureOut<'a>>,
    #[serde(rename = "type")]
    kind: &'static str,
}

fn format_coordinates(p: &GeoPoint) -> Box<RawValue> {
    RawValue::from_string(format!("[{:.6},{:.6}]", p.longitude(), p.latitude())).expect("valid JSON array")
}

impl FeatureDocument {
    pub fn to_geojson(&self) -> String {
        let coords: Vec<Box<RawValue>> = self.features.iter().map(|f| format_coordinates(&f.point)).collect();
        let doc = CollectionOut {
            categorize_by: self.categorize_by,
            features: self
                .features
                .iter()
                .zip(&coords)
                .map(|(f, c)| FeatureOut {
                    geometry: GeometryOut { coordinates: c, kind: "Point" },
                    properties: &f.properties,
                    kind: "Feature",
                })
                .collect(),
            kind: "FeatureCollection",
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("serializable document");
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self, GeoError> {
        let invalid = |m: &str| GeoError::Invalid(m.to_string());
        let root: Value = serde_json::from_str(text).map_err(|e| GeoError::Invalid(e.to_string()))?;
        if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(invalid("not a FeatureCollection"));
        }
        let categorize_by = root
            .get("categorize_by")
            .and_then(Value::as_str)
            .unwrap_or("step")
            .parse::<ReportLevel>()
            .map_err(GeoError::Invalid)?;
        let items = root.get("features").and_then(Value::as_array).ok_or_else(|| invalid("missing features"))?;
        let mut features = Vec::with_capacity(items.len());
        for item in items {
            let geometry = item.get("geometry").ok_or_else(|| invalid("feature without geometry"))?;
            if geometry.get("type").and_then(Value::as_str) != Some("Point") {
                return Err(invalid("geometry is not a Point"));
            }
            let coords = geometry
                .get("coordinates")
                .and_then(Value::as_array)
                .filter(|c| c.len() == 2)
                .ok_or_else(|| invalid("point needs [longitude, latitude]"))?;
            let lon = coords[0].as_f64().ok_or_else(|| invalid("longitude is not a number"))?;
            let lat = coords[1].as_f64().ok_or_else(|| invalid("latitude is not a number"))?;
            let point = GeoPoint::new(lon, lat).map_err(|e| GeoError::Invalid(e.to_string()))?;
            let props = item.get("properties").and_then(Value::as_object).ok_or_else(|| invalid("missing properties"))?;
            let mut properties = BTreeMap::new();
            for (k, v) in props {
                let v = v.as_str().ok_or_else(|| GeoError::Invalid(format!("property {k} is not a string")))?;
                properties.insert(k.clone(), v.to_string());
            }
            features.push(PointFeature { point, properties });
        }
        Ok(FeatureDocument { categorize_by, features })
    }

    /// Number of features per value of the category property.
    pub fn category_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for f in &self.features {
            *out.entry(f.properties.get("category").cloned().unwrap_or_default()).or_default() += 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.min_lon..=self.max_lon).contains(&p.longitude()) && (self.min_lat..=self.max_lat).contains(&p.latitude())
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.min_lon <= other.min_lon && self.min_lat <= other.min_lat && self.max_lon >= other.max_lon && self.max_lat >= other.max_lat
    }

    /// Extent in square degrees.
    pub fn area(&self) -> f64 {
        (self.max_lon - self.min_lon) * (self.max_lat - self.min_lat)
    }
}

pub fn bounding_box(document: &FeatureDocument) -> Result<BoundingBox, GeoError> {
    let mut points = document.features.iter().map(|f| f.point);
    let first = points.next().ok_or(GeoError::EmptyDocument)?;
    let init = BoundingBox { min_lon: first.longitude(), min_lat: first.latitude(), max_lon: first.longitude(), max_lat: first.latitude() };
    Ok(points.fold(init, |b, p| BoundingBox {
        min_lon: b.min_lon.min(p.longitude()),
        min_lat: b.min_lat.min(p.latitude()),
        max_lon: b.max_lon.max(p.longitude()),
        max_lat: b.max_lat.max(p.latitude()),
    }))
}

/// Read a decisions document written by the workbench.
pub fn import_decisions(document: &str) -> Result<Vec<VerificationDecision>, DecisionFormatError> {
    parse_decisions(document)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classification::{ChainStep, FwTypology};
    use crate::registry::EntityId;
    use crate::scoping::{InventoryEntry, VerificationStatus};

    const TAXONOMY: &str = include_str!("../data/nace_rev2_excerpt.csv");

    fn inventory(points: &[(f64, f64)]) -> Inventory {
        let mut inv = Inventory::empty("t");
        for (i, (lon, lat)) in points.iter().enumerate() {
            inv.entries.push(InventoryEntry {
                entity_id: EntityId::new("Z", i as u32 + 1),
                name: format!("Company {}", i + 1),
                class_code: "01.11".parse().unwrap(),
                typology: FwTypology::Pfw,
                step: ChainStep::Production,
                point: GeoPoint::new(*lon, *lat).unwrap(),
                status: VerificationStatus::NotRequired,
                municipality: "Z".into(),
            });
        }
        inv
    }

    #[test]
    fn coordinates_are_lon_lat() {
        let tax = Taxonomy::parse(TAXONOMY).unwrap();
        let doc = export_geojson(&inventory(&[(-2.871942, 43.277946)]), &tax, ScopeMode::IncludePending, ReportLevel::Step);
        let text = doc.to_geojson();
        assert!(text.contains("\"coordinates\": [-2.871942,43.277946]"), "{text}");
        assert!(!text.contains("crs"));
        let v: Value = serde_json::from_str(&text).unwrap();
        let props = &v["features"][0]["properties"];
        for key in PROPERTY_KEYS {
            assert!(props.get(key).is_some(), "{key}");
        }
        assert_eq!(props["section"], "A");
        assert_eq!(props["group"], "01.1");
        assert_eq!(props["category"], "PRODUCTION");
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let tax = Taxonomy::parse(TAXONOMY).unwrap();
        let doc = export_geojson(
            &inventory(&[(-2.9, 43.2), (-2.8000004, 43.25), (10.0, -0.5)]),
            &tax,
            ScopeMode::IncludePending,
            ReportLevel::Group,
        );
        let text = doc.to_geojson();
        assert!(text.contains("[-2.900000,43.200000]"));
        assert!(text.contains("[-2.800000,43.250000]"));
        let again = FeatureDocument::parse(&text).unwrap().to_geojson();
        assert_eq!(text, again);
    }

    #[test]
    fn empty_inventory_exports_empty_collection() {
        let tax = Taxonomy::parse(TAXONOMY).unwrap();
        let doc = export_geojson(&Inventory::empty("t"), &tax, ScopeMode::IncludePending, ReportLevel::Step);
        let v: Value = serde_json::from_str(&doc.to_geojson()).unwrap();
        assert_eq!(v["type"], "FeatureCollection");
        assert_eq!(v["features"].as_array().unwrap().len(), 0);
        assert_eq!(bounding_box(&doc), Err(GeoError::EmptyDocument));
    }

    #[test]
    fn bounding_boxes() {
        let tax = Taxonomy::parse(TAXONOMY).unwrap();
        let one = export_geojson(&inventory(&[(-2.871942, 43.277946)]), &tax, ScopeMode::IncludePending, ReportLevel::Step);
        let b = bounding_box(&one).unwrap();
        assert_eq!((b.min_lon, b.min_lat, b.max_lon, b.max_lat), (-2.871942, 43.277946, -2.871942, 43.277946));
        let two = export_geojson(&inventory(&[(-2.9, 43.0), (-2.8, 43.1)]), &tax, ScopeMode::IncludePending, ReportLevel::Step);
        let b = bounding_box(&two).unwrap();
        assert_eq!((b.min_lon, b.max_lon), (-2.9, -2.8));
        assert!(two.features.iter().all(|f| b.contains(&f.point)));
    }

    #[test]
    fn rejects_non_geojson() {
        assert!(FeatureDocument::parse("{}").is_err());
        assert!(FeatureDocument::parse(r#"{"type":"FeatureCollection","features":[{"geometry":{"type":"LineString","coordinates":[]},"properties":{}}]}"#).is_err());
    }

    #[test]
    fn decisions_import() {
        let doc = r#"[{"entity_id":"Z-017","outcome":"excluded","note":"ceased trading","timestamp":"2024-01-05T10:00:00Z"}]"#;
        assert_eq!(import_decisions(doc).unwrap().len(), 1);
        assert!(import_decisions("[]").unwrap().is_empty());
        assert!(import_decisions(r#"[{"entity_id":"Z-017","outcome":"maybe","timestamp":"2024-01-05T10:00:00Z"}]"#).is_err());
    }
}
