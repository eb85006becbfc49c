//! Trading-income-tax registry ingest and point resolution.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::issues::{Issue, IssueKind};
use crate::nace::{normalize_code, Level, NaceCode};

/// A WGS-84 position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    longitude: f64,
    latitude: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoordinateError {
    #[error("coordinate {0:?} is not a number")]
    NotANumber(String),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
}

impl GeoPoint {
    pub fn new(longitude: f64, latitude: f64) -> Result<Self, CoordinateError> {
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(CoordinateError::LongitudeOutOfRange(longitude));
        }
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(CoordinateError::LatitudeOutOfRange(latitude));
        }
        Ok(GeoPoint { longitude, latitude })
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }
}

/// Parse one coordinate cell. A single comma with no dot is a decimal separator.
pub fn parse_coordinate(raw: &str) -> Result<f64, CoordinateError> {
    let mut s = raw.trim().replace('\u{2212}', "-");
    if !s.contains('.') && s.matches(',').count() == 1 {
        s = s.replace(',', ".");
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CoordinateError::NotANumber(raw.trim().to_string())),
    }
}

/// Stable per-municipality identifier, rendered `MUNICIPALITY-NNN`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    municipality: String,
    seq: u32,
}

impl EntityId {
    pub fn new(municipality: impl Into<String>, seq: u32) -> Self {
        EntityId { municipality: municipality.into(), seq }
    }

    pub fn municipality(&self) -> &str {
        &self.municipality
    }

    pub fn seq(&self) -> u32 {
        self.seq
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{:03}", self.municipality, self.seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed entity id {0:?}")]
pub struct EntityIdError(pub String);

impl FromStr for EntityId {
    type Err = EntityIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || EntityIdError(s.to_string());
        let (m, n) = s.rsplit_once('-').ok_or_else(err)?;
        if m.is_empty() || n.is_empty() || !n.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        Ok(EntityId { municipality: m.to_string(), seq: n.parse().map_err(|_| err())? })
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryRecord {
    pub entity_id: EntityId,
    pub name: String,
    pub class_code: NaceCode,
    pub point: Option<GeoPoint>,
    pub address: Option<String>,
    pub municipality: String,
    /// 1-based data row in the source document.
    pub row: usize,
}

/// Resolves a postal address to a point. Implementations must be safe to
/// call concurrently.
pub trait Geocoder: Send + Sync {
    fn geocode(&self, address: &str, municipality: &str) -> Option<GeoPoint>;
}

/// Offline geocoder keyed by exact address string.
#[derive(Debug, Clone, Default)]
pub struct StubGeocoder {
    points: HashMap<String, GeoPoint>,
}

#[derive(Debug, thiserror::Error)]
pub enum GeocoderStubError {
    #[error("cannot read geocoder stub {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("geocoder stub line {line}: {detail}")]
    Malformed { line: usize, detail: String },
}

impl StubGeocoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, address: impl Into<String>, point: GeoPoint) {
        self.points.insert(address.into(), point);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GeocoderStubError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| GeocoderStubError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Parse `address;longitude;latitude` rows, header optional.
    pub fn parse(text: &str) -> Result<Self, GeocoderStubError> {
        let mut stub = StubGeocoder::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.rsplitn(3, ';').collect();
            let [lat, lon, address] = fields[..] else {
                return Err(GeocoderStubError::Malformed { line: line_no, detail: "expected address;longitude;latitude".into() });
            };
            if stub.is_empty() && address.trim().eq_ignore_ascii_case("address") {
                continue;
            }
            let point = parse_coordinate(lon)
                .and_then(|lon| parse_coordinate(lat).and_then(|lat| GeoPoint::new(lon, lat)))
                .map_err(|e| GeocoderStubError::Malformed { line: line_no, detail: e.to_string() })?;
            stub.insert(address.trim(), point);
        }
        Ok(stub)
    }
}

impl Geocoder for StubGeocoder {
    fn geocode(&self, address: &str, _municipality: &str) -> Option<GeoPoint> {
        self.points.get(address).copied()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("registry is missing required column {0:?}")]
    MissingRequiredColumn(&'static str),
    #[error("unreadable registry: {0}")]
    UnreadableDocument(String),
}

#[derive(Debug, Clone, Default)]
pub struct IngestedRegistry {
    pub records: Vec<RegistryRecord>,
    pub issues: Vec<Issue>,
    pub total_rows: usize,
}

impl IngestedRegistry {
    pub fn rejected_rows(&self) -> usize {
        self.issues.iter().filter(|i| i.kind.rejects_row()).count()
    }
}

pub fn ingest_registry_path(path: impl AsRef<Path>, municipality: &str) -> Result<IngestedRegistry, RegistryError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| RegistryError::UnreadableDocument(format!("{}: {e}", path.display())))?;
    ingest_registry(file, municipality)
}

/// Read a comma-delimited registry with a header row. Every data row either
/// becomes a record (ids assigned in row order) or produces exactly one
/// rejecting issue.
pub fn ingest_registry<R: Read>(source: R, municipality: &str) -> Result<IngestedRegistry, RegistryError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| RegistryError::UnreadableDocument(e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let name_col = column("name").ok_or(RegistryError::MissingRequiredColumn("name"))?;
    let class_col = column("nace_class").ok_or(RegistryError::MissingRequiredColumn("nace_class"))?;
    let lat_col = column("latitude");
    let lon_col = column("longitude");
    let addr_col = column("address");

    let mut out = IngestedRegistry::default();
    let mut seen: HashSet<(String, NaceCode)> = HashSet::new();

    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 1;
        let row = row.map_err(|e| RegistryError::UnreadableDocument(e.to_string()))?;
        out.total_rows += 1;
        let cell = |col: Option<usize>| col.and_then(|c| row.get(c)).map(str::trim).filter(|s| !s.is_empty());
        let reject = |kind: IssueKind, detail: String| Issue::new(kind, detail).at_row(municipality, row_no);

        let name = cell(Some(name_col)).unwrap_or("").to_string();
        let raw_code = cell(Some(class_col)).unwrap_or("");
        let class_code = match normalize_code(raw_code) {
            Ok(c) if c.level() == Level::Class => c,
            Ok(c) => {
                out.issues.push(
                    reject(IssueKind::NotClassLevel, format!("{c} is a {}, expected a class", c.level()))
                        .with_code(raw_code),
                );
                continue;
            }
            Err(e) => {
                out.issues.push(reject(IssueKind::MalformedCode, e.to_string()).with_code(raw_code));
                continue;
            }
        };

        let point = match (cell(lat_col), cell(lon_col)) {
            (None, None) => None,
            (Some(lat), Some(lon)) => {
                let parsed = parse_coordinate(lat).and_then(|lat| parse_coordinate(lon).map(|lon| (lon, lat)));
                match parsed {
                    Ok((lon, lat)) => match GeoPoint::new(lon, lat) {
                        Ok(p) => Some(p),
                        Err(e) => {
                            out.issues.push(reject(IssueKind::CoordinateOutOfRange, e.to_string()));
                            continue;
                        }
                    },
                    Err(e) => {
                        out.issues.push(reject(IssueKind::MalformedCoordinate, e.to_string()));
                        continue;
                    }
                }
            }
            _ => {
                out.issues
                    .push(reject(IssueKind::MalformedCoordinate, "only one of latitude/longitude present".into()));
                continue;
            }
        };
        let address = cell(addr_col).map(str::to_string);
        if point.is_none() && address.is_none() {
            out.issues.push(reject(IssueKind::MissingLocation, "no coordinates and no address".into()));
            continue;
        }

        let entity_id = EntityId::new(municipality, out.records.len() as u32 + 1);
        if !seen.insert((name.clone(), class_code.clone())) {
            out.issues.push(
                Issue::new(IssueKind::DuplicateSuspect, format!("another row already lists {name:?} under {class_code}"))
                    .at_row(municipality, row_no)
                    .for_entity(&entity_id)
                    .with_code(class_code.as_str()),
            );
        }
        out.records.push(RegistryRecord {
            entity_id,
            name,
            class_code,
            point,
            address,
            municipality: municipality.to_string(),
            row: row_no,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no point for {entity_id}: no coordinates and the geocoder found nothing")]
pub struct GeocodeFailed {
    pub entity_id: EntityId,
}

/// Coordinates win; the geocoder is consulted only for address-only records.
pub fn geolocate(record: &RegistryRecord, geocoder: &dyn Geocoder) -> Result<GeoPoint, GeocodeFailed> {
    if let Some(p) = record.point {
        return Ok(p);
    }
    record
        .address
        .as_deref()
        .and_then(|a| geocoder.geocode(a, &record.municipality))
        .ok_or_else(|| GeocodeFailed { entity_id: record.entity_id.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn ingest(doc: &str) -> IngestedRegistry {
        ingest_registry(doc.as_bytes(), "Z").unwrap()
    }

    #[test]
    fn decimal_comma_coordinates() {
        let got = ingest("name,nace_class,latitude,longitude\nCompany 1,01.11,\"43,277946\",\"-2,871942\"\n");
        assert!(got.issues.is_empty());
        let p = got.records[0].point.unwrap();
        assert_eq!(p.longitude(), -2.871942);
        assert_eq!(p.latitude(), 43.277946);
        assert_eq!(parse_coordinate("43,277946"), parse_coordinate("43.277946"));
        assert!(parse_coordinate("1,234.5").is_err());
    }

    #[test]
    fn row_level_issues() {
        let doc = "name,nace_class,latitude,longitude,address\n\
                   Company X,01.11,,,\n\
                   Company Y,01.11,95.0,-2.0,\n\
                   Company W,1.111,43.0,-2.0,\n\
                   Company V,01.1,43.0,-2.0,\n\
                   Company U,01.11,north,-2.0,\n\
                   Company T,01.11,43.0,,\n\
                   Company S,01.11,,,Main street 1\n";
        let got = ingest(doc);
        let kinds: Vec<_> = got.issues.iter().map(|i| (i.kind, i.row.unwrap())).collect();
        assert_eq!(
            kinds,
            [
                (IssueKind::MissingLocation, 1),
                (IssueKind::CoordinateOutOfRange, 2),
                (IssueKind::MalformedCode, 3),
                (IssueKind::NotClassLevel, 4),
                (IssueKind::MalformedCoordinate, 5),
                (IssueKind::MalformedCoordinate, 6),
            ]
        );
        assert_eq!(got.records.len(), 1);
        assert_eq!(got.records[0].entity_id.to_string(), "Z-001");
        assert_eq!(got.records[0].row, 7);
        assert_eq!(got.records.len() + got.rejected_rows(), got.total_rows);
    }

    #[test]
    fn missing_required_column() {
        let err = ingest_registry("name,latitude\nA,1\n".as_bytes(), "Z").unwrap_err();
        assert!(matches!(err, RegistryError::MissingRequiredColumn("nace_class")));
    }

    #[test]
    fn extra_columns_ignored_and_duplicates_flagged() {
        let got = ingest("FID,Shape,name,nace_class,latitude,longitude,note\n1,Point,A,01.11,43,-2,x\n");
        assert_eq!(got.records.len(), 1);
        assert!(got.issues.is_empty());

        let got = ingest("name,nace_class,latitude,longitude\nA,01.11,43,-2\nA,01.11,43.1,-2.1\n");
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.issues.len(), 1);
        assert_eq!(got.issues[0].kind, IssueKind::DuplicateSuspect);
        assert_eq!(got.issues[0].entity_id.as_deref(), Some("Z-002"));
    }

    #[test]
    fn entity_id_round_trip() {
        let id: EntityId = "Z-017".parse().unwrap();
        assert_eq!(id, EntityId::new("Z", 17));
        assert_eq!(EntityId::new("Gran-Canaria", 1234).to_string(), "Gran-Canaria-1234");
        assert_eq!("Gran-Canaria-1234".parse::<EntityId>().unwrap().municipality(), "Gran-Canaria");
        assert!("Z017".parse::<EntityId>().is_err());
        assert!("Z-".parse::<EntityId>().is_err());
    }

    struct CountingGeocoder(AtomicUsize);

    impl Geocoder for CountingGeocoder {
        fn geocode(&self, _: &str, _: &str) -> Option<GeoPoint> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Some(GeoPoint::new(0.0, 0.0).unwrap())
        }
    }

    #[test]
    fn geolocate_prefers_coordinates() {
        let rec = ingest("name,nace_class,latitude,longitude,address\nA,01.11,43.277946,-2.871942,Somewhere\n")
            .records
            .remove(0);
        let counter = CountingGeocoder(AtomicUsize::new(0));
        let p = geolocate(&rec, &counter).unwrap();
        assert_eq!((p.longitude(), p.latitude()), (-2.871942, 43.277946));
        assert_eq!(counter.0.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn geolocate_falls_back_to_stub() {
        let rec = ingest("name,nace_class,address\nA,01.11,Kalea 1\n").records.remove(0);
        let stub = StubGeocoder::parse("address;longitude;latitude\nKalea 1;-2,86;43,28\n").unwrap();
        let p = geolocate(&rec, &stub).unwrap();
        assert_eq!((p.longitude(), p.latitude()), (-2.86, 43.28));
        assert_eq!(geolocate(&rec, &stub), geolocate(&rec, &stub));
        assert_eq!(
            geolocate(&rec, &StubGeocoder::new()),
            Err(GeocodeFailed { entity_id: EntityId::new("Z", 1) })
        );
    }

    #[test]
    fn stub_rejects_bad_rows() {
        assert!(StubGeocoder::parse("Kalea 1;-2.86\n").is_err());
        assert!(StubGeocoder::parse("Kalea 1;-200;43\n").is_err());
        let stub = StubGeocoder::parse("a;b;c street;1.5;2.5\n").unwrap();
        assert!(stub.geocode("a;b;c street", "").is_some());
    }
}
