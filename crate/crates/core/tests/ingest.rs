mod common;

use common::{data, Fixture};
use flw_scope::registry::ingest_registry_path;
use flw_scope::{build_inventory, IssueKind};

#[test]
fn sample_companies_with_extra_columns_and_decimal_commas() {
    let fx = Fixture::load();
    let ingested = ingest_registry_path(data("sample_companies_registry.csv"), "Sample").unwrap();
    assert_eq!(ingested.total_rows, 7);
    assert_eq!(ingested.records.len(), 7);
    assert!(ingested.issues.is_empty(), "{:?}", ingested.issues);
    let first = &ingested.records[0];
    assert_eq!(first.entity_id.to_string(), "Sample-001");
    let point = first.point.unwrap();
    assert_eq!((point.longitude(), point.latitude()), (-2.871942, 43.277946));

    let inventory = build_inventory(&ingested.records, &fx.classification, &fx.geocoder);
    assert_eq!(inventory.accounted_records(), 7);
    let unknown: Vec<_> = inventory.issues.iter().filter(|i| i.kind == IssueKind::UnknownClass).collect();
    assert_eq!(unknown.len(), 1);
    assert_eq!(unknown[0].code.as_deref(), Some("10.84"));
}

#[test]
fn zamudio_fixture_accounts_for_every_row() {
    let fx = Fixture::load();
    let ingested = ingest_registry_path(data("zamudio_registry.csv"), "Zamudio").unwrap();
    assert_eq!(ingested.total_rows, 85);
    let missing: Vec<usize> = ingested.records.iter().filter(|r| r.point.is_none()).map(|r| r.row).collect();
    assert_eq!(missing, [20, 61, 75]);
    let inventory = build_inventory(&ingested.records, &fx.classification, &fx.geocoder);
    assert_eq!((inventory.entries.len(), inventory.excluded_npfw, inventory.issues.len()), (82, 3, 0));

    let without_stub = build_inventory(&ingested.records, &fx.classification, &flw_scope::StubGeocoder::new());
    assert_eq!(without_stub.entries.len(), 79);
    assert!(without_stub.issues.iter().all(|i| i.kind == IssueKind::GeocodeFailed));
}
