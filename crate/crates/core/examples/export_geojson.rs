//! Point layer of the Zamudio inventory, categorized by division.

use flw_scope::geo::bounding_box;
use flw_scope::{
    build_inventory, export_geojson, ingest_registry_path, ClassificationTable, FeatureDocument, ReportLevel, ScopeMode,
    Strictness, StubGeocoder, Taxonomy,
};

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| std::env::temp_dir().join("zamudio.geojson").display().to_string());
    let taxonomy = Taxonomy::from_path(data("nace_rev2_excerpt.csv"))?;
    let (classification, _) = ClassificationTable::from_path(data("flw_classification.csv"), &taxonomy, Strictness::Lenient)?;
    let registry = ingest_registry_path(data("zamudio_registry.csv"), "Zamudio")?;
    let inventory = build_inventory(&registry.records, &classification, &StubGeocoder::from_path(data("zamudio_geocoder.csv"))?);

    let document = export_geojson(&inventory, &taxonomy, ScopeMode::IncludePending, ReportLevel::Division);
    let text = document.to_geojson();
    std::fs::write(&out, &text)?;
    println!("wrote {} features to {out}", document.features.len());

    let reread = FeatureDocument::parse(&text)?;
    assert_eq!(reread.to_geojson(), text);
    let bbox = bounding_box(&reread)?;
    println!("extent lon {:.4}..{:.4} lat {:.4}..{:.4}", bbox.min_lon, bbox.max_lon, bbox.min_lat, bbox.max_lat);
    for (division, n) in reread.category_counts() {
        println!("division {division}: {n}");
    }
    Ok(())
}
