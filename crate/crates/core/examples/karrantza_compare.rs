//! Urban versus rural: Zamudio and Karrantza side by side.

use flw_scope::report::{render_comparison, RenderFormat};
use flw_scope::{
    build_inventory, ingest_registry_path, ClassificationTable, Inventory, ReportLevel, Reporter, ScopeMode, Strictness,
    StubGeocoder, Taxonomy,
};

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::from_path(data("nace_rev2_excerpt.csv"))?;
    let (classification, _) = ClassificationTable::from_path(data("flw_classification.csv"), &taxonomy, Strictness::Lenient)?;
    let geocoder = StubGeocoder::from_path(data("zamudio_geocoder.csv"))?;
    let build = |file: &str, name: &str| -> Result<Inventory, Box<dyn std::error::Error>> {
        let registry = ingest_registry_path(data(file), name)?;
        Ok(build_inventory(&registry.records, &classification, &geocoder))
    };
    let zamudio = build("zamudio_registry.csv", "Zamudio")?;
    let karrantza = build("karrantza_registry.csv", "Karrantza")?;

    let reporter = Reporter::new(&taxonomy, &classification);
    for level in [ReportLevel::Step, ReportLevel::Division] {
        let report = reporter.compare(&[&zamudio, &karrantza], level, ScopeMode::IncludePending)?;
        println!("{}", render_comparison(&report, RenderFormat::Markdown));
    }
    Ok(())
}
