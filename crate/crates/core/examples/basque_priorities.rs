//! Which production classes dominate the regional registry.

use flw_scope::{build_inventory, ingest_registry_path, rank_classes, ChainStep, ClassificationTable, Strictness, StubGeocoder, Taxonomy};

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::from_path(data("nace_rev2_excerpt.csv"))?;
    let (classification, _) = ClassificationTable::from_path(data("flw_classification.csv"), &taxonomy, Strictness::Lenient)?;
    let registry = ingest_registry_path(data("basque_production_registry.csv"), "Euskadi")?;
    let inventory = build_inventory(&registry.records, &classification, &StubGeocoder::new());
    println!("{} production-step generators", inventory.entries.len());
    for (rank, (code, count)) in rank_classes(&inventory, ChainStep::Production, 5).into_iter().enumerate() {
        println!("{}. {code} {:<55} {count}", rank + 1, taxonomy.name(&code).unwrap_or("?"));
    }
    Ok(())
}
