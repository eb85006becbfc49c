//! Zamudio inventory per chain step, then a drill-down into Consumption.

use flw_scope::report::{render_table, share_of, RenderFormat, Selector};
use flw_scope::{
    build_inventory, ingest_registry_path, ChainStep, ClassificationTable, NaceCode, ReportFilter, ReportLevel, ReportQuery,
    Reporter, Strictness, StubGeocoder, Taxonomy,
};

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::from_path(data("nace_rev2_excerpt.csv"))?;
    let (classification, _gaps) =
        ClassificationTable::from_path(data("flw_classification.csv"), &taxonomy, Strictness::Lenient)?;
    let registry = ingest_registry_path(data("zamudio_registry.csv"), "Zamudio")?;
    let geocoder = StubGeocoder::from_path(data("zamudio_geocoder.csv"))?;
    let inventory = build_inventory(&registry.records, &classification, &geocoder);
    println!("{} registry rows, {} potential generators, {} NPFW rows dropped", registry.total_rows, inventory.entries.len(), inventory.excluded_npfw);

    let reporter = Reporter::new(&taxonomy, &classification);
    let steps = reporter.aggregate(&inventory, &ReportQuery::at(ReportLevel::Step))?;
    print!("{}", render_table(&steps, RenderFormat::Markdown));

    let consumption = reporter.aggregate(
        &inventory,
        &ReportQuery::at(ReportLevel::Section).filter(ReportFilter::Step(ChainStep::Consumption)),
    )?;
    print!("\n{}", render_table(&consumption, RenderFormat::Csv));
    let section_i: NaceCode = "I".parse()?;
    let share = share_of(&consumption, &Selector::step(ChainStep::Consumption).within(section_i), &Selector::step(ChainStep::Consumption))?;
    println!("\naccommodation and food service share of consumption: {}", share.percent());

    let wholesale = reporter.aggregate(&inventory, &ReportQuery::at(ReportLevel::Class).filter(ReportFilter::Code("46".parse()?)))?;
    print!("\n{}", render_table(&wholesale, RenderFormat::Csv));
    Ok(())
}
