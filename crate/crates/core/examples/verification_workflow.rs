//! On-site verification of the IV entries and its effect on scope.

use chrono::{TimeZone, Utc};
use flw_scope::scoping::{decisions_to_json, parse_decisions, Outcome};
use flw_scope::{
    build_inventory, ingest_registry_path, ClassificationTable, FwTypology, ReportLevel, ReportQuery, Reporter, ScopeMode,
    Strictness, StubGeocoder, Taxonomy, VerificationDecision,
};

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::from_path(data("nace_rev2_excerpt.csv"))?;
    let (classification, _) = ClassificationTable::from_path(data("flw_classification.csv"), &taxonomy, Strictness::Lenient)?;
    let registry = ingest_registry_path(data("zamudio_registry.csv"), "Zamudio")?;
    let inventory = build_inventory(&registry.records, &classification, &StubGeocoder::from_path(data("zamudio_geocoder.csv"))?);

    let to_visit: Vec<_> = inventory.entries.iter().filter(|e| e.typology == FwTypology::Iv).collect();
    println!("{} entries need a visit:", to_visit.len());
    for e in &to_visit {
        println!("  {} {} ({})", e.entity_id, e.name, e.class_code);
    }

    // Visit outcomes: the first two confirmed, the rest excluded.
    let decisions: Vec<VerificationDecision> = to_visit
        .iter()
        .enumerate()
        .map(|(i, e)| VerificationDecision {
            entity_id: e.entity_id.clone(),
            outcome: if i < 2 { Outcome::Confirmed } else { Outcome::Excluded },
            note: String::new(),
            timestamp: Utc.with_ymd_and_hms(2024, 3, 1, 9, i as u32, 0).unwrap(),
        })
        .collect();
    let document = decisions_to_json(&decisions);
    let verified = inventory.apply_verifications(&parse_decisions(&document)?)?;

    let reporter = Reporter::new(&taxonomy, &classification);
    for (label, inv) in [("before", &inventory), ("after", &verified)] {
        for mode in [ScopeMode::IncludePending, ScopeMode::ConfirmedOnly] {
            let table = reporter.aggregate(inv, &ReportQuery::at(ReportLevel::Step).mode(mode))?;
            println!("{label} visits, {mode:?}: {} generators", table.total);
        }
    }
    println!("{:?}", verified.status_counts());
    Ok(())
}
