//! Coverage and upper-level consistency of a typology file.
//!
//! Pass a taxonomy and a classification path, or run without arguments to
//! check the bundled Division 01 files.

use flw_scope::nace::Level;
use flw_scope::{ClassificationTable, Taxonomy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let taxonomy_path = args.next().unwrap_or_else(|| format!("{dir}/nace_division01.csv"));
    let classification_path = args.next().unwrap_or_else(|| format!("{dir}/flw_division01.csv"));

    let taxonomy = Taxonomy::from_path(&taxonomy_path)?;
    let check = ClassificationTable::check(&std::fs::read_to_string(&classification_path)?, &taxonomy);
    println!("version {}: {} of {} classes classified", check.table.version(), check.table.len(), taxonomy.classes().count());
    for gap in &check.gaps {
        println!("unclassified {gap} {}", taxonomy.name(gap).unwrap_or(""));
    }
    for error in &check.errors {
        println!("invalid row: {error}");
    }
    for level in [Level::Division, Level::Group] {
        for node in check.table.upper_level_consistency_report(&taxonomy, level) {
            println!("{} {node} ({})", level.name(), taxonomy.name(&node.code).unwrap_or(""));
        }
    }
    Ok(())
}
