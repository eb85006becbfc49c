//! Code normalization and hierarchy navigation.

use flw_scope::nace::Level;
use flw_scope::{normalize_code, Taxonomy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = Taxonomy::from_path(concat!(env!("CARGO_MANIFEST_DIR"), "/data/nace_division01.csv"))?;
    for raw in ["01,11", "1.5", " 01.4 ", "a", "01.111"] {
        match normalize_code(raw) {
            Ok(code) => println!("{raw:?} -> {code} ({})", code.level().name()),
            Err(e) => println!("{raw:?} rejected: {e}"),
        }
    }
    let class = normalize_code("01,47")?;
    let chain: Vec<String> = taxonomy.ancestors(&class)?.iter().map(ToString::to_string).collect();
    println!("{class} {} sits under {}", taxonomy.name(&class).unwrap_or(""), chain.join(" < "));
    let group = normalize_code("01.1")?;
    for c in taxonomy.descendants_at(&group, Level::Class)? {
        println!("  {c} {}", taxonomy.name(&c).unwrap_or(""));
    }
    Ok(())
}
