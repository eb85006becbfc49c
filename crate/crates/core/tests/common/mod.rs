//! Fixture loading, random registries and naive oracles shared by the
//! integration tests and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use flw_scope::report::ReportTable;
use flw_scope::{
    build_inventory, ingest_registry, ClassificationTable, Inventory, ReportLevel, ReportQuery, Reporter, ScopeMode,
    Strictness, StubGeocoder, Taxonomy,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(data(name)).expect("fixture")
}

pub struct Fixture {
    pub taxonomy: Taxonomy,
    pub classification: ClassificationTable,
    pub geocoder: StubGeocoder,
}

impl Fixture {
    pub fn load() -> Self {
        let taxonomy = Taxonomy::parse(&read("nace_rev2_excerpt.csv")).unwrap();
        let (classification, _) =
            ClassificationTable::load(&read("flw_classification.csv"), &taxonomy, Strictness::Lenient).unwrap();
        let geocoder = StubGeocoder::parse(&read("zamudio_geocoder.csv")).unwrap();
        Fixture { taxonomy, classification, geocoder }
    }

    pub fn reporter(&self) -> Reporter<'_> {
        Reporter::new(&self.taxonomy, &self.classification)
    }

    pub fn inventory(&self, registry_csv: &str, municipality: &str) -> Inventory {
        let ingested = ingest_registry(registry_csv.as_bytes(), municipality).unwrap();
        build_inventory(&ingested.records, &self.classification, &self.geocoder)
    }

    pub fn fixture_inventory(&self, file: &str, municipality: &str) -> Inventory {
        self.inventory(&read(file), municipality)
    }
}

/// Raw classification rows: class text to (typology, step), read by splitting lines.
pub fn naive_classification() -> BTreeMap<String, (String, String)> {
    read("flw_classification.csv")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with("class_code"))
        .map(|l| {
            let f: Vec<&str> = l.split(';').map(str::trim).collect();
            (f[0].to_string(), (f[1].to_string(), f.get(2).copied().unwrap_or("").to_string()))
        })
        .collect()
}

/// Division text to section letter, from taxonomy row order.
pub fn naive_sections() -> BTreeMap<String, String> {
    let mut current = String::new();
    let mut out = BTreeMap::new();
    for line in read("nace_rev2_excerpt.csv").lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let code = line.split(';').next().unwrap().trim();
        if code.len() == 1 && code.chars().all(|c| c.is_ascii_uppercase()) {
            current = code.to_string();
        } else if code.len() == 2 {
            out.insert(code.to_string(), current.clone());
        }
    }
    out
}

pub fn all_classes() -> Vec<String> {
    let tax = read("nace_rev2_excerpt.csv");
    tax.lines()
        .filter_map(|l| l.split(';').next())
        .map(str::trim)
        .filter(|c| c.len() == 5 && c.as_bytes()[2] == b'.')
        .map(str::to_string)
        .collect()
}

/// A registry row as generated: name, raw class text, coordinates.
#[derive(Debug, Clone)]
pub struct RawRow {
    pub name: String,
    pub class: String,
    pub lat: String,
    pub lon: String,
}

/// Random registry rows. Classes come from the taxonomy (so NPFW and the
/// unclassified class show up), with a few malformed codes and
/// coordinates mixed in.
pub fn random_rows<R: Rng>(rng: &mut R, n: usize) -> Vec<RawRow> {
    let classes = all_classes();
    (0..n)
        .map(|i| {
            let class = match rng.gen_range(0..40) {
                0 => "9x.1".to_string(),
                1 => classes.choose(rng).unwrap().replace('.', ","),
                _ => classes.choose(rng).unwrap().clone(),
            };
            let lat = if rng.gen_range(0..50) == 0 { String::new() } else { format!("{:.6}", rng.gen_range(43.0..43.5)) };
            let lon = format!("{:.6}", rng.gen_range(-3.5..-2.5));
            RawRow { name: format!("Firm {i} {}", rng.gen_range(0..5)), class, lat, lon }
        })
        .collect()
}

pub fn rows_to_csv(rows: &[RawRow]) -> String {
    let mut out = String::from("name,nace_class,latitude,longitude\n");
    for r in rows {
        out.push_str(&format!("{},\"{}\",{},{}\n", r.name, r.class, r.lat, r.lon));
    }
    out
}

/// Rows a naive filter keeps: valid class code, classified PFW or IV, located.
pub fn naive_in_scope(rows: &[RawRow]) -> Vec<(String, String, String)> {
    let table = naive_classification();
    rows.iter()
        .filter(|r| !r.lat.is_empty())
        .filter_map(|r| {
            let class = r.class.replace(',', ".");
            let (typ, step) = table.get(&class)?;
            (typ != "NPFW").then(|| (r.name.clone(), class, step.clone()))
        })
        .collect()
}

/// Group-by over naive rows with code paths built by string slicing.
pub fn oracle_counts(rows: &[(String, String, String)], level: ReportLevel) -> BTreeMap<(String, Vec<String>), u64> {
    let sections = naive_sections();
    let mut out = BTreeMap::new();
    for (_, class, step) in rows {
        let full = [sections[&class[..2]].clone(), class[..2].to_string(), class[..4].to_string(), class.clone()];
        let depth = match level {
            ReportLevel::Step => 0,
            ReportLevel::Section => 1,
            ReportLevel::Division => 2,
            ReportLevel::Group => 3,
            ReportLevel::Class => 4,
        };
        *out.entry((step.clone(), full[..depth].to_vec())).or_insert(0) += 1;
    }
    out
}

pub fn table_counts(table: &ReportTable) -> BTreeMap<(String, Vec<String>), u64> {
    table
        .rows
        .iter()
        .map(|r| ((r.step.code().to_string(), r.path.iter().map(|c| c.to_string()).collect()), r.count))
        .collect()
}

/// Every roll-up and scoping invariant for one generated registry.
pub fn check_generated(fx: &Fixture, rows: &[RawRow]) -> Result<(), String> {
    let csv = rows_to_csv(rows);
    let ingested = ingest_registry(csv.as_bytes(), "R").map_err(|e| e.to_string())?;
    if ingested.records.len() + ingested.rejected_rows() != rows.len() {
        return Err(format!("ingest lost rows: {} + {} != {}", ingested.records.len(), ingested.rejected_rows(), rows.len()));
    }
    let inventory = build_inventory(&ingested.records, &fx.classification, &fx.geocoder);
    if inventory.accounted_records() != ingested.records.len() {
        return Err("build_inventory did not account for every record".into());
    }
    if inventory.entries.iter().any(|e| !e.typology.in_scope()) {
        return Err("NPFW entry in inventory".into());
    }
    let expected = naive_in_scope(rows);
    let got: BTreeSet<(String, String)> = inventory.entries.iter().map(|e| (e.name.clone(), e.class_code.to_string())).collect();
    let want: BTreeSet<(String, String)> = expected.iter().map(|(n, c, _)| (n.clone(), c.clone())).collect();
    if inventory.entries.len() != expected.len() || got != want {
        return Err(format!("inventory has {} entries, naive filter {}", inventory.entries.len(), expected.len()));
    }
    let reporter = fx.reporter();
    for level in ReportLevel::ALL {
        let table = reporter.aggregate(&inventory, &ReportQuery::at(level)).map_err(|e| e.to_string())?;
        if table.total != expected.len() as u64 {
            return Err(format!("{level}: total {} != {}", table.total, expected.len()));
        }
        let oracle = oracle_counts(&expected, level);
        if table_counts(&table) != oracle {
            return Err(format!("{level}: counts differ from group-by oracle"));
        }
        for mode in [ScopeMode::IncludePending, ScopeMode::ConfirmedOnly] {
            let t = reporter.aggregate(&inventory, &ReportQuery::at(level).mode(mode)).map_err(|e| e.to_string())?;
            let sum: u64 = t.rows.iter().map(|r| r.count).sum();
            if sum != t.total || t.total != inventory.effective_entries(mode).len() as u64 {
                return Err(format!("{level} {mode:?}: rows do not sum to the effective entry count"));
            }
        }
    }
    Ok(())
}
