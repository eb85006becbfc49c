//! Serve the Zamudio inventory for the workbench on 127.0.0.1.
//!
//! Usage: `serve_dataset [PORT] [DECISIONS.json]`. Decisions posted to
//! `/api/decisions` are written to the given file and replayed on restart.

use flw_scope::cli::RunConfig;
use flw_scope::serve::{run_blocking, ServeState};
use flw_scope::{ReportLevel, ScopeMode, Strictness};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let port: u16 = args.next().map(|p| p.parse()).transpose()?.unwrap_or(8750);
    let decisions = args.next().unwrap_or_else(|| std::env::temp_dir().join("zamudio_decisions.json").display().to_string());
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let config = RunConfig {
        taxonomy_path: dir.join("nace_rev2_excerpt.csv"),
        classification_path: Some(dir.join("flw_classification.csv")),
        classification_overrides: Default::default(),
        registries: vec![("Zamudio".into(), dir.join("zamudio_registry.csv"))],
        geocoder_stub_path: Some(dir.join("zamudio_geocoder.csv")),
        decisions_path: Some(decisions.clone().into()),
        mode: ScopeMode::IncludePending,
        strictness: Strictness::Lenient,
        outputs: Vec::new(),
    };
    config.check()?;
    let state = ServeState::from_config(&config, ReportLevel::Step, None)?;
    println!("{} entities on http://127.0.0.1:{port}/api/dataset, decisions in {decisions}", state.entity_count());
    run_blocking(state, port)?;
    Ok(())
}
