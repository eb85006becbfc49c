//! Scoping of potential food-wastage generators.
//!
//! A business registry is joined with a NACE Rev.2 taxonomy and a class
//! typology (PFW, NPFW, IV) to produce a geolocated inventory of potential
//! generators. Inventories are aggregated per food-chain step and NACE level,
//! compared across municipalities and exported as GeoJSON for on-site
//! verification.

pub mod classification;
pub mod cli;
pub mod geo;
pub mod issues;
pub mod nace;
pub mod registry;
pub mod report;
pub mod scoping;
pub mod serve;

pub use classification::{ChainStep, ClassificationTable, FwTypology, Strictness};
pub use geo::{export_geojson, FeatureDocument};
pub use issues::{Issue, IssueKind};
pub use nace::{normalize_code, Level, NaceCode, Taxonomy};
pub use registry::{ingest_registry, ingest_registry_path, EntityId, GeoPoint, Geocoder, RegistryRecord, StubGeocoder};
pub use report::{rank_classes, ReportFilter, ReportLevel, ReportQuery, ReportTable, Reporter};
pub use scoping::{build_inventory, Inventory, InventoryEntry, ScopeMode, VerificationDecision, VerificationStatus};
