//! Land-use labeling of parcels from point-of-interest and OpenStreetMap
//! sources, with cross-source agreement and evaluation against an
//! authoritative classification.

pub mod assign;
pub mod config;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod spatial_index;
pub mod synthgen;
pub mod taxonomy;

pub use assign::{build_label_table, AssignError, LabelTable, ValidityStats, DEFAULT_RADIUS_M};
pub use geometry::{BoundingBox, GeometryError, Point, Polygon, Ring};
pub use ingest::{
    GeometryKind, IngestError, Ingested, ParcelFootprint, ProjectionSpec, RecordGeometry, Source,
    SourceRecord,
};
pub use metrics::{AgreementCell, EvaluationRow, Ratio};
pub use pipeline::{PipelineError, Run, SourceRun, Tables};
pub use spatial_index::FootprintIndex;
pub use synthgen::{generate, oracle_assign, SynthParams};
pub use taxonomy::{
    AuthoritativeCrosswalk, CrosswalkTable, DataSfClass, LbcsCode, LbcsTaxonomy, TaxonomyError,
};
