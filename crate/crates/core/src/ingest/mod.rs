//! Readers for the external input formats.
//!
//! Each reader makes one pass over its stream. Problems with a single row,
//! feature or element are collected as [`RecordError`]s and the rest of the
//! input is still read; only structural problems abort with [`IngestError`].

mod geojson;
mod osm_xml;
mod poi_csv;
mod projection;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use self::geojson::{read_footprints_geojson, read_records_geojson, FootprintOptions};
pub use self::osm_xml::{read_osm_xml, OsmTally};
pub use self::poi_csv::read_poi_csv;
pub use self::projection::{project, unproject, ProjectionError, ProjectionMode, ProjectionSpec};

use crate::geometry::{BoundingBox, Point, Polygon};
use crate::taxonomy::DataSfClass;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Google,
    Bing,
    YellowPages,
    Osm,
    Other(String),
}

impl Source {
    pub fn as_str(&self) -> &str {
        match self {
            Source::Google => "google",
            Source::Bing => "bing",
            Source::YellowPages => "yellowpages",
            Source::Osm => "osm",
            Source::Other(name) => name,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid source name {0:?}")]
pub struct InvalidSource(pub String);

impl FromStr for Source {
    type Err = InvalidSource;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let name = s.trim().to_ascii_lowercase();
        let valid = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !valid {
            return Err(InvalidSource(s.to_string()));
        }
        Ok(match name.as_str() {
            "google" => Source::Google,
            "bing" => Source::Bing,
            "yellowpages" => Source::YellowPages,
            "osm" => Source::Osm,
            _ => Source::Other(name),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeometryKind {
    Point,
    Polygon,
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeometryKind::Point => "point",
            GeometryKind::Polygon => "polygon",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordGeometry {
    Point(Point),
    Polygon(Polygon),
}

impl RecordGeometry {
    pub fn kind(&self) -> GeometryKind {
        match self {
            RecordGeometry::Point(_) => GeometryKind::Point,
            RecordGeometry::Polygon(_) => GeometryKind::Polygon,
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match self {
            RecordGeometry::Point(p) => BoundingBox::around(*p, 0.0),
            RecordGeometry::Polygon(poly) => poly.bounding_box(),
        }
    }
}

/// One POI or OSM feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRecord {
    pub source: Source,
    pub record_id: String,
    pub geometry: RecordGeometry,
    pub tags: Vec<(String, String)>,
}

/// A parcel polygon, the unit that receives labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcelFootprint {
    pub parcel_id: String,
    pub geometry: Polygon,
    pub authoritative_class: Option<DataSfClass>,
}

/// A row, feature or element that could not be turned into a value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// Where the problem is, e.g. `feature 3`, `line 17`, `way 42`.
    pub at: String,
    pub reason: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.at, self.reason)
    }
}

/// Output of one reader pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub items: Vec<T>,
    pub errors: Vec<RecordError>,
    /// Footprints whose class property held a value outside the known set.
    pub unknown_class: usize,
}

impl<T> Default for Ingested<T> {
    fn default() -> Self {
        Ingested {
            items: Vec::new(),
            errors: Vec::new(),
            unknown_class: 0,
        }
    }
}

impl<T> Ingested<T> {
    fn error(&mut self, at: impl Into<String>, reason: impl Into<String>) {
        self.errors.push(RecordError {
            at: at.into(),
            reason: reason.into(),
        });
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("GeoJSON root must be a FeatureCollection")]
    NotFeatureCollection,
    #[error("missing CSV column {0:?}")]
    MissingColumn(String),
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: u64, message: String },
}
