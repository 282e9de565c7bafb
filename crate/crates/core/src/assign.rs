//! Spatial assignment of aligned records to parcel footprints.
//!
//! Points go to the footprint containing them, otherwise to the nearest
//! footprint within the radius. Polygons go to every footprint whose
//! interior they overlap. Labels keep the code's own level; roll-up is a
//! metrics concern.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Point, Polygon};
use crate::ingest::{GeometryKind, ParcelFootprint, RecordGeometry, Source, SourceRecord};
use crate::spatial_index::FootprintIndex;
use crate::taxonomy::{CrosswalkTable, LbcsCode, LbcsTaxonomy};

pub const DEFAULT_RADIUS_M: f64 = 10.0;

/// Distances closer than this are treated as equal when picking the nearest
/// footprint.
pub const DISTANCE_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AssignError {
    #[error("record {record_id} has {found} geometry, expected {expected}")]
    WrongGeometry {
        record_id: String,
        expected: GeometryKind,
        found: GeometryKind,
    },
    #[error("records from {first} and {other} passed to one label table")]
    MixedSources { first: Source, other: Source },
    #[error("radius must be a non-negative number, got {0}")]
    InvalidRadius(f64),
    #[error("index and footprint list disagree ({index} vs {footprints} entries)")]
    IndexMismatch { index: usize, footprints: usize },
    #[error("code {0} is not in the taxonomy")]
    UnknownCode(LbcsCode),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ValidityStats {
    pub total_records: usize,
    pub aligned_records: usize,
    pub valid_records: usize,
    pub discarded_unaligned: usize,
    pub discarded_spatial: usize,
}

impl ValidityStats {
    pub fn is_consistent(&self) -> bool {
        self.total_records == self.aligned_records + self.discarded_unaligned
            && self.aligned_records == self.valid_records + self.discarded_spatial
    }

    /// `(name, value)` pairs in export order.
    pub fn counters(&self) -> [(&'static str, usize); 5] {
        [
            ("total_records", self.total_records),
            ("aligned_records", self.aligned_records),
            ("valid_records", self.valid_records),
            ("discarded_unaligned", self.discarded_unaligned),
            ("discarded_spatial", self.discarded_spatial),
        ]
    }
}

/// Per-source labels: parcel id to LBCS codes, with the records behind
/// each `(parcel, code)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    pub source: Source,
    pub labels: BTreeMap<String, BTreeSet<LbcsCode>>,
    pub provenance: BTreeMap<(String, LbcsCode), BTreeSet<String>>,
    pub stats: ValidityStats,
}

impl LabelTable {
    pub fn new(source: Source) -> Self {
        LabelTable {
            source,
            labels: BTreeMap::new(),
            provenance: BTreeMap::new(),
            stats: ValidityStats::default(),
        }
    }

    pub fn add(&mut self, parcel_id: &str, code: LbcsCode, record_id: &str) {
        self.labels
            .entry(parcel_id.to_string())
            .or_default()
            .insert(code);
        self.provenance
            .entry((parcel_id.to_string(), code))
            .or_default()
            .insert(record_id.to_string());
    }

    /// Labels of a source given directly, without provenance.
    pub fn from_labels(
        source: Source,
        labels: impl IntoIterator<Item = (String, LbcsCode)>,
    ) -> Self {
        let mut table = LabelTable::new(source);
        for (parcel, code) in labels {
            table.labels.entry(parcel).or_default().insert(code);
        }
        table
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Total order used whenever several footprints qualify equally: smaller
/// bounding-box area first, then the lexicographically smaller id.
pub fn tie_break(a: &ParcelFootprint, b: &ParcelFootprint) -> Ordering {
    let area_a = a.geometry.bounding_box().area();
    let area_b = b.geometry.bounding_box().area();
    area_a
        .total_cmp(&area_b)
        .then_with(|| a.parcel_id.cmp(&b.parcel_id))
}

fn check_index(idx: &FootprintIndex, footprints: &[ParcelFootprint]) -> Result<(), AssignError> {
    if idx.len() != footprints.len() {
        return Err(AssignError::IndexMismatch {
            index: idx.len(),
            footprints: footprints.len(),
        });
    }
    Ok(())
}

fn pick_best(
    footprints: &[ParcelFootprint],
    positions: impl Iterator<Item = usize>,
) -> Option<usize> {
    positions.min_by(|&a, &b| tie_break(&footprints[a], &footprints[b]))
}

fn point_target(
    p: Point,
    idx: &FootprintIndex,
    footprints: &[ParcelFootprint],
    radius: f64,
) -> Option<usize> {
    let candidates = idx.point_candidates(p, radius);
    let containing = candidates
        .iter()
        .copied()
        .filter(|&i| footprints[i].geometry.contains(p));
    if let Some(best) = pick_best(footprints, containing) {
        return Some(best);
    }
    let distances: Vec<(usize, f64)> = candidates
        .iter()
        .map(|&i| (i, footprints[i].geometry.distance(p)))
        .filter(|&(_, d)| d <= radius)
        .collect();
    let nearest = distances
        .iter()
        .map(|&(_, d)| d)
        .fold(f64::INFINITY, f64::min);
    let tied = distances
        .iter()
        .filter(|&&(_, d)| d <= nearest + DISTANCE_TIE_TOLERANCE)
        .map(|&(i, _)| i);
    pick_best(footprints, tied)
}

/// Footprint a point record is assigned to, if any.
pub fn assign_point<'a>(
    record: &SourceRecord,
    idx: &FootprintIndex,
    footprints: &'a [ParcelFootprint],
    radius: f64,
) -> Result<Option<&'a str>, AssignError> {
    check_index(idx, footprints)?;
    if radius.is_nan() || radius < 0.0 {
        return Err(AssignError::InvalidRadius(radius));
    }
    match &record.geometry {
        RecordGeometry::Point(p) => {
            Ok(point_target(*p, idx, footprints, radius).map(|i| footprints[i].parcel_id.as_str()))
        }
        RecordGeometry::Polygon(_) => Err(AssignError::WrongGeometry {
            record_id: record.record_id.clone(),
            expected: GeometryKind::Point,
            found: GeometryKind::Polygon,
        }),
    }
}

fn polygon_targets(
    poly: &Polygon,
    idx: &FootprintIndex,
    footprints: &[ParcelFootprint],
) -> Vec<usize> {
    idx.box_candidates(&poly.bounding_box())
        .into_iter()
        .filter(|&i| footprints[i].geometry.intersects_interior(poly))
        .collect()
}

/// Every footprint whose interior overlaps the record polygon.
pub fn assign_polygon<'a>(
    record: &SourceRecord,
    idx: &FootprintIndex,
    footprints: &'a [ParcelFootprint],
) -> Result<BTreeSet<&'a str>, AssignError> {
    check_index(idx, footprints)?;
    match &record.geometry {
        RecordGeometry::Polygon(poly) => Ok(polygon_targets(poly, idx, footprints)
            .into_iter()
            .map(|i| footprints[i].parcel_id.as_str())
            .collect()),
        RecordGeometry::Point(_) => Err(AssignError::WrongGeometry {
            record_id: record.record_id.clone(),
            expected: GeometryKind::Polygon,
            found: GeometryKind::Point,
        }),
    }
}

enum Outcome {
    Unaligned,
    Discarded,
    Assigned(BTreeSet<LbcsCode>, Vec<usize>),
}

/// Aligns and assigns every record of one source. All records must come
/// from `source`.
///
/// Records are processed in parallel; the per-record results are merged by
/// set union, so the table does not depend on record order.
pub fn build_label_table(
    source: &Source,
    records: &[SourceRecord],
    crosswalk: &CrosswalkTable,
    taxonomy: &LbcsTaxonomy,
    idx: &FootprintIndex,
    footprints: &[ParcelFootprint],
    radius: f64,
) -> Result<LabelTable, AssignError> {
    check_index(idx, footprints)?;
    if radius.is_nan() || radius < 0.0 {
        return Err(AssignError::InvalidRadius(radius));
    }
    if let Some(other) = records.iter().find(|r| &r.source != source) {
        return Err(AssignError::MixedSources {
            first: source.clone(),
            other: other.source.clone(),
        });
    }

    let outcomes: Vec<Outcome> = records
        .par_iter()
        .map(|record| {
            let codes = crosswalk.align(record);
            if codes.is_empty() {
                return Outcome::Unaligned;
            }
            let targets = match &record.geometry {
                RecordGeometry::Point(p) => point_target(*p, idx, footprints, radius)
                    .into_iter()
                    .collect(),
                RecordGeometry::Polygon(poly) => polygon_targets(poly, idx, footprints),
            };
            if targets.is_empty() {
                Outcome::Discarded
            } else {
                Outcome::Assigned(codes, targets)
            }
        })
        .collect();

    let mut table = LabelTable::new(source.clone());
    for (record, outcome) in records.iter().zip(outcomes) {
        table.stats.total_records += 1;
        match outcome {
            Outcome::Unaligned => table.stats.discarded_unaligned += 1,
            Outcome::Discarded => {
                table.stats.aligned_records += 1;
                table.stats.discarded_spatial += 1;
            }
            Outcome::Assigned(codes, targets) => {
                table.stats.aligned_records += 1;
                table.stats.valid_records += 1;
                for code in &codes {
                    if !taxonomy.contains(*code) {
                        return Err(AssignError::UnknownCode(*code));
                    }
                }
                for i in targets {
                    for &code in &codes {
                        table.add(&footprints[i].parcel_id, code, &record.record_id);
                    }
                }
            }
        }
    }
    Ok(table)
}
