//! Seeded synthetic city with planted land use, plus a brute-force
//! assignment oracle.
//!
//! Parcels form a `rows x cols` grid of squares. Each parcel gets one code
//! drawn from the palette; each source emits at most one record per parcel
//! near its centroid.
//!
//! Draw order, all from one `ChaCha8Rng` seeded with `seed`:
//! 1. one palette index per parcel, row-major;
//! 2. for each source in declaration order, for each parcel row-major:
//!    drop uniform, confusion uniform, replacement index, then two uniforms
//!    for Box–Muller. All five are drawn whether or not they are used.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::assign::{LabelTable, DISTANCE_TIE_TOLERANCE};
use crate::config::{ConfigError, Ini};
use crate::geometry::{Point, Polygon};
use crate::ingest::{GeometryKind, ParcelFootprint, RecordGeometry, Source, SourceRecord};
use crate::metrics::authoritative_for;
use crate::report::csv_field;
use crate::taxonomy::{
    AuthoritativeCrosswalk, CrosswalkTable, DataSfClass, KindFilter, LbcsCode, LbcsTaxonomy,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SourceNoise {
    pub source: Source,
    pub jitter_sigma: f64,
    pub drop_rate: f64,
    pub confusion_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub parcel_size: f64,
    pub gap: f64,
    pub sources: Vec<SourceNoise>,
    pub palette: Vec<LbcsCode>,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("no {source_name} tag maps to {code}")]
    NoTag { source_name: String, code: LbcsCode },
    #[error("{path}: {error}")]
    Io { path: String, error: io::Error },
}

fn invalid(message: impl Into<String>) -> SynthError {
    SynthError::Invalid(message.into())
}

impl SynthParams {
    /// Parses the `key = value` params format:
    ///
    /// ```text
    /// seed = 7
    /// rows = 10
    /// cols = 10
    /// parcel_size = 20
    /// gap = 4
    /// palette = 1300,5300,6100,6500
    ///
    /// [source google]
    /// jitter_sigma = 3
    /// drop_rate = 0.1
    /// confusion_rate = 0
    /// ```
    pub fn parse(text: &str) -> Result<SynthParams, SynthError> {
        let ini = Ini::parse(text)?;
        let top = &ini.top;
        top.only(&["seed", "rows", "cols", "parcel_size", "gap", "palette"])?;
        let palette_entry = top.required("palette")?;
        let palette = palette_entry
            .value
            .split(',')
            .map(|c| {
                c.trim().parse::<LbcsCode>().map_err(|_| {
                    invalid(format!(
                        "line {}: invalid palette code {c:?}",
                        palette_entry.line
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut sources = Vec::new();
        for section in &ini.sections {
            if section.kind != "source" {
                return Err(invalid(format!(
                    "line {}: unknown section kind {:?}",
                    section.line, section.kind
                )));
            }
            section.only(&["jitter_sigma", "drop_rate", "confusion_rate"])?;
            let source: Source = section
                .name
                .parse()
                .map_err(|_| invalid(format!("invalid source name {:?}", section.name)))?;
            sources.push(SourceNoise {
                source,
                jitter_sigma: section.parse("jitter_sigma")?.unwrap_or(0.0),
                drop_rate: section.parse("drop_rate")?.unwrap_or(0.0),
                confusion_rate: section.parse("confusion_rate")?.unwrap_or(0.0),
            });
        }
        let params = SynthParams {
            seed: top.parse_required("seed")?,
            rows: top.parse_required("rows")?,
            cols: top.parse_required("cols")?,
            parcel_size: top.parse_required("parcel_size")?,
            gap: top.parse_required("gap")?,
            sources,
            palette,
        };
        Ok(params)
    }

    pub fn validate(&self, taxonomy: &LbcsTaxonomy) -> Result<(), SynthError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("grid must have at least one row and column"));
        }
        if !(self.parcel_size > 0.0 && self.parcel_size.is_finite()) {
            return Err(invalid("parcel_size must be positive"));
        }
        if !(self.gap > 0.0 && self.gap.is_finite()) {
            return Err(invalid("gap must be positive"));
        }
        if self.palette.is_empty() {
            return Err(invalid("palette is empty"));
        }
        let mut seen_codes = BTreeSet::new();
        for &code in &self.palette {
            if !taxonomy.contains(code) {
                return Err(invalid(format!(
                    "palette code {code} is not in the taxonomy"
                )));
            }
            if !seen_codes.insert(code) {
                return Err(invalid(format!("palette code {code} listed twice")));
            }
        }
        let mut seen = BTreeSet::new();
        for s in &self.sources {
            if !seen.insert(s.source.clone()) {
                return Err(invalid(format!("source {} listed twice", s.source)));
            }
            for (name, rate) in [
                ("drop_rate", s.drop_rate),
                ("confusion_rate", s.confusion_rate),
            ] {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(invalid(format!(
                        "{name} of {} must lie in [0, 1]",
                        s.source
                    )));
                }
            }
            if !(s.jitter_sigma >= 0.0 && s.jitter_sigma.is_finite()) {
                return Err(invalid(format!(
                    "jitter_sigma of {} must be non-negative",
                    s.source
                )));
            }
        }
        Ok(())
    }
}

/// A tag that aligns to a palette code, and the geometry that carries it.
#[derive(Debug, Clone, PartialEq, Eq)]
struct PlantedTag {
    key: String,
    value: String,
    kind: GeometryKind,
}

/// First crosswalk row for `source` that yields `code`. Point rows are
/// preferred; OSM falls back to polygon rows, other sources cannot.
fn planted_tag(
    crosswalk: &CrosswalkTable,
    source: &Source,
    code: LbcsCode,
) -> Result<PlantedTag, SynthError> {
    let rows = || {
        crosswalk
            .rows()
            .iter()
            .filter(|r| &r.source == source && r.lbcs == code)
    };
    let tag = |key: &str, value: &str, kind| {
        // OSM values are conventionally written with underscores.
        let value = if *source == Source::Osm {
            value.replace(' ', "_")
        } else {
            value.to_string()
        };
        PlantedTag {
            key: key.to_string(),
            value,
            kind,
        }
    };
    if let Some(r) = rows().find(|r| r.kind.matches(GeometryKind::Point)) {
        return Ok(tag(&r.key, &r.value, GeometryKind::Point));
    }
    if *source == Source::Osm {
        if let Some(r) = rows().find(|r| r.kind == KindFilter::Polygon) {
            return Ok(tag(&r.key, &r.value, GeometryKind::Polygon));
        }
    }
    Err(SynthError::NoTag {
        source_name: source.to_string(),
        code,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub parcel_id: String,
    pub lbcs: LbcsCode,
    pub datasf: Option<DataSfClass>,
}

/// Generated fixture: values plus the exact file contents.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub footprints: Vec<ParcelFootprint>,
    pub truth: Vec<TruthRow>,
    pub records: Vec<(Source, Vec<SourceRecord>)>,
    /// File name and contents, in write order.
    pub files: Vec<(String, String)>,
}

impl SynthOutput {
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |error| SynthError::Io { path, error }
        };
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(io_err(&path))?;
        }
        Ok(())
    }
}

pub fn parcel_id(row: usize, col: usize) -> String {
    format!("P{row:04}-{col:04}")
}

/// Standard normal pair from two uniforms; `u1` must be in (0, 1].
fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

pub fn generate(
    p: &SynthParams,
    taxonomy: &LbcsTaxonomy,
    crosswalk: &CrosswalkTable,
    authoritative: &AuthoritativeCrosswalk,
) -> Result<SynthOutput, SynthError> {
    p.validate(taxonomy)?;
    let tags: Vec<Vec<PlantedTag>> = p
        .sources
        .iter()
        .map(|s| {
            p.palette
                .iter()
                .map(|&c| planted_tag(crosswalk, &s.source, c))
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let pitch = p.parcel_size + p.gap;
    let mut footprints = Vec::with_capacity(p.rows * p.cols);
    let mut planted = Vec::with_capacity(p.rows * p.cols);
    for r in 0..p.rows {
        for c in 0..p.cols {
            let x0 = c as f64 * pitch;
            let y0 = r as f64 * pitch;
            let k = rng.random_range(0..p.palette.len());
            let code = p.palette[k];
            planted.push(k);
            footprints.push(ParcelFootprint {
                parcel_id: parcel_id(r, c),
                geometry: Polygon::rectangle(x0, y0, x0 + p.parcel_size, y0 + p.parcel_size)
                    .expect("positive parcel size"),
                authoritative_class: authoritative_for(code, authoritative),
            });
        }
    }
    let truth: Vec<TruthRow> = footprints
        .iter()
        .zip(&planted)
        .map(|(f, &k)| TruthRow {
            parcel_id: f.parcel_id.clone(),
            lbcs: p.palette[k],
            datasf: f.authoritative_class,
        })
        .collect();

    let mut records = Vec::new();
    for (s, source_tags) in p.sources.iter().zip(&tags) {
        let mut out = Vec::new();
        for (n, (f, &k)) in footprints.iter().zip(&planted).enumerate() {
            let drop = rng.random::<f64>();
            let confuse = rng.random::<f64>();
            let swap = rng.random_range(0..p.palette.len().max(2) - 1);
            let u1 = 1.0 - rng.random::<f64>();
            let u2 = rng.random::<f64>();
            if drop < s.drop_rate {
                continue;
            }
            let mut k_emit = k;
            if confuse < s.confusion_rate && p.palette.len() > 1 {
                // Uniform over the other palette entries.
                k_emit = if swap >= k { swap + 1 } else { swap };
            }
            let (z0, z1) = box_muller(u1, u2);
            let centre = f.geometry.bounding_box().center();
            let at = Point::new(
                centre.x + s.jitter_sigma * z0,
                centre.y + s.jitter_sigma * z1,
            );
            let tag = &source_tags[k_emit];
            let geometry = match tag.kind {
                GeometryKind::Point => RecordGeometry::Point(at),
                GeometryKind::Polygon => {
                    let h = p.parcel_size / 4.0;
                    RecordGeometry::Polygon(
                        Polygon::rectangle(at.x - h, at.y - h, at.x + h, at.y + h)
                            .expect("positive parcel size"),
                    )
                }
            };
            out.push(SourceRecord {
                source: s.source.clone(),
                record_id: format!("{}{n:06}", s.source),
                geometry,
                tags: vec![(tag.key.clone(), tag.value.clone())],
            });
        }
        if s.source == Source::Osm {
            let ids = osm_element_ids(&kinds_of(&out));
            for (r, id) in out.iter_mut().zip(ids) {
                r.record_id = id;
            }
        }
        records.push((s.source.clone(), out));
    }

    let mut files = vec![
        (
            "footprints.geojson".to_string(),
            footprints_geojson(&footprints),
        ),
        ("truth.csv".to_string(), truth_csv(&truth)),
    ];
    for (source, recs) in &records {
        if *source == Source::Osm {
            files.push(("osm.osm".to_string(), osm_xml(recs)));
        } else {
            files.push((format!("{source}.csv"), poi_csv(recs)));
        }
    }
    files.push(("run.conf".to_string(), run_conf(&p.sources)));
    Ok(SynthOutput {
        footprints,
        truth,
        records,
        files,
    })
}

fn footprints_geojson(footprints: &[ParcelFootprint]) -> String {
    let features: Vec<_> = footprints
        .iter()
        .map(|f| {
            let ring: Vec<_> = f
                .geometry
                .exterior()
                .vertices()
                .iter()
                .chain(f.geometry.exterior().vertices().first())
                .map(|v| json!([v.x, v.y]))
                .collect();
            let mut props = serde_json::Map::new();
            props.insert("mapblklot".into(), json!(f.parcel_id));
            if let Some(class) = f.authoritative_class {
                props.insert("landuse".into(), json!(class.name()));
            }
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            })
        })
        .collect();
    // One feature per line keeps fixtures diffable.
    let body: Vec<String> = features.iter().map(|f| f.to_string()).collect();
    format!(
        "{{\"type\":\"FeatureCollection\",\"features\":[\n{}\n]}}\n",
        body.join(",\n")
    )
}

fn truth_csv(truth: &[TruthRow]) -> String {
    let mut out = String::from("parcel_id,lbcs,datasf\n");
    for t in truth {
        let class = t.datasf.map(|c| c.name()).unwrap_or("");
        writeln!(out, "{},{},{}", t.parcel_id, t.lbcs, csv_field(class)).unwrap();
    }
    out
}

fn poi_csv(records: &[SourceRecord]) -> String {
    let mut out = String::from("id,lat,lon,type\n");
    for r in records {
        let RecordGeometry::Point(p) = &r.geometry else {
            unreachable!("POI sources only plant point records");
        };
        writeln!(
            out,
            "{},{},{},{}",
            r.record_id,
            p.y,
            p.x,
            csv_field(&r.tags[0].1)
        )
        .unwrap();
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn kinds_of(records: &[SourceRecord]) -> Vec<GeometryKind> {
    records.iter().map(|r| r.geometry.kind()).collect()
}

/// Ids the OSM reader reports: nodes and ways are numbered from 1 in record
/// order, and a polygon uses four untagged corner nodes before its way.
fn osm_element_ids(kinds: &[GeometryKind]) -> Vec<String> {
    let (mut node, mut way) = (1u64, 1u64);
    kinds
        .iter()
        .map(|kind| match kind {
            GeometryKind::Point => {
                node += 1;
                format!("n{}", node - 1)
            }
            GeometryKind::Polygon => {
                node += 4;
                way += 1;
                format!("w{}", way - 1)
            }
        })
        .collect()
}

fn osm_xml(records: &[SourceRecord]) -> String {
    let mut out =
        String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n");
    let mut ways = String::new();
    let mut next_node = 1u64;
    let mut next_way = 1u64;
    for r in records {
        let (key, value) = (&r.tags[0].0, &r.tags[0].1);
        let tag = format!(
            "<tag k=\"{}\" v=\"{}\"/>",
            xml_escape(key),
            xml_escape(value)
        );
        match &r.geometry {
            RecordGeometry::Point(p) => {
                writeln!(
                    out,
                    "  <node id=\"{next_node}\" lat=\"{}\" lon=\"{}\">\n    {tag}\n  </node>",
                    p.y, p.x
                )
                .unwrap();
                next_node += 1;
            }
            RecordGeometry::Polygon(poly) => {
                let mut refs = Vec::new();
                for v in poly.exterior().vertices() {
                    writeln!(
                        out,
                        "  <node id=\"{next_node}\" lat=\"{}\" lon=\"{}\"/>",
                        v.y, v.x
                    )
                    .unwrap();
                    refs.push(next_node);
                    next_node += 1;
                }
                refs.push(refs[0]);
                writeln!(ways, "  <way id=\"{next_way}\">").unwrap();
                for id in refs {
                    writeln!(ways, "    <nd ref=\"{id}\"/>").unwrap();
                }
                writeln!(ways, "    {tag}\n  </way>").unwrap();
                next_way += 1;
            }
        }
    }
    out.push_str(&ways);
    out.push_str("</osm>\n");
    out
}

fn run_conf(sources: &[SourceNoise]) -> String {
    let mut out = String::from(
        "footprints = footprints.geojson\n\
         taxonomy = builtin\n\
         crosswalk = builtin\n\
         authoritative = builtin\n\
         radius = 10\n\
         projection = already_planar\n\
         output_dir = out\n",
    );
    for s in sources {
        let (format, path) = if s.source == Source::Osm {
            ("osm_xml", "osm.osm".to_string())
        } else {
            ("poi_csv", format!("{}.csv", s.source))
        };
        write!(
            out,
            "\n[source {}]\nformat = {format}\npath = {path}\n",
            s.source
        )
        .unwrap();
    }
    out
}

/// Reads a `parcel_id,lbcs,datasf` truth file.
pub fn parse_truth_csv(text: &str) -> Result<Vec<TruthRow>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let at = i + 2;
        let lbcs = row
            .get(1)
            .and_then(|c| c.parse().ok())
            .ok_or(format!("line {at}: bad lbcs"))?;
        let datasf = match row.get(2).unwrap_or("") {
            "" => None,
            raw => Some(raw.parse().map_err(|_| format!("line {at}: bad class"))?),
        };
        rows.push(TruthRow {
            parcel_id: row.get(0).unwrap_or("").to_string(),
            lbcs,
            datasf,
        });
    }
    Ok(rows)
}

/// Reference assignment: every record is checked against every footprint.
pub fn oracle_assign(
    source: &Source,
    records: &[SourceRecord],
    footprints: &[ParcelFootprint],
    crosswalk: &CrosswalkTable,
    radius: f64,
) -> LabelTable {
    fn smaller(a: &ParcelFootprint, b: &ParcelFootprint) -> bool {
        let (aa, ba) = (
            a.geometry.bounding_box().area(),
            b.geometry.bounding_box().area(),
        );
        match aa.partial_cmp(&ba).unwrap_or(Ordering::Equal) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => a.parcel_id < b.parcel_id,
        }
    }
    fn best<'a>(cands: impl Iterator<Item = &'a ParcelFootprint>) -> Option<&'a ParcelFootprint> {
        let mut winner: Option<&ParcelFootprint> = None;
        for f in cands {
            if winner.is_none_or(|w| smaller(f, w)) {
                winner = Some(f);
            }
        }
        winner
    }

    let mut table = LabelTable::new(source.clone());
    let mut assigned: BTreeMap<(String, LbcsCode), BTreeSet<String>> = BTreeMap::new();
    for record in records {
        table.stats.total_records += 1;
        let codes = crosswalk.align(record);
        if codes.is_empty() {
            table.stats.discarded_unaligned += 1;
            continue;
        }
        table.stats.aligned_records += 1;
        let targets: Vec<&ParcelFootprint> = match &record.geometry {
            RecordGeometry::Point(p) => {
                let inside = best(footprints.iter().filter(|f| f.geometry.contains(*p)));
                let chosen = inside.or_else(|| {
                    let d: Vec<f64> = footprints.iter().map(|f| f.geometry.distance(*p)).collect();
                    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
                    if min > radius {
                        return None;
                    }
                    best(
                        footprints
                            .iter()
                            .zip(&d)
                            .filter(|&(_, &di)| di <= radius && di - min <= DISTANCE_TIE_TOLERANCE)
                            .map(|(f, _)| f),
                    )
                });
                chosen.into_iter().collect()
            }
            RecordGeometry::Polygon(poly) => footprints
                .iter()
                .filter(|f| f.geometry.intersects_interior(poly))
                .collect(),
        };
        if targets.is_empty() {
            table.stats.discarded_spatial += 1;
            continue;
        }
        table.stats.valid_records += 1;
        for f in targets {
            for &code in &codes {
                assigned
                    .entry((f.parcel_id.clone(), code))
                    .or_default()
                    .insert(record.record_id.clone());
            }
        }
    }
    for ((parcel, code), ids) in assigned {
        table.labels.entry(parcel.clone()).or_default().insert(code);
        table.provenance.insert((parcel, code), ids);
    }
    table
}
