use std::io::Read;

use serde_json::{Map, Value};

use super::{
    project, IngestError, Ingested, ParcelFootprint, ProjectionSpec, RecordGeometry, Source,
    SourceRecord,
};
use crate::geometry::{Point, Polygon, Ring};

/// Property names and projection used when reading parcel footprints.
#[derive(Debug, Clone, PartialEq)]
pub struct FootprintOptions {
    pub id_property: String,
    pub class_property: String,
    pub projection: ProjectionSpec,
}

impl Default for FootprintOptions {
    fn default() -> Self {
        FootprintOptions {
            id_property: "mapblklot".to_string(),
            class_property: "landuse".to_string(),
            projection: ProjectionSpec::planar(),
        }
    }
}

fn parse_collection(mut input: impl Read) -> Result<Vec<Value>, IngestError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let root: Value = serde_json::from_str(&text).map_err(|e| IngestError::Json {
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let Value::Object(mut root) = root else {
        return Err(IngestError::NotFeatureCollection);
    };
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(IngestError::NotFeatureCollection);
    }
    match root.remove("features") {
        Some(Value::Array(features)) => Ok(features),
        _ => Err(IngestError::NotFeatureCollection),
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line.saturating_sub(1))
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn property_string(props: Option<&Map<String, Value>>, key: &str) -> Option<String> {
    match props?.get(key)? {
        Value::String(s) => Some(s.clone()).filter(|s| !s.trim().is_empty()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn position(value: &Value, proj: &ProjectionSpec) -> Result<Point, String> {
    let coords = value.as_array().ok_or("position must be an array")?;
    let (lon, lat) = match coords.as_slice() {
        [lon, lat, ..] => (lon.as_f64(), lat.as_f64()),
        _ => (None, None),
    };
    match (lon, lat) {
        (Some(lon), Some(lat)) if lon.is_finite() && lat.is_finite() => Ok(project(lat, lon, proj)),
        _ => Err("position needs two numbers".to_string()),
    }
}

fn polygon(rings: &Value, proj: &ProjectionSpec) -> Result<Polygon, String> {
    let rings = rings
        .as_array()
        .ok_or("polygon coordinates must be an array")?;
    let mut parsed = Vec::with_capacity(rings.len());
    for ring in rings {
        let points = ring
            .as_array()
            .ok_or("ring must be an array")?
            .iter()
            .map(|p| position(p, proj))
            .collect::<Result<Vec<_>, _>>()?;
        parsed.push(Ring::new(points).map_err(|e| e.to_string())?);
    }
    if parsed.is_empty() {
        return Err("polygon has no rings".to_string());
    }
    let exterior = parsed.remove(0);
    Polygon::new(exterior, parsed).map_err(|e| e.to_string())
}

/// Polygon parts of an areal geometry, and whether it was a MultiPolygon.
fn areal_parts(
    geometry: Option<&Value>,
    proj: &ProjectionSpec,
) -> Result<(Vec<Polygon>, bool), String> {
    let geometry = geometry
        .and_then(Value::as_object)
        .ok_or("feature has no geometry")?;
    let coords = geometry
        .get("coordinates")
        .ok_or("geometry has no coordinates")?;
    match geometry.get("type").and_then(Value::as_str) {
        Some("Polygon") => Ok((vec![polygon(coords, proj)?], false)),
        Some("MultiPolygon") => {
            let parts = coords
                .as_array()
                .ok_or("multipolygon coordinates must be an array")?
                .iter()
                .map(|p| polygon(p, proj))
                .collect::<Result<Vec<_>, _>>()?;
            if parts.is_empty() {
                return Err("multipolygon has no parts".to_string());
            }
            Ok((parts, true))
        }
        Some(other) => Err(format!("non-areal geometry {other}")),
        None => Err("geometry has no type".to_string()),
    }
}

/// Reads parcel footprints from a FeatureCollection.
///
/// MultiPolygon features become one footprint per part with ids suffixed
/// `#0`, `#1`, and so on. Class values outside the known set are dropped and
/// counted in `unknown_class`.
pub fn read_footprints_geojson(
    input: impl Read,
    opts: &FootprintOptions,
) -> Result<Ingested<ParcelFootprint>, IngestError> {
    let features = parse_collection(input)?;
    let mut out = Ingested::default();
    let mut seen = std::collections::HashSet::new();

    for (index, feature) in features.iter().enumerate() {
        let at = format!("feature {index}");
        let props = feature.get("properties").and_then(Value::as_object);
        let Some(id) = property_string(props, &opts.id_property) else {
            out.error(at, format!("missing id property {:?}", opts.id_property));
            continue;
        };
        let (parts, split) = match areal_parts(feature.get("geometry"), &opts.projection) {
            Ok(parts) => parts,
            Err(reason) => {
                out.error(at, reason);
                continue;
            }
        };
        let class = match property_string(props, &opts.class_property) {
            Some(raw) => match raw.parse() {
                Ok(class) => Some(class),
                Err(_) => {
                    out.unknown_class += 1;
                    None
                }
            },
            None => None,
        };
        for (part, geometry) in parts.into_iter().enumerate() {
            let parcel_id = if split {
                format!("{id}#{part}")
            } else {
                id.clone()
            };
            if !seen.insert(parcel_id.clone()) {
                out.error(at.clone(), format!("duplicate parcel id {parcel_id:?}"));
                continue;
            }
            out.items.push(ParcelFootprint {
                parcel_id,
                geometry,
                authoritative_class: class,
            });
        }
    }
    if out.unknown_class > 0 {
        log::warn!(
            "{} footprints carried an unrecognised {:?} value",
            out.unknown_class,
            opts.class_property
        );
    }
    Ok(out)
}

/// Reads point and polygon source records from a FeatureCollection.
///
/// The record id comes from the feature `id` member or the `id` property.
/// Every other scalar property becomes a tag.
pub fn read_records_geojson(
    input: impl Read,
    source: &Source,
    proj: &ProjectionSpec,
) -> Result<Ingested<SourceRecord>, IngestError> {
    let features = parse_collection(input)?;
    let mut out = Ingested::default();
    let mut seen = std::collections::HashSet::new();

    for (index, feature) in features.iter().enumerate() {
        let at = format!("feature {index}");
        let props = feature.get("properties").and_then(Value::as_object);
        let id = match feature.get("id") {
            Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
            Some(Value::Number(n)) => Some(n.to_string()),
            _ => property_string(props, "id"),
        };
        let Some(id) = id else {
            out.error(at, "missing record id");
            continue;
        };
        let mut tags: Vec<(String, String)> = props
            .into_iter()
            .flatten()
            .filter(|(k, _)| k.as_str() != "id")
            .filter_map(|(k, v)| {
                let v = match v {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                    _ => return None,
                };
                Some((k.clone(), v))
            })
            .collect();
        tags.sort();
        if tags.is_empty() {
            out.error(at, "record has no tags");
            continue;
        }

        let geometry = feature.get("geometry");
        let kind = geometry.and_then(|g| g.get("type")).and_then(Value::as_str);
        let geometries: Result<Vec<(String, RecordGeometry)>, String> = match kind {
            Some("Point") => geometry
                .and_then(|g| g.get("coordinates"))
                .ok_or_else(|| "geometry has no coordinates".to_string())
                .and_then(|c| position(c, proj))
                .map(|p| vec![(id.clone(), RecordGeometry::Point(p))]),
            _ => areal_parts(geometry, proj).map(|(parts, split)| {
                parts
                    .into_iter()
                    .enumerate()
                    .map(|(i, poly)| {
                        let rid = if split {
                            format!("{id}#{i}")
                        } else {
                            id.clone()
                        };
                        (rid, RecordGeometry::Polygon(poly))
                    })
                    .collect()
            }),
        };
        match geometries {
            Ok(geometries) => {
                for (record_id, geometry) in geometries {
                    if !seen.insert(record_id.clone()) {
                        out.error(at.clone(), format!("duplicate record id {record_id:?}"));
                        continue;
                    }
                    out.items.push(SourceRecord {
                        source: source.clone(),
                        record_id,
                        geometry,
                        tags: tags.clone(),
                    });
                }
            }
            Err(reason) => out.error(at, reason),
        }
    }
    Ok(out)
}
