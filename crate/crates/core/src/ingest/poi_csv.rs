use std::collections::HashSet;
use std::io::Read;

use super::{project, IngestError, Ingested, ProjectionSpec, RecordGeometry, Source, SourceRecord};

const COLUMNS: [&str; 4] = ["id", "lat", "lon", "type"];

/// Reads POI rows with header `id,lat,lon,type`.
///
/// Rows with unparsable coordinates, an empty id or type, or an id already
/// seen are skipped and reported with their line number.
pub fn read_poi_csv(
    input: impl Read,
    source: &Source,
    proj: &ProjectionSpec,
) -> Result<Ingested<SourceRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
    }
    let [id_col, lat_col, lon_col, type_col] = columns;

    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(IngestError::Csv(e.to_string()));
                }
                out.error(format!("line {line}"), e.to_string());
                continue;
            }
        };
        let at = format!("line {}", row.position().map_or(0, |p| p.line()));
        let field = |i: usize| row.get(i).unwrap_or("").trim();

        let id = field(id_col);
        let kind = field(type_col);
        if id.is_empty() {
            out.error(at, "empty id");
            continue;
        }
        if kind.is_empty() {
            out.error(at, "empty type");
            continue;
        }
        let coords = field(lat_col)
            .parse::<f64>()
            .ok()
            .zip(field(lon_col).parse::<f64>().ok())
            .filter(|(lat, lon)| lat.is_finite() && lon.is_finite());
        let Some((lat, lon)) = coords else {
            out.error(
                at,
                format!(
                    "non-numeric coordinates {:?},{:?}",
                    field(lat_col),
                    field(lon_col)
                ),
            );
            continue;
        };
        if !seen.insert(id.to_string()) {
            out.error(at, format!("duplicate record id {id:?}"));
            continue;
        }
        out.items.push(SourceRecord {
            source: source.clone(),
            record_id: id.to_string(),
            geometry: RecordGeometry::Point(project(lat, lon, proj)),
            tags: vec![("type".to_string(), kind.to_string())],
        });
    }
    Ok(out)
}
