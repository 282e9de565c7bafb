use std::collections::HashMap;
use std::io::{BufReader, Read};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{project, IngestError, Ingested, ProjectionSpec, RecordGeometry, Source, SourceRecord};
use crate::geometry::{Point, Polygon, Ring};

/// Element counts from one OSM XML pass.
///
/// `items + errors + untagged_nodes + untagged_ways + unclosed_ways` always
/// equals `nodes + ways`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OsmTally {
    pub nodes: usize,
    pub ways: usize,
    pub untagged_nodes: usize,
    pub untagged_ways: usize,
    pub unclosed_ways: usize,
}

#[derive(Debug, Default)]
struct PendingWay {
    id: String,
    refs: Vec<String>,
    tags: Vec<(String, String)>,
}

#[derive(Debug, Default)]
struct PendingNode {
    id: String,
    coords: Option<(f64, f64)>,
    tags: Vec<(String, String)>,
}

enum Open {
    Node(PendingNode),
    Way(PendingWay),
    Other,
}

fn attr_map(e: &BytesStart<'_>, position: u64) -> Result<HashMap<String, String>, IngestError> {
    let mut out = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| IngestError::Xml {
            position,
            message: err.to_string(),
        })?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| IngestError::Xml {
                position,
                message: err.to_string(),
            })?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

/// Reads tagged nodes as points and tagged closed ways as polygons.
///
/// Relations are ignored. Ways are assembled after the whole document has
/// been read, so node order in the file does not matter. Record ids are
/// `n<id>` for nodes and `w<id>` for ways.
pub fn read_osm_xml(
    input: impl Read,
    proj: &ProjectionSpec,
) -> Result<(Ingested<SourceRecord>, OsmTally), IngestError> {
    let mut reader = Reader::from_reader(BufReader::new(input));
    let mut out = Ingested::default();
    let mut tally = OsmTally::default();
    let mut coords: HashMap<String, Point> = HashMap::new();
    let mut ways: Vec<PendingWay> = Vec::new();
    let mut stack: Vec<Open> = Vec::new();
    let mut buf = Vec::new();

    loop {
        let position = reader.buffer_position();
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| IngestError::Xml {
                position: reader.error_position(),
                message: e.to_string(),
            })?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let empty = matches!(event, Event::Empty(_));
                let open = match e.name().as_ref() {
                    b"node" => {
                        let attrs = attr_map(e, position)?;
                        let lat = attrs.get("lat").and_then(|v| v.parse::<f64>().ok());
                        let lon = attrs.get("lon").and_then(|v| v.parse::<f64>().ok());
                        Open::Node(PendingNode {
                            id: attrs.get("id").cloned().unwrap_or_default(),
                            coords: lat
                                .zip(lon)
                                .filter(|(lat, lon)| lat.is_finite() && lon.is_finite()),
                            tags: Vec::new(),
                        })
                    }
                    b"way" => {
                        let attrs = attr_map(e, position)?;
                        Open::Way(PendingWay {
                            id: attrs.get("id").cloned().unwrap_or_default(),
                            ..PendingWay::default()
                        })
                    }
                    b"tag" => {
                        let mut attrs = attr_map(e, position)?;
                        if let (Some(k), Some(v)) = (attrs.remove("k"), attrs.remove("v")) {
                            match stack.last_mut() {
                                Some(Open::Node(n)) => n.tags.push((k, v)),
                                Some(Open::Way(w)) => w.tags.push((k, v)),
                                _ => {}
                            }
                        }
                        Open::Other
                    }
                    b"nd" => {
                        let mut attrs = attr_map(e, position)?;
                        if let (Some(Open::Way(w)), Some(r)) =
                            (stack.last_mut(), attrs.remove("ref"))
                        {
                            w.refs.push(r);
                        }
                        Open::Other
                    }
                    _ => Open::Other,
                };
                if empty {
                    finish(open, proj, &mut coords, &mut ways, &mut out, &mut tally);
                } else {
                    stack.push(open);
                }
            }
            Event::End(_) => {
                if let Some(open) = stack.pop() {
                    finish(open, proj, &mut coords, &mut ways, &mut out, &mut tally);
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    for way in ways {
        assemble_way(way, &coords, &mut out, &mut tally);
    }
    Ok((out, tally))
}

fn finish(
    open: Open,
    proj: &ProjectionSpec,
    coords: &mut HashMap<String, Point>,
    ways: &mut Vec<PendingWay>,
    out: &mut Ingested<SourceRecord>,
    tally: &mut OsmTally,
) {
    match open {
        Open::Node(node) => {
            tally.nodes += 1;
            let at = format!("node {}", node.id);
            if node.id.is_empty() {
                out.error(at, "node has no id");
                return;
            }
            let Some((lat, lon)) = node.coords else {
                out.error(at, "node has missing or non-numeric lat/lon");
                return;
            };
            let p = project(lat, lon, proj);
            coords.insert(node.id.clone(), p);
            if node.tags.is_empty() {
                tally.untagged_nodes += 1;
                return;
            }
            out.items.push(SourceRecord {
                source: Source::Osm,
                record_id: format!("n{}", node.id),
                geometry: RecordGeometry::Point(p),
                tags: node.tags,
            });
        }
        Open::Way(way) => {
            tally.ways += 1;
            if way.id.is_empty() {
                out.error("way", "way has no id");
                return;
            }
            ways.push(way);
        }
        Open::Other => {}
    }
}

fn assemble_way(
    way: PendingWay,
    coords: &HashMap<String, Point>,
    out: &mut Ingested<SourceRecord>,
    tally: &mut OsmTally,
) {
    if way.tags.is_empty() {
        tally.untagged_ways += 1;
        return;
    }
    if way.refs.len() < 4 || way.refs.first() != way.refs.last() {
        tally.unclosed_ways += 1;
        return;
    }
    let at = format!("way {}", way.id);
    let mut vertices = Vec::with_capacity(way.refs.len() - 1);
    for r in &way.refs[..way.refs.len() - 1] {
        match coords.get(r) {
            Some(p) => vertices.push(*p),
            None => {
                out.error(at, format!("references missing node {r}"));
                return;
            }
        }
    }
    let polygon = Ring::new(vertices).and_then(|ring| Polygon::new(ring, Vec::new()));
    match polygon {
        Ok(polygon) => out.items.push(SourceRecord {
            source: Source::Osm,
            record_id: format!("w{}", way.id),
            geometry: RecordGeometry::Polygon(polygon),
            tags: way.tags,
        }),
        Err(e) => out.error(at, e.to_string()),
    }
}
