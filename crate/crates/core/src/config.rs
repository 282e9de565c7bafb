//! Plain-text `key = value` configuration with `[kind name]` sections.
//!
//! ```text
//! # comment
//! footprints = parcels.geojson
//! radius = 10
//!
//! [source google]
//! format = poi_csv
//! path = google.csv
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::assign::DEFAULT_RADIUS_M;
use crate::ingest::{InvalidSource, ProjectionSpec, Source};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Entries under one header, or the top level when `kind` is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Section {
    pub kind: String,
    pub name: String,
    pub line: usize,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on the first key outside `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self
            .entries
            .values()
            .find(|e| !allowed.contains(&e.key.as_str()))
        {
            Some(e) => Err(err(e.line, format!("unknown key {:?}", e.key))),
            None => Ok(()),
        }
    }

    pub fn required(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.get(key).ok_or_else(|| {
            let place = if self.kind.is_empty() {
                "top level".to_string()
            } else {
                format!("[{} {}]", self.kind, self.name)
            };
            err(self.line, format!("missing {key:?} in {place}"))
        })
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse()
                    .map_err(|_| err(e.line, format!("invalid value {:?} for {key:?}", e.value)))
            })
            .transpose()
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.required(key)?;
        Ok(self.parse(key)?.expect("presence checked"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ini {
    pub top: Section,
    pub sections: Vec<Section>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Ini, ConfigError> {
        let mut ini = Ini::default();
        let mut current: Option<Section> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
                continue;
            }
            if let Some(header) = trimmed.strip_prefix('[') {
                let inner = header
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header"))?;
                let mut words = inner.split_whitespace();
                let (Some(kind), Some(name), None) = (words.next(), words.next(), words.next())
                else {
                    return Err(err(line, "section header must be [kind name]"));
                };
                if let Some(done) = current.take() {
                    ini.sections.push(done);
                }
                current = Some(Section {
                    kind: kind.to_string(),
                    name: name.to_string(),
                    line,
                    entries: BTreeMap::new(),
                });
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err(line, "expected key = value"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(err(line, "empty key"));
            }
            let section = current.as_mut().unwrap_or(&mut ini.top);
            let entry = Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            };
            if section.entries.insert(key.to_string(), entry).is_some() {
                return Err(err(line, format!("duplicate key {key:?}")));
            }
        }
        if let Some(done) = current {
            ini.sections.push(done);
        }
        Ok(ini)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    PoiCsv,
    OsmXml,
    GeoJson,
}

impl FromStr for InputFormat {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "poi_csv" => Ok(InputFormat::PoiCsv),
            "osm_xml" => Ok(InputFormat::OsmXml),
            "geojson" => Ok(InputFormat::GeoJson),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceInput {
    pub source: Source,
    pub format: InputFormat,
    pub path: PathBuf,
}

/// A shipped table or files on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableRef {
    Builtin,
    Files(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub footprints: PathBuf,
    pub id_property: String,
    pub class_property: String,
    pub taxonomy: TableRef,
    pub crosswalks: TableRef,
    pub authoritative: TableRef,
    pub radius: f64,
    pub projection: ProjectionSpec,
    pub output_dir: PathBuf,
    pub sources: Vec<SourceInput>,
}

const TOP_KEYS: [&str; 11] = [
    "footprints",
    "id_property",
    "class_property",
    "taxonomy",
    "crosswalk",
    "authoritative",
    "radius",
    "projection",
    "origin_lat",
    "origin_lon",
    "output_dir",
];

impl RunConfig {
    /// Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
        let ini = Ini::parse(text)?;
        let top = &ini.top;
        top.only(&TOP_KEYS)?;
        let path = |e: &Entry| -> Result<PathBuf, ConfigError> {
            if e.value.is_empty() {
                return Err(err(e.line, format!("empty path for {:?}", e.key)));
            }
            Ok(base.join(&e.value))
        };
        let table = |key: &str| -> Result<TableRef, ConfigError> {
            match top.get(key) {
                None => Ok(TableRef::Builtin),
                Some(e) if e.value == "builtin" => Ok(TableRef::Builtin),
                Some(e) => {
                    let files = e
                        .value
                        .split(',')
                        .map(|p| p.trim())
                        .map(|p| {
                            if p.is_empty() {
                                Err(err(e.line, format!("empty path in {key:?}")))
                            } else {
                                Ok(base.join(p))
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(TableRef::Files(files))
                }
            }
        };

        let radius = top.parse::<f64>("radius")?.unwrap_or(DEFAULT_RADIUS_M);
        if !(radius >= 0.0 && radius.is_finite()) {
            let line = top.get("radius").map_or(0, |e| e.line);
            return Err(err(
                line,
                format!("radius must be a non-negative number, got {radius}"),
            ));
        }

        let projection = match top.get("projection").map(|e| (e.value.as_str(), e.line)) {
            None | Some(("already_planar", _)) => {
                for key in ["origin_lat", "origin_lon"] {
                    if let Some(e) = top.get(key) {
                        return Err(err(
                            e.line,
                            format!("{key:?} needs projection = equirectangular"),
                        ));
                    }
                }
                ProjectionSpec::planar()
            }
            Some(("equirectangular", line)) => {
                let lat = top.parse_required::<f64>("origin_lat")?;
                let lon = top.parse_required::<f64>("origin_lon")?;
                ProjectionSpec::equirectangular(lat, lon).map_err(|e| err(line, e.to_string()))?
            }
            Some((other, line)) => return Err(err(line, format!("unknown projection {other:?}"))),
        };

        let mut sources: Vec<SourceInput> = Vec::new();
        for section in &ini.sections {
            if section.kind != "source" {
                return Err(err(
                    section.line,
                    format!("unknown section kind {:?}", section.kind),
                ));
            }
            section.only(&["format", "path"])?;
            let source: Source = section.name.parse().map_err(|InvalidSource(s)| {
                err(section.line, format!("invalid source name {s:?}"))
            })?;
            if sources.iter().any(|s| s.source == source) {
                return Err(err(
                    section.line,
                    format!("source {source} configured twice"),
                ));
            }
            let format = section.parse_required::<InputFormat>("format")?;
            sources.push(SourceInput {
                source,
                format,
                path: path(section.required("path")?)?,
            });
        }

        let string = |key: &str, default: &str| -> Result<String, ConfigError> {
            match top.get(key) {
                Some(e) if e.value.is_empty() => Err(err(e.line, format!("empty {key:?}"))),
                Some(e) => Ok(e.value.clone()),
                None => Ok(default.to_string()),
            }
        };

        Ok(RunConfig {
            footprints: path(top.required("footprints")?)?,
            id_property: string("id_property", "mapblklot")?,
            class_property: string("class_property", "landuse")?,
            taxonomy: table("taxonomy")?,
            crosswalks: table("crosswalk")?,
            authoritative: table("authoritative")?,
            radius,
            projection,
            output_dir: match top.get("output_dir") {
                Some(e) => path(e)?,
                None => base.join("out"),
            },
            sources,
        })
    }

    pub fn source(&self, source: &Source) -> Option<&SourceInput> {
        self.sources.iter().find(|s| &s.source == source)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# run
footprints = parcels.geojson
radius = 12.5
crosswalk = a.csv, b.csv

[source google]
format = poi_csv
path = data/google.csv

[source osm]
format = osm_xml
path = /abs/osm.osm
";

    #[test]
    fn full_config() {
        let cfg = RunConfig::parse(SAMPLE, Path::new("/base")).unwrap();
        assert_eq!(cfg.footprints, PathBuf::from("/base/parcels.geojson"));
        assert_eq!(cfg.radius, 12.5);
        assert_eq!(cfg.taxonomy, TableRef::Builtin);
        assert_eq!(
            cfg.crosswalks,
            TableRef::Files(vec!["/base/a.csv".into(), "/base/b.csv".into()])
        );
        assert_eq!(cfg.sources.len(), 2);
        assert_eq!(cfg.sources[0].path, PathBuf::from("/base/data/google.csv"));
        assert_eq!(cfg.sources[1].path, PathBuf::from("/abs/osm.osm"));
        assert_eq!(cfg.sources[1].format, InputFormat::OsmXml);
        assert_eq!(cfg.output_dir, PathBuf::from("/base/out"));
        assert_eq!(cfg.id_property, "mapblklot");
    }

    #[test]
    fn defaults_and_projection() {
        let cfg = RunConfig::parse("footprints = f\n", Path::new("")).unwrap();
        assert_eq!(cfg.radius, DEFAULT_RADIUS_M);
        assert!(cfg.sources.is_empty());
        let cfg = RunConfig::parse(
            "footprints = f\nprojection = equirectangular\norigin_lat = 37.77\norigin_lon = -122.42\n",
            Path::new(""),
        )
        .unwrap();
        assert_eq!(cfg.projection.origin(), (37.77, -122.42));
    }

    #[test]
    fn rejections() {
        let bad = [
            "radius = 3\n",
            "footprints = f\nradius = -1\n",
            "footprints = f\ncolour = red\n",
            "footprints = f\nfootprints = g\n",
            "footprints = f\n[source google]\nformat = shapefile\npath = x\n",
            "footprints = f\n[source google]\nformat = poi_csv\n",
            "footprints = f\n[source google]\nformat = poi_csv\npath = a\n[source google]\nformat = poi_csv\npath = b\n",
            "footprints = f\n[source go ogle]\n",
            "footprints = f\n[source g$]\nformat = poi_csv\npath = a\n",
            "footprints = f\nprojection = equirectangular\norigin_lat = 91\norigin_lon = 0\n",
            "footprints = f\nprojection = mercator\n",
            "footprints = f\njust words\n",
        ];
        for text in bad {
            assert!(RunConfig::parse(text, Path::new("")).is_err(), "{text}");
        }
        let e = RunConfig::parse("footprints = f\ncolour = red\n", Path::new("")).unwrap_err();
        assert_eq!(e.line, 2);
    }
}
