//! Loading a run configuration and labeling every configured source.

use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::assign::{build_label_table, AssignError, LabelTable};
use crate::config::{ConfigError, InputFormat, RunConfig, SourceInput, TableRef};
use crate::ingest::{
    read_footprints_geojson, read_osm_xml, read_poi_csv, read_records_geojson, FootprintOptions,
    IngestError, Ingested, ParcelFootprint, ProjectionSpec, Source, SourceRecord,
};
use crate::spatial_index::{FootprintIndex, IndexError};
use crate::taxonomy::{
    builtin_authoritative, builtin_crosswalk, builtin_taxonomy, load_taxonomy,
    AuthoritativeCrosswalk, CrosswalkTable, LbcsTaxonomy, TaxonomyError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {error}")]
    Io { path: PathBuf, error: io::Error },
    #[error("{path}: {error}")]
    Config { path: PathBuf, error: ConfigError },
    #[error("{path}: {error}")]
    Ingest { path: PathBuf, error: IngestError },
    #[error("{path}: {error}")]
    Table {
        path: PathBuf,
        error: Box<TaxonomyError>,
    },
    #[error("{path}: {error}")]
    Index { path: PathBuf, error: IndexError },
    #[error(transparent)]
    Assign(#[from] AssignError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
}

impl PipelineError {
    /// 1 for usage or configuration problems, 2 for unreadable or invalid
    /// inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } | PipelineError::Usage(_) => 1,
            _ => 2,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|error| PipelineError::Io {
            path: path.to_path_buf(),
            error,
        })
}

pub fn load_config(path: &Path) -> Result<RunConfig, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|error| PipelineError::Io {
        path: path.to_path_buf(),
        error,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    RunConfig::parse(&text, base).map_err(|error| PipelineError::Config {
        path: path.to_path_buf(),
        error,
    })
}

/// Taxonomy, record crosswalk and authoritative map of one run.
#[derive(Debug, Clone)]
pub struct Tables {
    pub taxonomy: LbcsTaxonomy,
    pub crosswalk: CrosswalkTable,
    pub authoritative: AuthoritativeCrosswalk,
}

impl Tables {
    pub fn builtin() -> Tables {
        let taxonomy = builtin_taxonomy();
        Tables {
            crosswalk: builtin_crosswalk(&taxonomy).expect("shipped crosswalks are valid"),
            authoritative: builtin_authoritative(&taxonomy),
            taxonomy,
        }
    }

    pub fn load(cfg: &RunConfig) -> Result<Tables, PipelineError> {
        let table_err = |path: &Path| {
            let path = path.to_path_buf();
            move |error| PipelineError::Table {
                path,
                error: Box::new(error),
            }
        };
        let single = |r: &TableRef, what: &str| -> Result<Option<PathBuf>, PipelineError> {
            match r {
                TableRef::Builtin => Ok(None),
                TableRef::Files(files) if files.len() == 1 => Ok(Some(files[0].clone())),
                TableRef::Files(_) => Err(PipelineError::Usage(format!("{what} takes one file"))),
            }
        };
        let taxonomy = match single(&cfg.taxonomy, "taxonomy")? {
            None => builtin_taxonomy(),
            Some(path) => load_taxonomy(open(&path)?).map_err(table_err(&path))?,
        };
        let crosswalk = match &cfg.crosswalks {
            TableRef::Builtin => builtin_crosswalk(&taxonomy)
                .map_err(|e| PipelineError::Input(format!("builtin crosswalk: {e}")))?,
            TableRef::Files(files) => {
                let mut table = CrosswalkTable::default();
                for path in files {
                    table
                        .extend_from_csv(open(path)?, &taxonomy)
                        .map_err(table_err(path))?;
                }
                table
            }
        };
        let authoritative = match single(&cfg.authoritative, "authoritative")? {
            None => builtin_authoritative(&taxonomy),
            Some(path) => {
                AuthoritativeCrosswalk::load(open(&path)?, &taxonomy).map_err(table_err(&path))?
            }
        };
        Ok(Tables {
            taxonomy,
            crosswalk,
            authoritative,
        })
    }
}

fn log_record_errors<T>(path: &Path, ingested: &Ingested<T>) {
    for e in &ingested.errors {
        log::warn!("{}: {}: {}", path.display(), e.at, e.reason);
    }
}

pub fn read_source(
    input: &SourceInput,
    projection: &ProjectionSpec,
) -> Result<Ingested<SourceRecord>, PipelineError> {
    let reader = open(&input.path)?;
    let ingest_err = |error| PipelineError::Ingest {
        path: input.path.clone(),
        error,
    };
    let ingested = match input.format {
        InputFormat::PoiCsv => {
            read_poi_csv(reader, &input.source, projection).map_err(ingest_err)?
        }
        InputFormat::GeoJson => {
            read_records_geojson(reader, &input.source, projection).map_err(ingest_err)?
        }
        InputFormat::OsmXml => {
            let (mut ingested, tally) = read_osm_xml(reader, projection).map_err(ingest_err)?;
            log::info!(
                "{}: {} nodes, {} ways, {} untagged nodes, {} untagged ways, {} unclosed ways",
                input.path.display(),
                tally.nodes,
                tally.ways,
                tally.untagged_nodes,
                tally.untagged_ways,
                tally.unclosed_ways
            );
            // The reader labels elements as OSM; a differently named
            // section keeps its own name.
            for r in &mut ingested.items {
                r.source = input.source.clone();
            }
            ingested
        }
    };
    log_record_errors(&input.path, &ingested);
    Ok(ingested)
}

/// Labels of one source and the number of rows its reader rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRun {
    pub table: LabelTable,
    pub parse_errors: usize,
}

/// Everything shared by the sources of one run.
#[derive(Debug)]
pub struct Run {
    pub config: RunConfig,
    pub tables: Tables,
    pub footprints: Vec<ParcelFootprint>,
    pub index: FootprintIndex,
    pub footprint_errors: usize,
}

impl Run {
    pub fn prepare(config: RunConfig) -> Result<Run, PipelineError> {
        let tables = Tables::load(&config)?;
        let opts = FootprintOptions {
            id_property: config.id_property.clone(),
            class_property: config.class_property.clone(),
            projection: config.projection,
        };
        let path = &config.footprints;
        let ingested =
            read_footprints_geojson(open(path)?, &opts).map_err(|error| PipelineError::Ingest {
                path: path.clone(),
                error,
            })?;
        log_record_errors(path, &ingested);
        let index =
            FootprintIndex::build(&ingested.items).map_err(|error| PipelineError::Index {
                path: path.clone(),
                error,
            })?;
        Ok(Run {
            footprint_errors: ingested.errors.len(),
            footprints: ingested.items,
            index,
            tables,
            config,
        })
    }

    /// Configured sources in configuration order, or the named subset in
    /// the order given.
    pub fn select(&self, names: Option<&[Source]>) -> Result<Vec<&SourceInput>, PipelineError> {
        match names {
            None => Ok(self.config.sources.iter().collect()),
            Some(names) => names
                .iter()
                .map(|s| {
                    self.config.source(s).ok_or_else(|| {
                        PipelineError::Usage(format!("source {s} is not configured"))
                    })
                })
                .collect(),
        }
    }

    pub fn label_source(
        &self,
        input: &SourceInput,
        radius: f64,
    ) -> Result<SourceRun, PipelineError> {
        let ingested = read_source(input, &self.config.projection)?;
        let table = build_label_table(
            &input.source,
            &ingested.items,
            &self.tables.crosswalk,
            &self.tables.taxonomy,
            &self.index,
            &self.footprints,
            radius,
        )?;
        Ok(SourceRun {
            table,
            parse_errors: ingested.errors.len(),
        })
    }

    /// Sources are read and assigned in parallel; results keep input order.
    pub fn label(
        &self,
        inputs: &[&SourceInput],
        radius: f64,
    ) -> Result<Vec<SourceRun>, PipelineError> {
        inputs
            .par_iter()
            .map(|input| self.label_source(input, radius))
            .collect()
    }
}
