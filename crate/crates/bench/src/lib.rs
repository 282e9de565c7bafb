//! Fixtures shared by the benchmarks.

use parcelfuse_core::ingest::{ParcelFootprint, Source, SourceRecord};
use parcelfuse_core::pipeline::Tables;
use parcelfuse_core::synthgen::{generate, SourceNoise, SynthParams};
use parcelfuse_core::taxonomy::LbcsCode;

/// A `side x side` synthetic city with one jittered POI source.
pub fn city(side: usize, tables: &Tables) -> (Vec<ParcelFootprint>, Vec<SourceRecord>) {
    let params = SynthParams {
        seed: 42,
        rows: side,
        cols: side,
        parcel_size: 20.0,
        gap: 4.0,
        sources: vec![SourceNoise {
            source: Source::Google,
            jitter_sigma: 5.0,
            drop_rate: 0.0,
            confusion_rate: 0.1,
        }],
        palette: [1300, 2500, 5300, 6100, 6500]
            .map(|c| LbcsCode::new(c).expect("valid code"))
            .to_vec(),
    };
    let mut out = generate(
        &params,
        &tables.taxonomy,
        &tables.crosswalk,
        &tables.authoritative,
    )
    .expect("valid params");
    let (_, records) = out.records.remove(0);
    (out.footprints, records)
}
