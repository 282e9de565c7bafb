use parcelfuse_core::assign::build_label_table;
use parcelfuse_core::geometry::{Point, Polygon};
use parcelfuse_core::ingest::{ParcelFootprint, RecordGeometry, Source, SourceRecord};
use parcelfuse_core::spatial_index::FootprintIndex;
use parcelfuse_core::synthgen::oracle_assign;
use parcelfuse_core::taxonomy::{
    builtin_crosswalk, builtin_taxonomy, CrosswalkTable, LbcsTaxonomy,
};
use proptest::prelude::*;

const KINDS: [&str; 5] = ["bar", "school", "hospital", "heliport", "park"];

fn tables() -> (LbcsTaxonomy, CrosswalkTable) {
    let t = builtin_taxonomy();
    let x = builtin_crosswalk(&t).unwrap();
    (t, x)
}

/// Grid cells, some merged or shrunk, so points land inside, near and far.
fn city() -> impl Strategy<Value = Vec<ParcelFootprint>> {
    proptest::collection::vec((0.5..20.0f64, 0.5..20.0f64), 1..60).prop_map(|sizes| {
        sizes
            .into_iter()
            .enumerate()
            .map(|(k, (w, h))| {
                let (x, y) = ((k % 8) as f64 * 25.0, (k / 8) as f64 * 25.0);
                ParcelFootprint {
                    parcel_id: format!("p{k:03}"),
                    geometry: Polygon::rectangle(x, y, x + w, y + h).unwrap(),
                    authoritative_class: None,
                }
            })
            .collect()
    })
}

fn records() -> impl Strategy<Value = Vec<SourceRecord>> {
    proptest::collection::vec((-20.0..220.0f64, -20.0..220.0f64, 0..KINDS.len()), 0..120).prop_map(
        |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(k, (x, y, kind))| SourceRecord {
                    source: Source::Google,
                    record_id: format!("r{k}"),
                    geometry: RecordGeometry::Point(Point::new(x, y)),
                    tags: vec![("type".into(), KINDS[kind].into())],
                })
                .collect()
        },
    )
}

proptest! {
    #[test]
    fn matches_oracle(fps in city(), recs in records(), radius in 0.0..15.0f64) {
        let (t, x) = tables();
        let idx = FootprintIndex::build(&fps).unwrap();
        let got = build_label_table(&Source::Google, &recs, &x, &t, &idx, &fps, radius).unwrap();
        let want = oracle_assign(&Source::Google, &recs, &fps, &x, radius);
        prop_assert_eq!(&got, &want);
        prop_assert!(got.stats.is_consistent());
    }

    #[test]
    fn larger_radius_never_loses_valid_records(fps in city(), recs in records(), r in 0.0..10.0f64, extra in 0.0..10.0f64) {
        let (t, x) = tables();
        let idx = FootprintIndex::build(&fps).unwrap();
        let small = build_label_table(&Source::Google, &recs, &x, &t, &idx, &fps, r).unwrap();
        let large = build_label_table(&Source::Google, &recs, &x, &t, &idx, &fps, r + extra).unwrap();
        prop_assert!(small.stats.valid_records <= large.stats.valid_records);
        prop_assert_eq!(small.stats.aligned_records, large.stats.aligned_records);
    }

    #[test]
    fn record_order_does_not_matter(fps in city(), recs in records()) {
        let (t, x) = tables();
        let idx = FootprintIndex::build(&fps).unwrap();
        let forward = build_label_table(&Source::Google, &recs, &x, &t, &idx, &fps, 10.0).unwrap();
        let mut reversed = recs.clone();
        reversed.reverse();
        let backward = build_label_table(&Source::Google, &reversed, &x, &t, &idx, &fps, 10.0).unwrap();
        prop_assert_eq!(forward, backward);
    }
}

/// The point sits exactly 5 m from two equal parcels; the smaller id wins in
/// both implementations.
#[test]
fn symmetric_tie_is_deterministic() {
    let (t, x) = tables();
    let fps: Vec<ParcelFootprint> = [("Z", 0.0), ("Y", 20.0)]
        .into_iter()
        .map(|(id, x0)| ParcelFootprint {
            parcel_id: id.into(),
            geometry: Polygon::rectangle(x0, 0.0, x0 + 10.0, 10.0).unwrap(),
            authoritative_class: None,
        })
        .collect();
    let rec = SourceRecord {
        source: Source::Google,
        record_id: "r".into(),
        geometry: RecordGeometry::Point(Point::new(15.0, 5.0)),
        tags: vec![("type".into(), "bar".into())],
    };
    let idx = FootprintIndex::build(&fps).unwrap();
    let got = build_label_table(
        &Source::Google,
        std::slice::from_ref(&rec),
        &x,
        &t,
        &idx,
        &fps,
        10.0,
    )
    .unwrap();
    let want = oracle_assign(&Source::Google, &[rec], &fps, &x, 10.0);
    assert_eq!(got, want);
    assert_eq!(got.labels.keys().collect::<Vec<_>>(), ["Y"]);
}
