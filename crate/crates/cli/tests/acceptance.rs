//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! fails. Run with `cargo test -p parcelfuse --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use parcelfuse_core::assign::{assign_point, assign_polygon, build_label_table, LabelTable};
use parcelfuse_core::geometry::{BoundingBox, Point, Polygon};
use parcelfuse_core::ingest::{
    GeometryKind, ParcelFootprint, RecordGeometry, Source, SourceRecord,
};
use parcelfuse_core::metrics::{
    evaluate, pairwise_agreement, parcels_with_class, render_fixed2, EvaluationRow,
};
use parcelfuse_core::pipeline::{load_config, read_source, Run, Tables};
use parcelfuse_core::report::labels_csv;
use parcelfuse_core::spatial_index::FootprintIndex;
use parcelfuse_core::synthgen::{generate, oracle_assign, SourceNoise, SynthParams};
use parcelfuse_core::taxonomy::{DataSfClass, LbcsCode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ARITHMETIC_LIMIT: Duration = Duration::from_secs(1);
const ORACLE_LIMIT: Duration = Duration::from_secs(60);
const INDEX_LIMIT: Duration = Duration::from_secs(30);
const GOLDEN_LIMIT: Duration = Duration::from_secs(30);

/// Label tables over distinct synthetic parcels with the given counts and
/// overlap, every parcel holding `class`.
fn overlap_tables(
    count_a: usize,
    count_b: usize,
    both: usize,
    class: LbcsCode,
) -> (LabelTable, LabelTable) {
    let a = (0..count_a).map(|k| (format!("p{k}"), class));
    let start = count_a - both;
    let b = (start..start + count_b).map(|k| (format!("p{k}"), class));
    (
        LabelTable::from_labels(Source::Google, a),
        LabelTable::from_labels(Source::Bing, b),
    )
}

fn code(c: u16) -> LbcsCode {
    LbcsCode::new(c).unwrap()
}

fn within(limit: Duration, start: Instant) {
    let took = start.elapsed();
    assert!(took < limit, "took {took:?}, limit {limit:?}");
}

fn iou_arithmetic() {
    let start = Instant::now();
    let t = Tables::builtin().taxonomy;
    let cases = [
        ((586, 167, 113), "113 (17.66%)"),
        ((10481, 8661, 6323), "6323 (49.33%)"),
        ((34871, 397, 16), "16 (0.05%)"),
        ((586, 34871, 28), "28 (0.08%)"),
        ((167, 34871, 7), "7 (0.02%)"),
        ((9, 32, 3), "3 (7.89%)"),
        ((397, 53, 7), "7 (1.58%)"),
    ];
    for ((a, b, i), want) in cases {
        let (ta, tb) = overlap_tables(a, b, i, code(2500));
        let cell = pairwise_agreement(&ta, &tb, code(2000), &t).unwrap();
        assert_eq!(cell.counts, [a, b]);
        assert_eq!(cell.render(), want, "({a},{b},{i})");
    }
    within(ARITHMETIC_LIMIT, start);
}

fn precision_recall_arithmetic() {
    let start = Instant::now();
    let tables = Tables::builtin();
    let cases = [
        ((38, 68, 3701), ("0.56", "0.01")),
        ((47, 53, 508), ("0.89", "0.09")),
        ((28309, 34818, 179028), ("0.81", "0.16")),
        ((1, 12, 359), ("0.08", "0.00")),
    ];
    for ((correct, labeled, truth), (p, r)) in cases {
        let row = EvaluationRow {
            class: DataSfClass::Cie,
            truth_count: truth,
            labeled,
            correct,
        };
        assert_eq!(render_fixed2(row.precision()), p);
        assert_eq!(render_fixed2(row.recall()), r);
    }
    // One triple end to end: the counts come out of evaluate itself.
    let (correct, labeled, truth) = (38, 68, 3701);
    let footprints: Vec<ParcelFootprint> = (0..truth + labeled - correct)
        .map(|k| ParcelFootprint {
            parcel_id: format!("p{k}"),
            geometry: Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(),
            authoritative_class: (k < truth).then_some(DataSfClass::Cie),
        })
        .collect();
    let table = LabelTable::from_labels(
        Source::Bing,
        (truth - correct..truth - correct + labeled).map(|k| (format!("p{k}"), code(6100))),
    );
    let rows = evaluate(&table, &footprints, &tables.authoritative);
    let cie = rows.iter().find(|r| r.class == DataSfClass::Cie).unwrap();
    assert_eq!(cie.to_string(), "38/68, 0.56, 0.01");
    within(ARITHMETIC_LIMIT, start);
}

fn oracle_equivalence() {
    let start = Instant::now();
    let tables = Tables::builtin();
    let sizes = [5, 8, 10, 12, 15, 20, 25, 30, 40, 50];
    let sigmas = [0.0, 3.0, 8.0];
    let gaps = [4.0, 12.0, 25.0];
    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        let n = sizes[i % sizes.len()];
        let params = SynthParams {
            seed: 1000 + i as u64,
            rows: n,
            cols: if i % 2 == 0 { n } else { n.div_ceil(2) },
            parcel_size: [20.0, 10.0, 35.0][i % 3],
            gap: gaps[(i / 3) % 3],
            sources: [
                Source::Google,
                Source::Bing,
                Source::YellowPages,
                Source::Osm,
            ]
            .into_iter()
            .map(|source| SourceNoise {
                source,
                jitter_sigma: sigmas[i % 3],
                drop_rate: 0.1,
                confusion_rate: 0.1,
            })
            .collect(),
            palette: vec![code(1300), code(2500), code(5300), code(6100), code(6500)],
        };
        let out = generate(
            &params,
            &tables.taxonomy,
            &tables.crosswalk,
            &tables.authoritative,
        )
        .unwrap();
        let fixture = dir.path().join(format!("f{i}"));
        out.write_to(&fixture).unwrap();
        let run = Run::prepare(load_config(&fixture.join("run.conf")).unwrap()).unwrap();
        for input in &run.config.sources {
            let records = read_source(input, &run.config.projection).unwrap().items;
            let got = build_label_table(
                &input.source,
                &records,
                &run.tables.crosswalk,
                &run.tables.taxonomy,
                &run.index,
                &run.footprints,
                run.config.radius,
            )
            .unwrap();
            let want = oracle_assign(
                &input.source,
                &records,
                &run.footprints,
                &run.tables.crosswalk,
                run.config.radius,
            );
            assert_eq!(got.labels, want.labels, "fixture {i} {}", input.source);
            assert_eq!(
                got.provenance, want.provenance,
                "fixture {i} {}",
                input.source
            );
            assert_eq!(got.stats, want.stats, "fixture {i} {}", input.source);
        }
    }
    within(ORACLE_LIMIT, start);
}

fn index_completeness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let extent = 10_000.0;
    let footprints: Vec<ParcelFootprint> = (0..100_000)
        .map(|k| {
            let x = rng.random_range(0.0..extent);
            let y = rng.random_range(0.0..extent);
            let w = rng.random_range(2.0..40.0);
            let h = rng.random_range(2.0..40.0);
            ParcelFootprint {
                parcel_id: format!("q{k:06}"),
                geometry: Polygon::rectangle(x, y, x + w, y + h).unwrap(),
                authoritative_class: None,
            }
        })
        .collect();
    let boxes: Vec<BoundingBox> = footprints
        .iter()
        .map(|f| f.geometry.bounding_box())
        .collect();
    let idx = FootprintIndex::build(&footprints).unwrap();
    let brute = |q: &BoundingBox| -> BTreeSet<&str> {
        boxes
            .iter()
            .zip(&footprints)
            .filter(|(b, _)| {
                b.min_x <= q.max_x && q.min_x <= b.max_x && b.min_y <= q.max_y && q.min_y <= b.max_y
            })
            .map(|(_, f)| f.parcel_id.as_str())
            .collect()
    };
    let radius = 10.0;
    for _ in 0..10_000 {
        let p = Point::new(
            rng.random_range(-20.0..extent + 20.0),
            rng.random_range(-20.0..extent + 20.0),
        );
        let q = BoundingBox {
            min_x: p.x - radius,
            min_y: p.y - radius,
            max_x: p.x + radius,
            max_y: p.y + radius,
        };
        assert_eq!(idx.query_point(p, radius), brute(&q), "point {p:?}");
    }
    for _ in 0..1_000 {
        let x = rng.random_range(-50.0..extent);
        let y = rng.random_range(-50.0..extent);
        let q = BoundingBox {
            min_x: x,
            min_y: y,
            max_x: x + rng.random_range(0.0..300.0),
            max_y: y + rng.random_range(0.0..300.0),
        };
        assert_eq!(idx.query_box(&q), brute(&q), "box {q:?}");
    }
    within(INDEX_LIMIT, start);
}

fn square(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> ParcelFootprint {
    ParcelFootprint {
        parcel_id: id.to_string(),
        geometry: Polygon::rectangle(x0, y0, x1, y1).unwrap(),
        authoritative_class: None,
    }
}

fn point_record(id: &str, x: f64, y: f64, kind: &str) -> SourceRecord {
    SourceRecord {
        source: Source::Google,
        record_id: id.to_string(),
        geometry: RecordGeometry::Point(Point::new(x, y)),
        tags: vec![("type".to_string(), kind.to_string())],
    }
}

fn spatial_rules() {
    let tables = Tables::builtin();
    // Containment wins over a nearer-looking neighbour.
    let fps = vec![
        square("A", 0.0, 0.0, 10.0, 10.0),
        square("B", 10.5, 0.0, 20.0, 10.0),
    ];
    let idx = FootprintIndex::build(&fps).unwrap();
    assert_eq!(
        assign_point(&point_record("r", 9.9, 5.0, "bar"), &idx, &fps, 10.0).unwrap(),
        Some("A")
    );
    let fps = vec![
        square("big", 0.0, 0.0, 100.0, 100.0),
        square("small", 40.0, 40.0, 60.0, 60.0),
    ];
    let idx = FootprintIndex::build(&fps).unwrap();
    assert_eq!(
        assign_point(&point_record("r", 50.0, 50.0, "bar"), &idx, &fps, 10.0).unwrap(),
        Some("small")
    );

    // Nearest within 10 m: 8 m to A, 9 m to B.
    let fps = vec![
        square("A", 0.0, 0.0, 10.0, 10.0),
        square("B", 27.0, 0.0, 37.0, 10.0),
    ];
    let idx = FootprintIndex::build(&fps).unwrap();
    assert_eq!(
        assign_point(&point_record("r", 18.0, 5.0, "bar"), &idx, &fps, 10.0).unwrap(),
        Some("A")
    );

    // Beyond 10 m from everything: discarded and counted. Exactly 10 m
    // still counts.
    let fps = vec![square("A", 0.0, 0.0, 10.0, 10.0)];
    let idx = FootprintIndex::build(&fps).unwrap();
    assert_eq!(
        assign_point(&point_record("r", 20.0, 5.0, "bar"), &idx, &fps, 10.0).unwrap(),
        Some("A")
    );
    let far = point_record("far", 22.0, 5.0, "bar");
    assert_eq!(assign_point(&far, &idx, &fps, 10.0).unwrap(), None);
    let near = point_record("near", 15.0, 5.0, "bar");
    let table = build_label_table(
        &Source::Google,
        &[far, near],
        &tables.crosswalk,
        &tables.taxonomy,
        &idx,
        &fps,
        10.0,
    )
    .unwrap();
    assert_eq!(
        (table.stats.valid_records, table.stats.discarded_spatial),
        (1, 1)
    );
    assert_eq!(table.labels["A"], BTreeSet::from([code(2500)]));

    // Polygons label every parcel whose interior they overlap, and no
    // parcel they only touch.
    let fps = vec![
        square("L", 0.0, 0.0, 10.0, 10.0),
        square("R", 10.0, 0.0, 20.0, 10.0),
        square("T", 0.0, 10.0, 10.0, 20.0),
        square("F", 40.0, 40.0, 50.0, 50.0),
    ];
    let idx = FootprintIndex::build(&fps).unwrap();
    let polygon = |x0, y0, x1, y1| SourceRecord {
        source: Source::Osm,
        record_id: "w1".to_string(),
        geometry: RecordGeometry::Polygon(Polygon::rectangle(x0, y0, x1, y1).unwrap()),
        tags: vec![("building".to_string(), "hotel".to_string())],
    };
    assert_eq!(
        assign_polygon(&polygon(5.0, 2.0, 15.0, 8.0), &idx, &fps).unwrap(),
        BTreeSet::from(["L", "R"])
    );
    assert_eq!(
        assign_polygon(&polygon(20.0, 0.0, 30.0, 10.0), &idx, &fps).unwrap(),
        BTreeSet::new()
    );
    assert_eq!(
        assign_polygon(&polygon(10.0, 10.0, 12.0, 12.0), &idx, &fps).unwrap(),
        BTreeSet::new()
    );
    assert_eq!(
        assign_polygon(&polygon(2.0, 2.0, 8.0, 15.0), &idx, &fps).unwrap(),
        BTreeSet::from(["L", "T"])
    );
    let table = build_label_table(
        &Source::Osm,
        &[polygon(5.0, 2.0, 15.0, 8.0)],
        &tables.crosswalk,
        &tables.taxonomy,
        &idx,
        &fps,
        10.0,
    )
    .unwrap();
    assert_eq!(table.labels.keys().collect::<Vec<_>>(), ["L", "R"]);
    assert_eq!(table.labels["R"], BTreeSet::from([code(1300)]));
}

fn hierarchy_rollup() {
    let t = Tables::builtin().taxonomy;
    let codes: Vec<LbcsCode> = t.codes().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for round in 0..20 {
        let mut labels = Vec::new();
        for p in 0..300 {
            for _ in 0..rng.random_range(0..4) {
                labels.push((format!("p{p}"), codes[rng.random_range(0..codes.len())]));
            }
        }
        let table = LabelTable::from_labels(Source::Google, labels);
        for &c in &codes {
            let got = parcels_with_class(&table, c, &t).unwrap();
            let mut family = t.descendants(c);
            family.push(c);
            let want: BTreeSet<&str> = table
                .labels
                .iter()
                .filter(|(_, held)| family.iter().any(|f| held.contains(f)))
                .map(|(id, _)| id.as_str())
                .collect();
            assert_eq!(got, want, "round {round}, code {c}");
            for &child in t.children(c) {
                let sub = parcels_with_class(&table, child, &t).unwrap();
                assert!(sub.is_subset(&got), "round {round}, {child} under {c}");
            }
        }
    }
    // Multi-label parcels make the child counts exceed the parent count.
    let table = LabelTable::from_labels(
        Source::Google,
        [("p".to_string(), code(2100)), ("p".to_string(), code(2500))],
    );
    let parent = parcels_with_class(&table, code(2000), &t).unwrap().len();
    let children: usize = [2100, 2500]
        .iter()
        .map(|&c| parcels_with_class(&table, code(c), &t).unwrap().len())
        .sum();
    assert!(children > parent);
}

fn crosswalk_fidelity() {
    let tables = Tables::builtin();
    let x = &tables.crosswalk;
    let spot: [(Source, GeometryKind, &str, &str, u16); 15] = [
        (Source::Google, GeometryKind::Point, "type", "lodging", 1300),
        (
            Source::Osm,
            GeometryKind::Polygon,
            "building",
            "hotel",
            1300,
        ),
        (Source::Osm, GeometryKind::Point, "amenity", "library", 4200),
        (Source::Bing, GeometryKind::Point, "type", "Hotel", 1300),
        (
            Source::YellowPages,
            GeometryKind::Point,
            "type",
            "lodging",
            1300,
        ),
        (
            Source::Google,
            GeometryKind::Point,
            "type",
            "car_dealer",
            2110,
        ),
        (
            Source::Bing,
            GeometryKind::Point,
            "type",
            "Auto Dealerships",
            2110,
        ),
        (
            Source::YellowPages,
            GeometryKind::Point,
            "type",
            "night club",
            2500,
        ),
        (Source::Google, GeometryKind::Point, "type", "bank", 2200),
        (
            Source::Bing,
            GeometryKind::Point,
            "type",
            "Park or Recreation Area",
            5300,
        ),
        (Source::Osm, GeometryKind::Point, "amenity", "gym", 5300),
        (
            Source::Osm,
            GeometryKind::Polygon,
            "amenity",
            "pharmacy",
            2100,
        ),
        (
            Source::Osm,
            GeometryKind::Point,
            "landuse",
            "recreation",
            5000,
        ),
        (
            Source::Google,
            GeometryKind::Point,
            "type",
            "funeral_home",
            6700,
        ),
        (
            Source::Osm,
            GeometryKind::Polygon,
            "building",
            "church",
            6600,
        ),
    ];
    for (source, kind, key, value, want) in spot {
        let got: Vec<LbcsCode> = x.lookup(&source, kind, key, value).collect();
        assert_eq!(got, [code(want)], "{source} {kind} {key}={value}");
        // Case and underscore spelling do not matter.
        let variant = value.to_uppercase().replace(' ', "_");
        let got: Vec<LbcsCode> = x.lookup(&source, kind, key, &variant).collect();
        assert_eq!(got, [code(want)], "{source} {kind} {key}={variant}");
    }
    // Point and polygon tables differ.
    assert_eq!(
        x.lookup(&Source::Osm, GeometryKind::Point, "amenity", "pharmacy")
            .count(),
        0
    );
    assert_eq!(
        x.lookup(&Source::Osm, GeometryKind::Point, "building", "hotel")
            .count(),
        0
    );

    let expected: BTreeMap<LbcsCode, DataSfClass> = [
        (1100, DataSfClass::Resident),
        (1300, DataSfClass::Visitor),
        (2100, DataSfClass::RetailEnt),
        (5200, DataSfClass::RetailEnt),
        (5300, DataSfClass::RetailEnt),
        (6100, DataSfClass::Cie),
        (6200, DataSfClass::Mips),
        (6300, DataSfClass::Mips),
        (6500, DataSfClass::Med),
        (6600, DataSfClass::Cie),
    ]
    .into_iter()
    .map(|(c, d)| (code(c), d))
    .collect();
    let shipped: BTreeMap<LbcsCode, DataSfClass> = tables.authoritative.iter().collect();
    assert_eq!(shipped, expected);
}

fn golden_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn parcelfuse(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_parcelfuse"))
        .args(args)
        .status()
        .expect("binary runs");
    assert!(status.success(), "parcelfuse {args:?} exited with {status}");
}

fn files_in(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn assert_same_files(got: &Path, want: &Path) {
    let (got, want) = (files_in(got), files_in(want));
    assert_eq!(
        got.keys().collect::<Vec<_>>(),
        want.keys().collect::<Vec<_>>()
    );
    for (name, bytes) in &want {
        assert!(
            &got[name] == bytes,
            "{name} differs from the committed copy"
        );
    }
}

fn golden_run(name: &str) -> PathBuf {
    let golden = golden_dir(name);
    let work = tempfile::tempdir().unwrap().keep();
    let fixture = work.join("fixture");
    let out = work.join("out");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    parcelfuse(&[
        "synth",
        "--config",
        &s(&golden.join("params.conf")),
        "--out",
        &s(&fixture),
    ]);
    assert_same_files(&fixture, &golden.join("fixture"));
    let conf = s(&fixture.join("run.conf"));
    for cmd in ["validate", "assign", "agree", "evaluate"] {
        parcelfuse(&[cmd, "--config", &conf, "--out", &s(&out)]);
    }
    assert_same_files(&out, &golden.join("expected"));

    // The committed label files are what the exhaustive oracle produces.
    let run = Run::prepare(load_config(&fixture.join("run.conf")).unwrap()).unwrap();
    for input in &run.config.sources {
        let records = read_source(input, &run.config.projection).unwrap().items;
        let oracle = oracle_assign(
            &input.source,
            &records,
            &run.footprints,
            &run.tables.crosswalk,
            10.0,
        );
        let committed = fs::read_to_string(
            golden
                .join("expected")
                .join(format!("labels_{}.csv", input.source)),
        )
        .unwrap();
        assert_eq!(labels_csv(&oracle), committed, "{}", input.source);
    }
    fs::remove_dir_all(&work).ok();
    golden
}

fn end_to_end_golden() {
    let start = Instant::now();
    golden_run("noisy");
    let clean = golden_run("clean");
    let expected = clean.join("expected");
    for entry in fs::read_dir(&expected).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let text = fs::read_to_string(&path).unwrap();
        if name.starts_with("evaluation_") {
            for line in text.lines().skip(1) {
                let f: Vec<&str> = line.split(',').collect();
                if f[1] == "0" {
                    assert_eq!((f[2], f[4], f[5]), ("0", "", ""), "{name}: {line}");
                } else {
                    assert_eq!((f[4], f[5]), ("1.00", "1.00"), "{name}: {line}");
                }
            }
        }
        if name == "agreement.csv" {
            let mut rows = 0;
            for line in text.lines().skip(1) {
                assert!(line.ends_with(",100.00"), "{line}");
                rows += 1;
            }
            assert!(rows > 0);
        }
    }
    within(GOLDEN_LIMIT, start);
}

fn main() {
    let criteria: [(&str, fn()); 8] = [
        ("1 IoU arithmetic", iou_arithmetic),
        ("2 precision/recall arithmetic", precision_recall_arithmetic),
        ("3 oracle equivalence", oracle_equivalence),
        ("4 index completeness", index_completeness),
        ("5 spatial rules", spatial_rules),
        ("6 hierarchy roll-up", hierarchy_rollup),
        ("7 crosswalk fidelity", crosswalk_fidelity),
        ("8 end-to-end golden run", end_to_end_golden),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS criterion {name} ({took:.2} s)"),
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {name} ({took:.2} s)");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
