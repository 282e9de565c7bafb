//! CSV and Markdown renderings of label tables, validity counts, agreement
//! and evaluation. Both formats take their numbers from the same cell
//! functions, so a ratio never rounds differently between them.
//!
//! Output is UTF-8 with LF line endings and always starts with a header.

use std::fmt::Write as _;

use crate::assign::{LabelTable, ValidityStats};
use crate::ingest::Source;
use crate::metrics::{
    kway_intersection, pairwise_agreement, parcels_with_class, render_fixed2, AgreementCell,
    EvaluationRow,
};
use crate::pipeline::SourceRun;
use crate::taxonomy::{LbcsCode, LbcsTaxonomy, TaxonomyError};

/// Quotes a CSV field when it needs it.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(out: &mut String, fields: &[String]) {
    let quoted: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
    out.push_str(&quoted.join(","));
    out.push('\n');
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let cells: Vec<String> = cells.iter().map(|c| md_escape(c)).collect();
        writeln!(out, "| {} |", cells.join(" | ")).unwrap();
    };
    line(&mut out, header);
    writeln!(out, "|{}", "---|".repeat(header.len())).unwrap();
    for row in rows {
        line(&mut out, row);
    }
    out
}

/// `parcel_id,lbcs,record_ids`, one row per label; ids are `;`-joined.
pub fn labels_csv(table: &LabelTable) -> String {
    let mut out = String::from("parcel_id,lbcs,record_ids\n");
    for (parcel, codes) in &table.labels {
        for &code in codes {
            let ids = table
                .provenance
                .get(&(parcel.clone(), code))
                .map(|ids| ids.iter().cloned().collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            csv_line(&mut out, &[parcel.clone(), code.to_string(), ids]);
        }
    }
    out
}

pub fn stats_csv(stats: &ValidityStats) -> String {
    let mut out = String::from("counter,value\n");
    for (name, value) in stats.counters() {
        writeln!(out, "{name},{value}").unwrap();
    }
    out
}

fn validity_cells(run: &SourceRun) -> Vec<String> {
    let mut cells = vec![run.table.source.to_string()];
    cells.extend(
        run.table
            .stats
            .counters()
            .iter()
            .map(|(_, v)| v.to_string()),
    );
    cells.push(run.parse_errors.to_string());
    cells
}

fn validity_header() -> Vec<String> {
    let mut h = vec!["source".to_string()];
    h.extend(
        ValidityStats::default()
            .counters()
            .iter()
            .map(|(n, _)| n.to_string()),
    );
    h.push("parse_errors".to_string());
    h
}

pub fn validity_csv(runs: &[SourceRun]) -> String {
    let mut out = String::new();
    csv_line(&mut out, &validity_header());
    for run in runs {
        csv_line(&mut out, &validity_cells(run));
    }
    out
}

pub fn validity_md(runs: &[SourceRun]) -> String {
    let rows: Vec<Vec<String>> = runs.iter().map(validity_cells).collect();
    markdown_table(&validity_header(), &rows)
}

/// Per-class counts, every pairwise cell and the k-way intersection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementRow {
    pub class: LbcsCode,
    pub counts: Vec<usize>,
    /// Pairs `(i, j)` with `i < j`, in lexicographic order.
    pub pairs: Vec<AgreementCell>,
    pub kway: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementReport {
    pub sources: Vec<Source>,
    pub rows: Vec<AgreementRow>,
}

/// Classes default to every taxonomy code some table holds after roll-up.
pub fn agreement_report(
    tables: &[LabelTable],
    classes: Option<&[LbcsCode]>,
    t: &LbcsTaxonomy,
) -> Result<AgreementReport, TaxonomyError> {
    let classes: Vec<LbcsCode> = match classes {
        Some(c) => c.to_vec(),
        None => {
            let mut held = Vec::new();
            for code in t.codes() {
                let mut any = false;
                for table in tables {
                    any |= !parcels_with_class(table, code, t)?.is_empty();
                }
                if any {
                    held.push(code);
                }
            }
            held
        }
    };
    let mut rows = Vec::with_capacity(classes.len());
    for class in classes {
        let mut counts = Vec::with_capacity(tables.len());
        for table in tables {
            counts.push(parcels_with_class(table, class, t)?.len());
        }
        let mut pairs = Vec::new();
        for i in 0..tables.len() {
            for j in i + 1..tables.len() {
                pairs.push(pairwise_agreement(&tables[i], &tables[j], class, t)?);
            }
        }
        rows.push(AgreementRow {
            class,
            counts,
            pairs,
            kway: kway_intersection(tables, class, t)?,
        });
    }
    Ok(AgreementReport {
        sources: tables.iter().map(|t| t.source.clone()).collect(),
        rows,
    })
}

fn percent_value(cell: &AgreementCell) -> String {
    cell.percent()
        .map(|r| r.percent_value())
        .unwrap_or_default()
}

/// `class,source_a,source_b,count_a,count_b,intersection,union,percent`;
/// `percent` has two decimals and no sign, and is blank for an empty union.
pub fn agreement_csv(report: &AgreementReport) -> String {
    let mut out =
        String::from("class,source_a,source_b,count_a,count_b,intersection,union,percent\n");
    for row in &report.rows {
        for cell in &row.pairs {
            csv_line(
                &mut out,
                &[
                    cell.class.to_string(),
                    cell.sources[0].to_string(),
                    cell.sources[1].to_string(),
                    cell.counts[0].to_string(),
                    cell.counts[1].to_string(),
                    cell.intersection.to_string(),
                    cell.union.to_string(),
                    percent_value(cell),
                ],
            );
        }
    }
    out
}

/// Wide layout: class, name, one count per source, one `I (P%)` per pair,
/// then the intersection over all sources.
pub fn agreement_md(report: &AgreementReport, t: &LbcsTaxonomy) -> String {
    let mut header = vec!["LBCS".to_string(), "name".to_string()];
    header.extend(report.sources.iter().map(|s| s.to_string()));
    for i in 0..report.sources.len() {
        for j in i + 1..report.sources.len() {
            header.push(format!("{} ∩ {}", report.sources[i], report.sources[j]));
        }
    }
    header.push("all".to_string());
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            let mut cells = vec![
                row.class.to_string(),
                t.get(row.class).map(|e| e.name.clone()).unwrap_or_default(),
            ];
            cells.extend(row.counts.iter().map(|c| c.to_string()));
            cells.extend(row.pairs.iter().map(|c| c.render()));
            cells.push(row.kway.to_string());
            cells
        })
        .collect();
    markdown_table(&header, &rows)
}

/// `class,truth_count,labeled,correct,precision,recall`.
pub fn evaluation_csv(rows: &[EvaluationRow]) -> String {
    let mut out = String::from("class,truth_count,labeled,correct,precision,recall\n");
    for row in rows {
        csv_line(
            &mut out,
            &[
                row.class.name().to_string(),
                row.truth_count.to_string(),
                row.labeled.to_string(),
                row.correct.to_string(),
                render_fixed2(row.precision()),
                render_fixed2(row.recall()),
            ],
        );
    }
    out
}

/// One row per class; results, precision and recall per source.
/// All sources must have been evaluated over the same classes.
pub fn evaluation_md(per_source: &[(Source, Vec<EvaluationRow>)]) -> String {
    let mut header = vec!["class".to_string(), "truth".to_string()];
    for (source, _) in per_source {
        header.push(format!("{source} results"));
        header.push(format!("{source} precision"));
        header.push(format!("{source} recall"));
    }
    let n = per_source.first().map_or(0, |(_, rows)| rows.len());
    let rows: Vec<Vec<String>> = (0..n)
        .map(|k| {
            let first = &per_source[0].1[k];
            let mut cells = vec![
                first.class.name().to_string(),
                first.truth_count.to_string(),
            ];
            for (_, rows) in per_source {
                let row = &rows[k];
                cells.push(row.results());
                cells.push(render_fixed2(row.precision()));
                cells.push(render_fixed2(row.recall()));
            }
            cells
        })
        .collect();
    markdown_table(&header, &rows)
}
