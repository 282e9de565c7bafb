//! LBCS class hierarchy and the crosswalk tables around it.
//!
//! Codes are four-digit integers whose trailing zeros give their level:
//! `X000` is level 1, `XY00` level 2, `XYZ0` level 3. Parents are derived
//! from that arithmetic, never stored.
//!
//! Crosswalks are data files. The shipped copies live under `data/` and are
//! compiled in; the `builtin_*` functions load them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{GeometryKind, Source, SourceRecord};

pub const BUILTIN_TAXONOMY: &str = include_str!("../data/lbcs_taxonomy.csv");
pub const BUILTIN_AUTHORITATIVE: &str = include_str!("../data/authoritative.csv");
pub const BUILTIN_CROSSWALKS: [(&str, &str); 4] = [
    ("google", include_str!("../data/crosswalk_google.csv")),
    ("bing", include_str!("../data/crosswalk_bing.csv")),
    (
        "yellowpages",
        include_str!("../data/crosswalk_yellowpages.csv"),
    ),
    ("osm", include_str!("../data/crosswalk_osm.csv")),
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("line {line}: {value:?} is not a four-digit LBCS code")]
    InvalidCode { line: u64, value: String },
    #[error("line {line}: duplicate code {code}")]
    DuplicateCode { line: u64, code: LbcsCode },
    #[error("missing parent {parent} of {code}")]
    MissingParent { code: LbcsCode, parent: LbcsCode },
    #[error("unknown LBCS code {0}")]
    UnknownCode(LbcsCode),
    #[error("line {line}: unknown geometry kind {value:?}")]
    InvalidGeometryKind { line: u64, value: String },
    #[error("line {line}: {message}")]
    InvalidRow { line: u64, message: String },
    #[error("line {line}: crosswalk code {code} is not in the taxonomy")]
    CodeNotInTaxonomy { line: u64, code: LbcsCode },
    #[error("line {line}: duplicate crosswalk key {source_name}/{kind}/{key}={value}")]
    DuplicateRow {
        line: u64,
        source_name: String,
        kind: String,
        key: String,
        value: String,
    },
    #[error("line {line}: unknown authoritative class {value:?}")]
    UnknownClass { line: u64, value: String },
    #[error("line {line}: code {code} mapped twice")]
    DuplicateMapping { line: u64, code: LbcsCode },
    #[error("CSV error: {0}")]
    Csv(String),
}

impl From<csv::Error> for TaxonomyError {
    fn from(e: csv::Error) -> Self {
        TaxonomyError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LbcsCode(u16);

impl LbcsCode {
    /// Accepts 1000..=9990 in steps of ten.
    pub fn new(code: u16) -> Option<Self> {
        ((1000..=9990).contains(&code) && code.is_multiple_of(10)).then_some(LbcsCode(code))
    }

    pub fn value(self) -> u16 {
        self.0
    }

    pub fn level(self) -> u8 {
        if self.0.is_multiple_of(1000) {
            1
        } else if self.0.is_multiple_of(100) {
            2
        } else {
            3
        }
    }

    pub fn parent(self) -> Option<LbcsCode> {
        match self.level() {
            1 => None,
            2 => Some(LbcsCode(self.0 / 1000 * 1000)),
            _ => Some(LbcsCode(self.0 / 100 * 100)),
        }
    }

    /// True when `self` is `other` or one of its ancestors.
    pub fn covers(self, other: LbcsCode) -> bool {
        let mut cur = Some(other);
        while let Some(c) = cur {
            if c == self {
                return true;
            }
            cur = c.parent();
        }
        false
    }
}

impl fmt::Display for LbcsCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{0:?} is not a four-digit LBCS code")]
pub struct InvalidCode(pub String);

impl FromStr for LbcsCode {
    type Err = InvalidCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.len() != 4 || !t.bytes().all(|b| b.is_ascii_digit()) {
            return Err(InvalidCode(s.to_string()));
        }
        t.parse::<u16>()
            .ok()
            .and_then(LbcsCode::new)
            .ok_or_else(|| InvalidCode(s.to_string()))
    }
}

/// The ten land-use classes of the authoritative parcel layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataSfClass {
    Cie,
    RetailEnt,
    Visitor,
    Med,
    Mips,
    Resident,
    Mixed,
    Mixres,
    Pdr,
    Vacant,
}

impl DataSfClass {
    pub const ALL: [DataSfClass; 10] = [
        DataSfClass::Cie,
        DataSfClass::RetailEnt,
        DataSfClass::Visitor,
        DataSfClass::Med,
        DataSfClass::Mips,
        DataSfClass::Resident,
        DataSfClass::Mixed,
        DataSfClass::Mixres,
        DataSfClass::Pdr,
        DataSfClass::Vacant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DataSfClass::Cie => "CIE",
            DataSfClass::Med => "MED",
            DataSfClass::Mips => "MIPS",
            DataSfClass::Mixed => "MIXED",
            DataSfClass::Mixres => "MIXRES",
            DataSfClass::Pdr => "PDR",
            DataSfClass::RetailEnt => "RETAIL/ENT",
            DataSfClass::Resident => "RESIDENT",
            DataSfClass::Visitor => "VISITOR",
            DataSfClass::Vacant => "VACANT",
        }
    }
}

impl fmt::Display for DataSfClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown land-use class {0:?}")]
pub struct UnknownClass(pub String);

impl FromStr for DataSfClass {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        DataSfClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyEntry {
    pub code: LbcsCode,
    pub name: String,
    pub parent: Option<LbcsCode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LbcsTaxonomy {
    entries: BTreeMap<LbcsCode, TaxonomyEntry>,
    children: BTreeMap<LbcsCode, Vec<LbcsCode>>,
}

/// Level and ancestor chain of a code, nearest ancestor first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub level: u8,
    pub ancestors: Vec<LbcsCode>,
}

impl LbcsTaxonomy {
    pub fn codes(&self) -> impl Iterator<Item = LbcsCode> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TaxonomyEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, code: LbcsCode) -> bool {
        self.entries.contains_key(&code)
    }

    pub fn get(&self, code: LbcsCode) -> Option<&TaxonomyEntry> {
        self.entries.get(&code)
    }

    pub fn resolve(&self, code: LbcsCode) -> Result<Resolved, TaxonomyError> {
        let entry = self
            .entries
            .get(&code)
            .ok_or(TaxonomyError::UnknownCode(code))?;
        let mut ancestors = Vec::new();
        let mut cur = entry.parent;
        while let Some(c) = cur {
            ancestors.push(c);
            cur = self.entries[&c].parent;
        }
        Ok(Resolved {
            level: code.level(),
            ancestors,
        })
    }

    pub fn children(&self, code: LbcsCode) -> &[LbcsCode] {
        self.children.get(&code).map_or(&[], Vec::as_slice)
    }

    /// All codes strictly below `code`.
    pub fn descendants(&self, code: LbcsCode) -> Vec<LbcsCode> {
        let mut out = Vec::new();
        let mut stack = self.children(code).to_vec();
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend_from_slice(self.children(c));
        }
        out.sort();
        out
    }

    fn from_entries(
        rows: impl IntoIterator<Item = (LbcsCode, String)>,
    ) -> Result<Self, TaxonomyError> {
        let mut entries = BTreeMap::new();
        for (code, name) in rows {
            entries.insert(
                code,
                TaxonomyEntry {
                    code,
                    name,
                    parent: code.parent(),
                },
            );
        }
        let mut children: BTreeMap<LbcsCode, Vec<LbcsCode>> = BTreeMap::new();
        for entry in entries.values() {
            if let Some(parent) = entry.parent {
                if !entries.contains_key(&parent) {
                    return Err(TaxonomyError::MissingParent {
                        code: entry.code,
                        parent,
                    });
                }
                children.entry(parent).or_default().push(entry.code);
            }
        }
        Ok(LbcsTaxonomy { entries, children })
    }
}

fn csv_reader(input: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn line_of(row: &csv::StringRecord) -> u64 {
    row.position().map_or(0, |p| p.line())
}

/// Loads a `code,name` table.
pub fn load_taxonomy(input: impl Read) -> Result<LbcsTaxonomy, TaxonomyError> {
    let mut reader = csv_reader(input);
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for row in reader.records() {
        let row = row?;
        let line = line_of(&row);
        let raw = row.get(0).unwrap_or("");
        let code: LbcsCode = raw.parse().map_err(|_| TaxonomyError::InvalidCode {
            line,
            value: raw.to_string(),
        })?;
        if !seen.insert(code) {
            return Err(TaxonomyError::DuplicateCode { line, code });
        }
        rows.push((code, row.get(1).unwrap_or("").to_string()));
    }
    LbcsTaxonomy::from_entries(rows)
}

pub fn builtin_taxonomy() -> LbcsTaxonomy {
    load_taxonomy(BUILTIN_TAXONOMY.as_bytes()).expect("shipped taxonomy is valid")
}

/// Canonical form used for crosswalk matching: trimmed, lowercase,
/// underscores read as spaces, runs of whitespace collapsed.
pub fn normalize_value(raw: &str) -> String {
    raw.to_lowercase()
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KindFilter {
    Point,
    Polygon,
    Any,
}

impl KindFilter {
    pub fn matches(self, kind: GeometryKind) -> bool {
        matches!(
            (self, kind),
            (KindFilter::Any, _)
                | (KindFilter::Point, GeometryKind::Point)
                | (KindFilter::Polygon, GeometryKind::Polygon)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KindFilter::Point => "point",
            KindFilter::Polygon => "polygon",
            KindFilter::Any => "any",
        }
    }
}

impl FromStr for KindFilter {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "point" => Ok(KindFilter::Point),
            "polygon" => Ok(KindFilter::Polygon),
            "any" => Ok(KindFilter::Any),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CrosswalkRow {
    pub source: Source,
    pub kind: KindFilter,
    pub key: String,
    pub value: String,
    pub lbcs: LbcsCode,
}

/// Raw `(source, geometry kind, key, value)` tags to LBCS codes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CrosswalkTable {
    rows: Vec<CrosswalkRow>,
    lookup: HashMap<(Source, String, String), Vec<(KindFilter, LbcsCode)>>,
}

impl CrosswalkTable {
    pub fn rows(&self) -> &[CrosswalkRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends rows from a `source,geometry_kind,key,value,lbcs` CSV. Every
    /// code must exist in `taxonomy`; keys must stay unique after
    /// normalization.
    pub fn extend_from_csv(
        &mut self,
        input: impl Read,
        taxonomy: &LbcsTaxonomy,
    ) -> Result<(), TaxonomyError> {
        let mut reader = csv_reader(input);
        for row in reader.records() {
            let row = row?;
            let line = line_of(&row);
            if row.len() != 5 {
                return Err(TaxonomyError::InvalidRow {
                    line,
                    message: format!("expected 5 fields, found {}", row.len()),
                });
            }
            let source: Source = row[0].parse().map_err(|_| TaxonomyError::InvalidRow {
                line,
                message: format!("invalid source {:?}", &row[0]),
            })?;
            let kind: KindFilter =
                row[1]
                    .parse()
                    .map_err(|_| TaxonomyError::InvalidGeometryKind {
                        line,
                        value: row[1].to_string(),
                    })?;
            let lbcs: LbcsCode = row[4].parse().map_err(|_| TaxonomyError::InvalidCode {
                line,
                value: row[4].to_string(),
            })?;
            if !taxonomy.contains(lbcs) {
                return Err(TaxonomyError::CodeNotInTaxonomy { line, code: lbcs });
            }
            let key = normalize_value(&row[2]);
            let value = normalize_value(&row[3]);
            if key.is_empty() || value.is_empty() {
                return Err(TaxonomyError::InvalidRow {
                    line,
                    message: "empty key or value".to_string(),
                });
            }
            let slot = self
                .lookup
                .entry((source.clone(), key.clone(), value.clone()))
                .or_default();
            if slot.iter().any(|(k, _)| *k == kind) {
                return Err(TaxonomyError::DuplicateRow {
                    line,
                    source_name: source.to_string(),
                    kind: kind.as_str().to_string(),
                    key,
                    value,
                });
            }
            slot.push((kind, lbcs));
            self.rows.push(CrosswalkRow {
                source,
                kind,
                key: row[2].to_string(),
                value: row[3].to_string(),
                lbcs,
            });
        }
        Ok(())
    }

    pub fn load(input: impl Read, taxonomy: &LbcsTaxonomy) -> Result<Self, TaxonomyError> {
        let mut table = CrosswalkTable::default();
        table.extend_from_csv(input, taxonomy)?;
        Ok(table)
    }

    /// Codes for one tag of a record of the given source and kind.
    pub fn lookup(
        &self,
        source: &Source,
        kind: GeometryKind,
        key: &str,
        value: &str,
    ) -> impl Iterator<Item = LbcsCode> + '_ {
        self.lookup
            .get(&(source.clone(), normalize_value(key), normalize_value(value)))
            .into_iter()
            .flatten()
            .filter(move |(filter, _)| filter.matches(kind))
            .map(|&(_, code)| code)
    }

    /// Union of the codes matched by any of the record's tags. Empty means
    /// the record carries nothing relevant.
    pub fn align(&self, record: &SourceRecord) -> BTreeSet<LbcsCode> {
        let kind = record.geometry.kind();
        record
            .tags
            .iter()
            .flat_map(|(k, v)| self.lookup(&record.source, kind, k, v))
            .collect()
    }
}

/// All four shipped crosswalks in one table.
pub fn builtin_crosswalk(taxonomy: &LbcsTaxonomy) -> Result<CrosswalkTable, TaxonomyError> {
    let mut table = CrosswalkTable::default();
    for (_, text) in BUILTIN_CROSSWALKS {
        table.extend_from_csv(text.as_bytes(), taxonomy)?;
    }
    Ok(table)
}

/// LBCS codes to authoritative classes. Unmapped codes are left out of
/// evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuthoritativeCrosswalk {
    map: BTreeMap<LbcsCode, DataSfClass>,
}

impl AuthoritativeCrosswalk {
    /// Loads an `lbcs,datasf` CSV.
    pub fn load(input: impl Read, taxonomy: &LbcsTaxonomy) -> Result<Self, TaxonomyError> {
        let mut reader = csv_reader(input);
        let mut map = BTreeMap::new();
        for row in reader.records() {
            let row = row?;
            let line = line_of(&row);
            let raw = row.get(0).unwrap_or("");
            let code: LbcsCode = raw.parse().map_err(|_| TaxonomyError::InvalidCode {
                line,
                value: raw.to_string(),
            })?;
            if !taxonomy.contains(code) {
                return Err(TaxonomyError::CodeNotInTaxonomy { line, code });
            }
            let raw_class = row.get(1).unwrap_or("");
            let class: DataSfClass =
                raw_class.parse().map_err(|_| TaxonomyError::UnknownClass {
                    line,
                    value: raw_class.to_string(),
                })?;
            if map.insert(code, class).is_some() {
                return Err(TaxonomyError::DuplicateMapping { line, code });
            }
        }
        Ok(AuthoritativeCrosswalk { map })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (LbcsCode, DataSfClass)>) -> Self {
        AuthoritativeCrosswalk {
            map: pairs.into_iter().collect(),
        }
    }

    pub fn to_authoritative(&self, code: LbcsCode) -> Option<DataSfClass> {
        self.map.get(&code).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LbcsCode, DataSfClass)> + '_ {
        self.map.iter().map(|(&c, &d)| (c, d))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Distinct target classes in [`DataSfClass::ALL`] order.
    pub fn classes(&self) -> Vec<DataSfClass> {
        let targets: BTreeSet<DataSfClass> = self.map.values().copied().collect();
        targets.into_iter().collect()
    }
}

pub fn builtin_authoritative(taxonomy: &LbcsTaxonomy) -> AuthoritativeCrosswalk {
    AuthoritativeCrosswalk::load(BUILTIN_AUTHORITATIVE.as_bytes(), taxonomy)
        .expect("shipped authoritative map is valid")
}
