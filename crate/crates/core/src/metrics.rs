//! Agreement between sources and accuracy against authoritative classes.
//!
//! Ratios are kept as integer fractions and only rounded when rendered, so
//! the two-decimal strings are exact round-half-up values.

use std::collections::BTreeSet;
use std::fmt;

use crate::assign::LabelTable;
use crate::ingest::{ParcelFootprint, Source};
use crate::taxonomy::{AuthoritativeCrosswalk, DataSfClass, LbcsCode, LbcsTaxonomy, TaxonomyError};

/// A count ratio; `None` from the constructors when the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Option<Ratio> {
        (den > 0).then_some(Ratio { num, den })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `num/den` scaled by `scale`, rounded half up to an integer.
    fn rounded(&self, scale: u64) -> u64 {
        let n = self.num as u128 * scale as u128;
        let d = self.den as u128;
        ((2 * n + d) / (2 * d)) as u64
    }

    /// Two decimals, e.g. `0.56`.
    pub fn fixed2(&self) -> String {
        hundredths(self.rounded(100))
    }

    /// Percentage with two decimals and no sign, e.g. `17.66`.
    pub fn percent_value(&self) -> String {
        hundredths(self.rounded(10_000))
    }

    /// Percentage with two decimals, e.g. `17.66%`.
    pub fn percent(&self) -> String {
        format!("{}%", self.percent_value())
    }
}

fn hundredths(v: u64) -> String {
    format!("{}.{:02}", v / 100, v % 100)
}

/// Blank for undefined ratios.
pub fn render_fixed2(r: Option<Ratio>) -> String {
    r.map(|r| r.fixed2()).unwrap_or_default()
}

pub fn render_percent(r: Option<Ratio>) -> String {
    r.map(|r| r.percent()).unwrap_or_default()
}

/// Parcels labeled with `code` or any of its descendants.
pub fn parcels_with_class<'a>(
    table: &'a LabelTable,
    code: LbcsCode,
    t: &LbcsTaxonomy,
) -> Result<BTreeSet<&'a str>, TaxonomyError> {
    if !t.contains(code) {
        return Err(TaxonomyError::UnknownCode(code));
    }
    Ok(table
        .labels
        .iter()
        .filter(|(_, codes)| codes.iter().any(|&c| code.covers(c)))
        .map(|(id, _)| id.as_str())
        .collect())
}

/// Overlap of two or more sources for one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementCell {
    pub class: LbcsCode,
    pub sources: Vec<Source>,
    /// Parcel counts per source, aligned with `sources`.
    pub counts: Vec<usize>,
    pub intersection: usize,
    pub union: usize,
}

impl AgreementCell {
    /// Intersection over union; `None` when neither source has the class.
    pub fn percent(&self) -> Option<Ratio> {
        Ratio::new(self.intersection as u64, self.union as u64)
    }

    /// `I (P%)`, or blank when the union is empty.
    pub fn render(&self) -> String {
        match self.percent() {
            Some(r) => format!("{} ({})", self.intersection, r.percent()),
            None => String::new(),
        }
    }
}

pub fn pairwise_agreement(
    a: &LabelTable,
    b: &LabelTable,
    code: LbcsCode,
    t: &LbcsTaxonomy,
) -> Result<AgreementCell, TaxonomyError> {
    let pa = parcels_with_class(a, code, t)?;
    let pb = parcels_with_class(b, code, t)?;
    Ok(AgreementCell {
        class: code,
        sources: vec![a.source.clone(), b.source.clone()],
        counts: vec![pa.len(), pb.len()],
        intersection: pa.intersection(&pb).count(),
        union: pa.union(&pb).count(),
    })
}

/// Parcels carrying the class in every table.
pub fn kway_intersection(
    tables: &[LabelTable],
    code: LbcsCode,
    t: &LbcsTaxonomy,
) -> Result<usize, TaxonomyError> {
    let mut iter = tables.iter();
    let Some(first) = iter.next() else {
        return Ok(0);
    };
    let mut common = parcels_with_class(first, code, t)?;
    for table in iter {
        let next = parcels_with_class(table, code, t)?;
        common.retain(|id| next.contains(id));
    }
    Ok(common.len())
}

/// Authoritative class a held label maps to. Level-3 codes fall back to
/// their level-2 parent; level-1 codes are never pushed down.
pub fn authoritative_for(code: LbcsCode, a: &AuthoritativeCrosswalk) -> Option<DataSfClass> {
    a.to_authoritative(code).or_else(|| {
        if code.level() == 3 {
            code.parent().and_then(|p| a.to_authoritative(p))
        } else {
            None
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationRow {
    pub class: DataSfClass,
    pub truth_count: usize,
    pub labeled: usize,
    pub correct: usize,
}

impl EvaluationRow {
    pub fn precision(&self) -> Option<Ratio> {
        Ratio::new(self.correct as u64, self.labeled as u64)
    }

    pub fn recall(&self) -> Option<Ratio> {
        Ratio::new(self.correct as u64, self.truth_count as u64)
    }

    /// `correct/labeled`.
    pub fn results(&self) -> String {
        format!("{}/{}", self.correct, self.labeled)
    }
}

/// One row per class in the crosswalk's range. A parcel is labeled `D` when
/// any of its codes maps to `D`, so a multi-class parcel can be correct for
/// one class and wrong for another.
pub fn evaluate(
    table: &LabelTable,
    truth: &[ParcelFootprint],
    a: &AuthoritativeCrosswalk,
) -> Vec<EvaluationRow> {
    a.classes()
        .into_iter()
        .map(|class| {
            let truth_ids: BTreeSet<&str> = truth
                .iter()
                .filter(|f| f.authoritative_class == Some(class))
                .map(|f| f.parcel_id.as_str())
                .collect();
            let labeled: BTreeSet<&str> = table
                .labels
                .iter()
                .filter(|(_, codes)| {
                    codes
                        .iter()
                        .any(|&c| authoritative_for(c, a) == Some(class))
                })
                .map(|(id, _)| id.as_str())
                .collect();
            EvaluationRow {
                class,
                truth_count: truth_ids.len(),
                labeled: labeled.len(),
                correct: labeled.intersection(&truth_ids).count(),
            }
        })
        .collect()
}

impl fmt::Display for EvaluationRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}, {}, {}",
            self.results(),
            render_fixed2(self.precision()),
            render_fixed2(self.recall())
        )
    }
}
