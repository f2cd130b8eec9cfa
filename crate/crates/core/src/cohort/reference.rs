use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{CohortTable, FilterSpec};
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

/// Published or user-supplied volume statistics for one structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReferenceRange {
    pub structure: String,
    pub mean_ml: f64,
    pub sd_ml: f64,
    pub source: String,
}

impl ReferenceRange {
    pub fn validate(&self) -> Result<()> {
        if !self.mean_ml.is_finite() {
            return Err(Error::schema("meanMl", format!("{}: not finite", self.structure)));
        }
        if !(self.sd_ml.is_finite() && self.sd_ml >= 0.0) {
            return Err(Error::schema("sdMl", format!("{}: must be finite and >= 0", self.structure)));
        }
        Ok(())
    }
}

const REFERENCE_HEADER: [&str; 4] = ["structure", "meanMl", "sdMl", "source"];

/// Reads `structure,meanMl,sdMl,source`.
pub fn read_reference_csv<R: Read>(r: R) -> Result<Vec<ReferenceRange>> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers()?.clone();
    for (i, expected) in REFERENCE_HEADER.iter().enumerate() {
        if header.get(i) != Some(*expected) {
            return Err(Error::schema(*expected, format!("expected in header position {i}")));
        }
    }
    if header.len() != REFERENCE_HEADER.len() {
        return Err(Error::schema(&header[REFERENCE_HEADER.len()], "unexpected extra column"));
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row?;
        let num = |idx: usize| -> Result<f64> {
            row[idx]
                .trim()
                .parse()
                .map_err(|_| Error::schema(REFERENCE_HEADER[idx], format!("invalid value {:?}", &row[idx])))
        };
        let range = ReferenceRange {
            structure: row[0].to_string(),
            mean_ml: num(1)?,
            sd_ml: num(2)?,
            source: row[3].to_string(),
        };
        range.validate()?;
        if !seen.insert(range.structure.clone()) {
            return Err(Error::schema("structure", format!("duplicate structure {:?}", range.structure)));
        }
        out.push(range);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReferenceRow {
    pub structure: String,
    pub n: usize,
    pub cohort_mean: f64,
    pub cohort_sd: Option<f64>,
    pub ref_mean: f64,
    pub ref_sd: f64,
    pub mean_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReferenceComparison {
    /// In reference order.
    pub rows: Vec<ReferenceRow>,
    /// True when every pair of compared structures is ordered the same way
    /// by cohort means and by reference means.
    pub monotonic: bool,
    pub omitted: Vec<String>,
}

/// Cohort volume statistics per reference structure over records matching `f`.
/// Structures without matching records are omitted with a warning.
pub fn compare_reference(t: &CohortTable, refs: &[ReferenceRange], f: &FilterSpec) -> Result<ReferenceComparison> {
    if refs.is_empty() {
        return Err(Error::Config("reference table is empty".into()));
    }
    let mut rows = Vec::with_capacity(refs.len());
    let mut omitted = Vec::new();
    for rr in refs {
        rr.validate()?;
        let mut vols: Vec<f64> = t
            .records()
            .iter()
            .filter(|r| r.structure == rr.structure && f.matches(r))
            .map(|r| r.measurements.volume_ml)
            .collect();
        vols.sort_by(f64::total_cmp);
        let Some(cohort_mean) = mean(&vols) else {
            log::warn!("no records for reference structure {:?}; omitted", rr.structure);
            omitted.push(rr.structure.clone());
            continue;
        };
        rows.push(ReferenceRow {
            structure: rr.structure.clone(),
            n: vols.len(),
            cohort_mean,
            cohort_sd: sample_sd(&vols),
            ref_mean: rr.mean_ml,
            ref_sd: rr.sd_ml,
            mean_diff: cohort_mean - rr.mean_ml,
        });
    }
    let monotonic = rows.iter().enumerate().all(|(i, a)| {
        rows[i + 1..].iter().all(|b| {
            let cohort = a.cohort_mean.partial_cmp(&b.cohort_mean);
            let reference = a.ref_mean.partial_cmp(&b.ref_mean);
            cohort.is_some() && cohort == reference
        })
    });
    Ok(ReferenceComparison { rows, monotonic, omitted })
}
