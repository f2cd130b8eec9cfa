//! Cohort-level aggregation of QC records.

mod consistency;
pub mod csv;
mod filter;
mod reference;
pub mod report;
mod summary;
mod upset;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

pub use consistency::{
    default_chain, lr_diff_stats, stage_tests, within_patient_sd, LrPair, PatientSd, StageStats,
    StageTest, FilterStage, SIGNIFICANCE_LEVEL,
};
pub use filter::{parse_heuristic_filters, FilterSpec, Requirement};
pub use reference::{compare_reference, read_reference_csv, ReferenceComparison, ReferenceRange, ReferenceRow};
pub use summary::{summary_by_structure, SummaryRow};
pub use upset::{upset_counts, upset_counts_with, upset_key, UpsetCounts};

use crate::error::{Error, Result};
use crate::heuristics::SegmentQCRecord;
use crate::volume::Laterality;

/// An immutable collection of QC records with unique
/// (seriesId, structure, laterality) keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CohortTable {
    records: Vec<SegmentQCRecord>,
}

impl CohortTable {
    pub fn new(records: Vec<SegmentQCRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert((r.series_id.as_str(), r.structure.as_str(), r.laterality)) {
                return Err(Error::Metadata(format!(
                    "duplicate record for series {} structure {} ({})",
                    r.series_id, r.structure, r.laterality
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::new(csv::read_qc_csv(std::io::BufReader::new(file))?)
    }

    pub fn records(&self) -> &[SegmentQCRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records matching every constraint of `f`, in table order.
    pub fn apply_filters(&self, f: &FilterSpec) -> CohortTable {
        CohortTable {
            records: self.records.iter().filter(|r| f.matches(r)).cloned().collect(),
        }
    }

    /// Sorted structure names.
    pub fn structures(&self) -> Vec<String> {
        let mut names: Vec<String> = self.records.iter().map(|r| r.structure.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn has_structure(&self, structure: &str) -> bool {
        self.records.iter().any(|r| r.structure == structure)
    }

    /// Record indices grouped by (patientId, structure, laterality).
    pub fn index(&self) -> BTreeMap<(&str, &str, Laterality), Vec<usize>> {
        let mut idx: BTreeMap<(&str, &str, Laterality), Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            idx.entry((r.patient_id.as_str(), r.structure.as_str(), r.laterality))
                .or_default()
                .push(i);
        }
        idx
    }
}

/// Convenience wrapper over [`CohortTable::apply_filters`].
pub fn apply_filters(t: &CohortTable, f: &FilterSpec) -> CohortTable {
    t.apply_filters(f)
}
