use std::collections::BTreeMap;

use serde::Serialize;

use super::CohortTable;
use crate::heuristics::{Heuristic, SegmentQCRecord};

/// Counts per pass/fail combination. Keys are four characters over {P, F}
/// in the order completeness, connected, laterality, minVolume; all 16
/// combinations are always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UpsetCounts {
    pub counts: BTreeMap<String, u64>,
}

impl UpsetCounts {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }
}

/// Combination key of a record; a laterality check that did not apply is
/// written as P when `na_as_pass`, F otherwise.
pub fn upset_key(r: &SegmentQCRecord, na_as_pass: bool) -> String {
    Heuristic::ALL
        .iter()
        .map(|&h| if r.outcome(h).unwrap_or(na_as_pass) { 'P' } else { 'F' })
        .collect()
}

fn all_keys() -> impl Iterator<Item = String> {
    (0..16u8).map(|bits| {
        (0..4)
            .map(|k| if bits & (8 >> k) == 0 { 'P' } else { 'F' })
            .collect()
    })
}

/// 16-way partition of the table; not-applicable laterality counts as pass.
pub fn upset_counts(t: &CohortTable) -> UpsetCounts {
    upset_counts_with(t, true)
}

pub fn upset_counts_with(t: &CohortTable, na_as_pass: bool) -> UpsetCounts {
    let mut counts: BTreeMap<String, u64> = all_keys().map(|k| (k, 0)).collect();
    for r in t.records() {
        *counts.get_mut(&upset_key(r, na_as_pass)).expect("key enumerated") += 1;
    }
    UpsetCounts { counts }
}
