use std::collections::BTreeMap;

use serde::Serialize;

use super::CohortTable;
use crate::heuristics::Heuristic;

/// Pass rate of one heuristic for one structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryRow {
    pub structure: String,
    pub heuristic: Heuristic,
    pub pass: u64,
    pub total: u64,
    /// 100·pass/total; absent when no record was applicable.
    pub pct: Option<f64>,
}

/// Per-structure pass percentages of each heuristic applied independently.
/// Laterality rates are computed over records where the check applied.
/// Rows are sorted by structure, then heuristic in canonical order.
pub fn summary_by_structure(t: &CohortTable) -> Vec<SummaryRow> {
    let mut tallies: BTreeMap<&str, [(u64, u64); 4]> = BTreeMap::new();
    for r in t.records() {
        let entry = tallies.entry(r.structure.as_str()).or_default();
        for (k, &h) in Heuristic::ALL.iter().enumerate() {
            if let Some(pass) = r.outcome(h) {
                entry[k].1 += 1;
                entry[k].0 += pass as u64;
            }
        }
    }
    tallies
        .into_iter()
        .flat_map(|(structure, counts)| {
            Heuristic::ALL.iter().zip(counts).map(move |(&heuristic, (pass, total))| SummaryRow {
                structure: structure.to_string(),
                heuristic,
                pass,
                total,
                pct: (total > 0).then(|| 100.0 * pass as f64 / total as f64),
            })
        })
        .collect()
}
