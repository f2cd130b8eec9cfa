//! Consistency analyses: within-patient volume spread and left/right
//! symmetry under cumulative filter stages.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{CohortTable, FilterSpec};
use crate::error::{Error, Result};
use crate::heuristics::{normalized_lr_diff, Heuristic, SegmentQCRecord};
use crate::mixed::fit_random_intercept;
use crate::stats::{mean, sample_sd};
use crate::volume::Laterality;

/// Threshold for the `isSignificant` column of stage tests.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PatientSd {
    pub patient_id: String,
    pub n: usize,
    pub sd: f64,
}

/// Sample SD of volumeMl per patient over records matching the structure,
/// optional laterality and `f`. Patients with fewer than two records are
/// left out. Sorted by patient id.
pub fn within_patient_sd(
    t: &CohortTable,
    structure: &str,
    laterality: Option<Laterality>,
    f: &FilterSpec,
) -> Vec<PatientSd> {
    let mut by_patient: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in t.records() {
        if r.structure == structure && laterality.is_none_or(|l| l == r.laterality) && f.matches(r) {
            by_patient
                .entry(r.patient_id.as_str())
                .or_default()
                .push(r.measurements.volume_ml);
        }
    }
    by_patient
        .into_iter()
        .filter_map(|(patient, mut vols)| {
            // Order-independent summation.
            vols.sort_by(f64::total_cmp);
            sample_sd(&vols).map(|sd| PatientSd {
                patient_id: patient.to_string(),
                n: vols.len(),
                sd,
            })
        })
        .collect()
}

/// One step of a cumulative filter chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStage {
    pub name: String,
    pub filter: FilterSpec,
}

impl FilterStage {
    pub fn heuristic(h: Heuristic) -> Self {
        FilterStage {
            name: h.stage_letter().to_string(),
            filter: FilterSpec::pass(h),
        }
    }
}

/// A = completeness, B = single component, C = minimum volume, D = laterality.
pub fn default_chain() -> Vec<FilterStage> {
    [
        Heuristic::Completeness,
        Heuristic::Connected,
        Heuristic::MinVolume,
        Heuristic::Laterality,
    ]
    .into_iter()
    .map(FilterStage::heuristic)
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LrPair {
    pub series_id: String,
    pub patient_id: String,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageStats {
    /// "0" for unfiltered data, then the concatenated stage names ("A", "AB", ...).
    pub stage: String,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub pairs: Vec<LrPair>,
}

/// Normalized left/right volume difference per cumulative filter stage.
///
/// Stage `k` applies the heuristic constraints of `chain[0..k]`; a series
/// contributes only when both sides are present, have nonzero volume, and
/// survive the stage.
pub fn lr_diff_stats(t: &CohortTable, structure: &str, chain: &[FilterStage]) -> Result<Vec<StageStats>> {
    let mut sides: BTreeMap<&str, [Option<&SegmentQCRecord>; 2]> = BTreeMap::new();
    let (mut any_left, mut any_right) = (false, false);
    for r in t.records().iter().filter(|r| r.structure == structure) {
        let slot = match r.laterality {
            Laterality::Left => {
                any_left = true;
                0
            }
            Laterality::Right => {
                any_right = true;
                1
            }
            Laterality::None => continue,
        };
        sides.entry(r.series_id.as_str()).or_default()[slot] = Some(r);
    }
    if !(any_left && any_right) {
        return Err(Error::Domain(format!("structure {structure:?} has no left/right pairs")));
    }
    let complete: Vec<(&SegmentQCRecord, &SegmentQCRecord)> = sides
        .values()
        .filter_map(|s| Some((s[0]?, s[1]?)))
        .filter(|(l, r)| l.measurements.volume_ml > 0.0 && r.measurements.volume_ml > 0.0)
        .collect();

    let mut stages = Vec::with_capacity(chain.len() + 1);
    let mut cumulative = FilterSpec::new();
    let mut name = String::new();
    for k in 0..=chain.len() {
        if k > 0 {
            let step = &chain[k - 1];
            let heuristic_only = FilterSpec {
                structure: None,
                laterality: None,
                ..step.filter.clone()
            };
            cumulative = cumulative.and(&heuristic_only)?;
            name.push_str(&step.name);
        }
        let pairs: Vec<LrPair> = complete
            .iter()
            .filter(|(l, r)| cumulative.matches(l) && cumulative.matches(r))
            .map(|(l, r)| LrPair {
                series_id: l.series_id.clone(),
                patient_id: l.patient_id.clone(),
                diff: normalized_lr_diff(l.measurements.volume_ml, r.measurements.volume_ml)
                    .expect("positive volumes")
                    .value(),
            })
            .collect();
        let diffs: Vec<f64> = pairs.iter().map(|p| p.diff).collect();
        stages.push(StageStats {
            stage: if k == 0 { "0".to_string() } else { name.clone() },
            n: pairs.len(),
            mean: mean(&diffs),
            sd: sample_sd(&diffs),
            pairs,
        });
    }
    Ok(stages)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageTest {
    /// e.g. "0-A".
    pub stage_pair: String,
    pub beta1: Option<f64>,
    pub wald_z: Option<f64>,
    pub p_value: Option<f64>,
    pub is_significant: bool,
}

/// Mixed-model comparison of two stages.
///
/// The response is the absolute normalized difference, the fixed effect is
/// a 0/1 indicator of the later stage, and the patient is a random
/// intercept. `pairs` index into `stages`; by default every consecutive pair
/// plus (first, last). A stage pair whose model cannot be fitted yields
/// empty estimates.
pub fn stage_tests(stages: &[StageStats], pairs: Option<&[(usize, usize)]>) -> Vec<StageTest> {
    let default: Vec<(usize, usize)> = {
        let mut v: Vec<(usize, usize)> = (1..stages.len()).map(|k| (k - 1, k)).collect();
        if stages.len() > 2 {
            v.push((0, stages.len() - 1));
        }
        v
    };
    let pairs = pairs.unwrap_or(&default);
    pairs
        .iter()
        .map(|&(a, b)| {
            let (sa, sb) = (&stages[a], &stages[b]);
            let mut y = Vec::with_capacity(sa.n + sb.n);
            let mut x = Vec::with_capacity(sa.n + sb.n);
            let mut g = Vec::with_capacity(sa.n + sb.n);
            for (stage, indicator) in [(sa, 0.0), (sb, 1.0)] {
                for p in &stage.pairs {
                    y.push(p.diff.abs());
                    x.push(indicator);
                    g.push(p.patient_id.as_str());
                }
            }
            let fit = fit_random_intercept(&y, &g, &x).ok();
            StageTest {
                stage_pair: format!("{}-{}", sa.stage, sb.stage),
                beta1: fit.as_ref().map(|f| f.beta[1]),
                wald_z: fit.as_ref().map(|f| f.wald_z),
                p_value: fit.as_ref().map(|f| f.p_value),
                is_significant: fit.as_ref().is_some_and(|f| f.p_value < SIGNIFICANCE_LEVEL),
            }
        })
        .collect()
}
