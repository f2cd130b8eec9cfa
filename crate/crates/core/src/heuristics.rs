//! The four ground-truth-free checks and their per-series evaluation.
//!
//! * completeness: an empty slice remains below and above the segment along
//!   the third (inferior–superior) array axis;
//! * connected: 1 ≤ component count ≤ `max_components`;
//! * laterality: a left structure's center of mass lies at larger LPS x than
//!   its right partner;
//! * minimum volume: volume ≥ `min_volume_ml` (inclusive).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::components::Connectivity;
use crate::error::{Error, Result};
use crate::features::{all_features, SegmentFeatures};
use crate::volume::{Label, LabelVolume, Laterality};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct HeuristicConfig {
    pub min_volume_ml: f64,
    pub max_components: usize,
    pub connectivity: Connectivity,
    pub require_empty_terminal_slices: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            min_volume_ml: 5.0,
            max_components: 1,
            connectivity: Connectivity::TwentySix,
            require_empty_terminal_slices: true,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_volume_ml.is_finite() && self.min_volume_ml > 0.0) {
            return Err(Error::Config(format!(
                "minVolumeMl must be > 0, got {}",
                self.min_volume_ml
            )));
        }
        if self.max_components < 1 {
            return Err(Error::Config("maxComponents must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LateralityOutcome {
    Pass,
    Fail,
    #[serde(rename = "na")]
    NotApplicable,
}

impl LateralityOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            LateralityOutcome::Pass => "pass",
            LateralityOutcome::Fail => "fail",
            LateralityOutcome::NotApplicable => "na",
        }
    }

    pub fn from_bool(pass: bool) -> Self {
        if pass {
            LateralityOutcome::Pass
        } else {
            LateralityOutcome::Fail
        }
    }
}

impl fmt::Display for LateralityOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LateralityOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(LateralityOutcome::Pass),
            "fail" => Ok(LateralityOutcome::Fail),
            "na" => Ok(LateralityOutcome::NotApplicable),
            other => Err(Error::parse("lateralityPass", format!("expected pass|fail|na, got {other:?}"))),
        }
    }
}

/// The measurement columns carried by a QC record. This is the flat
/// projection of [`SegmentFeatures`] that survives CSV serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Measurements {
    pub voxel_count: u64,
    pub volume_ml: f64,
    pub center_of_mass_world: Option<[f64; 3]>,
    pub connected_component_count: usize,
    pub largest_component_voxels: usize,
    pub z_extent: Option<(usize, usize)>,
}

impl From<&SegmentFeatures> for Measurements {
    fn from(f: &SegmentFeatures) -> Self {
        Measurements {
            voxel_count: f.voxel_count,
            volume_ml: f.volume_ml,
            center_of_mass_world: f.center_of_mass_world,
            connected_component_count: f.connected_component_count,
            largest_component_voxels: f.largest_component_voxels(),
            z_extent: f.z_extent,
        }
    }
}

/// One row per segment: identity, measurements, and the four outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SegmentQCRecord {
    pub patient_id: String,
    pub study_id: String,
    pub series_id: String,
    pub acquisition_index: u32,
    pub structure: String,
    pub laterality: Laterality,
    pub measurements: Measurements,
    pub completeness_pass: bool,
    pub connected_pass: bool,
    pub laterality_pass: LateralityOutcome,
    pub min_volume_pass: bool,
}

/// The four checks, in the canonical order used by upset keys and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Heuristic {
    Completeness,
    Connected,
    Laterality,
    MinVolume,
}

impl Heuristic {
    pub const ALL: [Heuristic; 4] = [
        Heuristic::Completeness,
        Heuristic::Connected,
        Heuristic::Laterality,
        Heuristic::MinVolume,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Heuristic::Completeness => "completeness",
            Heuristic::Connected => "connected",
            Heuristic::Laterality => "laterality",
            Heuristic::MinVolume => "minVolume",
        }
    }

    /// Letter used for cumulative filter stages (A = completeness,
    /// B = single component, C = minimum volume, D = laterality).
    pub fn stage_letter(self) -> char {
        match self {
            Heuristic::Completeness => 'A',
            Heuristic::Connected => 'B',
            Heuristic::MinVolume => 'C',
            Heuristic::Laterality => 'D',
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "completeness" | "A" => Ok(Heuristic::Completeness),
            "connected" | "B" => Ok(Heuristic::Connected),
            "minVolume" | "C" => Ok(Heuristic::MinVolume),
            "laterality" | "lateralityCheck" | "D" => Ok(Heuristic::Laterality),
            other => Err(Error::Config(format!("unknown heuristic {other:?}"))),
        }
    }
}

impl SegmentQCRecord {
    /// Outcome of a heuristic as pass/fail; `None` for a laterality check
    /// that did not apply.
    pub fn outcome(&self, h: Heuristic) -> Option<bool> {
        match h {
            Heuristic::Completeness => Some(self.completeness_pass),
            Heuristic::Connected => Some(self.connected_pass),
            Heuristic::MinVolume => Some(self.min_volume_pass),
            Heuristic::Laterality => match self.laterality_pass {
                LateralityOutcome::Pass => Some(true),
                LateralityOutcome::Fail => Some(false),
                LateralityOutcome::NotApplicable => None,
            },
        }
    }

    pub fn passes_all(&self) -> bool {
        Heuristic::ALL.iter().all(|&h| self.outcome(h) != Some(false))
    }
}

fn completeness_from_extent(extent: Option<(usize, usize)>, nz: usize, require_empty: bool) -> bool {
    match extent {
        None => false,
        Some(_) if !require_empty => true,
        Some((lo, hi)) => lo >= 1 && hi + 2 <= nz,
    }
}

/// True iff the segment is nonempty and leaves slice 0 and slice nz−1 empty.
pub fn completeness_check(v: &LabelVolume, label: Label) -> Result<bool> {
    v.require_label(label)?;
    let g = v.geometry();
    let plane = g.dims()[0] * g.dims()[1];
    let mut extent: Option<(usize, usize)> = None;
    for (off, _) in v.voxels().iter().enumerate().filter(|(_, &l)| l == label) {
        let z = off / plane;
        extent = Some(match extent {
            None => (z, z),
            Some((lo, hi)) => (lo.min(z), hi.max(z)),
        });
    }
    Ok(completeness_from_extent(extent, g.dims()[2], true))
}

/// Both sides pass iff left x > right x (strict); ties fail both.
pub fn laterality_check_pair(left_com: [f64; 3], right_com: [f64; 3]) -> (bool, bool) {
    let ok = left_com[0] > right_com[0];
    (ok, ok)
}

pub fn connected_pass(component_count: usize, cfg: &HeuristicConfig) -> bool {
    (1..=cfg.max_components).contains(&component_count)
}

pub fn min_volume_pass(volume_ml: f64, voxel_count: u64, cfg: &HeuristicConfig) -> bool {
    voxel_count > 0 && volume_ml >= cfg.min_volume_ml
}

/// Evaluates every segment of the series. Records are ordered by
/// (structure, laterality).
pub fn evaluate_series(v: &LabelVolume, cfg: &HeuristicConfig) -> Vec<SegmentQCRecord> {
    let features = all_features(v, cfg.connectivity);
    let nz = v.geometry().dims()[2];
    let series = v.series();

    let mut records: Vec<SegmentQCRecord> = v
        .segments()
        .iter()
        .map(|(label, info)| {
            let f = &features[&label];
            let laterality_pass = match info.laterality.opposite() {
                None => LateralityOutcome::NotApplicable,
                Some(opp) => {
                    let partner = v
                        .segments()
                        .find(&info.structure, opp)
                        .and_then(|l| features[&l].center_of_mass_world);
                    match (f.center_of_mass_world, partner) {
                        (None, _) => LateralityOutcome::Fail,
                        (Some(_), None) => LateralityOutcome::NotApplicable,
                        (Some(own), Some(other)) => {
                            let (left, right) = if info.laterality == Laterality::Left {
                                (own, other)
                            } else {
                                (other, own)
                            };
                            LateralityOutcome::from_bool(laterality_check_pair(left, right).0)
                        }
                    }
                }
            };
            SegmentQCRecord {
                patient_id: series.patient_id.clone(),
                study_id: series.study_id.clone(),
                series_id: series.series_id.clone(),
                acquisition_index: series.acquisition_index,
                structure: info.structure.clone(),
                laterality: info.laterality,
                measurements: Measurements::from(f),
                completeness_pass: completeness_from_extent(
                    f.z_extent,
                    nz,
                    cfg.require_empty_terminal_slices,
                ),
                connected_pass: connected_pass(f.connected_component_count, cfg),
                laterality_pass,
                min_volume_pass: min_volume_pass(f.volume_ml, f.voxel_count, cfg),
            }
        })
        .collect();
    records.sort_by(|a, b| (&a.structure, a.laterality).cmp(&(&b.structure, b.laterality)));
    records
}

/// (left − right) / (left + right), a value in (−1, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NormalizedDiff(f64);

impl NormalizedDiff {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn normalized_lr_diff(left_ml: f64, right_ml: f64) -> Result<NormalizedDiff> {
    if !(left_ml.is_finite() && right_ml.is_finite() && left_ml > 0.0 && right_ml > 0.0) {
        return Err(Error::Domain(format!(
            "normalized difference needs positive volumes, got left={left_ml}, right={right_ml}"
        )));
    }
    Ok(NormalizedDiff((left_ml - right_ml) / (left_ml + right_ml)))
}
