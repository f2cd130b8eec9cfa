//! Synthetic label-volume cohorts with a ground-truth defect log.
//!
//! Each structure is an ellipsoid or box placed relative to the volume
//! centre (world origin at the centre voxel, LPS axes). Every structure owns
//! a reserved xy column (its bounding box at the largest possible scale plus
//! a 5-voxel margin, spanning all slices). Columns are pairwise disjoint, so
//! defects applied to one segment cannot touch another.
//!
//! Clean segments pass all four checks by construction. Each defect trips
//! exactly one check:
//!
//! - truncation pushes the segment through slice 0 or the last slice
//!   (completeness),
//! - fragment adds 1 or 2 detached 2×2×2 clusters (connected),
//! - swap exchanges the left/right sidecar entries of a pair (laterality,
//!   both members),
//! - shrink rescales the shape to about `shrinkTargetMl` (minimum volume).
//!
//! Swaps are drawn first, once per pair. Segments of a swapped pair get no
//! other defect. Every other segment then draws one uniform `u` and gets
//! truncation if `u < t`, fragment if `u < t + f`, shrink if `u < t + f + s`.

mod defects;
mod rng;
mod shape;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use defects::{
    inject_fragment, inject_shrink, inject_swap, inject_truncation, DefectEntry, DefectLog, DefectType,
    TruncationSide, DEFECT_LOG_HEADER,
};
pub use rng::PhantomRng;
pub use shape::{PlacedShape, Shape, VoxelBox};

use crate::error::{Error, Result};
use crate::features::MM3_PER_ML;
use crate::geometry::VolumeGeometry;
use crate::io::write_label_volume;
use crate::volume::{Label, LabelVolume, Laterality, SegmentInfo, SegmentMap, SeriesInfo};
use rng::StreamKind;

const RESERVED_MARGIN_VOXELS: i64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StructureSpec {
    pub name: String,
    pub laterality: Laterality,
    pub shape: Shape,
    pub semi_axes_mm: [f64; 3],
    pub center_offset_mm: [f64; 3],
}

impl StructureSpec {
    fn new(name: &str, laterality: Laterality, shape: Shape, semi: [f64; 3], center: [f64; 3]) -> Self {
        StructureSpec {
            name: name.to_string(),
            laterality,
            shape,
            semi_axes_mm: semi,
            center_offset_mm: center,
        }
    }

    fn placed(&self, scale: f64) -> PlacedShape {
        PlacedShape {
            shape: self.shape,
            center: self.center_offset_mm,
            semi_axes: self.semi_axes_mm.map(|a| a * scale),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DefectRates {
    pub truncation: f64,
    pub fragment: f64,
    pub swap: f64,
    pub shrink: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub patients: u32,
    pub studies_per_patient: u32,
    pub series_per_study: u32,
    pub structures: Vec<StructureSpec>,
    pub volume_dims: [usize; 3],
    pub spacing: [f64; 3],
    pub defect_rates: DefectRates,
    pub random_seed: u64,
    /// Between-patient shape scale is drawn from U(1 − v, 1 + v) per structure name.
    pub patient_scale_variation: f64,
    /// Per-series jitter on top of the patient scale, U(1 − v, 1 + v).
    pub series_scale_jitter: f64,
    pub min_volume_ml: f64,
    pub shrink_target_ml: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            patients: 50,
            studies_per_patient: 3,
            series_per_study: 2,
            structures: standard_structures(),
            volume_dims: [128, 128, 64],
            spacing: [1.5; 3],
            defect_rates: DefectRates::default(),
            random_seed: 0,
            patient_scale_variation: 0.05,
            series_scale_jitter: 0.02,
            min_volume_ml: 5.0,
            shrink_target_ml: 4.0,
        }
    }
}

/// Nine structures in three rows: kidneys and T5 at y = +55 mm, upper lung
/// lobes and liver at y = 0, 4th ribs and T8 at y = −55 mm.
pub fn standard_structures() -> Vec<StructureSpec> {
    use Laterality::{Left, None, Right};
    use Shape::{Box, Ellipsoid};
    vec![
        StructureSpec::new("kidney", Left, Ellipsoid, [15.0, 18.0, 24.0], [50.0, 55.0, 0.0]),
        StructureSpec::new("kidney", Right, Ellipsoid, [15.0, 18.0, 24.0], [-50.0, 55.0, 0.0]),
        StructureSpec::new("vertebra_T5", None, Box, [12.0, 12.0, 8.0], [0.0, 55.0, -25.0]),
        StructureSpec::new("lung_upper_lobe", Left, Ellipsoid, [12.0, 12.0, 16.0], [60.0, 0.0, 10.0]),
        StructureSpec::new("lung_upper_lobe", Right, Ellipsoid, [12.0, 12.0, 16.0], [-60.0, 0.0, 10.0]),
        StructureSpec::new("liver", None, Ellipsoid, [20.0, 15.0, 20.0], [0.0, 0.0, 0.0]),
        StructureSpec::new("rib_4", Left, Ellipsoid, [10.0, 22.0, 14.0], [50.0, -55.0, 5.0]),
        StructureSpec::new("rib_4", Right, Ellipsoid, [10.0, 22.0, 14.0], [-50.0, -55.0, 5.0]),
        StructureSpec::new("vertebra_T8", None, Box, [13.0, 13.0, 9.0], [0.0, -55.0, 20.0]),
    ]
}

/// Identity of one generated series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeriesKey {
    pub patient: u32,
    pub study: u32,
    pub series: u32,
}

impl SeriesKey {
    pub fn patient_id(&self) -> String {
        format!("P{:04}", self.patient + 1)
    }

    pub fn study_id(&self) -> String {
        format!("{}-T{}", self.patient_id(), self.study)
    }

    pub fn series_id(&self) -> String {
        format!("{}-R{}", self.study_id(), self.series)
    }

    fn info(&self) -> SeriesInfo {
        SeriesInfo {
            patient_id: self.patient_id(),
            study_id: self.study_id(),
            series_id: self.series_id(),
            acquisition_index: self.study,
        }
    }
}

impl PhantomSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PhantomSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn geometry(&self) -> Result<VolumeGeometry> {
        let origin = std::array::from_fn(|k| -((self.volume_dims[k] as f64 - 1.0) / 2.0) * self.spacing[k]);
        VolumeGeometry::axis_aligned(self.volume_dims, self.spacing, origin)
    }

    pub fn series_keys(&self) -> Vec<SeriesKey> {
        let mut keys = Vec::new();
        for patient in 0..self.patients {
            for study in 0..self.studies_per_patient {
                for series in 0..self.series_per_study {
                    keys.push(SeriesKey { patient, study, series });
                }
            }
        }
        keys
    }

    fn max_scale(&self) -> f64 {
        (1.0 + self.patient_scale_variation) * (1.0 + self.series_scale_jitter)
    }

    fn min_scale(&self) -> f64 {
        (1.0 - self.patient_scale_variation) * (1.0 - self.series_scale_jitter)
    }

    /// Reserved region of each structure, in structure order.
    fn reserved_regions(&self, g: &VolumeGeometry) -> Vec<VoxelBox> {
        let nz = g.dims()[2] as i64;
        self.structures
            .iter()
            .map(|s| {
                let mut b = s.placed(self.max_scale()).voxel_bounds(g).expand(RESERVED_MARGIN_VOXELS);
                b.lo[2] = 0;
                b.hi[2] = nz - 1;
                b
            })
            .collect()
    }

    /// Checks every field, reporting all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<String> = Vec::new();
        for (name, v) in [
            ("patients", self.patients),
            ("studiesPerPatient", self.studies_per_patient),
            ("seriesPerStudy", self.series_per_study),
        ] {
            if v < 1 {
                problems.push(format!("{name} must be >= 1"));
            }
        }
        let r = &self.defect_rates;
        for (name, p) in [
            ("defectRates.truncation", r.truncation),
            ("defectRates.fragment", r.fragment),
            ("defectRates.swap", r.swap),
            ("defectRates.shrink", r.shrink),
        ] {
            if !(0.0..=1.0).contains(&p) {
                problems.push(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if r.truncation + r.fragment + r.shrink > 1.0 + 1e-12 {
            problems.push("defectRates: truncation + fragment + shrink must not exceed 1".into());
        }
        for (name, v) in [
            ("patientScaleVariation", self.patient_scale_variation),
            ("seriesScaleJitter", self.series_scale_jitter),
        ] {
            if !(0.0..0.5).contains(&v) {
                problems.push(format!("{name} must be in [0, 0.5), got {v}"));
            }
        }
        if !(self.min_volume_ml > 0.0 && self.shrink_target_ml > 0.0 && self.shrink_target_ml < self.min_volume_ml) {
            problems.push("shrinkTargetMl must be positive and below minVolumeMl".into());
        }
        if self.structures.is_empty() {
            problems.push("structures must not be empty".into());
        }
        if self.structures.len() > Label::MAX as usize {
            problems.push("too many structures".into());
        }
        let geometry = match self.geometry() {
            Ok(g) if self.volume_dims.iter().all(|&d| d >= 3) => Some(g),
            Ok(_) => {
                problems.push("volumeDims must all be >= 3".into());
                None
            }
            Err(e) => {
                problems.push(format!("volumeDims/spacing: {e}"));
                None
            }
        };
        for (i, s) in self.structures.iter().enumerate() {
            if s.name.trim().is_empty() {
                problems.push(format!("structures[{i}].name is empty"));
            }
            if s.semi_axes_mm.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                problems.push(format!("structures[{i}].semiAxesMm must be positive"));
            }
            if s.center_offset_mm.iter().any(|c| !c.is_finite()) {
                problems.push(format!("structures[{i}].centerOffsetMm must be finite"));
            }
            if self.structures[..i]
                .iter()
                .any(|o| o.name == s.name && o.laterality == s.laterality)
            {
                problems.push(format!("structures[{i}]: duplicate {} ({})", s.name, s.laterality));
            }
            let min_ml = s.placed(self.min_scale()).analytic_volume_mm3() / MM3_PER_ML;
            if min_ml < 1.1 * self.min_volume_ml {
                problems.push(format!(
                    "structures[{i}] ({}): smallest volume {min_ml:.2} mL is too close to minVolumeMl",
                    s.name
                ));
            }
        }
        if let Some(g) = geometry.filter(|_| problems.is_empty()) {
            self.validate_layout(&g, &mut problems);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Spec(problems.join("; ")))
        }
    }

    fn validate_layout(&self, g: &VolumeGeometry, problems: &mut Vec<String>) {
        let dims = g.dims();
        let regions = self.reserved_regions(g);
        for (i, s) in self.structures.iter().enumerate() {
            let b = s.placed(self.max_scale()).voxel_bounds(g);
            if !regions[i].within(dims) {
                problems.push(format!("{} ({}) does not fit inside the volume with margin", s.name, s.laterality));
            }
            if b.lo[2] < 1 || b.hi[2] > dims[2] as i64 - 2 {
                problems.push(format!("{} ({}) reaches a terminal slice", s.name, s.laterality));
            }
            for (j, o) in self.structures.iter().enumerate().skip(i + 1) {
                if regions[i].intersects_xy(&regions[j]) {
                    problems.push(format!(
                        "{} ({}) and {} ({}) are too close",
                        s.name, s.laterality, o.name, o.laterality
                    ));
                }
            }
            if s.laterality == Laterality::Left {
                if let Some(j) = self.partner(i) {
                    if regions[i].lo[0] <= regions[j].hi[0] {
                        problems.push(format!("left {} must lie at larger x than its right partner", s.name));
                    }
                }
            }
        }
    }

    fn partner(&self, i: usize) -> Option<usize> {
        let s = &self.structures[i];
        let other = s.laterality.opposite()?;
        self.structures
            .iter()
            .position(|o| o.name == s.name && o.laterality == other)
    }

    fn patient_scales(&self, patient: u32) -> BTreeMap<&str, f64> {
        let mut rng = PhantomRng::stream(self.random_seed, StreamKind::Patient, patient, 0, 0);
        let v = self.patient_scale_variation;
        let mut scales = BTreeMap::new();
        for s in &self.structures {
            if !scales.contains_key(s.name.as_str()) {
                scales.insert(s.name.as_str(), rng.range(1.0 - v, 1.0 + v));
            }
        }
        scales
    }

    /// Builds one series in memory. The spec must be valid.
    pub fn generate_series(&self, key: SeriesKey) -> Result<(LabelVolume, Vec<DefectEntry>)> {
        let g = self.geometry()?;
        let regions = self.reserved_regions(&g);
        let patient_scales = self.patient_scales(key.patient);
        let mut rng = PhantomRng::stream(self.random_seed, StreamKind::Series, key.patient, key.study, key.series);
        let j = self.series_scale_jitter;

        let shapes: Vec<PlacedShape> = self
            .structures
            .iter()
            .map(|s| s.placed(patient_scales[s.name.as_str()] * rng.range(1.0 - j, 1.0 + j)))
            .collect();
        let segments = SegmentMap::from_entries(
            self.structures
                .iter()
                .enumerate()
                .map(|(i, s)| (i as Label + 1, SegmentInfo::new(s.name.clone(), s.laterality))),
        )?;
        let mut volume = LabelVolume::empty(g.clone(), key.info(), segments);
        {
            let (_, voxels, _) = volume.parts_mut();
            for (i, shape) in shapes.iter().enumerate() {
                shape.rasterize(&g, voxels, i as Label + 1);
            }
        }

        let rates = self.defect_rates;
        let mut assigned: Vec<Option<DefectType>> = vec![None; self.structures.len()];
        for i in 0..self.structures.len() {
            if self.structures[i].laterality != Laterality::Left {
                continue;
            }
            if let Some(p) = self.partner(i) {
                if rng.bernoulli(rates.swap) {
                    assigned[i] = Some(DefectType::Swap);
                    assigned[p] = Some(DefectType::Swap);
                }
            }
        }
        for slot in assigned.iter_mut().filter(|a| a.is_none()) {
            let u = rng.uniform();
            *slot = if u < rates.truncation {
                Some(DefectType::Truncation)
            } else if u < rates.truncation + rates.fragment {
                Some(DefectType::Fragment)
            } else if u < rates.truncation + rates.fragment + rates.shrink {
                Some(DefectType::Shrink)
            } else {
                None
            };
        }

        let voxel_ml = g.voxel_volume_mm3() / MM3_PER_ML;
        let mut log = Vec::new();
        for (i, defect) in assigned.iter().enumerate() {
            let Some(defect) = *defect else { continue };
            let label = i as Label + 1;
            let (param1, param2) = match defect {
                DefectType::Swap => {
                    if self.structures[i].laterality != Laterality::Left {
                        continue;
                    }
                    let (l, r) = inject_swap(&mut volume, &self.structures[i].name)?;
                    let p = self.partner(i).expect("swapped structures are paired");
                    let sides = [(i, l, r), (p, r, l)];
                    for (idx, own, other) in sides {
                        log.push(DefectEntry {
                            series_id: key.series_id(),
                            structure: self.structures[idx].name.clone(),
                            laterality: volume.segments().get(own).expect("label present").laterality,
                            defect_type: DefectType::Swap,
                            param1: own as f64,
                            param2: other as f64,
                        });
                    }
                    continue;
                }
                DefectType::Truncation => {
                    let side = if rng.below(2) == 0 { TruncationSide::First } else { TruncationSide::Last };
                    let zs = volume
                        .voxels()
                        .iter()
                        .enumerate()
                        .filter(|(_, &l)| l == label)
                        .map(|(k, _)| g.unravel(k)[2]);
                    let (lo, hi) = zs.fold((usize::MAX, 0), |(a, b), z| (a.min(z), b.max(z)));
                    let counts = slice_counts(&volume, label, lo, hi);
                    let total: usize = counts.iter().sum();
                    let floor = 1.02 * self.min_volume_ml;
                    let mut depth = 1 + rng.below((counts.len() as u64 / 3).max(1)) as usize;
                    let remaining = |d: usize| -> f64 {
                        let cut: usize = match side {
                            TruncationSide::First => counts[..d].iter().sum(),
                            TruncationSide::Last => counts[counts.len() - d..].iter().sum(),
                        };
                        (total - cut) as f64 * voxel_ml
                    };
                    while depth > 1 && remaining(depth) < floor {
                        depth -= 1;
                    }
                    if remaining(depth) < floor {
                        return Err(Error::Placement(format!(
                            "{}: truncating {} would drop below the minimum volume",
                            key.series_id(),
                            self.structures[i].name
                        )));
                    }
                    inject_truncation(&mut volume, label, side, depth)?;
                    let side_code = match side {
                        TruncationSide::First => 0.0,
                        TruncationSide::Last => 1.0,
                    };
                    (side_code, depth as f64)
                }
                DefectType::Fragment => {
                    let k = 1 + rng.below(2) as usize;
                    inject_fragment(&mut volume, label, regions[i], k, &mut rng)?;
                    (k as f64, (8 * k) as f64)
                }
                DefectType::Shrink => {
                    let achieved = inject_shrink(&mut volume, label, &shapes[i], self.shrink_target_ml)?;
                    (self.shrink_target_ml, achieved)
                }
            };
            log.push(DefectEntry {
                series_id: key.series_id(),
                structure: self.structures[i].name.clone(),
                laterality: self.structures[i].laterality,
                defect_type: defect,
                param1,
                param2,
            });
        }
        Ok((volume, log))
    }

    /// Writes `<seriesId>.nrrd` and `<seriesId>.json` for every series plus
    /// `defects.csv`, and returns the log. Output is identical for identical
    /// specs regardless of thread scheduling.
    pub fn generate_cohort(&self, out_dir: &Path) -> Result<DefectLog> {
        self.validate()?;
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let entries: Vec<Vec<DefectEntry>> = self
            .series_keys()
            .into_par_iter()
            .map(|key| {
                let (volume, log) = self.generate_series(key)?;
                let id = key.series_id();
                write_label_volume(
                    &volume,
                    &out_dir.join(format!("{id}.nrrd")),
                    &out_dir.join(format!("{id}.json")),
                )?;
                Ok(log)
            })
            .collect::<Result<_>>()?;
        let log = DefectLog::new(entries.into_iter().flatten().collect());
        let path = out_dir.join(DEFECT_LOG_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        log.write_csv(std::io::BufWriter::new(file))?;
        Ok(log)
    }
}

pub const DEFECT_LOG_FILE: &str = "defects.csv";

fn slice_counts(v: &LabelVolume, label: Label, lo: usize, hi: usize) -> Vec<usize> {
    let [nx, ny, _] = v.geometry().dims();
    let plane = nx * ny;
    (lo..=hi)
        .map(|z| v.voxels()[z * plane..(z + 1) * plane].iter().filter(|&&l| l == label).count())
        .collect()
}

/// Free-function form of [`PhantomSpec::generate_cohort`].
pub fn generate_cohort(spec: &PhantomSpec, out_dir: &Path) -> Result<DefectLog> {
    spec.generate_cohort(out_dir)
}

