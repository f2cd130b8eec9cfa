//! Defect injection and the ground-truth defect log.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::rng::PhantomRng;
use super::shape::{PlacedShape, VoxelBox};
use crate::cohort::csv::lf_writer;
use crate::error::{Error, Result};
use crate::features::MM3_PER_ML;
use crate::heuristics::Heuristic;
use crate::volume::{Label, LabelVolume, Laterality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectType {
    Truncation,
    Fragment,
    Swap,
    Shrink,
}

impl DefectType {
    pub const ALL: [DefectType; 4] = [
        DefectType::Truncation,
        DefectType::Fragment,
        DefectType::Swap,
        DefectType::Shrink,
    ];

    /// The one heuristic this defect is built to trip.
    pub fn target(self) -> Heuristic {
        match self {
            DefectType::Truncation => Heuristic::Completeness,
            DefectType::Fragment => Heuristic::Connected,
            DefectType::Swap => Heuristic::Laterality,
            DefectType::Shrink => Heuristic::MinVolume,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DefectType::Truncation => "truncation",
            DefectType::Fragment => "fragment",
            DefectType::Swap => "swap",
            DefectType::Shrink => "shrink",
        }
    }
}

impl fmt::Display for DefectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DefectType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DefectType::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::schema("defectType", format!("unknown defect {s:?}")))
    }
}

/// One injected defect. Parameters by type:
///
/// | type       | param1                         | param2                   |
/// |------------|--------------------------------|--------------------------|
/// | truncation | side (0 = slice 0, 1 = last)   | slices cut off           |
/// | fragment   | cluster count                  | fragment voxels          |
/// | swap       | own label                      | partner label            |
/// | shrink     | target mL                      | achieved mL              |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DefectEntry {
    pub series_id: String,
    pub structure: String,
    /// Laterality as written to the sidecar.
    pub laterality: Laterality,
    pub defect_type: DefectType,
    pub param1: f64,
    pub param2: f64,
}

/// Defect entries sorted by (seriesId, structure, laterality).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DefectLog {
    pub entries: Vec<DefectEntry>,
}

pub const DEFECT_LOG_HEADER: [&str; 6] = ["seriesId", "structure", "laterality", "defectType", "param1", "param2"];

impl DefectLog {
    pub fn new(mut entries: Vec<DefectEntry>) -> Self {
        entries.sort_by(|a, b| {
            (&a.series_id, &a.structure, a.laterality).cmp(&(&b.series_id, &b.structure, b.laterality))
        });
        DefectLog { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn of_type(&self, t: DefectType) -> impl Iterator<Item = &DefectEntry> {
        self.entries.iter().filter(move |e| e.defect_type == t)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = lf_writer(w);
        out.write_record(DEFECT_LOG_HEADER)?;
        for e in &self.entries {
            out.write_record([
                e.series_id.as_str(),
                e.structure.as_str(),
                e.laterality.as_str(),
                e.defect_type.as_str(),
                &crate::cohort::csv::fmt_sig6(e.param1),
                &crate::cohort::csv::fmt_sig6(e.param2),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<defect log>", e))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let header = reader.headers()?.clone();
        if header.iter().ne(DEFECT_LOG_HEADER) {
            return Err(Error::schema("seriesId", "unexpected defect log header"));
        }
        let mut entries = Vec::new();
        for row in reader.records() {
            let row = row?;
            let num = |i: usize| -> Result<f64> {
                row[i]
                    .parse()
                    .map_err(|_| Error::schema(DEFECT_LOG_HEADER[i], format!("invalid value {:?}", &row[i])))
            };
            entries.push(DefectEntry {
                series_id: row[0].to_string(),
                structure: row[1].to_string(),
                laterality: row[2]
                    .parse()
                    .map_err(|_| Error::schema("laterality", format!("invalid value {:?}", &row[2])))?,
                defect_type: row[3].parse()?,
                param1: num(4)?,
                param2: num(5)?,
            });
        }
        Ok(DefectLog::new(entries))
    }
}

/// Which terminal slice a truncation reaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationSide {
    First,
    Last,
}

fn label_positions(v: &LabelVolume, label: Label) -> Vec<[usize; 3]> {
    let g = v.geometry();
    v.voxels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == label)
        .map(|(i, _)| g.unravel(i))
        .collect()
}

fn bounding_box(pos: &[[usize; 3]]) -> Option<VoxelBox> {
    let first = pos.first()?;
    let mut b = VoxelBox {
        lo: first.map(|v| v as i64),
        hi: first.map(|v| v as i64),
    };
    for p in pos {
        for k in 0..3 {
            b.lo[k] = b.lo[k].min(p[k] as i64);
            b.hi[k] = b.hi[k].max(p[k] as i64);
        }
    }
    Some(b)
}

/// Shifts the segment along z so that `depth` of its slices fall outside
/// the volume on `side`, and drops them. The remainder touches the
/// terminal slice. Other labels must not occupy the segment's columns.
pub fn inject_truncation(v: &mut LabelVolume, label: Label, side: TruncationSide, depth: usize) -> Result<()> {
    v.require_label(label)?;
    let pos = label_positions(v, label);
    let b = bounding_box(&pos).ok_or_else(|| Error::Domain(format!("label {label} is empty")))?;
    let extent = (b.hi[2] - b.lo[2] + 1) as usize;
    if depth == 0 || depth >= extent {
        return Err(Error::Domain(format!("truncation depth {depth} outside 1..{extent}")));
    }
    let nz = v.geometry().dims()[2] as i64;
    let shift = match side {
        TruncationSide::First => -(b.lo[2] + depth as i64),
        TruncationSide::Last => nz - 1 + depth as i64 - b.hi[2],
    };
    let (g, voxels, _) = v.parts_mut();
    for p in &pos {
        voxels[g.linear_index(*p)] = 0;
    }
    for p in &pos {
        let z = p[2] as i64 + shift;
        if (0..nz).contains(&z) {
            let i = g.linear_index([p[0], p[1], z as usize]);
            if voxels[i] != 0 {
                return Err(Error::Placement(format!("shifted label {label} overlaps label {}", voxels[i])));
            }
            voxels[i] = label;
        }
    }
    Ok(())
}

/// Adds `k` disjoint 2×2×2 clusters inside `region`, each at Chebyshev
/// distance ≥ 3 from the segment's bounding box and from each other, and
/// never on a terminal slice. Returns the clusters' lower corners.
pub fn inject_fragment(
    v: &mut LabelVolume,
    label: Label,
    region: VoxelBox,
    k: usize,
    rng: &mut PhantomRng,
) -> Result<Vec<[usize; 3]>> {
    const MAX_ATTEMPTS: usize = 10_000;
    v.require_label(label)?;
    let body = bounding_box(&label_positions(v, label))
        .ok_or_else(|| Error::Domain(format!("label {label} is empty")))?;
    let dims = v.geometry().dims();
    let lo: [i64; 3] = [region.lo[0].max(0), region.lo[1].max(0), region.lo[2].max(1)];
    let hi: [i64; 3] = [
        region.hi[0].min(dims[0] as i64 - 1) - 1,
        region.hi[1].min(dims[1] as i64 - 1) - 1,
        region.hi[2].min(dims[2] as i64 - 2) - 1,
    ];
    if (0..3).any(|a| hi[a] < lo[a]) {
        return Err(Error::Placement("fragment region is empty".into()));
    }
    let mut placed: Vec<VoxelBox> = Vec::with_capacity(k);
    let mut attempts = 0;
    while placed.len() < k {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::Placement(format!(
                "no room for {k} fragments of label {label} after {MAX_ATTEMPTS} attempts"
            )));
        }
        let corner: [i64; 3] = std::array::from_fn(|a| lo[a] + rng.below((hi[a] - lo[a] + 1) as u64) as i64);
        let cluster = VoxelBox {
            lo: corner,
            hi: corner.map(|c| c + 1),
        };
        if cluster.gap(&body) < 3 || placed.iter().any(|p| cluster.gap(p) < 3) {
            continue;
        }
        let g = v.geometry();
        let cells: Vec<usize> = (0..8)
            .map(|m| {
                g.linear_index([
                    (corner[0] + (m & 1)) as usize,
                    (corner[1] + ((m >> 1) & 1)) as usize,
                    (corner[2] + ((m >> 2) & 1)) as usize,
                ])
            })
            .collect();
        if cells.iter().any(|&i| v.voxels()[i] != 0) {
            continue;
        }
        let (_, voxels, _) = v.parts_mut();
        for i in cells {
            voxels[i] = label;
        }
        placed.push(cluster);
    }
    Ok(placed.iter().map(|c| c.lo.map(|x| x as usize)).collect())
}

/// Exchanges the left/right assignment of `structure` in the segment map.
/// Returns the (formerly left, formerly right) labels.
pub fn inject_swap(v: &mut LabelVolume, structure: &str) -> Result<(Label, Label)> {
    let segs = v.segments();
    let (Some(left), Some(right)) = (segs.find(structure, Laterality::Left), segs.find(structure, Laterality::Right))
    else {
        return Err(Error::Domain(format!("structure {structure:?} is not a left/right pair")));
    };
    let (_, _, segments) = v.parts_mut();
    segments.get_mut(left).expect("label present").laterality = Laterality::Right;
    segments.get_mut(right).expect("label present").laterality = Laterality::Left;
    Ok((left, right))
}

/// Replaces the segment by `shape` rescaled so that its voxel volume is
/// close to `target_ml`. Returns the achieved volume in mL.
pub fn inject_shrink(v: &mut LabelVolume, label: Label, shape: &PlacedShape, target_ml: f64) -> Result<f64> {
    v.require_label(label)?;
    if !(target_ml.is_finite() && target_ml > 0.0) {
        return Err(Error::Domain(format!("shrink target {target_ml} mL")));
    }
    let voxel_ml = v.geometry().voxel_volume_mm3() / MM3_PER_ML;
    let mut factor = (target_ml * MM3_PER_ML / shape.analytic_volume_mm3()).cbrt();
    let (g, voxels, _) = v.parts_mut();
    let g = g.clone();
    let mut achieved = 0.0;
    // A few fixed-point corrections on the discretised volume.
    for _ in 0..4 {
        voxels.iter_mut().filter(|l| **l == label).for_each(|l| *l = 0);
        let written = shape.scaled(factor).rasterize(&g, voxels, label);
        achieved = written as f64 * voxel_ml;
        if written == 0 || (achieved - target_ml).abs() <= 0.05 * target_ml {
            break;
        }
        factor *= (target_ml / achieved).cbrt();
    }
    Ok(achieved)
}
