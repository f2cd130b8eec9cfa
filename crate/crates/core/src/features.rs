//! Per-segment geometric features consumed by the heuristics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::components::{component_sizes, Connectivity};
use crate::error::Result;
use crate::volume::{Label, LabelVolume};

pub const MM3_PER_ML: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFeatures {
    pub voxel_count: u64,
    pub volume_ml: f64,
    /// Absent for empty segments.
    pub center_of_mass_world: Option<[f64; 3]>,
    pub connected_component_count: usize,
    /// (min, max) slice index along the third array axis.
    pub z_extent: Option<(usize, usize)>,
    /// Descending.
    pub component_sizes: Vec<usize>,
}

impl SegmentFeatures {
    pub fn largest_component_voxels(&self) -> usize {
        self.component_sizes.first().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Accumulator {
    count: u64,
    sum: [u64; 3],
    lo: [usize; 3],
    hi: [usize; 3],
}

impl Default for Accumulator {
    fn default() -> Self {
        Self {
            count: 0,
            sum: [0; 3],
            lo: [usize::MAX; 3],
            hi: [0; 3],
        }
    }
}

impl Accumulator {
    #[inline]
    fn add(&mut self, idx: [usize; 3]) {
        self.count += 1;
        for k in 0..3 {
            self.sum[k] += idx[k] as u64;
            self.lo[k] = self.lo[k].min(idx[k]);
            self.hi[k] = self.hi[k].max(idx[k]);
        }
    }
}

/// One pass over the voxels, accumulating statistics for every label.
fn accumulate(v: &LabelVolume) -> Vec<Accumulator> {
    let mut acc = vec![Accumulator::default(); v.max_label() as usize + 1];
    let [nx, ny, nz] = v.geometry().dims();
    let voxels = v.voxels();
    let mut off = 0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let l = voxels[off];
                if l != 0 {
                    acc[l as usize].add([x, y, z]);
                }
                off += 1;
            }
        }
    }
    acc
}

fn accumulate_label(v: &LabelVolume, label: Label) -> Accumulator {
    let mut acc = Accumulator::default();
    let g = v.geometry();
    for (off, _) in v.voxels().iter().enumerate().filter(|(_, &l)| l == label) {
        acc.add(g.unravel(off));
    }
    acc
}

fn components_in_box(v: &LabelVolume, label: Label, acc: &Accumulator, conn: Connectivity) -> Vec<usize> {
    if acc.count == 0 {
        return Vec::new();
    }
    let dims = [
        acc.hi[0] - acc.lo[0] + 1,
        acc.hi[1] - acc.lo[1] + 1,
        acc.hi[2] - acc.lo[2] + 1,
    ];
    let g = v.geometry();
    let voxels = v.voxels();
    let mut mask = Vec::with_capacity(dims.iter().product());
    for z in acc.lo[2]..=acc.hi[2] {
        for y in acc.lo[1]..=acc.hi[1] {
            let row = g.linear_index([acc.lo[0], y, z]);
            mask.extend(voxels[row..row + dims[0]].iter().map(|&l| l == label));
        }
    }
    component_sizes(&mask, dims, conn)
}

fn finish(v: &LabelVolume, label: Label, acc: &Accumulator, conn: Connectivity) -> SegmentFeatures {
    let g = v.geometry();
    let sizes = components_in_box(v, label, acc, conn);
    let center = (acc.count > 0).then(|| {
        let n = acc.count as f64;
        g.continuous_index_to_world([
            acc.sum[0] as f64 / n,
            acc.sum[1] as f64 / n,
            acc.sum[2] as f64 / n,
        ])
    });
    SegmentFeatures {
        voxel_count: acc.count,
        volume_ml: volume_ml(acc.count, v),
        center_of_mass_world: center,
        connected_component_count: sizes.len(),
        z_extent: (acc.count > 0).then_some((acc.lo[2], acc.hi[2])),
        component_sizes: sizes,
    }
}

fn volume_ml(count: u64, v: &LabelVolume) -> f64 {
    count as f64 * v.geometry().voxel_volume_mm3() / MM3_PER_ML
}

/// Features for every entry of the segment map, computed in one voxel pass.
pub fn all_features(v: &LabelVolume, conn: Connectivity) -> BTreeMap<Label, SegmentFeatures> {
    let acc = accumulate(v);
    v.segments()
        .labels()
        .map(|label| {
            let a = acc.get(label as usize).copied().unwrap_or_default();
            (label, finish(v, label, &a, conn))
        })
        .collect()
}

pub fn segment_features(v: &LabelVolume, label: Label, conn: Connectivity) -> Result<SegmentFeatures> {
    v.require_label(label)?;
    Ok(finish(v, label, &accumulate_label(v, label), conn))
}

/// Voxel count × |det(direction)| × Πspacing / 1000.
pub fn segment_volume_ml(v: &LabelVolume, label: Label) -> Result<f64> {
    v.require_label(label)?;
    let count = v.voxels().iter().filter(|&&l| l == label).count() as u64;
    Ok(volume_ml(count, v))
}

/// Mean world position of the segment's voxels; `None` when empty.
pub fn center_of_mass_world(v: &LabelVolume, label: Label) -> Result<Option<[f64; 3]>> {
    v.require_label(label)?;
    let acc = accumulate_label(v, label);
    if acc.count == 0 {
        return Ok(None);
    }
    let n = acc.count as f64;
    Ok(Some(v.geometry().continuous_index_to_world([
        acc.sum[0] as f64 / n,
        acc.sum[1] as f64 / n,
        acc.sum[2] as f64 / n,
    ])))
}

/// Component count and descending sizes.
pub fn count_connected_components(
    v: &LabelVolume,
    label: Label,
    conn: Connectivity,
) -> Result<(usize, Vec<usize>)> {
    v.require_label(label)?;
    let sizes = components_in_box(v, label, &accumulate_label(v, label), conn);
    Ok((sizes.len(), sizes))
}
