//! Fixtures shared by unit tests.

use crate::geometry::VolumeGeometry;
use crate::volume::{Label, LabelVolume, Laterality, SegmentInfo, SegmentMap, SeriesInfo};

pub fn series(id: &str) -> SeriesInfo {
    SeriesInfo {
        patient_id: format!("P-{id}"),
        study_id: format!("S-{id}"),
        series_id: id.to_string(),
        acquisition_index: 0,
    }
}

/// Builds a volume whose segment `i` (1-based label) is `segs[i-1]`; the
/// closure maps each voxel index to its label.
pub fn volume_with<T: Into<Label>>(
    g: VolumeGeometry,
    segs: &[(&str, Laterality)],
    f: impl Fn([usize; 3]) -> T,
) -> LabelVolume {
    let map = SegmentMap::from_entries(
        segs.iter()
            .enumerate()
            .map(|(i, (name, lat))| ((i + 1) as Label, SegmentInfo::new(*name, *lat))),
    )
    .unwrap();
    let voxels = (0..g.voxel_count()).map(|off| f(g.unravel(off)).into()).collect();
    LabelVolume::new(g, voxels, series("R1"), map).unwrap()
}
