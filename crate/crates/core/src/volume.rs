use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VolumeGeometry;

/// Voxel label. 0 is background.
pub type Label = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Laterality {
    Left,
    Right,
    None,
}

impl Laterality {
    pub fn as_str(self) -> &'static str {
        match self {
            Laterality::Left => "left",
            Laterality::Right => "right",
            Laterality::None => "none",
        }
    }

    pub fn opposite(self) -> Option<Laterality> {
        match self {
            Laterality::Left => Some(Laterality::Right),
            Laterality::Right => Some(Laterality::Left),
            Laterality::None => None,
        }
    }
}

impl fmt::Display for Laterality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Laterality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Laterality::Left),
            "right" => Ok(Laterality::Right),
            "none" => Ok(Laterality::None),
            other => Err(Error::parse(
                "laterality",
                format!("expected left|right|none, got {other:?}"),
            )),
        }
    }
}

/// Identifiers shared by every segment of one series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesInfo {
    pub patient_id: String,
    pub study_id: String,
    pub series_id: String,
    /// Time point of the study within the patient.
    pub acquisition_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub structure: String,
    pub laterality: Laterality,
}

impl SegmentInfo {
    pub fn new(structure: impl Into<String>, laterality: Laterality) -> Self {
        Self {
            structure: structure.into(),
            laterality,
        }
    }
}

/// Label → segment identity for one series.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SegmentMap {
    entries: BTreeMap<Label, SegmentInfo>,
}

impl SegmentMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a map, rejecting label 0, duplicate labels and duplicate
    /// (structure, laterality) pairs.
    pub fn from_entries(entries: impl IntoIterator<Item = (Label, SegmentInfo)>) -> Result<Self> {
        let mut map = Self::new();
        for (label, info) in entries {
            map.insert(label, info)?;
        }
        Ok(map)
    }

    pub fn insert(&mut self, label: Label, info: SegmentInfo) -> Result<()> {
        if label == 0 {
            return Err(Error::Metadata("label 0 is reserved for background".into()));
        }
        if self.entries.contains_key(&label) {
            return Err(Error::Metadata(format!("label {label} listed twice")));
        }
        if let Some((other, _)) = self
            .entries
            .iter()
            .find(|(_, e)| e.structure == info.structure && e.laterality == info.laterality)
        {
            return Err(Error::Metadata(format!(
                "labels {other} and {label} both map to ({}, {})",
                info.structure, info.laterality
            )));
        }
        self.entries.insert(label, info);
        Ok(())
    }

    pub fn get(&self, label: Label) -> Option<&SegmentInfo> {
        self.entries.get(&label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, &SegmentInfo)> {
        self.entries.iter().map(|(&l, i)| (l, i))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.entries.keys().copied()
    }

    /// Label of the segment with the given identity.
    pub fn find(&self, structure: &str, laterality: Laterality) -> Option<Label> {
        self.entries
            .iter()
            .find(|(_, e)| e.structure == structure && e.laterality == laterality)
            .map(|(&l, _)| l)
    }

    pub(crate) fn get_mut(&mut self, label: Label) -> Option<&mut SegmentInfo> {
        self.entries.get_mut(&label)
    }
}

/// A 3D label mask with geometry and segment metadata. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    geometry: VolumeGeometry,
    voxels: Vec<Label>,
    series: SeriesInfo,
    segments: SegmentMap,
}

impl LabelVolume {
    pub fn new(
        geometry: VolumeGeometry,
        voxels: Vec<Label>,
        series: SeriesInfo,
        segments: SegmentMap,
    ) -> Result<Self> {
        if voxels.len() != geometry.voxel_count() {
            return Err(Error::Truncation {
                expected: geometry.voxel_count(),
                found: voxels.len(),
            });
        }
        check_labels_mapped(&voxels, &segments)?;
        Ok(Self {
            geometry,
            voxels,
            series,
            segments,
        })
    }

    /// All-background volume.
    pub fn empty(geometry: VolumeGeometry, series: SeriesInfo, segments: SegmentMap) -> Self {
        let voxels = vec![0; geometry.voxel_count()];
        Self {
            geometry,
            voxels,
            series,
            segments,
        }
    }

    pub fn geometry(&self) -> &VolumeGeometry {
        &self.geometry
    }

    pub fn voxels(&self) -> &[Label] {
        &self.voxels
    }

    pub fn series(&self) -> &SeriesInfo {
        &self.series
    }

    pub fn segments(&self) -> &SegmentMap {
        &self.segments
    }

    pub fn get(&self, idx: [usize; 3]) -> Label {
        self.voxels[self.geometry.linear_index(idx)]
    }

    pub fn max_label(&self) -> Label {
        self.voxels.iter().copied().max().unwrap_or(0)
    }

    pub(crate) fn require_label(&self, label: Label) -> Result<&SegmentInfo> {
        self.segments
            .get(label)
            .ok_or_else(|| Error::Metadata(format!("label {label} not in segment map")))
    }

    pub fn into_parts(self) -> (VolumeGeometry, Vec<Label>, SeriesInfo, SegmentMap) {
        (self.geometry, self.voxels, self.series, self.segments)
    }

    pub(crate) fn parts_mut(&mut self) -> (&VolumeGeometry, &mut Vec<Label>, &mut SegmentMap) {
        (&self.geometry, &mut self.voxels, &mut self.segments)
    }

    pub fn with_geometry(&self, geometry: VolumeGeometry) -> Result<Self> {
        if geometry.dims() != self.geometry.dims() {
            return Err(Error::Geometry("dims differ".into()));
        }
        Ok(Self {
            geometry,
            ..self.clone()
        })
    }
}

pub(crate) fn check_labels_mapped(voxels: &[Label], segments: &SegmentMap) -> Result<()> {
    let mut seen = [false; Label::MAX as usize + 1];
    for &v in voxels {
        seen[v as usize] = true;
    }
    let missing: BTreeSet<Label> = seen
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(l, &s)| s && segments.get(*l as Label).is_none())
        .map(|(l, _)| l as Label)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Metadata(format!(
            "labels present in voxels but missing from segment map: {missing:?}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> SeriesInfo {
        SeriesInfo {
            patient_id: "P1".into(),
            study_id: "S1".into(),
            series_id: "R1".into(),
            acquisition_index: 0,
        }
    }

    #[test]
    fn duplicate_identity_rejected() {
        let err = SegmentMap::from_entries([
            (1, SegmentInfo::new("kidney", Laterality::Left)),
            (2, SegmentInfo::new("kidney", Laterality::Left)),
        ]);
        assert!(matches!(err, Err(Error::Metadata(_))));
        assert!(SegmentMap::from_entries([
            (1, SegmentInfo::new("kidney", Laterality::Left)),
            (2, SegmentInfo::new("kidney", Laterality::Right)),
        ])
        .is_ok());
    }

    #[test]
    fn background_label_rejected() {
        assert!(SegmentMap::from_entries([(0, SegmentInfo::new("x", Laterality::None))]).is_err());
    }

    #[test]
    fn unmapped_voxel_label_rejected() {
        let g = VolumeGeometry::axis_aligned([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        let mut voxels = vec![0; 8];
        voxels[3] = 7;
        let err = LabelVolume::new(g, voxels, series(), SegmentMap::new());
        assert!(matches!(err, Err(Error::Metadata(m)) if m.contains('7')));
    }

    #[test]
    fn length_mismatch_rejected() {
        let g = VolumeGeometry::axis_aligned([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        assert!(matches!(
            LabelVolume::new(g, vec![0; 7], series(), SegmentMap::new()),
            Err(Error::Truncation { expected: 8, found: 7 })
        ));
    }

    #[test]
    fn laterality_parse() {
        assert_eq!("left".parse::<Laterality>().unwrap(), Laterality::Left);
        assert!("Left".parse::<Laterality>().is_err());
        assert_eq!(Laterality::Right.opposite(), Some(Laterality::Left));
        assert_eq!(Laterality::None.opposite(), None);
    }
}
