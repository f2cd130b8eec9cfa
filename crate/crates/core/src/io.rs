//! Mask + sidecar file pairs.
//!
//! The sidecar is a JSON document:
//!
//! ```json
//! {
//!   "schemaVersion": "segqc-1",
//!   "patientId": "P0001",
//!   "studyId": "P0001-T0",
//!   "seriesId": "P0001-T0-R0",
//!   "acquisitionIndex": 0,
//!   "segments": [{ "label": 1, "structure": "kidney", "laterality": "left" }]
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nrrd::{self, Encoding};
use crate::volume::{check_labels_mapped, Label, LabelVolume, Laterality, SegmentInfo, SegmentMap, SeriesInfo};

pub const SIDECAR_SCHEMA_VERSION: &str = "segqc-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Sidecar {
    pub schema_version: String,
    pub patient_id: String,
    pub study_id: String,
    pub series_id: String,
    pub acquisition_index: u32,
    pub segments: Vec<SidecarSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarSegment {
    pub label: Label,
    pub structure: String,
    pub laterality: Laterality,
}

impl Sidecar {
    pub fn from_volume(v: &LabelVolume) -> Self {
        let s = v.series();
        Sidecar {
            schema_version: SIDECAR_SCHEMA_VERSION.to_string(),
            patient_id: s.patient_id.clone(),
            study_id: s.study_id.clone(),
            series_id: s.series_id.clone(),
            acquisition_index: s.acquisition_index,
            segments: v
                .segments()
                .iter()
                .map(|(label, info)| SidecarSegment {
                    label,
                    structure: info.structure.clone(),
                    laterality: info.laterality,
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sidecar: Sidecar = serde_json::from_str(text)
            .map_err(|e| Error::parse("sidecar", e.to_string()))?;
        if sidecar.schema_version != SIDECAR_SCHEMA_VERSION {
            return Err(Error::parse(
                "schemaVersion",
                format!("expected {SIDECAR_SCHEMA_VERSION:?}, got {:?}", sidecar.schema_version),
            ));
        }
        Ok(sidecar)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }

    pub fn series_info(&self) -> SeriesInfo {
        SeriesInfo {
            patient_id: self.patient_id.clone(),
            study_id: self.study_id.clone(),
            series_id: self.series_id.clone(),
            acquisition_index: self.acquisition_index,
        }
    }

    pub fn segment_map(&self) -> Result<SegmentMap> {
        SegmentMap::from_entries(
            self.segments
                .iter()
                .map(|s| (s.label, SegmentInfo::new(s.structure.clone(), s.laterality))),
        )
    }
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Sidecar::parse(&text)
}

/// Reads a mask and its sidecar into a validated [`LabelVolume`].
pub fn read_label_volume(mask_path: &Path, sidecar_path: &Path) -> Result<LabelVolume> {
    let sidecar = read_sidecar(sidecar_path)?;
    let bytes = fs::read(mask_path).map_err(|e| Error::io(mask_path, e))?;
    volume_from_parts(&bytes, &sidecar)
}

pub fn volume_from_parts(mask_bytes: &[u8], sidecar: &Sidecar) -> Result<LabelVolume> {
    let segments = sidecar.segment_map()?;
    let (header, voxels) = nrrd::decode(mask_bytes)?;
    LabelVolume::new(header.geometry, voxels, sidecar.series_info(), segments)
}

pub fn write_label_volume(v: &LabelVolume, mask_path: &Path, sidecar_path: &Path) -> Result<()> {
    write_label_volume_with(v, mask_path, sidecar_path, Encoding::Gzip)
}

pub fn write_label_volume_with(
    v: &LabelVolume,
    mask_path: &Path,
    sidecar_path: &Path,
    encoding: Encoding,
) -> Result<()> {
    check_labels_mapped(v.voxels(), v.segments())?;
    let bytes = nrrd::encode(v.geometry(), v.voxels(), encoding)?;
    fs::write(mask_path, bytes).map_err(|e| Error::io(mask_path, e))?;
    fs::write(sidecar_path, Sidecar::from_volume(v).to_json())
        .map_err(|e| Error::io(sidecar_path, e))?;
    Ok(())
}
