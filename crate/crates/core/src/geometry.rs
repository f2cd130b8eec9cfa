//! Voxel grid geometry and the index → world affine.
//!
//! World coordinates are LPS: +x toward the patient's left, +y toward
//! posterior, +z toward superior. The laterality heuristic depends on this:
//! a left-sided structure must have a larger world x than its right-sided
//! partner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a direction column's norm from 1.
pub const DIRECTION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeGeometry {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    /// Row-major 3×3 matrix; column `c` is the world direction of array axis `c`.
    direction: [[f64; 3]; 3],
}

pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl VolumeGeometry {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        direction: [[f64; 3]; 3],
    ) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Geometry(format!("dims must be >= 1, got {dims:?}")));
        }
        if dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .is_none()
        {
            return Err(Error::Geometry(format!("voxel count overflows for {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::Geometry(format!(
                "spacing must be finite and > 0, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Geometry(format!("origin must be finite, got {origin:?}")));
        }
        for c in 0..3 {
            let norm = (0..3).map(|r| direction[r][c].powi(2)).sum::<f64>().sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > DIRECTION_NORM_TOLERANCE {
                return Err(Error::Geometry(format!(
                    "direction column {c} has norm {norm}, expected 1"
                )));
            }
        }
        if det3(&direction) == 0.0 {
            return Err(Error::Geometry("direction matrix is singular".into()));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
            direction,
        })
    }

    /// Axis-aligned geometry with identity direction.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, origin, IDENTITY)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn direction(&self) -> [[f64; 3]; 3] {
        self.direction
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Physical volume of one voxel in mm³: |det(direction)| · Πspacing.
    pub fn voxel_volume_mm3(&self) -> f64 {
        det3(&self.direction).abs() * self.spacing[0] * self.spacing[1] * self.spacing[2]
    }

    /// Linear offset of an in-bounds index, x fastest.
    #[inline]
    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    #[inline]
    pub fn unravel(&self, offset: usize) -> [usize; 3] {
        let x = offset % self.dims[0];
        let rest = offset / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    pub fn contains(&self, idx: [i64; 3]) -> bool {
        (0..3).all(|k| idx[k] >= 0 && (idx[k] as u64) < self.dims[k] as u64)
    }

    /// World position (mm) of a voxel center.
    pub fn index_to_world(&self, idx: [i64; 3]) -> Result<[f64; 3]> {
        if !self.contains(idx) {
            return Err(Error::Bounds {
                index: idx,
                dims: self.dims,
            });
        }
        Ok(self.continuous_index_to_world([idx[0] as f64, idx[1] as f64, idx[2] as f64]))
    }

    /// Affine map applied to a fractional index; no bounds check.
    pub fn continuous_index_to_world(&self, idx: [f64; 3]) -> [f64; 3] {
        let scaled = [
            idx[0] * self.spacing[0],
            idx[1] * self.spacing[1],
            idx[2] * self.spacing[2],
        ];
        let mut world = self.origin;
        for (r, w) in world.iter_mut().enumerate() {
            *w += self.direction[r][0] * scaled[0]
                + self.direction[r][1] * scaled[1]
                + self.direction[r][2] * scaled[2];
        }
        world
    }

    pub fn with_spacing(&self, spacing: [f64; 3]) -> Result<Self> {
        Self::new(self.dims, spacing, self.origin, self.direction)
    }

    pub fn with_origin(&self, origin: [f64; 3]) -> Result<Self> {
        Self::new(self.dims, self.spacing, origin, self.direction)
    }
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
