use serde::{Deserialize, Serialize};

use crate::geometry::VolumeGeometry;
use crate::volume::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Ellipsoid,
    Box,
}

/// A shape in world millimetres. For a box `semi_axes` are half-widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedShape {
    pub shape: Shape,
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
}

/// Inclusive voxel index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelBox {
    pub lo: [i64; 3],
    pub hi: [i64; 3],
}

impl VoxelBox {
    pub fn expand(&self, margin: i64) -> VoxelBox {
        VoxelBox {
            lo: self.lo.map(|v| v - margin),
            hi: self.hi.map(|v| v + margin),
        }
    }

    pub fn within(&self, dims: [usize; 3]) -> bool {
        (0..3).all(|k| self.lo[k] >= 0 && self.hi[k] < dims[k] as i64)
    }

    pub fn intersects_xy(&self, other: &VoxelBox) -> bool {
        (0..2).all(|k| self.lo[k] <= other.hi[k] && other.lo[k] <= self.hi[k])
    }

    /// Chebyshev gap between two boxes; 1 means face/edge/corner adjacency.
    pub fn gap(&self, other: &VoxelBox) -> i64 {
        (0..3)
            .map(|k| (other.lo[k] - self.hi[k]).max(self.lo[k] - other.hi[k]).max(0))
            .max()
            .unwrap_or(0)
    }
}

impl PlacedShape {
    pub fn scaled(&self, factor: f64) -> PlacedShape {
        PlacedShape {
            semi_axes: self.semi_axes.map(|a| a * factor),
            ..*self
        }
    }

    pub fn analytic_volume_mm3(&self) -> f64 {
        let [a, b, c] = self.semi_axes;
        match self.shape {
            Shape::Ellipsoid => 4.0 / 3.0 * std::f64::consts::PI * a * b * c,
            Shape::Box => 8.0 * a * b * c,
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let d: [f64; 3] = std::array::from_fn(|k| (p[k] - self.center[k]) / self.semi_axes[k]);
        match self.shape {
            Shape::Ellipsoid => d.iter().map(|v| v * v).sum::<f64>() <= 1.0,
            Shape::Box => d.iter().all(|v| v.abs() <= 1.0),
        }
    }

    /// Index bounds of voxel centres that may lie inside the shape, unclamped.
    /// Assumes an axis-aligned geometry.
    pub fn voxel_bounds(&self, g: &VolumeGeometry) -> VoxelBox {
        let (o, s) = (g.origin(), g.spacing());
        VoxelBox {
            lo: std::array::from_fn(|k| ((self.center[k] - self.semi_axes[k] - o[k]) / s[k]).ceil() as i64),
            hi: std::array::from_fn(|k| ((self.center[k] + self.semi_axes[k] - o[k]) / s[k]).floor() as i64),
        }
    }

    /// Sets every voxel whose centre lies inside the shape to `label`.
    /// Voxels outside the volume are skipped. Returns the number written.
    pub fn rasterize(&self, g: &VolumeGeometry, voxels: &mut [Label], label: Label) -> usize {
        let dims = g.dims();
        let b = self.voxel_bounds(g);
        let range = |k: usize| b.lo[k].max(0)..=b.hi[k].min(dims[k] as i64 - 1);
        let mut written = 0;
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    let p = g.continuous_index_to_world([x as f64, y as f64, z as f64]);
                    if self.contains(p) {
                        voxels[g.linear_index([x as usize, y as usize, z as usize])] = label;
                        written += 1;
                    }
                }
            }
        }
        written
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_rasterizes_exactly() {
        let g = VolumeGeometry::axis_aligned([10, 10, 10], [1.0; 3], [0.0; 3]).unwrap();
        let s = PlacedShape {
            shape: Shape::Box,
            center: [4.5, 4.5, 4.5],
            semi_axes: [2.0, 1.0, 3.0],
        };
        let mut v = vec![0; g.voxel_count()];
        assert_eq!(s.rasterize(&g, &mut v, 1), 4 * 2 * 6);
        assert_eq!(s.analytic_volume_mm3(), 48.0);
    }

    #[test]
    fn clipping_at_volume_edge() {
        let g = VolumeGeometry::axis_aligned([5, 5, 5], [1.0; 3], [0.0; 3]).unwrap();
        let s = PlacedShape {
            shape: Shape::Box,
            center: [0.0, 2.0, 2.0],
            semi_axes: [1.0, 0.5, 0.5],
        };
        let mut v = vec![0; g.voxel_count()];
        assert_eq!(s.rasterize(&g, &mut v, 3), 2);
        assert_eq!(s.voxel_bounds(&g).lo[0], -1);
    }

    #[test]
    fn box_gap() {
        let a = VoxelBox { lo: [0, 0, 0], hi: [2, 2, 2] };
        let b = VoxelBox { lo: [3, 0, 0], hi: [4, 1, 1] };
        let c = VoxelBox { lo: [5, 5, 5], hi: [6, 6, 6] };
        assert_eq!(a.gap(&b), 1);
        assert_eq!(a.gap(&c), 3);
        assert_eq!(a.gap(&a), 0);
    }
}
