//! 3D connected-component labelling of binary masks.
//!
//! Single raster pass with a union-find over provisional labels; each
//! foreground voxel is merged with its already-visited neighbours from the
//! selected neighbourhood.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face and edge neighbours.
    Eighteen,
    /// Face, edge and corner neighbours.
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn as_u8(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// True when `(dx, dy, dz)` (each in -1..=1, not all zero) is a neighbour.
    pub fn includes(self, d: [i64; 3]) -> bool {
        let manhattan: i64 = d.iter().map(|c| c.abs()).sum();
        match self {
            Connectivity::Six => manhattan == 1,
            Connectivity::Eighteen => (1..=2).contains(&manhattan),
            Connectivity::TwentySix => manhattan >= 1,
        }
    }

    /// All neighbour offsets.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::with_capacity(26);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if self.includes([dx, dy, dz]) {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Neighbour offsets that precede the current voxel in raster order.
    fn backward_offsets(self) -> Vec<[i64; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::Config(format!("connectivity must be 6, 18 or 26, got {other}"))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.as_u8()
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: u8 = s
            .parse()
            .map_err(|_| Error::Config(format!("connectivity must be 6, 18 or 26, got {s:?}")))?;
        Connectivity::try_from(v)
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Default)]
struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn make_set(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.size.push(1);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        big
    }
}

/// Component count and sizes (descending) of a dense binary mask laid out
/// x fastest with the given dims.
pub fn component_sizes(mask: &[bool], dims: [usize; 3], connectivity: Connectivity) -> Vec<usize> {
    assert_eq!(mask.len(), dims.iter().product::<usize>(), "mask/dims mismatch");
    const NONE: u32 = u32::MAX;
    let [nx, ny, nz] = dims;
    let stride_y = nx as i64;
    let stride_z = (nx * ny) as i64;
    let back = connectivity.backward_offsets();

    let mut provisional = vec![NONE; mask.len()];
    let mut sets = DisjointSet::default();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let off = x + nx * (y + ny * z);
                if !mask[off] {
                    continue;
                }
                let mut current = NONE;
                for &[dx, dy, dz] in &back {
                    let (qx, qy, qz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if qx < 0 || qy < 0 || qz < 0 || qx >= nx as i64 || qy >= ny as i64 {
                        continue;
                    }
                    let q = (qx + qy * stride_y + qz * stride_z) as usize;
                    let lab = provisional[q];
                    if lab == NONE {
                        continue;
                    }
                    current = if current == NONE { lab } else { sets.union(current, lab) };
                }
                if current == NONE {
                    current = sets.make_set();
                }
                provisional[off] = current;
            }
        }
    }

    let mut counts = vec![0usize; sets.parent.len()];
    for &lab in provisional.iter().filter(|&&l| l != NONE) {
        let root = sets.find(lab);
        counts[root as usize] += 1;
    }
    let mut sizes: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}
