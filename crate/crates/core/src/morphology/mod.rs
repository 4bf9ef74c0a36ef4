//! Structural algorithms on binary masks: connected components, dilation,
//! small-component removal, boundary extraction and the exact anisotropic
//! Euclidean distance transform.

mod components;
mod dilate;
mod edt;

pub use components::{connected_components, filter_small, LabelMap};
pub use dilate::{dilate, dilate_euclidean, dilate_labels, DilationShape};
pub use edt::{distance_transform, squared_distance_transform};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BinaryMask;

/// Neighbor stencil used to decide whether two voxels touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Face neighbors.
    Six,
    /// Face and edge neighbors.
    Eighteen,
    /// Face, edge and corner neighbors.
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn neighbors(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// All neighbor offsets of the stencil.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let max_l1 = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::with_capacity(self.neighbors() as usize);
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let l1 = dx.abs() + dy.abs() + dz.abs();
                    if l1 > 0 && l1 <= max_l1 {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Offsets that precede the center voxel in x-fastest scan order.
    pub(crate) fn backward_offsets(self) -> Vec<[i64; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::Config(format!("connectivity must be 6, 18 or 26, got {n}"))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.neighbors()
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.neighbors())
    }
}

/// Foreground voxels with at least one face neighbor that is background or
/// outside the grid.
pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let grid = mask.grid().clone();
    let [nx, ny, nz] = grid.dims();
    let bits = mask.bits();
    let mut out = vec![false; grid.len()];
    out.par_chunks_mut(nx * ny).enumerate().for_each(|(z, slab)| {
        let base = z * nx * ny;
        for y in 0..ny {
            for x in 0..nx {
                let i = base + x + nx * y;
                if !bits[i] {
                    continue;
                }
                slab[x + nx * y] = x == 0
                    || x + 1 == nx
                    || y == 0
                    || y + 1 == ny
                    || z == 0
                    || z + 1 == nz
                    || !bits[i - 1]
                    || !bits[i + 1]
                    || !bits[i - nx]
                    || !bits[i + nx]
                    || !bits[i - nx * ny]
                    || !bits[i + nx * ny];
            }
        }
    });
    BinaryMask::new(grid, out).expect("boundary keeps the grid size")
}
