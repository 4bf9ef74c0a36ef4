//! Single-slice overlay images: a min/max-windowed grayscale slice with
//! each mask alpha-blended in a fixed color, written as binary PPM.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{nonzero, BinaryMask, Volume3D};
use crate::nifti::load_nifti;

/// Mask colors, assigned in order and cycled.
pub const PALETTE: [[u8; 3]; 6] = [
    [255, 0, 0],
    [0, 255, 0],
    [0, 128, 255],
    [255, 200, 0],
    [255, 0, 255],
    [0, 255, 255],
];

/// Weight of the mask color in a tinted pixel.
pub const ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    fn index(self) -> usize {
        self as usize
    }

    /// Grid axes mapped to image columns and rows.
    fn image_axes(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(format!("unknown axis `{other}` (x|y|z)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        self.pixels[col + self.width * row]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

/// Renders slice `slice` perpendicular to `axis`. Image column / row
/// follow the lower / higher remaining grid axis (x,y for a z slice;
/// x,z for y; y,z for x), both increasing away from the origin.
pub fn render_overlay(volume: &Volume3D, masks: &[BinaryMask], axis: Axis, slice: usize) -> Result<RgbImage> {
    let grid = volume.grid();
    for m in masks {
        m.grid().ensure_same(grid)?;
    }
    let dims = grid.dims();
    let a = axis.index();
    if slice >= dims[a] {
        return Err(Error::Bounds(format!(
            "slice {slice} outside axis {axis:?} of extent {}",
            dims[a]
        )));
    }
    let (ca, ra) = axis.image_axes();
    let (width, height) = (dims[ca], dims[ra]);
    let voxel = |col: usize, row: usize| {
        let mut v = [0usize; 3];
        v[a] = slice;
        v[ca] = col;
        v[ra] = row;
        grid.index(v[0], v[1], v[2])
    };

    let data = volume.data();
    let (lo, hi) = (0..height)
        .flat_map(|r| (0..width).map(move |c| (c, r)))
        .map(|(c, r)| data[voxel(c, r)])
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let gray = |v: f64| -> f64 {
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0
        } else if v == f64::INFINITY {
            255.0
        } else {
            0.0
        }
    };

    let mut pixels = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let i = voxel(col, row);
            let g = gray(data[i]);
            let mut rgb = [g; 3];
            for (k, m) in masks.iter().enumerate() {
                if m.bits()[i] {
                    let color = PALETTE[k % PALETTE.len()];
                    for ch in 0..3 {
                        rgb[ch] = (1.0 - ALPHA) * rgb[ch] + ALPHA * color[ch] as f64;
                    }
                }
            }
            pixels.push(rgb.map(|c| c.round() as u8));
        }
    }
    Ok(RgbImage {
        width,
        height,
        pixels,
    })
}

/// Loads the volume and masks (nonzero voxels), renders one slice and
/// writes it as a binary PPM.
pub fn export_overlay<P: AsRef<Path>>(
    volume_path: impl AsRef<Path>,
    mask_paths: &[P],
    axis: Axis,
    slice: usize,
    out_path: impl AsRef<Path>,
) -> Result<()> {
    let volume = load_nifti(volume_path)?;
    let masks = mask_paths
        .iter()
        .map(|p| load_nifti(p).map(|v| nonzero(&v)))
        .collect::<Result<Vec<_>>>()?;
    let image = render_overlay(&volume, &masks, axis, slice)?;
    let out = out_path.as_ref();
    fs::write(out, image.to_ppm()).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn ramp() -> Volume3D {
        let g = GridSpec::new([4, 3, 2], [1.0; 3]).unwrap();
        Volume3D::new(g, (0..24).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn empty_mask_is_plain_window() {
        let v = ramp();
        let plain = render_overlay(&v, &[], Axis::Z, 1).unwrap();
        let with_empty = render_overlay(&v, &[BinaryMask::empty(v.grid().clone())], Axis::Z, 1).unwrap();
        assert_eq!(plain, with_empty);
        // slice z=1 holds 12..=23: the window maps 12 -> 0 and 23 -> 255
        assert_eq!(plain.pixel(0, 0), [0; 3]);
        assert_eq!(plain.pixel(3, 2), [255; 3]);
    }

    #[test]
    fn single_voxel_tints_one_pixel() {
        let v = ramp();
        let mut m = BinaryMask::empty(v.grid().clone());
        m.set(2, 1, 0, true);
        let img = render_overlay(&v, &[m], Axis::Z, 0).unwrap();
        let base = render_overlay(&v, &[], Axis::Z, 0).unwrap();
        let diff: Vec<usize> = (0..img.pixels.len()).filter(|&i| img.pixels[i] != base.pixels[i]).collect();
        assert_eq!(diff, vec![2 + 4]);
        // value 6 of 0..=11
        let g: f64 = 6.0 / 11.0 * 255.0;
        assert_eq!(img.pixel(2, 1), [(0.5 * g + 127.5).round() as u8, (0.5 * g).round() as u8, (0.5 * g).round() as u8]);
    }

    #[test]
    fn out_of_range_slice() {
        let v = ramp();
        assert!(matches!(render_overlay(&v, &[], Axis::Z, 2), Err(Error::Bounds(_))));
        assert!(render_overlay(&v, &[], Axis::X, 3).is_ok());
        let img = render_overlay(&v, &[], Axis::X, 3).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
    }

    #[test]
    fn ppm_header() {
        let img = render_overlay(&ramp(), &[], Axis::Y, 0).unwrap();
        let ppm = img.to_ppm();
        assert!(ppm.starts_with(b"P6\n4 2\n255\n"));
        assert_eq!(ppm.len(), b"P6\n4 2\n255\n".len() + 4 * 2 * 3);
    }
}
