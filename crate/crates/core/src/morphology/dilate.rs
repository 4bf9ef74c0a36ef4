use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::grid::BinaryMask;

use super::edt::squared_distance_transform;
use super::{Connectivity, LabelMap};

/// Structuring element used for "dilate by r voxels".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DilationShape {
    /// `r` iterations of the 3x3x3 cube: all voxels within Chebyshev
    /// distance `r`.
    #[default]
    Chebyshev,
    /// All voxels within Euclidean distance `r`, measured in voxel units.
    Euclidean,
}

impl std::str::FromStr for DilationShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "chebyshev" => Ok(DilationShape::Chebyshev),
            "euclidean" => Ok(DilationShape::Euclidean),
            other => Err(format!("unknown dilation shape `{other}` (chebyshev|euclidean)")),
        }
    }
}

impl std::fmt::Display for DilationShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DilationShape::Chebyshev => "chebyshev",
            DilationShape::Euclidean => "euclidean",
        })
    }
}

/// Chebyshev-ball dilation, separable along the three axes.
pub fn dilate(mask: &BinaryMask, radius_voxels: usize) -> BinaryMask {
    if radius_voxels == 0 {
        return mask.clone();
    }
    let grid = mask.grid().clone();
    let dims = grid.dims();
    let mut bits = mask.bits().to_vec();
    let mut line = Vec::new();
    let mut out = Vec::new();
    for axis in 0..3 {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        let [a, b] = match axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        for j in 0..dims[b] {
            for i in 0..dims[a] {
                let mut start = [0usize; 3];
                start[a] = i;
                start[b] = j;
                let base = grid.index(start[0], start[1], start[2]);
                line.clear();
                line.extend((0..n).map(|k| bits[base + k * stride]));
                dilate_line(&line, radius_voxels, &mut out);
                for (k, &v) in out.iter().enumerate() {
                    bits[base + k * stride] = v;
                }
            }
        }
    }
    BinaryMask::new(grid, bits).expect("same grid")
}

/// `out[i]` is set iff some `line[j]` with `|i - j| <= r` is set.
fn dilate_line(line: &[bool], r: usize, out: &mut Vec<bool>) {
    let n = line.len();
    out.clear();
    out.resize(n, false);
    let mut last: Option<usize> = None;
    for i in 0..n {
        if line[i] {
            last = Some(i);
        }
        if last.is_some_and(|l| i - l <= r) {
            out[i] = true;
        }
    }
    last = None;
    for i in (0..n).rev() {
        if line[i] {
            last = Some(i);
        }
        if last.is_some_and(|l| l - i <= r) {
            out[i] = true;
        }
    }
}

/// Euclidean-ball dilation with radius in voxel units (spacing ignored).
pub fn dilate_euclidean(mask: &BinaryMask, radius_voxels: usize) -> BinaryMask {
    if radius_voxels == 0 || mask.is_empty() {
        return mask.clone();
    }
    let r2 = (radius_voxels * radius_voxels) as f64;
    let d2 = squared_distance_transform(mask, [1.0; 3]);
    BinaryMask::new(mask.grid().clone(), d2.iter().map(|&d| d <= r2).collect()).expect("same grid")
}

/// Grow every component by `radius_voxels`.
///
/// Each newly covered voxel takes the label of its nearest original
/// component (Chebyshev or Euclidean voxel distance, matching `shape`);
/// ties go to the lowest label. Existing labels are never overwritten.
pub fn dilate_labels(labels: &LabelMap, radius_voxels: usize, shape: DilationShape) -> LabelMap {
    if radius_voxels == 0 || labels.count() == 0 {
        return labels.clone();
    }
    let mut out = labels.labels().to_vec();
    match shape {
        DilationShape::Chebyshev => grow_chebyshev(labels, radius_voxels, &mut out),
        DilationShape::Euclidean => grow_euclidean(labels, radius_voxels, &mut out),
    }
    LabelMap::with_count(labels.grid().clone(), out, labels.count())
}

fn neighbor(dims: [usize; 3], v: [usize; 3], o: [i64; 3]) -> Option<usize> {
    let x = v[0] as i64 + o[0];
    let y = v[1] as i64 + o[1];
    let z = v[2] as i64 + o[2];
    if x < 0 || y < 0 || z < 0 || x >= dims[0] as i64 || y >= dims[1] as i64 || z >= dims[2] as i64 {
        return None;
    }
    Some(x as usize + dims[0] * (y as usize + dims[1] * z as usize))
}

/// Layered breadth-first growth over the 26-neighborhood. On an open grid
/// the 26-neighbor graph distance equals Chebyshev distance, so layer `k`
/// is exactly the set of voxels at Chebyshev distance `k`, and the minimum
/// label among a voxel's layer-`k-1` neighbors is the minimum label among
/// its nearest components.
fn grow_chebyshev(labels: &LabelMap, radius: usize, out: &mut [u32]) {
    let grid = labels.grid();
    let dims = grid.dims();
    let offsets = Connectivity::TwentySix.offsets();
    let mut frontier: Vec<usize> = (0..out.len())
        .filter(|&i| {
            out[i] != 0 && {
                let v = grid.coords(i);
                offsets
                    .iter()
                    .any(|&o| neighbor(dims, v, o).is_some_and(|j| out[j] == 0))
            }
        })
        .collect();
    for _ in 0..radius {
        let mut layer: HashMap<usize, u32> = HashMap::new();
        for &i in &frontier {
            let label = out[i];
            let v = grid.coords(i);
            for &o in &offsets {
                if let Some(j) = neighbor(dims, v, o) {
                    if out[j] == 0 {
                        layer
                            .entry(j)
                            .and_modify(|l| *l = (*l).min(label))
                            .or_insert(label);
                    }
                }
            }
        }
        if layer.is_empty() {
            break;
        }
        frontier = layer.keys().copied().collect();
        frontier.sort_unstable();
        for (&j, &l) in &layer {
            out[j] = l;
        }
    }
}

/// Stamps a voxel-unit ball from every face-boundary voxel of each
/// component; the nearest voxel of any component to an outside point is
/// always on that component's face boundary.
fn grow_euclidean(labels: &LabelMap, radius: usize, out: &mut [u32]) {
    let grid = labels.grid();
    let dims = grid.dims();
    let r = radius as i64;
    let r2 = r * r;
    let mut ball = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = dx * dx + dy * dy + dz * dz;
                if d2 > 0 && d2 <= r2 {
                    ball.push(([dx, dy, dz], d2));
                }
            }
        }
    }
    let faces = Connectivity::Six.offsets();
    let src = labels.labels();
    let mut best: HashMap<usize, (i64, u32)> = HashMap::new();
    for (i, &label) in src.iter().enumerate() {
        if label == 0 {
            continue;
        }
        let v = grid.coords(i);
        let on_face = faces
            .iter()
            .any(|&o| neighbor(dims, v, o).is_none_or(|j| src[j] != label));
        if !on_face {
            continue;
        }
        for &(o, d2) in &ball {
            if let Some(j) = neighbor(dims, v, o) {
                if src[j] != 0 {
                    continue;
                }
                best.entry(j)
                    .and_modify(|b| {
                        if (d2, label) < *b {
                            *b = (d2, label);
                        }
                    })
                    .or_insert((d2, label));
            }
        }
    }
    for (j, (_, l)) in best {
        out[j] = l;
    }
}
