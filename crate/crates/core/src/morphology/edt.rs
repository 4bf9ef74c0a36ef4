//! Exact Euclidean distance transform with anisotropic spacing.
//!
//! Separable lower-envelope-of-parabolas algorithm (Felzenszwalb and
//! Huttenlocher): one exact 1-D squared-distance pass per axis, so the
//! result is the exact squared distance between voxel centers up to
//! floating-point rounding.

use rayon::prelude::*;

use crate::grid::{BinaryMask, Volume3D};

/// Rows of the z pass processed per parallel batch; bounds scratch memory.
const Z_PASS_BATCH: usize = 32;

/// Distance in mm from every voxel center to the nearest foreground voxel
/// center. All `+inf` when the mask is empty.
pub fn distance_transform(mask: &BinaryMask) -> Volume3D {
    let mut d = squared_distance_transform(mask, mask.grid().spacing());
    d.par_iter_mut().for_each(|v| *v = v.sqrt());
    Volume3D::new(mask.grid().clone(), d).expect("distances are never NaN")
}

/// Squared distances to the nearest foreground voxel using the given
/// per-axis spacing.
pub fn squared_distance_transform(mask: &BinaryMask, spacing: [f64; 3]) -> Vec<f64> {
    let [nx, ny, nz] = mask.grid().dims();
    let mut d: Vec<f64> = mask
        .bits()
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    if mask.is_empty() {
        return d;
    }

    d.par_chunks_mut(nx)
        .for_each_init(|| Scratch::new(nx), |s, row| s.transform_in_place(row, spacing[0]));

    if ny > 1 {
        d.par_chunks_mut(nx * ny).for_each_init(
            || Scratch::new(ny),
            |s, slab| {
                for x in 0..nx {
                    s.line.clear();
                    s.line.extend((0..ny).map(|y| slab[x + nx * y]));
                    s.transform(spacing[1]);
                    for y in 0..ny {
                        slab[x + nx * y] = s.out[y];
                    }
                }
            },
        );
    }

    if nz > 1 {
        let plane = nx * ny;
        for y0 in (0..ny).step_by(Z_PASS_BATCH) {
            let rows: Vec<Vec<f64>> = (y0..(y0 + Z_PASS_BATCH).min(ny))
                .into_par_iter()
                .map_init(
                    || Scratch::new(nz),
                    |s, y| {
                        let mut out = Vec::with_capacity(nx * nz);
                        for x in 0..nx {
                            let base = x + nx * y;
                            s.line.clear();
                            s.line.extend((0..nz).map(|z| d[base + plane * z]));
                            s.transform(spacing[2]);
                            out.extend_from_slice(&s.out);
                        }
                        out
                    },
                )
                .collect();
            for (dy, row) in rows.iter().enumerate() {
                let y = y0 + dy;
                for x in 0..nx {
                    let base = x + nx * y;
                    for z in 0..nz {
                        d[base + plane * z] = row[x * nz + z];
                    }
                }
            }
        }
    }
    d
}

struct Scratch {
    line: Vec<f64>,
    out: Vec<f64>,
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            line: Vec::with_capacity(n),
            out: vec![0.0; n],
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    fn transform_in_place(&mut self, row: &mut [f64], spacing: f64) {
        self.line.clear();
        self.line.extend_from_slice(row);
        self.transform(spacing);
        row.copy_from_slice(&self.out);
    }

    /// `out[q] = min_p ((q - p) * spacing)^2 + line[p]`, skipping infinite
    /// sites.
    fn transform(&mut self, spacing: f64) {
        let f = &self.line;
        let n = f.len();
        self.out.resize(n, 0.0);
        self.sites.resize(n, 0);
        self.bounds.resize(n + 1, 0.0);
        let Some(first) = f.iter().position(|v| v.is_finite()) else {
            self.out.fill(f64::INFINITY);
            return;
        };
        let pos = |i: usize| i as f64 * spacing;
        let v = &mut self.sites;
        let z = &mut self.bounds;
        let mut k = 0;
        v[0] = first;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in first + 1..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + pos(q) * pos(q);
            let mut s;
            loop {
                let p = v[k];
                s = (fq - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
                if s <= z[k] {
                    // z[0] is -inf, so k > 0 here
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for q in 0..n {
            let x = pos(q);
            while z[k + 1] < x {
                k += 1;
            }
            let dx = (q as f64 - v[k] as f64) * spacing;
            self.out[q] = dx * dx + f[v[k]];
        }
    }
}
