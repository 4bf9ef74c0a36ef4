use crate::grid::{BinaryMask, GridSpec, VoxelBox};

use super::Connectivity;

/// Connected-component labeling of a mask.
///
/// Labels are dense: `1..=count` all occur, `0` is background. Label `k`
/// is the `k`-th component encountered in x-fastest scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    grid: GridSpec,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl LabelMap {
    /// Wrap a raw label buffer, renumbering labels densely in scan order of
    /// first encounter.
    pub fn from_raw(grid: GridSpec, mut labels: Vec<u32>) -> Self {
        assert_eq!(labels.len(), grid.len(), "label buffer does not match grid");
        let sizes = densify(&mut labels);
        LabelMap {
            grid,
            labels,
            sizes,
        }
    }

    /// Wrap a label buffer whose labels are already `1..=count`, keeping
    /// their identity.
    pub(crate) fn with_count(grid: GridSpec, labels: Vec<u32>, count: usize) -> Self {
        let mut sizes = vec![0usize; count];
        for &l in &labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        debug_assert!(sizes.iter().all(|&s| s > 0));
        LabelMap {
            grid,
            labels,
            sizes,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of components.
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Voxel count per label; entry `k - 1` belongs to label `k`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, label: u32) -> usize {
        self.sizes[label as usize - 1]
    }

    /// Union of all components.
    pub fn foreground(&self) -> BinaryMask {
        BinaryMask::new(self.grid.clone(), self.labels.iter().map(|&l| l > 0).collect())
            .expect("same grid")
    }

    pub fn component(&self, label: u32) -> BinaryMask {
        BinaryMask::new(self.grid.clone(), self.labels.iter().map(|&l| l == label).collect())
            .expect("same grid")
    }

    /// Tight box of every component, indexed by `label - 1`.
    pub fn bounding_boxes(&self) -> Vec<VoxelBox> {
        let mut boxes: Vec<Option<VoxelBox>> = vec![None; self.count()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let v = self.grid.coords(i);
            match &mut boxes[l as usize - 1] {
                Some(b) => b.include(v),
                slot @ None => *slot = Some(VoxelBox::single(v)),
            }
        }
        boxes.into_iter().map(|b| b.expect("labels are dense")).collect()
    }

    /// Mask of the voxels inside `region` whose label satisfies `keep`, on
    /// the sub-grid of `region`.
    pub fn crop_mask(&self, region: &VoxelBox, keep: impl Fn(u32) -> bool) -> BinaryMask {
        let grid = self.grid.sub_grid(region);
        let mut bits = Vec::with_capacity(grid.len());
        let cx = region.dims()[0];
        for z in region.lo[2]..region.hi[2] {
            for y in region.lo[1]..region.hi[1] {
                let row = self.grid.index(region.lo[0], y, z);
                bits.extend(self.labels[row..row + cx].iter().map(|&l| l > 0 && keep(l)));
            }
        }
        BinaryMask::new(grid, bits).expect("crop matches sub-grid")
    }
}

/// Renumber positive labels densely by first encounter; returns sizes.
fn densify(labels: &mut [u32]) -> Vec<usize> {
    let max = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut remap = vec![0u32; max + 1];
    let mut sizes = Vec::new();
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let slot = &mut remap[*l as usize];
        if *slot == 0 {
            sizes.push(0);
            *slot = sizes.len() as u32;
        }
        *l = *slot;
        sizes[*slot as usize - 1] += 1;
    }
    sizes
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Two-pass union-find labeling.
pub fn connected_components(mask: &BinaryMask, conn: Connectivity) -> LabelMap {
    let grid = mask.grid().clone();
    let [nx, ny, nz] = grid.dims();
    let bits = mask.bits();
    let backward: Vec<([i64; 3], isize)> = conn
        .backward_offsets()
        .into_iter()
        .map(|o| (o, o[0] as isize + nx as isize * (o[1] as isize + ny as isize * o[2] as isize)))
        .collect();

    let mut labels = vec![0u32; grid.len()];
    // parent[0] is unused so provisional labels start at 1
    let mut parent: Vec<u32> = vec![0];
    for z in 0..nz {
        for y in 0..ny {
            let interior_yz = y > 0 && y + 1 < ny && z > 0;
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                if !bits[i] {
                    continue;
                }
                let interior = interior_yz && x > 0 && x + 1 < nx;
                let mut current = 0u32;
                for &(o, delta) in &backward {
                    if !interior {
                        let (px, py, pz) = (x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]);
                        if px < 0 || py < 0 || pz < 0 || px >= nx as i64 || py >= ny as i64 {
                            continue;
                        }
                    }
                    let j = (i as isize + delta) as usize;
                    let l = labels[j];
                    if l == 0 {
                        continue;
                    }
                    let root = find(&mut parent, l);
                    if current == 0 {
                        current = root;
                    } else if root != current {
                        let (lo, hi) = if root < current { (root, current) } else { (current, root) };
                        parent[hi as usize] = lo;
                        current = lo;
                    }
                }
                if current == 0 {
                    current = parent.len() as u32;
                    parent.push(current);
                }
                labels[i] = current;
            }
        }
    }
    for l in labels.iter_mut() {
        if *l != 0 {
            *l = find(&mut parent, *l);
        }
    }
    LabelMap::from_raw(grid, labels)
}

/// Drop components smaller than `min_size` voxels and renumber the rest,
/// keeping their relative order.
pub fn filter_small(labels: &LabelMap, min_size: usize) -> LabelMap {
    let min_size = min_size.max(1);
    if labels.sizes.iter().all(|&s| s >= min_size) {
        return labels.clone();
    }
    let mut remap = vec![0u32; labels.count() + 1];
    let mut next = 0u32;
    let mut sizes = Vec::new();
    for (k, &s) in labels.sizes.iter().enumerate() {
        if s >= min_size {
            next += 1;
            remap[k + 1] = next;
            sizes.push(s);
        }
    }
    let new_labels = labels.labels.iter().map(|&l| remap[l as usize]).collect();
    LabelMap {
        grid: labels.grid.clone(),
        labels: new_labels,
        sizes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new([n, n, n], [1.0; 3]).unwrap()
    }

    #[test]
    fn empty_and_single() {
        let g = grid(4);
        let lm = connected_components(&BinaryMask::empty(g.clone()), Connectivity::TwentySix);
        assert_eq!(lm.count(), 0);
        let mut m = BinaryMask::empty(g);
        m.set(1, 2, 3, true);
        let lm = connected_components(&m, Connectivity::Six);
        assert_eq!(lm.count(), 1);
        assert_eq!(lm.sizes(), &[1]);
    }

    #[test]
    fn corner_diagonal_depends_on_stencil() {
        let mut m = BinaryMask::empty(grid(3));
        m.set(0, 0, 0, true);
        m.set(1, 1, 1, true);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).count(), 1);
        assert_eq!(connected_components(&m, Connectivity::Eighteen).count(), 2);
        assert_eq!(connected_components(&m, Connectivity::Six).count(), 2);

        let mut e = BinaryMask::empty(grid(3));
        e.set(0, 0, 0, true);
        e.set(1, 1, 0, true);
        assert_eq!(connected_components(&e, Connectivity::Eighteen).count(), 1);
        assert_eq!(connected_components(&e, Connectivity::Six).count(), 2);
    }

    #[test]
    fn u_shape_merges_and_scan_order_labels() {
        // a U opening upwards: two arms joined at the bottom row
        let g = GridSpec::new([5, 4, 1], [1.0; 3]).unwrap();
        let m = BinaryMask::from_fn(g, |[x, y, _]| x == 0 || x == 4 || y == 3);
        let lm = connected_components(&m, Connectivity::Six);
        assert_eq!(lm.count(), 1);
        assert_eq!(lm.sizes(), &[3 + 3 + 5]);

        let g = GridSpec::new([5, 1, 1], [1.0; 3]).unwrap();
        let m = BinaryMask::from_fn(g, |[x, _, _]| x != 1 && x != 3);
        let lm = connected_components(&m, Connectivity::TwentySix);
        assert_eq!(lm.labels(), &[1, 0, 2, 0, 3]);
    }

    #[test]
    fn filter_small_rules() {
        let g = GridSpec::new([20, 1, 1], [1.0; 3]).unwrap();
        // sizes 4, 5, 1 in scan order
        let m = BinaryMask::from_fn(g, |[x, _, _]| x < 4 || (6..11).contains(&x) || x == 15);
        let lm = connected_components(&m, Connectivity::TwentySix);
        assert_eq!(lm.sizes(), &[4, 5, 1]);
        let kept = filter_small(&lm, 5);
        assert_eq!(kept.sizes(), &[5]);
        assert_eq!(kept.labels()[6], 1);
        assert_eq!(kept.labels()[0], 0);
        assert_eq!(filter_small(&lm, 1), lm);
        assert_eq!(filter_small(&lm, 4).sizes(), &[4, 5]);
    }

    #[test]
    fn boxes_and_crops() {
        let g = grid(6);
        let m = BinaryMask::from_fn(g, |[x, y, z]| (x < 2 && y < 2 && z < 2) || (x == 5 && y == 5));
        let lm = connected_components(&m, Connectivity::TwentySix);
        let boxes = lm.bounding_boxes();
        assert_eq!(boxes[0], VoxelBox { lo: [0; 3], hi: [2; 3] });
        assert_eq!(boxes[1], VoxelBox { lo: [5, 5, 0], hi: [6, 6, 6] });
        let c = lm.crop_mask(&boxes[1], |l| l == 2);
        assert_eq!(c.count(), 6);
    }
}
