//! 26-connected component labeling of one label class.
//!
//! Classic two-pass scan with union-find: each foreground voxel is merged
//! with its 13 already-visited neighbours, then roots are resolved.

use crate::volume::{Dims, LabelVolume};

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
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

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller id as root so component order is scan order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Offsets (dx, dy, dz) of the neighbours that precede a voxel in scan order.
const PRIOR_NEIGHBOURS: [(i64, i64, i64); 13] = [
    (-1, -1, -1),
    (0, -1, -1),
    (1, -1, -1),
    (-1, 0, -1),
    (0, 0, -1),
    (1, 0, -1),
    (-1, 1, -1),
    (0, 1, -1),
    (1, 1, -1),
    (-1, -1, 0),
    (0, -1, 0),
    (1, -1, 0),
    (-1, 0, 0),
];

/// Voxel index lists (ascending) of every 26-connected component of `class`,
/// ordered by each component's first voxel.
pub fn label_components(labels: &LabelVolume, class: u8) -> Vec<Vec<usize>> {
    let dims: Dims = labels.dims();
    let data = labels.data();
    const NONE: u32 = u32::MAX;
    let mut provisional = vec![NONE; dims.len()];
    let mut sets = DisjointSet::new();
    let (w, h, d) = (dims.width as i64, dims.height as i64, dims.depth as i64);

    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let i = dims.index(x as usize, y as usize, z as usize);
                if data[i] != class {
                    continue;
                }
                let mut current = NONE;
                for &(dx, dy, dz) in &PRIOR_NEIGHBOURS {
                    let (nx, ny, nz) = (x + dx, y + dy, z + dz);
                    if nx < 0 || ny < 0 || nz < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = provisional[dims.index(nx as usize, ny as usize, nz as usize)];
                    if n == NONE {
                        continue;
                    }
                    if current == NONE {
                        current = n;
                    } else {
                        sets.union(current, n);
                    }
                }
                provisional[i] = if current == NONE { sets.make() } else { current };
            }
        }
    }

    let mut slot = vec![NONE; sets.parent.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for (i, &p) in provisional.iter().enumerate() {
        if p == NONE {
            continue;
        }
        let root = sets.find(p) as usize;
        if slot[root] == NONE {
            slot[root] = components.len() as u32;
            components.push(Vec::new());
        }
        components[slot[root] as usize].push(i);
    }
    components
}
