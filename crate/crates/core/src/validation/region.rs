//! Region measurements.

use std::collections::HashSet;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::Serialize;

use crate::volume::{Dims, LabelVolume};

/// Inclusive axis-aligned box, `[x, y, z]` order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    /// Closed-interval overlap on all three axes (touching counts).
    pub fn intersects(&self, other: &BoundingBox) -> bool {
        (0..3).all(|a| self.min[a] <= other.max[a] && other.min[a] <= self.max[a])
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| self.min[a] <= p[a] && p[a] <= self.max[a])
    }
}

/// One connected region and its measured properties.
#[derive(Clone, Debug, PartialEq)]
pub struct Region3D {
    pub class_label: u8,
    /// Linear voxel indices, ascending.
    pub voxels: Vec<usize>,
    pub properties: RegionProperties,
}

/// Shape measurements in index units ("normalized units").
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionProperties {
    pub volume: usize,
    pub centroid: [f64; 3],
    /// Centroid depth over `depth - 1`; 0.5 for single-slice volumes.
    pub z_fraction: f64,
    pub bbox: BoundingBox,
    /// Number of distinct slices the region occupies.
    pub frame_span: usize,
    /// `4 * sqrt(largest covariance eigenvalue)`.
    pub major_axis: f64,
    /// `4 * sqrt(smallest covariance eigenvalue)`.
    pub minor_axis: f64,
    /// Exposed voxel faces (6-neighbourhood).
    pub surface_area: usize,
    /// `pi^(1/3) * (6V)^(2/3) / A`.
    pub sphericity: f64,
}

/// Measures a voxel set given a membership test used for the face count.
fn measure_with(coords: &[[usize; 3]], depth: usize, dims: Option<Dims>, is_member: impl Fn([i64; 3]) -> bool) -> RegionProperties {
    assert!(!coords.is_empty(), "cannot measure an empty region");
    let n = coords.len() as f64;
    let mut sum = [0.0f64; 3];
    let mut min = [usize::MAX; 3];
    let mut max = [0usize; 3];
    for c in coords {
        for a in 0..3 {
            sum[a] += c[a] as f64;
            min[a] = min[a].min(c[a]);
            max[a] = max[a].max(c[a]);
        }
    }
    let mean = [sum[0] / n, sum[1] / n, sum[2] / n];

    let mut cov = Matrix3::<f64>::zeros();
    for c in coords {
        let d = [c[0] as f64 - mean[0], c[1] as f64 - mean[1], c[2] as f64 - mean[2]];
        for i in 0..3 {
            for j in i..3 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    for i in 0..3 {
        for j in i..3 {
            cov[(i, j)] /= n;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(cov).eigenvalues;
    let lmax = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);

    let mut frames: Vec<usize> = coords.iter().map(|c| c[2]).collect();
    frames.sort_unstable();
    frames.dedup();

    const FACES: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    let mut surface_area = 0usize;
    for c in coords {
        for f in &FACES {
            let p = [c[0] as i64 + f[0], c[1] as i64 + f[1], c[2] as i64 + f[2]];
            let inside = match dims {
                Some(d) => {
                    p.iter().all(|&v| v >= 0)
                        && (p[0] as usize) < d.width
                        && (p[1] as usize) < d.height
                        && (p[2] as usize) < d.depth
                }
                None => p.iter().all(|&v| v >= 0),
            };
            if !inside || !is_member(p) {
                surface_area += 1;
            }
        }
    }
    let volume = coords.len();
    let sphericity = std::f64::consts::PI.cbrt() * (6.0 * volume as f64).powf(2.0 / 3.0) / surface_area as f64;

    RegionProperties {
        volume,
        centroid: mean,
        z_fraction: if depth > 1 { mean[2] / (depth - 1) as f64 } else { 0.5 },
        bbox: BoundingBox { min, max },
        frame_span: frames.len(),
        major_axis: 4.0 * lmax.sqrt(),
        minor_axis: 4.0 * lmin.sqrt(),
        surface_area,
        sphericity,
    }
}

/// Measures an arbitrary voxel set in a volume of `depth` slices.
pub fn measure_region(voxels: &[[usize; 3]], depth: usize) -> RegionProperties {
    let set: HashSet<[usize; 3]> = voxels.iter().copied().collect();
    measure_with(voxels, depth, None, |p| set.contains(&[p[0] as usize, p[1] as usize, p[2] as usize]))
}

/// Measures a component of `labels` whose voxels all carry `class`.
///
/// A 6-neighbour with the same label necessarily belongs to the same
/// 26-connected component, so membership is a label lookup.
pub(crate) fn measure_component(labels: &LabelVolume, class: u8, voxels: &[usize]) -> RegionProperties {
    let dims = labels.dims();
    let coords: Vec<[usize; 3]> = voxels
        .iter()
        .map(|&i| {
            let (x, y, z) = dims.coords(i);
            [x, y, z]
        })
        .collect();
    measure_with(&coords, dims.depth, Some(dims), |p| {
        labels.get(p[0] as usize, p[1] as usize, p[2] as usize) == class
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_voxel() {
        let p = measure_region(&[[3, 4, 5]], 10);
        assert_eq!(p.volume, 1);
        assert_eq!(p.frame_span, 1);
        assert_eq!(p.surface_area, 6);
        assert_eq!(p.major_axis, 0.0);
        assert!((p.z_fraction - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn line_segment_axes() {
        let line: Vec<[usize; 3]> = (0..9).map(|z| [0, 0, z]).collect();
        let p = measure_region(&line, 9);
        assert!((p.major_axis - 4.0 * (20.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert_eq!(p.minor_axis, 0.0);
        assert_eq!(p.frame_span, 9);
    }

    #[test]
    fn single_slice_depth_fraction_is_half() {
        assert_eq!(measure_region(&[[0, 0, 0]], 1).z_fraction, 0.5);
    }

    #[test]
    fn bbox_closed_overlap() {
        let a = BoundingBox { min: [0, 0, 0], max: [2, 2, 2] };
        let touching = BoundingBox { min: [2, 0, 0], max: [4, 2, 2] };
        let apart = BoundingBox { min: [3, 0, 0], max: [4, 2, 2] };
        assert!(a.intersects(&touching));
        assert!(!a.intersects(&apart));
    }
}
