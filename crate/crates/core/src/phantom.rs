//! Seeded synthetic CT cases and stand-in segmenter masks.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`, drawn in a fixed
//! order, so a spec reproduces bit-identical volumes on every platform.
//! Intensities are whole Hounsfield units.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::CaseMasks;
use crate::preprocess::{geometry, OUTPUT_SIZE, PROCESS_SIZE};
use crate::validation::{kidney_failures, measure_region, tumor_failures, BoundingBox, ValidationRules};
use crate::volume::{CtVolume, Dims, LabelVolume, MaskRole, MaskVolume, Spacing, KIDNEY, TUMOR};

pub const AIR_HU: f32 = -1000.0;
pub const BODY_HU: f32 = 40.0;
pub const KIDNEY_HU: f32 = 160.0;
pub const TUMOR_HU: f32 = 90.0;
pub const TABLE_HU: f32 = 400.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    /// Strip thickness in rows.
    pub thickness: usize,
    /// Rows of air between the body's lowest point and the strip.
    pub gap: usize,
}

/// Artifacts injected into the stub masks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// Compact tumor-labelled blobs below the tumor volume threshold.
    pub tumor_specks: usize,
    pub tumor_speck_voxels: usize,
    /// Compact kidney-labelled blobs below the kidney volume threshold.
    pub kidney_specks: usize,
    pub kidney_speck_voxels: usize,
    /// Single-slice patches, alternating tumor and kidney labels.
    pub slivers: usize,
    /// Well-shaped tumor blobs placed outside the tumor depth band.
    pub out_of_band: usize,
}

impl CorruptionSpec {
    pub fn none() -> Self {
        Self::default()
    }

    /// A mix of every artifact kind.
    pub fn standard() -> Self {
        Self {
            tumor_specks: 2,
            tumor_speck_voxels: 20,
            kidney_specks: 2,
            kidney_speck_voxels: 60,
            slivers: 2,
            out_of_band: 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tumor_specks + self.kidney_specks + self.slivers + self.out_of_band == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub seed: u64,
    pub dims: Dims,
    /// In-plane body ellipse semi-axes (voxels).
    pub body_axes: (f64, f64),
    /// Horizontal body shift per slice (voxels); 0 keeps the body static.
    pub body_drift: f64,
    /// Kidney ellipsoid semi-axes (x, y, z) in voxels.
    pub kidney_axes: [f64; 3],
    /// Lateral and vertical offset of each kidney center from the body center.
    pub kidney_offset: (f64, f64),
    /// Tumor ellipsoid semi-axes; `None` for a tumor-free case.
    pub tumor_axes: Option<[f64; 3]>,
    /// Uniform noise amplitude in HU.
    pub noise: f64,
    pub table: Option<TableSpec>,
    pub corruption: CorruptionSpec,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            dims: Dims::new(384, 384, 48),
            body_axes: (150.0, 115.0),
            body_drift: 0.0,
            kidney_axes: [21.0, 27.0, 19.0],
            kidney_offset: (75.0, 10.0),
            tumor_axes: Some([9.0, 9.0, 8.0]),
            noise: 20.0,
            table: Some(TableSpec { thickness: 6, gap: 10 }),
            corruption: CorruptionSpec::none(),
        }
    }
}

impl PhantomSpec {
    /// Case `index` of a seeded batch: depth, kidney size and tumor presence vary.
    pub fn sample(seed: u64, index: usize) -> Self {
        let case_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        let depth = rng.random_range(44..=56);
        let grow = rng.random_range(0.0..2.0);
        let tumor = rng.random_bool(0.8);
        let tumor_r = rng.random_range(8.0..10.0);
        Self {
            seed: case_seed,
            dims: Dims::new(384, 384, depth),
            kidney_axes: [21.0 + grow, 27.0 + grow, 19.0],
            tumor_axes: tumor.then_some([tumor_r, tumor_r, 8.0]),
            ..Self::default()
        }
    }

    /// In-plane scale from this phantom's frame to the 256 grid, using the
    /// zoom the body's bounding box implies.
    fn preprocessed_scale(&self) -> (f64, f64) {
        let (sx, sy) = (
            PROCESS_SIZE as f64 / self.dims.width as f64,
            PROCESS_SIZE as f64 / self.dims.height as f64,
        );
        let extent = (2.0 * self.body_axes.0 * sx).max(2.0 * self.body_axes.1 * sy);
        let zoom = (PROCESS_SIZE as f64 / (extent + 2.0 * geometry::ZOOM_MARGIN))
            .clamp(geometry::MIN_ZOOM, geometry::MAX_ZOOM);
        let down = OUTPUT_SIZE as f64 / PROCESS_SIZE as f64;
        (sx * zoom * down, sy * zoom * down)
    }

    /// Estimated kidney voxel count on the preprocessed grid.
    pub fn estimated_kidney_volume(&self) -> f64 {
        let (sx, sy) = self.preprocessed_scale();
        let [a, b, c] = self.kidney_axes;
        4.0 / 3.0 * std::f64::consts::PI * a * b * c * sx * sy
    }

    fn check(&self) -> Result<()> {
        let d = self.dims;
        if d.width < 64 || d.height < 64 || d.depth < 8 {
            return Err(Error::Spec(format!("dims {d} too small (need >= 64x64x8)")));
        }
        if self.noise < 0.0 || !self.noise.is_finite() {
            return Err(Error::Spec("noise amplitude must be >= 0".into()));
        }
        let (bw, bh) = self.body_axes;
        let drift_reach = self.body_drift.abs() * d.depth as f64;
        if bw <= 0.0 || bh <= 0.0 || bw + drift_reach > d.width as f64 / 2.0 || bh > d.height as f64 / 2.0 {
            return Err(Error::Spec("body ellipse does not fit in the frame".into()));
        }
        let [ka, kb, kc] = self.kidney_axes;
        if ka <= 0.0 || kb <= 0.0 || kc <= 0.0 {
            return Err(Error::Spec("kidney semi-axes must be positive".into()));
        }
        // both kidneys' in-plane extremes must lie inside the body ellipse
        let (ox, oy) = self.kidney_offset;
        for (px, py) in [(ox.abs() + ka, oy), (ox.abs() - ka, oy), (ox.abs(), oy + kb), (ox.abs(), oy - kb)] {
            if (px / bw).powi(2) + (py / bh).powi(2) > 1.0 {
                return Err(Error::Spec(format!(
                    "kidney (semi-axes {ka}x{kb} at offset {ox},{oy}) is larger than the body"
                )));
            }
        }
        let center_z = (d.depth - 1) as f64 / 2.0;
        if kc + 2.0 > center_z {
            return Err(Error::Spec(format!("kidney z semi-axis {kc} needs more than {} slices", d.depth)));
        }
        if let Some([ta, tb, tc]) = self.tumor_axes {
            if ta <= 0.0 || tb <= 0.0 || tc <= 0.0 {
                return Err(Error::Spec("tumor semi-axes must be positive".into()));
            }
            let reach = ox.abs() + ka + ta;
            if (reach / bw).powi(2) + (oy / bh).powi(2) > 1.0 {
                return Err(Error::Spec("tumor extends outside the body".into()));
            }
        }
        if let Some(t) = &self.table {
            if oy_floor(self) + (t.gap + t.thickness) as f64 >= d.height as f64 {
                return Err(Error::Spec("table strip falls outside the frame".into()));
            }
        }
        let est = self.estimated_kidney_volume();
        if est <= 19_000.0 * 1.2 {
            return Err(Error::Spec(format!(
                "kidneys would measure ~{est:.0} voxels after preprocessing; too close to the 19000 threshold"
            )));
        }
        Ok(())
    }
}

fn oy_floor(spec: &PhantomSpec) -> f64 {
    spec.dims.height as f64 / 2.0 + spec.body_axes.1
}

struct Ellipsoid {
    center: [f64; 3],
    axes: [f64; 3],
}

impl Ellipsoid {
    #[inline]
    fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        let d = [
            (x - self.center[0]) / self.axes[0],
            (y - self.center[1]) / self.axes[1],
            (z - self.center[2]) / self.axes[2],
        ];
        d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= 1.0
    }
}

/// Renders a phantom: body ellipse per slice, optional table strip, two
/// kidneys (label 1) and optionally a tumor bulging from one of them (label 2).
pub fn generate_case(spec: &PhantomSpec) -> Result<(CtVolume, LabelVolume)> {
    spec.check()?;
    let dims = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (cx, cy) = (dims.width as f64 / 2.0, dims.height as f64 / 2.0);
    let mid_z = (dims.depth - 1) as f64 / 2.0;
    let span = 0.05 * (dims.depth - 1) as f64;

    let mut kidneys = Vec::with_capacity(2);
    for side in [-1.0, 1.0] {
        let jx = rng.random_range(-3.0..=3.0);
        let jy = rng.random_range(-3.0..=3.0);
        let jz = rng.random_range(-span..=span);
        kidneys.push(Ellipsoid {
            center: [cx + side * spec.kidney_offset.0 + jx, cy + spec.kidney_offset.1 + jy, mid_z + jz],
            axes: spec.kidney_axes,
        });
    }
    let tumor = spec.tumor_axes.map(|axes| {
        let which = rng.random_range(0..2usize);
        let k = &kidneys[which];
        let outward = if which == 0 { -1.0 } else { 1.0 };
        Ellipsoid {
            center: [k.center[0] + outward * 0.8 * k.axes[0], k.center[1], k.center[2]],
            axes,
        }
    });

    let mut ct = vec![0f32; dims.len()];
    let mut labels = vec![0u8; dims.len()];
    let (bw, bh) = spec.body_axes;
    let table_rows = spec.table.as_ref().map(|t| {
        let top = (cy + bh).ceil() as usize + t.gap;
        (top, top + t.thickness)
    });
    let noise = spec.noise.round() as i32;
    for z in 0..dims.depth {
        let bx = cx + spec.body_drift * z as f64;
        for y in 0..dims.height {
            for x in 0..dims.width {
                let (px, py, pz) = (x as f64 + 0.5, y as f64 + 0.5, z as f64);
                let i = dims.index(x, y, z);
                let in_body = ((px - bx) / bw).powi(2) + ((py - cy) / bh).powi(2) <= 1.0;
                let mut v = if in_body { BODY_HU } else { AIR_HU };
                if !in_body {
                    if let Some((top, bottom)) = table_rows {
                        let margin = dims.width / 10;
                        if (top..bottom).contains(&y) && (margin..dims.width - margin).contains(&x) {
                            v = TABLE_HU;
                        }
                    }
                }
                if in_body && kidneys.iter().any(|k| k.contains(px, py, pz)) {
                    v = KIDNEY_HU;
                    labels[i] = KIDNEY;
                }
                if in_body && tumor.as_ref().is_some_and(|t| t.contains(px, py, pz)) {
                    v = TUMOR_HU;
                    labels[i] = TUMOR;
                }
                let n = if noise > 0 { rng.random_range(-noise..=noise) } else { 0 };
                ct[i] = v + n as f32;
            }
        }
    }
    let spacing = Spacing([0.8, 0.8, 3.0]);
    Ok((CtVolume::new(dims, spacing, ct)?, LabelVolume::new(dims, spacing, labels)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    TumorSpeck,
    KidneySpeck,
    TumorSliver,
    KidneySliver,
    OutOfBandTumor,
}

/// One injected false positive and the voxels it occupies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: ArtifactKind,
    /// Label the artifact carries after combining the masks.
    pub label: u8,
    /// `[x, y, z]` voxel coordinates.
    pub voxels: Vec<[usize; 3]>,
}

#[derive(Clone, Debug)]
pub struct StubMasks {
    pub masks: CaseMasks,
    pub artifacts: Vec<Artifact>,
}

/// 6-neighbourhood binary dilation (`grow = true`) or erosion by one voxel;
/// outside the volume counts as background.
fn morph3d(bits: &[u8], dims: Dims, grow: bool) -> Vec<u8> {
    let (w, h, d) = (dims.width as i64, dims.height as i64, dims.depth as i64);
    let at = |x: i64, y: i64, z: i64| -> u8 {
        if x < 0 || y < 0 || z < 0 || x >= w || y >= h || z >= d {
            0
        } else {
            bits[dims.index(x as usize, y as usize, z as usize)]
        }
    };
    let mut out = vec![0u8; bits.len()];
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let n = [
                    at(x, y, z),
                    at(x - 1, y, z),
                    at(x + 1, y, z),
                    at(x, y - 1, z),
                    at(x, y + 1, z),
                    at(x, y, z - 1),
                    at(x, y, z + 1),
                ];
                let v = if grow { n.contains(&1) } else { n.iter().all(|&b| b == 1) };
                out[dims.index(x as usize, y as usize, z as usize)] = v as u8;
            }
        }
    }
    out
}

pub(crate) fn dilate3d(bits: &[u8], dims: Dims) -> Vec<u8> {
    morph3d(bits, dims, true)
}

pub(crate) fn erode3d(bits: &[u8], dims: Dims) -> Vec<u8> {
    morph3d(bits, dims, false)
}

/// Voxel offsets of the artifact shape, relative to its minimum corner.
fn artifact_shape(kind: ArtifactKind, spec: &CorruptionSpec) -> Vec<[usize; 3]> {
    match kind {
        ArtifactKind::TumorSpeck | ArtifactKind::KidneySpeck => {
            let n = if kind == ArtifactKind::TumorSpeck {
                spec.tumor_speck_voxels
            } else {
                spec.kidney_speck_voxels
            }
            .max(1);
            // first n voxels of a 3x3 column, slice by slice
            (0..n).map(|i| [i % 3, (i / 3) % 3, i / 9]).collect()
        }
        ArtifactKind::TumorSliver => (0..8).flat_map(|y| (0..12).map(move |x| [x, y, 0])).collect(),
        ArtifactKind::KidneySliver => (0..15).flat_map(|y| (0..20).map(move |x| [x, y, 0])).collect(),
        ArtifactKind::OutOfBandTumor => {
            // flat ellipsoid, semi-axes 7 x 7 x 2.5, five slices thick
            let mut v = Vec::new();
            for z in 0..5 {
                for y in 0..15 {
                    for x in 0..15 {
                        let d = ((x as f64 - 7.0) / 7.0).powi(2)
                            + ((y as f64 - 7.0) / 7.0).powi(2)
                            + ((z as f64 - 2.0) / 2.5).powi(2);
                        if d <= 1.0 {
                            v.push([x, y, z]);
                        }
                    }
                }
            }
            v
        }
    }
}

fn extent(shape: &[[usize; 3]]) -> [usize; 3] {
    let mut e = [0usize; 3];
    for p in shape {
        for a in 0..3 {
            e[a] = e[a].max(p[a] + 1);
        }
    }
    e
}

fn grown(b: &BoundingBox, by: usize, dims: Dims) -> BoundingBox {
    let lim = [dims.width - 1, dims.height - 1, dims.depth - 1];
    BoundingBox {
        min: b.min.map(|v| v.saturating_sub(by)),
        max: [0, 1, 2].map(|a| (b.max[a] + by).min(lim[a])),
    }
}

/// Stand-in model outputs on the preprocessed grid.
///
/// `kt_lax` is the foreground dilated by one voxel, `kt_strict` the
/// foreground eroded by one voxel and `tumor` the tumor labels exactly; then
/// artifacts from `corruption` are painted into the masks away from the
/// ground-truth foreground. Each artifact is checked to fail at least one
/// default validation rule.
pub fn stub_masks(truth: &LabelVolume, corruption: &CorruptionSpec, seed: u64) -> Result<StubMasks> {
    let dims = truth.dims();
    let fg: Vec<u8> = truth.data().iter().map(|&l| (l >= KIDNEY) as u8).collect();
    let mut lax = dilate3d(&fg, dims);
    let mut strict = erode3d(&fg, dims);
    let mut tumor: Vec<u8> = truth.data().iter().map(|&l| (l == TUMOR) as u8).collect();

    let mut occupied: Vec<BoundingBox> = Vec::new();
    if fg.contains(&1) {
        let mut min = [usize::MAX; 3];
        let mut max = [0usize; 3];
        for (i, _) in fg.iter().enumerate().filter(|(_, &b)| b == 1) {
            let (x, y, z) = dims.coords(i);
            for (a, v) in [x, y, z].into_iter().enumerate() {
                min[a] = min[a].min(v);
                max[a] = max[a].max(v);
            }
        }
        occupied.push(grown(&BoundingBox { min, max }, 2, dims));
    }

    let mut kinds = Vec::new();
    kinds.extend(std::iter::repeat_n(ArtifactKind::TumorSpeck, corruption.tumor_specks));
    kinds.extend(std::iter::repeat_n(ArtifactKind::KidneySpeck, corruption.kidney_specks));
    for i in 0..corruption.slivers {
        kinds.push(if i % 2 == 0 {
            ArtifactKind::TumorSliver
        } else {
            ArtifactKind::KidneySliver
        });
    }
    kinds.extend(std::iter::repeat_n(ArtifactKind::OutOfBandTumor, corruption.out_of_band));

    let rules = ValidationRules::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut artifacts = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let shape = artifact_shape(kind, corruption);
        let ext = extent(&shape);
        if ext[0] > dims.width || ext[1] > dims.height || ext[2] > dims.depth {
            return Err(Error::Spec(format!("{kind:?} does not fit in {dims}")));
        }
        let z_range = match kind {
            ArtifactKind::OutOfBandTumor => {
                // centroid (2 slices above the blob's base) strictly outside the
                // tumor depth band, at either end; z0 < limit guarantees that
                let span = (dims.depth - 1) as f64;
                let low = rules.tumor_z_min * span - 2.0;
                let high = (1.0 - rules.tumor_z_max) * span - 2.0;
                let top = match (low > 0.0, high > 0.0) {
                    (true, true) => rng.random_bool(0.5),
                    (false, true) => true,
                    (true, false) => false,
                    (false, false) => {
                        return Err(Error::Spec(format!("depth {} too shallow for an out-of-band blob", dims.depth)))
                    }
                };
                let limit = if top { high } else { low };
                let z0 = rng.random_range(0..limit.ceil() as usize);
                let z0 = if top { dims.depth - ext[2] - z0 } else { z0 };
                z0..=z0
            }
            _ => 0..=dims.depth - ext[2],
        };
        let mut placed = None;
        for _ in 0..10_000 {
            let x0 = rng.random_range(0..=dims.width - ext[0]);
            let y0 = rng.random_range(0..=dims.height - ext[1]);
            let z0 = rng.random_range(z_range.clone());
            let bbox = BoundingBox {
                min: [x0, y0, z0],
                max: [x0 + ext[0] - 1, y0 + ext[1] - 1, z0 + ext[2] - 1],
            };
            if occupied.iter().all(|o| !o.intersects(&bbox)) {
                placed = Some(bbox);
                break;
            }
        }
        let bbox = placed.ok_or_else(|| Error::Spec(format!("no free space left for a {kind:?}")))?;
        occupied.push(grown(&bbox, 2, dims));

        let voxels: Vec<[usize; 3]> = shape
            .iter()
            .map(|p| [bbox.min[0] + p[0], bbox.min[1] + p[1], bbox.min[2] + p[2]])
            .collect();
        let label = match kind {
            ArtifactKind::KidneySpeck | ArtifactKind::KidneySliver => KIDNEY,
            _ => TUMOR,
        };
        let props = measure_region(&voxels, dims.depth);
        let fails = if label == TUMOR {
            !tumor_failures(&props, &rules).is_empty()
        } else {
            !kidney_failures(&props, &rules).is_empty()
        };
        if !fails {
            return Err(Error::Spec(format!("{kind:?} artifact would pass validation: {props:?}")));
        }
        for v in &voxels {
            let i = dims.index(v[0], v[1], v[2]);
            lax[i] = 1;
            strict[i] = 1;
            tumor[i] = (label == TUMOR) as u8;
        }
        artifacts.push(Artifact { kind, label, voxels });
    }

    let spacing = truth.spacing();
    let masks = CaseMasks::new(
        MaskVolume::new(dims, spacing, MaskRole::KtLax, lax)?,
        MaskVolume::new(dims, spacing, MaskRole::KtStrict, strict)?,
        MaskVolume::new(dims, spacing, MaskRole::Tumor, tumor)?,
    )?;
    Ok(StubMasks { masks, artifacts })
}
