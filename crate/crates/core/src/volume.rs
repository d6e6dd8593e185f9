//! Volume and image containers.
//!
//! All volumes are stored x-fastest, then y, then z (the NIfTI on-disk order),
//! so axial slice `z` is the contiguous range `z * width * height ..`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
    pub depth: usize,
}

impl Dims {
    pub const fn new(width: usize, height: usize, depth: usize) -> Self {
        Self {
            width,
            height,
            depth,
        }
    }

    pub const fn len(&self) -> usize {
        self.width * self.height * self.depth
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn slice_len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub const fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.width * (y + self.height * z)
    }

    #[inline]
    pub const fn coords(&self, index: usize) -> (usize, usize, usize) {
        let plane = self.slice_len();
        let z = index / plane;
        let rem = index % plane;
        (rem % self.width, rem / self.width, z)
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.depth == 0 {
            return Err(Error::Argument(format!("volume dimensions must be >= 1, got {self}")));
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.width, self.height, self.depth)
    }
}

/// Voxel spacing in millimeters along x, y, z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spacing(pub [f32; 3]);

impl Default for Spacing {
    fn default() -> Self {
        Spacing([1.0; 3])
    }
}

impl Spacing {
    fn check(&self) -> Result<()> {
        if self.0.iter().all(|s| s.is_finite() && *s > 0.0) {
            Ok(())
        } else {
            Err(Error::Argument(format!("voxel spacing must be positive, got {:?}", self.0)))
        }
    }
}

/// CT intensities (Hounsfield-scaled, or 0..255 after preprocessing).
#[derive(Clone, Debug, PartialEq)]
pub struct CtVolume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f32>,
}

impl CtVolume {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f32>) -> Result<Self> {
        dims.check_nonempty()?;
        spacing.check()?;
        check_len(dims, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite intensity at voxel {i}")));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn slice(&self, z: usize) -> &[f32] {
        let n = self.dims.slice_len();
        &self.data[z * n..(z + 1) * n]
    }

    pub fn slice_image(&self, z: usize) -> Image2<f32> {
        Image2::from_vec(self.dims.width, self.dims.height, self.slice(z).to_vec())
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// Voxel labels: 0 background, 1 kidney, 2 tumor.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<u8>,
}

pub const BACKGROUND: u8 = 0;
pub const KIDNEY: u8 = 1;
pub const TUMOR: u8 = 2;

impl LabelVolume {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<u8>) -> Result<Self> {
        dims.check_nonempty()?;
        spacing.check()?;
        check_len(dims, data.len())?;
        if let Some(i) = data.iter().position(|&v| v > TUMOR) {
            return Err(Error::Argument(format!(
                "label {} at voxel {i} is outside {{0, 1, 2}}",
                data[i]
            )));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn zeros(dims: Dims, spacing: Spacing) -> Result<Self> {
        Self::new(dims, spacing, vec![0; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.dims.index(x, y, z)]
    }

    pub fn slice(&self, z: usize) -> &[u8] {
        let n = self.dims.slice_len();
        &self.data[z * n..(z + 1) * n]
    }

    pub fn slice_image(&self, z: usize) -> Image2<u8> {
        Image2::from_vec(self.dims.width, self.dims.height, self.slice(z).to_vec())
    }

    pub fn count(&self, label: u8) -> usize {
        self.data.iter().filter(|&&v| v == label).count()
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

/// Which of the three segmenters produced a mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskRole {
    /// Lax kidney-and-tumor model; gates the ensemble.
    KtLax,
    /// Strict kidney-and-tumor model.
    KtStrict,
    /// Tumor-only model.
    Tumor,
}

impl MaskRole {
    pub const ALL: [MaskRole; 3] = [MaskRole::KtLax, MaskRole::KtStrict, MaskRole::Tumor];

    pub const fn as_str(&self) -> &'static str {
        match self {
            MaskRole::KtLax => "kt_lax",
            MaskRole::KtStrict => "kt_strict",
            MaskRole::Tumor => "tumor",
        }
    }
}

impl fmt::Display for MaskRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Binary output of one segmenter.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskVolume {
    dims: Dims,
    spacing: Spacing,
    role: MaskRole,
    data: Vec<u8>,
}

impl MaskVolume {
    pub fn new(dims: Dims, spacing: Spacing, role: MaskRole, data: Vec<u8>) -> Result<Self> {
        dims.check_nonempty()?;
        spacing.check()?;
        check_len(dims, data.len())?;
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::Argument(format!(
                "{role} mask value {} at voxel {i} is not binary",
                data[i]
            )));
        }
        Ok(Self {
            dims,
            spacing,
            role,
            data,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn role(&self) -> MaskRole {
        self.role
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

fn check_len(dims: Dims, len: usize) -> Result<()> {
    if dims.len() != len {
        return Err(Error::Argument(format!(
            "payload has {len} voxels but {dims} needs {}",
            dims.len()
        )));
    }
    Ok(())
}

/// Row-major 2D buffer (x fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Image2<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Copy> Image2<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "image buffer length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Image2<U> {
        Image2 {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// 0/1 mask image.
pub type BinaryImage = Image2<u8>;
/// 0..255 intensity image.
pub type GrayImage = Image2<u8>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trips_through_coords() {
        let d = Dims::new(5, 4, 3);
        for i in 0..d.len() {
            let (x, y, z) = d.coords(i);
            assert_eq!(d.index(x, y, z), i);
        }
    }

    #[test]
    fn rejects_empty_dims_and_bad_labels() {
        assert!(LabelVolume::new(Dims::new(0, 2, 2), Spacing::default(), vec![]).is_err());
        assert!(LabelVolume::new(Dims::new(1, 1, 1), Spacing::default(), vec![3]).is_err());
        assert!(MaskVolume::new(Dims::new(1, 1, 1), Spacing::default(), MaskRole::Tumor, vec![2]).is_err());
        assert!(CtVolume::new(Dims::new(1, 1, 1), Spacing::default(), vec![f32::NAN]).is_err());
        assert!(CtVolume::new(Dims::new(1, 1, 1), Spacing([1.0, 0.0, 1.0]), vec![0.0]).is_err());
    }
}
