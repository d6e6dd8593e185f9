//! Slice preprocessing: normalization, body-mask extraction and artifact
//! removal, polynomial-smoothed centering/zooming and downsizing.
//!
//! Every slice goes through the same chain:
//!
//! 1. resize to 512x512 (bilinear) and min-max normalize to 0..255
//! 2. body mask = equalize, Otsu, 9x9 median, 15x15 mean, fill holes, 99x99 opening
//! 3. multiply the mask into the normalized (not equalized) slice
//! 4. center/zoom with the smoothed per-slice transform
//! 5. resize to 256x256
//!
//! Labels follow steps 1, 4 and 5 with nearest sampling. The recorded
//! [`SliceTransform`]s make the geometric path invertible ([`invert_labels`]).

pub mod filters;
pub mod geometry;
mod transform_file;

pub use filters::{
    dilate, erode, fill_holes, hist_equalize, mean_filter_binarize, median_filter, morph_open,
    normalize_u8, otsu_threshold,
};
pub use geometry::{
    apply_transform, apply_transform_labels, compute_raw_transform, invert_transform_labels, resize,
    resize_nearest, smooth_transforms, RawTransform, Resample, SliceTransform,
};
pub use transform_file::{read_transforms, write_transforms, TransformRecord};

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{BinaryImage, CtVolume, Dims, GrayImage, Image2, LabelVolume, Spacing};

/// Working frame for body-mask extraction.
pub const PROCESS_SIZE: usize = 512;
/// Model input frame.
pub const OUTPUT_SIZE: usize = 256;
pub const MEDIAN_KERNEL: usize = 9;
pub const MEAN_KERNEL: usize = 15;
pub const OPEN_KERNEL: usize = 99;

/// Binary body mask of a normalized slice; table and clothing artifacts thinner
/// than the opening kernel are excluded.
pub fn body_mask(slice: &GrayImage) -> BinaryImage {
    let equalized = hist_equalize(slice);
    let (_, mask) = otsu_threshold(&equalized);
    let mask = median_filter(&mask, MEDIAN_KERNEL);
    let mask = mean_filter_binarize(&mask, MEAN_KERNEL);
    let mask = fill_holes(&mask);
    morph_open(&mask, OPEN_KERNEL)
}

#[derive(Clone, Debug)]
pub struct PreprocessedCase {
    pub ct: CtVolume,
    pub labels: Option<LabelVolume>,
    pub transforms: Vec<SliceTransform>,
    pub original_dims: Dims,
}

struct MaskedSlice {
    masked: GrayImage,
    raw: RawTransform,
}

fn mask_slice(slice: &Image2<f32>) -> Result<MaskedSlice> {
    let big = resize(slice, PROCESS_SIZE, PROCESS_SIZE, Resample::Bilinear)?;
    let normalized = normalize_u8(&big);
    let mask = body_mask(&normalized);
    let raw = compute_raw_transform(&mask);
    let masked = Image2::from_vec(
        PROCESS_SIZE,
        PROCESS_SIZE,
        normalized.data.iter().zip(&mask.data).map(|(&v, &m)| v * m).collect(),
    );
    Ok(MaskedSlice { masked, raw })
}

fn finish_slice(masked: &GrayImage, t: &SliceTransform) -> Result<Vec<f32>> {
    let centered = apply_transform(&masked.map(f32::from), t, Resample::Bilinear);
    let small = resize(&centered, OUTPUT_SIZE, OUTPUT_SIZE, Resample::Bilinear)?;
    Ok(small.data.into_iter().map(|v| v.round().clamp(0.0, 255.0)).collect())
}

/// Forward geometric path for one label slice (original frame to 256 grid).
pub fn forward_label_slice(slice: &Image2<u8>, t: &SliceTransform) -> Result<Image2<u8>> {
    let big = resize_nearest(slice, PROCESS_SIZE, PROCESS_SIZE)?;
    let centered = apply_transform_labels(&big, t);
    resize_nearest(&centered, OUTPUT_SIZE, OUTPUT_SIZE)
}

/// Inverse geometric path for one label slice (256 grid to original frame).
pub fn inverse_label_slice(slice: &Image2<u8>, t: &SliceTransform, width: usize, height: usize) -> Result<Image2<u8>> {
    let big = resize_nearest(slice, PROCESS_SIZE, PROCESS_SIZE)?;
    let restored = invert_transform_labels(&big, t);
    resize_nearest(&restored, width, height)
}

fn output_spacing(original: Dims, spacing: Spacing) -> Spacing {
    let s = spacing.0;
    Spacing([
        s[0] * original.width as f32 / OUTPUT_SIZE as f32,
        s[1] * original.height as f32 / OUTPUT_SIZE as f32,
        s[2],
    ])
}

fn stack_slices(slices: Vec<Vec<u8>>) -> Vec<u8> {
    slices.into_iter().flatten().collect()
}

/// Runs the full chain on a case. Slices are processed in parallel; the
/// smoothing pass in between needs every slice's raw parameters.
pub fn preprocess_case(ct: &CtVolume, labels: Option<&LabelVolume>) -> Result<PreprocessedCase> {
    let dims = ct.dims();
    if let Some(l) = labels {
        if l.dims() != dims {
            return Err(Error::Inconsistent(format!(
                "labels are {} but the CT is {dims}",
                l.dims()
            )));
        }
    }
    let masked: Vec<MaskedSlice> = par::map_range(dims.depth, |z| mask_slice(&ct.slice_image(z)))
        .into_iter()
        .collect::<Result<_>>()?;
    let raw: Vec<RawTransform> = masked.iter().map(|m| m.raw).collect();
    let transforms = smooth_transforms(&raw, (PROCESS_SIZE, PROCESS_SIZE));

    let ct_slices: Vec<Vec<f32>> = par::map_range(dims.depth, |z| finish_slice(&masked[z].masked, &transforms[z]))
        .into_iter()
        .collect::<Result<_>>()?;
    drop(masked);
    let out_dims = Dims::new(OUTPUT_SIZE, OUTPUT_SIZE, dims.depth);
    let spacing = output_spacing(dims, ct.spacing());
    let ct_out = CtVolume::new(out_dims, spacing, ct_slices.into_iter().flatten().collect())?;

    let labels_out = match labels {
        None => None,
        Some(l) => {
            let slices: Vec<Vec<u8>> =
                par::map_range(dims.depth, |z| forward_label_slice(&l.slice_image(z), &transforms[z]).map(|s| s.data))
                    .into_iter()
                    .collect::<Result<_>>()?;
            Some(LabelVolume::new(out_dims, spacing, stack_slices(slices))?)
        }
    };

    Ok(PreprocessedCase {
        ct: ct_out,
        labels: labels_out,
        transforms,
        original_dims: dims,
    })
}

/// Maps a prediction on the 256 grid back onto the original frame.
pub fn invert_labels(pred: &LabelVolume, transforms: &[SliceTransform], original_dims: Dims) -> Result<LabelVolume> {
    let d = pred.dims();
    if d.width != OUTPUT_SIZE || d.height != OUTPUT_SIZE {
        return Err(Error::Argument(format!(
            "prediction is {d}, expected {OUTPUT_SIZE}x{OUTPUT_SIZE} slices"
        )));
    }
    if transforms.len() != d.depth || original_dims.depth != d.depth {
        return Err(Error::Argument(format!(
            "prediction has {} slices, transforms {}, original volume {}",
            d.depth,
            transforms.len(),
            original_dims.depth
        )));
    }
    let slices: Vec<Vec<u8>> = par::map_range(d.depth, |z| {
        inverse_label_slice(&pred.slice_image(z), &transforms[z], original_dims.width, original_dims.height)
            .map(|s| s.data)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let s = pred.spacing().0;
    let spacing = Spacing([
        s[0] * OUTPUT_SIZE as f32 / original_dims.width as f32,
        s[1] * OUTPUT_SIZE as f32 / original_dims.height as f32,
        s[2],
    ]);
    LabelVolume::new(original_dims, spacing, stack_slices(slices))
}
