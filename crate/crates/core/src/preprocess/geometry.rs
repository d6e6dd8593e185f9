//! Resampling and the per-slice center/zoom transform.
//!
//! Continuous pixel coordinates put pixel `i` on `[i, i+1)` with its center at
//! `i + 0.5`. A transform with center `c` and zoom `z` maps an input point `p`
//! to the output point `(p - c) * z + frame/2`, so `c` lands in the middle of
//! the frame magnified by `z`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryImage, Image2};

/// Lower/upper bound on the zoom factor.
pub const MIN_ZOOM: f64 = 1.0;
pub const MAX_ZOOM: f64 = 4.0;
/// Padding added around the body bounding box before computing zoom.
pub const ZOOM_MARGIN: f64 = 10.0;
/// Degree of the polynomial fitted to center and zoom along the slice axis.
pub const SMOOTHING_DEGREE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resample {
    Bilinear,
    Nearest,
}

fn check_target(w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 {
        return Err(Error::Argument(format!("resize target {w}x{h} has a zero dimension")));
    }
    Ok(())
}

/// Index-space source coordinate for output sample `u` (half-pixel aligned).
#[inline]
fn source_coord(u: usize, src: usize, dst: usize) -> f64 {
    (u as f64 + 0.5) * src as f64 / dst as f64 - 0.5
}

#[inline]
fn bilinear_at(img: &Image2<f32>, sx: f64, sy: f64) -> f32 {
    let sx = sx.clamp(0.0, (img.width - 1) as f64);
    let sy = sy.clamp(0.0, (img.height - 1) as f64);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width - 1), (y0 + 1).min(img.height - 1));
    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
    let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
    let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
    (top * (1.0 - fy) + bottom * fy) as f32
}

/// Resizes an intensity image.
pub fn resize(img: &Image2<f32>, width: usize, height: usize, mode: Resample) -> Result<Image2<f32>> {
    check_target(width, height)?;
    match mode {
        Resample::Nearest => resize_nearest(img, width, height),
        Resample::Bilinear => {
            if (width, height) == (img.width, img.height) {
                return Ok(img.clone());
            }
            let mut out = Vec::with_capacity(width * height);
            for v in 0..height {
                let sy = source_coord(v, img.height, height);
                for u in 0..width {
                    out.push(bilinear_at(img, source_coord(u, img.width, width), sy));
                }
            }
            Ok(Image2::from_vec(width, height, out))
        }
    }
}

/// Nearest-neighbour resize; never produces a value absent from the input.
pub fn resize_nearest<T: Copy>(img: &Image2<T>, width: usize, height: usize) -> Result<Image2<T>> {
    check_target(width, height)?;
    let xs: Vec<usize> = (0..width)
        .map(|u| (((u as f64 + 0.5) * img.width as f64 / width as f64) as usize).min(img.width - 1))
        .collect();
    let mut out = Vec::with_capacity(width * height);
    for v in 0..height {
        let sy = (((v as f64 + 0.5) * img.height as f64 / height as f64) as usize).min(img.height - 1);
        out.extend(xs.iter().map(|&sx| img.get(sx, sy)));
    }
    Ok(Image2::from_vec(width, height, out))
}

/// Unsmoothed per-slice parameters measured from the body mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawTransform {
    pub center: (f64, f64),
    pub zoom: f64,
    pub valid: bool,
}

/// Geometric record for one slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceTransform {
    pub slice_index: usize,
    pub raw_center: (f64, f64),
    pub raw_zoom: f64,
    pub smooth_center: (f64, f64),
    pub smooth_zoom: f64,
    /// False when the slice had an empty body mask.
    pub valid: bool,
}

impl SliceTransform {
    pub fn identity(slice_index: usize, frame: (usize, usize)) -> Self {
        let c = (frame.0 as f64 / 2.0, frame.1 as f64 / 2.0);
        Self {
            slice_index,
            raw_center: c,
            raw_zoom: 1.0,
            smooth_center: c,
            smooth_zoom: 1.0,
            valid: false,
        }
    }
}

/// Center of the foreground bounding box and the zoom that fits it (plus a
/// margin) to the frame, clamped to `[MIN_ZOOM, MAX_ZOOM]`.
pub fn compute_raw_transform(mask: &BinaryImage) -> RawTransform {
    let (w, h) = (mask.width, mask.height);
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for y in 0..h {
        let row = &mask.data[y * w..(y + 1) * w];
        let Some(first) = row.iter().position(|&v| v != 0) else {
            continue;
        };
        let last = row.iter().rposition(|&v| v != 0).unwrap_or(first);
        bbox = Some(match bbox {
            None => (first, last, y, y),
            Some((x0, x1, y0, _)) => (x0.min(first), x1.max(last), y0, y),
        });
    }
    match bbox {
        None => RawTransform {
            center: (w as f64 / 2.0, h as f64 / 2.0),
            zoom: 1.0,
            valid: false,
        },
        Some((x0, x1, y0, y1)) => {
            let (bw, bh) = ((x1 - x0 + 1) as f64, (y1 - y0 + 1) as f64);
            let frame = w.max(h) as f64;
            RawTransform {
                center: ((x0 + x1 + 1) as f64 / 2.0, (y0 + y1 + 1) as f64 / 2.0),
                zoom: (frame / (bw.max(bh) + 2.0 * ZOOM_MARGIN)).clamp(MIN_ZOOM, MAX_ZOOM),
                valid: true,
            }
        }
    }
}

/// Least-squares polynomial through `(x, y)` pairs evaluated at `at`.
///
/// Abscissae are mapped onto [-1, 1] over `0..=span` before building the
/// Vandermonde system, which keeps a degree-4 fit over hundreds of slices
/// well conditioned.
fn fit_and_eval(xs: &[f64], ys: &[f64], degree: usize, span: f64, at: &[f64]) -> Vec<f64> {
    let scale = |x: f64| if span > 0.0 { 2.0 * x / span - 1.0 } else { 0.0 };
    let cols = degree + 1;
    let a = DMatrix::from_fn(xs.len(), cols, |r, c| scale(xs[r]).powi(c as i32));
    let b = DVector::from_column_slice(ys);
    let coeffs = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .expect("SVD was computed with both U and V^T");
    at.iter()
        .map(|&x| {
            let t = scale(x);
            coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
        })
        .collect()
}

/// Fits center-x, center-y and zoom independently over the valid slices and
/// evaluates the fits at every slice.
///
/// The degree drops to `valid - 1` when fewer than five slices are valid.
/// With no valid slice at all every transform is the identity, flagged invalid.
pub fn smooth_transforms(raw: &[RawTransform], frame: (usize, usize)) -> Vec<SliceTransform> {
    let valid: Vec<usize> = (0..raw.len()).filter(|&i| raw[i].valid).collect();
    if valid.is_empty() {
        return (0..raw.len())
            .map(|i| {
                let mut t = SliceTransform::identity(i, frame);
                t.raw_center = raw[i].center;
                t.raw_zoom = raw[i].zoom;
                t
            })
            .collect();
    }
    let degree = SMOOTHING_DEGREE.min(valid.len() - 1);
    let span = raw.len().saturating_sub(1) as f64;
    let xs: Vec<f64> = valid.iter().map(|&i| i as f64).collect();
    let at: Vec<f64> = (0..raw.len()).map(|i| i as f64).collect();
    let fit = |f: &dyn Fn(&RawTransform) -> f64| {
        let ys: Vec<f64> = valid.iter().map(|&i| f(&raw[i])).collect();
        fit_and_eval(&xs, &ys, degree, span, &at)
    };
    let cx = fit(&|t| t.center.0);
    let cy = fit(&|t| t.center.1);
    let zoom = fit(&|t| t.zoom);
    raw.iter()
        .enumerate()
        .map(|(i, r)| SliceTransform {
            slice_index: i,
            raw_center: r.center,
            raw_zoom: r.zoom,
            smooth_center: (cx[i], cy[i]),
            smooth_zoom: zoom[i].clamp(MIN_ZOOM, MAX_ZOOM),
            valid: r.valid,
        })
        .collect()
}

/// Source position (continuous coords) sampled by output point `(u, v)`.
#[inline]
fn forward_source(t: &SliceTransform, w: usize, h: usize, u: f64, v: f64) -> (f64, f64) {
    (
        (u - w as f64 / 2.0) / t.smooth_zoom + t.smooth_center.0,
        (v - h as f64 / 2.0) / t.smooth_zoom + t.smooth_center.1,
    )
}

/// Source position (continuous coords, on the transformed frame) sampled when
/// restoring original-frame point `(x, y)`.
#[inline]
fn inverse_source(t: &SliceTransform, w: usize, h: usize, x: f64, y: f64) -> (f64, f64) {
    (
        (x - t.smooth_center.0) * t.smooth_zoom + w as f64 / 2.0,
        (y - t.smooth_center.1) * t.smooth_zoom + h as f64 / 2.0,
    )
}

fn warp_nearest<T: Copy + Default>(
    img: &Image2<T>,
    map: impl Fn(f64, f64) -> (f64, f64),
) -> Image2<T> {
    let (w, h) = (img.width, img.height);
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let (sx, sy) = map(u as f64 + 0.5, v as f64 + 0.5);
            let (fx, fy) = (sx.floor(), sy.floor());
            out.push(if fx >= 0.0 && fy >= 0.0 && fx < w as f64 && fy < h as f64 {
                img.get(fx as usize, fy as usize)
            } else {
                T::default()
            });
        }
    }
    Image2::from_vec(w, h, out)
}

/// Centers and zooms an intensity slice; samples outside the input are 0.
pub fn apply_transform(img: &Image2<f32>, t: &SliceTransform, mode: Resample) -> Image2<f32> {
    let (w, h) = (img.width, img.height);
    match mode {
        Resample::Nearest => warp_nearest(img, |u, v| forward_source(t, w, h, u, v)),
        Resample::Bilinear => {
            let mut out = Vec::with_capacity(w * h);
            for v in 0..h {
                for u in 0..w {
                    let (sx, sy) = forward_source(t, w, h, u as f64 + 0.5, v as f64 + 0.5);
                    let inside = sx >= 0.0 && sy >= 0.0 && sx <= w as f64 && sy <= h as f64;
                    out.push(if inside { bilinear_at(img, sx - 0.5, sy - 0.5) } else { 0.0 });
                }
            }
            Image2::from_vec(w, h, out)
        }
    }
}

/// Centers and zooms a label or mask slice with nearest sampling.
pub fn apply_transform_labels(img: &Image2<u8>, t: &SliceTransform) -> Image2<u8> {
    warp_nearest(img, |u, v| forward_source(t, img.width, img.height, u, v))
}

/// Exact geometric inverse of [`apply_transform_labels`] up to resampling.
pub fn invert_transform_labels(img: &Image2<u8>, t: &SliceTransform) -> Image2<u8> {
    warp_nearest(img, |x, y| inverse_source(t, img.width, img.height, x, y))
}
