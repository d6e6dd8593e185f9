//! Per-slice intensity and binary-mask operations used to build the body mask.
//!
//! Rounding is half away from zero throughout (`f64::round`). Median and mean
//! filters use replicate padding; erosion treats out-of-bounds as background.

use std::collections::VecDeque;

use crate::volume::{BinaryImage, GrayImage, Image2};

/// Per-slice min-max scaling to 0..=255. A constant slice maps to all zeros.
pub fn normalize_u8(slice: &Image2<f32>) -> GrayImage {
    let (min, max) = slice
        .data
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if slice.data.is_empty() || max <= min {
        return Image2::filled(slice.width, slice.height, 0);
    }
    let (min, range) = (min as f64, (max - min) as f64);
    slice.map(|v| (255.0 * (v as f64 - min) / range).round().clamp(0.0, 255.0) as u8)
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in &img.data {
        h[v as usize] += 1;
    }
    h
}

/// Standard 256-bin CDF equalization.
///
/// `h(v) = round((cdf(v) - cdf_min) / (N - cdf_min) * 255)`; a single-valued
/// image is returned unchanged.
pub fn hist_equalize(img: &GrayImage) -> GrayImage {
    let hist = histogram(img);
    let n = img.data.len() as u64;
    let cdf_min = hist.iter().copied().find(|&c| c > 0).unwrap_or(0);
    if n == cdf_min {
        return img.clone();
    }
    let mut lut = [0u8; 256];
    let mut cdf = 0u64;
    let denom = (n - cdf_min) as f64;
    for (v, &c) in hist.iter().enumerate() {
        cdf += c;
        if c > 0 {
            lut[v] = ((cdf - cdf_min) as f64 / denom * 255.0).round() as u8;
        }
    }
    img.map(|v| lut[v as usize])
}

/// Otsu's threshold over all 256 cut points; the mask is `value > threshold`.
///
/// Between-class variance is compared exactly as the rational
/// `(N*S0 - n0*S)^2 / (n0*n1)` in 128-bit integers, so ties are real ties and
/// resolve to the smallest threshold. An image with fewer than two distinct
/// values has no split: the threshold is its (maximum) value and the mask is empty.
pub fn otsu_threshold(img: &GrayImage) -> (u8, BinaryImage) {
    let hist = histogram(img);
    let distinct = hist.iter().filter(|&&c| c > 0).count();
    if distinct < 2 {
        let t = img.data.iter().copied().max().unwrap_or(0);
        return (t, Image2::filled(img.width, img.height, 0));
    }
    let n = img.data.len() as i128;
    let total: i128 = hist.iter().enumerate().map(|(v, &c)| v as i128 * c as i128).sum();

    let mut best_t = 0usize;
    // best score as a fraction num/den; starts at 0/1
    let (mut best_num, mut best_den) = (0u128, 1u128);
    let (mut n0, mut s0) = (0i128, 0i128);
    for (t, &c) in hist.iter().enumerate() {
        n0 += c as i128;
        s0 += t as i128 * c as i128;
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (n * s0 - n0 * total).unsigned_abs();
        let num = diff * diff;
        let den = (n0 * n1) as u128;
        let better = match (num.checked_mul(best_den), best_num.checked_mul(den)) {
            (Some(a), Some(b)) => a > b,
            // only reachable for images far larger than a CT slice
            _ => num as f64 / den as f64 > best_num as f64 / best_den as f64,
        };
        if better {
            best_num = num;
            best_den = den;
            best_t = t;
        }
    }
    let t = best_t as u8;
    (t, img.map(|v| (v > t) as u8))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Padding {
    Replicate,
    Zero,
}

/// Sliding 1D window sums of length `2r+1` along a line of `len` samples.
fn window_sums_1d(get: impl Fn(usize) -> u32, len: usize, r: usize, pad: Padding, out: &mut [u32]) {
    let ext_len = len + 2 * r;
    let mut prefix = vec![0u32; ext_len + 1];
    for i in 0..ext_len {
        let v = if i < r {
            match pad {
                Padding::Replicate => get(0),
                Padding::Zero => 0,
            }
        } else if i >= r + len {
            match pad {
                Padding::Replicate => get(len - 1),
                Padding::Zero => 0,
            }
        } else {
            get(i - r)
        };
        prefix[i + 1] = prefix[i] + v;
    }
    for (x, o) in out.iter_mut().enumerate().take(len) {
        *o = prefix[x + 2 * r + 1] - prefix[x];
    }
}

/// Count of ones in the `(2r+1)^2` window around every pixel.
fn box_count(mask: &BinaryImage, r: usize, pad: Padding) -> Vec<u32> {
    let (w, h) = (mask.width, mask.height);
    let mut rows = vec![0u32; w * h];
    for y in 0..h {
        let row = &mask.data[y * w..(y + 1) * w];
        window_sums_1d(|x| row[x] as u32, w, r, pad, &mut rows[y * w..(y + 1) * w]);
    }
    let mut out = vec![0u32; w * h];
    let mut col = vec![0u32; h];
    for x in 0..w {
        window_sums_1d(|y| rows[y * w + x], h, r, pad, &mut col);
        for y in 0..h {
            out[y * w + x] = col[y];
        }
    }
    out
}

fn radius_of(kernel: usize) -> usize {
    assert!(kernel % 2 == 1, "kernel size must be odd, got {kernel}");
    kernel / 2
}

/// Binary median: majority vote over a `kernel x kernel` replicate-padded window.
pub fn median_filter(mask: &BinaryImage, kernel: usize) -> BinaryImage {
    let r = radius_of(kernel);
    let need = (kernel * kernel / 2 + 1) as u32;
    let counts = box_count(mask, r, Padding::Replicate);
    Image2::from_vec(mask.width, mask.height, counts.into_iter().map(|c| (c >= need) as u8).collect())
}

/// Box mean over a replicate-padded window, re-binarized at >= 0.5.
pub fn mean_filter_binarize(mask: &BinaryImage, kernel: usize) -> BinaryImage {
    let r = radius_of(kernel);
    let area = (kernel * kernel) as u32;
    let counts = box_count(mask, r, Padding::Replicate);
    Image2::from_vec(mask.width, mask.height, counts.into_iter().map(|c| (2 * c >= area) as u8).collect())
}

/// Sets enclosed background (4-connected complement components that do not
/// reach the border) to foreground.
pub fn fill_holes(mask: &BinaryImage) -> BinaryImage {
    let (w, h) = (mask.width, mask.height);
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |x: usize, y: usize, outside: &mut Vec<bool>, q: &mut VecDeque<usize>| {
        let i = y * w + x;
        if mask.data[i] == 0 && !outside[i] {
            outside[i] = true;
            q.push_back(i);
        }
    };
    for x in 0..w {
        seed(x, 0, &mut outside, &mut queue);
        seed(x, h - 1, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(0, y, &mut outside, &mut queue);
        seed(w - 1, y, &mut outside, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let mut visit = |j: usize| {
            if mask.data[j] == 0 && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < w {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - w);
        }
        if y + 1 < h {
            visit(i + w);
        }
    }
    Image2::from_vec(w, h, outside.into_iter().map(|o| (!o) as u8).collect())
}

/// Erosion by a solid `size x size` square; pixels outside the image count as 0.
pub fn erode(mask: &BinaryImage, size: usize) -> BinaryImage {
    let r = radius_of(size);
    let full = (size * size) as u32;
    let counts = box_count(mask, r, Padding::Zero);
    Image2::from_vec(mask.width, mask.height, counts.into_iter().map(|c| (c == full) as u8).collect())
}

/// Dilation by a solid `size x size` square.
pub fn dilate(mask: &BinaryImage, size: usize) -> BinaryImage {
    let r = radius_of(size);
    let counts = box_count(mask, r, Padding::Zero);
    Image2::from_vec(mask.width, mask.height, counts.into_iter().map(|c| (c > 0) as u8).collect())
}

/// Opening: erosion then dilation with a solid square.
pub fn morph_open(mask: &BinaryImage, size: usize) -> BinaryImage {
    dilate(&erode(mask, size), size)
}
