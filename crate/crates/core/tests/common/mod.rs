//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use kidseg::volume::{BinaryImage, Dims, GrayImage, Image2};

/// Otsu by exhaustive search: for every cut `t` with both classes non-empty,
/// between-class variance `w0*w1*(mu0-mu1)^2`, kept as the exact fraction
/// `(S0*n1 - S1*n0)^2 / (N^2 * n0 * n1)` and compared by cross-multiplication.
/// First maximum wins.
pub fn otsu_oracle(pixels: &[u8]) -> u8 {
    let n = pixels.len() as u128;
    let mut best: Option<(u128, u128, u8)> = None;
    for t in 0..=255u8 {
        let (mut n0, mut s0, mut n1, mut s1) = (0u128, 0u128, 0u128, 0u128);
        for &p in pixels {
            if p <= t {
                n0 += 1;
                s0 += p as u128;
            } else {
                n1 += 1;
                s1 += p as u128;
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let (a, b) = (s0 * n1, s1 * n0);
        let d = a.abs_diff(b);
        let num = d * d;
        let den = n * n * n0 * n1;
        match best {
            Some((bn, bd, _)) if num * bd <= bn * den => {}
            _ => best = Some((num, den, t)),
        }
    }
    best.map_or_else(|| pixels.iter().copied().max().unwrap_or(0), |(_, _, t)| t)
}

/// Values of the `k x k` window around (x, y) with coordinates clamped to the image.
fn clamped_window(img: &BinaryImage, x: usize, y: usize, k: usize) -> Vec<u8> {
    let r = (k / 2) as i64;
    let mut v = Vec::with_capacity(k * k);
    for dy in -r..=r {
        for dx in -r..=r {
            let xx = (x as i64 + dx).clamp(0, img.width as i64 - 1) as usize;
            let yy = (y as i64 + dy).clamp(0, img.height as i64 - 1) as usize;
            v.push(img.get(xx, yy));
        }
    }
    v
}

pub fn median_oracle(img: &BinaryImage, k: usize) -> BinaryImage {
    let mut out = Image2::filled(img.width, img.height, 0u8);
    for y in 0..img.height {
        for x in 0..img.width {
            let mut w = clamped_window(img, x, y, k);
            w.sort_unstable();
            out.set(x, y, w[w.len() / 2]);
        }
    }
    out
}

pub fn mean_oracle(img: &BinaryImage, k: usize) -> BinaryImage {
    let mut out = Image2::filled(img.width, img.height, 0u8);
    for y in 0..img.height {
        for x in 0..img.width {
            let w = clamped_window(img, x, y, k);
            let mean = w.iter().map(|&v| v as f64).sum::<f64>() / w.len() as f64;
            out.set(x, y, (mean >= 0.5) as u8);
        }
    }
    out
}

/// Minimum (`erode`) or maximum (`dilate`) over the square window, zero outside.
pub fn minmax_oracle(img: &BinaryImage, k: usize, max: bool) -> BinaryImage {
    let r = (k / 2) as i64;
    let mut out = Image2::filled(img.width, img.height, 0u8);
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let mut vals = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    let (xx, yy) = (x + dx, y + dy);
                    let inside = xx >= 0 && yy >= 0 && xx < img.width as i64 && yy < img.height as i64;
                    vals.push(if inside { img.get(xx as usize, yy as usize) } else { 0 });
                }
            }
            let v = if max { *vals.iter().max().unwrap() } else { *vals.iter().min().unwrap() };
            out.set(x as usize, y as usize, v);
        }
    }
    out
}

/// Flood-fill labeling under 26-connectivity; components as sorted index lists, sorted.
pub fn bfs_components(data: &[u8], dims: Dims, class: u8) -> Vec<Vec<usize>> {
    let mut seen = vec![false; data.len()];
    let mut comps = Vec::new();
    for start in 0..data.len() {
        if data[start] != class || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = q.pop_front() {
            comp.push(i);
            let (x, y, z) = dims.coords(i);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if nx < 0 || ny < 0 || nz < 0 {
                            continue;
                        }
                        let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
                        if nx >= dims.width || ny >= dims.height || nz >= dims.depth {
                            continue;
                        }
                        let j = dims.index(nx, ny, nz);
                        if data[j] == class && !seen[j] {
                            seen[j] = true;
                            q.push_back(j);
                        }
                    }
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort();
    comps
}

/// Pseudo-random binary image from a byte stream (density ~ `ones/256`).
pub fn mask_from_bytes(w: usize, h: usize, bytes: &[u8], ones: u8) -> BinaryImage {
    Image2::from_vec(w, h, bytes.iter().map(|&b| (b < ones) as u8).collect())
}

pub fn gray(w: usize, h: usize, bytes: Vec<u8>) -> GrayImage {
    Image2::from_vec(w, h, bytes)
}

/// 4x4x2 int16 volume written field by field, independently of the crate's writer.
/// Stored values are `10*i - 100`; slope 2 and intercept -1024.
pub fn int16_fixture(big_endian: bool) -> Vec<u8> {
    let mut b = vec![0u8; 352];
    let put_i32 = |b: &mut [u8], at: usize, v: i32| {
        let bytes = if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        b[at..at + 4].copy_from_slice(&bytes);
    };
    let put_i16 = |b: &mut [u8], at: usize, v: i16| {
        let bytes = if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        b[at..at + 2].copy_from_slice(&bytes);
    };
    let put_f32 = |b: &mut [u8], at: usize, v: f32| {
        let bytes = if big_endian { v.to_be_bytes() } else { v.to_le_bytes() };
        b[at..at + 4].copy_from_slice(&bytes);
    };
    put_i32(&mut b, 0, 348);
    for (i, d) in [3i16, 4, 4, 2, 1, 1, 1, 1].iter().enumerate() {
        put_i16(&mut b, 40 + 2 * i, *d);
    }
    put_i16(&mut b, 70, 4);
    put_i16(&mut b, 72, 16);
    for (i, p) in [1.0f32, 0.5, 0.75, 2.5].iter().enumerate() {
        put_f32(&mut b, 76 + 4 * i, *p);
    }
    put_f32(&mut b, 108, 352.0);
    put_f32(&mut b, 112, 2.0);
    put_f32(&mut b, 116, -1024.0);
    b[344..348].copy_from_slice(b"n+1\0");
    for i in 0..32i16 {
        let v = 10 * i - 100;
        b.extend_from_slice(&if big_endian { v.to_be_bytes() } else { v.to_le_bytes() });
    }
    b
}

pub fn expected_fixture_values() -> Vec<f32> {
    (0..32).map(|i| 2.0 * (10 * i - 100) as f32 - 1024.0).collect()
}
