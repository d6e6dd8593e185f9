//! Line-oriented text format for per-case slice transforms.
//!
//! ```text
//! # kidseg slice transforms v1
//! original_dims <W> <H> <D>
//! # index valid raw_cx raw_cy raw_zoom smooth_cx smooth_cy smooth_zoom
//! 0 1 255.5 240 1.2190476190476192 255.49999999999997 240.00000000000003 1.2190476190476192
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form so restoration from the file
//! reproduces the in-memory transforms bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::SliceTransform;
use crate::volume::Dims;

const MAGIC: &str = "# kidseg slice transforms v1";

#[derive(Clone, Debug, PartialEq)]
pub struct TransformRecord {
    pub original_dims: Dims,
    pub transforms: Vec<SliceTransform>,
}

pub fn format_transforms(original_dims: Dims, transforms: &[SliceTransform]) -> String {
    let mut s = String::new();
    s.push_str(MAGIC);
    s.push('\n');
    let _ = writeln!(
        s,
        "original_dims {} {} {}",
        original_dims.width, original_dims.height, original_dims.depth
    );
    s.push_str("# index valid raw_cx raw_cy raw_zoom smooth_cx smooth_cy smooth_zoom\n");
    for t in transforms {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {}",
            t.slice_index,
            t.valid as u8,
            t.raw_center.0,
            t.raw_center.1,
            t.raw_zoom,
            t.smooth_center.0,
            t.smooth_center.1,
            t.smooth_zoom
        );
    }
    s
}

pub fn write_transforms(path: impl AsRef<Path>, original_dims: Dims, transforms: &[SliceTransform]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_transforms(original_dims, transforms)).map_err(|e| Error::io_at(path, e))
}

pub fn parse_transforms(text: &str) -> Result<TransformRecord> {
    let bad = |line: usize, msg: &str| Error::Format(format!("transforms line {}: {msg}", line + 1));
    let mut dims = None;
    let mut transforms = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] == "original_dims" {
            let nums: Vec<usize> = fields[1..]
                .iter()
                .map(|f| f.parse().map_err(|_| bad(ln, "bad dimension")))
                .collect::<Result<_>>()?;
            if nums.len() != 3 {
                return Err(bad(ln, "original_dims needs three values"));
            }
            dims = Some(Dims::new(nums[0], nums[1], nums[2]));
            continue;
        }
        if fields.len() != 8 {
            return Err(bad(ln, "expected 8 fields"));
        }
        let f = |i: usize| -> Result<f64> { fields[i].parse().map_err(|_| bad(ln, "bad number")) };
        let index: usize = fields[0].parse().map_err(|_| bad(ln, "bad slice index"))?;
        if index != transforms.len() {
            return Err(bad(ln, "slice indices must be consecutive from 0"));
        }
        let valid = match fields[1] {
            "0" => false,
            "1" => true,
            _ => return Err(bad(ln, "valid flag must be 0 or 1")),
        };
        transforms.push(SliceTransform {
            slice_index: index,
            raw_center: (f(2)?, f(3)?),
            raw_zoom: f(4)?,
            smooth_center: (f(5)?, f(6)?),
            smooth_zoom: f(7)?,
            valid,
        });
    }
    let original_dims = dims.ok_or_else(|| Error::Format("transforms file lacks original_dims".into()))?;
    if original_dims.depth != transforms.len() {
        return Err(Error::Format(format!(
            "transforms file lists {} slices for depth {}",
            transforms.len(),
            original_dims.depth
        )));
    }
    Ok(TransformRecord {
        original_dims,
        transforms,
    })
}

pub fn read_transforms(path: impl AsRef<Path>) -> Result<TransformRecord> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    parse_transforms(&text)
}
