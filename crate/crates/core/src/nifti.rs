//! Single-file NIfTI-1 (`.nii` / `.nii.gz`) reading and writing.
//!
//! Only the fields needed for axial stacks are interpreted: `dim`, `datatype`,
//! `bitpix`, `pixdim`, `vox_offset`, `scl_slope`, `scl_inter` and the magic.
//! Orientation (qform/sform) is ignored; slice index is the third axis in
//! stored order. A `scl_slope` of 0 is treated as 1.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian, WriteBytesExt};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{CtVolume, Dims, LabelVolume, MaskRole, MaskVolume, Spacing};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag block.
pub const SINGLE_FILE_OFFSET: usize = 352;
pub const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
pub const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// The subset of NIfTI-1 data types this crate reads and writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataType {
    Uint8,
    Int16,
    Float32,
}

impl DataType {
    pub const fn code(self) -> i16 {
        match self {
            DataType::Uint8 => 2,
            DataType::Int16 => 4,
            DataType::Float32 => 16,
        }
    }

    pub const fn bytes_per_voxel(self) -> usize {
        match self {
            DataType::Uint8 => 1,
            DataType::Int16 => 2,
            DataType::Float32 => 4,
        }
    }

    fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(DataType::Uint8),
            4 => Ok(DataType::Int16),
            16 => Ok(DataType::Float32),
            other => Err(Error::UnsupportedType(other)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

/// Parsed header fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub dims: Dims,
    pub spacing: Spacing,
    pub datatype: DataType,
    pub vox_offset: usize,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub big_endian: bool,
}

impl Header {
    pub fn payload_len(&self) -> usize {
        self.dims.len() * self.datatype.bytes_per_voxel()
    }

    /// Effective (slope, intercept) with the slope-0 convention applied.
    pub fn scaling(&self) -> (f32, f32) {
        let slope = if self.scl_slope == 0.0 || !self.scl_slope.is_finite() {
            1.0
        } else {
            self.scl_slope
        };
        let inter = if self.scl_inter.is_finite() {
            self.scl_inter
        } else {
            0.0
        };
        (slope, inter)
    }
}

fn read_i16(buf: &[u8], off: usize, e: Endian) -> i16 {
    match e {
        Endian::Little => LittleEndian::read_i16(&buf[off..]),
        Endian::Big => BigEndian::read_i16(&buf[off..]),
    }
}

fn read_i32(buf: &[u8], off: usize, e: Endian) -> i32 {
    match e {
        Endian::Little => LittleEndian::read_i32(&buf[off..]),
        Endian::Big => BigEndian::read_i32(&buf[off..]),
    }
}

fn read_f32(buf: &[u8], off: usize, e: Endian) -> f32 {
    match e {
        Endian::Little => LittleEndian::read_f32(&buf[off..]),
        Endian::Big => BigEndian::read_f32(&buf[off..]),
    }
}

/// Parses the 348-byte header at the start of `bytes`.
pub fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Format(format!(
            "file is {} bytes, shorter than the {HEADER_SIZE}-byte header",
            bytes.len()
        )));
    }
    // dim[0] must be 1..=7; whichever byte order makes it so is the file's order.
    let endian = if (1..=7).contains(&LittleEndian::read_i16(&bytes[40..])) {
        Endian::Little
    } else if (1..=7).contains(&BigEndian::read_i16(&bytes[40..])) {
        Endian::Big
    } else {
        return Err(Error::Format("dim[0] is not in 1..=7 in either byte order".into()));
    };
    let sizeof_hdr = read_i32(bytes, 0, endian);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(Error::Format(format!("sizeof_hdr is {sizeof_hdr}, expected 348")));
    }
    let magic = &bytes[344..348];
    if magic == MAGIC_PAIR {
        return Err(Error::Format("two-file (.hdr/.img) NIfTI is not supported".into()));
    }
    if magic != MAGIC_SINGLE {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }

    let ndim = read_i16(bytes, 40, endian) as usize;
    let mut extent = [1usize; 7];
    for (i, e) in extent.iter_mut().enumerate().take(ndim) {
        let d = read_i16(bytes, 42 + 2 * i, endian);
        if d < 1 {
            return Err(Error::Format(format!("dim[{}] = {d} is not positive", i + 1)));
        }
        *e = d as usize;
    }
    if extent[3..].iter().any(|&d| d != 1) {
        return Err(Error::Format(format!(
            "only 3D volumes are supported, got dims {:?}",
            &extent[..ndim]
        )));
    }
    let dims = Dims::new(extent[0], extent[1], extent[2]);

    let datatype = DataType::from_code(read_i16(bytes, 70, endian))?;
    let bitpix = read_i16(bytes, 72, endian);
    if bitpix as usize != datatype.bytes_per_voxel() * 8 {
        return Err(Error::Format(format!(
            "bitpix {bitpix} disagrees with datatype {datatype:?}"
        )));
    }

    let mut spacing = [1.0f32; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        let p = read_f32(bytes, 76 + 4 * (i + 1), endian).abs();
        if p.is_finite() && p > 0.0 {
            *s = p;
        } else {
            log::warn!("pixdim[{}] = {p} is not a valid spacing; using 1.0", i + 1);
        }
    }

    let vox_offset = read_f32(bytes, 108, endian);
    if !vox_offset.is_finite() || (vox_offset as usize) < HEADER_SIZE {
        return Err(Error::Format(format!("vox_offset {vox_offset} is inside the header")));
    }

    Ok(Header {
        dims,
        spacing: Spacing(spacing),
        datatype,
        vox_offset: vox_offset as usize,
        scl_slope: read_f32(bytes, 112, endian),
        scl_inter: read_f32(bytes, 116, endian),
        big_endian: endian == Endian::Big,
    })
}

/// Reads a whole file, transparently gunzipping when it carries the gzip magic.
fn read_file_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io_at(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::with_capacity(raw.len() * 4);
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("{}: gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Decoded header and voxel values (unscaled), widened to f64.
struct Decoded {
    header: Header,
    values: Vec<f64>,
    raw_f32: Option<Vec<f32>>,
}

fn decode(bytes: &[u8]) -> Result<Decoded> {
    let header = parse_header(bytes)?;
    let need = header.payload_len();
    let available = bytes.len().saturating_sub(header.vox_offset);
    if available < need {
        return Err(Error::Truncated {
            expected: need,
            found: available,
        });
    }
    let payload = &bytes[header.vox_offset..header.vox_offset + need];
    let n = header.dims.len();
    let big = header.big_endian;
    let mut raw_f32 = None;
    let values: Vec<f64> = match header.datatype {
        DataType::Uint8 => payload.iter().map(|&b| b as f64).collect(),
        DataType::Int16 => {
            let mut v = vec![0i16; n];
            if big {
                BigEndian::read_i16_into(payload, &mut v);
            } else {
                LittleEndian::read_i16_into(payload, &mut v);
            }
            v.into_iter().map(f64::from).collect()
        }
        DataType::Float32 => {
            let mut v = vec![0f32; n];
            if big {
                BigEndian::read_f32_into(payload, &mut v);
            } else {
                LittleEndian::read_f32_into(payload, &mut v);
            }
            let widened = v.iter().map(|&x| x as f64).collect();
            raw_f32 = Some(v);
            widened
        }
    };
    Ok(Decoded {
        header,
        values,
        raw_f32,
    })
}

/// Loads a CT volume, applying `scl_slope`/`scl_inter`.
pub fn load_volume(path: impl AsRef<Path>) -> Result<CtVolume> {
    let path = path.as_ref();
    let decoded = decode(&read_file_bytes(path)?)?;
    let (slope, inter) = decoded.header.scaling();
    let data: Vec<f32> = match decoded.raw_f32 {
        // Identity scaling leaves float payloads untouched (keeps -0.0 and exact bits).
        Some(raw) if slope == 1.0 && inter == 0.0 => raw,
        _ => decoded
            .values
            .iter()
            .map(|&v| (v * slope as f64 + inter as f64) as f32)
            .collect(),
    };
    CtVolume::new(decoded.header.dims, decoded.header.spacing, data)
}

fn to_small_ints(decoded: &Decoded, max: u8, what: &str) -> Result<Vec<u8>> {
    let (slope, inter) = decoded.header.scaling();
    decoded
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = v * slope as f64 + inter as f64;
            if s.fract() == 0.0 && s >= 0.0 && s <= max as f64 {
                Ok(s as u8)
            } else {
                Err(Error::Format(format!("{what} value {s} at voxel {i} is out of range 0..={max}")))
            }
        })
        .collect()
}

/// Loads a label volume (values must be 0, 1 or 2).
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    let path = path.as_ref();
    let decoded = decode(&read_file_bytes(path)?)?;
    let data = to_small_ints(&decoded, 2, "label")?;
    LabelVolume::new(decoded.header.dims, decoded.header.spacing, data)
}

/// Loads a binary mask volume and tags it with `role`.
pub fn load_mask(path: impl AsRef<Path>, role: MaskRole) -> Result<MaskVolume> {
    let path = path.as_ref();
    let decoded = decode(&read_file_bytes(path)?)?;
    let data = to_small_ints(&decoded, 1, "mask")?;
    MaskVolume::new(decoded.header.dims, decoded.header.spacing, role, data)
}

/// Borrowed view of anything that can be written.
#[derive(Clone, Copy, Debug)]
pub enum VolumeRef<'a> {
    Ct(&'a CtVolume),
    Labels(&'a LabelVolume),
    Mask(&'a MaskVolume),
}

impl<'a> From<&'a CtVolume> for VolumeRef<'a> {
    fn from(v: &'a CtVolume) -> Self {
        VolumeRef::Ct(v)
    }
}

impl<'a> From<&'a LabelVolume> for VolumeRef<'a> {
    fn from(v: &'a LabelVolume) -> Self {
        VolumeRef::Labels(v)
    }
}

impl<'a> From<&'a MaskVolume> for VolumeRef<'a> {
    fn from(v: &'a MaskVolume) -> Self {
        VolumeRef::Mask(v)
    }
}

/// Builds a little-endian single-file header.
pub fn build_header(dims: Dims, spacing: Spacing, datatype: DataType) -> Result<[u8; HEADER_SIZE]> {
    let max = i16::MAX as usize;
    if dims.is_empty() {
        return Err(Error::Argument(format!("cannot write empty volume {dims}")));
    }
    if dims.width > max || dims.height > max || dims.depth > max {
        return Err(Error::Argument(format!("{dims} exceeds NIfTI-1 dimension limits")));
    }
    let mut h = [0u8; HEADER_SIZE];
    LittleEndian::write_i32(&mut h[0..], HEADER_SIZE as i32);
    h[38] = b'r';
    let dim: [i16; 8] = [3, dims.width as i16, dims.height as i16, dims.depth as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        LittleEndian::write_i16(&mut h[40 + 2 * i..], *d);
    }
    LittleEndian::write_i16(&mut h[70..], datatype.code());
    LittleEndian::write_i16(&mut h[72..], (datatype.bytes_per_voxel() * 8) as i16);
    let pixdim: [f32; 8] = [1.0, spacing.0[0], spacing.0[1], spacing.0[2], 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[76 + 4 * i..], *p);
    }
    LittleEndian::write_f32(&mut h[108..], SINGLE_FILE_OFFSET as f32);
    LittleEndian::write_f32(&mut h[112..], 1.0);
    LittleEndian::write_f32(&mut h[116..], 0.0);
    // xyzt_units: millimeters
    h[123] = 2;
    h[344..348].copy_from_slice(MAGIC_SINGLE);
    Ok(h)
}

/// Serializes a volume to NIfTI-1 bytes (uncompressed).
pub fn encode<'a>(volume: impl Into<VolumeRef<'a>>) -> Result<Vec<u8>> {
    let volume = volume.into();
    let (dims, spacing) = match volume {
        VolumeRef::Ct(v) => (v.dims(), v.spacing()),
        VolumeRef::Labels(v) => (v.dims(), v.spacing()),
        VolumeRef::Mask(v) => (v.dims(), v.spacing()),
    };
    let datatype = match volume {
        VolumeRef::Ct(_) => DataType::Float32,
        _ => DataType::Uint8,
    };
    let header = build_header(dims, spacing, datatype)?;
    let mut out = Vec::with_capacity(SINGLE_FILE_OFFSET + dims.len() * datatype.bytes_per_voxel());
    out.extend_from_slice(&header);
    out.extend_from_slice(&[0u8; SINGLE_FILE_OFFSET - HEADER_SIZE]);
    match volume {
        VolumeRef::Ct(v) => {
            for &x in v.data() {
                out.write_f32::<LittleEndian>(x)?;
            }
        }
        VolumeRef::Labels(v) => out.extend_from_slice(v.data()),
        VolumeRef::Mask(v) => out.extend_from_slice(v.data()),
    }
    Ok(out)
}

/// Writes a volume; gzip-compressed when the path ends in `.gz`.
///
/// CT is stored as float32, labels and masks as uint8.
pub fn save_volume<'a>(volume: impl Into<VolumeRef<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(volume)?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    let file = fs::File::create(path).map_err(|e| Error::io_at(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let res = if gz {
        let mut enc = GzEncoder::new(&mut w, Compression::fast());
        enc.write_all(&bytes).and_then(|_| enc.finish().map(|_| ()))
    } else {
        w.write_all(&bytes)
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io_at(path, e))
}
