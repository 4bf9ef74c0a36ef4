//! Single-file NIfTI-1 (`.nii`, `.nii.gz`) reading and writing.
//!
//! Honored header fields: `dim`, `pixdim`, `datatype`, `scl_slope`,
//! `scl_inter`, `qform_code`/`sform_code` with their matrices, and
//! `vox_offset`. Everything else is ignored on read and zeroed on write.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, GridSpec, Volume3D};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const DEFAULT_VOX_OFFSET: usize = 352;

const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";

/// Voxel storage types accepted on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Option<Self> {
        Some(match code {
            2 => Datatype::Uint8,
            4 => Datatype::Int16,
            8 => Datatype::Int32,
            16 => Datatype::Float32,
            64 => Datatype::Float64,
            _ => return None,
        })
    }

    pub fn size(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Datatype::Float32 | Datatype::Float64)
    }
}

/// A decoded image together with the on-disk storage type.
#[derive(Debug, Clone)]
pub struct NiftiImage {
    pub volume: Volume3D,
    pub datatype: Datatype,
    /// Whether a non-identity `scl_slope`/`scl_inter` was applied.
    pub scaled: bool,
}

pub fn load_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    read_nifti(path).map(|img| img.volume)
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<NiftiImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_nifti(&bytes)
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl HeaderReader<'_> {
    fn array<const N: usize>(&self, offset: usize) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[offset..offset + N]);
        if self.big_endian {
            out.reverse();
        }
        out
    }

    fn i16(&self, offset: usize) -> i16 {
        i16::from_le_bytes(self.array(offset))
    }

    fn f32(&self, offset: usize) -> f32 {
        f32::from_le_bytes(self.array(offset))
    }
}

/// Decode a single-file NIfTI-1 image, gzip-compressed or not (detected
/// from the leading magic bytes, not the file name).
pub fn decode_nifti(bytes: &[u8]) -> Result<NiftiImage> {
    if is_gzip(bytes) {
        let mut raw = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut raw)
            .map_err(|e| Error::Data(format!("corrupt gzip stream: {e}")))?;
        return decode_raw(&raw);
    }
    decode_raw(bytes)
}

fn decode_raw(bytes: &[u8]) -> Result<NiftiImage> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Parse {
            field: "sizeof_hdr",
            reason: format!("file holds {} bytes, need at least {HEADER_SIZE}", bytes.len()),
        });
    }
    let size_le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let size_be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let big_endian = match (size_le, size_be) {
        (348, _) => false,
        (_, 348) => true,
        _ => {
            return Err(Error::Parse {
                field: "sizeof_hdr",
                reason: format!("expected 348, found {size_le}"),
            })
        }
    };
    let hdr = HeaderReader { bytes, big_endian };

    let magic = &bytes[344..348];
    if magic != MAGIC_SINGLE && magic != MAGIC_PAIR {
        return Err(Error::Parse {
            field: "magic",
            reason: format!("expected \"n+1\" or \"ni1\", found {:?}", String::from_utf8_lossy(magic)),
        });
    }

    let ndim = hdr.i16(40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::Parse {
            field: "dim",
            reason: format!("dim[0] must be in 1..=7, found {ndim}"),
        });
    }
    let mut dims = [1usize; 3];
    for d in 1..=ndim as usize {
        let n = hdr.i16(40 + 2 * d);
        if n < 1 {
            return Err(Error::Parse {
                field: "dim",
                reason: format!("dim[{d}] must be >= 1, found {n}"),
            });
        }
        if d <= 3 {
            dims[d - 1] = n as usize;
        } else if n != 1 {
            return Err(Error::UnsupportedFormat(format!(
                "only 3D volumes are supported, dim[{d}] = {n}"
            )));
        }
    }

    let code = hdr.i16(70);
    let datatype = Datatype::from_code(code)
        .ok_or_else(|| Error::UnsupportedFormat(format!("NIfTI datatype code {code}")))?;

    let pixdim: Vec<f64> = (0..8).map(|i| hdr.f32(76 + 4 * i) as f64).collect();
    let vox_offset = hdr.f32(108);
    if !(vox_offset.is_finite() && vox_offset >= 0.0) {
        return Err(Error::Parse {
            field: "vox_offset",
            reason: format!("invalid value {vox_offset}"),
        });
    }
    // a "ni1" pair header has vox_offset 0 and no data in this file
    let vox_offset = (vox_offset as usize).max(HEADER_SIZE);
    let slope = hdr.f32(112) as f64;
    let inter = hdr.f32(116) as f64;
    let qform_code = hdr.i16(252);
    let sform_code = hdr.i16(254);

    let affine = if sform_code > 0 {
        let mut m = Matrix4::identity();
        for row in 0..3 {
            for col in 0..4 {
                m[(row, col)] = hdr.f32(280 + 16 * row + 4 * col) as f64;
            }
        }
        m
    } else if qform_code > 0 {
        let quatern: Vec<f64> = (0..6).map(|i| hdr.f32(256 + 4 * i) as f64).collect();
        qform_affine(&quatern, &pixdim)
    } else {
        let mut m = Matrix4::identity();
        for axis in 0..3 {
            m[(axis, axis)] = pixdim[axis + 1].abs();
        }
        m
    };
    let grid = GridSpec::from_affine(dims, affine).map_err(|e| Error::Parse {
        field: if sform_code > 0 {
            "srow"
        } else if qform_code > 0 {
            "quatern"
        } else {
            "pixdim"
        },
        reason: e.to_string(),
    })?;

    let n = grid.len();
    let nbytes = n * datatype.size();
    if bytes.len() < vox_offset + nbytes {
        return Err(Error::Parse {
            field: "vox_offset",
            reason: format!(
                "voxel data truncated: need {nbytes} bytes at offset {vox_offset}, file has {}",
                bytes.len()
            ),
        });
    }
    let raw = &bytes[vox_offset..vox_offset + nbytes];
    let mut data = decode_voxels(raw, datatype, big_endian);

    let scaled = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);
    if scaled {
        for v in &mut data {
            *v = *v * slope + inter;
        }
    }
    let volume = Volume3D::new(grid, data)?;
    Ok(NiftiImage {
        volume,
        datatype,
        scaled,
    })
}

fn decode_voxels(raw: &[u8], datatype: Datatype, big_endian: bool) -> Vec<f64> {
    macro_rules! decode {
        ($t:ty) => {
            raw.chunks_exact(std::mem::size_of::<$t>())
                .map(|c| {
                    let arr = c.try_into().unwrap();
                    (if big_endian {
                        <$t>::from_be_bytes(arr)
                    } else {
                        <$t>::from_le_bytes(arr)
                    }) as f64
                })
                .collect()
        };
    }
    match datatype {
        Datatype::Uint8 => raw.iter().map(|&b| b as f64).collect(),
        Datatype::Int16 => decode!(i16),
        Datatype::Int32 => decode!(i32),
        Datatype::Float32 => decode!(f32),
        Datatype::Float64 => decode!(f64),
    }
}

/// qform quaternion parameters `[b, c, d, qx, qy, qz]` to a voxel→world
/// affine.
fn qform_affine(quatern: &[f64], pixdim: &[f64]) -> Matrix4<f64> {
    let (b, c, d) = (quatern[0], quatern[1], quatern[2]);
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
    let rot = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ];
    let scale = [pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs() * qfac];
    let mut m = Matrix4::identity();
    for row in 0..3 {
        for col in 0..3 {
            m[(row, col)] = rot[row][col] * scale[col];
        }
        m[(row, 3)] = quatern[3 + row];
    }
    m
}

/// Something that can be written as a NIfTI image.
#[derive(Debug, Clone, Copy)]
pub enum NiftiData<'a> {
    /// Written as float32.
    Volume(&'a Volume3D),
    /// Written as uint8 0/1.
    Mask(&'a BinaryMask),
}

impl<'a> From<&'a Volume3D> for NiftiData<'a> {
    fn from(v: &'a Volume3D) -> Self {
        NiftiData::Volume(v)
    }
}

impl<'a> From<&'a BinaryMask> for NiftiData<'a> {
    fn from(m: &'a BinaryMask) -> Self {
        NiftiData::Mask(m)
    }
}

/// Write a single-file NIfTI-1 image, gzip-compressed when the path ends
/// in `.gz`.
pub fn save_nifti<'a>(data: impl Into<NiftiData<'a>>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_nifti(data.into());
    let gz = path.extension().is_some_and(|ext| ext == "gz");
    let out = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
        enc.write_all(&bytes)
            .and_then(|_| enc.finish())
            .map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Encode as an uncompressed little-endian single-file NIfTI-1 image.
pub fn encode_nifti(data: NiftiData<'_>) -> Vec<u8> {
    let (grid, datatype) = match data {
        NiftiData::Volume(v) => (v.grid(), Datatype::Float32),
        NiftiData::Mask(m) => (m.grid(), Datatype::Uint8),
    };
    let mut out = vec![0u8; DEFAULT_VOX_OFFSET];
    let mut put = |offset: usize, bytes: &[u8]| out[offset..offset + bytes.len()].copy_from_slice(bytes);

    put(0, &(HEADER_SIZE as i32).to_le_bytes());
    let dims = grid.dims();
    put(40, &3i16.to_le_bytes());
    for (i, &d) in dims.iter().enumerate() {
        put(42 + 2 * i, &(d as i16).to_le_bytes());
    }
    for i in 3..7 {
        put(42 + 2 * i, &1i16.to_le_bytes());
    }
    put(70, &datatype.code().to_le_bytes());
    put(72, &((datatype.size() * 8) as i16).to_le_bytes());
    put(76, &1.0f32.to_le_bytes());
    for (i, &s) in grid.spacing().iter().enumerate() {
        put(80 + 4 * i, &(s as f32).to_le_bytes());
    }
    put(108, &(DEFAULT_VOX_OFFSET as f32).to_le_bytes());
    put(112, &1.0f32.to_le_bytes());
    put(254, &1i16.to_le_bytes());
    let affine = grid.affine();
    for row in 0..3 {
        for col in 0..4 {
            put(280 + 16 * row + 4 * col, &(affine[(row, col)] as f32).to_le_bytes());
        }
    }
    put(344, MAGIC_SINGLE);

    match data {
        NiftiData::Volume(v) => {
            out.reserve(v.data().len() * 4);
            for &x in v.data() {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        NiftiData::Mask(m) => out.extend(m.bits().iter().map(|&b| b as u8)),
    }
    out
}
