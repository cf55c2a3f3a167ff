//! NIfTI-1 single-file (`.nii`, `.nii.gz`) reader and writer.
//!
//! Byte order is detected from `sizeof_hdr`. Gzip input is detected from the
//! stream magic rather than the file extension. The affine comes from the
//! sform when `sform_code > 0`, else from the qform quaternion when
//! `qform_code > 0`, else from `pixdim` alone.
//!
//! The writer always emits a float32 sform. It also stores the float64 affine
//! in a comment extension so files written here reload with a bit-exact affine.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::{Compression, GzBuilder};
use nalgebra::Matrix4;
use ndarray::{Array3, ArrayView3, ShapeBuilder};

use super::{LabelVolume, Modality, Volume};
use crate::error::{Error, Result};
use crate::geometry::Affine;

const HEADER_SIZE: usize = 348;
const MAGIC: &[u8; 4] = b"n+1\0";
const ECODE_COMMENT: i32 = 6;
const AFFINE_TAG: &str = "segkit-affine-f64:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiftiDtype {
    U8,
    I16,
    I32,
    F32,
    F64,
    U16,
}

impl NiftiDtype {
    pub fn code(self) -> i16 {
        match self {
            NiftiDtype::U8 => 2,
            NiftiDtype::I16 => 4,
            NiftiDtype::I32 => 8,
            NiftiDtype::F32 => 16,
            NiftiDtype::F64 => 64,
            NiftiDtype::U16 => 512,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => NiftiDtype::U8,
            4 => NiftiDtype::I16,
            8 => NiftiDtype::I32,
            16 => NiftiDtype::F32,
            64 => NiftiDtype::F64,
            512 => NiftiDtype::U16,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    pub fn size(self) -> usize {
        match self {
            NiftiDtype::U8 => 1,
            NiftiDtype::I16 | NiftiDtype::U16 => 2,
            NiftiDtype::I32 | NiftiDtype::F32 => 4,
            NiftiDtype::F64 => 8,
        }
    }
}

/// Header fields this crate interprets.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub big_endian: bool,
    pub dim: [i16; 8],
    pub datatype: NiftiDtype,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
}

/// Decoded image: voxel values promoted to f64 with scaling applied.
#[derive(Debug, Clone)]
pub struct NiftiImage {
    pub header: NiftiHeader,
    pub data: Array3<f64>,
    pub affine: Affine,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl Cursor<'_> {
    fn take<const N: usize>(&self, at: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.bytes[at..at + N]);
        if self.big_endian {
            b.reverse();
        }
        b
    }
    fn i16(&self, at: usize) -> i16 {
        i16::from_le_bytes(self.take(at))
    }
    fn i32(&self, at: usize) -> i32 {
        i32::from_le_bytes(self.take(at))
    }
    fn f32(&self, at: usize) -> f32 {
        f32::from_le_bytes(self.take(at))
    }
}

fn parse_header(bytes: &[u8]) -> Result<NiftiHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "file has {} bytes, header needs {HEADER_SIZE}",
            bytes.len()
        )));
    }
    let raw = [bytes[0], bytes[1], bytes[2], bytes[3]];
    let big_endian = if i32::from_le_bytes(raw) == HEADER_SIZE as i32 {
        false
    } else if i32::from_be_bytes(raw) == HEADER_SIZE as i32 {
        true
    } else {
        return Err(Error::MalformedHeader(format!(
            "sizeof_hdr is {} (expected 348)",
            i32::from_le_bytes(raw)
        )));
    };
    if &bytes[344..348] != MAGIC {
        return Err(Error::MalformedHeader(format!(
            "magic {:?} is not \"n+1\\0\"",
            &bytes[344..348]
        )));
    }
    let c = Cursor { bytes, big_endian };

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = c.i16(40 + 2 * i);
    }
    if dim[0] != 3 {
        return Err(Error::DimensionError(format!(
            "dim[0] = {} (only 3D volumes are supported)",
            dim[0]
        )));
    }
    if dim[1..4].iter().any(|d| *d < 1) {
        return Err(Error::DimensionError(format!("non-positive extent in dim {dim:?}")));
    }
    let datatype = NiftiDtype::from_code(c.i16(70))?;
    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = c.f32(76 + 4 * i);
    }
    let mut srow = [[0f32; 4]; 3];
    for (r, row) in srow.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = c.f32(280 + 16 * r + 4 * k);
        }
    }
    Ok(NiftiHeader {
        big_endian,
        dim,
        datatype,
        pixdim,
        vox_offset: c.f32(108),
        scl_slope: c.f32(112),
        scl_inter: c.f32(116),
        qform_code: c.i16(252),
        sform_code: c.i16(254),
        quatern: [c.f32(256), c.f32(260), c.f32(264)],
        qoffset: [c.f32(268), c.f32(272), c.f32(276)],
        srow,
    })
}

impl NiftiHeader {
    pub fn shape(&self) -> [usize; 3] {
        [self.dim[1] as usize, self.dim[2] as usize, self.dim[3] as usize]
    }

    /// Affine from sform, qform or pixdim, in that order of preference.
    pub fn affine(&self) -> Affine {
        if self.sform_code > 0 {
            let mut m = Matrix4::identity();
            for r in 0..3 {
                for k in 0..4 {
                    m[(r, k)] = self.srow[r][k] as f64;
                }
            }
            return Affine(m);
        }
        let spacing = [
            self.pixdim[1] as f64,
            self.pixdim[2] as f64,
            self.pixdim[3] as f64,
        ];
        if self.qform_code > 0 {
            let [b, c, d] = self.quatern.map(|q| q as f64);
            let mut a = 1.0 - (b * b + c * c + d * d);
            let (b, c, d) = if a < 1e-7 {
                // Numerically 180° rotation: renormalise (b, c, d).
                let n = (b * b + c * c + d * d).sqrt();
                a = 0.0;
                (b / n, c / n, d / n)
            } else {
                a = a.sqrt();
                (b, c, d)
            };
            let rot = [
                [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
                [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
                [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
            ];
            let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
            let scale = [spacing[0], spacing[1], spacing[2] * qfac];
            let mut m = Matrix4::identity();
            for r in 0..3 {
                for k in 0..3 {
                    m[(r, k)] = rot[r][k] * scale[k];
                }
                m[(r, 3)] = self.qoffset[r] as f64;
            }
            return Affine(m);
        }
        Affine::from_spacing(spacing.map(|s| if s > 0.0 { s } else { 1.0 }), [0.0; 3])
    }

    fn scaling(&self) -> Option<(f64, f64)> {
        let slope = self.scl_slope as f64;
        let inter = self.scl_inter as f64;
        if slope == 0.0 || !slope.is_finite() {
            return None;
        }
        let inter = if inter.is_finite() { inter } else { 0.0 };
        if slope == 1.0 && inter == 0.0 {
            return None;
        }
        Some((slope, inter))
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut raw = Vec::new();
    reader.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn extension_affine(bytes: &[u8], header: &NiftiHeader, data_start: usize) -> Option<Affine> {
    // Extender flag at 348, then (esize, ecode, payload) blocks up to vox_offset.
    if bytes.len() < 352 || bytes[348] == 0 {
        return None;
    }
    let c = Cursor {
        bytes,
        big_endian: header.big_endian,
    };
    let mut at = 352;
    while at + 8 <= data_start {
        let esize = c.i32(at);
        let ecode = c.i32(at + 4);
        if esize < 8 || at + esize as usize > data_start {
            return None;
        }
        if ecode == ECODE_COMMENT {
            let payload = &bytes[at + 8..at + esize as usize];
            let text = std::str::from_utf8(payload).ok()?.trim_end_matches('\0');
            if let Some(json) = text.strip_prefix(AFFINE_TAG) {
                let rows: [[f64; 4]; 4] = serde_json::from_str(json).ok()?;
                return Some(Affine::from_rows(rows));
            }
        }
        at += esize as usize;
    }
    None
}

fn decode_values(bytes: &[u8], header: &NiftiHeader, n: usize) -> Vec<f64> {
    let c = Cursor {
        bytes,
        big_endian: header.big_endian,
    };
    let size = header.datatype.size();
    (0..n)
        .map(|i| {
            let at = i * size;
            match header.datatype {
                NiftiDtype::U8 => bytes[at] as f64,
                NiftiDtype::I16 => c.i16(at) as f64,
                NiftiDtype::U16 => u16::from_le_bytes(c.take(at)) as f64,
                NiftiDtype::I32 => c.i32(at) as f64,
                NiftiDtype::F32 => c.f32(at) as f64,
                NiftiDtype::F64 => f64::from_le_bytes(c.take(at)),
            }
        })
        .collect()
}

/// Reads a NIfTI-1 file, promoting voxels to f64 with slope/intercept applied.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<NiftiImage> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let header = parse_header(&bytes)?;
    let shape = header.shape();
    let n = shape.iter().product::<usize>();
    let data_start = header.vox_offset as usize;
    if header.vox_offset < HEADER_SIZE as f32 || data_start < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "vox_offset {} lies inside the header",
            header.vox_offset
        )));
    }
    let data_len = n * header.datatype.size();
    if bytes.len() < data_start + data_len {
        return Err(Error::MalformedHeader(format!(
            "expected {data_len} data bytes at offset {data_start}, file has {}",
            bytes.len()
        )));
    }
    let mut values = decode_values(&bytes[data_start..data_start + data_len], &header, n);
    if let Some((slope, inter)) = header.scaling() {
        for v in &mut values {
            *v = *v * slope + inter;
        }
    }
    let data = Array3::from_shape_vec(shape.f(), values)
        .map_err(|e| Error::MalformedHeader(e.to_string()))?
        .as_standard_layout()
        .to_owned();

    let header_affine = header.affine();
    let affine = match extension_affine(&bytes, &header, data_start) {
        // Only trust the stored f64 affine if it still agrees with the header.
        Some(exact) if affines_agree(&exact, &header_affine) => exact,
        _ => header_affine,
    };
    affine.validate()?;
    Ok(NiftiImage {
        header,
        data,
        affine,
    })
}

fn affines_agree(a: &Affine, b: &Affine) -> bool {
    a.0.iter()
        .zip(b.0.iter())
        .all(|(x, y)| (x - y).abs() <= 1e-5 * (1.0 + x.abs()))
}

/// Loads a scan and, optionally, its label file on the same grid.
pub fn load_nifti(
    image: impl AsRef<Path>,
    labels: Option<&Path>,
    modality: Modality,
) -> Result<(Volume, Option<LabelVolume>)> {
    let img = read_nifti(image)?;
    let volume = Volume::new(img.data, img.affine, modality)?;
    let labels = match labels {
        Some(p) => {
            let l = LabelVolume::from_nifti(read_nifti(p)?)?;
            if l.shape() != volume.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "label grid {:?} vs image grid {:?}",
                    l.shape(),
                    volume.shape()
                )));
            }
            Some(l)
        }
        None => None,
    };
    Ok((volume, labels))
}

impl LabelVolume {
    /// Converts a decoded image whose values are integer codes in `0..=65535`.
    pub fn from_nifti(img: NiftiImage) -> Result<Self> {
        let mut bad = None;
        let data = img.data.mapv(|v| {
            if v.fract() != 0.0 || !(0.0..=u16::MAX as f64).contains(&v) {
                bad.get_or_insert(v);
                0
            } else {
                v as u16
            }
        });
        if let Some(v) = bad {
            return Err(Error::InvalidInput(format!(
                "label volume holds non-code value {v}"
            )));
        }
        LabelVolume::new(data, img.affine)
    }
}

fn encode_header(shape: [usize; 3], affine: &Affine, dtype: NiftiDtype, vox_offset: usize) -> Vec<u8> {
    let mut h = vec![0u8; HEADER_SIZE];
    let put = |h: &mut Vec<u8>, at: usize, b: &[u8]| h[at..at + b.len()].copy_from_slice(b);
    put(&mut h, 0, &(HEADER_SIZE as i32).to_le_bytes());
    let dims: [i16; 8] = [3, shape[0] as i16, shape[1] as i16, shape[2] as i16, 1, 1, 1, 1];
    for (i, d) in dims.iter().enumerate() {
        put(&mut h, 40 + 2 * i, &d.to_le_bytes());
    }
    put(&mut h, 70, &dtype.code().to_le_bytes());
    put(&mut h, 72, &((dtype.size() * 8) as i16).to_le_bytes());
    let spacing = affine.spacing();
    let pixdim = [1.0f32, spacing[0] as f32, spacing[1] as f32, spacing[2] as f32, 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        put(&mut h, 76 + 4 * i, &p.to_le_bytes());
    }
    put(&mut h, 108, &(vox_offset as f32).to_le_bytes());
    put(&mut h, 112, &1.0f32.to_le_bytes());
    put(&mut h, 116, &0.0f32.to_le_bytes());
    h[123] = 2; // xyzt_units: millimetres
    let descrip = b"segkit";
    put(&mut h, 148, descrip);
    put(&mut h, 252, &0i16.to_le_bytes());
    put(&mut h, 254, &1i16.to_le_bytes());
    for r in 0..3 {
        for k in 0..4 {
            put(&mut h, 280 + 16 * r + 4 * k, &(affine.0[(r, k)] as f32).to_le_bytes());
        }
    }
    put(&mut h, 344, MAGIC);
    h
}

fn affine_extension(affine: &Affine) -> Vec<u8> {
    let text = format!(
        "{AFFINE_TAG}{}",
        serde_json::to_string(&affine.rows()).expect("finite affine serializes")
    );
    let mut size = 8 + text.len() + 1;
    size = size.div_ceil(16) * 16;
    let mut ext = Vec::with_capacity(size);
    ext.extend_from_slice(&(size as i32).to_le_bytes());
    ext.extend_from_slice(&ECODE_COMMENT.to_le_bytes());
    ext.extend_from_slice(text.as_bytes());
    ext.resize(size, 0);
    ext
}

/// Writes a little-endian NIfTI-1 file; gzip-compressed when the path ends in `.gz`.
///
/// Values are cast to `dtype` (rounded for integer types); the caller is
/// responsible for the range.
pub fn save_nifti(
    path: impl AsRef<Path>,
    data: ArrayView3<'_, f64>,
    affine: &Affine,
    dtype: NiftiDtype,
) -> Result<()> {
    let path = path.as_ref();
    affine.validate()?;
    let shape = [data.shape()[0], data.shape()[1], data.shape()[2]];
    if shape.iter().any(|s| *s > i16::MAX as usize) {
        return Err(Error::DimensionError(format!("grid {shape:?} exceeds NIfTI-1 limits")));
    }
    let ext = affine_extension(affine);
    let vox_offset = HEADER_SIZE + 4 + ext.len();
    let mut bytes = encode_header(shape, affine, dtype, vox_offset);
    bytes.extend_from_slice(&[1, 0, 0, 0]);
    bytes.extend_from_slice(&ext);
    bytes.reserve(data.len() * dtype.size());
    // NIfTI stores the first axis fastest.
    for v in data.t().iter() {
        match dtype {
            NiftiDtype::U8 => bytes.push(v.round() as u8),
            NiftiDtype::I16 => bytes.extend_from_slice(&(v.round() as i16).to_le_bytes()),
            NiftiDtype::U16 => bytes.extend_from_slice(&(v.round() as u16).to_le_bytes()),
            NiftiDtype::I32 => bytes.extend_from_slice(&(v.round() as i32).to_le_bytes()),
            NiftiDtype::F32 => bytes.extend_from_slice(&(*v as f32).to_le_bytes()),
            NiftiDtype::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
        }
    }

    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let gz = path.extension().is_some_and(|e| e == "gz");
    let res = if gz {
        let mut enc = GzBuilder::new()
            .mtime(0)
            .write(&mut out, Compression::default());
        enc.write_all(&bytes).and_then(|_| enc.finish().map(|_| ()))
    } else {
        out.write_all(&bytes)
    };
    res.and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

impl Volume {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_nifti(path, self.data.view(), &self.affine, NiftiDtype::F64)
    }
}

impl LabelVolume {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let data = self.data.mapv(f64::from);
        save_nifti(path, data.view(), &self.affine, NiftiDtype::U16)
    }
}
