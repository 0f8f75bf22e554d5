//! Single-file NIfTI-1 (`.nii`, optionally gzip-compressed).
//!
//! Reads uint8, int16, float32 and float64 data in either byte order and
//! applies `scl_slope`/`scl_inter`. Writes little-endian float32 with the
//! affine stored in the sform.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{IoError, Volume};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;

struct Reader<'a> {
    buf: &'a [u8],
    big_endian: bool,
}

impl Reader<'_> {
    fn bytes<const N: usize>(&self, off: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[off..off + N]);
        if self.big_endian {
            b.reverse();
        }
        b
    }
    fn i16(&self, off: usize) -> i16 {
        i16::from_le_bytes(self.bytes(off))
    }
    fn f32(&self, off: usize) -> f32 {
        f32::from_le_bytes(self.bytes(off))
    }
}

fn corrupt(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::CorruptHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn unsupported(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn load_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    let raw = fs::read(path).map_err(|source| IoError::IoFailure {
        path: path.to_path_buf(),
        source,
    })?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| corrupt(path, format!("gzip stream: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Reads a NIfTI-1 single-file volume.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume, IoError> {
    let path = path.as_ref();
    let buf = load_bytes(path)?;
    if buf.len() < HEADER_SIZE {
        return Err(corrupt(path, format!("file is {} bytes, header needs 348", buf.len())));
    }
    let big_endian = match (
        i32::from_le_bytes(buf[0..4].try_into().unwrap()),
        i32::from_be_bytes(buf[0..4].try_into().unwrap()),
    ) {
        (348, _) => false,
        (_, 348) => true,
        (540, _) | (_, 540) => return Err(unsupported(path, "NIfTI-2 is not supported")),
        _ => return Err(corrupt(path, "sizeof_hdr is not 348")),
    };
    let r = Reader {
        buf: &buf,
        big_endian,
    };
    match &buf[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => return Err(unsupported(path, "two-file NIfTI (.hdr/.img) is not supported")),
        _ => return Err(corrupt(path, "bad magic, not a NIfTI-1 file")),
    }

    let ndim = r.i16(40);
    if !(3..=4).contains(&ndim) {
        // Trailing singleton dimensions are tolerated.
        if !(ndim > 4 && ndim <= 7 && (5..=ndim as usize).all(|i| r.i16(40 + 2 * i) <= 1)) {
            return Err(unsupported(path, format!("{ndim}-dimensional images")));
        }
    }
    let mut dims = Vec::new();
    for i in 1..=ndim.min(4) as usize {
        let d = r.i16(40 + 2 * i);
        if d < 1 {
            return Err(corrupt(path, format!("dim[{i}] = {d}")));
        }
        dims.push(d as usize);
    }
    if dims.len() == 4 && dims[3] == 1 {
        dims.pop();
    }

    let datatype = r.i16(70);
    let width = match datatype {
        DT_UINT8 => 1,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        DT_FLOAT64 => 8,
        other => return Err(unsupported(path, format!("datatype code {other}"))),
    };

    let pixdim: Vec<f64> = (0..8).map(|i| r.f32(76 + 4 * i) as f64).collect();
    let voxel_size = [pixdim[1].abs(), pixdim[2].abs(), pixdim[3].abs()];
    if voxel_size.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(corrupt(path, format!("non-positive voxel size {voxel_size:?}")));
    }

    let vox_offset = r.f32(108);
    if !(vox_offset >= HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
        return Err(corrupt(path, format!("vox_offset {vox_offset}")));
    }
    let vox_offset = vox_offset as usize;
    let n: usize = dims.iter().product();
    let end = vox_offset + n * width;
    if buf.len() < end {
        return Err(corrupt(
            path,
            format!("truncated data: need {end} bytes, file has {}", buf.len()),
        ));
    }

    let slope = r.f32(112) as f64;
    let inter = r.f32(116) as f64;
    let scale = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);

    let raw = &buf[vox_offset..end];
    let dr = Reader {
        buf: raw,
        big_endian,
    };
    let mut data: Vec<f64> = match datatype {
        DT_UINT8 => raw.iter().map(|&b| b as f64).collect(),
        DT_INT16 => (0..n).map(|i| dr.i16(2 * i) as f64).collect(),
        DT_FLOAT32 => (0..n).map(|i| dr.f32(4 * i) as f64).collect(),
        _ => (0..n)
            .map(|i| f64::from_le_bytes(dr.bytes::<8>(8 * i)))
            .collect(),
    };
    if scale {
        for v in &mut data {
            *v = *v * slope + inter;
        }
    }

    let affine = if r.i16(254) > 0 {
        let mut a = [[0.0; 4]; 4];
        for (row, off) in [280usize, 296, 312].iter().enumerate() {
            for col in 0..4 {
                a[row][col] = r.f32(off + 4 * col) as f64;
            }
        }
        a[3] = [0.0, 0.0, 0.0, 1.0];
        a
    } else if r.i16(252) > 0 {
        let q = [r.f32(256) as f64, r.f32(260) as f64, r.f32(264) as f64];
        let offset = [r.f32(268) as f64, r.f32(272) as f64, r.f32(276) as f64];
        qform_affine(q, offset, voxel_size, pixdim[0])
    } else {
        super::scaling_affine(voxel_size)
    };

    Volume::new(dims, voxel_size, affine, data).map_err(|e| corrupt(path, e.to_string()))
}

fn qform_affine(q: [f64; 3], offset: [f64; 3], vs: [f64; 3], qfac: f64) -> [[f64; 4]; 4] {
    let [b, c, d] = q;
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let qfac = if qfac < 0.0 { -1.0 } else { 1.0 };
    let rot = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ];
    let scale = [vs[0], vs[1], vs[2] * qfac];
    let mut out = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = rot[i][j] * scale[j];
        }
        out[i][3] = offset[i];
    }
    out[3] = [0.0, 0.0, 0.0, 1.0];
    out
}

fn encode(v: &Volume) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let put_i16 = |h: &mut Vec<u8>, off: usize, x: i16| h[off..off + 2].copy_from_slice(&x.to_le_bytes());
    let put_i32 = |h: &mut Vec<u8>, off: usize, x: i32| h[off..off + 4].copy_from_slice(&x.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, off: usize, x: f32| h[off..off + 4].copy_from_slice(&x.to_le_bytes());

    put_i32(&mut h, 0, HEADER_SIZE as i32);
    h[38] = b'r';
    let dims = v.dims();
    put_i16(&mut h, 40, dims.len() as i16);
    for i in 0..7 {
        put_i16(&mut h, 42 + 2 * i, dims.get(i).map_or(1, |&d| d as i16));
    }
    put_i16(&mut h, 70, DT_FLOAT32);
    put_i16(&mut h, 72, 32);
    let vs = v.voxel_size();
    put_f32(&mut h, 76, 1.0);
    for (i, s) in vs.iter().enumerate() {
        put_f32(&mut h, 80 + 4 * i, *s as f32);
    }
    for i in 4..8 {
        put_f32(&mut h, 76 + 4 * i, 1.0);
    }
    put_f32(&mut h, 108, VOX_OFFSET as f32);
    put_f32(&mut h, 112, 1.0);
    put_f32(&mut h, 116, 0.0);
    // mm + sec
    h[123] = 2 | 8;
    let descrip = b"cordscan";
    h[148..148 + descrip.len()].copy_from_slice(descrip);
    put_i16(&mut h, 252, 0);
    put_i16(&mut h, 254, 2);
    for (row, off) in [280usize, 296, 312].iter().enumerate() {
        for col in 0..4 {
            put_f32(&mut h, off + 4 * col, v.affine()[row][col] as f32);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");
    // bytes 348..352: empty extension flag

    h.reserve(v.data().len() * 4);
    for &x in v.data() {
        h.extend_from_slice(&(x as f32).to_le_bytes());
    }
    h
}

/// Writes `v` as float32 NIfTI-1; gzip-compressed when the path ends in `.gz`.
pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let bytes = encode(v);
    let fail = |source| IoError::IoFailure {
        path: path.to_path_buf(),
        source,
    };
    let gz = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let file = fs::File::create(path).map_err(fail)?;
    if gz {
        let mut enc = GzEncoder::new(file, Compression::fast());
        enc.write_all(&bytes).map_err(fail)?;
        enc.finish().map_err(fail)?;
    } else {
        let mut file = file;
        file.write_all(&bytes).map_err(fail)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::scaling_affine;

    fn sample(dims: Vec<usize>) -> Volume {
        let n: usize = dims.iter().product();
        let data = (0..n).map(|i| (i as f32 * 0.37 - 3.0) as f64).collect();
        let mut a = scaling_affine([2.0, 2.0, 2.5]);
        a[0][3] = -40.0;
        a[1][3] = 12.5;
        a[2][1] = 0.25;
        Volume::new(dims, [2.0, 2.0, 2.5], a, data).unwrap()
    }

    #[test]
    fn round_trip_plain_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.nii", "a.nii.gz"] {
            let v = sample(vec![5, 4, 3, 2]);
            let p = dir.path().join(name);
            write_volume(&v, &p).unwrap();
            assert_eq!(read_volume(&p).unwrap(), v);
        }
    }

    #[test]
    fn gzip_detected_by_magic_not_extension() {
        let dir = tempfile::tempdir().unwrap();
        let v = sample(vec![3, 3, 3]);
        let gz = dir.path().join("x.nii.gz");
        write_volume(&v, &gz).unwrap();
        let renamed = dir.path().join("x.nii");
        fs::rename(&gz, &renamed).unwrap();
        assert_eq!(read_volume(&renamed).unwrap(), v);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.nii");
        write_volume(&sample(vec![4, 4, 4]), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(read_volume(&p), Err(IoError::CorruptHeader { .. })));
        fs::write(&p, &bytes[..200]).unwrap();
        assert!(matches!(read_volume(&p), Err(IoError::CorruptHeader { .. })));
    }

    #[test]
    fn non_nifti_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.nii");
        fs::write(&p, vec![7u8; 400]).unwrap();
        assert!(read_volume(&p).is_err());
    }

    #[test]
    fn unwritable_path_is_io_failure() {
        let v = sample(vec![2, 2, 2]);
        let err = write_volume(&v, "/nonexistent-dir/sub/x.nii").unwrap_err();
        assert!(matches!(err, IoError::IoFailure { .. }));
    }

    fn handmade(datatype: i16, payload: &[u8], slope: f32, inter: f32, big: bool) -> Vec<u8> {
        let mut h = vec![0u8; VOX_OFFSET];
        let i16b = |x: i16| if big { x.to_be_bytes() } else { x.to_le_bytes() };
        let i32b = |x: i32| if big { x.to_be_bytes() } else { x.to_le_bytes() };
        let f32b = |x: f32| if big { x.to_be_bytes() } else { x.to_le_bytes() };
        h[0..4].copy_from_slice(&i32b(348));
        h[40..42].copy_from_slice(&i16b(3));
        for (i, d) in [2i16, 2, 1, 1, 1, 1, 1].iter().enumerate() {
            h[42 + 2 * i..44 + 2 * i].copy_from_slice(&i16b(*d));
        }
        h[70..72].copy_from_slice(&i16b(datatype));
        for i in 0..4 {
            h[76 + 4 * i..80 + 4 * i].copy_from_slice(&f32b(1.0));
        }
        h[108..112].copy_from_slice(&f32b(352.0));
        h[112..116].copy_from_slice(&f32b(slope));
        h[116..120].copy_from_slice(&f32b(inter));
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(payload);
        h
    }

    #[test]
    fn integer_types_with_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u8.nii");
        fs::write(&p, handmade(DT_UINT8, &[0, 1, 2, 255], 2.0, 1.0, false)).unwrap();
        assert_eq!(read_volume(&p).unwrap().data(), &[1.0, 3.0, 5.0, 511.0]);

        let mut payload = Vec::new();
        for x in [-3i16, 0, 7, 1000] {
            payload.extend_from_slice(&x.to_be_bytes());
        }
        fs::write(&p, handmade(DT_INT16, &payload, 0.0, 0.0, true)).unwrap();
        let v = read_volume(&p).unwrap();
        assert_eq!(v.data(), &[-3.0, 0.0, 7.0, 1000.0]);
        assert_eq!(v.dims(), &[2, 2, 1]);

        let mut payload = Vec::new();
        for x in [0.5f64, -1.25, 3.0, 1e-300] {
            payload.extend_from_slice(&x.to_le_bytes());
        }
        fs::write(&p, handmade(DT_FLOAT64, &payload, 1.0, 0.0, false)).unwrap();
        assert_eq!(read_volume(&p).unwrap().data(), &[0.5, -1.25, 3.0, 1e-300]);

        fs::write(&p, handmade(8, &[0u8; 16], 1.0, 0.0, false)).unwrap();
        assert!(matches!(read_volume(&p), Err(IoError::UnsupportedFormat { .. })));
    }
}
