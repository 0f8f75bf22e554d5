//! File formats: NIfTI-1 volumes, FSL `bval`/`bvec` tables and label maps.

mod nifti;
mod scheme;

pub use nifti::{read_volume, write_volume};
pub use scheme::{read_scheme, write_scheme, GradientEntry, GradientScheme, B0_THRESHOLD};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: unsupported format: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("{path}: corrupt header: {reason}")]
    CorruptHeader { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("gradient table length mismatch: {bvals} b-values vs {bvecs} directions")]
    LengthMismatch { bvals: usize, bvecs: usize },
    #[error("{path}: non-numeric token `{token}`")]
    NonNumericToken { path: PathBuf, token: String },
    #[error("invalid gradient scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
}

/// A 3D or 4D image on a regular grid.
///
/// Data is stored x-fastest, as on disk; for 4D volumes the measurement
/// index is the slowest axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: Vec<usize>,
    voxel_size: [f64; 3],
    affine: [[f64; 4]; 4],
    data: Vec<f64>,
}

pub fn scaling_affine(voxel_size: [f64; 3]) -> [[f64; 4]; 4] {
    [
        [voxel_size[0], 0.0, 0.0, 0.0],
        [0.0, voxel_size[1], 0.0, 0.0],
        [0.0, 0.0, voxel_size[2], 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

impl Volume {
    pub fn new(
        dims: Vec<usize>,
        voxel_size: [f64; 3],
        affine: [[f64; 4]; 4],
        data: Vec<f64>,
    ) -> Result<Self, IoError> {
        if !(dims.len() == 3 || dims.len() == 4) {
            return Err(IoError::InvalidVolume(format!(
                "expected 3 or 4 dimensions, got {}",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(IoError::InvalidVolume(format!("zero-sized dimension in {dims:?}")));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(IoError::InvalidVolume(format!(
                "dims {dims:?} imply {n} values, got {}",
                data.len()
            )));
        }
        if voxel_size.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(IoError::InvalidVolume(format!(
                "voxel sizes must be positive, got {voxel_size:?}"
            )));
        }
        if affine[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(IoError::InvalidVolume("affine last row must be (0,0,0,1)".into()));
        }
        Ok(Volume {
            dims,
            voxel_size,
            affine,
            data,
        })
    }

    /// Zero-filled volume sharing the spatial geometry of `self`.
    pub fn zeros_like(&self, nt: Option<usize>) -> Volume {
        let mut dims = self.dims[..3].to_vec();
        if let Some(nt) = nt {
            dims.push(nt);
        }
        let n = dims.iter().product();
        Volume {
            dims,
            voxel_size: self.voxel_size,
            affine: self.affine,
            data: vec![0.0; n],
        }
    }

    /// 3D volume with the geometry of `self` and the given data.
    pub fn with_data_3d(&self, data: Vec<f64>) -> Volume {
        assert_eq!(data.len(), self.n_voxels());
        Volume {
            dims: self.dims[..3].to_vec(),
            voxel_size: self.voxel_size,
            affine: self.affine,
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spatial_dims(&self) -> [usize; 3] {
        [self.dims[0], self.dims[1], self.dims[2]]
    }

    /// Number of measurements along the 4th axis (1 for 3D volumes).
    pub fn n_frames(&self) -> usize {
        self.dims.get(3).copied().unwrap_or(1)
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[..3].iter().product()
    }

    pub fn voxel_size(&self) -> [f64; 3] {
        self.voxel_size
    }

    pub fn affine(&self) -> &[[f64; 4]; 4] {
        &self.affine
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn linear_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.linear_index(x, y, z)]
    }

    /// Signal of spatial voxel `v` across all frames.
    pub fn voxel_series(&self, v: usize) -> Vec<f64> {
        let nv = self.n_voxels();
        (0..self.n_frames()).map(|t| self.data[v + t * nv]).collect()
    }

    /// True when both volumes lie on the same spatial grid.
    pub fn same_grid(&self, other: &Volume) -> bool {
        self.dims[..3] == other.dims[..3] && self.affine == other.affine
    }
}

/// Vertebral level labels with white-matter weights and an optional lesion mask.
#[derive(Clone, Debug)]
pub struct LabelMap {
    pub levels: Volume,
    pub wm_weight: Volume,
    pub lesion: Option<Volume>,
}

impl LabelMap {
    pub fn new(levels: Volume, wm_weight: Volume, lesion: Option<Volume>) -> Result<Self, IoError> {
        if levels.dims().len() != 3 || wm_weight.dims().len() != 3 {
            return Err(IoError::InvalidVolume("label volumes must be 3D".into()));
        }
        if !levels.same_grid(&wm_weight) {
            return Err(IoError::InvalidVolume(
                "level labels and WM weights are on different grids".into(),
            ));
        }
        if let Some(les) = &lesion {
            if !levels.same_grid(les) {
                return Err(IoError::InvalidVolume(
                    "lesion mask and level labels are on different grids".into(),
                ));
            }
        }
        if let Some(w) = wm_weight.data().iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(IoError::InvalidVolume(format!("WM weight {w} outside [0, 1]")));
        }
        if let Some(l) = levels
            .data()
            .iter()
            .find(|&&l| l.fract() != 0.0 || !(0.0..=7.0).contains(&l))
        {
            return Err(IoError::InvalidVolume(format!("level label {l} not in 0..=7")));
        }
        Ok(LabelMap {
            levels,
            wm_weight,
            lesion,
        })
    }

    pub fn level_at(&self, v: usize) -> u8 {
        self.levels.data()[v] as u8
    }
}
