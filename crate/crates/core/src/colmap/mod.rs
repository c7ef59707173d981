//! COLMAP sparse-model ingestion and NeRF pose-manifest export.
//!
//! COLMAP stores per-image poses world-to-camera (`T_cw`, quaternion
//! `QW QX QY QZ` plus `TX TY TZ`). NeRF trainers want camera-to-world
//! matrices, so [`to_camera_to_world`] inverts every pose and optionally
//! applies the OpenGL axis flip used by common NeRF tooling.
//!
//! Layouts follow <https://colmap.github.io/format.html>.

mod binary;
mod manifest;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PoseConvention, RigidTransform, UnitQuaternion};

pub use binary::{parse_model_binary, write_model_binary};
pub use manifest::{manifest_to_json, read_manifest, write_manifest};
pub use text::{parse_model_text, write_model_text};

#[derive(Debug, Error)]
pub enum ColmapError {
    #[error("missing model file {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: {reason}")]
    MalformedRecord {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("unknown camera model '{0}'")]
    UnknownCameraModel(String),
    #[error("{0}: file ends inside a record")]
    TruncatedFile(String),
    #[error("{file}: not a COLMAP binary model ({reason})")]
    MagicMismatch { file: String, reason: String },
    #[error("model contains no registered images")]
    EmptyModel,
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// COLMAP camera models with their parameter counts and binary ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CameraModel {
    SimplePinhole,
    Pinhole,
    SimpleRadial,
    Radial,
    OpenCv,
    OpenCvFisheye,
    FullOpenCv,
    Fov,
    SimpleRadialFisheye,
    RadialFisheye,
    ThinPrismFisheye,
}

impl CameraModel {
    const ALL: [CameraModel; 11] = [
        CameraModel::SimplePinhole,
        CameraModel::Pinhole,
        CameraModel::SimpleRadial,
        CameraModel::Radial,
        CameraModel::OpenCv,
        CameraModel::OpenCvFisheye,
        CameraModel::FullOpenCv,
        CameraModel::Fov,
        CameraModel::SimpleRadialFisheye,
        CameraModel::RadialFisheye,
        CameraModel::ThinPrismFisheye,
    ];

    pub fn id(self) -> i32 {
        Self::ALL.iter().position(|&m| m == self).expect("listed") as i32
    }

    pub fn from_id(id: i32) -> Option<Self> {
        usize::try_from(id)
            .ok()
            .and_then(|i| Self::ALL.get(i).copied())
    }

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::SimplePinhole => "SIMPLE_PINHOLE",
            CameraModel::Pinhole => "PINHOLE",
            CameraModel::SimpleRadial => "SIMPLE_RADIAL",
            CameraModel::Radial => "RADIAL",
            CameraModel::OpenCv => "OPENCV",
            CameraModel::OpenCvFisheye => "OPENCV_FISHEYE",
            CameraModel::FullOpenCv => "FULL_OPENCV",
            CameraModel::Fov => "FOV",
            CameraModel::SimpleRadialFisheye => "SIMPLE_RADIAL_FISHEYE",
            CameraModel::RadialFisheye => "RADIAL_FISHEYE",
            CameraModel::ThinPrismFisheye => "THIN_PRISM_FISHEYE",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.name() == name)
    }

    /// Number of intrinsic parameters.
    pub fn arity(self) -> usize {
        match self {
            CameraModel::SimplePinhole => 3,
            CameraModel::Pinhole | CameraModel::SimpleRadial | CameraModel::SimpleRadialFisheye => {
                4
            }
            CameraModel::Radial | CameraModel::Fov | CameraModel::RadialFisheye => 5,
            CameraModel::OpenCv | CameraModel::OpenCvFisheye => 8,
            CameraModel::FullOpenCv | CameraModel::ThinPrismFisheye => 12,
        }
    }
}

/// Intrinsics are parsed and passed through untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub camera_id: u32,
    pub model: CameraModel,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

impl CameraIntrinsics {
    fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err(format!(
                "camera {} has zero size {}x{}",
                self.camera_id, self.width, self.height
            ));
        }
        if self.params.len() != self.model.arity() {
            return Err(format!(
                "camera {}: {} expects {} params, got {}",
                self.camera_id,
                self.model.name(),
                self.model.arity(),
                self.params.len()
            ));
        }
        Ok(())
    }
}

/// One registered image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: u32,
    /// `QW QX QY QZ` exactly as stored in the model (before renormalization).
    pub qvec: [f64; 4],
    /// World-to-camera pose.
    pub pose_cw: RigidTransform,
    pub camera_id: u32,
    pub file_name: String,
}

impl ImageRecord {
    pub fn new(
        image_id: u32,
        qvec: [f64; 4],
        tvec: [f64; 3],
        camera_id: u32,
        file_name: impl Into<String>,
    ) -> Result<Self, GeometryError> {
        let q = UnitQuaternion::new(qvec[0], qvec[1], qvec[2], qvec[3])?;
        let pose_cw = RigidTransform::from_quaternion(&q, Vector3::from(tvec))
            .with_convention(PoseConvention::WorldToCamera);
        Ok(ImageRecord {
            image_id,
            qvec,
            pose_cw,
            camera_id,
            file_name: file_name.into(),
        })
    }

    pub fn tvec(&self) -> [f64; 3] {
        (*self.pose_cw.translation()).into()
    }
}

/// Parsed sparse reconstruction. Images are ordered by `image_id`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseModel {
    pub cameras: BTreeMap<u32, CameraIntrinsics>,
    pub images: Vec<ImageRecord>,
    pub points3d_count: usize,
    /// Mean per-point reprojection error in pixels, when points3D was present.
    pub mean_reprojection_error: Option<f64>,
}

impl SparseModel {
    /// Checks cross-references and canonicalizes image order.
    pub(crate) fn finish(mut self, images_file: &str) -> Result<Self, ColmapError> {
        for cam in self.cameras.values() {
            cam.validate()
                .map_err(|reason| ColmapError::MalformedRecord {
                    file: "cameras".into(),
                    line: 0,
                    reason,
                })?;
        }
        for img in &self.images {
            if img.file_name.is_empty() {
                return Err(ColmapError::MalformedRecord {
                    file: images_file.into(),
                    line: 0,
                    reason: format!("image {} has an empty name", img.image_id),
                });
            }
            if !self.cameras.contains_key(&img.camera_id) {
                return Err(ColmapError::MalformedRecord {
                    file: images_file.into(),
                    line: 0,
                    reason: format!(
                        "image {} references unknown camera {}",
                        img.image_id, img.camera_id
                    ),
                });
            }
        }
        self.images.sort_by_key(|i| i.image_id);
        Ok(self)
    }
}

/// Parses `dir` as a binary model if `images.bin` exists, else as text.
pub fn parse_model(dir: impl AsRef<Path>) -> Result<SparseModel, ColmapError> {
    let dir = dir.as_ref();
    if dir.join("images.bin").exists() {
        parse_model_binary(dir)
    } else {
        parse_model_text(dir)
    }
}

/// Camera axis convention of an exported manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AxisConvention {
    /// Plain inverse of the COLMAP pose (x right, y down, z forward).
    #[default]
    Cv,
    /// Inverse followed by negating the camera y and z axes (x right, y up, z backward).
    Gl,
}

impl std::str::FromStr for AxisConvention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cv" => Ok(AxisConvention::Cv),
            "gl" => Ok(AxisConvention::Gl),
            other => Err(format!(
                "unknown axis convention '{other}' (expected cv|gl)"
            )),
        }
    }
}

/// One frame of the NeRF handoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestFrame {
    pub file_path: String,
    pub camera_to_world: RigidTransform,
    pub width: u64,
    pub height: u64,
    pub camera_model: String,
    pub params: Vec<f64>,
}

/// Camera-to-world poses ready for a NeRF trainer, sorted by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseManifest {
    pub axis_convention: AxisConvention,
    pub source_model: String,
    pub frames: Vec<ManifestFrame>,
}

/// Inverts every `T_cw` into `T_wc` and packages the result.
///
/// With [`AxisConvention::Gl`] the second and third rotation columns are
/// negated after inversion.
pub fn to_camera_to_world(
    model: &SparseModel,
    convention: AxisConvention,
    source_model: impl Into<String>,
) -> Result<PoseManifest, ColmapError> {
    if model.images.is_empty() {
        return Err(ColmapError::EmptyModel);
    }
    let mut frames =
        model
            .images
            .iter()
            .map(|img| {
                let cam = model.cameras.get(&img.camera_id).ok_or_else(|| {
                    ColmapError::MalformedRecord {
                        file: "images".into(),
                        line: 0,
                        reason: format!("unknown camera {}", img.camera_id),
                    }
                })?;
                let wc = img.pose_cw.invert();
                let wc = match convention {
                    AxisConvention::Cv => wc,
                    AxisConvention::Gl => cv_to_gl(&wc),
                };
                Ok(ManifestFrame {
                    file_path: img.file_name.clone(),
                    camera_to_world: wc,
                    width: cam.width,
                    height: cam.height,
                    camera_model: cam.model.name().to_string(),
                    params: cam.params.clone(),
                })
            })
            .collect::<Result<Vec<_>, ColmapError>>()?;
    frames.sort_by(|a, b| a.file_path.cmp(&b.file_path));
    Ok(PoseManifest {
        axis_convention: convention,
        source_model: source_model.into(),
        frames,
    })
}

fn cv_to_gl(wc: &RigidTransform) -> RigidTransform {
    let mut r = *wc.rotation();
    for c in 1..3 {
        for row in 0..3 {
            r[(row, c)] = -r[(row, c)];
        }
    }
    RigidTransform::from_parts_unchecked(r, *wc.translation())
        .with_convention(PoseConvention::CameraToWorld)
}

/// Registration counts for one frame-extraction trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationStats {
    pub n_frames: usize,
    pub n_registered: usize,
}

impl RegistrationStats {
    /// Every extracted frame registered, and there was at least one frame.
    pub fn is_complete(&self) -> bool {
        self.n_frames > 0 && self.n_registered == self.n_frames
    }

    /// Zero extracted frames makes a trial meaningless.
    pub fn is_valid_trial(&self) -> bool {
        self.n_frames > 0
    }
}

pub fn registration_stats(model: &SparseModel, extracted_frame_count: usize) -> RegistrationStats {
    RegistrationStats {
        n_frames: extracted_frame_count,
        n_registered: model.images.len(),
    }
}

/// Extracted frames that did not receive a pose, sorted by name.
pub fn unregistered_frames<S: AsRef<str>>(model: &SparseModel, extracted: &[S]) -> Vec<String> {
    let registered: BTreeSet<&str> = model.images.iter().map(|i| i.file_name.as_str()).collect();
    let mut missing: Vec<String> = extracted
        .iter()
        .map(|s| s.as_ref())
        .filter(|name| !registered.contains(name))
        .map(str::to_string)
        .collect();
    missing.sort();
    missing.dedup();
    missing
}
