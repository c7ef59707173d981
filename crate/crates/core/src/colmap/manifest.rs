//! Pose-manifest JSON.
//!
//! ```json
//! {"axis_convention": "cv", "frames": [{"camera_model": "PINHOLE", "file_path": "frame_0001.png",
//!   "h": 2160, "params": [..], "transform_matrix": [[..4], [..4], [..4], [..4]], "w": 3840}],
//!  "source_model": "..."}
//! ```
//!
//! Keys are sorted and floats carry 17 significant digits, so identical
//! manifests serialize to identical bytes.

use std::fs;
use std::path::Path;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use super::{AxisConvention, ColmapError, ManifestFrame, PoseManifest};
use crate::geometry::{PoseConvention, RigidTransform};
use crate::numfmt::to_stable_json;

/// Rotation tolerance for manifests produced by other tools.
const MANIFEST_RIGID_TOL: f64 = 1e-6;

#[derive(Serialize, Deserialize)]
struct FrameJson {
    file_path: String,
    transform_matrix: [[f64; 4]; 4],
    w: u64,
    h: u64,
    camera_model: String,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ManifestJson {
    axis_convention: AxisConvention,
    #[serde(default)]
    source_model: String,
    frames: Vec<FrameJson>,
}

pub fn manifest_to_json(manifest: &PoseManifest) -> String {
    let doc = ManifestJson {
        axis_convention: manifest.axis_convention,
        source_model: manifest.source_model.clone(),
        frames: manifest
            .frames
            .iter()
            .map(|f| {
                let m = f.camera_to_world.matrix();
                FrameJson {
                    file_path: f.file_path.clone(),
                    transform_matrix: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
                    w: f.width,
                    h: f.height,
                    camera_model: f.camera_model.clone(),
                    params: f.params.clone(),
                }
            })
            .collect(),
    };
    to_stable_json(&doc).expect("manifest values are finite")
}

pub fn write_manifest(manifest: &PoseManifest, path: impl AsRef<Path>) -> Result<(), ColmapError> {
    fs::write(path, manifest_to_json(manifest))?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<PoseManifest, ColmapError> {
    let text = fs::read_to_string(path)?;
    let doc: ManifestJson =
        serde_json::from_str(&text).map_err(|e| ColmapError::InvalidManifest(e.to_string()))?;
    let frames = doc
        .frames
        .into_iter()
        .map(|f| {
            let m = Matrix4::from_fn(|r, c| f.transform_matrix[r][c]);
            let wc = RigidTransform::from_matrix(&m, MANIFEST_RIGID_TOL)
                .map_err(|e| ColmapError::InvalidManifest(format!("{}: {e}", f.file_path)))?
                .with_convention(PoseConvention::CameraToWorld);
            Ok(ManifestFrame {
                file_path: f.file_path,
                camera_to_world: wc,
                width: f.w,
                height: f.h,
                camera_model: f.camera_model,
                params: f.params,
            })
        })
        .collect::<Result<Vec<_>, ColmapError>>()?;
    Ok(PoseManifest {
        axis_convention: doc.axis_convention,
        source_model: doc.source_model,
        frames,
    })
}
