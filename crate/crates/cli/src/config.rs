//! Pipeline configuration.
//!
//! The config file is TOML. Every key is optional; missing keys take the
//! defaults below, unknown keys are rejected. Command-line flags override
//! whatever the file says.
//!
//! ```toml
//! seed = 0
//! axis_convention = "cv"          # or "gl"
//! fps_candidates = [5, 4, 3, 2, 1]
//!
//! [paths]
//! video = "object.mov"
//! workdir = "work"
//! colmap_binary = "colmap"
//! ffmpeg_binary = "ffmpeg"
//! reconstruction = "export.ply"   # point cloud exported from the trained model
//! ground_truth = "scan.ply"
//!
//! [sfm]
//! mapper_threads = 64
//! use_gpu = true
//!
//! [roi]                            # crop box, scene units
//! min = [-1.0, -1.0, -1.0]
//! max = [1.0, 1.0, 1.0]
//!
//! [object_roi]                     # optional second crop isolating the object
//! min = [-0.5, -0.5, -0.5]
//! max = [0.5, 0.5, 0.5]
//!
//! [calibration]
//! reference_radius_m = 0.04
//! roi = { min = [0.5, -0.2, -0.2], max = [0.9, 0.2, 0.2] }
//! ransac_iterations = 1000
//! inlier_tol = 0.001
//!
//! [sor]
//! k_neighbors = 20
//! std_ratio = 2.0
//!
//! [icp]
//! max_iterations = 50
//! max_correspondence_dist = 0.05
//! convergence_delta_rmse = 1e-7
//! max_source_points = 100000
//!
//! [sweep]
//! eps_min = 0.0
//! eps_max = 0.01
//! steps = 101
//! spacing = "linear"
//! f_target = 0.999
//! ```

use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use turntable_core::colmap::AxisConvention;
use turntable_core::evaluation::{Spacing, SweepSpec, DEFAULT_F_TARGET};
use turntable_core::fps_select::default_fps_candidates;
use turntable_core::processing::{RansacParams, SorParams, DEFAULT_REFERENCE_RADIUS_M};
use turntable_core::registration::IcpParams;
use turntable_core::Aabb;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub axis_convention: AxisConvention,
    pub fps_candidates: Vec<f64>,
    pub paths: PathsConfig,
    pub sfm: SfmConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roi: Option<BoxConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_roi: Option<BoxConfig>,
    pub calibration: CalibrationConfig,
    pub sor: SorConfig,
    pub icp: IcpConfig,
    pub sweep: SweepConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            axis_convention: AxisConvention::Cv,
            fps_candidates: default_fps_candidates(),
            paths: PathsConfig::default(),
            sfm: SfmConfig::default(),
            roi: None,
            object_roi: None,
            calibration: CalibrationConfig::default(),
            sor: SorConfig::default(),
            icp: IcpConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub video: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
    pub colmap_binary: String,
    pub ffmpeg_binary: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            video: None,
            workdir: None,
            colmap_binary: "colmap".into(),
            ffmpeg_binary: "ffmpeg".into(),
            model: None,
            reconstruction: None,
            ground_truth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SfmConfig {
    pub mapper_threads: usize,
    pub use_gpu: bool,
}

impl Default for SfmConfig {
    fn default() -> Self {
        SfmConfig {
            mapper_threads: 64,
            use_gpu: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxConfig {
    pub fn to_aabb(self) -> CliResult<Aabb> {
        Aabb::new(Point3::from(self.min), Point3::from(self.max))
            .map_err(|e| CliError::InvalidInput(e.to_string()))
    }

    pub fn from_aabb(b: &Aabb) -> Self {
        BoxConfig {
            min: (*b.min()).into(),
            max: (*b.max()).into(),
        }
    }
}

impl std::str::FromStr for BoxConfig {
    type Err = String;

    /// `xmin,ymin,zmin,xmax,ymax,zmax`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<_, _>>()?;
        if v.len() != 6 {
            return Err(format!(
                "expected 6 comma-separated numbers, got {}",
                v.len()
            ));
        }
        Ok(BoxConfig {
            min: [v[0], v[1], v[2]],
            max: [v[3], v[4], v[5]],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub reference_radius_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roi: Option<BoxConfig>,
    pub ransac_iterations: usize,
    pub inlier_tol: f64,
    pub min_inlier_fraction: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let r = RansacParams::default();
        CalibrationConfig {
            reference_radius_m: DEFAULT_REFERENCE_RADIUS_M,
            roi: None,
            ransac_iterations: r.iterations,
            inlier_tol: r.inlier_tol,
            min_inlier_fraction: r.min_inlier_fraction,
        }
    }
}

impl CalibrationConfig {
    pub fn ransac(&self, seed: u64) -> RansacParams {
        RansacParams {
            iterations: self.ransac_iterations,
            inlier_tol: self.inlier_tol,
            seed,
            min_inlier_fraction: self.min_inlier_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SorConfig {
    pub k_neighbors: usize,
    pub std_ratio: f64,
}

impl Default for SorConfig {
    fn default() -> Self {
        let d = SorParams::default();
        SorConfig {
            k_neighbors: d.k_neighbors,
            std_ratio: d.std_ratio,
        }
    }
}

impl SorConfig {
    pub fn params(&self) -> SorParams {
        SorParams {
            k_neighbors: self.k_neighbors,
            std_ratio: self.std_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpConfig {
    pub max_iterations: usize,
    pub max_correspondence_dist: f64,
    pub convergence_delta_rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_source_points: Option<usize>,
}

impl Default for IcpConfig {
    fn default() -> Self {
        let d = IcpParams::default();
        IcpConfig {
            max_iterations: d.max_iterations,
            max_correspondence_dist: d.max_correspondence_dist,
            convergence_delta_rmse: d.convergence_delta_rmse,
            max_source_points: d.max_source_points,
        }
    }
}

impl IcpConfig {
    pub fn params(&self, seed: u64) -> IcpParams {
        IcpParams {
            max_iterations: self.max_iterations,
            max_correspondence_dist: self.max_correspondence_dist,
            convergence_delta_rmse: self.convergence_delta_rmse,
            max_source_points: self.max_source_points,
            seed,
            ..IcpParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_min: f64,
    pub eps_max: f64,
    pub steps: usize,
    pub spacing: String,
    pub f_target: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps_min: 0.0,
            eps_max: 0.01,
            steps: 101,
            spacing: "linear".into(),
            f_target: DEFAULT_F_TARGET,
        }
    }
}

impl SweepConfig {
    pub fn spec(&self) -> CliResult<SweepSpec> {
        let spacing: Spacing = self
            .spacing
            .parse()
            .map_err(|e: String| CliError::InvalidInput(e))?;
        Ok(SweepSpec::new(
            self.eps_min,
            self.eps_max,
            self.steps,
            spacing,
        )?)
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))
    }
}
