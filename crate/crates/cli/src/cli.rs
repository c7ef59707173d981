use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use turntable_core::colmap::AxisConvention;

use crate::config::{BoxConfig, PipelineConfig};

/// Stationary-camera turntable reconstruction pipeline.
#[derive(Debug, Parser)]
#[command(name = "turntable", version)]
pub struct Cli {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overwrite existing outputs
    #[arg(long, global = true)]
    pub force: bool,

    /// Write the run summary JSON here instead of stdout
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,

    /// Seed for every randomized step
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract frames from a video at a fixed rate
    ExtractFrames(ExtractFramesArgs),
    /// Find the lowest frame rate at which every frame registers
    SelectFps(SelectFpsArgs),
    /// Run COLMAP feature extraction, sequential matching and mapping
    RunSfm(RunSfmArgs),
    /// Convert a COLMAP model into a camera-to-world pose manifest
    ConvertPoses(ConvertPosesArgs),
    /// Keep the points inside a box
    Crop(CropArgs),
    /// Statistical outlier removal
    Sor(SorArgs),
    /// Fit the reference ball and rescale to meters
    Calibrate(CalibrateArgs),
    /// Align a cloud to a reference with point-to-point ICP
    Icp(IcpArgs),
    /// Precision/recall/F-score threshold sweep
    Eval(EvalArgs),
    /// Generate a synthetic capture with known ground truth
    Synth(SynthArgs),
    /// Run every stage configured in the config file
    Pipeline(PipelineArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ExtractFrames(_) => "extract-frames",
            Command::SelectFps(_) => "select-fps",
            Command::RunSfm(_) => "run-sfm",
            Command::ConvertPoses(_) => "convert-poses",
            Command::Crop(_) => "crop",
            Command::Sor(_) => "sor",
            Command::Calibrate(_) => "calibrate",
            Command::Icp(_) => "icp",
            Command::Eval(_) => "eval",
            Command::Synth(_) => "synth",
            Command::Pipeline(_) => "pipeline",
        }
    }

    /// Folds the command's flags into `cfg`.
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        match self {
            Command::ExtractFrames(a) => {
                set(&mut cfg.paths.video, &a.video);
                a.tools.apply(cfg);
            }
            Command::SelectFps(a) => {
                set(&mut cfg.paths.video, &a.video);
                set(&mut cfg.paths.workdir, &a.workdir);
                if let Some(c) = &a.fps_candidates {
                    cfg.fps_candidates = c.clone();
                }
                a.tools.apply(cfg);
                a.sfm.apply(cfg);
            }
            Command::RunSfm(a) => {
                set(&mut cfg.paths.workdir, &a.workdir);
                a.tools.apply(cfg);
                a.sfm.apply(cfg);
            }
            Command::ConvertPoses(a) => {
                set(&mut cfg.paths.model, &a.model);
                if let Some(c) = a.axis_convention {
                    cfg.axis_convention = c;
                }
            }
            Command::Crop(a) => {
                if a.roi.is_some() {
                    cfg.roi = a.roi;
                }
            }
            Command::Sor(a) => a.sor.apply(cfg),
            Command::Calibrate(a) => a.calibration.apply(cfg),
            Command::Icp(a) => a.icp.apply(cfg),
            Command::Eval(a) => a.sweep.apply(cfg),
            Command::Synth(_) => {}
            Command::Pipeline(a) => {
                set(&mut cfg.paths.video, &a.video);
                set(&mut cfg.paths.workdir, &a.workdir);
                set(&mut cfg.paths.model, &a.model);
                set(&mut cfg.paths.reconstruction, &a.reconstruction);
                set(&mut cfg.paths.ground_truth, &a.ground_truth);
                if a.roi.is_some() {
                    cfg.roi = a.roi;
                }
                if a.object_roi.is_some() {
                    cfg.object_roi = a.object_roi;
                }
                if let Some(c) = a.axis_convention {
                    cfg.axis_convention = c;
                }
                a.tools.apply(cfg);
                a.sfm.apply(cfg);
                a.sor.apply(cfg);
                a.calibration.apply(cfg);
                a.icp.apply(cfg);
                a.sweep.apply(cfg);
            }
        }
    }
}

fn set<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

fn put<T: Copy>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

#[derive(Debug, Args)]
pub struct ToolArgs {
    /// ffmpeg executable (name on PATH or explicit path)
    #[arg(long)]
    pub ffmpeg: Option<String>,
    /// COLMAP executable (name on PATH or explicit path)
    #[arg(long)]
    pub colmap: Option<String>,
}

impl ToolArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(f) = &self.ffmpeg {
            cfg.paths.ffmpeg_binary.clone_from(f);
        }
        if let Some(c) = &self.colmap {
            cfg.paths.colmap_binary.clone_from(c);
        }
    }
}

#[derive(Debug, Args)]
pub struct SfmArgs {
    /// Threads for the COLMAP mapper [default: 64]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Run SIFT extraction and matching on the GPU
    #[arg(long, conflicts_with = "no_gpu")]
    pub gpu: bool,
    /// Run SIFT extraction and matching on the CPU
    #[arg(long)]
    pub no_gpu: bool,
}

impl SfmArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        put(&mut cfg.sfm.mapper_threads, self.threads);
        if self.gpu {
            cfg.sfm.use_gpu = true;
        }
        if self.no_gpu {
            cfg.sfm.use_gpu = false;
        }
    }
}

#[derive(Debug, Args)]
pub struct SorFlags {
    /// Neighbours per point [default: 20]
    #[arg(long = "k")]
    pub k_neighbors: Option<usize>,
    /// Standard-deviation multiplier [default: 2.0]
    #[arg(long)]
    pub std_ratio: Option<f64>,
}

impl SorFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        put(&mut cfg.sor.k_neighbors, self.k_neighbors);
        put(&mut cfg.sor.std_ratio, self.std_ratio);
    }
}

#[derive(Debug, Args)]
pub struct CalibrationFlags {
    /// Known radius of the reference ball in meters [default: 0.04]
    #[arg(long)]
    pub reference_radius: Option<f64>,
    /// Box around the ball, xmin,ymin,zmin,xmax,ymax,zmax
    #[arg(long, allow_hyphen_values = true)]
    pub ball_roi: Option<BoxConfig>,
    /// Sphere hypotheses to score [default: 1000]
    #[arg(long)]
    pub ransac_iterations: Option<usize>,
    /// Inlier band around the sphere, scene units
    #[arg(long)]
    pub inlier_tol: Option<f64>,
}

impl CalibrationFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        put(
            &mut cfg.calibration.reference_radius_m,
            self.reference_radius,
        );
        if self.ball_roi.is_some() {
            cfg.calibration.roi = self.ball_roi;
        }
        put(
            &mut cfg.calibration.ransac_iterations,
            self.ransac_iterations,
        );
        put(&mut cfg.calibration.inlier_tol, self.inlier_tol);
    }
}

#[derive(Debug, Args)]
pub struct IcpFlags {
    /// ICP iteration cap [default: 50]
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Correspondence cutoff in meters
    #[arg(long)]
    pub max_correspondence_dist: Option<f64>,
    /// Stop when the RMSE drops by less than this [default: 1e-7]
    #[arg(long)]
    pub convergence_delta: Option<f64>,
    /// Randomly subsample the source to at most this many points
    #[arg(long)]
    pub max_source_points: Option<usize>,
}

impl IcpFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        put(&mut cfg.icp.max_iterations, self.max_iterations);
        put(
            &mut cfg.icp.max_correspondence_dist,
            self.max_correspondence_dist,
        );
        put(&mut cfg.icp.convergence_delta_rmse, self.convergence_delta);
        if self.max_source_points.is_some() {
            cfg.icp.max_source_points = self.max_source_points;
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepFlags {
    /// Smallest threshold, meters [default: 0]
    #[arg(long)]
    pub eps_min: Option<f64>,
    /// Largest threshold, meters [default: 0.01]
    #[arg(long)]
    pub eps_max: Option<f64>,
    /// Number of thresholds [default: 101]
    #[arg(long)]
    pub steps: Option<usize>,
    /// linear or log
    #[arg(long)]
    pub spacing: Option<String>,
    /// F-score the optimal threshold must reach [default: 0.999]
    #[arg(long)]
    pub f_target: Option<f64>,
}

impl SweepFlags {
    fn apply(&self, cfg: &mut PipelineConfig) {
        put(&mut cfg.sweep.eps_min, self.eps_min);
        put(&mut cfg.sweep.eps_max, self.eps_max);
        put(&mut cfg.sweep.steps, self.steps);
        if let Some(s) = &self.spacing {
            cfg.sweep.spacing.clone_from(s);
        }
        put(&mut cfg.sweep.f_target, self.f_target);
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct PlyOutArgs {
    /// Write ASCII PLY instead of binary
    #[arg(long)]
    pub ascii: bool,
    /// Store coordinates as float64 instead of float32
    #[arg(long)]
    pub double: bool,
}

#[derive(Debug, Args)]
pub struct ExtractFramesArgs {
    /// Turntable video
    #[arg(long)]
    pub video: Option<PathBuf>,
    /// Frames per second to extract
    #[arg(long)]
    pub fps: f64,
    /// Output directory
    #[arg(long)]
    pub outdir: PathBuf,
    #[command(flatten)]
    pub tools: ToolArgs,
}

#[derive(Debug, Args)]
pub struct SelectFpsArgs {
    /// Turntable video
    #[arg(long)]
    pub video: Option<PathBuf>,
    /// Directory for intermediate and final outputs
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Candidate rates in trial order [default: 5,4,3,2,1]
    #[arg(long, value_delimiter = ',')]
    pub fps_candidates: Option<Vec<f64>>,
    /// Run report path [default: <workdir>/fps_report.json]
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub tools: ToolArgs,
    #[command(flatten)]
    pub sfm: SfmArgs,
}

#[derive(Debug, Args)]
pub struct RunSfmArgs {
    /// Directory of extracted frames
    #[arg(long)]
    pub images: PathBuf,
    /// Directory for intermediate and final outputs
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    #[command(flatten)]
    pub tools: ToolArgs,
    #[command(flatten)]
    pub sfm: SfmArgs,
}

#[derive(Debug, Args)]
pub struct ConvertPosesArgs {
    /// COLMAP model directory (text or binary)
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest camera axes: cv or gl [default: cv]
    #[arg(long, value_parser = parse_axis)]
    pub axis_convention: Option<AxisConvention>,
}

fn parse_axis(s: &str) -> Result<AxisConvention, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct CropArgs {
    /// Input PLY
    #[arg(long)]
    pub input: PathBuf,
    /// Output PLY
    #[arg(long)]
    pub output: PathBuf,
    /// Crop box, xmin,ymin,zmin,xmax,ymax,zmax
    #[arg(long, allow_hyphen_values = true)]
    pub roi: Option<BoxConfig>,
    #[command(flatten)]
    pub ply: PlyOutArgs,
}

#[derive(Debug, Args)]
pub struct SorArgs {
    /// Input PLY
    #[arg(long)]
    pub input: PathBuf,
    /// Output PLY
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub sor: SorFlags,
    #[command(flatten)]
    pub ply: PlyOutArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Cloud containing the reference ball
    #[arg(long)]
    pub input: PathBuf,
    /// Cloud to rescale [default: the input]
    #[arg(long)]
    pub apply_to: Option<PathBuf>,
    /// Rescaled cloud
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Calibration report JSON
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub calibration: CalibrationFlags,
    #[command(flatten)]
    pub ply: PlyOutArgs,
}

#[derive(Debug, Args)]
pub struct IcpArgs {
    /// Cloud to move
    #[arg(long)]
    pub source: PathBuf,
    /// Fixed reference cloud
    #[arg(long)]
    pub target: PathBuf,
    /// Registration result JSON
    #[arg(long)]
    pub transform_out: PathBuf,
    /// Source cloud mapped into the target frame
    #[arg(long)]
    pub aligned: Option<PathBuf>,
    /// Initial guess: JSON file with a 4x4 "matrix"
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub icp: IcpFlags,
    #[command(flatten)]
    pub ply: PlyOutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reconstructed cloud
    #[arg(long)]
    pub psc: PathBuf,
    /// Ground-truth cloud
    #[arg(long)]
    pub pgt: PathBuf,
    /// Curve CSV
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub sweep: SweepFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub outdir: PathBuf,
    #[arg(long, default_value_t = 36)]
    pub frames: usize,
    /// Expected samples within an evaluation-threshold disk; sets density
    #[arg(long, default_value_t = 25.0)]
    pub coverage: f64,
    /// Scene units per meter in the simulated reconstruction
    #[arg(long, default_value_t = 2.7)]
    pub scene_scale: f64,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Turntable video
    #[arg(long)]
    pub video: Option<PathBuf>,
    /// Directory for intermediate and final outputs
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Existing COLMAP model; skips frame-rate selection
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Point cloud exported from the trained radiance field
    #[arg(long)]
    pub reconstruction: Option<PathBuf>,
    /// Reference scan in meters; enables evaluation
    /// Reference scan in meters; enables evaluation
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Crop box, xmin,ymin,zmin,xmax,ymax,zmax
    #[arg(long, allow_hyphen_values = true)]
    pub roi: Option<BoxConfig>,
    /// Box isolating the object after calibration, xmin,ymin,zmin,xmax,ymax,zmax
    #[arg(long, allow_hyphen_values = true)]
    pub object_roi: Option<BoxConfig>,
    /// Manifest camera axes: cv or gl [default: cv]
    #[arg(long, value_parser = parse_axis)]
    pub axis_convention: Option<AxisConvention>,
    #[command(flatten)]
    pub tools: ToolArgs,
    #[command(flatten)]
    pub sfm: SfmArgs,
    #[command(flatten)]
    pub sor: SorFlags,
    #[command(flatten)]
    pub calibration: CalibrationFlags,
    #[command(flatten)]
    pub icp: IcpFlags,
    #[command(flatten)]
    pub sweep: SweepFlags,
    #[command(flatten)]
    pub ply: PlyOutArgs,
}
