pub mod capture;
pub mod cloud;
pub mod pipeline;
pub mod synth;

use std::path::Path;

use turntable_core::numfmt::to_stable_json;
use turntable_core::pointcloud::{read_ply, write_ply_with, PlyFormat, PlyScalar};
use turntable_core::PointCloud;

use crate::cli::{Command, PlyOutArgs};
use crate::error::{CliError, CliResult};
use crate::summary::Run;

pub fn dispatch(run: &mut Run, command: &Command) -> CliResult<()> {
    match command {
        Command::ExtractFrames(a) => capture::extract_frames_cmd(run, a),
        Command::SelectFps(a) => capture::select_fps_cmd(run, a),
        Command::RunSfm(a) => capture::run_sfm_cmd(run, a),
        Command::ConvertPoses(a) => capture::convert_poses_cmd(run, a),
        Command::Crop(a) => cloud::crop_cmd(run, a),
        Command::Sor(a) => cloud::sor_cmd(run, a),
        Command::Calibrate(a) => cloud::calibrate_cmd(run, a),
        Command::Icp(a) => cloud::icp_cmd(run, a),
        Command::Eval(a) => cloud::eval_cmd(run, a),
        Command::Synth(a) => synth::synth_cmd(run, a),
        Command::Pipeline(a) => pipeline::pipeline_cmd(run, a),
    }
}

/// Unwraps a setting that may come from a flag or the config file.
pub fn required<T: Clone>(value: &Option<T>, flag: &str, key: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("missing {flag} (or {key} in the config file)")))
}

pub fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    log::info!("reading {}", path.display());
    let cloud = read_ply(path).map_err(|e| CliError::from(e).in_file(path))?;
    log::info!("{}: {} points", path.display(), cloud.len());
    Ok(cloud)
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
        }
        _ => Ok(()),
    }
}

pub fn write_cloud(
    run: &mut Run,
    cloud: &PointCloud,
    path: &Path,
    ply: PlyOutArgs,
) -> CliResult<()> {
    ensure_parent(path)?;
    let format = if ply.ascii {
        PlyFormat::Ascii
    } else {
        PlyFormat::BinaryLittleEndian
    };
    let scalar = if ply.double {
        PlyScalar::Double
    } else {
        PlyScalar::Float
    };
    write_ply_with(cloud, path, format, scalar).map_err(|e| CliError::from(e).in_file(path))?;
    log::info!("wrote {} ({} points)", path.display(), cloud.len());
    run.wrote(path);
    Ok(())
}

pub fn write_text(run: &mut Run, path: &Path, text: &str) -> CliResult<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    run.wrote(path);
    Ok(())
}

pub fn write_json<T: serde::Serialize>(run: &mut Run, path: &Path, value: &T) -> CliResult<()> {
    let text = to_stable_json(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    write_text(run, path, &text)
}

pub fn display(path: &Path) -> String {
    path.display().to_string()
}
