//! Frame extraction, SfM, frame-rate selection and pose export.

use std::path::{Path, PathBuf};

use turntable_core::colmap::{
    parse_model, to_camera_to_world, unregistered_frames, write_manifest, AxisConvention,
    SparseModel,
};
use turntable_core::fps_select::{
    run_report_json, select_optimal_fps, FpsSelection, FpsTrial, ProbeError,
};

use super::{display, required, write_text};
use crate::args;
use crate::cli::{ConvertPosesArgs, ExtractFramesArgs, RunSfmArgs, SelectFpsArgs};
use crate::error::{CliError, CliResult};
use crate::summary::{Run, Stage};
use crate::tools::{resolve, run_tool};

/// Sorted names of the `frame_NNNN.png` files in `dir`.
pub fn list_frames(dir: &Path) -> CliResult<Vec<String>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let name = entry.map_err(|e| CliError::io(dir, e))?.file_name();
        let name = name.to_string_lossy();
        let digits = name
            .strip_prefix("frame_")
            .and_then(|s| s.strip_suffix(".png"));
        if digits.is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit())) {
            names.push(name.into_owned());
        }
    }
    names.sort();
    Ok(names)
}

/// Extracts frames at `fps` into `outdir`, returning their names.
pub fn extract_frames(
    run: &mut Run,
    video: &Path,
    fps: f64,
    outdir: &Path,
) -> CliResult<Vec<String>> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(CliError::InvalidInput(format!(
            "frame rate must be positive, got {fps}"
        )));
    }
    let ffmpeg = resolve("ffmpeg", &run.config.paths.ffmpeg_binary)?;
    let existing = list_frames(outdir)?;
    if !existing.is_empty() {
        run.claim(outdir)?;
        for name in &existing {
            let p = outdir.join(name);
            std::fs::remove_file(&p).map_err(|e| CliError::io(&p, e))?;
        }
    }
    std::fs::create_dir_all(outdir).map_err(|e| CliError::io(outdir, e))?;
    run_tool(
        run,
        "ffmpeg",
        &ffmpeg,
        &args![
            "-hide_banner",
            "-loglevel",
            "error",
            "-nostdin",
            "-i",
            video,
            "-vf",
            format!("fps={fps}"),
            outdir.join("frame_%04d.png"),
        ],
    )
    .map_err(|e| match e {
        CliError::ToolFailure {
            tool,
            status,
            stderr,
        } if !video.is_file() => CliError::ToolFailure {
            tool,
            status,
            stderr: format!("{stderr}\ninput video {} does not exist", video.display()),
        },
        other => other,
    })?;
    let frames = list_frames(outdir)?;
    log::info!("extracted {} frames at {fps} fps", frames.len());
    run.wrote(outdir);
    Ok(frames)
}

/// Runs feature extraction, sequential matching and mapping on `images`,
/// writing `database.db` and `sparse/` under `workdir`. Returns the model
/// directory with the most registered images.
pub fn run_sfm(run: &mut Run, images: &Path, workdir: &Path) -> CliResult<(PathBuf, SparseModel)> {
    if !images.is_dir() {
        return Err(CliError::Io(format!(
            "{}: image directory not found",
            images.display()
        )));
    }
    let colmap = resolve("colmap", &run.config.paths.colmap_binary)?;
    let db = workdir.join("database.db");
    let sparse = workdir.join("sparse");
    run.claim(&db)?;
    run.claim(&sparse)?;
    if db.exists() {
        std::fs::remove_file(&db).map_err(|e| CliError::io(&db, e))?;
    }
    if sparse.exists() {
        std::fs::remove_dir_all(&sparse).map_err(|e| CliError::io(&sparse, e))?;
    }
    std::fs::create_dir_all(&sparse).map_err(|e| CliError::io(&sparse, e))?;
    let gpu = if run.config.sfm.use_gpu { "1" } else { "0" };
    let threads = run.config.sfm.mapper_threads.to_string();
    run_tool(
        run,
        "colmap",
        &colmap,
        &args![
            "feature_extractor",
            "--database_path",
            &db,
            "--image_path",
            images,
            "--ImageReader.single_camera",
            "1",
            "--SiftExtraction.use_gpu",
            gpu,
        ],
    )?;
    run_tool(
        run,
        "colmap",
        &colmap,
        &args![
            "sequential_matcher",
            "--database_path",
            &db,
            "--SiftMatching.use_gpu",
            gpu,
        ],
    )?;
    run_tool(
        run,
        "colmap",
        &colmap,
        &args![
            "mapper",
            "--database_path",
            &db,
            "--image_path",
            images,
            "--output_path",
            &sparse,
            "--Mapper.num_threads",
            threads,
        ],
    )?;
    run.wrote(&db);
    run.wrote(&sparse);
    largest_model(&sparse)
}

/// Picks the sub-model of `sparse/` with the most images; ties go to the
/// lowest index.
fn largest_model(sparse: &Path) -> CliResult<(PathBuf, SparseModel)> {
    let entries = std::fs::read_dir(sparse).map_err(|e| CliError::io(sparse, e))?;
    let mut dirs: Vec<(u32, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(sparse, e))?.path();
        let index = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse().ok());
        if let (Some(i), true) = (index, path.is_dir()) {
            dirs.push((i, path));
        }
    }
    dirs.sort();
    let mut best: Option<(PathBuf, SparseModel)> = None;
    for (_, dir) in dirs {
        let model = match parse_model(&dir) {
            Ok(m) => m,
            Err(e) => return Err(CliError::from(e).in_file(&dir)),
        };
        log::info!(
            "{}: {} registered images",
            dir.display(),
            model.images.len()
        );
        if best
            .as_ref()
            .is_none_or(|(_, b)| model.images.len() > b.images.len())
        {
            best = Some((dir, model));
        }
    }
    match best {
        Some((dir, model)) if !model.images.is_empty() => Ok((dir, model)),
        _ => Err(CliError::NoModelProduced(format!(
            "mapper wrote no model under {}",
            sparse.display()
        ))),
    }
}

/// Extracts and registers frames for every candidate rate under
/// `workdir/fps_<rate>/` and picks the lowest complete rate.
pub fn select_fps(
    run: &mut Run,
    video: &Path,
    workdir: &Path,
    candidates: &[f64],
) -> CliResult<FpsSelection> {
    let mut probe = |video: &Path, fps: f64| -> Result<FpsTrial, ProbeError> {
        let dir = workdir.join(format!("fps_{fps}"));
        let frames = extract_frames(run, video, fps, &dir.join("images"))?;
        let n_registered = if frames.is_empty() {
            0
        } else {
            match run_sfm(run, &dir.join("images"), &dir) {
                Ok((_, model)) => frames.len() - unregistered_frames(&model, &frames).len(),
                Err(CliError::NoModelProduced(m)) => {
                    log::warn!("{fps} fps: {m}");
                    0
                }
                Err(e) => return Err(Box::new(e)),
            }
        };
        Ok(FpsTrial::new(fps, frames.len(), n_registered)?)
    };
    Ok(select_optimal_fps(video, candidates, &mut probe)?)
}

/// Model directory of the trial at `fps`.
pub fn trial_model(workdir: &Path, fps: f64) -> CliResult<PathBuf> {
    let (dir, _) = largest_model(&workdir.join(format!("fps_{fps}")).join("sparse"))?;
    Ok(dir)
}

pub fn convert_poses(
    run: &mut Run,
    model_dir: &Path,
    out: &Path,
    convention: AxisConvention,
) -> CliResult<usize> {
    run.claim(out)?;
    let model = parse_model(model_dir).map_err(|e| CliError::from(e).in_file(model_dir))?;
    let manifest = to_camera_to_world(&model, convention, display(model_dir))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_manifest(&manifest, out).map_err(|e| CliError::from(e).in_file(out))?;
    run.wrote(out);
    Ok(manifest.frames.len())
}

pub fn extract_frames_cmd(run: &mut Run, a: &ExtractFramesArgs) -> CliResult<()> {
    let video = required(&run.config.paths.video, "--video", "paths.video")?;
    let frames = run.step(Stage::Preprocess, "extract_frames", |run| {
        extract_frames(run, &video, a.fps, &a.outdir)
    })?;
    run.result("fps", a.fps);
    run.result("n_frames", frames.len());
    Ok(())
}

pub fn run_sfm_cmd(run: &mut Run, a: &RunSfmArgs) -> CliResult<()> {
    let workdir = required(&run.config.paths.workdir, "--workdir", "paths.workdir")?;
    let (dir, model) = run.step(Stage::Preprocess, "sfm", |run| {
        run_sfm(run, &a.images, &workdir)
    })?;
    let frames = list_frames(&a.images)?;
    run.result("model", display(&dir));
    run.result("n_registered", model.images.len());
    run.result("n_frames", frames.len());
    run.result("unregistered", unregistered_frames(&model, &frames));
    run.result("points3d", model.points3d_count);
    Ok(())
}

pub fn select_fps_cmd(run: &mut Run, a: &SelectFpsArgs) -> CliResult<()> {
    let video = required(&run.config.paths.video, "--video", "paths.video")?;
    let workdir = required(&run.config.paths.workdir, "--workdir", "paths.workdir")?;
    let report = a
        .report
        .clone()
        .unwrap_or_else(|| workdir.join("fps_report.json"));
    run.claim(&report)?;
    let candidates = run.config.fps_candidates.clone();
    let selection = run.step(Stage::Preprocess, "select_fps", |run| {
        select_fps(run, &video, &workdir, &candidates)
    })?;
    write_text(run, &report, &run_report_json(&selection))?;
    record_selection(run, &workdir, &selection)
}

pub fn record_selection(run: &mut Run, workdir: &Path, selection: &FpsSelection) -> CliResult<()> {
    run.result("trials", &selection.trials);
    run.result("selected_fps", selection.selected_fps);
    match selection.selected_fps {
        Some(fps) => {
            run.result("model", display(&trial_model(workdir, fps)?));
            Ok(())
        }
        None => Err(CliError::NoModelProduced(
            "no candidate frame rate registered every frame".into(),
        )),
    }
}

pub fn convert_poses_cmd(run: &mut Run, a: &ConvertPosesArgs) -> CliResult<()> {
    let model = required(&run.config.paths.model, "--model", "paths.model")?;
    let convention = run.config.axis_convention;
    let n = run.step(Stage::Preprocess, "convert_poses", |run| {
        convert_poses(run, &model, &a.out, convention)
    })?;
    run.result("frames", n);
    run.result("axis_convention", convention);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_listing_ignores_other_files() {
        let tmp = tempfile::tempdir().unwrap();
        for n in [
            "frame_0002.png",
            "frame_0001.png",
            "frame_.png",
            "frame_01a.png",
            "x.png",
            "frame_0003.jpg",
        ] {
            std::fs::write(tmp.path().join(n), b"").unwrap();
        }
        assert_eq!(
            list_frames(tmp.path()).unwrap(),
            vec!["frame_0001.png", "frame_0002.png"]
        );
        assert!(list_frames(&tmp.path().join("missing")).unwrap().is_empty());
    }

    #[test]
    fn empty_sparse_dir_means_no_model() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            largest_model(tmp.path()),
            Err(CliError::NoModelProduced(_))
        ));
    }
}
