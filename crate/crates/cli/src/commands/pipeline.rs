//! All stages in order, each enabled by the inputs the config provides:
//!
//! * preprocess: `paths.video` runs frame-rate selection and SfM;
//!   `paths.model` uses an existing model. Either way the poses are exported
//!   to `<workdir>/transforms.json`.
//! * train: happens outside this tool and is recorded as external.
//! * pcd_reconstruction: `paths.reconstruction` is cropped, filtered,
//!   calibrated against the reference ball and written in meters.
//! * evaluation: with `paths.ground_truth`, the metric cloud is aligned by
//!   ICP and swept against the ground truth.

use std::path::{Path, PathBuf};

use turntable_core::fps_select::run_report_json;
use turntable_core::processing::apply_scale;
use turntable_core::registration::transform_cloud;
use turntable_core::RigidTransform;

use super::capture::{convert_poses, record_selection, select_fps, trial_model};
use super::cloud::{calibrate, crop, evaluate, register, sor, write_curve, TransformReport};
use super::{display, read_cloud, required, write_cloud, write_json, write_text};
use crate::cli::PipelineArgs;
use crate::error::{CliError, CliResult};
use crate::summary::{Run, Stage};

struct Outputs {
    fps_report: PathBuf,
    transforms: PathBuf,
    calibration: PathBuf,
    metric: PathBuf,
    icp: PathBuf,
    aligned: PathBuf,
    curve: PathBuf,
}

impl Outputs {
    fn new(w: &Path) -> Self {
        Outputs {
            fps_report: w.join("fps_report.json"),
            transforms: w.join("transforms.json"),
            calibration: w.join("calibration.json"),
            metric: w.join("reconstruction_metric.ply"),
            icp: w.join("icp.json"),
            aligned: w.join("aligned.ply"),
            curve: w.join("curve.csv"),
        }
    }
}

pub fn pipeline_cmd(run: &mut Run, a: &PipelineArgs) -> CliResult<()> {
    let workdir = required(&run.config.paths.workdir, "--workdir", "paths.workdir")?;
    let paths = run.config.paths.clone();
    if paths.video.is_none() && paths.model.is_none() && paths.reconstruction.is_none() {
        return Err(CliError::Usage(
            "nothing to do: set a video, model or reconstruction".into(),
        ));
    }
    if paths.ground_truth.is_some() && paths.reconstruction.is_none() {
        return Err(CliError::Usage("evaluation needs a reconstruction".into()));
    }
    let out = Outputs::new(&workdir);
    let mut claims = Vec::new();
    if paths.video.is_some() {
        claims.push(&out.fps_report);
    }
    if paths.video.is_some() || paths.model.is_some() {
        claims.push(&out.transforms);
    }
    if paths.reconstruction.is_some() {
        claims.extend([&out.calibration, &out.metric]);
    }
    if paths.ground_truth.is_some() {
        claims.extend([&out.icp, &out.aligned, &out.curve]);
    }
    for p in claims {
        run.claim(p)?;
    }
    std::fs::create_dir_all(&workdir).map_err(|e| CliError::io(&workdir, e))?;

    let model = match (&paths.video, &paths.model) {
        (Some(video), _) => {
            let candidates = run.config.fps_candidates.clone();
            let selection = run.step(Stage::Preprocess, "select_fps", |run| {
                select_fps(run, video, &workdir, &candidates)
            })?;
            write_text(run, &out.fps_report, &run_report_json(&selection))?;
            record_selection(run, &workdir, &selection)?;
            let fps = selection
                .selected_fps
                .expect("recorded selections are complete");
            Some(trial_model(&workdir, fps)?)
        }
        (None, Some(model)) => Some(model.clone()),
        (None, None) => None,
    };
    if let Some(model) = model {
        let convention = run.config.axis_convention;
        let n = run.step(Stage::Preprocess, "convert_poses", |run| {
            convert_poses(run, &model, &out.transforms, convention)
        })?;
        run.result("manifest_frames", n);
    }

    run.external(
        Stage::Train,
        "radiance_field",
        "trained outside this tool from transforms.json; its exported point cloud is paths.reconstruction",
    );

    let Some(recon) = &paths.reconstruction else {
        return Ok(());
    };
    let cloud = read_cloud(recon)?;
    run.result("reconstruction_points", cloud.len());
    let roi = run.config.roi.map(|b| b.to_aabb()).transpose()?;
    let object_roi = run.config.object_roi.map(|b| b.to_aabb()).transpose()?;
    let cropped = match &roi {
        Some(roi) => run.step(Stage::PcdReconstruction, "crop", |_| {
            crop(&cloud, roi, "roi")
        })?,
        None => cloud,
    };
    let filtered = run.step(Stage::PcdReconstruction, "sor", |run| sor(run, &cropped))?;
    let cal = run.step(Stage::PcdReconstruction, "calibrate", |run| {
        calibrate(run, &filtered)
    })?;
    write_json(run, &out.calibration, &cal)?;
    let metric = run.step(Stage::PcdReconstruction, "scale", |_| {
        let object = match &object_roi {
            Some(b) => crop(&filtered, b, "object box")?,
            None => filtered.clone(),
        };
        Ok(apply_scale(&object, cal.scale_factor)?)
    })?;
    run.result("metric_points", metric.len());
    write_cloud(run, &metric, &out.metric, a.ply)?;

    let Some(gt_path) = &paths.ground_truth else {
        return Ok(());
    };
    let gt = read_cloud(gt_path)?;
    let reg = run.step(Stage::Evaluation, "icp", |run| {
        register(run, &metric, &gt, RigidTransform::identity())
    })?;
    write_json(run, &out.icp, &TransformReport::from_result(&reg))?;
    let aligned = transform_cloud(&metric, &reg.transform);
    write_cloud(run, &aligned, &out.aligned, a.ply)?;
    let curve = run.step(Stage::Evaluation, "sweep", |run| {
        evaluate(run, &aligned, &gt)
    })?;
    write_curve(run, &curve, &out.curve)?;
    run.result("ground_truth", display(gt_path));
    Ok(())
}
