//! Synthetic capture with known ground truth, plus a ready-to-run config.

use serde::Serialize;
use turntable_core::colmap::write_model_binary;
use turntable_core::synth::{synthetic_capture, CaptureSpec};

use super::{write_cloud, write_json, write_text};
use crate::cli::{PlyOutArgs, SynthArgs};
use crate::config::{BoxConfig, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::summary::{Run, Stage};

/// ICP source subsample used by the generated config.
const SYNTH_ICP_SOURCE_POINTS: usize = 20_000;
/// Sweep runs to this multiple of the capture's threshold.
const SYNTH_SWEEP_SPAN: f64 = 2.0;
const SYNTH_SWEEP_STEPS: usize = 201;

#[derive(Debug, Serialize)]
struct CaptureInfo {
    seed: u64,
    n_frames: usize,
    scene_roi: BoxConfig,
    ball_roi: BoxConfig,
    object_roi: BoxConfig,
    scene_scale: f64,
    expected_scale_factor: f64,
    scene_motion: [[f64; 4]; 4],
    reference_radius_m: f64,
    object_scale: f64,
    eps: f64,
    ground_truth_points: usize,
    reconstruction_points: usize,
}

pub fn synth_cmd(run: &mut Run, a: &SynthArgs) -> CliResult<()> {
    let out = &a.outdir;
    let files = [
        "ground_truth.ply",
        "reconstruction.ply",
        "sparse",
        "capture.json",
        "pipeline.toml",
    ];
    for f in files {
        run.claim(&out.join(f))?;
    }
    let spec = CaptureSpec {
        seed: run.config.seed,
        n_frames: a.frames,
        coverage: a.coverage,
        scene_scale: a.scene_scale,
        reference_radius_m: run.config.calibration.reference_radius_m,
        ..CaptureSpec::default()
    };
    let cap = run.step(Stage::Preprocess, "synthesize", |_| {
        Ok(synthetic_capture(&spec)?)
    })?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let out = std::fs::canonicalize(out).map_err(|e| CliError::io(out, e))?;

    let exact = PlyOutArgs {
        ascii: false,
        double: true,
    };
    write_cloud(run, &cap.ground_truth, &out.join("ground_truth.ply"), exact)?;
    write_cloud(
        run,
        &cap.reconstruction,
        &out.join("reconstruction.ply"),
        exact,
    )?;
    let model_dir = out.join("sparse").join("0");
    std::fs::create_dir_all(&model_dir).map_err(|e| CliError::io(&model_dir, e))?;
    write_model_binary(&cap.model, &model_dir)
        .map_err(|e| CliError::from(e).in_file(&model_dir))?;
    run.wrote(&model_dir);

    let m = cap.scene_motion.matrix();
    let info = CaptureInfo {
        seed: spec.seed,
        n_frames: spec.n_frames,
        scene_roi: BoxConfig::from_aabb(&cap.scene_roi),
        ball_roi: BoxConfig::from_aabb(&cap.ball_roi),
        object_roi: BoxConfig::from_aabb(&cap.object_roi),
        scene_scale: cap.scene_scale,
        expected_scale_factor: 1.0 / cap.scene_scale,
        scene_motion: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
        reference_radius_m: cap.reference_radius_m,
        object_scale: cap.object_scale,
        eps: cap.eps,
        ground_truth_points: cap.ground_truth.len(),
        reconstruction_points: cap.reconstruction.len(),
    };
    write_json(run, &out.join("capture.json"), &info)?;

    let mut cfg = PipelineConfig {
        seed: spec.seed,
        roi: Some(info.scene_roi),
        object_roi: Some(info.object_roi),
        ..PipelineConfig::default()
    };
    cfg.paths.workdir = Some(out.join("work"));
    cfg.paths.model = Some(model_dir);
    cfg.paths.reconstruction = Some(out.join("reconstruction.ply"));
    cfg.paths.ground_truth = Some(out.join("ground_truth.ply"));
    cfg.calibration.roi = Some(info.ball_roi);
    cfg.calibration.reference_radius_m = cap.reference_radius_m;
    cfg.icp.max_source_points = Some(SYNTH_ICP_SOURCE_POINTS);
    cfg.sweep.eps_min = 0.0;
    cfg.sweep.eps_max = SYNTH_SWEEP_SPAN * cap.eps;
    cfg.sweep.steps = SYNTH_SWEEP_STEPS;
    let toml = toml::to_string(&cfg).map_err(|e| CliError::InvalidInput(e.to_string()))?;
    write_text(run, &out.join("pipeline.toml"), &toml)?;

    run.result("eps", cap.eps);
    run.result("expected_scale_factor", info.expected_scale_factor);
    run.result("ground_truth_points", info.ground_truth_points);
    run.result("reconstruction_points", info.reconstruction_points);
    Ok(())
}
