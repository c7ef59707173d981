#![cfg(unix)]

mod common;

use common::{s, turntable, video, FakeTools};
use turntable_core::colmap::read_manifest;
use turntable_core::evaluation::{display_percent, read_curve_csv};

/// Synthetic capture through every stage; the reconstruction is known to
/// match the ground truth to a fraction of the evaluation threshold.
#[test]
fn synthetic_capture_reaches_full_fscore() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let r = turntable(&["synth", "--outdir", s(&data), "--seed", "3"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let eps = r.summary["results"]["eps"].as_f64().unwrap();
    let expected_scale = r.summary["results"]["expected_scale_factor"]
        .as_f64()
        .unwrap();

    let cfg = data.join("pipeline.toml");
    let r = turntable(&["pipeline", "--config", s(&cfg)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let res = &r.summary["results"];
    let scale = res["scale_factor"].as_f64().unwrap();
    assert!(
        (scale / expected_scale - 1.0).abs() < 1e-3,
        "{scale} vs {expected_scale}"
    );
    assert_eq!(res["manifest_frames"], 36);

    let stages: Vec<&str> = r.summary["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["stage"].as_str().unwrap())
        .collect();
    for stage in ["preprocess", "train", "pcd_reconstruction", "evaluation"] {
        assert!(stages.contains(&stage), "{stage} missing from {stages:?}");
    }
    let train = r.summary["stages"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["stage"] == "train")
        .unwrap();
    assert_eq!(train["external"], true);
    assert!(train["wall_seconds"].is_null());

    let work = data.join("work");
    let curve = read_curve_csv(work.join("curve.csv")).unwrap();
    let at_eps = curve
        .thresholds
        .iter()
        .position(|&t| t >= eps * (1.0 - 1e-12))
        .unwrap();
    assert_eq!(display_percent(curve.fscore[at_eps]), "100.00");
    assert_eq!(curve.fscore[at_eps], 1.0);
    assert!(curve.optimal_epsilon <= eps);
    assert_eq!(
        read_manifest(work.join("transforms.json"))
            .unwrap()
            .frames
            .len(),
        36
    );

    let first_curve = std::fs::read(work.join("curve.csv")).unwrap();
    let again = turntable(&["pipeline", "--config", s(&cfg)]);
    assert_eq!(again.code, 9);
    let forced = turntable(&["pipeline", "--config", s(&cfg), "--force"]);
    assert_eq!(forced.code, 0);
    assert_eq!(forced.summary["results"], r.summary["results"]);
    assert_eq!(std::fs::read(work.join("curve.csv")).unwrap(), first_curve);
}

#[test]
fn pipeline_from_video_runs_frame_rate_selection() {
    let tools = FakeTools::new();
    let tmp = tempfile::tempdir().unwrap();
    let v = video(tmp.path(), 30.0);
    let work = tmp.path().join("work");
    let r = turntable(&[
        "pipeline",
        "--video",
        s(&v),
        "--workdir",
        s(&work),
        "--ffmpeg",
        s(&tools.ffmpeg),
        "--colmap",
        s(&tools.colmap),
        "--axis-convention",
        "gl",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.summary["results"]["selected_fps"], 4.0);
    let manifest = read_manifest(work.join("transforms.json")).unwrap();
    assert_eq!(manifest.frames.len(), 120);
    assert_eq!(
        manifest.source_model,
        s(&work.join("fps_4").join("sparse").join("0"))
    );
    assert_eq!(r.summary["config"]["axis_convention"], "gl");
}
