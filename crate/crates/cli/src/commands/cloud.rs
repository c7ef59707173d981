//! Point-cloud stages: crop, outlier removal, scale calibration, ICP and
//! the threshold sweep.

use std::path::Path;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use turntable_core::evaluation::{display_percent, sweep_with, write_curve_csv, EvalCurve};
use turntable_core::geometry::RIGID_TOL;
use turntable_core::processing::{
    apply_scale, calibrate_scale, crop_roi, fit_sphere_ransac, sor_filter, ScaleCalibration,
    SphereFit,
};
use turntable_core::registration::{icp_point_to_point, transform_cloud, RegistrationResult};
use turntable_core::{Aabb, Execution, PointCloud, RigidTransform};

use super::{display, read_cloud, required, write_cloud, write_json};
use crate::cli::{CalibrateArgs, CropArgs, EvalArgs, IcpArgs, SorArgs};
use crate::error::{CliError, CliResult};
use crate::summary::{Run, Stage};

pub fn crop(cloud: &PointCloud, roi: &Aabb, what: &str) -> CliResult<PointCloud> {
    let kept = crop_roi(cloud, roi);
    log::info!("{what}: kept {} of {} points", kept.len(), cloud.len());
    if kept.is_empty() {
        return Err(CliError::InvalidInput(format!("{what} contains no points")));
    }
    Ok(kept)
}

pub fn sor(run: &mut Run, cloud: &PointCloud) -> CliResult<PointCloud> {
    let res = sor_filter(cloud, &run.config.sor.params())?;
    log::info!(
        "sor: removed {} of {} points (mean {:.6e}, std {:.6e})",
        res.removed.len(),
        cloud.len(),
        res.mean_distance,
        res.std_distance
    );
    run.result("sor_removed", res.removed.len());
    run.result("sor_mean_distance", res.mean_distance);
    run.result("sor_std_distance", res.std_distance);
    Ok(res.cloud)
}

#[derive(Debug, Serialize)]
pub struct CalibrationReport {
    pub center: [f64; 3],
    pub fitted_radius: f64,
    pub inlier_count: usize,
    pub rms_residual: f64,
    pub points_considered: usize,
    pub reference_radius_m: f64,
    pub scale_factor: f64,
}

/// Fits the reference ball (inside the configured box, if any) and derives
/// the meters-per-unit scale.
pub fn calibrate(run: &mut Run, cloud: &PointCloud) -> CliResult<CalibrationReport> {
    let region = match run.config.calibration.roi {
        Some(b) => crop(cloud, &b.to_aabb()?, "ball box")?,
        None => cloud.clone(),
    };
    let params = run.config.calibration.ransac(run.config.seed);
    let fit: SphereFit = fit_sphere_ransac(&region, &params)?;
    let cal: ScaleCalibration = calibrate_scale(&fit, run.config.calibration.reference_radius_m)?;
    log::info!(
        "ball radius {:.6e} units, {} inliers, scale {:.9e} m/unit",
        fit.radius,
        fit.inlier_count,
        cal.scale_factor
    );
    let report = CalibrationReport {
        center: fit.center.into(),
        fitted_radius: fit.radius,
        inlier_count: fit.inlier_count,
        rms_residual: fit.rms_residual,
        points_considered: region.len(),
        reference_radius_m: cal.reference_radius_m,
        scale_factor: cal.scale_factor,
    };
    run.result("scale_factor", cal.scale_factor);
    run.result("fitted_radius", fit.radius);
    run.result("ball_inliers", fit.inlier_count);
    Ok(report)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TransformReport {
    /// Row-major 4x4 matrix mapping source into target coordinates.
    pub matrix: [[f64; 4]; 4],
    #[serde(default)]
    pub final_rmse: f64,
    #[serde(default)]
    pub iterations_run: usize,
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub correspondence_count: usize,
    #[serde(default)]
    pub rmse_history: Vec<f64>,
}

impl TransformReport {
    pub fn from_result(r: &RegistrationResult) -> Self {
        let m = r.transform.matrix();
        TransformReport {
            matrix: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
            final_rmse: r.final_rmse,
            iterations_run: r.iterations_run,
            converged: r.converged,
            correspondence_count: r.correspondence_count,
            rmse_history: r.rmse_history.clone(),
        }
    }

    pub fn transform(&self) -> CliResult<RigidTransform> {
        let m = Matrix4::from_fn(|i, j| self.matrix[i][j]);
        Ok(RigidTransform::from_matrix(&m, RIGID_TOL)?)
    }
}

pub fn read_transform(path: &Path) -> CliResult<RigidTransform> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let report: TransformReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    report.transform().map_err(|e| e.in_file(path))
}

pub fn register(
    run: &mut Run,
    source: &PointCloud,
    target: &PointCloud,
    init: RigidTransform,
) -> CliResult<RegistrationResult> {
    let mut params = run.config.icp.params(run.config.seed);
    params.initial_guess = init;
    let res = icp_point_to_point(source, target, &params)?;
    log::info!(
        "icp: rmse {:.6e} after {} iterations (converged: {})",
        res.final_rmse,
        res.iterations_run,
        res.converged
    );
    run.result("icp_final_rmse", res.final_rmse);
    run.result("icp_iterations", res.iterations_run);
    run.result("icp_converged", res.converged);
    Ok(res)
}

pub fn evaluate(run: &mut Run, psc: &PointCloud, pgt: &PointCloud) -> CliResult<EvalCurve> {
    let spec = run.config.sweep.spec()?;
    let curve = sweep_with(
        psc,
        pgt,
        &spec,
        run.config.sweep.f_target,
        Execution::default(),
    )?;
    let i = curve
        .thresholds
        .iter()
        .position(|&t| t == curve.optimal_epsilon)
        .expect("optimal threshold is on the grid");
    log::info!(
        "optimal eps {:.6e} ({}): P {} R {} F {}",
        curve.optimal_epsilon,
        curve.optimal_rule,
        display_percent(curve.precision[i]),
        display_percent(curve.recall[i]),
        display_percent(curve.fscore[i])
    );
    run.result("optimal_epsilon", curve.optimal_epsilon);
    run.result("optimal_rule", &curve.optimal_rule);
    run.result("precision_at_optimum", curve.precision[i]);
    run.result("recall_at_optimum", curve.recall[i]);
    run.result("fscore_at_optimum", curve.fscore[i]);
    run.result("fscore_display", display_percent(curve.fscore[i]));
    Ok(curve)
}

pub fn crop_cmd(run: &mut Run, a: &CropArgs) -> CliResult<()> {
    run.claim(&a.output)?;
    let roi = required(&run.config.roi, "--roi", "roi")?.to_aabb()?;
    let cloud = read_cloud(&a.input)?;
    let kept = run.step(Stage::PcdReconstruction, "crop", |_| {
        crop(&cloud, &roi, "roi")
    })?;
    run.result("input_points", cloud.len());
    run.result("kept_points", kept.len());
    write_cloud(run, &kept, &a.output, a.ply)
}

pub fn sor_cmd(run: &mut Run, a: &SorArgs) -> CliResult<()> {
    run.claim(&a.output)?;
    let cloud = read_cloud(&a.input)?;
    let kept = run.step(Stage::PcdReconstruction, "sor", |run| sor(run, &cloud))?;
    run.result("input_points", cloud.len());
    run.result("kept_points", kept.len());
    write_cloud(run, &kept, &a.output, a.ply)
}

pub fn calibrate_cmd(run: &mut Run, a: &CalibrateArgs) -> CliResult<()> {
    if a.output.is_none() && a.report.is_none() {
        return Err(CliError::Usage(
            "calibrate needs --output and/or --report".into(),
        ));
    }
    if a.apply_to.is_some() && a.output.is_none() {
        return Err(CliError::Usage("--apply-to needs --output".into()));
    }
    for p in a.output.iter().chain(&a.report) {
        run.claim(p)?;
    }
    let cloud = read_cloud(&a.input)?;
    let report = run.step(Stage::PcdReconstruction, "calibrate", |run| {
        calibrate(run, &cloud)
    })?;
    if let Some(path) = &a.report {
        write_json(run, path, &report)?;
    }
    if let Some(out) = &a.output {
        let target = match &a.apply_to {
            Some(p) => read_cloud(p)?,
            None => cloud,
        };
        let scaled = run.step(Stage::PcdReconstruction, "scale", |_| {
            Ok(apply_scale(&target, report.scale_factor)?)
        })?;
        write_cloud(run, &scaled, out, a.ply)?;
    }
    Ok(())
}

pub fn icp_cmd(run: &mut Run, a: &IcpArgs) -> CliResult<()> {
    run.claim(&a.transform_out)?;
    if let Some(p) = &a.aligned {
        run.claim(p)?;
    }
    let init = match &a.init {
        Some(p) => read_transform(p)?,
        None => RigidTransform::identity(),
    };
    let source = read_cloud(&a.source)?;
    let target = read_cloud(&a.target)?;
    let res = run.step(Stage::Evaluation, "icp", |run| {
        register(run, &source, &target, init)
    })?;
    write_json(run, &a.transform_out, &TransformReport::from_result(&res))?;
    if let Some(p) = &a.aligned {
        write_cloud(run, &transform_cloud(&source, &res.transform), p, a.ply)?;
    }
    Ok(())
}

pub fn eval_cmd(run: &mut Run, a: &EvalArgs) -> CliResult<()> {
    run.claim(&a.out)?;
    let psc = read_cloud(&a.psc)?;
    let pgt = read_cloud(&a.pgt)?;
    let curve = run.step(Stage::Evaluation, "sweep", |run| evaluate(run, &psc, &pgt))?;
    write_curve(run, &curve, &a.out)
}

pub fn write_curve(run: &mut Run, curve: &EvalCurve, path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_curve_csv(curve, path).map_err(|e| CliError::from(e).in_file(path))?;
    run.wrote(path);
    log::info!("wrote {}", display(path));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_report_roundtrip() {
        let t = RigidTransform::from_axis_angle(&nalgebra::Vector3::new(0.3, -0.2, 1.0), 0.7);
        let r = RegistrationResult {
            transform: t,
            final_rmse: 1e-4,
            iterations_run: 3,
            converged: true,
            correspondence_count: 10,
            rmse_history: vec![1e-3, 1e-4],
        };
        let text =
            turntable_core::numfmt::to_stable_json(&TransformReport::from_result(&r)).unwrap();
        let back: TransformReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.transform().unwrap().matrix(), t.matrix());
    }

    #[test]
    fn bare_matrix_is_accepted_as_init() {
        let back: TransformReport =
            serde_json::from_str(r#"{"matrix": [[1,0,0,0.5],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}"#)
                .unwrap();
        assert_eq!(back.transform().unwrap().translation().x, 0.5);
        let bad: TransformReport =
            serde_json::from_str(r#"{"matrix": [[2,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}"#)
                .unwrap();
        assert!(matches!(bad.transform(), Err(CliError::InvalidInput(_))));
    }
}
