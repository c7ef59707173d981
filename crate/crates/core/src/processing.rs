//! Post-export cleanup and metric calibration.
//!
//! The NeRF exporter produces a cloud in arbitrary normalized units. This
//! module crops it to a region of interest, removes statistical outliers,
//! fits the reference ball with RANSAC and rescales the cloud to meters.

use nalgebra::{Matrix3, Matrix4, Point3, Vector3, Vector4};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Execution;
use crate::pointcloud::{Aabb, PointCloud, PointCloudError, SpatialIndex};

/// Radius of the reference ball in meters.
pub const DEFAULT_REFERENCE_RADIUS_M: f64 = 0.04;

#[derive(Debug, Error)]
pub enum ProcessingError {
    #[error("cloud has {n} points, need at least {needed}")]
    CloudTooSmall { n: usize, needed: usize },
    #[error("all sampled point sets are coplanar; no sphere is defined")]
    DegenerateGeometry,
    #[error("best sphere explains only {fraction:.3} of the points")]
    NoConvergence { fraction: f64 },
    #[error("radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),
    #[error("scale must be positive and finite, got {0}")]
    NonPositiveScale(f64),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    PointCloud(#[from] PointCloudError),
}

/// Keeps the points inside the closed box, preserving order and colors.
pub fn crop_roi(cloud: &PointCloud, roi: &Aabb) -> PointCloud {
    let keep: Vec<usize> = cloud
        .positions()
        .iter()
        .enumerate()
        .filter(|(_, p)| roi.contains(p))
        .map(|(i, _)| i)
        .collect();
    cloud.select(&keep)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorParams {
    pub k_neighbors: usize,
    pub std_ratio: f64,
}

impl Default for SorParams {
    fn default() -> Self {
        SorParams {
            k_neighbors: 20,
            std_ratio: 2.0,
        }
    }
}

impl SorParams {
    pub fn validate(&self) -> Result<(), ProcessingError> {
        if self.k_neighbors == 0 {
            return Err(ProcessingError::InvalidParams(
                "k_neighbors must be >= 1".into(),
            ));
        }
        if !(self.std_ratio > 0.0 && self.std_ratio.is_finite()) {
            return Err(ProcessingError::InvalidParams(format!(
                "std_ratio must be positive, got {}",
                self.std_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SorResult {
    pub cloud: PointCloud,
    /// Ascending indices into the input cloud.
    pub removed: Vec<usize>,
    pub mean_distance: f64,
    pub std_distance: f64,
}

/// Mean distance from every point to its `k` nearest neighbours, excluding itself.
pub fn mean_neighbor_distances(
    cloud: &PointCloud,
    k: usize,
    exec: Execution,
) -> Result<Vec<f64>, ProcessingError> {
    if cloud.len() <= k {
        return Err(ProcessingError::CloudTooSmall {
            n: cloud.len(),
            needed: k + 1,
        });
    }
    let index = SpatialIndex::build(cloud)?;
    let pts = cloud.positions();
    Ok(exec.map_range(pts.len(), |i| {
        let nn = index
            .k_nearest(&pts[i], k + 1)
            .expect("k + 1 <= n checked above");
        // with duplicate points `i` may be crowded out; the first k others are then exact
        let sum: f64 = nn
            .iter()
            .filter(|n| n.index != i)
            .take(k)
            .map(|n| n.distance)
            .sum();
        sum / k as f64
    }))
}

/// Statistical outlier removal.
///
/// A point is dropped when its mean k-NN distance exceeds `μ + std_ratio·σ`,
/// with `μ` and `σ` the mean and sample standard deviation over all points.
pub fn sor_filter(cloud: &PointCloud, params: &SorParams) -> Result<SorResult, ProcessingError> {
    sor_filter_with(cloud, params, Execution::default())
}

pub fn sor_filter_with(
    cloud: &PointCloud,
    params: &SorParams,
    exec: Execution,
) -> Result<SorResult, ProcessingError> {
    params.validate()?;
    let d = mean_neighbor_distances(cloud, params.k_neighbors, exec)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = if d.len() > 1 {
        d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std = var.sqrt();
    let cutoff = mean + params.std_ratio * std;
    let (mut keep, mut removed) = (Vec::with_capacity(d.len()), Vec::new());
    for (i, &di) in d.iter().enumerate() {
        if di > cutoff {
            removed.push(i);
        } else {
            keep.push(i);
        }
    }
    Ok(SorResult {
        cloud: cloud.select(&keep),
        removed,
        mean_distance: mean,
        std_distance: std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit {
    pub center: Point3<f64>,
    pub radius: f64,
    pub inlier_count: usize,
    /// RMS of `‖p − c‖ − r` over the inliers.
    pub rms_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    /// Maximum `|‖p − c‖ − r|` for a point to count as an inlier.
    pub inlier_tol: f64,
    pub seed: u64,
    /// Fits explaining fewer points than this fraction are rejected.
    pub min_inlier_fraction: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            iterations: 1000,
            inlier_tol: 1e-3,
            seed: 0,
            min_inlier_fraction: 0.1,
        }
    }
}

/// Sphere through four points, or `None` when they are (nearly) coplanar.
pub fn sphere_through(p: [&Point3<f64>; 4]) -> Option<(Point3<f64>, f64)> {
    let d: [Vector3<f64>; 3] = [p[1] - p[0], p[2] - p[0], p[3] - p[0]];
    let scale = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let a = Matrix3::from_rows(&[
        (2.0 * d[0]).transpose(),
        (2.0 * d[1]).transpose(),
        (2.0 * d[2]).transpose(),
    ]);
    if a.determinant().abs() <= 1e-9 * 8.0 * scale.powi(3) {
        return None;
    }
    let b = Vector3::new(
        d[0].norm_squared(),
        d[1].norm_squared(),
        d[2].norm_squared(),
    );
    let rel = a.lu().solve(&b)?;
    let center = p[0] + rel;
    let radius = rel.norm();
    radius.is_finite().then_some((center, radius))
}

/// Inlier count and RMS residual of a candidate sphere.
fn score(points: &[Point3<f64>], center: &Point3<f64>, radius: f64, tol: f64) -> (usize, f64) {
    let (mut n, mut ss) = (0usize, 0.0);
    for p in points {
        let r = (p - center).norm() - radius;
        if r.abs() <= tol {
            n += 1;
            ss += r * r;
        }
    }
    (n, if n > 0 { (ss / n as f64).sqrt() } else { 0.0 })
}

/// Algebraic least-squares sphere: minimizes `Σ (‖p − c‖² − r²)²`.
pub fn fit_sphere_least_squares(points: &[Point3<f64>]) -> Option<(Point3<f64>, f64)> {
    if points.len() < 4 {
        return None;
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    // unknowns (c', k) with c = mean + c', k = r² − ‖c'‖²:  2 q·c' + k = ‖q‖²
    let mut ata = Matrix4::zeros();
    let mut atb = Vector4::zeros();
    for p in points {
        let q = p.coords - mean;
        let row = Vector4::new(2.0 * q.x, 2.0 * q.y, 2.0 * q.z, 1.0);
        ata += row * row.transpose();
        atb += row * q.norm_squared();
    }
    let sol = ata.cholesky()?.solve(&atb);
    let rel = Vector3::new(sol[0], sol[1], sol[2]);
    let r2 = sol[3] + rel.norm_squared();
    if !(r2 > 0.0 && r2.is_finite()) {
        return None;
    }
    Some((Point3::from(mean + rel), r2.sqrt()))
}

/// RANSAC over four-point spheres followed by least-squares refinement on the inliers.
///
/// Candidate index sets are drawn up front from a ChaCha8 stream seeded by
/// `params.seed`; scoring may run in parallel, and the winner is the
/// candidate with most inliers, then lowest RMS, then earliest draw.
pub fn fit_sphere_ransac(
    cloud: &PointCloud,
    params: &RansacParams,
) -> Result<SphereFit, ProcessingError> {
    fit_sphere_ransac_with(cloud, params, Execution::default())
}

pub fn fit_sphere_ransac_with(
    cloud: &PointCloud,
    params: &RansacParams,
    exec: Execution,
) -> Result<SphereFit, ProcessingError> {
    let pts = cloud.positions();
    if pts.len() < 4 {
        return Err(ProcessingError::CloudTooSmall {
            n: pts.len(),
            needed: 4,
        });
    }
    if !(params.inlier_tol > 0.0) || params.iterations == 0 {
        return Err(ProcessingError::InvalidParams(
            "RANSAC needs iterations >= 1 and inlier_tol > 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let draws: Vec<[usize; 4]> = (0..params.iterations)
        .map(|_| {
            let s = sample(&mut rng, pts.len(), 4);
            [s.index(0), s.index(1), s.index(2), s.index(3)]
        })
        .collect();

    let scored = exec.map_slice(&draws, |d| {
        sphere_through([&pts[d[0]], &pts[d[1]], &pts[d[2]], &pts[d[3]]]).map(|(c, r)| {
            let (n, rms) = score(pts, &c, r, params.inlier_tol);
            (c, r, n, rms)
        })
    });

    let mut best: Option<(Point3<f64>, f64, usize, f64)> = None;
    for cand in scored.into_iter().flatten() {
        let better = match best {
            None => true,
            Some((_, _, n, rms)) => cand.2 > n || (cand.2 == n && cand.3 < rms),
        };
        if better {
            best = Some(cand);
        }
    }
    let (mut center, mut radius, count, _) = best.ok_or(ProcessingError::DegenerateGeometry)?;
    let fraction = count as f64 / pts.len() as f64;
    if fraction < params.min_inlier_fraction {
        return Err(ProcessingError::NoConvergence { fraction });
    }

    // refine, then re-select inliers against the refined sphere until stable
    let mut inliers = inlier_indices(pts, &center, radius, params.inlier_tol);
    for _ in 0..5 {
        let subset: Vec<Point3<f64>> = inliers.iter().map(|&i| pts[i]).collect();
        let Some((c, r)) = fit_sphere_least_squares(&subset) else {
            break;
        };
        center = c;
        radius = r;
        let next = inlier_indices(pts, &center, radius, params.inlier_tol);
        if next == inliers {
            break;
        }
        inliers = next;
    }
    let (inlier_count, rms_residual) = score(pts, &center, radius, params.inlier_tol);
    Ok(SphereFit {
        center,
        radius,
        inlier_count,
        rms_residual,
    })
}

fn inlier_indices(pts: &[Point3<f64>], c: &Point3<f64>, r: f64, tol: f64) -> Vec<usize> {
    pts.iter()
        .enumerate()
        .filter(|(_, p)| ((*p - c).norm() - r).abs() <= tol)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleCalibration {
    /// Meters per scene unit.
    pub scale_factor: f64,
    pub reference_radius_m: f64,
    pub fitted_radius: f64,
}

pub fn calibrate_scale(
    fit: &SphereFit,
    reference_radius_m: f64,
) -> Result<ScaleCalibration, ProcessingError> {
    for r in [fit.radius, reference_radius_m] {
        if !(r > 0.0 && r.is_finite()) {
            return Err(ProcessingError::NonPositiveRadius(r));
        }
    }
    let scale_factor = reference_radius_m / fit.radius;
    if !(scale_factor > 0.0 && scale_factor.is_finite()) {
        return Err(ProcessingError::NonPositiveScale(scale_factor));
    }
    Ok(ScaleCalibration {
        scale_factor,
        reference_radius_m,
        fitted_radius: fit.radius,
    })
}

/// Multiplies every coordinate by `s` about the origin.
pub fn apply_scale(cloud: &PointCloud, s: f64) -> Result<PointCloud, ProcessingError> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(ProcessingError::NonPositiveScale(s));
    }
    Ok(cloud.map_positions(|p| Point3::from(p.coords * s)))
}
