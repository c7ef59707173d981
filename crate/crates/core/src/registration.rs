//! Point-to-point ICP.
//!
//! Each iteration pairs every source point with its nearest target point,
//! drops pairs farther apart than `max_correspondence_dist`, and solves for
//! the rigid motion minimizing `Σ ‖R·sᵢ + t − tᵢ‖²` in closed form from the
//! SVD of the cross-covariance (with the usual reflection guard).
//!
//! The per-iteration error recorded in [`RegistrationResult::rmse_history`]
//! is the truncated RMSE `sqrt(mean_i min(dᵢ², τ²))` over all source points,
//! with `τ` the correspondence cutoff. That quantity can only decrease under
//! the ICP update, even when points enter or leave the correspondence set;
//! an update that raises it through round-off is discarded and ends the run.

use nalgebra::{Matrix3, Point3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::Execution;
use crate::geometry::RigidTransform;
use crate::pointcloud::{PointCloud, PointCloudError, SpatialIndex};

#[derive(Debug, Error)]
pub enum RegistrationError {
    #[error("only {found} correspondences within the distance cutoff (need 3)")]
    TooFewCorrespondences { found: usize },
    #[error("cross-covariance is degenerate (points collinear or coincident)")]
    DegenerateCovariance,
    #[error("invalid ICP parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    PointCloud(#[from] PointCloudError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Scene units (meters after calibration).
    pub max_correspondence_dist: f64,
    pub convergence_delta_rmse: f64,
    pub initial_guess: RigidTransform,
    /// Randomly keep at most this many source points. `None` uses all.
    pub max_source_points: Option<usize>,
    pub seed: u64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iterations: 50,
            max_correspondence_dist: 0.05,
            convergence_delta_rmse: 1e-7,
            initial_guess: RigidTransform::identity(),
            max_source_points: None,
            seed: 0,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        let bad = |m: &str| Err(RegistrationError::InvalidParams(m.into()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.max_correspondence_dist > 0.0 && self.max_correspondence_dist.is_finite()) {
            return bad("max_correspondence_dist must be positive");
        }
        if !(self.convergence_delta_rmse > 0.0) {
            return bad("convergence_delta_rmse must be positive");
        }
        if self.max_source_points.is_some_and(|n| n < 3) {
            return bad("max_source_points must be >= 3");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Maps source coordinates into the target frame.
    pub transform: RigidTransform,
    /// RMS distance over the final correspondences.
    pub final_rmse: f64,
    pub iterations_run: usize,
    pub converged: bool,
    pub correspondence_count: usize,
    /// Truncated RMSE before the first update and after each accepted iteration.
    pub rmse_history: Vec<f64>,
}

/// Maps every point by `t`, keeping colors.
pub fn transform_cloud(cloud: &PointCloud, t: &RigidTransform) -> PointCloud {
    cloud.map_positions(|p| t.apply_point(p))
}

/// Closed-form rigid motion taking `src[i]` onto `dst[i]` in the least-squares sense.
pub fn best_fit_transform(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
) -> Result<RigidTransform, RegistrationError> {
    assert_eq!(src.len(), dst.len());
    if src.len() < 3 {
        return Err(RegistrationError::TooFewCorrespondences { found: src.len() });
    }
    let n = src.len() as f64;
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s.coords - cs) * (d.coords - cd).transpose();
    }
    let svd = h.svd(true, true);
    let sv = svd.singular_values;
    if sv[0] == 0.0 || sv[1] <= 1e-12 * sv[0] {
        return Err(RegistrationError::DegenerateCovariance);
    }
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let v = v_t.transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        // flip the axis of the smallest singular value
        let mut v_fixed = v;
        let k = (0..3)
            .min_by(|&a, &b| sv[a].total_cmp(&sv[b]))
            .expect("three singular values");
        v_fixed.column_mut(k).neg_mut();
        r = v_fixed * u.transpose();
    }
    let t = cd - r * cs;
    Ok(RigidTransform::from_parts_unchecked(r, t))
}

struct Pairs {
    src: Vec<Point3<f64>>,
    dst: Vec<Point3<f64>>,
    sum_sq: f64,
    truncated_rmse: f64,
}

fn correspond(
    moved: &[Point3<f64>],
    target: &[Point3<f64>],
    index: &SpatialIndex,
    cutoff: f64,
    exec: Execution,
) -> Pairs {
    let nn = exec.map_slice(moved, |p| index.nearest(p));
    let cutoff2 = cutoff * cutoff;
    let mut pairs = Pairs {
        src: Vec::new(),
        dst: Vec::new(),
        sum_sq: 0.0,
        truncated_rmse: 0.0,
    };
    let mut truncated = 0.0;
    for (p, n) in moved.iter().zip(&nn) {
        let d2 = n.distance * n.distance;
        if n.distance <= cutoff {
            pairs.src.push(*p);
            pairs.dst.push(target[n.index]);
            pairs.sum_sq += d2;
            truncated += d2;
        } else {
            truncated += cutoff2;
        }
    }
    pairs.truncated_rmse = (truncated / moved.len() as f64).sqrt();
    pairs
}

/// Aligns `source` onto `target`.
pub fn icp_point_to_point(
    source: &PointCloud,
    target: &PointCloud,
    params: &IcpParams,
) -> Result<RegistrationResult, RegistrationError> {
    if target.len() < 3 {
        return Err(RegistrationError::TooFewCorrespondences {
            found: target.len(),
        });
    }
    let index = SpatialIndex::build(target)?;
    icp_with_index(source, target, &index, params, Execution::default())
}

/// ICP against a prebuilt index of `target`.
pub fn icp_with_index(
    source: &PointCloud,
    target: &PointCloud,
    index: &SpatialIndex,
    params: &IcpParams,
    exec: Execution,
) -> Result<RegistrationResult, RegistrationError> {
    params.validate()?;
    if source.len() < 3 || target.len() < 3 {
        return Err(RegistrationError::TooFewCorrespondences {
            found: source.len().min(target.len()),
        });
    }
    let src: Vec<Point3<f64>> = match params.max_source_points {
        Some(max) if source.len() > max => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            let mut idx = sample(&mut rng, source.len(), max).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| source.positions()[i]).collect()
        }
        _ => source.positions().to_vec(),
    };
    let tgt = target.positions();
    let cutoff = params.max_correspondence_dist;

    let mut transform = params.initial_guess.untagged();
    let moved =
        |t: &RigidTransform| -> Vec<Point3<f64>> { exec.map_slice(&src, |p| t.apply_point(p)) };
    let mut pairs = correspond(&moved(&transform), tgt, index, cutoff, exec);
    let mut history = vec![pairs.truncated_rmse];
    let mut converged = false;
    let mut iterations_run = 0;

    for _ in 0..params.max_iterations {
        if pairs.src.len() < 3 {
            return Err(RegistrationError::TooFewCorrespondences {
                found: pairs.src.len(),
            });
        }
        let step = best_fit_transform(&pairs.src, &pairs.dst)?;
        let candidate = step.compose(&transform).expect("untagged motions compose");
        iterations_run += 1;

        let next = correspond(&moved(&candidate), tgt, index, cutoff, exec);
        if next.truncated_rmse > pairs.truncated_rmse {
            // only round-off can raise the truncated error; keep the better estimate
            converged = true;
            break;
        }
        let prev = pairs.truncated_rmse;
        transform = candidate;
        pairs = next;
        history.push(pairs.truncated_rmse);
        if prev - pairs.truncated_rmse < params.convergence_delta_rmse {
            converged = true;
            break;
        }
    }
    if pairs.src.len() < 3 {
        return Err(RegistrationError::TooFewCorrespondences {
            found: pairs.src.len(),
        });
    }
    Ok(RegistrationResult {
        transform,
        final_rmse: (pairs.sum_sq / pairs.src.len() as f64).sqrt(),
        iterations_run,
        converged,
        correspondence_count: pairs.src.len(),
        rmse_history: history,
    })
}
