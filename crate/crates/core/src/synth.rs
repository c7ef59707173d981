//! Seeded synthetic scenes and clouds.
//!
//! Everything here is a pure function of its inputs and seed, which makes it
//! usable as a ground-truth oracle for the rest of the pipeline.

use std::f64::consts::PI;

use nalgebra::{Point3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::colmap::{CameraIntrinsics, CameraModel, ImageRecord, SparseModel};
use crate::geometry::{PoseConvention, RigidTransform, UnitQuaternion};
use crate::pointcloud::{Aabb, PointCloud, SpatialIndex};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere {
        center: Point3<f64>,
        radius: f64,
    },
    /// Surface of an axis-aligned box.
    BoxSurface {
        center: Point3<f64>,
        half_extents: Vector3<f64>,
    },
    /// Union of shapes; samples are split in proportion to the weights.
    Composite(Vec<(Shape, f64)>),
}

impl Shape {
    /// Summed surface area of the primitives (overlaps are counted twice).
    pub fn area(&self) -> f64 {
        match self {
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Shape::BoxSurface {
                half_extents: h, ..
            } => 8.0 * (h.x * h.y + h.x * h.z + h.y * h.z),
            Shape::Composite(parts) => parts.iter().map(|(s, _)| s.area()).sum(),
        }
    }

    pub fn bounding_box(&self) -> Aabb {
        match self {
            Shape::Sphere { center, radius } => {
                let r = Vector3::repeat(*radius);
                Aabb::new(center - r, center + r).expect("ordered corners")
            }
            Shape::BoxSurface {
                center,
                half_extents,
            } => Aabb::new(center - half_extents, center + half_extents).expect("ordered corners"),
            Shape::Composite(parts) => parts
                .iter()
                .map(|(s, _)| s.bounding_box())
                .reduce(|a, b| a.union(&b))
                .expect("composite has parts"),
        }
    }
}

/// Asymmetric demo object (meters): a box with a sphere and a small block
/// attached off-axis, sampled with uniform surface density.
pub fn reference_object() -> Shape {
    let parts = vec![
        Shape::BoxSurface {
            center: Point3::origin(),
            half_extents: Vector3::new(0.08, 0.05, 0.03),
        },
        Shape::Sphere {
            center: Point3::new(0.06, 0.03, 0.05),
            radius: 0.03,
        },
        Shape::BoxSurface {
            center: Point3::new(-0.05, -0.04, 0.04),
            half_extents: Vector3::new(0.02, 0.015, 0.015),
        },
    ];
    Shape::Composite(
        parts
            .into_iter()
            .map(|s| {
                let a = s.area();
                (s, a)
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub sample_count: usize,
    /// Isotropic Gaussian jitter per coordinate.
    pub noise_sigma: f64,
    pub seed: u64,
}

fn validate_shape(shape: &Shape) -> Result<(), SynthError> {
    let bad = |m: String| Err(SynthError::InvalidSpec(m));
    match shape {
        Shape::Sphere { radius, .. } if !(*radius > 0.0) => bad(format!("radius {radius}")),
        Shape::BoxSurface { half_extents, .. } if half_extents.iter().any(|h| !(*h >= 0.0)) => {
            bad(format!("half extents {half_extents:?}"))
        }
        Shape::Composite(parts) => {
            if parts.is_empty() || parts.iter().any(|(_, w)| !(*w > 0.0)) {
                return bad("composite needs parts with positive weights".into());
            }
            parts.iter().try_for_each(|(s, _)| validate_shape(s))
        }
        _ => Ok(()),
    }
}

fn sample_into(shape: &Shape, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<Point3<f64>>) {
    match shape {
        Shape::Sphere { center, radius } => {
            for _ in 0..n {
                let dir = loop {
                    let v = Vector3::new(
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                    );
                    let norm: f64 = v.norm();
                    if norm > 1e-12 {
                        break v / norm;
                    }
                };
                out.push(center + dir * *radius);
            }
        }
        Shape::BoxSurface {
            center,
            half_extents: h,
        } => {
            // faces perpendicular to x, y, z, weighted by area
            let areas = [h.y * h.z, h.x * h.z, h.x * h.y];
            let total: f64 = areas.iter().sum();
            for _ in 0..n {
                let pick = rng.random::<f64>() * total;
                let axis = if pick < areas[0] {
                    0
                } else if pick < areas[0] + areas[1] {
                    1
                } else {
                    2
                };
                let mut local = Vector3::new(
                    rng.random_range(-1.0..=1.0) * h.x,
                    rng.random_range(-1.0..=1.0) * h.y,
                    rng.random_range(-1.0..=1.0) * h.z,
                );
                local[axis] = if rng.random::<bool>() {
                    h[axis]
                } else {
                    -h[axis]
                };
                out.push(center + local);
            }
        }
        Shape::Composite(parts) => {
            let total: f64 = parts.iter().map(|(_, w)| w).sum();
            let mut counts: Vec<usize> = parts
                .iter()
                .map(|(_, w)| (n as f64 * w / total).floor() as usize)
                .collect();
            let short = n - counts.iter().sum::<usize>();
            for c in counts.iter_mut().take(short) {
                *c += 1;
            }
            for ((s, _), c) in parts.iter().zip(counts) {
                sample_into(s, c, rng, out);
            }
        }
    }
}

/// Samples the surface of `spec.shape` (uniformly per primitive).
pub fn sample_shape(spec: &ShapeSpec) -> Result<PointCloud, SynthError> {
    validate_shape(&spec.shape)?;
    if spec.sample_count == 0 {
        return Err(SynthError::InvalidSpec("sample_count must be >= 1".into()));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(SynthError::InvalidSpec(format!(
            "noise_sigma {}",
            spec.noise_sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pts = Vec::with_capacity(spec.sample_count);
    sample_into(&spec.shape, spec.sample_count, &mut rng, &mut pts);
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).expect("finite sigma");
        for p in &mut pts {
            for v in p.coords.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    Ok(PointCloud::new(pts).expect("finite samples"))
}

/// Rigid motion with a uniformly random axis, angle in `[0, max_angle]` and
/// translation direction uniform on the sphere with length in `[0, max_translation]`.
pub fn random_rigid<R: Rng + ?Sized>(
    rng: &mut R,
    max_angle: f64,
    max_translation: f64,
) -> RigidTransform {
    let unit = |rng: &mut R| loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-12 {
            break v / n;
        }
    };
    let axis = unit(rng);
    let angle = rng.random_range(0.0..=max_angle);
    let dir = unit(rng);
    let len = rng.random_range(0.0..=max_translation);
    RigidTransform::from_translation(dir * len)
        .compose(&RigidTransform::from_axis_angle(&axis, angle))
        .expect("untagged")
}

/// A fixed camera watching an object spin on a turntable about an axis
/// through the world origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TurntableScene {
    pub n_frames: usize,
    pub rotation_axis: Unit<Vector3<f64>>,
    /// Object rotation per frame, radians.
    pub angular_step: f64,
    /// Camera-to-world pose of the stationary camera.
    pub camera_pose_world: RigidTransform,
    pub object_points: PointCloud,
}

impl TurntableScene {
    pub fn new(
        n_frames: usize,
        rotation_axis: Vector3<f64>,
        angular_step: f64,
        camera_pose_world: RigidTransform,
        object_points: PointCloud,
    ) -> Result<Self, SynthError> {
        if n_frames < 2 {
            return Err(SynthError::InvalidSpec(
                "turntable needs >= 2 frames".into(),
            ));
        }
        let norm = rotation_axis.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(SynthError::InvalidSpec(
                "rotation axis must be non-zero".into(),
            ));
        }
        Ok(TurntableScene {
            n_frames,
            rotation_axis: Unit::new_normalize(rotation_axis),
            angular_step,
            camera_pose_world: camera_pose_world.with_convention(PoseConvention::CameraToWorld),
            object_points,
        })
    }

    /// Full turn in `n_frames` steps.
    pub fn full_turn(
        n_frames: usize,
        rotation_axis: Vector3<f64>,
        camera_pose_world: RigidTransform,
        object_points: PointCloud,
    ) -> Result<Self, SynthError> {
        let step = 2.0 * PI / n_frames as f64;
        Self::new(
            n_frames,
            rotation_axis,
            step,
            camera_pose_world,
            object_points,
        )
    }

    /// Rotation of the object at frame `i`.
    pub fn object_motion(&self, i: usize) -> RigidTransform {
        RigidTransform::from_axis_angle(&self.rotation_axis, i as f64 * self.angular_step)
    }

    /// Camera-frame coordinates at frame `i` with the object rotating and the camera fixed.
    pub fn observe_rotating_object(&self, i: usize) -> Vec<Vector3<f64>> {
        let world_to_cam = self.camera_pose_world.invert();
        let spin = self.object_motion(i);
        self.object_points
            .positions()
            .iter()
            .map(|p| world_to_cam.apply(&spin.apply(&p.coords)))
            .collect()
    }
}

/// Camera-to-world poses of an orbiting camera that sees exactly what the
/// stationary camera sees of the spinning object.
pub fn equivalent_camera_trajectory(scene: &TurntableScene) -> Vec<RigidTransform> {
    (0..scene.n_frames)
        .map(|i| {
            RigidTransform::from_axis_angle(&scene.rotation_axis, -(i as f64) * scene.angular_step)
                .compose(&scene.camera_pose_world)
                .expect("untagged motion composes with a pose")
        })
        .collect()
}

/// Camera-frame coordinates of the fixed object seen from a camera-to-world pose.
pub fn observe_from_pose(
    points: &PointCloud,
    camera_to_world: &RigidTransform,
) -> Vec<Vector3<f64>> {
    let world_to_cam = camera_to_world.invert();
    points
        .positions()
        .iter()
        .map(|p| world_to_cam.apply(&p.coords))
        .collect()
}

/// COLMAP model holding the orbiting-camera poses, as SfM would report them.
pub fn scene_to_sparse_model(scene: &TurntableScene, camera: CameraIntrinsics) -> SparseModel {
    let mut model = SparseModel::default();
    let camera_id = camera.camera_id;
    model.cameras.insert(camera_id, camera);
    for (i, wc) in equivalent_camera_trajectory(scene).iter().enumerate() {
        let cw = wc.invert();
        let q = UnitQuaternion::from_rotation(cw.rotation());
        let rec = ImageRecord::new(
            i as u32 + 1,
            [q.w, q.x, q.y, q.z],
            (*cw.translation()).into(),
            camera_id,
            format!("frame_{:04}.png", i + 1),
        )
        .expect("rotation-derived quaternion is unit");
        model.images.push(rec);
    }
    model
}

/// `pgt = base`; `psc` = `perturbation` applied to `base`, with each point
/// independently dropped with probability `dropout_fraction`.
pub fn make_eval_pair(
    base: &PointCloud,
    perturbation: &RigidTransform,
    dropout_fraction: f64,
    seed: u64,
) -> Result<(PointCloud, PointCloud), SynthError> {
    if !(0.0..1.0).contains(&dropout_fraction) {
        return Err(SynthError::InvalidSpec(format!(
            "dropout_fraction {dropout_fraction} outside [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: Vec<usize> = (0..base.len())
        .filter(|_| dropout_fraction == 0.0 || rng.random::<f64>() >= dropout_fraction)
        .collect();
    let psc = base
        .select(&keep)
        .map_positions(|p| perturbation.apply_point(p))
        .labeled("synthetic psc");
    Ok((psc, base.clone().labeled("synthetic pgt")))
}

/// Camera-to-world pose at `eye` looking at `target` (x right, y down, z forward).
pub fn look_at(
    eye: Point3<f64>,
    target: Point3<f64>,
    up: Vector3<f64>,
) -> Result<RigidTransform, SynthError> {
    let forward = (target - eye).try_normalize(1e-12);
    let right = forward.and_then(|f| f.cross(&up).try_normalize(1e-12));
    let (Some(f), Some(r)) = (forward, right) else {
        return Err(SynthError::InvalidSpec(
            "look_at needs distinct eye/target and a non-parallel up".into(),
        ));
    };
    let down = f.cross(&r);
    let rotation = nalgebra::Matrix3::from_columns(&[r, down, f]);
    Ok(RigidTransform::from_parts_unchecked(rotation, eye.coords)
        .with_convention(PoseConvention::CameraToWorld))
}

/// Knobs for [`synthetic_capture`].
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureSpec {
    pub seed: u64,
    pub n_frames: usize,
    /// Expected number of samples within an `eps` disk of any surface point.
    pub coverage: f64,
    /// Evaluation threshold as a fraction of the object scale.
    pub eps_fraction: f64,
    /// Reconstruction noise as a fraction of `eps`.
    pub noise_fraction: f64,
    /// Scene units per meter in the simulated reconstruction.
    pub scene_scale: f64,
    pub reference_radius_m: f64,
    pub floaters: usize,
    pub background_points: usize,
}

impl Default for CaptureSpec {
    fn default() -> Self {
        CaptureSpec {
            seed: 0,
            n_frames: 36,
            coverage: 25.0,
            eps_fraction: 0.005,
            noise_fraction: 0.05,
            scene_scale: 2.7,
            reference_radius_m: 0.04,
            floaters: 60,
            background_points: 20_000,
        }
    }
}

/// A simulated turntable session: ground truth, the SfM model of the
/// capture, and a reconstruction expressed in an unknown similarity frame
/// together with the reference ball, floaters and background.
#[derive(Debug, Clone)]
pub struct SyntheticCapture {
    /// Object surface in meters.
    pub ground_truth: PointCloud,
    /// Reconstruction in scene units.
    pub reconstruction: PointCloud,
    pub model: SparseModel,
    /// True camera-to-world poses of the capture.
    pub trajectory: Vec<RigidTransform>,
    /// Crop box holding object and ball, scene units.
    pub scene_roi: Aabb,
    pub ball_roi: Aabb,
    pub object_roi: Aabb,
    /// Rigid part of the meters-to-scene similarity (applied before scaling).
    pub scene_motion: RigidTransform,
    pub scene_scale: f64,
    pub reference_radius_m: f64,
    /// Bounding-box diagonal of the object, meters.
    pub object_scale: f64,
    pub eps: f64,
}

fn transformed_box(b: &Aabb, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Aabb {
    let (lo, hi) = (b.min(), b.max());
    let corners: Vec<Point3<f64>> = (0..8)
        .map(|k| {
            f(&Point3::new(
                if k & 1 == 0 { lo.x } else { hi.x },
                if k & 2 == 0 { lo.y } else { hi.y },
                if k & 4 == 0 { lo.z } else { hi.z },
            ))
        })
        .collect();
    Aabb::from_points(&corners).expect("eight corners")
}

fn grow(b: &Aabb, margin: f64) -> Aabb {
    let m = Vector3::repeat(margin);
    Aabb::new(b.min() - m, b.max() + m).expect("grown box stays ordered")
}

pub fn synthetic_capture(spec: &CaptureSpec) -> Result<SyntheticCapture, SynthError> {
    let positive = [
        spec.coverage,
        spec.eps_fraction,
        spec.scene_scale,
        spec.reference_radius_m,
    ];
    if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(spec.noise_fraction >= 0.0) {
        return Err(SynthError::InvalidSpec(format!("{spec:?}")));
    }
    let object = reference_object();
    let object_box = object.bounding_box();
    let object_scale = object_box.diagonal();
    let eps = spec.eps_fraction * object_scale;
    let density = spec.coverage / (PI * eps * eps);
    let n_object = (object.area() * density).ceil() as usize;
    let noise = spec.noise_fraction * eps;
    let sample = |shape: &Shape, n: usize, sigma: f64, seed: u64| {
        sample_shape(&ShapeSpec {
            shape: shape.clone(),
            sample_count: n,
            noise_sigma: sigma,
            seed,
        })
    };
    let ground_truth = sample(&object, n_object, 0.0, spec.seed)?.labeled("ground truth");
    // same seed: identical surface samples, then per-point noise
    let observed = sample(&object, n_object, noise, spec.seed)?;

    let r = spec.reference_radius_m;
    let ball_center = Point3::new(object_box.max().x + 0.11, 0.0, 0.0);
    let ball_shape = Shape::Sphere {
        center: ball_center,
        radius: r,
    };
    let n_ball = (ball_shape.area() * density).ceil() as usize;
    let ball = sample(&ball_shape, n_ball, noise, spec.seed.wrapping_add(1))?;

    let object_roi_m = grow(&object_box, 0.03);
    let ball_roi_m = grow(&ball_shape.bounding_box(), 0.5 * r);
    let roi_m = object_roi_m.union(&ball_roi_m);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(2));
    let surfaces = SpatialIndex::build(&ground_truth.concat(&ball)).expect("non-empty");
    let mut floaters = Vec::with_capacity(spec.floaters);
    while floaters.len() < spec.floaters {
        let p = Point3::new(
            rng.random_range(roi_m.min().x..roi_m.max().x),
            rng.random_range(roi_m.min().y..roi_m.max().y),
            rng.random_range(roi_m.min().z..roi_m.max().z),
        );
        if surfaces.nearest(&p).distance > 4.0 * eps {
            floaters.push(p);
        }
    }
    let floor = roi_m.min().z - 0.1;
    let background: Vec<Point3<f64>> = (0..spec.background_points)
        .map(|_| {
            Point3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                floor,
            )
        })
        .collect();
    let scene_m = observed
        .concat(&ball)
        .concat(&PointCloud::new(floaters).expect("finite"))
        .concat(&PointCloud::new(background).expect("finite"));

    let scene_motion = random_rigid(&mut rng, 10f64.to_radians(), 0.02);
    let s = spec.scene_scale;
    let to_scene = |p: &Point3<f64>| Point3::from(scene_motion.apply_point(p).coords * s);
    let reconstruction = scene_m
        .map_positions(to_scene)
        .labeled("synthetic reconstruction");

    let camera = look_at(Point3::new(0.0, -0.6, 0.25), Point3::origin(), Vector3::z())?;
    let preview = ground_truth.select(&(0..ground_truth.len().min(500)).collect::<Vec<_>>());
    let turntable = TurntableScene::full_turn(spec.n_frames, Vector3::z(), camera, preview)?;
    let intrinsics = CameraIntrinsics {
        camera_id: 1,
        model: CameraModel::Pinhole,
        width: 3840,
        height: 2160,
        params: vec![2900.0, 2900.0, 1920.0, 1080.0],
    };
    let model = scene_to_sparse_model(&turntable, intrinsics);

    Ok(SyntheticCapture {
        ground_truth,
        reconstruction,
        model,
        trajectory: equivalent_camera_trajectory(&turntable),
        scene_roi: transformed_box(&roi_m, to_scene),
        ball_roi: transformed_box(&ball_roi_m, to_scene),
        object_roi: transformed_box(&object_roi_m, to_scene),
        scene_motion,
        scene_scale: s,
        reference_radius_m: r,
        object_scale,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_spec(noise: f64, n: usize, seed: u64) -> ShapeSpec {
        ShapeSpec {
            shape: Shape::Sphere {
                center: Point3::new(0.1, 0.2, 0.3),
                radius: 0.04,
            },
            sample_count: n,
            noise_sigma: noise,
            seed,
        }
    }

    #[test]
    fn noiseless_sphere_on_surface() {
        let c = sample_shape(&sphere_spec(0.0, 1000, 1)).unwrap();
        for p in c.positions() {
            assert!(((p - Point3::new(0.1, 0.2, 0.3)).norm() - 0.04).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_cloud() {
        let s = sphere_spec(1e-3, 100, 9);
        assert_eq!(sample_shape(&s).unwrap(), sample_shape(&s).unwrap());
        let other = sample_shape(&ShapeSpec {
            seed: 10,
            ..s.clone()
        })
        .unwrap();
        assert_ne!(sample_shape(&s).unwrap(), other);
    }

    #[test]
    fn radial_noise_level() {
        let c = sample_shape(&sphere_spec(1e-3, 10_000, 5)).unwrap();
        let res: Vec<f64> = c
            .positions()
            .iter()
            .map(|p| (p - Point3::new(0.1, 0.2, 0.3)).norm() - 0.04)
            .collect();
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        let std =
            (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (res.len() - 1) as f64).sqrt();
        assert!((std - 1e-3).abs() < 0.2e-3, "std {std}");
    }

    #[test]
    fn box_surface_points_lie_on_faces() {
        let spec = ShapeSpec {
            shape: Shape::BoxSurface {
                center: Point3::new(1.0, 0.0, 0.0),
                half_extents: Vector3::new(0.1, 0.2, 0.3),
            },
            sample_count: 500,
            noise_sigma: 0.0,
            seed: 2,
        };
        let c = sample_shape(&spec).unwrap();
        for p in c.positions() {
            let l = p - Point3::new(1.0, 0.0, 0.0);
            let on_face = (0..3).any(|a| (l[a].abs() - [0.1, 0.2, 0.3][a]).abs() < 1e-15);
            let inside = (0..3).all(|a| l[a].abs() <= [0.1, 0.2, 0.3][a] + 1e-15);
            assert!(on_face && inside);
        }
    }

    #[test]
    fn composite_counts_sum() {
        let spec = ShapeSpec {
            shape: Shape::Composite(vec![
                (sphere_spec(0.0, 1, 0).shape, 1.0),
                (sphere_spec(0.0, 1, 0).shape, 2.0),
            ]),
            sample_count: 1001,
            noise_sigma: 0.0,
            seed: 0,
        };
        assert_eq!(sample_shape(&spec).unwrap().len(), 1001);
    }

    #[test]
    fn invalid_specs() {
        assert!(sample_shape(&sphere_spec(0.0, 0, 0)).is_err());
        assert!(sample_shape(&sphere_spec(-1.0, 10, 0)).is_err());
        let base = sample_shape(&sphere_spec(0.0, 10, 0)).unwrap();
        assert!(make_eval_pair(&base, &RigidTransform::identity(), 1.0, 0).is_err());
    }

    #[test]
    fn zero_step_keeps_camera_fixed() {
        let obj = sample_shape(&sphere_spec(0.0, 10, 0)).unwrap();
        let cam = RigidTransform::from_translation(Vector3::new(0.0, -1.0, 0.3));
        let scene = TurntableScene::new(5, Vector3::z(), 0.0, cam, obj).unwrap();
        for pose in equivalent_camera_trajectory(&scene) {
            assert_eq!(pose.max_abs_diff(&scene.camera_pose_world), 0.0);
            assert_eq!(pose.convention(), Some(PoseConvention::CameraToWorld));
        }
    }

    #[test]
    fn identity_pair_without_dropout() {
        let base = sample_shape(&sphere_spec(0.0, 50, 0)).unwrap();
        let (psc, pgt) = make_eval_pair(&base, &RigidTransform::identity(), 0.0, 3).unwrap();
        assert_eq!(psc.positions(), pgt.positions());
    }

    #[test]
    fn random_rigid_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let t = random_rigid(&mut rng, 0.2, 0.5);
            assert!(t.rotation_angle() <= 0.2 + 1e-12);
            assert!(t.translation().norm() <= 0.5 + 1e-12);
        }
    }
    #[test]
    fn look_at_centers_target() {
        let eye = Point3::new(0.3, -0.6, 0.25);
        let pose = look_at(eye, Point3::origin(), Vector3::z()).unwrap();
        let in_cam = pose.invert().apply(&Vector3::zeros());
        assert!(in_cam.x.abs() < 1e-15 && in_cam.y.abs() < 1e-15);
        assert!((in_cam.z - eye.coords.norm()).abs() < 1e-15);
        assert!((pose.rotation().determinant() - 1.0).abs() < 1e-12);
        assert!(look_at(eye, eye, Vector3::z()).is_err());
    }

    #[test]
    fn reference_object_area_and_bounds() {
        let shape = reference_object();
        let expected = 8.0 * (0.08 * 0.05 + 0.08 * 0.03 + 0.05 * 0.03)
            + 4.0 * PI * 0.03 * 0.03
            + 8.0 * (0.02 * 0.015 + 0.02 * 0.015 + 0.015 * 0.015);
        assert!((shape.area() - expected).abs() < 1e-15);
        let b = shape.bounding_box();
        assert_eq!(*b.min(), Point3::new(-0.08, -0.055, -0.03));
        assert_eq!(*b.max(), Point3::new(0.09, 0.06, 0.08));
    }

    #[test]
    fn capture_layout() {
        let spec = CaptureSpec {
            coverage: 0.5,
            background_points: 500,
            n_frames: 8,
            ..CaptureSpec::default()
        };
        let cap = synthetic_capture(&spec).unwrap();
        let n_gt = cap.ground_truth.len();
        assert_eq!(cap.model.images.len(), 8);
        assert_eq!(cap.trajectory.len(), 8);
        let inside = |b: &Aabb| {
            cap.reconstruction
                .positions()
                .iter()
                .filter(|p| b.contains(p))
                .count()
        };
        // everything but the background lies in the scene crop
        assert_eq!(inside(&cap.scene_roi), cap.reconstruction.len() - 500);
        // the object samples come first, followed by the ball
        let pts = cap.reconstruction.positions();
        assert!(pts[..n_gt]
            .iter()
            .all(|p| cap.object_roi.contains(p) && !cap.ball_roi.contains(p)));
        let in_ball = pts[n_gt..]
            .iter()
            .filter(|p| cap.ball_roi.contains(p))
            .count();
        assert!(in_ball > 0);
        assert!((cap.eps - 0.005 * cap.object_scale).abs() < 1e-18);
    }
    #[test]
    fn full_turn_closes_loop() {
        let obj = sample_shape(&sphere_spec(0.0, 10, 0)).unwrap();
        let cam = look_at(Point3::new(0.0, -0.6, 0.2), Point3::origin(), Vector3::z()).unwrap();
        let scene = TurntableScene::full_turn(36, Vector3::new(0.1, 0.0, 1.0), cam, obj).unwrap();
        let step = RigidTransform::from_axis_angle(&scene.rotation_axis, -scene.angular_step);
        let mut pose = scene.camera_pose_world;
        for _ in 0..36 {
            pose = step.compose(&pose).unwrap();
        }
        assert!(pose.max_abs_diff(&scene.camera_pose_world) < 1e-9);
    }

    #[test]
    fn dropout_count() {
        let base = sample_shape(&sphere_spec(0.0, 10_000, 1)).unwrap();
        let (psc, pgt) = make_eval_pair(&base, &RigidTransform::identity(), 0.5, 7).unwrap();
        assert_eq!(pgt.len(), 10_000);
        assert!((4900..=5100).contains(&psc.len()), "{}", psc.len());
    }
}
