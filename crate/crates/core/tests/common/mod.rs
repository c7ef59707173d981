#![allow(dead_code)]

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turntable_core::synth::{sample_shape, Shape, ShapeSpec};
use turntable_core::PointCloud;

/// Asymmetric test object (meters): a box with a sphere and a small block attached off-axis.
pub fn object_shape() -> Shape {
    Shape::Composite(vec![
        (
            Shape::BoxSurface {
                center: Point3::origin(),
                half_extents: Vector3::new(0.08, 0.05, 0.03),
            },
            box_area(0.08, 0.05, 0.03),
        ),
        (
            Shape::Sphere {
                center: Point3::new(0.06, 0.03, 0.05),
                radius: 0.03,
            },
            4.0 * std::f64::consts::PI * 0.03 * 0.03,
        ),
        (
            Shape::BoxSurface {
                center: Point3::new(-0.05, -0.04, 0.04),
                half_extents: Vector3::new(0.02, 0.015, 0.015),
            },
            box_area(0.02, 0.015, 0.015),
        ),
    ])
}

fn box_area(hx: f64, hy: f64, hz: f64) -> f64 {
    8.0 * (hx * hy + hx * hz + hy * hz)
}

/// Summed surface area of the parts of [`object_shape`], m².
pub fn object_area() -> f64 {
    box_area(0.08, 0.05, 0.03)
        + 4.0 * std::f64::consts::PI * 0.03 * 0.03
        + box_area(0.02, 0.015, 0.015)
}

pub fn object_cloud(n: usize, noise_sigma: f64, seed: u64) -> PointCloud {
    sample_shape(&ShapeSpec {
        shape: object_shape(),
        sample_count: n,
        noise_sigma,
        seed,
    })
    .expect("valid object spec")
}

pub fn uniform_cloud(rng: &mut ChaCha8Rng, n: usize, half: f64) -> PointCloud {
    let pts = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            )
        })
        .collect();
    PointCloud::new(pts).expect("finite")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sorted_dist_index(pts: &[Point3<f64>], i: usize) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = pts
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, q)| {
            let v = pts[i] - q;
            ((v.x * v.x + v.y * v.y + v.z * v.z).sqrt(), j)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d
}

/// All-pairs nearest distance from every point of `from` to `to`.
pub fn brute_nearest(from: &[Point3<f64>], to: &[Point3<f64>]) -> Vec<f64> {
    from.iter()
        .map(|p| {
            to.iter()
                .map(|q| {
                    let v = p - q;
                    (v.x * v.x + v.y * v.y + v.z * v.z).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// All-pairs statistical outlier removal: indices whose mean k-NN distance
/// exceeds mean + ratio * sample std.
pub fn brute_sor(pts: &[Point3<f64>], k: usize, ratio: f64) -> Vec<usize> {
    let mean_d: Vec<f64> = (0..pts.len())
        .map(|i| {
            sorted_dist_index(pts, i)
                .iter()
                .take(k)
                .map(|d| d.0)
                .sum::<f64>()
                / k as f64
        })
        .collect();
    let n = mean_d.len() as f64;
    let mu = mean_d.iter().sum::<f64>() / n;
    let sd = (mean_d.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / (n - 1.0)).sqrt();
    (0..pts.len())
        .filter(|&i| mean_d[i] > mu + ratio * sd)
        .collect()
}
