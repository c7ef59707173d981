use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turntable_core::evaluation::{sweep_with, Spacing, SweepSpec, DEFAULT_F_TARGET};
use turntable_core::processing::{
    fit_sphere_ransac_with, sor_filter_with, RansacParams, SorParams,
};
use turntable_core::registration::{icp_with_index, transform_cloud, IcpParams};
use turntable_core::synth::{sample_shape, Shape, ShapeSpec};
use turntable_core::{Execution, PointCloud, RigidTransform, SpatialIndex};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn surface(n: usize, noise: f64, seed: u64) -> PointCloud {
    sample_shape(&ShapeSpec {
        shape: Shape::Composite(vec![
            (
                Shape::BoxSurface {
                    center: Point3::origin(),
                    half_extents: Vector3::new(0.08, 0.05, 0.03),
                },
                3.0,
            ),
            (
                Shape::Sphere {
                    center: Point3::new(0.06, 0.03, 0.05),
                    radius: 0.03,
                },
                1.0,
            ),
        ]),
        sample_count: n,
        noise_sigma: noise,
        seed,
    })
    .unwrap()
}

fn bench_sweep(c: &mut Criterion) {
    let psc = surface(100_000, 5e-4, 1);
    let pgt = surface(100_000, 0.0, 2);
    let spec = SweepSpec::new(1e-4, 1e-2, 100, Spacing::Log).unwrap();
    let mut g = c.benchmark_group("sweep_100k");
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| sweep_with(&psc, &pgt, &spec, DEFAULT_F_TARGET, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_sor(c: &mut Criterion) {
    let mut g = c.benchmark_group("sor");
    g.sample_size(10);
    for n in [20_000, 100_000] {
        let cloud = surface(n, 1e-4, 3);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &cloud, |b, cloud| {
                b.iter(|| sor_filter_with(cloud, &SorParams::default(), exec).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_ransac(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ball = sample_shape(&ShapeSpec {
        shape: Shape::Sphere {
            center: Point3::new(0.2, 0.0, 0.0),
            radius: 0.04,
        },
        sample_count: 20_000,
        noise_sigma: 2e-4,
        seed: 4,
    })
    .unwrap();
    let clutter = PointCloud::new(
        (0..5_000)
            .map(|_| {
                Point3::new(
                    rng.random_range(0.1..0.3),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                )
            })
            .collect(),
    )
    .unwrap();
    let cloud = ball.concat(&clutter);
    let params = RansacParams::default();
    let mut g = c.benchmark_group("ransac_25k");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| fit_sphere_ransac_with(&cloud, &params, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_icp(c: &mut Criterion) {
    let target = surface(50_000, 0.0, 5);
    let motion = RigidTransform::from_translation(Vector3::new(0.004, -0.003, 0.002))
        .compose(&RigidTransform::from_axis_angle(
            &Vector3::new(0.2, 0.3, 1.0),
            0.1,
        ))
        .unwrap();
    let source = transform_cloud(&surface(50_000, 5e-4, 6), &motion);
    let index = SpatialIndex::build(&target).unwrap();
    let params = IcpParams::default();
    let mut g = c.benchmark_group("icp_50k");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| icp_with_index(&source, &target, &index, &params, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_sweep, bench_sor, bench_ransac, bench_icp);
criterion_main!(benches);
