mod common;

use common::{object_cloud, rng, uniform_cloud};
use turntable_core::evaluation::{sweep_with, Spacing, SweepSpec, DEFAULT_F_TARGET};
use turntable_core::processing::{
    fit_sphere_ransac_with, sor_filter_with, RansacParams, SorParams,
};
use turntable_core::registration::{icp_with_index, transform_cloud, IcpParams};
use turntable_core::synth::random_rigid;
use turntable_core::{Execution, SpatialIndex};

#[test]
fn sor_identical_across_execution_modes() {
    let mut g = rng(1);
    let cloud = object_cloud(8000, 1e-3, 1).concat(&uniform_cloud(&mut g, 100, 0.3));
    let a = sor_filter_with(&cloud, &SorParams::default(), Execution::Sequential).unwrap();
    let b = sor_filter_with(&cloud, &SorParams::default(), Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_identical_across_execution_modes() {
    let psc = object_cloud(6000, 5e-4, 2);
    let pgt = object_cloud(6000, 0.0, 3);
    let spec = SweepSpec::new(1e-4, 1e-2, 50, Spacing::Log).unwrap();
    let a = sweep_with(&psc, &pgt, &spec, DEFAULT_F_TARGET, Execution::Sequential).unwrap();
    let b = sweep_with(&psc, &pgt, &spec, DEFAULT_F_TARGET, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ransac_identical_across_execution_modes() {
    let mut g = rng(4);
    let cloud = turntable_core::synth::sample_shape(&turntable_core::synth::ShapeSpec {
        shape: turntable_core::synth::Shape::Sphere {
            center: nalgebra::Point3::new(0.1, 0.0, -0.2),
            radius: 0.05,
        },
        sample_count: 3000,
        noise_sigma: 2e-4,
        seed: 4,
    })
    .unwrap()
    .concat(&uniform_cloud(&mut g, 1000, 0.3));
    let p = RansacParams::default();
    let a = fit_sphere_ransac_with(&cloud, &p, Execution::Sequential).unwrap();
    let b = fit_sphere_ransac_with(&cloud, &p, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn icp_identical_across_execution_modes() {
    let target = object_cloud(5000, 0.0, 5);
    let truth = random_rigid(&mut rng(5), 0.1, 0.01);
    let source = transform_cloud(&object_cloud(5000, 1e-3, 6), &truth);
    let index = SpatialIndex::build(&target).unwrap();
    let p = IcpParams {
        max_source_points: Some(2000),
        seed: 9,
        ..IcpParams::default()
    };
    let a = icp_with_index(&source, &target, &index, &p, Execution::Sequential).unwrap();
    let b = icp_with_index(&source, &target, &index, &p, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seeded_runs_repeat() {
    let target = object_cloud(3000, 0.0, 7);
    let source = transform_cloud(&target, &random_rigid(&mut rng(7), 0.1, 0.01));
    let index = SpatialIndex::build(&target).unwrap();
    let p = IcpParams {
        max_source_points: Some(500),
        seed: 3,
        ..IcpParams::default()
    };
    let run = || icp_with_index(&source, &target, &index, &p, Execution::default()).unwrap();
    assert_eq!(run(), run());
}
