//! Stationary-camera turntable reconstruction toolkit.
//!
//! The crate covers everything around an external NeRF stage:
//!
//! - [`geometry`]: SE(3) algebra with explicit world-to-camera / camera-to-world tags.
//! - [`colmap`]: COLMAP sparse-model parsing (text and binary) and the NeRF pose manifest.
//! - [`pointcloud`]: point-cloud container, PLY I/O and an exact KD-tree.
//! - [`processing`]: ROI cropping, statistical outlier removal, reference-sphere calibration.
//! - [`registration`]: point-to-point ICP.
//! - [`evaluation`]: precision / recall / F-score and threshold sweeps.
//! - [`fps_select`]: minimum frame-rate selection with full registration.
//! - [`synth`]: synthetic scenes and clouds used as test oracles.
//!
//! Data-parallel inner loops (nearest-neighbour distances, SOR neighbourhoods,
//! ICP correspondences, RANSAC scoring) run on rayon when the `parallel`
//! feature is enabled and fall back to sequential iteration otherwise. Results
//! are identical either way; see [`exec`].

pub mod colmap;
pub mod evaluation;
pub mod exec;
pub mod fps_select;
pub mod geometry;
pub mod numfmt;
pub mod pointcloud;
pub mod processing;
pub mod registration;
pub mod synth;

pub use exec::Execution;
pub use geometry::{PoseConvention, RigidTransform, UnitQuaternion};
pub use pointcloud::{Aabb, PointCloud, SpatialIndex};
