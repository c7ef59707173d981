//! Point-cloud container, PLY I/O and an exact KD-tree.

mod kdtree;
mod ply;

use nalgebra::Point3;
use thiserror::Error;

pub use kdtree::{Neighbor, SpatialIndex};
pub use ply::{read_ply, write_ply, write_ply_with, PlyFormat, PlyScalar};

#[derive(Debug, Error)]
pub enum PointCloudError {
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("color count {colors} does not match point count {points}")]
    ColorLength { points: usize, colors: usize },
    #[error("operation requires a non-empty cloud")]
    EmptyCloud,
    #[error("k = {k} exceeds the number of indexed points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid bounding box: min {min:?} exceeds max {max:?}")]
    InvalidBox { min: [f64; 3], max: [f64; 3] },
    #[error("unsupported PLY: {0}")]
    UnsupportedFormat(String),
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("PLY body truncated: {0}")]
    TruncatedBody(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered 3D points with optional per-point RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Point3<f64>>,
    colors: Option<Vec<[u8; 3]>>,
    pub source_label: String,
}

impl PointCloud {
    pub fn new(positions: Vec<Point3<f64>>) -> Result<Self, PointCloudError> {
        Self::with_colors(positions, None)
    }

    pub fn with_colors(
        positions: Vec<Point3<f64>>,
        colors: Option<Vec<[u8; 3]>>,
    ) -> Result<Self, PointCloudError> {
        if let Some(index) = positions
            .iter()
            .position(|p| !p.coords.iter().all(|v| v.is_finite()))
        {
            return Err(PointCloudError::NonFinite { index });
        }
        if let Some(c) = &colors {
            if c.len() != positions.len() {
                return Err(PointCloudError::ColorLength {
                    points: positions.len(),
                    colors: c.len(),
                });
            }
        }
        Ok(PointCloud {
            positions,
            colors,
            source_label: String::new(),
        })
    }

    pub fn empty() -> Self {
        PointCloud {
            positions: Vec::new(),
            colors: None,
            source_label: String::new(),
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3<f64>] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    /// Points at `indices`, in the given order, with colors carried along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            positions: indices.iter().map(|&i| self.positions[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
            source_label: self.source_label.clone(),
        }
    }

    /// Replaces every position by `f(position)`. Colors are untouched.
    ///
    /// Panics if `f` produces a non-finite coordinate.
    pub fn map_positions<F>(&self, f: F) -> PointCloud
    where
        F: Fn(&Point3<f64>) -> Point3<f64>,
    {
        let positions: Vec<_> = self.positions.iter().map(f).collect();
        assert!(
            positions
                .iter()
                .all(|p| p.coords.iter().all(|v| v.is_finite())),
            "position map produced a non-finite coordinate"
        );
        PointCloud {
            positions,
            colors: self.colors.clone(),
            source_label: self.source_label.clone(),
        }
    }

    /// Concatenates two clouds. Colors survive only if both sides have them.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        let colors = match (&self.colors, &other.colors) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        PointCloud {
            positions,
            colors,
            source_label: self.source_label.clone(),
        }
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        Aabb::from_points(&self.positions)
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.is_empty() {
            return None;
        }
        let sum = self
            .positions
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.len() as f64))
    }

    /// Length of the bounding-box diagonal, zero for empty clouds.
    pub fn diameter(&self) -> f64 {
        self.bounding_box().map_or(0.0, |b| b.diagonal())
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Result<Self, PointCloudError> {
        let ok = (0..3).all(|i| min[i].is_finite() && max[i].is_finite() && min[i] <= max[i]);
        if !ok {
            return Err(PointCloudError::InvalidBox {
                min: min.coords.into(),
                max: max.coords.into(),
            });
        }
        Ok(Aabb { min, max })
    }

    pub fn from_points(points: &[Point3<f64>]) -> Option<Self> {
        let first = points.first()?;
        let (min, max) = points
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Aabb { min, max })
    }

    pub fn min(&self) -> &Point3<f64> {
        &self.min
    }

    pub fn max(&self) -> &Point3<f64> {
        &self.max
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }
}
