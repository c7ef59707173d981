use std::collections::BinaryHeap;

use nalgebra::Point3;

use super::{PointCloud, PointCloudError};

const LEAF_SIZE: usize = 16;

/// One query result: original point index and Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact KD-tree over a fixed set of points.
///
/// Results always equal a brute-force linear scan: ties on distance go to
/// the lowest original point index. The index is immutable after
/// [`SpatialIndex::build`] and can be shared across threads.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    // points and their original indices, permuted into tree order
    points: Vec<[f64; 3]>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// `(squared distance, index)` ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self, PointCloudError> {
        Self::from_points(cloud.positions())
    }

    pub fn from_points(points: &[Point3<f64>]) -> Result<Self, PointCloudError> {
        if points.is_empty() {
            return Err(PointCloudError::EmptyCloud);
        }
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        let mut nodes = Vec::with_capacity(2 * raw.len() / LEAF_SIZE + 1);
        build_node(&raw, &mut order, 0, raw.len(), &mut nodes);
        let points = order.iter().map(|&i| raw[i]).collect();
        Ok(SpatialIndex {
            points,
            ids: order,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact nearest neighbour of `q`.
    pub fn nearest(&self, q: &Point3<f64>) -> Neighbor {
        let q = [q.x, q.y, q.z];
        let mut best = Key(f64::INFINITY, usize::MAX);
        self.nearest_in(0, &q, &mut best);
        Neighbor {
            index: best.1,
            distance: best.0.sqrt(),
        }
    }

    /// Exact `k` nearest neighbours, ascending by distance then index.
    pub fn k_nearest(&self, q: &Point3<f64>, k: usize) -> Result<Vec<Neighbor>, PointCloudError> {
        if k > self.len() {
            return Err(PointCloudError::KTooLarge { k, n: self.len() });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let q = [q.x, q.y, q.z];
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(0, &q, k, &mut heap);
        let mut keys = heap.into_vec();
        keys.sort_unstable();
        Ok(keys
            .into_iter()
            .map(|Key(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect())
    }

    fn nearest_in(&self, node: usize, q: &[f64; 3], best: &mut Key) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let key = Key(dist2(&self.points[i], q), self.ids[i]);
                    if key < *best {
                        *best = key;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_in(near, q, best);
                // equal distance must still be visited: the far side may hold a lower index
                if diff * diff <= best.0 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    fn knn_in(&self, node: usize, q: &[f64; 3], k: usize, heap: &mut BinaryHeap<Key>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start..end {
                    let key = Key(dist2(&self.points[i], q), self.ids[i]);
                    if heap.len() < k {
                        heap.push(key);
                    } else if key < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(key);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_in(near, q, k, heap);
                let bound = if heap.len() < k {
                    f64::INFINITY
                } else {
                    heap.peek().expect("heap is full").0
                };
                if diff * diff <= bound {
                    self.knn_in(far, q, k, heap);
                }
            }
        }
    }
}

fn build_node(
    raw: &[[f64; 3]],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let slice = &mut order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(raw[i][a]);
            hi[a] = hi[a].max(raw[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        raw[a][axis].total_cmp(&raw[b][axis]).then(a.cmp(&b))
    });
    let value = raw[slice[mid]][axis];

    nodes.push(Node::Leaf { start, end }); // placeholder
    let left = build_node(raw, order, start, start + mid, nodes);
    let right = build_node(raw, order, start + mid, end, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}
