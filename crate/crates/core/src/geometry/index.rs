use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{GeometryError, Point, PointCloud};

const LEAF_SIZE: usize = 8;

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

/// Static 3D kd-tree over a cloud's positions.
///
/// Results are ordered by `(distance, index)`. Queries return exactly what a
/// brute-force scan over squared distances would return.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SpatialIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self, GeometryError> {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::ZeroPoints);
        }
        let mut index = Self {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        let n = index.order.len();
        index.build_node(0, n);
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            // All coincident.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// The `k` nearest indices, ascending by distance, ties to the lower index.
    pub fn knn(&self, query: &Point, k: usize) -> Result<Vec<usize>, GeometryError> {
        Ok(self.knn_with_distances(query, k)?.into_iter().map(|(i, _)| i).collect())
    }

    /// Like [`knn`](Self::knn) with squared distances attached.
    pub fn knn_with_distances(&self, query: &Point, k: usize) -> Result<Vec<(usize, f64)>, GeometryError> {
        if k == 0 {
            return Err(GeometryError::ZeroK);
        }
        let k = k.min(self.points.len());
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_visit(0, query, k, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        Ok(out.into_iter().map(|c| (c.index, c.dist2)).collect())
    }

    fn knn_visit(&self, node: usize, q: &Point, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        dist2: (self.points[i] - q).norm_squared(),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.knn_visit(near, q, k, heap);
                // Equality must still be visited: a tie at the plane may carry a lower index.
                if heap.len() < k || delta * delta <= heap.peek().unwrap().dist2 {
                    self.knn_visit(far, q, k, heap);
                }
            }
        }
    }

    /// All indices within `r` (inclusive), ascending by distance, ties to the lower index.
    ///
    /// `r = 0` is allowed and returns only exactly coincident points.
    pub fn radius_search(&self, query: &Point, r: f64) -> Result<Vec<usize>, GeometryError> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(GeometryError::BadRadius(r));
        }
        let mut found = Vec::new();
        self.radius_visit(0, query, r * r, &mut found);
        found.sort();
        Ok(found.into_iter().map(|c| c.index).collect())
    }

    fn radius_visit(&self, node: usize, q: &Point, r2: f64, out: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let dist2 = (self.points[i] - q).norm_squared();
                    if dist2 <= r2 {
                        out.push(Candidate { dist2, index: i });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.radius_visit(near, q, r2, out);
                if delta * delta <= r2 {
                    self.radius_visit(far, q, r2, out);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    fn brute_sorted(points: &[Point], q: &Point) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p - q).norm_squared(), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    #[test]
    fn single_point() {
        let idx = SpatialIndex::from_points(vec![Point::new(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!(idx.knn(&Point::new(-5.0, 0.0, 9.0), 1).unwrap(), vec![0]);
        assert_eq!(idx.knn(&Point::origin(), 4).unwrap(), vec![0]);
        assert!(idx.radius_search(&Point::origin(), 0.0).unwrap().is_empty());
    }

    #[test]
    fn empty_and_bad_arguments() {
        assert!(SpatialIndex::from_points(vec![]).is_err());
        let idx = SpatialIndex::from_points(random_points(10, 0)).unwrap();
        assert!(matches!(idx.knn(&Point::origin(), 0), Err(GeometryError::ZeroK)));
        assert!(matches!(
            idx.radius_search(&Point::origin(), -1.0),
            Err(GeometryError::BadRadius(_))
        ));
    }

    #[test]
    fn knn_basic_and_ties() {
        let idx = SpatialIndex::from_points(vec![Point::origin(), Point::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(idx.knn(&Point::new(0.1, 0.0, 0.0), 1).unwrap(), vec![0]);
        assert_eq!(idx.knn(&Point::new(1.0, 0.0, 0.0), 1).unwrap(), vec![0]);
        let idx = SpatialIndex::from_points(vec![Point::new(2.0, 0.0, 0.0), Point::origin()]).unwrap();
        assert_eq!(idx.knn(&Point::new(1.0, 0.0, 0.0), 1).unwrap(), vec![0]);
    }

    #[test]
    fn knn_matches_brute_force() {
        for (n, k, seed) in [(1000, 8, 1u64), (500, 17, 2)] {
            let pts = random_points(n, seed);
            let idx = SpatialIndex::from_points(pts.clone()).unwrap();
            let queries = random_points(50, seed + 100);
            for q in &queries {
                let expected: Vec<usize> = brute_sorted(&pts, q).iter().take(k).map(|x| x.1).collect();
                assert_eq!(idx.knn(q, k).unwrap(), expected);
            }
        }
    }

    #[test]
    fn knn_on_lattice_with_many_ties() {
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..6 {
                    pts.push(Point::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let idx = SpatialIndex::from_points(pts.clone()).unwrap();
        for q in [
            Point::new(2.5, 2.5, 2.5),
            Point::new(1.0, 1.0, 1.0),
            Point::new(0.5, 3.0, 2.0),
        ] {
            for k in [1, 7, 19, 30] {
                let expected: Vec<usize> = brute_sorted(&pts, &q).iter().take(k).map(|x| x.1).collect();
                assert_eq!(idx.knn(&q, k).unwrap(), expected);
            }
        }
    }

    #[test]
    fn radius_on_unit_circle() {
        let pts: Vec<Point> = (0..12)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 12.0;
                Point::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let idx = SpatialIndex::from_points(pts).unwrap();
        let mut all = idx.radius_search(&Point::origin(), 1.0 + 1e-12).unwrap();
        all.sort();
        assert_eq!(all, (0..12).collect::<Vec<_>>());
        assert!(idx.radius_search(&Point::origin(), 0.5).unwrap().is_empty());
    }

    #[test]
    fn radius_matches_brute_force() {
        let pts = random_points(500, 9);
        let idx = SpatialIndex::from_points(pts.clone()).unwrap();
        for q in random_points(50, 10) {
            let expected: Vec<usize> = brute_sorted(&pts, &q)
                .into_iter()
                .filter(|x| x.0 <= 0.3 * 0.3)
                .map(|x| x.1)
                .collect();
            assert_eq!(idx.radius_search(&q, 0.3).unwrap(), expected);
        }
    }
}
