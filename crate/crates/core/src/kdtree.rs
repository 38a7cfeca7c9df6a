//! Static 2-D kd-tree for nearest-neighbour and radius queries.

use crate::geometry::Vec2;
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: u8, value: T, left: usize, right: usize },
}

/// Balanced kd-tree over a fixed point set. Query results report indices into the
/// slice the tree was built from.
#[derive(Debug, Clone)]
pub struct KdTree<T> {
    points: Vec<Vec2<T>>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

#[inline]
fn coord<T: Real>(p: &Vec2<T>, axis: u8) -> T {
    if axis == 0 {
        p.x
    } else {
        p.y
    }
}

impl<T: Real> KdTree<T> {
    pub fn build(points: &[Vec2<T>]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_rec(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> Vec2<T> {
        self.points[idx]
    }

    fn build_rec(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Vec2::new(T::infinity(), T::infinity()), Vec2::new(T::neg_infinity(), T::neg_infinity()));
        for &i in &self.order[start..end] {
            let p = self.points[i];
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let axis = if hi.x - lo.x >= hi.y - lo.y { 0 } else { 1 };
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coord(&points[a], axis)
                .partial_cmp(&coord(&points[b], axis))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let value = coord(&self.points[self.order[mid]], axis);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_rec(start, mid);
        let right = self.build_rec(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Nearest stored point: `(index, squared distance)`. Ties resolve to the lowest index.
    pub fn nearest(&self, q: Vec2<T>) -> Option<(usize, T)> {
        self.nearest_within(q, T::infinity())
    }

    /// Nearest stored point strictly closer than `max_dist`.
    pub fn nearest_within(&self, q: Vec2<T>, max_dist: T) -> Option<(usize, T)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best: Option<(usize, T)> = None;
        let mut bound = max_dist * max_dist;
        self.nearest_rec(0, q, &mut best, &mut bound);
        best
    }

    fn nearest_rec(&self, node: usize, q: Vec2<T>, best: &mut Option<(usize, T)>, bound: &mut T) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    let better = match *best {
                        None => d < *bound,
                        Some((bi, bd)) => d < bd || (d == bd && i < bi),
                    };
                    if better {
                        *best = Some((i, d));
                        *bound = d;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = coord(&q, axis) - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best, bound);
                if diff * diff <= *bound {
                    self.nearest_rec(far, q, best, bound);
                }
            }
        }
    }

    /// Indices of all points with distance ≤ `radius`, in ascending index order.
    pub fn within_radius(&self, q: Vec2<T>, radius: T) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() {
            self.radius_rec(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: usize, q: Vec2<T>, r2: T, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                out.extend(
                    self.order[start..end]
                        .iter()
                        .copied()
                        .filter(|&i| (self.points[i] - q).norm_squared() <= r2),
                );
            }
            Node::Split { axis, value, left, right } => {
                let diff = coord(&q, axis) - value;
                if diff <= T::zero() || diff * diff <= r2 {
                    self.radius_rec(left, q, r2, out);
                }
                if diff >= T::zero() || diff * diff <= r2 {
                    self.radius_rec(right, q, r2, out);
                }
            }
        }
    }
}
