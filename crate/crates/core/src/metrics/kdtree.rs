use crate::math::Vec3;

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

/// Static k-d tree for exact nearest-neighbor distance queries.
///
/// A subtree is skipped only when the squared distance to its splitting
/// plane is at least the best squared distance found so far. Rounding is
/// monotone, so that bound never exceeds the computed squared distance of any
/// point behind the plane and the returned minimum is bit-identical to an
/// exhaustive scan that uses the same distance formula.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Original index of each stored point.
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut pts: Vec<(Vec3, usize)> = points.iter().copied().zip(0..).collect();
        let mut nodes = Vec::new();
        if !pts.is_empty() {
            let n = pts.len();
            build(&mut pts, 0, n, &mut nodes);
        }
        KdTree {
            points: pts.iter().map(|p| p.0).collect(),
            ids: pts.iter().map(|p| p.1).collect(),
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest squared Euclidean distance from `q` to the stored points,
    /// or infinity for an empty tree.
    pub fn nearest_squared(&self, q: Vec3) -> f64 {
        self.nearest(q).map_or(f64::INFINITY, |n| n.1)
    }

    /// Original index and squared distance of the closest point; ties go
    /// to the lowest index.
    pub fn nearest(&self, q: Vec3) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for (p, &id) in self.points[start..end].iter().zip(&self.ids[start..end]) {
                    let d = (q - *p).length_squared();
                    if d < best.1 || (d == best.1 && id < best.0) {
                        *best = (id, d);
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
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(pts: &mut [(Vec3, usize)], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let slice = &mut pts[start..end];
    let (lo, hi) = slice.iter().fold(
        (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.min(p.0), hi.max(p.0)),
    );
    let ext = hi - lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ext[axis] == 0.0 {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| a.0[axis].total_cmp(&b.0[axis]));
    let value = slice[mid].0[axis];
    // Points left of `mid` are <= value and points from `mid` on are >= value.
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build(pts, start, start + mid, nodes);
    let right = build(pts, start + mid, end, nodes);
    nodes[id] = Node::Split {
        axis,
        value,
        left,
        right,
    };
    id
}
