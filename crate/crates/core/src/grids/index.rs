//! Exact nearest-rotation search over a fixed rotation set.
//!
//! Canonical quaternions live on the half 3-sphere `w >= 0`; the nearest
//! rotation to `q` is the stored point maximizing `|q·p|`, which is the
//! Euclidean nearest neighbour of either `q` or `-q`. A static k-d tree over
//! the stored quaternions answers both queries. Leaf scoring uses the same
//! `|q·p|` key and lowest-index tie-break as the exhaustive scan, and pruning
//! keeps a small slack, so results are bit-identical to it.

use crate::rotation::Rotation;

const LEAF: usize = 8;
const SLACK: f64 = 1e-12;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug)]
pub(crate) struct RotationIndex {
    order: Vec<usize>,
    points: Vec<[f64; 4]>,
    root: Node,
}

impl RotationIndex {
    pub fn build(rotations: &[Rotation]) -> Self {
        let points: Vec<[f64; 4]> = rotations.iter().map(|r| r.quaternion()).collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build_node(&points, &mut order, 0);
        RotationIndex {
            order,
            points,
            root,
        }
    }

    pub fn nearest(&self, rotations: &[Rotation], r: &Rotation) -> usize {
        let q = r.quaternion();
        let neg = [-q[0], -q[1], -q[2], -q[3]];
        let mut best = Best {
            key: f64::NEG_INFINITY,
            idx: usize::MAX,
        };
        self.search(&self.root, &q, r, rotations, &mut best);
        self.search(&self.root, &neg, r, rotations, &mut best);
        best.idx
    }

    fn search(
        &self,
        node: &Node,
        target: &[f64; 4],
        r: &Rotation,
        rotations: &[Rotation],
        best: &mut Best,
    ) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let key = rotations[i].abs_dot(r);
                    if key > best.key || (key == best.key && i < best.idx) {
                        best.key = key;
                        best.idx = i;
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = target[*dim] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, target, r, rotations, best);
                // squared chord distance of the current best
                let bound = 2.0 - 2.0 * best.key.max(-1.0);
                if diff * diff <= bound + SLACK {
                    self.search(far, target, r, rotations, best);
                }
            }
        }
    }

    #[allow(dead_code)]
    pub fn len(&self) -> usize {
        self.points.len()
    }
}

struct Best {
    key: f64,
    idx: usize,
}

fn build_node(points: &[[f64; 4]], order: &mut [usize], offset: usize) -> Node {
    if order.len() <= LEAF {
        return Node::Leaf {
            start: offset,
            end: offset + order.len(),
        };
    }
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for &i in order.iter() {
        for d in 0..4 {
            lo[d] = lo[d].min(points[i][d]);
            hi[d] = hi[d].max(points[i][d]);
        }
    }
    let dim = (0..4)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][dim].total_cmp(&points[b][dim]).then(a.cmp(&b))
    });
    let value = points[order[mid]][dim];
    let (l, r) = order.split_at_mut(mid);
    let left = build_node(points, l, offset);
    let right = build_node(points, r, offset + mid);
    Node::Split {
        dim,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}
