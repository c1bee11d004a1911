//! Minimal 3D kd-tree for nearest-neighbor queries. Ties are broken by the
//! lowest point index so results do not depend on tree layout.

use nalgebra::Vector3;

pub struct KdTree {
    points: Vec<Vector3<f64>>,
    // flattened binary tree over index ranges
    nodes: Vec<Node>,
    order: Vec<u32>,
    root: usize,
}

struct Node {
    axis: u8,
    split: f64,
    left: usize,
    right: usize,
    // leaf payload: range into `order`
    start: u32,
    end: u32,
}

const LEAF_SIZE: usize = 16;
const NONE: usize = usize::MAX;

impl KdTree {
    pub fn build(points: &[Vector3<f64>]) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        let root = if points.is_empty() {
            NONE
        } else {
            let n = points.len();
            build_node(points, &mut order, &mut nodes, 0, n)
        };
        Self {
            points: points.to_vec(),
            nodes,
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest neighbor: (point index, squared distance).
    pub fn nearest(&self, q: &Vector3<f64>) -> Option<(usize, f64)> {
        if self.root == NONE {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(self.root, q, usize::MAX, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    /// `k` nearest neighbors, optionally excluding one index (for queries from
    /// within the own point set). Sorted by (distance, index).
    pub fn k_nearest(&self, q: &Vector3<f64>, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        if self.root == NONE || k == 0 {
            return Vec::new();
        }
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        self.search_k(self.root, q, exclude.unwrap_or(usize::MAX), k, &mut best);
        best
    }

    fn search(&self, node: usize, q: &Vector3<f64>, exclude: usize, best: &mut (usize, f64)) {
        let n = &self.nodes[node];
        if n.left == NONE {
            for &i in &self.order[n.start as usize..n.end as usize] {
                let i = i as usize;
                if i == exclude {
                    continue;
                }
                let d = (self.points[i] - q).norm_squared();
                if d < best.1 || (d == best.1 && i < best.0) {
                    *best = (i, d);
                }
            }
            return;
        }
        let delta = q[n.axis as usize] - n.split;
        let (near, far) = if delta <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, q, exclude, best);
        if delta * delta <= best.1 {
            self.search(far, q, exclude, best);
        }
    }

    fn search_k(
        &self,
        node: usize,
        q: &Vector3<f64>,
        exclude: usize,
        k: usize,
        best: &mut Vec<(usize, f64)>,
    ) {
        let n = &self.nodes[node];
        if n.left == NONE {
            for &i in &self.order[n.start as usize..n.end as usize] {
                let i = i as usize;
                if i == exclude {
                    continue;
                }
                let d = (self.points[i] - q).norm_squared();
                let entry = (i, d);
                let pos = best
                    .iter()
                    .position(|&(bi, bd)| d < bd || (d == bd && i < bi))
                    .unwrap_or(best.len());
                if pos < k {
                    best.insert(pos, entry);
                    best.truncate(k);
                }
            }
            return;
        }
        let delta = q[n.axis as usize] - n.split;
        let (near, far) = if delta <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search_k(near, q, exclude, k, best);
        let worst = if best.len() < k {
            f64::INFINITY
        } else {
            best[best.len() - 1].1
        };
        if delta * delta <= worst {
            self.search_k(far, q, exclude, k, best);
        }
    }
}

fn build_node(
    points: &[Vector3<f64>],
    order: &mut [u32],
    nodes: &mut Vec<Node>,
    start: usize,
    end: usize,
) -> usize {
    let id = nodes.len();
    nodes.push(Node {
        axis: 0,
        split: 0.0,
        left: NONE,
        right: NONE,
        start: start as u32,
        end: end as u32,
    });
    if end - start <= LEAF_SIZE {
        return id;
    }
    // widest-extent axis
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for &i in &order[start..end] {
        let p = points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let extents = hi - lo;
    let mut axis = 0;
    for a in 1..3 {
        if extents[a] > extents[axis] {
            axis = a;
        }
    }
    if extents[axis] <= 0.0 {
        return id; // all points coincide; stay a leaf
    }
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        let (pa, pb) = (points[a as usize][axis], points[b as usize][axis]);
        pa.total_cmp(&pb).then(a.cmp(&b))
    });
    let split = points[order[mid] as usize][axis];
    let left = build_node(points, order, nodes, start, mid);
    let right = build_node(points, order, nodes, mid, end);
    let n = &mut nodes[id];
    n.axis = axis as u8;
    n.split = split;
    n.left = left;
    n.right = right;
    id
}
