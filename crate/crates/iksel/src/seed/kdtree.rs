//! Exact k-d tree over 6-D pose keys.
//!
//! Built once in bulk, never mutated. Median splits on the widest-spread
//! dimension keep the tree balanced regardless of how anisotropic the key
//! distribution is. All comparisons use the total order (coordinate, index),
//! and subtrees whose splitting plane ties with the current worst candidate
//! are still visited, so every query returns exactly what a linear scan
//! over the key array would, in the same (distance, index) order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        len: usize,
    },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    nodes: Vec<Node>,
    /// Point indices, permuted so each leaf owns a contiguous slice.
    order: Vec<u32>,
    points: Vec<[f64; 6]>,
    root: usize,
}

/// Max-heap entry: the worst of the current k best sits on top.
#[derive(PartialEq)]
struct HeapItem {
    d2: f64,
    index: u32,
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Keys are finite; distances cannot be NaN.
        self.d2
            .partial_cmp(&other.d2)
            .unwrap()
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn build(points: Vec<[f64; 6]>) -> Self {
        let n = points.len();
        let mut tree = Self {
            nodes: Vec::new(),
            order: (0..n as u32).collect(),
            points,
            root: 0,
        };
        if n > 0 {
            tree.root = tree.build_node(0, n);
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let len = end - start;
        if len <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, len });
            return self.nodes.len() - 1;
        }

        // Split on the dimension with the widest spread in this subset.
        let mut lo = [f64::INFINITY; 6];
        let mut hi = [f64::NEG_INFINITY; 6];
        for &idx in &self.order[start..end] {
            let p = &self.points[idx as usize];
            for d in 0..6 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let mut dim = 0;
        let mut best = hi[0] - lo[0];
        for d in 1..6 {
            let spread = hi[d] - lo[d];
            if spread > best {
                best = spread;
                dim = d;
            }
        }

        let mid = len / 2;
        let points = &self.points;
        let order = &mut self.order;
        order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            let ka = points[a as usize][dim];
            let kb = points[b as usize][dim];
            ka.partial_cmp(&kb).unwrap().then(a.cmp(&b))
        });
        let value = self.points[self.order[start + mid] as usize][dim];

        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start: 0, len: 0 }); // placeholder
        let left = self.build_node(start, start + mid);
        let right = self.build_node(start + mid, end);
        self.nodes[slot] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        slot
    }

    /// The `k` nearest points to `query`, as `(index, squared distance)`
    /// sorted ascending by `(squared distance, index)`. Identical to a
    /// linear scan with the same ordering.
    pub fn k_nearest(&self, query: &[f64; 6], k: usize) -> Vec<(u32, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root, query, k, &mut heap);
        let mut out: Vec<(u32, f64)> = heap.into_iter().map(|h| (h.index, h.d2)).collect();
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    fn search(&self, node: usize, query: &[f64; 6], k: usize, heap: &mut BinaryHeap<HeapItem>) {
        match self.nodes[node] {
            Node::Leaf { start, len } => {
                for &idx in &self.order[start..start + len] {
                    let d2 = squared_distance(&self.points[idx as usize], query);
                    let item = HeapItem { d2, index: idx };
                    if heap.len() < k {
                        heap.push(item);
                    } else if item < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(item);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, heap);
                // Prune the far side only when the plane is strictly farther
                // than the current worst; ties must still be examined so
                // that index-order tie-breaking matches the linear scan.
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.search(far, query, k, heap);
                }
            }
        }
    }

    /// Every point with squared distance at most `delta_sq`, sorted
    /// ascending by `(squared distance, index)`.
    pub fn within(&self, query: &[f64; 6], delta_sq: f64) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        if !self.points.is_empty() && delta_sq >= 0.0 {
            self.collect_within(self.root, query, delta_sq, &mut out);
            out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        }
        out
    }

    fn collect_within(
        &self,
        node: usize,
        query: &[f64; 6],
        delta_sq: f64,
        out: &mut Vec<(u32, f64)>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, len } => {
                for &idx in &self.order[start..start + len] {
                    let d2 = squared_distance(&self.points[idx as usize], query);
                    if d2 <= delta_sq {
                        out.push((idx, d2));
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = query[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.collect_within(near, query, delta_sq, out);
                if diff * diff <= delta_sq {
                    self.collect_within(far, query, delta_sq, out);
                }
            }
        }
    }
}

fn squared_distance(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    let mut acc = 0.0;
    for i in 0..6 {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}
