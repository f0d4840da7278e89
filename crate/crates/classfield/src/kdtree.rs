//! kd-tree for nearest-neighbour queries under ℓᵖ norms.
//!
//! Each node stores the bounding box of its subtree; pruning compares the
//! query's distance to the box, which lower-bounds its distance to every
//! point inside for any p >= 1. On clustered point sets this prunes far
//! more than the split-plane gap alone.

use crate::linalg::dist_p;
use crate::scalar::Scalar;

struct Node<S> {
    axis: usize,
    split: f64,
    point: usize,
    lo: Box<[S]>,
    hi: Box<[S]>,
    left: Option<Box<Node<S>>>,
    right: Option<Box<Node<S>>>,
}

pub struct KdTree<S> {
    points: Vec<Vec<S>>,
    root: Option<Box<Node<S>>>,
}

/// Distance from `q` to the axis-aligned box `[lo, hi]`: the distance to
/// the clamped point, zero when `q` is inside.
fn box_gap<S: Scalar>(q: &[S], lo: &[S], hi: &[S], p: f64) -> S {
    let clamped: Vec<S> = q
        .iter()
        .zip(lo.iter().zip(hi.iter()))
        .map(|(&x, (&a, &b))| {
            if x < a {
                a
            } else if x > b {
                b
            } else {
                x
            }
        })
        .collect();
    dist_p(q, &clamped, p)
}

impl<S: Scalar> KdTree<S> {
    pub fn build(points: &[Vec<S>]) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let dim = points.first().map_or(0, |p| p.len());
        let root = if points.is_empty() {
            None
        } else {
            Some(Self::build_node(points, &mut idx, 0, dim))
        };
        KdTree {
            points: points.to_vec(),
            root,
        }
    }

    fn build_node(points: &[Vec<S>], idx: &mut [usize], depth: usize, dim: usize) -> Box<Node<S>> {
        let axis = depth % dim;
        let mut lo = points[idx[0]].clone().into_boxed_slice();
        let mut hi = lo.clone();
        for &i in idx.iter().skip(1) {
            for (a, &x) in points[i].iter().enumerate() {
                if x < lo[a] {
                    lo[a] = x;
                }
                if x > hi[a] {
                    hi[a] = x;
                }
            }
        }
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .partial_cmp(&points[b][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let point = idx[mid];
        let split = points[point][axis].f64();
        let (lo_idx, rest) = idx.split_at_mut(mid);
        let hi_idx = &mut rest[1..];
        Box::new(Node {
            axis,
            split,
            point,
            lo,
            hi,
            left: if lo_idx.is_empty() {
                None
            } else {
                Some(Self::build_node(points, lo_idx, depth + 1, dim))
            },
            right: if hi_idx.is_empty() {
                None
            } else {
                Some(Self::build_node(points, hi_idx, depth + 1, dim))
            },
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and ℓᵖ distance of the nearest stored point to `q`.
    pub fn nearest(&self, q: &[S], p: f64) -> (usize, S) {
        self.nearest_seeded(q, p, None)
    }

    /// Nearest point, seeded with a candidate index (e.g. the neighbour of
    /// a nearby previous query) so the search opens with a tight radius.
    pub fn nearest_seeded(&self, q: &[S], p: f64, hint: Option<usize>) -> (usize, S) {
        let mut best = hint.map(|i| (i, dist_p(q, &self.points[i], p)));
        if let Some(root) = &self.root {
            self.search(root, q, p, &|_| true, &mut best);
        }
        best.expect("nearest on empty tree")
    }

    /// Nearest point whose index passes `keep` (used e.g. to skip the query
    /// point itself when it belongs to the tree).
    pub fn nearest_where(
        &self,
        q: &[S],
        p: f64,
        keep: impl Fn(usize) -> bool,
    ) -> Option<(usize, S)> {
        let mut best: Option<(usize, S)> = None;
        if let Some(root) = &self.root {
            self.search(root, q, p, &keep, &mut best);
        }
        best
    }

    /// True if some stored point passing `keep` lies strictly within `cap`
    /// of `q`. Returns on the first hit, so sup-inf scans (Hausdorff,
    /// covering radius) can skip queries that cannot raise a running max.
    pub fn any_within_where(
        &self,
        q: &[S],
        p: f64,
        cap: S,
        keep: impl Fn(usize) -> bool,
    ) -> bool {
        match &self.root {
            Some(root) if cap > S::zero() => self.probe(root, q, p, cap, &keep),
            _ => false,
        }
    }

    fn probe(
        &self,
        node: &Node<S>,
        q: &[S],
        p: f64,
        cap: S,
        keep: &impl Fn(usize) -> bool,
    ) -> bool {
        if box_gap(q, &node.lo, &node.hi, p) >= cap {
            return false;
        }
        if keep(node.point) && dist_p(q, &self.points[node.point], p) < cap {
            return true;
        }
        let (first, second) = if q[node.axis].f64() < node.split {
            (&node.left, &node.right)
        } else {
            (&node.right, &node.left)
        };
        if let Some(n) = first {
            if self.probe(n, q, p, cap, keep) {
                return true;
            }
        }
        if let Some(n) = second {
            if self.probe(n, q, p, cap, keep) {
                return true;
            }
        }
        false
    }

    fn search(
        &self,
        node: &Node<S>,
        q: &[S],
        p: f64,
        keep: &impl Fn(usize) -> bool,
        best: &mut Option<(usize, S)>,
    ) {
        if let Some((_, bd)) = best {
            if box_gap(q, &node.lo, &node.hi, p) > *bd {
                return;
            }
        }
        if keep(node.point) {
            let d = dist_p(q, &self.points[node.point], p);
            if best.map_or(true, |(_, bd)| d < bd) {
                *best = Some((node.point, d));
            }
        }
        let (first, second) = if q[node.axis].f64() < node.split {
            (&node.left, &node.right)
        } else {
            (&node.right, &node.left)
        };
        if let Some(n) = first {
            self.search(n, q, p, keep, best);
        }
        if let Some(n) = second {
            self.search(n, q, p, keep, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn brute<S: Scalar>(pts: &[Vec<S>], q: &[S], p: f64) -> (usize, S) {
        let mut best = (0, dist_p(q, &pts[0], p));
        for (i, pt) in pts.iter().enumerate().skip(1) {
            let d = dist_p(q, pt, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = SeedStream::new(11);
        for &p in &[1.0, 2.0, f64::INFINITY] {
            let pts: Vec<Vec<f64>> = (0..500)
                .map(|_| (0..3).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
                .collect();
            let tree = KdTree::build(&pts);
            let mut hint = None;
            for _ in 0..200 {
                let q: Vec<f64> = (0..3).map(|_| rng.uniform_in(-1.2, 1.2)).collect();
                let (it, dt) = tree.nearest_seeded(&q, p, hint);
                hint = Some(it);
                let (_, db) = brute(&pts, &q, p);
                assert!((dt - db).abs() < 1e-12, "p={p}: {dt} vs {db}");
            }
        }
    }

    #[test]
    fn bounded_probe_matches_brute_force() {
        let mut rng = SeedStream::new(12);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..2).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let tree = KdTree::build(&pts);
        for _ in 0..300 {
            let q: Vec<f64> = (0..2).map(|_| rng.uniform_in(-1.2, 1.2)).collect();
            let cap = rng.uniform_in(0.0, 0.3);
            let (_, db) = brute(&pts, &q, 2.0);
            assert_eq!(tree.any_within_where(&q, 2.0, cap, |_| true), db < cap);
        }
    }

    #[test]
    fn self_exclusion() {
        let pts = vec![vec![0.0f64, 0.0], vec![1.0, 0.0], vec![3.0, 0.0]];
        let tree = KdTree::build(&pts);
        let (i, d) = tree.nearest_where(&pts[0], 2.0, |j| j != 0).unwrap();
        assert_eq!(i, 1);
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_point() {
        let pts = vec![vec![2.0f64, 3.0]];
        let tree = KdTree::build(&pts);
        let (i, d) = tree.nearest(&[2.0, 4.0], 2.0);
        assert_eq!(i, 0);
        assert!((d - 1.0).abs() < 1e-15);
    }
}
