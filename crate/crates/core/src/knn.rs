//! Exact nearest-neighbour queries under the max-norm.
//!
//! Every point carries a group id. k-NN queries skip points of the query's own group,
//! which lets bootstrap resamples treat repeated copies of one observation as the
//! observation itself.

/// Max-norm distance.
#[inline]
pub fn chebyshev<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..D {
        d = d.max((a[i] - b[i]).abs());
    }
    d
}

const LEAF: usize = 12;

#[derive(Clone, Debug)]
struct Node<const D: usize> {
    lo: usize,
    hi: usize,
    lower: [f64; D],
    upper: [f64; D],
    children: Option<(usize, usize)>,
}

impl<const D: usize> Node<D> {
    /// Smallest max-norm distance from `q` to the node's box.
    #[inline]
    fn min_dist(&self, q: &[f64; D]) -> f64 {
        let mut d = 0.0f64;
        for i in 0..D {
            d = d.max(self.lower[i] - q[i]).max(q[i] - self.upper[i]);
        }
        d
    }

    /// Largest max-norm distance from `q` to any corner of the node's box.
    #[inline]
    fn max_dist(&self, q: &[f64; D]) -> f64 {
        let mut d = 0.0f64;
        for i in 0..D {
            d = d.max((q[i] - self.lower[i]).abs()).max((self.upper[i] - q[i]).abs());
        }
        d
    }
}

/// Static k-d tree over `D`-dimensional points.
#[derive(Clone, Debug)]
pub struct KdTree<const D: usize> {
    pts: Vec<[f64; D]>,
    groups: Vec<u32>,
    nodes: Vec<Node<D>>,
}

impl<const D: usize> KdTree<D> {
    /// Every point in its own group.
    pub fn new(points: &[[f64; D]]) -> Self {
        let groups: Vec<u32> = (0..points.len() as u32).collect();
        Self::with_groups(points, &groups)
    }

    pub fn with_groups(points: &[[f64; D]], groups: &[u32]) -> Self {
        assert_eq!(points.len(), groups.len());
        let mut items: Vec<([f64; D], u32)> =
            points.iter().copied().zip(groups.iter().copied()).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF + 1);
        if !items.is_empty() {
            build(&mut items, 0, &mut nodes);
        }
        let (pts, groups) = items.into_iter().unzip();
        KdTree { pts, groups, nodes }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Distance to the `k`-th nearest point outside group `exclude`.
    /// Infinite when fewer than `k` such points exist.
    pub fn kth_distance(&self, q: &[f64; D], exclude: u32, k: usize) -> f64 {
        assert!(k >= 1);
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best = vec![f64::INFINITY; k];
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.min_dist(q) >= best[k - 1] {
                continue;
            }
            match node.children {
                None => {
                    for j in node.lo..node.hi {
                        if self.groups[j] == exclude {
                            continue;
                        }
                        let d = chebyshev(q, &self.pts[j]);
                        if d < best[k - 1] {
                            let mut pos = k - 1;
                            while pos > 0 && best[pos - 1] > d {
                                best[pos] = best[pos - 1];
                                pos -= 1;
                            }
                            best[pos] = d;
                        }
                    }
                }
                Some((l, r)) => {
                    let (dl, dr) = (self.nodes[l].min_dist(q), self.nodes[r].min_dist(q));
                    // nearer child popped first
                    if dl <= dr {
                        stack.push(r);
                        stack.push(l);
                    } else {
                        stack.push(l);
                        stack.push(r);
                    }
                }
            }
        }
        best[k - 1]
    }

    /// Number of points with distance strictly below `eps`, including any at `q` itself.
    pub fn count_within(&self, q: &[f64; D], eps: f64) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut count = 0;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.min_dist(q) >= eps {
                continue;
            }
            if node.max_dist(q) < eps {
                count += node.hi - node.lo;
                continue;
            }
            match node.children {
                None => {
                    count += self.pts[node.lo..node.hi]
                        .iter()
                        .filter(|p| chebyshev(q, p) < eps)
                        .count();
                }
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        count
    }
}

fn build<const D: usize>(items: &mut [([f64; D], u32)], offset: usize, nodes: &mut Vec<Node<D>>) -> usize {
    let mut lower = [f64::INFINITY; D];
    let mut upper = [f64::NEG_INFINITY; D];
    for (p, _) in items.iter() {
        for i in 0..D {
            lower[i] = lower[i].min(p[i]);
            upper[i] = upper[i].max(p[i]);
        }
    }
    let id = nodes.len();
    nodes.push(Node {
        lo: offset,
        hi: offset + items.len(),
        lower,
        upper,
        children: None,
    });
    if items.len() > LEAF {
        let dim = (0..D)
            .max_by(|&a, &b| (upper[a] - lower[a]).total_cmp(&(upper[b] - lower[b])))
            .unwrap_or(0);
        let mid = items.len() / 2;
        items.select_nth_unstable_by(mid, |a, b| a.0[dim].total_cmp(&b.0[dim]));
        let (left, right) = items.split_at_mut(mid);
        let l = build(left, offset, nodes);
        let r = build(right, offset + mid, nodes);
        nodes[id].children = Some((l, r));
    }
    id
}

/// Sorted copy of one coordinate for 1-D strict range counts.
#[derive(Clone, Debug)]
pub struct SortedAxis {
    values: Vec<f64>,
}

impl SortedAxis {
    pub fn new(values: &[f64]) -> Self {
        let mut values = values.to_vec();
        values.sort_unstable_by(f64::total_cmp);
        SortedAxis { values }
    }

    /// Number of values `v` with `|v - x| < eps`.
    pub fn count_within(&self, x: f64, eps: f64) -> usize {
        let hi = self.values.partition_point(|&v| v < x + eps);
        let lo = self.values.partition_point(|&v| v <= x - eps);
        hi.saturating_sub(lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_kth<const D: usize>(pts: &[[f64; D]], groups: &[u32], q: &[f64; D], ex: u32, k: usize) -> f64 {
        let mut d: Vec<f64> = pts
            .iter()
            .zip(groups)
            .filter(|(_, &g)| g != ex)
            .map(|(p, _)| chebyshev(q, p))
            .collect();
        d.sort_by(f64::total_cmp);
        d.get(k - 1).copied().unwrap_or(f64::INFINITY)
    }

    #[test]
    fn small_example() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0]];
        let t = KdTree::new(&pts);
        assert_eq!(t.kth_distance(&pts[0], 0, 1), 1.0);
        assert_eq!(t.kth_distance(&pts[0], 0, 2), 2.0);
        assert_eq!(t.kth_distance(&pts[0], 0, 4), f64::INFINITY);
        assert_eq!(t.count_within(&pts[0], 2.0), 2);
        assert_eq!(t.count_within(&pts[0], 2.0 + 1e-12), 3);
    }

    #[test]
    fn sorted_axis_is_strict() {
        let ax = SortedAxis::new(&[0.0, 1.0, 1.0, 2.0, 3.0]);
        assert_eq!(ax.count_within(1.0, 1.0), 2);
        assert_eq!(ax.count_within(1.0, 1.5), 4);
        assert_eq!(ax.count_within(10.0, 1.0), 0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, 0u32..40), 1..200),
            k in 1usize..6,
            eps in 0.01f64..3.0,
        ) {
            let pts: Vec<[f64; 3]> = raw.iter().map(|r| [r.0, r.1, r.2]).collect();
            let groups: Vec<u32> = raw.iter().map(|r| r.3).collect();
            let t = KdTree::with_groups(&pts, &groups);
            for (q, &g) in pts.iter().zip(&groups).take(20) {
                prop_assert_eq!(t.kth_distance(q, g, k), brute_kth(&pts, &groups, q, g, k));
                let n = pts.iter().filter(|p| chebyshev(q, p) < eps).count();
                prop_assert_eq!(t.count_within(q, eps), n);
            }
        }
    }
}
