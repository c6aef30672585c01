//! Average-linkage agglomerative clustering with cannot-link pairs.

use super::silhouette::euclidean;

/// Successive partitions produced by merging, starting from singletons.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    /// `levels[m]` is the labelling after `m` merges.
    levels: Vec<Vec<usize>>,
}

impl Dendrogram {
    /// Smallest cluster count reachable without breaking a constraint.
    pub fn min_clusters(&self) -> usize {
        let n = self.levels[0].len();
        n - (self.levels.len() - 1)
    }

    /// Labelling with exactly `k` clusters, if reachable.
    pub fn cut(&self, k: usize) -> Option<&[usize]> {
        let n = self.levels[0].len();
        if k == 0 || k > n || k < self.min_clusters() {
            return None;
        }
        Some(&self.levels[n - k])
    }
}

/// Relabels so cluster ids follow the order of each cluster's first member.
pub fn canonical_labels(groups: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut order: Vec<&Vec<usize>> = groups.iter().collect();
    order.sort_by_key(|g| g[0]);
    let mut labels = vec![0; n];
    for (c, g) in order.iter().enumerate() {
        for &i in g.iter() {
            labels[i] = c;
        }
    }
    labels
}

/// Merges the closest permitted pair (average Euclidean distance between
/// members) until no permitted pair remains. `forbidden(i, j)` marks
/// points that may never share a cluster. Exact ties go to the pair whose
/// first members come first.
pub fn average_linkage(points: &[Vec<f64>], forbidden: impl Fn(usize, usize) -> bool) -> Dendrogram {
    let n = points.len();
    let dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| euclidean(&points[i], &points[j])).collect()).collect();
    // groups kept sorted by first member; members kept ascending
    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut levels = vec![canonical_labels(&groups, n)];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let blocked = groups[a].iter().any(|&i| groups[b].iter().any(|&j| forbidden(i, j)));
                if blocked {
                    continue;
                }
                let sum: f64 = groups[a].iter().flat_map(|&i| groups[b].iter().map(move |&j| (i, j))).map(|(i, j)| dist[i][j]).sum();
                let avg = sum / (groups[a].len() * groups[b].len()) as f64;
                if best.is_none_or(|(d, _, _)| avg < d) {
                    best = Some((avg, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { break };
        let moved = groups.remove(b);
        groups[a].extend(moved);
        groups[a].sort_unstable();
        levels.push(canonical_labels(&groups, n));
    }
    Dendrogram { levels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_nearest_first() {
        let p = vec![vec![0.0], vec![1.0], vec![10.0], vec![10.5]];
        let d = average_linkage(&p, |_, _| false);
        assert_eq!(d.cut(4).unwrap(), &[0, 1, 2, 3]);
        assert_eq!(d.cut(3).unwrap(), &[0, 1, 2, 2]);
        assert_eq!(d.cut(2).unwrap(), &[0, 0, 1, 1]);
        assert_eq!(d.cut(1).unwrap(), &[0, 0, 0, 0]);
    }

    #[test]
    fn cannot_link_respected() {
        let p = vec![vec![0.0], vec![0.0], vec![0.0]];
        let d = average_linkage(&p, |i, j| (i, j) == (0, 1) || (i, j) == (1, 0));
        assert_eq!(d.min_clusters(), 2);
        assert!(d.cut(1).is_none());
        let l = d.cut(2).unwrap();
        assert_ne!(l[0], l[1]);
    }
}
