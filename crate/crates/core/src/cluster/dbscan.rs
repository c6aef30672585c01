//! Density-based pre-clustering over cosine distance.

use crate::semantic::cosine;

/// Cosine distance, `1 - cos`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - cosine(a, b)
}

fn neighbourhoods(points: &[Vec<f64>], eps: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut out = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i == j || cosine_distance(&points[i], &points[j]) <= eps {
                out[i].push(j);
            }
        }
    }
    out
}

/// Labels each point with a cluster index, or `None` for noise.
///
/// A point's neighbourhood includes itself, so `min_pts = 1` makes every
/// point a core point. Clusters are numbered in order of their
/// lowest-index core point; a border point joins the first cluster that
/// reaches it.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let hood = neighbourhoods(points, eps);
    let core: Vec<bool> = hood.iter().map(|h| h.len() >= min_pts).collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() || !core[i] {
            continue;
        }
        let c = next;
        next += 1;
        labels[i] = Some(c);
        let mut queue = std::collections::VecDeque::from([i]);
        while let Some(p) = queue.pop_front() {
            for &q in &hood[p] {
                if labels[q].is_none() {
                    labels[q] = Some(c);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    labels
}

/// Data-derived radius: the median over points of each point's
/// 10th-percentile (nearest-rank) cosine distance to the others.
pub fn default_eps(points: &[Vec<f64>]) -> f64 {
    const FLOOR: f64 = 1e-6;
    let n = points.len();
    if n < 2 {
        return 0.5;
    }
    let mut per_point: Vec<f64> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> =
                (0..n).filter(|&j| j != i).map(|j| cosine_distance(&points[i], &points[j])).collect();
            d.sort_by(f64::total_cmp);
            let rank = ((0.1 * d.len() as f64).ceil() as usize).max(1);
            d[rank - 1]
        })
        .collect();
    per_point.sort_by(f64::total_cmp);
    let mid = per_point.len() / 2;
    let median = if per_point.len() % 2 == 1 { per_point[mid] } else { (per_point[mid - 1] + per_point[mid]) / 2.0 };
    median.max(FLOOR)
}
