//! Mean silhouette over Euclidean distance.

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("silhouette needs at least two clusters")]
pub struct SingleCluster;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Points in singleton clusters score 0, as do points with `a = b = 0`.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize]) -> Result<f64, SingleCluster> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(SingleCluster);
    }
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = labels[i];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += euclidean(&points[i], &points[j]);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_clusters_score_one() {
        let p = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![5.0, 5.0], vec![5.0, 5.0]];
        assert_eq!(silhouette(&p, &[0, 0, 1, 1]), Ok(1.0));
    }

    #[test]
    fn identical_points_score_zero() {
        let p = vec![vec![1.0]; 4];
        assert_eq!(silhouette(&p, &[0, 1, 0, 1]), Ok(0.0));
    }

    #[test]
    fn one_cluster_is_an_error() {
        assert_eq!(silhouette(&[vec![0.0], vec![1.0]], &[0, 0]), Err(SingleCluster));
    }

    #[test]
    fn thin_rectangle() {
        // corners (0,0),(10,0),(0,1),(10,1), clusters along the long side
        let p = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![0.0, 1.0], vec![10.0, 1.0]];
        let s = silhouette(&p, &[0, 0, 1, 1]).unwrap();
        // a = 10, b = (1 + sqrt(101)) / 2 for every point
        let b = (1.0 + 101f64.sqrt()) / 2.0;
        assert!((s - (b - 10.0) / 10.0).abs() < 1e-12);
    }
}
