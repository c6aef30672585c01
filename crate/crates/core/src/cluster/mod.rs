//! Feature fusion and final grouping.
//!
//! Semantic vectors are pre-clustered with DBSCAN; the labels are one-hot
//! encoded and appended to a PCA projection of the path matrix. The fused
//! rows are grouped by constrained average linkage, choosing the cluster
//! count with the best silhouette.

pub mod agglomerative;
pub mod dbscan;
pub mod pca;
pub mod silhouette;

use serde::{Deserialize, Serialize};

pub use agglomerative::{average_linkage, Dendrogram};
pub use dbscan::{dbscan, default_eps};
pub use pca::{pca_auto, pca_project, Projection};
pub use silhouette::{silhouette, SingleCluster};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Pairs with structural distance above this never share a group.
    pub tau: f64,
    /// `None` derives the radius from the data, see [`default_eps`].
    pub dbscan_eps: Option<f64>,
    pub dbscan_min_pts: usize,
    pub pca_dims: usize,
    pub evr_floor: f64,
    /// Inclusive bounds on the group count; `None` uses
    /// `[2, min(N - 1, 2 * subspecs)]`.
    pub k_range: Option<(usize, usize)>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { tau: 15.0, dbscan_eps: None, dbscan_min_pts: 2, pca_dims: 20, evr_floor: 0.97, k_range: None }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau > 0.0) {
            return Err(format!("tau must be positive, got {}", self.tau));
        }
        if self.dbscan_eps.is_some_and(|e| !(e > 0.0)) {
            return Err("dbscan_eps must be positive".into());
        }
        if self.dbscan_min_pts == 0 || self.pca_dims == 0 {
            return Err("dbscan_min_pts and pca_dims must be positive".into());
        }
        if !(self.evr_floor > 0.0 && self.evr_floor <= 1.0) {
            return Err(format!("evr_floor must be in (0, 1], got {}", self.evr_floor));
        }
        if let Some((lo, hi)) = self.k_range {
            if lo == 0 || lo > hi {
                return Err(format!("k_range [{lo}, {hi}] is empty"));
            }
        }
        Ok(())
    }

    /// Resolved `k_range` for `n` points and `subspecs` sub-specifications.
    pub fn k_bounds(&self, n: usize, subspecs: usize) -> (usize, usize) {
        self.k_range.unwrap_or((2, n.saturating_sub(1).min(2 * subspecs)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClusterError {
    #[error("{what} has {got} rows, expected {expected}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
}

/// Concatenates the projection with a one-hot block. Each DBSCAN cluster
/// gets one column and each noise point its own column, assigned in order
/// of first appearance. Returns the fused rows and the one-hot width.
pub fn fuse(semantic_labels: &[Option<usize>], projected: &[Vec<f64>]) -> (Vec<Vec<f64>>, usize) {
    let mut assigned: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut k = 0;
    let mut column = Vec::with_capacity(semantic_labels.len());
    for l in semantic_labels {
        let c = match l {
            Some(c) => *assigned.entry(*c).or_insert_with(|| {
                k += 1;
                k - 1
            }),
            None => {
                k += 1;
                k - 1
            }
        };
        column.push(c);
    }
    let fused = projected
        .iter()
        .zip(&column)
        .map(|(row, &c)| {
            let mut r = row.clone();
            let mut hot = vec![0.0; k];
            hot[c] = 1.0;
            r.extend(hot);
            r
        })
        .collect();
    (fused, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalGroups {
    pub labels: Vec<usize>,
    pub k: usize,
    pub silhouette: Option<f64>,
    /// The constraints allowed no cluster count inside the requested range.
    pub infeasible_k: bool,
}

/// Groups fused rows, never joining a pair with `sd > tau`, and picks the
/// count in `[lo, hi]` with the highest silhouette (smaller count on ties).
pub fn final_cluster(fused: &[Vec<f64>], sd: &[Vec<f64>], tau: f64, (lo, hi): (usize, usize)) -> Result<FinalGroups, ClusterError> {
    let n = fused.len();
    if sd.len() != n {
        return Err(ClusterError::ShapeMismatch { what: "sd matrix", expected: n, got: sd.len() });
    }
    if n == 0 {
        return Ok(FinalGroups { labels: Vec::new(), k: 0, silhouette: None, infeasible_k: false });
    }
    let tree = average_linkage(fused, |i, j| sd[i][j] > tau);
    let min_k = tree.min_clusters();
    let mut best: Option<(usize, f64)> = None;
    for k in lo.max(min_k)..=hi.min(n) {
        let labels = tree.cut(k).expect("k within feasible range");
        let s = silhouette(fused, labels).ok();
        let score = s.unwrap_or(f64::NEG_INFINITY);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((k, score));
        }
    }
    let (k, infeasible_k) = match best {
        Some((k, _)) => (k, false),
        None => (min_k.max(lo.min(n)), min_k > hi),
    };
    let labels = tree.cut(k).expect("chosen k is feasible").to_vec();
    let silhouette = silhouette(fused, &labels).ok();
    if infeasible_k {
        log::warn!("constraints need at least {min_k} groups, above the requested maximum {hi}");
    }
    Ok(FinalGroups { labels, k, silhouette, infeasible_k })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub k: usize,
    pub silhouette: Option<f64>,
    pub semantic_labels: Vec<Option<usize>>,
    /// Width of the one-hot block.
    pub one_hot: usize,
    pub fused: Vec<Vec<f64>>,
    pub pca_dims: usize,
    pub evr: f64,
    pub eps: f64,
    pub pca_degenerate: bool,
    pub infeasible_k: bool,
}

impl ClusterResult {
    pub fn evr_below(&self, floor: f64) -> bool {
        self.evr < floor
    }

    /// Member indices per group, groups in label order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            g[l].push(i);
        }
        g
    }
}

/// Full fusion pipeline over `n` assertions: semantic rows, padded path
/// rows and the structural distance matrix.
pub fn cluster(
    semantic: &[Vec<f64>],
    paths: &[Vec<u32>],
    sd: &[Vec<f64>],
    cfg: &FusionConfig,
    subspecs: usize,
) -> Result<ClusterResult, ClusterError> {
    let n = semantic.len();
    for (what, got) in [("path matrix", paths.len()), ("sd matrix", sd.len())] {
        if got != n {
            return Err(ClusterError::ShapeMismatch { what, expected: n, got });
        }
    }
    let eps = cfg.dbscan_eps.unwrap_or_else(|| default_eps(semantic));
    let semantic_labels = dbscan(semantic, eps, cfg.dbscan_min_pts);
    let q: Vec<Vec<f64>> = paths.iter().map(|r| r.iter().map(|&x| f64::from(x)).collect()).collect();
    let proj = pca_auto(&q, cfg.pca_dims, cfg.evr_floor);
    if proj.degenerate && n > 1 {
        log::warn!("path matrix has no variance; structural block is zero");
    } else if proj.evr < cfg.evr_floor {
        log::warn!("explained variance {:.4} below floor {}", proj.evr, cfg.evr_floor);
    }
    let (fused, one_hot) = fuse(&semantic_labels, &proj.rows);
    let groups = final_cluster(&fused, sd, cfg.tau, cfg.k_bounds(n, subspecs))?;
    Ok(ClusterResult {
        labels: groups.labels,
        k: groups.k,
        silhouette: groups.silhouette,
        semantic_labels,
        one_hot,
        fused,
        pca_dims: proj.dims,
        evr: proj.evr,
        eps,
        pca_degenerate: proj.degenerate,
        infeasible_k: groups.infeasible_k,
    })
}

#[derive(Debug, Serialize)]
struct ClustersDoc<'a> {
    schema: &'static str,
    assertion_ids: &'a [String],
    labels: &'a [usize],
    k: usize,
    silhouette: Option<f64>,
    semantic_labels: Vec<i64>,
    evr: f64,
    pca_dims: usize,
    eps: f64,
    pca_degenerate: bool,
    infeasible_k: bool,
}

/// `clusters/v1` document; noise is written as `-1`.
pub fn clusters_json(result: &ClusterResult, assertion_ids: &[String]) -> serde_json::Value {
    serde_json::to_value(ClustersDoc {
        schema: "clusters/v1",
        assertion_ids,
        labels: &result.labels,
        k: result.k,
        silhouette: result.silhouette,
        semantic_labels: result.semantic_labels.iter().map(|l| l.map_or(-1, |c| c as i64)).collect(),
        evr: result.evr,
        pca_dims: result.pca_dims,
        eps: result.eps,
        pca_degenerate: result.pca_degenerate,
        infeasible_k: result.infeasible_k,
    })
    .expect("cluster document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fused_width_is_dims_plus_k() {
        let labels = vec![Some(0), Some(1), Some(2), Some(0)];
        let proj = vec![vec![0.0; 20]; 4];
        let (fused, k) = fuse(&labels, &proj);
        assert_eq!(k, 3);
        assert!(fused.iter().all(|r| r.len() == 23));
    }

    #[test]
    fn noise_gets_singleton_columns() {
        let (fused, k) = fuse(&[None; 4], &vec![vec![]; 4]);
        assert_eq!(k, 4);
        for (i, r) in fused.iter().enumerate() {
            let mut e = vec![0.0; 4];
            e[i] = 1.0;
            assert_eq!(r, &e);
        }
    }

    #[test]
    fn columns_follow_first_appearance() {
        let (fused, _) = fuse(&[Some(5), None, Some(2), Some(5)], &vec![vec![]; 4]);
        assert_eq!(fused[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(fused[1], vec![0.0, 1.0, 0.0]);
        assert_eq!(fused[2], vec![0.0, 0.0, 1.0]);
        assert_eq!(fused[3], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn separated_clouds() {
        let pts = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1], vec![9.0, 9.0], vec![9.1, 9.0], vec![9.0, 9.1]];
        let sd = vec![vec![1.0; 6]; 6];
        let g = final_cluster(&pts, &sd, 15.0, (2, 5)).unwrap();
        assert_eq!(g.k, 2);
        assert_eq!(g.labels, vec![0, 0, 0, 1, 1, 1]);
        assert!(g.silhouette.unwrap() > 0.9);
    }

    #[test]
    fn tau_splits_identical_rows() {
        let pts = vec![vec![1.0, 1.0]; 3];
        let mut sd = vec![vec![0.0; 3]; 3];
        sd[0][1] = 20.0;
        sd[1][0] = 20.0;
        let g = final_cluster(&pts, &sd, 15.0, (1, 2)).unwrap();
        assert_ne!(g.labels[0], g.labels[1]);
    }

    #[test]
    fn infeasible_range_flagged() {
        let pts = vec![vec![0.0]; 3];
        let sd = vec![vec![20.0; 3]; 3];
        let g = final_cluster(&pts, &sd, 15.0, (1, 2)).unwrap();
        assert!(g.infeasible_k);
        assert_eq!(g.k, 3);
    }
}
