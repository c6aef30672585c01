//! Principal-component projection of the structural path matrix.

use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// N rows of `dims` component scores.
    pub rows: Vec<Vec<f64>>,
    pub dims: usize,
    pub evr: f64,
    /// All rows identical (or fewer than two rows): scores are zero and
    /// `evr` is reported as 1.0.
    pub degenerate: bool,
}

/// Per-column z-scores with population standard deviation; zero-variance
/// columns become zero.
pub fn standardize(data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; d]; n];
    for c in 0..d {
        let mean = data.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        let var = data.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if sd > 1e-12 {
            for (o, r) in out.iter_mut().zip(data) {
                o[c] = (r[c] - mean) / sd;
            }
        }
    }
    out
}

struct Components {
    /// Eigenvalues, descending.
    values: Vec<f64>,
    /// Matching unit eigenvectors, sign-fixed.
    vectors: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
}

fn components(data: &[Vec<f64>]) -> Components {
    let n = data.len();
    let z = standardize(data);
    let d = z.first().map_or(0, Vec::len);
    let zm = DMatrix::from_fn(n, d, |i, j| z[i][j]);
    let cov = (zm.transpose() * &zm) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    Components { values, vectors, z }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn degenerate(n: usize, dims: usize) -> Projection {
    Projection { rows: vec![vec![0.0; dims]; n], dims, evr: 1.0, degenerate: true }
}

fn project(c: &Components, dims: usize) -> Projection {
    let total: f64 = c.values.iter().sum();
    let kept: f64 = c.values[..dims].iter().sum();
    let rows = c
        .z
        .iter()
        .map(|r| c.vectors[..dims].iter().map(|v| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect())
        .collect();
    Projection { rows, dims, evr: kept / total, degenerate: false }
}

/// Largest usable component count, `min(N - 1, D)`.
pub fn max_dims(n: usize, d: usize) -> usize {
    n.saturating_sub(1).min(d)
}

/// Projects onto the top `dims` components. `dims` is clamped to
/// [`max_dims`].
pub fn pca_project(data: &[Vec<f64>], dims: usize) -> Projection {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    let dims = dims.min(max_dims(n, d));
    if n < 2 || dims == 0 {
        return degenerate(n, dims);
    }
    let c = components(data);
    if c.values.iter().sum::<f64>() <= 1e-12 {
        return degenerate(n, dims);
    }
    project(&c, dims)
}

/// Starts at `dims` and adds components one at a time until the
/// explained variance reaches `floor` or no components remain.
pub fn pca_auto(data: &[Vec<f64>], dims: usize, floor: f64) -> Projection {
    let n = data.len();
    let d = data.first().map_or(0, Vec::len);
    let cap = max_dims(n, d);
    let mut dims = dims.clamp(1, cap.max(1)).min(cap);
    if n < 2 || dims == 0 {
        return degenerate(n, dims);
    }
    let c = components(data);
    if c.values.iter().sum::<f64>() <= 1e-12 {
        return degenerate(n, dims);
    }
    let mut p = project(&c, dims);
    while p.evr < floor && dims < cap {
        dims += 1;
        p = project(&c, dims);
    }
    p
}
