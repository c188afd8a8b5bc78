//! Exact K-nearest-neighbor search.
//!
//! Distances are compared as squared Euclidean distances; equal distances
//! are ordered by ascending point index. The query point itself is never
//! its own neighbor.

use crate::cloud::{dist2, PointCloud};
use crate::error::{Error, Result};

/// `k` neighbor indices per query point, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborIndex {
    k: usize,
    indices: Vec<u32>,
}

impl NeighborIndex {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.indices.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Neighbors of `query`, nearest first.
    pub fn neighbors(&self, query: usize) -> &[u32] {
        &self.indices[query * self.k..(query + 1) * self.k]
    }

    pub fn from_rows(k: usize, rows: Vec<Vec<u32>>) -> Self {
        let indices = rows.into_iter().flat_map(|r| {
            assert_eq!(r.len(), k);
            r
        });
        NeighborIndex {
            k,
            indices: indices.collect(),
        }
    }
}

/// Brute-force KNN with partial selection per query.
pub fn knn(cloud: &PointCloud, k: usize) -> Result<NeighborIndex> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "k = {k} neighbors requested for a cloud of {n} points (need 1 <= k <= N-1)"
        )));
    }
    let pts = cloud.points();
    let mut indices = Vec::with_capacity(n * k);
    let mut scratch: Vec<(f64, u32)> = Vec::with_capacity(n - 1);
    for (q, &p) in pts.iter().enumerate() {
        scratch.clear();
        scratch.extend(
            pts.iter()
                .enumerate()
                .filter(|&(j, _)| j != q)
                .map(|(j, &o)| (dist2(p, o), j as u32)),
        );
        let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scratch.len() {
            scratch.select_nth_unstable_by(k - 1, cmp);
        }
        let head = &mut scratch[..k];
        head.sort_unstable_by(cmp);
        indices.extend(head.iter().map(|&(_, j)| j));
    }
    Ok(NeighborIndex { k, indices })
}
