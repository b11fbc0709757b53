//! Euclidean nearest neighbours and complete-linkage agglomerative clustering.
//!
//! The agglomeration keeps the full `n × n` distance matrix in memory, which
//! is comfortable up to roughly 20k points.
//!
//! Ties are resolved towards lower indices everywhere so that runs are
//! reproducible bit for bit.


use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

fn row_vecs(rows: ArrayView2<f64>) -> Vec<Vec<f64>> {
    rows.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// For each query row, the indices of the `min(r, n_ref)` closest reference
/// rows ordered by distance, ties broken by lower reference index.
pub fn knn_indices(query: ArrayView2<f64>, reference: ArrayView2<f64>, r: usize) -> Result<Vec<Vec<usize>>> {
    if reference.nrows() == 0 {
        return Err(Error::input("nearest-neighbour search needs a nonempty reference set"));
    }
    if r == 0 {
        return Err(Error::input("number of neighbours must be at least 1"));
    }
    if query.ncols() != reference.ncols() {
        return Err(Error::input(format!(
            "query rows have {} columns, reference rows have {}",
            query.ncols(),
            reference.ncols()
        )));
    }
    let refs = row_vecs(reference);
    let queries = row_vecs(query);
    let k = r.min(refs.len());
    Ok(queries
        .par_iter()
        .map(|q| {
            let mut d: Vec<(f64, usize)> = refs
                .iter()
                .enumerate()
                .map(|(i, row)| (squared_euclidean(q, row), i))
                .collect();
            let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < d.len() {
                d.select_nth_unstable_by(k - 1, by_distance);
                d.truncate(k);
            }
            d.sort_unstable_by(by_distance);
            d.into_iter().map(|(_, i)| i).collect()
        })
        .collect())
}

/// Full symmetric matrix of Euclidean distances, row-major.
pub fn pairwise_distances(rows: ArrayView2<f64>) -> Vec<f64> {
    let n = rows.nrows();
    let v = row_vecs(rows);
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = euclidean(&v[i], &v[j]);
        }
    });
    out
}

/// One agglomeration step. Node ids follow the usual linkage convention:
/// leaves are `0..n`, the node created by merge `i` is `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64, usize)", into = "(usize, usize, f64, usize)")]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Leaves under the new node.
    pub size: usize,
}

impl From<(usize, usize, f64, usize)> for Merge {
    fn from((left, right, height, size): (usize, usize, f64, usize)) -> Self {
        Merge { left, right, height, size }
    }
}

impl From<Merge> for (usize, usize, f64, usize) {
    fn from(m: Merge) -> Self {
        (m.left, m.right, m.height, m.size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaf_count: usize,
    /// `leaf_count - 1` merges with non-decreasing heights.
    pub merges: Vec<Merge>,
}

/// Flat clustering: `labels[i]` in `0..n_clusters`, numbered by the smallest
/// leaf each cluster contains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub n_clusters: usize,
}

impl ClusterAssignment {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

/// Complete-linkage agglomerative clustering on Euclidean distances.
///
/// At every step the two clusters with the smallest maximum pairwise distance
/// merge; among equal distances the pair whose smallest member leaves are
/// lexicographically smallest wins.
pub fn hclust_complete(rows: ArrayView2<f64>) -> Result<Dendrogram> {
    let n = rows.nrows();
    if n == 0 {
        return Err(Error::input("cannot cluster zero rows"));
    }
    let mut dist = pairwise_distances(rows);
    // Active clusters live in the slot of their smallest leaf.
    let mut active = vec![true; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut size = vec![1usize; n];
    let mut nn = vec![usize::MAX; n];
    let mut nn_dist = vec![f64::INFINITY; n];

    let refresh = |i: usize, dist: &[f64], active: &[bool], nn: &mut [usize], nn_dist: &mut [f64]| {
        nn[i] = usize::MAX;
        nn_dist[i] = f64::INFINITY;
        for j in i + 1..n {
            if active[j] && dist[i * n + j] < nn_dist[i] {
                nn_dist[i] = dist[i * n + j];
                nn[i] = j;
            }
        }
    };
    for i in 0..n {
        refresh(i, &dist, &active, &mut nn, &mut nn_dist);
    }

    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut a = usize::MAX;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if active[i] && nn[i] != usize::MAX && nn_dist[i] < best {
                best = nn_dist[i];
                a = i;
            }
        }
        let b = nn[a];
        let (l, r) = (node[a].min(node[b]), node[a].max(node[b]));
        size[a] += size[b];
        merges.push(Merge {
            left: l,
            right: r,
            height: best,
            size: size[a],
        });
        node[a] = n + step;
        active[b] = false;
        for k in 0..n {
            if active[k] && k != a {
                let d = dist[a * n + k].max(dist[b * n + k]);
                dist[a * n + k] = d;
                dist[k * n + a] = d;
            }
        }
        for i in 0..n {
            if active[i] && (i == a || nn[i] == a || nn[i] == b) {
                refresh(i, &dist, &active, &mut nn, &mut nn_dist);
            }
        }
    }
    let dendrogram = Dendrogram { leaf_count: n, merges };
    dendrogram.check_invariants()?;
    Ok(dendrogram)
}

impl Dendrogram {
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.leaf_count;
        if self.merges.len() + 1 != n {
            return Err(Error::input(format!(
                "dendrogram over {n} leaves must have {} merges, has {}",
                n.saturating_sub(1),
                self.merges.len()
            )));
        }
        if self.merges.windows(2).any(|w| w[1].height < w[0].height) {
            return Err(Error::input("dendrogram merge heights decrease"));
        }
        let mut used = vec![false; 2 * n - 1];
        for (i, m) in self.merges.iter().enumerate() {
            for child in [m.left, m.right] {
                if child >= n + i || used[child] {
                    return Err(Error::input(format!("invalid child {child} in merge {i}")));
                }
                used[child] = true;
            }
        }
        if let Some(last) = self.merges.last() {
            if last.size != n {
                return Err(Error::input("final merge does not contain every leaf"));
            }
        }
        Ok(())
    }

    /// Partition after applying the first `kept` merges.
    fn assignment_after(&self, kept: usize) -> ClusterAssignment {
        let n = self.leaf_count;
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, m) in self.merges.iter().take(kept).enumerate() {
            parent[m.left] = n + i;
            parent[m.right] = n + i;
        }
        let mut root_label: Vec<Option<usize>> = vec![None; 2 * n - 1];
        let mut labels = vec![0; n];
        let mut next = 0;
        for (leaf, label) in labels.iter_mut().enumerate() {
            let root = find(&mut parent, leaf);
            *label = *root_label[root].get_or_insert_with(|| {
                next += 1;
                next - 1
            });
        }
        ClusterAssignment {
            labels,
            n_clusters: next,
        }
    }

    /// Exactly `g` clusters, by undoing the last `g - 1` merges.
    pub fn cut_by_count(&self, g: usize) -> Result<ClusterAssignment> {
        if g == 0 || g > self.leaf_count {
            return Err(Error::input(format!(
                "cluster count {g} outside 1..={}",
                self.leaf_count
            )));
        }
        Ok(self.assignment_after(self.leaf_count - g))
    }

    /// Keeps every merge at height `<= d`.
    pub fn cut_by_height(&self, d: f64) -> Result<ClusterAssignment> {
        if !(d >= 0.0) {
            return Err(Error::input(format!("cut height must be nonnegative, got {d}")));
        }
        let kept = self.merges.iter().take_while(|m| m.height <= d).count();
        Ok(self.assignment_after(kept))
    }

    /// Height of the last merge kept by a cut into `g` clusters (0 if none).
    pub fn cut_height(&self, g: usize) -> f64 {
        let kept = self.leaf_count.saturating_sub(g);
        if kept == 0 {
            0.0
        } else {
            self.merges[kept - 1].height
        }
    }

    /// Node id at the top of each cluster of a cut into `g` clusters,
    /// indexed by cluster label.
    pub fn cluster_nodes(&self, g: usize) -> Result<Vec<usize>> {
        let assignment = self.cut_by_count(g)?;
        let n = self.leaf_count;
        let kept = n - g;
        let mut top: Vec<usize> = (0..n).collect();
        // A kept merge's node replaces the tops of its children.
        let mut owner: Vec<usize> = (0..2 * n - 1).collect();
        for (i, m) in self.merges.iter().take(kept).enumerate() {
            owner[m.left] = n + i;
            owner[m.right] = n + i;
        }
        for (leaf, t) in top.iter_mut().enumerate() {
            let mut x = leaf;
            while owner[x] != x {
                x = owner[x];
            }
            *t = x;
        }
        let mut nodes = vec![usize::MAX; assignment.n_clusters];
        for (leaf, &label) in assignment.labels.iter().enumerate() {
            nodes[label] = top[leaf];
        }
        Ok(nodes)
    }

    /// Parent merge index of every node (`None` for the root).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let n = self.leaf_count;
        let mut parent = vec![None; 2 * n - 1];
        for (i, m) in self.merges.iter().enumerate() {
            parent[m.left] = Some(i);
            parent[m.right] = Some(i);
        }
        parent
    }

    pub fn height_of(&self, node: usize) -> f64 {
        if node < self.leaf_count {
            0.0
        } else {
            self.merges[node - self.leaf_count].height
        }
    }

    /// Leaves under `node`, ascending.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let n = self.leaf_count;
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let m = &self.merges[x - n];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Partitions compared as sets of sets.
pub fn same_partition(a: &ClusterAssignment, b: &ClusterAssignment) -> bool {
    if a.labels.len() != b.labels.len() || a.n_clusters != b.n_clusters {
        return false;
    }
    let mut map = vec![usize::MAX; a.n_clusters];
    let mut seen = vec![false; b.n_clusters];
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        match map[la] {
            usize::MAX => {
                if seen[lb] {
                    return false;
                }
                seen[lb] = true;
                map[la] = lb;
            }
            m if m != lb => return false,
            _ => {}
        }
    }
    true
}
