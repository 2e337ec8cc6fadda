use crate::linops::CscMatrix;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

/// Minimum-degree ordering of a symmetric pattern (either triangle or both
/// may be stored). Returns `perm` with `perm[k]` the original index of the
/// k-th pivot.
///
/// Works on the explicit elimination graph. Nodes whose degree exceeds
/// `max(16, 10 sqrt(n))` are set aside and ordered last, which keeps dense
/// rows (such as a total-intensity constraint) from dominating the cost.
pub fn minimum_degree(pattern: &CscMatrix) -> Vec<usize> {
    let n = pattern.ncols();
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for (i, j, _) in pattern.iter() {
        if i != j {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    let dense_limit = 16usize.max((10.0 * (n as f64).sqrt()) as usize);
    let mut dense: Vec<usize> = (0..n).filter(|&v| adj[v].len() > dense_limit).collect();
    dense.sort_by_key(|&v| adj[v].len());
    let is_dense: HashSet<usize> = dense.iter().copied().collect();
    for &d in &dense {
        for u in std::mem::take(&mut adj[d]) {
            adj[u].remove(&d);
        }
    }

    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n)
        .filter(|v| !is_dense.contains(v))
        .map(|v| Reverse((adj[v].len(), v)))
        .collect();
    let mut perm = Vec::with_capacity(n);
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                if adj[u].insert(w) {
                    adj[w].insert(u);
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm.extend(dense);
    debug_assert_eq!(perm.len(), n);
    perm
}
