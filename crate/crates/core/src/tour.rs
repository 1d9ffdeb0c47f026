//! Closed tours through disk centers: exact Held–Karp for small N, a
//! Hamiltonian-cycle search in a contact graph, and a 2-opt/Or-opt local
//! search for an upper bound.

use crate::geometry::Point2;

/// Largest N solved exactly by [`held_karp`].
pub const EXACT_TOUR_LIMIT: usize = 16;

pub fn tour_length(points: &[Point2], order: &[usize]) -> f64 {
    if order.len() < 2 {
        return 0.0;
    }
    (0..order.len())
        .map(|k| points[order[k]].dist(points[order[(k + 1) % order.len()]]))
        .sum()
}

/// Exact minimal closed tour by dynamic programming over subsets.
pub fn held_karp(points: &[Point2]) -> (f64, Vec<usize>) {
    let n = points.len();
    assert!(n <= EXACT_TOUR_LIMIT + 1, "held_karp is exponential in N");
    match n {
        0 => return (0.0, vec![]),
        1 => return (0.0, vec![0]),
        2 => return (2.0 * points[0].dist(points[1]), vec![0, 1]),
        _ => {}
    }
    let m = n - 1; // city 0 is the fixed start
    let dist = |a: usize, b: usize| points[a].dist(points[b]);
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    let mut parent = vec![u8::MAX; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = dist(0, j + 1);
    }
    for mask in 1..full {
        for j in 0..m {
            if mask & (1 << j) == 0 {
                continue;
            }
            let cur = dp[mask * m + j];
            if !cur.is_finite() {
                continue;
            }
            let mut rest = !mask & (full - 1);
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let next = mask | (1 << k);
                let cand = cur + dist(j + 1, k + 1);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                    parent[next * m + k] = j as u8;
                }
            }
        }
    }
    let last_mask = full - 1;
    let (mut best, mut last) = (f64::INFINITY, 0);
    for j in 0..m {
        let cand = dp[last_mask * m + j] + dist(j + 1, 0);
        if cand < best {
            best = cand;
            last = j;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = last_mask;
    let mut j = last;
    loop {
        order.push(j + 1);
        let p = parent[mask * m + j];
        mask &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    order.push(0);
    order.reverse();
    (best, order)
}

/// Largest graph decided exactly by [`hamiltonian_cycle`], independent of the budget.
pub const EXACT_CYCLE_LIMIT: usize = 24;

/// Searches for a Hamiltonian cycle in the graph given by adjacency lists.
///
/// Graphs up to [`EXACT_CYCLE_LIMIT`] vertices are decided exactly by
/// dynamic programming over subsets. Larger graphs use a depth-first search
/// and `None` may also mean the node budget ran out first.
pub fn hamiltonian_cycle(adj: &[Vec<usize>], budget: usize) -> Option<Vec<usize>> {
    let n = adj.len();
    if n < 3 {
        return match n {
            2 if adj[0].contains(&1) => Some(vec![0, 1]),
            _ => None,
        };
    }
    // every vertex of a cycle has degree at least two
    if adj.iter().any(|a| a.len() < 2) {
        return None;
    }
    if n <= EXACT_CYCLE_LIMIT {
        return hamiltonian_cycle_dp(adj);
    }
    let start = (0..n).min_by_key(|&v| adj[v].len()).unwrap();
    let mut visited = vec![false; n];
    let mut path = vec![start];
    visited[start] = true;
    let mut nodes = 0usize;
    if extend(adj, &mut path, &mut visited, start, &mut nodes, budget) {
        Some(path)
    } else {
        None
    }
}

/// Paths start at vertex 0; `ends[mask]` holds the possible last vertices of a
/// path visiting exactly `{0} ∪ mask` (bit `k` stands for vertex `k + 1`).
fn hamiltonian_cycle_dp(adj: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = adj.len();
    let m = n - 1;
    let neighbours: Vec<u32> = adj
        .iter()
        .map(|a| a.iter().filter(|&&w| w > 0).fold(0u32, |acc, &w| acc | 1 << (w - 1)))
        .collect();
    let full = (1usize << m) - 1;
    let mut ends = vec![0u32; full + 1];
    for &w in &adj[0] {
        if w > 0 {
            ends[1 << (w - 1)] |= 1 << (w - 1);
        }
    }
    for mask in 1..=full {
        let mut last = ends[mask];
        while last != 0 {
            let v = last.trailing_zeros() as usize;
            last &= last - 1;
            let mut next = neighbours[v + 1] & !(mask as u32);
            while next != 0 {
                let w = next.trailing_zeros() as usize;
                next &= next - 1;
                ends[mask | 1 << w] |= 1 << w;
            }
        }
    }
    let closing = neighbours[0] & ends[full];
    if closing == 0 {
        return None;
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = full;
    let mut v = closing.trailing_zeros() as usize;
    loop {
        order.push(v + 1);
        mask &= !(1 << v);
        if mask == 0 {
            break;
        }
        v = (ends[mask] & neighbours[v + 1]).trailing_zeros() as usize;
    }
    order.push(0);
    order.reverse();
    Some(order)
}

fn extend(
    adj: &[Vec<usize>],
    path: &mut Vec<usize>,
    visited: &mut [bool],
    start: usize,
    nodes: &mut usize,
    budget: usize,
) -> bool {
    let n = adj.len();
    let end = *path.last().unwrap();
    if path.len() == n {
        return adj[end].contains(&start);
    }
    *nodes += 1;
    if *nodes > budget {
        return false;
    }
    // an unvisited vertex needs two usable neighbours (unvisited, the path end, or the start)
    for w in 0..n {
        if visited[w] {
            continue;
        }
        let usable = adj[w]
            .iter()
            .filter(|&&x| !visited[x] || x == end || x == start)
            .take(2)
            .count();
        if usable < 2 {
            return false;
        }
    }
    let mut next: Vec<usize> = adj[end].iter().copied().filter(|&w| !visited[w]).collect();
    // Warnsdorff ordering: fewest onward options first
    next.sort_by_key(|&w| adj[w].iter().filter(|&&x| !visited[x]).count());
    for w in next {
        visited[w] = true;
        path.push(w);
        if extend(adj, path, visited, start, nodes, budget) {
            return true;
        }
        path.pop();
        visited[w] = false;
        if *nodes > budget {
            return false;
        }
    }
    false
}

/// Nearest-neighbour construction followed by 2-opt and Or-opt until no move improves.
pub fn local_search_tour(points: &[Point2]) -> (f64, Vec<usize>) {
    let n = points.len();
    if n <= 3 {
        let order: Vec<usize> = (0..n).collect();
        return (tour_length(points, &order), order);
    }
    let d = |a: usize, b: usize| points[a].dist(points[b]);
    let mut order = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let mut cur = 0;
    used[0] = true;
    order.push(0);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| d(cur, a).total_cmp(&d(cur, b)))
            .unwrap();
        used[next] = true;
        order.push(next);
        cur = next;
    }

    let mut improved = true;
    while improved {
        improved = false;
        // 2-opt
        for i in 0..n - 1 {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (order[i], order[i + 1]);
                let (c, e) = (order[j], order[(j + 1) % n]);
                let delta = d(a, c) + d(b, e) - d(a, b) - d(c, e);
                if delta < -1e-14 {
                    order[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
        // Or-opt: move segments of length 1..=3
        for seg in 1..=3usize {
            if n < seg + 3 {
                break;
            }
            let mut i = 0;
            while i + seg <= n {
                let prev = order[(i + n - 1) % n];
                let first = order[i];
                let last = order[i + seg - 1];
                let after = order[(i + seg) % n];
                if prev == last || after == first {
                    i += 1;
                    continue;
                }
                let removal = d(prev, first) + d(last, after) - d(prev, after);
                let mut best: Option<(usize, bool, f64)> = None;
                for k in 0..n {
                    let kk = (k + 1) % n;
                    if (i..i + seg).contains(&k) || (i..i + seg).contains(&kk) || k == (i + n - 1) % n {
                        continue;
                    }
                    let (p, q) = (order[k], order[kk]);
                    let fwd = d(p, first) + d(last, q) - d(p, q);
                    let rev = d(p, last) + d(first, q) - d(p, q);
                    let (gain, reversed) = if rev < fwd { (removal - rev, true) } else { (removal - fwd, false) };
                    if gain > 1e-14 && best.map_or(true, |b| gain > b.2) {
                        best = Some((k, reversed, gain));
                    }
                }
                if let Some((k, reversed, _)) = best {
                    let anchor = order[k];
                    let mut segment: Vec<usize> = order.drain(i..i + seg).collect();
                    if reversed {
                        segment.reverse();
                    }
                    let pos = order.iter().position(|&v| v == anchor).unwrap() + 1;
                    order.splice(pos..pos, segment);
                    improved = true;
                }
                i += 1;
            }
        }
    }
    (tour_length(points, &order), order)
}
