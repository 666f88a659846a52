//! Grid graphs, k-hop coverage geometry, and deterministic path planning.
//!
//! Vertices of an `rows x cols` grid are indexed row-major
//! (`index = row * cols + col`). All tie-breaking is by ascending vertex
//! index so that runs are reproducible.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// 4-neighbor grid graph. Immutable after construction.
#[derive(Debug, Clone)]
pub struct GridGraph {
    pub rows: usize,
    pub cols: usize,
    coords: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl GridGraph {
    pub fn vertex_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn coord(&self, v: usize) -> (usize, usize) {
        self.coords[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::InvalidVertex {
                vertex: v,
                vertex_count: self.vertex_count(),
            })
        }
    }
}

/// Per-agent sensing radii plus the uniform coverage-size cap `K`.
#[derive(Debug, Clone)]
pub struct CoverageModel {
    pub hop_radii: Vec<usize>,
    /// `K`: upper bound on any agent's coverage-set size anywhere on the graph.
    pub cap: usize,
}

impl CoverageModel {
    /// Builds the model, computing `cap` as the largest k-hop ball over all
    /// agents and vertices.
    pub fn for_graph(g: &GridGraph, hop_radii: Vec<usize>) -> Result<Self> {
        if hop_radii.is_empty() {
            return Err(Error::InvalidArgument("need at least one agent".into()));
        }
        let mut cap = 0;
        for &k in &hop_radii {
            for v in 0..g.vertex_count() {
                cap = cap.max(k_hop(g, v, k)?.len());
            }
        }
        Ok(CoverageModel { hop_radii, cap })
    }

    pub fn agent_count(&self) -> usize {
        self.hop_radii.len()
    }
}

pub fn build_grid(rows: usize, cols: usize) -> Result<GridGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid dimensions must be positive, got {rows}x{cols}"
        )));
    }
    let n = rows * cols;
    let mut coords = Vec::with_capacity(n);
    let mut adjacency = Vec::with_capacity(n);
    for r in 0..rows {
        for c in 0..cols {
            coords.push((r, c));
            let mut adj = Vec::with_capacity(4);
            if r > 0 {
                adj.push((r - 1) * cols + c);
            }
            if c > 0 {
                adj.push(r * cols + (c - 1));
            }
            if c + 1 < cols {
                adj.push(r * cols + (c + 1));
            }
            if r + 1 < rows {
                adj.push((r + 1) * cols + c);
            }
            adj.sort_unstable();
            adjacency.push(adj);
        }
    }
    Ok(GridGraph {
        rows,
        cols,
        coords,
        adjacency,
    })
}

/// All vertices within graph distance `k` of `v`, sorted ascending.
pub fn k_hop(g: &GridGraph, v: usize, k: usize) -> Result<Vec<usize>> {
    g.check_vertex(v)?;
    let mut dist = vec![usize::MAX; g.vertex_count()];
    dist[v] = 0;
    let mut frontier = vec![v];
    for d in 1..=k {
        let mut next = Vec::new();
        for &u in &frontier {
            for &w in g.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = d;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let mut out: Vec<usize> = (0..g.vertex_count()).filter(|&u| dist[u] <= k).collect();
    out.sort_unstable();
    Ok(out)
}

fn bfs_parents(g: &GridGraph, src: usize) -> (Vec<usize>, Vec<usize>) {
    let n = g.vertex_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    dist[src] = 0;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                parent[w] = u;
                queue.push_back(w);
            }
        }
    }
    (dist, parent)
}

/// Minimum-hop path from `src` to `dst`, inclusive of both endpoints.
///
/// Ties are resolved by BFS expansion in ascending neighbor order, so the
/// returned path is deterministic.
pub fn shortest_path(g: &GridGraph, src: usize, dst: usize) -> Result<Vec<usize>> {
    g.check_vertex(src)?;
    g.check_vertex(dst)?;
    let (_, parent) = bfs_parents(g, src);
    let mut path = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    Ok(path)
}

/// Minimum-hop path from `src` to `dst` restricted to `allowed` vertices.
pub fn shortest_path_in(
    g: &GridGraph,
    src: usize,
    dst: usize,
    allowed: &[bool],
) -> Result<Vec<usize>> {
    g.check_vertex(src)?;
    g.check_vertex(dst)?;
    if !allowed[src] || !allowed[dst] {
        return Err(Error::Unreachable { src, dst });
    }
    let n = g.vertex_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    dist[src] = 0;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if allowed[w] && dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                parent[w] = u;
                queue.push_back(w);
            }
        }
    }
    if dist[dst] == usize::MAX {
        return Err(Error::Unreachable { src, dst });
    }
    let mut path = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = parent[cur];
        path.push(cur);
    }
    path.reverse();
    Ok(path)
}

#[derive(PartialEq)]
struct WeightedEntry {
    cost: f64,
    path: Vec<usize>,
}

impl Eq for WeightedEntry {}

impl Ord for WeightedEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.path.len().cmp(&other.path.len()))
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialOrd for WeightedEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Node-weighted shortest path restricted to `allowed`.
///
/// The cost of a path is the sum of `node_weight` over every vertex entered
/// (the source is excluded: costs attach to the destination endpoint of each
/// edge). Ties are broken first by hop count, then lexicographically by the
/// path's vertex sequence.
pub fn weighted_shortest_path(
    g: &GridGraph,
    src: usize,
    dst: usize,
    node_weight: &dyn Fn(usize) -> f64,
    allowed: &[bool],
) -> Result<Vec<usize>> {
    g.check_vertex(src)?;
    g.check_vertex(dst)?;
    if !allowed[src] || !allowed[dst] {
        return Err(Error::Unreachable { src, dst });
    }
    let n = g.vertex_count();
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(WeightedEntry {
        cost: 0.0,
        path: vec![src],
    }));
    while let Some(Reverse(entry)) = heap.pop() {
        let u = *entry.path.last().unwrap();
        if settled[u] {
            continue;
        }
        settled[u] = true;
        if u == dst {
            return Ok(entry.path);
        }
        for &w in g.neighbors(u) {
            if allowed[w] && !settled[w] {
                let weight = node_weight(w);
                debug_assert!(weight >= 0.0, "node weights must be non-negative");
                let mut path = entry.path.clone();
                path.push(w);
                heap.push(Reverse(WeightedEntry {
                    cost: entry.cost + weight,
                    path,
                }));
            }
        }
    }
    Err(Error::Unreachable { src, dst })
}

/// Graph diameter: the maximum over vertex pairs of the BFS distance.
pub fn diameter(g: &GridGraph) -> usize {
    let mut best = 0;
    for v in 0..g.vertex_count() {
        let (dist, _) = bfs_parents(g, v);
        for &d in &dist {
            if d != usize::MAX {
                best = best.max(d);
            }
        }
    }
    best
}

/// Sorted, deduplicated union of the agents' coverage sets at `positions`.
pub fn coverage_union(g: &GridGraph, cov: &CoverageModel, positions: &[usize]) -> Result<Vec<usize>> {
    if positions.len() != cov.agent_count() {
        return Err(Error::InvalidArgument(format!(
            "expected {} positions, got {}",
            cov.agent_count(),
            positions.len()
        )));
    }
    let mut union = Vec::new();
    for (i, &p) in positions.iter().enumerate() {
        union.extend(k_hop(g, p, cov.hop_radii[i])?);
    }
    union.sort_unstable();
    union.dedup();
    Ok(union)
}
