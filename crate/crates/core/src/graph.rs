//! Finite uniformly discrete, bounded-geometry graphs with the graph metric.
//!
//! Vertex ids are dense `0..n`. Adjacency lists are sorted, so every
//! iteration order in the crate is deterministic.

use std::collections::VecDeque;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub type VertexId = usize;

/// Distance value for vertices not reached by a bounded search.
pub const UNREACHED: u32 = u32::MAX;

pub struct UdbgGraph {
    adj: Vec<Vec<VertexId>>,
    root: Option<VertexId>,
    level: Option<Vec<u32>>,
    mu: usize,
    // single-source rows, filled on first use
    rows: Vec<OnceLock<Box<[u32]>>>,
}

impl Clone for UdbgGraph {
    fn clone(&self) -> Self {
        UdbgGraph {
            adj: self.adj.clone(),
            root: self.root,
            level: self.level.clone(),
            mu: self.mu,
            rows: (0..self.adj.len()).map(|_| OnceLock::new()).collect(),
        }
    }
}

impl fmt::Debug for UdbgGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UdbgGraph")
            .field("vertices", &self.len())
            .field("edges", &self.edge_count())
            .field("root", &self.root)
            .field("mu", &self.mu)
            .finish()
    }
}

impl PartialEq for UdbgGraph {
    fn eq(&self, other: &Self) -> bool {
        self.adj == other.adj && self.root == other.root && self.level == other.level
    }
}

impl Eq for UdbgGraph {}

impl UdbgGraph {
    /// Builds and validates a graph on vertices `0..n`.
    ///
    /// Rejects self-loops, parallel edges, disconnected input, and level
    /// labels that do not start at the root or jump by more than one along
    /// an edge.
    pub fn from_edges(
        n: usize,
        edges: &[(VertexId, VertexId)],
        root: Option<VertexId>,
        level: Option<Vec<u32>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n {
                return Err(Error::UnknownVertex(u));
            }
            if v >= n {
                return Err(Error::UnknownVertex(v));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for (v, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!("parallel edge at {v}")));
            }
        }
        Self::from_sorted_adjacency(adj, root, level)
    }

    fn from_sorted_adjacency(
        adj: Vec<Vec<VertexId>>,
        root: Option<VertexId>,
        level: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = adj.len();
        if let Some(r) = root {
            if r >= n {
                return Err(Error::UnknownVertex(r));
            }
        }
        if let Some(lv) = &level {
            if lv.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "{} level labels for {n} vertices",
                    lv.len()
                )));
            }
            if let Some(r) = root {
                if lv[r] != 0 {
                    return Err(Error::InvalidGraph("root level must be 0".into()));
                }
            }
            for (u, list) in adj.iter().enumerate() {
                for &v in list {
                    if lv[u].abs_diff(lv[v]) > 1 {
                        return Err(Error::InvalidGraph(format!(
                            "edge ({u},{v}) changes level by more than one"
                        )));
                    }
                }
            }
        }
        let mu = adj.iter().map(Vec::len).max().unwrap_or(0);
        let graph = UdbgGraph {
            rows: (0..n).map(|_| OnceLock::new()).collect(),
            adj,
            root,
            level,
            mu,
        };
        if graph.bfs_from(0).contains(&UNREACHED) {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        Ok(graph)
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        u < self.len() && self.adj[u].binary_search(&v).is_ok()
    }

    /// Recorded maximum degree.
    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn root(&self) -> Option<VertexId> {
        self.root
    }

    pub fn levels(&self) -> Option<&[u32]> {
        self.level.as_deref()
    }

    pub fn level(&self, v: VertexId) -> Option<u32> {
        self.level.as_ref().map(|l| l[v])
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    /// Full BFS from `source`, not cached.
    pub fn bfs_from(&self, source: VertexId) -> Vec<u32> {
        self.multi_source_bfs(&[source], UNREACHED)
    }

    /// BFS from a set of sources, stopping at `limit` (inclusive).
    pub fn multi_source_bfs(&self, sources: &[VertexId], limit: u32) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.len()];
        let mut queue = VecDeque::with_capacity(sources.len());
        for &s in sources {
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            if du >= limit {
                continue;
            }
            for &v in &self.adj[u] {
                if dist[v] == UNREACHED {
                    dist[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Cached single-source distance row.
    pub fn distances_from(&self, source: VertexId) -> Result<&[u32]> {
        self.check_vertex(source)?;
        Ok(self.rows[source].get_or_init(|| self.bfs_from(source).into_boxed_slice()))
    }

    /// Graph distance: the fewest number of edges joining `u` and `v`.
    pub fn distance(&self, u: VertexId, v: VertexId) -> Result<u32> {
        self.check_vertex(v)?;
        Ok(self.distances_from(u)?[v])
    }

    /// Vertices within distance `r` of `v`, sorted.
    pub fn ball(&self, v: VertexId, r: u32) -> Result<Vec<VertexId>> {
        self.check_vertex(v)?;
        Ok(self.bounded_search(&[v], r, |d| d <= r))
    }

    /// Vertices at distance exactly `t` from `v`, sorted.
    pub fn sphere(&self, v: VertexId, t: u32) -> Result<Vec<VertexId>> {
        self.check_vertex(v)?;
        Ok(self.bounded_search(&[v], t, |d| d == t))
    }

    /// The `r`-boundary `{x ∉ A : d(x, A) ≤ r}`, sorted. Empty for empty `A`.
    pub fn vertex_boundary(&self, set: &[VertexId], r: u32) -> Result<Vec<VertexId>> {
        for &v in set {
            self.check_vertex(v)?;
        }
        if set.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.bounded_search(set, r, |d| d >= 1 && d <= r))
    }

    /// Size of the 1-boundary of a set given as a membership mask.
    pub fn boundary_size_mask(&self, members: &[VertexId], mask: &mut [bool]) -> usize {
        // `mask` marks members on entry and is restored on exit
        let mut touched = Vec::new();
        for &u in members {
            for &v in &self.adj[u] {
                if !mask[v] {
                    mask[v] = true;
                    touched.push(v);
                }
            }
        }
        for &v in &touched {
            mask[v] = false;
        }
        touched.len()
    }

    fn bounded_search(
        &self,
        sources: &[VertexId],
        limit: u32,
        keep: impl Fn(u32) -> bool,
    ) -> Vec<VertexId> {
        let mut seen: std::collections::HashMap<VertexId, u32> =
            sources.iter().map(|&s| (s, 0)).collect();
        let mut frontier: Vec<VertexId> = seen.keys().copied().collect();
        let mut out: Vec<VertexId> = if keep(0) { frontier.clone() } else { Vec::new() };
        let mut d = 0;
        while d < limit && !frontier.is_empty() {
            d += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in &self.adj[u] {
                    if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(v) {
                        e.insert(d);
                        next.push(v);
                    }
                }
            }
            if keep(d) {
                out.extend_from_slice(&next);
            }
            frontier = next;
        }
        out.sort_unstable();
        out
    }

    /// The scale-`r` graph: same vertices, an edge between distinct vertices
    /// at distance at most `r`. Levels are dropped; the root is kept.
    pub fn rips_scale_graph(&self, r: u32) -> Result<UdbgGraph> {
        if r == 0 {
            return Err(Error::Input("rips scale must be at least 1".into()));
        }
        let adj: Vec<Vec<VertexId>> = (0..self.len())
            .into_par_iter()
            .map(|v| {
                self.bounded_search(&[v], r, |d| d >= 1)
            })
            .collect();
        Self::from_sorted_adjacency(adj, self.root, None)
    }

    /// `N_r = max_v |B(v, r)|` for `r = 1..=r_max`.
    pub fn geometry_profile(&self, r_max: u32) -> Result<Vec<usize>> {
        if r_max == 0 {
            return Err(Error::Input("r_max must be at least 1".into()));
        }
        let per_vertex: Vec<Vec<usize>> = (0..self.len())
            .into_par_iter()
            .map(|v| {
                let dist = self.multi_source_bfs(&[v], r_max);
                let mut counts = vec![0usize; r_max as usize + 1];
                for d in dist.into_iter().filter(|&d| d != UNREACHED) {
                    counts[d as usize] += 1;
                }
                counts
                    .iter()
                    .scan(0, |acc, c| {
                        *acc += c;
                        Some(*acc)
                    })
                    .skip(1)
                    .collect()
            })
            .collect();
        Ok((0..r_max as usize)
            .map(|i| per_vertex.iter().map(|row| row[i]).max().unwrap_or(0))
            .collect())
    }
}

/// A graph with levels viewed as a finite window: the outermost level is
/// the truncation sphere, and vertices near it form the collar.
#[derive(Clone, Debug)]
pub struct Truncation {
    graph: UdbgGraph,
    depth: u32,
    sphere: Vec<VertexId>,
    sphere_dist: Vec<u32>,
    collar_width: u32,
}

impl Truncation {
    pub fn new(graph: UdbgGraph) -> Result<Self> {
        let levels = graph
            .levels()
            .ok_or_else(|| Error::InvalidGraph("truncation needs level labels".into()))?;
        let depth = levels.iter().copied().max().unwrap_or(0);
        let sphere: Vec<VertexId> = (0..graph.len()).filter(|&v| levels[v] == depth).collect();
        let sphere_dist = graph.multi_source_bfs(&sphere, UNREACHED);
        Ok(Truncation { graph, depth, sphere, sphere_dist, collar_width: 0 })
    }

    pub fn with_collar(mut self, w: u32) -> Self {
        self.collar_width = w;
        self
    }

    pub fn graph(&self) -> &UdbgGraph {
        &self.graph
    }

    pub fn into_graph(self) -> UdbgGraph {
        self.graph
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn sphere(&self) -> &[VertexId] {
        &self.sphere
    }

    pub fn collar_width(&self) -> u32 {
        self.collar_width
    }

    pub fn distance_to_sphere(&self, v: VertexId) -> u32 {
        self.sphere_dist[v]
    }

    /// Vertices at distance greater than `w` from the truncation sphere.
    pub fn interior(&self, w: u32) -> Vec<VertexId> {
        (0..self.graph.len()).filter(|&v| self.sphere_dist[v] > w).collect()
    }

    pub fn is_interior(&self, v: VertexId, w: u32) -> bool {
        self.sphere_dist[v] > w
    }
}
