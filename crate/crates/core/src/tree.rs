//! Rooted trees: generators and the structural predicates (pseudo-regularity,
//! visuality, geodesic completeness) evaluated on depth-`D` truncations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Truncation, UdbgGraph, VertexId, UNREACHED};

pub const DEFAULT_VERTEX_BUDGET: usize = 4_000_000;

#[derive(Clone, Debug)]
pub struct RootedTree {
    trunc: Truncation,
    parent: Vec<Option<VertexId>>,
    children: Vec<Vec<VertexId>>,
}

impl RootedTree {
    /// Builds a tree from a parent array; exactly one entry must be `None`.
    pub fn from_parents(parent: Vec<Option<VertexId>>) -> Result<Self> {
        let n = parent.len();
        let roots: Vec<_> = (0..n).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidGraph(format!("expected one root, found {}", roots.len())));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(n.saturating_sub(1));
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::UnknownVertex(p));
                }
                children[p].push(v);
                edges.push((p, v));
            }
        }
        // levels by walking down from the root; unreached vertices mean a cycle
        let mut level = vec![UNREACHED; n];
        level[root] = 0;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &c in &children[u] {
                level[c] = level[u] + 1;
                stack.push(c);
            }
        }
        if level.contains(&UNREACHED) {
            return Err(Error::InvalidGraph("parent array contains a cycle".into()));
        }
        let graph = UdbgGraph::from_edges(n, &edges, Some(root), Some(level))?;
        Ok(RootedTree { trunc: Truncation::new(graph)?, parent, children })
    }

    /// Interprets a rooted acyclic graph with levels as a tree.
    pub fn from_graph(graph: &UdbgGraph) -> Result<Self> {
        let root = graph.root().ok_or_else(|| Error::InvalidGraph("tree needs a root".into()))?;
        if graph.edge_count() + 1 != graph.len() {
            return Err(Error::InvalidGraph("graph is not a tree (|E| != |V| - 1)".into()));
        }
        let dist = graph.bfs_from(root);
        let parent = (0..graph.len())
            .map(|v| {
                if v == root {
                    None
                } else {
                    graph.neighbors(v).iter().copied().find(|&u| dist[u] + 1 == dist[v])
                }
            })
            .collect();
        Self::from_parents(parent)
    }

    pub fn truncation(&self) -> &Truncation {
        &self.trunc
    }

    pub fn graph(&self) -> &UdbgGraph {
        self.trunc.graph()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> VertexId {
        self.graph().root().expect("trees are rooted")
    }

    pub fn depth(&self) -> u32 {
        self.trunc.depth()
    }

    pub fn level(&self, v: VertexId) -> u32 {
        self.graph().levels().expect("trees carry levels")[v]
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<VertexId>] {
        &self.parent
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v]
    }

    pub fn leaves(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.len()).filter(|&v| self.children[v].is_empty())
    }

    /// Vertices in level order, ties by id.
    pub fn level_order(&self) -> Vec<VertexId> {
        let mut order: Vec<_> = (0..self.len()).collect();
        order.sort_by_key(|&v| (self.level(v), v));
        order
    }

    /// `v` and all of its descendants, sorted.
    pub fn descendants(&self, v: VertexId) -> Vec<VertexId> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out.sort_unstable();
        out
    }

    pub fn ancestor(&self, mut v: VertexId, steps: u32) -> Option<VertexId> {
        for _ in 0..steps {
            v = self.parent[v]?;
        }
        Some(v)
    }

    pub fn lca(&self, mut a: VertexId, mut b: VertexId) -> VertexId {
        while self.level(a) > self.level(b) {
            a = self.parent[a].expect("non-root has a parent");
        }
        while self.level(b) > self.level(a) {
            b = self.parent[b].expect("non-root has a parent");
        }
        while a != b {
            a = self.parent[a].expect("non-root has a parent");
            b = self.parent[b].expect("non-root has a parent");
        }
        a
    }

    /// Vertices with at least one descendant on the truncation sphere, i.e.
    /// the union of all root-to-level-`D` geodesics.
    pub fn core_mask(&self) -> Vec<bool> {
        let depth = self.depth();
        let mut mask = vec![false; self.len()];
        let mut order = self.level_order();
        order.reverse();
        for v in order {
            mask[v] = self.level(v) == depth || self.children[v].iter().any(|&c| mask[c]);
        }
        mask
    }

    pub fn is_geodesically_complete(&self) -> bool {
        self.core_mask().into_iter().all(|b| b)
    }
}

/// Complete `k`-ary tree of the given depth, ids in level order.
pub fn gen_kary(k: usize, depth: u32) -> Result<RootedTree> {
    gen_kary_with_budget(k, depth, DEFAULT_VERTEX_BUDGET)
}

pub fn gen_kary_with_budget(k: usize, depth: u32, budget: usize) -> Result<RootedTree> {
    if k < 2 || depth < 1 {
        return Err(Error::Input(format!("gen_kary needs k >= 2 and depth >= 1, got k={k}, depth={depth}")));
    }
    let mut total: usize = 0;
    let mut layer: usize = 1;
    for _ in 0..=depth {
        total = total.saturating_add(layer);
        layer = layer.saturating_mul(k);
    }
    if total > budget {
        return Err(Error::VertexBudget { needed: total, budget });
    }
    let mut parent = vec![None];
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * k);
        for &v in &frontier {
            for _ in 0..k {
                next.push(parent.len());
                parent.push(Some(v));
            }
        }
        frontier = next;
    }
    RootedTree::from_parents(parent)
}

/// Random tree in which no `K` consecutive vertices above level `D` have a
/// single child, so every vertex at level `t <= D - K` has at least two
/// descendants at level `t + K`. Every vertex has at most `mu - 1` children.
pub fn gen_random_pseudo_regular(seed: u64, k: u32, depth: u32, mu: usize) -> Result<RootedTree> {
    gen_random_pseudo_regular_with_budget(seed, k, depth, mu, DEFAULT_VERTEX_BUDGET)
}

pub fn gen_random_pseudo_regular_with_budget(
    seed: u64,
    k: u32,
    depth: u32,
    mu: usize,
    budget: usize,
) -> Result<RootedTree> {
    if k < 1 || depth < 1 {
        return Err(Error::Input("pseudo-regular generation needs K >= 1 and depth >= 1".into()));
    }
    if mu < 3 {
        return Err(Error::Infeasible(format!(
            "degree bound {mu} leaves no room for two children below a parent edge"
        )));
    }
    let max_children = mu - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parent: Vec<Option<VertexId>> = vec![None];
    // length of the run of single-child vertices directly above each frontier vertex
    let mut frontier: Vec<(VertexId, u32)> = vec![(0, 0)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &(v, run) in &frontier {
            let forced = run + 1 >= k;
            let lo = if forced { 2 } else { 1 };
            let count = rng.gen_range(lo..=max_children);
            let child_run = if count == 1 { run + 1 } else { 0 };
            for _ in 0..count {
                if parent.len() >= budget {
                    return Err(Error::VertexBudget { needed: parent.len() + 1, budget });
                }
                next.push((parent.len(), child_run));
                parent.push(Some(v));
            }
        }
        frontier = next;
    }
    RootedTree::from_parents(parent)
}

/// Inserts nonbranching segments: every edge from a vertex at level `g` to
/// one of its children is replaced by a path with `schedule(g)` interior
/// vertices. A constant schedule gives bounded gaps between branchings; the
/// schedule `g -> g` gives the stretched tree with unboundedly long
/// nonbranching segments.
pub fn graft_segments(
    tree: &RootedTree,
    schedule: impl Fn(u32) -> u32,
    budget: usize,
) -> Result<RootedTree> {
    let extra: usize = (0..tree.len())
        .map(|v| tree.children(v).len() * schedule(tree.level(v)) as usize)
        .sum();
    if tree.len() + extra > budget {
        return Err(Error::VertexBudget { needed: tree.len() + extra, budget });
    }
    let mut parent: Vec<Option<VertexId>> = vec![None];
    let mut queue = std::collections::VecDeque::from([(tree.root(), 0usize)]);
    while let Some((v, nv)) = queue.pop_front() {
        let len = schedule(tree.level(v));
        for &c in tree.children(v) {
            let mut attach = nv;
            for _ in 0..len {
                parent.push(Some(attach));
                attach = parent.len() - 1;
            }
            parent.push(Some(attach));
            queue.push_back((c, parent.len() - 1));
        }
    }
    RootedTree::from_parents(parent)
}

/// Appends a nonbranching dead end of `length` new vertices hanging off `at`.
pub fn attach_dead_end(tree: &RootedTree, at: VertexId, length: u32) -> Result<RootedTree> {
    tree.graph().check_vertex(at)?;
    let mut parent = tree.parents().to_vec();
    let mut attach = at;
    for _ in 0..length {
        parent.push(Some(attach));
        attach = parent.len() - 1;
    }
    RootedTree::from_parents(parent)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PredicateReport {
    pub passed: bool,
    pub witness: Option<VertexId>,
}

/// Checks that every `a` with `level(a) <= D - K` has at least two
/// descendants at level `level(a) + K`.
pub fn check_pseudo_regular(tree: &RootedTree, k: u32) -> Result<PredicateReport> {
    let depth = tree.depth();
    if k < 1 || k >= depth {
        return Err(Error::Input(format!("K must lie in 1..={}, got {k}", depth.saturating_sub(1))));
    }
    let mut count = vec![0u32; tree.len()];
    for v in 0..tree.len() {
        if tree.level(v) >= k {
            if let Some(a) = tree.ancestor(v, k) {
                count[a] += 1;
            }
        }
    }
    let witness = (0..tree.len()).find(|&a| tree.level(a) + k <= depth && count[a] < 2);
    Ok(PredicateReport { passed: witness.is_none(), witness })
}

/// Smallest `K` in `1..D` for which the tree passes, if any.
pub fn min_pseudo_regular_constant(tree: &RootedTree) -> Option<u32> {
    (1..tree.depth()).find(|&k| check_pseudo_regular(tree, k).map(|r| r.passed).unwrap_or(false))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VisualReport {
    pub passed: bool,
    pub witness: Option<VertexId>,
    /// Vertices farther than `C` from every full-depth ray but within `C`
    /// levels of the truncation depth.
    pub indeterminate: Vec<VertexId>,
    /// Largest distance from any vertex to the union of full-depth rays.
    pub observed_constant: u32,
}

/// Distance from each vertex to the union of root-to-level-`D` geodesics.
pub fn distance_to_core(tree: &RootedTree) -> Vec<u32> {
    let mask = tree.core_mask();
    let core: Vec<_> = (0..tree.len()).filter(|&v| mask[v]).collect();
    tree.graph().multi_source_bfs(&core, UNREACHED)
}

/// Finite surrogate for visuality: every vertex within `C` of a
/// root-to-level-`D` geodesic.
pub fn check_visual(tree: &RootedTree, c: u32) -> VisualReport {
    let dist = distance_to_core(tree);
    let depth = tree.depth();
    let mut witness = None;
    let mut indeterminate = Vec::new();
    for (v, &d) in dist.iter().enumerate() {
        if d > c {
            if depth - tree.level(v) <= c {
                indeterminate.push(v);
            } else if witness.is_none() {
                witness = Some(v);
            }
        }
    }
    VisualReport {
        passed: witness.is_none(),
        witness,
        indeterminate,
        observed_constant: dist.into_iter().max().unwrap_or(0),
    }
}

/// `T_x^v = { y : x lies on the geodesic [v, y] }`, sorted.
pub fn branch_subtree(tree: &RootedTree, x: VertexId, v: VertexId) -> Result<Vec<VertexId>> {
    let g = tree.graph();
    let from_v = g.distances_from(v)?;
    let from_x = g.distances_from(x)?;
    let dvx = from_v[x];
    Ok((0..tree.len()).filter(|&y| dvx + from_x[y] == from_v[y]).collect())
}

/// The geodesically complete core of a truncated tree together with the
/// nearest-point retraction onto it.
#[derive(Clone, Debug)]
pub struct CompleteCore {
    pub core: RootedTree,
    /// Original id of each core vertex.
    pub core_to_original: Vec<VertexId>,
    /// Core id of each original vertex, if it survives.
    pub original_to_core: Vec<Option<VertexId>>,
    /// Nearest core vertex (original ids), ties to the smallest id.
    pub retraction: Vec<VertexId>,
    pub retraction_distance: Vec<u32>,
}

pub fn complete_core(tree: &RootedTree) -> Result<CompleteCore> {
    let mask = tree.core_mask();
    let core_to_original: Vec<VertexId> = (0..tree.len()).filter(|&v| mask[v]).collect();
    let mut original_to_core = vec![None; tree.len()];
    for (i, &v) in core_to_original.iter().enumerate() {
        original_to_core[v] = Some(i);
    }
    let parents = core_to_original
        .iter()
        .map(|&v| tree.parent(v).map(|p| original_to_core[p].expect("ancestors of core are core")))
        .collect();
    let core = RootedTree::from_parents(parents)?;

    // layered search from the core; owner = smallest id among nearest core vertices
    let g = tree.graph();
    let mut owner: Vec<Option<VertexId>> = (0..tree.len()).map(|v| mask[v].then_some(v)).collect();
    let mut dist: Vec<u32> = mask.iter().map(|&m| if m { 0 } else { UNREACHED }).collect();
    let mut layer = core_to_original.clone();
    let mut d = 0;
    while !layer.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &u in &layer {
            for &v in g.neighbors(u) {
                if dist[v] == UNREACHED {
                    dist[v] = d;
                    owner[v] = owner[u];
                    next.push(v);
                } else if dist[v] == d {
                    owner[v] = owner[v].min(owner[u]);
                }
            }
        }
        layer = next;
    }
    let retraction = owner.into_iter().map(|o| o.expect("tree is connected")).collect();
    Ok(CompleteCore { core, core_to_original, original_to_core, retraction, retraction_distance: dist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path_tree(depth: u32) -> RootedTree {
        RootedTree::from_parents((0..=depth as usize).map(|i| i.checked_sub(1)).collect()).unwrap()
    }

    #[test]
    fn kary_sizes() {
        assert_eq!(gen_kary(2, 3).unwrap().len(), 15);
        assert_eq!(gen_kary(3, 2).unwrap().len(), 13);
        let t = gen_kary(2, 1).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.graph().degree(t.root()), 2);
        let t = gen_kary(3, 4).unwrap();
        for level in 0..=4u32 {
            assert_eq!(t.graph().sphere(0, level).unwrap().len(), 3usize.pow(level));
        }
        assert!(matches!(gen_kary_with_budget(3, 20, 1000), Err(Error::VertexBudget { .. })));
        assert!(gen_kary(1, 3).is_err());
    }

    #[test]
    fn pseudo_regular_generation() {
        for seed in 0..4 {
            let t = gen_random_pseudo_regular(seed, 1, 5, 3).unwrap();
            assert_eq!(t.parents(), gen_kary(2, 5).unwrap().parents());
        }
        let t = gen_random_pseudo_regular(7, 3, 9, 4).unwrap();
        assert!(t.graph().mu() <= 4);
        assert!(check_pseudo_regular(&t, 3).unwrap().passed);
        let again = gen_random_pseudo_regular(7, 3, 9, 4).unwrap();
        assert_eq!(t.graph().edges().collect::<Vec<_>>(), again.graph().edges().collect::<Vec<_>>());
        assert!(matches!(gen_random_pseudo_regular(1, 2, 4, 2), Err(Error::Infeasible(_))));
    }

    #[test]
    fn grafting() {
        let b = gen_kary(2, 4).unwrap();
        let same = graft_segments(&b, |_| 0, DEFAULT_VERTEX_BUDGET).unwrap();
        assert_eq!(same.parents(), b.parents());

        let g2 = graft_segments(&b, |_| 2, DEFAULT_VERTEX_BUDGET).unwrap();
        assert!(check_visual(&g2, 2).passed);
        assert_eq!(min_pseudo_regular_constant(&g2), Some(3));
        assert!(!check_pseudo_regular(&g2, 2).unwrap().passed);

        let stretched = graft_segments(&gen_kary(2, 10).unwrap(), |g| g, DEFAULT_VERTEX_BUDGET).unwrap();
        for k in 1..=9 {
            assert!(!check_pseudo_regular(&stretched, k).unwrap().passed, "K={k}");
        }
        assert!(matches!(graft_segments(&b, |_| 100, 1000), Err(Error::VertexBudget { .. })));
    }

    #[test]
    fn pseudo_regular_checks() {
        assert!(check_pseudo_regular(&gen_kary(3, 6).unwrap(), 1).unwrap().passed);
        let p = path_tree(6);
        for k in 1..6 {
            let r = check_pseudo_regular(&p, k).unwrap();
            assert!(!r.passed);
            assert!(r.witness.is_some());
        }
        assert!(check_pseudo_regular(&p, 6).is_err());
        assert!(check_pseudo_regular(&p, 0).is_err());
    }

    #[test]
    fn visual_checks() {
        assert!(check_visual(&gen_kary(2, 5).unwrap(), 0).passed);
        assert!(check_visual(&path_tree(5), 0).passed);

        let b = gen_kary(2, 8).unwrap();
        let dead = attach_dead_end(&b, 1, 3).unwrap();
        let tip = dead.len() - 1;
        // oracle: the tip hangs three edges below vertex 1, which lies on full rays
        assert_eq!(dead.graph().distance(tip, 1).unwrap(), 3);
        let r2 = check_visual(&dead, 2);
        assert!(!r2.passed);
        assert_eq!(r2.witness, Some(tip));
        assert!(check_visual(&dead, 3).passed);
    }

    #[test]
    fn branch_subtrees() {
        let t = gen_kary(2, 3).unwrap();
        assert_eq!(branch_subtree(&t, 4, 4).unwrap().len(), t.len());
        let leaf = t.leaves().next().unwrap();
        assert_eq!(branch_subtree(&t, leaf, 0).unwrap(), vec![leaf]);
        assert_eq!(branch_subtree(&t, 1, 0).unwrap().len(), 7);
    }

    #[test]
    fn cores() {
        let c = complete_core(&gen_kary(2, 4).unwrap()).unwrap();
        assert_eq!(c.core.len(), 31);
        assert!(c.retraction.iter().enumerate().all(|(v, &r)| v == r));

        let b = gen_kary(2, 6).unwrap();
        let at = (0..b.len()).find(|&v| b.level(v) == 3).unwrap();
        let dead = attach_dead_end(&b, at, 2).unwrap();
        let c = complete_core(&dead).unwrap();
        assert_eq!(c.core.len(), b.len());
        for v in b.len()..dead.len() {
            assert_eq!(c.original_to_core[v], None);
            assert_eq!(c.retraction[v], at);
            // oracle: BFS distance to the attachment vertex
            assert_eq!(c.retraction_distance[v], dead.graph().distance(v, at).unwrap());
            assert!(c.retraction_distance[v] <= 2);
        }

        let p = complete_core(&path_tree(5)).unwrap();
        assert_eq!(p.core.len(), 6);
    }

    proptest! {
        #[test]
        fn pseudo_regular_monotone(seed in 0u64..500, k in 1u32..4) {
            let t = gen_random_pseudo_regular(seed, k, 7, 4).unwrap();
            prop_assert!(t.is_geodesically_complete());
            let first = min_pseudo_regular_constant(&t).unwrap();
            prop_assert!(first <= k);
            for kk in first..7 {
                prop_assert!(check_pseudo_regular(&t, kk).unwrap().passed);
            }
        }

        #[test]
        fn branch_subtree_from_root_is_descendants(seed in 0u64..200, pick in any::<u16>()) {
            let t = gen_random_pseudo_regular(seed, 2, 5, 4).unwrap();
            let x = pick as usize % t.len();
            prop_assert_eq!(branch_subtree(&t, x, t.root()).unwrap(), t.descendants(x));
        }

        #[test]
        fn retraction_within_visual_constant(seed in 0u64..200, at_pick in any::<u16>(), len in 0u32..4) {
            let base = gen_random_pseudo_regular(seed, 2, 6, 4).unwrap();
            let at = at_pick as usize % base.len();
            prop_assume!(base.level(at) + len < base.depth());
            let t = attach_dead_end(&base, at, len).unwrap();
            let vis = check_visual(&t, len);
            let core = complete_core(&t).unwrap();
            prop_assert!(vis.passed || !vis.indeterminate.is_empty());
            prop_assert!(core.retraction_distance.iter().all(|&d| d <= vis.observed_constant));
            for (i, &v) in core.core_to_original.iter().enumerate() {
                prop_assert_eq!(core.retraction[v], v);
                prop_assert_eq!(core.original_to_core[v], Some(i));
            }
        }
    }
}
