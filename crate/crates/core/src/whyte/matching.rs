use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Truncation, UdbgGraph, VertexId};
use crate::qi::{pair_distance, VertexMap};
use crate::rational::Rational;

const NONE: usize = usize::MAX;
/// Matched-domain size up to which `Auto` scans every pair.
pub const EXACT_PAIR_LIMIT: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    Exact,
    /// Every edge on both sides plus all pairs from `sources` seeded picks.
    Sampled { seed: u64, sources: usize },
    Auto,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingResult {
    pub pairs: Vec<(VertexId, VertexId)>,
    pub r: u32,
    pub collar: u32,
    pub unmatched_x: Vec<VertexId>,
    pub unmatched_y: Vec<VertexId>,
    /// Largest distance from an unmatched target vertex to the truncation sphere.
    pub confinement_width: u32,
    pub bilipschitz: Rational,
    pub bilipschitz_exact: bool,
    pub map_distance: u32,
}

/// Bipartite graph `x ~ y` iff `d_Y(f(x), y) <= r`, neighbor lists sorted.
struct Bipartite {
    adj: Vec<std::sync::Arc<Vec<VertexId>>>,
    rev: Vec<Vec<VertexId>>,
}

impl Bipartite {
    fn build(vm: &VertexMap, gy: &UdbgGraph, r: u32) -> Self {
        let mut images: Vec<VertexId> = vm.image().to_vec();
        images.sort_unstable();
        images.dedup();
        let balls: HashMap<VertexId, std::sync::Arc<Vec<VertexId>>> = images
            .par_iter()
            .map(|&w| (w, std::sync::Arc::new(gy.ball(w, r).expect("image vertices exist"))))
            .collect();
        let adj: Vec<_> = vm.image().iter().map(|w| balls[w].clone()).collect();
        let mut rev = vec![Vec::new(); gy.len()];
        for (x, ys) in adj.iter().enumerate() {
            for &y in ys.iter() {
                rev[y].push(x);
            }
        }
        Bipartite { adj, rev }
    }
}

struct Matcher<'a> {
    bip: &'a Bipartite,
    mate_x: Vec<usize>,
    mate_y: Vec<usize>,
}

impl Matcher<'_> {
    /// Hopcroft-Karp restricted to the free vertices listed in `left`.
    fn hopcroft_karp(&mut self, left: &[VertexId]) {
        loop {
            let mut layer = vec![u32::MAX; self.mate_x.len()];
            let mut queue = VecDeque::new();
            for &x in left {
                if self.mate_x[x] == NONE {
                    layer[x] = 0;
                    queue.push_back(x);
                }
            }
            let mut found = false;
            while let Some(x) = queue.pop_front() {
                for &y in self.bip.adj[x].iter() {
                    let next = self.mate_y[y];
                    if next == NONE {
                        found = true;
                    } else if layer[next] == u32::MAX {
                        layer[next] = layer[x] + 1;
                        queue.push_back(next);
                    }
                }
            }
            if !found {
                return;
            }
            let mut progress = false;
            for &x in left {
                if self.mate_x[x] == NONE && self.augment_from(x, &mut layer) {
                    progress = true;
                }
            }
            if !progress {
                return;
            }
        }
    }

    /// Iterative layered DFS for one augmenting path from the free `root`.
    fn augment_from(&mut self, root: VertexId, layer: &mut [u32]) -> bool {
        let mut stack: Vec<(VertexId, usize)> = vec![(root, 0)];
        let mut via: Vec<VertexId> = Vec::new();
        while let Some(&mut (x, ref mut i)) = stack.last_mut() {
            let ys = &self.bip.adj[x];
            if *i == ys.len() {
                layer[x] = u32::MAX;
                stack.pop();
                via.pop();
                continue;
            }
            let y = ys[*i];
            *i += 1;
            let next = self.mate_y[y];
            if next == NONE {
                via.push(y);
                for (k, &(xk, _)) in stack.iter().enumerate() {
                    let yk = via[k];
                    self.mate_x[xk] = yk;
                    self.mate_y[yk] = xk;
                }
                return true;
            }
            if layer[next] == layer[x].wrapping_add(1) {
                via.push(y);
                stack.push((next, 0));
            }
        }
        false
    }

    /// Covers the free target `y0` by an alternating path ending at a free
    /// source vertex, or at a source whose mate may be released.
    fn cover_target(&mut self, y0: VertexId, releasable: &[bool]) -> bool {
        let mut parent_x: HashMap<VertexId, VertexId> = HashMap::new();
        let mut queue = VecDeque::from([y0]);
        let mut seen_y: HashMap<VertexId, ()> = HashMap::from([(y0, ())]);
        let mut end = None;
        'search: while let Some(y) = queue.pop_front() {
            for &x in &self.bip.rev[y] {
                if parent_x.contains_key(&x) || self.mate_x[x] == y {
                    continue;
                }
                parent_x.insert(x, y);
                let mate = self.mate_x[x];
                if mate == NONE || releasable[mate] {
                    end = Some(x);
                    break 'search;
                }
                if seen_y.insert(mate, ()).is_none() {
                    queue.push_back(mate);
                }
            }
        }
        let Some(mut x) = end else { return false };
        if self.mate_x[x] != NONE {
            let released = self.mate_x[x];
            self.mate_y[released] = NONE;
            self.mate_x[x] = NONE;
        }
        loop {
            let y = parent_x[&x];
            let previous = self.mate_y[y];
            self.mate_x[x] = y;
            self.mate_y[y] = x;
            if y == y0 {
                return true;
            }
            x = previous;
        }
    }
}

fn interior_mask(t: &Truncation, w: u32) -> Vec<bool> {
    (0..t.graph().len()).map(|v| t.is_interior(v, w)).collect()
}

/// Interior-saturating maximum matching at the smallest radius in
/// `r_start..=r_max` that admits one.
pub fn promote_matching(
    vm: &VertexMap,
    x: &Truncation,
    y: &Truncation,
    r_start: u32,
    r_max: u32,
    collar: u32,
) -> Result<MatchingResult> {
    let (gx, gy) = (x.graph(), y.graph());
    vm.validate(gx, gy)?;
    if r_start > r_max {
        return Err(Error::Input(format!("radius range {r_start}..={r_max} is empty")));
    }
    let x_int: Vec<VertexId> = (0..gx.len()).filter(|&v| x.is_interior(v, collar)).collect();
    let y_inside = interior_mask(y, collar);
    let y_int_len = y_inside.iter().filter(|&&b| b).count();
    let fail = |reason: String| Error::NoBoundedMatching { r_start, r_max, reason };
    if x_int.len() > gy.len() {
        return Err(fail(format!("{} source interior vertices but only {} targets", x_int.len(), gy.len())));
    }
    if y_int_len > gx.len() {
        return Err(fail(format!("{y_int_len} target interior vertices but only {} sources", gx.len())));
    }
    let releasable: Vec<bool> = y_inside.iter().map(|&b| !b).collect();
    let all_x: Vec<VertexId> = (0..gx.len()).collect();

    for r in r_start..=r_max {
        let bip = Bipartite::build(vm, gy, r);
        let mut m = Matcher { bip: &bip, mate_x: vec![NONE; gx.len()], mate_y: vec![NONE; gy.len()] };
        m.hopcroft_karp(&x_int);
        if x_int.iter().any(|&v| m.mate_x[v] == NONE) {
            continue;
        }
        let covered = (0..gy.len()).filter(|&v| y_inside[v]).all(|v| m.mate_y[v] != NONE || m.cover_target(v, &releasable));
        if !covered {
            continue;
        }
        m.hopcroft_karp(&all_x);

        let pairs: Vec<(VertexId, VertexId)> =
            (0..gx.len()).filter(|&v| m.mate_x[v] != NONE).map(|v| (v, m.mate_x[v])).collect();
        let unmatched_x = (0..gx.len()).filter(|&v| m.mate_x[v] == NONE).collect();
        let unmatched_y: Vec<VertexId> = (0..gy.len()).filter(|&v| m.mate_y[v] == NONE).collect();
        let confinement_width = unmatched_y.iter().map(|&v| y.distance_to_sphere(v)).max().unwrap_or(0);
        let (bilipschitz, bilipschitz_exact) = if pairs.len() >= 2 {
            bilipschitz_constant(&pairs, gx, gy, PairMode::Auto)?
        } else {
            (Rational::one(), true)
        };
        let map_distance = map_distance(vm, &pairs, gy);
        return Ok(MatchingResult {
            pairs,
            r,
            collar,
            unmatched_x,
            unmatched_y,
            confinement_width,
            bilipschitz,
            bilipschitz_exact,
            map_distance,
        });
    }
    Err(fail(format!("no interior-saturating matching at radius <= {r_max}")))
}

/// Largest `max(d_Y/d_X, d_X/d_Y)` over pairs of the partial bijection
/// given by `pairs`. Returns the constant and whether every pair was scanned.
pub fn bilipschitz_constant(
    pairs: &[(VertexId, VertexId)],
    gx: &UdbgGraph,
    gy: &UdbgGraph,
    mode: PairMode,
) -> Result<(Rational, bool)> {
    if pairs.len() < 2 {
        return Err(Error::Input("bilipschitz constant needs at least two points".into()));
    }
    let mut image = vec![NONE; gx.len()];
    let mut preimage = vec![NONE; gy.len()];
    for &(a, b) in pairs {
        gx.check_vertex(a)?;
        gy.check_vertex(b)?;
        if image[a] != NONE || preimage[b] != NONE {
            return Err(Error::Input(format!("map is not injective at ({a}, {b})")));
        }
        image[a] = b;
        preimage[b] = a;
    }
    let mode = match mode {
        PairMode::Auto if pairs.len() <= EXACT_PAIR_LIMIT => PairMode::Exact,
        PairMode::Auto => PairMode::Sampled { seed: 0, sources: 256 },
        m => m,
    };
    // ratios are kept as (numerator, denominator) and compared by cross-multiplication
    let worse = |a: (u64, u64), b: (u64, u64)| if a.0 * b.1 >= b.0 * a.1 { a } else { b };
    let ratio = |dx: u32, dy: u32| -> (u64, u64) {
        let (dx, dy) = (dx as u64, dy as u64);
        if dy >= dx {
            (dy, dx)
        } else {
            (dx, dy)
        }
    };
    let scan_from = |a: VertexId, all: bool| -> (u64, u64) {
        let rx = gx.bfs_from(a);
        let ry = gy.bfs_from(image[a]);
        let mut best = (1, 1);
        for &(c, d) in pairs {
            if c == a || (!all && c < a) {
                continue;
            }
            best = worse(best, ratio(rx[c], ry[d]));
        }
        best
    };
    let (best, exact) = match mode {
        PairMode::Exact => (pairs.par_iter().map(|&(a, _)| scan_from(a, false)).reduce(|| (1, 1), worse), true),
        PairMode::Sampled { seed, sources } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picks = rand::seq::index::sample(&mut rng, pairs.len(), sources.min(pairs.len())).into_vec();
            let sampled = picks.par_iter().map(|&i| scan_from(pairs[i].0, true)).reduce(|| (1, 1), worse);
            let edges_x = gx
                .edges()
                .collect::<Vec<_>>()
                .par_iter()
                .filter(|&&(u, v)| image[u] != NONE && image[v] != NONE)
                .map(|&(u, v)| ratio(1, pair_distance(gy, image[u], image[v])))
                .reduce(|| (1, 1), worse);
            let edges_y = gy
                .edges()
                .collect::<Vec<_>>()
                .par_iter()
                .filter(|&&(u, v)| preimage[u] != NONE && preimage[v] != NONE)
                .map(|&(u, v)| ratio(pair_distance(gx, preimage[u], preimage[v]), 1))
                .reduce(|| (1, 1), worse);
            (worse(worse(sampled, edges_x), edges_y), false)
        }
        PairMode::Auto => unreachable!(),
    };
    if best.1 == 0 {
        return Err(Error::Input("map sends two points to one".into()));
    }
    Ok((Rational::new(best.0 as i64, best.1 as i64), exact))
}

/// `max d_Y(f(x), g(x))` over matched `x`.
pub fn map_distance(vm: &VertexMap, pairs: &[(VertexId, VertexId)], gy: &UdbgGraph) -> u32 {
    pairs.par_iter().map(|&(a, b)| pair_distance(gy, vm.get(a), b)).max().unwrap_or(0)
}
