//! Isoperimetric ratios `|∂A| / |A|` on truncation interiors.
//!
//! Test sets range over the interior of a truncation; their boundaries are
//! always taken in the whole truncated graph, so collar vertices count.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Truncation, UdbgGraph, VertexId};
use crate::rational::Rational;

/// Largest interior for which every subset is enumerated.
pub const EXACT_INTERIOR_LIMIT: usize = 24;
const SUBSET_BUDGET: u64 = 1 << EXACT_INTERIOR_LIMIT;
const BALL_CENTERS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Family,
    LocalSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Balls,
    LevelBands,
    DescendantSubtrees,
    RandomConnected { count: usize, size: usize },
}

impl Family {
    /// Every family, with `random-connected(64, 32)`.
    pub fn all() -> Vec<Family> {
        vec![
            Family::Balls,
            Family::LevelBands,
            Family::DescendantSubtrees,
            Family::RandomConnected { count: 64, size: 32 },
        ]
    }

    /// Parses `balls`, `bands`, `subtrees`, `random` or `random:COUNT:SIZE`.
    pub fn parse(s: &str) -> Result<Family> {
        let mut parts = s.trim().split(':');
        let head = parts.next().unwrap_or_default();
        let fam = match head {
            "balls" => Family::Balls,
            "bands" | "level-bands" => Family::LevelBands,
            "subtrees" | "descendant-subtrees" => Family::DescendantSubtrees,
            "random" | "random-connected" => {
                let nums: Vec<usize> = parts
                    .by_ref()
                    .map(|p| p.parse().map_err(|_| Error::Input(format!("bad family parameter in {s:?}"))))
                    .collect::<Result<_>>()?;
                match nums.as_slice() {
                    [] => Family::RandomConnected { count: 64, size: 32 },
                    [count, size] => Family::RandomConnected { count: *count, size: *size },
                    _ => return Err(Error::Input(format!("expected random:COUNT:SIZE, got {s:?}"))),
                }
            }
            _ => return Err(Error::Input(format!("unknown family {s:?}"))),
        };
        if parts.next().is_some() {
            return Err(Error::Input(format!("unexpected parameters in {s:?}")));
        }
        Ok(fam)
    }

    pub fn parse_list(s: &str) -> Result<Vec<Family>> {
        if s.trim() == "all" {
            return Ok(Family::all());
        }
        s.split(',').filter(|p| !p.trim().is_empty()).map(Family::parse).collect()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Balls => write!(f, "balls"),
            Family::LevelBands => write!(f, "level-bands"),
            Family::DescendantSubtrees => write!(f, "descendant-subtrees"),
            Family::RandomConnected { count, size } => write!(f, "random-connected({count},{size})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheegerCertificate {
    pub best_ratio: Rational,
    pub argmin_set: Vec<VertexId>,
    pub boundary_size: usize,
    pub method: Method,
    pub family: String,
    pub collar: u32,
    pub sets_tested: u64,
}

impl CheegerCertificate {
    /// Recomputes the ratio of `argmin_set` from scratch.
    pub fn verify(&self, trunc: &Truncation) -> bool {
        let interior_ok = self.argmin_set.iter().all(|&v| v < trunc.graph().len() && trunc.is_interior(v, self.collar));
        let boundary = trunc.graph().vertex_boundary(&self.argmin_set, 1).map(|b| b.len()).unwrap_or(usize::MAX);
        !self.argmin_set.is_empty()
            && interior_ok
            && boundary == self.boundary_size
            && Rational::new(boundary as i64, self.argmin_set.len() as i64) == self.best_ratio
    }
}

/// Vertices farther than `w` from the truncation sphere, sorted.
pub fn interior_of_truncation(trunc: &Truncation, w: u32) -> Result<Vec<VertexId>> {
    let interior = trunc.interior(w);
    if interior.is_empty() {
        return Err(Error::EmptyInterior { collar: w, depth: trunc.depth() });
    }
    Ok(interior)
}

/// Ordering used to pick a minimizer: ratio, then size, then the sorted
/// vertex list.
fn better(a: (Rational, &[VertexId]), b: (Rational, &[VertexId])) -> bool {
    (a.0, a.1.len(), a.1) < (b.0, b.1.len(), b.1)
}

#[derive(Clone)]
struct Best {
    ratio: Rational,
    set: Vec<VertexId>,
    boundary: usize,
}

fn pick(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if better((b.ratio, &b.set), (a.ratio, &a.set)) { b } else { a }),
        (a, b) => a.or(b),
    }
}

fn binomial_prefix_sum(n: usize, k: usize) -> u64 {
    let mut total = 0u64;
    let mut c = 1u64;
    for i in 0..=k.min(n) {
        total = total.saturating_add(c);
        c = c.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    total
}

/// Exact minimum of `|∂A| / |A|` over all nonempty interior subsets with
/// at most `max_size` members.
pub fn cheeger_exact(trunc: &Truncation, w: u32, max_size: Option<usize>) -> Result<CheegerCertificate> {
    let interior = interior_of_truncation(trunc, w)?;
    let n = interior.len();
    let cap = max_size.unwrap_or(n).min(n);
    if cap == 0 {
        return Err(Error::Input("max_size must be at least 1".into()));
    }
    if n > 63 || binomial_prefix_sum(n, cap) > SUBSET_BUDGET {
        return Err(Error::EnumerationBudget { interior: n, max_size: cap });
    }
    let g = trunc.graph();
    let best = if n <= EXACT_INTERIOR_LIMIT {
        let total: u64 = 1 << n;
        let block = 1u64 << 12;
        (0..total.div_ceil(block))
            .into_par_iter()
            .map_init(
                || vec![false; g.len()],
                |mask, b| {
                    let mut best: Option<Best> = None;
                    let mut members = Vec::with_capacity(n);
                    for bits in (b * block).max(1)..((b + 1) * block).min(total) {
                        if bits.count_ones() as usize > cap {
                            continue;
                        }
                        members.clear();
                        members.extend((0..n).filter(|i| bits >> i & 1 == 1).map(|i| interior[i]));
                        consider(g, &members, mask, &mut best);
                    }
                    best
                },
            )
            .reduce(|| None, pick)
    } else {
        // small sets of a larger interior: walk k-combinations in lexicographic order
        (1..=cap)
            .into_par_iter()
            .map_init(
                || vec![false; g.len()],
                |mask, k| {
                    let mut best: Option<Best> = None;
                    let mut idx: Vec<usize> = (0..k).collect();
                    loop {
                        let members: Vec<VertexId> = idx.iter().map(|&i| interior[i]).collect();
                        consider(g, &members, mask, &mut best);
                        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { break };
                        idx[i] += 1;
                        for j in i + 1..k {
                            idx[j] = idx[j - 1] + 1;
                        }
                    }
                    best
                },
            )
            .reduce(|| None, pick)
    }
    .expect("interior is nonempty");
    Ok(CheegerCertificate {
        best_ratio: best.ratio,
        argmin_set: best.set,
        boundary_size: best.boundary,
        method: Method::Exact,
        family: format!("all subsets of size <= {cap}"),
        collar: w,
        sets_tested: binomial_prefix_sum(n, cap) - 1,
    })
}

/// Replaces `best` when `members` beats it; allocates only on improvement.
fn consider(g: &UdbgGraph, members: &[VertexId], mask: &mut [bool], best: &mut Option<Best>) {
    for &v in members {
        mask[v] = true;
    }
    let boundary = g.boundary_size_mask(members, mask);
    for &v in members {
        mask[v] = false;
    }
    let ratio = Rational::new(boundary as i64, members.len() as i64);
    if best.as_ref().is_none_or(|b| better((ratio, members), (b.ratio, &b.set))) {
        *best = Some(Best { ratio, set: members.to_vec(), boundary });
    }
}

/// One generated test set and the family it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestSet {
    pub family: Family,
    pub members: Vec<VertexId>,
}

/// Builds the requested families of interior sets, deduplicated, in a
/// deterministic order.
pub fn generate_family(trunc: &Truncation, w: u32, families: &[Family], seed: u64) -> Result<Vec<TestSet>> {
    if families.is_empty() {
        return Err(Error::Input("no test families requested".into()));
    }
    let interior = interior_of_truncation(trunc, w)?;
    let g = trunc.graph();
    let inside = {
        let mut m = vec![false; g.len()];
        for &v in &interior {
            m[v] = true;
        }
        m
    };
    let restrict = |set: Vec<VertexId>| -> Vec<VertexId> { set.into_iter().filter(|&v| inside[v]).collect() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: BTreeSet<Vec<VertexId>> = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |family: Family, set: Vec<VertexId>, out: &mut Vec<TestSet>| {
        if !set.is_empty() && seen.insert(set.clone()) {
            out.push(TestSet { family, members: set });
        }
    };

    for &family in families {
        match family {
            Family::Balls => {
                let mut centers: Vec<VertexId> = g.root().filter(|&r| inside[r]).into_iter().collect();
                let mut pool = interior.clone();
                pool.shuffle(&mut rng);
                centers.extend(pool.into_iter().filter(|c| Some(*c) != g.root()).take(BALL_CENTERS));
                for c in centers {
                    let dist = g.multi_source_bfs(&[c], crate::graph::UNREACHED);
                    let mut by_radius: Vec<Vec<VertexId>> = Vec::new();
                    for &v in &interior {
                        let d = dist[v] as usize;
                        if by_radius.len() <= d {
                            by_radius.resize(d + 1, Vec::new());
                        }
                        by_radius[d].push(v);
                    }
                    let mut ball = Vec::new();
                    for layer in by_radius {
                        if layer.is_empty() {
                            continue;
                        }
                        ball.extend(layer);
                        ball.sort_unstable();
                        push(family, ball.clone(), &mut out);
                    }
                }
            }
            Family::LevelBands => {
                let levels = g
                    .levels()
                    .ok_or_else(|| Error::Input("level bands need level labels".into()))?;
                let top = interior.iter().map(|&v| levels[v]).max().unwrap_or(0);
                for a in 0..=top {
                    for b in a..=top {
                        let band: Vec<VertexId> =
                            interior.iter().copied().filter(|&v| (a..=b).contains(&levels[v])).collect();
                        push(family, band, &mut out);
                    }
                }
            }
            Family::DescendantSubtrees => {
                let levels = g
                    .levels()
                    .ok_or_else(|| Error::Input("descendant subtrees need level labels".into()))?;
                for &v in &interior {
                    let mut set = vec![v];
                    let mut marked = std::collections::HashSet::from([v]);
                    let mut i = 0;
                    while i < set.len() {
                        let u = set[i];
                        for &x in g.neighbors(u) {
                            if levels[x] == levels[u] + 1 && inside[x] && marked.insert(x) {
                                set.push(x);
                            }
                        }
                        i += 1;
                    }
                    set.sort_unstable();
                    push(family, restrict(set), &mut out);
                }
            }
            Family::RandomConnected { count, size } => {
                for _ in 0..count {
                    let start = interior[rng.gen_range(0..interior.len())];
                    let mut set = vec![start];
                    let mut member = std::collections::HashSet::from([start]);
                    let mut frontier: Vec<VertexId> = Vec::new();
                    let mut in_frontier = std::collections::HashSet::new();
                    let extend = |u: VertexId, frontier: &mut Vec<VertexId>, in_frontier: &mut std::collections::HashSet<VertexId>, member: &std::collections::HashSet<VertexId>| {
                        for &x in g.neighbors(u) {
                            if inside[x] && !member.contains(&x) && in_frontier.insert(x) {
                                frontier.push(x);
                            }
                        }
                    };
                    extend(start, &mut frontier, &mut in_frontier, &member);
                    let mut sorted = set.clone();
                    push(family, sorted.clone(), &mut out);
                    while set.len() < size && !frontier.is_empty() {
                        let x = frontier.swap_remove(rng.gen_range(0..frontier.len()));
                        in_frontier.remove(&x);
                        member.insert(x);
                        set.push(x);
                        extend(x, &mut frontier, &mut in_frontier, &member);
                        sorted.clone_from(&set);
                        sorted.sort_unstable();
                        push(family, sorted.clone(), &mut out);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `|∂_r S|` for every test set, in the full graph.
pub fn boundary_sizes(g: &UdbgGraph, sets: &[TestSet], r: u32) -> Vec<usize> {
    if r == 1 {
        return sets
            .par_iter()
            .map_init(
                || vec![false; g.len()],
                |mask, s| {
                    for &v in &s.members {
                        mask[v] = true;
                    }
                    let b = g.boundary_size_mask(&s.members, mask);
                    for &v in &s.members {
                        mask[v] = false;
                    }
                    b
                },
            )
            .collect();
    }
    sets.par_iter()
        .map(|s| g.vertex_boundary(&s.members, r).expect("family sets are valid").len())
        .collect()
}

fn describe(families: &[Family], seed: u64) -> String {
    let names: Vec<String> = families.iter().map(|f| f.to_string()).collect();
    format!("{} seed={seed}", names.join(","))
}

/// Minimum ratio over the generated families.
pub fn cheeger_family(trunc: &Truncation, w: u32, families: &[Family], seed: u64) -> Result<CheegerCertificate> {
    let sets = generate_family(trunc, w, families, seed)?;
    certificate_from_sets(trunc, w, &sets, describe(families, seed))
}

/// Minimum ratio over a given list of sets.
pub fn certificate_from_sets(
    trunc: &Truncation,
    w: u32,
    sets: &[TestSet],
    family: String,
) -> Result<CheegerCertificate> {
    if sets.is_empty() {
        return Err(Error::Input("family produced no sets".into()));
    }
    let sizes = boundary_sizes(trunc.graph(), sets, 1);
    let mut best: Option<Best> = None;
    for (s, &b) in sets.iter().zip(&sizes) {
        let ratio = Rational::new(b as i64, s.members.len() as i64);
        // |A| <= (1 / ratio) |∂A| holds for the minimizer's ratio by construction
        if best.as_ref().is_none_or(|cur| better((ratio, &s.members), (cur.ratio, &cur.set))) {
            best = Some(Best { ratio, set: s.members.clone(), boundary: b });
        }
    }
    let best = best.expect("nonempty");
    Ok(CheegerCertificate {
        best_ratio: best.ratio,
        argmin_set: best.set,
        boundary_size: best.boundary,
        method: Method::Family,
        family,
        collar: w,
        sets_tested: sets.len() as u64,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IsoReport {
    pub passed: bool,
    pub constant: Rational,
    pub sets_tested: u64,
    /// Set with the largest `|A| / |∂A|`; the failing set when the check fails.
    pub witness: Vec<VertexId>,
    pub witness_ratio: Rational,
}

/// Checks `|A| <= C |∂A|` on every family set.
pub fn certify_linear_iso(
    trunc: &Truncation,
    w: u32,
    c: Rational,
    families: &[Family],
    seed: u64,
) -> Result<IsoReport> {
    if c <= Rational::zero() {
        return Err(Error::Input(format!("constant must be positive, got {c}")));
    }
    let sets = generate_family(trunc, w, families, seed)?;
    let sizes = boundary_sizes(trunc.graph(), &sets, 1);
    let mut worst: Option<(Rational, &[VertexId])> = None;
    for (s, &b) in sets.iter().zip(&sizes) {
        let r = Rational::new(s.members.len() as i64, b as i64);
        let replace = match worst {
            None => true,
            Some((wr, ws)) => (r, std::cmp::Reverse(s.members.len()), std::cmp::Reverse(&s.members[..]))
                > (wr, std::cmp::Reverse(ws.len()), std::cmp::Reverse(ws)),
        };
        if replace {
            worst = Some((r, &s.members));
        }
    }
    let (witness_ratio, witness) = worst.expect("nonempty family");
    Ok(IsoReport {
        passed: witness_ratio <= c,
        constant: c,
        sets_tested: sets.len() as u64,
        witness: witness.to_vec(),
        witness_ratio,
    })
}
