//! End-space correspondences, induced vertex maps between trees, and
//! measured quasi-isometry constants.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ends::EndSpace;
use crate::error::{Error, Result};
use crate::graph::{UdbgGraph, VertexId, UNREACHED};
use crate::rational::Rational;
use crate::tree::RootedTree;

/// A matched pair of ultrametric balls, given by their ray sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BallPair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EndMap {
    pub source_len: usize,
    pub target_len: usize,
    /// Target rays assigned to each source ray.
    pub images: Vec<Vec<usize>>,
    /// Pairs where the recursion stopped; leaf-to-leaf when both sides are single rays.
    pub terminals: Vec<(Vec<usize>, Vec<usize>)>,
    pub balls: Vec<BallPair>,
    /// Source exponent gap `(x|z) - (x|y)` to the observed `(min, max)` target gap.
    pub distortion: BTreeMap<i64, (i64, i64)>,
}

impl EndMap {
    pub fn is_bijective(&self) -> bool {
        self.source_len == self.target_len
            && self.terminals.iter().all(|(a, b)| a.len() == 1 && b.len() == 1)
    }

    /// The ray bijection, when there is one.
    pub fn ray_map(&self) -> Option<Vec<usize>> {
        self.is_bijective().then(|| self.images.iter().map(|im| im[0]).collect())
    }

    /// Nested source balls are matched to nested target balls.
    pub fn is_monotone(&self) -> bool {
        self.balls.iter().all(|pair| match pair.parent {
            None => true,
            Some(p) => {
                let up = &self.balls[p];
                is_subset(&pair.source, &up.source) && is_subset(&pair.target, &up.target)
            }
        })
    }
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    small.iter().all(|x| big.binary_search(x).is_ok())
}

/// Child balls of a ball with at least two rays, ordered by smallest ray.
fn split_ball(es: &EndSpace, ball: &[usize]) -> Result<Vec<Vec<usize>>> {
    let first = ball[0];
    let agree = ball[1..].iter().map(|&g| es.product(first, g)).min().expect("two or more rays");
    if agree >= es.depth() {
        return Err(Error::NoSplit { vertex: first });
    }
    let mut parts: Vec<Vec<usize>> = Vec::new();
    for &g in ball {
        match parts.iter_mut().find(|p| es.product(p[0], g) > agree) {
            Some(p) => p.push(g),
            None => parts.push(vec![g]),
        }
    }
    Ok(parts)
}

/// Splits `items` into `groups` contiguous runs whose sizes differ by at most one.
fn even_groups<T: Clone>(items: &[T], groups: usize) -> Vec<Vec<T>> {
    let (q, r) = (items.len() / groups, items.len() % groups);
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for i in 0..groups {
        let len = q + usize::from(i < r);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

struct Builder<'a> {
    a: &'a EndSpace,
    b: &'a EndSpace,
    balls: Vec<BallPair>,
    terminals: Vec<(Vec<usize>, Vec<usize>)>,
}

impl Builder<'_> {
    fn record(&mut self, source: &[Vec<usize>], target: &[Vec<usize>], parent: Option<usize>) -> usize {
        let mut s: Vec<usize> = source.concat();
        let mut t: Vec<usize> = target.concat();
        s.sort_unstable();
        t.sort_unstable();
        self.balls.push(BallPair { source: s, target: t, parent });
        self.balls.len() - 1
    }

    /// Matches two sibling lists whose unions have already been paired.
    fn pair_lists(&mut self, xs: Vec<Vec<usize>>, ys: Vec<Vec<usize>>, parent: Option<usize>) -> Result<()> {
        if xs.len() == 1 && ys.len() == 1 {
            let (x, y) = (&xs[0], &ys[0]);
            if x.len() == 1 || y.len() == 1 {
                self.terminals.push((x.clone(), y.clone()));
                return Ok(());
            }
            let (cx, cy) = (split_ball(self.a, x)?, split_ball(self.b, y)?);
            return self.descend(cx, cy, parent);
        }
        if xs.len() == 1 {
            let x = &xs[0];
            if x.len() == 1 {
                self.terminals.push((x.clone(), ys.concat()));
                return Ok(());
            }
            let cx = split_ball(self.a, x)?;
            return self.descend(cx, ys, parent);
        }
        if ys.len() == 1 {
            let y = &ys[0];
            if y.len() == 1 {
                self.terminals.push((xs.concat(), y.clone()));
                return Ok(());
            }
            let cy = split_ball(self.b, y)?;
            return self.descend(xs, cy, parent);
        }
        self.descend(xs, ys, parent)
    }

    fn descend(&mut self, xs: Vec<Vec<usize>>, ys: Vec<Vec<usize>>, parent: Option<usize>) -> Result<()> {
        let g = xs.len().min(ys.len());
        for (gx, gy) in even_groups(&xs, g).into_iter().zip(even_groups(&ys, g)) {
            let id = self.record(&gx, &gy, parent);
            self.pair_lists(gx, gy, Some(id))?;
        }
        Ok(())
    }
}

/// Level-by-level correspondence of the two ball hierarchies: at each
/// matched ball the child lists are cut into the same number of contiguous,
/// evenly sized groups, and groups are matched in order.
pub fn hierarchical_end_map(a: &EndSpace, b: &EndSpace) -> Result<EndMap> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("end spaces must be nonempty".into()));
    }
    let mut builder = Builder { a, b, balls: Vec::new(), terminals: Vec::new() };
    let all_a: Vec<usize> = (0..a.len()).collect();
    let all_b: Vec<usize> = (0..b.len()).collect();
    let root = builder.record(std::slice::from_ref(&all_a), std::slice::from_ref(&all_b), None);
    builder.pair_lists(vec![all_a], vec![all_b], Some(root))?;

    let mut images = vec![Vec::new(); a.len()];
    for (xs, ys) in &builder.terminals {
        for &x in xs {
            images[x].extend_from_slice(ys);
        }
    }
    for im in &mut images {
        im.sort_unstable();
    }
    let distortion = distortion_table(a, b, &images, 0x5eed, 20_000);
    Ok(EndMap {
        source_len: a.len(),
        target_len: b.len(),
        images,
        terminals: builder.terminals,
        balls: builder.balls,
        distortion,
    })
}

fn distortion_table(
    a: &EndSpace,
    b: &EndSpace,
    images: &[Vec<usize>],
    seed: u64,
    samples: usize,
) -> BTreeMap<i64, (i64, i64)> {
    let n = a.len();
    let mut table = BTreeMap::new();
    if n < 3 {
        return table;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        if x == y || x == z {
            continue;
        }
        let (fx, fy, fz) = (images[x][0], images[y][0], images[z][0]);
        if fx == fy || fx == fz {
            continue;
        }
        let gap_a = a.product(x, z) as i64 - a.product(x, y) as i64;
        let gap_b = b.product(fx, fz) as i64 - b.product(fx, fy) as i64;
        let e = table.entry(gap_a).or_insert((gap_b, gap_b));
        e.0 = e.0.min(gap_b);
        e.1 = e.1.max(gap_b);
    }
    table
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QiConstants {
    pub c_mult: Rational,
    pub d_add: Rational,
    pub surj_radius: u32,
    /// Largest image distance across a source edge.
    pub c_step: u32,
    pub pairs_tested: u64,
    pub exact: bool,
}

/// A total map between vertex sets, optionally carrying measured constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexMap {
    image: Vec<VertexId>,
    constants: Option<QiConstants>,
}

impl VertexMap {
    pub fn new(image: Vec<VertexId>) -> Self {
        VertexMap { image, constants: None }
    }

    pub fn identity(n: usize) -> Self {
        VertexMap::new((0..n).collect())
    }

    pub fn image(&self) -> &[VertexId] {
        &self.image
    }

    pub fn get(&self, v: VertexId) -> VertexId {
        self.image[v]
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn constants(&self) -> Option<&QiConstants> {
        self.constants.as_ref()
    }

    pub fn set_constants(&mut self, c: QiConstants) {
        self.constants = Some(c);
    }

    /// Checks the map is total on `gx` with values in `gy`.
    pub fn validate(&self, gx: &UdbgGraph, gy: &UdbgGraph) -> Result<()> {
        if self.image.len() != gx.len() {
            return Err(Error::Input(format!(
                "map covers {} vertices, source has {}",
                self.image.len(),
                gx.len()
            )));
        }
        if let Some(&w) = self.image.iter().find(|&&w| w >= gy.len()) {
            return Err(Error::UnknownVertex(w));
        }
        Ok(())
    }
}

/// Sends `v` to the deepest target vertex whose shadow contains the image
/// of the rays through `v`; computed bottom-up as lowest common ancestors.
pub fn induced_vertex_map(source: &RootedTree, target: &RootedTree, em: &EndMap) -> Result<VertexMap> {
    for t in [source, target] {
        if let Some(vertex) = t.core_mask().iter().position(|&m| !m) {
            return Err(Error::NotComplete { vertex });
        }
    }
    let src_leaves: Vec<VertexId> = source.leaves().collect();
    let tgt_leaves: Vec<VertexId> = target.leaves().collect();
    if src_leaves.len() != em.source_len || tgt_leaves.len() != em.target_len {
        return Err(Error::Input("end map does not match the trees' ends".into()));
    }
    let mut image = vec![UNREACHED as VertexId; source.len()];
    for (i, &leaf) in src_leaves.iter().enumerate() {
        let rays = &em.images[i];
        assert!(!rays.is_empty(), "image shadow is empty");
        image[leaf] = rays[1..].iter().fold(tgt_leaves[rays[0]], |w, &r| target.lca(w, tgt_leaves[r]));
    }
    let mut order = source.level_order();
    order.reverse();
    for v in order {
        let kids = source.children(v);
        if let Some((&first, rest)) = kids.split_first() {
            image[v] = rest.iter().fold(image[first], |w, &c| target.lca(w, image[c]));
        }
    }
    image[source.root()] = target.root();
    Ok(VertexMap::new(image))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    Exact,
    /// All pairs `(x, x')` with `x` among `sources` seeded picks.
    Sampled { seed: u64, sources: usize },
}

/// Histogram of `(d_X(x, x'), d_Y(f x, f x'))` over unordered pairs.
pub fn distance_histogram(
    vm: &VertexMap,
    gx: &UdbgGraph,
    gy: &UdbgGraph,
    mode: ScanMode,
) -> Result<BTreeMap<(u32, u32), u64>> {
    vm.validate(gx, gy)?;
    let sources: Vec<VertexId> = match mode {
        ScanMode::Exact => (0..gx.len()).collect(),
        ScanMode::Sampled { seed, sources } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picks: Vec<VertexId> =
                rand::seq::index::sample(&mut rng, gx.len(), sources.min(gx.len())).into_vec();
            picks.sort_unstable();
            picks
        }
    };
    let exact = matches!(mode, ScanMode::Exact);
    let hist = sources
        .par_iter()
        .map(|&x| {
            let rx = gx.bfs_from(x);
            let ry = gy.bfs_from(vm.get(x));
            let mut local: HashMap<(u32, u32), u64> = HashMap::new();
            let start = if exact { x + 1 } else { 0 };
            for x2 in start..gx.len() {
                if x2 != x {
                    *local.entry((rx[x2], ry[vm.get(x2)])).or_default() += 1;
                }
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    Ok(hist.into_iter().collect())
}

/// Smallest candidate `C >= 1` whose additive constant
/// `D(C) = max(dy - C dx, dx / C - dy, 0)` is at most `C`; returns `(C, D(C))`.
pub fn constants_from_histogram(hist: &BTreeMap<(u32, u32), u64>) -> (Rational, Rational) {
    let additive = |c: Rational| {
        hist.keys().fold(Rational::zero(), |acc, &(dx, dy)| {
            let (dx, dy) = (Rational::integer(dx as i64), Rational::integer(dy as i64));
            acc.max(dy - c * dx).max(dx / c - dy)
        })
    };
    let mut candidates: Vec<Rational> = Vec::new();
    let mut biggest = 1;
    for &(dx, dy) in hist.keys() {
        biggest = biggest.max(dx).max(dy);
        if dx > 0 && dy >= dx {
            candidates.push(Rational::new(dy as i64, dx as i64));
        }
        if dy > 0 && dx >= dy {
            candidates.push(Rational::new(dx as i64, dy as i64));
        }
    }
    candidates.extend((1..=biggest as i64).map(Rational::integer));
    candidates.sort_unstable();
    candidates.dedup();
    for c in candidates {
        let d = additive(c);
        if d <= c {
            return (c, d);
        }
    }
    unreachable!("C = max distance always satisfies D(C) <= C")
}

/// Distance between two vertices by a search that stops on arrival.
pub fn pair_distance(g: &UdbgGraph, a: VertexId, b: VertexId) -> u32 {
    if a == b {
        return 0;
    }
    let mut seen: HashMap<VertexId, u32> = HashMap::from([(a, 0)]);
    let mut queue = VecDeque::from([a]);
    while let Some(u) = queue.pop_front() {
        let du = seen[&u];
        for &v in g.neighbors(u) {
            if v == b {
                return du + 1;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(v) {
                e.insert(du + 1);
                queue.push_back(v);
            }
        }
    }
    UNREACHED
}

/// Measures multiplicative and additive constants, coarse-surjectivity
/// radius and the step constant of `vm`.
pub fn qi_constants(vm: &VertexMap, gx: &UdbgGraph, gy: &UdbgGraph, mode: ScanMode) -> Result<QiConstants> {
    let hist = distance_histogram(vm, gx, gy, mode)?;
    let (c_mult, d_add) = constants_from_histogram(&hist);
    let surj_radius =
        gy.multi_source_bfs(vm.image(), UNREACHED).into_iter().max().unwrap_or(0);
    let c_step = gx
        .edges()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(u, v)| pair_distance(gy, vm.get(u), vm.get(v)))
        .max()
        .unwrap_or(0);
    Ok(QiConstants {
        c_mult,
        d_add,
        surj_radius,
        c_step,
        pairs_tested: hist.values().sum(),
        exact: matches!(mode, ScanMode::Exact),
    })
}
