//! Hyperbolic fillings of compact model spaces.
//!
//! Level `k` of a filling is a greedy `s^k`-net of the space; each net point
//! carries the ball of radius `tau * s^k` around it, and two balls are joined
//! when they share a point of the space (same level, or adjacent levels).
//! Every distance is an exact rational over the space's common denominator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Truncation, UdbgGraph, VertexId, UNREACHED};
use crate::qi::VertexMap;
use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    /// Left endpoints of the level-`L` intervals of the middle-thirds Cantor set.
    Cantor13,
    /// The grid `j / 2^L` in `[0, 1]`.
    Interval,
    /// The grid `j / 2^L` on the circle of length one.
    Circle,
}

impl SpaceKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cantor13" => Some(SpaceKind::Cantor13),
            "interval" => Some(SpaceKind::Interval),
            "circle" => Some(SpaceKind::Circle),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Cantor13 => "cantor13",
            SpaceKind::Interval => "interval",
            SpaceKind::Circle => "circle",
        }
    }

    pub fn default_scale(self) -> Rational {
        match self {
            SpaceKind::Cantor13 => Rational::new(1, 3),
            _ => Rational::new(1, 2),
        }
    }

    /// Exact distance between two coordinates in `[0, 1]`.
    pub fn distance(self, a: Rational, b: Rational) -> Rational {
        let d = (a - b).abs();
        match self {
            SpaceKind::Circle => d.min(Rational::one() - d),
            _ => d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpace {
    kind: SpaceKind,
    resolution: u32,
    den: i64,
    points: Vec<i64>,
}

const MAX_RESOLUTION: u32 = 16;

impl ModelSpace {
    pub fn new(kind: SpaceKind, resolution: u32) -> Result<Self> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(Error::Input(format!("resolution must lie in 1..={MAX_RESOLUTION}")));
        }
        let (den, points) = match kind {
            SpaceKind::Cantor13 => {
                let den = 3i64.pow(resolution);
                let mut points: Vec<i64> = (0..1u64 << resolution)
                    .map(|bits| {
                        (0..resolution)
                            .filter(|i| bits >> (resolution - 1 - i) & 1 == 1)
                            .map(|i| 2 * 3i64.pow(resolution - 1 - i))
                            .sum()
                    })
                    .collect();
                points.sort_unstable();
                (den, points)
            }
            SpaceKind::Interval => {
                let den = 1i64 << resolution;
                (den, (0..=den).collect())
            }
            SpaceKind::Circle => {
                let den = 1i64 << resolution;
                (den, (0..den).collect())
            }
        };
        Ok(ModelSpace { kind, resolution, den, points })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Rational {
        Rational::new(self.points[i], self.den)
    }

    fn raw_distance(&self, i: usize, j: usize) -> i64 {
        let d = (self.points[i] - self.points[j]).abs();
        match self.kind {
            SpaceKind::Circle => d.min(self.den - d),
            _ => d,
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> Rational {
        Rational::new(self.raw_distance(i, j), self.den)
    }

    /// `d(i, j) <= rho`, exactly.
    fn within(&self, i: usize, j: usize, rho: Rational) -> bool {
        (self.raw_distance(i, j) as i128) * (rho.den() as i128) <= (rho.num() as i128) * (self.den as i128)
    }

    /// Largest `k` with `s^k` no finer than the grid spacing `1 / den`.
    pub fn max_usable_level(&self, scale: Rational) -> u32 {
        let mut k = 0;
        let mut r = Rational::one();
        loop {
            let next = r * scale;
            if (next.num() as i128) * (self.den as i128) < next.den() as i128 {
                return k;
            }
            r = next;
            k += 1;
        }
    }

    fn check_scale(&self, scale: Rational) -> Result<()> {
        if scale <= Rational::zero() || scale >= Rational::one() {
            return Err(Error::Input(format!("scale must lie in (0, 1), got {scale}")));
        }
        Ok(())
    }
}

/// Maximal `s^k`-separated subset, built greedily in a seeded order.
/// Returns point indices in increasing coordinate order.
pub fn greedy_net(space: &ModelSpace, scale: Rational, level: u32, seed: u64) -> Result<Vec<usize>> {
    space.check_scale(scale)?;
    let max_level = space.max_usable_level(scale);
    if level > max_level {
        return Err(Error::Resolution { requested: level, max_level });
    }
    let sep = scale.pow(level);
    let mut order: Vec<usize> = (0..space.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(level as u64);
    order.shuffle(&mut rng);
    let mut net: Vec<usize> = Vec::new();
    for p in order {
        // separated means d >= sep, i.e. not within a distance strictly below sep
        if net.iter().all(|&q| !strictly_within(space, p, q, sep)) {
            net.push(p);
        }
    }
    net.sort_unstable();
    Ok(net)
}

fn strictly_within(space: &ModelSpace, i: usize, j: usize, rho: Rational) -> bool {
    (space.raw_distance(i, j) as i128) * (rho.den() as i128) < (rho.num() as i128) * (space.den as i128)
}

#[derive(Clone, Debug)]
pub struct Filling {
    graph: UdbgGraph,
    space: ModelSpace,
    scale: Rational,
    tau: Rational,
    seed: u64,
    centers: Vec<usize>,
}

/// Builds the filling on levels `0..=max_level`. Level 0 is the single
/// first point of the seeded order, whose unit ball covers the space.
pub fn build_filling(
    space: &ModelSpace,
    scale: Rational,
    tau: Rational,
    max_level: u32,
    seed: u64,
) -> Result<Filling> {
    space.check_scale(scale)?;
    if tau < Rational::one() {
        return Err(Error::Input(format!("dilation must be at least 1, got {tau}")));
    }
    let mut centers: Vec<usize> = Vec::new();
    let mut levels: Vec<u32> = Vec::new();
    let mut level_ranges = Vec::new();
    for k in 0..=max_level {
        let mut net = greedy_net(space, scale, k, seed)?;
        if k == 0 {
            let mut order: Vec<usize> = (0..space.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0);
            order.shuffle(&mut rng);
            net = vec![order[0]];
        }
        let start = centers.len();
        levels.extend(std::iter::repeat_n(k, net.len()));
        centers.extend(net);
        level_ranges.push(start..centers.len());
    }

    let words = space.len().div_ceil(64);
    let balls: Vec<Vec<u64>> = centers
        .iter()
        .zip(&levels)
        .map(|(&c, &k)| {
            let rho = tau * scale.pow(k);
            let mut bits = vec![0u64; words];
            for z in (0..space.len()).filter(|&z| space.within(c, z, rho)) {
                bits[z / 64] |= 1 << (z % 64);
            }
            bits
        })
        .collect();
    let overlap = |a: usize, b: usize| balls[a].iter().zip(&balls[b]).any(|(x, y)| x & y != 0);

    let mut edges = Vec::new();
    for (k, range) in level_ranges.iter().enumerate() {
        for a in range.clone() {
            for b in (a + 1)..range.end {
                if overlap(a, b) {
                    edges.push((a, b));
                }
            }
            if let Some(next) = level_ranges.get(k + 1) {
                for b in next.clone() {
                    if overlap(a, b) {
                        edges.push((a, b));
                    }
                }
            }
        }
    }
    let graph = UdbgGraph::from_edges(centers.len(), &edges, Some(0), Some(levels))?;
    Ok(Filling { graph, space: space.clone(), scale, tau, seed, centers })
}

impl Filling {
    pub fn graph(&self) -> &UdbgGraph {
        &self.graph
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn scale(&self) -> Rational {
        self.scale
    }

    pub fn tau(&self) -> Rational {
        self.tau
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_level(&self) -> u32 {
        self.graph.levels().and_then(|l| l.iter().copied().max()).unwrap_or(0)
    }

    pub fn level(&self, v: VertexId) -> u32 {
        self.graph.level(v).expect("fillings carry levels")
    }

    pub fn center_index(&self, v: VertexId) -> usize {
        self.centers[v]
    }

    pub fn center(&self, v: VertexId) -> Rational {
        self.space.point(self.centers[v])
    }

    /// Nominal radius `s^k` of a level-`k` vertex; balls use `tau` times it.
    pub fn radius(&self, v: VertexId) -> Rational {
        self.scale.pow(self.level(v))
    }

    pub fn centers(&self) -> Vec<Rational> {
        (0..self.graph.len()).map(|v| self.center(v)).collect()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.max_level() as usize + 1];
        for v in 0..self.graph.len() {
            sizes[self.level(v) as usize] += 1;
        }
        sizes
    }

    pub fn truncation(&self) -> Truncation {
        Truncation::new(self.graph.clone()).expect("fillings carry levels")
    }

    /// Map sending each vertex to the nearest-centered vertex of `other` on
    /// the same level (or `other`'s last level).
    pub fn center_map(&self, other: &Filling) -> Result<VertexMap> {
        if self.space.kind != other.space.kind {
            return Err(Error::Input("fillings of different model spaces".into()));
        }
        center_map(
            self.space.kind,
            self.graph.levels().expect("levels"),
            &self.centers(),
            other.graph.levels().expect("levels"),
            &other.centers(),
        )
    }
}

/// Nearest-center map between two fillings of the same space, given by
/// level labels and center coordinates. Ties go to the smallest id.
pub fn center_map(
    kind: SpaceKind,
    x_levels: &[u32],
    x_centers: &[Rational],
    y_levels: &[u32],
    y_centers: &[Rational],
) -> Result<VertexMap> {
    let y_max = y_levels.iter().copied().max().unwrap_or(0);
    let mut by_level: Vec<Vec<VertexId>> = vec![Vec::new(); y_max as usize + 1];
    for (v, &k) in y_levels.iter().enumerate() {
        by_level[k as usize].push(v);
    }
    let image = x_levels
        .iter()
        .zip(x_centers)
        .map(|(&k, &c)| {
            by_level[k.min(y_max) as usize]
                .iter()
                .copied()
                .min_by_key(|&w| (kind.distance(c, y_centers[w]), w))
                .expect("every filling level is nonempty")
        })
        .collect();
    Ok(VertexMap::new(image))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FillingReport {
    pub max_degree_per_level: Vec<usize>,
    pub connected: bool,
    /// Largest distance from a vertex to the union of root-to-last-level geodesics.
    pub visual_constant: u32,
}

/// Degree, connectivity and visuality summary of a filling.
pub fn filling_sanity(f: &Filling) -> FillingReport {
    let g = f.graph();
    let mut max_degree_per_level = vec![0; f.max_level() as usize + 1];
    for v in 0..g.len() {
        let k = f.level(v) as usize;
        max_degree_per_level[k] = max_degree_per_level[k].max(g.degree(v));
    }
    let connected = !g.bfs_from(0).contains(&UNREACHED);
    FillingReport { max_degree_per_level, connected, visual_constant: visual_constant(g) }
}

/// Largest distance from a vertex to the union of geodesics joining the
/// root to the outermost level.
pub fn visual_constant(g: &UdbgGraph) -> u32 {
    let root = g.root().unwrap_or(0);
    let levels = match g.levels() {
        Some(l) => l,
        None => return 0,
    };
    let depth = levels.iter().copied().max().unwrap_or(0);
    let from_root = g.bfs_from(root);
    let mut on_geodesic = vec![false; g.len()];
    for s in (0..g.len()).filter(|&s| levels[s] == depth) {
        let from_s = g.bfs_from(s);
        for v in 0..g.len() {
            if from_root[v] + from_s[v] == from_root[s] {
                on_geodesic[v] = true;
            }
        }
    }
    let marked: Vec<VertexId> = (0..g.len()).filter(|&v| on_geodesic[v]).collect();
    g.multi_source_bfs(&marked, UNREACHED).into_iter().max().unwrap_or(0)
}
