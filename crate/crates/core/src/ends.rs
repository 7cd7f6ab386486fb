//! End spaces of truncated trees.
//!
//! The ultrametric `d(F, F') = e^{-(F|F')}` is carried as the integer Gromov
//! product: a larger product means a smaller distance, and every metric
//! statement below is an integer comparison on products.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::tree::RootedTree;

/// Above this many points the Gromov table is not materialized.
const TABLE_LIMIT: usize = 4096;

/// Above this many rays, `UltrametricMode::Auto` samples triples.
pub const EXHAUSTIVE_RAY_LIMIT: usize = 200;

/// A root-to-level-`D` geodesic, `F(0..=D)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ray(pub Vec<VertexId>);

impl Ray {
    pub fn leaf(&self) -> VertexId {
        *self.0.last().expect("rays are nonempty")
    }

    pub fn at(&self, t: u32) -> VertexId {
        self.0[t as usize]
    }
}

#[derive(Clone, Debug)]
pub struct EndSpace {
    rays: Vec<Ray>,
    table: Option<Vec<u32>>,
    points: usize,
    mu: usize,
    depth: u32,
}

impl EndSpace {
    /// A space given only by its product table; used for fixtures.
    /// The diagonal must hold the sentinel `depth`.
    pub fn from_table(depth: u32, mu: usize, table: Vec<Vec<u32>>) -> Result<Self> {
        let n = table.len();
        if n == 0 || table.iter().any(|row| row.len() != n) {
            return Err(Error::Input("product table must be square and nonempty".into()));
        }
        for (i, row) in table.iter().enumerate() {
            if row[i] != depth {
                return Err(Error::Input(format!("diagonal entry {i} must equal depth {depth}")));
            }
            for (j, &p) in row.iter().enumerate() {
                if p != table[j][i] || (i != j && p >= depth) {
                    return Err(Error::Input(format!("entry ({i},{j}) breaks symmetry or exceeds depth")));
                }
            }
        }
        Ok(EndSpace { rays: Vec::new(), table: Some(table.concat()), points: n, mu, depth })
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    /// `(F_i | F_j)`, with the sentinel `D` on the diagonal.
    pub fn product(&self, i: usize, j: usize) -> u32 {
        if let Some(t) = &self.table {
            return t[i * self.points + j];
        }
        if i == j {
            return self.depth;
        }
        // rays agree on a prefix and then differ
        let (a, b) = (&self.rays[i].0, &self.rays[j].0);
        let split = a.iter().zip(b).position(|(x, y)| x != y).expect("distinct rays differ");
        split as u32 - 1
    }

    pub fn gromov_table(&self) -> Vec<Vec<u32>> {
        (0..self.points).map(|i| (0..self.points).map(|j| self.product(i, j)).collect()).collect()
    }

    /// Square CSV of the product table, one row per ray.
    pub fn gromov_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.points {
            let row: Vec<String> = (0..self.points).map(|j| self.product(i, j).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Members of the closed ball `{G : (F|G) >= m}`.
    pub fn ball(&self, center: usize, m: u32) -> Vec<usize> {
        (0..self.points).filter(|&g| self.product(center, g) >= m).collect()
    }
}

/// One ray per level-`D` leaf, ordered by leaf id.
pub fn enumerate_ends(tree: &RootedTree) -> Result<EndSpace> {
    let mask = tree.core_mask();
    if let Some(vertex) = mask.iter().position(|&m| !m) {
        return Err(Error::NotComplete { vertex });
    }
    let depth = tree.depth();
    let rays: Vec<Ray> = tree
        .leaves()
        .map(|leaf| {
            let mut path = vec![leaf];
            let mut v = leaf;
            while let Some(p) = tree.parent(v) {
                path.push(p);
                v = p;
            }
            path.reverse();
            Ray(path)
        })
        .collect();
    let mut space = EndSpace { points: rays.len(), rays, table: None, mu: tree.graph().mu(), depth };
    if space.points <= TABLE_LIMIT {
        let table = (0..space.points)
            .flat_map(|i| (0..space.points).map(move |j| (i, j)))
            .map(|(i, j)| space.product(i, j))
            .collect();
        space.table = Some(table);
    }
    Ok(space)
}

/// The integer product `m = (F|F')`; the distance is `e^{-m}`, and `m = D`
/// on the diagonal stands for distance zero.
pub fn end_distance(es: &EndSpace, f: usize, g: usize) -> Result<u32> {
    if f >= es.len() || g >= es.len() {
        return Err(Error::Input(format!("ray index out of range ({f}, {g})")));
    }
    Ok(es.product(f, g))
}

/// Floating value of `e^{-m}` for reports.
pub fn end_distance_value(es: &EndSpace, f: usize, g: usize) -> f64 {
    if f == g {
        0.0
    } else {
        (-(es.product(f, g) as f64)).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UltrametricMode {
    Exhaustive,
    Sampled { seed: u64, triples: usize },
    /// Exhaustive up to `EXHAUSTIVE_RAY_LIMIT` rays, else one million sampled triples.
    Auto { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UltrametricReport {
    pub passed: bool,
    pub witness: Option<(usize, usize, usize)>,
    pub triples_checked: u64,
    pub exhaustive: bool,
}

/// Checks `(F|H) >= min((F|G), (G|H))` on triples.
pub fn verify_ultrametric(es: &EndSpace, mode: UltrametricMode) -> UltrametricReport {
    let n = es.len();
    let violates = |f: usize, g: usize, h: usize| es.product(f, h) < es.product(f, g).min(es.product(g, h));
    let mode = match mode {
        UltrametricMode::Auto { seed } if n > EXHAUSTIVE_RAY_LIMIT => {
            UltrametricMode::Sampled { seed, triples: 1_000_000 }
        }
        UltrametricMode::Auto { .. } => UltrametricMode::Exhaustive,
        m => m,
    };
    match mode {
        UltrametricMode::Sampled { seed, triples } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picks: Vec<(usize, usize, usize)> = (0..triples)
                .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)))
                .collect();
            let witness = picks.par_iter().copied().find_first(|&(f, g, h)| violates(f, g, h));
            UltrametricReport { passed: witness.is_none(), witness, triples_checked: triples as u64, exhaustive: false }
        }
        _ => {
            let witness = (0..n).into_par_iter().find_map_first(|f| {
                (0..n).find_map(|g| (0..n).find(|&h| violates(f, g, h)).map(|h| (f, g, h)))
            });
            UltrametricReport {
                passed: witness.is_none(),
                witness,
                triples_checked: (n as u64).pow(3),
                exhaustive: true,
            }
        }
    }
}

/// Canonical balls: for each threshold `m`, the equivalence classes of
/// `(F|G) >= m`, each listed once.
fn balls_at(es: &EndSpace, m: u32) -> Vec<Vec<usize>> {
    let mut assigned = vec![false; es.len()];
    let mut out = Vec::new();
    for f in 0..es.len() {
        if assigned[f] {
            continue;
        }
        let ball = es.ball(f, m);
        for &g in &ball {
            assigned[g] = true;
        }
        out.push(ball);
    }
    out
}

/// Number of classes of `(G|H) >= t` inside `members`.
fn count_classes(es: &EndSpace, members: &[usize], t: u32) -> usize {
    let mut reps: Vec<usize> = Vec::new();
    for &g in members {
        if !reps.iter().any(|&r| es.product(r, g) >= t) {
            reps.push(g);
        }
    }
    reps.len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DoublingReport {
    pub passed: bool,
    pub bound: usize,
    pub max_parts: usize,
    pub balls_checked: usize,
}

/// For every ball, with `M` the depth to which all its members agree,
/// partitions the members by their vertex at step `M + 2` and checks the
/// part count against `mu^2`. Single-point balls count as one part.
pub fn doubling_check(es: &EndSpace) -> DoublingReport {
    let bound = es.mu() * es.mu();
    let mut max_parts = 0;
    let mut balls_checked = 0;
    for m in 0..=es.depth() {
        for ball in balls_at(es, m) {
            balls_checked += 1;
            let parts = if ball.len() == 1 {
                1
            } else {
                let agree = ball.iter().map(|&g| es.product(ball[0], g)).min().expect("nonempty");
                count_classes(es, &ball, (agree + 2).min(es.depth()))
            };
            max_parts = max_parts.max(parts);
        }
    }
    DoublingReport { passed: max_parts <= bound, bound, max_parts, balls_checked }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PerfectnessReport {
    pub passed: bool,
    /// `(ray, m)` with no `F'` satisfying `m <= (F|F') < m + K`.
    pub witness: Option<(usize, u32)>,
}

/// Integer form of uniform perfectness with constant `e^K`: for every ray
/// `F` and every `m <= D - K` some `F'` has `m <= (F|F') < m + K`.
pub fn perfectness_check(es: &EndSpace, k: u32) -> Result<PerfectnessReport> {
    if k < 1 || k > es.depth() {
        return Err(Error::Input(format!("K must lie in 1..={}, got {k}", es.depth())));
    }
    let depth = es.depth();
    let witness = (0..es.len()).into_par_iter().find_map_first(|f| {
        let mut seen = vec![false; depth as usize];
        for g in (0..es.len()).filter(|&g| g != f) {
            seen[es.product(f, g) as usize] = true;
        }
        (0..=depth - k).find(|&m| !(m..m + k).any(|t| seen[t as usize])).map(|m| (f, m))
    });
    Ok(PerfectnessReport { passed: witness.is_none(), witness })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DisconnectionReport {
    pub passed: bool,
    pub cross_pairs_checked: u64,
    pub violations: u64,
    pub witness: Option<(usize, usize, u32)>,
}

/// Uniform disconnectedness with `C = 1`: for every ball
/// `A = {G : (F|G) >= m}`, every pair `G in A`, `H not in A` has
/// `(G|H) < m`.
pub fn disconnection_check(es: &EndSpace) -> DisconnectionReport {
    let mut checked = 0u64;
    let mut violations = 0u64;
    let mut witness = None;
    for m in 0..=es.depth() {
        for ball in balls_at(es, m) {
            let mut inside = vec![false; es.len()];
            for &g in &ball {
                inside[g] = true;
            }
            for &g in &ball {
                for h in (0..es.len()).filter(|&h| !inside[h]) {
                    checked += 1;
                    if es.product(g, h) >= m {
                        violations += 1;
                        witness.get_or_insert((g, h, m));
                    }
                }
            }
        }
    }
    DisconnectionReport { passed: violations == 0, cross_pairs_checked: checked, violations, witness }
}
