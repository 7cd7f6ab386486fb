use std::collections::BTreeMap;

use serde::Serialize;

use crate::cheeger::{boundary_sizes, generate_family, Family};
use crate::error::{Error, Result};
use crate::graph::{Truncation, UdbgGraph, VertexId};
use crate::qi::{pair_distance, VertexMap};
use crate::rational::Rational;

/// Finitely supported integer 0-chain.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ZeroChain {
    coeffs: BTreeMap<VertexId, i64>,
    bound: u64,
}

impl ZeroChain {
    pub fn new(coeffs: impl IntoIterator<Item = (VertexId, i64)>) -> Self {
        let mut map: BTreeMap<VertexId, i64> = BTreeMap::new();
        for (v, c) in coeffs {
            *map.entry(v).or_default() += c;
        }
        map.retain(|_, c| *c != 0);
        let bound = map.values().map(|c| c.unsigned_abs()).max().unwrap_or(0);
        ZeroChain { coeffs: map, bound }
    }

    /// Coefficient one on each of the first `n` vertices.
    pub fn fundamental(n: usize) -> Self {
        ZeroChain::new((0..n).map(|v| (v, 1)))
    }

    pub fn get(&self, v: VertexId) -> i64 {
        self.coeffs.get(&v).copied().unwrap_or(0)
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn recomputed_bound(&self) -> u64 {
        self.coeffs.values().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, i64)> + '_ {
        self.coeffs.iter().map(|(&v, &c)| (v, c))
    }

    pub fn total(&self) -> i64 {
        self.coeffs.values().sum()
    }

    pub fn sum_over(&self, set: &[VertexId]) -> i64 {
        set.iter().map(|&v| self.get(v)).sum()
    }

    pub fn scaled(&self, a: i64) -> Self {
        ZeroChain::new(self.iter().map(|(v, c)| (v, a * c)))
    }

    pub fn plus(&self, other: &ZeroChain) -> Self {
        ZeroChain::new(self.iter().chain(other.iter()))
    }
}

/// Integer 1-chain on the scale-`r` graph, with oriented edges `(e+, e-)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OneChain {
    scale: u32,
    coeffs: BTreeMap<(VertexId, VertexId), i64>,
}

impl OneChain {
    /// Each `(u, v)` must join distinct vertices at distance at most `scale`.
    pub fn new(g: &UdbgGraph, scale: u32, edges: impl IntoIterator<Item = ((VertexId, VertexId), i64)>) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Input("chain scale must be at least 1".into()));
        }
        let mut coeffs: BTreeMap<(VertexId, VertexId), i64> = BTreeMap::new();
        for ((u, v), c) in edges {
            g.check_vertex(u)?;
            g.check_vertex(v)?;
            if u == v || pair_distance(g, u, v) > scale {
                return Err(Error::Input(format!("({u}, {v}) is not an edge at scale {scale}")));
            }
            *coeffs.entry((u, v)).or_default() += c;
        }
        coeffs.retain(|_, c| *c != 0);
        Ok(OneChain { scale, coeffs })
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn iter(&self) -> impl Iterator<Item = ((VertexId, VertexId), i64)> + '_ {
        self.coeffs.iter().map(|(&e, &c)| (e, c))
    }
}

/// Linear extension of `∂(u, v) = u - v`.
pub fn chain_boundary(b: &OneChain) -> ZeroChain {
    ZeroChain::new(b.iter().flat_map(|((u, v), c)| [(u, c), (v, -c)]))
}

/// `c(y) = |f^{-1}(y)| - 1` on every target vertex.
pub fn deficiency_chain(vm: &VertexMap, gx: &UdbgGraph, gy: &UdbgGraph) -> Result<ZeroChain> {
    vm.validate(gx, gy)?;
    let mut counts = vec![-1i64; gy.len()];
    for &y in vm.image() {
        counts[y] += 1;
    }
    Ok(ZeroChain::new(counts.into_iter().enumerate()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WhyteReport {
    /// Largest `|Σ_S c| / |∂_r S|` over the tested sets.
    pub max_ratio: Rational,
    pub constant: Option<Rational>,
    pub passed: bool,
    pub witness: Option<Vec<VertexId>>,
    pub violations: u64,
    pub sets_tested: u64,
    pub scale: u32,
}

/// Evaluates `|Σ_S c| <= C |∂_r S|` over family sets of the truncation's
/// interior. Without a constant the report only carries the largest ratio.
pub fn whyte_criterion(
    c: &ZeroChain,
    trunc: &Truncation,
    collar: u32,
    r: u32,
    families: &[Family],
    seed: u64,
    constant: Option<Rational>,
) -> Result<WhyteReport> {
    if r == 0 {
        return Err(Error::Input("boundary scale must be at least 1".into()));
    }
    let sets = generate_family(trunc, collar, families, seed)?;
    let sizes = boundary_sizes(trunc.graph(), &sets, r);
    let mut max_ratio = Rational::zero();
    let mut witness = None;
    let mut violations = 0;
    for (s, &b) in sets.iter().zip(&sizes) {
        let sum = c.sum_over(&s.members).abs();
        let ratio = Rational::new(sum, b as i64);
        max_ratio = max_ratio.max(ratio);
        if let Some(k) = constant {
            if Rational::integer(sum) > k * Rational::integer(b as i64) {
                violations += 1;
                witness.get_or_insert_with(|| s.members.clone());
            }
        }
    }
    Ok(WhyteReport {
        max_ratio,
        constant,
        passed: violations == 0,
        witness,
        violations,
        sets_tested: sets.len() as u64,
        scale: r,
    })
}
