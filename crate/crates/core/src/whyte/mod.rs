//! Chains, the deficiency of a map, the boundary criterion for bounded
//! 0-chains, and promotion of a quasi-isometry to a bounded-distance
//! bijection by bipartite matching.

mod chain;
mod matching;

pub use chain::{chain_boundary, deficiency_chain, whyte_criterion, OneChain, WhyteReport, ZeroChain};
pub use matching::{bilipschitz_constant, map_distance, promote_matching, MatchingResult, PairMode, EXACT_PAIR_LIMIT};
