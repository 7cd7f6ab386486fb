//! Experiment configs and the generate, analyze, promote, verify pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cheeger::{cheeger_family, CheegerCertificate, Family};
use crate::ends::{doubling_check, enumerate_ends, verify_ultrametric, UltrametricMode};
use crate::error::{Error, Result};
use crate::fill::{build_filling, Filling, ModelSpace, SpaceKind};
use crate::graph::Truncation;
use crate::io::{to_pretty_json, GraphFile, MapFile};
use crate::qi::{hierarchical_end_map, induced_vertex_map, qi_constants, ScanMode, VertexMap};
use crate::rational::Rational;
use crate::tree::{gen_kary, gen_random_pseudo_regular, graft_segments, RootedTree, DEFAULT_VERTEX_BUDGET};
use crate::whyte::{deficiency_chain, promote_matching, whyte_criterion, MatchingResult, WhyteReport};

/// Segment schedule for stretched trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    Constant(u32),
    /// `g -> g`.
    Identity,
}

impl Schedule {
    pub fn at(self, g: u32) -> u32 {
        match self {
            Schedule::Constant(c) => c,
            Schedule::Identity => g,
        }
    }
}

fn default_tau() -> Rational {
    Rational::one()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Kary {
        k: usize,
        depth: u32,
    },
    PseudoRegular {
        k: u32,
        depth: u32,
        mu: usize,
        seed: u64,
    },
    /// A `branching`-ary tree with segments inserted below each level.
    Stretched {
        branching: usize,
        depth: u32,
        schedule: Schedule,
    },
    Filling {
        space: SpaceKind,
        levels: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<Rational>,
        #[serde(default = "default_tau")]
        tau: Rational,
        seed: u64,
    },
}

/// A generated graph: a tree or a filling.
#[derive(Clone, Debug)]
pub enum Built {
    Tree(RootedTree),
    Filling(Filling),
}

impl Built {
    pub fn truncation(&self) -> Truncation {
        match self {
            Built::Tree(t) => t.truncation().clone(),
            Built::Filling(f) => f.truncation(),
        }
    }

    pub fn file(&self) -> GraphFile {
        match self {
            Built::Tree(t) => GraphFile::from_tree(t),
            Built::Filling(f) => GraphFile::from_filling(f),
        }
    }
}

impl GraphSpec {
    pub fn build(&self) -> Result<Built> {
        Ok(match *self {
            GraphSpec::Kary { k, depth } => Built::Tree(gen_kary(k, depth)?),
            GraphSpec::PseudoRegular { k, depth, mu, seed } => {
                Built::Tree(gen_random_pseudo_regular(seed, k, depth, mu)?)
            }
            GraphSpec::Stretched { branching, depth, schedule } => {
                let base = gen_kary(branching, depth)?;
                Built::Tree(graft_segments(&base, |g| schedule.at(g), DEFAULT_VERTEX_BUDGET)?)
            }
            GraphSpec::Filling { space, levels, resolution, scale, tau, seed } => {
                if levels == 0 {
                    return Err(Error::Input("a filling needs at least one level".into()));
                }
                let model = ModelSpace::new(space, resolution.unwrap_or(DEFAULT_RESOLUTION.max(levels)))?;
                let scale = scale.unwrap_or(space.default_scale());
                Built::Filling(build_filling(&model, scale, tau, levels - 1, seed)?)
            }
        })
    }
}

/// Model-space resolution used when none is given.
pub const DEFAULT_RESOLUTION: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Identity,
    /// Tree to tree via the hierarchical end correspondence.
    Induced,
    /// Filling to filling via nearest centers.
    Center,
    /// Tree to itself, each vertex to its parent.
    Parent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeStage {
    pub collar: u32,
    pub families: Vec<Family>,
    #[serde(default)]
    pub ends: bool,
    #[serde(default)]
    pub qi_sources: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromoteStage {
    pub map: MapKind,
    pub r_start: u32,
    pub r_max: u32,
    pub collar: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyStage {
    /// Check the boundary criterion at scale one with `C = A / best_ratio`.
    pub whyte: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub source: GraphSpec,
    pub target: GraphSpec,
    pub analyze: AnalyzeStage,
    pub promote: PromoteStage,
    pub verify: VerifyStage,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        to_pretty_json(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphSummary {
    pub vertices: usize,
    pub edges: usize,
    pub depth: u32,
    pub max_degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndsSummary {
    pub rays: usize,
    pub ultrametric: bool,
    pub doubling_max_parts: usize,
    pub doubling_bound: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub source: GraphSummary,
    pub target: GraphSummary,
    pub source_cheeger: CheegerCertificate,
    pub target_cheeger: CheegerCertificate,
    pub source_ends: Option<EndsSummary>,
    pub target_ends: Option<EndsSummary>,
    pub qi: Option<crate::qi::QiConstants>,
    pub promotion: Option<MatchingSummary>,
    pub promotion_failure: Option<String>,
    pub deficiency_bound: u64,
    pub whyte_constant: Option<Rational>,
    pub whyte: Option<WhyteReport>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchingSummary {
    pub r: u32,
    pub matched: usize,
    pub unmatched_x: usize,
    pub unmatched_y: usize,
    pub confinement_width: u32,
    pub bilipschitz: Rational,
    pub bilipschitz_exact: bool,
    pub map_distance: u32,
}

impl From<&MatchingResult> for MatchingSummary {
    fn from(m: &MatchingResult) -> Self {
        MatchingSummary {
            r: m.r,
            matched: m.pairs.len(),
            unmatched_x: m.unmatched_x.len(),
            unmatched_y: m.unmatched_y.len(),
            confinement_width: m.confinement_width,
            bilipschitz: m.bilipschitz,
            bilipschitz_exact: m.bilipschitz_exact,
            map_distance: m.map_distance,
        }
    }
}

/// Everything a run produced, as file name to contents.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub report: PipelineReport,
    pub matching: Option<MatchingResult>,
    pub files: BTreeMap<String, String>,
}

impl PipelineOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

fn summary(t: &Truncation) -> GraphSummary {
    GraphSummary { vertices: t.graph().len(), edges: t.graph().edge_count(), depth: t.depth(), max_degree: t.graph().mu() }
}

fn ends_summary(b: &Built, seed: u64) -> Option<EndsSummary> {
    let Built::Tree(t) = b else { return None };
    let es = enumerate_ends(t).ok()?;
    let u = verify_ultrametric(&es, UltrametricMode::Auto { seed });
    let d = doubling_check(&es);
    Some(EndsSummary { rays: es.len(), ultrametric: u.passed, doubling_max_parts: d.max_parts, doubling_bound: d.bound })
}

/// Builds the vertex map requested by `kind`.
pub fn build_map(kind: MapKind, source: &Built, target: &Built) -> Result<VertexMap> {
    match (kind, source, target) {
        (MapKind::Identity, s, t) => {
            let (n, m) = (s.truncation().graph().len(), t.truncation().graph().len());
            if n != m {
                return Err(Error::Input(format!("identity map between graphs of sizes {n} and {m}")));
            }
            Ok(VertexMap::identity(n))
        }
        (MapKind::Induced, Built::Tree(a), Built::Tree(b)) => {
            let em = hierarchical_end_map(&enumerate_ends(a)?, &enumerate_ends(b)?)?;
            induced_vertex_map(a, b, &em)
        }
        (MapKind::Center, Built::Filling(a), Built::Filling(b)) => a.center_map(b),
        (MapKind::Parent, Built::Tree(a), Built::Tree(b)) if a.graph() == b.graph() => {
            Ok(VertexMap::new((0..a.len()).map(|v| a.parent(v).unwrap_or(v)).collect()))
        }
        (kind, _, _) => Err(Error::Input(format!("map {kind:?} does not apply to these graphs"))),
    }
}

/// Runs every stage. Promotion failure is recorded in the report rather
/// than returned as an error.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    let source = cfg.source.build()?;
    let target = cfg.target.build()?;
    let (xs, ys) = (source.truncation(), target.truncation());
    let a = &cfg.analyze;
    let source_cheeger = cheeger_family(&xs, a.collar, &a.families, cfg.seed)?;
    let target_cheeger = cheeger_family(&ys, a.collar, &a.families, cfg.seed)?;
    let (source_ends, target_ends) = if a.ends {
        (ends_summary(&source, cfg.seed), ends_summary(&target, cfg.seed))
    } else {
        (None, None)
    };

    let mut vm = build_map(cfg.promote.map, &source, &target)?;
    let qi = match a.qi_sources {
        Some(n) => {
            let c = qi_constants(&vm, xs.graph(), ys.graph(), ScanMode::Sampled { seed: cfg.seed, sources: n })?;
            vm.set_constants(c.clone());
            Some(c)
        }
        None => None,
    };

    let p = &cfg.promote;
    let (matching, promotion_failure) = match promote_matching(&vm, &xs, &ys, p.r_start, p.r_max, p.collar) {
        Ok(m) => (Some(m), None),
        Err(e @ Error::NoBoundedMatching { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };

    let chain = deficiency_chain(&vm, xs.graph(), ys.graph())?;
    let deficiency_bound = chain.bound();
    let (whyte_constant, whyte) = if cfg.verify.whyte && matching.is_some() {
        let c = Rational::integer(deficiency_bound as i64) / target_cheeger.best_ratio;
        let rep = whyte_criterion(&chain, &ys, a.collar, 1, &a.families, cfg.seed, Some(c))?;
        (Some(c), Some(rep))
    } else {
        (None, None)
    };
    let passed = matching.is_some() && whyte.as_ref().is_none_or(|w| w.passed);

    let report = PipelineReport {
        config: cfg.clone(),
        seed: cfg.seed,
        source: summary(&xs),
        target: summary(&ys),
        source_cheeger,
        target_cheeger,
        source_ends,
        target_ends,
        qi,
        promotion: matching.as_ref().map(MatchingSummary::from),
        promotion_failure,
        deficiency_bound,
        whyte_constant,
        whyte,
        passed,
    };

    let mut files = BTreeMap::new();
    let tag = |f: GraphFile| f.with_meta("seed", Value::from(cfg.seed));
    files.insert("source.json".to_string(), tag(source.file()).to_json());
    files.insert("target.json".to_string(), tag(target.file()).to_json());
    files.insert("map.json".to_string(), to_pretty_json(&MapFile::from_map(&vm)));
    if let Some(m) = &matching {
        files.insert("matching.json".to_string(), to_pretty_json(m));
    }
    files.insert("report.json".to_string(), to_pretty_json(&report));
    Ok(PipelineOutput { report, matching, files })
}
