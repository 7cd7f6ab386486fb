//! Acceptance run: one line per criterion, nonzero exit on any failure.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use bilip::cheeger::{cheeger_exact, cheeger_family, Family};
use bilip::ends::{doubling_check, enumerate_ends, verify_ultrametric, UltrametricMode};
use bilip::fill::{build_filling, filling_sanity, Filling, ModelSpace, SpaceKind};
use bilip::pipeline::{
    run_pipeline, AnalyzeStage, ExperimentConfig, GraphSpec, MapKind, PromoteStage, Schedule, VerifyStage,
};
use bilip::qi::{hierarchical_end_map, induced_vertex_map, pair_distance, VertexMap};
use bilip::tree::{gen_kary, gen_random_pseudo_regular, graft_segments, RootedTree, DEFAULT_VERTEX_BUDGET};
use bilip::whyte::{bilipschitz_constant, deficiency_chain, promote_matching, whyte_criterion, MatchingResult, PairMode};
use bilip::{Error, Rational, Truncation, UdbgGraph, VertexId};

const SEED: u64 = 20;

struct Outcome {
    passed: bool,
    detail: String,
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

/// An instance that promoted successfully, kept for the proof-chain check.
struct Promoted {
    label: String,
    vm: VertexMap,
    x: UdbgGraph,
    y: Truncation,
}

fn kary_ends(k: usize, d: u32) -> (RootedTree, bilip::ends::EndSpace) {
    let t = gen_kary(k, d).unwrap();
    let e = enumerate_ends(&t).unwrap();
    (t, e)
}

fn induced(a: &RootedTree, b: &RootedTree) -> VertexMap {
    let em = hierarchical_end_map(&enumerate_ends(a).unwrap(), &enumerate_ends(b).unwrap()).unwrap();
    induced_vertex_map(a, b, &em).unwrap()
}

/// Recounts the matching's claims from its pair list.
fn audit(m: &MatchingResult, vm: &VertexMap, x: &Truncation, y: &Truncation) -> Result<(), String> {
    let mut seen_x = vec![false; x.graph().len()];
    let mut seen_y = vec![false; y.graph().len()];
    for &(a, b) in &m.pairs {
        if std::mem::replace(&mut seen_x[a], true) || std::mem::replace(&mut seen_y[b], true) {
            return Err(format!("pair ({a}, {b}) reuses a vertex"));
        }
        if pair_distance(y.graph(), vm.get(a), b) > m.r {
            return Err(format!("pair ({a}, {b}) is farther than r = {}", m.r));
        }
    }
    if let Some(v) = (0..x.graph().len()).find(|&v| x.is_interior(v, m.collar) && !seen_x[v]) {
        return Err(format!("interior source vertex {v} unmatched"));
    }
    let width = (0..y.graph().len()).filter(|&v| !seen_y[v]).map(|v| y.distance_to_sphere(v)).max().unwrap_or(0);
    if width != m.confinement_width {
        return Err(format!("confinement width recount {width} != {}", m.confinement_width));
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 1

/// Independent enumerator: bitmask subsets of the interior, boundary by
/// neighbor scan into a sorted set, ratios compared by cross-multiplication.
fn oracle_cheeger(g: &UdbgGraph, interior: &[VertexId]) -> ((u64, u64), Vec<VertexId>) {
    let n = interior.len();
    let mut best: Option<((u64, u64), Vec<VertexId>)> = None;
    for bits in 1u32..(1 << n) {
        let set: Vec<VertexId> = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| interior[i]).collect();
        let members: BTreeSet<VertexId> = set.iter().copied().collect();
        let boundary: BTreeSet<VertexId> = set
            .iter()
            .flat_map(|&v| g.neighbors(v).iter().copied())
            .filter(|w| !members.contains(w))
            .collect();
        let cand = ((boundary.len() as u64, set.len() as u64), set);
        let replace = match &best {
            None => true,
            Some(((bn, bd), bs)) => {
                let (cn, cd) = cand.0;
                let lhs = cn * bd;
                let rhs = bn * cd;
                lhs < rhs || (lhs == rhs && (cand.1.len(), &cand.1) < (bs.len(), bs))
            }
        };
        if replace {
            best = Some(cand);
        }
    }
    best.unwrap()
}

fn criterion_1() -> Outcome {
    let t = gen_kary(2, 4).unwrap();
    let trunc = t.truncation();
    let interior = trunc.interior(1);
    let cert = cheeger_exact(trunc, 1, None).unwrap();
    let ((n, d), set) = oracle_cheeger(t.graph(), &interior);
    let same = cert.best_ratio == Rational::new(n as i64, d as i64) && cert.argmin_set == set && cert.verify(trunc);
    Outcome {
        passed: same,
        detail: format!(
            "exact {} on {:?}, oracle {}/{} on {:?}, {} subsets",
            cert.best_ratio, cert.argmin_set, n, d, set, cert.sets_tested
        ),
    }
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for k in [2usize, 3] {
        let mut ratios = Vec::new();
        for d in [6u32, 8] {
            let start = Instant::now();
            let t = gen_kary(k, d).unwrap();
            let cert = cheeger_family(t.truncation(), 1, &Family::all(), SEED).unwrap();
            let fast = within(start.elapsed(), 30);
            passed &= fast && cert.best_ratio > Rational::zero() && cert.verify(t.truncation());
            ratios.push(cert.best_ratio);
        }
        // decrease by at most ten percent: h8 >= (9/10) h6
        let stable = ratios[1] >= Rational::new(9, 10) * ratios[0];
        passed &= stable;
        parts.push(format!("k={k}: D6 {} D8 {}", ratios[0], ratios[1]));
    }
    Outcome { passed, detail: parts.join("; ") }
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let (_, big) = kary_ends(2, 10);
    let sampled = verify_ultrametric(&big, UltrametricMode::Sampled { seed: SEED, triples: 1_000_000 });
    let (_, small) = kary_ends(2, 6);
    let exhaustive = verify_ultrametric(&small, UltrametricMode::Exhaustive);
    Outcome {
        passed: sampled.passed && exhaustive.passed && exhaustive.exhaustive,
        detail: format!(
            "D10 sampled {} triples, D6 exhaustive {} triples, witnesses {:?} {:?}",
            sampled.triples_checked, exhaustive.triples_checked, sampled.witness, exhaustive.witness
        ),
    }
}

// ---------------------------------------------------------------- criterion 4

/// For every vertex, the rays through it form a ball; counts the distinct
/// vertices those rays pass at two steps below their common prefix.
fn oracle_parts(t: &RootedTree) -> usize {
    let depth = t.depth() as usize;
    let paths: Vec<Vec<VertexId>> = t
        .leaves()
        .map(|leaf| {
            let mut p = vec![leaf];
            while let Some(up) = t.parent(*p.last().unwrap()) {
                p.push(up);
            }
            p.reverse();
            p
        })
        .collect();
    let mut best = 0;
    for v in 0..t.len() {
        let lv = t.level(v) as usize;
        let through: Vec<&Vec<VertexId>> = paths.iter().filter(|p| p[lv] == v).collect();
        let parts = if through.len() == 1 {
            1
        } else {
            let common = (0..=depth).take_while(|&i| through.iter().all(|p| p[i] == through[0][i])).count() - 1;
            let step = (common + 2).min(depth);
            through.iter().map(|p| p[step]).collect::<BTreeSet<_>>().len()
        };
        best = best.max(parts);
    }
    best
}

fn criterion_4() -> Outcome {
    let (t, es) = kary_ends(2, 8);
    let report = doubling_check(&es);
    let oracle = oracle_parts(&t);
    Outcome {
        passed: report.passed && report.bound == 9 && report.max_parts == oracle && oracle == 4,
        detail: format!(
            "max parts {} (oracle {oracle}), bound {}, {} balls",
            report.max_parts, report.bound, report.balls_checked
        ),
    }
}

// ---------------------------------------------------------------- criterion 5

fn suite() -> Vec<(String, Truncation)> {
    let mut out: Vec<(String, Truncation)> = Vec::new();
    for (k, d) in [(2, 4), (2, 6), (2, 8), (3, 5), (4, 4)] {
        out.push((format!("kary({k},{d})"), gen_kary(k, d).unwrap().truncation().clone()));
    }
    let pr = gen_random_pseudo_regular(7, 3, 9, 4).unwrap();
    out.push(("pseudo-regular(7,3,9,4)".into(), pr.truncation().clone()));
    let graft = graft_segments(&gen_kary(2, 5).unwrap(), |_| 2, DEFAULT_VERTEX_BUDGET).unwrap();
    out.push(("graft-2(2,5)".into(), graft.truncation().clone()));
    let stretched = graft_segments(&gen_kary(2, 6).unwrap(), |g| g, DEFAULT_VERTEX_BUDGET).unwrap();
    out.push(("stretched(2,6)".into(), stretched.truncation().clone()));
    for kind in [SpaceKind::Cantor13, SpaceKind::Interval, SpaceKind::Circle] {
        let space = ModelSpace::new(kind, 8).unwrap();
        let f = build_filling(&space, kind.default_scale(), Rational::one(), 5, SEED).unwrap();
        out.push((format!("filling({})", kind.name()), f.truncation()));
    }
    out
}

fn criterion_5(promoted: &mut Vec<Promoted>) -> Outcome {
    let mut passed = true;
    let mut slowest = Duration::ZERO;
    let mut failures = Vec::new();
    let graphs = suite();
    for (label, t) in &graphs {
        let start = Instant::now();
        let vm = VertexMap::identity(t.graph().len());
        match promote_matching(&vm, t, t, 0, 2, 1) {
            Ok(m) => {
                let ok = m.r == 0
                    && m.bilipschitz == Rational::one()
                    && m.unmatched_x.is_empty()
                    && m.unmatched_y.is_empty()
                    && audit(&m, &vm, t, t).is_ok();
                let elapsed = start.elapsed();
                slowest = slowest.max(elapsed);
                if !ok || !within(elapsed, 1) {
                    passed = false;
                    failures.push(label.clone());
                }
                promoted.push(Promoted { label: label.clone(), vm, x: t.graph().clone(), y: t.clone() });
            }
            Err(e) => {
                passed = false;
                failures.push(format!("{label}: {e}"));
            }
        }
    }
    Outcome {
        passed,
        detail: format!("{} graphs, slowest {:.3} s, failures {:?}", graphs.len(), slowest.as_secs_f64(), failures),
    }
}

// ---------------------------------------------------------------- criterion 6

fn depth_pairing(dx: u32, k: f64, l: f64) -> u32 {
    (dx as f64 * k.ln() / l.ln()).round() as u32
}

fn criterion_6(promoted: &mut Vec<Promoted>) -> Outcome {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut passed = true;
    for dx in [7u32, 9] {
        let dy = depth_pairing(dx, 3.0, 4.0);
        let (a, b) = (gen_kary(3, dx).unwrap(), gen_kary(4, dy).unwrap());
        let vm = induced(&a, &b);
        match promote_matching(&vm, a.truncation(), b.truncation(), 0, 8, 2) {
            Ok(m) => {
                let (l, exact) = bilipschitz_constant(&m.pairs, a.graph(), b.graph(), PairMode::Exact).unwrap();
                let confined = m.unmatched_y.iter().all(|&y| b.truncation().distance_to_sphere(y) <= 2);
                let audited = audit(&m, &vm, a.truncation(), b.truncation());
                passed &= confined && exact && audited.is_ok();
                rows.push((dx, dy, m.r, l, m.unmatched_y.len(), m.confinement_width));
                promoted.push(Promoted {
                    label: format!("ternary({dx})->quaternary({dy})"),
                    vm,
                    x: a.graph().clone(),
                    y: b.truncation().clone(),
                });
            }
            Err(e) => {
                passed = false;
                rows.push((dx, dy, u32::MAX, Rational::zero(), 0, 0));
                eprintln!("criterion 6: D_X={dx}: {e}");
            }
        }
    }
    if rows.len() == 2 && rows[0].2 != u32::MAX && rows[1].2 != u32::MAX {
        let (l7, l9) = (rows[0].3, rows[1].3);
        let r_ok = rows[1].2 <= rows[0].2 + 1;
        let l_ok = (l9 - l7).abs() <= Rational::new(1, 4) * l7;
        passed &= r_ok && l_ok;
    }
    let elapsed = start.elapsed();
    passed &= within(elapsed, 120);
    let detail = rows
        .iter()
        .map(|(dx, dy, r, l, un, w)| format!("D_X={dx} D_Y={dy}: r={r} L={l} unmatched_y={un} width={w}"))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome { passed, detail: format!("{detail}; {:.1} s", elapsed.as_secs_f64()) }
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut results = Vec::new();
    for d in [6u32, 12] {
        let y = gen_kary(2, d).unwrap();
        let x = graft_segments(&y, |g| Schedule::Identity.at(g), DEFAULT_VERTEX_BUDGET).unwrap();
        let vm = induced(&x, &y);
        results.push((d, x.len(), promote_matching(&vm, x.truncation(), y.truncation(), 0, 6, 1)));
    }
    let radius = |r: &Result<MatchingResult, Error>| r.as_ref().ok().map(|m| m.r);
    let no_matching_at_12 = matches!(results[1].2, Err(Error::NoBoundedMatching { r_max: 6, .. }));
    let grew = matches!((radius(&results[0].2), radius(&results[1].2)), (Some(a), Some(b)) if b >= a + 2);
    let elapsed = start.elapsed();
    let describe = |r: &Result<MatchingResult, Error>| match r {
        Ok(m) => format!("r={}", m.r),
        Err(e) => e.to_string(),
    };
    Outcome {
        passed: (no_matching_at_12 || grew) && within(elapsed, 120),
        detail: results
            .iter()
            .map(|(d, n, r)| format!("D={d} (|X|={n}): {}", describe(r)))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

// ---------------------------------------------------------------- criterion 8

fn cantor_filling(seed: u64) -> Filling {
    let space = ModelSpace::new(SpaceKind::Cantor13, 8).unwrap();
    build_filling(&space, Rational::new(1, 3), Rational::one(), 7, seed).unwrap()
}

fn criterion_8(promoted: &mut Vec<Promoted>) -> Outcome {
    let start = Instant::now();
    let (fa, fb) = (cantor_filling(1), cantor_filling(2));
    let centers_differ = fa.centers() != fb.centers();
    let (sa, sb) = (filling_sanity(&fa), filling_sanity(&fb));
    let mid = |s: &bilip::fill::FillingReport| s.max_degree_per_level[3..=6].to_vec();
    let degrees_ok = mid(&sa).windows(2).all(|w| w[0] == w[1]) && mid(&sa) == mid(&sb);
    let vm = fa.center_map(&fb).unwrap();
    let (ta, tb) = (fa.truncation(), fb.truncation());
    let mut passed = centers_differ && degrees_ok;
    let detail = match promote_matching(&vm, &ta, &tb, 0, 8, 1) {
        Ok(m) => {
            let confined = m.unmatched_y.iter().all(|&y| tb.distance_to_sphere(y) <= 1);
            passed &= confined && audit(&m, &vm, &ta, &tb).is_ok();
            let d = format!(
                "r={} L={} unmatched_y={} width={} degrees(3..6)={:?}/{:?}",
                m.r,
                m.bilipschitz,
                m.unmatched_y.len(),
                m.confinement_width,
                mid(&sa),
                mid(&sb)
            );
            promoted.push(Promoted { label: "cantor fillings".into(), vm, x: ta.graph().clone(), y: tb });
            d
        }
        Err(e) => {
            passed = false;
            e.to_string()
        }
    };
    passed &= within(start.elapsed(), 60);
    Outcome { passed, detail: format!("{detail}; centers differ: {centers_differ}") }
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9(promoted: &[Promoted]) -> Outcome {
    let start = Instant::now();
    let families = Family::all();
    let mut passed = !promoted.is_empty();
    let mut worst = Vec::new();
    for p in promoted {
        let chain = deficiency_chain(&p.vm, &p.x, p.y.graph()).unwrap();
        let a = Rational::integer(chain.bound() as i64);
        let cert = cheeger_family(&p.y, 1, &families, SEED).unwrap();
        // C = A h with h = 1 / best ratio
        let c = a / cert.best_ratio;
        let rep = whyte_criterion(&chain, &p.y, 1, 1, &families, SEED, Some(c)).unwrap();
        if !rep.passed || rep.violations != 0 {
            passed = false;
            worst.push(format!("{}: {} violations", p.label, rep.violations));
        } else if !a.is_zero() {
            worst.push(format!("{}: A={a} C={c} max={}", p.label, rep.max_ratio));
        }
    }
    passed &= within(start.elapsed(), 60);
    Outcome { passed, detail: format!("{} instances; {}", promoted.len(), worst.join("; ")) }
}

// ---------------------------------------------------------------- criterion 10

fn configs() -> Vec<ExperimentConfig> {
    let base = |name: &str, source: GraphSpec, target: GraphSpec, map: MapKind, collar: u32| ExperimentConfig {
        name: name.into(),
        seed: SEED,
        output_dir: "unused".into(),
        source,
        target,
        analyze: AnalyzeStage { collar: 1, families: Family::all(), ends: true, qi_sources: Some(32) },
        promote: PromoteStage { map, r_start: 0, r_max: 8, collar },
        verify: VerifyStage { whyte: true },
    };
    let filling = |seed| GraphSpec::Filling {
        space: SpaceKind::Cantor13,
        levels: 8,
        resolution: None,
        scale: None,
        tau: Rational::one(),
        seed,
    };
    vec![
        base("identity", GraphSpec::Kary { k: 2, depth: 6 }, GraphSpec::Kary { k: 2, depth: 6 }, MapKind::Identity, 1),
        base(
            "ternary-quaternary",
            GraphSpec::Kary { k: 3, depth: 7 },
            GraphSpec::Kary { k: 4, depth: 6 },
            MapKind::Induced,
            2,
        ),
        base(
            "pseudo-regular",
            GraphSpec::PseudoRegular { k: 3, depth: 9, mu: 4, seed: 7 },
            GraphSpec::PseudoRegular { k: 3, depth: 9, mu: 4, seed: 7 },
            MapKind::Parent,
            1,
        ),
        base("fillings", filling(1), filling(2), MapKind::Center, 1),
        base(
            "stretched",
            GraphSpec::Stretched { branching: 2, depth: 6, schedule: Schedule::Identity },
            GraphSpec::Kary { k: 2, depth: 6 },
            MapKind::Induced,
            1,
        ),
    ]
}

fn criterion_10() -> Outcome {
    let mut passed = true;
    let mut notes = Vec::new();
    for cfg in configs() {
        let (a, b) = (run_pipeline(&cfg).unwrap(), run_pipeline(&cfg).unwrap());
        let same = a.files == b.files;
        passed &= same;
        let bytes: usize = a.files.values().map(String::len).sum();
        notes.push(format!("{} ({} files, {bytes} bytes{})", cfg.name, a.files.len(), if same { "" } else { ", DIFFER" }));
    }
    let (f1, f2) = (cantor_filling(5), cantor_filling(5));
    let edges_same = f1.graph().edges().eq(f2.graph().edges());
    passed &= edges_same;
    Outcome { passed, detail: notes.join(", ") }
}

type Check = Box<dyn FnOnce(&mut Vec<Promoted>) -> Outcome>;

fn main() {
    let mut promoted = Vec::new();
    let mut all = true;
    let criteria: Vec<(u32, &str, Check)> = vec![
        (1, "cheeger oracle equivalence", Box::new(|_| criterion_1())),
        (2, "isoperimetric positivity trend", Box::new(|_| criterion_2())),
        (3, "ultrametric exactness", Box::new(|_| criterion_3())),
        (4, "doubling bound", Box::new(|_| criterion_4())),
        (5, "trivial promotion", Box::new(criterion_5)),
        (6, "ternary/quaternary promotion", Box::new(criterion_6)),
        (7, "negative control", Box::new(|_| criterion_7())),
        (8, "cantor fillings", Box::new(criterion_8)),
        (9, "proof-chain consistency", Box::new(|p: &mut Vec<Promoted>| criterion_9(p))),
        (10, "determinism", Box::new(|_| criterion_10())),
    ];
    let limits = [10u64, 60, 10, 5, 15, 120, 120, 60, 60, 300];
    for ((n, name, run), limit) in criteria.into_iter().zip(limits) {
        let start = Instant::now();
        let out = run(&mut promoted);
        let elapsed = start.elapsed();
        let passed = out.passed && within(elapsed, limit);
        all &= passed;
        println!(
            "criterion {n:>2} {}: {name}: {} ({:.2} s)",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    if !all {
        std::process::exit(1);
    }
}
