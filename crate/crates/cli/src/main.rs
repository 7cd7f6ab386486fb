use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use bilip::cheeger::{certify_linear_iso, cheeger_exact, cheeger_family, Family};
use bilip::ends::{
    disconnection_check, doubling_check, enumerate_ends, perfectness_check, verify_ultrametric, UltrametricMode,
};
use bilip::fill::{center_map, SpaceKind};
use bilip::io::{to_dot, to_edge_csv, to_pretty_json, GraphFile, MapFile};
use bilip::pipeline::{run_pipeline, ExperimentConfig, GraphSpec, Schedule};
use bilip::qi::{hierarchical_end_map, induced_vertex_map, qi_constants, ScanMode, VertexMap};
use bilip::tree::{min_pseudo_regular_constant, RootedTree};
use bilip::whyte::promote_matching;
use bilip::{Error, Rational, Truncation, UdbgGraph};

/// Trees, fillings, isoperimetry and bilipschitz promotion.
#[derive(Parser)]
#[command(name = "bilip", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeKind {
    Kary,
    PseudoRegular,
    Stretched,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Sampled,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a rooted tree.
    GenTree {
        #[arg(long, value_enum)]
        kind: TreeKind,
        /// Branching number (kary, stretched) or pseudo-regularity constant.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        depth: u32,
        /// Maximum degree for pseudo-regular trees.
        #[arg(long, default_value_t = 4)]
        mu: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Segment schedule for stretched trees: `identity` or a constant.
        #[arg(long, default_value = "identity")]
        schedule: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a hyperbolic filling of a model space.
    Fill {
        #[arg(long)]
        space: String,
        #[arg(long)]
        levels: u32,
        #[arg(long)]
        scale: Option<String>,
        #[arg(long, default_value = "1")]
        tau: String,
        #[arg(long)]
        resolution: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cheeger certificate for a truncation interior.
    Cheeger {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1)]
        collar: u32,
        /// Enumerate every interior subset up to this size.
        #[arg(long)]
        exact_max: Option<usize>,
        #[arg(long, default_value = "all")]
        families: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check |A| <= C |∂A| on the families; exit 1 on failure.
        #[arg(long)]
        certify: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// End-space checks on a geodesically complete tree.
    Ends {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "ultrametric,doubling,perfect,disconnected")]
        check: String,
        /// Perfectness constant; defaults to the tree's pseudo-regularity constant.
        #[arg(long)]
        k: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the Gromov product table here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the induced (trees) or nearest-center (fillings) map and measure it.
    Qi {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        #[arg(long, value_enum, default_value = "sampled")]
        mode: Mode,
        #[arg(long, default_value_t = 256)]
        sources: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Promote a map to a bounded-distance matching.
    Promote {
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        /// `identity` or a map file; built from the inputs when absent.
        #[arg(long)]
        map: Option<String>,
        #[arg(long, default_value_t = 0)]
        rstart: u32,
        #[arg(long, default_value_t = 8)]
        rmax: u32,
        #[arg(long, default_value_t = 1)]
        collar: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config end to end.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a graph as JSON, DOT or a Gromov product CSV.
    Export {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Loaded {
    file: GraphFile,
    graph: UdbgGraph,
}

impl Loaded {
    fn read(path: &Path) -> bilip::Result<Self> {
        let file = GraphFile::parse(&std::fs::read_to_string(path)?)?;
        let graph = file.to_graph()?;
        Ok(Loaded { file, graph })
    }

    fn tree(&self) -> bilip::Result<RootedTree> {
        RootedTree::from_graph(&self.graph)
    }

    fn truncation(&self) -> bilip::Result<Truncation> {
        Truncation::new(self.graph.clone())
    }
}

fn parse_rational(s: &str) -> bilip::Result<Rational> {
    Rational::parse(s).ok_or_else(|| Error::Input(format!("not a rational: {s:?}")))
}

fn emit(text: &str, out: Option<&Path>) -> bilip::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn default_map(from: &Loaded, to: &Loaded) -> bilip::Result<VertexMap> {
    match (from.file.is_filling(), to.file.is_filling()) {
        (true, true) => {
            let (ka, la, ca) = from.file.filling_view()?;
            let (kb, lb, cb) = to.file.filling_view()?;
            if ka != kb {
                return Err(Error::Input("fillings of different model spaces".into()));
            }
            center_map(ka, &la, &ca, &lb, &cb)
        }
        (false, false) => {
            let (a, b) = (from.tree()?, to.tree()?);
            let em = hierarchical_end_map(&enumerate_ends(&a)?, &enumerate_ends(&b)?)?;
            induced_vertex_map(&a, &b, &em)
        }
        _ => Err(Error::Input("cannot build a map between a tree and a filling; pass --map".into())),
    }
}

/// Returns whether every checked property held.
fn run(cmd: Command) -> bilip::Result<bool> {
    match cmd {
        Command::GenTree { kind, k, depth, mu, seed, schedule, out } => {
            let spec = match kind {
                TreeKind::Kary => GraphSpec::Kary { k, depth },
                TreeKind::PseudoRegular => GraphSpec::PseudoRegular { k: k as u32, depth, mu, seed },
                TreeKind::Stretched => {
                    let schedule = match schedule.as_str() {
                        "identity" => Schedule::Identity,
                        c => Schedule::Constant(
                            c.parse().map_err(|_| Error::Input(format!("bad schedule {c:?}")))?,
                        ),
                    };
                    GraphSpec::Stretched { branching: k, depth, schedule }
                }
            };
            let file = spec.build()?.file().with_meta("spec", serde_json::to_value(&spec)?);
            std::fs::write(out, file.to_json())?;
            Ok(true)
        }
        Command::Fill { space, levels, scale, tau, resolution, seed, out } => {
            let space = SpaceKind::parse(&space).ok_or_else(|| Error::Input(format!("unknown space {space:?}")))?;
            let spec = GraphSpec::Filling {
                space,
                levels,
                resolution,
                scale: scale.as_deref().map(parse_rational).transpose()?,
                tau: parse_rational(&tau)?,
                seed,
            };
            std::fs::write(out, spec.build()?.file().to_json())?;
            Ok(true)
        }
        Command::Cheeger { graph, collar, exact_max, families, seed, certify, out } => {
            let t = Loaded::read(&graph)?.truncation()?;
            let families = Family::parse_list(&families)?;
            let cert = match exact_max {
                Some(m) => cheeger_exact(&t, collar, Some(m))?,
                None => cheeger_family(&t, collar, &families, seed)?,
            };
            let mut report = json!({ "certificate": cert, "seed": seed });
            let mut passed = true;
            if let Some(c) = certify {
                let iso = certify_linear_iso(&t, collar, parse_rational(&c)?, &families, seed)?;
                passed = iso.passed;
                report["linear_isoperimetric"] = serde_json::to_value(iso)?;
            }
            emit(&to_pretty_json(&report), out.as_deref())?;
            Ok(passed)
        }
        Command::Ends { graph, check, k, seed, csv, out } => {
            let tree = Loaded::read(&graph)?.tree()?;
            let es = enumerate_ends(&tree)?;
            let mut report = serde_json::Map::new();
            report.insert("rays".into(), Value::from(es.len()));
            let mut passed = true;
            for name in check.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (ok, value) = match name {
                    "ultrametric" => {
                        let r = verify_ultrametric(&es, UltrametricMode::Auto { seed });
                        (r.passed, serde_json::to_value(r)?)
                    }
                    "doubling" => {
                        let r = doubling_check(&es);
                        (r.passed, serde_json::to_value(r)?)
                    }
                    "perfect" => {
                        let k = match k {
                            Some(k) => k,
                            None => min_pseudo_regular_constant(&tree).unwrap_or(1),
                        };
                        let r = perfectness_check(&es, k)?;
                        (r.passed, json!({ "k": k, "passed": r.passed, "witness": r.witness }))
                    }
                    "disconnected" => {
                        let r = disconnection_check(&es);
                        (r.passed, serde_json::to_value(r)?)
                    }
                    other => return Err(Error::Input(format!("unknown check {other:?}"))),
                };
                passed &= ok;
                report.insert(name.to_string(), value);
            }
            if let Some(p) = csv {
                std::fs::write(p, es.gromov_csv())?;
            }
            emit(&to_pretty_json(&report), out.as_deref())?;
            Ok(passed)
        }
        Command::Qi { from, to, mode, sources, seed, out } => {
            let (a, b) = (Loaded::read(&from)?, Loaded::read(&to)?);
            let mut vm = default_map(&a, &b)?;
            let mode = match mode {
                Mode::Exact => ScanMode::Exact,
                Mode::Sampled => ScanMode::Sampled { seed, sources },
            };
            let c = qi_constants(&vm, &a.graph, &b.graph, mode)?;
            vm.set_constants(c);
            emit(&to_pretty_json(&MapFile::from_map(&vm)), out.as_deref())?;
            Ok(true)
        }
        Command::Promote { from, to, map, rstart, rmax, collar, out } => {
            let (a, b) = (Loaded::read(&from)?, Loaded::read(&to)?);
            let vm = match map.as_deref() {
                Some("identity") => {
                    if a.graph.len() != b.graph.len() {
                        return Err(Error::Input("identity map needs graphs of equal size".into()));
                    }
                    VertexMap::identity(a.graph.len())
                }
                Some(path) => MapFile::parse(&std::fs::read_to_string(path)?)?.to_map()?,
                None => default_map(&a, &b)?,
            };
            let res = promote_matching(&vm, &a.truncation()?, &b.truncation()?, rstart, rmax, collar)?;
            emit(&to_pretty_json(&res), out.as_deref())?;
            Ok(true)
        }
        Command::Verify { config, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let output = run_pipeline(&cfg)?;
            output.write(&cfg.output_dir)?;
            Ok(output.report.passed)
        }
        Command::Export { graph, format, out } => {
            let loaded = Loaded::read(&graph)?;
            let text = match format {
                Format::Json => loaded.file.to_json(),
                Format::Dot => to_dot(&loaded.graph),
                Format::Csv => match loaded.tree().and_then(|t| enumerate_ends(&t)) {
                    Ok(es) => es.gromov_csv(),
                    Err(_) => to_edge_csv(&loaded.graph),
                },
            };
            std::fs::write(out, text)?;
            Ok(true)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoBoundedMatching { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("BILIP_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::NotComplete { .. } = e {
                eprintln!("hint: prune dead ends to the geodesically complete core first");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
