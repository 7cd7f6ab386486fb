//! JSON graph files, vertex-map files, DOT export.
//!
//! Graph files look like
//! `{"vertices":[{"id":0,"level":0}], "edges":[[0,1]], "root":0, "meta":{}}`
//! with edges listed once as `u < v` and vertex ids equal to their position.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fill::{Filling, SpaceKind};
use crate::graph::{UdbgGraph, VertexId};
use crate::qi::{QiConstants, VertexMap};
use crate::rational::Rational;
use crate::tree::RootedTree;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexRecord {
    pub id: VertexId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<VertexId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<VertexId>,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl GraphFile {
    pub fn from_graph(g: &UdbgGraph) -> Self {
        let vertices = (0..g.len())
            .map(|id| VertexRecord { id, level: g.level(id), parent: None, center: None, radius: None })
            .collect();
        GraphFile {
            vertices,
            edges: g.edges().map(|(u, v)| [u, v]).collect(),
            root: g.root(),
            meta: BTreeMap::new(),
        }
    }

    pub fn from_tree(t: &RootedTree) -> Self {
        let mut file = GraphFile::from_graph(t.graph());
        for rec in &mut file.vertices {
            rec.parent = t.parent(rec.id);
        }
        file.meta.insert("kind".into(), Value::from("tree"));
        file
    }

    pub fn from_filling(f: &Filling) -> Self {
        let mut file = GraphFile::from_graph(f.graph());
        for rec in &mut file.vertices {
            rec.center = Some(f.center(rec.id));
            rec.radius = Some(f.radius(rec.id));
        }
        let meta = [
            ("kind", Value::from("filling")),
            ("space", Value::from(f.space().kind().name())),
            ("resolution", Value::from(f.space().resolution())),
            ("scale", serde_json::to_value(f.scale()).expect("rationals serialize")),
            ("tau", serde_json::to_value(f.tau()).expect("rationals serialize")),
            ("seed", Value::from(f.seed())),
        ];
        file.meta.extend(meta.into_iter().map(|(k, v)| (k.to_string(), v)));
        file
    }

    pub fn with_meta(mut self, key: &str, value: Value) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Pretty JSON with a trailing newline; stable under parse and rewrite.
    pub fn to_json(&self) -> String {
        to_pretty_json(self)
    }

    fn levels(&self) -> Result<Option<Vec<u32>>> {
        let count = self.vertices.iter().filter(|r| r.level.is_some()).count();
        match count {
            0 => Ok(None),
            n if n == self.vertices.len() => Ok(Some(self.vertices.iter().map(|r| r.level.unwrap_or(0)).collect())),
            _ => Err(Error::Input("either every vertex has a level or none does".into())),
        }
    }

    pub fn to_graph(&self) -> Result<UdbgGraph> {
        for (i, rec) in self.vertices.iter().enumerate() {
            if rec.id != i {
                return Err(Error::Input(format!("vertex at position {i} has id {}", rec.id)));
            }
        }
        for &[u, v] in &self.edges {
            if u >= v {
                return Err(Error::Input(format!("edge [{u}, {v}] must be listed with u < v")));
            }
        }
        let edges: Vec<(VertexId, VertexId)> = self.edges.iter().map(|&[u, v]| (u, v)).collect();
        UdbgGraph::from_edges(self.vertices.len(), &edges, self.root, self.levels()?)
    }

    pub fn to_tree(&self) -> Result<RootedTree> {
        RootedTree::from_graph(&self.to_graph()?)
    }

    pub fn is_filling(&self) -> bool {
        self.meta.get("kind").and_then(Value::as_str) == Some("filling")
    }

    /// Level labels, centers and space kind of a filling file.
    pub fn filling_view(&self) -> Result<(SpaceKind, Vec<u32>, Vec<Rational>)> {
        let kind = self
            .meta
            .get("space")
            .and_then(Value::as_str)
            .and_then(SpaceKind::parse)
            .ok_or_else(|| Error::Input("filling file lacks a known meta.space".into()))?;
        let levels = self.levels()?.ok_or_else(|| Error::Input("filling file lacks levels".into()))?;
        let centers = self
            .vertices
            .iter()
            .map(|r| r.center.ok_or_else(|| Error::Input(format!("vertex {} lacks a center", r.id))))
            .collect::<Result<_>>()?;
        Ok((kind, levels, centers))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    /// `[source, target]` pairs in source order.
    pub map: Vec<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<QiConstants>,
}

impl MapFile {
    pub fn from_map(vm: &VertexMap) -> Self {
        MapFile {
            map: vm.image().iter().enumerate().map(|(x, &y)| [x, y]).collect(),
            constants: vm.constants().cloned(),
        }
    }

    pub fn to_map(&self) -> Result<VertexMap> {
        let mut image = Vec::with_capacity(self.map.len());
        for (i, &[x, y]) in self.map.iter().enumerate() {
            if x != i {
                return Err(Error::Input(format!("map entry {i} has source {x}")));
            }
            image.push(y);
        }
        let mut vm = VertexMap::new(image);
        if let Some(c) = &self.constants {
            vm.set_constants(c.clone());
        }
        Ok(vm)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    s.push('\n');
    s
}

/// Graphviz source; vertices sharing a level are ranked together.
pub fn to_dot(g: &UdbgGraph) -> String {
    let mut out = String::from("graph G {\n");
    if let Some(levels) = g.levels() {
        let mut by_level: BTreeMap<u32, Vec<VertexId>> = BTreeMap::new();
        for (v, &l) in levels.iter().enumerate() {
            by_level.entry(l).or_default().push(v);
        }
        for (l, vs) in by_level {
            let ids: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "  {{ rank=same; // level {l}\n    {};\n  }}", ids.join("; "));
        }
    } else {
        for v in 0..g.len() {
            let _ = writeln!(out, "  {v};");
        }
    }
    for (u, v) in g.edges() {
        let _ = writeln!(out, "  {u} -- {v};");
    }
    out.push_str("}\n");
    out
}

/// Edge list as `u,v` lines under a header.
pub fn to_edge_csv(g: &UdbgGraph) -> String {
    let mut out = String::from("u,v\n");
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u},{v}");
    }
    out
}
