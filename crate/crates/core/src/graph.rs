//! Compact metric graphs with delta-type vertex conditions.
//!
//! A [`MetricGraph`] is an immutable, validated value. Every surgery
//! (trivial-vertex insertion and suppression, vertex splitting and gluing,
//! length perturbation) returns a new graph.
//!
//! Each edge carries a coordinate `x` running from its first endpoint `u`
//! (`x = 0`) to its second endpoint `v` (`x = length`). Loops (`u == v`) and
//! parallel edges are allowed; a looping edge contributes two edge-ends, and
//! therefore two to the degree, at its vertex.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Vertex condition: `Delta(alpha)` means continuity plus
/// `sum of outgoing derivatives = alpha * f(v)`; `Dirichlet` means `f(v) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexCondition {
    Delta(f64),
    Dirichlet,
}

impl VertexCondition {
    /// The Neumann-Kirchhoff condition.
    pub const NK: VertexCondition = VertexCondition::Delta(0.0);

    pub fn is_nk(&self) -> bool {
        matches!(self, VertexCondition::Delta(a) if *a == 0.0)
    }

    pub fn is_robin(&self) -> bool {
        matches!(self, VertexCondition::Delta(a) if *a != 0.0)
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            VertexCondition::Delta(a) => Some(*a),
            VertexCondition::Dirichlet => None,
        }
    }
}

impl fmt::Display for VertexCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexCondition::Delta(a) if *a == 0.0 => write!(f, "nk"),
            VertexCondition::Delta(a) => write!(f, "delta {a}"),
            VertexCondition::Dirichlet => write!(f, "dirichlet"),
        }
    }
}

/// Which end of an edge: `Start` sits at `u` (`x = 0`), `End` at `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Start,
    End,
}

/// An edge-end attached to a vertex, by edge index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeEnd {
    pub edge: usize,
    pub end: End,
}

/// An edge-end addressed by edge id, used by [`MetricGraph::split_vertex`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeEndRef {
    pub edge: String,
    pub end: End,
}

impl EdgeEndRef {
    pub fn new(edge: impl Into<String>, end: End) -> Self {
        EdgeEndRef { edge: edge.into(), end }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub condition: VertexCondition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    /// Index of the vertex at `x = 0`.
    pub u: usize,
    /// Index of the vertex at `x = length`.
    pub v: usize,
    pub length: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    pub fn vertex_at(&self, end: End) -> usize {
        match end {
            End::Start => self.u,
            End::End => self.v,
        }
    }
}

/// Unvalidated graph description: the record the text format parses into.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphSpec {
    pub vertices: Vec<(String, VertexCondition)>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub u: String,
    pub v: String,
    pub length: f64,
}

impl GraphSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(mut self, id: &str, condition: VertexCondition) -> Self {
        self.vertices.push((id.to_string(), condition));
        self
    }

    pub fn edge(mut self, id: &str, u: &str, v: &str, length: f64) -> Self {
        self.edges.push(EdgeSpec {
            id: id.to_string(),
            u: u.to_string(),
            v: v.to_string(),
            length,
        });
        self
    }

    /// Validates into a connected graph.
    pub fn build(&self) -> Result<MetricGraph> {
        build_graph(self)
    }

    /// Validates everything except connectivity. Surgery results may be
    /// disconnected; [`MetricGraph::is_connected`] reports it.
    pub fn build_allow_disconnected(&self) -> Result<MetricGraph> {
        MetricGraph::from_spec(self)
    }
}

/// Builds a validated, connected [`MetricGraph`].
pub fn build_graph(spec: &GraphSpec) -> Result<MetricGraph> {
    let graph = MetricGraph::from_spec(spec)?;
    if !graph.is_connected() {
        return Err(Error::DisconnectedGraph {
            components: graph.component_count(),
        });
    }
    Ok(graph)
}

/// A maximal chain `v, v_1, ..., v_n, v` through degree-2 vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopDescriptor {
    pub attachment_vertex: String,
    pub intermediate_vertices: Vec<String>,
    pub edge_chain: Vec<String>,
    pub total_length: f64,
    /// No intermediate vertex carries a non-zero coefficient.
    pub pure: bool,
}

/// Result of [`MetricGraph::split_vertex`].
#[derive(Debug, Clone)]
pub struct SplitVertex {
    pub graph: MetricGraph,
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    incidence: Vec<Vec<EdgeEnd>>,
    component_of: Vec<usize>,
    components: usize,
}

impl MetricGraph {
    fn from_spec(spec: &GraphSpec) -> Result<Self> {
        if spec.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut vertices = Vec::with_capacity(spec.vertices.len());
        for (id, condition) in &spec.vertices {
            if index.insert(id.as_str(), vertices.len()).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
            if let VertexCondition::Delta(a) = condition {
                if !a.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "vertex `{id}` has non-finite coefficient {a}"
                    )));
                }
            }
            vertices.push(Vertex {
                id: id.clone(),
                condition: *condition,
            });
        }

        let mut edge_ids = HashSet::new();
        let mut edges = Vec::with_capacity(spec.edges.len());
        let mut incidence = vec![Vec::new(); vertices.len()];
        for e in &spec.edges {
            if !edge_ids.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(Error::NonpositiveLength {
                    edge: e.id.clone(),
                    length: e.length,
                });
            }
            let u = *index
                .get(e.u.as_str())
                .ok_or_else(|| Error::UnknownVertex(e.u.clone()))?;
            let v = *index
                .get(e.v.as_str())
                .ok_or_else(|| Error::UnknownVertex(e.v.clone()))?;
            let k = edges.len();
            incidence[u].push(EdgeEnd { edge: k, end: End::Start });
            incidence[v].push(EdgeEnd { edge: k, end: End::End });
            edges.push(Edge {
                id: e.id.clone(),
                u,
                v,
                length: e.length,
            });
        }

        for (vi, vertex) in vertices.iter().enumerate() {
            let degree = incidence[vi].len();
            if degree == 0 {
                return Err(Error::IsolatedVertex(vertex.id.clone()));
            }
            if vertex.condition == VertexCondition::Dirichlet && degree != 1 {
                return Err(Error::DirichletAtInternalVertex {
                    vertex: vertex.id.clone(),
                    degree,
                });
            }
        }

        let (component_of, components) = label_components(vertices.len(), &edges);
        Ok(MetricGraph {
            vertices,
            edges,
            incidence,
            component_of,
            components,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_index(&self, id: &str) -> Result<usize> {
        self.vertices
            .iter()
            .position(|v| v.id == id)
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn edge_index(&self, id: &str) -> Result<usize> {
        self.edges
            .iter()
            .position(|e| e.id == id)
            .ok_or_else(|| Error::UnknownEdge(id.to_string()))
    }

    /// Edge-ends at vertex `v`, a looping edge appearing twice.
    pub fn incident(&self, v: usize) -> &[EdgeEnd] {
        &self.incidence[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn min_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.length)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_connected(&self) -> bool {
        self.components == 1
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.component_of[v]
    }

    /// True when every vertex is Neumann-Kirchhoff or Dirichlet.
    pub fn is_nk_dirichlet(&self) -> bool {
        self.vertices.iter().all(|v| !v.condition.is_robin())
    }

    /// Connected and every vertex an NK vertex of degree 2: spectrally a
    /// circle.
    pub fn is_circle(&self) -> bool {
        self.is_connected()
            && self
                .vertices
                .iter()
                .enumerate()
                .all(|(i, v)| v.condition.is_nk() && self.degree(i) == 2)
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self
                .vertices
                .iter()
                .map(|v| (v.id.clone(), v.condition))
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeSpec {
                    id: e.id.clone(),
                    u: self.vertices[e.u].id.clone(),
                    v: self.vertices[e.v].id.clone(),
                    length: e.length,
                })
                .collect(),
        }
    }

    fn rebuild(&self, spec: &GraphSpec) -> Result<MetricGraph> {
        MetricGraph::from_spec(spec)
    }

    /// Returns a copy with the condition at vertex `id` replaced.
    pub fn with_condition(&self, id: &str, condition: VertexCondition) -> Result<MetricGraph> {
        let v = self.vertex_index(id)?;
        let mut spec = self.to_spec();
        spec.vertices[v].1 = condition;
        self.rebuild(&spec)
    }

    /// Returns a copy with all edge lengths replaced, in edge order.
    pub fn with_lengths(&self, lengths: &[f64]) -> Result<MetricGraph> {
        if lengths.len() != self.edges.len() {
            return Err(Error::DimensionMismatch {
                expected: self.edges.len(),
                got: lengths.len(),
            });
        }
        let mut spec = self.to_spec();
        for (e, &l) in spec.edges.iter_mut().zip(lengths) {
            e.length = l;
        }
        self.rebuild(&spec)
    }

    pub fn with_length(&self, edge: &str, length: f64) -> Result<MetricGraph> {
        let k = self.edge_index(edge)?;
        let mut lengths = self.lengths();
        lengths[k] = length;
        self.with_lengths(&lengths)
    }

    fn fresh_vertex_id(&self, base: &str) -> String {
        fresh_id(base, |id| self.vertices.iter().any(|v| v.id == id))
    }

    fn fresh_edge_id(&self, base: &str, taken: &[&str]) -> String {
        fresh_id(base, |id| {
            taken.contains(&id) || self.edges.iter().any(|e| e.id == id)
        })
    }

    /// Splits `edge` at distance `offset` from its `u` end by a new NK vertex
    /// of degree 2. Returns the new graph and the new vertex id.
    pub fn insert_trivial_vertex(&self, edge: &str, offset: f64) -> Result<(MetricGraph, String)> {
        let k = self.edge_index(edge)?;
        let length = self.edges[k].length;
        if !(offset > 0.0 && offset < length) {
            return Err(Error::OffsetOutOfRange { offset, length });
        }
        let mid = self.fresh_vertex_id(&format!("{edge}.mid"));
        let first = self.fresh_edge_id(&format!("{edge}.a"), &[]);
        let second = self.fresh_edge_id(&format!("{edge}.b"), &[first.as_str()]);

        let mut spec = self.to_spec();
        spec.vertices.push((mid.clone(), VertexCondition::NK));
        let old = spec.edges.remove(k);
        spec.edges.insert(
            k,
            EdgeSpec {
                id: second,
                u: mid.clone(),
                v: old.v,
                length: length - offset,
            },
        );
        spec.edges.insert(
            k,
            EdgeSpec {
                id: first,
                u: old.u,
                v: mid.clone(),
                length: offset,
            },
        );
        Ok((self.rebuild(&spec)?, mid))
    }

    /// Removes every NK vertex of degree 2 joining two distinct edges,
    /// concatenating the edges. A pure cycle collapses to one looping edge on
    /// the last remaining vertex.
    pub fn suppress_trivial_vertices(&self) -> MetricGraph {
        let mut spec = self.to_spec();
        loop {
            let graph = MetricGraph::from_spec(&spec).expect("suppression keeps validity");
            let candidate = (0..graph.vertex_count()).find(|&w| {
                let ends = graph.incident(w);
                graph.vertices[w].condition.is_nk()
                    && ends.len() == 2
                    && ends[0].edge != ends[1].edge
            });
            let Some(w) = candidate else {
                return graph;
            };
            let ends = graph.incident(w);
            let (e1, e2) = (ends[0], ends[1]);
            let other = |ee: EdgeEnd| {
                let e = &graph.edges[ee.edge];
                match ee.end {
                    End::Start => e.v,
                    End::End => e.u,
                }
            };
            let p = other(e1);
            let q = other(e2);
            let merged = EdgeSpec {
                id: graph.edges[e1.edge].id.clone(),
                u: graph.vertices[p].id.clone(),
                v: graph.vertices[q].id.clone(),
                length: graph.edges[e1.edge].length + graph.edges[e2.edge].length,
            };
            let (lo, hi) = if e1.edge < e2.edge {
                (e1.edge, e2.edge)
            } else {
                (e2.edge, e1.edge)
            };
            spec.edges.remove(hi);
            spec.edges[lo] = merged;
            spec.vertices.remove(w);
        }
    }

    /// All maximal loops: chains through degree-2 vertices that close on
    /// their attachment vertex. A bare looping edge has no intermediate
    /// vertices. A component that is a bare cycle is reported with its first
    /// vertex as attachment and is pure only if every vertex on it is NK.
    pub fn find_loops(&self) -> Vec<LoopDescriptor> {
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        let mut loops = Vec::new();

        let mut starts: Vec<usize> = (0..self.vertex_count())
            .filter(|&v| self.degree(v) != 2)
            .collect();
        for c in 0..self.components {
            let members: Vec<usize> = (0..self.vertex_count())
                .filter(|&v| self.component_of[v] == c)
                .collect();
            if members.iter().all(|&v| self.degree(v) == 2) {
                starts.push(members[0]);
            }
        }

        for &a in &starts {
            let whole_cycle = self.degree(a) == 2;
            for &start in self.incident(a) {
                let mut chain = vec![start.edge];
                let mut intermediate = Vec::new();
                let mut arrived = self.opposite(start);
                loop {
                    let w = self.edges[arrived.edge].vertex_at(arrived.end);
                    if w == a || self.degree(w) != 2 {
                        if w == a {
                            let mut key = chain.clone();
                            key.sort_unstable();
                            if seen.insert(key) {
                                let pure = intermediate
                                    .iter()
                                    .all(|&x: &usize| self.vertices[x].condition.is_nk())
                                    && (!whole_cycle || self.vertices[a].condition.is_nk());
                                loops.push(LoopDescriptor {
                                    attachment_vertex: self.vertices[a].id.clone(),
                                    intermediate_vertices: intermediate
                                        .iter()
                                        .map(|&x| self.vertices[x].id.clone())
                                        .collect(),
                                    edge_chain: chain
                                        .iter()
                                        .map(|&e| self.edges[e].id.clone())
                                        .collect(),
                                    total_length: chain.iter().map(|&e| self.edges[e].length).sum(),
                                    pure,
                                });
                            }
                        }
                        break;
                    }
                    intermediate.push(w);
                    let next = *self
                        .incident(w)
                        .iter()
                        .find(|&&ee| ee != arrived)
                        .expect("degree-2 vertex has a second edge-end");
                    chain.push(next.edge);
                    arrived = self.opposite(next);
                }
            }
        }
        loops
    }

    fn opposite(&self, ee: EdgeEnd) -> EdgeEnd {
        EdgeEnd {
            edge: ee.edge,
            end: match ee.end {
                End::Start => End::End,
                End::End => End::Start,
            },
        }
    }

    /// Replaces vertex `v` by two vertices sharing its edge-ends according to
    /// `first` / `second`, with coefficients `alphas` summing to the original
    /// coefficient. The result may be disconnected.
    pub fn split_vertex(
        &self,
        v: &str,
        first: &[EdgeEndRef],
        second: &[EdgeEndRef],
        alphas: (f64, f64),
    ) -> Result<SplitVertex> {
        let vi = self.vertex_index(v)?;
        let alpha = match self.vertices[vi].condition {
            VertexCondition::Delta(a) => a,
            VertexCondition::Dirichlet => return Err(Error::PartitionNotCovering(v.to_string())),
        };

        let resolve = |r: &EdgeEndRef| -> Result<EdgeEnd> {
            Ok(EdgeEnd {
                edge: self.edge_index(&r.edge)?,
                end: r.end,
            })
        };
        let a: Vec<EdgeEnd> = first.iter().map(resolve).collect::<Result<_>>()?;
        let b: Vec<EdgeEnd> = second.iter().map(resolve).collect::<Result<_>>()?;
        let mut union: Vec<EdgeEnd> = a.iter().chain(&b).copied().collect();
        union.sort_unstable();
        let mut at_v = self.incident(vi).to_vec();
        at_v.sort_unstable();
        if a.is_empty() || b.is_empty() || union != at_v {
            return Err(Error::PartitionNotCovering(v.to_string()));
        }
        let (a1, a2) = alphas;
        if (a1 + a2 - alpha).abs() > 1e-12 * (1.0 + alpha.abs()) {
            return Err(Error::AlphaSumMismatch {
                alpha1: a1,
                alpha2: a2,
                expected: alpha,
            });
        }

        let id1 = self.fresh_vertex_id(&format!("{v}.1"));
        let id2 = fresh_id(&format!("{v}.2"), |id| {
            id == id1 || self.vertices.iter().any(|x| x.id == id)
        });
        let mut spec = self.to_spec();
        spec.vertices[vi] = (id1.clone(), VertexCondition::Delta(a1));
        spec.vertices.insert(vi + 1, (id2.clone(), VertexCondition::Delta(a2)));
        for ee in &b {
            let e = &mut spec.edges[ee.edge];
            match ee.end {
                End::Start => e.u = id2.clone(),
                End::End => e.v = id2.clone(),
            }
        }
        for ee in &a {
            let e = &mut spec.edges[ee.edge];
            match ee.end {
                End::Start => e.u = id1.clone(),
                End::End => e.v = id1.clone(),
            }
        }
        Ok(SplitVertex {
            graph: self.rebuild(&spec)?,
            first: id1,
            second: id2,
        })
    }

    /// Merges two delta vertices into one (keeping the id of `v1`) whose
    /// coefficient is the sum of theirs.
    pub fn glue_vertices(&self, v1: &str, v2: &str) -> Result<MetricGraph> {
        let i1 = self.vertex_index(v1)?;
        let i2 = self.vertex_index(v2)?;
        if i1 == i2 {
            return Err(Error::InvalidArgument(format!("cannot glue `{v1}` to itself")));
        }
        let a1 = self.vertices[i1]
            .condition
            .alpha()
            .ok_or_else(|| Error::DirichletGlue(v1.to_string()))?;
        let a2 = self.vertices[i2]
            .condition
            .alpha()
            .ok_or_else(|| Error::DirichletGlue(v2.to_string()))?;
        let mut spec = self.to_spec();
        spec.vertices[i1].1 = VertexCondition::Delta(a1 + a2);
        spec.vertices.remove(i2);
        for e in &mut spec.edges {
            if e.u == v2 {
                e.u = v1.to_string();
            }
            if e.v == v2 {
                e.v = v1.to_string();
            }
        }
        self.rebuild(&spec)
    }

    /// Adds to each length an independent uniform draw from
    /// `[-epsilon, epsilon]`, deterministically in `seed`.
    pub fn perturb_lengths(&self, epsilon: f64, seed: u64) -> Result<MetricGraph> {
        let min_length = self.min_length();
        if !(epsilon >= 0.0 && epsilon < min_length) {
            return Err(Error::EpsilonTooLarge { epsilon, min_length });
        }
        if epsilon == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lengths: Vec<f64> = self
            .edges
            .iter()
            .map(|e| e.length + rng.random_range(-epsilon..=epsilon))
            .collect();
        self.with_lengths(&lengths)
    }

    /// Relabeling-invariant signature (conditions, degrees and quantized
    /// lengths). Equal signatures are taken as isomorphism for small graphs.
    pub fn canonical_signature(&self) -> GraphSignature {
        let q = |x: f64| (x * 1e9).round() as i64;
        let cond_key = |c: VertexCondition| match c {
            VertexCondition::Delta(a) => (0u8, q(a)),
            VertexCondition::Dirichlet => (1u8, 0),
        };
        let vkey = |v: usize| {
            let mut lens: Vec<i64> = self
                .incident(v)
                .iter()
                .map(|ee| q(self.edges[ee.edge].length))
                .collect();
            lens.sort_unstable();
            (cond_key(self.vertices[v].condition), self.degree(v), lens)
        };
        let mut vertices: Vec<_> = (0..self.vertex_count()).map(vkey).collect();
        vertices.sort();
        let mut edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (vkey(e.u), vkey(e.v));
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                (q(e.length), e.is_loop(), a, b)
            })
            .collect();
        edges.sort();
        GraphSignature {
            components: self.components,
            vertices,
            edges,
        }
    }

    /// Serializes to the line-oriented graph description format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("vertex {} {}\n", v.id, v.condition));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "edge {} {} {} {}\n",
                e.id, self.vertices[e.u].id, self.vertices[e.v].id, e.length
            ));
        }
        out
    }
}

type VertexKey = ((u8, i64), usize, Vec<i64>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSignature {
    components: usize,
    vertices: Vec<VertexKey>,
    edges: Vec<(i64, bool, VertexKey, VertexKey)>,
}

fn fresh_id(base: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(base) {
        return base.to_string();
    }
    (2..)
        .map(|n| format!("{base}{n}"))
        .find(|id| !taken(id))
        .expect("unbounded candidate ids")
}

fn label_components(n: usize, edges: &[Edge]) -> (Vec<usize>, usize) {
    let mut uf = crate::union_find::UnionFind::new(n);
    for e in edges {
        uf.union(e.u, e.v);
    }
    let mut labels = BTreeMap::new();
    let mut component_of = vec![0; n];
    for (v, slot) in component_of.iter_mut().enumerate() {
        let root = uf.find(v);
        let next = labels.len();
        *slot = *labels.entry(root).or_insert(next);
    }
    (component_of, labels.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circle(l: f64) -> MetricGraph {
        GraphSpec::new()
            .vertex("o", VertexCondition::NK)
            .edge("c", "o", "o", l)
            .build()
            .unwrap()
    }

    fn figure_eight(l1: f64, l2: f64) -> MetricGraph {
        GraphSpec::new()
            .vertex("o", VertexCondition::NK)
            .edge("a", "o", "o", l1)
            .edge("b", "o", "o", l2)
            .build()
            .unwrap()
    }

    fn star() -> MetricGraph {
        GraphSpec::new()
            .vertex("c", VertexCondition::NK)
            .vertex("l1", VertexCondition::Dirichlet)
            .vertex("l2", VertexCondition::Dirichlet)
            .vertex("l3", VertexCondition::Dirichlet)
            .edge("e1", "c", "l1", 1.0)
            .edge("e2", "c", "l2", 1.3)
            .edge("e3", "c", "l3", 1.7)
            .build()
            .unwrap()
    }

    #[test]
    fn dirichlet_interval_is_valid() {
        let g = GraphSpec::new()
            .vertex("a", VertexCondition::Dirichlet)
            .vertex("b", VertexCondition::Dirichlet)
            .edge("e", "a", "b", PI)
            .build()
            .unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (2, 1));
    }

    #[test]
    fn looping_edge_counts_twice() {
        let g = circle(2.0 * PI);
        assert_eq!(g.degree(0), 2);
        assert!(g.is_circle());
    }

    #[test]
    fn disjoint_edges_are_rejected() {
        let err = GraphSpec::new()
            .vertex("a", VertexCondition::NK)
            .vertex("b", VertexCondition::NK)
            .vertex("c", VertexCondition::NK)
            .vertex("d", VertexCondition::NK)
            .edge("e", "a", "b", 1.0)
            .edge("f", "c", "d", 1.0)
            .build()
            .unwrap_err();
        assert_eq!(err, Error::DisconnectedGraph { components: 2 });
    }

    #[test]
    fn validation_errors() {
        let base = GraphSpec::new()
            .vertex("a", VertexCondition::NK)
            .vertex("b", VertexCondition::NK);
        assert!(matches!(
            base.clone().edge("e", "a", "b", 0.0).build(),
            Err(Error::NonpositiveLength { .. })
        ));
        assert!(matches!(
            base.clone().vertex("a", VertexCondition::NK).edge("e", "a", "b", 1.0).build(),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            GraphSpec::new()
                .vertex("a", VertexCondition::Dirichlet)
                .edge("e", "a", "a", 1.0)
                .build(),
            Err(Error::DirichletAtInternalVertex { degree: 2, .. })
        ));
    }

    #[test]
    fn insert_midpoint() {
        let g = GraphSpec::new()
            .vertex("a", VertexCondition::NK)
            .vertex("b", VertexCondition::NK)
            .edge("e", "a", "b", 2.0)
            .build()
            .unwrap();
        let (h, mid) = g.insert_trivial_vertex("e", 1.0).unwrap();
        let m = h.vertex_index(&mid).unwrap();
        assert_eq!(h.degree(m), 2);
        assert!(h.vertices()[m].condition.is_nk());
        assert_eq!(h.lengths(), vec![1.0, 1.0]);
        assert_eq!(h.total_length(), 2.0);
        assert!(matches!(
            g.insert_trivial_vertex("e", 2.0),
            Err(Error::OffsetOutOfRange { .. })
        ));
        assert_eq!(
            h.suppress_trivial_vertices().canonical_signature(),
            g.canonical_signature()
        );
    }

    #[test]
    fn split_loop_stays_a_loop() {
        let g = circle(3.0);
        let (h, _) = g.insert_trivial_vertex("c", 1.5).unwrap();
        let loops = h.find_loops();
        assert_eq!(loops.len(), 1);
        assert!(loops[0].pure);
        assert!((loops[0].total_length - 3.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_collapses_to_looping_edge() {
        let g = GraphSpec::new()
            .vertex("a", VertexCondition::NK)
            .vertex("b", VertexCondition::NK)
            .vertex("c", VertexCondition::NK)
            .edge("x", "a", "b", 1.0)
            .edge("y", "b", "c", 2.0)
            .edge("z", "c", "a", 3.0)
            .build()
            .unwrap();
        let s = g.suppress_trivial_vertices();
        assert_eq!(s.vertex_count(), 1);
        assert_eq!(s.edge_count(), 1);
        assert!(s.edges()[0].is_loop());
        assert!((s.total_length() - 6.0).abs() < 1e-15);
        assert_eq!(s.suppress_trivial_vertices(), s);
    }

    #[test]
    fn suppression_leaves_nontrivial_graphs_alone() {
        let g = star();
        assert_eq!(g.suppress_trivial_vertices(), g);
        let robin = GraphSpec::new()
            .vertex("a", VertexCondition::Dirichlet)
            .vertex("m", VertexCondition::Delta(1.0))
            .vertex("b", VertexCondition::Dirichlet)
            .edge("x", "a", "m", 1.0)
            .edge("y", "m", "b", 1.0)
            .build()
            .unwrap();
        assert_eq!(robin.suppress_trivial_vertices(), robin);
    }

    #[test]
    fn figure_eight_has_two_pure_loops() {
        let loops = figure_eight(1.0, 2.0).find_loops();
        assert_eq!(loops.len(), 2);
        assert!(loops.iter().all(|l| l.pure && l.intermediate_vertices.is_empty()));
    }

    #[test]
    fn robin_intermediate_makes_loop_impure() {
        let g = GraphSpec::new()
            .vertex("a", VertexCondition::NK)
            .vertex("r", VertexCondition::Delta(1.0))
            .vertex("t", VertexCondition::NK)
            .edge("x", "a", "r", 1.0)
            .edge("y", "r", "a", 1.0)
            .edge("z", "a", "t", 1.0)
            .build()
            .unwrap();
        let loops = g.find_loops();
        assert_eq!(loops.len(), 1);
        assert!(!loops[0].pure);
        assert_eq!(loops[0].attachment_vertex, "a");
        assert_eq!(loops[0].intermediate_vertices, vec!["r".to_string()]);
    }

    #[test]
    fn impure_cycle_graph() {
        let g = GraphSpec::new()
            .vertex("r", VertexCondition::Delta(1.0))
            .vertex("n", VertexCondition::NK)
            .edge("x", "r", "n", PI)
            .edge("y", "n", "r", PI)
            .build()
            .unwrap();
        let loops = g.find_loops();
        assert_eq!(loops.len(), 1);
        assert!(!loops[0].pure);
        assert!(!g.is_circle());
    }

    #[test]
    fn tree_has_no_loops() {
        assert!(star().find_loops().is_empty());
    }

    #[test]
    fn split_and_glue_round_trip() {
        // Cycle a-b-c-a with a doubled edge at a; split a 2+2.
        let g = GraphSpec::new()
            .vertex("a", VertexCondition::Delta(0.5))
            .vertex("b", VertexCondition::NK)
            .vertex("c", VertexCondition::NK)
            .edge("x", "a", "b", 1.0)
            .edge("y", "b", "c", 1.2)
            .edge("z", "c", "a", 1.4)
            .edge("w", "a", "a", 0.9)
            .build()
            .unwrap();
        let first = [EdgeEndRef::new("x", End::Start), EdgeEndRef::new("z", End::End)];
        let second = [EdgeEndRef::new("w", End::Start), EdgeEndRef::new("w", End::End)];
        let split = g.split_vertex("a", &first, &second, (0.5, 0.0)).unwrap();
        assert!(!split.graph.is_connected());
        assert!((split.graph.total_length() - g.total_length()).abs() < 1e-15);
        let glued = split.graph.glue_vertices(&split.first, &split.second).unwrap();
        assert_eq!(glued.canonical_signature(), g.canonical_signature());

        assert!(matches!(
            g.split_vertex("a", &first, &second, (1.0, 1.0)),
            Err(Error::AlphaSumMismatch { .. })
        ));
        assert!(matches!(
            g.split_vertex("a", &first, &second[..1], (0.5, 0.0)),
            Err(Error::PartitionNotCovering(_))
        ));
    }

    #[test]
    fn split_leaf_edge_from_tree() {
        let g = star();
        let split = g
            .split_vertex(
                "c",
                &[EdgeEndRef::new("e1", End::Start)],
                &[EdgeEndRef::new("e2", End::Start), EdgeEndRef::new("e3", End::Start)],
                (0.0, 0.0),
            )
            .unwrap();
        assert_eq!(split.graph.component_count(), 2);
        let v1 = split.graph.vertex_index(&split.first).unwrap();
        assert_eq!(split.graph.degree(v1), 1);
    }

    #[test]
    fn glue_two_intervals_and_an_interval_to_itself() {
        let two = GraphSpec::new()
            .vertex("a", VertexCondition::Dirichlet)
            .vertex("b", VertexCondition::NK)
            .vertex("c", VertexCondition::NK)
            .vertex("d", VertexCondition::Dirichlet)
            .edge("x", "a", "b", 1.0)
            .edge("y", "c", "d", 2.0)
            .build_allow_disconnected()
            .unwrap();
        let glued = two.glue_vertices("b", "c").unwrap();
        assert!(glued.is_connected());
        let single = glued.suppress_trivial_vertices();
        assert_eq!(single.edge_count(), 1);
        assert!((single.total_length() - 3.0).abs() < 1e-15);

        let interval = GraphSpec::new()
            .vertex("a", VertexCondition::NK)
            .vertex("b", VertexCondition::NK)
            .edge("x", "a", "b", 1.0)
            .build()
            .unwrap();
        let looped = interval.glue_vertices("a", "b").unwrap();
        assert_eq!(looped.vertex_count(), 1);
        assert!(looped.edges()[0].is_loop());
        assert!(matches!(
            two.glue_vertices("a", "b"),
            Err(Error::DirichletGlue(_))
        ));
    }

    #[test]
    fn perturbation_bounds() {
        let g = figure_eight(1.0, 1.0);
        assert_eq!(g.perturb_lengths(0.0, 7).unwrap(), g);
        let p = g.perturb_lengths(0.01, 7).unwrap();
        assert_eq!(p, g.perturb_lengths(0.01, 7).unwrap());
        for (a, b) in p.lengths().iter().zip(g.lengths()) {
            assert!((a - b).abs() <= 0.01);
        }
        assert_ne!(p.lengths()[0], p.lengths()[1]);
        assert!(matches!(
            g.perturb_lengths(1.0, 7),
            Err(Error::EpsilonTooLarge { .. })
        ));
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        for g in [circle(1.0), figure_eight(1.0, 2.0), star()] {
            let total: usize = (0..g.vertex_count()).map(|v| g.degree(v)).sum();
            assert_eq!(total, 2 * g.edge_count());
        }
    }
}
