//! Finite weighted graphs over a measure space.
//!
//! A [`WeightedGraph`] stores symmetric positive edge weights `b`, a positive
//! vertex measure `m`, and the cached degrees `deg(x) = Σ_y b(x,y)`.
//! Vertices carry arbitrary string ids; internally they are dense indices in
//! insertion order.

mod family;
mod io;

pub use family::Family;
pub use io::{load_graph, parse_graph, save_graph, write_graph};

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the vertex measure is chosen when a graph is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMode {
    /// `m = deg`, so every weighted degree equals one.
    Normalizing,
    /// `m = 1` everywhere.
    Counting,
    /// Explicit values keyed by vertex id.
    Custom(BTreeMap<String, f64>),
}

impl MeasureMode {
    pub fn kind(&self) -> MeasureKind {
        match self {
            MeasureMode::Normalizing => MeasureKind::Normalizing,
            MeasureMode::Counting => MeasureKind::Counting,
            MeasureMode::Custom(_) => MeasureKind::Custom,
        }
    }
}

/// Data-free tag of a [`MeasureMode`], kept on the built graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Normalizing,
    Counting,
    Custom,
}

impl std::fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeasureKind::Normalizing => "normalizing",
            MeasureKind::Counting => "counting",
            MeasureKind::Custom => "custom",
        })
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalizing" => Ok(MeasureKind::Normalizing),
            "counting" => Ok(MeasureKind::Counting),
            "custom" => Ok(MeasureKind::Custom),
            other => Err(Error::InvalidParameter(format!("unknown measure mode `{other}`"))),
        }
    }
}

pub(crate) fn validate_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains('#') || id.chars().any(char::is_whitespace) {
        return Err(Error::InvalidVertexId(id.to_string()));
    }
    Ok(())
}

/// Incremental construction with validation of every edge as it is added.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), f64>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a vertex (idempotent) and returns its dense index.
    pub fn vertex(&mut self, id: &str) -> Result<usize> {
        if let Some(&i) = self.index.get(id) {
            return Ok(i);
        }
        validate_id(id)?;
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        Ok(i)
    }

    /// Adds an undirected edge. Repeating an edge with the identical weight is a no-op.
    pub fn edge(&mut self, u: &str, v: &str, weight: f64) -> Result<()> {
        if u == v {
            return Err(Error::SelfLoop(u.to_string()));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::NonPositiveWeight { u: u.into(), v: v.into(), weight });
        }
        let a = self.vertex(u)?;
        let b = self.vertex(v)?;
        let key = (a.min(b), a.max(b));
        match self.edges.get(&key) {
            Some(&w) if w.to_bits() != weight.to_bits() => {
                Err(Error::ConflictingEdge { u: u.into(), v: v.into(), first: w, second: weight })
            }
            Some(_) => Ok(()),
            None => {
                self.edges.insert(key, weight);
                Ok(())
            }
        }
    }

    pub fn build(self, mode: MeasureMode) -> Result<WeightedGraph> {
        let n = self.ids.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut adjacency = vec![Vec::new(); n];
        for (&(a, b), &w) in &self.edges {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for row in &mut adjacency {
            row.sort_by_key(|&(y, _)| y);
        }
        let degree: Vec<f64> = adjacency.iter().map(|row| row.iter().map(|&(_, w)| w).sum()).collect();

        let measure = match &mode {
            MeasureMode::Normalizing => degree.clone(),
            MeasureMode::Counting => vec![1.0; n],
            MeasureMode::Custom(values) => self
                .ids
                .iter()
                .map(|id| values.get(id).copied().ok_or_else(|| Error::MissingMeasure(id.clone())))
                .collect::<Result<_>>()?,
        };
        for (id, &m) in self.ids.iter().zip(&measure) {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::NonPositiveMeasure { vertex: id.clone(), measure: m });
            }
        }
        if let MeasureMode::Custom(values) = &mode {
            if let Some(extra) = values.keys().find(|k| !self.index.contains_key(*k)) {
                return Err(Error::UnknownVertex(extra.clone()));
            }
        }

        let g = WeightedGraph { ids: self.ids, index: self.index, adjacency, measure, degree, kind: mode.kind() };
        g.check_connected()?;
        Ok(g)
    }
}

/// Builds a graph from an edge list. Vertices are ordered by first appearance.
pub fn build_graph<S: AsRef<str>>(edges: &[(S, S, f64)], mode: MeasureMode) -> Result<WeightedGraph> {
    let mut builder = GraphBuilder::new();
    for (u, v, w) in edges {
        builder.edge(u.as_ref(), v.as_ref(), *w)?;
    }
    builder.build(mode)
}

/// Immutable finite connected weighted graph.
///
/// A single vertex without edges is accepted (with counting or custom
/// measure) so that degenerate one-point spaces can be evaluated; every
/// graph with two or more vertices is connected and has positive degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    measure: Vec<f64>,
    degree: Vec<f64>,
    kind: MeasureKind,
}

impl WeightedGraph {
    /// One-point space with measure `m`.
    pub fn single_vertex(id: &str, m: f64) -> Result<Self> {
        let mut b = GraphBuilder::new();
        b.vertex(id)?;
        b.build(MeasureMode::Custom(BTreeMap::from([(id.to_string(), m)])))
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &self.adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(v) => Err(Error::Disconnected { a: self.ids[0].clone(), b: self.ids[v].clone() }),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, x: usize) -> &str {
        &self.ids[x]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    pub fn measure_kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    /// `deg(x) = Σ_y b(x,y)`.
    pub fn degree(&self, x: usize) -> f64 {
        self.degree[x]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Weighted degree `deg(x) / m(x)`.
    pub fn weighted_degree(&self, x: usize) -> f64 {
        self.degree[x] / self.measure[x]
    }

    pub fn weighted_degree_of(&self, id: &str) -> Result<f64> {
        Ok(self.weighted_degree(self.index_of(id)?))
    }

    /// Neighbours of `x` with edge weights, sorted by index.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    /// `b(x,y)`, zero when the vertices are not adjacent.
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        let row = &self.adjacency[x];
        row.binary_search_by_key(&y, |&(z, _)| z).map(|i| row[i].1).unwrap_or(0.0)
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        self.weight(x, y) > 0.0
    }

    /// Each undirected edge once, as `(x, y, b)` with `x < y`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.iter().filter(move |&&(y, _)| y > x).map(move |&(y, w)| (x, y, w)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn total_measure(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// Supremum of the weighted degree over a vertex set.
    pub fn max_weighted_degree<'a>(&self, set: impl IntoIterator<Item = &'a usize>) -> f64 {
        set.into_iter().map(|&x| self.weighted_degree(x)).fold(0.0, f64::max)
    }

    /// Supremum of `1/m` over a vertex set.
    pub fn max_inverse_measure<'a>(&self, set: impl IntoIterator<Item = &'a usize>) -> f64 {
        set.into_iter().map(|&x| 1.0 / self.measure[x]).fold(0.0, f64::max)
    }

    /// Same graph with a different measure.
    pub fn with_measure(&self, mode: MeasureMode) -> Result<Self> {
        let mut b = GraphBuilder::new();
        for id in &self.ids {
            b.vertex(id)?;
        }
        for (x, y, w) in self.edges() {
            b.edge(&self.ids[x], &self.ids[y], w)?;
        }
        b.build(mode)
    }

    /// Short human-readable summary used in reports.
    pub fn summary(&self) -> GraphSummary {
        GraphSummary {
            vertices: self.len(),
            edges: self.edge_count(),
            measure: self.kind,
            total_measure: self.total_measure(),
            max_weighted_degree: self.degree.iter().zip(&self.measure).map(|(d, m)| d / m).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub vertices: usize,
    pub edges: usize,
    pub measure: MeasureKind,
    pub total_measure: f64,
    pub max_weighted_degree: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_counting_degrees() {
        let g = build_graph(&[("1", "2", 1.0), ("2", "3", 1.0)], MeasureMode::Counting).unwrap();
        assert_eq!(g.degrees(), &[1.0, 2.0, 1.0]);
        assert_eq!(g.measures(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn normalizing_two_vertices() {
        let g = build_graph(&[("x", "y", 2.0)], MeasureMode::Normalizing).unwrap();
        assert_eq!(g.measures(), &[2.0, 2.0]);
        assert_eq!(g.weighted_degree(0), 1.0);
        assert_eq!(g.weighted_degree(1), 1.0);
    }

    #[test]
    fn disconnected_names_two_vertices() {
        let err = build_graph(&[("1", "2", 1.0), ("3", "4", 1.0)], MeasureMode::Counting).unwrap_err();
        match err {
            Error::Disconnected { a, b } => {
                assert_eq!(a, "1");
                assert_eq!(b, "3");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_bad_weights_and_conflicts() {
        assert!(matches!(build_graph(&[("a", "b", 0.0)], MeasureMode::Counting), Err(Error::NonPositiveWeight { .. })));
        assert!(matches!(build_graph(&[("a", "b", -1.0)], MeasureMode::Counting), Err(Error::NonPositiveWeight { .. })));
        assert!(matches!(
            build_graph(&[("a", "b", 1.0), ("b", "a", 2.0)], MeasureMode::Counting),
            Err(Error::ConflictingEdge { .. })
        ));
        assert!(build_graph(&[("a", "b", 1.0), ("b", "a", 1.0)], MeasureMode::Counting).is_ok());
        assert!(matches!(build_graph(&[("a", "a", 1.0)], MeasureMode::Counting), Err(Error::SelfLoop(_))));
        assert!(matches!(build_graph(&[("a b", "c", 1.0)], MeasureMode::Counting), Err(Error::InvalidVertexId(_))));
    }

    #[test]
    fn custom_measure_validation() {
        let m = BTreeMap::from([("x".to_string(), 4.0), ("y".to_string(), 0.0)]);
        assert!(matches!(build_graph(&[("x", "y", 2.0)], MeasureMode::Custom(m)), Err(Error::NonPositiveMeasure { .. })));
        let m = BTreeMap::from([("x".to_string(), 4.0), ("y".to_string(), 1.0)]);
        let g = build_graph(&[("x", "y", 2.0)], MeasureMode::Custom(m)).unwrap();
        assert_eq!(g.weighted_degree_of("x").unwrap(), 0.5);
        assert!(matches!(g.weighted_degree_of("z"), Err(Error::UnknownVertex(_))));
    }

    #[test]
    fn star_center_weighted_degree() {
        let g = Family::Star(5).generate(MeasureMode::Counting).unwrap();
        assert_eq!(g.weighted_degree(0), 5.0);
    }

    #[test]
    fn single_vertex_graphs() {
        let g = WeightedGraph::single_vertex("o", 3.0).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.degree(0), 0.0);
        assert!(WeightedGraph::single_vertex("o", 0.0).is_err());
        let mut b = GraphBuilder::new();
        b.vertex("o").unwrap();
        assert!(matches!(b.build(MeasureMode::Normalizing), Err(Error::NonPositiveMeasure { .. })));
    }

    #[test]
    fn weight_lookup_and_edges() {
        let g = Family::Polyline(4, 1.0).generate(MeasureMode::Counting).unwrap();
        assert_eq!(g.weight(1, 2), 2.0);
        assert_eq!(g.weight(2, 1), 2.0);
        assert_eq!(g.weight(0, 2), 0.0);
        let e: Vec<_> = g.edges().collect();
        assert_eq!(e, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)]);
    }
}
