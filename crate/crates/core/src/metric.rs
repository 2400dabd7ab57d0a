//! Path metrics, closed balls, ball measures and jump sizes.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;
use std::io::Write;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::par::map_range;
use crate::tolerances::INTRINSIC_RELATIVE_TOLERANCE;

/// Edge lengths `w`, stored aligned with [`WeightedGraph::neighbors`].
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLengths {
    rows: Vec<Vec<f64>>,
}

impl EdgeLengths {
    /// `w(x,y) = max(Deg_x, Deg_y)^(-1/2)`, the standard intrinsic choice.
    pub fn default_intrinsic(g: &WeightedGraph) -> Self {
        Self::from_fn(g, |x, y| g.weighted_degree(x).max(g.weighted_degree(y)).powf(-0.5))
    }

    /// Unit length on every edge.
    pub fn combinatorial(g: &WeightedGraph) -> Self {
        Self::from_fn(g, |_, _| 1.0)
    }

    pub fn from_fn(g: &WeightedGraph, f: impl Fn(usize, usize) -> f64) -> Self {
        let rows = (0..g.len()).map(|x| g.neighbors(x).iter().map(|&(y, _)| f(x, y)).collect()).collect();
        Self { rows }
    }

    /// Length of edge `(x, y)`; `None` for non-edges.
    pub fn get(&self, g: &WeightedGraph, x: usize, y: usize) -> Option<f64> {
        let nbrs = g.neighbors(x);
        nbrs.binary_search_by_key(&y, |&(z, _)| z).ok().map(|i| self.rows[x][i])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { rows: self.rows.iter().map(|r| r.iter().map(|w| w * factor).collect()).collect() }
    }

    fn validate(&self, g: &WeightedGraph) -> Result<()> {
        if self.rows.len() != g.len() {
            return Err(Error::ShapeMismatch { expected: g.len(), found: self.rows.len() });
        }
        for x in 0..g.len() {
            for (&(y, _), &w) in g.neighbors(x).iter().zip(&self.rows[x]) {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::NonPositiveWeight { u: g.id(x).into(), v: g.id(y).into(), weight: w });
                }
                if self.get(g, y, x).map(f64::to_bits) != Some(w.to_bits()) {
                    return Err(Error::Asymmetric {
                        u: g.id(x).into(),
                        v: g.id(y).into(),
                        forward: w,
                        backward: self.get(g, y, x).unwrap_or(f64::NAN),
                    });
                }
            }
        }
        Ok(())
    }

    /// Parses a `metric v1` override file; every edge must receive exactly one length.
    pub fn parse(g: &WeightedGraph, text: &str) -> Result<Self> {
        let mut values: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut header = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let t: Vec<&str> = content.split_whitespace().collect();
            if !header {
                if t != ["metric", "v1"] {
                    return Err(Error::parse(line, 1, "expected header `metric v1`"));
                }
                header = true;
                continue;
            }
            if t[0] != "w" {
                return Err(Error::parse(line, 1, format!("unknown directive `{}`", t[0])));
            }
            if t.len() != 4 {
                return Err(Error::parse(line, t.len().min(4) + 1, "`w` takes 3 fields"));
            }
            let x = g.index_of(t[1]).map_err(|e| Error::parse(line, 2, e.to_string()))?;
            let y = g.index_of(t[2]).map_err(|e| Error::parse(line, 3, e.to_string()))?;
            if !g.is_edge(x, y) {
                return Err(Error::NotAnEdge { u: t[1].into(), v: t[2].into() });
            }
            let w: f64 = t[3].parse().map_err(|_| Error::parse(line, 4, format!("`{}` is not a number", t[3])))?;
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositiveWeight { u: t[1].into(), v: t[2].into(), weight: w });
            }
            let key = (x.min(y), x.max(y));
            if let Some(&old) = values.get(&key) {
                if old.to_bits() != w.to_bits() {
                    return Err(Error::ConflictingEdge { u: t[1].into(), v: t[2].into(), first: old, second: w });
                }
            }
            values.insert(key, w);
        }
        if !header {
            return Err(Error::parse(1, 1, "missing header `metric v1`"));
        }
        if let Some((x, y, _)) = g.edges().find(|&(x, y, _)| !values.contains_key(&(x, y))) {
            return Err(Error::MissingEdgeWeight { u: g.id(x).into(), v: g.id(y).into() });
        }
        Ok(Self::from_fn(g, |x, y| values[&(x.min(y), x.max(y))]))
    }

    pub fn write(&self, g: &WeightedGraph) -> String {
        let mut out = String::from("metric v1\n");
        for (x, y, _) in g.edges() {
            let w = self.get(g, x, y).unwrap_or(f64::NAN);
            let _ = writeln!(out, "w {} {} {w:?}", g.id(x), g.id(y));
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}
impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn dijkstra(g: &WeightedGraph, w: &EdgeLengths, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), x))) = heap.pop() {
        if d > dist[x] {
            continue;
        }
        for (&(y, _), &len) in g.neighbors(x).iter().zip(&w.rows[x]) {
            let nd = d + len;
            if nd < dist[y] {
                dist[y] = nd;
                heap.push(Reverse((Dist(nd), y)));
            }
        }
    }
    dist
}

/// Distances from one centre in sorted order, with cumulative ball measures.
#[derive(Debug)]
struct BallIndex {
    /// Distinct distances from the centre, increasing.
    radii: Vec<f64>,
    /// Vertices sorted by distance (ties by index).
    order: Vec<usize>,
    /// Number of vertices within `radii[k]`.
    counts: Vec<usize>,
    /// Measure of the closed ball of radius `radii[k]`.
    measures: Vec<f64>,
    /// `s_x` on `[radii[k], radii[k+1])`.
    jumps: Vec<f64>,
}

/// Full distance table with lazily built per-centre ball and jump-size indices.
#[derive(Debug)]
pub struct MetricStructure {
    n: usize,
    lengths: EdgeLengths,
    dist: Vec<f64>,
    measure: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    incident: Vec<f64>,
    balls: Vec<OnceLock<BallIndex>>,
    global_jump: f64,
    diameter: f64,
}

impl MetricStructure {
    /// All-pairs shortest paths over `w` (one Dijkstra run per source).
    pub fn new(g: &WeightedGraph, lengths: EdgeLengths) -> Result<Self> {
        lengths.validate(g)?;
        let n = g.len();
        let rows = map_range(n, |x| dijkstra(g, &lengths, x));
        let mut dist: Vec<f64> = rows.into_iter().flatten().collect();
        // Summation order can differ by direction; keep the table exactly symmetric.
        for x in 0..n {
            for y in x + 1..n {
                let d = dist[x * n + y].min(dist[y * n + x]);
                dist[x * n + y] = d;
                dist[y * n + x] = d;
            }
        }
        Ok(Self::assemble(g, lengths, dist))
    }

    /// Metric with the default intrinsic edge lengths.
    pub fn intrinsic(g: &WeightedGraph) -> Result<Self> {
        Self::new(g, EdgeLengths::default_intrinsic(g))
    }

    /// Combinatorial graph distance.
    pub fn combinatorial(g: &WeightedGraph) -> Result<Self> {
        Self::new(g, EdgeLengths::combinatorial(g))
    }

    fn assemble(g: &WeightedGraph, lengths: EdgeLengths, dist: Vec<f64>) -> Self {
        let n = g.len();
        let edges: Vec<(usize, usize, f64)> = g.edges().map(|(x, y, _)| (x, y, dist[x * n + y])).collect();
        let mut incident = vec![0.0f64; n];
        for &(x, y, r) in &edges {
            incident[x] = incident[x].max(r);
            incident[y] = incident[y].max(r);
        }
        let global_jump = edges.iter().map(|e| e.2).fold(0.0, f64::max);
        let diameter = dist.iter().copied().fold(0.0, f64::max);
        Self {
            n,
            lengths,
            dist,
            measure: g.measures().to_vec(),
            edges,
            incident,
            balls: (0..n).map(|_| OnceLock::new()).collect(),
            global_jump,
            diameter,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lengths(&self) -> &EdgeLengths {
        &self.lengths
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    /// Row `ρ(x, ·)`.
    pub fn row(&self, x: usize) -> &[f64] {
        &self.dist[x * self.n..(x + 1) * self.n]
    }

    /// Row-major `n × n` table.
    pub fn table(&self) -> &[f64] {
        &self.dist
    }

    /// Global jump size `S`, the largest metric length of an edge.
    pub fn global_jump(&self) -> f64 {
        self.global_jump
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    fn index(&self, x: usize) -> &BallIndex {
        self.balls[x].get_or_init(|| self.build_index(x))
    }

    fn build_index(&self, x: usize) -> BallIndex {
        let row = self.row(x);
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let mut radii = Vec::new();
        let mut counts = Vec::new();
        let mut measures = Vec::new();
        let mut group = vec![0usize; self.n];
        let mut total = 0.0;
        for (i, &v) in order.iter().enumerate() {
            total += self.measure[v];
            if radii.last() != Some(&row[v]) {
                radii.push(row[v]);
                counts.push(0);
                measures.push(0.0);
            }
            let k = radii.len() - 1;
            counts[k] = i + 1;
            measures[k] = total;
            group[v] = k;
        }

        // An edge with endpoint groups a < b crosses the ball on [radii[a], radii[b]).
        let mut intervals: Vec<(usize, usize, f64)> = self
            .edges
            .iter()
            .filter_map(|&(y, z, r)| {
                let (a, b) = (group[y].min(group[z]), group[y].max(group[z]));
                (a < b).then_some((a, b, r))
            })
            .collect();
        intervals.sort_by_key(|iv| iv.0);
        let mut heap: BinaryHeap<(Dist, usize)> = BinaryHeap::new();
        let mut next = 0;
        let mut jumps = Vec::with_capacity(radii.len());
        for k in 0..radii.len() {
            while next < intervals.len() && intervals[next].0 <= k {
                heap.push((Dist(intervals[next].2), intervals[next].1));
                next += 1;
            }
            while heap.peek().is_some_and(|&(_, end)| end <= k) {
                heap.pop();
            }
            let crossing = heap.peek().map_or(0.0, |&(Dist(v), _)| v);
            jumps.push(self.incident[x].max(crossing));
        }
        BallIndex { radii, order, counts, measures, jumps }
    }

    fn check_radius(r: f64) -> Result<()> {
        if r >= 0.0 && !r.is_nan() {
            Ok(())
        } else {
            Err(Error::NegativeRadius(r))
        }
    }

    /// Index of the last breakpoint `<= r`.
    fn slot(&self, x: usize, r: f64) -> usize {
        self.index(x).radii.partition_point(|&d| d <= r) - 1
    }

    /// Distinct distances from `x`, increasing; ball measures jump exactly here.
    pub fn breakpoints(&self, x: usize) -> &[f64] {
        &self.index(x).radii
    }

    /// Breakpoints of `x` inside `[a, b]`.
    pub fn breakpoints_in(&self, x: usize, a: f64, b: f64) -> &[f64] {
        let radii = &self.index(x).radii;
        let lo = radii.partition_point(|&d| d < a);
        let hi = radii.partition_point(|&d| d <= b);
        &radii[lo..hi.max(lo)]
    }

    /// Closed ball `{y : ρ(x,y) <= r}`, sorted by vertex index.
    pub fn ball(&self, x: usize, r: f64) -> Result<Vec<usize>> {
        Self::check_radius(r)?;
        let idx = self.index(x);
        let mut members = idx.order[..idx.counts[self.slot(x, r)]].to_vec();
        members.sort_unstable();
        Ok(members)
    }

    pub fn ball_size(&self, x: usize, r: f64) -> Result<usize> {
        Self::check_radius(r)?;
        Ok(self.index(x).counts[self.slot(x, r)])
    }

    /// `m(B_x(r))`.
    pub fn ball_measure(&self, x: usize, r: f64) -> Result<f64> {
        Self::check_radius(r)?;
        Ok(self.index(x).measures[self.slot(x, r)])
    }

    /// Unchecked variant for hot loops; `r` must be nonnegative.
    pub(crate) fn ball_measure_at(&self, x: usize, r: f64) -> f64 {
        self.index(x).measures[self.slot(x, r)]
    }

    /// `m(B_x(r)) / m(x)`.
    pub fn volume_ratio(&self, x: usize, r: f64) -> Result<f64> {
        Ok(self.ball_measure(x, r)? / self.measure[x])
    }

    /// Local jump size `s_x(r)`.
    pub fn jump_size(&self, x: usize, r: f64) -> Result<f64> {
        Self::check_radius(r)?;
        Ok(self.index(x).jumps[self.slot(x, r)])
    }

    /// `sup_{r in [a,b]} s_x(r)`, exact via breakpoints plus `a`.
    pub fn annulus_jump_sup(&self, x: usize, a: f64, b: f64) -> Result<f64> {
        Self::check_radius(a)?;
        if !(a <= b) {
            return Err(Error::InvalidInterval { a, b });
        }
        let idx = self.index(x);
        let first = self.slot(x, a);
        let last = self.slot(x, b);
        Ok(idx.jumps[first..=last].iter().copied().fold(0.0, f64::max))
    }

    /// `sup_{y in B_o(big_r)} s_y(r)`.
    pub fn ball_jump_sup(&self, o: usize, big_r: f64, r: f64) -> Result<f64> {
        let mut best = 0.0f64;
        for y in self.ball(o, big_r)? {
            best = best.max(self.jump_size(y, r)?);
        }
        Ok(best)
    }

    /// Writes `source,target,rho` rows for every ordered pair.
    pub fn write_csv<W: Write>(&self, g: &WeightedGraph, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "rho"])?;
        for x in 0..self.n {
            for y in 0..self.n {
                w.write_record([g.id(x), g.id(y), &format!("{:?}", self.distance(x, y))])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// One vertex of an intrinsic-metric verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicRow {
    pub vertex: String,
    pub sum: f64,
    pub measure: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicReport {
    pub rows: Vec<IntrinsicRow>,
    pub worst_vertex: String,
    pub worst_slack: f64,
    pub pass: bool,
}

/// Checks `Σ_y b(x,y) ρ(x,y)^2 <= m(x)` at every vertex for a row-major table.
pub fn verify_intrinsic(g: &WeightedGraph, rho: &[f64]) -> Result<IntrinsicReport> {
    let n = g.len();
    if rho.len() != n * n {
        return Err(Error::ShapeMismatch { expected: n * n, found: rho.len() });
    }
    let rows: Vec<IntrinsicRow> = (0..n)
        .map(|x| {
            let sum: f64 = g.neighbors(x).iter().map(|&(y, b)| b * rho[x * n + y].powi(2)).sum();
            IntrinsicRow { vertex: g.id(x).to_string(), sum, measure: g.measure(x), slack: g.measure(x) - sum }
        })
        .collect();
    let worst = rows.iter().min_by(|a, b| (a.slack / a.measure).total_cmp(&(b.slack / b.measure))).expect("graph is nonempty");
    let pass = rows.iter().all(|r| r.sum <= r.measure * (1.0 + INTRINSIC_RELATIVE_TOLERANCE));
    Ok(IntrinsicReport { worst_vertex: worst.vertex.clone(), worst_slack: worst.slack, pass, rows })
}
