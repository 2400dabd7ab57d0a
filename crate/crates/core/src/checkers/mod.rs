//! Certificate engine.
//!
//! Each check evaluates an inequality `LHS <= RHS` in log space on an explicit
//! set of points and records the smallest margin `ln RHS - ln LHS` together
//! with the point where it occurs. Continuum quantifiers over radii are
//! reduced to finite candidate sets (ball measures are step functions);
//! quantifiers over time use geometric grids.

mod factors;
mod functional;
mod geometry;
mod heat;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::MetricStructure;
use crate::tolerances::{LEFT_LIMIT_OFFSET, PASS_TOLERANCE};

pub use factors::{
    ConstantFactor, CountingHeat, CountingVolume, DoublingVolume, GaussianHeat, GeneralHeat, GeneralVolume, HeatFactor,
    RegularHeat, RegularVolume, VolumeFactor,
};
pub use functional::{
    check_nash, check_sobolev, check_weak_sobolev, MeasuredBall, NashCheck, SobolevBound, SobolevCheck, WeakSobolevCheck,
};
pub use geometry::{
    check_ball_comparison, check_local_regularity, check_noncollapsing, check_volume_doubling, noncollapse_ln_constant,
    BallComparisonCheck, LocalRegularityCheck, NonCollapseCheck, VolumeDoublingCheck,
};
pub use heat::{
    check_chi_hypothesis, check_gaussian, check_mean_value, check_on_diagonal, check_semigroup_regularization, on_diagonal_times,
    theorem_windows, ChiHypothesisCheck, ChiWindow, GaussianCheck, MeanValueCheck, OnDiagonalCheck, SemigroupRegularizationCheck,
    TimeQuadrature,
};

/// Inequality families a certificate can attest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    S,
    V,
    G,
    L,
    O,
    #[serde(rename = "non-collapse")]
    NonCollapse,
    #[serde(rename = "ball-compare")]
    BallCompare,
    #[serde(rename = "mean-value")]
    MeanValue,
    #[serde(rename = "chi-hypothesis")]
    ChiHypothesis,
    #[serde(rename = "semigroup-reg")]
    SemigroupReg,
    #[serde(rename = "weak-sobolev")]
    WeakSobolev,
    #[serde(rename = "nash")]
    Nash,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Location of one evaluated point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Witness {
    pub vertices: Vec<String>,
    pub radii: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sample: Option<usize>,
}

impl Witness {
    pub(crate) fn new(g: &WeightedGraph, vertices: &[usize], radii: &[f64]) -> Self {
        Self {
            vertices: vertices.iter().map(|&v| g.id(v).to_string()).collect(),
            radii: radii.to_vec(),
            time: None,
            sample: None,
        }
    }

    pub(crate) fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub(crate) fn with_sample(mut self, k: usize) -> Self {
        self.sample = Some(k);
        self
    }

    pub(crate) fn vertex(&self, g: &WeightedGraph, k: usize) -> Result<usize> {
        let id = self.vertices.get(k).ok_or_else(|| Error::InvalidParameter(format!("witness lacks vertex #{k}")))?;
        g.index_of(id)
    }

    pub(crate) fn radius(&self, k: usize) -> Result<f64> {
        self.radii.get(k).copied().ok_or_else(|| Error::InvalidParameter(format!("witness lacks radius #{k}")))
    }

    pub(crate) fn time(&self) -> Result<f64> {
        self.time.ok_or_else(|| Error::InvalidParameter("witness lacks a time".into()))
    }

    pub(crate) fn sample(&self) -> Result<usize> {
        self.sample.ok_or_else(|| Error::InvalidParameter("witness lacks a sample index".into()))
    }
}

/// One row of a certificate trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub witness: Witness,
    pub log_lhs: f64,
    pub log_rhs: f64,
    pub margin: f64,
}

/// Description of the evaluated point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDescription {
    pub description: String,
    pub points: usize,
}

/// Verified inequality with its worst point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub condition: Condition,
    pub params: BTreeMap<String, Value>,
    pub grid: GridDescription,
    pub min_log_margin: f64,
    pub witness: Option<Witness>,
    pub pass: bool,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub trace: Vec<TracePoint>,
}

impl Certificate {
    pub fn param_f64(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Value::as_f64)
    }

    /// Writes the trace as CSV; one row per declared grid point.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vertices", "radii", "time", "sample", "log_lhs", "log_rhs", "margin"])?;
        for p in &self.trace {
            let radii: Vec<String> = p.witness.radii.iter().map(|r| format!("{r:?}")).collect();
            w.write_record([
                p.witness.vertices.join(";"),
                radii.join(";"),
                p.witness.time.map(|t| format!("{t:?}")).unwrap_or_default(),
                p.witness.sample.map(|s| s.to_string()).unwrap_or_default(),
                format!("{:?}", p.log_lhs),
                format!("{:?}", p.log_rhs),
                format!("{:?}", p.margin),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fails unless this is a passing certificate of `condition`.
    pub fn require(&self, condition: Condition) -> Result<()> {
        if self.condition != condition {
            return Err(Error::MissingHypothesis(format!("expected a {condition} certificate, got {}", self.condition)));
        }
        if !self.pass {
            return Err(Error::MissingHypothesis(format!("{condition} certificate did not pass")));
        }
        Ok(())
    }
}

/// Accumulates points and produces a certificate.
#[derive(Debug)]
pub(crate) struct Recorder {
    condition: Condition,
    params: BTreeMap<String, Value>,
    trace: Vec<TracePoint>,
    min: f64,
    witness: Option<Witness>,
    flags: BTreeSet<String>,
}

impl Recorder {
    pub(crate) fn new(condition: Condition) -> Self {
        Self { condition, params: BTreeMap::new(), trace: Vec::new(), min: f64::INFINITY, witness: None, flags: BTreeSet::new() }
    }

    pub(crate) fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub(crate) fn flag(&mut self, flag: impl Into<String>) {
        self.flags.insert(flag.into());
    }

    pub(crate) fn flags_from(&mut self, labels: Vec<String>) {
        self.flags.extend(labels);
    }

    pub(crate) fn record(&mut self, witness: Witness, log_lhs: f64, log_rhs: f64) {
        // A vanishing left side satisfies any bound.
        let mut margin = if log_lhs == f64::NEG_INFINITY { f64::INFINITY } else { log_rhs - log_lhs };
        if margin.is_nan() {
            self.flags.insert("nan-margin".into());
            margin = f64::NEG_INFINITY;
        }
        if margin < self.min || self.witness.is_none() {
            self.min = margin;
            self.witness = Some(witness.clone());
        }
        self.trace.push(TracePoint { witness, log_lhs, log_rhs, margin });
    }

    /// Point treated as passing without comparison (kernel underflow).
    pub(crate) fn record_unscored(&mut self, witness: Witness, log_lhs: f64, log_rhs: f64, flag: &str) {
        self.flags.insert(flag.to_string());
        if self.witness.is_none() {
            self.witness = Some(witness.clone());
        }
        self.trace.push(TracePoint { witness, log_lhs, log_rhs, margin: f64::INFINITY });
    }

    pub(crate) fn absorb(&mut self, other: Recorder) {
        self.flags.extend(other.flags);
        for p in other.trace {
            if p.margin == f64::INFINITY {
                if self.witness.is_none() {
                    self.witness = Some(p.witness.clone());
                }
                self.trace.push(p);
            } else {
                self.record(p.witness, p.log_lhs, p.log_rhs);
            }
        }
    }

    pub(crate) fn finish(self, description: impl Into<String>) -> Certificate {
        let pass = self.min >= -PASS_TOLERANCE;
        Certificate {
            condition: self.condition,
            params: self.params,
            grid: GridDescription { description: description.into(), points: self.trace.len() },
            min_log_margin: self.min,
            witness: self.witness,
            pass,
            flags: self.flags.into_iter().collect(),
            trace: self.trace,
        }
    }
}

/// `t_k = t_min 10^(k/d)` below `t_max`, then `t_max`; doubling `d` nests the grid.
pub fn geometric_time_grid(t_min: f64, t_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_min <= t_max && t_max.is_finite()) {
        return Err(Error::InvalidInterval { a: t_min, b: t_max });
    }
    if per_decade == 0 {
        return Err(Error::InvalidParameter("grid density must be positive".into()));
    }
    let mut grid = Vec::new();
    for k in 0usize.. {
        let t = t_min * 10f64.powf(k as f64 / per_decade as f64);
        if t >= t_max * (1.0 - 1e-14) {
            break;
        }
        grid.push(t);
    }
    grid.push(t_max);
    Ok(grid)
}

/// `r (1 - 1e-12)`, the evaluation point for a left limit at `r`.
pub(crate) fn left_limit(r: f64) -> f64 {
    r * (1.0 - LEFT_LIMIT_OFFSET)
}

/// Sorted, deduplicated radii within `[a, b]`.
pub(crate) fn sorted_radii(mut radii: Vec<f64>, a: f64, b: f64) -> Vec<f64> {
    radii.retain(|&r| r >= a && r <= b && r.is_finite());
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    radii
}

/// Radii in `(a, b)` where `floor(log2(r / (factor * ||s_x||_[lo r, hi r])) / 2)`
/// can change: where the annulus supremum changes and where the ratio crosses
/// a power of four.
pub(crate) fn floor_jump_radii(metric: &MetricStructure, x: usize, a: f64, b: f64, factor: f64, lo: f64, hi: f64) -> Vec<f64> {
    if !(a < b) {
        return Vec::new();
    }
    let mut cuts = vec![a, b];
    for &bp in metric.breakpoints(x) {
        if bp > 0.0 {
            cuts.extend([bp / lo, bp / hi]);
        }
    }
    let cuts = sorted_radii(cuts, a, b);
    let mut out = cuts.clone();
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let Ok(s) = metric.annulus_jump_sup(x, lo * mid, hi * mid) else { continue };
        if s <= 0.0 {
            continue;
        }
        let base = factor * s;
        let mut k = ((w[0] / base).log2() / 2.0).floor().max(-60.0) as i32;
        loop {
            let r = base * 4f64.powi(k);
            if r >= w[1] {
                break;
            }
            if r > w[0] {
                out.push(r);
            }
            k += 1;
        }
    }
    sorted_radii(out, a, b)
}

/// Minimizes a unimodal function on `[a, b]` by golden-section search.
pub(crate) fn golden_minimum(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a) <= 1e-13 * b.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}
