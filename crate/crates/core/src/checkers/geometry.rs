//! Volume checks: doubling, local regularity, non-collapsing, ball comparison.

use std::f64::consts::LN_2;

use crate::corrections::{dimension_ratio, DimensionFn, GeneralBlock};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::MetricStructure;
use crate::par::map_range;

use super::{golden_minimum, left_limit, sorted_radii, Certificate, Condition, Recorder, VolumeFactor, Witness};

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a > 0.0 && a <= b && b.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInterval { a, b })
    }
}

fn check_centers(g: &WeightedGraph, centers: &[usize]) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::InvalidParameter("no centers to check".into()));
    }
    if let Some(&x) = centers.iter().find(|&&x| x >= g.len()) {
        return Err(Error::UnknownVertex(format!("#{x}")));
    }
    Ok(())
}

/// Volume doubling `m(B_x(r2)) <= Φ_x^{r2}(r1) (r2/r1)^{n_x(r2)} m(B_x(r1))`
/// for `R1 <= r1 <= r2 <= R2` and every center.
///
/// Each trace row is one `(x, r2)` with the exact worst `r1`: the margin is a
/// step function of the ball measure times factors that are continuous between
/// breakpoints and jump radii, so the infimum over `r1` sits at a piece start,
/// a left limit at a piece end, or (for factors with a `ln(1 + r^2 Deg)` base)
/// at an interior minimum located by golden-section search.
pub struct VolumeDoublingCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub metric: &'a MetricStructure,
    pub centers: Vec<usize>,
    pub factor: &'a dyn VolumeFactor,
    pub r1: f64,
    pub r2: f64,
    /// Centers stand for every vertex by symmetry.
    pub transitive: bool,
}

impl VolumeDoublingCheck<'_> {
    /// `(ln LHS, ln RHS)` at one point.
    pub fn point(&self, x: usize, r1: f64, r2: f64) -> Result<(f64, f64)> {
        let n = self.factor.dimension(x, r2);
        let lhs = self.metric.ball_measure(x, r2)?.ln();
        let rhs = self.factor.ln_factor(x, r1, r2)? + n * (r2 / r1).ln() + self.metric.ball_measure(x, r1)?.ln();
        Ok((lhs, rhs))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.vertex(self.graph, 0)?, w.radius(0)?, w.radius(1)?)
    }

    fn outer_radii(&self, x: usize) -> Vec<f64> {
        let mut radii = vec![self.r1];
        radii.extend_from_slice(self.metric.breakpoints_in(x, self.r1, self.r2));
        for e in self.factor.dimension_events() {
            radii.extend([e, left_limit(e)]);
        }
        sorted_radii(radii, self.r1, self.r2)
    }

    /// Piece boundaries for `r1`: breakpoints and factor jumps.
    fn cuts(&self, x: usize) -> Vec<f64> {
        let mut cuts = vec![self.r1, self.r2];
        cuts.extend_from_slice(self.metric.breakpoints_in(x, self.r1, self.r2));
        cuts.extend(self.factor.jump_radii(x, self.r1, self.r2));
        sorted_radii(cuts, self.r1, self.r2)
    }

    /// Candidate inner radii up to `upper`, given the interior search objective.
    fn inner_candidates(&self, cuts: &[f64], upper: f64, objective: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, &a) in cuts.iter().enumerate() {
            if a > upper {
                break;
            }
            out.push(a);
            let end = match cuts.get(i + 1) {
                Some(&b) if b <= upper => left_limit(b),
                _ => upper,
            };
            if end > a {
                out.push(end);
                if self.factor.needs_interior_search() {
                    out.push(golden_minimum(a, end, &objective));
                }
            }
        }
        out
    }

    fn run_center(&self, x: usize) -> Result<Recorder> {
        let mut rec = Recorder::new(Condition::V);
        let cuts = self.cuts(x);
        let outer = self.outer_radii(x);
        let fast = self.factor.outer_independent() && self.factor.constant_dimension().is_some();
        if fast {
            let n = self.factor.constant_dimension().unwrap_or_default();
            let g = |r1: f64| -> f64 {
                match self.factor.ln_factor(x, r1, r1) {
                    Ok(v) => v - n * r1.ln() + self.metric.ball_measure_at(x, r1).ln(),
                    Err(_) => f64::NAN,
                }
            };
            let mut candidates = self.inner_candidates(&cuts, self.r2, g);
            candidates.sort_by(f64::total_cmp);
            candidates.dedup();
            let mut best: Option<(f64, f64)> = None;
            let mut next = 0;
            for &r2 in &outer {
                while next < candidates.len() && candidates[next] <= r2 {
                    let r1 = candidates[next];
                    let v = self.factor.ln_factor(x, r1, r2)? - n * r1.ln() + self.metric.ball_measure(x, r1)?.ln();
                    if best.is_none_or(|(_, b)| v < b) {
                        best = Some((r1, v));
                    }
                    next += 1;
                }
                let (r1, _) = best.ok_or(Error::InvalidInterval { a: self.r1, b: r2 })?;
                let (lhs, rhs) = self.point(x, r1, r2)?;
                rec.record(Witness::new(self.graph, &[x], &[r1, r2]), lhs, rhs);
            }
        } else {
            for &r2 in &outer {
                let objective = |r1: f64| match self.point(x, r1, r2) {
                    Ok((l, r)) => r - l,
                    Err(_) => f64::NAN,
                };
                let mut worst: Option<(f64, f64, f64)> = None;
                for r1 in self.inner_candidates(&cuts, r2, objective) {
                    let (lhs, rhs) = self.point(x, r1, r2)?;
                    if worst.is_none_or(|(_, l, r)| rhs - lhs < r - l) {
                        worst = Some((r1, lhs, rhs));
                    }
                }
                let (r1, lhs, rhs) = worst.ok_or(Error::InvalidInterval { a: self.r1, b: r2 })?;
                rec.record(Witness::new(self.graph, &[x], &[r1, r2]), lhs, rhs);
            }
        }
        Ok(rec)
    }

    pub fn run(&self) -> Result<Certificate> {
        check_interval(self.r1, self.r2)?;
        check_centers(self.graph, &self.centers)?;
        let parts = map_range(self.centers.len(), |i| self.run_center(self.centers[i]));
        let mut rec = Recorder::new(Condition::V);
        rec.param("r1", self.r1);
        rec.param("r2", self.r2);
        rec.param("factor", self.factor.describe());
        if let Some(n) = self.factor.constant_dimension() {
            rec.param("dimension", n);
        }
        if let Some(v) = self.factor.constant_ln_factor() {
            rec.param("ln_factor", v);
        }
        rec.param("transitive", self.transitive);
        rec.param("centers", self.centers.iter().map(|&x| self.graph.id(x)).collect::<Vec<_>>());
        for part in parts {
            rec.absorb(part?);
        }
        rec.flags_from(self.factor.flags().labels());
        Ok(rec.finish(format!(
            "{} centers; r2 over breakpoints in [{:?}, {:?}], worst r1 per r2 over piece starts, left limits{}",
            self.centers.len(),
            self.r1,
            self.r2,
            if self.factor.needs_interior_search() { " and interior minima" } else { "" }
        )))
    }
}

pub fn check_volume_doubling(
    graph: &WeightedGraph,
    metric: &MetricStructure,
    centers: &[usize],
    factor: &dyn VolumeFactor,
    r1: f64,
    r2: f64,
) -> Result<Certificate> {
    VolumeDoublingCheck { graph, metric, centers: centers.to_vec(), factor, r1, r2, transitive: false }.run()
}

/// Local regularity `m(B_x(r))/m(x) <= [2 φ (1 + r^2 Deg_x)]^{n_x(r)/2}`.
pub struct LocalRegularityCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub metric: &'a MetricStructure,
    pub centers: Vec<usize>,
    pub dimension: &'a DimensionFn,
    pub phi: f64,
    pub r1: f64,
    pub r2: f64,
}

impl LocalRegularityCheck<'_> {
    pub fn point(&self, x: usize, r: f64) -> Result<(f64, f64)> {
        let lhs = self.metric.volume_ratio(x, r)?.ln();
        let base = (2.0 * self.phi).ln() + (r * r * self.graph.weighted_degree(x)).ln_1p();
        Ok((lhs, 0.5 * self.dimension.value(r) * base))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.vertex(self.graph, 0)?, w.radius(0)?)
    }

    pub fn run(&self) -> Result<Certificate> {
        check_interval(self.r1, self.r2)?;
        check_centers(self.graph, &self.centers)?;
        if !(self.phi >= 1.0 && self.phi.is_finite()) {
            return Err(Error::InvalidParameter(format!("phi must be at least 1, got {}", self.phi)));
        }
        let mut rec = Recorder::new(Condition::L);
        rec.param("r1", self.r1);
        rec.param("r2", self.r2);
        rec.param("phi", self.phi);
        rec.param("dimension", self.dimension);
        let parts = map_range(self.centers.len(), |i| -> Result<Recorder> {
            let x = self.centers[i];
            let mut part = Recorder::new(Condition::L);
            let mut radii = vec![self.r1];
            radii.extend_from_slice(self.metric.breakpoints_in(x, self.r1, self.r2));
            for &e in self.dimension.events() {
                radii.extend([e, left_limit(e)]);
            }
            for r in sorted_radii(radii, self.r1, self.r2) {
                let (lhs, rhs) = self.point(x, r)?;
                part.record(Witness::new(self.graph, &[x], &[r]), lhs, rhs);
            }
            Ok(part)
        });
        for part in parts {
            rec.absorb(part?);
        }
        Ok(rec.finish(format!(
            "{} centers; R1, breakpoints and dimension events in [{:?}, {:?}]",
            self.centers.len(),
            self.r1,
            self.r2
        )))
    }
}

pub fn check_local_regularity(
    graph: &WeightedGraph,
    metric: &MetricStructure,
    centers: &[usize],
    dimension: &DimensionFn,
    phi: f64,
    r1: f64,
    r2: f64,
) -> Result<Certificate> {
    LocalRegularityCheck { graph, metric, centers: centers.to_vec(), dimension, phi, r1, r2 }.run()
}

/// Non-collapsing lower bound
/// `2^{-6n^2} C^{-n/2} [C^{n/2} m(x) / r^n]^{θ~(r,R)} <= m(B_x(r)) / r^n`
/// for `r` in `[2 s_x(0), R]`.
pub struct NonCollapseCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub metric: &'a MetricStructure,
    /// Supplies `η~`; only its metric is used.
    pub block: &'a GeneralBlock<'a>,
    pub x: usize,
    pub big_r: f64,
    pub n: f64,
    /// `ln C` of the Sobolev-type hypothesis on `B_x(R)`.
    pub ln_c: f64,
}

/// `ln C = ln(φ R^2) - (2/n) ln m(B_x(R))`, the constant a Sobolev inequality with `φ` at radius `R` provides.
pub fn noncollapse_ln_constant(metric: &MetricStructure, x: usize, big_r: f64, n: f64, phi: f64) -> Result<f64> {
    Ok((phi * big_r * big_r).ln() - 2.0 / n * metric.ball_measure(x, big_r)?.ln())
}

impl NonCollapseCheck<'_> {
    pub fn point(&self, r: f64) -> Result<(f64, f64)> {
        let n = self.n;
        let eta = self.block.doubling_eta(self.x, r)?;
        let theta = if eta == i64::MAX { 0.0 } else { dimension_ratio(n).powf(eta as f64) };
        let inner = 0.5 * n * self.ln_c + self.graph.measure(self.x).ln() - n * r.ln();
        let lhs = -6.0 * n * n * LN_2 - 0.5 * n * self.ln_c + theta * inner;
        let rhs = self.metric.ball_measure(self.x, r)?.ln() - n * r.ln();
        Ok((lhs, rhs))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.radius(0)?)
    }

    fn guards(&self) -> Result<f64> {
        let x = self.x;
        let s0 = self.metric.jump_size(x, 0.0)?;
        let lower = 2.0 * s0;
        if !(self.big_r >= lower && self.big_r <= self.metric.diameter() / 2.0) {
            return Err(Error::guard(
                "2 s_x(0) <= R <= diam/2",
                format!("R = {}, s_x(0) = {s0}, diam = {}", self.big_r, self.metric.diameter()),
            ));
        }
        let mut probe = vec![s0];
        probe.extend_from_slice(self.metric.breakpoints_in(x, s0, self.big_r / 2.0));
        for r in probe {
            let s = self.metric.jump_size(x, r)?;
            if s > r {
                return Err(Error::guard("s_x(r) <= r on [s_x(0), R/2]", format!("r = {r}, s_x(r) = {s}")));
            }
        }
        if !(self.n > 2.0) {
            return Err(Error::InvalidParameter(format!("dimension must exceed 2, got {}", self.n)));
        }
        Ok(lower)
    }

    pub fn run(&self) -> Result<Certificate> {
        let lower = self.guards()?;
        let mut radii = vec![lower, self.big_r];
        let mut cuts: Vec<f64> = self.metric.breakpoints_in(self.x, lower, self.big_r).to_vec();
        cuts.extend(super::floor_jump_radii(self.metric, self.x, lower, self.big_r, 2.0, 1.0, 1.0));
        for c in cuts {
            radii.extend([c, left_limit(c)]);
        }
        let mut rec = Recorder::new(Condition::NonCollapse);
        rec.param("x", self.graph.id(self.x));
        rec.param("R", self.big_r);
        rec.param("n", self.n);
        rec.param("ln_c", self.ln_c);
        for r in sorted_radii(radii, lower, self.big_r) {
            let (lhs, rhs) = self.point(r)?;
            rec.record(Witness::new(self.graph, &[self.x], &[r]), lhs, rhs);
        }
        rec.flags_from(self.block.flags().labels());
        Ok(rec.finish(format!("r over 2 s_x(0), breakpoints, exponent jumps and their left limits up to R = {:?}", self.big_r)))
    }
}

pub fn check_noncollapsing(
    graph: &WeightedGraph,
    metric: &MetricStructure,
    block: &GeneralBlock<'_>,
    x: usize,
    big_r: f64,
    n: f64,
    ln_c: f64,
) -> Result<Certificate> {
    NonCollapseCheck { graph, metric, block, x, big_r, n, ln_c }.run()
}

/// `m(B_x(r)) <= 2^{18 d} Φ^9 m(B_y(r))` for all `x, y` in `B_o(r)`, given a
/// passing volume-doubling certificate with constant `Φ` and dimension `d` on `[r/4, r]`.
///
/// Rows pair each `x` with the `y` of smallest ball measure, which is the exact worst partner.
pub struct BallComparisonCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub metric: &'a MetricStructure,
    pub o: usize,
    pub r: f64,
    pub d: f64,
    pub ln_phi: f64,
    pub doubling: &'a Certificate,
}

impl BallComparisonCheck<'_> {
    pub fn point(&self, x: usize, y: usize) -> Result<(f64, f64)> {
        let lhs = self.metric.ball_measure(x, self.r)?.ln();
        let rhs = 18.0 * self.d * LN_2 + 9.0 * self.ln_phi + self.metric.ball_measure(y, self.r)?.ln();
        Ok((lhs, rhs))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.vertex(self.graph, 0)?, w.vertex(self.graph, 1)?)
    }

    fn verify_hypothesis(&self, ball: &[usize]) -> Result<()> {
        let cert = self.doubling;
        cert.require(Condition::V)?;
        let tol = 1e-12 * self.r.max(1.0);
        let (lo, hi) = (cert.param_f64("r1"), cert.param_f64("r2"));
        if !matches!((lo, hi), (Some(a), Some(b)) if a <= self.r / 4.0 + tol && b >= self.r - tol) {
            return Err(Error::MissingHypothesis(format!(
                "volume doubling certificate does not cover [{}, {}]",
                self.r / 4.0,
                self.r
            )));
        }
        match (cert.param_f64("dimension"), cert.param_f64("ln_factor")) {
            (Some(d), Some(f)) if d <= self.d + 1e-12 && f <= self.ln_phi + 1e-12 => {}
            _ => {
                return Err(Error::MissingHypothesis(
                    "volume doubling certificate lacks a constant factor and dimension dominated by (Phi, d)".into(),
                ))
            }
        }
        let transitive = cert.params.get("transitive").and_then(|v| v.as_bool()).unwrap_or(false);
        if !transitive {
            let centers: Vec<&str> = cert
                .params
                .get("centers")
                .and_then(|v| v.as_array())
                .map(|a| a.iter().filter_map(|s| s.as_str()).collect())
                .unwrap_or_default();
            if let Some(&x) = ball.iter().find(|&&x| !centers.contains(&self.graph.id(x))) {
                return Err(Error::MissingHypothesis(format!("volume doubling not certified at `{}`", self.graph.id(x))));
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Certificate> {
        let ball = self.metric.ball(self.o, self.r)?;
        self.verify_hypothesis(&ball)?;
        let jump = self.metric.ball_jump_sup(self.o, self.r, self.r / 4.0)?;
        if self.r < 8.0 * jump {
            return Err(Error::guard("r >= 8 ||s(r/4)||_{B_o(r)}", format!("r = {}, jump = {jump}", self.r)));
        }
        let measures: Vec<f64> = ball.iter().map(|&x| self.metric.ball_measure(x, self.r)).collect::<Result<_>>()?;
        let y = ball[measures.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map_or(0, |p| p.0)];
        let mut rec = Recorder::new(Condition::BallCompare);
        rec.param("o", self.graph.id(self.o));
        rec.param("r", self.r);
        rec.param("d", self.d);
        rec.param("ln_phi", self.ln_phi);
        for &x in &ball {
            let (lhs, rhs) = self.point(x, y)?;
            rec.record(Witness::new(self.graph, &[x, y], &[self.r]), lhs, rhs);
        }
        Ok(rec.finish(format!("{} vertices of B_o(r), each against the smallest ball", ball.len())))
    }
}

pub fn check_ball_comparison(
    graph: &WeightedGraph,
    metric: &MetricStructure,
    o: usize,
    r: f64,
    d: f64,
    ln_phi: f64,
    doubling: &Certificate,
) -> Result<Certificate> {
    BallComparisonCheck { graph, metric, o, r, d, ln_phi, doubling }.run()
}
