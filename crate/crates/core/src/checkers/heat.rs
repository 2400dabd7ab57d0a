//! Heat-kernel checks: Gaussian bounds, on-diagonal bounds, mean-value
//! inequalities, Davies window hypotheses and semigroup regularization.

use serde::{Deserialize, Serialize};

use crate::corrections::{ln_offdiagonal_factor, zeta, GeneralBlock};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::MetricStructure;
use crate::par::map_range;
use crate::spectral::{dirichlet_energy, OmegaContext, SpectralDecomposition};
use crate::tolerances::{KERNEL_FLOOR, SEMIGROUP_ROUNDOFF};

use super::{Certificate, Condition, HeatFactor, Recorder, Witness};

const UNDERFLOW: &str = "kernel-underflow";

/// Log of a kernel value; round-off below zero reads as an exact zero.
fn ln_kernel(p: f64) -> f64 {
    p.max(0.0).ln()
}

fn check_vertices(g: &WeightedGraph, set: &[usize], what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::InvalidParameter(format!("empty {what} set")));
    }
    if let Some(&x) = set.iter().find(|&&x| x >= g.len()) {
        return Err(Error::UnknownVertex(format!("#{x}")));
    }
    Ok(())
}

/// Gaussian upper bound on the heat kernel for `t` on a time grid, `x` in
/// `centers` and `y` in `targets`.
pub struct GaussianCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub dec: &'a SpectralDecomposition,
    pub metric: &'a MetricStructure,
    pub centers: Vec<usize>,
    pub targets: Vec<usize>,
    pub factor: &'a dyn HeatFactor,
    pub r1: f64,
    pub r2: f64,
    pub times: Vec<f64>,
    /// Grid density recorded in the certificate.
    pub per_decade: usize,
}

impl GaussianCheck<'_> {
    /// Right-hand side in log form at `(x, y, t)`.
    pub fn log_bound(&self, x: usize, y: usize, t: f64) -> Result<f64> {
        let tau = t.sqrt().min(self.r2);
        let n_xy = 0.5 * (self.factor.dimension(x, tau) + self.factor.dimension(y, tau));
        let rho = self.metric.distance(x, y);
        let s = self.metric.global_jump();
        let (offdiagonal, decay) =
            if rho == 0.0 { (0.0, 0.0) } else { (0.5 * n_xy * ln_offdiagonal_factor(rho, t, s), zeta(rho, t, s)?) };
        let volume = 0.5 * (self.metric.ball_measure(x, tau)?.ln() + self.metric.ball_measure(y, tau)?.ln());
        let bottom = self.dec.bottom().max(0.0);
        let tail = bottom * (t - t.min(self.r2 * self.r2));
        Ok(self.factor.ln_factor(x, tau)? + self.factor.ln_factor(y, tau)? + offdiagonal - volume - tail - decay)
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        let (x, y, t) = (w.vertex(self.graph, 0)?, w.vertex(self.graph, 1)?, w.time()?);
        let p = self.dec.kernel_row(t, x)?[y];
        Ok((ln_kernel(p), self.log_bound(x, y, t)?))
    }

    fn run_time(&self, t: f64) -> Result<Recorder> {
        let mut rec = Recorder::new(Condition::G);
        for &x in &self.centers {
            let row = self.dec.kernel_row(t, x)?;
            for &y in &self.targets {
                let witness = Witness::new(self.graph, &[x, y], &[]).at_time(t);
                let rhs = self.log_bound(x, y, t)?;
                let p = row[y];
                if p < KERNEL_FLOOR {
                    rec.record_unscored(witness, ln_kernel(p), rhs, UNDERFLOW);
                } else {
                    rec.record(witness, p.ln(), rhs);
                }
            }
        }
        Ok(rec)
    }

    /// Largest `ln` of the heat factor over centers, targets and the grid's `tau` values.
    pub fn ln_factor_max(&self) -> Result<f64> {
        let mut taus: Vec<f64> = self.times.iter().map(|t| t.sqrt().min(self.r2)).collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup();
        let mut vertices: Vec<usize> = self.centers.iter().chain(&self.targets).copied().collect();
        vertices.sort_unstable();
        vertices.dedup();
        let mut best = f64::NEG_INFINITY;
        for &z in &vertices {
            for &tau in &taus {
                best = best.max(self.factor.ln_factor(z, tau)?);
            }
        }
        Ok(best)
    }

    pub fn run(&self) -> Result<Certificate> {
        check_vertices(self.graph, &self.centers, "center")?;
        check_vertices(self.graph, &self.targets, "target")?;
        if !(self.r1 >= 0.0 && self.r1 <= self.r2) {
            return Err(Error::InvalidInterval { a: self.r1, b: self.r2 });
        }
        if self.times.is_empty() {
            return Err(Error::InvalidParameter("empty time grid".into()));
        }
        if let Some(&t) = self.times.iter().find(|&&t| !(t >= self.r1 * self.r1 && t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!("time {t} lies below R1^2 = {}", self.r1 * self.r1)));
        }
        let parts = map_range(self.times.len(), |k| self.run_time(self.times[k]));
        let mut rec = Recorder::new(Condition::G);
        rec.param("r1", self.r1);
        rec.param("r2", self.r2);
        rec.param("factor", self.factor.describe());
        rec.param("per_decade", self.per_decade);
        rec.param("t_min", self.times[0]);
        rec.param("t_max", self.times[self.times.len() - 1]);
        rec.param("bottom_of_spectrum", self.dec.bottom());
        rec.param("centers", self.centers.len());
        rec.param("targets", self.targets.len());
        rec.param("ln_factor_max", self.ln_factor_max()?);
        for part in parts {
            rec.absorb(part?);
        }
        rec.flags_from(self.factor.flags().labels());
        rec.flag("time-grid-sampled");
        Ok(rec.finish(format!(
            "{} times ({} per decade) x {} centers x {} targets",
            self.times.len(),
            self.per_decade,
            self.centers.len(),
            self.targets.len()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_gaussian(
    graph: &WeightedGraph,
    dec: &SpectralDecomposition,
    metric: &MetricStructure,
    centers: &[usize],
    targets: &[usize],
    factor: &dyn HeatFactor,
    r1: f64,
    r2: f64,
    times: &[f64],
    per_decade: usize,
) -> Result<Certificate> {
    GaussianCheck {
        graph,
        dec,
        metric,
        centers: centers.to_vec(),
        targets: targets.to_vec(),
        factor,
        r1,
        r2,
        times: times.to_vec(),
        per_decade,
    }
    .run()
}

/// On-diagonal bound `p_{ρ^2}(x,x) <= Ψ_x(ρ)^2 / m(B_x(ρ))` at `t = ρ^2` in `[r1^2, r2^2]`.
pub struct OnDiagonalCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub dec: &'a SpectralDecomposition,
    pub metric: &'a MetricStructure,
    pub centers: Vec<usize>,
    pub factor: &'a dyn HeatFactor,
    pub r1: f64,
    pub r2: f64,
    pub times: Vec<f64>,
}

impl OnDiagonalCheck<'_> {
    pub fn point(&self, x: usize, t: f64) -> Result<(f64, f64)> {
        let rho = t.sqrt();
        let p = self.dec.kernel_row(t, x)?[x];
        Ok((p.ln(), 2.0 * self.factor.ln_factor(x, rho)? - self.metric.ball_measure(x, rho)?.ln()))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.vertex(self.graph, 0)?, w.time()?)
    }

    pub fn run(&self) -> Result<Certificate> {
        check_vertices(self.graph, &self.centers, "center")?;
        let (lo, hi) = (self.r1 * self.r1, self.r2 * self.r2);
        if let Some(&t) = self.times.iter().find(|&&t| !(t >= lo && t <= hi && t > 0.0)) {
            return Err(Error::InvalidParameter(format!("time {t} outside [{lo}, {hi}]")));
        }
        let mut rec = Recorder::new(Condition::O);
        rec.param("r1", self.r1);
        rec.param("r2", self.r2);
        rec.param("factor", self.factor.describe());
        for &t in &self.times {
            for &x in &self.centers {
                let (lhs, rhs) = self.point(x, t)?;
                let witness = Witness::new(self.graph, &[x], &[t.sqrt()]).at_time(t);
                if lhs.exp() < KERNEL_FLOOR {
                    rec.record_unscored(witness, lhs, rhs, UNDERFLOW);
                } else {
                    rec.record(witness, lhs, rhs);
                }
            }
        }
        rec.flags_from(self.factor.flags().labels());
        Ok(rec.finish(format!("{} times x {} centers", self.times.len(), self.centers.len())))
    }
}

/// On-diagonal times: the supplied grid restricted to `[r1^2, r2^2]` plus squared
/// breakpoints of the centers, where the ball measure steps.
pub fn on_diagonal_times(metric: &MetricStructure, centers: &[usize], grid: &[f64], r1: f64, r2: f64) -> Vec<f64> {
    let (lo, hi) = (r1 * r1, r2 * r2);
    let mut times: Vec<f64> = grid.iter().copied().filter(|&t| t >= lo && t <= hi).collect();
    for &x in centers {
        times.extend(metric.breakpoints_in(x, r1, r2).iter().map(|b| b * b).filter(|&t| t >= lo && t <= hi));
    }
    times.retain(|&t| t > 0.0);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

#[allow(clippy::too_many_arguments)]
pub fn check_on_diagonal(
    graph: &WeightedGraph,
    dec: &SpectralDecomposition,
    metric: &MetricStructure,
    centers: &[usize],
    factor: &dyn HeatFactor,
    r1: f64,
    r2: f64,
    times: &[f64],
) -> Result<Certificate> {
    OnDiagonalCheck { graph, dec, metric, centers: centers.to_vec(), factor, r1, r2, times: times.to_vec() }.run()
}

/// Composite trapezoid on `nodes` intervals with a Richardson-style lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeQuadrature {
    pub value: f64,
    pub coarse: f64,
    /// `value - |value - coarse| / 3`.
    pub lower: f64,
}

impl TimeQuadrature {
    /// Integrates `f` on `[a, b]` with `nodes` (even, at least 2) intervals.
    pub fn integrate(a: f64, b: f64, nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(a <= b) {
            return Err(Error::InvalidInterval { a, b });
        }
        if nodes < 2 || !nodes.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("quadrature needs an even node count >= 2, got {nodes}")));
        }
        let h = (b - a) / nodes as f64;
        let values: Vec<f64> = (0..=nodes).map(|i| f(if i == nodes { b } else { a + i as f64 * h })).collect();
        let fine = h * (0.5 * (values[0] + values[nodes]) + values[1..nodes].iter().sum::<f64>());
        let coarse = 2.0 * h * (0.5 * (values[0] + values[nodes]) + values[2..nodes].iter().step_by(2).sum::<f64>());
        Ok(Self { value: fine, coarse, lower: fine - (fine - coarse).abs() / 3.0 })
    }
}

/// Shared setup of the mean-value and window checks: a nonnegative sample and its weight.
fn validate_nonnegative(g: &WeightedGraph, f: &[f64]) -> Result<()> {
    if f.len() != g.len() {
        return Err(Error::ShapeMismatch { expected: g.len(), found: f.len() });
    }
    if f.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("samples must be nonnegative and finite".into()));
    }
    Ok(())
}

/// `ℓ^2` mean-value inequality for `v = P^ω f` at `(T, x)`:
/// `v_T(x)^2 <= Γ~_x(r/2)^2 (1 + τ r^2 h)^{n/2+1} / (τ^{n/2+1} r^2 m(B_x(r))) ∫ Σ_{B_x(r)} m v_t^2 dt`
/// over `[T - τ r^2, T + τ r^2]`.
pub struct MeanValueCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub dec: &'a SpectralDecomposition,
    pub metric: &'a MetricStructure,
    /// Supplies `φ` and the metric-dependent parts of `Γ~`.
    pub block: &'a GeneralBlock<'a>,
    pub x: usize,
    pub r: f64,
    pub n: f64,
    /// `ln Φ` of the doubling hypothesis `m(B_x(r)) <= Φ m(B_x(r/2))`.
    pub ln_doubling: f64,
    pub tau: f64,
    pub big_t: f64,
    pub omega: &'a OmegaContext,
    pub samples: Vec<Vec<f64>>,
    pub nodes: usize,
    /// Passing Sobolev certificate covering `[r/2, r]` at `x`.
    pub sobolev: &'a Certificate,
}

impl MeanValueCheck<'_> {
    fn ball_mass(&self, ball: &[usize], v: &[f64]) -> f64 {
        ball.iter().map(|&y| self.graph.measure(y) * v[y] * v[y]).sum()
    }

    fn ln_prefactor(&self) -> Result<f64> {
        let (n, r, tau) = (self.n, self.r, self.tau);
        let gamma = self.block.ln_mean_value_gamma(self.x, r / 2.0, n, self.ln_doubling)?;
        let e = 0.5 * n + 1.0;
        Ok(2.0 * gamma + e * (tau * r * r * self.omega.h()).ln_1p()
            - e * tau.ln()
            - 2.0 * r.ln()
            - self.metric.ball_measure(self.x, r)?.ln())
    }

    pub fn point(&self, k: usize) -> Result<(f64, f64)> {
        let f = self.samples.get(k).ok_or_else(|| Error::InvalidParameter(format!("no sample #{k}")))?;
        let coefficients = self.omega.sandwiched_coefficients(self.dec, f)?;
        let ball = self.metric.ball(self.x, self.r)?;
        let v = self.omega.synthesize(self.dec, &coefficients, self.big_t)[self.x];
        let lhs = 2.0 * v.abs().ln();
        let half = self.tau * self.r * self.r;
        let q = TimeQuadrature::integrate(self.big_t - half, self.big_t + half, self.nodes, |t| {
            self.ball_mass(&ball, &self.omega.synthesize(self.dec, &coefficients, t))
        })?;
        let rhs = self.ln_prefactor()? + if q.lower > 0.0 { q.lower.ln() } else { f64::NEG_INFINITY };
        Ok((lhs, rhs))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.sample()?)
    }

    fn verify_hypotheses(&self) -> Result<()> {
        let (x, r) = (self.x, self.r);
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::guard("0 < tau <= 1", format!("tau = {}", self.tau)));
        }
        if !(self.big_t >= r * r) {
            return Err(Error::guard("T >= r^2", format!("T = {}, r = {r}", self.big_t)));
        }
        let jump = self.metric.annulus_jump_sup(x, r / 2.0, r)?;
        if r < 128.0 * jump {
            return Err(Error::guard("r >= 128 ||s_x||_[r/2,r]", format!("r = {r}, jump = {jump}")));
        }
        if self.nodes < 1000 {
            return Err(Error::InvalidParameter(format!("at least 1000 quadrature nodes required, got {}", self.nodes)));
        }
        let big = self.metric.ball_measure(x, r)?.ln();
        let half = self.metric.ball_measure(x, r / 2.0)?.ln();
        if big > self.ln_doubling + half {
            return Err(Error::guard(
                "m(B_x(r)) <= Phi m(B_x(r/2))",
                format!("ln ratio {} > ln Phi {}", big - half, self.ln_doubling),
            ));
        }
        require_sobolev(self.sobolev, self.graph.id(x), self.n, self.block.phi(), r / 2.0, r)?;
        if self.samples.is_empty() {
            return Err(Error::InvalidParameter("no samples".into()));
        }
        self.samples.iter().try_for_each(|f| validate_nonnegative(self.graph, f))
    }

    pub fn run(&self) -> Result<Certificate> {
        self.verify_hypotheses()?;
        let parts = map_range(self.samples.len(), |k| self.point(k));
        let mut rec = Recorder::new(Condition::MeanValue);
        rec.param("x", self.graph.id(self.x));
        rec.param("r", self.r);
        rec.param("n", self.n);
        rec.param("phi", self.block.phi());
        rec.param("ln_doubling", self.ln_doubling);
        rec.param("tau", self.tau);
        rec.param("T", self.big_t);
        rec.param("h_omega", self.omega.h());
        rec.param("nodes", self.nodes);
        for (k, part) in parts.into_iter().enumerate() {
            let (lhs, rhs) = part?;
            rec.record(Witness::new(self.graph, &[self.x], &[self.r]).at_time(self.big_t).with_sample(k), lhs, rhs);
        }
        rec.flags_from(self.block.flags().labels());
        Ok(rec.finish(format!(
            "{} samples; trapezoid on {} intervals with Richardson lower bound",
            self.samples.len(),
            self.nodes
        )))
    }
}

/// Checks that `cert` is a passing Sobolev certificate with dimension `n` and
/// constant at most `phi`, covering center `x` and radii `[lo, hi]`.
pub(crate) fn require_sobolev(cert: &Certificate, x: &str, n: f64, phi: f64, lo: f64, hi: f64) -> Result<()> {
    cert.require(Condition::S)?;
    let ok_dim = cert.param_f64("n").is_some_and(|v| (v - n).abs() <= 1e-12 * n);
    let ok_phi = cert.param_f64("ln_phi_max").is_some_and(|v| v <= phi.ln() + 1e-12);
    let tol = 1e-12 * hi.max(1.0);
    let ok_range =
        cert.param_f64("r_min").is_some_and(|v| v <= lo + tol) && cert.param_f64("r_max").is_some_and(|v| v >= hi - tol);
    let ok_center =
        cert.params.get("centers").and_then(|v| v.as_array()).is_some_and(|a| a.iter().any(|c| c.as_str() == Some(x)));
    if ok_dim && ok_phi && ok_range && ok_center {
        Ok(())
    } else {
        Err(Error::MissingHypothesis(format!("no Sobolev certificate with n = {n}, phi <= {phi} on [{lo}, {hi}] at `{x}`")))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_mean_value(
    graph: &WeightedGraph,
    dec: &SpectralDecomposition,
    metric: &MetricStructure,
    block: &GeneralBlock<'_>,
    x: usize,
    r: f64,
    n: f64,
    ln_doubling: f64,
    tau: f64,
    big_t: f64,
    omega: &OmegaContext,
    samples: Vec<Vec<f64>>,
    sobolev: &Certificate,
) -> Result<Certificate> {
    MeanValueCheck { graph, dec, metric, block, x, r, n, ln_doubling, tau, big_t, omega, samples, nodes: 1000, sobolev }.run()
}

/// One window `[a, b]` at a vertex with the `χ` profile of the mean-value bound:
/// `χ(x, h)^{-2} = Γ~^2 (1 + δ r^2 h)^{N/2+1} / (δ^{N/2+1} r^2 m(B_x(r)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiWindow {
    pub vertex: usize,
    pub a: f64,
    pub b: f64,
    pub radius: f64,
    pub delta: f64,
    pub dimension: f64,
    pub ln_gamma: f64,
    pub ln_ball_measure: f64,
}

impl ChiWindow {
    /// `ln χ(x, h)`.
    pub fn ln_chi(&self, h: f64) -> f64 {
        let e = 0.5 * self.dimension + 1.0;
        let r = self.radius;
        -0.5 * (2.0 * self.ln_gamma + e * (self.delta * r * r * h).ln_1p()
            - e * self.delta.ln()
            - 2.0 * r.ln()
            - self.ln_ball_measure)
    }
}

/// Windows `T ± δ r^2` around each vertex with `χ` taken from the mean-value bound at radius `r`.
#[allow(clippy::too_many_arguments)]
pub fn theorem_windows(
    metric: &MetricStructure,
    block: &GeneralBlock<'_>,
    vertices: &[usize],
    r: f64,
    n: f64,
    ln_doubling: f64,
    delta: f64,
    big_t: f64,
) -> Result<Vec<ChiWindow>> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::guard("0 < delta <= 1", format!("delta = {delta}")));
    }
    if big_t < delta * r * r {
        return Err(Error::guard("T >= delta r^2", format!("T = {big_t}, delta r^2 = {}", delta * r * r)));
    }
    vertices
        .iter()
        .map(|&x| {
            Ok(ChiWindow {
                vertex: x,
                a: big_t - delta * r * r,
                b: big_t + delta * r * r,
                radius: r,
                delta,
                dimension: n,
                ln_gamma: block.ln_mean_value_gamma(x, r / 2.0, n, ln_doubling)?,
                ln_ball_measure: metric.ball_measure(x, r)?.ln(),
            })
        })
        .collect()
}

/// Davies window hypothesis `χ(x, h(ω))^2 (P_T^ω f)^2(x) <= ∫_a^b ||P_t^ω f||_2^2 dt`.
pub struct ChiHypothesisCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub dec: &'a SpectralDecomposition,
    pub windows: Vec<ChiWindow>,
    pub big_t: f64,
    /// `(f, ω)` pairs.
    pub samples: Vec<(Vec<f64>, Vec<f64>)>,
    pub nodes: usize,
}

impl ChiHypothesisCheck<'_> {
    pub fn point(&self, window: usize, k: usize) -> Result<(f64, f64)> {
        let w = self.windows.get(window).ok_or_else(|| Error::InvalidParameter(format!("no window #{window}")))?;
        let (f, omega) = self.samples.get(k).ok_or_else(|| Error::InvalidParameter(format!("no sample #{k}")))?;
        let ctx = OmegaContext::new(self.graph, omega)?;
        let coefficients = ctx.sandwiched_coefficients(self.dec, f)?;
        let v = ctx.synthesize(self.dec, &coefficients, self.big_t)[w.vertex];
        let lhs = 2.0 * w.ln_chi(ctx.h()) + 2.0 * v.abs().ln();
        let m = self.graph.measures();
        let q = TimeQuadrature::integrate(w.a, w.b, self.nodes, |t| {
            let u = ctx.synthesize(self.dec, &coefficients, t);
            u.iter().zip(m).map(|(a, w)| w * a * a).sum()
        })?;
        let rhs = if q.lower > 0.0 { q.lower.ln() } else { f64::NEG_INFINITY };
        Ok((lhs, rhs))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        let x = w.vertex(self.graph, 0)?;
        let window = self
            .windows
            .iter()
            .position(|c| c.vertex == x)
            .ok_or_else(|| Error::InvalidParameter(format!("no window at `{}`", self.graph.id(x))))?;
        self.point(window, w.sample()?)
    }

    pub fn run(&self) -> Result<Certificate> {
        if self.windows.is_empty() || self.samples.is_empty() {
            return Err(Error::InvalidParameter("windows and samples must be nonempty".into()));
        }
        for w in &self.windows {
            if !(w.a >= 0.0 && w.a <= w.b) {
                return Err(Error::InvalidInterval { a: w.a, b: w.b });
            }
            if w.vertex >= self.graph.len() {
                return Err(Error::UnknownVertex(format!("#{}", w.vertex)));
            }
        }
        for (f, omega) in &self.samples {
            validate_nonnegative(self.graph, f)?;
            if omega.len() != self.graph.len() {
                return Err(Error::ShapeMismatch { expected: self.graph.len(), found: omega.len() });
            }
        }
        let pairs: Vec<(usize, usize)> =
            (0..self.windows.len()).flat_map(|i| (0..self.samples.len()).map(move |k| (i, k))).collect();
        let parts = map_range(pairs.len(), |j| self.point(pairs[j].0, pairs[j].1));
        let mut rec = Recorder::new(Condition::ChiHypothesis);
        rec.param("T", self.big_t);
        rec.param("nodes", self.nodes);
        rec.param("windows", self.windows.len());
        for (&(i, k), part) in pairs.iter().zip(parts) {
            let (lhs, rhs) = part?;
            let w = &self.windows[i];
            rec.record(Witness::new(self.graph, &[w.vertex], &[w.a, w.b]).at_time(self.big_t).with_sample(k), lhs, rhs);
        }
        Ok(rec.finish(format!("{} windows x {} samples", self.windows.len(), self.samples.len())))
    }
}

pub fn check_chi_hypothesis(
    graph: &WeightedGraph,
    dec: &SpectralDecomposition,
    windows: Vec<ChiWindow>,
    big_t: f64,
    samples: Vec<(Vec<f64>, Vec<f64>)>,
) -> Result<Certificate> {
    ChiHypothesisCheck { graph, dec, windows, big_t, samples, nodes: 1000 }.run()
}

/// `sup_{x,y in B} p_{r^2}(x,y) <= C r^{-n}` and `||f - P_{r^2} f||_2^2 <= r^2 ||∇f||_2^2`.
pub struct SemigroupRegularizationCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub dec: &'a SpectralDecomposition,
    pub ball: Vec<usize>,
    pub ln_c: f64,
    pub n: f64,
    pub radii: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl SemigroupRegularizationCheck<'_> {
    pub fn kernel_point(&self, x: usize, y: usize, r: f64) -> Result<(f64, f64)> {
        Ok((self.dec.heat_kernel(r * r, x, y)?.ln(), self.ln_c - self.n * r.ln()))
    }

    pub fn contraction_point(&self, k: usize, r: f64) -> Result<(f64, f64)> {
        let f = self.samples.get(k).ok_or_else(|| Error::InvalidParameter(format!("no sample #{k}")))?;
        let pf = self.dec.apply_semigroup(r * r, f)?;
        let m = self.graph.measures();
        let lhs: f64 = f.iter().zip(&pf).zip(m).map(|((a, b), w)| w * (a - b) * (a - b)).sum();
        let norm: f64 = f.iter().zip(m).map(|(a, w)| w * a * a).sum();
        let lhs = if lhs <= SEMIGROUP_ROUNDOFF * SEMIGROUP_ROUNDOFF * norm { 0.0 } else { lhs };
        Ok((lhs.ln(), 2.0 * r.ln() + dirichlet_energy(self.graph, f)?.ln()))
    }

    /// Witnesses with two vertices are kernel points; with a sample index they are contraction points.
    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        let r = w.radius(0)?;
        match w.sample {
            Some(k) => self.contraction_point(k, r),
            None => self.kernel_point(w.vertex(self.graph, 0)?, w.vertex(self.graph, 1)?, r),
        }
    }

    pub fn run(&self) -> Result<Certificate> {
        check_vertices(self.graph, &self.ball, "ball")?;
        if self.radii.is_empty() || self.radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter("radii must be positive".into()));
        }
        for f in &self.samples {
            if f.len() != self.graph.len() {
                return Err(Error::ShapeMismatch { expected: self.graph.len(), found: f.len() });
            }
        }
        let mut rec = Recorder::new(Condition::SemigroupReg);
        rec.param("ln_c", self.ln_c);
        rec.param("n", self.n);
        rec.param("r_min", self.radii.iter().copied().fold(f64::INFINITY, f64::min));
        rec.param("r_max", self.radii.iter().copied().fold(0.0, f64::max));
        rec.param("ball", self.ball.iter().map(|&x| self.graph.id(x)).collect::<Vec<_>>());
        let kernel = map_range(self.radii.len(), |i| -> Result<(usize, usize, f64)> {
            let r = self.radii[i];
            let mut best = (self.ball[0], self.ball[0], f64::NEG_INFINITY);
            for &x in &self.ball {
                let row = self.dec.kernel_row(r * r, x)?;
                for &y in &self.ball {
                    if row[y] > best.2 {
                        best = (x, y, row[y]);
                    }
                }
            }
            Ok(best)
        });
        for (i, part) in kernel.into_iter().enumerate() {
            let (x, y, _) = part?;
            let r = self.radii[i];
            let (lhs, rhs) = self.kernel_point(x, y, r)?;
            rec.record(Witness::new(self.graph, &[x, y], &[r]).at_time(r * r), lhs, rhs);
        }
        let pairs: Vec<(usize, f64)> = (0..self.samples.len()).flat_map(|k| self.radii.iter().map(move |&r| (k, r))).collect();
        let contraction = map_range(pairs.len(), |j| self.contraction_point(pairs[j].0, pairs[j].1));
        for (&(k, r), part) in pairs.iter().zip(contraction) {
            let (lhs, rhs) = part?;
            rec.record(Witness::new(self.graph, &[], &[r]).at_time(r * r).with_sample(k), lhs, rhs);
        }
        Ok(rec.finish(format!(
            "{} radii: kernel supremum over B x B per radius, plus {} samples x radii for the contraction",
            self.radii.len(),
            self.samples.len()
        )))
    }
}

pub fn check_semigroup_regularization(
    graph: &WeightedGraph,
    dec: &SpectralDecomposition,
    ball: &[usize],
    ln_c: f64,
    n: f64,
    radii: &[f64],
    samples: Vec<Vec<f64>>,
) -> Result<Certificate> {
    SemigroupRegularizationCheck { graph, dec, ball: ball.to_vec(), ln_c, n, radii: radii.to_vec(), samples }.run()
}
