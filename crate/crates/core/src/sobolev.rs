//! Optimal Sobolev constants of balls: a multistart ascent that yields lower
//! bounds, an exhaustive angular grid for balls of at most four vertices, and
//! the Nash-type interpolation check.
//!
//! The ratio maximized is
//! `m(B)^(2/n) ||u||_q^2 / (r^2 E(u) + ||u||_2^2)` with `q = 2n/(n-2)` and the
//! energy `E` summed over the whole graph, so edges leaving the ball count.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::MetricStructure;
use crate::par::map_range;
use crate::spectral::dirichlet_energy;
use crate::tolerances::PASS_TOLERANCE;

/// Largest support handled by [`grid_oracle_constant`].
pub const GRID_ORACLE_MAX_VERTICES: usize = 4;

/// A ball (or explicit support set) with radius and dimension.
#[derive(Debug, Clone)]
pub struct SobolevProblem<'a> {
    graph: &'a WeightedGraph,
    center: Option<usize>,
    support: Vec<usize>,
    /// Distance from the centre, aligned with `support`.
    distances: Option<Vec<f64>>,
    radius: f64,
    n: f64,
}

impl<'a> SobolevProblem<'a> {
    /// Problem on the closed ball `B_x(r)`.
    pub fn for_ball(graph: &'a WeightedGraph, metric: &MetricStructure, center: usize, radius: f64, n: f64) -> Result<Self> {
        let support = metric.ball(center, radius)?;
        let distances = support.iter().map(|&y| metric.distance(center, y)).collect();
        let mut p = Self::with_support(graph, support, radius, n)?;
        p.center = Some(center);
        p.distances = Some(distances);
        Ok(p)
    }

    /// Problem with an explicit support set.
    pub fn with_support(graph: &'a WeightedGraph, mut support: Vec<usize>, radius: f64, n: f64) -> Result<Self> {
        if !(n > 2.0 && n.is_finite()) {
            return Err(Error::InvalidParameter(format!("dimension must exceed 2, got {n}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(Error::InvalidParameter("support set is empty".into()));
        }
        if let Some(&bad) = support.iter().find(|&&x| x >= graph.len()) {
            return Err(Error::UnknownVertex(bad.to_string()));
        }
        Ok(Self { graph, center: None, support, distances: None, radius, n })
    }

    /// Same ball with another dimension.
    pub fn with_dimension(&self, n: f64) -> Result<Self> {
        let mut p = Self::with_support(self.graph, self.support.clone(), self.radius, n)?;
        p.center = self.center;
        p.distances = self.distances.clone();
        Ok(p)
    }

    pub fn graph(&self) -> &WeightedGraph {
        self.graph
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dimension(&self) -> f64 {
        self.n
    }

    /// `q = 2n / (n - 2)`.
    pub fn exponent(&self) -> f64 {
        2.0 * self.n / (self.n - 2.0)
    }

    pub fn ball_measure(&self) -> f64 {
        self.support.iter().map(|&x| self.graph.measure(x)).sum()
    }

    fn check_support(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.graph.len() {
            return Err(Error::ShapeMismatch { expected: self.graph.len(), found: u.len() });
        }
        let mut inside = vec![false; u.len()];
        for &x in &self.support {
            inside[x] = true;
        }
        if let Some(x) = (0..u.len()).find(|&x| !inside[x] && u[x] != 0.0) {
            return Err(Error::SupportOutsideBall(self.graph.id(x).to_string()));
        }
        Ok(())
    }

    /// Natural log of the ratio for a full-length vector `u`.
    pub fn ln_ratio(&self, u: &[f64]) -> Result<f64> {
        self.check_support(u)?;
        let scale = self.support.iter().map(|&x| u[x].abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::ZeroFunction);
        }
        let v: Vec<f64> = u.iter().map(|a| a / scale).collect();
        let q = self.exponent();
        let m = self.graph.measures();
        let lq: f64 = self.support.iter().map(|&x| m[x] * v[x].abs().powf(q)).sum();
        let l2: f64 = self.support.iter().map(|&x| m[x] * v[x] * v[x]).sum();
        let energy = dirichlet_energy(self.graph, &v)?;
        let r2 = self.radius * self.radius;
        Ok(2.0 / self.n * self.ball_measure().ln() + 2.0 / q * lq.ln() - (r2 * energy + l2).ln())
    }

    /// `m(B)^(2/n) ||u||_q^2 / (r^2 E(u) + ||u||_2^2)`.
    pub fn ratio(&self, u: &[f64]) -> Result<f64> {
        Ok(self.ln_ratio(u)?.exp())
    }

    /// Energy Hessian restricted to the support: `E(u) = u^T H u` for `u` supported there.
    fn energy_matrix(&self) -> DMatrix<f64> {
        let k = self.support.len();
        let mut h = DMatrix::zeros(k, k);
        for (i, &x) in self.support.iter().enumerate() {
            h[(i, i)] = 2.0 * self.graph.degree(x);
            for &(y, b) in self.graph.neighbors(x) {
                if let Ok(j) = self.support.binary_search(&y) {
                    h[(i, j)] -= 2.0 * b;
                }
            }
        }
        h
    }

    fn local_measures(&self) -> Vec<f64> {
        self.support.iter().map(|&x| self.graph.measure(x)).collect()
    }

    fn embed(&self, local: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.graph.len()];
        for (&x, &v) in self.support.iter().zip(local) {
            u[x] = v;
        }
        u
    }
}

/// `sobolev_ratio(problem, u)`.
pub fn sobolev_ratio(problem: &SobolevProblem<'_>, u: &[f64]) -> Result<f64> {
    problem.ratio(u)
}

/// Optimizer budget: restarts, iterations per restart, stationarity tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { restarts: 16, max_iterations: 2000, tolerance: 1e-12 }
    }
}

impl FromStr for Budget {
    type Err = Error;

    /// `R,I,TOL`, e.g. `100,5000,1e-12`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::InvalidParameter(format!("budget `{s}` is not `RESTARTS,ITERATIONS,TOLERANCE`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let b = Budget {
            restarts: parts[0].parse().map_err(|_| bad())?,
            max_iterations: parts[1].parse().map_err(|_| bad())?,
            tolerance: parts[2].parse().map_err(|_| bad())?,
        };
        if b.restarts == 0 || b.max_iterations == 0 || !(b.tolerance > 0.0) {
            return Err(bad());
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "kebab-case")]
pub enum Certification {
    HeuristicMultistart,
    GridCertified { resolution: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// Best ratio found; a lower bound on the optimal constant.
    pub phi_star: f64,
    /// Maximizer on the whole vertex set, zero off the support, unit `m`-norm.
    pub u: Vec<f64>,
    pub certification: Certification,
    pub restarts: usize,
    pub best_restart: usize,
    pub tolerance: f64,
    pub total_iterations: usize,
    /// Every restart met the tolerance before its iteration cap.
    pub stationary: bool,
}

struct Ascent {
    ln_ratio: f64,
    u: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Shared data for all restarts on one problem.
struct Landscape {
    measures: Vec<f64>,
    operator: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    q: f64,
    ln_prefactor: f64,
}

impl Landscape {
    fn new(problem: &SobolevProblem<'_>) -> Result<Self> {
        let measures = problem.local_measures();
        let r2 = problem.radius * problem.radius;
        let mut operator = problem.energy_matrix() * r2;
        for (i, m) in measures.iter().enumerate() {
            operator[(i, i)] += m;
        }
        let factor = Cholesky::new(operator.clone())
            .ok_or_else(|| Error::Decomposition("ball operator is not positive definite".into()))?;
        Ok(Self {
            measures,
            operator,
            factor,
            q: problem.exponent(),
            ln_prefactor: 2.0 / problem.n * problem.ball_measure().ln(),
        })
    }

    /// `(ln ratio, sum m u^q, u^T A u)` for nonnegative `u`.
    fn evaluate(&self, u: &DVector<f64>) -> (f64, f64, f64) {
        let lq: f64 = u.iter().zip(&self.measures).map(|(v, m)| m * v.powf(self.q)).sum();
        let quad = u.dot(&(&self.operator * u));
        (self.ln_prefactor + 2.0 / self.q * lq.ln() - quad.ln(), lq, quad)
    }

    fn normalize(&self, u: &mut DVector<f64>) {
        let norm: f64 = u.iter().zip(&self.measures).map(|(v, m)| m * v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            *u /= norm;
        }
    }

    /// Preconditioned projected gradient ascent with backtracking.
    ///
    /// The search direction is `A^-1 (m u^(q-1)) / S - u / Q`; a unit step in
    /// units of `Q` lands on the inverse-iteration image, which never lowers
    /// the ratio, so backtracking always terminates there or earlier.
    fn ascend(&self, mut u: DVector<f64>, budget: &Budget) -> Ascent {
        self.normalize(&mut u);
        let (mut best, mut lq, mut quad) = self.evaluate(&u);
        let mut stretch = 2.0f64;
        for it in 1..=budget.max_iterations {
            let rhs = DVector::from_iterator(u.len(), u.iter().zip(&self.measures).map(|(v, m)| m * v.powf(self.q - 1.0)));
            let image = self.factor.solve(&rhs);
            let direction = &image / lq - &u / quad;
            let mut accepted = None;
            let mut factor = stretch;
            while factor >= 1.0 {
                let mut trial = &u + &direction * (quad * factor);
                trial.apply(|v| *v = v.max(0.0));
                if trial.iter().any(|&v| v > 0.0) {
                    self.normalize(&mut trial);
                    let (value, tlq, tquad) = self.evaluate(&trial);
                    if value >= best || factor == 1.0 {
                        accepted = Some((trial, value, tlq, tquad, factor));
                        break;
                    }
                }
                factor /= 2.0;
            }
            let Some((trial, value, tlq, tquad, used)) = accepted else {
                return Ascent { ln_ratio: best, u: u.iter().copied().collect(), iterations: it, converged: true };
            };
            let gain = value - best;
            stretch = if used == stretch { (stretch * 2.0).min(64.0) } else { stretch.max(2.0) / 2.0 }.max(1.0);
            if value >= best {
                u = trial;
                best = value;
                lq = tlq;
                quad = tquad;
            }
            if gain.abs() <= budget.tolerance {
                return Ascent { ln_ratio: best, u: u.iter().copied().collect(), iterations: it, converged: true };
            }
        }
        Ascent { ln_ratio: best, u: u.iter().copied().collect(), iterations: budget.max_iterations, converged: false }
    }
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed ^ (restart as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Indicator, cutoff and constant seeds in a fixed order.
fn structured_seeds(problem: &SobolevProblem<'_>) -> Vec<Vec<f64>> {
    let k = problem.support.len();
    let mut seeds = vec![vec![1.0; k]];
    if let Some(d) = &problem.distances {
        let cutoff: Vec<f64> = d.iter().map(|&rho| (problem.radius / 2.0 - rho).max(0.0)).collect();
        if cutoff.iter().any(|&v| v > 0.0) {
            seeds.push(cutoff);
        }
        let tent: Vec<f64> = d.iter().map(|&rho| (problem.radius - rho).max(0.0) + 1e-3 * problem.radius).collect();
        seeds.push(tent);
    }
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        seeds.push(e);
    }
    seeds
}

/// Multistart estimate of the optimal constant on `problem`'s ball.
///
/// Restart `k` uses the `k`-th structured seed, then uniform random
/// nonnegative vectors from a ChaCha stream derived from `seed` and `k`.
/// Ties in the final reduction go to the lowest restart index.
pub fn minimal_sobolev_constant(problem: &SobolevProblem<'_>, budget: &Budget, seed: u64) -> Result<OptimizationResult> {
    let landscape = Landscape::new(problem)?;
    let structured = structured_seeds(problem);
    let k = problem.support.len();
    let runs = map_range(budget.restarts, |restart| {
        let start = match structured.get(restart) {
            Some(s) => DVector::from_column_slice(s),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(seed, restart));
                DVector::from_iterator(k, (0..k).map(|_| rng.gen::<f64>() + 1e-9))
            }
        };
        landscape.ascend(start, budget)
    });
    let (best_restart, best) = runs
        .iter()
        .enumerate()
        .fold(None::<(usize, &Ascent)>, |acc, (i, run)| match acc {
            Some((_, b)) if b.ln_ratio >= run.ln_ratio => acc,
            _ => Some((i, run)),
        })
        .expect("at least one restart");
    let u = problem.embed(&best.u);
    Ok(OptimizationResult {
        phi_star: problem.ratio(&u)?,
        u,
        certification: Certification::HeuristicMultistart,
        restarts: budget.restarts,
        best_restart,
        tolerance: budget.tolerance,
        total_iterations: runs.iter().map(|r| r.iterations).sum(),
        stationary: runs.iter().all(|r| r.converged),
    })
}

/// Maximum of the ratio over an angular grid of the unit `m`-sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracle {
    pub value: f64,
    /// Maximizing grid point as a full-length vector.
    pub point: Vec<f64>,
    pub resolution: f64,
    pub signed: bool,
    pub evaluations: u64,
}

struct AngleTable {
    cos: Vec<f64>,
    sin: Vec<f64>,
    cos_q: Vec<f64>,
    sin_q: Vec<f64>,
}

impl AngleTable {
    fn new(range: f64, resolution: f64, q: f64) -> Self {
        let steps = (range / resolution).floor() as usize;
        let mut angles: Vec<f64> = (0..=steps).map(|i| i as f64 * resolution).collect();
        if range - angles[steps] > 1e-12 {
            angles.push(range);
        }
        let cos: Vec<f64> = angles.iter().map(|a| a.cos()).collect();
        let sin: Vec<f64> = angles.iter().map(|a| a.sin()).collect();
        Self {
            cos_q: cos.iter().map(|c| c.abs().powf(q)).collect(),
            sin_q: sin.iter().map(|s| s.abs().powf(q)).collect(),
            cos,
            sin,
        }
    }

    fn len(&self) -> usize {
        self.cos.len()
    }
}

struct GridSearch<'t> {
    tables: Vec<AngleTable>,
    weights: Vec<f64>,
    kernel: &'t DMatrix<f64>,
    r2: f64,
    half_q: f64,
    best: f64,
    best_point: Vec<f64>,
    c: Vec<f64>,
    cq: Vec<f64>,
    evaluations: u64,
}

impl GridSearch<'_> {
    /// Coordinates `c_i = (prod of sines) * cos(next)`; the last one ends with a sine.
    fn visit(&mut self, level: usize, prefix: f64, prefix_q: f64) {
        let k = self.weights.len();
        if level + 1 == k {
            self.c[level] = prefix;
            self.cq[level] = prefix_q;
            self.score();
            return;
        }
        let last_angle = level + 2 == k;
        for i in 0..self.tables[level].len() {
            let (c, s, cq, sq) = {
                let t = &self.tables[level];
                (t.cos[i], t.sin[i], t.cos_q[i], t.sin_q[i])
            };
            self.c[level] = prefix * c;
            self.cq[level] = prefix_q * cq;
            if last_angle {
                self.c[level + 1] = prefix * s;
                self.cq[level + 1] = prefix_q * sq;
                self.score();
            } else {
                self.visit(level + 1, prefix * s, prefix_q * sq);
            }
        }
    }

    /// Maximizes `S^(2/q) / (r^2 E + 1)` through the monotone surrogate `S / (r^2 E + 1)^(q/2)`.
    fn score(&mut self) {
        self.evaluations += 1;
        let k = self.weights.len();
        let s: f64 = (0..k).map(|i| self.weights[i] * self.cq[i]).sum();
        let mut e = 0.0;
        for i in 0..k {
            let row: f64 = (0..k).map(|j| self.kernel[(i, j)] * self.c[j]).sum();
            e += self.c[i] * row;
        }
        let value = s / (self.r2 * e + 1.0).powf(self.half_q);
        if value > self.best {
            self.best = value;
            self.best_point.clone_from(&self.c);
        }
    }
}

/// Exhaustive grid over spherical angles at step `resolution` (at most four vertices).
///
/// With `signed = false` the search covers the nonnegative orthant only.
pub fn grid_oracle_constant(problem: &SobolevProblem<'_>, resolution: f64, signed: bool) -> Result<GridOracle> {
    let k = problem.support.len();
    if k > GRID_ORACLE_MAX_VERTICES {
        return Err(Error::TooLarge { vertices: k, limit: GRID_ORACLE_MAX_VERTICES });
    }
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(Error::InvalidParameter(format!("grid resolution must lie in (0, 1), got {resolution}")));
    }
    let q = problem.exponent();
    let m = problem.local_measures();
    // u_i = c_i / sqrt(m_i) puts c on the Euclidean unit sphere.
    let weights: Vec<f64> = m.iter().map(|mi| mi.powf(1.0 - q / 2.0)).collect();
    let h = problem.energy_matrix();
    let kernel = DMatrix::from_fn(k, k, |i, j| h[(i, j)] / (m[i] * m[j]).sqrt());
    let half_pi = std::f64::consts::FRAC_PI_2;
    let tables: Vec<AngleTable> = (0..k.saturating_sub(1))
        .map(|level| {
            let range = match (signed, level + 2 == k) {
                (false, _) => half_pi,
                (true, false) => std::f64::consts::PI,
                (true, true) => std::f64::consts::TAU,
            };
            AngleTable::new(range, resolution, q)
        })
        .collect();
    let mut search = GridSearch {
        tables,
        weights,
        kernel: &kernel,
        r2: problem.radius * problem.radius,
        half_q: q / 2.0,
        best: f64::NEG_INFINITY,
        best_point: vec![0.0; k],
        c: vec![0.0; k],
        cq: vec![0.0; k],
        evaluations: 0,
    };
    search.visit(0, 1.0, 1.0);
    let local: Vec<f64> = search.best_point.iter().zip(&m).map(|(c, mi)| c / mi.sqrt()).collect();
    let point = problem.embed(&local);
    Ok(GridOracle { value: problem.ratio(&point)?, point, resolution, signed, evaluations: search.evaluations })
}

/// Upgrades `result` to grid-certified when the oracle does not exceed it by
/// more than one part in a thousand. Returns the oracle either way.
pub fn certify_with_grid(problem: &SobolevProblem<'_>, result: &mut OptimizationResult, resolution: f64) -> Result<GridOracle> {
    let oracle = grid_oracle_constant(problem, resolution, false)?;
    if oracle.value <= result.phi_star * (1.0 + 1e-3) {
        result.certification = Certification::GridCertified { resolution };
    }
    Ok(oracle)
}

/// Outcome of [`nash_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashReport {
    pub min_log_margin: f64,
    pub worst_sample: usize,
    pub samples: usize,
    pub pass: bool,
}

/// `ln RHS - ln LHS` of `||u||_2^(2+4/n) <= C (E + r^-2 ||u||_2^2) ||u||_1^(4/n)`.
pub fn nash_log_margin(problem: &SobolevProblem<'_>, c: f64, u: &[f64]) -> Result<f64> {
    let (lhs, rhs) = nash_log_sides(problem, c, u)?;
    Ok(rhs - lhs)
}

/// `(ln LHS, ln RHS)` of the Nash inequality.
pub fn nash_log_sides(problem: &SobolevProblem<'_>, c: f64, u: &[f64]) -> Result<(f64, f64)> {
    problem.check_support(u)?;
    let m = problem.graph.measures();
    let l1: f64 = problem.support.iter().map(|&x| m[x] * u[x].abs()).sum();
    let l2sq: f64 = problem.support.iter().map(|&x| m[x] * u[x] * u[x]).sum();
    if l1 == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let n = problem.n;
    let energy = dirichlet_energy(problem.graph, u)?;
    let lhs = (1.0 + 2.0 / n) * l2sq.ln();
    let rhs = c.ln() + (energy + l2sq / (problem.radius * problem.radius)).ln() + 4.0 / n * l1.ln();
    Ok((lhs, rhs))
}

/// Evaluates the Nash inequality on every sample.
pub fn nash_check(problem: &SobolevProblem<'_>, c: f64, samples: &[Vec<f64>]) -> Result<NashReport> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("nash_check needs at least one sample".into()));
    }
    let mut worst = (f64::INFINITY, 0);
    for (i, u) in samples.iter().enumerate() {
        let margin = nash_log_margin(problem, c, u)?;
        if margin < worst.0 {
            worst = (margin, i);
        }
    }
    Ok(NashReport { min_log_margin: worst.0, worst_sample: worst.1, samples: samples.len(), pass: worst.0 >= -PASS_TOLERANCE })
}

/// Nash constant implied by a Sobolev constant: `phi r^2 / m(B)^(2/n)`.
pub fn nash_constant(problem: &SobolevProblem<'_>, phi: f64) -> f64 {
    phi * problem.radius * problem.radius / problem.ball_measure().powf(2.0 / problem.n)
}

/// Uniform random nonnegative functions on the support (full-length vectors).
pub fn random_samples(problem: &SobolevProblem<'_>, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let local: Vec<f64> = problem.support.iter().map(|_| rng.gen::<f64>() + 1e-6).collect();
            problem.embed(&local)
        })
        .collect()
}

/// JSON dump of an optimization result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevDump {
    pub center: Option<String>,
    pub radius: f64,
    pub n: f64,
    pub phi_star: f64,
    pub certification: Certification,
    pub restarts: usize,
    pub stationary: bool,
    pub u: BTreeMap<String, f64>,
}

impl SobolevDump {
    pub fn new(problem: &SobolevProblem<'_>, result: &OptimizationResult) -> Self {
        let g = problem.graph;
        Self {
            center: problem.center.map(|c| g.id(c).to_string()),
            radius: problem.radius,
            n: problem.n,
            phi_star: result.phi_star,
            certification: result.certification,
            restarts: result.restarts,
            stationary: result.stationary,
            u: problem.support.iter().map(|&x| (g.id(x).to_string(), result.u[x])).collect(),
        }
    }
}
