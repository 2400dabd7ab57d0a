//! Functional inequalities: Sobolev (via the optimizer), Nash and weak Sobolev.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::MetricStructure;
use crate::par::map_range;
use crate::sobolev::{minimal_sobolev_constant, nash_log_sides, Budget, SobolevProblem};
use crate::spectral::dirichlet_energy;

use super::{Certificate, Condition, Recorder, Witness};

/// `(x, r) -> (n, ln φ)`.
type BoundFn<'a> = Box<dyn Fn(usize, f64) -> Result<(f64, f64)> + Sync + 'a>;

/// Dimension and `ln φ` required of the ball `B_x(r)`.
pub struct SobolevBound<'a> {
    pub description: String,
    eval: BoundFn<'a>,
}

impl<'a> SobolevBound<'a> {
    pub fn new(description: impl Into<String>, eval: impl Fn(usize, f64) -> Result<(f64, f64)> + Sync + 'a) -> Self {
        Self { description: description.into(), eval: Box::new(eval) }
    }

    pub fn constant(n: f64, ln_phi: f64) -> Self {
        Self::new(format!("n = {n:?}, ln phi = {ln_phi:?}"), move |_, _| Ok((n, ln_phi)))
    }

    pub fn at(&self, x: usize, r: f64) -> Result<(f64, f64)> {
        (self.eval)(x, r)
    }
}

/// Sobolev inequality certified one-sidedly: the optimizer's lower bound
/// `φ*` on the optimal constant of `B_x(r)` must not exceed the required `φ`.
pub struct SobolevCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub metric: &'a MetricStructure,
    pub centers: Vec<usize>,
    pub radii: Vec<f64>,
    pub bound: SobolevBound<'a>,
    pub budget: Budget,
    pub seed: u64,
}

/// Deterministic per-ball seed.
fn ball_seed(seed: u64, x: usize, r: f64) -> u64 {
    seed ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ r.to_bits().rotate_left(17)
}

impl SobolevCheck<'_> {
    /// `(ln φ*, ln φ)` at `B_x(r)`.
    pub fn point(&self, x: usize, r: f64) -> Result<(f64, f64)> {
        let (n, ln_phi) = self.bound.at(x, r)?;
        let problem = SobolevProblem::for_ball(self.graph, self.metric, x, r, n)?;
        let result = minimal_sobolev_constant(&problem, &self.budget, ball_seed(self.seed, x, r))?;
        Ok((result.phi_star.ln(), ln_phi))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.vertex(self.graph, 0)?, w.radius(0)?)
    }

    /// Optimizer lower bounds for every `(center, radius)` pair, centers outermost.
    pub fn measure(&self) -> Result<Vec<MeasuredBall>> {
        if self.centers.is_empty() || self.radii.is_empty() {
            return Err(Error::InvalidParameter("centers and radii must be nonempty".into()));
        }
        let pairs: Vec<(usize, f64)> = self.centers.iter().flat_map(|&x| self.radii.iter().map(move |&r| (x, r))).collect();
        map_range(pairs.len(), |j| -> Result<MeasuredBall> {
            let (center, radius) = pairs[j];
            let (dimension, _) = self.bound.at(center, radius)?;
            let problem = SobolevProblem::for_ball(self.graph, self.metric, center, radius, dimension)?;
            let result = minimal_sobolev_constant(&problem, &self.budget, ball_seed(self.seed, center, radius))?;
            Ok(MeasuredBall { center, radius, dimension, ln_phi_star: result.phi_star.ln() })
        })
        .into_iter()
        .collect()
    }

    /// Certificate from earlier measurements; each must use the dimension the bound asks for.
    pub fn certify(&self, measured: &[MeasuredBall]) -> Result<Certificate> {
        if measured.is_empty() {
            return Err(Error::InvalidParameter("no measured balls".into()));
        }
        let mut rec = Recorder::new(Condition::S);
        let mut dims = Vec::new();
        let mut ln_phi_max = f64::NEG_INFINITY;
        for b in measured {
            let (n, rhs) = self.bound.at(b.center, b.radius)?;
            if n != b.dimension {
                return Err(Error::InvalidParameter(format!(
                    "ball at `{}`, r = {} was measured with n = {} but the bound needs n = {n}",
                    self.graph.id(b.center),
                    b.radius,
                    b.dimension
                )));
            }
            dims.push(n);
            ln_phi_max = ln_phi_max.max(rhs);
            rec.record(Witness::new(self.graph, &[b.center], &[b.radius]), b.ln_phi_star, rhs);
        }
        if dims.iter().all(|&n| n == dims[0]) {
            rec.param("n", dims[0]);
        }
        let radii = measured.iter().map(|b| b.radius);
        rec.param("ln_phi_max", ln_phi_max);
        rec.param("r_min", radii.clone().fold(f64::INFINITY, f64::min));
        rec.param("r_max", radii.fold(0.0, f64::max));
        rec.param("centers", self.centers.iter().map(|&x| self.graph.id(x)).collect::<Vec<_>>());
        rec.param("bound", &self.bound.description);
        rec.param("budget", format!("{},{},{:e}", self.budget.restarts, self.budget.max_iterations, self.budget.tolerance));
        rec.param("seed", self.seed);
        rec.flag("optimizer-lower-bound");
        Ok(rec.finish(format!("{} centers x {} sampled radii; margin ln phi - ln phi*", self.centers.len(), self.radii.len())))
    }

    pub fn run(&self) -> Result<Certificate> {
        self.certify(&self.measure()?)
    }
}

/// One optimizer measurement `ln φ*` on `B_center(radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredBall {
    pub center: usize,
    pub radius: f64,
    pub dimension: f64,
    pub ln_phi_star: f64,
}

pub fn check_sobolev<'a>(
    graph: &'a WeightedGraph,
    metric: &'a MetricStructure,
    centers: &[usize],
    radii: &[f64],
    bound: SobolevBound<'a>,
    budget: Budget,
    seed: u64,
) -> Result<Certificate> {
    SobolevCheck { graph, metric, centers: centers.to_vec(), radii: radii.to_vec(), bound, budget, seed }.run()
}

/// Nash inequality `||u||_2^{2+4/n} <= C (E(u) + r^-2 ||u||_2^2) ||u||_1^{4/n}` on samples.
pub struct NashCheck<'a> {
    pub problem: &'a SobolevProblem<'a>,
    pub c: f64,
    pub samples: Vec<Vec<f64>>,
}

impl NashCheck<'_> {
    pub fn point(&self, k: usize) -> Result<(f64, f64)> {
        let u = self.samples.get(k).ok_or_else(|| Error::InvalidParameter(format!("no sample #{k}")))?;
        nash_log_sides(self.problem, self.c, u)
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.sample()?)
    }

    pub fn run(&self) -> Result<Certificate> {
        if self.samples.is_empty() {
            return Err(Error::InvalidParameter("nash check needs at least one sample".into()));
        }
        let g = self.problem.graph();
        let center: Vec<usize> = self.problem.center().into_iter().collect();
        let mut rec = Recorder::new(Condition::Nash);
        rec.param("c", self.c);
        rec.param("n", self.problem.dimension());
        rec.param("r", self.problem.radius());
        for k in 0..self.samples.len() {
            let (lhs, rhs) = self.point(k)?;
            rec.record(Witness::new(g, &center, &[self.problem.radius()]).with_sample(k), lhs, rhs);
        }
        Ok(rec.finish(format!("{} samples supported in the ball", self.samples.len())))
    }
}

pub fn check_nash(problem: &SobolevProblem<'_>, c: f64, samples: Vec<Vec<f64>>) -> Result<Certificate> {
    NashCheck { problem, c, samples }.run()
}

/// Weak Sobolev inequality
/// `sup_λ λ^{2(1+1/n)} m(f > λ) <= 12 C2^2 (C1 ∨ r1^n ||1/m||)^{2/n} (E(f) + r2^-2 ||f||_2^2) ||f||_1^{2/n}`
/// on samples supported in `B_o(r2)`.
///
/// The supremum over `λ` is attained as `λ` increases to one of the finitely
/// many positive values of `f`, where `m(f > λ)` becomes `m(f >= v)`.
pub struct WeakSobolevCheck<'a> {
    pub graph: &'a WeightedGraph,
    pub metric: &'a MetricStructure,
    pub o: usize,
    pub n: f64,
    pub ln_c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub r2: f64,
    pub samples: Vec<Vec<f64>>,
    /// Passing semigroup-regularization certificate for the operator family.
    pub regularization: &'a Certificate,
}

impl WeakSobolevCheck<'_> {
    pub fn point(&self, k: usize) -> Result<(f64, f64)> {
        let f = self.samples.get(k).ok_or_else(|| Error::InvalidParameter(format!("no sample #{k}")))?;
        let m = self.graph.measures();
        let mut levels: Vec<(f64, f64)> = f.iter().zip(m).filter(|(v, _)| **v > 0.0).map(|(&v, &w)| (v, w)).collect();
        levels.sort_by(|a, b| b.0.total_cmp(&a.0));
        let exponent = 2.0 + 2.0 / self.n;
        let mut lhs = f64::NEG_INFINITY;
        let mut mass = 0.0;
        let mut i = 0;
        while i < levels.len() {
            let v = levels[i].0;
            while i < levels.len() && levels[i].0 == v {
                mass += levels[i].1;
                i += 1;
            }
            lhs = lhs.max(exponent * v.ln() + mass.ln());
        }
        let ball = self.metric.ball(self.o, self.r2)?;
        let inv = self.graph.max_inverse_measure(&ball);
        let l1: f64 = f.iter().zip(m).map(|(v, w)| w * v.abs()).sum();
        let l2: f64 = f.iter().zip(m).map(|(v, w)| w * v * v).sum();
        let energy = dirichlet_energy(self.graph, f)?;
        let floor = self.ln_c1.max(self.n * self.r1.ln() + inv.ln());
        let rhs = 12f64.ln()
            + 2.0 * self.c2.ln()
            + 2.0 / self.n * floor
            + (energy + l2 / (self.r2 * self.r2)).ln()
            + 2.0 / self.n * l1.ln();
        Ok((lhs, rhs))
    }

    pub fn evaluate(&self, w: &Witness) -> Result<(f64, f64)> {
        self.point(w.sample()?)
    }

    fn verify(&self) -> Result<()> {
        let cert = self.regularization;
        cert.require(Condition::SemigroupReg)?;
        let tol = 1e-12 * self.r2.max(1.0);
        let covers = cert.param_f64("r_min").is_some_and(|v| v <= self.r1 + tol)
            && cert.param_f64("r_max").is_some_and(|v| v >= self.r2 - tol);
        let constants = cert.param_f64("ln_c").is_some_and(|v| v <= self.ln_c1 + 1e-12)
            && cert.param_f64("n").is_some_and(|v| (v - self.n).abs() <= 1e-12 * self.n)
            && self.c2 >= 1.0;
        if !(covers && constants) {
            return Err(Error::MissingHypothesis(
                "semigroup regularization certificate does not match (C1, C2 = 1, n) on [r1, r2]".into(),
            ));
        }
        if !(self.r1 > 0.0 && self.r1 <= self.r2) {
            return Err(Error::InvalidInterval { a: self.r1, b: self.r2 });
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidParameter("no samples".into()));
        }
        let ball = self.metric.ball(self.o, self.r2)?;
        let mut inside = vec![false; self.graph.len()];
        for &x in &ball {
            inside[x] = true;
        }
        for f in &self.samples {
            if f.len() != self.graph.len() {
                return Err(Error::ShapeMismatch { expected: self.graph.len(), found: f.len() });
            }
            if let Some(x) = (0..f.len()).find(|&x| !inside[x] && f[x] != 0.0) {
                return Err(Error::SupportOutsideBall(self.graph.id(x).to_string()));
            }
        }
        Ok(())
    }

    pub fn run(&self) -> Result<Certificate> {
        self.verify()?;
        let mut rec = Recorder::new(Condition::WeakSobolev);
        rec.param("o", self.graph.id(self.o));
        rec.param("n", self.n);
        rec.param("ln_c1", self.ln_c1);
        rec.param("c2", self.c2);
        rec.param("r1", self.r1);
        rec.param("r2", self.r2);
        for k in 0..self.samples.len() {
            let (lhs, rhs) = self.point(k)?;
            rec.record(Witness::new(self.graph, &[self.o], &[self.r1, self.r2]).with_sample(k), lhs, rhs);
        }
        Ok(rec.finish(format!("{} samples; level sets at the distinct positive values", self.samples.len())))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_weak_sobolev(
    graph: &WeightedGraph,
    metric: &MetricStructure,
    o: usize,
    n: f64,
    ln_c1: f64,
    r1: f64,
    r2: f64,
    samples: Vec<Vec<f64>>,
    regularization: &Certificate,
) -> Result<Certificate> {
    WeakSobolevCheck { graph, metric, o, n, ln_c1, c2: 1.0, r1, r2, samples, regularization }.run()
}
