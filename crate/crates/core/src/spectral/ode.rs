//! Adaptive extrapolated implicit Euler for `u' = -Δu`.
//!
//! Each macro step of size `h` runs implicit Euler with `1..=K` equal substeps
//! and combines the results in an Aitken–Neville table. The difference between
//! the two highest-order diagonal entries drives step-size control.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Number of extrapolation stages (substep counts `1..=stages`).
    pub stages: usize,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { relative_tolerance: 1e-11, absolute_tolerance: 1e-14, stages: 6, initial_step: 1e-2, max_steps: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub values: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

fn laplacian_matrix(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.len();
    let mut l = DMatrix::zeros(n, n);
    for x in 0..n {
        let m = g.measure(x);
        l[(x, x)] = g.degree(x) / m;
        for &(y, b) in g.neighbors(x) {
            l[(x, y)] = -b / m;
        }
    }
    l
}

struct Stepper {
    laplacian: DMatrix<f64>,
    cached_h: f64,
    factors: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Stepper {
    fn factor(&mut self, h: f64, stages: usize) -> Result<()> {
        if h == self.cached_h {
            return Ok(());
        }
        let n = self.laplacian.nrows();
        self.factors.clear();
        for j in 1..=stages {
            let a = DMatrix::identity(n, n) + &self.laplacian * (h / j as f64);
            let lu = a.lu();
            if !lu.is_invertible() {
                return Err(Error::Integrator("singular implicit Euler matrix".into()));
            }
            self.factors.push(lu);
        }
        self.cached_h = h;
        Ok(())
    }

    /// Extrapolation table diagonal entries `(T_KK, T_K,K-1)`.
    fn macro_step(&self, u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let k = self.factors.len();
        let mut table: Vec<Vec<DVector<f64>>> = Vec::with_capacity(k);
        for j in 1..=k {
            let lu = &self.factors[j - 1];
            let mut v = u.clone();
            for _ in 0..j {
                lu.solve_mut(&mut v);
            }
            let mut row = vec![v];
            for c in 1..j {
                let ratio = j as f64 / (j - c) as f64;
                let next = &row[c - 1] + (&row[c - 1] - &table[j - 2][c - 1]) / (ratio - 1.0);
                row.push(next);
            }
            table.push(row);
        }
        let last = &table[k - 1];
        (last[k - 1].clone(), last[k - 2].clone())
    }
}

/// `P_t f` by stiff time integration, independent of the eigendecomposition.
pub fn heat_evolve_ode(g: &WeightedGraph, f: &[f64], t: f64, options: OdeOptions) -> Result<OdeSolution> {
    if f.len() != g.len() {
        return Err(Error::ShapeMismatch { expected: g.len(), found: f.len() });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::NegativeTime(t));
    }
    if options.stages < 2 {
        return Err(Error::InvalidParameter("extrapolation needs at least two stages".into()));
    }
    let mut stepper = Stepper { laplacian: laplacian_matrix(g), cached_h: f64::NAN, factors: Vec::new() };
    let mut u = DVector::from_column_slice(f);
    let mut time = 0.0;
    let mut h = options.initial_step.min(t);
    let (mut accepted, mut rejected) = (0, 0);
    let exponent = 1.0 / options.stages as f64;

    while time < t {
        if accepted + rejected >= options.max_steps {
            return Err(Error::Integrator(format!("step budget exhausted at t = {time}")));
        }
        let remaining = t - time;
        if h >= remaining || remaining - h < 1e-12 * t {
            h = remaining;
        }
        if h < 1e-14 * t.max(1.0) {
            return Err(Error::Integrator(format!("step size underflow at t = {time}")));
        }
        stepper.factor(h, options.stages)?;
        let (best, lower) = stepper.macro_step(&u);
        let scale = options.absolute_tolerance + options.relative_tolerance * u.amax().max(best.amax());
        let err = (&best - &lower).amax() / scale;
        if err <= 1.0 {
            u = best;
            time = if h == remaining { t } else { time + h };
            accepted += 1;
        } else {
            rejected += 1;
        }
        let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-exponent)).clamp(0.2, 4.0) };
        h *= factor;
    }
    Ok(OdeSolution { values: u.iter().copied().collect(), accepted_steps: accepted, rejected_steps: rejected })
}
