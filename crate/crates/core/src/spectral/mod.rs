//! Laplacian, exact heat kernels and the sandwiched semigroup.
//!
//! The kernel convention is `(P_t f)(x) = Σ_y m(y) p_t(x,y) f(y)`, so
//! `p_t(x,y) = Σ_k e^{-λ_k t} φ_k(x) φ_k(y)` for an `m`-orthonormal eigenbasis.

mod ode;

pub use ode::{heat_evolve_ode, OdeOptions, OdeSolution};

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::tolerances::MAX_DENSE_VERTICES;

fn check_len(g: &WeightedGraph, f: &[f64]) -> Result<()> {
    if f.len() == g.len() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected: g.len(), found: f.len() })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}

/// `(Δf)(x) = (1/m(x)) Σ_y b(x,y) (f(x) - f(y))`.
pub fn laplacian_apply(g: &WeightedGraph, f: &[f64]) -> Result<Vec<f64>> {
    check_len(g, f)?;
    Ok((0..g.len()).map(|x| g.neighbors(x).iter().map(|&(y, b)| b * (f[x] - f[y])).sum::<f64>() / g.measure(x)).collect())
}

/// `|∇f|(x)`.
pub fn gradient_norm(g: &WeightedGraph, f: &[f64], x: usize) -> Result<f64> {
    check_len(g, f)?;
    let s: f64 = g.neighbors(x).iter().map(|&(y, b)| b * (f[x] - f[y]).powi(2)).sum();
    Ok((s / g.measure(x)).sqrt())
}

/// `‖|∇f|‖₂² = Σ_{x,y} b(x,y) (f(x) - f(y))²`, summing over ordered pairs.
pub fn dirichlet_energy(g: &WeightedGraph, f: &[f64]) -> Result<f64> {
    check_len(g, f)?;
    Ok(2.0 * g.edges().map(|(x, y, b)| b * (f[x] - f[y]).powi(2)).sum::<f64>())
}

/// `⟨f, g⟩ = Σ_x m(x) f(x) g(x)`.
pub fn inner(m: &[f64], f: &[f64], h: &[f64]) -> f64 {
    m.iter().zip(f).zip(h).map(|((m, a), b)| m * a * b).sum()
}

/// Eigenvalues ascending with `m`-orthonormal eigenfunctions (columns of `phi`).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    phi: DMatrix<f64>,
    measure: Vec<f64>,
    max_residual: f64,
}

impl SpectralDecomposition {
    /// Diagonalizes the symmetrized operator `M^{-1/2} (D - B) M^{-1/2}` and unconjugates.
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        let n = g.len();
        if n > MAX_DENSE_VERTICES {
            return Err(Error::TooLarge { vertices: n, limit: MAX_DENSE_VERTICES });
        }
        let sqrt_m: Vec<f64> = g.measures().iter().map(|m| m.sqrt()).collect();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            a[(x, x)] = g.degree(x) / g.measure(x);
            for &(y, b) in g.neighbors(x) {
                a[(x, y)] = -b / (sqrt_m[x] * sqrt_m[y]);
            }
        }
        let eig = a
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or_else(|| Error::Decomposition("symmetric eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max).max(1.0);
        let mut eigenvalues = Vec::with_capacity(n);
        let mut phi = DMatrix::<f64>::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            let lambda = eig.eigenvalues[i];
            if lambda < -1e-10 * top {
                return Err(Error::Decomposition(format!("negative eigenvalue {lambda}")));
            }
            eigenvalues.push(lambda.max(0.0));
            let v = eig.eigenvectors.column(i);
            // Fix the sign so the largest-magnitude entry is positive (deterministic output).
            let pivot = v.iter().copied().fold(0.0f64, |acc, e| if e.abs() > acc.abs() { e } else { acc });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for x in 0..n {
                phi[(x, k)] = sign * v[x] / sqrt_m[x];
            }
        }
        let mut dec = Self { eigenvalues, phi, measure: g.measures().to_vec(), max_residual: 0.0 };
        dec.max_residual = dec.compute_residual(g)?;
        let bound = 1e-10 * top;
        if dec.max_residual > bound {
            return Err(Error::Decomposition(format!("eigen-residual {:.3e} exceeds {:.3e}", dec.max_residual, bound)));
        }
        Ok(dec)
    }

    fn compute_residual(&self, g: &WeightedGraph) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..self.len() {
            let f: Vec<f64> = self.phi.column(k).iter().copied().collect();
            let lf = laplacian_apply(g, &f)?;
            let r: Vec<f64> = lf.iter().zip(&f).map(|(a, b)| a - self.eigenvalues[k] * b).collect();
            worst = worst.max(inner(&self.measure, &r, &r).sqrt());
        }
        Ok(worst)
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Bottom of the spectrum `Λ = λ_0`.
    pub fn bottom(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Largest `‖Δφ_k - λ_k φ_k‖` observed at construction.
    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// `φ_k` as a vector over vertices.
    pub fn eigenfunction(&self, k: usize) -> Vec<f64> {
        self.phi.column(k).iter().copied().collect()
    }

    /// Largest entry of `|G - I|` for the `m`-Gram matrix of the eigenfunctions.
    pub fn gram_deviation(&self) -> f64 {
        let scaled = DMatrix::from_fn(self.len(), self.len(), |x, k| self.phi[(x, k)] * self.measure[x].sqrt());
        let gram = scaled.transpose() * &scaled;
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `p_t(x,y)`.
    pub fn heat_kernel(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        check_time(t)?;
        Ok(self.eigenvalues.iter().enumerate().map(|(k, &l)| (-l * t).exp() * self.phi[(x, k)] * self.phi[(y, k)]).sum())
    }

    /// `p_t(x, ·)`.
    pub fn kernel_row(&self, t: f64, x: usize) -> Result<Vec<f64>> {
        check_time(t)?;
        let c = DVector::from_iterator(
            self.len(),
            self.eigenvalues.iter().enumerate().map(|(k, &l)| (-l * t).exp() * self.phi[(x, k)]),
        );
        Ok((&self.phi * c).iter().copied().collect())
    }

    /// Full kernel matrix `p_t(x,y)`.
    pub fn kernel_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        check_time(t)?;
        let mut scaled = self.phi.clone();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut((-l * t).exp());
        }
        Ok(scaled * self.phi.transpose())
    }

    /// Expansion coefficients `⟨φ_k, f⟩`.
    pub fn coefficients(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), found: f.len() });
        }
        let mf = DVector::from_iterator(self.len(), f.iter().zip(&self.measure).map(|(a, m)| a * m));
        Ok(self.phi.tr_mul(&mf).iter().copied().collect())
    }

    /// `Σ_k e^{-λ_k t} c_k φ_k`.
    pub fn evolve_coefficients(&self, coefficients: &[f64], t: f64) -> Vec<f64> {
        let c = DVector::from_iterator(self.len(), coefficients.iter().zip(&self.eigenvalues).map(|(c, l)| c * (-l * t).exp()));
        (&self.phi * c).iter().copied().collect()
    }

    /// `P_t f`.
    pub fn apply_semigroup(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        check_time(t)?;
        let c = self.coefficients(f)?;
        Ok(self.evolve_coefficients(&c, t))
    }

    /// CSV `(t, x, y, p)` for every ordered pair and listed time.
    pub fn write_kernel_csv<W: Write>(&self, g: &WeightedGraph, times: &[f64], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "y", "p"])?;
        for &t in times {
            let k = self.kernel_matrix(t)?;
            for x in 0..self.len() {
                for y in 0..self.len() {
                    w.write_record([format!("{t:?}"), g.id(x).into(), g.id(y).into(), format!("{:?}", k[(x, y)])])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `(k, lambda)`.
    pub fn write_eigenvalues_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "lambda"])?;
        for (k, l) in self.eigenvalues.iter().enumerate() {
            w.write_record([k.to_string(), format!("{l:?}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A weight `ω` with cached exponentials and the displacement functional `h(ω)`.
#[derive(Debug, Clone)]
pub struct OmegaContext {
    omega: Vec<f64>,
    exp_pos: Vec<f64>,
    exp_neg: Vec<f64>,
    h: f64,
}

impl OmegaContext {
    pub fn new(g: &WeightedGraph, omega: &[f64]) -> Result<Self> {
        check_len(g, omega)?;
        let mut exp_pos = Vec::with_capacity(g.len());
        let mut exp_neg = Vec::with_capacity(g.len());
        for (x, &w) in omega.iter().enumerate() {
            let (p, q) = (w.exp(), (-w).exp());
            if !(p.is_normal() && q.is_normal()) {
                return Err(Error::OmegaOverflow(g.id(x).to_string()));
            }
            exp_pos.push(p);
            exp_neg.push(q);
        }
        // |∇e^ω · ∇e^{-ω}| = 4 sinh²((ω(x) - ω(y)) / 2).
        let h = (0..g.len())
            .map(|x| {
                g.neighbors(x).iter().map(|&(y, b)| b * 4.0 * (0.5 * (omega[x] - omega[y])).sinh().powi(2)).sum::<f64>()
                    / g.measure(x)
            })
            .fold(0.0, f64::max);
        if !h.is_finite() {
            let x = omega.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map_or(0, |p| p.0);
            return Err(Error::OmegaOverflow(g.id(x).to_string()));
        }
        Ok(Self { omega: omega.to_vec(), exp_pos, exp_neg, h })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// `h(ω)`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `P_t^ω f = e^ω P_t (e^{-ω} f)`.
    pub fn sandwiched_semigroup(&self, dec: &SpectralDecomposition, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        let inner: Vec<f64> = f.iter().zip(&self.exp_neg).map(|(a, e)| a * e).collect();
        let v = dec.apply_semigroup(t, &inner)?;
        Ok(v.iter().zip(&self.exp_pos).map(|(a, e)| a * e).collect())
    }

    /// Coefficients of `e^{-ω} f`; evolve them with [`OmegaContext::synthesize`].
    pub fn sandwiched_coefficients(&self, dec: &SpectralDecomposition, f: &[f64]) -> Result<Vec<f64>> {
        let inner: Vec<f64> = f.iter().zip(&self.exp_neg).map(|(a, e)| a * e).collect();
        dec.coefficients(&inner)
    }

    /// `e^ω Σ_k e^{-λ_k t} c_k φ_k`.
    pub fn synthesize(&self, dec: &SpectralDecomposition, coefficients: &[f64], t: f64) -> Vec<f64> {
        let v = dec.evolve_coefficients(coefficients, t);
        v.iter().zip(&self.exp_pos).map(|(a, e)| a * e).collect()
    }

    /// `Δ_ω u = e^ω Δ(e^{-ω} u)`.
    pub fn laplacian_apply(&self, g: &WeightedGraph, u: &[f64]) -> Result<Vec<f64>> {
        let inner: Vec<f64> = u.iter().zip(&self.exp_neg).map(|(a, e)| a * e).collect();
        let d = laplacian_apply(g, &inner)?;
        Ok(d.iter().zip(&self.exp_pos).map(|(a, e)| a * e).collect())
    }

    /// Sup-norm of `d/dt P_t^ω f + Δ_ω P_t^ω f`, time derivative by centred differences.
    pub fn heat_residual(&self, g: &WeightedGraph, dec: &SpectralDecomposition, t: f64, f: &[f64], step: f64) -> Result<f64> {
        if !(step > 0.0 && t >= step) {
            return Err(Error::InvalidParameter(format!("need 0 < step <= t, got step {step}, t {t}")));
        }
        let plus = self.sandwiched_semigroup(dec, t + step, f)?;
        let minus = self.sandwiched_semigroup(dec, t - step, f)?;
        let here = self.sandwiched_semigroup(dec, t, f)?;
        let lap = self.laplacian_apply(g, &here)?;
        Ok(plus.iter().zip(&minus).zip(&lap).map(|((p, m), l)| ((p - m) / (2.0 * step) + l).abs()).fold(0.0, f64::max))
    }
}
