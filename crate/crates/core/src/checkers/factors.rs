//! Control functions plugged into the volume and heat-kernel checks.
//!
//! A volume factor supplies `ln Φ_x^{r2}(r1)` and the dimension `n_x(r2)`; a
//! heat factor supplies `ln Ψ_z(τ)` and `n_z(τ)`. Prefactors such as `A` are
//! folded into the returned logarithm.

use crate::corrections::{CountingBlock, DimensionFn, EvalFlags, GeneralBlock};
use crate::error::Result;
use crate::graph::WeightedGraph;
use crate::metric::MetricStructure;

use super::floor_jump_radii;

/// `Φ` and `n` of a volume-doubling condition.
pub trait VolumeFactor: Sync {
    fn ln_factor(&self, x: usize, r1: f64, r2: f64) -> Result<f64>;

    fn dimension(&self, x: usize, r2: f64) -> f64;

    /// Radii where `dimension` or the outer dependence of `ln_factor` changes.
    fn dimension_events(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `Some(n)` when the dimension does not depend on the outer radius.
    fn constant_dimension(&self) -> Option<f64> {
        None
    }

    /// `Some(ln Φ)` when the factor is a constant.
    fn constant_ln_factor(&self) -> Option<f64> {
        None
    }

    /// `ln_factor` does not depend on `r2`.
    fn outer_independent(&self) -> bool {
        false
    }

    /// The margin may have interior minima in `r1` between consecutive jump points.
    fn needs_interior_search(&self) -> bool {
        false
    }

    /// Radii in `(a, b)` where `ln_factor` is discontinuous in `r1`.
    fn jump_radii(&self, _x: usize, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }

    fn flags(&self) -> EvalFlags {
        EvalFlags::default()
    }

    fn describe(&self) -> String;
}

/// `Ψ` and `n` of a heat-kernel condition.
pub trait HeatFactor: Sync {
    fn ln_factor(&self, z: usize, tau: f64) -> Result<f64>;

    fn dimension(&self, z: usize, tau: f64) -> f64;

    fn flags(&self) -> EvalFlags {
        EvalFlags::default()
    }

    fn describe(&self) -> String;
}

/// A constant control function with a constant dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFactor {
    pub ln_value: f64,
    pub dimension: f64,
}

impl ConstantFactor {
    pub fn new(ln_value: f64, dimension: f64) -> Self {
        Self { ln_value, dimension }
    }
}

impl VolumeFactor for ConstantFactor {
    fn ln_factor(&self, _x: usize, _r1: f64, _r2: f64) -> Result<f64> {
        Ok(self.ln_value)
    }

    fn dimension(&self, _x: usize, _r2: f64) -> f64 {
        self.dimension
    }

    fn constant_dimension(&self) -> Option<f64> {
        Some(self.dimension)
    }

    fn constant_ln_factor(&self) -> Option<f64> {
        Some(self.ln_value)
    }

    fn outer_independent(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!("constant ln factor {:?}, dimension {:?}", self.ln_value, self.dimension)
    }
}

impl HeatFactor for ConstantFactor {
    fn ln_factor(&self, _z: usize, _tau: f64) -> Result<f64> {
        Ok(self.ln_value)
    }

    fn dimension(&self, _z: usize, _tau: f64) -> f64 {
        self.dimension
    }

    fn describe(&self) -> String {
        format!("constant ln factor {:?}, dimension {:?}", self.ln_value, self.dimension)
    }
}

/// Events of `r -> sup n on [r/4, r]`.
fn annulus_events(dimension: &DimensionFn) -> Vec<f64> {
    dimension.events().iter().flat_map(|&e| [e, 4.0 * e]).collect()
}

/// `A Φ` for the counting measure with global jump size.
#[derive(Debug)]
pub struct CountingVolume<'a> {
    pub block: &'a CountingBlock,
    pub graph: &'a WeightedGraph,
    pub jump: f64,
}

impl VolumeFactor for CountingVolume<'_> {
    fn ln_factor(&self, x: usize, r1: f64, _r2: f64) -> Result<f64> {
        Ok(self.block.ln_a() + self.block.ln_phi(self.graph.weighted_degree(x), r1)?)
    }

    fn dimension(&self, _x: usize, _r2: f64) -> f64 {
        self.block.dimension()
    }

    fn constant_dimension(&self) -> Option<f64> {
        Some(self.block.dimension())
    }

    fn outer_independent(&self) -> bool {
        true
    }

    fn needs_interior_search(&self) -> bool {
        true
    }

    fn jump_radii(&self, _x: usize, a: f64, b: f64) -> Vec<f64> {
        let base = 2.0 * self.jump;
        let mut out = Vec::new();
        let mut r = base;
        while r < b {
            if r > a {
                out.push(r);
            }
            r *= 4.0;
        }
        out
    }

    fn flags(&self) -> EvalFlags {
        self.block.flags()
    }

    fn describe(&self) -> String {
        format!("counting A*Phi, n = {:?}", self.block.dimension())
    }
}

/// `A Ψ` for the counting measure, `Ψ_x(r) = Φ_x(r/16)`.
#[derive(Debug)]
pub struct CountingHeat<'a> {
    pub block: &'a CountingBlock,
    pub graph: &'a WeightedGraph,
}

impl HeatFactor for CountingHeat<'_> {
    fn ln_factor(&self, z: usize, tau: f64) -> Result<f64> {
        Ok(self.block.ln_a() + self.block.ln_psi(self.graph.weighted_degree(z), tau)?)
    }

    fn dimension(&self, _z: usize, _tau: f64) -> f64 {
        self.block.dimension()
    }

    fn flags(&self) -> EvalFlags {
        self.block.flags()
    }

    fn describe(&self) -> String {
        format!("counting A*Psi, n = {:?}", self.block.dimension())
    }
}

/// Locally regular `A Φ` with `A` and `N` taken at the outer radius.
#[derive(Debug)]
pub struct RegularVolume<'a> {
    pub block: &'a GeneralBlock<'a>,
    pub metric: &'a MetricStructure,
}

impl VolumeFactor for RegularVolume<'_> {
    fn ln_factor(&self, x: usize, r1: f64, r2: f64) -> Result<f64> {
        Ok(self.block.ln_a(r2) + self.block.ln_phi(x, r1, r2)?)
    }

    fn dimension(&self, _x: usize, r2: f64) -> f64 {
        self.block.annulus_dimension(r2)
    }

    fn dimension_events(&self) -> Vec<f64> {
        annulus_events(self.block.dimension_fn())
    }

    fn constant_dimension(&self) -> Option<f64> {
        match self.block.dimension_fn() {
            DimensionFn::Constant { value } => Some(*value),
            DimensionFn::Table { .. } => None,
        }
    }

    fn outer_independent(&self) -> bool {
        self.constant_dimension().is_some()
    }

    fn needs_interior_search(&self) -> bool {
        true
    }

    fn jump_radii(&self, x: usize, a: f64, b: f64) -> Vec<f64> {
        floor_jump_radii(self.metric, x, a, b, 2.0, 0.5, 1.0)
    }

    fn flags(&self) -> EvalFlags {
        self.block.flags()
    }

    fn describe(&self) -> String {
        "locally regular A*Phi".into()
    }
}

/// Locally regular `A Ψ`.
#[derive(Debug)]
pub struct RegularHeat<'a> {
    pub block: &'a GeneralBlock<'a>,
}

impl HeatFactor for RegularHeat<'_> {
    fn ln_factor(&self, z: usize, tau: f64) -> Result<f64> {
        Ok(self.block.ln_a(tau) + self.block.ln_psi(z, tau)?)
    }

    fn dimension(&self, _z: usize, tau: f64) -> f64 {
        self.block.annulus_dimension(tau)
    }

    fn flags(&self) -> EvalFlags {
        self.block.flags()
    }

    fn describe(&self) -> String {
        "locally regular A*Psi".into()
    }
}

/// Heat factor `A' Ψ` with the `Θ_z(τ)` exponent of the Gaussian bound derived from Sobolev.
#[derive(Debug)]
pub struct GaussianHeat<'a> {
    pub block: &'a GeneralBlock<'a>,
}

impl HeatFactor for GaussianHeat<'_> {
    fn ln_factor(&self, z: usize, tau: f64) -> Result<f64> {
        Ok(self.block.ln_a_prime(tau) + self.block.ln_gaussian_psi(z, tau)?)
    }

    fn dimension(&self, _z: usize, tau: f64) -> f64 {
        self.block.annulus_dimension(tau)
    }

    fn flags(&self) -> EvalFlags {
        self.block.flags()
    }

    fn describe(&self) -> String {
        "Sobolev-derived A'*Psi with Theta exponent".into()
    }
}

/// Self-referential doubling factor `A Φ` with `n = n_x(R)`.
#[derive(Debug)]
pub struct DoublingVolume<'a> {
    pub block: &'a GeneralBlock<'a>,
    pub metric: &'a MetricStructure,
}

impl VolumeFactor for DoublingVolume<'_> {
    fn ln_factor(&self, x: usize, r1: f64, r2: f64) -> Result<f64> {
        Ok(self.block.ln_doubling_a(r2) + self.block.ln_doubling_phi(x, r1, r2)?)
    }

    fn dimension(&self, _x: usize, r2: f64) -> f64 {
        self.block.dimension_fn().value(r2)
    }

    fn dimension_events(&self) -> Vec<f64> {
        self.block.dimension_fn().events().to_vec()
    }

    fn jump_radii(&self, x: usize, a: f64, b: f64) -> Vec<f64> {
        floor_jump_radii(self.metric, x, a, b, 2.0, 1.0, 1.0)
    }

    fn flags(&self) -> EvalFlags {
        self.block.flags()
    }

    fn describe(&self) -> String {
        "self-referential doubling A*Phi".into()
    }
}

/// `A' Φ` of the most general statement.
#[derive(Debug)]
pub struct GeneralVolume<'a> {
    pub block: &'a GeneralBlock<'a>,
    pub metric: &'a MetricStructure,
}

impl VolumeFactor for GeneralVolume<'_> {
    fn ln_factor(&self, x: usize, r1: f64, r2: f64) -> Result<f64> {
        Ok(self.block.ln_a_prime(r2) + self.block.ln_general_phi(x, r1, r2)?)
    }

    fn dimension(&self, _x: usize, r2: f64) -> f64 {
        self.block.annulus_dimension(r2)
    }

    fn dimension_events(&self) -> Vec<f64> {
        annulus_events(self.block.dimension_fn())
    }

    fn jump_radii(&self, x: usize, a: f64, b: f64) -> Vec<f64> {
        floor_jump_radii(self.metric, x, a, b, 2.0, 0.5, 1.0)
    }

    fn flags(&self) -> EvalFlags {
        self.block.flags()
    }

    fn describe(&self) -> String {
        "general A'*Phi".into()
    }
}

/// `A' Ψ` of the most general statement.
#[derive(Debug)]
pub struct GeneralHeat<'a> {
    pub block: &'a GeneralBlock<'a>,
}

impl HeatFactor for GeneralHeat<'_> {
    fn ln_factor(&self, z: usize, tau: f64) -> Result<f64> {
        Ok(self.block.ln_a_prime(tau) + self.block.ln_general_psi(z, tau)?)
    }

    fn dimension(&self, _z: usize, tau: f64) -> f64 {
        self.block.annulus_dimension(tau)
    }

    fn flags(&self) -> EvalFlags {
        self.block.flags()
    }

    fn describe(&self) -> String {
        "general A'*Psi".into()
    }
}
