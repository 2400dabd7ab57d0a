//! Correction terms, exponents and dimension functions, evaluated as natural logs.
//!
//! Every constant of the form `2^(41 N^3) phi^(2 N^2)` leaves double range for
//! moderate `N`, so the blocks below return `ln` of each quantity. Radius
//! guards are preconditions: under [`GuardPolicy::Enforce`] a violation is an
//! error, under [`GuardPolicy::Relaxed`] the formula is evaluated literally and
//! the block records the violation in its [`EvalFlags`].

use std::f64::consts::LN_2;
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::metric::MetricStructure;
use crate::tolerances::{FLOOR_NUDGE, FLOOR_WARNING_BAND};

/// A real number stored as sign and natural-log magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub sign: i8,
    pub ln_abs: f64,
}

impl LogValue {
    pub fn positive(ln_abs: f64) -> Self {
        Self { sign: 1, ln_abs }
    }

    pub fn from_value(v: f64) -> Self {
        Self {
            sign: if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            },
            ln_abs: v.abs().ln(),
        }
    }

    /// Plain value; overflows to infinity for large magnitudes.
    pub fn value(&self) -> f64 {
        f64::from(self.sign) * self.ln_abs.exp()
    }

    pub fn log2(&self) -> f64 {
        self.ln_abs / LN_2
    }
}

/// Diagnostics accumulated while evaluating corrections.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalFlags {
    /// A floor argument was within `1e-9` of an integer.
    pub near_integer_floor: bool,
    /// A radius guard failed and was evaluated literally.
    pub relaxed_guard: bool,
}

impl EvalFlags {
    pub fn merge(self, other: Self) -> Self {
        Self {
            near_integer_floor: self.near_integer_floor || other.near_integer_floor,
            relaxed_guard: self.relaxed_guard || other.relaxed_guard,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.near_integer_floor {
            out.push("near-integer-floor".to_string());
        }
        if self.relaxed_guard {
            out.push("relaxed-guard".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardPolicy {
    #[default]
    Enforce,
    Relaxed,
}

/// Result of [`guarded_floor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Floor {
    pub value: i64,
    pub near_integer: bool,
}

/// `floor(x + 1e-12)`, flagging arguments within `1e-9` of an integer.
/// `+inf` maps to `i64::MAX`.
pub fn guarded_floor(x: f64) -> Floor {
    if x == f64::INFINITY {
        return Floor { value: i64::MAX, near_integer: false };
    }
    let near_integer = (x - x.round()).abs() <= FLOOR_WARNING_BAND;
    Floor { value: (x + FLOOR_NUDGE).floor() as i64, near_integer }
}

/// `q^k` with the convention `q^(i64::MAX) = 0` for `q < 1`.
fn int_power(q: f64, k: i64) -> f64 {
    if k == i64::MAX {
        0.0
    } else {
        q.powf(k as f64)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_dimension(n: f64) -> Result<()> {
    if n > 2.0 && n.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("dimension must exceed 2, got {n}")))
    }
}

/// Davies–Pang profile `zeta(r, t)` for jump size `s`.
pub fn zeta(r: f64, t: f64, s: f64) -> Result<f64> {
    check_positive("t", t)?;
    check_positive("jump size", s)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::NegativeRadius(r));
    }
    // With a = rs/t: zeta = (t/s^2)(a asinh a + 1 - sqrt(1+a^2)), and
    // 1 - sqrt(1+a^2) = -a^2/(1+sqrt(1+a^2)) avoids cancellation.
    let a = r * s / t;
    let root = a.hypot(1.0);
    let bracket = a * a.asinh() - a * a / (1.0 + root);
    Ok((t / (s * s)) * bracket.max(0.0))
}

/// `nu(r, t) = 2 s^-2 (sqrt(1 + r^2 s^2 / t^2) - 1)`.
pub fn nu(r: f64, t: f64, s: f64) -> Result<f64> {
    check_positive("t", t)?;
    check_positive("jump size", s)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::NegativeRadius(r));
    }
    let a = r * s / t;
    Ok(2.0 / (s * s) * a * a / (a.hypot(1.0) + 1.0))
}

/// Off-diagonal dimension factor `ln(1 v s^-2 (sqrt(t^2 + r^2 s^2) - t))`.
pub fn ln_offdiagonal_factor(r: f64, t: f64, s: f64) -> f64 {
    let a = r * s / t;
    let excess = t / (s * s) * a * a / (a.hypot(1.0) + 1.0);
    excess.max(1.0).ln()
}

/// `q(n) = (n + 2) / (n + 4)`.
pub fn dimension_ratio(n: f64) -> f64 {
    (n + 2.0) / (n + 4.0)
}

/// Radius-dependent dimension, shared by all vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DimensionFn {
    Constant {
        value: f64,
    },
    /// Step function: `values[i]` on `[starts[i], starts[i+1])`, the first
    /// value extending to `0` and the last to infinity.
    Table {
        starts: Vec<f64>,
        values: Vec<f64>,
    },
}

impl DimensionFn {
    pub fn constant(n: f64) -> Result<Self> {
        check_dimension(n)?;
        Ok(Self::Constant { value: n })
    }

    pub fn table(starts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if starts.len() != values.len() || starts.is_empty() {
            return Err(Error::ShapeMismatch { expected: starts.len().max(1), found: values.len() });
        }
        if starts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("dimension table radii must increase strictly".into()));
        }
        values.iter().try_for_each(|&n| check_dimension(n))?;
        Ok(Self::Table { starts, values })
    }

    /// Parses `3.5` or `r0:n0,r1:n1,...`.
    pub fn parse(text: &str) -> Result<Self> {
        if let Ok(v) = text.trim().parse::<f64>() {
            return Self::constant(v);
        }
        let mut starts = Vec::new();
        let mut values = Vec::new();
        for item in text.split(',') {
            let (r, n) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidParameter(format!("dimension entry `{item}` is not `radius:value`")))?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("`{s}` is not a number")));
            starts.push(parse(r)?);
            values.push(parse(n)?);
        }
        Self::table(starts, values)
    }

    fn step(&self, r: f64) -> usize {
        match self {
            Self::Constant { .. } => 0,
            Self::Table { starts, .. } => starts.partition_point(|&s| s <= r).saturating_sub(1),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Table { values, .. } => values[self.step(r)],
        }
    }

    /// `sup_{s in [a,b]} n(s)`.
    pub fn sup_over(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Table { values, .. } => {
                let (i, j) = (self.step(a), self.step(b.max(a)));
                values[i..=j].iter().copied().fold(f64::MIN, f64::max)
            }
        }
    }

    /// Radii at which the value changes.
    pub fn events(&self) -> &[f64] {
        match self {
            Self::Constant { .. } => &[],
            Self::Table { starts, .. } => &starts[1..],
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Table { values, .. } => values.iter().copied().fold(f64::MIN, f64::max),
        }
    }
}

/// Which branch of the inner-radius rule produced `r'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerRadiusBranch {
    Quarter,
    LogPower,
}

/// Inner radius `r'` and the supporting exponents for the variable Sobolev dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableDimension {
    pub r: f64,
    pub inner_radius: f64,
    pub branch: InnerRadiusBranch,
    pub p: f64,
    /// Dimension supremum over the cylinder `B_o(r) x [r', r]`.
    pub dimension_sup: f64,
    pub exponent: f64,
    pub dimension: f64,
    pub ln_sobolev_constant: f64,
}

/// Inner radius `r'`: `r/4` below `exp(max(4, 4 R1))`, `(ln r)^p / 4` above.
pub fn inner_radius(r: f64, r1: f64, p: f64) -> (f64, InnerRadiusBranch) {
    if r < (4.0f64).max(4.0 * r1).exp() {
        (r / 4.0, InnerRadiusBranch::Quarter)
    } else {
        (r.ln().powf(p) / 4.0, InnerRadiusBranch::LogPower)
    }
}

/// `ln` of the variable Sobolev constant `2^(796 N^2 + 2N/(N-2)) phi^(145 N)`.
pub fn ln_variable_sobolev_constant(n: f64, phi: f64) -> f64 {
    (796.0 * n * n + 2.0 * n / (n - 2.0)) * LN_2 + 145.0 * n * phi.ln()
}

/// `ln` of `2^(49 + 2D/(D-2)) gamma^(2/D)`.
pub fn ln_sobolev_constant_for_gamma(d: f64, ln_gamma: f64) -> f64 {
    (49.0 + 2.0 * d / (d - 2.0)) * LN_2 + 2.0 / d * ln_gamma
}

/// Smallest admissible dimension for a given `gamma`:
/// `D v ln(1 v (Psi Phi)^10/gamma v (m(B)||1/m|| / gamma)^(1/ln(r/r')))`.
pub fn dimension_for_gamma(d: f64, ln_psi_phi_10: f64, ln_volume_inverse: f64, ln_gamma: f64, ln_ratio: f64) -> f64 {
    let second = if ln_ratio > 0.0 { (ln_volume_inverse - ln_gamma) / ln_ratio } else { f64::INFINITY };
    d.max(0.0f64.max(ln_psi_phi_10 - ln_gamma).max(second))
}

/// Owns the guard policy and the accumulated flags of one evaluation context.
#[derive(Debug, Default)]
struct GuardState {
    policy: GuardPolicy,
    near_integer_floor: AtomicBool,
    relaxed_guard: AtomicBool,
}

impl GuardState {
    fn new(policy: GuardPolicy) -> Self {
        Self { policy, ..Default::default() }
    }

    fn require(&self, holds: bool, inequality: &str, detail: impl FnOnce() -> String) -> Result<()> {
        if holds {
            return Ok(());
        }
        match self.policy {
            GuardPolicy::Enforce => Err(Error::guard(inequality, detail())),
            GuardPolicy::Relaxed => {
                self.raise(EvalFlags { relaxed_guard: true, ..Default::default() });
                Ok(())
            }
        }
    }

    fn raise(&self, f: EvalFlags) {
        if f.near_integer_floor {
            self.near_integer_floor.store(true, Ordering::Relaxed);
        }
        if f.relaxed_guard {
            self.relaxed_guard.store(true, Ordering::Relaxed);
        }
    }

    fn flags(&self) -> EvalFlags {
        EvalFlags {
            near_integer_floor: self.near_integer_floor.load(Ordering::Relaxed),
            relaxed_guard: self.relaxed_guard.load(Ordering::Relaxed),
        }
    }

    /// `floor(log2(ratio) / 2)` with flagging.
    fn half_log2_floor(&self, ratio: f64) -> i64 {
        let f = guarded_floor(0.5 * ratio.log2());
        if f.near_integer {
            self.raise(EvalFlags { near_integer_floor: true, ..Default::default() });
        }
        f.value
    }
}

/// Correction block for the counting measure with constant dimension and global jump size.
#[derive(Debug)]
pub struct CountingBlock {
    n: f64,
    jump: f64,
    phi: f64,
    guards: GuardState,
}

impl CountingBlock {
    pub fn new(n: f64, jump: f64, phi: f64, policy: GuardPolicy) -> Result<Self> {
        check_dimension(n)?;
        check_positive("jump size", jump)?;
        check_positive("phi", phi)?;
        Ok(Self { n, jump, phi, guards: GuardState::new(policy) })
    }

    pub fn flags(&self) -> EvalFlags {
        self.guards.flags()
    }

    pub fn dimension(&self) -> f64 {
        self.n
    }

    /// `kappa(r) = floor(log2(r / 2S) / 2)`.
    pub fn kappa(&self, r: f64) -> Result<i64> {
        self.guards.require(r >= 2.0 * self.jump, "r >= 2S", || format!("r = {r}, S = {}", self.jump))?;
        Ok(self.guards.half_log2_floor(r / (2.0 * self.jump)))
    }

    pub fn theta(&self, r: f64) -> Result<f64> {
        Ok(int_power(dimension_ratio(self.n), self.kappa(r)?))
    }

    /// `ln Phi(r) = 3 n^2 theta(r) ln(1 + r^2 deg)`; independent of the outer radius.
    pub fn ln_phi(&self, degree: f64, r: f64) -> Result<f64> {
        let base = (r * r * degree).ln_1p();
        if base == 0.0 {
            return Ok(0.0);
        }
        Ok(3.0 * self.n * self.n * self.theta(r)? * base)
    }

    /// `ln Psi(r) = ln Phi(r/16)`.
    pub fn ln_psi(&self, degree: f64, r: f64) -> Result<f64> {
        self.ln_phi(degree, r / 16.0)
    }

    /// `ln A = 43 n^3 ln 2 + 8 n^2 ln phi`.
    pub fn ln_a(&self) -> f64 {
        43.0 * self.n.powi(3) * LN_2 + 8.0 * self.n * self.n * self.phi.ln()
    }

    /// `p = 2 / ln((n+4)/(n+2))`.
    pub fn p(&self) -> f64 {
        2.0 / ((self.n + 4.0) / (self.n + 2.0)).ln()
    }

    /// Inner radius, exponent, Sobolev dimension and constant at `r`, given
    /// `max_degree = ||deg||` on `B_o(r)`.
    pub fn variable_dimension(&self, r: f64, r1: f64, max_degree: f64) -> Result<VariableDimension> {
        if r < 4.0 * r1 {
            return Err(Error::guard("r >= 4 R1", format!("r = {r}, R1 = {r1}")));
        }
        let p = self.p();
        let (r_prime, branch) = inner_radius(r, r1, p);
        self.guards.require(4.0 * r_prime <= r, "4 r' <= r", || format!("r = {r}, r' = {r_prime}"))?;
        let exponent = 0.5 / (r / r_prime).ln() + 54.0 * self.n * self.theta(r_prime)?;
        let dimension = self.n * (exponent * (r * r * max_degree).ln_1p()).max(1.0);
        Ok(VariableDimension {
            r,
            inner_radius: r_prime,
            branch,
            p,
            dimension_sup: self.n,
            exponent,
            dimension,
            ln_sobolev_constant: ln_variable_sobolev_constant(self.n, self.phi),
        })
    }
}

/// Correction block for general measures, metrics and dimension functions.
#[derive(Debug)]
pub struct GeneralBlock<'a> {
    graph: &'a WeightedGraph,
    metric: &'a MetricStructure,
    dimension: &'a DimensionFn,
    phi: f64,
    guards: GuardState,
}

impl<'a> GeneralBlock<'a> {
    pub fn new(
        graph: &'a WeightedGraph,
        metric: &'a MetricStructure,
        dimension: &'a DimensionFn,
        phi: f64,
        policy: GuardPolicy,
    ) -> Result<Self> {
        check_positive("phi", phi)?;
        if metric.len() != graph.len() {
            return Err(Error::ShapeMismatch { expected: graph.len(), found: metric.len() });
        }
        Ok(Self { graph, metric, dimension, phi, guards: GuardState::new(policy) })
    }

    pub fn flags(&self) -> EvalFlags {
        self.guards.flags()
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn dimension_fn(&self) -> &DimensionFn {
        self.dimension
    }

    /// `N(r) = sup n on [r/4, r]`.
    pub fn annulus_dimension(&self, r: f64) -> f64 {
        self.dimension.sup_over(r / 4.0, r)
    }

    /// `M_x(r) = m(B_x(r)) / m(x)`, as a log.
    pub fn ln_volume_ratio(&self, x: usize, r: f64) -> Result<f64> {
        Ok(self.metric.volume_ratio(x, r)?.ln())
    }

    /// `D_x(r) = 1 + r^2 Deg_x`, as a log.
    pub fn ln_degree_factor(&self, x: usize, r: f64) -> f64 {
        (r * r * self.graph.weighted_degree(x)).ln_1p()
    }

    /// Annulus jump supremum; zero jumps (one-point spaces) map to `+inf` exponents.
    fn scaled_floor(&self, x: usize, r: f64, a: f64, b: f64, factor: f64, name: &str) -> Result<i64> {
        let s = self.metric.annulus_jump_sup(x, a, b)?;
        if s == 0.0 {
            return Ok(i64::MAX);
        }
        self.guards.require(r >= factor * s, name, || format!("x = {}, r = {r}, jump = {s}", self.graph.id(x)))?;
        Ok(self.guards.half_log2_floor(r / (factor * s)))
    }

    /// `eta_x(r) = floor(log2(r / (2 ||s_x||_[r/2,r])) / 2)`.
    pub fn eta(&self, x: usize, r: f64) -> Result<i64> {
        self.scaled_floor(x, r, r / 2.0, r, 2.0, "r >= 2 ||s_x||_[r/2,r]")
    }

    /// `theta^N_x(r, R) = q(N(R))^eta(r)`.
    pub fn theta(&self, x: usize, r: f64, big_r: f64) -> Result<f64> {
        Ok(int_power(dimension_ratio(self.annulus_dimension(big_r)), self.eta(x, r)?))
    }

    /// Locally regular volume correction `ln Phi^R_x(r) = 3 N(R)^2 theta ln D_x(r)`.
    pub fn ln_phi(&self, x: usize, r: f64, big_r: f64) -> Result<f64> {
        let base = self.ln_degree_factor(x, r);
        if base == 0.0 {
            return Ok(0.0);
        }
        let n = self.annulus_dimension(big_r);
        Ok(3.0 * n * n * self.theta(x, r, big_r)? * base)
    }

    /// `ln Psi_x(r) = ln Phi^r_x(r/16)`.
    pub fn ln_psi(&self, x: usize, r: f64) -> Result<f64> {
        self.ln_phi(x, r / 16.0, r)
    }

    /// `ln A(r) = 43 N^3 ln 2 + 8 N^2 ln phi`.
    pub fn ln_a(&self, r: f64) -> f64 {
        let n = self.annulus_dimension(r);
        43.0 * n.powi(3) * LN_2 + 8.0 * n * n * self.phi.ln()
    }

    /// `ln A'(r) = 41 N^3 ln 2 + 2 N^2 ln phi`; also the Gaussian prefactor for the heat bound.
    pub fn ln_a_prime(&self, r: f64) -> f64 {
        let n = self.annulus_dimension(r);
        41.0 * n.powi(3) * LN_2 + 2.0 * n * n * self.phi.ln()
    }

    /// `kappa_z(tau) = floor(log2(tau / (32 ||s_z||_[tau/4,tau])) / 2)`.
    pub fn gaussian_kappa(&self, z: usize, tau: f64) -> Result<i64> {
        self.scaled_floor(z, tau, tau / 4.0, tau, 32.0, "tau >= 32 ||s_z||_[tau/4,tau]")
    }

    /// `Theta_z(tau) = 3 N q(N)^kappa_z(tau)`.
    pub fn gaussian_exponent(&self, z: usize, tau: f64) -> Result<f64> {
        let n = self.annulus_dimension(tau);
        Ok(3.0 * n * int_power(dimension_ratio(n), self.gaussian_kappa(z, tau)?))
    }

    /// Heat-bound correction `ln Psi_z(tau) = Theta_z(tau) (ln D_z(tau) + ln M_z(tau))`.
    pub fn ln_gaussian_psi(&self, z: usize, tau: f64) -> Result<f64> {
        let base = self.ln_degree_factor(z, tau) + self.ln_volume_ratio(z, tau)?;
        if base == 0.0 {
            return Ok(0.0);
        }
        Ok(self.gaussian_exponent(z, tau)? * base)
    }

    /// `eta~(r) = floor(log2(r / (2 s_x(r))) / 2)`; may be negative, which is flagged.
    pub fn doubling_eta(&self, x: usize, r: f64) -> Result<i64> {
        let s = self.metric.jump_size(x, r)?;
        if s == 0.0 {
            return Ok(i64::MAX);
        }
        self.guards.require(r >= 2.0 * s, "r >= 2 s_x(r)", || format!("x = {}, r = {r}, s = {s}", self.graph.id(x)))?;
        Ok(self.guards.half_log2_floor(r / (2.0 * s)))
    }

    /// `theta~_x(r, R) = q(n_x(R))^eta~(r)`.
    pub fn doubling_theta(&self, x: usize, r: f64, big_r: f64) -> Result<f64> {
        Ok(int_power(dimension_ratio(self.dimension.value(big_r)), self.doubling_eta(x, r)?))
    }

    /// Self-referential doubling correction
    /// `ln Phi^R_x(r) = theta~ (n ln r + ln m(B_x(R)) - n ln R - ln m(x))`, `n = n_x(R)`.
    pub fn ln_doubling_phi(&self, x: usize, r: f64, big_r: f64) -> Result<f64> {
        let n = self.dimension.value(big_r);
        let base = n * (r / big_r).ln() + self.ln_volume_ratio(x, big_r)?;
        if base == 0.0 {
            return Ok(0.0);
        }
        Ok(self.doubling_theta(x, r, big_r)? * base)
    }

    /// `ln A = 6 n(R)^2 ln 2 + n(R) ln phi`.
    pub fn ln_doubling_a(&self, big_r: f64) -> f64 {
        let n = self.dimension.value(big_r);
        6.0 * n * n * LN_2 + n * self.phi.ln()
    }

    /// `ln A' = 7 n^2 ln 2 + n ln phi` for the one-step doubling bound.
    pub fn ln_doubling_a_prime(&self, r: f64) -> f64 {
        let n = self.dimension.value(r);
        7.0 * n * n * LN_2 + n * self.phi.ln()
    }

    /// Mean-value error term at `rho` for constant dimension `n`:
    /// `62 n^2 ln 2 + n (ln phi + ln Phi) + (q^eta / 2)(ln D_x(rho) + ln M_x(rho))`,
    /// with `eta = floor(log2(rho / (8 ||s_x||_[rho, 2 rho])) / 2)`.
    pub fn ln_mean_value_gamma(&self, x: usize, rho: f64, n: f64, ln_doubling: f64) -> Result<f64> {
        check_dimension(n)?;
        let eta = self.scaled_floor(x, rho, rho, 2.0 * rho, 8.0, "rho >= 8 ||s_x||_[rho,2rho]")?;
        let base = self.ln_degree_factor(x, rho) + self.ln_volume_ratio(x, rho)?;
        let tail = if base == 0.0 { 0.0 } else { 0.5 * int_power(dimension_ratio(n), eta) * base };
        Ok(62.0 * n * n * LN_2 + n * (self.phi.ln() + ln_doubling) + tail)
    }

    /// Volume correction of the most general statement:
    /// `theta^N(r,R) (N(R) ln(r/R) + ln M_x(R))`.
    pub fn ln_general_phi(&self, x: usize, r: f64, big_r: f64) -> Result<f64> {
        let n = self.annulus_dimension(big_r);
        let base = n * (r / big_r).ln() + self.ln_volume_ratio(x, big_r)?;
        if base == 0.0 {
            return Ok(0.0);
        }
        Ok(self.theta(x, r, big_r)? * base)
    }

    /// Heat correction of the most general statement:
    /// `3 N(r) theta^N(r/16, r) (ln D_x(r) + ln M_x(r))`.
    pub fn ln_general_psi(&self, x: usize, r: f64) -> Result<f64> {
        let base = self.ln_degree_factor(x, r) + self.ln_volume_ratio(x, r)?;
        if base == 0.0 {
            return Ok(0.0);
        }
        Ok(3.0 * self.annulus_dimension(r) * self.theta(x, r / 16.0, r)? * base)
    }

    /// `p(r) = 2 / ln(1 + 2 / (N(r) + 2))`.
    pub fn p(&self, r: f64) -> f64 {
        2.0 / (2.0 / (self.annulus_dimension(r) + 2.0)).ln_1p()
    }

    /// Variable Sobolev dimension and constant at `r` around `o`.
    pub fn variable_dimension(&self, o: usize, r: f64, r1: f64) -> Result<VariableDimension> {
        if r < 4.0 * r1 {
            return Err(Error::guard("r >= 4 R1", format!("r = {r}, R1 = {r1}")));
        }
        let p = self.p(r);
        let (r_prime, branch) = inner_radius(r, r1, p);
        self.guards.require(4.0 * r_prime <= r, "4 r' <= r", || format!("r = {r}, r' = {r_prime}"))?;
        let dimension_sup = self.dimension.sup_over(r_prime.min(r) / 4.0, r);
        let eta = self.eta(o, r_prime)?;
        let exponent = 0.5 / (r / r_prime).ln() + 54.0 * dimension_sup * int_power(dimension_ratio(dimension_sup), eta);
        let ball = self.metric.ball(o, r)?;
        let max_degree = self.graph.max_weighted_degree(&ball);
        let dimension = dimension_sup * (exponent * (r * r * max_degree).ln_1p()).max(1.0);
        Ok(VariableDimension {
            r,
            inner_radius: r_prime,
            branch,
            p,
            dimension_sup,
            exponent,
            dimension,
            ln_sobolev_constant: ln_variable_sobolev_constant(dimension_sup, self.phi),
        })
    }

    /// `ln gamma = 19 N ln 2 + 9 ln A + (N/2) ln phi`, the locally regular choice.
    pub fn ln_regular_gamma(&self, dimension_sup: f64, ln_a: f64) -> f64 {
        19.0 * dimension_sup * LN_2 + 9.0 * ln_a + 0.5 * dimension_sup * self.phi.ln()
    }
}

/// One row of a correction profile dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub quantity: String,
    pub x: String,
    pub r: f64,
    pub big_r: Option<f64>,
    pub log_value: f64,
}

/// CSV `(quantity, x, r, R, log_value)`.
pub fn write_profile<W: Write>(rows: &[ProfileRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "x", "r", "R", "log_value"])?;
    for row in rows {
        let big_r = row.big_r.map(|v| format!("{v:?}")).unwrap_or_default();
        w.write_record([row.quantity.clone(), row.x.clone(), format!("{:?}", row.r), big_r, format!("{:?}", row.log_value)])?;
    }
    w.flush()?;
    Ok(())
}
