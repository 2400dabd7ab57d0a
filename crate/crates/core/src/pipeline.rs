//! End-to-end workflows: forward runs derive volume and heat-kernel
//! certificates from a measured Sobolev constant; reverse runs consume those
//! certificates and certify a Sobolev inequality with the resulting constant.
//!
//! All derived constants are carried as natural logarithms.

use std::f64::consts::LN_2;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkers::{
    check_ball_comparison, check_local_regularity, check_on_diagonal, floor_jump_radii, geometric_time_grid, on_diagonal_times,
    Certificate, Condition, ConstantFactor, CountingHeat, CountingVolume, GaussianCheck, GaussianHeat, HeatFactor, MeasuredBall,
    RegularHeat, RegularVolume, SobolevBound, SobolevCheck, VolumeDoublingCheck, VolumeFactor,
};
use crate::corrections::{
    dimension_for_gamma, ln_sobolev_constant_for_gamma, CountingBlock, DimensionFn, GeneralBlock, GuardPolicy, VariableDimension,
};
use crate::error::{Error, Result};
use crate::graph::{load_graph, Family, MeasureKind, MeasureMode, WeightedGraph};
use crate::metric::{verify_intrinsic, EdgeLengths, MetricStructure};
use crate::sobolev::Budget;
use crate::spectral::SpectralDecomposition;

/// Watermark for runs whose hypotheses were bypassed.
pub const NON_THEOREM_REGIME: &str = "non-theorem regime";

/// Which workflow to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    /// Normalizing measure: forward, then reverse on the forward's certificates.
    #[default]
    Normalizing,
    NormalizingForward,
    Counting,
    General,
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipelineKind::Normalizing => "normalizing",
            PipelineKind::NormalizingForward => "normalizing-forward",
            PipelineKind::Counting => "counting",
            PipelineKind::General => "general",
        })
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalizing" => Ok(Self::Normalizing),
            "normalizing-forward" => Ok(Self::NormalizingForward),
            "counting" => Ok(Self::Counting),
            "general" => Ok(Self::General),
            _ => Err(Error::InvalidParameter(format!(
                "unknown pipeline `{s}` (expected normalizing, normalizing-forward, counting or general)"
            ))),
        }
    }
}

/// Edge lengths for the metric.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MetricChoice {
    /// `w(x,y) = (Deg_x v Deg_y)^(-1/2)`.
    #[default]
    Default,
    Combinatorial,
    File(PathBuf),
}

impl FromStr for MetricChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "default" => Self::Default,
            "combinatorial" => Self::Combinatorial,
            "" => return Err(Error::InvalidParameter("empty metric choice".into())),
            path => Self::File(PathBuf::from(path)),
        })
    }
}

impl TryFrom<String> for MetricChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MetricChoice> for String {
    fn from(m: MetricChoice) -> String {
        m.to_string()
    }
}

impl fmt::Display for MetricChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Default => f.write_str("default"),
            Self::Combinatorial => f.write_str("combinatorial"),
            Self::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Vertex set on which forward certificates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CenterSelection {
    /// One center on vertex-transitive families, every vertex up to 64
    /// vertices, otherwise 16 sampled centers.
    #[default]
    Auto,
    All,
    Sample(usize),
}

const AUTO_FULL_LIMIT: usize = 64;
const AUTO_SAMPLE: usize = 16;

impl FromStr for CenterSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "all" => Ok(Self::All),
            _ => s
                .strip_prefix("sample:")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &usize| k > 0)
                .map(Self::Sample)
                .ok_or_else(|| Error::InvalidParameter(format!("center selection `{s}` is not auto, all or sample:K"))),
        }
    }
}

impl TryFrom<String> for CenterSelection {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CenterSelection> for String {
    fn from(c: CenterSelection) -> String {
        match c {
            CenterSelection::Auto => "auto".into(),
            CenterSelection::All => "all".into(),
            CenterSelection::Sample(k) => format!("sample:{k}"),
        }
    }
}

mod dimension_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::corrections::DimensionFn;

    pub fn serialize<S: Serializer>(d: &DimensionFn, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::dimension_label(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DimensionFn, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => DimensionFn::constant(v),
            Raw::Text(t) => DimensionFn::parse(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `3` or `r0:n0,r1:n1,...`, the same text `DimensionFn::parse` accepts.
pub fn dimension_label(d: &DimensionFn) -> String {
    match d {
        DimensionFn::Constant { value } => format!("{value:?}"),
        DimensionFn::Table { starts, values } => {
            starts.iter().zip(values).map(|(r, n)| format!("{r:?}:{n:?}")).collect::<Vec<_>>().join(",")
        }
    }
}

/// Inputs of one pipeline run; the JSON form mirrors the command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pipeline: PipelineKind,
    /// Generator spec such as `cycle_2048`; exclusive with `graph`.
    pub family: Option<Family>,
    /// Graph file in the `graph v1` format.
    pub graph: Option<PathBuf>,
    /// Measure override; a graph file keeps its own measure when absent.
    pub measure: Option<MeasureKind>,
    pub metric: MetricChoice,
    pub r1: f64,
    pub r2: f64,
    #[serde(with = "dimension_text")]
    pub n: DimensionFn,
    /// Sobolev constant; measured and rounded up when absent.
    pub phi: Option<f64>,
    /// Constant `γ` for the reverse general run; the closed-form choice when absent.
    pub gamma: Option<f64>,
    pub tgrid_density: usize,
    pub budget: Budget,
    /// Overrides the optimizer's stationarity tolerance.
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub relaxed_guards: bool,
    pub centers: CenterSelection,
    /// Base point `o` of reverse runs; the first center when absent.
    pub center: Option<String>,
    /// Radii of the measured Sobolev balls; defaults depend on the pipeline.
    pub radii: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineKind::default(),
            family: None,
            graph: None,
            measure: None,
            metric: MetricChoice::Default,
            r1: 1.0,
            r2: 4.0,
            n: DimensionFn::Constant { value: 3.0 },
            phi: None,
            gamma: None,
            tgrid_density: 64,
            budget: Budget { restarts: 8, max_iterations: 1000, tolerance: 1e-10 },
            tolerance: None,
            seed: 0,
            relaxed_guards: false,
            centers: CenterSelection::Auto,
            center: None,
            radii: None,
            out: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn policy(&self) -> GuardPolicy {
        if self.relaxed_guards {
            GuardPolicy::Relaxed
        } else {
            GuardPolicy::Enforce
        }
    }

    fn effective_budget(&self) -> Budget {
        Budget { tolerance: self.tolerance.unwrap_or(self.budget.tolerance), ..self.budget }
    }

    fn constant_dimension(&self) -> Result<f64> {
        match self.n {
            DimensionFn::Constant { value } => Ok(value),
            DimensionFn::Table { .. } => {
                Err(Error::InvalidParameter(format!("the {} pipeline needs a constant dimension", self.pipeline)))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r1 >= 0.0 && self.r1.is_finite() && self.r2.is_finite() && self.r2 >= self.r1) {
            return Err(Error::InvalidInterval { a: self.r1, b: self.r2 });
        }
        if self.tgrid_density == 0 {
            return Err(Error::InvalidParameter("t-grid density must be positive".into()));
        }
        if let Some(phi) = self.phi {
            if !(phi >= 1.0 && phi.is_finite()) {
                return Err(Error::InvalidParameter(format!("phi must be finite and at least 1, got {phi}")));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!("gamma must be positive and finite, got {g}")));
            }
        }
        if let Some(radii) = &self.radii {
            if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
                return Err(Error::InvalidParameter("radii must be a nonempty list of positive numbers".into()));
            }
        }
        Ok(())
    }
}

/// Whether a run stayed inside the hypotheses of the theorem it implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "theorem regime")]
    Theorem,
    #[serde(rename = "non-theorem regime")]
    NonTheorem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub pipeline: String,
    pub graph: String,
    pub vertices: usize,
    pub edges: usize,
    pub measure: MeasureKind,
    pub metric: String,
    pub r1: f64,
    pub r2: f64,
    pub dimension: String,
    pub phi: Option<f64>,
    pub gamma: Option<f64>,
    pub tgrid_density: usize,
    pub budget: Budget,
    pub seed: u64,
    pub relaxed_guards: bool,
    pub regime: Regime,
    /// Guard inequalities that failed and were bypassed.
    pub bypassed_guards: Vec<String>,
}

/// One derived constant, stored as a natural logarithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEntry {
    pub name: String,
    pub vertex: Option<String>,
    pub radius: Option<f64>,
    pub ln_value: f64,
    pub formula: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryStatus {
    Pass,
    Fail,
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassSummary {
    pub status: SummaryStatus,
    pub certificates: usize,
    pub passed: usize,
    pub failed: usize,
    pub min_log_margin: Option<f64>,
}

impl PassSummary {
    fn of(certificates: &[Certificate]) -> Self {
        let passed = certificates.iter().filter(|c| c.pass).count();
        let failed = certificates.len() - passed;
        let status = match (certificates.is_empty(), failed) {
            (true, _) => SummaryStatus::Vacuous,
            (false, 0) => SummaryStatus::Pass,
            _ => SummaryStatus::Fail,
        };
        let min_log_margin = certificates.iter().map(|c| c.min_log_margin).reduce(f64::min);
        Self { status, certificates: certificates.len(), passed, failed, min_log_margin }
    }
}

/// Outcome of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: RunMetadata,
    pub certificates: Vec<Certificate>,
    pub constants: Vec<ConstantEntry>,
    pub notes: Vec<String>,
    pub summary: PassSummary,
}

impl Report {
    /// Report with metadata only; useful as a container for hand-assembled certificates.
    pub fn empty(metadata: RunMetadata) -> Self {
        Self { metadata, certificates: Vec::new(), constants: Vec::new(), notes: Vec::new(), summary: PassSummary::of(&[]) }
    }

    pub fn certificate(&self, condition: Condition) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.condition == condition)
    }

    pub fn constant<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ConstantEntry> + 'a {
        self.constants.iter().filter(move |c| c.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.summary.status != SummaryStatus::Fail
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Appends a later stage of the same run.
    pub fn absorb(&mut self, later: Report) {
        self.certificates.extend(later.certificates);
        self.constants.extend(later.constants);
        self.notes.extend(later.notes);
        for g in later.metadata.bypassed_guards {
            if !self.metadata.bypassed_guards.contains(&g) {
                self.metadata.bypassed_guards.push(g);
            }
        }
        if later.metadata.regime == Regime::NonTheorem {
            self.metadata.regime = Regime::NonTheorem;
        }
        self.summary = PassSummary::of(&self.certificates);
    }
}

/// Hypothesis checks made before any computation.
struct GuardLog {
    policy: GuardPolicy,
    bypassed: Vec<String>,
}

impl GuardLog {
    fn new(policy: GuardPolicy) -> Self {
        Self { policy, bypassed: Vec::new() }
    }

    fn require(&mut self, holds: bool, inequality: &str, detail: impl FnOnce() -> String) -> Result<()> {
        if holds {
            return Ok(());
        }
        match self.policy {
            GuardPolicy::Enforce => Err(Error::guard(inequality, detail())),
            GuardPolicy::Relaxed => {
                let entry = format!("{inequality} ({})", detail());
                if !self.bypassed.contains(&entry) {
                    self.bypassed.push(entry);
                }
                Ok(())
            }
        }
    }
}

/// Loaded graph, metric and bookkeeping shared by every stage.
struct Setup {
    graph: WeightedGraph,
    metric: MetricStructure,
    label: String,
    transitive: bool,
}

fn load_setup(config: &PipelineConfig, metric_override: Option<MetricChoice>) -> Result<Setup> {
    config.validate()?;
    let mode = |kind: MeasureKind| match kind {
        MeasureKind::Normalizing => Ok(MeasureMode::Normalizing),
        MeasureKind::Counting => Ok(MeasureMode::Counting),
        MeasureKind::Custom => Err(Error::InvalidParameter("a custom measure must come from a graph file's vertex lines".into())),
    };
    let (graph, label, family) = match (&config.family, &config.graph) {
        (Some(f), None) => (f.generate(mode(config.measure.unwrap_or(MeasureKind::Counting))?)?, f.to_string(), Some(*f)),
        (None, Some(path)) => {
            let g = load_graph(path)?;
            let g = match config.measure {
                Some(kind) if kind != g.measure_kind() && kind != MeasureKind::Custom => g.with_measure(mode(kind)?)?,
                _ => g,
            };
            (g, path.display().to_string(), None)
        }
        _ => return Err(Error::InvalidParameter("exactly one of `family` and `graph` must be given".into())),
    };
    let choice = metric_override.unwrap_or_else(|| config.metric.clone());
    let metric = match &choice {
        MetricChoice::Default => MetricStructure::intrinsic(&graph)?,
        MetricChoice::Combinatorial => MetricStructure::combinatorial(&graph)?,
        MetricChoice::File(path) => MetricStructure::new(&graph, EdgeLengths::parse(&graph, &std::fs::read_to_string(path)?)?)?,
    };
    // Cycles are vertex-transitive for both generated measures.
    let transitive = matches!(family, Some(Family::Cycle(_))) && graph.measure_kind() != MeasureKind::Custom;
    Ok(Setup { graph, metric, label, transitive })
}

impl Setup {
    fn metadata(&self, config: &PipelineConfig, pipeline: &str, metric: &str, guards: &GuardLog) -> RunMetadata {
        RunMetadata {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            pipeline: pipeline.into(),
            graph: self.label.clone(),
            vertices: self.graph.len(),
            edges: self.graph.edge_count(),
            measure: self.graph.measure_kind(),
            metric: metric.into(),
            r1: config.r1,
            r2: config.r2,
            dimension: dimension_label(&config.n),
            phi: config.phi,
            gamma: config.gamma,
            tgrid_density: config.tgrid_density,
            budget: config.effective_budget(),
            seed: config.seed,
            relaxed_guards: config.relaxed_guards,
            regime: if guards.bypassed.is_empty() { Regime::Theorem } else { Regime::NonTheorem },
            bypassed_guards: guards.bypassed.clone(),
        }
    }

    /// Centers plus a note describing the choice.
    fn centers(&self, selection: CenterSelection, seed: u64) -> (Vec<usize>, bool, String) {
        let n = self.graph.len();
        let sample = |k: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = rand::seq::index::sample(&mut rng, n, k.min(n)).into_vec();
            v.sort_unstable();
            v
        };
        match selection {
            CenterSelection::Auto if self.transitive => {
                (vec![0], true, format!("vertex-transitive family: one center (`{}`) stands for every vertex", self.graph.id(0)))
            }
            CenterSelection::All => ((0..n).collect(), false, format!("all {n} vertices are centers")),
            CenterSelection::Auto if n <= AUTO_FULL_LIMIT => ((0..n).collect(), false, format!("all {n} vertices are centers")),
            CenterSelection::Auto => {
                let v = sample(AUTO_SAMPLE);
                let note = format!("{} of {n} vertices sampled as centers (seed {seed})", v.len());
                (v, false, note)
            }
            CenterSelection::Sample(k) => {
                let v = sample(k);
                let note = format!("{} of {n} vertices sampled as centers (seed {seed})", v.len());
                (v, false, note)
            }
        }
    }

    /// Heat-kernel targets: every vertex when centers stand for all of them, else the centers.
    fn targets(&self, centers: &[usize], transitive: bool) -> Vec<usize> {
        if transitive {
            (0..self.graph.len()).collect()
        } else {
            centers.to_vec()
        }
    }

    fn base_point(&self, config: &PipelineConfig, centers: &[usize]) -> Result<usize> {
        match &config.center {
            Some(id) => self.graph.index_of(id),
            None => Ok(centers[0]),
        }
    }
}

/// `k` radii spaced geometrically over `[a, b]`, both ends included.
fn geometric_radii(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k <= 1 || a >= b || a <= 0.0 {
        return vec![b];
    }
    let octaves = (b / a).log2();
    (0..k).map(|i| if i + 1 == k { b } else { a * (octaves * i as f64 / (k - 1) as f64).exp2() }).collect()
}

fn sample_radii(config: &PipelineConfig, a: f64, b: f64, k: usize) -> Vec<f64> {
    config.radii.clone().unwrap_or_else(|| geometric_radii(a.max(f64::MIN_POSITIVE), b, k))
}

fn constant(name: &str, vertex: Option<&str>, radius: Option<f64>, ln_value: f64, formula: &str) -> ConstantEntry {
    ConstantEntry { name: name.into(), vertex: vertex.map(str::to_string), radius, ln_value, formula: formula.into() }
}

/// Measured `φ*` on the sampled balls and the constant used downstream.
struct SobolevMeasurement {
    measured: Vec<MeasuredBall>,
    ln_phi: f64,
    phi: f64,
}

fn measure_sobolev(
    setup: &Setup,
    config: &PipelineConfig,
    centers: &[usize],
    radii: &[f64],
    n: f64,
    constants: &mut Vec<ConstantEntry>,
) -> Result<SobolevMeasurement> {
    let probe = SobolevCheck {
        graph: &setup.graph,
        metric: &setup.metric,
        centers: centers.to_vec(),
        radii: radii.to_vec(),
        bound: SobolevBound::constant(n, 0.0),
        budget: config.effective_budget(),
        seed: config.seed,
    };
    let measured = probe.measure()?;
    for b in &measured {
        constants.push(constant(
            "phi_star",
            Some(setup.graph.id(b.center)),
            Some(b.radius),
            b.ln_phi_star,
            "optimizer lower bound on the optimal Sobolev constant of the ball",
        ));
    }
    let phi = match config.phi {
        Some(phi) => phi,
        None => {
            let max = measured.iter().map(|b| b.ln_phi_star).fold(f64::NEG_INFINITY, f64::max).exp();
            max.ceil().max(1.0)
        }
    };
    let formula = if config.phi.is_some() { "supplied" } else { "max(1, ceil(max phi_star))" };
    constants.push(constant("phi", None, None, phi.ln(), formula));
    Ok(SobolevMeasurement { measured, ln_phi: phi.ln(), phi })
}

fn sobolev_certificate(
    setup: &Setup,
    config: &PipelineConfig,
    centers: &[usize],
    radii: &[f64],
    n: f64,
    m: &SobolevMeasurement,
) -> Result<Certificate> {
    SobolevCheck {
        graph: &setup.graph,
        metric: &setup.metric,
        centers: centers.to_vec(),
        radii: radii.to_vec(),
        bound: SobolevBound::constant(n, m.ln_phi),
        budget: config.effective_budget(),
        seed: config.seed,
    }
    .certify(&m.measured)
}

fn time_grid(config: &PipelineConfig, heat_r1: f64) -> Result<Vec<f64>> {
    let t_min = (heat_r1 * heat_r1).max(1e-6);
    geometric_time_grid(t_min, (4.0 * config.r2 * config.r2).max(t_min), config.tgrid_density)
}

/// Relaxed runs also watermark certificates whose evaluations bypassed an internal guard.
fn finish(mut report: Report) -> Report {
    if report.certificates.iter().any(|c| c.flags.iter().any(|f| f == "relaxed-guard")) {
        report.metadata.regime = Regime::NonTheorem;
    }
    if report.metadata.regime == Regime::NonTheorem && !report.notes.iter().any(|n| n.contains(NON_THEOREM_REGIME)) {
        report
            .notes
            .insert(0, format!("{NON_THEOREM_REGIME}: hypotheses were relaxed; certificates do not instantiate the theorem"));
    }
    report.summary = PassSummary::of(&report.certificates);
    report
}

fn volume_certificate(
    setup: &Setup,
    centers: &[usize],
    factor: &dyn VolumeFactor,
    r1: f64,
    r2: f64,
    transitive: bool,
) -> Result<Certificate> {
    VolumeDoublingCheck { graph: &setup.graph, metric: &setup.metric, centers: centers.to_vec(), factor, r1, r2, transitive }
        .run()
}

#[allow(clippy::too_many_arguments)]
fn gaussian_certificate(
    setup: &Setup,
    dec: &SpectralDecomposition,
    centers: &[usize],
    targets: &[usize],
    factor: &dyn HeatFactor,
    r1: f64,
    r2: f64,
    config: &PipelineConfig,
) -> Result<Certificate> {
    GaussianCheck {
        graph: &setup.graph,
        dec,
        metric: &setup.metric,
        centers: centers.to_vec(),
        targets: targets.to_vec(),
        factor,
        r1,
        r2,
        times: time_grid(config, r1)?,
        per_decade: config.tgrid_density,
    }
    .run()
}

/// `ln Φ = 10 n^2 ln 2 + 2 n ln φ` for the normalized volume doubling.
pub fn ln_normalized_doubling(n: f64, phi: f64) -> f64 {
    10.0 * n * n * LN_2 + 2.0 * n * phi.ln()
}

/// `ln φ(r) = (44 + 2n/(n-2)) ln 2 + (2/n) max(10 ln Ψ + 10 ln Φ, n ln R1 + ln m(B_o(r)) - n ln r + ln ||1/m||_{B_o(r)})`.
pub fn ln_normalized_sobolev(n: f64, ln_psi: f64, ln_doubling: f64, r1: f64, r: f64, ball_measure: f64, max_inverse: f64) -> f64 {
    let volume = n * r1.ln() + ball_measure.ln() - n * r.ln() + max_inverse.ln();
    (44.0 + 2.0 * n / (n - 2.0)) * LN_2 + 2.0 / n * (10.0 * ln_psi + 10.0 * ln_doubling).max(volume)
}

fn check_diameter(guards: &mut GuardLog, metric: &MetricStructure, r2: f64) -> Result<()> {
    let diam = metric.diameter();
    guards.require(r2 <= diam / 2.0, "R2 <= diam/2", || format!("R2 = {r2}, diam = {diam}"))
}

/// Forward normalizing run: measured `φ` gives `V_Φ` with `Φ = 2^(10n^2) φ^(2n)`
/// on `[R1, R2]` and the Sobolev-derived Gaussian bound on `[4 R1, R2]`.
pub fn run_forward_normalizing(config: &PipelineConfig) -> Result<Report> {
    if config.measure.is_some_and(|m| m != MeasureKind::Normalizing) {
        return Err(Error::InvalidParameter("the normalizing pipeline needs the normalizing measure".into()));
    }
    if matches!(config.metric, MetricChoice::File(_)) {
        return Err(Error::InvalidParameter("the normalizing pipeline uses the combinatorial metric".into()));
    }
    let mut cfg = config.clone();
    cfg.measure = Some(MeasureKind::Normalizing);
    let config = &cfg;
    let n = config.constant_dimension()?;
    let (r1, r2) = (config.r1, config.r2);
    let mut guards = GuardLog::new(config.policy());
    guards.require(r2 >= 8.0 * r1, "R2 >= 8 R1", || format!("R1 = {r1}, R2 = {r2}"))?;
    guards.require(8.0 * r1 >= 512.0, "8 R1 >= 512", || format!("R1 = {r1}"))?;
    let setup = load_setup(config, Some(MetricChoice::Combinatorial))?;
    check_diameter(&mut guards, &setup.metric, r2)?;

    let (centers, transitive, center_note) = setup.centers(config.centers, config.seed);
    let mut constants = Vec::new();
    let mut notes = vec![center_note];
    let radii = sample_radii(config, r1, r2, 4);
    let sob = measure_sobolev(&setup, config, &centers, &radii, n, &mut constants)?;
    let s_cert = sobolev_certificate(&setup, config, &centers, &radii, n, &sob)?;

    let ln_doubling = ln_normalized_doubling(n, sob.phi);
    constants.push(constant("Phi", None, None, ln_doubling, "2^(10 n^2) phi^(2 n)"));
    let v_factor = ConstantFactor::new(ln_doubling, n);
    let v_cert = volume_certificate(&setup, &centers, &v_factor, r1, r2, transitive)?;

    let dec = SpectralDecomposition::new(&setup.graph)?;
    notes
        .push(format!("bottom of the spectrum {:e}; the exponential tail factor is evaluated with max(bottom, 0)", dec.bottom()));
    let block = GeneralBlock::new(&setup.graph, &setup.metric, &config.n, sob.phi, config.policy())?;
    let g_factor = GaussianHeat { block: &block };
    let targets = setup.targets(&centers, transitive);
    let g_cert = gaussian_certificate(&setup, &dec, &centers, &targets, &g_factor, 4.0 * r1, r2, config)?;
    constants.push(constant("A_prime", None, None, block.ln_a_prime(r2), "2^(41 n^3) phi^(2 n^2)"));
    if let Some(v) = g_cert.param_f64("ln_factor_max") {
        constants.push(constant("Psi", None, None, v, "sup of A' Psi_z(tau) over the evaluated (z, tau)"));
    }

    let metadata = setup.metadata(config, "normalizing-forward", "combinatorial", &guards);
    Ok(finish(Report { metadata, certificates: vec![s_cert, v_cert, g_cert], constants, notes, summary: PassSummary::of(&[]) }))
}

/// Centers recorded by a certificate, or `None` when it stands for every vertex.
fn certified_vertices(cert: &Certificate) -> Option<Vec<String>> {
    if cert.params.get("transitive").and_then(|v| v.as_bool()).unwrap_or(false) {
        return None;
    }
    let list = cert.params.get("centers")?.as_array()?;
    Some(list.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
}

fn find_hypothesis(hypotheses: &[Certificate], condition: Condition) -> Result<&Certificate> {
    let cert = hypotheses
        .iter()
        .find(|c| c.condition == condition)
        .ok_or_else(|| Error::MissingHypothesis(format!("no {condition} certificate was supplied")))?;
    cert.require(condition)?;
    Ok(cert)
}

/// Reverse normalizing run on certified `V_Φ` and `G_Ψ`: forms `φ(r)` and
/// asserts measured `φ*(n, r) <= φ(r)` on sampled balls `B_o(r)`, `r` in `[4 R1, R2]`.
pub fn run_reverse_normalizing(config: &PipelineConfig, hypotheses: &[Certificate]) -> Result<Report> {
    let v_cert = find_hypothesis(hypotheses, Condition::V)?;
    let g_cert = find_hypothesis(hypotheses, Condition::G)?;
    let mut cfg = config.clone();
    cfg.measure = Some(MeasureKind::Normalizing);
    let config = &cfg;
    let n = config.constant_dimension()?;
    let (r1, r2) = (config.r1, config.r2);
    let tol = 1e-12 * r2.max(1.0);
    let mut guards = GuardLog::new(config.policy());
    guards.require(r2 >= 8.0 * r1, "R2 >= 8 R1", || format!("R1 = {r1}, R2 = {r2}"))?;
    guards.require(8.0 * r1 >= 512.0, "8 R1 >= 512", || format!("R1 = {r1}"))?;

    let ln_doubling =
        v_cert.param_f64("ln_factor").ok_or_else(|| Error::MissingHypothesis("V certificate lacks a constant factor".into()))?;
    let v_ok = v_cert.param_f64("dimension").is_some_and(|d| d <= n + 1e-12)
        && v_cert.param_f64("r1").is_some_and(|a| a <= r1 + tol)
        && v_cert.param_f64("r2").is_some_and(|b| b >= r2 - tol);
    if !v_ok {
        return Err(Error::MissingHypothesis(format!("V certificate does not cover (n = {n}, [{r1}, {r2}])")));
    }
    let ln_psi = g_cert
        .param_f64("ln_factor_max")
        .ok_or_else(|| Error::MissingHypothesis("G certificate lacks its factor supremum".into()))?;
    let g_ok =
        g_cert.param_f64("r1").is_some_and(|a| a <= 4.0 * r1 + tol) && g_cert.param_f64("r2").is_some_and(|b| b >= r2 - tol);
    if !g_ok {
        return Err(Error::MissingHypothesis(format!("G certificate does not cover [{}, {r2}]", 4.0 * r1)));
    }

    let setup = load_setup(config, Some(MetricChoice::Combinatorial))?;
    check_diameter(&mut guards, &setup.metric, r2)?;
    let (centers, _, _) = setup.centers(config.centers, config.seed);
    let o = setup.base_point(config, &centers)?;
    let ball = setup.metric.ball(o, r2)?;
    if let Some(list) = certified_vertices(v_cert) {
        if let Some(&x) = ball.iter().find(|&&x| !list.iter().any(|id| id == setup.graph.id(x))) {
            return Err(Error::MissingHypothesis(format!("V not certified at `{}` in B_o(R2)", setup.graph.id(x))));
        }
    }
    if g_cert.params.get("targets").and_then(|v| v.as_u64()).is_some_and(|t| (t as usize) < setup.graph.len())
        && g_cert.param_f64("centers").is_some_and(|c| (c as usize) < ball.len())
    {
        return Err(Error::MissingHypothesis("G certificate does not cover every pair in B_o(R2)".into()));
    }

    let mut constants = Vec::new();
    let mu = (0..setup.graph.len())
        .map(|x| Ok(setup.metric.ball_measure(x, r1)? / setup.graph.degree(x)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if !mu.is_finite() {
        return Err(Error::MissingHypothesis(format!("mu = {mu} is not finite")));
    }
    constants.push(constant("mu", None, Some(r1), mu.ln(), "sup_x m(B_x(R1)) / deg(x)"));
    constants.push(constant("Phi", None, None, ln_doubling, "from the V certificate"));
    constants.push(constant("Psi", None, None, ln_psi, "from the G certificate"));

    let radii = sample_radii(config, 4.0 * r1, r2, 3);
    if let Some(&r) = radii.iter().find(|&&r| r < 4.0 * r1 - tol || r > r2 + tol) {
        return Err(Error::InvalidParameter(format!("sampled radius {r} lies outside [4 R1, R2]")));
    }
    let mut table = Vec::new();
    for &r in &radii {
        let b = setup.metric.ball(o, r)?;
        let v = ln_normalized_sobolev(
            n,
            ln_psi,
            ln_doubling,
            r1,
            r,
            setup.metric.ball_measure(o, r)?,
            setup.graph.max_inverse_measure(&b),
        );
        constants.push(constant(
            "phi_reverse",
            Some(setup.graph.id(o)),
            Some(r),
            v,
            "2^(44+2n/(n-2)) (Psi^10 Phi^10 v R1^n m(B_o(r)) r^-n ||1/m||_B_o(r))^(2/n)",
        ));
        table.push((r, v));
    }
    let bound = SobolevBound::new("reverse normalizing phi(r)", move |_, r| {
        table
            .iter()
            .find(|(s, _)| *s == r)
            .map(|&(_, v)| (n, v))
            .ok_or_else(|| Error::InvalidParameter(format!("no reverse constant at r = {r}")))
    });
    let s_cert = SobolevCheck {
        graph: &setup.graph,
        metric: &setup.metric,
        centers: vec![o],
        radii: radii.clone(),
        bound,
        budget: config.effective_budget(),
        seed: config.seed,
    }
    .run()?;
    let mut certificates = vec![s_cert];
    let mut notes = vec![format!("reverse base point `{}`", setup.graph.id(o))];
    for &r in &radii {
        match check_ball_comparison(&setup.graph, &setup.metric, o, r, n, ln_doubling, v_cert) {
            Ok(c) => certificates.push(c),
            Err(e @ (Error::Guard { .. } | Error::MissingHypothesis(_))) => {
                notes.push(format!("ball comparison at r = {r} skipped: {e}"))
            }
            Err(e) => return Err(e),
        }
    }
    let metadata = setup.metadata(config, "normalizing-reverse", "combinatorial", &guards);
    Ok(finish(Report { metadata, certificates, constants, notes, summary: PassSummary::of(&[]) }))
}

/// Forward then reverse normalizing run; the reverse stage is skipped when a forward certificate fails.
pub fn run_normalizing(config: &PipelineConfig) -> Result<Report> {
    let mut report = run_forward_normalizing(config)?;
    if report.all_pass() {
        let reverse = run_reverse_normalizing(config, &report.certificates)?;
        report.absorb(reverse);
        report.metadata.pipeline = "normalizing".into();
    } else {
        report.notes.push("reverse stage skipped: a forward certificate failed".into());
    }
    Ok(finish(report))
}

fn metric_label(config: &PipelineConfig) -> String {
    match &config.metric {
        MetricChoice::Default => "intrinsic".into(),
        other => other.to_string(),
    }
}

fn require_intrinsic(setup: &Setup, config: &PipelineConfig) -> Result<()> {
    if config.metric != MetricChoice::Default {
        let report = verify_intrinsic(&setup.graph, setup.metric.table())?;
        if !report.pass {
            return Err(Error::InvalidParameter(format!(
                "metric is not intrinsic at `{}` (slack {})",
                report.worst_vertex, report.worst_slack
            )));
        }
    }
    Ok(())
}

/// Reverse Sobolev certificate for a table of `(r, n'(r), ln φ'(r))` at `o`.
fn variable_sobolev_certificate(
    setup: &Setup,
    config: &PipelineConfig,
    o: usize,
    table: Vec<(f64, f64, f64)>,
    description: &str,
) -> Result<Certificate> {
    let radii: Vec<f64> = table.iter().map(|t| t.0).collect();
    let bound = SobolevBound::new(description, move |_, r| {
        table
            .iter()
            .find(|t| t.0 == r)
            .map(|t| (t.1, t.2))
            .ok_or_else(|| Error::InvalidParameter(format!("no reverse constant at r = {r}")))
    });
    SobolevCheck {
        graph: &setup.graph,
        metric: &setup.metric,
        centers: vec![o],
        radii,
        bound,
        budget: config.effective_budget(),
        seed: config.seed,
    }
    .run()
}

fn push_variable_dimension(constants: &mut Vec<ConstantEntry>, id: &str, vd: &VariableDimension) {
    let r = Some(vd.r);
    constants.push(constant("r_inner", Some(id), r, vd.inner_radius.ln(), "r/4 or (ln r)^p / 4"));
    constants.push(constant("p", Some(id), r, vd.p.ln(), "2 / ln((N+4)/(N+2))"));
    constants.push(constant("nu", Some(id), r, vd.exponent.ln(), "1/(2 ln(r/r')) + 54 N theta(r')"));
    constants.push(constant("n_prime", Some(id), r, vd.dimension.ln(), "N (1 v nu ln(1 + r^2 ||Deg||_B_o(r)))"));
    constants.push(constant("phi_prime", Some(id), r, vd.ln_sobolev_constant, "2^(796 N^2 + 2N/(N-2)) phi^(145 N)"));
}

/// Counting-measure run: forward `L`, `V_{AΦ}`, `G_{AΨ}` from the measured `φ`,
/// then (when all pass) the variable-dimension Sobolev certificate at `o`.
pub fn run_counting(config: &PipelineConfig) -> Result<Report> {
    if config.measure.is_some_and(|m| m != MeasureKind::Counting) {
        return Err(Error::InvalidParameter("the counting pipeline needs the counting measure".into()));
    }
    let mut cfg = config.clone();
    cfg.measure = Some(MeasureKind::Counting);
    let config = &cfg;
    let n = config.constant_dimension()?;
    let (r1, r2) = (config.r1, config.r2);
    let setup = load_setup(config, None)?;
    require_intrinsic(&setup, config)?;
    let jump = setup.metric.global_jump();
    let mut guards = GuardLog::new(config.policy());
    guards.require(r2 >= 16.0 * r1, "R2 >= 16 R1", || format!("R1 = {r1}, R2 = {r2}"))?;
    guards.require(16.0 * r1 >= 2048.0 * jump, "16 R1 >= 2048 S", || format!("R1 = {r1}, S = {jump}"))?;
    check_diameter(&mut guards, &setup.metric, r2)?;

    let (centers, transitive, center_note) = setup.centers(config.centers, config.seed);
    let mut notes = vec![center_note, format!("global jump size S = {jump:?}")];
    let mut constants = Vec::new();
    let radii = sample_radii(config, r1.max(jump), r2, 3);
    let sob = measure_sobolev(&setup, config, &centers, &radii, n, &mut constants)?;
    let s_cert = sobolev_certificate(&setup, config, &centers, &radii, n, &sob)?;
    let block = CountingBlock::new(n, jump, sob.phi, config.policy())?;
    constants.push(constant("A", None, None, block.ln_a(), "2^(43 n^3) phi^(8 n^2)"));

    let l_cert = check_local_regularity(&setup.graph, &setup.metric, &centers, &config.n, sob.phi, r1, r2)?;
    let v_factor = CountingVolume { block: &block, graph: &setup.graph, jump };
    let v_cert = volume_certificate(&setup, &centers, &v_factor, r1, r2, transitive)?;
    let dec = SpectralDecomposition::new(&setup.graph)?;
    let g_factor = CountingHeat { block: &block, graph: &setup.graph };
    let targets = setup.targets(&centers, transitive);
    let g_cert = gaussian_certificate(&setup, &dec, &centers, &targets, &g_factor, 4.0 * r1, r2, config)?;
    let mut certificates = vec![s_cert, l_cert, v_cert, g_cert];

    if certificates.iter().all(|c| c.pass) {
        let o = setup.base_point(config, &centers)?;
        let id = setup.graph.id(o).to_string();
        let mut table = Vec::new();
        for r in sample_radii(config, 4.0 * r1, r2, 3) {
            let ball = setup.metric.ball(o, r)?;
            let vd = block.variable_dimension(r, r1, setup.graph.max_weighted_degree(&ball))?;
            push_variable_dimension(&mut constants, &id, &vd);
            table.push((r, vd.dimension, vd.ln_sobolev_constant));
        }
        certificates.push(variable_sobolev_certificate(&setup, config, o, table, "counting n'(r), phi'")?);
        notes.push(format!("reverse base point `{id}`"));
    } else {
        notes.push("reverse stage skipped: a forward certificate failed".into());
    }
    let metadata = setup.metadata(config, "counting", &metric_label(config), &guards);
    Ok(finish(Report { metadata, certificates, constants, notes, summary: PassSummary::of(&[]) }))
}

/// Forward jump guard `1024 s_x(r) <= r` for `x` in `B`, `r` in `[4 R1, R2]`.
fn forward_jump_guard(
    guards: &mut GuardLog,
    metric: &MetricStructure,
    graph: &WeightedGraph,
    centers: &[usize],
    r1: f64,
    r2: f64,
) -> Result<()> {
    let lo = 4.0 * r1;
    if lo > r2 {
        return Ok(());
    }
    for &x in centers {
        let mut candidates = vec![lo];
        candidates.extend_from_slice(metric.breakpoints_in(x, lo, r2));
        for r in candidates {
            let s = metric.jump_size(x, r)?;
            guards.require(1024.0 * s <= r, "1024 s_x(r) <= r", || format!("x = {}, r = {r}, s = {s}", graph.id(x)))?;
        }
    }
    Ok(())
}

/// `ln` of the suprema of `A Ψ` and `A Φ^r` over `B_o(r) x [r', r]`, by
/// evaluating both ends and every piece boundary with its left limit.
fn cylinder_suprema(block: &GeneralBlock<'_>, metric: &MetricStructure, o: usize, r_inner: f64, r: f64) -> Result<(f64, f64)> {
    let mut cuts = vec![r_inner, r];
    for e in block.dimension_fn().events() {
        cuts.extend([*e, 4.0 * e]);
    }
    let (mut psi, mut phi) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for x in metric.ball(o, r)? {
        let mut points = cuts.clone();
        for &bp in metric.breakpoints(x) {
            points.extend([bp, 2.0 * bp, 16.0 * bp, 32.0 * bp]);
        }
        points.extend(floor_jump_radii(metric, x, r_inner, r, 2.0, 0.5, 1.0));
        points.extend(floor_jump_radii(metric, x, r_inner / 16.0, r / 16.0, 2.0, 0.5, 1.0).into_iter().map(|j| 16.0 * j));
        let mut expanded: Vec<f64> = points.iter().flat_map(|&p| [p, p * (1.0 - 1e-12)]).collect();
        expanded.retain(|&p| p >= r_inner && p <= r);
        expanded.sort_by(f64::total_cmp);
        expanded.dedup();
        for rho in expanded {
            psi = psi.max(block.ln_a(rho) + block.ln_psi(x, rho)?);
            phi = phi.max(block.ln_a(r) + block.ln_phi(x, rho, r)?);
        }
    }
    Ok((psi, phi))
}

/// General run: forward `L_φ`, `V_{AΦ}`, `G_{AΨ}` with locally regular
/// corrections, then the variable-dimension Sobolev certificate at `o`.
pub fn run_general(config: &PipelineConfig) -> Result<Report> {
    let (r1, r2) = (config.r1, config.r2);
    let setup = load_setup(config, None)?;
    require_intrinsic(&setup, config)?;
    let mut guards = GuardLog::new(config.policy());
    guards.require(r2 >= 4.0 * r1, "R2 >= 4 R1", || format!("R1 = {r1}, R2 = {r2}"))?;
    check_diameter(&mut guards, &setup.metric, r2)?;
    let (centers, transitive, center_note) = setup.centers(config.centers, config.seed);
    forward_jump_guard(&mut guards, &setup.metric, &setup.graph, &centers, r1, r2)?;

    let mut notes = vec![center_note];
    let mut constants = Vec::new();
    let radii = sample_radii(config, r1.max(setup.metric.global_jump()).min(r2), r2, 3);
    let s_dimension = config.n.max_value();
    let sob = measure_sobolev(&setup, config, &centers, &radii, s_dimension, &mut constants)?;
    let s_cert = sobolev_certificate(&setup, config, &centers, &radii, s_dimension, &sob)?;
    let block = GeneralBlock::new(&setup.graph, &setup.metric, &config.n, sob.phi, config.policy())?;
    constants.push(constant("A", None, Some(r2), block.ln_a(r2), "2^(43 N^3) phi^(8 N^2)"));

    let l_cert = check_local_regularity(&setup.graph, &setup.metric, &centers, &config.n, sob.phi, r1, r2)?;
    let v_factor = RegularVolume { block: &block, metric: &setup.metric };
    let v_cert = volume_certificate(&setup, &centers, &v_factor, r1, r2, transitive)?;
    let dec = SpectralDecomposition::new(&setup.graph)?;
    let g_factor = RegularHeat { block: &block };
    let targets = setup.targets(&centers, transitive);
    let g_cert = gaussian_certificate(&setup, &dec, &centers, &targets, &g_factor, 4.0 * r1, r2, config)?;
    let mut certificates = vec![s_cert, l_cert, v_cert, g_cert];

    if certificates.iter().all(|c| c.pass) {
        let o = setup.base_point(config, &centers)?;
        let id = setup.graph.id(o).to_string();
        let mut table = Vec::new();
        for r in sample_radii(config, 4.0 * r1, r2, 3) {
            let jump = setup.metric.ball_jump_sup(o, r, r / 4.0)?;
            guards.require(2.0 * jump <= r / 4.0, "2 ||s(r/4)||_B_o(r) <= r/4", || format!("r = {r}, jump = {jump}"))?;
            let vd = block.variable_dimension(o, r, r1)?;
            let (n_r, ln_phi_r) = match config.gamma {
                None => {
                    push_variable_dimension(&mut constants, &id, &vd);
                    (vd.dimension, vd.ln_sobolev_constant)
                }
                Some(gamma) => {
                    let (ln_psi, ln_phi) = cylinder_suprema(&block, &setup.metric, o, vd.inner_radius, r)?;
                    let ball = setup.metric.ball(o, r)?;
                    let ln_volume = setup.metric.ball_measure(o, r)?.ln() + setup.graph.max_inverse_measure(&ball).ln();
                    let d = vd.dimension_sup;
                    let n_gamma =
                        dimension_for_gamma(d, 10.0 * (ln_psi + ln_phi), ln_volume, gamma.ln(), (r / vd.inner_radius).ln());
                    let ln_phi_gamma = ln_sobolev_constant_for_gamma(d, gamma.ln());
                    let rr = Some(r);
                    constants.push(constant("r_inner", Some(&id), rr, vd.inner_radius.ln(), "r/4 or (ln r)^p / 4"));
                    constants.push(constant("A_Psi_sup", Some(&id), rr, ln_psi, "sup of A Psi over B_o(r) x [r', r]"));
                    constants.push(constant("A_Phi_sup", Some(&id), rr, ln_phi, "sup of A Phi^r over B_o(r) x [r', r]"));
                    constants.push(constant(
                        "n_gamma",
                        Some(&id),
                        rr,
                        n_gamma.ln(),
                        "D v ln(1 v T1/gamma v (T2/gamma)^(1/ln(r/r')))",
                    ));
                    constants.push(constant("phi_gamma", Some(&id), rr, ln_phi_gamma, "2^(49 + 2D/(D-2)) gamma^(2/D)"));
                    (n_gamma, ln_phi_gamma)
                }
            };
            table.push((r, n_r, ln_phi_r));
        }
        let description = if config.gamma.is_some() { "explicit gamma n(r), phi(r)" } else { "general n'(r), phi'(r)" };
        certificates.push(variable_sobolev_certificate(&setup, config, o, table, description)?);
        notes.push(format!("reverse base point `{id}`"));
    } else {
        notes.push("reverse stage skipped: a forward certificate failed".into());
    }
    let metadata = setup.metadata(config, "general", &metric_label(config), &guards);
    Ok(finish(Report { metadata, certificates, constants, notes, summary: PassSummary::of(&[]) }))
}

/// Single condition evaluated by [`run_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckKind {
    /// `φ* <= φ` on balls at the centers, radii sampled in `[R1, R2]`.
    S,
    /// Local regularity with `(n, φ)`.
    L,
    /// Volume doubling with `Φ = 2^(10 n^2) φ^(2 n)`.
    V,
    /// Gaussian bound with the Sobolev-derived factor for `(n, φ)`.
    G,
    /// On-diagonal bound with the same factor.
    O,
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" | "s" => Ok(Self::S),
            "L" | "l" => Ok(Self::L),
            "V" | "v" => Ok(Self::V),
            "G" | "g" => Ok(Self::G),
            "O" | "o" => Ok(Self::O),
            _ => Err(Error::InvalidParameter(format!("unknown condition `{s}` (expected S, L, V, G or O)"))),
        }
    }
}

/// Evaluates one condition with the supplied `(n, φ)` on `[R1, R2]`.
pub fn run_check(config: &PipelineConfig, kind: CheckKind) -> Result<Report> {
    let phi = config.phi.ok_or_else(|| Error::InvalidParameter("a check needs an explicit phi".into()))?;
    let (r1, r2) = (config.r1, config.r2);
    let setup = load_setup(config, None)?;
    let guards = GuardLog::new(config.policy());
    let (centers, transitive, note) = setup.centers(config.centers, config.seed);
    let n_max = config.n.max_value();
    let block = || GeneralBlock::new(&setup.graph, &setup.metric, &config.n, phi, config.policy());
    let cert = match kind {
        CheckKind::S => SobolevCheck {
            graph: &setup.graph,
            metric: &setup.metric,
            centers: centers.clone(),
            radii: sample_radii(config, r1, r2, 3),
            bound: SobolevBound::constant(n_max, phi.ln()),
            budget: config.effective_budget(),
            seed: config.seed,
        }
        .run()?,
        CheckKind::L => check_local_regularity(&setup.graph, &setup.metric, &centers, &config.n, phi, r1, r2)?,
        CheckKind::V => {
            let factor = ConstantFactor::new(ln_normalized_doubling(n_max, phi), n_max);
            volume_certificate(&setup, &centers, &factor, r1, r2, transitive)?
        }
        CheckKind::G => {
            let dec = SpectralDecomposition::new(&setup.graph)?;
            let block = block()?;
            let factor = GaussianHeat { block: &block };
            let targets = setup.targets(&centers, transitive);
            gaussian_certificate(&setup, &dec, &centers, &targets, &factor, r1, r2, config)?
        }
        CheckKind::O => {
            let dec = SpectralDecomposition::new(&setup.graph)?;
            let block = block()?;
            let factor = GaussianHeat { block: &block };
            let grid = time_grid(config, r1)?;
            let times = on_diagonal_times(&setup.metric, &centers, &grid, r1, r2);
            check_on_diagonal(&setup.graph, &dec, &setup.metric, &centers, &factor, r1, r2, &times)?
        }
    };
    let metadata = setup.metadata(config, &format!("check {kind:?}"), &metric_label(config), &guards);
    Ok(finish(Report {
        metadata,
        certificates: vec![cert],
        constants: Vec::new(),
        notes: vec![note],
        summary: PassSummary::of(&[]),
    }))
}

/// Dispatches on `config.pipeline`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Report> {
    match config.pipeline {
        PipelineKind::Normalizing => run_normalizing(config),
        PipelineKind::NormalizingForward => run_forward_normalizing(config),
        PipelineKind::Counting => run_counting(config),
        PipelineKind::General => run_general(config),
    }
}

/// Writes `report.json`, `certificates.csv`, `constants.csv` and one trace
/// CSV per certificate under `dir`; returns the written paths.
pub fn emit_report(report: &Report, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let json = dir.join("report.json");
    std::fs::write(&json, report.to_json()? + "\n")?;
    written.push(json);

    let path = dir.join("certificates.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["index", "condition", "pass", "min_log_margin", "grid_points", "witness", "flags", "trace_file"])?;
    for (i, c) in report.certificates.iter().enumerate() {
        let witness = c.witness.as_ref().map(serde_json::to_string).transpose()?.unwrap_or_default();
        w.write_record([
            i.to_string(),
            c.condition.to_string(),
            c.pass.to_string(),
            format!("{:?}", c.min_log_margin),
            c.grid.points.to_string(),
            witness,
            c.flags.join(";"),
            trace_name(i, c),
        ])?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("constants.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["name", "vertex", "radius", "ln_value", "formula"])?;
    for k in &report.constants {
        w.write_record([
            k.name.clone(),
            k.vertex.clone().unwrap_or_default(),
            k.radius.map(|r| format!("{r:?}")).unwrap_or_default(),
            format!("{:?}", k.ln_value),
            k.formula.clone(),
        ])?;
    }
    w.flush()?;
    written.push(path);

    for (i, c) in report.certificates.iter().enumerate() {
        let path = dir.join(trace_name(i, c));
        c.write_trace_csv(std::fs::File::create(&path)?)?;
        written.push(path);
    }
    Ok(written)
}

fn trace_name(index: usize, c: &Certificate) -> String {
    format!("trace_{index:02}_{}.csv", c.condition)
}
