//! Data behind the static demo page in `www/`.
//!
//! Each export takes plain numbers and strings and returns a JSON document, so
//! the page needs no generated bindings beyond `wasm-bindgen`'s string glue.
//! The typed builders are public for native callers and tests.

use heatbound::corrections::{self, CountingBlock, GuardPolicy};
use heatbound::graph::{Family, MeasureKind, MeasureMode, WeightedGraph};
use heatbound::metric::MetricStructure;
use heatbound::spectral::SpectralDecomposition;
use heatbound::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Dense eigendecomposition is cubic; keep the page responsive.
pub const MAX_VERTICES: usize = 1024;

#[derive(Debug, Clone, Serialize)]
pub struct HeatProfile {
    pub family: String,
    pub center: String,
    pub bottom_of_spectrum: f64,
    pub times: Vec<f64>,
    /// `p_t(x, x)`.
    pub diagonal: Vec<f64>,
    /// `p_t(x, y)` for the vertex `y` farthest from `x` in the combinatorial metric.
    pub farthest: Vec<f64>,
    pub farthest_vertex: String,
    /// `sum_y p_t(x, y) m(y)`; stays at one.
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BallGrowth {
    pub family: String,
    pub center: String,
    pub metric: String,
    pub radii: Vec<f64>,
    pub sizes: Vec<usize>,
    pub measures: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectionProfile {
    pub r: f64,
    pub jump: f64,
    pub times: Vec<f64>,
    pub zeta: Vec<f64>,
    pub nu: Vec<f64>,
    pub ln_offdiagonal_factor: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionProfile {
    pub n: f64,
    pub phi: f64,
    pub radii: Vec<f64>,
    pub inner_radii: Vec<f64>,
    pub dimension: Vec<f64>,
    /// `dimension / n`.
    pub ratio: Vec<f64>,
}

/// `points` values spaced evenly in log scale on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || points == 0 {
        return Err(Error::InvalidParameter(format!("need 0 < lo <= hi and points > 0, got [{lo}, {hi}] x {points}")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == points => hi,
            _ => (a + step * i as f64).exp(),
        })
        .collect())
}

fn generate(family: &str, measure: &str) -> Result<WeightedGraph> {
    let family: Family = family.parse()?;
    if family.vertex_count() > MAX_VERTICES {
        return Err(Error::InvalidParameter(format!("{family} has more than {MAX_VERTICES} vertices")));
    }
    let mode = match measure.parse::<MeasureKind>()? {
        MeasureKind::Normalizing => MeasureMode::Normalizing,
        MeasureKind::Counting => MeasureMode::Counting,
        MeasureKind::Custom => return Err(Error::InvalidParameter("custom measures need a graph file".into())),
    };
    family.generate(mode)
}

fn metric_for(g: &WeightedGraph, metric: &str) -> Result<MetricStructure> {
    match metric {
        "default" | "intrinsic" => MetricStructure::intrinsic(g),
        "combinatorial" => MetricStructure::combinatorial(g),
        other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
    }
}

pub fn heat_profile(family: &str, measure: &str, center: usize, t_min: f64, t_max: f64, points: usize) -> Result<HeatProfile> {
    let g = generate(family, measure)?;
    if center >= g.len() {
        return Err(Error::InvalidParameter(format!("center {center} out of range 0..{}", g.len())));
    }
    let times = log_grid(t_min, t_max, points)?;
    let dec = SpectralDecomposition::new(&g)?;
    let hops = MetricStructure::combinatorial(&g)?;
    let far = (0..g.len()).max_by(|&a, &b| hops.distance(center, a).total_cmp(&hops.distance(center, b))).unwrap_or(center);

    let mut profile = HeatProfile {
        family: family.to_string(),
        center: g.id(center).to_string(),
        bottom_of_spectrum: dec.bottom(),
        times: times.clone(),
        diagonal: Vec::with_capacity(points),
        farthest: Vec::with_capacity(points),
        farthest_vertex: g.id(far).to_string(),
        mass: Vec::with_capacity(points),
    };
    for &t in &times {
        let row = dec.kernel_row(t, center)?;
        profile.diagonal.push(row[center]);
        profile.farthest.push(row[far]);
        profile.mass.push(row.iter().zip(g.measures()).map(|(p, m)| p * m).sum());
    }
    Ok(profile)
}

pub fn ball_growth(family: &str, measure: &str, metric: &str, center: usize) -> Result<BallGrowth> {
    let g = generate(family, measure)?;
    if center >= g.len() {
        return Err(Error::InvalidParameter(format!("center {center} out of range 0..{}", g.len())));
    }
    let rho = metric_for(&g, metric)?;
    let radii = rho.breakpoints(center).to_vec();
    let sizes = radii.iter().map(|&r| rho.ball_size(center, r)).collect::<Result<_>>()?;
    let measures = radii.iter().map(|&r| rho.ball_measure(center, r)).collect::<Result<_>>()?;
    Ok(BallGrowth {
        family: family.to_string(),
        center: g.id(center).to_string(),
        metric: metric.to_string(),
        radii,
        sizes,
        measures,
    })
}

pub fn correction_profile(r: f64, jump: f64, t_min: f64, t_max: f64, points: usize) -> Result<CorrectionProfile> {
    let times = log_grid(t_min, t_max, points)?;
    let zeta = times.iter().map(|&t| corrections::zeta(r, t, jump)).collect::<Result<_>>()?;
    let nu = times.iter().map(|&t| corrections::nu(r, t, jump)).collect::<Result<_>>()?;
    let ln_offdiagonal_factor = times.iter().map(|&t| corrections::ln_offdiagonal_factor(r, t, jump)).collect();
    Ok(CorrectionProfile { r, jump, times, zeta, nu, ln_offdiagonal_factor })
}

/// Variable dimension of the counting-measure block against `r`, with guards
/// relaxed so small radii still plot.
pub fn dimension_profile(n: f64, phi: f64, r1: f64, max_degree: f64, r_max: f64, points: usize) -> Result<DimensionProfile> {
    let block = CountingBlock::new(n, 1.0, phi, GuardPolicy::Relaxed)?;
    let radii = log_grid(4.0 * r1, r_max, points)?;
    let mut profile =
        DimensionProfile { n, phi, radii: Vec::new(), inner_radii: Vec::new(), dimension: Vec::new(), ratio: Vec::new() };
    for r in radii {
        let v = block.variable_dimension(r, r1, max_degree)?;
        profile.radii.push(r);
        profile.inner_radii.push(v.inner_radius);
        profile.dimension.push(v.dimension);
        profile.ratio.push(v.dimension / n);
    }
    Ok(profile)
}

fn to_json<T: Serialize>(value: Result<T>) -> std::result::Result<String, String> {
    let value = value.map_err(|e| e.to_string())?;
    serde_json::to_string(&value).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = heatProfile)]
pub fn heat_profile_json(
    family: &str,
    measure: &str,
    center: usize,
    t_min: f64,
    t_max: f64,
    points: usize,
) -> std::result::Result<String, String> {
    to_json(heat_profile(family, measure, center, t_min, t_max, points))
}

#[wasm_bindgen(js_name = ballGrowth)]
pub fn ball_growth_json(family: &str, measure: &str, metric: &str, center: usize) -> std::result::Result<String, String> {
    to_json(ball_growth(family, measure, metric, center))
}

#[wasm_bindgen(js_name = correctionProfile)]
pub fn correction_profile_json(r: f64, jump: f64, t_min: f64, t_max: f64, points: usize) -> std::result::Result<String, String> {
    to_json(correction_profile(r, jump, t_min, t_max, points))
}

#[wasm_bindgen(js_name = dimensionProfile)]
pub fn dimension_profile_json(
    n: f64,
    phi: f64,
    r1: f64,
    max_degree: f64,
    r_max: f64,
    points: usize,
) -> std::result::Result<String, String> {
    to_json(dimension_profile(n, phi, r1, max_degree, r_max, points))
}
