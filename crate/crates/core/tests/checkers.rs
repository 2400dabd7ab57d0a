use std::f64::consts::LN_2;

use heatbound::checkers::*;
use heatbound::corrections::{CountingBlock, DimensionFn, GeneralBlock, GuardPolicy};
use heatbound::graph::{build_graph, Family, MeasureMode, WeightedGraph};
use heatbound::metric::{EdgeLengths, MetricStructure};
use heatbound::sobolev::{minimal_sobolev_constant, nash_constant, random_samples, Budget, SobolevProblem};
use heatbound::spectral::{OmegaContext, SpectralDecomposition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn family(spec: &str, mode: MeasureMode) -> WeightedGraph {
    spec.parse::<Family>().unwrap().generate(mode).unwrap()
}

fn two_vertex() -> WeightedGraph {
    build_graph(&[("a", "b", 1.0)], MeasureMode::Counting).unwrap()
}

fn budget() -> Budget {
    Budget { restarts: 6, max_iterations: 400, tolerance: 1e-10 }
}

/// Re-evaluates the stored witness and compares margins.
fn assert_fidelity(cert: &Certificate, evaluate: impl Fn(&Witness) -> heatbound::Result<(f64, f64)>) {
    let w = cert.witness.as_ref().expect("certificate without witness");
    let (lhs, rhs) = evaluate(w).unwrap();
    let margin = if lhs == f64::NEG_INFINITY { f64::INFINITY } else { rhs - lhs };
    if margin.is_infinite() || cert.min_log_margin.is_infinite() {
        assert_eq!(margin, cert.min_log_margin);
    } else {
        assert!((margin - cert.min_log_margin).abs() <= 1e-12, "{} vs {}", margin, cert.min_log_margin);
    }
}

fn measured_phi(g: &WeightedGraph, metric: &MetricStructure, centers: &[usize], radii: &[f64], n: f64) -> f64 {
    let mut phi = 1.0f64;
    for &x in centers {
        for &r in radii {
            let problem = SobolevProblem::for_ball(g, metric, x, r, n).unwrap();
            phi = phi.max(minimal_sobolev_constant(&problem, &budget(), 7).unwrap().phi_star);
        }
    }
    phi
}

fn nonnegative_samples(len: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..len).map(|_| rng.gen::<f64>()).collect()).collect()
}

#[test]
fn volume_doubling_equal_radii_needs_only_unit_factor() {
    let g = family("path_8", MeasureMode::Counting);
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let centers: Vec<usize> = (0..g.len()).collect();
    let unit = ConstantFactor::new(0.0, 3.0);
    let cert = check_volume_doubling(&g, &metric, &centers, &unit, 2.0, 2.0).unwrap();
    assert!(cert.pass);
    assert_eq!(cert.min_log_margin, 0.0);
    let below = ConstantFactor::new(-0.1, 3.0);
    assert!(!check_volume_doubling(&g, &metric, &centers, &below, 2.0, 2.0).unwrap().pass);
}

#[test]
fn volume_doubling_singleton_ball_margin() {
    let g = family("path_8", MeasureMode::Counting);
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let factor = ConstantFactor::new(0.5, 3.0);
    let check = VolumeDoublingCheck {
        graph: &g,
        metric: &metric,
        centers: vec![3],
        factor: &factor,
        r1: 0.25,
        r2: 0.5,
        transitive: false,
    };
    let cert = check.run().unwrap();
    assert!(cert.pass);
    let w = Witness { vertices: vec!["3".into()], radii: vec![0.25, 0.5], time: None, sample: None };
    let (lhs, rhs) = check.evaluate(&w).unwrap();
    assert!((rhs - lhs - (0.5 + 3.0 * LN_2)).abs() < 1e-12);
}

#[test]
fn volume_doubling_with_doubling_constants_from_measured_phi() {
    let g = family("path_8", MeasureMode::Counting);
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let (r1, r2, n) = (1.5, 2.4, 3.0);
    let centers: Vec<usize> = (0..g.len()).collect();
    let phi = measured_phi(&g, &metric, &centers, &[r1, 2.0, r2], n).ceil();
    let dim = DimensionFn::constant(n).unwrap();
    let block = GeneralBlock::new(&g, &metric, &dim, phi, GuardPolicy::Enforce).unwrap();
    let factor = DoublingVolume { block: &block, metric: &metric };
    let check = VolumeDoublingCheck { graph: &g, metric: &metric, centers, factor: &factor, r1, r2, transitive: false };
    let cert = check.run().unwrap();
    assert!(cert.pass, "{cert:?}");
    assert_fidelity(&cert, |w| check.evaluate(w));
    assert_eq!(cert.trace.len(), cert.grid.points);
}

#[test]
fn volume_doubling_rejects_inverted_range() {
    let g = family("path_8", MeasureMode::Counting);
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let f = ConstantFactor::new(1.0, 2.0);
    assert!(check_volume_doubling(&g, &metric, &[0], &f, 3.0, 2.0).is_err());
}

#[test]
fn gaussian_diagonal_has_no_distance_correction() {
    let g = family("path_8", MeasureMode::Counting);
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let factor = ConstantFactor::new(2.0, 3.0);
    let check = GaussianCheck {
        graph: &g,
        dec: &dec,
        metric: &metric,
        centers: vec![2],
        targets: vec![2],
        factor: &factor,
        r1: 1.0,
        r2: 2.0,
        times: vec![1.0, 3.0, 9.0],
        per_decade: 0,
    };
    for t in [1.0, 3.0, 9.0] {
        let rhs = check.log_bound(2, 2, t).unwrap();
        let tau = t.sqrt().min(2.0);
        let expected = 2.0 * 2.0 - metric.ball_measure(2, tau).unwrap().ln();
        assert!((rhs - expected).abs() < 1e-12, "t = {t}: {rhs} vs {expected}");
    }
}

#[test]
fn gaussian_two_vertex_with_counting_constant_passes_and_reaches_equilibrium() {
    let g = two_vertex();
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let block = CountingBlock::new(3.0, metric.global_jump(), 1.0, GuardPolicy::Enforce).unwrap();
    let factor = ConstantFactor::new(block.ln_a(), 3.0);
    let all = [0, 1];
    let times = geometric_time_grid(1.0, 1e3, 16).unwrap();
    let cert = check_gaussian(&g, &dec, &metric, &all, &all, &factor, 1.0, 1.0, &times, 16).unwrap();
    assert!(cert.pass && cert.min_log_margin > 0.0);
    let late = check_gaussian(&g, &dec, &metric, &all, &all, &factor, 1.0, 1.0, &[1e6], 1).unwrap();
    assert!(late.pass && late.min_log_margin >= 0.0);
    assert!((dec.heat_kernel(1e6, 0, 1).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn gaussian_underflowed_kernel_values_are_never_nan() {
    let g = family("path_128", MeasureMode::Counting);
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let factor = ConstantFactor::new(0.0, 3.0);
    let all: Vec<usize> = (0..g.len()).collect();
    let cert = check_gaussian(&g, &dec, &metric, &[0], &all, &factor, 0.1, 1.0, &[0.02], 1).unwrap();
    assert!(cert.flags.iter().any(|f| f == "kernel-underflow"));
    assert!(cert.trace.iter().all(|p| !p.log_lhs.is_nan()));
    assert!(!cert.min_log_margin.is_nan());
}

#[test]
fn gaussian_witness_fidelity_and_trace_rows() {
    let g = family("path_16", MeasureMode::Counting);
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let factor = ConstantFactor::new(0.2, 1.0);
    let centers: Vec<usize> = (0..g.len()).collect();
    let times = geometric_time_grid(0.5, 50.0, 8).unwrap();
    let check = GaussianCheck {
        graph: &g,
        dec: &dec,
        metric: &metric,
        centers: centers.clone(),
        targets: centers,
        factor: &factor,
        r1: 0.7,
        r2: 4.0,
        times,
        per_decade: 8,
    };
    let cert = check.run().unwrap();
    assert_fidelity(&cert, |w| check.evaluate(w));
    assert_eq!(cert.trace.len(), cert.grid.points);
    let mut csv = Vec::new();
    cert.write_trace_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), cert.grid.points + 1);
}

#[test]
fn gaussian_refining_the_time_grid_never_raises_the_margin() {
    let g = family("path_16", MeasureMode::Counting);
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let all: Vec<usize> = (0..g.len()).collect();
    for ln_psi in [-0.5, 0.0, 0.3, 1.0] {
        let factor = ConstantFactor::new(ln_psi, 1.0);
        let mut previous: Option<Certificate> = None;
        for density in [4, 8, 16, 32] {
            let times = geometric_time_grid(0.5, 200.0, density).unwrap();
            let cert = check_gaussian(&g, &dec, &metric, &all, &all, &factor, 0.7, 5.0, &times, density).unwrap();
            if let Some(coarse) = &previous {
                assert!(cert.min_log_margin <= coarse.min_log_margin);
                assert!(coarse.pass || !cert.pass, "refinement turned a fail into a pass");
            }
            previous = Some(cert);
        }
    }
}

#[test]
fn local_regularity_examples() {
    let g = two_vertex();
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let dim = DimensionFn::constant(4.0).unwrap();
    let check =
        LocalRegularityCheck { graph: &g, metric: &metric, centers: vec![0], dimension: &dim, phi: 1.0, r1: 1.0, r2: 1.0 };
    let (lhs, rhs) = check.point(0, 1.0).unwrap();
    assert!((lhs - 2f64.ln()).abs() < 1e-15);
    assert!((rhs - 16f64.ln()).abs() < 1e-12);
    assert!(check.run().unwrap().pass);

    let (lhs, rhs) = check.point(0, 0.5).unwrap();
    assert_eq!(lhs, 0.0);
    assert!(rhs >= 2f64.ln());
}

#[test]
fn sobolev_implies_local_regularity() {
    let n = 3.0;
    for spec in ["path_8", "cycle_12", "star_6", "grid_3x3"] {
        let g = family(spec, MeasureMode::Counting);
        let metric = MetricStructure::intrinsic(&g).unwrap();
        let radii: Vec<f64> = vec![0.8, 1.5, 2.5];
        let centers: Vec<usize> = (0..g.len()).collect();
        let phi = measured_phi(&g, &metric, &centers, &radii, n);
        let s = check_sobolev(&g, &metric, &centers, &radii, SobolevBound::constant(n, phi.ln()), budget(), 7).unwrap();
        assert!(s.pass, "{spec}");
        let dim = DimensionFn::constant(n).unwrap();
        for &r in &radii {
            let l = check_local_regularity(&g, &metric, &centers, &dim, phi, r, r).unwrap();
            assert!(l.pass, "{spec} r = {r}: {}", l.min_log_margin);
        }
    }
}

#[test]
fn gaussian_implies_on_diagonal() {
    let g = family("path_16", MeasureMode::Counting);
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let all: Vec<usize> = (0..g.len()).collect();
    let factor = ConstantFactor::new(0.8, 1.0);
    let (r1, r2) = (0.7, 4.0);
    let grid = geometric_time_grid(r1 * r1, 40.0, 16).unwrap();
    let g_cert = check_gaussian(&g, &dec, &metric, &all, &all, &factor, r1, r2, &grid, 16).unwrap();
    assert!(g_cert.pass, "{}", g_cert.min_log_margin);
    let same: Vec<f64> = grid.iter().copied().filter(|&t| t <= r2 * r2).collect();
    let o_cert = check_on_diagonal(&g, &dec, &metric, &all, &factor, r1, r2, &same).unwrap();
    assert!(o_cert.pass);
    assert!(o_cert.min_log_margin >= g_cert.min_log_margin);
    let times = on_diagonal_times(&metric, &all, &grid, r1, r2);
    assert!(check_on_diagonal(&g, &dec, &metric, &all, &factor, r1, r2, &times).unwrap().pass);
}

#[test]
fn on_diagonal_single_vertex_needs_unit_factor() {
    let g = WeightedGraph::single_vertex("v", 2.5).unwrap();
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let ok = ConstantFactor::new(0.0, 3.0);
    let cert = check_on_diagonal(&g, &dec, &metric, &[0], &ok, 1.0, 2.0, &[1.0, 2.0, 4.0]).unwrap();
    assert!(cert.pass);
    assert!(cert.min_log_margin.abs() < 1e-12);
    let low = ConstantFactor::new(-0.01, 3.0);
    assert!(!check_on_diagonal(&g, &dec, &metric, &[0], &low, 1.0, 2.0, &[1.0, 2.0, 4.0]).unwrap().pass);
}

#[test]
fn noncollapse_with_measured_sobolev_constant() {
    let n = 3.0;
    let cases: [(&str, MeasureMode, f64); 2] =
        [("path_16", MeasureMode::Counting, 5.0), ("cycle_32", MeasureMode::Normalizing, 8.0)];
    for (spec, mode, big_r) in cases {
        let g = family(spec, mode);
        let metric = MetricStructure::intrinsic(&g).unwrap();
        let x = g.len() / 2;
        let phi = measured_phi(&g, &metric, &[x], &[big_r], n);
        let dim = DimensionFn::constant(n).unwrap();
        let block = GeneralBlock::new(&g, &metric, &dim, phi, GuardPolicy::Enforce).unwrap();
        let ln_c = noncollapse_ln_constant(&metric, x, big_r, n, phi).unwrap();
        let check = NonCollapseCheck { graph: &g, metric: &metric, block: &block, x, big_r, n, ln_c };
        let cert = check.run().unwrap();
        assert!(cert.pass, "{spec}: {}", cert.min_log_margin);
        assert_fidelity(&cert, |w| check.evaluate(w));
    }
}

#[test]
fn noncollapse_guard_rejects_radius_beyond_half_diameter() {
    let g = family("path_16", MeasureMode::Counting);
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let dim = DimensionFn::constant(3.0).unwrap();
    let block = GeneralBlock::new(&g, &metric, &dim, 2.0, GuardPolicy::Enforce).unwrap();
    let big_r = metric.diameter();
    assert!(check_noncollapsing(&g, &metric, &block, 8, big_r, 3.0, 0.0).is_err());
}

#[test]
fn ball_comparison_on_a_cycle_has_full_margin() {
    let g = family("cycle_32", MeasureMode::Normalizing);
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let (r, d, ln_phi) = (8.0, 1.0, 2.0);
    let factor = ConstantFactor::new(ln_phi, d);
    let v = VolumeDoublingCheck {
        graph: &g,
        metric: &metric,
        centers: vec![0],
        factor: &factor,
        r1: r / 4.0,
        r2: r,
        transitive: true,
    }
    .run()
    .unwrap();
    assert!(v.pass);
    let check = BallComparisonCheck { graph: &g, metric: &metric, o: 0, r, d, ln_phi, doubling: &v };
    let cert = check.run().unwrap();
    assert!(cert.pass);
    assert!((cert.min_log_margin - (18.0 * d * LN_2 + 9.0 * ln_phi)).abs() < 1e-12);
    assert_fidelity(&cert, |w| check.evaluate(w));
}

#[test]
fn ball_comparison_refuses_without_doubling() {
    let g = family("cycle_32", MeasureMode::Normalizing);
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let wrong = check_local_regularity(&g, &metric, &[0], &DimensionFn::constant(3.0).unwrap(), 1.0, 1.0, 2.0).unwrap();
    assert!(check_ball_comparison(&g, &metric, 0, 8.0, 1.0, 2.0, &wrong).is_err());
    let factor = ConstantFactor::new(2.0, 1.0);
    let partial = check_volume_doubling(&g, &metric, &[0], &factor, 2.0, 8.0).unwrap();
    assert!(check_ball_comparison(&g, &metric, 0, 8.0, 1.0, 2.0, &partial).is_err());
}

/// Path with edge length 1/256 so that radius 1 clears the jump guard.
struct MeanValueSetup {
    graph: WeightedGraph,
    metric: MetricStructure,
    dec: SpectralDecomposition,
    dim: DimensionFn,
    phi: f64,
}

impl MeanValueSetup {
    fn new(graph: WeightedGraph) -> Self {
        let metric = MetricStructure::new(&graph, EdgeLengths::combinatorial(&graph).scaled(1.0 / 256.0)).unwrap();
        let dec = SpectralDecomposition::new(&graph).unwrap();
        let phi = measured_phi(&graph, &metric, &[0], &[0.5, 0.75, 1.0], 3.0);
        Self { graph, metric, dec, dim: DimensionFn::constant(3.0).unwrap(), phi }
    }

    fn sobolev(&self) -> Certificate {
        check_sobolev(&self.graph, &self.metric, &[0], &[0.5, 0.75, 1.0], SobolevBound::constant(3.0, self.phi.ln()), budget(), 7)
            .unwrap()
    }
}

#[test]
fn mean_value_constant_data_matches_closed_form() {
    let setup = MeanValueSetup::new(family("path_8", MeasureMode::Counting));
    let g = &setup.graph;
    let sob = setup.sobolev();
    assert!(sob.pass);
    let block = GeneralBlock::new(g, &setup.metric, &setup.dim, setup.phi, GuardPolicy::Enforce).unwrap();
    let omega = OmegaContext::new(g, &vec![0.0; g.len()]).unwrap();
    let (r, tau, big_t, c) = (1.0, 0.5, 2.0, 1.7);
    let check = MeanValueCheck {
        graph: g,
        dec: &setup.dec,
        metric: &setup.metric,
        block: &block,
        x: 0,
        r,
        n: 3.0,
        ln_doubling: 0.0,
        tau,
        big_t,
        omega: &omega,
        samples: vec![vec![c; g.len()]],
        nodes: 1000,
        sobolev: &sob,
    };
    let (lhs, rhs) = check.point(0).unwrap();
    assert!((lhs - 2.0 * c.ln()).abs() < 1e-12);
    let gamma = block.ln_mean_value_gamma(0, r / 2.0, 3.0, 0.0).unwrap();
    let e = 2.5;
    let mass = setup.metric.ball_measure(0, r).unwrap();
    let expected = 2.0 * gamma - e * tau.ln() - 2.0 * r.ln() - mass.ln() + (2.0 * tau * r * r * mass * c * c).ln();
    assert!((rhs - expected).abs() < 1e-9, "{rhs} vs {expected}");
    assert!(check.run().unwrap().pass);
}

#[test]
fn mean_value_constant_weight_cancels() {
    let setup = MeanValueSetup::new(family("path_8", MeasureMode::Counting));
    let g = &setup.graph;
    let sob = setup.sobolev();
    let block = GeneralBlock::new(g, &setup.metric, &setup.dim, setup.phi, GuardPolicy::Enforce).unwrap();
    let samples = nonnegative_samples(g.len(), 5, 3);
    let zero = OmegaContext::new(g, &vec![0.0; g.len()]).unwrap();
    let shifted = OmegaContext::new(g, &vec![0.75; g.len()]).unwrap();
    assert_eq!(shifted.h(), 0.0);
    let make = |omega| MeanValueCheck {
        graph: g,
        dec: &setup.dec,
        metric: &setup.metric,
        block: &block,
        x: 0,
        r: 1.0,
        n: 3.0,
        ln_doubling: 0.0,
        tau: 0.25,
        big_t: 1.5,
        omega,
        samples: samples.clone(),
        nodes: 1000,
        sobolev: &sob,
    };
    let (a, b) = (make(&zero), make(&shifted));
    for k in 0..samples.len() {
        let (l0, r0) = a.point(k).unwrap();
        let (l1, r1) = b.point(k).unwrap();
        assert!((l0 - l1).abs() < 1e-10 && (r0 - r1).abs() < 1e-10);
    }
}

#[test]
fn mean_value_two_vertex_delta_with_weight() {
    let setup = MeanValueSetup::new(two_vertex());
    let g = &setup.graph;
    let sob = setup.sobolev();
    let block = GeneralBlock::new(g, &setup.metric, &setup.dim, setup.phi, GuardPolicy::Enforce).unwrap();
    let omega = OmegaContext::new(g, &[0.0, LN_2]).unwrap();
    let cert =
        check_mean_value(g, &setup.dec, &setup.metric, &block, 0, 1.0, 3.0, 0.0, 0.5, 1.0, &omega, vec![vec![1.0, 0.0]], &sob)
            .unwrap();
    assert!(cert.pass);
}

#[test]
fn mean_value_refuses_without_sobolev_certificate() {
    let setup = MeanValueSetup::new(two_vertex());
    let g = &setup.graph;
    let block = GeneralBlock::new(g, &setup.metric, &setup.dim, setup.phi, GuardPolicy::Enforce).unwrap();
    let omega = OmegaContext::new(g, &[0.0, 0.0]).unwrap();
    let wrong =
        check_sobolev(g, &setup.metric, &[1], &[0.5, 1.0], SobolevBound::constant(3.0, setup.phi.ln()), budget(), 7).unwrap();
    let result =
        check_mean_value(g, &setup.dec, &setup.metric, &block, 0, 1.0, 3.0, 0.0, 0.5, 1.0, &omega, vec![vec![1.0, 0.0]], &wrong);
    assert!(matches!(result, Err(heatbound::Error::MissingHypothesis(_))));
}

#[test]
fn chi_hypothesis_zero_data_and_single_vertex() {
    let g = WeightedGraph::single_vertex("v", 2.0).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let window = ChiWindow {
        vertex: 0,
        a: 1.0,
        b: 2.0,
        radius: 1.0,
        delta: 0.5,
        dimension: 3.0,
        ln_gamma: 0.0,
        ln_ball_measure: 2f64.ln(),
    };
    let check = ChiHypothesisCheck {
        graph: &g,
        dec: &dec,
        windows: vec![window.clone()],
        big_t: 1.5,
        samples: vec![(vec![3.0], vec![0.0]), (vec![0.0], vec![0.0])],
        nodes: 1000,
    };
    let (lhs, rhs) = check.point(0, 0).unwrap();
    assert!((lhs - (2.0 * window.ln_chi(0.0) + 2.0 * 3f64.ln())).abs() < 1e-12);
    assert!((rhs - 18f64.ln()).abs() < 1e-12);
    let (zl, zr) = check.point(0, 1).unwrap();
    assert_eq!((zl, zr), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    let cert = check.run().unwrap();
    assert!(cert.pass);
}

#[test]
fn chi_hypothesis_random_data_on_path() {
    let setup = MeanValueSetup::new(family("path_8", MeasureMode::Counting));
    let g = &setup.graph;
    let block = GeneralBlock::new(g, &setup.metric, &setup.dim, setup.phi, GuardPolicy::Enforce).unwrap();
    let vertices: Vec<usize> = (0..g.len()).collect();
    let windows = theorem_windows(&setup.metric, &block, &vertices, 1.0, 3.0, 0.0, 0.5, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
        .map(|_| ((0..g.len()).map(|_| rng.gen::<f64>()).collect(), (0..g.len()).map(|_| rng.gen_range(-0.01..0.01)).collect()))
        .collect();
    let check = ChiHypothesisCheck { graph: g, dec: &setup.dec, windows, big_t: 2.0, samples, nodes: 1000 };
    let cert = check.run().unwrap();
    assert!(cert.pass);
    assert_fidelity(&cert, |w| check.evaluate(w));
}

#[test]
fn chi_hypothesis_rejects_inverted_window() {
    let g = WeightedGraph::single_vertex("v", 1.0).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let window =
        ChiWindow { vertex: 0, a: 2.0, b: 1.0, radius: 1.0, delta: 0.5, dimension: 3.0, ln_gamma: 0.0, ln_ball_measure: 0.0 };
    assert!(check_chi_hypothesis(&g, &dec, vec![window], 1.5, vec![(vec![1.0], vec![0.0])]).is_err());
}

#[test]
fn semigroup_regularization_examples() {
    let g = WeightedGraph::single_vertex("v", 2.0).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let cert = check_semigroup_regularization(&g, &dec, &[0], -(2f64.ln()), 0.0, &[1.0, 2.0], vec![vec![5.0]]).unwrap();
    assert!(cert.pass);

    let g = family("path_16", MeasureMode::Counting);
    let dec = SpectralDecomposition::new(&g).unwrap();
    let ball: Vec<usize> = (0..g.len()).collect();
    let check = SemigroupRegularizationCheck {
        graph: &g,
        dec: &dec,
        ball: ball.clone(),
        ln_c: 3.0,
        n: 1.0,
        radii: vec![1.0, 2.0, 4.0],
        samples: vec![vec![1.0; g.len()]],
    };
    let (lhs, _) = check.contraction_point(0, 2.0).unwrap();
    assert_eq!(lhs, f64::NEG_INFINITY);

    let samples = nonnegative_samples(g.len(), 100, 5);
    let check = SemigroupRegularizationCheck { samples, ..check };
    let cert = check.run().unwrap();
    let contraction = cert.trace.iter().filter(|p| p.witness.sample.is_some()).map(|p| p.margin).fold(f64::INFINITY, f64::min);
    assert!(contraction > 0.0);
    assert_fidelity(&cert, |w| check.evaluate(w));
}

fn weak_sobolev_setup(
    g: &WeightedGraph,
    dec: &SpectralDecomposition,
    ball: &[usize],
    n: f64,
    radii: &[f64],
) -> (f64, Certificate) {
    let ln_c = radii
        .iter()
        .map(|&r| {
            let sup = ball
                .iter()
                .flat_map(|&x| {
                    dec.kernel_row(r * r, x)
                        .unwrap()
                        .into_iter()
                        .enumerate()
                        .filter(|(y, _)| ball.contains(y))
                        .map(|p| p.1)
                        .collect::<Vec<_>>()
                })
                .fold(0.0, f64::max);
            sup.ln() + n * r.ln()
        })
        .fold(f64::NEG_INFINITY, f64::max)
        + 1e-9;
    let cert = check_semigroup_regularization(g, dec, ball, ln_c, n, radii, vec![]).unwrap();
    (ln_c, cert)
}

#[test]
fn weak_sobolev_indicator_and_random_samples() {
    let g = family("cycle_32", MeasureMode::Counting);
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let (o, r1, r2, n) = (0, 2.0, 6.0, 3.0);
    let ball = metric.ball(o, r2).unwrap();
    let radii: Vec<f64> = (0..=8).map(|k| r1 + (r2 - r1) * k as f64 / 8.0).collect();
    let (ln_c1, reg) = weak_sobolev_setup(&g, &dec, &ball, n, &radii);
    assert!(reg.pass);

    let mut indicator = vec![0.0; g.len()];
    indicator[o] = 1.0;
    let mut constant = vec![0.0; g.len()];
    for &x in &ball {
        constant[x] = 2.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut samples = vec![indicator, constant];
    samples.extend((0..100).map(|_| {
        let mut f = vec![0.0; g.len()];
        for &x in &ball {
            f[x] = rng.gen::<f64>();
        }
        f
    }));
    let check = WeakSobolevCheck { graph: &g, metric: &metric, o, n, ln_c1, c2: 1.0, r1, r2, samples, regularization: &reg };
    let (lhs, rhs) = check.point(0).unwrap();
    assert_eq!(lhs, 0.0);
    let floor = ln_c1.max(n * r1.ln());
    let expected = 12f64.ln() + 2.0 / n * floor + (2.0 * g.degree(o) + 1.0 / (r2 * r2)).ln();
    assert!((rhs - expected).abs() < 1e-12);
    let cert = check.run().unwrap();
    assert!(cert.pass);
    assert_fidelity(&cert, |w| check.evaluate(w));
}

#[test]
fn weak_sobolev_rejects_support_outside_ball() {
    let g = family("cycle_32", MeasureMode::Counting);
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let dec = SpectralDecomposition::new(&g).unwrap();
    let ball = metric.ball(0, 4.0).unwrap();
    let (ln_c1, reg) = weak_sobolev_setup(&g, &dec, &ball, 3.0, &[2.0, 4.0]);
    let mut f = vec![0.0; g.len()];
    f[16] = 1.0;
    assert!(check_weak_sobolev(&g, &metric, 0, 3.0, ln_c1, 2.0, 4.0, vec![f], &reg).is_err());
}

#[test]
fn nash_from_measured_sobolev_constant() {
    let g = family("path_8", MeasureMode::Counting);
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let problem = SobolevProblem::for_ball(&g, &metric, 3, 2.0, 3.0).unwrap();
    let phi = minimal_sobolev_constant(&problem, &budget(), 1).unwrap().phi_star.max(1.0);
    let samples = random_samples(&problem, 100, 4);
    let check = NashCheck { problem: &problem, c: nash_constant(&problem, phi), samples };
    let cert = check.run().unwrap();
    assert!(cert.pass);
    assert_fidelity(&cert, |w| check.evaluate(w));
}

#[test]
fn sobolev_certificate_is_one_sided() {
    let g = family("path_8", MeasureMode::Counting);
    let metric = MetricStructure::intrinsic(&g).unwrap();
    let phi = measured_phi(&g, &metric, &[2], &[1.5], 3.0);
    let bound = SobolevBound::constant(3.0, (0.5 * phi).ln());
    let check = SobolevCheck { graph: &g, metric: &metric, centers: vec![2], radii: vec![1.5], bound, budget: budget(), seed: 7 };
    let cert = check.run().unwrap();
    assert!(!cert.pass);
    assert!((cert.min_log_margin + 2f64.ln()).abs() < 1e-9);
    assert!(cert.flags.iter().any(|f| f == "optimizer-lower-bound"));
    assert_fidelity(&cert, |w| check.evaluate(w));
}

#[test]
fn certificate_json_round_trip() {
    let g = two_vertex();
    let metric = MetricStructure::combinatorial(&g).unwrap();
    let cert = check_local_regularity(&g, &metric, &[0, 1], &DimensionFn::constant(4.0).unwrap(), 1.0, 0.5, 1.0).unwrap();
    let json = serde_json::to_string(&cert).unwrap();
    let back: Certificate = serde_json::from_str(&json).unwrap();
    assert_eq!(back.condition, Condition::L);
    assert_eq!(back.min_log_margin, cert.min_log_margin);
    assert!(json.contains("\"condition\":\"L\""));
}
