use heatbound_web::{ball_growth, ball_growth_json, correction_profile, dimension_profile, heat_profile, heat_profile_json};

#[test]
fn heat_mass_is_conserved_and_diagonal_decays() {
    let p = heat_profile("cycle_12", "normalizing", 0, 0.1, 400.0, 16).unwrap();
    assert_eq!(p.times.len(), 16);
    assert_eq!(p.farthest_vertex, "6");
    for m in &p.mass {
        assert!((m - 1.0).abs() < 1e-10, "mass {m}");
    }
    assert!(p.diagonal.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    // Long-time limit of a connected graph is 1 / m(X); here m = deg = 2 on 12 vertices.
    assert!((p.diagonal.last().unwrap() - 1.0 / 24.0).abs() < 1e-9);
}

#[test]
fn ball_growth_on_a_path_counts_vertices() {
    let b = ball_growth("path_7", "counting", "combinatorial", 3).unwrap();
    assert_eq!(b.radii, vec![0.0, 1.0, 2.0, 3.0]);
    assert_eq!(b.sizes, vec![1, 3, 5, 7]);
    assert_eq!(b.measures, vec![1.0, 3.0, 5.0, 7.0]);
}

#[test]
fn correction_profiles_are_nonnegative_and_decay_in_time() {
    let c = correction_profile(5.0, 1.0, 0.01, 100.0, 25).unwrap();
    assert!(c.zeta.iter().chain(&c.nu).chain(&c.ln_offdiagonal_factor).all(|&v| v >= 0.0));
    assert!(c.zeta.windows(2).all(|w| w[1] <= w[0]));
    assert!(c.nu.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*c.ln_offdiagonal_factor.last().unwrap(), 0.0);
}

#[test]
fn dimension_profile_stays_at_least_n() {
    let d = dimension_profile(3.0, 1.0, 1.0, 2.0, 1e6, 12).unwrap();
    assert_eq!(d.radii.len(), 12);
    assert!(d.ratio.iter().all(|&q| q >= 1.0));
    assert!(d.inner_radii.iter().chain(&d.dimension).all(|v| v.is_finite() && *v > 0.0));
}

#[test]
fn json_exports_carry_errors_as_strings() {
    let ok = heat_profile_json("path_4", "counting", 0, 1.0, 2.0, 2).unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok).unwrap();
    assert_eq!(v["diagonal"].as_array().unwrap().len(), 2);
    let err = ball_growth_json("path_4", "counting", "taxicab", 0).unwrap_err();
    assert!(err.contains("taxicab"));
}
