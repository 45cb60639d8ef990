use gsqg_core::diagnostics::{concentration_report, radial_shape_check, weak_residual, weak_residual_with_drift, Drift};
use gsqg_core::pointvortex::{pair_speed, thomson_angular_velocity};
use gsqg_core::solver::{solve_rotating, solve_travelling, SolverConfig};

fn config(mut cfg: SolverConfig) -> SolverConfig {
    cfg.resolution = 32;
    cfg.lambda0 = 0.1;
    cfg.lambda_min = 0.025;
    cfg
}

#[test]
fn rotating_solution_is_weakly_steady_only_at_its_own_alpha() {
    let solution = solve_rotating(&config(SolverConfig::rotating(0.5, 3, 0.08))).unwrap();
    let alpha = solution.multipliers.alpha;
    let thomson = thomson_angular_velocity(3, 0.5).unwrap();
    assert!((alpha - thomson).abs() < 0.2 * thomson, "alpha {alpha}");
    let own = weak_residual(&solution, 30).unwrap();
    let doubled = weak_residual_with_drift(&solution, Drift::Rotation(2.0 * alpha), 30).unwrap();
    assert!(doubled > 10.0 * own, "{doubled} vs {own}");
    assert!(own <= 5.0 * solution.field.grid.spacing());

    let conc = concentration_report(&solution).unwrap();
    let fractions: Vec<f64> = conc.fractions.iter().map(|f| f.1).collect();
    assert!(fractions.windows(2).all(|w| w[0] <= w[1]));
    assert!((fractions[3] - 1.0).abs() < 1e-12);
    assert!(conc.centroid_distance < 0.08);
    assert!(radial_shape_check(&solution).unwrap() < 0.2);
}

#[test]
fn travelling_solution_sits_near_the_pair_position() {
    let w = pair_speed(1.0, 0.5).unwrap();
    let solution = solve_travelling(&config(SolverConfig::travelling(0.5, w, 0.08))).unwrap();
    assert!(solution.report.mass_residual <= 1e-10);
    assert!(solution.report.el_residual <= 1e-6);
    let conc = concentration_report(&solution).unwrap();
    assert!(conc.centroid_distance < 0.04, "{}", conc.centroid_distance);
    let own = weak_residual(&solution, 30).unwrap();
    let still = weak_residual_with_drift(&solution, Drift::Translation(0.0), 30).unwrap();
    assert!(still > 10.0 * own, "{still} vs {own}");
    let summary = serde_json::to_value(solution.summary()).unwrap();
    assert_eq!(summary["W"], w);
    assert!((summary["d"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(summary.get("N").is_none());
}
