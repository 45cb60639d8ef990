use std::sync::Arc;

use gsqg_core::diagnostics::{radial_defect, weak_residual_of, Drift};
use gsqg_core::error::Error;
use gsqg_core::fields::{support_metrics, CartesianGrid, Grid, VorticityField};
use gsqg_core::kernels::KernelSpec;
use gsqg_core::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CENTER: Point = Point::new(1.0, 0.0);

/// A smooth radial bump of radius `a` about (1, 0) on a disk grid.
fn bump(n: usize, a: f64) -> VorticityField {
    let grid = Arc::new(Grid::Cartesian(CartesianGrid::new(CENTER, 2.0 * a, n).unwrap()));
    VorticityField::from_fn(grid, a, |x| {
        let q = 1.0 - (x - CENTER).norm_squared() / (a * a);
        if q > 0.0 {
            q * q
        } else {
            0.0
        }
    })
}

#[test]
fn radial_patch_is_weakly_steady() {
    let field = bump(64, 0.1);
    let spec = KernelSpec::free_plane(0.5).unwrap();
    let r = weak_residual_of(&field, &spec, Drift::None, CENTER, 0.1, 30).unwrap();
    assert!(r < 1e-3, "residual {r}");
}

#[test]
fn a_spurious_drift_is_detected() {
    let field = bump(64, 0.1);
    let spec = KernelSpec::free_plane(0.5).unwrap();
    let steady = weak_residual_of(&field, &spec, Drift::None, CENTER, 0.1, 30).unwrap();
    let moving = weak_residual_of(&field, &spec, Drift::Translation(0.2), CENTER, 0.1, 30).unwrap();
    assert!(moving > 10.0 * steady, "{moving} vs {steady}");
}

#[test]
fn residual_shrinks_under_refinement() {
    let spec = KernelSpec::free_plane(0.75).unwrap();
    let coarse = weak_residual_of(&bump(24, 0.1), &spec, Drift::None, CENTER, 0.1, 30).unwrap();
    let fine = weak_residual_of(&bump(72, 0.1), &spec, Drift::None, CENTER, 0.1, 30).unwrap();
    assert!(fine < coarse, "{fine} vs {coarse}");
}

#[test]
fn weak_residual_rejects_small_s() {
    let field = bump(16, 0.1);
    let spec = KernelSpec::free_plane(0.3).unwrap();
    let err = weak_residual_of(&field, &spec, Drift::None, CENTER, 0.1, 5).unwrap_err();
    assert!(matches!(err, Error::UnsupportedRegime(_)));
}

#[test]
fn radial_profiles_have_no_defect() {
    let field = bump(64, 0.1);
    let h = field.grid.spacing();
    let d = radial_defect(&field, CENTER, h).unwrap();
    assert!(d < 1e-12, "defect {d}");
}

#[test]
fn noise_has_a_large_defect() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base = bump(48, 0.1);
    let values = (0..base.values.len()).map(|_| rng.gen::<f64>()).collect();
    let noisy = base.with_values(values);
    let d = radial_defect(&noisy, CENTER, noisy.grid.spacing()).unwrap();
    assert!(d > 0.1, "defect {d}");
}

#[test]
fn ring_has_a_full_defect() {
    let grid = Arc::new(Grid::Cartesian(CartesianGrid::new(CENTER, 0.2, 48).unwrap()));
    let ring = VorticityField::from_fn(grid, 0.1, |x| {
        let r = (x - CENTER).norm();
        if (0.05..0.1).contains(&r) {
            1.0
        } else {
            0.0
        }
    });
    let d = radial_defect(&ring, CENTER, ring.grid.spacing()).unwrap();
    assert!((d - 1.0).abs() < 1e-12);
}

#[test]
fn concentration_fractions_grow_with_the_ball() {
    let field = bump(48, 0.1);
    let metrics = support_metrics(&field, 0.0).unwrap();
    let mut last = 0.0;
    for r in [0.01, 0.02, 0.05, 0.1, 0.2] {
        let m = metrics.mass_in_ball(r);
        assert!(m >= last);
        last = m;
    }
    assert!((last - 1.0).abs() < 1e-12);
}
