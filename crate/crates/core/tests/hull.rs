use advcert_core::bounds::EpsilonCache;
use advcert_core::hull::{
    convex_hull, default_radii, hull_complexity, hull_margin, hull_r_sweep, hull_training_points, ood_empirical_risk,
    sample_unit_disk, ShiftKind, ShiftSpec, BOUNDARY_TOL,
};
use advcert_core::rng::stream_rng;
use proptest::prelude::*;

/// Point-in-polygon by ray casting, independent of the hull's own test.
fn ray_cast_inside(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

#[test]
fn every_input_point_is_covered() {
    for seed in 0..20 {
        let pts = hull_training_points(300, seed);
        let h = convex_hull(&pts).unwrap();
        assert!(pts.iter().all(|&p| hull_margin(&h, p) == 0.0));
        let per: f64 = (0..h.vertices.len())
            .map(|i| {
                let (a, b) = (h.vertices[i], h.vertices[(i + 1) % h.vertices.len()]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .sum();
        assert!((per - h.perimeter).abs() <= 1e-10);
    }
}

#[test]
fn vertex_count_of_disk_samples() {
    let inside = (0..1000u64)
        .filter(|&seed| {
            let h = convex_hull(&hull_training_points(500, seed)).unwrap();
            (15..=40).contains(&h.vertices.len())
        })
        .count();
    assert!(inside >= 950, "{inside}/1000");
}

#[test]
fn margin_agrees_with_ray_casting() {
    let h = convex_hull(&hull_training_points(100, 3)).unwrap();
    let probes = sample_unit_disk(&mut stream_rng(99, 0), 5000);
    for p in probes {
        let q = [1.3 * p[0], 1.3 * p[1]];
        let m = hull_margin(&h, q);
        if h.boundary_distance(q) > 1e-12 {
            assert_eq!(m == 0.0, ray_cast_inside(&h.vertices, q));
        }
    }
}

#[test]
fn complexity_grows_with_radius() {
    let pts = hull_training_points(200, 5);
    let h = convex_hull(&pts).unwrap();
    let mut prev = 0;
    for i in 0..=40 {
        let s = hull_complexity(&pts, &h, 0.05 * i as f64, BOUNDARY_TOL).unwrap().s_star;
        assert!(s >= prev);
        prev = s;
    }
    assert_eq!(hull_complexity(&pts, &h, 0.0, BOUNDARY_TOL).unwrap().s_star, h.vertices.len());
    assert_eq!(prev, 200);
}

#[test]
fn tiny_budget_recovers_unshifted_risk() {
    let h = convex_hull(&hull_training_points(500, 1)).unwrap();
    let plain = {
        let s = sample_unit_disk(&mut stream_rng(4, advcert_core::rng::stream::SHIFT_MC), 20_000);
        s.iter().filter(|&&p| hull_margin(&h, p) > 0.0).count() as f64 / 20_000.0
    };
    for kind in [ShiftKind::AnnulusToBoundary, ShiftKind::BoundaryBandRadial] {
        let r = ood_empirical_risk(&h, &ShiftSpec { kind, mu: 1e-12, mc_samples: 20_000, seed: 4 }).unwrap();
        assert!((r.risk - plain).abs() <= 2e-4, "{kind:?}: {} vs {plain}", r.risk);
    }
}

#[test]
fn band_shift_respects_budget() {
    let h = convex_hull(&hull_training_points(500, 2)).unwrap();
    let r = ood_empirical_risk(&h, &ShiftSpec { kind: ShiftKind::BoundaryBandRadial, mu: 1e-3, mc_samples: 10_000, seed: 9 })
        .unwrap();
    assert!(r.spent <= 1e-3 && r.spent > 0.9e-3, "{}", r.spent);
    assert!(r.shift_param > 0.0);
}

#[test]
fn oversized_budget_is_rejected() {
    let h = convex_hull(&hull_training_points(50, 2)).unwrap();
    for kind in [ShiftKind::AnnulusToBoundary, ShiftKind::BoundaryBandRadial] {
        assert!(ood_empirical_risk(&h, &ShiftSpec { kind, mu: 0.5, mc_samples: 10_000, seed: 1 }).is_err());
    }
    assert!(ood_empirical_risk(&h, &ShiftSpec { kind: ShiftKind::AnnulusToBoundary, mu: 1e-3, mc_samples: 10, seed: 1 }).is_err());
}

/// Shifted risk stays below the best bound over the radius grid; the bound
/// holds with confidence `1 - h beta = 1 - 1e-3`, so at most one violation
/// in 1000 seeds is tolerated.
#[test]
fn ood_risk_below_bound_on_1000_seeds() {
    let (n, mu, h) = (500, 1e-3, 30);
    let beta = 1e-3 / h as f64;
    let radii = default_radii(mu, h);
    let mut cache = EpsilonCache::new();
    let mut violations = 0;
    for seed in 0..1000u64 {
        let pts = hull_training_points(n, seed);
        let hull = convex_hull(&pts).unwrap();
        let bound = hull_r_sweep(&pts, &hull, &radii, mu, beta, &mut cache).unwrap();
        for kind in [ShiftKind::AnnulusToBoundary, ShiftKind::BoundaryBandRadial] {
            let r = ood_empirical_risk(&hull, &ShiftSpec { kind, mu, mc_samples: 10_000, seed }).unwrap();
            if r.risk > bound.best_bound {
                violations += 1;
            }
        }
    }
    assert!(violations <= 1, "{violations} violations");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn margin_is_one_lipschitz(seed in 0u64..1000, a in prop::array::uniform2(-2.0f64..2.0), b in prop::array::uniform2(-2.0f64..2.0)) {
        let h = convex_hull(&hull_training_points(60, seed)).unwrap();
        let d = (a[0] - b[0]).hypot(a[1] - b[1]);
        prop_assert!((hull_margin(&h, a) - hull_margin(&h, b)).abs() <= d + 1e-12);
    }
}
