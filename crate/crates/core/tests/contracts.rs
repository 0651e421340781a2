use qcforge_core::analysis::{check_david, dilatation_profile, fit_david, DavidParams, ProfileSide, Scenario};
use qcforge_core::cantor::{square_center, Family, GaugeSequence};
use qcforge_core::geometry::Point;
use qcforge_core::homeo::{curve_homeo, sigma_to_lambda, standard_homeo};
use qcforge_core::qcmaps::ANNULUS_BAND;

fn gauges() -> Vec<GaugeSequence> {
    vec![
        GaugeSequence::geometric(0.5).unwrap(),
        GaugeSequence::geometric(1.0).unwrap(),
        GaugeSequence::geometric(2.0).unwrap(),
        GaugeSequence::slow(),
        GaugeSequence::fast(),
        GaugeSequence::sqrt(),
    ]
}

#[test]
fn level_dilatation_tracks_inset_ratio() {
    for g in gauges() {
        for h in gauges() {
            let m = standard_homeo(&g, &h, 20).unwrap();
            let mut running = 1.0f64;
            for (k, kk) in m.max_dilatation_per_level() {
                let r = h.inset(k) * g.d(k) / (g.inset(k) * h.d(k));
                let ratio = kk / r.max(1.0 / r);
                assert!(
                    ratio >= ANNULUS_BAND.0 && ratio <= ANNULUS_BAND.1,
                    "{g} → {h}, k={k}: {ratio}"
                );
                assert!(m.max_dilatation() >= running.max(kk));
                running = running.max(kk);
            }
        }
    }
}

#[test]
fn geometric_pairs_are_quasiconformal() {
    let (g, h) = (
        GaugeSequence::geometric(1.0).unwrap(),
        GaugeSequence::geometric(2.0).unwrap(),
    );
    let levels = standard_homeo(&g, &h, 30).unwrap().max_dilatation_per_level();
    assert!(levels.iter().all(|&(_, k)| k == levels[0].1));
    // nothing exceeds the top threshold, so the fitted decay steepens without bound
    let alphas: Vec<f64> = [6, 12, 20]
        .iter()
        .map(|&n| {
            let p = dilatation_profile(&standard_homeo(&g, &h, n).unwrap(), ProfileSide::Domain);
            assert_eq!(p.exceedance(p.max_threshold()), 0.0);
            fit_david(&p).unwrap().alpha
        })
        .collect();
    assert!(alphas.windows(2).all(|w| w[1] > 1.5 * w[0]), "{alphas:?}");
}

#[test]
fn exceedance_above_level_max_is_inside_the_level_squares() {
    let (slow, geo) = (GaugeSequence::slow(), GaugeSequence::geometric(1.0).unwrap());
    let m = standard_homeo(&slow, &geo, 14).unwrap();
    let p = dilatation_profile(&m, ProfileSide::Domain);
    let mut level_max = 1.0f64;
    for (j, k) in m.max_dilatation_per_level() {
        level_max = level_max.max(k);
        let d = slow.d(j);
        assert!(p.exceedance(level_max) <= d * d * (1.0 + 1e-12), "level {j}");
    }
}

#[test]
fn fitted_david_constants_for_slow_to_geometric() {
    let m = Scenario::SlowToGeometric { nu: 1.0 }.build(12).unwrap();
    let forward = dilatation_profile(&m, ProfileSide::Domain);
    let inverse = dilatation_profile(&m.invert(), ProfileSide::Domain);
    let f = fit_david(&forward).unwrap();
    let i = fit_david(&inverse).unwrap();
    // measured: α ≈ 0.75 forward, ≈ 2.75 inverse
    assert!((0.6..=0.9).contains(&f.alpha), "forward α = {}", f.alpha);
    assert!(i.alpha >= 1.0, "inverse α = {}", i.alpha);
    assert!(check_david(&forward, &f).passed);
    assert!(check_david(&inverse, &i).passed);
}

#[test]
fn frozen_david_constants_hold_from_depth_three() {
    let sc = Scenario::SlowToGeometric { nu: 1.0 };
    let (kf, ki) = sc.frozen_k0().unwrap();
    let full = sc.build(12).unwrap();
    for n in 3..=12 {
        let m = full.truncated(n);
        let f = check_david(
            &dilatation_profile(&m, ProfileSide::Domain),
            &DavidParams::new(1.0, 1.0, kf).unwrap(),
        );
        let i = check_david(
            &dilatation_profile(&m.invert(), ProfileSide::Domain),
            &DavidParams::new(1.0, 1.0, ki).unwrap(),
        );
        assert!(f.passed && i.passed, "depth {n}");
    }
}

#[test]
fn curve_gaskets_are_twist_regions() {
    let m = curve_homeo(12).unwrap();
    for k in 1..=12 {
        assert_eq!(m.gasket_regions(k), 1u128 << (2 * k - 1));
    }
}

#[test]
fn curve_first_level_correspondence() {
    let m = sigma_to_lambda(&GaugeSequence::sqrt(), 1).unwrap();
    let lambda = m.target().clone();
    let left = m.evaluate(Point::new(-0.375, 0.0), 1e-15).point;
    let right = m.evaluate(Point::new(0.375, 0.0), 1e-15).point;
    assert!(left.dist(square_center(&lambda, &[0])) <= 1e-15);
    assert!(right.dist(square_center(&lambda, &[3])) <= 1e-15);
    assert!(left.x < 0.0 && left.y > 0.0 && right.x > 0.0 && right.y < 0.0);
}

#[test]
fn evaluation_fixes_far_points_and_maps_centers() {
    let (g, h) = (GaugeSequence::slow(), GaugeSequence::fast());
    let m = standard_homeo(&g, &h, 6).unwrap();
    let far = Point::new(10.0, 10.0);
    assert_eq!(m.evaluate(far, 1e-12).point, far);
    for digits in [[0, 1, 2, 3, 0, 1], [3, 3, 3, 3, 3, 3], [2, 0, 1, 1, 0, 2]] {
        let src = square_center(&Family::Lambda(g.clone()), &digits);
        let dst = square_center(&Family::Lambda(h.clone()), &digits);
        let e = m.evaluate(src, f64::MIN_POSITIVE);
        assert!(e.point.dist(dst) <= 1e-15, "{digits:?}");
        assert!(e.error_bound <= 2f64.powf(0.5 - 6.0) * h.d(6));
    }
}

#[test]
fn inverse_equals_reverse_construction() {
    let (g, h) = (GaugeSequence::slow(), GaugeSequence::sqrt());
    let inv = standard_homeo(&g, &h, 8).unwrap().invert();
    let direct = standard_homeo(&h, &g, 8).unwrap();
    assert_eq!(inv.max_dilatation_per_level(), direct.max_dilatation_per_level());
    let pts = [
        Point::new(0.31, -0.12),
        Point::new(-0.44, 0.05),
        Point::new(0.2, 0.2),
        Point::new(0.0, 0.0),
    ];
    for z in pts {
        let a = inv.evaluate(z, f64::MIN_POSITIVE);
        let b = direct.evaluate(z, f64::MIN_POSITIVE);
        assert!(a.point.dist(b.point) <= 1e-12 + a.error_bound + b.error_bound, "{z:?}");
    }
}
