use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qcforge_core::acceptance::{refinement_deviation, svd_dilatation};
use qcforge_core::analysis::{
    check_david, dilatation_profile, qc_dimension_bounds, DavidParams, ProfileSide, Scenario,
};
use qcforge_core::cantor::{box_dimension, build_family_level, CantorLevel, Family, GaugeSequence, Square};
use qcforge_core::geometry::{
    affine_fixing_unit, beltrami, dilatation, dilatation_three_point, invert_affine, AffineMap, Point,
};
use qcforge_core::homeo::standard_homeo;
use qcforge_core::qcmaps::{annulus_extension, twist_extension, validate};

fn affine() -> impl Strategy<Value = AffineMap> {
    (prop::array::uniform6(-1.0f64..1.0)).prop_filter_map("orientation-preserving and moderate", |e| {
        let a = AffineMap::new(e[0], e[1], e[2], e[3], e[4], e[5]).ok()?;
        (svd_dilatation(&a) <= 100.0).then_some(a)
    })
}

fn similarity() -> impl Strategy<Value = AffineMap> {
    (0.1f64..3.0, -3.2f64..3.2, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(r, th, tx, ty)| {
        let (s, c) = th.sin_cos();
        AffineMap::new(r * c, -r * s, r * s, r * c, tx, ty).unwrap()
    })
}

fn gauge() -> impl Strategy<Value = GaugeSequence> {
    prop_oneof![
        (0.25f64..3.0).prop_map(|nu| GaugeSequence::geometric(nu).unwrap()),
        Just(GaugeSequence::slow()),
        Just(GaugeSequence::fast()),
        Just(GaugeSequence::sqrt()),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dilatation_is_inverse_symmetric(a in affine()) {
        let inv = invert_affine(&a).unwrap();
        prop_assert!(rel(dilatation(&a).unwrap(), dilatation(&inv).unwrap()) <= 1e-9);
    }

    #[test]
    fn dilatation_is_similarity_invariant(a in affine(), s in similarity(), t in similarity()) {
        let k = dilatation(&s.compose(&a).compose(&t)).unwrap();
        prop_assert!(rel(k, dilatation(&a).unwrap()) <= 1e-9);
    }

    #[test]
    fn beltrami_matches_dilatation(a in affine()) {
        let mu = beltrami(&a).unwrap().norm();
        prop_assert!(mu < 1.0);
        prop_assert!(rel((1.0 + mu) / (1.0 - mu), dilatation(&a).unwrap()) <= 1e-10);
    }

    #[test]
    fn three_point_formula_matches_map(zx in -3.0f64..3.0, zy in 0.01f64..3.0, wx in -3.0f64..3.0, wy in 0.01f64..3.0) {
        let (z, w) = (Point::new(zx, zy), Point::new(wx, wy));
        let m = affine_fixing_unit(z, w).unwrap();
        prop_assert!(m.apply(Point::new(0.0, 0.0)).dist(Point::new(0.0, 0.0)) <= 1e-12);
        prop_assert!(m.apply(Point::new(1.0, 0.0)).dist(Point::new(1.0, 0.0)) <= 1e-12);
        prop_assert!(m.apply(z).dist(w) <= 1e-9 * (1.0 + w.x.abs() + w.y.abs()));
        prop_assert!(rel(dilatation(&m).unwrap(), dilatation_three_point(z, w).unwrap()) <= 1e-9);
    }
}

fn parent_index(level: &CantorLevel, parents: &CantorLevel, i: usize) -> usize {
    let hits: Vec<usize> = (0..parents.squares.len())
        .filter(|&j| parents.squares[j].contains_square(&level.squares[i], 1e-12))
        .collect();
    assert_eq!(hits.len(), 1, "square {i} lies in {} parents", hits.len());
    hits[0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn levels_nest_in_exactly_one_parent(g in gauge(), n in 1usize..6) {
        for family in [Family::Lambda(g), Family::Sigma] {
            let parents = build_family_level(&family, n - 1, 8).unwrap();
            let level = build_family_level(&family, n, 8).unwrap();
            for i in 0..level.squares.len() {
                prop_assert_eq!(parent_index(&level, &parents, i), i / 4);
            }
        }
    }

    #[test]
    fn gaps_and_insets(g in gauge(), n in 1usize..8) {
        let level = build_family_level(&Family::Lambda(g.clone()), n, 8).unwrap();
        let parents = build_family_level(&Family::Lambda(g.clone()), n - 1, 8).unwrap();
        let inset = g.inset(n);
        for (p, kids) in parents.squares.iter().zip(level.squares.chunks(4)) {
            let (nw, sw, ne) = (kids[0], kids[1], kids[2]);
            let left_edge = p.center.x - 0.5 * p.side;
            prop_assert!(((nw.center.x - 0.5 * nw.side) - left_edge - inset).abs() <= 1e-12);
            let top_edge = p.center.y + 0.5 * p.side;
            prop_assert!((top_edge - (nw.center.y + 0.5 * nw.side) - inset).abs() <= 1e-12);
            let horizontal_gap = (ne.center.x - 0.5 * ne.side) - (nw.center.x + 0.5 * nw.side);
            let vertical_gap = (nw.center.y - 0.5 * nw.side) - (sw.center.y + 0.5 * sw.side);
            prop_assert!((horizontal_gap - 2.0 * inset).abs() <= 1e-12);
            prop_assert!((vertical_gap - 2.0 * inset).abs() <= 1e-12);
        }
    }

    #[test]
    fn box_dimension_is_translation_invariant(dx in -0.5f64..0.5, dy in -0.5f64..0.5, lattice in -20i32..20) {
        let shift = |off: Point| {
            move |n: usize| -> qcforge_core::Result<CantorLevel> {
                let mut level = build_family_level(&Family::Sigma, n, 10)?;
                for s in &mut level.squares {
                    *s = Square { center: s.center + off, side: s.side };
                }
                Ok(level)
            }
        };
        let depths = [4, 6, 8];
        let base = box_dimension(shift(Point::default()), &depths).unwrap().value;
        let h = 8f64.powi(-4);
        let on_lattice = box_dimension(shift(Point::new(lattice as f64 * h, -lattice as f64 * h)), &depths).unwrap().value;
        prop_assert_eq!(base, on_lattice);
        let moved = box_dimension(shift(Point::new(dx, dy)), &depths).unwrap().value;
        prop_assert!((base - moved).abs() <= 0.05, "{} vs {}", base, moved);
    }

    #[test]
    fn annulus_dilatation_grows_with_outer_hole(a in 0.02f64..0.45, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let b1 = a + lo * (0.48 - a);
        let b2 = a + hi * (0.48 - a);
        let k1 = annulus_extension(a, b1).unwrap().max_dilatation().unwrap();
        let k2 = annulus_extension(a, b2).unwrap().max_dilatation().unwrap();
        prop_assert!(k1 <= k2 * (1.0 + 1e-12));
    }

    #[test]
    fn extensions_and_inverses_validate(a in 0.02f64..0.45, t in 0.0f64..1.0, twist_a in 0.005f64..0.2) {
        let b = a + t * (0.48 - a);
        for m in [annulus_extension(a, b).unwrap(), twist_extension(twist_a).unwrap()] {
            let forward = validate(&m, m.boundary.target_area(), 1e-9);
            prop_assert!(forward.passes(1e-9), "{:?}", forward);
            let inv = m.inverse().unwrap();
            let back = validate(&inv, m.boundary.source_area(), 1e-9);
            prop_assert!(back.passes(1e-9), "{:?}", back);
            prop_assert_eq!(inv.max_dilatation().unwrap(), m.max_dilatation().unwrap());
        }
    }

    #[test]
    fn refinement_only_changes_deep_squares(g in gauge(), h in gauge(), n in 1usize..7, seed in any::<u64>()) {
        let m = standard_homeo(&g, &h, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 1..=n {
            prop_assert!(refinement_deviation(&m, k, 50, &mut rng) <= 1e-12);
        }
    }

    #[test]
    fn inverse_profiles_swap_sides(g in gauge(), h in gauge(), n in 1usize..9) {
        let m = standard_homeo(&g, &h, n).unwrap();
        let image = dilatation_profile(&m, ProfileSide::Image);
        let inverse_domain = dilatation_profile(&m.invert(), ProfileSide::Domain);
        prop_assert_eq!(&image.entries, &inverse_domain.entries);
        prop_assert_eq!(image.truncation_bound, inverse_domain.truncation_bound);
    }

    #[test]
    fn deeper_profiles_refine(g in gauge(), h in gauge(), n in 1usize..9) {
        let deep = standard_homeo(&g, &h, n + 1).unwrap();
        let shallow = deep.truncated(n);
        for side in [ProfileSide::Domain, ProfileSide::Image] {
            let p = dilatation_profile(&shallow, side);
            let q = dilatation_profile(&deep, side);
            for &(t, area) in &p.entries {
                let extra = q.exceedance(t) - area;
                prop_assert!(extra >= -1e-15 && extra <= p.truncation_bound + 1e-15, "t={} extra={}", t, extra);
            }
            prop_assert!(q.truncation_bound <= p.truncation_bound);
        }
    }

    #[test]
    fn david_check_is_monotone(
        case in 0usize..4, n in 1usize..10,
        c in 0.1f64..4.0, alpha in 0.05f64..2.0, k0 in 1.0f64..30.0,
        dc in 1.0f64..3.0, dalpha in 0.2f64..1.0, dk in 0.0f64..20.0,
    ) {
        let sc: Scenario = ["slow-to-geometric:1", "geometric-to-fast:1", "slow-to-fast", "sigma-to-sqrt"][case].parse().unwrap();
        let p = dilatation_profile(&sc.build(n).unwrap(), ProfileSide::Domain);
        let base = check_david(&p, &DavidParams::new(c, alpha, k0).unwrap()).passed;
        let looser = check_david(&p, &DavidParams::new(c * dc, alpha * dalpha, k0 + dk).unwrap()).passed;
        prop_assert!(!base || looser);
    }

    #[test]
    fn qc_dimension_bounds_nest(alpha in 0.01f64..2.0, k1 in 1.0f64..5.0, dk in 0.0f64..5.0) {
        let (lo1, hi1) = qc_dimension_bounds(k1, alpha).unwrap();
        let (lo2, hi2) = qc_dimension_bounds(k1 + dk, alpha).unwrap();
        prop_assert!(lo2 <= lo1 + 1e-12 && hi1 <= hi2 + 1e-12);
        prop_assert!(lo1 <= alpha + 1e-12 && alpha <= hi1 + 1e-12);
        prop_assert!(0.0 <= lo2 && hi2 <= 2.0);
    }
}
