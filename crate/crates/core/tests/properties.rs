use std::f64::consts::PI;
use std::sync::Arc;

use celldiv::engine::Process;
use celldiv::geometry::{Hyperplane, Point, Polygon};
use celldiv::measures::{DirectionalDistribution, HyperplaneMeasure, MeasureOnWindow};
use celldiv::rules::{DivisionRule, RulePair, SelectionRule};
use proptest::prelude::*;

fn polygon_strategy() -> impl Strategy<Value = Polygon> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..12).prop_filter_map(
        "degenerate hull",
        |pts| {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            Polygon::convex_hull(&pts).ok().filter(|p| p.area() > 1e-3)
        },
    )
}

fn measure_strategy() -> impl Strategy<Value = HyperplaneMeasure> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|i| HyperplaneMeasure::isotropic(i).unwrap()),
        (0.1f64..5.0, 0.0f64..PI, 0.0f64..PI, 0.05f64..0.95).prop_filter_map(
            "coincident atoms",
            |(i, t1, t2, w)| {
                let d = DirectionalDistribution::atoms(vec![(t1, w), (t2, 1.0 - w)]).ok()?;
                HyperplaneMeasure::new(i, d).ok()
            }
        ),
    ]
}

fn selection_rules(m: Arc<HyperplaneMeasure>) -> Vec<SelectionRule> {
    vec![
        SelectionRule::IntrinsicVolume(0),
        SelectionRule::IntrinsicVolume(1),
        SelectionRule::IntrinsicVolume(2),
        SelectionRule::VertexCount,
        SelectionRule::HittingMeasure(m),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn hitting_predicate_matches_split(c in polygon_strategy(), theta in 0.0f64..PI, frac in -0.2f64..1.2) {
        let (lo, hi) = c.offset_interval(theta);
        let a = lo + frac * (hi - lo);
        let h = Hyperplane::new(theta, a).unwrap();
        if let Ok(s) = c.split(&h) {
            let tol = 1e-12 * c.scale();
            let strictly_inside = lo + tol < a && a < hi - tol;
            prop_assert_eq!(s.is_proper(), strictly_inside);
            for piece in [&s.plus, &s.minus].into_iter().flatten() {
                prop_assert!(piece.validate().is_ok());
                prop_assert!(piece.vertex_count() <= c.vertex_count() + 2);
            }
        }
    }

    #[test]
    fn width_translation_invariant(c in polygon_strategy(), theta in 0.0f64..PI, dx in -100.0f64..100.0, dy in -100.0f64..100.0) {
        let d = c.translate(Point::new(dx, dy));
        prop_assert!((c.width(theta) - d.width(theta)).abs() <= 1e-12 * (1.0 + dx.abs() + dy.abs()));
        prop_assert!(c.width(theta) > 0.0);
    }

    #[test]
    fn rates_positive_and_translation_invariant(c in polygon_strategy(), m in measure_strategy(), dx in -10.0f64..10.0, dy in -10.0f64..10.0) {
        let d = c.translate(Point::new(dx, dy));
        for rule in selection_rules(Arc::new(m)) {
            let (rc, rd) = (rule.rate(&c), rule.rate(&d));
            prop_assert!(rc > 0.0);
            prop_assert!((rc - rd).abs() <= 1e-10 * rc.max(1.0), "{} {} {}", rule.name(), rc, rd);
        }
    }

    #[test]
    fn hitting_mass_monotone(c in polygon_strategy(), m in measure_strategy(), s in 0.05f64..0.95, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let center = c.sample_uniform_point(&mut rng);
        let b = Polygon::new(c.vertices().iter().map(|&v| center + (v - center) * s).collect()).unwrap();
        prop_assert!(m.hitting_mass(&b) <= m.hitting_mass(&c) * (1.0 + 1e-12));
        let mw = MeasureOnWindow::new(Arc::new(m), c.clone());
        let p = mw.hitting_prob(&b).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((mw.total() - mw.base().hitting_mass(&c)).abs() <= 1e-10 * mw.total());
    }

    #[test]
    fn fundamental_equation_for_shared_measure(m in measure_strategy(), seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = celldiv::analysis::identities::random_triple(&mut rng);
        let rules = RulePair::stit(Arc::new(m.clone()));
        let lam = |c: &Polygon| rules.selection.rate(c);
        let law = |c: &Polygon| celldiv::rules::division_hit_prob(&rules.division, c, &t.probe);
        let lhs = lam(&t.inner) * law(&t.inner);
        let rhs = lam(&t.outer) * law(&t.outer);
        let mass = m.hitting_mass(&t.probe);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * mass);
        prop_assert!((lhs - mass).abs() <= 1e-10 * mass);
    }

    #[test]
    fn process_state_invariants(seed in any::<u64>(), t in 0.0f64..4.0, which in 0usize..3) {
        let m = Arc::new(HyperplaneMeasure::isotropic(1.0).unwrap());
        let rules = match which {
            0 => RulePair::stit(m),
            1 => RulePair::new(SelectionRule::IntrinsicVolume(2), DivisionRule::RestrictedMeasure(m)),
            _ => RulePair::new(SelectionRule::HittingMeasure(m), DivisionRule::PointDriven(DirectionalDistribution::Isotropic)),
        };
        let w = Polygon::regular(Point::new(0.0, 0.0), 1.5, 7).unwrap();
        let mut p = Process::new(w, rules, seed).unwrap().with_invariant_checks();
        p.advance(t).unwrap();
        prop_assert!(p.verify_invariants().is_ok());
        prop_assert_eq!(p.cell_count(), p.division_count() + 1);
        // Chords are pairwise interior-disjoint: any two meet at most at a
        // point, so no two are collinear and overlapping.
        let segs = p.segments();
        for i in 0..segs.len() {
            for j in i + 1..segs.len() {
                let (a, b) = (segs[i].segment, segs[j].segment);
                let d = a.direction();
                let collinear = d.cross(b.p - a.p).abs() <= 1e-9 * d.norm()
                    && d.cross(b.q - a.p).abs() <= 1e-9 * d.norm();
                prop_assert!(!(collinear && a.intersects(&b, 1e-9)));
            }
        }
    }

    #[test]
    fn crop_commutes_with_time(seed in any::<u64>(), t1 in 0.1f64..1.5, t2 in 1.5f64..3.0) {
        let m = Arc::new(HyperplaneMeasure::isotropic(1.0).unwrap());
        let w = Polygon::rectangle(0.0, 0.0, 3.0, 3.0).unwrap();
        let v = Polygon::rectangle(1.0, 0.5, 2.5, 2.0).unwrap();
        let mut p = Process::new(w, RulePair::stit(m), seed).unwrap();
        let snaps = p.snapshots(&[t1, t2]).unwrap();
        let direct = celldiv::engine::crop_segments(p.segments_at(t1), &v, t1);
        prop_assert_eq!(snaps[0].crop(&v).unwrap(), direct);
    }
}
