//! Invariants under randomised inputs.

use std::f64::consts::PI;

use curvlab::approx::mollify_measure;
use curvlab::builtins::cone;
use curvlab::geodesic::{build_a_string, segment_integral, BaseDistance, GridOptions, Solver, Stencil};
use curvlab::geom::{Background, Point};
use curvlab::measure::{Atom, SignedMeasure};
use proptest::prelude::*;

fn point(range: f64) -> impl Strategy<Value = Point> {
    (-range..range, -range..range).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn distance_is_a_metric(beta in -0.8f64..0.9, x in point(0.9), y in point(0.9), z in point(0.9)) {
        let g = cone(beta, Point::ORIGIN, 1.0).unwrap();
        let s = Solver::new(&g, &GridOptions::default().with_h(1.0 / 32.0));
        let (dxy, dyx) = (s.distance(x, y).unwrap(), s.distance(y, x).unwrap());
        let (dxz, dyz) = (s.distance(x, z).unwrap(), s.distance(y, z).unwrap());
        // attachment edges make graph distances only approximately symmetric
        prop_assert!((dxy - dyx).abs() <= 0.01 * dxy.max(1e-3));
        prop_assert!(dxz <= dxy + dyz + 0.02 * (dxy + dyz));
        prop_assert!(s.distance(x, x).unwrap() == 0.0);
    }
}

proptest! {
    #[test]
    fn edge_weights_are_symmetric_and_positive(beta in -0.9f64..0.9, p in point(0.9), q in point(0.9)) {
        prop_assume!(p.dist(q) > 1e-6);
        let g = cone(beta, Point::new(0.05, -0.02), 1.0).unwrap();
        let (a, b) = (segment_integral(&g, p, q), segment_integral(&g, q, p));
        prop_assert!(a > 0.0 && a.is_finite());
        prop_assert!((a - b).abs() <= 1e-7 * a);
    }

    #[test]
    fn mollification_conserves_mass(
        atoms in prop::collection::vec((point(0.5), -3.0f64..3.0), 1..5),
        eps in 0.05f64..0.2,
    ) {
        let mu = SignedMeasure::from_atoms(atoms.iter().map(|&(p, m)| Atom::new(p, m)).collect());
        let m = mollify_measure(&mu, eps, 1.0 / 64.0).unwrap();
        prop_assert!((m.total_mass() - mu.total_mass()).abs() <= 1e-8 * mu.total_variation_all().max(1.0));
    }

    #[test]
    fn jordan_parts_are_nonnegative_and_recombine(
        atoms in prop::collection::vec((point(0.8), -3.0f64..3.0), 1..6),
        k in 0.5f64..4.0,
    ) {
        let mu = SignedMeasure::from_atoms(atoms.iter().map(|&(p, m)| Atom::new(p, m)).collect());
        let (pos, neg) = mu.jordan_decompose();
        prop_assert!(pos.atoms.iter().chain(&neg.atoms).all(|a| a.mass >= 0.0));
        let phi = |p: Point| (k * p.x).sin() + p.y * p.y;
        let lhs = mu.integrate_test(phi);
        let rhs = pos.integrate_test(phi) - neg.integrate_test(phi);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert!((pos.total_variation_all() + neg.total_variation_all() - mu.total_variation_all()).abs() <= 1e-12 * mu.total_variation_all().max(1.0));
    }

    #[test]
    fn a_string_gaps_lie_in_a_to_2a(
        corners in prop::collection::vec(point(1.0), 2..6),
        a in 0.02f64..0.2,
    ) {
        let len: f64 = corners.windows(2).map(|w| w[0].dist(w[1])).sum();
        let chord = corners[0].dist(*corners.last().unwrap());
        prop_assume!(len > 4.0 * a && chord > 2.0 * a);
        if let Ok(s) = build_a_string(&corners, a, BaseDistance::Euclidean) {
            prop_assert_eq!(s.points[0], corners[0]);
            for gap in s.gaps() {
                prop_assert!(gap >= a * (1.0 - 1e-9) && gap <= 2.0 * a * (1.0 + 1e-9), "gap {} for a {}", gap, a);
            }
        }
    }

    #[test]
    fn torus_canonical_is_idempotent(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let bg = Background::FlatTorus;
        let c = bg.canonical(Point::new(x, y));
        prop_assert!(bg.contains(c));
        prop_assert_eq!(bg.canonical(c), c);
        prop_assert!(bg.delta(c, Point::new(x, y)).norm() < 1e-12);
    }
}

#[test]
fn stencils_are_symmetric() {
    for s in [Stencil::S8, Stencil::S16, Stencil::S32] {
        let o = s.offsets();
        assert_eq!(o.len(), s.size());
        let half = o.len() / 2;
        for k in 0..half {
            assert_eq!(o[k + half], (-o[k].0, -o[k].1));
        }
        let mut angles: Vec<f64> = o.iter().map(|&(i, j)| (j as f64).atan2(i as f64).rem_euclid(2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup();
        assert_eq!(angles.len(), o.len(), "directions are distinct");
    }
}

#[test]
fn restricting_the_domain_never_shortens_distances() {
    let g = cone(-0.4, Point::new(0.1, 0.0), 1.0).unwrap();
    let s = Solver::new(&g, &GridOptions::default().with_h(1.0 / 64.0));
    let x = Point::new(-0.5, 0.0);
    let ys = [Point::new(0.5, 0.1), Point::new(0.6, -0.5)];
    let free = s.distances_from(x, &ys).unwrap();
    let mask: Vec<bool> = s.graph.positions.iter().map(|p| !(p.x.abs() < 0.2 && p.y.abs() < 0.6)).collect();
    let f = s.field_masked(&curvlab::geodesic::Source::Point(x), Some(&mask)).unwrap();
    for (y, d) in ys.iter().zip(&free) {
        assert!(s.eval(&f, *y, Some(&mask)) >= d - 1e-12);
    }
}
