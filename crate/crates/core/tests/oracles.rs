//! Library results against independent test-side oracles.

use std::f64::consts::PI;

use curvlab::builtins::cone;
use curvlab::field::DensityField;
use curvlab::geodesic::{annulus_distance, circle_length, curve_length, distance, edge_weight, GridOptions};
use curvlab::geom::{Background, Point, Region};
use curvlab::measure::{Atom, LineMass, SignedMeasure};
use curvlab::metric::{ConeAtom, ConformalMetric};
use curvlab::potential::{log_potential, solve_periodic_poisson};
use curvlab::quadrature::power_weighted;

/// Composite 4-point Gauss–Legendre.
fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    const X: [f64; 2] = [0.3399810435848563, 0.8611363115940526];
    const W: [f64; 2] = [0.6521451548625461, 0.3478548451374538];
    let w = (b - a) / n as f64;
    (0..n)
        .map(|i| {
            let m = a + (i as f64 + 0.5) * w;
            X.iter().zip(W).map(|(&x, wt)| wt * (f(m - 0.5 * w * x) + f(m + 0.5 * w * x))).sum::<f64>() * 0.5 * w
        })
        .sum()
}

#[test]
fn line_potential_matches_direct_quadrature() {
    let (p, q) = (Point::new(-0.3, 0.1), Point::new(0.4, -0.2));
    let mu = SignedMeasure::zero().with_lines(vec![LineMass::new(p, q, 1.7)]);
    let len = p.dist(q);
    for x in [Point::new(0.5, 0.5), Point::new(0.0, -0.05), Point::new(-0.8, 0.9)] {
        let direct = -1.7 / (2.0 * PI) * gauss(|t| x.dist(p.lerp(q, t)).ln(), 0.0, 1.0, 2000) * len;
        let got = log_potential(&mu, x).unwrap();
        assert!((got - direct).abs() < 1e-8, "{got} vs {direct}");
    }
}

#[test]
fn atom_potential_is_the_kernel() {
    let mu = SignedMeasure::from_atoms(vec![Atom::new(Point::new(0.2, 0.0), 3.0), Atom::new(Point::new(-0.1, 0.4), -1.0)]);
    let x = Point::new(0.5, -0.3);
    let want = -(3.0 * x.dist(Point::new(0.2, 0.0)).ln() - x.dist(Point::new(-0.1, 0.4)).ln()) / (2.0 * PI);
    assert!((log_potential(&mu, x).unwrap() - want).abs() < 1e-14);
}

/// Outside the support, a radial density acts like its total mass at the
/// centre (the mean-value property of `log|x − ·|`).
#[test]
fn radial_density_potential_outside_support() {
    let r = 0.4;
    let field = DensityField::covering(Point::new(-0.5, -0.5), Point::new(0.5, 0.5), 1.0 / 128.0)
        .from_fn(|p| (1.0 - p.norm_sq() / (r * r)).max(0.0).powi(2));
    let mass = field.integral();
    let mu = SignedMeasure::zero().with_density(field);
    for x in [Point::new(0.9, 0.0), Point::new(0.6, 0.7), Point::new(-1.5, 0.2)] {
        let want = -mass / (2.0 * PI) * x.norm().ln();
        let got = log_potential(&mu, x).unwrap();
        assert!((got - want).abs() < 1e-5 * mass, "{got} vs {want}");
    }
}

#[test]
fn periodic_poisson_of_a_cosine_mode() {
    let n = 64;
    let f = DensityField::torus_zeros(n).from_fn(|p| (2.0 * PI * p.x).cos() + 0.5 * (4.0 * PI * p.y).sin());
    let u = solve_periodic_poisson(&f);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let p = u.node(i, j);
            let want = (2.0 * PI * p.x).cos() / (4.0 * PI * PI) + 0.5 * (4.0 * PI * p.y).sin() / (16.0 * PI * PI);
            worst = worst.max((u.get(i, j) - want).abs());
        }
    }
    // 5-point symbol: relative error (πkh)²/3 for mode k
    assert!(worst < 4e-3 / (4.0 * PI * PI), "{worst}");
}

#[test]
fn power_weighted_against_substitution() {
    for beta in [-0.9, -0.5, 0.0, 0.7] {
        let lib = power_weighted(|s| (3.0 * s).cos(), beta, 0.8);
        // s = 0.8·v^k with k(1+β) ≥ 2 removes the singularity
        let k = (2.0 / (1.0 + beta)).ceil();
        let oracle = gauss(
            |v| {
                let s = 0.8 * v.powf(k);
                s.powf(beta) * (3.0 * s).cos() * 0.8 * k * v.powf(k - 1.0)
            },
            0.0,
            1.0,
            400,
        );
        assert!((lib - oracle).abs() < 1e-9 * oracle.abs().max(1.0), "β={beta}: {lib} vs {oracle}");
    }
}

#[test]
fn flat_distances_are_euclidean() {
    let g = ConformalMetric::flat(Background::square(5.0));
    let w = edge_weight(&g, Point::ORIGIN, Point::new(3.0, 4.0)).unwrap();
    assert!((w - 5.0).abs() < 1e-12, "{w}");
    // off-stencil direction: graph distance overestimates by the stencil anisotropy
    let d = distance(&g, Point::ORIGIN, Point::new(3.0, 4.0), &GridOptions::default().with_h(1.0 / 16.0)).unwrap();
    assert!(d >= 5.0 - 1e-9 && d / 5.0 - 1.0 < 0.028, "{d}");
    let unit = ConformalMetric::flat(Background::square(1.0));
    let d = distance(&unit, Point::new(-1.0, -1.0), Point::new(1.0, 1.0), &GridOptions::default()).unwrap();
    assert!((d / (2.0 * 2f64.sqrt()) - 1.0).abs() < 0.03);
}

#[test]
fn cone_curve_and_circle_lengths() {
    let beta = 0.3;
    let g = cone(beta, Point::ORIGIN, 1.0).unwrap();
    // radial segment: ∫_a^b s^β ds
    let (a, b) = (0.1, 0.9);
    let want = gauss(|s| s.powf(beta), a, b, 200);
    let got = curve_length(&g, &[Point::new(a, 0.0), Point::new(b, 0.0)]).unwrap();
    assert!((got / want - 1.0).abs() < 1e-8);
    // circle through the apex: |x| = 2ρ cos θ on |x − (ρ,0)| = ρ
    let rho = 0.3;
    let want = gauss(|t| (2.0 * rho * (t / 2.0).cos()).abs().powf(beta) * rho, -PI, PI, 4000);
    let got = circle_length(&g, Point::new(rho, 0.0), rho).unwrap();
    assert!((got / want - 1.0).abs() < 1e-5, "{got} vs {want}");
}

#[test]
fn annulus_distance_on_a_cone() {
    // radial profile only: d = ∫_s^t r^β dr for concentric circles
    let g = ConformalMetric::new(Background::square(1.0), vec![ConeAtom::new(Point::ORIGIN, -0.4)], None).unwrap();
    let (s, t) = (0.05, 0.6);
    let want = gauss(|r| r.powf(-0.4), s, t, 400);
    let got = annulus_distance(&g, &Region::disk(Point::ORIGIN, s), &Region::disk(Point::ORIGIN, t), &GridOptions::default())
        .unwrap();
    assert!((got / want - 1.0).abs() < 1e-3, "{got} vs {want}");
}
