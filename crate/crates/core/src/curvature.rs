//! Gauss–Bonnet diagnostics for measure-valued curvature.
//!
//! `λ(r) = r·du*/dr` with `u*` the circle mean of `u`. Across an annulus,
//! `λ(t) − λ(s) = −K_g(D_t ∖ D_s)/2π`; as `r → 0`, `−2πλ(r) → K_g({x})`.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::geom::{delta, Point, Region};
use crate::measure::SignedMeasure;
use crate::metric::{ConformalMetric, MetricError};
use crate::quadrature::{gauss_legendre, rect_log_gradient_x};

/// Relative radius offset of the flux difference.
pub const FLUX_OFFSET: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurvatureError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("need 0 < s < t (got s = {s}, t = {t})")]
    BadRadii { s: f64, t: f64 },
    #[error("test function support leaves the domain")]
    SupportOutOfDomain,
}

/// `λ(r)` by a difference of circle means at `r(1 ± 0.02)`, scaled by the
/// log-radius gap so that pure `β log r` profiles give `β` exactly.
pub fn radial_flux(g: &ConformalMetric, center: Point, r: f64) -> Result<f64, CurvatureError> {
    let (lo, hi) = (r * (1.0 - FLUX_OFFSET), r * (1.0 + FLUX_OFFSET));
    let du = g.circle_mean(center, hi)? - g.circle_mean(center, lo)?;
    Ok(du / (hi / lo).ln())
}

/// Both sides of the annulus identity and their mismatch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GbCheck {
    pub s: f64,
    pub t: f64,
    /// `λ(t) − λ(s)`.
    pub lhs: f64,
    /// `−K_g(D_t ∖ D_s)/2π`.
    pub rhs: f64,
    pub residual: f64,
    pub pass: bool,
}

/// A metric with its curvature measure, for repeated annulus checks.
pub struct GaussBonnet<'a> {
    pub metric: &'a ConformalMetric,
    pub curvature: SignedMeasure,
}

impl<'a> GaussBonnet<'a> {
    pub fn new(metric: &'a ConformalMetric) -> Self {
        GaussBonnet { metric, curvature: metric.curvature_of() }
    }

    /// PASS when the residual is at most 1% of `|λ(t)| + |λ(s)| + 1`.
    pub fn annulus(&self, center: Point, s: f64, t: f64) -> Result<GbCheck, CurvatureError> {
        if !(s > 0.0 && t > s) {
            return Err(CurvatureError::BadRadii { s, t });
        }
        let ls = radial_flux(self.metric, center, s)?;
        let lt = radial_flux(self.metric, center, t)?;
        let rhs = -self.curvature.signed_mass(&Region::annulus(center, s, t)) / (2.0 * PI);
        let lhs = lt - ls;
        let residual = (lhs - rhs).abs();
        Ok(GbCheck { s, t, lhs, rhs, residual, pass: residual <= 0.01 * (lt.abs() + ls.abs() + 1.0) })
    }
}

pub fn gb_annulus_check(g: &ConformalMetric, center: Point, s: f64, t: f64) -> Result<GbCheck, CurvatureError> {
    GaussBonnet::new(g).annulus(center, s, t)
}

/// `K_g({center})` from `−2π λ` at `r = 8h`, Richardson-extrapolated with
/// `r = 16h` against an `O(r²)` error.
pub fn point_mass_detect(g: &ConformalMetric, center: Point) -> Result<f64, CurvatureError> {
    let r = 8.0 * g.spacing();
    let (l1, l2) = (radial_flux(g, center, r)?, radial_flux(g, center, 2.0 * r)?);
    Ok(-2.0 * PI * (4.0 * l1 - l2) / 3.0)
}

/// The C² bump `(1 − |x − c|²/R²)³` on `D_R(c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bump {
    pub center: Point,
    pub radius: f64,
}

impl Bump {
    pub fn new(center: Point, radius: f64) -> Self {
        Bump { center, radius }
    }

    fn q(&self, w: Point) -> f64 {
        w.norm_sq() / (self.radius * self.radius)
    }

    /// `φ` at offset `w = x − c`.
    pub fn value_at(&self, w: Point) -> f64 {
        let q = self.q(w);
        if q >= 1.0 {
            0.0
        } else {
            (1.0 - q).powi(3)
        }
    }

    pub fn gradient_at(&self, w: Point) -> Point {
        let q = self.q(w);
        if q >= 1.0 {
            return Point::ORIGIN;
        }
        w * (-6.0 * (1.0 - q).powi(2) / (self.radius * self.radius))
    }

    pub fn laplacian_at(&self, w: Point) -> f64 {
        let q = self.q(w);
        if q >= 1.0 {
            return 0.0;
        }
        let r2 = self.radius * self.radius;
        (-12.0 * (1.0 - q).powi(2) + 24.0 * q * (1.0 - q)) / r2
    }
}

/// The weak identity `∫∇φ·∇u = ∫φ dK_g` evaluated on both sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeakCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// `|K_g|(supp φ)·max φ`, the natural size of either side.
    pub scale: f64,
}

/// Cells within this many cell widths of an atom use the exact kernel integral.
const NEAR_CELLS: f64 = 3.0;

/// `∫∇φ·∇u` by cellwise Gauss quadrature: exact kernel integrals for atom
/// cells, lattice-aligned cells for the smooth part, and `−∫ t Δφ` for
/// radial terms.
pub fn weak_laplacian_check(g: &ConformalMetric, phi: &Bump) -> Result<WeakCheck, CurvatureError> {
    if !g.background.contains_disk(phi.center, phi.radius) {
        return Err(CurvatureError::SupportOutOfDomain);
    }
    let periodic = g.is_torus();
    let c = phi.center;
    let rad = phi.radius;
    let (origin, h) = match &g.smooth {
        Some(s) => (s.origin, s.spacing),
        None => (c - Point::new(rad, rad), g.spacing()),
    };
    // cell index range covering the support, in the chart around c
    let lo_x = ((c.x - rad - origin.x) / h).floor() as i64;
    let hi_x = ((c.x + rad - origin.x) / h).ceil() as i64;
    let lo_y = ((c.y - rad - origin.y) / h).floor() as i64;
    let hi_y = ((c.y + rad - origin.y) / h).ceil() as i64;
    let (gx, gw) = gauss_legendre(3);
    let atoms: Vec<(Point, f64)> = g.atoms.iter().map(|a| (c + delta(c, a.location, periodic), a.beta)).collect();
    let terms: Vec<_> = g.terms.iter().map(|t| (c + delta(c, t.center(), periodic), *t)).collect();

    let mut lhs = 0.0;
    for j in lo_y..hi_y {
        for i in lo_x..hi_x {
            let x0 = origin.x + i as f64 * h;
            let y0 = origin.y + j as f64 * h;
            let (x1, y1) = (x0 + h, y0 + h);
            let mid = Point::new(x0 + 0.5 * h, y0 + 0.5 * h);
            if (mid - c).norm() > rad + h {
                continue;
            }
            let gauss = |f: &dyn Fn(Point) -> f64, sub: usize| -> f64 {
                let hs = h / sub as f64;
                let mut acc = 0.0;
                for sj in 0..sub {
                    for si in 0..sub {
                        let (ax, ay) = (x0 + si as f64 * hs, y0 + sj as f64 * hs);
                        for (xi, wi) in gx.iter().zip(&gw) {
                            for (yj, wj) in gx.iter().zip(&gw) {
                                let p = Point::new(ax + 0.5 * hs * (1.0 + xi), ay + 0.5 * hs * (1.0 + yj));
                                acc += wi * wj * f(p);
                            }
                        }
                    }
                }
                acc * 0.25 * hs * hs
            };
            if let Some(s) = &g.smooth {
                lhs += gauss(&|p| phi.gradient_at(p - c).dot(s.bilinear_gradient(p)), 1);
            }
            for &(z, beta) in &atoms {
                let w = mid - z;
                if w.x.abs().max(w.y.abs()) <= NEAR_CELLS * h {
                    let (a0, a1, b0, b1) = (x0 - z.x, x1 - z.x, y0 - z.y, y1 - z.y);
                    let kernel = Point::new(rect_log_gradient_x(a0, a1, b0, b1), rect_log_gradient_x(b0, b1, a0, a1));
                    lhs += beta * phi.gradient_at(mid - c).dot(kernel);
                } else {
                    lhs += gauss(&|p| beta * phi.gradient_at(p - c).dot((p - z) * (1.0 / (p - z).norm_sq())), 2);
                }
            }
            for &(z, t) in &terms {
                let sub = if (mid - z).norm() < NEAR_CELLS * h { 6 } else { 1 };
                lhs -= gauss(&|p| t.value((p - z).norm()) * phi.laplacian_at(p - c), sub);
            }
        }
    }
    let k = g.curvature_of();
    let rhs = k.integrate_test(|x| phi.value_at(delta(c, x, periodic)));
    let scale = k.total_variation(&Region::disk(c, rad));
    Ok(WeakCheck { lhs, rhs, residual: (lhs - rhs).abs(), scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{abs_line, cone, hulin_troyanov};
    use crate::geom::Background;
    use crate::metric::ConeAtom;

    #[test]
    fn cone_flux_is_beta() {
        let g = cone(0.3, Point::ORIGIN, 1.0).unwrap();
        for r in [0.01, 0.1, 0.5] {
            assert!((radial_flux(&g, Point::ORIGIN, r).unwrap() - 0.3).abs() < 1e-12);
        }
        let flat = ConformalMetric::flat(Background::square(1.0));
        assert_eq!(radial_flux(&flat, Point::ORIGIN, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn off_centre_atom_outside_gives_zero_flux() {
        let g = ConformalMetric::new(Background::square(1.0), vec![ConeAtom::new(Point::new(0.6, 0.2), 0.4)], None).unwrap();
        assert!(radial_flux(&g, Point::ORIGIN, 0.3).unwrap().abs() < 1e-4);
    }

    #[test]
    fn point_masses() {
        for beta in [-0.9, -0.5, 0.3, 0.9] {
            let g = cone(beta, Point::ORIGIN, 1.0).unwrap();
            let m = point_mass_detect(&g, Point::ORIGIN).unwrap();
            assert!((m + 2.0 * PI * beta).abs() < 1e-9);
        }
        let g = cone(0.3, Point::ORIGIN, 1.0).unwrap();
        assert!(point_mass_detect(&g, Point::new(0.5, 0.5)).unwrap().abs() < 1e-2);
    }

    #[test]
    fn hulin_troyanov_flux_matches_finite_radius_oracle() {
        let a = 1.5;
        let g = hulin_troyanov(a, 0.6).unwrap();
        let r: f64 = 1.0 / 32.0;
        // u* = −log r − a log(−log r), so r·u*' = −1 − a / log r
        assert!((radial_flux(&g, Point::ORIGIN, r).unwrap() - (-1.0 - a / r.ln())).abs() < 1e-3);
    }

    #[test]
    fn annulus_identity_for_cone_and_abs_line() {
        let g = cone(0.3, Point::new(0.1, 0.0), 1.0).unwrap();
        let c = gb_annulus_check(&g, Point::ORIGIN, 0.2, 0.5).unwrap();
        assert!(c.pass && (c.rhs - 0.0).abs() < 1e-12, "{c:?}");
        let g = abs_line(1.0, 1.0 / 64.0).unwrap();
        let c = gb_annulus_check(&g, Point::new(0.05, 0.0), 0.2, 0.6).unwrap();
        assert!(c.pass, "{c:?}");
        assert!(matches!(gb_annulus_check(&g, Point::ORIGIN, 0.5, 0.2), Err(CurvatureError::BadRadii { .. })));
    }

    #[test]
    fn weak_identity_for_an_atom() {
        let g = cone(0.4, Point::new(0.03, -0.02), 1.0).unwrap();
        let phi = Bump::new(Point::ORIGIN, 0.5);
        let w = weak_laplacian_check(&g, &phi).unwrap();
        let m = 2.0 * PI * 0.4;
        assert!((w.rhs + m * phi.value_at(Point::new(0.03, -0.02))).abs() < 1e-12);
        assert!(w.residual < 0.01 * m, "{w:?}");
        let flat = ConformalMetric::flat(Background::square(1.0));
        assert_eq!(weak_laplacian_check(&flat, &phi).unwrap().lhs, 0.0);
    }
}
