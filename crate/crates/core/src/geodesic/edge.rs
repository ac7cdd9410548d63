//! `∫ e^u ds` along straight segments, resolving atoms and lattice kinks.

use crate::geom::Point;
use crate::metric::{ConformalMetric, LogTerm, ATOM_TOL};
use crate::quadrature::{adaptive, power_weighted};

use super::GeodesicError;

/// Per-panel relative tolerance of the segment quadrature.
const REL_TOL: f64 = 1e-8;

/// A singular point lying on the segment: arclength position and exponent.
#[derive(Clone, Copy)]
struct OnSegment {
    s: f64,
    atom: usize,
    beta: f64,
}

/// `∫_{[p,q]} e^u ds` with the domain checked.
pub fn edge_weight(g: &ConformalMetric, p: Point, q: Point) -> Result<f64, GeodesicError> {
    if !g.background.contains(p) || !g.background.contains(q) {
        return Err(GeodesicError::SegmentOutOfDomain);
    }
    let q = if g.is_torus() { p + g.delta(p, q) } else { q };
    Ok(segment_integral(g, p, q))
}

/// `∫_{[p,q]} e^u ds` for `q` already in the chart of `p`.
pub fn segment_integral(g: &ConformalMetric, p: Point, q: Point) -> f64 {
    let len = p.dist(q);
    if len == 0.0 {
        return 0.0;
    }
    let e = (q - p) * (1.0 / len);
    let mid = p.lerp(q, 0.5);
    let near_radius = (2.0 * g.spacing()).max(len);
    let mut breaks: Vec<f64> = vec![0.0, len];
    let mut singular: Vec<OnSegment> = Vec::new();

    let mut visit = |z: Point, atom: Option<usize>| {
        let z = mid + g.delta(mid, z);
        let s = (z - p).dot(e).clamp(0.0, len);
        let d = (p + e * s).dist(z);
        if d < ATOM_TOL * (1.0 + len) {
            if let Some(atom) = atom {
                singular.push(OnSegment { s, atom, beta: g.effective_beta(atom) });
            }
            breaks.push(s);
        } else if d < near_radius {
            breaks.push(s);
        }
    };
    for (i, a) in g.atoms.iter().enumerate() {
        visit(a.location, Some(i));
    }
    for t in &g.terms {
        if matches!(t, LogTerm::Cutoff { .. } | LogTerm::LogLog { .. }) && g.atom_at(t.center()).is_none() {
            visit(t.center(), None);
        }
    }
    if let Some(sm) = &g.smooth {
        lattice_crossings(p, q, e, len, sm.origin, sm.spacing, &mut breaks);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * len);

    let at = |s: f64| p + e * s;
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let left = singular.iter().find(|o| (o.s - a).abs() <= 1e-14 * len).copied();
        let right = singular.iter().find(|o| (o.s - b).abs() <= 1e-14 * len).copied();
        total += match (left, right) {
            (None, None) => adaptive(|s| g.u(at(s)).exp(), a, b, REL_TOL, 0.0),
            (Some(o), None) => power_weighted(|t| g.u_regular_at(at(a + t), o.atom).exp(), o.beta, b - a),
            (None, Some(o)) => power_weighted(|t| g.u_regular_at(at(b - t), o.atom).exp(), o.beta, b - a),
            (Some(l), Some(r)) => {
                let m = 0.5 * (a + b);
                power_weighted(|t| g.u_regular_at(at(a + t), l.atom).exp(), l.beta, m - a)
                    + power_weighted(|t| g.u_regular_at(at(b - t), r.atom).exp(), r.beta, b - m)
            }
        };
    }
    total
}

/// Arclength positions where `[p,q]` crosses lines of the lattice
/// `origin + k·h` (kinks of the bilinear interpolant).
fn lattice_crossings(p: Point, q: Point, e: Point, len: f64, origin: Point, h: f64, out: &mut Vec<f64>) {
    for (pa, qa, oa, ea) in [(p.x, q.x, origin.x, e.x), (p.y, q.y, origin.y, e.y)] {
        if ea.abs() < 1e-15 {
            continue;
        }
        let (lo, hi) = if pa < qa { (pa, qa) } else { (qa, pa) };
        let k0 = ((lo - oa) / h).ceil() as i64;
        let k1 = ((hi - oa) / h).floor() as i64;
        for k in k0..=k1 {
            let s = (oa + k as f64 * h - pa) / ea;
            if s > 0.0 && s < len {
                out.push(s);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::cone;
    use crate::geom::Background;

    #[test]
    fn flat_and_constant_segments() {
        let g = ConformalMetric::flat(Background::square(5.0));
        assert!((edge_weight(&g, Point::ORIGIN, Point::new(3.0, 4.0)).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(edge_weight(&g, Point::ORIGIN, Point::new(6.0, 0.0)), Err(GeodesicError::SegmentOutOfDomain));
    }

    #[test]
    fn apex_endpoint_uses_power_law() {
        let g = cone(0.3, Point::ORIGIN, 1.0).unwrap();
        let w = edge_weight(&g, Point::ORIGIN, Point::new(0.5, 0.0)).unwrap();
        let exact = 0.5f64.powf(1.3) / 1.3;
        assert!((w - exact).abs() < 1e-10 * exact);
        // crossing the apex in the interior
        let w = edge_weight(&g, Point::new(-0.25, 0.0), Point::new(0.5, 0.0)).unwrap();
        let exact = (0.25f64.powf(1.3) + 0.5f64.powf(1.3)) / 1.3;
        assert!((w - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn negative_exponent_near_miss_converges() {
        let g = cone(-0.7, Point::ORIGIN, 1.0).unwrap();
        let p = Point::new(-0.5, 1e-4);
        let q = Point::new(0.5, 1e-4);
        let w = edge_weight(&g, p, q).unwrap();
        let fine = 2.0 * adaptive(|x| (x * x + 1e-8).powf(-0.35), 0.0, 0.5, 1e-12, 0.0);
        assert!((w - fine).abs() < 1e-7 * fine);
    }
}
