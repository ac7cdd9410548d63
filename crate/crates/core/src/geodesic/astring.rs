//! a-strings: skeletons of a curve with consecutive base distances in `[a, 2a]`.

use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::metric::ConformalMetric;

use super::GeodesicError;

/// The background distance the string is measured in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseDistance {
    #[default]
    Euclidean,
    /// Nearest-image distance on the unit torus.
    Torus,
}

impl BaseDistance {
    pub fn of(self, p: Point, q: Point) -> f64 {
        crate::geom::delta(p, q, self == BaseDistance::Torus).norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AString {
    pub points: Vec<Point>,
    pub a: f64,
    pub base: BaseDistance,
}

impl AString {
    pub fn empty(a: f64, base: BaseDistance) -> Self {
        AString { points: Vec::new(), a, base }
    }

    /// Base-distance gaps between consecutive points.
    pub fn gaps(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| self.base.of(w[0], w[1])).collect()
    }
}

/// Greedy a-string of a polyline. From each emitted point the next one is
/// the first later curve point at base distance exactly `a`; once none
/// remains, the last emitted point is replaced by the curve's endpoint.
/// Every gap then lies in `[a, 2a]`.
pub fn build_a_string(curve: &[Point], a: f64, base: BaseDistance) -> Result<AString, GeodesicError> {
    if !(a > 0.0) {
        return Err(GeodesicError::InvalidRegion(format!("a must be positive (got {a})")));
    }
    let too_short = |length| GeodesicError::CurveTooShort { length, a };
    let length: f64 = curve.windows(2).map(|w| base.of(w[0], w[1])).sum();
    if curve.len() < 2 || length <= a {
        return Err(too_short(length));
    }
    // fine pieces keep the distance from a fixed point convex on each piece
    let mut pieces: Vec<(Point, Point)> = Vec::new();
    for w in curve.windows(2) {
        let d = crate::geom::delta(w[0], w[1], base == BaseDistance::Torus);
        let n = ((d.norm() / (0.25 * a)).ceil() as usize).max(1);
        for k in 0..n {
            let p = w[0] + d * (k as f64 / n as f64);
            pieces.push((p, w[0] + d * ((k + 1) as f64 / n as f64)));
        }
    }
    let mut points = vec![curve[0]];
    // current position: piece index and parameter within it
    let (mut piece, mut t0) = (0usize, 0.0f64);
    'outer: loop {
        let from = *points.last().expect("nonempty");
        for k in piece..pieces.len() {
            let (p, q) = pieces[k];
            let lo_t = if k == piece { t0 } else { 0.0 };
            let at = |t: f64| p + (q - p) * t;
            if base.of(from, at(1.0)) < a {
                continue;
            }
            let (mut lo, mut hi) = (lo_t, 1.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if base.of(from, at(mid)) < a {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            points.push(at(hi));
            piece = k;
            t0 = hi;
            continue 'outer;
        }
        break;
    }
    if points.len() < 2 {
        return Err(too_short(length));
    }
    *points.last_mut().expect("nonempty") = *curve.last().expect("nonempty");
    Ok(AString { points, a, base })
}

/// `Σ e^{ū(Pᵢ, r)}·d₀(Pᵢ, Pᵢ₊₁)`, with `ū` the mean of `u` over `D_r(Pᵢ)`.
pub fn string_estimate(g: &ConformalMetric, s: &AString, r: f64) -> Result<f64, GeodesicError> {
    let mut total = 0.0;
    for w in s.points.windows(2) {
        if !g.background.contains_disk(w[0], r) {
            return Err(GeodesicError::InvalidRegion(format!("disk of radius {r} at ({}, {}) leaves the domain", w[0].x, w[0].y)));
        }
        total += g.disk_mean(w[0], r)?.exp() * s.base.of(w[0], w[1]);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Background;
    use std::f64::consts::PI;

    #[test]
    fn unit_segment_with_a_030() {
        let s = build_a_string(&[Point::ORIGIN, Point::new(1.0, 0.0)], 0.3, BaseDistance::Euclidean).unwrap();
        let xs: Vec<f64> = s.points.iter().map(|p| p.x).collect();
        let want = [0.0, 0.3, 0.6, 1.0];
        assert_eq!(xs.len(), want.len());
        for (x, w) in xs.iter().zip(want) {
            assert!((x - w).abs() < 1e-12);
        }
        assert!(s.gaps().iter().all(|&d| (0.3 - 1e-12..=0.6 + 1e-12).contains(&d)));
    }

    #[test]
    fn closed_circle_gaps_stay_in_range() {
        let r = 1.0 / (2.0 * PI);
        let circle: Vec<Point> = (0..=720).map(|k| Point::polar(r, 2.0 * PI * k as f64 / 720.0)).collect();
        let s = build_a_string(&circle, 0.26, BaseDistance::Euclidean).unwrap();
        assert_eq!(s.points.len(), 4);
        assert!(s.gaps().iter().all(|&d| (0.26 - 1e-9..=0.52).contains(&d)), "{:?}", s.gaps());
    }

    #[test]
    fn short_curves_are_rejected() {
        let err = build_a_string(&[Point::ORIGIN, Point::new(0.2, 0.0)], 0.3, BaseDistance::Euclidean).unwrap_err();
        assert!(matches!(err, GeodesicError::CurveTooShort { .. }));
    }

    #[test]
    fn constant_metric_estimate() {
        let field = crate::field::DensityField::zeros(Point::new(-1.0, -1.0), 0.125, 17, 17).map(|_| 0.7);
        let g = ConformalMetric::new(Background::square(1.0), vec![], Some(field)).unwrap();
        let s = build_a_string(&[Point::new(-0.5, 0.0), Point::new(0.5, 0.0)], 0.1, BaseDistance::Euclidean).unwrap();
        let est = string_estimate(&g, &s, 0.05).unwrap();
        assert!((est - 0.7f64.exp()).abs() < 1e-9);
        assert_eq!(string_estimate(&g, &AString::empty(0.1, BaseDistance::Euclidean), 0.05).unwrap(), 0.0);
    }
}
