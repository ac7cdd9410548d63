//! Planar points, backgrounds and the simple regions used by every experiment.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Wrap a coordinate into `[0, 1)`.
pub fn wrap_unit(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Displacement `to - from`; nearest periodic image when `periodic`.
pub fn delta(from: Point, to: Point, periodic: bool) -> Point {
    let d = to - from;
    if periodic {
        Point::new(d.x - d.x.round(), d.y - d.y.round())
    } else {
        d
    }
}

/// The flat background metric g₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Background {
    PlaneRectangle { min: Point, max: Point },
    FlatTorus,
}

impl Background {
    pub fn square(half_width: f64) -> Self {
        Background::PlaneRectangle {
            min: Point::new(-half_width, -half_width),
            max: Point::new(half_width, half_width),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Background::FlatTorus)
    }

    pub fn min(&self) -> Point {
        match *self {
            Background::PlaneRectangle { min, .. } => min,
            Background::FlatTorus => Point::ORIGIN,
        }
    }

    pub fn max(&self) -> Point {
        match *self {
            Background::PlaneRectangle { max, .. } => max,
            Background::FlatTorus => Point::new(1.0, 1.0),
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            Background::PlaneRectangle { min, max } => {
                min.is_finite() && max.is_finite() && max.x > min.x && max.y > min.y
            }
            Background::FlatTorus => true,
        }
    }

    pub fn delta(&self, from: Point, to: Point) -> Point {
        delta(from, to, self.is_torus())
    }

    pub fn canonical(&self, p: Point) -> Point {
        match self {
            Background::PlaneRectangle { .. } => p,
            Background::FlatTorus => Point::new(wrap_unit(p.x), wrap_unit(p.y)),
        }
    }

    /// Closed-domain membership with a small slack for round-off.
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Background::PlaneRectangle { min, max } => {
                let eps = 1e-12 * (max.x - min.x).max(max.y - min.y);
                p.x >= min.x - eps && p.x <= max.x + eps && p.y >= min.y - eps && p.y <= max.y + eps
            }
            Background::FlatTorus => p.is_finite(),
        }
    }

    /// Whether the closed disk lies in the domain (always true on the torus
    /// for radii below one half).
    pub fn contains_disk(&self, center: Point, r: f64) -> bool {
        match *self {
            Background::PlaneRectangle { min, max } => {
                let eps = 1e-12;
                center.x - r >= min.x - eps
                    && center.x + r <= max.x + eps
                    && center.y - r >= min.y - eps
                    && center.y + r <= max.y + eps
            }
            Background::FlatTorus => r < 0.5,
        }
    }
}

/// Disks, rectangles and annuli: the only regions any experiment needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    Disk { center: Point, radius: f64 },
    Rect { min: Point, max: Point },
    Annulus { center: Point, inner: f64, outer: f64 },
}

impl Region {
    pub fn disk(center: Point, radius: f64) -> Self {
        Region::Disk { center, radius }
    }

    pub fn rect(min: Point, max: Point) -> Self {
        Region::Rect { min, max }
    }

    pub fn annulus(center: Point, inner: f64, outer: f64) -> Self {
        Region::Annulus { center, inner, outer }
    }

    /// Reference point used to unwrap coordinates on the torus.
    pub fn anchor(&self) -> Point {
        match *self {
            Region::Disk { center, .. } | Region::Annulus { center, .. } => center,
            Region::Rect { min, max } => min.lerp(max, 0.5),
        }
    }

    /// Bring `p` into the chart of this region (identity off the torus).
    pub fn unwrap(&self, p: Point, periodic: bool) -> Point {
        if periodic {
            let a = self.anchor();
            a + delta(a, p, true)
        } else {
            p
        }
    }

    pub fn contains(&self, p: Point, periodic: bool) -> bool {
        let p = self.unwrap(p, periodic);
        match *self {
            Region::Disk { center, radius } => (p - center).norm() <= radius,
            Region::Rect { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
            Region::Annulus { center, inner, outer } => {
                let r = (p - center).norm();
                r >= inner && r <= outer
            }
        }
    }

    pub fn bbox(&self) -> (Point, Point) {
        match *self {
            Region::Disk { center, radius } | Region::Annulus { center, outer: radius, .. } => (
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            ),
            Region::Rect { min, max } => (min, max),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Region::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Region::Rect { min, max } => (max.x - min.x) * (max.y - min.y),
            Region::Annulus { inner, outer, .. } => std::f64::consts::PI * (outer * outer - inner * inner),
        }
    }

    /// Euclidean length of the part of segment `[a, b]` inside the region,
    /// by analytic clipping.
    pub fn segment_length_inside(&self, a: Point, b: Point) -> f64 {
        let len = a.dist(b);
        if len == 0.0 {
            return 0.0;
        }
        match *self {
            Region::Disk { center, radius } => disk_clip(a, b, center, radius) * len,
            Region::Annulus { center, inner, outer } => {
                (disk_clip(a, b, center, outer) - disk_clip(a, b, center, inner)).max(0.0) * len
            }
            Region::Rect { min, max } => rect_clip(a, b, min, max) * len,
        }
    }

    /// Nearest point of the region boundary to `p` (for disks and the two
    /// circles of an annulus, the radial projection).
    pub fn project_to_boundary(&self, p: Point) -> Point {
        match *self {
            Region::Disk { center, radius } => radial_projection(p, center, radius),
            Region::Annulus { center, inner, outer } => {
                let r = (p - center).norm();
                if (r - inner).abs() <= (outer - r).abs() {
                    radial_projection(p, center, inner)
                } else {
                    radial_projection(p, center, outer)
                }
            }
            Region::Rect { min, max } => {
                let cx = p.x.clamp(min.x, max.x);
                let cy = p.y.clamp(min.y, max.y);
                if cx != p.x || cy != p.y {
                    return Point::new(cx, cy);
                }
                let dl = p.x - min.x;
                let dr = max.x - p.x;
                let db = p.y - min.y;
                let dt = max.y - p.y;
                let m = dl.min(dr).min(db).min(dt);
                if m == dl {
                    Point::new(min.x, p.y)
                } else if m == dr {
                    Point::new(max.x, p.y)
                } else if m == db {
                    Point::new(p.x, min.y)
                } else {
                    Point::new(p.x, max.y)
                }
            }
        }
    }

    /// Unsigned distance from `p` to the region boundary.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        p.dist(self.project_to_boundary(p))
    }

    /// Evenly spaced points on the boundary (outer circle for annuli);
    /// rectangles always include their four corners.
    pub fn boundary_points(&self, n: usize) -> Vec<Point> {
        let n = n.max(4);
        match *self {
            Region::Disk { center, radius } | Region::Annulus { center, outer: radius, .. } => (0..n)
                .map(|k| center + Point::polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
                .collect(),
            Region::Rect { min, max } => {
                let corners = [min, Point::new(max.x, min.y), max, Point::new(min.x, max.y)];
                let w = max.x - min.x;
                let hgt = max.y - min.y;
                let per = 2.0 * (w + hgt);
                let mut out = Vec::with_capacity(n);
                for k in 0..n {
                    let mut s = per * k as f64 / n as f64;
                    let mut pt = corners[0];
                    for side in 0..4 {
                        let a = corners[side];
                        let b = corners[(side + 1) % 4];
                        let l = a.dist(b);
                        if s <= l {
                            pt = a.lerp(b, s / l);
                            break;
                        }
                        s -= l;
                    }
                    out.push(pt);
                }
                for c in corners {
                    if !out.iter().any(|q| q.dist(c) < 1e-12) {
                        out.push(c);
                    }
                }
                out
            }
        }
    }
}

fn radial_projection(p: Point, center: Point, radius: f64) -> Point {
    let d = p - center;
    let r = d.norm();
    if r == 0.0 {
        center + Point::new(radius, 0.0)
    } else {
        center + d * (radius / r)
    }
}

/// Fraction of the parameter interval `[0, 1]` of segment `a + t(b-a)` inside the disk.
fn disk_clip(a: Point, b: Point, c: Point, r: f64) -> f64 {
    let d = b - a;
    let f = a - c;
    let qa = d.norm_sq();
    let qb = 2.0 * f.dot(d);
    let qc = f.norm_sq() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let t0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
    (t1 - t0).max(0.0)
}

/// Liang-Barsky clipping fraction against an axis-aligned rectangle.
fn rect_clip(a: Point, b: Point, min: Point, max: Point) -> f64 {
    let d = b - a;
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    let checks = [(-d.x, a.x - min.x), (d.x, max.x - a.x), (-d.y, a.y - min.y), (d.y, max.y - a.y)];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return 0.0;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t1 - t0).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chord_through_unit_disk() {
        let d = Region::disk(Point::ORIGIN, 1.0);
        let l = d.segment_length_inside(Point::new(0.0, -3.0), Point::new(0.0, 3.0));
        assert!((l - 2.0).abs() < 1e-14);
        let off = d.segment_length_inside(Point::new(0.5, -3.0), Point::new(0.5, 3.0));
        assert!((off - 2.0 * (0.75f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rect_clipping_and_annulus() {
        let r = Region::rect(Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        assert!((r.segment_length_inside(Point::new(-1.0, 0.5), Point::new(2.0, 0.5)) - 1.0).abs() < 1e-14);
        assert_eq!(r.segment_length_inside(Point::new(-1.0, 2.0), Point::new(2.0, 2.0)), 0.0);
        let a = Region::annulus(Point::ORIGIN, 0.5, 1.0);
        let l = a.segment_length_inside(Point::new(-2.0, 0.0), Point::new(2.0, 0.0));
        assert!((l - 1.0).abs() < 1e-14);
    }

    #[test]
    fn periodic_delta_uses_nearest_image() {
        let d = delta(Point::new(0.95, 0.5), Point::new(0.05, 0.5), true);
        assert!((d.x - 0.1).abs() < 1e-14 && d.y.abs() < 1e-14);
        assert_eq!(wrap_unit(-0.25), 0.75);
    }

    #[test]
    fn rect_boundary_projection() {
        let r = Region::rect(Point::new(0.0, 0.0), Point::new(2.0, 1.0));
        let p = r.project_to_boundary(Point::new(0.5, 0.4));
        assert_eq!(p, Point::new(0.5, 0.0));
        let pts = r.boundary_points(8);
        assert!(pts.len() >= 8 && pts.contains(&Point::new(2.0, 1.0)));
    }
}
