//! Lengths, annulus distances, ball areas and diameters.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::geom::{Point, Region};
use crate::metric::ConformalMetric;
use crate::quadrature::{adaptive, power_weighted, rect_power_integral};

use super::edge::{edge_weight, segment_integral};
use super::graph::{GridGraph, Lattice};
use super::{GeodesicError, GridOptions, Solver, Source};

const REL_TOL: f64 = 1e-9;

/// `ℓ_g` of a polyline; `0` for fewer than two points.
pub fn curve_length(g: &ConformalMetric, polyline: &[Point]) -> Result<f64, GeodesicError> {
    polyline.windows(2).map(|w| edge_weight(g, w[0], w[1])).sum()
}

/// `∫_{∂D_r(c)} e^u`, split at the angles of nearby atoms.
pub fn circle_length(g: &ConformalMetric, center: Point, r: f64) -> Result<f64, GeodesicError> {
    if !(r >= 0.0) || !g.background.contains_disk(center, r) {
        return Err(GeodesicError::InvalidRegion(format!("circle of radius {r} leaves the domain")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let at = |th: f64| center + Point::polar(r, th);
    // (angle, atom on the circle)
    let mut cuts: Vec<(f64, Option<usize>)> = Vec::new();
    for (i, a) in g.atoms.iter().enumerate() {
        let w = g.delta(center, a.location);
        let off = (w.norm() - r).abs();
        if off < 2.0 * g.spacing().max(r * 1e-3) {
            let th = w.y.atan2(w.x).rem_euclid(2.0 * PI);
            cuts.push((th, (off < 1e-12 * (1.0 + r)).then_some(i)));
        }
    }
    if cuts.is_empty() {
        let quarter = |k: usize| {
            adaptive(|th| g.u(at(th)).exp(), 0.5 * PI * k as f64, 0.5 * PI * (k + 1) as f64, REL_TOL, 0.0)
        };
        return Ok(r * (0..4).map(quarter).sum::<f64>());
    }
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = cuts.len();
    let mut total = 0.0;
    for k in 0..n {
        let (a, left) = cuts[k];
        let (mut b, right) = cuts[(k + 1) % n];
        if k + 1 == n {
            b += 2.0 * PI;
        }
        if b - a <= 0.0 {
            continue;
        }
        // arclength s from a singular endpoint; the chord replaces s in |x − z|^β
        let singular = |i: usize, from: f64, dir: f64, len: f64| {
            let beta = g.effective_beta(i);
            power_weighted(
                |s| {
                    let x = at(from + dir * s / r);
                    let chord = g.delta(g.atoms[i].location, x).norm();
                    (chord / s).powf(beta) * g.u_regular_at(x, i).exp()
                },
                beta,
                len,
            )
        };
        let len = r * (b - a);
        total += match (left, right) {
            (None, None) => r * adaptive(|th| g.u(at(th)).exp(), a, b, REL_TOL, 0.0),
            (Some(i), None) => singular(i, a, 1.0, len),
            (None, Some(j)) => singular(j, b, -1.0, len),
            (Some(i), Some(j)) => singular(i, a, 1.0, 0.5 * len) + singular(j, b, -1.0, 0.5 * len),
        };
    }
    Ok(total)
}

/// `ℓ_g(∂Ω)`: circles exactly, rectangles along their four sides.
pub fn boundary_length(g: &ConformalMetric, region: &Region) -> Result<f64, GeodesicError> {
    match *region {
        Region::Disk { center, radius } => circle_length(g, center, radius),
        Region::Annulus { center, inner, outer } => Ok(circle_length(g, center, inner)? + circle_length(g, center, outer)?),
        Region::Rect { min, max } => {
            let c = [min, Point::new(max.x, min.y), max, Point::new(min.x, max.y), min];
            Ok(c.windows(2).map(|w| segment_integral(g, w[0], w[1])).sum())
        }
    }
}

fn check_region(g: &ConformalMetric, region: &Region) -> Result<(), GeodesicError> {
    let (min, max) = region.bbox();
    let ok = min.is_finite()
        && max.is_finite()
        && max.x >= min.x
        && max.y >= min.y
        && if g.is_torus() {
            max.x - min.x < 1.0 && max.y - min.y < 1.0
        } else {
            g.background.contains(min) && g.background.contains(max)
        };
    if ok {
        Ok(())
    } else {
        Err(GeodesicError::InvalidRegion(format!("{region:?} is not inside the domain")))
    }
}

/// Box graph over the bounding box of `region` with nodes masked to it.
fn region_solver<'a>(g: &'a ConformalMetric, region: &Region, h: f64, opts: &GridOptions) -> (Solver<'a>, Vec<bool>) {
    let (min, max) = region.bbox();
    let graph = GridGraph::cartesian_over(g, min, max, h, opts.stencil);
    let mask = graph.positions.iter().map(|&p| region.contains(p, false) || region.boundary_distance(p) < 1e-12).collect();
    (Solver { metric: g, graph }, mask)
}

/// Seeds for the allowed nodes within `reach` of the boundary of `region`,
/// weighted by the segment from their boundary projection.
fn boundary_seeds(s: &Solver, region: &Region, mask: &[bool], reach: f64) -> Vec<(usize, f64)> {
    s.graph
        .positions
        .iter()
        .enumerate()
        .filter(|&(k, &p)| mask[k] && region.boundary_distance(p) <= reach)
        .map(|(k, &p)| (k, segment_integral(s.metric, region.project_to_boundary(p), p)))
        .collect()
}

fn concentric(inner: &Region, outer: &Region) -> Option<(Point, f64, f64)> {
    match (*inner, *outer) {
        (Region::Disk { center: a, radius: r1 }, Region::Disk { center: b, radius: r2 }) if a.dist(b) < 1e-14 => {
            Some((a, r1, r2))
        }
        _ => None,
    }
}

/// `d_g(∂Ω₁, ∂Ω₂)` through `Ω₂ ∖ Ω₁` for nested disks or rectangles.
pub fn annulus_distance(
    g: &ConformalMetric,
    inner: &Region,
    outer: &Region,
    opts: &GridOptions,
) -> Result<f64, GeodesicError> {
    if matches!(inner, Region::Annulus { .. }) || matches!(outer, Region::Annulus { .. }) {
        return Err(GeodesicError::InvalidRegion("annulus boundaries must be disks or rectangles".into()));
    }
    if inner == outer {
        return Ok(0.0);
    }
    check_region(g, outer)?;
    if !inner.boundary_points(64).iter().all(|&p| outer.contains(p, false)) {
        return Err(GeodesicError::InvalidRegion("inner region is not inside the outer one".into()));
    }
    if let Some((c, r1, r2)) = concentric(inner, outer) {
        if r1 <= 0.0 {
            return Err(GeodesicError::InvalidRegion("inner circle is degenerate".into()));
        }
        let graph = GridGraph::log_polar(g, c, r1, r2, opts.ntheta, opts.stencil)?;
        let (ni, nj) = graph.lattice.dims();
        let seeds: Vec<(usize, f64)> = ((nj - 1) * ni..nj * ni).map(|k| (k, 0.0)).collect();
        let d = graph.dijkstra(&seeds, None);
        return Ok(d[..ni].iter().copied().fold(f64::INFINITY, f64::min));
    }
    let (min, max) = outer.bbox();
    let h = opts.h.min((max.x - min.x).max(max.y - min.y) / opts.region_cells as f64);
    let (s, outer_mask) = region_solver(g, outer, h, opts);
    let h = s.graph.lattice.spacing();
    let mask: Vec<bool> = s
        .graph
        .positions
        .iter()
        .zip(&outer_mask)
        .map(|(&p, &m)| m && (!inner.contains(p, false) || inner.boundary_distance(p) < 1e-12))
        .collect();
    let seeds = boundary_seeds(&s, inner, &mask, 1.5 * h);
    let d = s.graph.dijkstra(&seeds, Some(&mask));
    let closing = boundary_seeds(&s, outer, &mask, 1.5 * h);
    Ok(closing.iter().map(|&(k, w)| d[k] + w).fold(f64::INFINITY, f64::min))
}

/// `Area_g(B_R(x))` and its ratio to `πR²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallArea {
    pub area: f64,
    pub ratio: f64,
}

/// Sub-samples per side in cells cut by the ball boundary or next to atoms.
const SUB: usize = 8;

/// Area of the metric ball `{d_g(center, ·) < R}` on the whole-domain lattice.
pub fn ball_area(g: &ConformalMetric, center: Point, radius: f64, opts: &GridOptions) -> Result<BallArea, GeodesicError> {
    let s = Solver::new(g, opts);
    let field = s.field(&Source::Point(center))?;
    let Lattice::Cartesian { h, nx, ny, periodic, .. } = s.graph.lattice else {
        unreachable!("whole-domain lattices are Cartesian")
    };
    let d = &field.values;
    if !periodic {
        let touches = (0..nx * ny)
            .filter(|&k| {
                let (i, j) = (k % nx, k / nx);
                i == 0 || j == 0 || i + 1 == nx || j + 1 == ny
            })
            .any(|k| d[k] < radius);
        if touches {
            return Err(GeodesicError::BallTouchesBoundary(radius));
        }
    }
    let at = |i: i64, j: i64| -> f64 {
        let (ii, jj) = if periodic {
            (i.rem_euclid(nx as i64), j.rem_euclid(ny as i64))
        } else {
            (i.clamp(0, nx as i64 - 1), j.clamp(0, ny as i64 - 1))
        };
        d[jj as usize * nx + ii as usize]
    };
    let area: f64 = (0..ny)
        .into_par_iter()
        .map(|j| {
            let mut row = 0.0;
            for i in 0..nx {
                let v = d[j * nx + i];
                let (ii, jj) = (i as i64, j as i64);
                let gx = 0.5 * (at(ii + 1, jj) - at(ii - 1, jj)) / h;
                let gy = 0.5 * (at(ii, jj + 1) - at(ii, jj - 1)) / h;
                let reach = 0.75 * h * (gx.abs() + gy.abs());
                if !v.is_finite() || v - reach >= radius {
                    continue;
                }
                let site = s.graph.lattice.site(i, j);
                let (x0, x1, y0, y1) = (site.x - 0.5 * h, site.x + 0.5 * h, site.y - 0.5 * h, site.y + 0.5 * h);
                if let Some(a) = g.atoms.iter().position(|a| {
                    let w = g.delta(site, a.location);
                    w.x.abs() <= 0.5 * h && w.y.abs() <= 0.5 * h
                }) {
                    // the atom cell: |x − z|^{2β} exactly, regular factor at the atom
                    let z = site + g.delta(site, g.atoms[a].location);
                    let beta = g.effective_beta(a);
                    let inside = if v + reach < radius { 1.0 } else { 0.5 };
                    row += inside
                        * (2.0 * g.u_regular_at(z, a)).exp()
                        * rect_power_integral(x0 - z.x, x1 - z.x, y0 - z.y, y1 - z.y, 2.0 * beta);
                    continue;
                }
                let near_atom = g.atoms.iter().any(|a| g.delta(site, a.location).norm() < 2.5 * h);
                let full = v + reach < radius;
                if full && !near_atom {
                    row += (2.0 * g.u(site)).exp() * h * h;
                    continue;
                }
                let step = h / SUB as f64;
                let mut acc = 0.0;
                for sj in 0..SUB {
                    for si in 0..SUB {
                        let off = Point::new(x0 + (si as f64 + 0.5) * step, y0 + (sj as f64 + 0.5) * step) - site;
                        if full || v + gx * off.x + gy * off.y < radius {
                            acc += (2.0 * g.u(site + off)).exp();
                        }
                    }
                }
                row += acc * step * step;
            }
            row
        })
        .sum();
    Ok(BallArea { area, ratio: area / (PI * radius * radius) })
}

/// Sampled diameter of a region with the intrinsic distance of the region,
/// and the upper bound `2·sup d(·, ∂Ω) + ℓ_g(∂Ω)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Diameter {
    pub lower: f64,
    pub upper: f64,
}

pub fn diameter(g: &ConformalMetric, region: &Region, opts: &GridOptions) -> Result<Diameter, GeodesicError> {
    let (min, max) = region.bbox();
    let side = (max.x - min.x).max(max.y - min.y);
    if side == 0.0 {
        return Ok(Diameter { lower: 0.0, upper: 0.0 });
    }
    check_region(g, region)?;
    let h = opts.h.min(side / opts.region_cells as f64);
    let (s, mask) = region_solver(g, region, h, opts);
    let h = s.graph.lattice.spacing();

    let n = opts.samples.max(2);
    let mut samples = region.boundary_points(n / 2);
    let interior: Vec<Point> = s
        .graph
        .positions
        .iter()
        .enumerate()
        .filter(|&(k, &p)| mask[k] && region.boundary_distance(p) > h)
        .map(|(_, &p)| p)
        .collect();
    let want = n - samples.len().min(n);
    if want > 0 && !interior.is_empty() {
        let stride = (interior.len() as f64 / want as f64).max(1.0);
        samples.extend((0..want).map(|m| interior[((m as f64 + 0.5) * stride) as usize % interior.len()]));
    }

    let lower = samples
        .par_iter()
        .enumerate()
        .map(|(a, &x)| -> Result<f64, GeodesicError> {
            let f = s.field_masked(&Source::Point(x), Some(&mask))?;
            Ok(samples[a + 1..].iter().map(|&y| s.eval(&f, y, Some(&mask))).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let seeds = boundary_seeds(&s, region, &mask, 1.5 * h);
    let to_boundary = s.graph.dijkstra(&seeds, Some(&mask));
    let sup = to_boundary.iter().zip(&mask).filter(|(_, &m)| m).map(|(&v, _)| v).fold(0.0, f64::max);
    let upper = 2.0 * sup + boundary_length(g, region)?;
    Ok(Diameter { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::cone;
    use crate::geom::Background;

    fn coarse() -> GridOptions {
        GridOptions::default().with_h(1.0 / 64.0)
    }

    #[test]
    fn polygon_around_cone_apex() {
        let g = cone(0.3, Point::ORIGIN, 1.0).unwrap();
        let r: f64 = 0.4;
        let poly: Vec<Point> = (0..=256).map(|k| Point::polar(r, 2.0 * PI * k as f64 / 256.0)).collect();
        let exact = 2.0 * PI * r.powf(1.3);
        assert!((curve_length(&g, &poly).unwrap() / exact - 1.0).abs() < 5e-3);
        assert_eq!(curve_length(&g, &[]).unwrap(), 0.0);
    }

    #[test]
    fn circle_lengths() {
        let g = cone(-0.5, Point::ORIGIN, 1.0).unwrap();
        assert!((circle_length(&g, Point::ORIGIN, 0.25).unwrap() - PI).abs() < 1e-4);
        // a circle through the apex has finite length
        let through = circle_length(&g, Point::new(0.25, 0.0), 0.25).unwrap();
        let fine = 0.25 * adaptive(|t| (2.0 * 0.25 * (t / 2.0).sin()).powf(-0.5), 0.0, 2.0 * PI, 1e-3, 0.0);
        assert!(through.is_finite() && (through / fine - 1.0).abs() < 1e-2);
    }

    #[test]
    fn flat_and_cone_annuli() {
        let flat = ConformalMetric::flat(Background::square(1.0));
        let d = annulus_distance(&flat, &Region::disk(Point::ORIGIN, 0.2), &Region::disk(Point::ORIGIN, 0.4), &coarse())
            .unwrap();
        assert!((d - 0.2).abs() < 0.006);
        let rects = annulus_distance(
            &flat,
            &Region::rect(Point::new(-0.1, -0.1), Point::new(0.1, 0.1)),
            &Region::rect(Point::new(-0.5, -0.3), Point::new(0.5, 0.3)),
            &coarse(),
        )
        .unwrap();
        assert!((rects - 0.2).abs() < 0.006, "{rects}");
        let inner = Region::disk(Point::ORIGIN, 0.3);
        assert_eq!(annulus_distance(&flat, &inner, &inner, &coarse()).unwrap(), 0.0);
        let g = cone(0.3, Point::ORIGIN, 1.0).unwrap();
        let d = annulus_distance(&g, &Region::disk(Point::ORIGIN, 0.1), &Region::disk(Point::ORIGIN, 0.5), &coarse())
            .unwrap();
        let exact = (0.5f64.powf(1.3) - 0.1f64.powf(1.3)) / 1.3;
        assert!((d / exact - 1.0).abs() < 0.03);
    }

    #[test]
    fn flat_ball_area_and_boundary_check() {
        let g = ConformalMetric::flat(Background::square(1.0));
        let b = ball_area(&g, Point::new(0.1, 0.0), 0.5, &coarse()).unwrap();
        assert!((b.ratio - 1.0).abs() < 0.03, "{b:?}");
        assert_eq!(ball_area(&g, Point::ORIGIN, 1.5, &coarse()), Err(GeodesicError::BallTouchesBoundary(1.5)));
    }

    #[test]
    fn unit_square_diameter() {
        let g = ConformalMetric::flat(Background::square(1.0));
        let sq = Region::rect(Point::ORIGIN, Point::new(1.0, 1.0));
        let mut opts = coarse();
        opts.samples = 16;
        let d = diameter(&g, &sq, &opts).unwrap();
        assert!(d.lower >= 1.35 && d.lower <= 2f64.sqrt() * 1.03, "{d:?}");
        assert!((d.upper - 5.0).abs() < 0.05, "{d:?}");
        let point = diameter(&g, &Region::disk(Point::ORIGIN, 0.0), &opts).unwrap();
        assert_eq!(point, Diameter { lower: 0.0, upper: 0.0 });
    }
}
