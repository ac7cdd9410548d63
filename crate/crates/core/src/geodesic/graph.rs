//! Wide-stencil lattice graphs and Dijkstra.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::Point;
use crate::metric::ConformalMetric;

use super::edge::segment_integral;
use super::GeodesicError;

/// Neighbour offsets; the second half negates the first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Stencil {
    /// King moves.
    S8,
    /// King and knight moves.
    #[default]
    S16,
    /// Adds the (3,1) and (3,2) families.
    S32,
}

impl TryFrom<usize> for Stencil {
    type Error = String;
    fn try_from(n: usize) -> Result<Self, String> {
        match n {
            8 => Ok(Stencil::S8),
            16 => Ok(Stencil::S16),
            32 => Ok(Stencil::S32),
            _ => Err(format!("stencil must be 8, 16 or 32 (got {n})")),
        }
    }
}

impl From<Stencil> for usize {
    fn from(s: Stencil) -> usize {
        s.size()
    }
}

impl Stencil {
    pub fn size(self) -> usize {
        match self {
            Stencil::S8 => 8,
            Stencil::S16 => 16,
            Stencil::S32 => 32,
        }
    }

    pub fn offsets(self) -> Vec<(i32, i32)> {
        let mut half: Vec<(i32, i32)> = vec![(1, 0), (1, 1), (0, 1), (-1, 1)];
        if matches!(self, Stencil::S16 | Stencil::S32) {
            half.extend([(2, 1), (1, 2), (-1, 2), (-2, 1)]);
        }
        if self == Stencil::S32 {
            half.extend([(3, 1), (3, 2), (2, 3), (1, 3), (-1, 3), (-2, 3), (-3, 2), (-3, 1)]);
        }
        let neg: Vec<(i32, i32)> = half.iter().map(|&(a, b)| (-a, -b)).collect();
        half.extend(neg);
        half
    }
}

/// Index lattice underlying a graph. Node `(i, j)` has index `j·ni + i`.
#[derive(Clone, Debug, PartialEq)]
pub enum Lattice {
    /// `origin + (i, j)·h`; wraps both axes when periodic.
    Cartesian { origin: Point, h: f64, nx: usize, ny: usize, periodic: bool },
    /// `center + e^{−t}(cos θ, sin θ)` with `θ = 2πi/nθ`, `t = t₀ + j·Δt`;
    /// wraps in `i` only. Row `0` is the outer circle.
    LogPolar { center: Point, t0: f64, dt: f64, nt: usize, ntheta: usize },
}

impl Lattice {
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Lattice::Cartesian { nx, ny, .. } => (nx, ny),
            Lattice::LogPolar { nt, ntheta, .. } => (ntheta, nt),
        }
    }

    fn wraps(&self) -> (bool, bool) {
        match *self {
            Lattice::Cartesian { periodic, .. } => (periodic, periodic),
            Lattice::LogPolar { .. } => (true, false),
        }
    }

    /// Unrelocated position of lattice node `(i, j)`.
    pub fn site(&self, i: usize, j: usize) -> Point {
        match *self {
            Lattice::Cartesian { origin, h, .. } => Point::new(origin.x + i as f64 * h, origin.y + j as f64 * h),
            Lattice::LogPolar { center, t0, dt, ntheta, .. } => {
                center + Point::polar((-(t0 + j as f64 * dt)).exp(), 2.0 * PI * i as f64 / ntheta as f64)
            }
        }
    }

    /// Fractional lattice coordinates of `p`.
    fn coords(&self, p: Point) -> (f64, f64) {
        match *self {
            Lattice::Cartesian { origin, h, periodic, .. } => {
                let d = if periodic { origin + crate::geom::delta(origin, p, true) - origin } else { p - origin };
                let (mut x, mut y) = (d.x / h, d.y / h);
                if periodic {
                    let n = (1.0 / h).round();
                    x = x.rem_euclid(n);
                    y = y.rem_euclid(n);
                }
                (x, y)
            }
            Lattice::LogPolar { center, t0, dt, ntheta, .. } => {
                let w = p - center;
                let th = w.y.atan2(w.x).rem_euclid(2.0 * PI);
                (th / (2.0 * PI) * ntheta as f64, (-(w.norm().ln()) - t0) / dt)
            }
        }
    }

    /// Typical edge scale: the spacing (Cartesian) or `Δt` (log-polar).
    pub fn spacing(&self) -> f64 {
        match *self {
            Lattice::Cartesian { h, .. } => h,
            Lattice::LogPolar { dt, .. } => dt,
        }
    }
}

/// A lattice graph with weights `∫ e^u ds` along straight edges.
#[derive(Clone, Debug)]
pub struct GridGraph {
    pub lattice: Lattice,
    pub stencil: Stencil,
    /// Node positions; nodes nearest atoms are moved onto them.
    pub positions: Arc<Vec<Point>>,
    periodic_metric: bool,
    degree: usize,
    nbr: Vec<u32>,
    weights: Vec<f64>,
}

const NONE: u32 = u32::MAX;

impl GridGraph {
    /// Lattice covering the whole background at spacing close to `h`.
    pub fn cartesian(g: &ConformalMetric, h: f64, stencil: Stencil) -> GridGraph {
        let lattice = if g.is_torus() {
            let n = (1.0 / h).round().max(4.0) as usize;
            Lattice::Cartesian { origin: Point::ORIGIN, h: 1.0 / n as f64, nx: n, ny: n, periodic: true }
        } else {
            let (min, max) = (g.background.min(), g.background.max());
            cartesian_box(min, max, h)
        };
        Self::build(g, lattice, stencil)
    }

    /// Plane lattice over `[min, max]` with spacing close to `h`.
    pub fn cartesian_over(g: &ConformalMetric, min: Point, max: Point, h: f64, stencil: Stencil) -> GridGraph {
        Self::build(g, cartesian_box(min, max, h), stencil)
    }

    /// Log-polar lattice on `r_in ≤ |x − c| ≤ r_out` whose first and last
    /// rows lie on the two circles.
    pub fn log_polar(
        g: &ConformalMetric,
        center: Point,
        r_in: f64,
        r_out: f64,
        ntheta: usize,
        stencil: Stencil,
    ) -> Result<GridGraph, GeodesicError> {
        if !(r_in > 0.0 && r_out > r_in) || !g.background.contains_disk(center, r_out) {
            return Err(GeodesicError::InvalidRegion(format!("annulus {r_in}..{r_out} outside the domain")));
        }
        let ntheta = ntheta.max(8);
        let (t0, t1) = (-r_out.ln(), -r_in.ln());
        let target = 2.0 * PI / ntheta as f64;
        let nt = (((t1 - t0) / target).round() as usize).max(1) + 1;
        let dt = (t1 - t0) / (nt - 1) as f64;
        Ok(Self::build(g, Lattice::LogPolar { center, t0, dt, nt, ntheta }, stencil))
    }

    fn build(g: &ConformalMetric, lattice: Lattice, stencil: Stencil) -> GridGraph {
        let (ni, nj) = lattice.dims();
        let n = ni * nj;
        let mut positions: Vec<Point> = (0..n).map(|k| lattice.site(k % ni, k / ni)).collect();
        // move the nearest node onto each atom inside the lattice
        let mut taken = vec![false; n];
        for a in &g.atoms {
            let (x, y) = lattice.coords(a.location);
            let (i, j) = (x.round(), y.round());
            let (wi, wj) = lattice.wraps();
            let ok_i = wi || (i >= 0.0 && i <= (ni - 1) as f64);
            let ok_j = wj || (j >= 0.0 && j <= (nj - 1) as f64);
            if !(ok_i && ok_j) {
                continue;
            }
            let i = (i as i64).rem_euclid(ni as i64) as usize;
            let j = (j as i64).rem_euclid(nj as i64) as usize;
            let k = j * ni + i;
            if !taken[k] {
                positions[k] = a.location;
                taken[k] = true;
            }
        }
        let offsets = stencil.offsets();
        let degree = offsets.len();
        let (wi, wj) = lattice.wraps();
        let mut nbr = vec![NONE; n * degree];
        for j in 0..nj {
            for i in 0..ni {
                for (k, &(di, dj)) in offsets.iter().enumerate() {
                    let (ii, jj) = (i as i64 + di as i64, j as i64 + dj as i64);
                    let ii = if wi { ii.rem_euclid(ni as i64) } else { ii };
                    let jj = if wj { jj.rem_euclid(nj as i64) } else { jj };
                    if ii < 0 || jj < 0 || ii >= ni as i64 || jj >= nj as i64 {
                        continue;
                    }
                    nbr[(j * ni + i) * degree + k] = (jj as usize * ni + ii as usize) as u32;
                }
            }
        }
        let mut graph = GridGraph {
            lattice,
            stencil,
            positions: Arc::new(positions),
            periodic_metric: g.is_torus(),
            degree,
            nbr,
            weights: vec![f64::INFINITY; n * degree],
        };
        graph.reweight(g);
        graph
    }

    /// Recompute all edge weights for `g`, keeping nodes and topology.
    pub fn reweight(&mut self, g: &ConformalMetric) {
        let half = self.degree / 2;
        let degree = self.degree;
        let periodic = self.periodic_metric;
        let pos = Arc::clone(&self.positions);
        let nbr = &self.nbr;
        let forward: Vec<f64> = (0..pos.len() * half)
            .into_par_iter()
            .map(|idx| {
                let (a, k) = (idx / half, idx % half);
                let b = nbr[a * degree + k];
                if b == NONE {
                    return f64::INFINITY;
                }
                let p = pos[a];
                let q = pos[b as usize];
                let q = if periodic { p + g.delta(p, q) } else { q };
                segment_integral(g, p, q)
            })
            .collect();
        for (idx, &w) in forward.iter().enumerate() {
            let (a, k) = (idx / half, idx % half);
            let b = self.nbr[a * degree + k];
            if b == NONE {
                continue;
            }
            self.weights[a * degree + k] = w;
            self.weights[b as usize * degree + k + half] = w;
        }
    }

    pub fn reweighted(mut self, g: &ConformalMetric) -> GridGraph {
        self.reweight(g);
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(neighbour, weight)` pairs of node `a`.
    pub fn edges(&self, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let base = a * self.degree;
        (0..self.degree).filter_map(move |k| {
            let b = self.nbr[base + k];
            (b != NONE).then(|| (b as usize, self.weights[base + k]))
        })
    }

    /// Lattice indices `(i, j)` of node `k`.
    pub fn ij(&self, k: usize) -> (usize, usize) {
        let (ni, _) = self.lattice.dims();
        (k % ni, k / ni)
    }

    /// Displacement between positions, periodic when the metric is.
    pub fn displacement(&self, from: Point, to: Point) -> Point {
        crate::geom::delta(from, to, self.periodic_metric)
    }

    /// Node sitting at `p` (within round-off), if any.
    pub fn node_at(&self, p: Point) -> Option<usize> {
        self.nearest_nodes(p, 4)
            .into_iter()
            .find(|&k| self.displacement(self.positions[k], p).norm() < 1e-12)
    }

    /// Up to `count` nodes nearest `p`, ties broken by index.
    pub fn nearest_nodes(&self, p: Point, count: usize) -> Vec<usize> {
        let (ni, nj) = self.lattice.dims();
        let (wi, wj) = self.lattice.wraps();
        let (x, y) = self.lattice.coords(p);
        let (ci, cj) = (x.round() as i64, y.round() as i64);
        let mut cand: Vec<(f64, usize)> = Vec::new();
        for dj in -3..=3 {
            for di in -3..=3 {
                let (mut i, mut j) = (ci + di, cj + dj);
                if wi {
                    i = i.rem_euclid(ni as i64);
                }
                if wj {
                    j = j.rem_euclid(nj as i64);
                }
                if i < 0 || j < 0 || i >= ni as i64 || j >= nj as i64 {
                    continue;
                }
                let k = j as usize * ni + i as usize;
                cand.push((self.displacement(p, self.positions[k]).norm(), k));
            }
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.dedup_by_key(|c| c.1);
        cand.into_iter().take(count).map(|c| c.1).collect()
    }

    /// Single-run shortest paths from weighted seeds over nodes allowed by `mask`.
    pub fn dijkstra(&self, seeds: &[(usize, f64)], mask: Option<&[bool]>) -> Vec<f64> {
        let n = self.len();
        let allowed = |k: usize| mask.is_none_or(|m| m[k]);
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        for &(k, d) in seeds {
            if allowed(k) && d < dist[k] {
                dist[k] = d;
                heap.push(Item { d, node: k });
            }
        }
        while let Some(Item { d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for (b, w) in self.edges(node) {
                if !allowed(b) {
                    continue;
                }
                let nd = d + w;
                if nd < dist[b] {
                    dist[b] = nd;
                    heap.push(Item { d: nd, node: b });
                }
            }
        }
        dist
    }
}

fn cartesian_box(min: Point, max: Point, h: f64) -> Lattice {
    let nx = (((max.x - min.x) / h).round() as usize).max(1);
    let h = (max.x - min.x) / nx as f64;
    let ny = (((max.y - min.y) / h).round() as usize).max(1);
    Lattice::Cartesian { origin: min, h, nx: nx + 1, ny: ny + 1, periodic: false }
}

/// Min-heap entry; equal distances pop in increasing node index.
#[derive(Clone, Copy, PartialEq)]
struct Item {
    d: f64,
    node: usize,
}

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.d.total_cmp(&self.d).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Background;

    #[test]
    fn stencils_are_symmetric_and_rotation_invariant() {
        for s in [Stencil::S8, Stencil::S16, Stencil::S32] {
            let off = s.offsets();
            assert_eq!(off.len(), s.size());
            let half = off.len() / 2;
            for k in 0..half {
                assert_eq!(off[k + half], (-off[k].0, -off[k].1));
            }
            for &(a, b) in &off {
                assert!(off.contains(&(-b, a)));
            }
        }
    }

    #[test]
    fn flat_lattice_distances_are_stencil_norms() {
        let g = ConformalMetric::flat(Background::PlaneRectangle { min: Point::ORIGIN, max: Point::new(1.0, 1.0) });
        let graph = GridGraph::cartesian(&g, 1.0 / 32.0, Stencil::S16);
        let d = graph.dijkstra(&[(0, 0.0)], None);
        let far = graph.len() - 1;
        assert!((d[far] - 2f64.sqrt()).abs() < 1e-12);
        // (1, 0.5) lies along a knight direction
        let k = 16 * 33 + 32;
        assert!((d[k] - 1.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn torus_wraps_around() {
        let g = ConformalMetric::flat(Background::FlatTorus);
        let graph = GridGraph::cartesian(&g, 1.0 / 32.0, Stencil::S16);
        let d = graph.dijkstra(&[(0, 0.0)], None);
        let k = 31;
        assert!((d[k] - 1.0 / 32.0).abs() < 1e-14);
        let mid = 16 * 32 + 16;
        assert!((d[mid] - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn log_polar_rows_hit_both_circles() {
        let g = ConformalMetric::flat(Background::square(1.0));
        let graph = GridGraph::log_polar(&g, Point::ORIGIN, 0.1, 0.8, 64, Stencil::S16).unwrap();
        let (ni, nj) = graph.lattice.dims();
        assert!((graph.positions[0].norm() - 0.8).abs() < 1e-14);
        assert!((graph.positions[(nj - 1) * ni].norm() - 0.1).abs() < 1e-14);
    }
}
