//! Regular sample grids: curvature densities and smooth parts of conformal factors.

use serde::{Deserialize, Serialize};

use crate::geom::{delta, wrap_unit, Point, Region};

/// Samples on a rectangular lattice `origin + (i·h, j·h)`, stored row-major
/// (`values[j·nx + i]`). Periodic fields cover the unit torus with `nx = ny = N`
/// and `h = 1/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin: Point,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub periodic: bool,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn zeros(origin: Point, spacing: f64, nx: usize, ny: usize) -> Self {
        DensityField { nx, ny, spacing, origin, periodic: false, values: vec![0.0; nx * ny] }
    }

    pub fn torus_zeros(n: usize) -> Self {
        DensityField { nx: n, ny: n, spacing: 1.0 / n as f64, origin: Point::ORIGIN, periodic: true, values: vec![0.0; n * n] }
    }

    /// Lattice covering `[min, max]` with spacing as close to `h` as divides the extent.
    pub fn covering(min: Point, max: Point, h: f64) -> Self {
        let cells = ((max.x - min.x) / h).round().max(1.0) as usize;
        let spacing = (max.x - min.x) / cells as f64;
        let cells_y = ((max.y - min.y) / spacing).round().max(1.0) as usize;
        DensityField::zeros(min, spacing, cells + 1, cells_y + 1)
    }

    pub fn from_fn<F: Fn(Point) -> f64 + Sync>(mut self, f: F) -> Self {
        use rayon::prelude::*;
        let nx = self.nx;
        let origin = self.origin;
        let h = self.spacing;
        self.values.par_iter_mut().enumerate().for_each(|(k, v)| {
            let (i, j) = (k % nx, k / nx);
            *v = f(Point::new(origin.x + i as f64 * h, origin.y + j as f64 * h));
        });
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.nx >= 2
            && self.ny >= 2
            && self.values.len() == self.nx * self.ny
            && self.spacing > 0.0
            && self.spacing.is_finite()
            && self.origin.is_finite()
            && self.values.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(self.origin.x + i as f64 * self.spacing, self.origin.y + j as f64 * self.spacing)
    }

    pub fn max_corner(&self) -> Point {
        self.node(self.nx - 1, self.ny - 1)
    }

    /// Whether `p` lies in the sampled rectangle (always true when periodic).
    pub fn covers(&self, p: Point) -> bool {
        if self.periodic {
            return true;
        }
        let m = self.max_corner();
        let eps = 1e-12 * self.spacing;
        p.x >= self.origin.x - eps && p.x <= m.x + eps && p.y >= self.origin.y - eps && p.y <= m.y + eps
    }

    /// Bilinear interpolation; clamps to the border off a plane lattice.
    pub fn bilinear(&self, p: Point) -> f64 {
        let h = self.spacing;
        if self.periodic {
            let fx = wrap_unit(p.x) / h;
            let fy = wrap_unit(p.y) / h;
            let i0 = (fx.floor() as usize).min(self.nx - 1);
            let j0 = (fy.floor() as usize).min(self.ny - 1);
            let tx = fx - i0 as f64;
            let ty = fy - j0 as f64;
            let i1 = (i0 + 1) % self.nx;
            let j1 = (j0 + 1) % self.ny;
            let v00 = self.get(i0, j0);
            let v10 = self.get(i1, j0);
            let v01 = self.get(i0, j1);
            let v11 = self.get(i1, j1);
            return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11);
        }
        let fx = ((p.x - self.origin.x) / h).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p.y - self.origin.y) / h).clamp(0.0, (self.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(self.nx - 2);
        let j0 = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let v00 = self.get(i0, j0);
        let v10 = self.get(i0 + 1, j0);
        let v01 = self.get(i0, j0 + 1);
        let v11 = self.get(i0 + 1, j0 + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    /// Gradient of the bilinear interpolant (one-sided inside the cell).
    pub fn bilinear_gradient(&self, p: Point) -> Point {
        let h = self.spacing;
        let (fx, fy, i0, j0, i1, j1) = if self.periodic {
            let fx = wrap_unit(p.x) / h;
            let fy = wrap_unit(p.y) / h;
            let i0 = (fx.floor() as usize).min(self.nx - 1);
            let j0 = (fy.floor() as usize).min(self.ny - 1);
            (fx, fy, i0, j0, (i0 + 1) % self.nx, (j0 + 1) % self.ny)
        } else {
            let fx = ((p.x - self.origin.x) / h).clamp(0.0, (self.nx - 1) as f64);
            let fy = ((p.y - self.origin.y) / h).clamp(0.0, (self.ny - 1) as f64);
            let i0 = (fx.floor() as usize).min(self.nx - 2);
            let j0 = (fy.floor() as usize).min(self.ny - 2);
            (fx, fy, i0, j0, i0 + 1, j0 + 1)
        };
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let v00 = self.get(i0, j0);
        let v10 = self.get(i1, j0);
        let v01 = self.get(i0, j1);
        let v11 = self.get(i1, j1);
        let gx = ((1.0 - ty) * (v10 - v00) + ty * (v11 - v01)) / h;
        let gy = ((1.0 - tx) * (v01 - v00) + tx * (v11 - v10)) / h;
        Point::new(gx, gy)
    }

    /// Midpoint-rule integral `Σ fᵢⱼ h²` over the whole lattice.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing * self.spacing
    }

    /// Midpoint rule over `region` with each sample carrying a cell of side
    /// `h`; cells cut by the region boundary contribute their covered fraction.
    pub fn integrate_over<F: Fn(f64) -> f64>(&self, region: &Region, f: F) -> f64 {
        let h = self.spacing;
        let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
        let (bmin, bmax) = region.bbox();
        let mut total = 0.0;
        let (irange, jrange) = self.index_window(bmin, bmax);
        for (j, jw) in jrange {
            for (i, iw) in irange.iter().copied() {
                let v = self.get(i, j);
                if v == 0.0 {
                    continue;
                }
                let center = Point::new(self.origin.x + iw * h, self.origin.y + jw * h);
                let frac = cell_fraction(region, center, h, half_diag);
                if frac > 0.0 {
                    total += f(v) * frac;
                }
            }
        }
        total * h * h
    }

    /// Lattice indices (with unwrapped coordinates) whose cells may meet the box.
    fn index_window(&self, bmin: Point, bmax: Point) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
        let h = self.spacing;
        let axis = |lo: f64, hi: f64, o: f64, n: usize| -> Vec<(usize, f64)> {
            let a = ((lo - o) / h).floor() as i64 - 1;
            let b = ((hi - o) / h).ceil() as i64 + 1;
            if self.periodic {
                let span = (b - a).min(n as i64 - 1);
                (a..=a + span).map(|k| (k.rem_euclid(n as i64) as usize, k as f64)).collect()
            } else {
                (a.max(0)..=b.min(n as i64 - 1)).map(|k| (k as usize, k as f64)).collect()
            }
        };
        (axis(bmin.x, bmax.x, self.origin.x, self.nx), axis(bmin.y, bmax.y, self.origin.y, self.ny))
    }

    /// Negated 5-point Laplacian; the boundary ring (plane lattices) is zero.
    pub fn neg_laplacian(&self) -> DensityField {
        let mut out = DensityField { values: vec![0.0; self.values.len()], ..self.clone() };
        let h2 = self.spacing * self.spacing;
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            for i in 0..nx {
                let (l, r, d, u) = if self.periodic {
                    ((i + nx - 1) % nx, (i + 1) % nx, (j + ny - 1) % ny, (j + 1) % ny)
                } else {
                    if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                        continue;
                    }
                    (i - 1, i + 1, j - 1, j + 1)
                };
                let c = self.get(i, j);
                let lap = self.get(l, j) + self.get(r, j) + self.get(i, d) + self.get(i, u) - 4.0 * c;
                out.values[self.index(i, j)] = -lap / h2;
            }
        }
        out
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> DensityField {
        DensityField { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn same_lattice(&self, other: &DensityField) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.periodic == other.periodic
            && (self.spacing - other.spacing).abs() <= 1e-14 * self.spacing
            && self.origin.dist(other.origin) <= 1e-14
    }

    /// Displacement between two points consistent with this lattice's topology.
    pub fn delta(&self, from: Point, to: Point) -> Point {
        delta(from, to, self.periodic)
    }
}

/// Fraction of the square cell (center, side h) inside the region.
fn cell_fraction(region: &Region, center: Point, h: f64, half_diag: f64) -> f64 {
    let inside = |p: Point| region.contains(p, false);
    let bd = region.boundary_distance(center);
    if bd > half_diag {
        return if inside(center) { 1.0 } else { 0.0 };
    }
    const SUB: usize = 8;
    let mut hit = 0usize;
    for a in 0..SUB {
        for b in 0..SUB {
            let p = Point::new(
                center.x + ((a as f64 + 0.5) / SUB as f64 - 0.5) * h,
                center.y + ((b as f64 + 0.5) / SUB as f64 - 0.5) * h,
            );
            if inside(p) {
                hit += 1;
            }
        }
    }
    hit as f64 / (SUB * SUB) as f64
}
