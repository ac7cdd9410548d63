//! Logarithmic potentials `I_μ = −(1/2π)∫ log|x−y| dμ(y)`, their integrability
//! estimates, and the periodic Poisson solve on the flat torus.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::field::DensityField;
use crate::geom::{delta, Point, Region};
use crate::measure::{Atom, LineMass, MeasureError, SignedMeasure, POINT_TOL};
use crate::mollifier::{eta_eps, log_mollified};
use crate::quadrature::{adaptive, rect_log_gradient_x, rect_log_integral, rect_power_integral};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential evaluated at atom {index}")]
    EvalAtAtom { index: usize },
    #[error("e^(p|I|) is not integrable near atom {index} (p·|m| = {product} ≥ 4π)")]
    Divergent { index: usize, product: f64 },
    #[error("torus measure has nonzero total mass {0}")]
    NonzeroTotalMass(f64),
    #[error("grid resolution {0} is below 16")]
    NoDensityRepresentable(usize),
    #[error("exponent {0} outside [1, 2)")]
    InvalidExponent(f64),
    #[error("operation needs a {0} measure")]
    WrongBackground(&'static str),
    #[error("region must be a disk")]
    NotADisk,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

const INV_2PI: f64 = 0.5 / PI;

/// Cells this many spacings from `x` use exact cell integrals.
const NEAR_CELLS: f64 = 2.5;

fn check_off_atoms(mu: &SignedMeasure, x: Point) -> Result<(), PotentialError> {
    if let Some(index) = mu.atoms.iter().position(|a| a.location.dist(x) < POINT_TOL) {
        return Err(PotentialError::EvalAtAtom { index });
    }
    Ok(())
}

fn planar(mu: &SignedMeasure) -> Result<(), PotentialError> {
    if mu.periodic {
        Err(PotentialError::WrongBackground("planar"))
    } else {
        Ok(())
    }
}

/// `∫_L log|x−y| ds(y)` in closed form.
fn line_log_integral(l: &LineMass, x: Point) -> f64 {
    let len = l.length();
    let e = (l.end - l.start) * (1.0 / len);
    let w = x - l.start;
    let s0 = w.dot(e);
    let d = (w.x * e.y - w.y * e.x).abs();
    // ∫ log√(t²+d²) dt = ½[t log(t²+d²) − 2t + 2d atan(t/d)]
    let f = |t: f64| {
        let r2 = t * t + d * d;
        let lg = if r2 > 0.0 { t * r2.ln() } else { 0.0 };
        let at = if d > 0.0 { 2.0 * d * (t / d).atan() } else { 0.0 };
        0.5 * (lg - 2.0 * t + at)
    };
    f(len - s0) - f(-s0)
}

/// `∫_L (x−y)/|x−y|² ds(y)` in closed form (`x` off the line).
fn line_kernel_gradient(l: &LineMass, x: Point) -> Point {
    let len = l.length();
    let e = (l.end - l.start) * (1.0 / len);
    let n = Point::new(-e.y, e.x);
    let w = x - l.start;
    let s0 = w.dot(e);
    let d = w.dot(n);
    // x − y(s) = −t e + d n with t = s − s0
    let (t0, t1) = (-s0, len - s0);
    let along = -0.5 * ((t1 * t1 + d * d).ln() - (t0 * t0 + d * d).ln());
    let across = if d != 0.0 { (t1 / d).atan() - (t0 / d).atan() } else { 0.0 };
    e * along + n * across
}

fn density_log_integral(d: &DensityField, x: Point) -> f64 {
    let h = d.spacing;
    let near = NEAR_CELLS * h;
    let mut s = 0.0;
    for j in 0..d.ny {
        for i in 0..d.nx {
            let v = d.get(i, j);
            if v == 0.0 {
                continue;
            }
            let c = d.node(i, j);
            let w = c - x;
            let k = if w.x.abs() < near && w.y.abs() < near {
                rect_log_integral(w.x - h / 2.0, w.x + h / 2.0, w.y - h / 2.0, w.y + h / 2.0)
            } else {
                0.5 * w.norm_sq().ln() * h * h
            };
            s += v * k;
        }
    }
    s
}

fn density_kernel_gradient(d: &DensityField, x: Point) -> Point {
    let h = d.spacing;
    let near = NEAR_CELLS * h;
    let mut g = Point::ORIGIN;
    for j in 0..d.ny {
        for i in 0..d.nx {
            let v = d.get(i, j);
            if v == 0.0 {
                continue;
            }
            let w = d.node(i, j) - x;
            let (x0, x1, y0, y1) = (w.x - h / 2.0, w.x + h / 2.0, w.y - h / 2.0, w.y + h / 2.0);
            // ∫ (x−y)/|x−y|² dy = −∫_{cell−x} w/|w|² dw
            let k = if w.x.abs() < near && w.y.abs() < near {
                Point::new(-rect_log_gradient_x(x0, x1, y0, y1), -rect_log_gradient_x(y0, y1, x0, x1))
            } else {
                w * (-h * h / w.norm_sq())
            };
            g = g + k * v;
        }
    }
    g
}

/// `I_μ(x)` on the plane.
pub fn log_potential(mu: &SignedMeasure, x: Point) -> Result<f64, PotentialError> {
    planar(mu)?;
    check_off_atoms(mu, x)?;
    let mut s: f64 = mu.atoms.iter().map(|a| a.mass * x.dist(a.location).ln()).sum();
    if let Some(d) = &mu.density {
        s += density_log_integral(d, x);
    }
    for l in &mu.lines {
        s += l.linear_density * line_log_integral(l, x);
    }
    Ok(-INV_2PI * s)
}

/// `∇I_μ(x) = −(1/2π)∫ (x−y)/|x−y|² dμ(y)`.
pub fn grad_log_potential(mu: &SignedMeasure, x: Point) -> Result<Point, PotentialError> {
    planar(mu)?;
    check_off_atoms(mu, x)?;
    Ok(grad_unchecked(mu, x) * -INV_2PI)
}

fn grad_unchecked(mu: &SignedMeasure, x: Point) -> Point {
    let mut g = Point::ORIGIN;
    for a in &mu.atoms {
        let w = x - a.location;
        g = g + w * (a.mass / w.norm_sq());
    }
    if let Some(d) = &mu.density {
        g = g + density_kernel_gradient(d, x);
    }
    for l in &mu.lines {
        g = g + line_kernel_gradient(l, x) * l.linear_density;
    }
    g
}

fn disk_of(region: &Region) -> Result<(Point, f64), PotentialError> {
    match *region {
        Region::Disk { center, radius } => Ok((center, radius)),
        _ => Err(PotentialError::NotADisk),
    }
}

/// Sub-grid cells per disk diameter for the seminorm quadratures.
const DISK_CELLS: usize = 256;

/// Cell-wise quadrature over `D_r(c)`. Cells within one spacing of an atom
/// call `atom_cell` with the atom and the cell rectangle relative to it; other cells sample
/// `f` on a sub-grid refined towards atoms and the boundary.
fn disk_quadrature<F, A>(mu: &SignedMeasure, center: Point, r: f64, f: F, atom_cell: A) -> f64
where
    F: Fn(Point) -> f64 + Sync,
    A: Fn(&Atom, [f64; 4]) -> f64 + Sync,
{
    let n = DISK_CELLS;
    let h = 2.0 * r / n as f64;
    let origin = center - Point::new(r, r);
    let atoms: Vec<&Atom> = mu.atoms.iter().filter(|a| a.location.dist(center) < r + 2.0 * h).collect();
    let disk = Region::disk(center, r);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut row = 0.0;
            for i in 0..n {
                let c = origin + Point::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                let bd = disk.boundary_distance(c);
                // cells within one spacing of an atom take the closed form
                let near = atoms.iter().copied().find(|a| {
                    let w = c - a.location;
                    w.x.abs() <= h && w.y.abs() <= h
                });
                if let Some(a) = near {
                    if disk.contains(c, false) {
                        let w = c - a.location;
                        row += atom_cell(a, [w.x - h / 2.0, w.x + h / 2.0, w.y - h / 2.0, w.y + h / 2.0]);
                    }
                    continue;
                }
                // graded sub-sampling resolves the |x−z|^(−q) growth near atoms
                let rho = atoms.iter().map(|a| a.location.dist(c) / h).fold(f64::INFINITY, f64::min);
                let mut sub = if rho < 12.0 { (12.0 / rho).ceil().min(12.0) as usize } else { 1 };
                if bd <= h {
                    sub = sub.max(4);
                }
                if sub == 1 {
                    if disk.contains(c, false) {
                        row += f(c) * h * h;
                    }
                    continue;
                }
                let hs = h / sub as f64;
                for a in 0..sub {
                    for b in 0..sub {
                        let p = c + Point::new((a as f64 + 0.5) * hs - h / 2.0, (b as f64 + 0.5) * hs - h / 2.0);
                        if disk.contains(p, false) {
                            row += f(p) * hs * hs;
                        }
                    }
                }
            }
            row
        })
        .collect();
    rows.iter().sum()
}

/// `r^{q−2} ∫_{D_r} |∇I_μ|^q` with atom cells in closed form.
pub fn wq_seminorm(mu: &SignedMeasure, disk: &Region, q: f64) -> Result<f64, PotentialError> {
    planar(mu)?;
    if !(1.0..2.0).contains(&q) {
        return Err(PotentialError::InvalidExponent(q));
    }
    let (center, r) = disk_of(disk)?;
    if mu.is_zero() {
        return Ok(0.0);
    }
    let integral = disk_quadrature(
        mu,
        center,
        r,
        |p| (grad_unchecked(mu, p) * INV_2PI).norm().powf(q),
        |a, [x0, x1, y0, y1]| (a.mass.abs() * INV_2PI).powf(q) * rect_power_integral(x0, x1, y0, y1, -q),
    );
    Ok(r.powf(q - 2.0) * integral)
}

/// Largest `wq_seminorm(μ, D, q)/|μ|(ℝ²)^q`: attained by one atom at the centre.
pub fn wq_constant(q: f64) -> f64 {
    (2.0 * PI).powf(1.0 - q) / (2.0 - q)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpIntegrability {
    pub value: f64,
    /// Whether `p·|μ|(ℝ²) < 4π`, the regime of the a priori bound.
    pub bound_applies: bool,
}

/// `∫_{D_R} e^{p|I_μ|}`; atom cells use `|x−z|^{−p|m|/2π}` in closed form.
pub fn exp_integrability(mu: &SignedMeasure, p: f64, disk: &Region) -> Result<ExpIntegrability, PotentialError> {
    planar(mu)?;
    let (center, r) = disk_of(disk)?;
    for (index, a) in mu.atoms.iter().enumerate() {
        let product = p * a.mass.abs();
        if product >= 4.0 * PI && a.location.dist(center) < r + POINT_TOL {
            return Err(PotentialError::Divergent { index, product });
        }
    }
    let bound_applies = p * mu.total_variation_all() < 4.0 * PI;
    if mu.is_zero() {
        return Ok(ExpIntegrability { value: PI * r * r, bound_applies });
    }
    let pot = |x: Point| log_potential(mu, x).unwrap_or(f64::INFINITY);
    let value = disk_quadrature(
        mu,
        center,
        r,
        |x| (p * pot(x).abs()).exp(),
        |a, [x0, x1, y0, y1]| {
            // regular part at the atom, sign of the log term dominates near it
            let rest = SignedMeasure { atoms: mu.atoms.iter().filter(|b| b.location != a.location).copied().collect(), ..mu.clone() };
            let w = log_potential(&rest, a.location).unwrap_or(0.0);
            let alpha = -p * a.mass.abs() * INV_2PI;
            (p * a.mass.signum() * w).exp() * rect_power_integral(x0, x1, y0, y1, alpha)
        },
    );
    Ok(ExpIntegrability { value, bound_applies })
}

/// Periodic potential on the unit torus: `u = Σ βᵢ log|x−zᵢ| + smooth` with
/// `βᵢ = −mᵢ/2π` and nearest-image distances.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPotential {
    /// Zero-mean discrete solution including the mollified atoms.
    pub u: DensityField,
    /// `u` minus the mollified nearest-image log of each atom.
    pub smooth: DensityField,
    /// `(location, β)` per atom.
    pub atoms: Vec<(Point, f64)>,
    /// Mollification radius used for the atom rasters.
    pub eps: f64,
}

/// Atom raster radius in spacings.
const RASTER_EPS_CELLS: f64 = 3.0;

/// Spectral solve of `−Δ_h u = μ` on the torus with `n×n` nodes.
pub fn torus_potential(mu: &SignedMeasure, n: usize) -> Result<TorusPotential, PotentialError> {
    if n < 16 {
        return Err(PotentialError::NoDensityRepresentable(n));
    }
    mu.validate()?;
    let total = mu.total_mass();
    if total.abs() > 1e-10 * mu.total_variation_all().max(1.0) {
        return Err(PotentialError::NonzeroTotalMass(total));
    }
    let h = 1.0 / n as f64;
    let eps = RASTER_EPS_CELLS * h;
    let mut rhs = DensityField::torus_zeros(n);
    if let Some(d) = &mu.density {
        let resampled = if d.same_lattice(&rhs) { d.clone() } else { rhs.clone().from_fn(|p| d.bilinear(p)) };
        // keep the resampled mass equal to the source mass
        let shift = (d.integral() - resampled.integral()) / (n * n) as f64 / (h * h);
        for (o, v) in rhs.values.iter_mut().zip(&resampled.values) {
            *o += v + shift;
        }
    }
    for l in &mu.lines {
        let raster = line_raster(l, n, eps);
        for (o, v) in rhs.values.iter_mut().zip(&raster.values) {
            *o += v;
        }
    }
    let mut atoms = Vec::with_capacity(mu.atoms.len());
    for a in &mu.atoms {
        let beta = -a.mass * INV_2PI;
        let raster = atom_raster(a.location, beta, n, eps);
        for (o, v) in rhs.values.iter_mut().zip(&raster.values) {
            *o += v;
        }
        atoms.push((a.location, beta));
    }
    let u = solve_periodic_poisson(&rhs);
    let mut smooth = u.clone();
    for &(z, beta) in &atoms {
        for j in 0..n {
            for i in 0..n {
                let r = delta(z, smooth.node(i, j), true).norm();
                let k = smooth.index(i, j);
                smooth.values[k] -= beta * log_mollified(r, eps);
            }
        }
    }
    Ok(TorusPotential { u, smooth, atoms, eps })
}

/// `−Δ_h(β·(log∗η_ε)(·−z))` truncated to `r < ε + 2h`, scaled to mass `−2πβ`.
fn atom_raster(z: Point, beta: f64, n: usize, eps: f64) -> DensityField {
    let h = 1.0 / n as f64;
    let profile = DensityField::torus_zeros(n).from_fn(|p| beta * log_mollified(delta(z, p, true).norm(), eps));
    let mut lap = profile.neg_laplacian();
    for j in 0..n {
        for i in 0..n {
            if delta(z, lap.node(i, j), true).norm() >= eps + 2.0 * h {
                let k = lap.index(i, j);
                lap.values[k] = 0.0;
            }
        }
    }
    let mass = lap.integral();
    let target = -2.0 * PI * beta;
    if mass != 0.0 {
        lap = lap.map(|v| v * target / mass);
    }
    lap
}

/// `λ·∫_L η_ε(x − y) ds(y)` sampled on the torus lattice.
fn line_raster(l: &LineMass, n: usize, eps: f64) -> DensityField {
    let len = l.length();
    let field = DensityField::torus_zeros(n).from_fn(|p| {
        let w = delta(l.start, p, true);
        let e = (l.end - l.start) * (1.0 / len);
        let s0 = w.dot(e).clamp(-eps, len + eps);
        let d = (w.x * e.y - w.y * e.x).abs();
        if d >= eps {
            return 0.0;
        }
        let (a, b) = ((s0 - eps).max(0.0), (s0 + eps).min(len));
        if b <= a {
            return 0.0;
        }
        let dist = |s: f64| ((s - w.dot(e)).powi(2) + d * d).sqrt();
        l.linear_density * adaptive(|s| eta_eps(dist(s), eps), a, b, 1e-9, 1e-14)
    });
    let mass = field.integral();
    if mass != 0.0 {
        field.map(|v| v * l.total() / mass)
    } else {
        field
    }
}

/// Zero-mean solution of the 5-point `−Δ_h u = f` on a periodic lattice.
pub fn solve_periodic_poisson(f: &DensityField) -> DensityField {
    let (nx, ny) = (f.nx, f.ny);
    let h = f.spacing;
    let mut planner = FftPlanner::<f64>::new();
    let fwd_x = planner.plan_fft_forward(nx);
    let fwd_y = planner.plan_fft_forward(ny);
    let inv_x = planner.plan_fft_inverse(nx);
    let inv_y = planner.plan_fft_inverse(ny);
    let mut data: Vec<Complex<f64>> = f.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    transform_2d(&mut data, nx, ny, fwd_x.as_ref(), fwd_y.as_ref());
    for ky in 0..ny {
        let sy = (PI * ky as f64 / ny as f64).sin();
        for kx in 0..nx {
            let sx = (PI * kx as f64 / nx as f64).sin();
            let symbol = 4.0 * (sx * sx + sy * sy) / (h * h);
            let k = ky * nx + kx;
            data[k] = if kx == 0 && ky == 0 { Complex::new(0.0, 0.0) } else { data[k] / symbol };
        }
    }
    transform_2d(&mut data, nx, ny, inv_x.as_ref(), inv_y.as_ref());
    let scale = 1.0 / (nx * ny) as f64;
    DensityField { values: data.iter().map(|c| c.re * scale).collect(), ..f.clone() }
}

fn transform_2d(
    data: &mut [Complex<f64>],
    nx: usize,
    ny: usize,
    fx: &dyn rustfft::Fft<f64>,
    fy: &dyn rustfft::Fft<f64>,
) {
    for row in data.chunks_mut(nx) {
        fx.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); ny];
    for i in 0..nx {
        for j in 0..ny {
            col[j] = data[j * nx + i];
        }
        fy.process(&mut col);
        for j in 0..ny {
            data[j * nx + i] = col[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(x: f64, y: f64, m: f64) -> Atom {
        Atom::new(Point::new(x, y), m)
    }

    #[test]
    fn atom_potential_closed_forms() {
        let mu = SignedMeasure::from_atoms(vec![atom(0.0, 0.0, -2.0 * PI * 0.5)]);
        assert!(log_potential(&mu, Point::new(1.0, 0.0)).unwrap().abs() < 1e-15);
        let b = 0.37;
        let mu = SignedMeasure::from_atoms(vec![atom(0.0, 0.0, -2.0 * PI * b)]);
        let e = std::f64::consts::E;
        assert!((log_potential(&mu, Point::new(0.6 * e, 0.8 * e)).unwrap() - b).abs() < 1e-14);
        assert_eq!(log_potential(&mu, Point::ORIGIN), Err(PotentialError::EvalAtAtom { index: 0 }));
    }

    #[test]
    fn atom_gradient_points_outward_for_negative_mass() {
        let mu = SignedMeasure::from_atoms(vec![atom(0.0, 0.0, -2.0 * PI)]);
        let g = grad_log_potential(&mu, Point::new(1.0, 0.0)).unwrap();
        assert!((g.x - 1.0).abs() < 1e-15 && g.y.abs() < 1e-15);
        assert_eq!(grad_log_potential(&SignedMeasure::zero(), Point::new(0.3, 0.1)).unwrap(), Point::ORIGIN);
    }

    #[test]
    fn line_closed_forms_match_quadrature() {
        let l = LineMass::new(Point::new(-0.3, 0.2), Point::new(0.5, -0.4), 1.0);
        let x = Point::new(0.4, 0.35);
        let len = l.length();
        let lg = adaptive(|t| x.dist(l.start.lerp(l.end, t)).ln(), 0.0, 1.0, 1e-13, 0.0) * len;
        assert!((line_log_integral(&l, x) - lg).abs() < 1e-11);
        let gx = adaptive(|t| { let w = x - l.start.lerp(l.end, t); w.x / w.norm_sq() }, 0.0, 1.0, 1e-13, 0.0) * len;
        let gy = adaptive(|t| { let w = x - l.start.lerp(l.end, t); w.y / w.norm_sq() }, 0.0, 1.0, 1e-13, 0.0) * len;
        let g = line_kernel_gradient(&l, x);
        assert!((g.x - gx).abs() < 1e-10 && (g.y - gy).abs() < 1e-10);
    }

    #[test]
    fn periodic_poisson_inverts_discrete_laplacian() {
        let n = 32;
        let u = DensityField::torus_zeros(n).from_fn(|p| (2.0 * PI * p.x).sin() * (4.0 * PI * p.y).cos() + 0.3 * (2.0 * PI * p.y).sin());
        let f = u.neg_laplacian();
        let back = solve_periodic_poisson(&f);
        for (a, b) in back.values.iter().zip(&u.values) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn torus_potential_rejects_bad_input() {
        let mu = SignedMeasure::from_atoms(vec![atom(0.5, 0.5, 1.0)]).periodic(true);
        assert!(matches!(torus_potential(&mu, 32), Err(PotentialError::NonzeroTotalMass(_))));
        assert_eq!(torus_potential(&SignedMeasure::zero().periodic(true), 8), Err(PotentialError::NoDensityRepresentable(8)));
        let z = torus_potential(&SignedMeasure::zero().periodic(true), 16).unwrap();
        assert!(z.u.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wq_constant_is_attained_at_centred_atom() {
        let m = 2.0 * PI * 0.3;
        let mu = SignedMeasure::from_atoms(vec![atom(0.0, 0.0, m)]);
        let v = wq_seminorm(&mu, &Region::disk(Point::ORIGIN, 0.5), 1.5).unwrap();
        let exact = wq_constant(1.5) * m.powf(1.5);
        assert!((v - exact).abs() < 2e-3 * exact, "{v} vs {exact}");
    }

    #[test]
    fn exp_integrability_flags_divergence() {
        let mu = SignedMeasure::from_atoms(vec![atom(0.0, 0.0, 2.0 * PI)]);
        assert!(matches!(exp_integrability(&mu, 2.0, &Region::disk(Point::ORIGIN, 1.0)), Err(PotentialError::Divergent { .. })));
        let z = exp_integrability(&SignedMeasure::zero(), 3.0, &Region::disk(Point::ORIGIN, 1.0)).unwrap();
        assert!((z.value - PI).abs() < 1e-15 && z.bound_applies);
    }
}
