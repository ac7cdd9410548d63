//! Conformal metrics `g = e^{2u} g₀` with `u = Σ βᵢ log|x−zᵢ| + smooth + terms`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::DensityField;
use crate::geom::{Background, Point};
use crate::measure::{Atom, SignedMeasure};
use crate::mollifier::{cutoff, log_mollified};
use crate::quadrature::{adaptive, gauss_legendre, periodic_trapezoid};

/// Default lattice spacing when a metric has no smooth samples of its own.
pub const DEFAULT_SPACING: f64 = 1.0 / 256.0;

/// Points closer than this to an atom count as the atom.
pub const ATOM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("u evaluated at atom {index}")]
    EvalAtAtom { index: usize },
    #[error("atom {index} lies on the circle")]
    AtomOnCircle { index: usize },
    #[error("annulus leaves the domain")]
    AnnulusOutOfDomain,
    #[error("point ({}, {}) is outside the domain", .0.x, .0.y)]
    OutOfDomain(Point),
    #[error("atom {index} has exponent {beta} (must exceed -1)")]
    InvalidExponent { index: usize, beta: f64 },
    #[error("atoms {first} and {second} share a location")]
    DuplicateAtom { first: usize, second: usize },
    #[error("smooth part is malformed or does not match the background")]
    InvalidSmooth,
    #[error("background extent is not positive")]
    InvalidBackground,
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// A cone point `β log|x−z|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeAtom {
    #[serde(flatten)]
    pub location: Point,
    pub beta: f64,
}

impl ConeAtom {
    pub fn new(location: Point, beta: f64) -> Self {
        ConeAtom { location, beta }
    }

    /// Curvature mass `−2πβ`.
    pub fn mass(&self) -> f64 {
        -2.0 * PI * self.beta
    }
}

/// Radial terms of `u` kept in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LogTerm {
    /// `(1 − η(ρ/δ))·c·log ρ`: exactly `c log ρ` on `D_δ`, zero off `D_{2δ}`.
    Cutoff { center: Point, coeff: f64, delta: f64 },
    /// `c·(log ∗ η_ε)(ρ)`, finite everywhere.
    Mollified { center: Point, coeff: f64, eps: f64 },
    /// `c·log(−log ρ)` for `ρ < 1`.
    LogLog { center: Point, coeff: f64 },
}

impl LogTerm {
    pub fn center(&self) -> Point {
        match *self {
            LogTerm::Cutoff { center, .. } | LogTerm::Mollified { center, .. } | LogTerm::LogLog { center, .. } => center,
        }
    }

    /// Exponent this term adds to an atom at its centre.
    pub fn log_coeff(&self) -> f64 {
        match *self {
            LogTerm::Cutoff { coeff, .. } => coeff,
            _ => 0.0,
        }
    }

    /// Radius beyond which the term vanishes identically.
    pub fn support(&self) -> f64 {
        match *self {
            LogTerm::Cutoff { delta, .. } => 2.0 * delta,
            _ => f64::INFINITY,
        }
    }

    #[inline]
    pub fn value(&self, rho: f64) -> f64 {
        match *self {
            LogTerm::Cutoff { coeff, delta, .. } => {
                if rho >= 2.0 * delta {
                    0.0
                } else {
                    (1.0 - cutoff(rho / delta)) * coeff * rho.ln()
                }
            }
            LogTerm::Mollified { coeff, eps, .. } => coeff * log_mollified(rho, eps),
            LogTerm::LogLog { coeff, .. } => coeff * (-rho.ln()).max(f64::MIN_POSITIVE).ln(),
        }
    }

    /// `value − log_coeff·log ρ`; bounded near the centre except for `LogLog`.
    #[inline]
    pub fn regular(&self, rho: f64) -> f64 {
        match *self {
            LogTerm::Cutoff { coeff, delta, .. } => {
                if rho <= delta {
                    0.0
                } else {
                    -cutoff(rho / delta) * coeff * rho.ln()
                }
            }
            _ => self.value(rho),
        }
    }
}

/// `g = e^{2u} g₀` on a plane rectangle or the unit flat torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalMetric {
    pub background: Background,
    #[serde(default)]
    pub atoms: Vec<ConeAtom>,
    #[serde(default, rename = "smooth_part", skip_serializing_if = "Option::is_none")]
    pub smooth: Option<DensityField>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<LogTerm>,
    /// Set by the probe constructor, which admits exponents `β ≤ −1`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub probe: bool,
}

impl ConformalMetric {
    /// `u ≡ 0`.
    pub fn flat(background: Background) -> Self {
        ConformalMetric { background, atoms: Vec::new(), smooth: None, terms: Vec::new(), probe: false }
    }

    pub fn new(
        background: Background,
        atoms: Vec<ConeAtom>,
        smooth: Option<DensityField>,
    ) -> Result<Self, MetricError> {
        ConformalMetric { background, atoms, smooth, terms: Vec::new(), probe: false }.validated()
    }

    /// Like [`ConformalMetric::new`] but admits exponents `β ≤ −1`
    /// (curvature mass `≥ 2π`). Only for completeness probes.
    pub fn new_probe(
        background: Background,
        atoms: Vec<ConeAtom>,
        smooth: Option<DensityField>,
    ) -> Result<Self, MetricError> {
        ConformalMetric { background, atoms, smooth, terms: Vec::new(), probe: true }.validated()
    }

    pub fn with_terms(mut self, terms: Vec<LogTerm>) -> Result<Self, MetricError> {
        self.terms = terms;
        self.validated()
    }

    pub fn validated(mut self) -> Result<Self, MetricError> {
        if !self.background.is_valid() {
            return Err(MetricError::InvalidBackground);
        }
        let torus = self.background.is_torus();
        for (i, a) in self.atoms.iter_mut().enumerate() {
            if !a.location.is_finite() || !a.beta.is_finite() {
                return Err(MetricError::InvalidExponent { index: i, beta: a.beta });
            }
            if !self.background.contains(a.location) {
                return Err(MetricError::OutOfDomain(a.location));
            }
            a.location = self.background.canonical(a.location);
        }
        for i in 0..self.atoms.len() {
            let beta = self.effective_beta(i);
            if !self.probe && beta <= -1.0 {
                return Err(MetricError::InvalidExponent { index: i, beta });
            }
            for j in i + 1..self.atoms.len() {
                if self.background.delta(self.atoms[i].location, self.atoms[j].location).norm() < ATOM_TOL {
                    return Err(MetricError::DuplicateAtom { first: i, second: j });
                }
            }
        }
        if let Some(s) = &self.smooth {
            if !s.is_valid() || s.periodic != torus {
                return Err(MetricError::InvalidSmooth);
            }
        }
        for t in &self.terms {
            let ok = match *t {
                LogTerm::Cutoff { center, coeff, delta } => center.is_finite() && coeff.is_finite() && delta > 0.0,
                LogTerm::Mollified { center, coeff, eps } => center.is_finite() && coeff.is_finite() && eps > 0.0,
                LogTerm::LogLog { center, coeff } => center.is_finite() && coeff.is_finite(),
            };
            if !ok {
                return Err(MetricError::Parameter(format!("malformed term {t:?}")));
            }
        }
        Ok(self)
    }

    pub fn is_torus(&self) -> bool {
        self.background.is_torus()
    }

    #[inline]
    pub fn delta(&self, from: Point, to: Point) -> Point {
        self.background.delta(from, to)
    }

    /// Exponent of atom `i` including cutoff terms centred on it.
    pub fn effective_beta(&self, i: usize) -> f64 {
        let z = self.atoms[i].location;
        self.atoms[i].beta
            + self
                .terms
                .iter()
                .filter(|t| self.delta(t.center(), z).norm() < ATOM_TOL)
                .map(|t| t.log_coeff())
                .sum::<f64>()
    }

    /// Lattice spacing that resolves this metric's smooth content.
    pub fn spacing(&self) -> f64 {
        self.smooth.as_ref().map_or(DEFAULT_SPACING, |s| s.spacing)
    }

    /// `u(x)` without domain or atom checks (`±∞` at atoms).
    #[inline]
    pub fn u(&self, x: Point) -> f64 {
        let mut v = 0.0;
        for a in &self.atoms {
            v += a.beta * self.delta(a.location, x).norm().ln();
        }
        if let Some(s) = &self.smooth {
            v += s.bilinear(x);
        }
        for t in &self.terms {
            v += t.value(self.delta(t.center(), x).norm());
        }
        v
    }

    /// `u(x) − β_eff log|x − zᵢ|`, the part of `u` that stays bounded at atom `i`.
    pub fn u_regular_at(&self, x: Point, i: usize) -> f64 {
        let z = self.atoms[i].location;
        let mut v = 0.0;
        for (k, a) in self.atoms.iter().enumerate() {
            if k != i {
                v += a.beta * self.delta(a.location, x).norm().ln();
            }
        }
        if let Some(s) = &self.smooth {
            v += s.bilinear(x);
        }
        for t in &self.terms {
            let rho = self.delta(t.center(), x).norm();
            v += if self.delta(t.center(), z).norm() < ATOM_TOL { t.regular(rho) } else { t.value(rho) };
        }
        v
    }

    /// Index of the atom at `x`, if any.
    pub fn atom_at(&self, x: Point) -> Option<usize> {
        self.atoms.iter().position(|a| self.delta(a.location, x).norm() < ATOM_TOL)
    }

    pub fn eval_u(&self, x: Point) -> Result<f64, MetricError> {
        if !self.background.contains(x) {
            return Err(MetricError::OutOfDomain(x));
        }
        if let Some(index) = self.atom_at(x) {
            return Err(MetricError::EvalAtAtom { index });
        }
        Ok(self.u(x))
    }

    /// Circle mean of the non-atomic, non-log part of `u` (smooth samples and
    /// regular parts of terms) by the periodic trapezoid rule.
    fn circle_mean_regular(&self, center: Point, r: f64) -> f64 {
        let has_smooth = self.smooth.is_some();
        if !has_smooth && self.terms.is_empty() {
            return 0.0;
        }
        let f = |th: f64| {
            let x = center + Point::polar(r, th);
            let mut v = self.smooth.as_ref().map_or(0.0, |s| s.bilinear(x));
            for t in &self.terms {
                v += t.regular(self.delta(t.center(), x).norm());
            }
            v
        };
        let min_n = if has_smooth { ((2.0 * PI * r / self.spacing()).ceil() as usize * 4).clamp(16, 1 << 16) } else { 16 };
        periodic_trapezoid(f, 1e-10, 1.0, min_n, 1 << 18) / (2.0 * PI)
    }

    /// Mean over the circle of `β log|x − z|` on the chart around `center`.
    fn log_circle_mean(&self, center: Point, z: Point, r: f64) -> f64 {
        let d = self.delta(center, z).norm();
        if !self.is_torus() || d + r < 0.5 {
            return r.max(d).ln();
        }
        periodic_trapezoid(|th| self.delta(z, center + Point::polar(r, th)).norm().ln(), 1e-10, 1.0, 64, 1 << 16)
            / (2.0 * PI)
    }

    /// `u*(r)`: mean of `u` over `∂D_r(center)`.
    pub fn circle_mean(&self, center: Point, r: f64) -> Result<f64, MetricError> {
        if !(r > 0.0) || !self.background.contains_disk(center, r) {
            return Err(MetricError::AnnulusOutOfDomain);
        }
        for (index, a) in self.atoms.iter().enumerate() {
            if (self.delta(center, a.location).norm() - r).abs() < 1e-9 {
                return Err(MetricError::AtomOnCircle { index });
            }
        }
        let mut v = self.circle_mean_regular(center, r);
        for a in &self.atoms {
            v += a.beta * self.log_circle_mean(center, a.location, r);
        }
        for t in &self.terms {
            if t.log_coeff() != 0.0 {
                v += t.log_coeff() * self.log_circle_mean(center, t.center(), r);
            }
        }
        Ok(v)
    }

    /// Mean of `u` over `D_r(center)`.
    pub fn disk_mean(&self, center: Point, r: f64) -> Result<f64, MetricError> {
        if !(r > 0.0) || !self.background.contains_disk(center, r) {
            return Err(MetricError::AnnulusOutOfDomain);
        }
        // mean of log|x−z| over D_r(c) with d = |z−c|: log r − ½ + d²/2r² inside, log d outside
        let log_disk_mean = |z: Point| {
            let d = self.delta(center, z).norm();
            if d >= r {
                d.ln()
            } else {
                r.ln() - 0.5 + d * d / (2.0 * r * r)
            }
        };
        let mut v = 0.0;
        for a in &self.atoms {
            v += a.beta * log_disk_mean(a.location);
        }
        for t in &self.terms {
            if t.log_coeff() != 0.0 {
                v += t.log_coeff() * log_disk_mean(t.center());
            }
        }
        if self.smooth.is_none() && self.terms.is_empty() {
            return Ok(v);
        }
        // radial terms about the centre integrate in one dimension
        let centred = |t: &LogTerm| self.delta(t.center(), center).norm() < ATOM_TOL;
        for t in self.terms.iter().filter(|t| centred(t)) {
            v += adaptive(|s| 2.0 * s * t.regular(s), 0.0, r, 1e-11, 1e-14) / (r * r);
        }
        let rest: Vec<&LogTerm> = self.terms.iter().filter(|t| !centred(t)).collect();
        if self.smooth.is_none() && rest.is_empty() {
            return Ok(v);
        }
        let h = self.spacing();
        let panels = ((r / h).ceil() as usize).clamp(2, 256);
        let (nodes, weights) = gauss_legendre(4);
        let mut acc = 0.0;
        for p in 0..panels {
            let (a, b) = (r * p as f64 / panels as f64, r * (p + 1) as f64 / panels as f64);
            for (xi, wi) in nodes.iter().zip(&weights) {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                let n = ((4.0 * PI * s / h).ceil() as usize).max(16);
                let mut ring = 0.0;
                for k in 0..n {
                    let x = center + Point::polar(s, 2.0 * PI * (k as f64 + 0.5) / n as f64);
                    let mut f = self.smooth.as_ref().map_or(0.0, |sm| sm.bilinear(x));
                    for t in &rest {
                        f += t.regular(self.delta(t.center(), x).norm());
                    }
                    ring += f;
                }
                acc += 0.5 * (b - a) * wi * 2.0 * s * ring / n as f64;
            }
        }
        Ok(v + acc / (r * r))
    }

    /// `K_g`: atoms `−2πβ_eff` plus `−Δ_h` of the bounded part of `u`.
    pub fn curvature_of(&self) -> SignedMeasure {
        let periodic = self.is_torus();
        let atoms: Vec<Atom> = (0..self.atoms.len())
            .map(|i| Atom::new(self.atoms[i].location, -2.0 * PI * self.effective_beta(i)))
            .filter(|a| a.mass != 0.0)
            .collect();
        let mut mu = SignedMeasure::from_atoms(atoms).periodic(periodic);
        if self.smooth.is_none() && self.terms.is_empty() {
            return mu;
        }
        let lattice = self.lattice();
        let density = if periodic { self.torus_regular_laplacian(&lattice) } else { self.regular_samples(&lattice).neg_laplacian() };
        mu.density = Some(density);
        mu
    }

    /// Lattice carrying the smooth part, or a default one over the background.
    pub fn lattice(&self) -> DensityField {
        if let Some(s) = &self.smooth {
            return s.map(|_| 0.0);
        }
        match self.background {
            Background::FlatTorus => DensityField::torus_zeros((1.0 / DEFAULT_SPACING).round() as usize),
            Background::PlaneRectangle { min, max } => DensityField::covering(min, max, DEFAULT_SPACING),
        }
    }

    /// Bounded part of `u` sampled on `lattice`. Nodes on term centres take
    /// the value half a spacing away (only `LogLog` is unbounded there).
    fn regular_samples(&self, lattice: &DensityField) -> DensityField {
        let h = lattice.spacing;
        lattice.clone().from_fn(|x| {
            let mut v = self.smooth.as_ref().map_or(0.0, |s| s.bilinear(x));
            for t in &self.terms {
                let rho = self.delta(t.center(), x).norm().max(0.5 * h);
                v += t.regular(rho);
            }
            v
        })
    }

    /// `−Δ_h` of the bounded part on the torus, evaluating each 5-point stencil
    /// in one chart so nearest-image kinks of the atom logs cancel.
    fn torus_regular_laplacian(&self, lattice: &DensityField) -> DensityField {
        use rayon::prelude::*;
        let n = lattice.nx;
        let h = lattice.spacing;
        let base = self.regular_samples(lattice);
        let mut out = lattice.clone();
        out.values.par_iter_mut().enumerate().for_each(|(k, o)| {
            let (i, j) = (k % n, k / n);
            let p = lattice.node(i, j);
            let nb = [
                ((i + n - 1) % n, j, Point::new(-h, 0.0)),
                ((i + 1) % n, j, Point::new(h, 0.0)),
                (i, (j + n - 1) % n, Point::new(0.0, -h)),
                (i, (j + 1) % n, Point::new(0.0, h)),
            ];
            // image of each atom nearest to p; neighbours use that same image
            let images: Vec<(f64, Point)> = self
                .atoms
                .iter()
                .map(|a| (a.beta, p + self.delta(p, a.location)))
                .collect();
            let chart_fix = |q_idx: Point, q: Point| -> f64 {
                let mut c = 0.0;
                for &(beta, z) in &images {
                    let ni = self.delta(z, q_idx).norm();
                    let local = (q - z).norm();
                    if ni != local {
                        c += beta * (ni.ln() - local.ln());
                    }
                }
                c
            };
            let mut lap = -4.0 * base.get(i, j);
            for &(ii, jj, off) in &nb {
                let q = p + off;
                lap += base.get(ii, jj) + chart_fix(lattice.node(ii, jj), q);
            }
            *o = -lap / (h * h);
        });
        out
    }

    /// Samples of `v(θ,t) = u(center + e^{−t}(cos θ, sin θ)) − t`.
    pub fn cylinder_transform(
        &self,
        center: Point,
        t0: f64,
        t1: f64,
        nt: usize,
        ntheta: usize,
    ) -> Result<CylinderMetric, MetricError> {
        if !(t1 > t0) || nt < 2 || ntheta < 4 {
            return Err(MetricError::Parameter("cylinder needs t1 > t0, nt ≥ 2, nθ ≥ 4".into()));
        }
        if !self.background.contains_disk(center, (-t0).exp()) {
            return Err(MetricError::AnnulusOutOfDomain);
        }
        let centre_atom = self.atom_at(center);
        let dt = (t1 - t0) / (nt - 1) as f64;
        let mut v = Vec::with_capacity(nt * ntheta);
        for k in 0..nt {
            let t = t0 + k as f64 * dt;
            for m in 0..ntheta {
                let th = 2.0 * PI * m as f64 / ntheta as f64;
                let x = center + Point::polar((-t).exp(), th);
                // the centre atom contributes −β t exactly
                let u = match centre_atom {
                    Some(i) => self.u_regular_at(x, i) - self.effective_beta(i) * t,
                    None => self.u(x),
                };
                v.push(u - t);
            }
        }
        Ok(CylinderMetric { center, t0, t1, nt, ntheta, v })
    }
}

/// `v` on `[t₀, t₁] × S¹`, row `k` at `t = t₀ + k·Δt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderMetric {
    pub center: Point,
    pub t0: f64,
    pub t1: f64,
    pub nt: usize,
    pub ntheta: usize,
    pub v: Vec<f64>,
}

impl CylinderMetric {
    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.nt - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    pub fn get(&self, k: usize, m: usize) -> f64 {
        self.v[k * self.ntheta + m % self.ntheta]
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt()
    }

    /// `∫_{S¹×{t_k}} ∂v/∂t dθ` by differences in `t` (one-sided at the ends).
    pub fn flux(&self, k: usize) -> f64 {
        let (a, b) = if k == 0 {
            (0, 1)
        } else if k + 1 == self.nt {
            (k - 1, k)
        } else {
            (k - 1, k + 1)
        };
        let span = (b - a) as f64 * self.dt();
        (0..self.ntheta).map(|m| (self.get(b, m) - self.get(a, m)) / span).sum::<f64>() * self.dtheta()
    }

    /// `∫∫ |∇v| dθ dt` over rows `[ka, kb]` with cell-centred differences.
    pub fn gradient_l1(&self, ka: usize, kb: usize) -> f64 {
        let (dt, dth) = (self.dt(), self.dtheta());
        let mut s = 0.0;
        for k in ka..kb.min(self.nt - 1) {
            for m in 0..self.ntheta {
                let vt = 0.5 * ((self.get(k + 1, m) - self.get(k, m)) + (self.get(k + 1, m + 1) - self.get(k, m + 1))) / dt;
                let vth = 0.5 * ((self.get(k, m + 1) - self.get(k, m)) + (self.get(k + 1, m + 1) - self.get(k + 1, m))) / dth;
                s += (vt * vt + vth * vth).sqrt() * dt * dth;
            }
        }
        s
    }
}
