//! Signed Radon measures: atoms, a sampled density and line masses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::DensityField;
use crate::geom::{delta, Point, Region};
use crate::quadrature;

/// Locations closer than this are the same point.
pub const POINT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("atom {index} has zero or non-finite mass")]
    InvalidAtom { index: usize },
    #[error("atoms {first} and {second} share a location")]
    DuplicateAtom { first: usize, second: usize },
    #[error("density field is malformed (needs ≥2×2 finite samples)")]
    InvalidDensity,
    #[error("line {index} is degenerate or non-finite")]
    InvalidLine { index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(flatten)]
    pub location: Point,
    pub mass: f64,
}

impl Atom {
    pub fn new(location: Point, mass: f64) -> Self {
        Atom { location, mass }
    }
}

/// Uniform curvature per unit length along a segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "LineRepr", into = "LineRepr")]
pub struct LineMass {
    pub start: Point,
    pub end: Point,
    pub linear_density: f64,
}

#[derive(Serialize, Deserialize)]
struct LineRepr {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    density: f64,
}

impl From<LineRepr> for LineMass {
    fn from(r: LineRepr) -> Self {
        LineMass { start: Point::new(r.x0, r.y0), end: Point::new(r.x1, r.y1), linear_density: r.density }
    }
}

impl From<LineMass> for LineRepr {
    fn from(l: LineMass) -> Self {
        LineRepr { x0: l.start.x, y0: l.start.y, x1: l.end.x, y1: l.end.y, density: l.linear_density }
    }
}

impl LineMass {
    pub fn new(start: Point, end: Point, linear_density: f64) -> Self {
        LineMass { start, end, linear_density }
    }

    pub fn length(&self) -> f64 {
        self.start.dist(self.end)
    }

    pub fn total(&self) -> f64 {
        self.linear_density * self.length()
    }
}

/// `μ = Σ mᵢ δ_{zᵢ} + f dx + Σ λⱼ H¹⌞Lⱼ`. On the torus (`periodic`) atom and
/// density coordinates are canonical in `[0,1)²`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityField>,
    #[serde(default)]
    pub lines: Vec<LineMass>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub periodic: bool,
}

impl SignedMeasure {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Self {
        SignedMeasure { atoms, ..Self::default() }
    }

    pub fn with_density(mut self, density: DensityField) -> Self {
        self.periodic |= density.periodic;
        self.density = Some(density);
        self
    }

    pub fn with_lines(mut self, lines: Vec<LineMass>) -> Self {
        self.lines = lines;
        self
    }

    pub fn periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        for (i, a) in self.atoms.iter().enumerate() {
            if a.mass == 0.0 || !a.mass.is_finite() || !a.location.is_finite() {
                return Err(MeasureError::InvalidAtom { index: i });
            }
            for (j, b) in self.atoms.iter().enumerate().skip(i + 1) {
                if delta(a.location, b.location, self.periodic).norm() < POINT_TOL {
                    return Err(MeasureError::DuplicateAtom { first: i, second: j });
                }
            }
        }
        if let Some(d) = &self.density {
            if !d.is_valid() {
                return Err(MeasureError::InvalidDensity);
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            if !(l.length() > 0.0) || !l.linear_density.is_finite() || !l.start.is_finite() || !l.end.is_finite() {
                return Err(MeasureError::InvalidLine { index: i });
            }
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self, MeasureError> {
        self.validate().map(|_| self)
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
            && self.lines.iter().all(|l| l.linear_density == 0.0)
            && self.density.as_ref().is_none_or(|d| d.values.iter().all(|&v| v == 0.0))
    }

    /// Signed total mass `μ(domain)`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum::<f64>()
            + self.density.as_ref().map_or(0.0, |d| d.integral())
            + self.lines.iter().map(|l| l.total()).sum::<f64>()
    }

    /// `|μ|(domain)`.
    pub fn total_variation_all(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass.abs()).sum::<f64>()
            + self.density.as_ref().map_or(0.0, |d| d.values.iter().map(|v| v.abs()).sum::<f64>() * d.spacing * d.spacing)
            + self.lines.iter().map(|l| l.total().abs()).sum::<f64>()
    }

    /// `|μ|(region)`.
    pub fn total_variation(&self, region: &Region) -> f64 {
        self.restricted(region, f64::abs)
    }

    /// `μ(region)`.
    pub fn signed_mass(&self, region: &Region) -> f64 {
        self.restricted(region, |v| v)
    }

    fn restricted(&self, region: &Region, f: fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for a in &self.atoms {
            if region.contains(a.location, self.periodic) {
                total += f(a.mass);
            }
        }
        if let Some(d) = &self.density {
            total += d.integrate_over(region, f);
        }
        for l in &self.lines {
            let a = region.unwrap(l.start, self.periodic);
            let b = a + delta(l.start, l.end, false);
            total += f(l.linear_density) * region.segment_length_inside(a, b);
        }
        total
    }

    /// `(μ⁺, μ⁻)`, each nonnegative componentwise.
    pub fn jordan_decompose(&self) -> (SignedMeasure, SignedMeasure) {
        let split = |sign: f64| {
            let atoms = self
                .atoms
                .iter()
                .filter(|a| a.mass * sign > 0.0)
                .map(|a| Atom::new(a.location, a.mass.abs()))
                .collect();
            let density = self.density.as_ref().map(|d| d.map(|v| (sign * v).max(0.0)));
            let lines = self
                .lines
                .iter()
                .map(|l| LineMass::new(l.start, l.end, (sign * l.linear_density).max(0.0)))
                .filter(|l| l.linear_density > 0.0)
                .collect();
            SignedMeasure { atoms, density, lines, periodic: self.periodic }
        };
        (split(1.0), split(-1.0))
    }

    /// `∫ φ dμ`; density by the midpoint rule at samples, lines adaptively.
    pub fn integrate_test<F: Fn(Point) -> f64>(&self, phi: F) -> f64 {
        let mut total: f64 = self.atoms.iter().map(|a| a.mass * phi(a.location)).sum();
        if let Some(d) = &self.density {
            let mut s = 0.0;
            for j in 0..d.ny {
                for i in 0..d.nx {
                    let v = d.get(i, j);
                    if v != 0.0 {
                        s += v * phi(d.node(i, j));
                    }
                }
            }
            total += s * d.spacing * d.spacing;
        }
        for l in &self.lines {
            if l.linear_density == 0.0 {
                continue;
            }
            let len = l.length();
            let integral = quadrature::adaptive(|t| phi(l.start.lerp(l.end, t)), 0.0, 1.0, 1e-10, 1e-14);
            total += l.linear_density * len * integral;
        }
        total
    }

    /// `μ({x})`: the atom mass at `x`, zero elsewhere.
    pub fn point_mass(&self, x: Point) -> f64 {
        self.atoms
            .iter()
            .filter(|a| delta(a.location, x, self.periodic).norm() < POINT_TOL)
            .map(|a| a.mass)
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measure serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
