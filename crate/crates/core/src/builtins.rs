//! Named metrics selectable from scenario files.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::DensityField;
use crate::geom::{Background, Point};
use crate::measure::{Atom, SignedMeasure};
use crate::metric::{ConeAtom, ConformalMetric, LogTerm, MetricError};
use crate::potential::{torus_potential, PotentialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

fn one() -> f64 {
    1.0
}

fn ht_half_width() -> f64 {
    0.6
}

fn dipole_mass() -> f64 {
    0.8 * PI
}

fn dipole_locations() -> [Point; 2] {
    [Point::new(0.25, 0.5), Point::new(0.75, 0.5)]
}

/// A builtin metric and its parameters, as written in a `[metric]` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Builtin {
    /// `u ≡ 0` on a square.
    Flat {
        #[serde(default = "one")]
        half_width: f64,
    },
    /// `u = β log|x − c|`, curvature `−2πβ δ_c`.
    Cone {
        beta: f64,
        #[serde(default)]
        center: Point,
        #[serde(default = "one")]
        half_width: f64,
    },
    /// A cone admitting `β ≤ −1` (mass `≥ 2π`), for completeness probes.
    ConeProbe {
        beta: f64,
        #[serde(default = "one")]
        half_width: f64,
    },
    /// `u = Σ βᵢ log|x − zᵢ|`.
    Multicone {
        atoms: Vec<ConeAtom>,
        #[serde(default = "one")]
        half_width: f64,
    },
    /// `u = −log|z| − a log|log|z||`: an atom of mass 2π whose end is
    /// complete for `a ≤ 1` and at finite distance for `a > 1`.
    HulinTroyanov {
        a: f64,
        #[serde(default = "ht_half_width")]
        half_width: f64,
    },
    /// `u = |x¹|`: curvature `−2 H¹` on the line `x¹ = 0`.
    AbsLine {
        #[serde(default = "one")]
        half_width: f64,
    },
    /// Flat torus with atoms `±m` at `(0.25, 0.5)` and `(0.75, 0.5)`.
    TorusDipole {
        #[serde(default = "dipole_mass")]
        mass: f64,
    },
}

/// One catalog line per builtin.
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static str,
    pub realizes: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry { name: "flat", params: "half_width=1", realizes: "u = 0; the flat square" },
    CatalogEntry {
        name: "cone",
        params: "beta (> -1), center=(0,0), half_width=1",
        realizes: "u = beta log|x - c|; cone point of curvature -2 pi beta",
    },
    CatalogEntry {
        name: "cone-probe",
        params: "beta (any), half_width=1",
        realizes: "cone admitting mass >= 2 pi; probe-only, for completeness tests",
    },
    CatalogEntry {
        name: "multicone",
        params: "atoms=[{x,y,beta}], half_width=1",
        realizes: "u = sum beta_i log|x - z_i|; finitely many cone points",
    },
    CatalogEntry {
        name: "hulin-troyanov",
        params: "a, half_width=0.6",
        realizes: "|dz|^2 / (|z|^2 |log|z||^(2a)); mass-2pi atom, complete end iff a <= 1",
    },
    CatalogEntry {
        name: "abs-line",
        params: "half_width=1",
        realizes: "u = |x^1|; curvature is a line mass of density -2 on {x^1 = 0}",
    },
    CatalogEntry {
        name: "torus-dipole",
        params: "mass=0.8 pi",
        realizes: "flat torus with atoms +mass at (0.25,0.5) and -mass at (0.75,0.5)",
    },
];

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Flat { .. } => "flat",
            Builtin::Cone { .. } => "cone",
            Builtin::ConeProbe { .. } => "cone-probe",
            Builtin::Multicone { .. } => "multicone",
            Builtin::HulinTroyanov { .. } => "hulin-troyanov",
            Builtin::AbsLine { .. } => "abs-line",
            Builtin::TorusDipole { .. } => "torus-dipole",
        }
    }

    /// Build at lattice spacing `h` (used by sampled parts only).
    pub fn build(&self, h: f64) -> Result<ConformalMetric, BuildError> {
        Ok(match self {
            Builtin::Flat { half_width } => ConformalMetric::flat(Background::square(*half_width)).validated()?,
            Builtin::Cone { beta, center, half_width } => cone(*beta, *center, *half_width)?,
            Builtin::ConeProbe { beta, half_width } => {
                ConformalMetric::new_probe(Background::square(*half_width), vec![ConeAtom::new(Point::ORIGIN, *beta)], None)?
            }
            Builtin::Multicone { atoms, half_width } => {
                ConformalMetric::new(Background::square(*half_width), atoms.clone(), None)?
            }
            Builtin::HulinTroyanov { a, half_width } => hulin_troyanov(*a, *half_width)?,
            Builtin::AbsLine { half_width } => abs_line(*half_width, h)?,
            Builtin::TorusDipole { mass } => torus_dipole(*mass, (1.0 / h).round() as usize)?,
        })
    }
}

pub fn cone(beta: f64, center: Point, half_width: f64) -> Result<ConformalMetric, MetricError> {
    ConformalMetric::new(Background::square(half_width), vec![ConeAtom::new(center, beta)], None)
}

pub fn hulin_troyanov(a: f64, half_width: f64) -> Result<ConformalMetric, MetricError> {
    if !(half_width > 0.0 && half_width * std::f64::consts::SQRT_2 < 1.0) {
        return Err(MetricError::Parameter("hulin-troyanov needs the square inside the unit disk".into()));
    }
    ConformalMetric::new_probe(Background::square(half_width), vec![ConeAtom::new(Point::ORIGIN, -1.0)], None)?
        .with_terms(vec![LogTerm::LogLog { center: Point::ORIGIN, coeff: -a }])
}

pub fn abs_line(half_width: f64, h: f64) -> Result<ConformalMetric, MetricError> {
    let bg = Background::square(half_width);
    // an even cell count puts lattice nodes on x = 0, where |x| kinks
    let cells = ((2.0 * half_width / h).round() as usize).max(2);
    let cells = cells + cells % 2;
    let spacing = 2.0 * half_width / cells as f64;
    let smooth = DensityField::zeros(bg.min(), spacing, cells + 1, cells + 1).from_fn(|p| p.x.abs());
    ConformalMetric::new(bg, vec![], Some(smooth))
}

/// The measure realised by [`torus_dipole`].
pub fn dipole_measure(mass: f64) -> SignedMeasure {
    let [p, q] = dipole_locations();
    SignedMeasure::from_atoms(vec![Atom::new(p, mass), Atom::new(q, -mass)]).periodic(true)
}

pub fn torus_dipole(mass: f64, n: usize) -> Result<ConformalMetric, BuildError> {
    let pot = torus_potential(&dipole_measure(mass), n)?;
    let atoms = pot.atoms.iter().map(|&(z, beta)| ConeAtom::new(z, beta)).collect();
    Ok(ConformalMetric::new(Background::FlatTorus, atoms, Some(pot.smooth))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_match_variants() {
        let names: Vec<&str> = CATALOG.iter().map(|e| e.name).collect();
        for want in ["cone", "multicone", "hulin-troyanov", "abs-line", "torus-dipole"] {
            assert!(names.contains(&want));
        }
    }

    #[test]
    fn builtins_parse_from_toml() {
        let b: Builtin = toml::from_str("name = \"cone\"\nbeta = 0.3").unwrap();
        assert_eq!(b, Builtin::Cone { beta: 0.3, center: Point::ORIGIN, half_width: 1.0 });
        let err = toml::from_str::<Builtin>("name = \"sphere\"").unwrap_err();
        assert!(err.to_string().contains("sphere"));
        assert!(toml::from_str::<Builtin>("name = \"cone\"\nbeta = 0.3\nbta = 1").is_err());
    }

    #[test]
    fn abs_line_samples_are_exact() {
        let g = abs_line(1.0, 1.0 / 64.0).unwrap();
        for x in [-0.77, -0.01, 0.0, 0.3] {
            assert!((g.u(Point::new(x, 0.1)) - f64::abs(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn hulin_troyanov_profile() {
        let g = hulin_troyanov(1.5, 0.6).unwrap();
        let r: f64 = 0.1;
        assert!((g.u(Point::new(r, 0.0)) - (-r.ln() - 1.5 * (-r.ln()).ln())).abs() < 1e-14);
        assert!((g.curvature_of().atoms[0].mass - 2.0 * PI).abs() < 1e-14);
    }
}
