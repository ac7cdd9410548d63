//! Mollification of measures and metrics, cone splitting, and the two
//! convergence experiments built on them.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::field::DensityField;
use crate::geodesic::{diameter, GeodesicError, GridGraph, GridOptions, Solver};
use crate::geom::{delta, Point, Region};
use crate::measure::{LineMass, SignedMeasure};
use crate::metric::{ConformalMetric, LogTerm, MetricError};
use crate::mollifier::eta_eps;
use crate::quadrature::adaptive;
use crate::report::ExperimentReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("mollification radius {eps} is below twice the lattice spacing {h}")]
    RadiusTooSmall { eps: f64, h: f64 },
    #[error("atom {index} has mass {mass}, not the borderline 2π")]
    NotBorderlineAtom { index: usize, mass: f64 },
    #[error("no atom with index {0}")]
    NoSuchAtom(usize),
    #[error("cannot mollify: {0}")]
    NotMollifiable(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
}

/// Lattice for the mollified density: the measure's own, the torus lattice
/// at spacing `h`, or a plane lattice covering the support plus `ε`.
fn target_lattice(mu: &SignedMeasure, eps: f64, h: f64) -> DensityField {
    if let Some(d) = &mu.density {
        return d.map(|_| 0.0);
    }
    if mu.periodic {
        return DensityField::torus_zeros((1.0 / h).round().max(4.0) as usize);
    }
    let pts = mu.atoms.iter().map(|a| a.location).chain(mu.lines.iter().flat_map(|l| [l.start, l.end]));
    let (mut min, mut max) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in pts {
        min = Point::new(min.x.min(p.x), min.y.min(p.y));
        max = Point::new(max.x.max(p.x), max.y.max(p.y));
    }
    if !min.is_finite() {
        min = Point::ORIGIN;
        max = Point::ORIGIN;
    }
    let pad = eps + 2.0 * h;
    // snap to multiples of h so atoms keep a fixed lattice position
    let lo = Point::new(((min.x - pad) / h).floor() * h, ((min.y - pad) / h).floor() * h);
    let hi = Point::new(((max.x + pad) / h).ceil() * h, ((max.y + pad) / h).ceil() * h);
    DensityField::covering(lo, hi, h)
}

/// Scale `f` so that its lattice integral is `mass`.
fn normalized(f: DensityField, mass: f64) -> DensityField {
    let have = f.integral();
    if have == 0.0 {
        f
    } else {
        f.map(|v| v * mass / have)
    }
}

fn line_profile(l: &LineMass, p: Point, eps: f64, periodic: bool) -> f64 {
    let len = l.length();
    if len == 0.0 {
        return 0.0;
    }
    let e = (l.end - l.start) * (1.0 / len);
    let w = delta(l.start, p, periodic);
    let along = w.dot(e);
    let off = (w.x * e.y - w.y * e.x).abs();
    if off >= eps {
        return 0.0;
    }
    let (a, b) = ((along - eps).max(0.0), (along + eps).min(len));
    if b <= a {
        return 0.0;
    }
    adaptive(|s| eta_eps(((s - along).powi(2) + off * off).sqrt(), eps), a, b, 1e-9, 1e-14)
}

/// `η_ε ∗ ν` for a nonnegative measure `ν`, each component keeping its mass.
fn mollify_part(nu: &SignedMeasure, eps: f64, lattice: &DensityField) -> DensityField {
    let periodic = lattice.periodic;
    let mut out = lattice.map(|_| 0.0);
    let mut add = |f: DensityField| {
        for (o, v) in out.values.iter_mut().zip(&f.values) {
            *o += v;
        }
    };
    for a in &nu.atoms {
        let f = lattice.clone().from_fn(|p| eta_eps(delta(a.location, p, periodic).norm(), eps));
        add(normalized(f, a.mass));
    }
    for l in &nu.lines {
        let f = lattice.clone().from_fn(|p| line_profile(l, p, eps, periodic));
        add(normalized(f, l.total()));
    }
    if let Some(d) = &nu.density {
        let h = d.spacing;
        let reach = (eps / h).ceil() as i64;
        let src = d.clone();
        let f = lattice.clone().from_fn(|p| {
            let ci = ((p.x - src.origin.x) / h).round() as i64;
            let cj = ((p.y - src.origin.y) / h).round() as i64;
            let mut acc = 0.0;
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let (mut i, mut j) = (ci + di, cj + dj);
                    if periodic {
                        i = i.rem_euclid(src.nx as i64);
                        j = j.rem_euclid(src.ny as i64);
                    } else if i < 0 || j < 0 || i >= src.nx as i64 || j >= src.ny as i64 {
                        continue;
                    }
                    let v = src.get(i as usize, j as usize);
                    if v != 0.0 {
                        acc += v * eta_eps(delta(src.node(i as usize, j as usize), p, periodic).norm(), eps);
                    }
                }
            }
            acc * h * h
        });
        add(normalized(f, d.integral()));
    }
    out
}

/// Mollified Jordan parts `(η_ε ∗ μ⁺, η_ε ∗ μ⁻)`, both nonnegative.
pub fn mollify_jordan(mu: &SignedMeasure, eps: f64, h: f64) -> Result<(DensityField, DensityField), ApproxError> {
    let lattice = target_lattice(mu, eps, h);
    if eps < 2.0 * lattice.spacing * (1.0 - 1e-12) {
        return Err(ApproxError::RadiusTooSmall { eps, h: lattice.spacing });
    }
    let (pos, neg) = mu.jordan_decompose();
    Ok((mollify_part(&pos, eps, &lattice), mollify_part(&neg, eps, &lattice)))
}

/// `η_ε ∗ μ` as a density-only measure on a lattice of spacing `h` (or the
/// measure's own lattice when it has a density).
pub fn mollify_measure(mu: &SignedMeasure, eps: f64, h: f64) -> Result<SignedMeasure, ApproxError> {
    let (f1, f2) = mollify_jordan(mu, eps, h)?;
    let mut f = f1;
    for (a, b) in f.values.iter_mut().zip(&f2.values) {
        *a -= b;
    }
    Ok(SignedMeasure::zero().periodic(mu.periodic).with_density(f))
}

/// `u ∗ η_ε` for the atomic part: each atom `β log|x − z|` becomes the
/// closed-form mollified profile, equal to it off `D_ε(z)`. Smooth samples
/// and other terms are kept.
pub fn mollify_metric(g: &ConformalMetric, eps: f64) -> Result<ConformalMetric, ApproxError> {
    let h = g.spacing();
    if eps < 2.0 * h * (1.0 - 1e-12) {
        return Err(ApproxError::RadiusTooSmall { eps, h });
    }
    if let Some(t) = g.terms.iter().find(|t| !matches!(t, LogTerm::Mollified { .. })) {
        return Err(ApproxError::NotMollifiable(format!("singular term {t:?}")));
    }
    let mut out = g.clone();
    out.atoms.clear();
    out.terms.extend(
        g.atoms.iter().map(|a| LogTerm::Mollified { center: a.location, coeff: a.beta, eps }),
    );
    Ok(out.validated()?)
}

/// Relative tolerance on the 2π mass of a splittable atom.
pub const BORDERLINE_TOL: f64 = 1e-3;

/// Lower the mass of a borderline atom from `2π` to `2π(1 − 1/k)` inside
/// `D_δ(z)` by adding `(1 − η(ρ/δ))·(1/k)·log ρ`, which vanishes off `D_{2δ}`.
pub fn cone_split(g: &ConformalMetric, atom: usize, delta_r: f64, k: u32) -> Result<ConformalMetric, ApproxError> {
    let a = g.atoms.get(atom).ok_or(ApproxError::NoSuchAtom(atom))?;
    let mass = -2.0 * PI * g.effective_beta(atom);
    if !(mass <= 2.0 * PI * (1.0 + 1e-12) && mass >= 2.0 * PI * (1.0 - BORDERLINE_TOL)) {
        return Err(ApproxError::NotBorderlineAtom { index: atom, mass });
    }
    if k == 0 || !(delta_r > 0.0 && 2.0 * delta_r < 1.0) {
        return Err(ApproxError::Parameter(format!("need k ≥ 1 and 0 < 2δ < 1 (got k = {k}, δ = {delta_r})")));
    }
    if !g.is_torus() && !g.background.contains_disk(a.location, 2.0 * delta_r) {
        return Err(ApproxError::Parameter(format!("D_2δ around atom {atom} leaves the domain")));
    }
    for (i, b) in g.atoms.iter().enumerate() {
        if i != atom && g.delta(a.location, b.location).norm() < 2.0 * delta_r {
            return Err(ApproxError::Parameter(format!("atom {i} lies inside D_2δ")));
        }
    }
    let mut terms = g.terms.clone();
    terms.push(LogTerm::Cutoff { center: a.location, coeff: 1.0 / k as f64, delta: delta_r });
    Ok(g.clone().with_terms(terms)?)
}

/// Distances for a list of pairs, one field per distinct source.
fn pair_distances(s: &Solver, pairs: &[(Point, Point)]) -> Result<Vec<f64>, GeodesicError> {
    pairs
        .par_iter()
        .map(|&(x, y)| s.distance(x, y))
        .collect()
}

/// `sup` and mean of `|d_{g_ε}(x, y) − d_g(x, y)|` over pairs, for each `ε`,
/// on one shared lattice. Asserts the sup error strictly decreases and ends
/// below `final_tol`.
pub fn reshetnyak_experiment(
    g: &ConformalMetric,
    eps_schedule: &[f64],
    pairs: &[(Point, Point)],
    final_tol: f64,
    opts: &GridOptions,
) -> Result<ExperimentReport, ApproxError> {
    if pairs.is_empty() || eps_schedule.is_empty() {
        return Err(ApproxError::Parameter("need at least one pair and one ε".into()));
    }
    if eps_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ApproxError::Parameter("ε schedule must decrease".into()));
    }
    let base = Solver::new(g, opts);
    let d0 = pair_distances(&base, pairs)?;
    let graph: GridGraph = base.graph.clone();
    let mut report = ExperimentReport::new("converge", &["eps", "sup_err", "mean_err"]);
    let mut sups = Vec::new();
    for &eps in eps_schedule {
        let ge = mollify_metric(g, eps)?;
        let s = Solver::with_graph(&ge, graph.clone());
        let d = pair_distances(&s, pairs)?;
        let errs: Vec<f64> = d.iter().zip(&d0).map(|(a, b)| (a - b).abs()).collect();
        let sup = errs.iter().copied().fold(0.0, f64::max);
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        report.push(vec![eps.into(), sup.into(), mean.into()]);
        sups.push(sup);
    }
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    report.assert("sup_err strictly decreasing", decreasing, format!("{sups:?}"));
    let last = *sups.last().expect("nonempty");
    report.assert("final sup_err below tolerance", last < final_tol, format!("{last} < {final_tol}"));
    Ok(report)
}

/// `diam(D_r(center))` in `g_ε` over `(r, ε)`. Asserts the column of the
/// smallest `ε` decreases as `r` decreases and its smallest-`r` entry is
/// below `threshold`.
pub fn ghost_probe(
    g: &ConformalMetric,
    center: Point,
    r_schedule: &[f64],
    eps_schedule: &[f64],
    threshold: f64,
    opts: &GridOptions,
) -> Result<ExperimentReport, ApproxError> {
    if r_schedule.is_empty() || eps_schedule.is_empty() {
        return Err(ApproxError::Parameter("empty schedule".into()));
    }
    match g.atom_at(center) {
        Some(i) if -2.0 * PI * g.effective_beta(i) < 2.0 * PI => {}
        _ => return Err(ApproxError::Parameter("ghost probe needs an atom of mass below 2π at the centre".into())),
    }
    let mut r_sorted = r_schedule.to_vec();
    r_sorted.sort_by(|a, b| b.total_cmp(a));
    let eps_min = eps_schedule.iter().copied().fold(f64::INFINITY, f64::min);
    let mut report = ExperimentReport::new("ghost", &["r", "eps", "diam_lower", "diam_upper"]);
    let mut column = Vec::new();
    for &eps in eps_schedule {
        let ge = mollify_metric(g, eps)?;
        for &r in &r_sorted {
            let d = diameter(&ge, &Region::disk(center, r), opts)?;
            report.push(vec![r.into(), eps.into(), d.lower.into(), d.upper.into()]);
            if eps == eps_min {
                column.push(d.lower);
            }
        }
    }
    let decreasing = column.windows(2).all(|w| w[1] < w[0]);
    report.assert("diameter decreasing in r", decreasing, format!("{column:?}"));
    let corner = *column.last().expect("nonempty");
    report.assert("smallest-r diameter below threshold", corner < threshold, format!("{corner} < {threshold}"));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{cone, dipole_measure};
    use crate::geom::Background;
    use crate::measure::Atom;
    use crate::metric::ConeAtom;

    #[test]
    fn mollified_atoms_keep_mass_per_jordan_part() {
        let mu = SignedMeasure::from_atoms(vec![Atom::new(Point::new(0.1, 0.2), 1.5), Atom::new(Point::new(-0.3, 0.0), -0.7)])
            .with_lines(vec![LineMass::new(Point::new(0.0, -0.5), Point::new(0.0, 0.5), -2.0)]);
        let (f1, f2) = mollify_jordan(&mu, 0.05, 1.0 / 128.0).unwrap();
        assert!(f1.values.iter().chain(&f2.values).all(|&v| v >= 0.0));
        assert!((f1.integral() - 1.5).abs() < 1e-8);
        assert!((f2.integral() - 2.7).abs() < 1e-8);
        let m = mollify_measure(&mu, 0.05, 1.0 / 128.0).unwrap();
        assert!(m.atoms.is_empty() && m.lines.is_empty());
        assert!((m.total_mass() - mu.total_mass()).abs() < 1e-8);
        assert!(mollify_measure(&SignedMeasure::zero(), 0.05, 1.0 / 128.0).unwrap().total_variation_all() == 0.0);
        assert!(matches!(mollify_measure(&mu, 0.01, 1.0 / 128.0), Err(ApproxError::RadiusTooSmall { .. })));
    }

    #[test]
    fn torus_mollification_wraps() {
        let (f1, f2) = mollify_jordan(&dipole_measure(1.0), 0.1, 1.0 / 64.0).unwrap();
        assert!((f1.integral() - 1.0).abs() < 1e-8 && (f2.integral() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mollified_metric_agrees_off_the_disks() {
        let g = cone(0.3, Point::ORIGIN, 1.0).unwrap();
        let ge = mollify_metric(&g, 1.0 / 16.0).unwrap();
        assert!(ge.atoms.is_empty());
        for p in [Point::new(0.1, 0.0), Point::new(-0.4, 0.3)] {
            assert!((ge.u(p) - g.u(p)).abs() < 1e-12);
        }
        // (β log ∗ η_ε)(0) = β(log ε − 25/24)
        let want = 0.3 * ((1.0f64 / 16.0).ln() - 25.0 / 24.0);
        assert!((ge.u(Point::ORIGIN) - want).abs() < 1e-12);
    }

    #[test]
    fn cone_split_reduces_mass_locally() {
        let g = ConformalMetric::new_probe(Background::square(1.0), vec![ConeAtom::new(Point::ORIGIN, -1.0)], None).unwrap();
        let s = cone_split(&g, 0, 0.1, 10).unwrap();
        let k = s.curvature_of();
        assert!((k.atoms[0].mass - 2.0 * PI * 0.9).abs() < 1e-12);
        for p in [Point::new(0.2, 0.0), Point::new(0.5, 0.5), Point::new(0.21, -0.05)] {
            assert_eq!(s.u(p).to_bits(), g.u(p).to_bits());
        }
        for p in [Point::new(0.05, 0.0), Point::new(0.15, 0.01)] {
            assert!(s.u(p) <= g.u(p));
        }
        let c = cone(0.3, Point::ORIGIN, 1.0).unwrap();
        assert!(matches!(cone_split(&c, 0, 0.1, 10), Err(ApproxError::NotBorderlineAtom { .. })));
    }
}
