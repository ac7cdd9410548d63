//! Decay along logarithmic cylinders around a point, and the completeness
//! probe for cone-type ends.
//!
//! Ring `i` is the annulus `e^{−(i+1)L} ≤ |x − c| ≤ e^{−iL}` shifted by
//! `t_start`; circle `S_i` has radius `e^{−(t_start + iL)}`. Distances and
//! lengths are measured in the disk coordinates; the cylinder samples `v`
//! are used only to estimate `Λ`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesic::{annulus_distance, circle_length, curve_length, diameter, GeodesicError, GridOptions};
use crate::geom::{Point, Region};
use crate::metric::{ConformalMetric, MetricError};
use crate::report::{ExperimentReport, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CylinderError {
    #[error("precondition failed: {0}")]
    PreconditionFail(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Geodesic(#[from] GeodesicError),
}

/// Curvature mass of the atom at `center` (zero at regular points).
pub fn center_mass(g: &ConformalMetric, center: Point) -> f64 {
    g.atom_at(center).map_or(0.0, |i| -2.0 * PI * g.effective_beta(i))
}

fn radius(t: f64) -> f64 {
    (-t).exp()
}

/// `d_g(S_i, S_{i+1})` through ring `i` (with `t_start = 0`).
pub fn ring_distance(g: &ConformalMetric, center: Point, i: usize, l: f64, opts: &GridOptions) -> Result<f64, CylinderError> {
    ring_distance_from(g, center, 0.0, i, l, opts)
}

fn ring_distance_from(
    g: &ConformalMetric,
    center: Point,
    t_start: f64,
    i: usize,
    l: f64,
    opts: &GridOptions,
) -> Result<f64, CylinderError> {
    let outer = radius(t_start + i as f64 * l);
    let inner = radius(t_start + (i + 1) as f64 * l);
    Ok(annulus_distance(g, &Region::disk(center, inner), &Region::disk(center, outer), opts)?)
}

/// Length of the meridian `{θ = 0}` across ring `i`.
fn meridian(g: &ConformalMetric, center: Point, t_a: f64, t_b: f64) -> Result<f64, CylinderError> {
    let a = center + Point::new(radius(t_b), 0.0);
    let b = center + Point::new(radius(t_a), 0.0);
    Ok(curve_length(g, &[a, b])?)
}

/// Samples per unit of `t` in the `Λ` estimate.
const LAMBDA_ROWS_PER_UNIT: usize = 32;
const LAMBDA_NTHETA: usize = 256;
/// Inflation applied to the measured `max ‖∇v‖_{L¹}` over unit blocks.
pub const LAMBDA_INFLATION: f64 = 1.5;

/// `1.5 · max over unit blocks [t, t+1] ⊂ [t_a, t_b] of ∫∫|∇v|`.
pub fn estimate_lambda(g: &ConformalMetric, center: Point, t_a: f64, t_b: f64) -> Result<f64, CylinderError> {
    let units = ((t_b - t_a).ceil() as usize).max(1);
    let nt = units * LAMBDA_ROWS_PER_UNIT + 1;
    let cyl = g.cylinder_transform(center, t_a, t_a + units as f64, nt, LAMBDA_NTHETA)?;
    let worst = (0..units)
        .map(|u| cyl.gradient_l1(u * LAMBDA_ROWS_PER_UNIT, (u + 1) * LAMBDA_ROWS_PER_UNIT))
        .fold(0.0, f64::max);
    Ok(LAMBDA_INFLATION * worst)
}

/// The bound on `diam(Q₁)/d(S₀, S₁)`: `2e^{8Λ}(1 + 8Λ)/(1 − e^{−16Λ})`.
pub fn diam_ratio_bound(lambda: f64) -> f64 {
    2.0 * (8.0 * lambda).exp() * (1.0 + 8.0 * lambda) / (1.0 - (-16.0 * lambda).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeCircle {
    pub center: Point,
    /// Cylinder length `L` per ring.
    pub l: f64,
    pub n_rings: usize,
    pub kappa: f64,
    /// A priori `Λ`; estimated from the metric when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub t_start: f64,
}

/// Per-ring decay measurements against `e^{−κL/2}`.
///
/// Refuses when the centre mass is not below `2π` or
/// `κ ≥ (2π − m)/4π`. The length condition `L > 16Λ/κ` is recorded in the
/// notes, not enforced: the inequalities are checked directly.
pub fn three_circle_report(g: &ConformalMetric, p: &ThreeCircle, opts: &GridOptions) -> Result<ExperimentReport, CylinderError> {
    let m = center_mass(g, p.center);
    if m >= 2.0 * PI {
        return Err(CylinderError::PreconditionFail(format!("centre mass {m} is not below 2π")));
    }
    let kappa_max = (2.0 * PI - m) / (4.0 * PI);
    if !(p.kappa > 0.0 && p.kappa < kappa_max) {
        return Err(CylinderError::PreconditionFail(format!("κ = {} must lie in (0, {kappa_max})", p.kappa)));
    }
    if p.n_rings < 2 || !(p.l > 0.0) {
        return Err(CylinderError::PreconditionFail("need at least two rings and L > 0".into()));
    }
    let t_end = p.t_start + p.n_rings as f64 * p.l;
    let lambda = match p.lambda {
        Some(v) => v,
        None => estimate_lambda(g, p.center, p.t_start, t_end)?,
    };
    let bound = (-0.5 * p.kappa * p.l).exp();
    let diam_bound = diam_ratio_bound(lambda);

    struct Ring {
        d: f64,
        circle: f64,
        meridian: f64,
        diam: f64,
    }
    let rings: Vec<Ring> = (0..p.n_rings)
        .into_par_iter()
        .map(|i| -> Result<Ring, CylinderError> {
            let (ta, tb) = (p.t_start + i as f64 * p.l, p.t_start + (i + 1) as f64 * p.l);
            let region = Region::annulus(p.center, radius(tb), radius(ta));
            Ok(Ring {
                d: ring_distance_from(g, p.center, p.t_start, i, p.l, opts)?,
                circle: circle_length(g, p.center, radius(tb))?,
                meridian: meridian(g, p.center, ta, tb)?,
                diam: diameter(g, &region, opts)?.lower,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut report =
        ExperimentReport::new("three-circle", &["ring", "d_ring", "l_circle", "l_meridian", "diam", "ratio", "bound", "pass"]);
    let (mut ok_d, mut ok_c, mut ok_m, mut ok_diam) = (true, true, true, true);
    for (i, r) in rings.iter().enumerate() {
        let diam_ok = r.diam / r.d < diam_bound;
        let (ratio, pass) = if i == 0 {
            (Value::Text(String::new()), diam_ok)
        } else {
            let prev = &rings[i - 1];
            let (rd, rc, rm) = (r.d / prev.d, r.circle / prev.circle, r.meridian / prev.meridian);
            ok_d &= rd < bound;
            ok_c &= rc < bound;
            ok_m &= rm < bound;
            (Value::Num(rd), rd < bound && rc < bound && rm < bound && diam_ok)
        };
        ok_diam &= diam_ok;
        report.push(vec![
            i.into(),
            r.d.into(),
            r.circle.into(),
            r.meridian.into(),
            r.diam.into(),
            ratio,
            bound.into(),
            pass.into(),
        ]);
    }
    let exponent = (rings.last().expect("rings").d / rings[0].d).ln() / ((p.n_rings - 1) as f64 * p.l);
    report.assert("ring distances decay", ok_d, format!("ratios below {bound}"));
    report.assert("circle lengths decay", ok_c, format!("ratios below {bound}"));
    report.assert("meridian lengths decay", ok_m, format!("ratios below {bound}"));
    report.assert("diameter/ring-distance bounded", ok_diam, format!("below {diam_bound:.6e}"));
    report.notes.push(format!("measured ring decay exponent {exponent:.6}"));
    report.notes.push(format!("centre mass {m:.6}, Λ = {lambda:.6}"));
    let needed = 16.0 * lambda / p.kappa;
    if p.l <= needed {
        report.notes.push(format!("L = {} does not exceed 16Λ/κ = {needed:.3}; inequalities checked directly", p.l));
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BalancedRatio {
    pub ratio: f64,
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// `d(S₀, S₁)/ℓ(L₁)` on the unit block `t ∈ [index, index + 1]`, against
/// `(e^{−8Λ−1}, e^{8Λ+1})` with `Λ` from `[index − 1, index + 2]` unless given.
pub fn balanced_ratio_check(
    g: &ConformalMetric,
    center: Point,
    index: usize,
    lambda: Option<f64>,
    opts: &GridOptions,
) -> Result<BalancedRatio, CylinderError> {
    let t = index as f64;
    if index == 0 {
        return Err(CylinderError::PreconditionFail("block index must be at least 1".into()));
    }
    let lambda = match lambda {
        Some(v) => v,
        None => estimate_lambda(g, center, t - 1.0, t + 2.0)?,
    };
    let d = ring_distance_from(g, center, t, 0, 1.0, opts)?;
    let ratio = d / meridian(g, center, t, t + 1.0)?;
    let (lower, upper) = ((-8.0 * lambda - 1.0).exp(), (8.0 * lambda + 1.0).exp());
    Ok(BalancedRatio { ratio, lambda, lower, upper, pass: lower < ratio && ratio < upper })
}

/// Classification of an end by the growth of `d(∂D_δ, ∂D_r)` as `r → 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndClass {
    Convergent,
    Divergent,
    Inconclusive,
}

impl EndClass {
    pub fn label(self) -> &'static str {
        match self {
            EndClass::Convergent => "CONVERGENT",
            EndClass::Divergent => "DIVERGENT",
            EndClass::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Model `d = A + B·φ_p(t)` in `t = −log r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// `φ = e^{−pt}` (power law in `r`).
    Exponential,
    /// `φ = t^{−p}` (power law in `log 1/r`).
    LogPower,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub model: Model,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    /// RMS residual relative to the data range.
    pub rms: f64,
}

fn basis(model: Model, p: f64, t: f64) -> f64 {
    match model {
        Model::Exponential => (-p * t).exp(),
        Model::LogPower => t.powf(-p),
    }
}

/// Least squares in `(A, B)` for fixed `p`; returns `(A, B, rms)`.
fn solve_ab(model: Model, p: f64, t: &[f64], d: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let phi: Vec<f64> = t.iter().map(|&t| basis(model, p, t)).collect();
    let (sx, sy) = (phi.iter().sum::<f64>(), d.iter().sum::<f64>());
    let sxx: f64 = phi.iter().map(|x| x * x).sum();
    let sxy: f64 = phi.iter().zip(d).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return (f64::NAN, f64::NAN, f64::INFINITY);
    }
    let b = (n * sxy - sx * sy) / det;
    let a = (sy - b * sx) / n;
    let rms = (phi.iter().zip(d).map(|(x, y)| (a + b * x - y).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, if rms.is_finite() { rms } else { f64::INFINITY })
}

/// Best fit of `model` over `p ∈ [−3, 3] ∖ {0}` by a scan then golden sections.
pub fn fit_model(model: Model, t: &[f64], d: &[f64]) -> Fit {
    let span = d.iter().copied().fold(f64::NEG_INFINITY, f64::max) - d.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = if span > 0.0 { span } else { 1.0 };
    let cost = |p: f64| solve_ab(model, p, t, d).2;
    let grid: Vec<f64> = (-300..=300).filter(|&k| k != 0).map(|k| k as f64 / 100.0).collect();
    let mut best = grid[0];
    for &p in &grid {
        if cost(p) < cost(best) {
            best = p;
        }
    }
    let (mut lo, mut hi) = (best - 0.01, best + 0.01);
    if lo < 0.0 && hi > 0.0 {
        if best > 0.0 {
            lo = 1e-6;
        } else {
            hi = -1e-6;
        }
    }
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let (x1, x2) = (hi - gr * (hi - lo), lo + gr * (hi - lo));
        if cost(x1) < cost(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let p = 0.5 * (lo + hi);
    let (a, b, rms) = solve_ab(model, p, t, d);
    Fit { model, a, b, p, rms: rms / scale }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletenessParams {
    /// Minimum last-to-first ratio for a divergent verdict.
    #[serde(default = "default_growth")]
    pub growth: f64,
    /// Maximum relative RMS of the selected fit for any verdict.
    #[serde(default = "default_fit_tol")]
    pub fit_tol: f64,
}

pub(crate) fn default_growth() -> f64 {
    3.0
}

pub(crate) fn default_fit_tol() -> f64 {
    0.01
}

impl Default for CompletenessParams {
    fn default() -> Self {
        CompletenessParams { growth: default_growth(), fit_tol: default_fit_tol() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Completeness {
    pub report: ExperimentReport,
    pub class: EndClass,
    pub fit: Fit,
    /// Fitted limit `A` for convergent ends.
    pub limit: Option<f64>,
}

/// Table of `d(∂D_δ, ∂D_r)` over a decreasing schedule, classified by the
/// better of two decay models in `t = −log r`. DIVERGENT needs a growing
/// model, increasing values and a last-to-first ratio above `growth`;
/// CONVERGENT needs a decaying model. Both need a fit within `fit_tol`.
pub fn completeness_probe(
    g: &ConformalMetric,
    center: Point,
    delta_r: f64,
    r_schedule: &[f64],
    params: &CompletenessParams,
    opts: &GridOptions,
) -> Result<Completeness, CylinderError> {
    if r_schedule.len() < 4 {
        return Err(CylinderError::PreconditionFail("need at least four radii".into()));
    }
    if r_schedule.iter().any(|&r| !(r > 0.0 && r < delta_r)) || r_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CylinderError::PreconditionFail("radii must decrease inside (0, δ)".into()));
    }
    let outer = Region::disk(center, delta_r);
    let d: Vec<f64> = r_schedule
        .par_iter()
        .map(|&r| annulus_distance(g, &Region::disk(center, r), &outer, opts))
        .collect::<Result<_, _>>()?;
    let t: Vec<f64> = r_schedule.iter().map(|r| -r.ln()).collect();
    let fits = [fit_model(Model::Exponential, &t, &d), fit_model(Model::LogPower, &t, &d)];
    let fit = if fits[0].rms <= fits[1].rms { fits[0] } else { fits[1] };

    let increasing = d.windows(2).all(|w| w[1] > w[0]);
    let growth = d[d.len() - 1] / d[0];
    let good = fit.rms <= params.fit_tol;
    let class = if good && fit.p < 0.0 && increasing && growth > params.growth {
        EndClass::Divergent
    } else if good && fit.p > 0.0 {
        EndClass::Convergent
    } else {
        EndClass::Inconclusive
    };
    let limit = (class == EndClass::Convergent).then_some(fit.a);

    let mut report = ExperimentReport::new("completeness", &["r", "t", "distance"]);
    for ((&r, &tt), &v) in r_schedule.iter().zip(&t).zip(&d) {
        report.push(vec![r.into(), tt.into(), v.into()]);
    }
    report.notes.push(format!(
        "fit {:?}: d = {:.6} + {:.6}·φ(t), p = {:.6}, rms {:.2e}; growth {growth:.4}",
        fit.model, fit.a, fit.b, fit.p, fit.rms
    ));
    report.assert("classification", class != EndClass::Inconclusive, class.label());
    Ok(Completeness { report, class, fit, limit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::cone;
    use crate::geom::Background;

    fn opts() -> GridOptions {
        GridOptions { ntheta: 128, ..GridOptions::default() }
    }

    #[test]
    fn cone_ring_distances_follow_closed_form() {
        let beta = 0.3;
        let g = cone(beta, Point::ORIGIN, 1.0).unwrap();
        let l = 1.0;
        for i in 0..2 {
            let d = ring_distance(&g, Point::ORIGIN, i, l, &opts()).unwrap();
            let k = 1.0 + beta;
            let exact = ((-k * i as f64 * l).exp() - (-k * (i + 1) as f64 * l).exp()) / k;
            assert!((d / exact - 1.0).abs() < 0.03, "{d} vs {exact}");
        }
    }

    #[test]
    fn lambda_of_a_cone_is_the_linear_slope() {
        let g = cone(-0.5, Point::ORIGIN, 1.0).unwrap();
        let lam = estimate_lambda(&g, Point::ORIGIN, 0.0, 3.0).unwrap();
        assert!((lam / (LAMBDA_INFLATION * 2.0 * PI * 0.5) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn refuses_large_kappa() {
        let g = cone(-0.5, Point::ORIGIN, 1.0).unwrap();
        let p = ThreeCircle { center: Point::ORIGIN, l: 4.0, n_rings: 4, kappa: 0.3, lambda: None, t_start: 0.0 };
        assert!(matches!(three_circle_report(&g, &p, &opts()), Err(CylinderError::PreconditionFail(_))));
    }

    #[test]
    fn fits_recover_exact_models() {
        let t: Vec<f64> = (1..=8).map(|k| k as f64 * 2.0).collect();
        let d: Vec<f64> = t.iter().map(|&t| 2.0 - 3.0 * (-0.25 * t).exp()).collect();
        let f = fit_model(Model::Exponential, &t, &d);
        assert!((f.p - 0.25).abs() < 1e-6 && (f.a - 2.0).abs() < 1e-6);
        let d: Vec<f64> = t.iter().map(|&t| 2.4 - 2.0 * t.powf(-0.5)).collect();
        let f = fit_model(Model::LogPower, &t, &d);
        assert!((f.p - 0.5).abs() < 1e-6 && (f.a - 2.4).abs() < 1e-6);
    }

    #[test]
    fn flat_balanced_ratio_is_one() {
        let g = ConformalMetric::flat(Background::square(1.0));
        let b = balanced_ratio_check(&g, Point::ORIGIN, 1, None, &opts()).unwrap();
        assert!((b.ratio - 1.0).abs() < 0.03 && b.pass, "{b:?}");
    }
}
