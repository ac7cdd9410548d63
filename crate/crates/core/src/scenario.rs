//! Scenario files: a builtin metric, grid options and one experiment.
//!
//! ```toml
//! [metric]
//! name = "cone"
//! beta = 0.3
//!
//! [grid]
//! n = 256        # h = 1/n
//! stencil = 16
//!
//! [experiment]
//! kind = "area"
//! radii = [0.2, 0.3, 0.4]
//! expect = 1.3
//! ```
//!
//! Every tolerance has a default and may be overridden in `[experiment]`.
//! Each run writes `<kind>.csv` and `<kind>.json`; the CSV is a pure function
//! of the scenario and the overrides.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

use crate::approx::{ghost_probe, reshetnyak_experiment};
use crate::builtins::{Builtin, CATALOG};
use crate::curvature::{gb_annulus_check, point_mass_detect, FLUX_OFFSET};
use crate::cylinder::{
    completeness_probe, default_fit_tol, default_growth, three_circle_report, CompletenessParams, EndClass, ThreeCircle,
};
use crate::geodesic::{ball_area, GridOptions, Solver, Source, Stencil};
use crate::geom::{Background, Point};
use crate::metric::ConformalMetric;
use crate::report::ExperimentReport;

/// A configuration problem, tied to the key that caused it.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError { key: key.into(), message: message.to_string() }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    /// `2` for configuration problems, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 2,
            ScenarioError::Io(_) => 1,
        }
    }
}

/// Settings for the `[grid]` table. `n` and `h` are exclusive.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub stencil: Option<Stencil>,
    pub ntheta: Option<usize>,
    pub region_cells: Option<usize>,
    pub samples: Option<usize>,
}

/// Command-line overrides, applied over `[grid]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub stencil: Option<usize>,
}

impl GridConfig {
    pub fn options(&self, o: &Overrides) -> Result<GridOptions, ConfigError> {
        let mut opts = GridOptions::default();
        match (self.n, self.h) {
            (Some(_), Some(_)) => return Err(ConfigError::new("grid.h", "give either grid.n or grid.h, not both")),
            (Some(n), None) => opts.h = positive_cells("grid.n", n)?,
            (None, Some(h)) if h > 0.0 && h < 1.0 => opts.h = h,
            (None, Some(h)) => return Err(ConfigError::new("grid.h", format!("spacing must lie in (0, 1), got {h}"))),
            (None, None) => {}
        }
        if let Some(n) = o.grid {
            opts.h = positive_cells("--grid", n)?;
        }
        if let Some(s) = self.stencil {
            opts.stencil = s;
        }
        if let Some(n) = o.stencil {
            opts.stencil = Stencil::try_from(n).map_err(|e| ConfigError::new("--stencil", e))?;
        }
        for (key, v, slot) in [
            ("grid.ntheta", self.ntheta, &mut opts.ntheta),
            ("grid.region_cells", self.region_cells, &mut opts.region_cells),
            ("grid.samples", self.samples, &mut opts.samples),
        ] {
            if let Some(v) = v {
                if v < 4 {
                    return Err(ConfigError::new(key, "must be at least 4"));
                }
                *slot = v;
            }
        }
        Ok(opts)
    }
}

fn positive_cells(key: &str, n: usize) -> Result<f64, ConfigError> {
    if n < 2 {
        return Err(ConfigError::new(key, "need at least 2 cells per unit"));
    }
    Ok(1.0 / n as f64)
}

/// A reference value checked by the distance-field experiment.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub x: f64,
    pub y: f64,
    pub expected: f64,
    #[serde(default = "pct3")]
    pub tol: f64,
}

fn pct1() -> f64 {
    0.01
}
fn pct3() -> f64 {
    0.03
}
fn pct5() -> f64 {
    0.05
}
fn ninety_nine() -> f64 {
    0.99
}
fn twenty() -> usize {
    20
}
fn twelve() -> usize {
    12
}
fn ghost_threshold() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Distance from `source` to every node, reference targets, and the
    /// gradient bound `|∇d| ≤ e^u(1 + slack)`.
    DistanceField {
        source: Point,
        #[serde(default)]
        targets: Vec<Target>,
        #[serde(default = "pct5")]
        gradient_slack: f64,
        #[serde(default = "ninety_nine")]
        gradient_fraction: f64,
    },
    /// Sup and mean distance error of mollified metrics over random pairs.
    Converge {
        eps: Vec<f64>,
        #[serde(default = "twelve")]
        pairs: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "pct1")]
        final_tol: f64,
    },
    ThreeCircle(ThreeCircle),
    /// Point masses at the atoms plus random annuli.
    GaussBonnet {
        #[serde(default = "twenty")]
        annuli: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "pct1")]
        point_mass_tol: f64,
    },
    /// Ball-area ratios `A(B_R)/πR²` against `1 + K⁻/2π`.
    Area {
        #[serde(default)]
        center: Point,
        radii: Vec<f64>,
        expect: Option<f64>,
        #[serde(default = "pct3")]
        tol: f64,
    },
    Completeness {
        #[serde(default)]
        center: Point,
        delta: f64,
        radii: Vec<f64>,
        #[serde(default = "default_growth")]
        growth: f64,
        #[serde(default = "default_fit_tol")]
        fit_tol: f64,
        expect: Option<EndClass>,
        limit: Option<f64>,
        #[serde(default = "pct3")]
        limit_tol: f64,
    },
    Ghost {
        #[serde(default)]
        center: Point,
        radii: Vec<f64>,
        eps: Vec<f64>,
        #[serde(default = "ghost_threshold")]
        threshold: f64,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::DistanceField { .. } => "distance-field",
            Experiment::Converge { .. } => "converge",
            Experiment::ThreeCircle(_) => "three-circle",
            Experiment::GaussBonnet { .. } => "gauss-bonnet",
            Experiment::Area { .. } => "area",
            Experiment::Completeness { .. } => "completeness",
            Experiment::Ghost { .. } => "ghost",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub metric: Builtin,
    pub grid: GridConfig,
    pub experiment: Experiment,
    /// The parsed file, echoed into the JSON twin.
    pub echo: serde_json::Value,
}

fn table<T: DeserializeOwned>(doc: &toml::Table, key: &str, required: bool) -> Result<Option<T>, ConfigError> {
    let Some(v) = doc.get(key) else {
        return if required { Err(ConfigError::new(key, "missing table")) } else { Ok(None) };
    };
    serde_path_to_error::deserialize(v.clone()).map(Some).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." || path.is_empty() { key.to_owned() } else { format!("{key}.{path}") };
        ConfigError::new(key, e.into_inner())
    })
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("<toml>", e.message()))?;
        if let Some(extra) = doc.keys().find(|k| !["metric", "grid", "experiment"].contains(&k.as_str())) {
            return Err(ConfigError::new(extra.clone(), "unknown table"));
        }
        let echo = serde_json::to_value(&doc).map_err(|e| ConfigError::new("<toml>", e))?;
        Ok(Scenario {
            metric: table(&doc, "metric", true)?.expect("required"),
            grid: table(&doc, "grid", false)?.unwrap_or_default(),
            experiment: table(&doc, "experiment", true)?.expect("required"),
            echo,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Ok(Self::parse(&std::fs::read_to_string(path)?)?)
    }

    /// Run the experiment; the report carries the scenario echo.
    pub fn run(&self, overrides: &Overrides) -> Result<Outcome, ConfigError> {
        let opts = self.grid.options(overrides)?;
        let g = self.metric.build(opts.h).map_err(|e| ConfigError::new(format!("metric ({})", self.metric.name()), e))?;
        let ctx = |e: &dyn fmt::Display| ConfigError::new(format!("experiment ({})", self.experiment.kind()), e);
        let mut outcome = run_experiment(&g, &self.experiment, &opts).map_err(|e| ctx(&e))?;
        outcome.report.config = serde_json::json!({
            "scenario": self.echo,
            "grid": { "h": opts.h, "stencil": opts.stencil.size(), "ntheta": opts.ntheta,
                      "region_cells": opts.region_cells, "samples": opts.samples },
        });
        Ok(outcome)
    }
}

/// A report plus any extra CSV tables written beside it.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub extra: Vec<(String, String)>,
}

impl Outcome {
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        self.report.write(dir, &self.report.experiment)?;
        for (name, body) in &self.extra {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Run one experiment. Errors are rendered as text for the caller's context.
pub fn run_experiment(g: &ConformalMetric, exp: &Experiment, opts: &GridOptions) -> Result<Outcome, String> {
    let s = |e: &dyn fmt::Display| e.to_string();
    let mut extra = Vec::new();
    let report = match exp {
        Experiment::DistanceField { source, targets, gradient_slack, gradient_fraction } => {
            let solver = Solver::new(g, opts);
            let field = solver.field(&Source::Point(*source)).map_err(|e| s(&e))?;
            let mut report = ExperimentReport::new("distance-field", &["x", "y", "expected", "distance", "rel_err", "pass"]);
            let mut ok = true;
            for t in targets {
                let d = solver.eval(&field, Point::new(t.x, t.y), None);
                let rel = (d / t.expected - 1.0).abs();
                ok &= rel <= t.tol;
                report.push(vec![t.x.into(), t.y.into(), t.expected.into(), d.into(), rel.into(), (rel <= t.tol).into()]);
            }
            report.assert("targets within tolerance", ok, format!("{} targets", targets.len()));
            let (good, total) = solver.gradient_bound_fraction(&field, *gradient_slack);
            let frac = if total == 0 { 0.0 } else { good as f64 / total as f64 };
            report.assert(
                "gradient bound",
                total > 0 && frac >= *gradient_fraction,
                format!("{good}/{total} eligible nodes satisfy |grad d| <= e^u(1+{gradient_slack})"),
            );
            let mut csv = Vec::new();
            field.write_csv(&mut csv).map_err(|e| s(&e))?;
            extra.push(("field.csv".to_owned(), String::from_utf8(csv).expect("ascii")));
            report
        }
        Experiment::Converge { eps, pairs, seed, final_tol } => {
            if *pairs == 0 {
                return Err("pairs must be positive".into());
            }
            let atoms: Vec<Point> = g.atoms.iter().map(|a| a.location).collect();
            let pairs = random_pairs(&g.background, &atoms, *pairs, *seed);
            reshetnyak_experiment(g, eps, &pairs, *final_tol, opts).map_err(|e| s(&e))?
        }
        Experiment::ThreeCircle(p) => three_circle_report(g, p, opts).map_err(|e| s(&e))?,
        Experiment::GaussBonnet { annuli, seed, point_mass_tol } => gauss_bonnet(g, *annuli, *seed, *point_mass_tol)?,
        Experiment::Area { center, radii, expect, tol } => area(g, *center, radii, *expect, *tol, opts)?,
        Experiment::Completeness { center, delta, radii, growth, fit_tol, expect, limit, limit_tol } => {
            let params = CompletenessParams { growth: *growth, fit_tol: *fit_tol };
            let c = completeness_probe(g, *center, *delta, radii, &params, opts).map_err(|e| s(&e))?;
            let mut report = c.report;
            if let Some(want) = expect {
                report.assert("expected class", c.class == *want, format!("{} (want {})", c.class.label(), want.label()));
            }
            if let Some(want) = limit {
                let got = c.limit.unwrap_or(f64::NAN);
                let ok = (got / want - 1.0).abs() <= *limit_tol;
                report.assert("limit", ok, format!("{got} vs {want} (tol {limit_tol})"));
            }
            report
        }
        Experiment::Ghost { center, radii, eps, threshold } => {
            ghost_probe(g, *center, radii, eps, *threshold, opts).map_err(|e| s(&e))?
        }
    };
    Ok(Outcome { report, extra })
}

/// Reproducible points in the central half of the domain (any point of a torus).
fn random_points(bg: &Background, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let (lo, hi) = (bg.min(), bg.max());
    let mid = (lo + hi) * 0.5;
    let half = (hi - lo) * 0.5;
    let shrink = if bg.is_torus() { 1.0 } else { 0.5 };
    (0..n)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            Point::new(mid.x + shrink * a * half.x, mid.y + shrink * b * half.y)
        })
        .collect()
}

/// `n` reproducible pairs. Odd-indexed pairs straddle an atom (cycling
/// through `atoms`) so that their geodesics meet the singular set.
pub fn random_pairs(bg: &Background, atoms: &[Point], n: usize, seed: u64) -> Vec<(Point, Point)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = random_points(bg, 2 * n, &mut rng);
    let half = ((bg.max() - bg.min()) * 0.5).x.min(((bg.max() - bg.min()) * 0.5).y);
    pts.chunks(2)
        .enumerate()
        .map(|(i, c)| {
            if i % 2 == 0 || atoms.is_empty() {
                return (c[0], c[1]);
            }
            let z = atoms[(i / 2) % atoms.len()];
            let v = Point::polar(half * rng.gen_range(0.1..0.3), rng.gen_range(0.0..2.0 * PI));
            (bg.canonical(z + v), bg.canonical(z - v))
        })
        .collect()
}

/// `n` annuli `(center, s, t)` inside the domain with `t/s ∈ [1.25, 5]`.
/// Radii are redrawn while either circle passes within `band·r` of a point
/// of `avoid`, where finite-difference fluxes are undefined.
pub fn random_annuli(bg: &Background, avoid: &[Point], band: f64, n: usize, seed: u64) -> Vec<(Point, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = random_points(bg, n, &mut rng);
    let half = ((bg.max() - bg.min()) * 0.5).x.min(((bg.max() - bg.min()) * 0.5).y);
    let clear = |c: Point, r: f64| avoid.iter().all(|&z| (bg.delta(c, z).norm() - r).abs() > band * r);
    centers
        .into_iter()
        .map(|c| loop {
            let t = half * rng.gen_range(0.05..0.45);
            let s = t * rng.gen_range(0.2..0.8);
            if clear(c, s) && clear(c, t) {
                break (c, s, t);
            }
        })
        .collect()
}

fn gauss_bonnet(g: &ConformalMetric, annuli: usize, seed: u64, pm_tol: f64) -> Result<ExperimentReport, String> {
    let mut report = ExperimentReport::new("gauss-bonnet", &["check", "params", "lhs", "rhs", "residual", "pass"]);
    let mut pm_ok = true;
    for (i, a) in g.atoms.iter().enumerate() {
        // atoms carrying an extra log term are not pure cones at finite radius
        if g.terms.iter().any(|t| t.center().dist(a.location) < 1e-12) {
            continue;
        }
        let want = -2.0 * PI * g.effective_beta(i);
        let got = point_mass_detect(g, a.location).map_err(|e| e.to_string())?;
        let rel = (got - want).abs() / want.abs().max(1e-300);
        let pass = rel <= pm_tol;
        pm_ok &= pass;
        let params = format!("x={}, y={}", a.location.x, a.location.y);
        report.push(vec!["point-mass".into(), params.into(), got.into(), want.into(), rel.into(), pass.into()]);
    }
    report.assert("point masses", pm_ok, format!("relative tolerance {pm_tol}"));
    let atoms: Vec<Point> = g.atoms.iter().map(|a| a.location).collect();
    let checks: Vec<_> = random_annuli(&g.background, &atoms, 3.0 * FLUX_OFFSET, annuli, seed)
        .par_iter()
        .map(|&(c, s, t)| gb_annulus_check(g, c, s, t).map(|r| (c, r)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    for (c, r) in checks {
        ok &= r.pass;
        let params = format!("x={:.6}, y={:.6}, s={:.6}, t={:.6}", c.x, c.y, r.s, r.t);
        report.push(vec!["annulus".into(), params.into(), r.lhs.into(), r.rhs.into(), r.residual.into(), r.pass.into()]);
    }
    report.assert("annuli", ok, format!("{annuli} annuli, seed {seed}"));
    Ok(report)
}

fn area(
    g: &ConformalMetric,
    center: Point,
    radii: &[f64],
    expect: Option<f64>,
    tol: f64,
    opts: &GridOptions,
) -> Result<ExperimentReport, String> {
    if radii.is_empty() {
        return Err("radii must be nonempty".into());
    }
    let (_, neg) = g.curvature_of().jordan_decompose();
    let bound = 1.0 + neg.total_variation_all() / (2.0 * PI);
    let areas: Vec<_> = radii
        .par_iter()
        .map(|&r| ball_area(g, center, r, opts))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut report = ExperimentReport::new("area", &["radius", "area", "ratio", "bound", "pass"]);
    let (mut ok_bound, mut ok_expect) = (true, true);
    for (&r, a) in radii.iter().zip(&areas) {
        let under = a.ratio <= bound * (1.0 + tol);
        let near = expect.map_or(true, |e| (a.ratio / e - 1.0).abs() <= tol);
        ok_bound &= under;
        ok_expect &= near;
        report.push(vec![r.into(), a.area.into(), a.ratio.into(), bound.into(), (under && near).into()]);
    }
    report.assert("ratio within bound", ok_bound, format!("bound {bound} (tol {tol})"));
    if let Some(e) = expect {
        report.assert("ratio matches expectation", ok_expect, format!("{e} (tol {tol})"));
    }
    Ok(report)
}

/// Catalog text for `curvlab list`.
pub fn list_builtins() -> String {
    let width = CATALOG.iter().map(|e| e.name.len()).max().unwrap_or(0);
    CATALOG
        .iter()
        .map(|e| format!("{:width$}  {}\n{:width$}  {}\n", e.name, e.params, "", e.realizes))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const AREA: &str = "[metric]\nname = \"cone\"\nbeta = 0.3\n[grid]\nn = 64\n[experiment]\nkind = \"area\"\nradii = [0.3]\n";

    #[test]
    fn parses_and_applies_overrides() {
        let sc = Scenario::parse(AREA).unwrap();
        assert_eq!(sc.metric.name(), "cone");
        let o = sc.grid.options(&Overrides { grid: Some(128), stencil: Some(32) }).unwrap();
        assert_eq!((o.h, o.stencil), (1.0 / 128.0, Stencil::S32));
        assert_eq!(sc.grid.options(&Overrides::default()).unwrap().h, 1.0 / 64.0);
    }

    #[test]
    fn errors_name_the_key() {
        let bad_metric = AREA.replace("\"cone\"", "\"sphere\"");
        assert!(Scenario::parse(&bad_metric).unwrap_err().key.starts_with("metric"));
        let bad_field = AREA.replace("radii", "radius");
        let e = Scenario::parse(&bad_field).unwrap_err();
        assert!(e.key.starts_with("experiment") && e.message.contains("radius"), "{e}");
        let bad_type = AREA.replace("n = 64", "n = \"many\"");
        assert_eq!(Scenario::parse(&bad_type).unwrap_err().key, "grid.n");
        let bad_stencil = Scenario::parse(AREA).unwrap().grid.options(&Overrides { grid: None, stencil: Some(12) });
        assert_eq!(bad_stencil.unwrap_err().key, "--stencil");
        assert_eq!(Scenario::parse(&format!("{AREA}[extra]\n")).unwrap_err().key, "extra");
    }

    #[test]
    fn random_annuli_fit_the_square() {
        let bg = Background::square(0.6);
        let z = [Point::new(0.1, 0.0)];
        for (c, s, t) in random_annuli(&bg, &z, 0.06, 50, 7) {
            assert!(s < t && bg.contains_disk(c, t));
            for r in [s, t] {
                assert!((c.dist(z[0]) - r).abs() > 0.06 * r);
            }
        }
        assert_eq!(random_pairs(&bg, &z, 5, 3), random_pairs(&bg, &z, 5, 3));
    }

    #[test]
    fn catalog_lists_every_builtin() {
        let text = list_builtins();
        for name in ["flat", "cone", "multicone", "hulin-troyanov", "abs-line", "torus-dipole"] {
            assert!(text.contains(name));
        }
    }
}
