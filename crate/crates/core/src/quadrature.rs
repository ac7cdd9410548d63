//! One-dimensional quadrature rules shared by the geometric modules.
//!
//! Everything here integrates smooth or weakly singular integrands:
//! adaptive Gauss–Kronrod (7/15) for piecewise smooth functions, a
//! geometrically graded rule for `s^β f(s)` near a cone point, and an
//! adaptive periodic trapezoid rule for circle averages.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static CELL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| gauss_legendre(8))
}

fn gl24() -> &'static (Vec<f64>, Vec<f64>) {
    static CELL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| gauss_legendre(24))
}

/// Fixed-order Gauss–Legendre on `[a, b]`.
pub fn gauss_fixed<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = match n {
        8 => gl8().clone(),
        24 => gl24().clone(),
        _ => gauss_legendre(n),
    };
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(c + h * xi)).sum::<f64>() * h
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod 7/15 panel: (Kronrod estimate, error estimate).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Refines the panel with the largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol·|I|)` or `max_panels` is hit.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    adaptive_with_limit(&mut f, a, b, rel_tol, abs_tol, 400)
}

pub fn adaptive_with_limit<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let (v, e) = gk15(f, a, b);
    if e <= abs_tol.max(rel_tol * v.abs()) || !v.is_finite() {
        return v;
    }
    let mut panels = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) && panels.len() < max_panels {
        if !total.is_finite() {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, be), (i, p)| if p.3 > be { (i, p.3) } else { (bi, be) });
        let (pa, pb, pv, pe) = panels.swap_remove(worst);
        let m = 0.5 * (pa + pb);
        let (v1, e1) = gk15(f, pa, m);
        let (v2, e2) = gk15(f, m, pb);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// `∫₀^len s^β f(s) ds` for smooth `f` and `β > -1`.
///
/// Geometric panels `[len·qᵏ⁺¹, len·qᵏ]` resolve the power law; the innermost
/// panel uses the exact moment of `s^β` times `f` at its weighted centroid.
/// Returns `+∞` for `β ≤ -1`.
pub fn power_weighted<F: FnMut(f64) -> f64>(mut f: F, beta: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return 0.0;
    }
    if beta <= -1.0 {
        return f64::INFINITY;
    }
    const Q: f64 = 0.5;
    const LEVELS: usize = 40;
    let mut total = 0.0;
    let mut hi = len;
    for _ in 0..LEVELS {
        let lo = hi * Q;
        total += gauss_fixed(|s| s.powf(beta) * f(s), lo, hi, 8);
        hi = lo;
    }
    let centroid = hi * (1.0 + beta) / (2.0 + beta);
    total + hi.powf(1.0 + beta) / (1.0 + beta) * f(centroid)
}

/// Integral over `[0, 2π)` of a periodic function by the trapezoid rule,
/// doubling the node count until successive estimates agree to `rel_tol`
/// (relative to `max(|I|, scale)`).
pub fn periodic_trapezoid<F: FnMut(f64) -> f64>(
    mut f: F,
    rel_tol: f64,
    scale: f64,
    min_n: usize,
    max_n: usize,
) -> f64 {
    let mut n = min_n.max(4);
    let mut sum: f64 = (0..n).map(|k| f(2.0 * PI * k as f64 / n as f64)).sum();
    let mut est = sum * 2.0 * PI / n as f64;
    while n < max_n {
        let add: f64 = (0..n).map(|k| f(2.0 * PI * (k as f64 + 0.5) / n as f64)).sum();
        sum += add;
        n *= 2;
        let next = sum * 2.0 * PI / n as f64;
        let done = (next - est).abs() <= rel_tol * next.abs().max(scale);
        est = next;
        if done {
            break;
        }
    }
    est
}

/// `∫∫ |x|^α dA` over the axis-aligned rectangle `[x0,x1]×[y0,y1]`
/// (coordinates relative to the singular point), for `α > -2`.
pub fn rect_power_integral(x0: f64, x1: f64, y0: f64, y1: f64, alpha: f64) -> f64 {
    if alpha <= -2.0 {
        return f64::INFINITY;
    }
    let corner = |a: f64, b: f64| a.signum() * b.signum() * quadrant_power(a.abs(), b.abs(), alpha);
    corner(x1, y1) - corner(x0, y1) - corner(x1, y0) + corner(x0, y0)
}

/// `∫₀^a∫₀^b |x|^α` for `a, b ≥ 0`, via the two polar triangles.
fn quadrant_power(a: f64, b: f64, alpha: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let k = alpha + 2.0;
    let split = (b / a).atan();
    let lower = gauss_fixed(|t| (a / t.cos()).powf(k), 0.0, split, 24);
    let upper = gauss_fixed(|t| (b / t.sin()).powf(k), split, 0.5 * PI, 24);
    (lower + upper) / k
}

/// Antiderivative of `log|x|` over a rectangle corner: `∫₀^a∫₀^b ½log(x²+y²)`.
fn log_corner(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let r2 = a * a + b * b;
    0.5 * (a * b * r2.ln() - 3.0 * a * b + a * a * (b / a).atan() + b * b * (a / b).atan())
}

/// Exact `∫∫ log|x| dA` over `[x0,x1]×[y0,y1]` (coordinates relative to the
/// singular point).
pub fn rect_log_integral(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    log_corner(x1, y1) - log_corner(x0, y1) - log_corner(x1, y0) + log_corner(x0, y0)
}

/// Exact `∫∫ x/|x|² dA` (first component of the log-kernel gradient) over
/// `[x0,x1]×[y0,y1]`; swap the roles of the axes for the second component.
pub fn rect_log_gradient_x(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    // ∫ x/(x²+y²) dx = ½ log(x²+y²); then ∫ ½ log(P²+q²) dq in closed form.
    let prim = |p: f64, q: f64| -> f64 {
        let r2 = p * p + q * q;
        if r2 == 0.0 {
            return 0.0;
        }
        let at = if p == 0.0 { 0.0 } else { 2.0 * p * (q / p).atan() };
        0.5 * (q * r2.ln() - 2.0 * q + at)
    };
    (prim(x1, y1) - prim(x1, y0)) - (prim(x0, y1) - prim(x0, y0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let v = gauss_fixed(|x| x.powi(7) + 3.0 * x.powi(6), -1.0, 2.0, 8);
        let exact = (2f64.powi(8) - 1.0) / 8.0 + 3.0 * (2f64.powi(7) + 1.0) / 7.0;
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let v = adaptive(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 1e-10, 1e-14);
        assert!((v - (0.045 + 0.245)).abs() < 1e-9);
    }

    #[test]
    fn power_weighted_matches_moments() {
        for beta in [-0.999, -0.5, 0.3, 2.0] {
            let v = power_weighted(|s| 1.0 + s, beta, 0.5);
            let exact = 0.5f64.powf(1.0 + beta) / (1.0 + beta) + 0.5f64.powf(2.0 + beta) / (2.0 + beta);
            assert!((v - exact).abs() < 1e-10 * exact, "beta {beta}: {v} vs {exact}");
        }
        assert!(power_weighted(|_| 1.0, -1.0, 1.0).is_infinite());
    }

    #[test]
    fn trapezoid_is_spectral_for_smooth_periodic() {
        let v = periodic_trapezoid(|t| (t.cos()).exp(), 1e-13, 1.0, 8, 1 << 12);
        // 2π I₀(1)
        assert!((v - 2.0 * PI * 1.266_065_877_752_008_4).abs() < 1e-12);
    }

    #[test]
    fn rect_integrals_match_brute_force() {
        let n = 2000;
        let (x0, x1, y0, y1) = (-0.3, 0.5, -0.2, 0.7);
        let hx = (x1 - x0) / n as f64;
        let hy = (y1 - y0) / n as f64;
        let mut lg = 0.0;
        let mut gx = 0.0;
        let mut pw = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = x0 + (i as f64 + 0.5) * hx;
                let y = y0 + (j as f64 + 0.5) * hy;
                let r2 = x * x + y * y;
                lg += 0.5 * r2.ln();
                gx += x / r2;
                pw += r2.powf(0.25);
            }
        }
        let a = hx * hy;
        assert!((rect_log_integral(x0, x1, y0, y1) - lg * a).abs() < 1e-5);
        assert!((rect_log_gradient_x(x0, x1, y0, y1) - gx * a).abs() < 2e-3);
        assert!((rect_power_integral(x0, x1, y0, y1, 0.5) - pw * a).abs() < 1e-6);
        // mean of log over [-1,1]² is (log 2 - 3 + π/2)/2
        let m = rect_log_integral(-1.0, 1.0, -1.0, 1.0) / 4.0;
        assert!((m - (2f64.ln() - 3.0 + 0.5 * PI) / 2.0).abs() < 1e-14);
    }
}
