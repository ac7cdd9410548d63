//! The radial bump `η(s) = c(1−s²)³` and closed forms built from it.

use std::f64::consts::PI;

/// Normalisation making `∫_{D₁} η = 1`.
pub const ETA_C: f64 = 4.0 / PI;

/// `(log ∗ η_ε)(0) − log ε`.
pub const LOG_AT_CENTER: f64 = -25.0 / 24.0;

/// Unit-radius bump at radius `s`.
#[inline]
pub fn eta(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        let w = 1.0 - s * s;
        ETA_C * w * w * w
    }
}

/// `η_ε(r) = η(r/ε)/ε²`, unit mass on `D_ε`.
#[inline]
pub fn eta_eps(r: f64, eps: f64) -> f64 {
    eta(r / eps) / (eps * eps)
}

/// Mass of `η_ε` inside `D_r`.
#[inline]
pub fn eta_mass_within(r: f64, eps: f64) -> f64 {
    let v = (r / eps).powi(2);
    if v >= 1.0 {
        1.0
    } else {
        1.0 - (1.0 - v).powi(4)
    }
}

/// Antiderivative of `log v·(1−v)³` vanishing at 0.
fn g(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    const C: [f64; 4] = [1.0, -3.0, 3.0, -1.0];
    let lv = v.ln();
    let mut s = 0.0;
    let mut vk = v;
    for (k, c) in C.iter().enumerate() {
        let n = (k + 1) as f64;
        s += c * vk * (lv / n - 1.0 / (n * n));
        vk *= v;
    }
    s
}

/// `(log|·| ∗ η_ε)(x)` at `|x| = r`; equals `log r` for `r ≥ ε`.
pub fn log_mollified(r: f64, eps: f64) -> f64 {
    if r >= eps {
        return r.ln();
    }
    let v = (r / eps).powi(2);
    let w4 = (1.0 - v).powi(4);
    let near = if r > 0.0 { r.ln() * (1.0 - w4) } else { 0.0 };
    near + eps.ln() * w4 + 2.0 * (g(1.0) - g(v))
}

/// Radial derivative of [`log_mollified`].
pub fn log_mollified_deriv(r: f64, eps: f64) -> f64 {
    if r >= eps {
        return 1.0 / r;
    }
    if r <= 0.0 {
        return 0.0;
    }
    eta_mass_within(r, eps) / r
}

/// C² step: 0 for `s ≤ 1`, 1 for `s ≥ 2`, slope at most 15/8.
#[inline]
pub fn cutoff(s: f64) -> f64 {
    if s <= 1.0 {
        0.0
    } else if s >= 2.0 {
        1.0
    } else {
        let t = s - 1.0;
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

#[inline]
pub fn cutoff_deriv(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let t = s - 1.0;
        30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive;

    #[test]
    fn bump_has_unit_mass() {
        let m = adaptive(|s| 2.0 * PI * s * eta(s), 0.0, 1.0, 1e-13, 0.0);
        assert!((m - 1.0).abs() < 1e-12);
        assert!((eta_mass_within(0.4, 0.5) - adaptive(|s| 2.0 * PI * s * eta_eps(s, 0.5), 0.0, 0.4, 1e-13, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn mollified_log_matches_radial_convolution() {
        // circle means of log|x−y| over |y| = s equal log max(r, s)
        let eps = 0.3;
        for r in [0.0_f64, 0.01, 0.1, 0.29, 0.3, 0.7] {
            let direct = adaptive(|s| 2.0 * PI * s * eta_eps(s, eps) * r.max(s).ln(), 0.0, eps, 1e-12, 0.0);
            let direct = if r > 0.0 && r < eps {
                adaptive(|s| 2.0 * PI * s * eta_eps(s, eps) * s.ln(), r, eps, 1e-12, 0.0)
                    + r.ln() * eta_mass_within(r, eps)
            } else {
                direct
            };
            assert!((log_mollified(r, eps) - direct).abs() < 1e-10, "r={r}");
        }
        assert!((log_mollified(0.0, eps) - (eps.ln() + LOG_AT_CENTER)).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let eps = 0.2;
        for r in [0.02, 0.1, 0.19] {
            let h = 1e-6;
            let fd = (log_mollified(r + h, eps) - log_mollified(r - h, eps)) / (2.0 * h);
            assert!((fd - log_mollified_deriv(r, eps)).abs() < 1e-6);
        }
    }

    #[test]
    fn cutoff_is_c1_with_bounded_slope() {
        assert_eq!(cutoff(1.0), 0.0);
        assert_eq!(cutoff(2.0), 1.0);
        let max = (0..=1000).map(|k| cutoff_deriv(1.0 + k as f64 / 1000.0)).fold(0.0, f64::max);
        assert!((max - 1.875).abs() < 1e-9 && max < 2.0);
    }
}
