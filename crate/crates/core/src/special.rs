//! Special functions in the scaled and tail-safe forms needed here.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{HgError, Result};

/// Exponentially scaled modified Bessel function `e^{-x} I₀(x)` for `x ≥ 0`.
pub fn i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 15.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0f64;
        while term > 1e-18 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // Asymptotic expansion; terms shrink until k ~ 2x, far past convergence.
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0f64;
        loop {
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * x);
            if next < 1e-17 * sum || next > term {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// Scaled angular factor `∫_{S^{N-1}} e^{κ(ω₁ - 1)} dω` for `κ ≥ 0`.
///
/// Appears when the Gaussian `e^{-|ρω - δe₁|²/2}` is integrated over
/// directions: it equals `e^{-κ}` times the unscaled angular integral.
pub fn angular_factor_scaled(dim: usize, kappa: f64) -> Result<f64> {
    match dim {
        1 => Ok(1.0 + (-2.0 * kappa).exp()),
        2 => Ok(2.0 * PI * i0e(kappa)),
        3 => {
            if kappa < 1e-12 {
                Ok(4.0 * PI * (1.0 - kappa))
            } else {
                Ok(4.0 * PI * (-(-2.0 * kappa).exp_m1()) / (2.0 * kappa))
            }
        }
        _ if kappa == 0.0 => Ok(sphere_area(dim)),
        _ => Err(HgError::DimensionUnsupported {
            dim,
            what: "off-center radial reduction".into(),
        }),
    }
}

/// Surface measure of the unit sphere in ℝᴺ.
pub fn sphere_area(dim: usize) -> f64 {
    let h = 0.5 * dim as f64;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

/// Volume of the unit ball in ℝᴺ.
pub fn ball_volume(dim: usize) -> f64 {
    let h = 0.5 * dim as f64;
    (h * PI.ln() - ln_gamma(h + 1.0)).exp()
}

/// Regularized lower incomplete gamma `P(a, x)`, defined as 0 at `x ≤ 0`.
pub fn reg_lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma_lr(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`, defined as 1 at `x ≤ 0`.
pub fn reg_upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(a, x)
    }
}

/// `P(a, x₂) - P(a, x₁)` for `0 ≤ x₁ ≤ x₂`, computed on whichever side of
/// the distribution avoids cancellation.
pub fn gamma_interval(a: f64, x1: f64, x2: f64) -> f64 {
    if x1 >= a {
        (reg_upper_gamma(a, x1) - reg_upper_gamma(a, x2)).max(0.0)
    } else {
        (reg_lower_gamma(a, x2) - reg_lower_gamma(a, x1)).max(0.0)
    }
}

/// Standard normal survival function `P(Z > z)`.
pub fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// `ln P(Z > z)` without underflow for large `z`.
pub fn ln_norm_sf(z: f64) -> f64 {
    if z < 30.0 {
        norm_sf(z).ln()
    } else {
        let z2 = z * z;
        -0.5 * z2 - (z * (2.0 * PI).sqrt()).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// `P(lo < Z < hi)` for a standard normal `Z`, evaluated on the tail side.
pub fn norm_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if lo >= 0.0 {
        (norm_sf(lo) - norm_sf(hi)).max(0.0)
    } else if hi <= 0.0 {
        (norm_sf(-hi) - norm_sf(-lo)).max(0.0)
    } else {
        1.0 - norm_sf(-lo) - norm_sf(hi)
    }
}

/// Numerically stable `ln(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Factorial as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}
