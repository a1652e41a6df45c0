//! Evaluation of `u(x, t) = (4πt)^{-N/2} ∫ e^{-|x-y|²/4t} dμ(y)`, its
//! derivatives and residual probes for the identities it satisfies.

mod jet;
mod leaf;
mod probes;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HgError, Result};
use crate::measures::Measure;
use crate::quad::QuadratureConfig;

pub(crate) use leaf::{leaf_value, LeafValue};
pub use probes::{heat_residual, l1eps_norm_of_solution, sandwich_bounds, semigroup_residual, smoothing_decay_check};

/// Highest supported `|α| + 2m`.
pub const MAX_DERIVATIVE_ORDER: usize = 4;

/// Relative slack within which `4ε₀t` counts as equal to one.
pub const MAXIMAL_TIME_TOL: f64 = 1e-12;

/// How a value was obtained; ordered from cheapest to most general.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    RadialQuadrature,
    FullQuadrature,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::RadialQuadrature => "radial_quadrature",
            Method::FullQuadrature => "full_quadrature",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionValue {
    pub value: f64,
    pub est_error: f64,
    pub method: Method,
    /// Integrand evaluations spent; zero for closed forms.
    pub nodes: usize,
}

impl From<LeafValue> for SolutionValue {
    fn from(v: LeafValue) -> Self {
        SolutionValue { value: v.value, est_error: v.error, method: v.method, nodes: v.nodes }
    }
}

/// Rejects times outside the existence window `4ε₀t < 1`.
pub fn check_window(mu: &Measure, t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(HgError::InvalidSpec(format!("time must be positive and finite, got {t}")));
    }
    let eps0 = mu.growth_index().eps0;
    let r = 4.0 * eps0 * t;
    if r > 1.0 + MAXIMAL_TIME_TOL {
        return Err(HgError::BeyondMaximalTime { t, t_max: 0.25 / eps0 });
    }
    if (r - 1.0).abs() <= MAXIMAL_TIME_TOL {
        return Err(HgError::AtMaximalTime { t });
    }
    Ok(())
}

fn check_point(mu: &Measure, x: &[f64]) -> Result<()> {
    if x.len() != mu.dimension {
        return Err(HgError::DimensionMismatch { left: x.len(), right: mu.dimension });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HgError::InvalidSpec("evaluation point must be finite".into()));
    }
    Ok(())
}

/// Runs `f` and, when its error estimate misses the target, once more with
/// a tenfold tighter configuration.
fn with_retry<F>(cfg: &QuadratureConfig, f: F) -> Result<SolutionValue>
where
    F: Fn(&QuadratureConfig) -> Result<LeafValue>,
{
    cfg.validate()?;
    let v = f(cfg)?;
    if v.error <= cfg.target(v.value) {
        return Ok(v.into());
    }
    let v = f(&cfg.tightened(0.1))?;
    if v.error <= cfg.target(v.value) {
        return Ok(v.into());
    }
    Err(HgError::QuadratureFailure(format!(
        "error estimate {:.3e} exceeds the target {:.3e}",
        v.error,
        cfg.target(v.value)
    )))
}

/// Sum over leaves without the window check; leaves growing faster than
/// `1/(4t)` fail individually.
pub(crate) fn evaluate_unchecked(mu: &Measure, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<LeafValue> {
    let mut out = LeafValue { value: 0.0, error: 0.0, method: Method::ClosedForm, nodes: 0 };
    for (c, b) in mu.leaves() {
        out = leaf::combine(out, c, leaf_value(mu.dimension, b, x, t, cfg)?);
    }
    Ok(out)
}

/// `ln|u(x, t)|` without the window check, combining leaves in log space.
pub(crate) fn ln_abs_unchecked(mu: &Measure, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let mut parts = Vec::new();
    for (c, b) in mu.leaves() {
        if c != 0.0 {
            let (s, l, _) = leaf::leaf_ln_value(mu.dimension, b, x, t, cfg)?;
            parts.push((s * c.signum(), l + c.abs().ln()));
        }
    }
    let top = parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(top);
    }
    let sum: f64 = parts.iter().map(|(s, l)| s * (l - top).exp()).sum();
    Ok(top + sum.abs().ln())
}

pub fn evaluate(mu: &Measure, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<SolutionValue> {
    check_point(mu, x)?;
    check_window(mu, t)?;
    with_retry(cfg, |c| evaluate_unchecked(mu, x, t, c))
}

/// `∂_x^α ∂_t^m u(x, t)` for `|α| + 2m ≤ 4`.
pub fn evaluate_derivative(
    mu: &Measure,
    x: &[f64],
    t: f64,
    alpha: &[usize],
    m: usize,
    cfg: &QuadratureConfig,
) -> Result<SolutionValue> {
    check_point(mu, x)?;
    if alpha.len() != mu.dimension {
        return Err(HgError::DimensionMismatch { left: alpha.len(), right: mu.dimension });
    }
    let order = alpha.iter().sum::<usize>() + 2 * m;
    if order > MAX_DERIVATIVE_ORDER {
        return Err(HgError::OrderUnsupported { order, max: MAX_DERIVATIVE_ORDER });
    }
    check_window(mu, t)?;
    with_retry(cfg, |c| {
        let mut out = LeafValue { value: 0.0, error: 0.0, method: Method::ClosedForm, nodes: 0 };
        for (coef, b) in mu.leaves() {
            out = leaf::combine(out, coef, leaf::leaf_derivative(mu.dimension, b, x, t, alpha, m, c)?);
        }
        Ok(out)
    })
}

/// The kernel integral by direct quadrature in `y` for every leaf, closed
/// forms bypassed. Reference route for cross-checks.
pub fn evaluate_full_quadrature(mu: &Measure, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<SolutionValue> {
    check_point(mu, x)?;
    check_window(mu, t)?;
    with_retry(cfg, |c| {
        let mut out = LeafValue { value: 0.0, error: 0.0, method: Method::FullQuadrature, nodes: 0 };
        for (coef, b) in mu.leaves() {
            out = leaf::combine(out, coef, leaf::leaf_full_quadrature(mu.dimension, b, x, t, None, c)?);
        }
        Ok(out)
    })
}

/// Evaluates at many `(x, t)` in parallel; results keep the input order.
pub fn evaluate_batch(mu: &Measure, points: &[(Vec<f64>, f64)], cfg: &QuadratureConfig) -> Vec<Result<SolutionValue>> {
    points.par_iter().map(|(x, t)| evaluate(mu, x, *t, cfg)).collect()
}

/// CSV with header `x_1..x_N,t,value,est_error,method`; floats carry 17
/// significant digits.
pub fn batch_csv(dim: usize, points: &[(Vec<f64>, f64)], values: &[SolutionValue]) -> String {
    let mut s = String::new();
    for k in 1..=dim {
        let _ = write!(s, "x_{k},");
    }
    s.push_str("t,value,est_error,method\n");
    for ((x, t), v) in points.iter().zip(values) {
        for xk in x {
            let _ = write!(s, "{xk:.16e},");
        }
        let _ = writeln!(s, "{t:.16e},{:.16e},{:.16e},{}", v.value, v.est_error, v.method.as_str());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atom, Modifier};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn documented_values() {
        let g = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::One).unwrap();
        let v = evaluate(&g, &[0.0], 0.5, &cfg()).unwrap();
        assert!((v.value - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(v.method, Method::ClosedForm);
        let e = Measure::exp_quad(1, 0.0, vec![1.0], Modifier::One).unwrap();
        assert!((evaluate(&e, &[0.0], 1.0, &cfg()).unwrap().value - std::f64::consts::E).abs() < 1e-14);
        let d = Measure::dirac(vec![0.0], 1.0).unwrap();
        let t = 0.25 / std::f64::consts::PI;
        assert!((evaluate(&d, &[0.0], t, &cfg()).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_errors() {
        let g = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::One).unwrap();
        assert!(matches!(evaluate(&g, &[0.0], 1.0, &cfg()), Err(HgError::AtMaximalTime { .. })));
        assert!(matches!(evaluate(&g, &[0.0], 1.5, &cfg()), Err(HgError::BeyondMaximalTime { .. })));
        assert!(matches!(evaluate(&g, &[0.0, 1.0], 0.5, &cfg()), Err(HgError::DimensionMismatch { .. })));
    }

    #[test]
    fn documented_derivatives() {
        let one = Measure::constant(1, 1.0).unwrap();
        assert_eq!(evaluate_derivative(&one, &[0.3], 0.7, &[0], 1, &cfg()).unwrap().value, 0.0);
        let e = Measure::exp_quad(1, 0.0, vec![1.0], Modifier::One).unwrap();
        let d = evaluate_derivative(&e, &[0.0], 1.0, &[1], 0, &cfg()).unwrap();
        assert!((d.value - std::f64::consts::E).abs() < 1e-13);
        let dirac = Measure::dirac(vec![0.0], 1.0).unwrap();
        let lap = evaluate_derivative(&dirac, &[0.0], 0.3, &[2], 0, &cfg()).unwrap().value;
        let dt = evaluate_derivative(&dirac, &[0.0], 0.3, &[0], 1, &cfg()).unwrap().value;
        assert!((lap - dt).abs() <= 1e-8 * dt.abs());
        assert!(matches!(
            evaluate_derivative(&dirac, &[0.0], 0.3, &[1], 2, &cfg()),
            Err(HgError::OrderUnsupported { order: 5, max: 4 })
        ));
    }

    #[test]
    fn gaussian_jet_matches_hand_derivatives() {
        // u = (1 - 4At)^{-1/2} e^{A x²/(1 - 4At)}; with D = 1 - 4At,
        // ∂_x u = 2A x / D · u and ∂_t u = (2A/D + 4A² x²/D²) u.
        let a = 0.1;
        let g = Measure::exp_quad(1, a, vec![0.0], Modifier::One).unwrap();
        let (x, t) = (0.8, 0.6);
        let dd = 1.0 - 4.0 * a * t;
        let u = dd.powf(-0.5) * (a * x * x / dd).exp();
        let dx = evaluate_derivative(&g, &[x], t, &[1], 0, &cfg()).unwrap().value;
        let dt = evaluate_derivative(&g, &[x], t, &[0], 1, &cfg()).unwrap().value;
        assert!((dx - 2.0 * a * x / dd * u).abs() < 1e-13);
        assert!((dt - (2.0 * a / dd + 4.0 * a * a * x * x / (dd * dd)) * u).abs() < 1e-13);
    }

    #[test]
    fn batch_keeps_order_and_formats() {
        let d = Measure::dirac_comb(1, vec![Atom { location: vec![0.5], weight: 2.0 }]).unwrap();
        let pts: Vec<(Vec<f64>, f64)> = (0..20).map(|i| (vec![i as f64 * 0.1], 0.5)).collect();
        let vals: Vec<SolutionValue> = evaluate_batch(&d, &pts, &cfg()).into_iter().map(|r| r.unwrap()).collect();
        for ((x, t), v) in pts.iter().zip(&vals) {
            assert_eq!(v.value, evaluate(&d, x, *t, &cfg()).unwrap().value);
        }
        let csv = batch_csv(1, &pts[..1], &vals[..1]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x_1,t,value,est_error,method"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "0.0000000000000000e0");
        assert_eq!(row[4], "closed_form");
    }
}
