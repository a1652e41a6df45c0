//! Solutions with a prescribed value at the origin: for a real-analytic
//! `γ` the even series `u(x, t) = Σ_k γ^{(k)}(t) x^{2k}/(2k)!` solves the
//! heat equation with `u(0, t) = γ(t)` and `u_x(0, t) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{HgError, Result};
use crate::kernel::{Method, SolutionValue};
use crate::quad::QuadratureConfig;
use crate::special::factorial;

pub const DEFAULT_TRUNCATION: usize = 64;

/// Relative slack on the envelope check, for coefficients typed in decimal.
const ENVELOPE_SLACK: f64 = 1e-12;

/// `γ(t) = Σ_k α_k t^k/k!` with `|α_k| ≤ C k! τ^{-k}`.
///
/// The coefficient list is the complete Taylor data: a polynomial `γ` is
/// represented exactly, an entire `γ` by a long enough list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSeries {
    pub gamma_coeffs: Vec<f64>,
    pub c: f64,
    pub tau: f64,
    /// Trace horizon; `f64::INFINITY` for an entire `γ`.
    pub horizon: f64,
    /// Highest power `x^{2k}` summed.
    pub truncation: usize,
    /// The solution is embedded in `ℝᴺ` as `u(x₁, t)`.
    pub dimension: usize,
}

pub fn build_trace_solution(gamma_coeffs: Vec<f64>, c: f64, tau: f64, horizon: f64, truncation: usize) -> Result<TraceSeries> {
    if gamma_coeffs.is_empty() {
        return Err(HgError::InvalidSpec("need at least one Taylor coefficient".into()));
    }
    if gamma_coeffs.iter().any(|a| !a.is_finite()) {
        return Err(HgError::InvalidSpec("Taylor coefficients must be finite".into()));
    }
    if !(c > 0.0 && c.is_finite() && tau > 0.0 && tau.is_finite()) {
        return Err(HgError::InvalidSpec(format!("need C, tau > 0, got C = {c}, tau = {tau}")));
    }
    if !(horizon > 0.0) {
        return Err(HgError::InvalidSpec(format!("horizon must be positive, got {horizon}")));
    }
    if truncation < 4 {
        return Err(HgError::InvalidSpec(format!("truncation must be at least 4, got {truncation}")));
    }
    for (k, a) in gamma_coeffs.iter().enumerate() {
        let ln_bound = c.ln() + ln_factorial(k) - k as f64 * tau.ln();
        if a.abs() > 0.0 && a.abs().ln() > ln_bound + ENVELOPE_SLACK {
            return Err(HgError::InconsistentBound { k, value: *a, bound: ln_bound.exp() });
        }
    }
    Ok(TraceSeries { gamma_coeffs, c, tau, horizon, truncation, dimension: 1 })
}

impl TraceSeries {
    /// Embeds the solution in `ℝᴺ` as a function of the first coordinate.
    pub fn embedded(mut self, dimension: usize) -> Result<TraceSeries> {
        if dimension == 0 {
            return Err(HgError::InvalidSpec("dimension must be at least 1".into()));
        }
        self.dimension = dimension;
        Ok(self)
    }

    /// `γ^{(k)}(t)` by the shifted Taylor series.
    pub fn gamma_derivative(&self, k: usize, t: f64) -> f64 {
        let a = &self.gamma_coeffs;
        if k >= a.len() {
            return 0.0;
        }
        // Horner in t^j/j!: Σ_j a_{j+k} t^j/j!.
        let n = a.len() - k;
        let mut acc = 0.0;
        for j in (0..n).rev() {
            acc = a[j + k] + if j + 1 < n { acc * t / (j + 1) as f64 } else { 0.0 };
        }
        acc
    }

    /// Number of nonzero terms when `γ` is a polynomial of degree below
    /// `truncation`, so the series is finite and exact.
    fn finite_terms(&self) -> Option<usize> {
        (self.gamma_coeffs.len() <= self.truncation + 1).then_some(self.gamma_coeffs.len())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(HgError::InvalidSpec(format!("time must be finite and nonnegative, got {t}")));
        }
        if t >= self.horizon {
            return Err(HgError::BeyondMaximalTime { t, t_max: self.horizon });
        }
        Ok(())
    }

    /// Number of terms `K + 1` and a bound on `Σ_{k>K}` of the envelope,
    /// using `|γ^{(k)}(t)| ≤ C/(1 - t/τ) · k! (τ - t)^{-k}` on the shifted
    /// disc.
    fn terms_and_tail(&self, x: f64, t: f64, abs_tol: f64) -> Result<(usize, f64)> {
        if let Some(n) = self.finite_terms() {
            return Ok((n, 0.0));
        }
        let not_closed = HgError::TailNotClosed { x, t, truncation: self.truncation };
        if t >= self.tau {
            return Err(not_closed);
        }
        let tau_t = self.tau - t;
        let ln_c = self.c.ln() - (1.0 - t / self.tau).ln();
        let x2 = x * x;
        let ln_term = |k: usize| ln_c + ln_factorial(k) - k as f64 * tau_t.ln() + k as f64 * x2.ln() - ln_factorial(2 * k);
        if x2 == 0.0 {
            return Ok((1, 0.0));
        }
        for big_k in 0..=self.truncation {
            let k = big_k + 1;
            // Term ratios x²/(2τ_t(2k+1)) decrease in k, so the tail is
            // dominated by a geometric series once the ratio drops below 1.
            let ratio = x2 / (2.0 * tau_t * (2 * k + 1) as f64);
            if ratio < 1.0 {
                let tail = ln_term(k).exp() / (1.0 - ratio);
                if tail < abs_tol {
                    return Ok((big_k + 1, tail));
                }
            }
        }
        Err(not_closed)
    }
}

fn ln_factorial(k: usize) -> f64 {
    if k < 170 {
        factorial(k).ln()
    } else {
        statrs::function::gamma::ln_gamma(k as f64 + 1.0)
    }
}

/// `x^{2k}/(2k)!` for `k = 0..n`.
fn even_monomials(x: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut m = 1.0;
    for k in 0..n {
        if k > 0 {
            m *= x * x / ((2 * k - 1) * 2 * k) as f64;
        }
        out.push(m);
    }
    out
}

/// Partial sum with the envelope tail folded into `est_error`.
pub fn eval_trace_solution(series: &TraceSeries, x: f64, t: f64, cfg: &QuadratureConfig) -> Result<SolutionValue> {
    cfg.validate()?;
    series.check_time(t)?;
    let (n, tail) = series.terms_and_tail(x, t, cfg.abs_tol)?;
    let mono = even_monomials(x, n);
    let mut value = 0.0;
    let mut magnitude = 0.0;
    for (k, m) in mono.iter().enumerate() {
        let term = series.gamma_derivative(k, t) * m;
        value += term;
        magnitude += term.abs();
    }
    Ok(SolutionValue {
        value,
        est_error: tail + 4.0 * f64::EPSILON * magnitude * n as f64,
        method: Method::ClosedForm,
        nodes: n,
    })
}

/// As [`eval_trace_solution`] at a point of `ℝᴺ`, reading `x₁`.
pub fn eval_embedded(series: &TraceSeries, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<SolutionValue> {
    if x.len() != series.dimension {
        return Err(HgError::DimensionMismatch { left: x.len(), right: series.dimension });
    }
    eval_trace_solution(series, x[0], t, cfg)
}

/// `u₀(x) = Σ_k α_k x^{2k}/(2k)!` and its sign on a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    /// Coefficient of `x^{2k}`.
    pub even_coeffs: Vec<f64>,
    /// `(x, u₀(x))` on the probe grid.
    pub probe: Vec<(f64, f64)>,
    pub nonnegative_on_probe: bool,
}

impl InitialData {
    pub fn value(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.even_coeffs.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
    }
}

/// Probe grid `0, 0.05, …, 4`; `u₀` is even.
pub fn initial_data_of_trace(series: &TraceSeries) -> InitialData {
    let even_coeffs: Vec<f64> = series
        .gamma_coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| a / factorial(2 * k))
        .collect();
    let mut data = InitialData { even_coeffs, probe: Vec::new(), nonnegative_on_probe: true };
    data.probe = (0..=80).map(|i| 0.05 * i as f64).map(|x| (x, data.value(x))).collect();
    data.nonnegative_on_probe = data.probe.iter().all(|(_, v)| *v >= 0.0);
    data
}

/// `max |∂_t u - ∂_x² u|` over the sample grid, both sides differentiated
/// term by term from the same truncated series; what remains is the
/// truncation tail and rounding.
pub fn verify_trace(series: &TraceSeries, t_samples: &[f64], x_samples: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    let mut worst = 0.0f64;
    for &t in t_samples {
        series.check_time(t)?;
        for &x in x_samples {
            // One term past the certified count so that `∂_x²` sees the
            // same derivatives of γ as `∂_t`.
            let n = series.terms_and_tail(x, t, cfg.abs_tol)?.0 + 1;
            let mut u_t = 0.0;
            let mut u_xx = 0.0;
            let mut lower = 1.0;
            for k in 0..n {
                let m = if k == 0 { 1.0 } else { lower * x * x / ((2 * k - 1) * 2 * k) as f64 };
                u_t += series.gamma_derivative(k + 1, t) * m;
                // d²/dx² x^{2k}/(2k)! = x^{2k-2}/(2k-2)!
                if k > 0 {
                    u_xx += series.gamma_derivative(k, t) * lower;
                }
                lower = m;
            }
            worst = worst.max((u_t - u_xx).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn exp_series() -> TraceSeries {
        // k!/2^k ≥ 1/2, so C = 2 bounds the all-ones list at τ = 2.
        build_trace_solution(vec![1.0; 120], 2.0, 2.0, f64::INFINITY, DEFAULT_TRUNCATION).unwrap()
    }

    #[test]
    fn documented_values() {
        let c = build_trace_solution(vec![3.0], 3.0, 1.0, f64::INFINITY, 8).unwrap();
        assert_eq!(eval_trace_solution(&c, 5.0, 0.7, &cfg()).unwrap().value, 3.0);
        let lin = build_trace_solution(vec![0.0, 1.0], 1.0, 1.0, f64::INFINITY, 8).unwrap();
        assert!((eval_trace_solution(&lin, 2.0, 0.5, &cfg()).unwrap().value - 2.5).abs() < 1e-15);
        let e = exp_series();
        let v = eval_trace_solution(&e, 1.0, 0.0, &cfg()).unwrap();
        assert!((v.value - 1f64.cosh()).abs() < 1e-14, "{v:?}");
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(eval_trace_solution(&e, 0.0, t, &cfg()).unwrap().value, e.gamma_derivative(0, t));
        }
    }

    #[test]
    fn matches_closed_form() {
        let e = exp_series();
        for i in 0..=12 {
            let x = -3.0 + 0.5 * i as f64;
            for t in [0.0, 0.25, 0.5, 0.75, 0.999] {
                let v = eval_trace_solution(&e, x, t, &cfg()).unwrap();
                let exact = t.exp() * x.cosh();
                assert!((v.value - exact).abs() <= 1e-12 * exact, "x = {x}, t = {t}");
                assert!(v.est_error < 1e-10);
            }
        }
    }

    #[test]
    fn envelope_violation_is_reported() {
        let err = build_trace_solution(vec![1.0, 5.0], 1.0, 1.0, 1.0, 8).unwrap_err();
        assert!(matches!(err, HgError::InconsistentBound { k: 1, .. }));
        let long = build_trace_solution(vec![1.0; 40], 2.0, 2.0, f64::INFINITY, 4).unwrap();
        assert!(matches!(eval_trace_solution(&long, 30.0, 0.5, &cfg()), Err(HgError::TailNotClosed { .. })));
        assert!(matches!(eval_trace_solution(&long, 1.0, 2.5, &cfg()), Err(HgError::TailNotClosed { .. })));
    }

    #[test]
    fn initial_data_examples() {
        let s = build_trace_solution(vec![1.0, -2.0, 2.0], 2.0, 1.0, 1.0, 8).unwrap();
        let u0 = initial_data_of_trace(&s);
        assert_eq!(u0.even_coeffs, vec![1.0, -1.0, 2.0 / 24.0]);
        assert!((u0.value(2.0) - (1.0 - 4.0 + 16.0 / 12.0)).abs() < 1e-14);
        assert!(!u0.nonnegative_on_probe);
        let lin = build_trace_solution(vec![0.0, 1.0], 1.0, 1.0, 1.0, 8).unwrap();
        assert!(initial_data_of_trace(&lin).nonnegative_on_probe);
        let neg = build_trace_solution(vec![-1.0], 1.0, 1.0, 1.0, 8).unwrap();
        assert!(!initial_data_of_trace(&neg).nonnegative_on_probe);
    }

    #[test]
    fn residual_examples() {
        let xs: Vec<f64> = (0..=12).map(|i| -3.0 + 0.5 * i as f64).collect();
        let ts = [0.0, 0.5, 0.9];
        let r = verify_trace(&exp_series(), &ts, &xs, &cfg()).unwrap();
        assert!(r <= 1e-8, "{r}");
        let quad = build_trace_solution(vec![1.0, -2.0, 2.0], 2.0, 1.0, 1.0, 8).unwrap();
        assert!(verify_trace(&quad, &ts, &xs, &cfg()).unwrap() <= 1e-12);
        let lin = build_trace_solution(vec![0.0, 1.0], 1.0, 1.0, 1.0, 8).unwrap();
        assert_eq!(verify_trace(&lin, &ts, &xs, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn embedding_reads_first_coordinate() {
        let e = exp_series().embedded(3).unwrap();
        let v = eval_embedded(&e, &[1.0, 7.0, -2.0], 0.5, &cfg()).unwrap();
        assert!((v.value - 0.5f64.exp() * 1f64.cosh()).abs() < 1e-13);
        assert!(eval_embedded(&e, &[1.0], 0.5, &cfg()).is_err());
    }
}
