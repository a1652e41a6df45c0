//! Maximal existence time, the pointwise dichotomy at `t = T` and data
//! with a prescribed convex regular set.
//!
//! At `T = 1/(4ε₀)` a leaf `e^{ε₀|y|²} e^{β·y} v(s(y - c))` contributes
//! `(ε₀/π)^{N/2} e^{-ε₀|x|²} I(x)` with `I(x) = ∫ e^{⟨2ε₀x + β, y⟩} v(s(y - c)) dy`,
//! so the point is regular exactly when every such `I(x)` is finite. Leaves
//! growing slower than `e^{ε₀|y|²}` are evaluated at `T` directly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HgError, Result};
use crate::kernel::{l1eps_norm_of_solution, leaf_value};
use crate::measures::{tilted_integral, Body, Factored, HalfSpacePiece, Measure, Modifier, Restricted, TiltedIntegral};
use crate::quad::QuadratureConfig;

/// Relative slack for deciding that a leaf grows at the critical rate.
const CRITICAL_TOL: f64 = 1e-12;

/// Maximal existence time `1/(4ε₀)` of nonnegative data.
pub fn blowup_time(mu: &Measure) -> Result<f64> {
    if !mu.is_nonnegative() {
        return Err(HgError::SignedDataUnsupported);
    }
    Ok(mu.growth_index().maximal_time())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Ratios of consecutive shell contributions, all critical leaves
    /// concatenated.
    pub shell_ratios: Vec<f64>,
    pub shells_used: usize,
    /// Whether an analytic family rule decided a borderline case.
    pub analytic: bool,
}

impl Diagnostics {
    fn absorb(&mut self, d: &crate::measures::ShellDiagnostics) {
        self.shell_ratios.extend_from_slice(&d.shell_ratios);
        self.shells_used += d.shells_used;
        self.analytic |= d.analytic;
    }
}

/// `I_v(x) = ∫ e^{2A⟨x, z⟩} v(z) dz`, or the verdict that it diverges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularSetIntegral {
    Finite { value: f64, rel_error: f64, diagnostics: Diagnostics },
    Divergent { diagnostics: Diagnostics },
    Undetermined { diagnostics: Diagnostics },
}

impl RegularSetIntegral {
    pub fn diagnostics(&self) -> &Diagnostics {
        match self {
            RegularSetIntegral::Finite { diagnostics, .. }
            | RegularSetIntegral::Divergent { diagnostics }
            | RegularSetIntegral::Undetermined { diagnostics } => diagnostics,
        }
    }
}

fn from_tilted(t: TiltedIntegral, ln_shift: f64) -> RegularSetIntegral {
    let mut diagnostics = Diagnostics::default();
    diagnostics.absorb(t.diagnostics());
    match t {
        TiltedIntegral::Finite { ln_value, rel_error, .. } => RegularSetIntegral::Finite {
            value: (ln_value + ln_shift).exp(),
            rel_error,
            diagnostics,
        },
        TiltedIntegral::Divergent { .. } => RegularSetIntegral::Divergent { diagnostics },
        TiltedIntegral::Undetermined { .. } => RegularSetIntegral::Undetermined { diagnostics },
    }
}

/// `I_v(x)` for a profile `v` and growth rate `A > 0`.
pub fn regular_set_integral(a: f64, v: &Modifier, x: &[f64], cfg: &QuadratureConfig) -> Result<RegularSetIntegral> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(HgError::InvalidSpec(format!("growth rate must be positive, got {a}")));
    }
    let w: Vec<f64> = x.iter().map(|x| 2.0 * a * x).collect();
    Ok(from_tilted(tilted_integral(v, x.len(), &w, cfg)?, 0.0))
}

/// `∫ e^{2ε₀⟨x, y⟩ - ε₀|y|²} dμ(y)` summed over the critical leaves of
/// factored data `μ = e^{ε₀|y|²} v(y)`; the subcritical remainder is
/// integrated as well, so the result is `∫ e^{2ε₀⟨x,y⟩} v(y) dy`.
pub fn regular_set_integral_of(mu: &Measure, x: &[f64], cfg: &QuadratureConfig) -> Result<RegularSetIntegral> {
    if !mu.is_nonnegative() {
        return Err(HgError::SignedDataUnsupported);
    }
    let eps0 = mu.growth_index().eps0;
    if eps0 <= 0.0 {
        return Err(HgError::NotFactored("data has no quadratic-exponential growth".into()));
    }
    let c = classify_point(mu, x, cfg)?;
    let tmax = 0.25 / eps0;
    // limit = (ε₀/π)^{N/2} e^{-ε₀|x|²} I(x)
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let ln_norm = 0.5 * x.len() as f64 * (eps0 / std::f64::consts::PI).ln() - eps0 * xx;
    Ok(match c.verdict {
        Verdict::Regular { limit, rel_error } => RegularSetIntegral::Finite {
            value: limit * (-ln_norm).exp(),
            rel_error,
            diagnostics: c.diagnostics,
        },
        Verdict::Blowup => RegularSetIntegral::Divergent { diagnostics: c.diagnostics },
        Verdict::Undetermined => RegularSetIntegral::Undetermined { diagnostics: c.diagnostics },
        Verdict::GlobalInTime => unreachable!("finite maximal time {tmax}"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// `ε₀ = 0`: the solution exists for all time.
    GlobalInTime,
    /// `u(x, t) → limit` as `t ↑ T`; `rel_error` is infinite when a family
    /// rule certified finiteness without an error bound.
    Regular { limit: f64, rel_error: f64 },
    Blowup,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointClassification {
    pub verdict: Verdict,
    pub diagnostics: Diagnostics,
}

impl PointClassification {
    pub fn is_regular(&self) -> bool {
        matches!(self.verdict, Verdict::Regular { .. })
    }

    pub fn is_blowup(&self) -> bool {
        self.verdict == Verdict::Blowup
    }
}

enum Outcome {
    Finite { value: f64, error: f64 },
    Divergent,
    Undetermined,
}

impl Outcome {
    fn add(self, c: f64, o: Outcome) -> Outcome {
        match (self, o) {
            (Outcome::Divergent, _) | (_, Outcome::Divergent) => Outcome::Divergent,
            (Outcome::Undetermined, _) | (_, Outcome::Undetermined) => Outcome::Undetermined,
            (Outcome::Finite { value, error }, Outcome::Finite { value: v, error: e }) => Outcome::Finite {
                value: value + c * v,
                error: error + c.abs() * e,
            },
        }
    }
}

/// Limit of one leaf's contribution to `u(x, t)` as `t ↑ T`.
fn leaf_limit(dim: usize, body: &Body, x: &[f64], eps0: f64, cfg: &QuadratureConfig, diag: &mut Diagnostics) -> Result<Outcome> {
    let tmax = 0.25 / eps0;
    if let Some(f) = Factored::of(body) {
        if f.a >= eps0 * (1.0 - CRITICAL_TOL) {
            let k: Vec<f64> = x.iter().map(|v| 2.0 * f.a * v).collect();
            let w = f.profile_tilt(&k);
            let ti = tilted_integral(&f.profile, dim, &w, cfg)?;
            diag.absorb(ti.diagnostics());
            let xx: f64 = x.iter().map(|v| v * v).sum();
            let ln_norm = 0.5 * dim as f64 * (f.a / std::f64::consts::PI).ln() - f.a * xx;
            return Ok(match ti {
                TiltedIntegral::Finite { ln_value, rel_error, .. } => {
                    let value = (ln_norm + f.ln_tilt_prefactor(&k) + ln_value).exp();
                    Outcome::Finite { value, error: value * rel_error }
                }
                TiltedIntegral::Divergent { .. } => Outcome::Divergent,
                TiltedIntegral::Undetermined { .. } => Outcome::Undetermined,
            });
        }
    }
    match body {
        Body::Restricted(r) if r.outside => {
            // Whole inner measure minus its part in the ball.
            let mut out = Outcome::Finite { value: 0.0, error: 0.0 };
            for (c, b) in r.inner.leaves() {
                out = out.add(c, leaf_limit(dim, b, x, eps0, cfg, diag)?);
            }
            let ball = Body::Restricted(Restricted { outside: false, ..r.clone() });
            let v = leaf_value(dim, &ball, x, tmax, cfg)?;
            Ok(out.add(-1.0, Outcome::Finite { value: v.value, error: v.error }))
        }
        Body::Sum { components } => {
            let mut out = Outcome::Finite { value: 0.0, error: 0.0 };
            for c in components {
                out = out.add(c.coefficient, leaf_limit(dim, &c.measure.body, x, eps0, cfg, diag)?);
            }
            Ok(out)
        }
        _ => {
            let v = leaf_value(dim, body, x, tmax, cfg)?;
            Ok(Outcome::Finite { value: v.value, error: v.error })
        }
    }
}

/// Decides whether `u(x, t)` stays bounded as `t ↑ T` and, if so, its limit.
pub fn classify_point(mu: &Measure, x: &[f64], cfg: &QuadratureConfig) -> Result<PointClassification> {
    cfg.validate()?;
    if !mu.is_nonnegative() {
        return Err(HgError::SignedDataUnsupported);
    }
    if x.len() != mu.dimension {
        return Err(HgError::DimensionMismatch { left: x.len(), right: mu.dimension });
    }
    let eps0 = mu.growth_index().eps0;
    let mut diagnostics = Diagnostics::default();
    if eps0 == 0.0 {
        return Ok(PointClassification { verdict: Verdict::GlobalInTime, diagnostics });
    }
    let mut out = Outcome::Finite { value: 0.0, error: 0.0 };
    for (c, b) in mu.leaves() {
        out = out.add(c, leaf_limit(mu.dimension, b, x, eps0, cfg, &mut diagnostics)?);
    }
    let verdict = match out {
        Outcome::Finite { value, error } => Verdict::Regular {
            limit: value.max(0.0),
            rel_error: if value > 0.0 { error / value } else { 0.0 },
        },
        Outcome::Divergent => Verdict::Blowup,
        Outcome::Undetermined => Verdict::Undetermined,
    };
    Ok(PointClassification { verdict, diagnostics })
}

/// `classify_point` over many probes in parallel, input order kept.
pub fn limit_profile_at_t(mu: &Measure, probes: &[Vec<f64>], cfg: &QuadratureConfig) -> Result<Vec<(Vec<f64>, PointClassification)>> {
    probes
        .par_iter()
        .map(|x| classify_point(mu, x, cfg).map(|c| (x.clone(), c)))
        .collect()
}

/// `⟨x - x0, n⟩ ≤ c`, strict when `strict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpace {
    pub n: Vec<f64>,
    pub c: f64,
    #[serde(default)]
    pub strict: bool,
}

/// The convex set `x0 + ⋂_j {⟨x, n_j⟩ ≤ c_j}`; an empty list is all of ℝᴺ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexSetSpec {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub half_spaces: Vec<HalfSpace>,
}

impl ConvexSetSpec {
    pub fn dimension(&self) -> usize {
        self.x0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dimension();
        if dim == 0 {
            return Err(HgError::InvalidSpec("x0 fixes the dimension and must not be empty".into()));
        }
        for (j, h) in self.half_spaces.iter().enumerate() {
            if h.n.len() != dim {
                return Err(HgError::InvalidSpec(format!("half-space {j}: normal has length {} in dimension {dim}", h.n.len())));
            }
            let nn = h.n.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (nn - 1.0).abs() > 1e-12 {
                return Err(HgError::InvalidSpec(format!("half-space {j}: normal is not a unit vector")));
            }
            if !(h.c >= 0.0 && h.c.is_finite()) {
                return Err(HgError::InvalidSpec(format!("half-space {j}: c must be nonnegative")));
            }
            if h.strict && h.c == 0.0 {
                return Err(HgError::InvalidSpec(format!("half-space {j}: strict constraints need c > 0")));
            }
        }
        Ok(())
    }

    /// Membership with `dist(x, ∂K)`-free exact comparisons.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.half_spaces.iter().all(|h| {
            let s: f64 = x.iter().zip(&self.x0).zip(&h.n).map(|((x, x0), n)| (x - x0) * n).sum();
            if h.strict {
                s < h.c
            } else {
                s <= h.c
            }
        })
    }

    /// Signed distance to the nearest constraint plane, positive inside.
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.half_spaces
            .iter()
            .map(|h| h.c - x.iter().zip(&self.x0).zip(&h.n).map(|((x, x0), n)| (x - x0) * n).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Data `e^{A|x|²} e^{-2A⟨x0, x⟩} Σ_j j⁻² w_j(x)` whose regular set at the
/// maximal time `1/(4A)` is the convex set of `spec`. Non-strict pieces
/// carry `φ(s) = 1/(1 + s²)` along the normal and strict ones do not; with
/// no constraints the profile is `e^{-|x|^{3/2}}`, regular everywhere.
pub fn build_convex_regular_data(spec: &ConvexSetSpec, a: f64) -> Result<Measure> {
    spec.validate()?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(HgError::InvalidSpec(format!("growth rate must be positive, got {a}")));
    }
    let dim = spec.dimension();
    if spec.half_spaces.is_empty() {
        let b: Vec<f64> = spec.x0.iter().map(|v| -2.0 * a * v).collect();
        return Measure::exp_quad(dim, a, b, Modifier::StretchedExpDecay { gamma: 1.0, alpha: 1.5 });
    }
    let parts = spec
        .half_spaces
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let piece = HalfSpacePiece::new(h.n.clone(), h.c, h.strict, a, spec.x0.clone());
            let w = 1.0 / ((j + 1) as f64).powi(2);
            Ok((w, Measure::new(dim, Body::HalfSpacePiece(piece))?))
        })
        .collect::<Result<Vec<_>>>()?;
    Measure::sum(dim, parts)
}

/// `‖u(t_i)‖_{L¹_δ}` along times below `T`; `+∞` once `δ` no longer
/// dominates the solution's growth rate `ε₀/(1 - 4ε₀t)`.
pub fn norm_blowup_track(mu: &Measure, delta: f64, times: &[f64], cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    let gi = mu.growth_index();
    times
        .iter()
        .map(|&t| {
            if gi.eps0 > 0.0 {
                let rate = gi.eps0 / (1.0 - 4.0 * gi.eps0 * t);
                let finite = if (delta - rate).abs() <= 1e-12 * rate {
                    gi.attained == Some(true)
                } else {
                    delta > rate || rate < 0.0
                };
                if 4.0 * gi.eps0 * t < 1.0 && !finite {
                    return Ok(f64::INFINITY);
                }
            }
            l1eps_norm_of_solution(mu, t, delta, cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn blowup_times() {
        let g = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::One).unwrap();
        assert_eq!(blowup_time(&g).unwrap(), 1.0);
        let d = Measure::dirac(vec![0.0], 1.0).unwrap();
        assert_eq!(blowup_time(&d).unwrap(), f64::INFINITY);
        let s = Measure::exp_quad(1, 0.5, vec![0.0], Modifier::StretchedExpDecay { gamma: 1.0, alpha: 1.5 }).unwrap();
        assert_eq!(blowup_time(&s).unwrap(), 0.5);
        let signed = Measure::sum(1, vec![(1.0, g), (-1.0, d)]).unwrap();
        assert_eq!(blowup_time(&signed), Err(HgError::SignedDataUnsupported));
    }

    #[test]
    fn regular_set_integral_examples() {
        let v = Modifier::ExpDecay { gamma: 1.0 };
        match regular_set_integral(0.25, &v, &[0.0], &cfg()).unwrap() {
            RegularSetIntegral::Finite { value, .. } => assert!((value - 2.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert!(matches!(regular_set_integral(0.25, &v, &[2.1], &cfg()).unwrap(), RegularSetIntegral::Divergent { .. }));
        let p = Modifier::PowerDecay { alpha: 2.0 };
        assert!(matches!(regular_set_integral(0.25, &p, &[0.1], &cfg()).unwrap(), RegularSetIntegral::Divergent { .. }));
    }

    #[test]
    fn classification_examples() {
        let g = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::One).unwrap();
        assert!(classify_point(&g, &[0.7], &cfg()).unwrap().is_blowup());
        let s = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::StretchedExpDecay { gamma: 1.0, alpha: 1.5 }).unwrap();
        assert!(classify_point(&s, &[3.0], &cfg()).unwrap().is_regular());
        let e = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::ExpPowerDecay { gamma: 1.0, alpha: 2.0 }).unwrap();
        assert!(classify_point(&e, &[2.0], &cfg()).unwrap().is_regular());
        assert!(classify_point(&e, &[2.2], &cfg()).unwrap().is_blowup());
        let d = Measure::dirac(vec![0.0], 1.0).unwrap();
        assert_eq!(classify_point(&d, &[0.0], &cfg()).unwrap().verdict, Verdict::GlobalInTime);
    }

    #[test]
    fn limit_matches_closed_form_for_decaying_profile() {
        // u₀ = e^{x²/4 - |x|}: I(0) = 2, so the limit at (0, T) is (1/(4π))^{1/2} · 2.
        let e = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::ExpDecay { gamma: 1.0 }).unwrap();
        let Verdict::Regular { limit, .. } = classify_point(&e, &[0.0], &cfg()).unwrap().verdict else { panic!() };
        assert!((limit - 2.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn convex_spec_validation() {
        let bad = ConvexSetSpec { x0: vec![0.0], half_spaces: vec![HalfSpace { n: vec![1.0], c: 0.0, strict: true }] };
        assert!(build_convex_regular_data(&bad, 0.25).is_err());
        let skew = ConvexSetSpec { x0: vec![0.0, 0.0], half_spaces: vec![HalfSpace { n: vec![1.0, 1.0], c: 1.0, strict: false }] };
        assert!(build_convex_regular_data(&skew, 0.25).is_err());
    }

    #[test]
    fn half_space_data_classifies() {
        let spec = ConvexSetSpec { x0: vec![0.0, 0.0], half_spaces: vec![HalfSpace { n: vec![1.0, 0.0], c: 1.0, strict: false }] };
        let mu = build_convex_regular_data(&spec, 0.25).unwrap();
        assert!(classify_point(&mu, &[1.0, 0.0], &cfg()).unwrap().is_regular());
        assert!(classify_point(&mu, &[0.0, 5.0], &cfg()).unwrap().is_regular());
        assert!(classify_point(&mu, &[1.5, 0.0], &cfg()).unwrap().is_blowup());
    }

    #[test]
    fn norm_track_closed_form() {
        // ‖u(t)‖_{L¹_δ} = (δ / (δ(1 - t) - 1/4))^{1/2} for u₀ = e^{x²/4}.
        let g = Measure::exp_quad(1, 0.25, vec![0.0], Modifier::One).unwrap();
        let times = [0.5, 0.7, 0.749, 0.9];
        let track = norm_blowup_track(&g, 1.0, &times, &cfg()).unwrap();
        for (t, v) in times[..3].iter().zip(&track) {
            let exact = (1.0 / ((1.0 - t) - 0.25)).sqrt();
            assert!((v - exact).abs() < 1e-7 * exact, "{t}: {v} vs {exact}");
        }
        assert_eq!(track[3], f64::INFINITY);
    }
}
