//! Factored growth families `e^{A|y|² + β·y} v(s(y - c))` and the tilted
//! profile integrals `J(w) = ∫ e^{⟨w, u⟩} v(u) du` that decide attainment
//! and regularity.

use crate::error::{HgError, Result};
use crate::quad::{ln_integrate, QuadratureConfig};
use crate::special::{angular_factor_scaled, ball_volume, log_add, reg_upper_gamma, sphere_area};

use statrs::function::gamma::ln_gamma;

use super::{dot, norm, Body, Modifier};

/// Relative band around a family's crossover inside which the analytic
/// rule decides instead of the numerical shell test.
pub const BOUNDARY_BAND: f64 = 1e-3;

/// Consecutive non-decaying shells needed to declare divergence.
const DIVERGENCE_SHELLS: usize = 4;

const MAX_SHELLS: usize = 240;

/// A growth leaf in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct Factored {
    pub a: f64,
    pub beta: Vec<f64>,
    pub center: Vec<f64>,
    pub scale: f64,
    pub profile: Modifier,
}

impl Factored {
    pub fn of(body: &Body) -> Option<Factored> {
        match body {
            Body::ExpQuad(e) => Some(Factored {
                a: e.a,
                beta: e.b.clone(),
                center: e.center.clone(),
                scale: e.scale,
                profile: e.modifier.clone(),
            }),
            Body::HalfSpacePiece(h) => Some(Factored {
                a: h.a,
                beta: h.x0.iter().map(|x| -2.0 * h.a * x).collect(),
                center: h.shift.clone(),
                scale: h.scale,
                profile: Modifier::ProductWindow {
                    n: h.n.clone(),
                    eta0: h.eta0,
                    phi: !h.strict,
                },
            }),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Profile argument `s(y - c)`.
    pub fn profile_arg(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.center).map(|(a, c)| self.scale * (a - c)).collect()
    }

    pub fn ln_density(&self, y: &[f64]) -> f64 {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        self.a * r2 + dot(&self.beta, y) + self.profile.ln_value(&self.profile_arg(y))
    }

    /// Tilt `w` seen by the profile when the data is integrated against
    /// `e^{⟨k, y⟩}`: `w = (k + β)/s`.
    pub fn profile_tilt(&self, k: &[f64]) -> Vec<f64> {
        k.iter().zip(&self.beta).map(|(k, b)| (k + b) / self.scale).collect()
    }

    /// `ln` of the prefactor in `∫ e^{⟨k,y⟩ + β·y} v(s(y-c)) dy = e^{⟨k+β, c⟩} s^{-N} J(w)`.
    pub fn ln_tilt_prefactor(&self, k: &[f64]) -> f64 {
        let kb: Vec<f64> = k.iter().zip(&self.beta).map(|(k, b)| k + b).collect();
        dot(&kb, &self.center) - self.dim() as f64 * self.scale.ln()
    }

    /// Points along `axis` (other coordinates fixed by `prefix`, remaining
    /// coordinates free) where the density is not smooth.
    pub fn line_breaks(&self, axis: usize, prefix: &[f64]) -> Vec<f64> {
        match &self.profile {
            Modifier::ProductWindow { n, .. } => {
                let dim = self.dim();
                if axis + 1 != dim {
                    // Outer axes of a tensor rule: only the hyperplane is
                    // axis-aligned enough to matter.
                    if n[axis].abs() > 1e-12 && n.iter().enumerate().all(|(k, v)| k == axis || *v == 0.0) {
                        return vec![self.center[axis]];
                    }
                    return Vec::new();
                }
                // z = s(y - c); y fixed except coordinate `axis`.
                let mut out = Vec::new();
                let partial: Vec<f64> = (0..axis).map(|k| self.scale * (prefix[k] - self.center[k])).collect();
                let z1_fixed: f64 = partial.iter().zip(n).map(|(z, n)| z * n).sum();
                if n[axis].abs() > 1e-300 {
                    // ⟨z, n⟩ = 0
                    out.push(self.center[axis] - z1_fixed / (self.scale * n[axis]));
                }
                // |z|² - ⟨z,n⟩² = 1 is quadratic in the free coordinate.
                let zz: f64 = partial.iter().map(|z| z * z).sum();
                let qa = 1.0 - n[axis] * n[axis];
                let qb = -2.0 * z1_fixed * n[axis];
                let qc = zz - z1_fixed * z1_fixed - 1.0;
                if qa.abs() > 1e-14 {
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc >= 0.0 {
                        for sgn in [-1.0, 1.0] {
                            let z = (-qb + sgn * disc.sqrt()) / (2.0 * qa);
                            out.push(self.center[axis] + z / self.scale);
                        }
                    }
                }
                out
            }
            Modifier::One | Modifier::PowerDecay { .. } => Vec::new(),
            _ => vec![self.center[axis]],
        }
    }
}

impl Modifier {
    /// `ln v(r)` for radial profiles.
    pub fn ln_radial(&self, r: f64) -> f64 {
        match *self {
            Modifier::One => 0.0,
            Modifier::PowerDecay { alpha } => -0.5 * alpha * (r * r).ln_1p(),
            Modifier::ExpDecay { gamma } => -gamma * r,
            Modifier::ExpPowerDecay { gamma, alpha } => -gamma * r - 0.5 * alpha * (r * r).ln_1p(),
            Modifier::StretchedExpDecay { gamma, alpha } => -gamma * r.powf(alpha),
            Modifier::ProductWindow { .. } => panic!("window profile is not radial"),
        }
    }

    /// `|w| r + ln v(r)`, with the linear terms combined first.
    pub fn ln_radial_tilted(&self, r: f64, wn: f64) -> f64 {
        match *self {
            Modifier::ExpDecay { gamma } => (wn - gamma) * r,
            Modifier::ExpPowerDecay { gamma, alpha } => (wn - gamma) * r - 0.5 * alpha * (r * r).ln_1p(),
            _ => wn * r + self.ln_radial(r),
        }
    }

    /// `ln φ(s) - η₀ s` on `s > 0` for the window profile.
    pub fn ln_window_axis(eta0: f64, phi: bool, s: f64) -> f64 {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let p = if phi { -(s * s).ln_1p() } else { 0.0 };
        p - eta0 * s
    }

    /// `ln v(z)`.
    pub fn ln_value(&self, z: &[f64]) -> f64 {
        match self {
            Modifier::ProductWindow { n, eta0, phi } => {
                let z1 = dot(z, n);
                if z1 <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let zz: f64 = z.iter().map(|v| v * v).sum();
                if z.len() > 1 && zz - z1 * z1 >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                Modifier::ln_window_axis(*eta0, *phi, z1)
            }
            radial => radial.ln_radial(norm(z)),
        }
    }

    /// Whether `∫ e^{⟨w,u⟩} v(u) du < ∞`, decided from the family's
    /// structure.
    pub fn tilted_integrable(&self, dim: usize, w: &[f64]) -> bool {
        let wn = norm(w);
        match *self {
            Modifier::One => false,
            Modifier::PowerDecay { alpha } => wn == 0.0 && alpha > dim as f64,
            Modifier::ExpDecay { gamma } => wn < gamma,
            // On the sphere |w| = γ only a cone of directions fails to decay,
            // which costs (N-1)/2 powers of r.
            Modifier::ExpPowerDecay { gamma, alpha } => {
                wn < gamma || (wn == gamma && alpha > 0.5 * (dim as f64 + 1.0))
            }
            Modifier::StretchedExpDecay { .. } => true,
            Modifier::ProductWindow { ref n, eta0, phi } => {
                let k1 = dot(w, n);
                k1 < eta0 || (k1 == eta0 && phi)
            }
        }
    }

    /// Whether `w` is within the relative boundary band of the family's
    /// crossover.
    pub fn in_boundary_band(&self, w: &[f64]) -> bool {
        let wn = norm(w);
        match *self {
            Modifier::One | Modifier::StretchedExpDecay { .. } => false,
            Modifier::PowerDecay { .. } => wn <= BOUNDARY_BAND,
            Modifier::ExpDecay { gamma } | Modifier::ExpPowerDecay { gamma, .. } => {
                (wn - gamma).abs() <= BOUNDARY_BAND * gamma
            }
            Modifier::ProductWindow { ref n, eta0, .. } => {
                let k1 = dot(w, n);
                (k1 - eta0).abs() <= BOUNDARY_BAND * eta0.max(k1.abs())
            }
        }
    }
}

/// Verdict and value of a tilted profile integral.
#[derive(Debug, Clone, PartialEq)]
pub enum TiltedIntegral {
    Finite {
        ln_value: f64,
        rel_error: f64,
        diagnostics: ShellDiagnostics,
    },
    Divergent {
        diagnostics: ShellDiagnostics,
    },
    Undetermined {
        diagnostics: ShellDiagnostics,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShellDiagnostics {
    /// Ratios of consecutive shell contributions.
    pub shell_ratios: Vec<f64>,
    pub shells_used: usize,
    /// Whether the analytic family rule decided the verdict.
    pub analytic: bool,
    pub evals: usize,
}

impl TiltedIntegral {
    pub fn diagnostics(&self) -> &ShellDiagnostics {
        match self {
            TiltedIntegral::Finite { diagnostics, .. }
            | TiltedIntegral::Divergent { diagnostics }
            | TiltedIntegral::Undetermined { diagnostics } => diagnostics,
        }
    }
}

/// One-dimensional shell integrand and its analytic tail bound.
struct ShellProblem<'a> {
    ln_h: Box<dyn Fn(f64) -> f64 + 'a>,
    /// `ln` of a bound on `∫_R^∞ h`, when one is available at `R`.
    ln_tail: Box<dyn Fn(f64) -> Option<f64> + 'a>,
    crossover: f64,
    breaks: Vec<f64>,
}

/// `J(w) = ∫_{ℝᴺ} e^{⟨w,u⟩} v(u) du` with a numerical divergence test over
/// dyadic shells and the analytic rule inside the boundary band.
pub fn tilted_integral(profile: &Modifier, dim: usize, w: &[f64], cfg: &QuadratureConfig) -> Result<TiltedIntegral> {
    let integrable = profile.tilted_integrable(dim, w);
    let in_band = profile.in_boundary_band(w);
    let (problem, ln_factor) = match profile {
        Modifier::ProductWindow { n, eta0, phi } => {
            let k1 = dot(w, n);
            let wp: Vec<f64> = w.iter().zip(n).map(|(w, n)| w - k1 * n).collect();
            let ln_j2 = ln_cross_section(dim, norm(&wp), cfg)?;
            let lam = eta0 - k1;
            let (eta0, phi) = (*eta0, *phi);
            let ln_tail: Box<dyn Fn(f64) -> Option<f64>> = Box::new(move |r: f64| {
                let mut best: Option<f64> = None;
                if lam > 0.0 {
                    best = Some(-lam * r - lam.ln());
                }
                if phi && lam >= 0.0 {
                    let b = -r.ln();
                    best = Some(best.map_or(b, |x: f64| x.min(b)));
                }
                best
            });
            (
                ShellProblem {
                    // Tilt and decay are combined before multiplying by s to
                    // avoid cancellation at the crossover.
                    ln_h: Box::new(move |s: f64| {
                        if s <= 0.0 {
                            return f64::NEG_INFINITY;
                        }
                        let p = if phi { -(s * s).ln_1p() } else { 0.0 };
                        (k1 - eta0) * s + p
                    }),
                    ln_tail,
                    crossover: 1.0,
                    breaks: Vec::new(),
                },
                ln_j2,
            )
        }
        radial => {
            let wn = norm(w);
            if dim > 3 && wn > 0.0 {
                return Err(HgError::DimensionUnsupported {
                    dim,
                    what: "tilted radial profile integral".into(),
                });
            }
            let omega = sphere_area(dim);
            let nf = dim as f64;
            let ln_h = move |r: f64| {
                if r <= 0.0 {
                    return if dim == 1 { radial.ln_radial(0.0) + 2f64.ln() } else { f64::NEG_INFINITY };
                }
                let kappa = wn * r;
                let ang = angular_factor_scaled(dim, kappa).expect("checked dimension");
                (nf - 1.0) * r.ln() + radial.ln_radial_tilted(r, wn) + ang.ln()
            };
            // Shell masses grow until the tilt stops competing with the
            // decay, so the nondecay test only starts past that radius.
            let crossover = match *radial {
                Modifier::StretchedExpDecay { gamma, alpha } => (wn / gamma).powf(1.0 / (alpha - 1.0)),
                Modifier::ExpDecay { gamma } | Modifier::ExpPowerDecay { gamma, .. } if gamma > wn => (nf / (gamma - wn)).max(1.0),
                _ => 1.0,
            };
            let ln_tail: Box<dyn Fn(f64) -> Option<f64>> = Box::new(move |r: f64| {
                radial_tail_bound(radial, nf, wn, r).map(|t| t + omega.ln())
            });
            (
                ShellProblem {
                    ln_h: Box::new(ln_h),
                    ln_tail,
                    crossover,
                    breaks: Vec::new(),
                },
                0.0,
            )
        }
    };
    let mut result = shell_sum(&problem, integrable, cfg)?;
    if in_band {
        let diagnostics = ShellDiagnostics {
            analytic: true,
            ..result.diagnostics().clone()
        };
        result = match (integrable, result) {
            (true, TiltedIntegral::Finite { ln_value, rel_error, .. }) => TiltedIntegral::Finite {
                ln_value,
                rel_error,
                diagnostics,
            },
            (true, _) => {
                // The rule certifies finiteness; the value is the partial sum
                // and carries no error certificate.
                let ln_value = partial_sum(&problem, diagnostics.shells_used, cfg)?;
                TiltedIntegral::Finite {
                    ln_value,
                    rel_error: f64::INFINITY,
                    diagnostics,
                }
            }
            (false, _) => TiltedIntegral::Divergent { diagnostics },
        };
    }
    Ok(match result {
        TiltedIntegral::Finite {
            ln_value,
            rel_error,
            diagnostics,
        } => TiltedIntegral::Finite {
            ln_value: ln_value + ln_factor,
            rel_error,
            diagnostics,
        },
        other => other,
    })
}

fn shell_edges(k: usize) -> (f64, f64) {
    if k == 0 {
        (0.0, 1.0)
    } else {
        (2f64.powi(k as i32 - 1), 2f64.powi(k as i32))
    }
}

fn shell_sum(p: &ShellProblem<'_>, integrable: bool, cfg: &QuadratureConfig) -> Result<TiltedIntegral> {
    let start = (4.0 * p.crossover).max(8.0);
    let mut total = f64::NEG_INFINITY;
    let mut weighted_err = 0.0;
    let mut prev: Option<f64> = None;
    let mut nondecay = 0usize;
    let mut diag = ShellDiagnostics::default();
    let shell_cfg = cfg.tightened(0.1);
    for k in 0..MAX_SHELLS {
        let (lo, hi) = shell_edges(k);
        let r = ln_integrate(&p.ln_h, lo, hi, &p.breaks, &shell_cfg)?;
        diag.evals += r.evals;
        diag.shells_used = k + 1;
        let new_total = log_add(total, r.ln_value);
        // Accumulate absolute error relative to the running total.
        if new_total > f64::NEG_INFINITY {
            weighted_err = weighted_err * (total - new_total).exp() + r.rel_error * (r.ln_value - new_total).exp();
        }
        total = new_total;
        if let Some(pv) = prev {
            if pv > f64::NEG_INFINITY && r.ln_value > f64::NEG_INFINITY {
                diag.shell_ratios.push((r.ln_value - pv).exp());
            }
        }
        if hi >= start {
            if integrable {
                if let Some(tail) = (p.ln_tail)(hi) {
                    if total > f64::NEG_INFINITY && tail - total <= (0.1 * cfg.rel_tol).ln() {
                        return Ok(TiltedIntegral::Finite {
                            ln_value: total,
                            rel_error: weighted_err + (tail - total).exp(),
                            diagnostics: diag,
                        });
                    }
                }
            }
            match prev {
                Some(pv) if r.ln_value >= pv && r.ln_value > f64::NEG_INFINITY => nondecay += 1,
                _ => nondecay = 0,
            }
            if nondecay >= DIVERGENCE_SHELLS {
                return Ok(TiltedIntegral::Divergent { diagnostics: diag });
            }
        }
        if total == f64::NEG_INFINITY && hi >= start && k > 8 {
            // Identically zero integrand.
            return Ok(TiltedIntegral::Finite {
                ln_value: total,
                rel_error: 0.0,
                diagnostics: diag,
            });
        }
        prev = Some(r.ln_value);
    }
    Ok(TiltedIntegral::Undetermined { diagnostics: diag })
}

fn partial_sum(p: &ShellProblem<'_>, shells: usize, cfg: &QuadratureConfig) -> Result<f64> {
    let mut total = f64::NEG_INFINITY;
    for k in 0..shells {
        let (lo, hi) = shell_edges(k);
        total = log_add(total, ln_integrate(&p.ln_h, lo, hi, &p.breaks, cfg)?.ln_value);
    }
    Ok(total)
}

/// `ln` of a bound on `∫_R^∞ r^{N-1} v(r) e^{|w| r} dr` (the angular factor
/// bounded by the sphere area, added by the caller).
fn radial_tail_bound(m: &Modifier, nf: f64, wn: f64, r: f64) -> Option<f64> {
    let power_tail = |alpha: f64| {
        if alpha > nf {
            Some((nf - alpha) * r.ln() - (alpha - nf).ln())
        } else {
            None
        }
    };
    let exp_tail = |lam: f64| {
        if lam > 0.0 {
            // ∫_R^∞ r^{N-1} e^{-λr} dr = Γ(N) Q(N, λR) / λ^N
            let q = reg_upper_gamma(nf, lam * r);
            if q > 0.0 {
                Some(ln_gamma(nf) + q.ln() - nf * lam.ln())
            } else {
                Some(-lam * r + (nf - 1.0) * r.ln())
            }
        } else {
            None
        }
    };
    match *m {
        Modifier::One => None,
        Modifier::PowerDecay { alpha } => {
            if wn == 0.0 {
                power_tail(alpha)
            } else {
                None
            }
        }
        Modifier::ExpDecay { gamma } => exp_tail(gamma - wn),
        Modifier::ExpPowerDecay { gamma, alpha } => match (exp_tail(gamma - wn), if wn <= gamma { power_tail(alpha) } else { None }) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        },
        Modifier::StretchedExpDecay { gamma, alpha } => {
            // Beyond R* the tilt is absorbed by half of the decay.
            let r_star = (2.0 * wn / gamma).powf(1.0 / (alpha - 1.0));
            if r < r_star {
                return None;
            }
            let c = 0.5 * gamma;
            let s = nf / alpha;
            let q = reg_upper_gamma(s, c * r.powf(alpha));
            if q > 0.0 {
                Some(-alpha.ln() - s * c.ln() + ln_gamma(s) + q.ln())
            } else {
                Some(-c * r.powf(alpha) + nf * r.ln())
            }
        }
        Modifier::ProductWindow { .. } => None,
    }
}

/// `ln ∫_{|u'| < 1} e^{⟨w', u'⟩} du'` over the unit ball of ℝ^{N-1}.
fn ln_cross_section(dim: usize, wp: f64, cfg: &QuadratureConfig) -> Result<f64> {
    match dim {
        1 => Ok(0.0),
        2 => {
            if wp < 1e-8 {
                Ok(2f64.ln() + wp * wp / 6.0)
            } else {
                // 2 sinh(w)/w
                Ok(wp + (-(-2.0 * wp).exp_m1()).ln() - wp.ln())
            }
        }
        3 => {
            let r = ln_integrate(
                |s| {
                    if s <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    let ang = angular_factor_scaled(2, wp * s).expect("dimension 2");
                    s.ln() + wp * s + ang.ln()
                },
                0.0,
                1.0,
                &[],
                cfg,
            )?;
            Ok(r.ln_value)
        }
        _ if wp == 0.0 => Ok(ball_volume(dim - 1).ln()),
        _ => Err(HgError::DimensionUnsupported {
            dim,
            what: "window cross-section integral".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_value(r: TiltedIntegral) -> f64 {
        match r {
            TiltedIntegral::Finite { ln_value, .. } => ln_value.exp(),
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn exp_decay_integrals() {
        let cfg = QuadratureConfig::default();
        let m = Modifier::ExpDecay { gamma: 1.0 };
        // ∫ e^{wu - |u|} du = 2/(1 - w²) on the line.
        for w in [0.0, 0.5, -0.9] {
            let v = finite_value(tilted_integral(&m, 1, &[w], &cfg).unwrap());
            assert!((v - 2.0 / (1.0 - w * w)).abs() < 1e-8 * v, "w={w}: {v}");
        }
        assert!(matches!(
            tilted_integral(&m, 1, &[1.05], &cfg).unwrap(),
            TiltedIntegral::Divergent { .. }
        ));
        // ∫_{ℝ³} e^{-|u|} du = 8π.
        let v = finite_value(tilted_integral(&m, 3, &[0.0, 0.0, 0.0], &cfg).unwrap());
        assert!((v - 8.0 * std::f64::consts::PI).abs() < 1e-7);
    }

    #[test]
    fn power_decay_only_at_zero_tilt() {
        let cfg = QuadratureConfig::default();
        let m = Modifier::PowerDecay { alpha: 2.0 };
        let v = finite_value(tilted_integral(&m, 1, &[0.0], &cfg).unwrap());
        assert!((v - std::f64::consts::PI).abs() < 1e-7);
        assert!(matches!(
            tilted_integral(&m, 1, &[0.05], &cfg).unwrap(),
            TiltedIntegral::Divergent { .. }
        ));
    }

    #[test]
    fn boundary_band_uses_family_rule() {
        let cfg = QuadratureConfig::default();
        let closed = Modifier::ExpPowerDecay { gamma: 1.0, alpha: 2.0 };
        let r = tilted_integral(&closed, 1, &[1.0], &cfg).unwrap();
        assert!(r.diagnostics().analytic);
        // ∫ e^{u-|u|}/(1+u²) = π/2 + ∫_0^∞ e^{-2u}/(1+u²) du.
        let v = finite_value(r);
        assert!(v > std::f64::consts::FRAC_PI_2 && v < std::f64::consts::PI);
        let open = Modifier::ExpDecay { gamma: 1.0 };
        assert!(matches!(
            tilted_integral(&open, 1, &[1.0], &cfg).unwrap(),
            TiltedIntegral::Divergent { .. }
        ));
    }

    #[test]
    fn stretched_decay_is_always_finite() {
        let cfg = QuadratureConfig::default();
        let m = Modifier::StretchedExpDecay { gamma: 1.0, alpha: 1.5 };
        for w in [0.0, 1.0, 3.0] {
            assert!(matches!(
                tilted_integral(&m, 1, &[w], &cfg).unwrap(),
                TiltedIntegral::Finite { .. }
            ));
        }
    }

    #[test]
    fn window_integrals() {
        let cfg = QuadratureConfig::default();
        let strict = Modifier::ProductWindow { n: vec![1.0, 0.0], eta0: 0.5, phi: false };
        // ∫_0^∞ e^{-(η₀-κ)s} ds · ∫_{-1}^{1} du' = 2/(η₀-κ)
        let v = finite_value(tilted_integral(&strict, 2, &[0.25, 0.0], &cfg).unwrap());
        assert!((v - 8.0).abs() < 1e-7);
        assert!(matches!(
            tilted_integral(&strict, 2, &[0.5, 0.0], &cfg).unwrap(),
            TiltedIntegral::Divergent { .. }
        ));
        let closed = Modifier::ProductWindow { n: vec![1.0, 0.0], eta0: 0.5, phi: true };
        // At the boundary: π/2 · 2.
        let v = finite_value(tilted_integral(&closed, 2, &[0.5, 0.0], &cfg).unwrap());
        assert!((v - std::f64::consts::PI).abs() < 1e-6);
    }
}
