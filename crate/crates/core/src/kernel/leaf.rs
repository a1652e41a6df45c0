//! Heat-kernel integrals of single leaves.
//!
//! Growth leaves `e^{A|y|² + β·y} v(s(y - c))` are rewritten with the
//! completed square: for `q = 1/(4t)` and `p = q - A`,
//! `u(x, t) = (q/p)^{N/2} e^{p|m|² - q|x|²} E[v(s(Y - c))]`, where
//! `Y ~ N(m, I/(2p))` and `m = (2qx + β)/(2p)`. Radial profiles then need
//! a single radial integral; the window profile factors along its normal.

use std::f64::consts::PI;

use crate::error::{HgError, Result};
use crate::measures::{Body, Factored, Modifier, Restricted};
use crate::quad::{ln_integrate, LnIntegral, QuadratureConfig};
use crate::special::{
    angular_factor_scaled, gamma_interval, i0e, ln_norm_sf, norm_interval, reg_lower_gamma,
};
use crate::yspace::gaussian_weighted;

use super::jet::{JetSpace, KernelPoly};
use super::Method;

const EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LeafValue {
    pub value: f64,
    pub error: f64,
    pub method: Method,
    pub nodes: usize,
}

impl LeafValue {
    fn closed(value: f64, error: f64) -> LeafValue {
        LeafValue { value, error, method: Method::ClosedForm, nodes: 0 }
    }

    fn zero() -> LeafValue {
        LeafValue::closed(0.0, 0.0)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K(w, t) = (4πt)^{-N/2} e^{-|w|²/4t}`
pub(crate) fn heat_kernel(w2: f64, dim: usize, t: f64) -> f64 {
    (-(0.5 * dim as f64) * (4.0 * PI * t).ln() - w2 / (4.0 * t)).exp()
}

/// `ln E[g(|Z|)] + δ²/2` for `Z ~ N(μ, τ²I)` with `|μ| = δτ`, restricted to
/// `ρ = |Z|/τ ∈ [lo, hi]`; `ln_g` takes `|Z|`. The `δ²/2` is left for the
/// caller to cancel analytically, since it can dwarf the result.
fn ln_radial_expectation(
    dim: usize,
    ln_g: &dyn Fn(f64) -> f64,
    tau: f64,
    delta: f64,
    lo: f64,
    hi: f64,
    cfg: &QuadratureConfig,
) -> Result<LnIntegral> {
    if dim > 3 && delta > 0.0 {
        return Err(HgError::DimensionUnsupported {
            dim,
            what: "off-center evaluation".into(),
        });
    }
    let nf = dim as f64;
    let norm = 0.5 * nf * (2.0 * PI).ln();
    let ln_h = |rho: f64| {
        if rho <= 0.0 && dim > 1 {
            return f64::NEG_INFINITY;
        }
        let ang = angular_factor_scaled(dim, rho * delta).expect("dimension checked");
        ln_g(tau * rho) + (nf - 1.0) * rho.max(f64::MIN_POSITIVE).ln() + rho * (delta - 0.5 * rho) + ang.ln() - norm
    };
    let hi = hi.min(delta + 40.0 + nf.sqrt());
    if hi <= lo {
        return Ok(LnIntegral { ln_value: f64::NEG_INFINITY, rel_error: 0.0, evals: 0 });
    }
    ln_integrate(ln_h, lo, hi, &[], cfg)
}

/// `P(|Z'| < 1)` for `Z' ~ N(μ', τ² I_{N-1})`.
fn cross_section_probability(dim: usize, mu_p: &[f64], tau: f64, cfg: &QuadratureConfig) -> Result<(f64, f64, usize)> {
    let d = mu_p.iter().map(|v| v * v).sum::<f64>().sqrt();
    match dim {
        1 => Ok((1.0, 0.0, 0)),
        2 => {
            // The orthogonal complement is a line; its coordinate is ±d.
            Ok((norm_interval((-1.0 - d) / tau, (1.0 - d) / tau), 0.0, 0))
        }
        _ if d == 0.0 => {
            let k = 0.5 * (dim - 1) as f64;
            Ok((reg_lower_gamma(k, 0.5 / (tau * tau)), 0.0, 0))
        }
        3 => {
            let delta = d / tau;
            let r = ln_integrate(
                |rho: f64| {
                    if rho <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    rho.ln() - 0.5 * (rho - delta).powi(2) + i0e(rho * delta).ln()
                },
                0.0,
                1.0 / tau,
                &[],
                cfg,
            )?;
            Ok((r.ln_value.exp(), r.rel_error, r.evals))
        }
        _ => Err(HgError::DimensionUnsupported {
            dim,
            what: "window cross-section probability".into(),
        }),
    }
}

/// Value of a growth leaf through its Gaussian frame.
/// `ln u` of a growth leaf, carried in a [`LeafValue`] whose `value` is
/// the logarithm and `error` the relative error.
fn factored_ln(f: &Factored, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<LeafValue> {
    let dim = x.len();
    let nf = dim as f64;
    let q = 0.25 / t;
    let p = q - f.a;
    if !(p > 0.0) {
        return Err(HgError::BeyondMaximalTime { t, t_max: 0.25 / f.a });
    }
    let m: Vec<f64> = x.iter().zip(&f.beta).map(|(x, b)| (2.0 * q * x + b) / (2.0 * p)).collect();
    let mm: f64 = m.iter().map(|v| v * v).sum();
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let ln_pref = 0.5 * nf * (q / p).ln() + p * mm - q * xx;
    // p|m|² - δ²/2 with δ² = 2p|m - c|², expanded so nothing cancels.
    let cc: f64 = f.center.iter().map(|v| v * v).sum();
    let two_qx_beta: Vec<f64> = x.iter().zip(&f.beta).map(|(x, b)| 2.0 * q * x + b).collect();
    let ln_pref_centered = 0.5 * nf * (q / p).ln() + dot(&two_qx_beta, &f.center) - p * cc - q * xx;
    let sigma = (0.5 / p).sqrt();
    let tau = f.scale * sigma;
    let mu_z: Vec<f64> = m.iter().zip(&f.center).map(|(m, c)| f.scale * (m - c)).collect();
    let (ln_e, rel, nodes, method) = match &f.profile {
        Modifier::One => {
            let bb: f64 = f.beta.iter().map(|b| b * b).sum();
            let ln_u = -0.5 * nf * (1.0 - 4.0 * f.a * t).ln() + (f.a * xx + dot(&f.beta, x) + t * bb) / (1.0 - 4.0 * f.a * t);
            return Ok(LeafValue::closed(ln_u, 8.0 * EPS * (1.0 + ln_u.abs())));
        }
        Modifier::ProductWindow { n, eta0, phi } => {
            let mu1 = dot(&mu_z, n);
            let mu_p: Vec<f64> = mu_z.iter().zip(n).map(|(z, n)| z - mu1 * n).collect();
            let (e2, rel2, nodes2) = cross_section_probability(dim, &mu_p, tau, cfg)?;
            let shifted = mu1 - eta0 * tau * tau;
            if !phi {
                let ln_e1 = -eta0 * mu1 + 0.5 * eta0 * eta0 * tau * tau + ln_norm_sf(-shifted / tau);
                let method = if nodes2 == 0 { Method::ClosedForm } else { Method::RadialQuadrature };
                (ln_e1 + e2.ln(), rel2, nodes2, method)
            } else {
                let norm = (tau * (2.0 * PI).sqrt()).ln();
                let (eta0, tau2) = (*eta0, tau * tau);
                let r = ln_integrate(
                    |s: f64| {
                        if s <= 0.0 {
                            return f64::NEG_INFINITY;
                        }
                        -(s * s).ln_1p() - eta0 * s - (s - mu1).powi(2) / (2.0 * tau2) - norm
                    },
                    0.0,
                    shifted.max(0.0) + 40.0 * tau,
                    &[],
                    cfg,
                )?;
                (r.ln_value + e2.ln(), r.rel_error + rel2, r.evals + nodes2, Method::RadialQuadrature)
            }
        }
        radial => {
            let delta = mu_z.iter().map(|v| v * v).sum::<f64>().sqrt() / tau;
            let ln_g = |r: f64| radial.ln_radial(r);
            let r = ln_radial_expectation(dim, &ln_g, tau, delta, 0.0, f64::INFINITY, cfg)?;
            let ln_u = ln_pref_centered + r.ln_value;
            return Ok(LeafValue {
                value: ln_u,
                error: r.rel_error + 8.0 * EPS * (1.0 + ln_pref_centered.abs() + r.ln_value.abs()),
                method: Method::RadialQuadrature,
                nodes: r.evals,
            });
        }
    };
    let ln_u = ln_pref + ln_e;
    // Rounding follows the cancelling terms, not their sum.
    Ok(LeafValue {
        value: ln_u,
        error: rel + 8.0 * EPS * (1.0 + ln_pref.abs() + ln_e.abs()),
        method,
        nodes,
    })
}

fn factored_value(f: &Factored, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<LeafValue> {
    let l = factored_ln(f, x, t, cfg)?;
    let v = l.value.exp();
    finite(LeafValue { value: v, error: v * l.error, ..l })
}

/// `(sign, ln|u|, relative error)` of a leaf; growth leaves stay in log
/// space so that values beyond the floating-point range are usable.
pub(crate) fn leaf_ln_value(dim: usize, body: &Body, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<(f64, f64, f64)> {
    match body {
        Body::ExpQuad(_) | Body::HalfSpacePiece(_) => {
            let l = factored_ln(&Factored::of(body).expect("factored"), x, t, cfg)?;
            Ok((1.0, l.value, l.error))
        }
        _ => {
            let v = leaf_value(dim, body, x, t, cfg)?;
            let rel = if v.value != 0.0 { v.error / v.value.abs() } else { 0.0 };
            Ok((v.value.signum(), v.value.abs().ln(), rel))
        }
    }
}

fn finite(v: LeafValue) -> Result<LeafValue> {
    if v.value.is_finite() && v.error.is_finite() {
        Ok(v)
    } else {
        Err(HgError::QuadratureFailure("solution value overflows".into()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn annulus_value(center: &[f64], terms: &[(f64, f64, f64)], x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<LeafValue> {
    let dim = x.len();
    let sigma = (2.0 * t).sqrt();
    let d = dist2(x, center).sqrt();
    let delta = d / sigma;
    let mut out = LeafValue::zero();
    for &(b, inner, outer) in terms {
        if b == 0.0 {
            continue;
        }
        let p = if dim == 1 {
            let u = x[0] - center[0];
            norm_interval((inner - u) / sigma, (outer - u) / sigma) + norm_interval((-outer - u) / sigma, (-inner - u) / sigma)
        } else if d == 0.0 {
            gamma_interval(0.5 * dim as f64, inner * inner / (4.0 * t), outer * outer / (4.0 * t))
        } else {
            let zero = |_: f64| 0.0;
            let r = ln_radial_expectation(dim, &zero, sigma, delta, inner / sigma, outer / sigma, cfg)?;
            out.method = Method::RadialQuadrature;
            out.nodes += r.evals;
            let p = (r.ln_value - 0.5 * delta * delta).exp();
            out.error += b * p * r.rel_error;
            p
        };
        out.value += b * p;
        out.error += 8.0 * EPS * b * p;
    }
    Ok(out)
}

fn grid_axis_probabilities(g: &crate::measures::GridDensity, x: &[f64], t: f64) -> Vec<Vec<f64>> {
    let sigma = (2.0 * t).sqrt();
    (0..x.len())
        .map(|k| {
            g.edges(k)
                .windows(2)
                .map(|w| norm_interval((w[0] - x[k]) / sigma, (w[1] - x[k]) / sigma))
                .collect()
        })
        .collect()
}

/// Rewrites a restriction whose effect is a parameter change.
fn simplify_restricted(dim: usize, r: &Restricted) -> Option<Vec<(f64, Body)>> {
    let inner = &r.inner;
    if let Some((lo, hi)) = inner.support_box() {
        // Farthest corner of the support box from the ball center.
        let far: f64 = (0..dim)
            .map(|k| (lo[k] - r.center[k]).abs().max((hi[k] - r.center[k]).abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        let near2: f64 = (0..dim)
            .map(|k| {
                let c = r.center[k];
                if c < lo[k] {
                    (lo[k] - c).powi(2)
                } else if c > hi[k] {
                    (c - hi[k]).powi(2)
                } else {
                    0.0
                }
            })
            .sum();
        let all_inside = far < r.radius;
        let all_outside = near2 >= r.radius * r.radius;
        if all_inside || all_outside {
            let keep = all_inside != r.outside;
            return Some(if keep {
                inner.leaves().into_iter().map(|(c, b)| (c, b.clone())).collect()
            } else {
                Vec::new()
            });
        }
    }
    let leaves = inner.leaves();
    if let [(c, Body::AnnulusSum(s))] = leaves.as_slice() {
        if s.center == r.center && *c >= 0.0 {
            let mut s = s.clone();
            s.terms = s
                .terms
                .iter()
                .filter_map(|t| {
                    let (a, b) = if r.outside {
                        (t.inner().max(r.radius), t.outer())
                    } else {
                        (t.inner(), t.outer().min(r.radius))
                    };
                    (b > a).then(|| crate::measures::AnnulusTerm::from_radii(c * t.b, a, b))
                })
                .collect();
            return Some(vec![(1.0, Body::AnnulusSum(s))]);
        }
    }
    None
}

fn annulus_terms(s: &crate::measures::AnnulusSum) -> Vec<(f64, f64, f64)> {
    s.terms.iter().map(|t| (t.b, t.inner(), t.outer())).collect()
}

pub(crate) fn leaf_value(dim: usize, body: &Body, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<LeafValue> {
    match body {
        Body::DiracComb { atoms } => {
            let mut v = 0.0;
            let mut a = 0.0;
            for at in atoms {
                let k = at.weight * heat_kernel(dist2(x, &at.location), dim, t);
                v += k;
                a += k.abs();
            }
            Ok(LeafValue::closed(v, 8.0 * EPS * a))
        }
        Body::ExpQuad(_) | Body::HalfSpacePiece(_) => factored_value(&Factored::of(body).expect("factored"), x, t, cfg),
        Body::AnnulusSum(s) => annulus_value(&s.center, &annulus_terms(s), x, t, cfg),
        Body::Grid(g) => {
            let p = grid_axis_probabilities(g, x, t);
            Ok(LeafValue::closed(g.contract(&p, false), 16.0 * EPS * g.contract(&p, true)))
        }
        Body::Restricted(r) => match simplify_restricted(dim, r) {
            Some(parts) => {
                let mut out = LeafValue::zero();
                for (c, b) in &parts {
                    let v = leaf_value(dim, b, x, t, cfg)?;
                    out = combine(out, *c, v);
                }
                Ok(out)
            }
            None => leaf_full_quadrature(dim, body, x, t, None, cfg),
        },
        Body::Sum { components } => {
            let mut out = LeafValue::zero();
            for c in components {
                let v = leaf_value(dim, &c.measure.body, x, t, cfg)?;
                out = combine(out, c.coefficient, v);
            }
            Ok(out)
        }
    }
}

pub(crate) fn combine(acc: LeafValue, c: f64, v: LeafValue) -> LeafValue {
    if c == 0.0 {
        return acc;
    }
    LeafValue {
        value: acc.value + c * v.value,
        error: acc.error + c.abs() * v.error,
        method: acc.method.max(v.method),
        nodes: acc.nodes + v.nodes,
    }
}

/// The kernel integral evaluated directly in `y`, optionally against the
/// derivative polynomial of the kernel.
pub(crate) fn leaf_full_quadrature(
    dim: usize,
    body: &Body,
    x: &[f64],
    t: f64,
    poly: Option<&KernelPoly>,
    cfg: &QuadratureConfig,
) -> Result<LeafValue> {
    let q = 0.25 / t;
    let m = crate::measures::Measure { dimension: dim, body: body.clone() };
    let mut out = LeafValue { value: 0.0, error: 0.0, method: Method::FullQuadrature, nodes: 0 };
    for a in m.atoms() {
        let w: Vec<f64> = x.iter().zip(&a.location).map(|(x, z)| x - z).collect();
        let k = a.weight * heat_kernel(dist2(x, &a.location), dim, t);
        let pv = poly.map_or(1.0, |p| p.eval(&w, t));
        out.value += k * pv;
        out.error += 8.0 * EPS * (k * poly.map_or(1.0, |p| p.eval_abs(&w, t))).abs();
    }
    let pf = move |y: &[f64]| -> f64 {
        let w: Vec<f64> = x.iter().zip(y).map(|(x, y)| x - y).collect();
        poly.expect("set").eval(&w, t)
    };
    let pref: Option<&(dyn Fn(&[f64]) -> f64 + Sync)> = if poly.is_some() { Some(&pf) } else { None };
    let r = gaussian_weighted(&[(1.0, body)], false, q, x, pref, cfg).map_err(|e| match e {
        HgError::IndexTooSmall { eps0, .. } => HgError::BeyondMaximalTime { t, t_max: 0.25 / eps0 },
        other => other,
    })?;
    let norm = 0.5 * dim as f64 * (q / PI).ln();
    let s = (r.ln_scale + norm).exp();
    out.value += r.value * s;
    out.error += r.error * s;
    out.nodes += r.evals;
    finite(out)
}

/// `∂^a_x P(e_i < Y < e_{i+1})` for `Y ~ N(x, σ²)`, per cell.
fn grid_axis_derivative(edges: &[f64], x: f64, sigma: f64, a: usize) -> Vec<f64> {
    if a == 0 {
        return edges.windows(2).map(|w| norm_interval((w[0] - x) / sigma, (w[1] - x) / sigma)).collect();
    }
    // ∂_x^a Φ((e - x)/σ) = -σ^{-a} He_{a-1}(u) φ(u)
    let g = |e: f64| {
        let u = (e - x) / sigma;
        let he = match a {
            1 => 1.0,
            2 => u,
            3 => u * u - 1.0,
            4 => u * u * u - 3.0 * u,
            _ => unreachable!("order checked"),
        };
        -sigma.powi(-(a as i32)) * he * (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
    };
    let vals: Vec<f64> = edges.iter().map(|e| g(*e)).collect();
    vals.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Multi-indices `β` with `|β| = m` and their multinomial coefficients.
fn multinomials(dim: usize, m: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == dim {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(dim, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, m, &mut Vec::new(), &mut out);
    let fact = crate::special::factorial;
    out.into_iter()
        .map(|b| {
            let c = fact(m) / b.iter().map(|v| fact(*v)).product::<f64>();
            (b, c)
        })
        .collect()
}

pub(crate) fn leaf_derivative(
    dim: usize,
    body: &Body,
    x: &[f64],
    t: f64,
    alpha: &[usize],
    m: usize,
    cfg: &QuadratureConfig,
) -> Result<LeafValue> {
    match body {
        Body::DiracComb { atoms } => {
            let poly = KernelPoly::new(dim, alpha, m);
            let mut v = 0.0;
            let mut a = 0.0;
            for at in atoms {
                let w: Vec<f64> = x.iter().zip(&at.location).map(|(x, z)| x - z).collect();
                let k = at.weight * heat_kernel(dist2(x, &at.location), dim, t);
                v += k * poly.eval(&w, t);
                a += (k * poly.eval_abs(&w, t)).abs();
            }
            Ok(LeafValue::closed(v, 16.0 * EPS * a))
        }
        Body::ExpQuad(e) if e.modifier == Modifier::One => {
            let f = Factored::of(body).expect("factored");
            if 4.0 * f.a * t >= 1.0 {
                return Err(HgError::BeyondMaximalTime { t, t_max: 0.25 / f.a });
            }
            let order = alpha.iter().sum::<usize>() + m;
            let sp = JetSpace::new(dim + 1, order.max(1));
            let tj = sp.var(dim, t);
            // u = exp(-(N/2) ln(1 - 4At) + (A|x|² + b·x + t|b|²)/(1 - 4At))
            let mut num = tj.scale(dot(&f.beta, &f.beta));
            for k in 0..dim {
                let xk = sp.var(k, x[k]);
                num = num.add(&xk.mul(&xk).scale(f.a)).add(&xk.scale(f.beta[k]));
            }
            let den = tj.scale(-4.0 * f.a).add_const(1.0);
            let ln_u = den.ln().scale(-0.5 * dim as f64).add(&num.mul(&den.recip()));
            let u = ln_u.exp();
            let mut e: Vec<u8> = alpha.iter().map(|v| *v as u8).collect();
            e.push(m as u8);
            let v = u.derivative(&e);
            let scale = u.c[0].abs() * (1.0 + ln_u.c[0].abs());
            finite(LeafValue::closed(v, 64.0 * EPS * v.abs().max(EPS * scale)))
        }
        Body::Grid(g) => {
            // ∂_t = Δ on the solution, so ∂_t^m ∂^α = Σ_{|β|=m} (m; β) ∂^{α+2β}.
            let sigma = (2.0 * t).sqrt();
            let mut out = LeafValue::zero();
            for (beta, c) in multinomials(dim, m) {
                let p: Vec<Vec<f64>> = (0..dim)
                    .map(|k| grid_axis_derivative(&g.edges(k), x[k], sigma, alpha[k] + 2 * beta[k]))
                    .collect();
                out.value += c * g.contract(&p, false);
                out.error += 64.0 * EPS * c * g.contract(&p, true);
            }
            Ok(out)
        }
        Body::Sum { components } => {
            let mut out = LeafValue::zero();
            for c in components {
                out = combine(out, c.coefficient, leaf_derivative(dim, &c.measure.body, x, t, alpha, m, cfg)?);
            }
            Ok(out)
        }
        Body::Restricted(r) => match simplify_restricted(dim, r) {
            Some(parts) => {
                let mut out = LeafValue::zero();
                for (c, b) in &parts {
                    out = combine(out, *c, leaf_derivative(dim, b, x, t, alpha, m, cfg)?);
                }
                Ok(out)
            }
            None => leaf_full_quadrature(dim, body, x, t, Some(&KernelPoly::new(dim, alpha, m)), cfg),
        },
        _ => leaf_full_quadrature(dim, body, x, t, Some(&KernelPoly::new(dim, alpha, m)), cfg),
    }
}
