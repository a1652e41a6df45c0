//! Direct quadrature in the data variable `y` over boxes in ℝᴺ, N ≤ 3.
//!
//! This is the general-purpose (and slowest) route: it integrates a weight
//! `e^{ln_w(y)}` times a polynomial against the absolutely continuous part
//! of a measure, with every non-smooth surface of the data fed to the
//! adaptive rule as a breakpoint.

use crate::error::{HgError, Result};
use crate::measures::{Body, Factored};
use crate::quad::{integrate_box, Integral, QuadratureConfig};
use crate::special::{ln_norm_sf, norm_sf};

/// A sphere whose surface is a non-smooth locus of the integrand.
#[derive(Debug, Clone)]
pub(crate) struct Sphere {
    pub center: Vec<f64>,
    pub radius: f64,
}

pub(crate) struct YIntegrand<'a> {
    pub leaves: Vec<(f64, &'a Body)>,
    /// Integrate `|Σ c_i f_i|` instead of `Σ c_i f_i`.
    pub abs: bool,
    pub ln_weight: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub poly: Option<&'a (dyn Fn(&[f64]) -> f64 + Sync)>,
    /// Restriction of the domain beyond the box, with its boundary spheres.
    pub indicator: Option<&'a (dyn Fn(&[f64]) -> bool + Sync)>,
    pub spheres: Vec<Sphere>,
    /// The integrand is scaled by `e^{-ln_ref}`.
    pub ln_ref: f64,
}

pub(crate) fn leaf_spheres(body: &Body, out: &mut Vec<Sphere>) {
    match body {
        Body::AnnulusSum(s) => {
            for t in &s.terms {
                out.push(Sphere { center: s.center.clone(), radius: t.inner() });
                out.push(Sphere { center: s.center.clone(), radius: t.outer() });
            }
        }
        Body::Restricted(r) => {
            out.push(Sphere { center: r.center.clone(), radius: r.radius });
            for (_, b) in r.inner.leaves() {
                leaf_spheres(b, out);
            }
        }
        Body::Sum { components } => {
            for c in components {
                leaf_spheres(&c.measure.body, out);
            }
        }
        _ => {}
    }
}

pub(crate) fn leaf_line_breaks(body: &Body, axis: usize, prefix: &[f64], out: &mut Vec<f64>) {
    match body {
        Body::ExpQuad(_) | Body::HalfSpacePiece(_) => {
            out.extend(Factored::of(body).expect("factored").line_breaks(axis, prefix));
        }
        Body::Grid(g) => out.extend(g.edges(axis)),
        Body::Restricted(r) => {
            for (_, b) in r.inner.leaves() {
                leaf_line_breaks(b, axis, prefix, out);
            }
        }
        Body::Sum { components } => {
            for c in components {
                leaf_line_breaks(&c.measure.body, axis, prefix, out);
            }
        }
        _ => {}
    }
}

fn sphere_breaks(s: &Sphere, axis: usize, dim: usize, prefix: &[f64], out: &mut Vec<f64>) {
    if axis + 1 < dim {
        out.push(s.center[axis] - s.radius);
        out.push(s.center[axis] + s.radius);
        return;
    }
    let d2: f64 = (0..axis).map(|k| (prefix[k] - s.center[k]).powi(2)).sum();
    let rem = s.radius * s.radius - d2;
    if rem > 0.0 {
        let h = rem.sqrt();
        out.push(s.center[axis] - h);
        out.push(s.center[axis] + h);
    }
}

impl YIntegrand<'_> {
    pub fn value(&self, y: &[f64]) -> f64 {
        if let Some(ind) = self.indicator {
            if !ind(y) {
                return 0.0;
            }
        }
        let lw = (self.ln_weight)(y) - self.ln_ref;
        if lw == f64::NEG_INFINITY {
            return 0.0;
        }
        let mut s = 0.0;
        for (c, b) in &self.leaves {
            let (sg, l) = crate::measures::ln_density(b, y);
            if l > f64::NEG_INFINITY {
                s += c * sg * (l + lw).exp();
            }
        }
        if self.abs {
            s = s.abs();
        }
        match self.poly {
            Some(p) if s != 0.0 => s * p(y),
            _ => s,
        }
    }

    /// Integrates over the box `[lo, hi]`.
    pub fn integrate(&self, lo: &[f64], hi: &[f64], cfg: &QuadratureConfig) -> Result<Integral> {
        let dim = lo.len();
        if lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
            return Ok(Integral::ZERO);
        }
        let mut spheres = self.spheres.clone();
        for (_, b) in &self.leaves {
            leaf_spheres(b, &mut spheres);
        }
        let breaks = |axis: usize, prefix: &[f64]| {
            let mut out = Vec::new();
            for (_, b) in &self.leaves {
                leaf_line_breaks(b, axis, prefix, &mut out);
            }
            for s in &spheres {
                sphere_breaks(s, axis, dim, prefix, &mut out);
            }
            out.retain(|p| *p > lo[axis] && *p < hi[axis]);
            out
        };
        integrate_box(&|y: &[f64]| self.value(y), lo, hi, &breaks, cfg)
    }
}

/// Result of an integral carried as `e^{ln_scale} · value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ScaledIntegral {
    pub ln_scale: f64,
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

impl ScaledIntegral {
    pub fn unscaled(&self) -> (f64, f64) {
        let s = self.ln_scale.exp();
        (self.value * s, self.error * s)
    }
}

/// Where one leaf's mass under the Gaussian weight sits.
enum Frame {
    /// Weighted density `≤ e^{ln_ref} e^{-p|y-m|²}`.
    Gauss { m: Vec<f64>, sigma: f64, ln_ref: f64, ln_mass: f64 },
    /// Bounded support with `|weighted density| ≤ e^{ln_ref}`.
    Compact { lo: Vec<f64>, hi: Vec<f64>, ln_ref: f64 },
}

impl Frame {
    fn ln_ref(&self) -> f64 {
        match self {
            Frame::Gauss { ln_ref, .. } | Frame::Compact { ln_ref, .. } => *ln_ref,
        }
    }
}

fn dist2_to_box(x: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (l, h))| {
            let d = if v < l { l - v } else if v > h { v - h } else { 0.0 };
            d * d
        })
        .sum()
}

/// Largest `ln|f|` seen on a coarse lattice of the box, one unit of slack added.
pub(crate) fn sampled_sup(body: &Body, lo: &[f64], hi: &[f64]) -> f64 {
    const PER_AXIS: usize = 9;
    let dim = lo.len();
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; dim];
    let mut y = vec![0.0; dim];
    loop {
        for k in 0..dim {
            y[k] = lo[k] + (hi[k] - lo[k]) * (idx[k] as f64 + 0.5) / PER_AXIS as f64;
        }
        best = best.max(crate::measures::ln_density(body, &y).1);
        let mut k = 0;
        while k < dim {
            idx[k] += 1;
            if idx[k] < PER_AXIS {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == dim {
            break;
        }
    }
    if best == f64::NEG_INFINITY {
        0.0
    } else {
        best + 1.0
    }
}

fn collect_frames(coef: f64, body: &Body, q: f64, x: &[f64], out: &mut Vec<Frame>) -> Result<()> {
    if coef == 0.0 {
        return Ok(());
    }
    let lc = coef.abs().ln();
    let dim = x.len();
    match body {
        Body::DiracComb { .. } => {}
        Body::ExpQuad(_) | Body::HalfSpacePiece(_) => {
            let f = Factored::of(body).expect("factored");
            let p = q - f.a;
            if !(p > 0.0) {
                return Err(HgError::IndexTooSmall { eps: q, eps0: f.a });
            }
            // e^{-q|y-x|² + A|y|² + β·y} = e^{p|m|² - q|x|²} e^{-p|y-m|²}
            let m: Vec<f64> = x.iter().zip(&f.beta).map(|(x, b)| (2.0 * q * x + b) / (2.0 * p)).collect();
            let mm: f64 = m.iter().map(|v| v * v).sum();
            let xx: f64 = x.iter().map(|v| v * v).sum();
            let ln_ref = lc + p * mm - q * xx;
            out.push(Frame::Gauss {
                sigma: (0.5 / p).sqrt(),
                ln_mass: ln_ref + 0.5 * dim as f64 * (std::f64::consts::PI / p).ln(),
                m,
                ln_ref,
            });
        }
        Body::AnnulusSum(_) | Body::Grid(_) => {
            let m = crate::measures::Measure { dimension: dim, body: body.clone() };
            let (lo, hi) = m.support_box().expect("compact family");
            if lo.iter().zip(&hi).any(|(l, h)| l > h) {
                return Ok(());
            }
            let sup = match body {
                Body::AnnulusSum(s) => s.terms.iter().map(|t| t.b).sum::<f64>(),
                Body::Grid(g) => g.samples.iter().fold(0.0f64, |a, s| a.max(s.abs())),
                _ => unreachable!(),
            };
            if sup > 0.0 {
                let ln_ref = lc + sup.ln() - q * dist2_to_box(x, &lo, &hi);
                out.push(Frame::Compact { lo, hi, ln_ref });
            }
        }
        Body::Restricted(r) => {
            if r.outside {
                for (c, b) in r.inner.leaves() {
                    collect_frames(coef * c, b, q, x, out)?;
                }
            } else {
                let lo: Vec<f64> = r.center.iter().map(|c| c - r.radius).collect();
                let hi: Vec<f64> = r.center.iter().map(|c| c + r.radius).collect();
                let ln_ref = lc + sampled_sup(body, &lo, &hi) - q * dist2_to_box(x, &lo, &hi);
                out.push(Frame::Compact { lo, hi, ln_ref });
            }
        }
        Body::Sum { components } => {
            for c in components {
                collect_frames(coef * c.coefficient, &c.measure.body, q, x, out)?;
            }
        }
    }
    Ok(())
}

/// `∫ e^{-q|y-x|²} P(y) f(y) dy` over ℝᴺ for the absolutely continuous
/// leaves (atoms are the caller's job), with `|Σ c_i f_i|` when `abs`.
///
/// The box is the union of the leaves' exact completed-square frames; it
/// is widened until the Gaussian tail bound is below a tenth of the
/// target. With a polynomial factor three extra standard deviations are
/// added to absorb its growth.
pub(crate) fn gaussian_weighted(
    leaves: &[(f64, &Body)],
    abs: bool,
    q: f64,
    x: &[f64],
    poly: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
    cfg: &QuadratureConfig,
) -> Result<ScaledIntegral> {
    let dim = x.len();
    let mut frames = Vec::new();
    for (c, b) in leaves {
        collect_frames(*c, b, q, x, &mut frames)?;
    }
    if frames.is_empty() {
        return Ok(ScaledIntegral { ln_scale: 0.0, value: 0.0, error: 0.0, evals: 0 });
    }
    let ln_ref = frames.iter().map(Frame::ln_ref).fold(f64::NEG_INFINITY, f64::max);
    let ac: Vec<(f64, &Body)> = leaves.iter().filter(|(_, b)| !matches!(b, Body::DiracComb { .. })).copied().collect();
    let lnw = move |y: &[f64]| -> f64 {
        let d2: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        -q * d2
    };
    let it = YIntegrand {
        leaves: ac,
        abs,
        ln_weight: &lnw,
        poly,
        indicator: None,
        spheres: Vec::new(),
        ln_ref,
    };
    let extra = if poly.is_some() { 3.0 } else { 0.0 };
    let mut z = 8.5;
    let mut evals = 0;
    for _ in 0..4 {
        let zz = (z + extra) * cfg.tail_safety;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut tail = 0.0;
        for f in &frames {
            match f {
                Frame::Gauss { m, sigma, ln_mass, .. } => {
                    for k in 0..dim {
                        lo[k] = lo[k].min(m[k] - zz * sigma);
                        hi[k] = hi[k].max(m[k] + zz * sigma);
                    }
                    tail += (ln_mass - ln_ref).exp() * 2.0 * dim as f64 * norm_sf(z * cfg.tail_safety);
                }
                Frame::Compact { lo: l, hi: h, .. } => {
                    for k in 0..dim {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(h[k]);
                    }
                }
            }
        }
        let r = it.integrate(&lo, &hi, cfg)?;
        evals += r.evals;
        let target = (cfg.rel_tol * r.value.abs()).max(cfg.abs_tol * (-ln_ref).exp());
        if tail <= 0.1 * target {
            return Ok(ScaledIntegral {
                ln_scale: ln_ref,
                value: r.value,
                error: r.error + tail,
                evals,
            });
        }
        // Solve 2N·M·P(Z > z·safety) = target/10 for the new z.
        let need = (0.1 * target / tail).ln() + ln_norm_sf(z * cfg.tail_safety);
        let (mut a, mut b) = (z * cfg.tail_safety, 60.0);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if ln_norm_sf(mid) > need {
                a = mid;
            } else {
                b = mid;
            }
        }
        let next = b / cfg.tail_safety + 0.25;
        if next <= z || next > 60.0 {
            break;
        }
        z = next;
    }
    Err(HgError::QuadratureFailure(format!(
        "Gaussian tail could not be closed at q = {q}"
    )))
}
