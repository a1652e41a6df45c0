//! Bounds and residual probes: the sandwich estimate, weighted `L¹` norms
//! of the solution, the semigroup property, the heat equation itself and
//! the `L^q` smoothing estimate.

use std::f64::consts::PI;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{HgError, Result};
use crate::measures::{btv_norm, AnnulusSum, Atom, Body, GridDensity, Measure, Restricted};
use crate::quad::{integrate, integrate_box, ln_integrate, QuadratureConfig};
use crate::special::ln_norm_sf;

use super::{check_window, ln_abs_unchecked, evaluate, evaluate_derivative, evaluate_unchecked, leaf_value};

/// Collects the first error raised inside a closure that cannot return one.
struct ErrorSlot(Mutex<Option<HgError>>);

impl ErrorSlot {
    fn new() -> ErrorSlot {
        ErrorSlot(Mutex::new(None))
    }

    fn put(&self, e: HgError) {
        let mut g = self.0.lock().expect("slot poisoned");
        if g.is_none() {
            *g = Some(e);
        }
    }

    fn check(self) -> Result<()> {
        match self.0.into_inner().expect("slot poisoned") {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// `(b^{N/2} u(0, bt) e^{-|x|²/4(1-b)t}, a^{N/2} u(0, at) e^{|x|²/4(a-1)t})`
/// for nonnegative data.
pub fn sandwich_bounds(mu: &Measure, x: &[f64], t: f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    if !mu.is_nonnegative() {
        return Err(HgError::SignedDataUnsupported);
    }
    if !(a > 1.0 && b > 0.0 && b < 1.0) {
        return Err(HgError::InvalidSpec(format!("sandwich needs a > 1 and 0 < b < 1, got a = {a}, b = {b}")));
    }
    if x.len() != mu.dimension {
        return Err(HgError::DimensionMismatch { left: x.len(), right: mu.dimension });
    }
    let nh = 0.5 * mu.dimension as f64;
    let origin = vec![0.0; mu.dimension];
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let hi = evaluate(mu, &origin, a * t, cfg)?.value;
    let lo = evaluate(mu, &origin, b * t, cfg)?.value;
    Ok((
        b.powf(nh) * lo * (-xx / (4.0 * (1.0 - b) * t)).exp(),
        a.powf(nh) * hi * (xx / (4.0 * (a - 1.0) * t)).exp(),
    ))
}

/// Points of a `k^N` lattice over `[-l, l]^N` plus the box corners.
fn lattice(dim: usize, l: f64, k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        out.push(idx.iter().map(|&i| -l + 2.0 * l * i as f64 / (k - 1) as f64).collect());
        let mut a = 0;
        while a < dim {
            idx[a] += 1;
            if idx[a] < k {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == dim {
            return out;
        }
    }
}

/// `‖u(t)‖_{L¹_δ} = (δ/π)^{N/2} ∫ e^{-δ|x|²} |u(x, t)| dx` by iterated
/// quadrature, `N ≤ 2`.
///
/// The domain `[-L, L]^N` is doubled until `ln(e^{-δ|x|²}|u|)` on its
/// boundary lies 60 below the largest sampled value.
pub fn l1eps_norm_of_solution(mu: &Measure, t: f64, delta: f64, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    check_window(mu, t)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(HgError::InvalidSpec(format!("delta must be positive, got {delta}")));
    }
    let dim = mu.dimension;
    if dim > 2 {
        return Err(HgError::DimensionUnsupported { dim, what: "weighted L1 norm of the solution".into() });
    }
    let inner = cfg.tightened(0.01);
    let ln_h = |x: &[f64]| -> Result<f64> {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        Ok(ln_abs_unchecked(mu, x, t, &inner)? - delta * xx)
    };
    let reach = mu
        .support_box()
        .map(|(lo, hi)| lo.iter().chain(&hi).fold(0.0f64, |a, v| a.max(v.abs())))
        .unwrap_or(0.0);
    let mut l = reach + 6.0 * t.sqrt() + 2.0 / delta.sqrt();
    let mut peak = f64::NEG_INFINITY;
    let mut closed = false;
    for _ in 0..12 {
        peak = f64::NEG_INFINITY;
        for p in lattice(dim, l, 33) {
            peak = peak.max(ln_h(&p)?);
        }
        let mut edge = f64::NEG_INFINITY;
        for p in lattice(dim, l, 3) {
            if p.iter().any(|v| v.abs() == l) {
                edge = edge.max(ln_h(&p)?);
            }
        }
        if edge <= peak - 60.0 {
            closed = true;
            break;
        }
        l *= 2.0;
    }
    if !closed || peak == f64::NEG_INFINITY {
        if peak == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        return Err(HgError::QuadratureFailure("weighted solution does not decay on the search box".into()));
    }
    let slot = ErrorSlot::new();
    let norm = 0.5 * dim as f64 * (delta / PI).ln();
    let value = if dim == 1 {
        let r = ln_integrate(
            |x| {
                ln_h(&[x]).unwrap_or_else(|e| {
                    slot.put(e);
                    f64::NEG_INFINITY
                })
            },
            -l,
            l,
            &[],
            cfg,
        )?;
        (r.ln_value + norm).exp()
    } else {
        let f = |y: &[f64]| match ln_h(y) {
            Ok(v) => (v - peak).exp(),
            Err(e) => {
                slot.put(e);
                0.0
            }
        };
        let r = integrate_box(&f, &[-l, -l], &[l, l], &|_, _| Vec::new(), cfg)?;
        r.value * (peak + norm).exp()
    };
    slot.check()?;
    Ok(value)
}

fn abs_body(dim: usize, body: &Body) -> Result<Body> {
    Ok(match body {
        Body::DiracComb { atoms } => Body::DiracComb {
            atoms: atoms.iter().map(|a| Atom { location: a.location.clone(), weight: a.weight.abs() }).collect(),
        },
        Body::AnnulusSum(s) => {
            let mut s: AnnulusSum = s.clone();
            for t in &mut s.terms {
                t.b = t.b.abs();
            }
            Body::AnnulusSum(s)
        }
        Body::Grid(g) => {
            let mut g = g.clone();
            for v in &mut g.samples {
                *v = v.abs();
            }
            Body::Grid(g)
        }
        Body::Restricted(r) => Body::Restricted(Restricted {
            inner: Box::new(abs_majorant(&r.inner)?),
            ..r.clone()
        }),
        Body::Sum { .. } => abs_majorant(&Measure { dimension: dim, body: body.clone() })?.body,
        other => other.clone(),
    })
}

/// A nonnegative measure dominating `|μ|`.
pub(crate) fn abs_majorant(mu: &Measure) -> Result<Measure> {
    let dim = mu.dimension;
    let parts = mu
        .leaves()
        .into_iter()
        .map(|(c, b)| Ok((c.abs(), Measure::new(dim, abs_body(dim, b)?)?)))
        .collect::<Result<Vec<_>>>()?;
    Measure::sum(dim, parts)
}

/// Cells of the finest resampling grid allowed.
const MAX_RESAMPLE_CELLS: usize = 4_000_000;

/// `max_x |S(t)μ(x) - S(t-s)[u(s)](x)|` over the probes, with `u(s)`
/// resampled as a piecewise-constant grid density.
///
/// Cell values are midpoint samples at spacing `h = 2√(t-s)/32` and `h/2`,
/// combined by Richardson extrapolation to cancel the `h²` error. The box
/// covers every probe's kernel frame: with `u(s, y) ≤ a^{N/2} u_{|μ|}(0, as)
/// e^{κ|y|²}`, `κ = 1/(4(as - s))`, the discarded part of the integral is a
/// Gaussian tail that is held below a thousandth of the target.
pub fn semigroup_residual(mu: &Measure, s: f64, t: f64, probes: &[Vec<f64>], cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    if !(s > 0.0 && t > s) {
        return Err(HgError::InvalidSpec(format!("need 0 < s < t, got s = {s}, t = {t}")));
    }
    check_window(mu, t)?;
    let dim = mu.dimension;
    if probes.iter().any(|p| p.len() != dim) {
        return Err(HgError::DimensionMismatch { left: probes.first().map_or(0, |p| p.len()), right: dim });
    }
    if probes.is_empty() {
        return Ok(0.0);
    }
    let tmax = mu.growth_index().maximal_time();
    let a_s = if tmax.is_finite() { (2.0 * t - s).min(0.5 * (t + tmax)) } else { 2.0 * t - s };
    let major = abs_majorant(mu)?;
    let origin = vec![0.0; dim];
    let nf = dim as f64;
    let amp = (a_s / s).powf(0.5 * nf) * evaluate_unchecked(&major, &origin, a_s, cfg)?.value;
    let kappa = 0.25 / (a_s - s);
    let qk = 0.25 / (t - s);
    let p = qk - kappa;
    let sigma = (0.5 / p).sqrt();

    let direct: Vec<f64> = probes
        .iter()
        .map(|x| evaluate(mu, x, t, cfg).map(|v| v.value))
        .collect::<Result<_>>()?;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (x, d) in probes.iter().zip(&direct) {
        let m: Vec<f64> = x.iter().map(|v| qk * v / p).collect();
        let mm: f64 = m.iter().map(|v| v * v).sum();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        // ∫ amp e^{κ|y|²} K(x - y, t - s) dy over all of ℝᴺ.
        let ln_total = amp.ln() - 0.5 * nf * (4.0 * PI * (t - s)).ln() + 0.5 * nf * (PI / p).ln() + p * mm - qk * xx;
        let budget = 1e-3 * cfg.target(*d);
        let need = budget.ln() - ln_total - (2.0 * nf).ln();
        let (mut za, mut zb) = (0.0, 60.0);
        for _ in 0..80 {
            let mid = 0.5 * (za + zb);
            if ln_norm_sf(mid) > need {
                za = mid;
            } else {
                zb = mid;
            }
        }
        let z = zb * cfg.tail_safety;
        for k in 0..dim {
            lo[k] = lo[k].min(m[k] - z * sigma);
            hi[k] = hi[k].max(m[k] + z * sigma);
        }
    }
    let h = 2.0 * (t - s).sqrt() / 32.0;
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| (0.5 * (l + u) / h).round() * h).collect();
    let reach = (0..dim).map(|k| (hi[k] - center[k]).max(center[k] - lo[k])).fold(0.0f64, f64::max);
    let half = ((reach / h).ceil() + 1.0) * h;
    let cells = (2.0 * half / h).round() as usize;
    if (2 * cells).checked_pow(dim as u32).map_or(true, |c| c > MAX_RESAMPLE_CELLS) {
        return Err(HgError::QuadratureFailure(format!(
            "resampling grid with {} cells per axis exceeds the budget",
            2 * cells
        )));
    }
    let inner = cfg.tightened(0.01);
    let coarse = resample(mu, s, &center, half, cells, &inner)?;
    let fine = resample(mu, s, &center, half, 2 * cells, &inner)?;
    let mut worst = 0.0f64;
    for (x, d) in probes.iter().zip(&direct) {
        let gc = leaf_value(dim, &Body::Grid(coarse.clone()), x, t - s, cfg)?.value;
        let gf = leaf_value(dim, &Body::Grid(fine.clone()), x, t - s, cfg)?.value;
        worst = worst.max((d - (4.0 * gf - gc) / 3.0).abs());
    }
    Ok(worst)
}

fn resample(mu: &Measure, s: f64, center: &[f64], half: f64, cells: usize, cfg: &QuadratureConfig) -> Result<GridDensity> {
    let dim = mu.dimension;
    let h = 2.0 * half / cells as f64;
    let total = cells.pow(dim as u32);
    let samples = (0..total)
        .into_par_iter()
        .map(|mut i| {
            let mut y = vec![0.0; dim];
            for k in (0..dim).rev() {
                y[k] = center[k] - half + h * ((i % cells) as f64 + 0.5);
                i /= cells;
            }
            evaluate_unchecked(mu, &y, s, cfg).map(|v| v.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(GridDensity {
        center: center.to_vec(),
        half_width: half,
        cells_per_axis: cells,
        samples,
        sidecar: None,
    })
}

/// `|∂_t u - Δu|` at `(x, t)`.
pub fn heat_residual(mu: &Measure, x: &[f64], t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let dim = mu.dimension;
    let ut = evaluate_derivative(mu, x, t, &vec![0; dim], 1, cfg)?.value;
    let mut lap = 0.0;
    for k in 0..dim {
        let mut alpha = vec![0; dim];
        alpha[k] = 2;
        lap += evaluate_derivative(mu, x, t, &alpha, 0, cfg)?.value;
    }
    Ok((ut - lap).abs())
}

/// Whether `‖S(t)μ‖_q ≤ (4πt)^{-N/2 (1 - 1/q)} ‖μ‖_BTV (1 + 10 rel_tol)`,
/// `q ∈ [1, ∞]`.
///
/// For `q = ∞` the norm is the maximum over a probe lattice and the atoms;
/// otherwise `∫|u|^q` is integrated over the support box widened by
/// `12√t` (or a fixed box for unbounded support), `N ≤ 2`.
pub fn smoothing_decay_check(mu: &Measure, t: f64, q: f64, cfg: &QuadratureConfig) -> Result<bool> {
    cfg.validate()?;
    check_window(mu, t)?;
    if !(q >= 1.0) {
        return Err(HgError::InvalidSpec(format!("q must lie in [1, inf], got {q}")));
    }
    let btv = btv_norm(mu, cfg)?;
    if !btv.is_finite() {
        return Err(HgError::InvalidSpec("smoothing estimate needs finite total variation".into()));
    }
    let dim = mu.dimension;
    let nf = dim as f64;
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    let bound = (4.0 * PI * t).powf(-0.5 * nf * (1.0 - inv_q)) * btv * (1.0 + 10.0 * cfg.rel_tol);
    let pad = 12.0 * t.sqrt();
    let (lo, hi) = match mu.support_box() {
        Some((lo, hi)) => (lo.iter().map(|v| v - pad).collect::<Vec<_>>(), hi.iter().map(|v| v + pad).collect::<Vec<_>>()),
        None => (vec![-(30.0 + pad); dim], vec![30.0 + pad; dim]),
    };
    let inner = cfg.tightened(0.1);
    let u = |y: &[f64]| evaluate_unchecked(mu, y, t, &inner).map(|v| v.value);
    if q.is_infinite() {
        let per_axis = match dim {
            1 => 801,
            2 => 101,
            _ => 21,
        };
        let mut pts: Vec<Vec<f64>> = mu.atoms().into_iter().map(|a| a.location).collect();
        let mut idx = vec![0usize; dim];
        'outer: loop {
            pts.push((0..dim).map(|k| lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / (per_axis - 1) as f64).collect());
            for k in 0..dim {
                idx[k] += 1;
                if idx[k] < per_axis {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        let vals = pts.par_iter().map(|p| u(p)).collect::<Result<Vec<f64>>>()?;
        let max = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        return Ok(max <= bound);
    }
    let slot = ErrorSlot::new();
    let f = |y: &[f64]| match u(y) {
        Ok(v) => v.abs().powf(q),
        Err(e) => {
            slot.put(e);
            0.0
        }
    };
    let total = match dim {
        1 => integrate(|x| f(&[x]), lo[0], hi[0], &[], 16, cfg)?.value,
        2 => integrate_box(&f, &lo, &hi, &|_, _| Vec::new(), cfg)?.value,
        _ => {
            return Err(HgError::DimensionUnsupported { dim, what: "L^q norm of the solution".into() });
        }
    };
    slot.check()?;
    Ok(total.powf(inv_q) <= bound)
}
