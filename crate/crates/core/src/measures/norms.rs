//! Weighted norms, shell masses and the numerical growth-index estimate.
//!
//! These integrate in the data variable `y` directly and never call the
//! kernel module, so they serve as an independent route for the identity
//! `u(0, t) = ‖μ‖_{M_{1/4t}}`.

use std::f64::consts::PI;

use crate::error::{HgError, Result};
use crate::quad::{ln_integrate, QuadratureConfig};
use crate::special::{ball_volume, gamma_interval, log_add, norm_interval, sphere_area};
use crate::yspace::{gaussian_weighted, leaf_line_breaks, leaf_spheres, Sphere, YIntegrand};

use super::profile::tilted_integral;
use super::{dot, norm, Atom, Body, Factored, GrowthIndex, IndexSource, Measure, Modifier, Sign, TiltedIntegral};

/// `‖μ‖_{M_ε} = (ε/π)^{N/2} ∫ e^{-ε|y|²} d|μ|(y)`.
pub fn meps_norm(mu: &Measure, eps: f64, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(HgError::InvalidSpec(format!("norm index must be positive, got {eps}")));
    }
    let g = mu.growth_index();
    if eps < g.eps0 || (eps == g.eps0 && g.attained != Some(true)) {
        return Err(HgError::IndexTooSmall { eps, eps0: g.eps0 });
    }
    let mass = gauss_mass(mu, eps, cfg)?.ok_or(HgError::IndexTooSmall { eps, eps0: g.eps0 })?;
    Ok((eps / PI).powf(0.5 * mu.dimension as f64) * mass)
}

/// Total variation `|μ|(ℝᴺ)`, `+∞` for non-integrable families.
pub fn btv_norm(mu: &Measure, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(gauss_mass(mu, 0.0, cfg)?.unwrap_or(f64::INFINITY))
}

/// `∫ e^{-ε|y|²} d|μ|`, or `None` when it diverges.
fn gauss_mass(mu: &Measure, eps: f64, cfg: &QuadratureConfig) -> Result<Option<f64>> {
    let leaves = mu.leaves();
    if mu.sign() == Sign::Signed && leaves.len() > 1 {
        return signed_gauss_mass(mu, eps, cfg);
    }
    let mut total = 0.0;
    for (c, b) in leaves {
        if c == 0.0 {
            continue;
        }
        match leaf_gauss_mass(mu.dimension, b, eps, cfg)? {
            Some(v) => total += c.abs() * v,
            None => return Ok(None),
        }
    }
    Ok(Some(total))
}

fn merged_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| {
        a.location
            .iter()
            .zip(&b.location)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<Atom> = Vec::new();
    for a in atoms {
        match out.last_mut() {
            Some(last) if last.location == a.location => last.weight += a.weight,
            _ => out.push(a),
        }
    }
    out
}

/// Signed sums: atoms are merged by location and the absolutely continuous
/// part is integrated as `|Σ c_i f_i|` in one pass.
fn signed_gauss_mass(mu: &Measure, eps: f64, cfg: &QuadratureConfig) -> Result<Option<f64>> {
    let atoms: f64 = merged_atoms(mu.atoms())
        .iter()
        .map(|a| a.weight.abs() * (-eps * dot(&a.location, &a.location)).exp())
        .sum();
    let leaves = mu.leaves();
    for (c, b) in &leaves {
        if *c != 0.0 && leaf_gauss_mass(mu.dimension, b, eps, cfg)?.is_none() {
            return Err(HgError::QuadratureFailure(
                "signed sum with a non-integrable component: cancellation cannot be certified".into(),
            ));
        }
    }
    let x = vec![0.0; mu.dimension];
    let r = gaussian_weighted(&leaves, true, eps, &x, None, cfg).map_err(|e| match e {
        HgError::IndexTooSmall { .. } => {
            HgError::QuadratureFailure("signed sum at the optimal index is not supported".into())
        }
        other => other,
    })?;
    Ok(Some(atoms + r.unscaled().0))
}

fn is_origin(v: &[f64]) -> bool {
    v.iter().all(|c| *c == 0.0)
}

/// `∫ e^{-ε|y|²} d|leaf|` for a single-signed leaf.
fn leaf_gauss_mass(dim: usize, body: &Body, eps: f64, cfg: &QuadratureConfig) -> Result<Option<f64>> {
    let nf = dim as f64;
    match body {
        Body::DiracComb { atoms } => Ok(Some(
            atoms
                .iter()
                .map(|a| a.weight.abs() * (-eps * dot(&a.location, &a.location)).exp())
                .sum(),
        )),
        Body::Grid(g) => {
            let per_axis: Vec<Vec<f64>> = (0..dim)
                .map(|k| {
                    let e = g.edges(k);
                    e.windows(2)
                        .map(|w| {
                            if eps == 0.0 {
                                w[1] - w[0]
                            } else {
                                let s = (2.0 * eps).sqrt();
                                (PI / eps).sqrt() * norm_interval(w[0] * s, w[1] * s)
                            }
                        })
                        .collect()
                })
                .collect();
            Ok(Some(g.contract(&per_axis, true)))
        }
        Body::AnnulusSum(s) if is_origin(&s.center) => Ok(Some(
            s.terms
                .iter()
                .map(|t| {
                    if eps == 0.0 {
                        t.b * ball_volume(dim) * (t.outer().powf(nf) - t.inner().powf(nf))
                    } else {
                        t.b * (PI / eps).powf(0.5 * nf)
                            * gamma_interval(0.5 * nf, eps * t.inner().powi(2), eps * t.outer().powi(2))
                    }
                })
                .sum(),
        )),
        Body::ExpQuad(_) | Body::HalfSpacePiece(_) => {
            let f = Factored::of(body).expect("factored");
            let p = eps - f.a;
            if p < 0.0 {
                return Ok(None);
            }
            if p == 0.0 {
                let zero = vec![0.0; dim];
                let w = f.profile_tilt(&zero);
                return match tilted_integral(&f.profile, dim, &w, cfg)? {
                    TiltedIntegral::Finite { ln_value, .. } => Ok(Some((ln_value + f.ln_tilt_prefactor(&zero)).exp())),
                    TiltedIntegral::Divergent { .. } => Ok(None),
                    TiltedIntegral::Undetermined { .. } => Err(HgError::QuadratureFailure(
                        "tilted profile integral neither converged nor diverged".into(),
                    )),
                };
            }
            if f.profile == Modifier::One {
                // Completing the square.
                let bb = dot(&f.beta, &f.beta);
                return Ok(Some((PI / p).powf(0.5 * nf) * (bb / (4.0 * p)).exp()));
            }
            if f.profile.is_radial() && is_origin(&f.beta) && is_origin(&f.center) {
                return radial_gauss_mass(dim, &f, p, cfg).map(Some);
            }
            generic(dim, body, eps, cfg)
        }
        Body::Restricted(r) if r.outside => {
            let whole = gauss_mass(&r.inner, eps, cfg)?;
            let mut inside = r.clone();
            inside.outside = false;
            let inside = Measure { dimension: dim, body: Body::Restricted(inside) };
            let part = gauss_mass(&inside, eps, cfg)?.unwrap_or(0.0);
            Ok(whole.map(|w| (w - part).max(0.0)))
        }
        Body::Restricted(_) => {
            let atoms: f64 = merged_atoms(Measure { dimension: dim, body: body.clone() }.atoms())
                .iter()
                .map(|a| a.weight.abs() * (-eps * dot(&a.location, &a.location)).exp())
                .sum();
            Ok(generic(dim, body, eps, cfg)?.map(|v| v + atoms))
        }
        Body::Sum { .. } => gauss_mass(&Measure { dimension: dim, body: body.clone() }, eps, cfg),
        Body::AnnulusSum(_) => generic(dim, body, eps, cfg),
    }
}

fn generic(dim: usize, body: &Body, eps: f64, cfg: &QuadratureConfig) -> Result<Option<f64>> {
    let x = vec![0.0; dim];
    let r = gaussian_weighted(&[(1.0, body)], true, eps, &x, None, cfg)?;
    Ok(Some(r.unscaled().0))
}

/// `ω_{N-1} ∫₀^∞ r^{N-1} e^{-p r²} v(s r) dr` for a centered radial profile.
fn radial_gauss_mass(dim: usize, f: &Factored, p: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let nf = dim as f64;
    let peak = ((nf - 1.0) / (2.0 * p)).sqrt();
    let r_max = (peak + (120.0 / p).sqrt()) * cfg.tail_safety;
    let r = ln_integrate(
        |r: f64| {
            if r <= 0.0 && dim > 1 {
                return f64::NEG_INFINITY;
            }
            (nf - 1.0) * r.max(f64::MIN_POSITIVE).ln() - p * r * r + f.profile.ln_radial(f.scale * r)
        },
        0.0,
        r_max,
        &[],
        cfg,
    )?;
    let half_line = if dim == 1 { 2.0 } else { sphere_area(dim) };
    Ok(half_line * r.ln_value.exp())
}

/// Natural logs of the shell masses `|μ|({2^k ≤ |y| < 2^{k+1}})`,
/// `k = 0..=k_max`; empty shells give `-∞`.
pub fn shell_masses(mu: &Measure, k_max: usize, cfg: &QuadratureConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    (0..=k_max)
        .map(|k| {
            let lo = 2f64.powi(k as i32);
            ln_shell_mass(mu, lo, 2.0 * lo, cfg)
        })
        .collect()
}

pub(crate) fn ln_shell_mass(mu: &Measure, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let dim = mu.dimension;
    let in_shell = |z: &[f64]| {
        let r = norm(z);
        r >= lo && r < hi
    };
    let ln_atoms = merged_atoms(mu.atoms())
        .iter()
        .filter(|a| in_shell(&a.location))
        .map(|a| a.weight.abs())
        .sum::<f64>()
        .ln();
    let leaves: Vec<(f64, &Body)> = mu
        .leaves()
        .into_iter()
        .filter(|(c, b)| *c != 0.0 && !matches!(b, Body::DiracComb { .. }))
        .collect();
    if leaves.is_empty() {
        return Ok(ln_atoms);
    }
    let ac = if dim == 1 {
        // |Σ c_i f_i| on both half-lines, in log form.
        let body = &mu.body;
        let mut breaks = Vec::new();
        let mut spheres = Vec::new();
        for (_, b) in &leaves {
            leaf_line_breaks(b, 0, &[], &mut breaks);
            leaf_spheres(b, &mut spheres);
        }
        for s in &spheres {
            breaks.push(s.center[0] - s.radius);
            breaks.push(s.center[0] + s.radius);
        }
        let ln_f = |y: f64| ln_density_abs(body, &[y]);
        let mut total = f64::NEG_INFINITY;
        for (a, b) in [(lo, hi), (-hi, -lo)] {
            let br: Vec<f64> = breaks.iter().copied().filter(|p| *p > a && *p < b).collect();
            total = log_add(total, ln_integrate(ln_f, a, b, &br, &cfg.tightened(0.1))?.ln_value);
        }
        total
    } else if let [(c, body)] = leaves.as_slice() {
        match Factored::of(body) {
            Some(f) if f.profile.is_radial() && is_origin(&f.beta) && is_origin(&f.center) => {
                let nf = dim as f64;
                let r = ln_integrate(
                    |r: f64| (nf - 1.0) * r.ln() + f.a * r * r + f.profile.ln_radial(f.scale * r),
                    lo,
                    hi,
                    &[],
                    cfg,
                )?;
                c.abs().ln() + sphere_area(dim).ln() + r.ln_value
            }
            _ => match body {
                Body::AnnulusSum(s) if is_origin(&s.center) => {
                    let nf = dim as f64;
                    let v: f64 = s
                        .terms
                        .iter()
                        .map(|t| {
                            let a = t.inner().max(lo);
                            let b = t.outer().min(hi);
                            if b > a {
                                t.b * ball_volume(dim) * (b.powf(nf) - a.powf(nf))
                            } else {
                                0.0
                            }
                        })
                        .sum();
                    (c.abs() * v).ln()
                }
                _ => box_shell_mass(dim, &leaves, lo, hi, cfg)?,
            },
        }
    } else {
        box_shell_mass(dim, &leaves, lo, hi, cfg)?
    };
    Ok(log_add(ln_atoms, ac))
}

fn ln_density_abs(body: &Body, y: &[f64]) -> f64 {
    super::ln_density(body, y).1
}

fn box_shell_mass(dim: usize, leaves: &[(f64, &Body)], lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let bl = vec![-hi; dim];
    let bh = vec![hi; dim];
    let ln_ref = leaves
        .iter()
        .map(|(c, b)| c.abs().ln() + crate::yspace::sampled_sup(b, &bl, &bh))
        .fold(f64::NEG_INFINITY, f64::max);
    let zero = |_: &[f64]| 0.0;
    let ind = |y: &[f64]| {
        let r = norm(y);
        r >= lo && r < hi
    };
    let origin = vec![0.0; dim];
    let it = YIntegrand {
        leaves: leaves.to_vec(),
        abs: true,
        ln_weight: &zero,
        poly: None,
        indicator: Some(&ind),
        spheres: vec![
            Sphere { center: origin.clone(), radius: lo },
            Sphere { center: origin, radius: hi },
        ],
        ln_ref,
    };
    let r = it.integrate(&bl, &bh, cfg)?;
    Ok(r.value.ln() + ln_ref)
}

/// Estimated optimal index from a least-squares slope of `ln m_k` against
/// the squared outer shell radius `4^{k+1}` over the top three usable
/// shells.
pub fn estimate_growth_index(mu: &Measure, k_max: usize, cfg: &QuadratureConfig) -> Result<GrowthIndex> {
    const NEEDED: usize = 4;
    if k_max + 1 < NEEDED {
        return Err(HgError::InsufficientShells { usable: k_max + 1, needed: NEEDED });
    }
    let lm = shell_masses(mu, k_max, cfg)?;
    let estimated = |eps0: f64| GrowthIndex {
        eps0,
        attained: None,
        source: IndexSource::Estimated,
    };
    if lm[k_max] == f64::NEG_INFINITY {
        // The top shell is empty: the data is (numerically) compactly supported.
        return Ok(estimated(0.0));
    }
    let usable: Vec<(f64, f64)> = lm
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(k, v)| (4f64.powi(k as i32 + 1), *v))
        .collect();
    if usable.len() < NEEDED {
        return Err(HgError::InsufficientShells { usable: usable.len(), needed: NEEDED });
    }
    let top = &usable[usable.len() - 3..];
    let mx = top.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = top.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let sxy: f64 = top.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = top.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(estimated((sxy / sxx).max(0.0)))
}

/// Whether a leaf's density is unbounded, decided from its family.
fn leaf_unbounded(body: &Body) -> bool {
    match body {
        Body::ExpQuad(_) | Body::HalfSpacePiece(_) => {
            let f = Factored::of(body).expect("factored");
            if f.a != 0.0 {
                return f.a > 0.0;
            }
            let w: Vec<f64> = f.beta.iter().map(|b| b / f.scale).collect();
            let wn = norm(&w);
            match f.profile {
                Modifier::One | Modifier::PowerDecay { .. } => wn > 0.0,
                Modifier::ExpDecay { gamma } | Modifier::ExpPowerDecay { gamma, .. } => wn > gamma,
                Modifier::StretchedExpDecay { .. } => false,
                Modifier::ProductWindow { ref n, eta0, .. } => dot(&w, n) > eta0,
            }
        }
        Body::Restricted(r) => r.outside && r.inner.leaves().iter().any(|(c, b)| *c != 0.0 && leaf_unbounded(b)),
        _ => false,
    }
}

/// Box of ball centers outside which the leaf's ball masses cannot exceed
/// those inside.
fn sweep_box(dim: usize, body: &Body) -> Option<(Vec<f64>, Vec<f64>)> {
    let pad = |(lo, hi): (Vec<f64>, Vec<f64>), r: f64| -> (Vec<f64>, Vec<f64>) {
        (lo.iter().map(|v| v - r).collect(), hi.iter().map(|v| v + r).collect())
    };
    match body {
        Body::ExpQuad(_) | Body::HalfSpacePiece(_) => {
            let f = Factored::of(body).expect("factored");
            let s = f.scale;
            let mut reach = 4.0 / s + 2.0;
            if let Modifier::StretchedExpDecay { gamma, alpha } = f.profile {
                let wn = norm(&f.beta) / s;
                reach += (wn / (gamma * alpha)).powf(1.0 / (alpha - 1.0)) / s;
            }
            let mut b = pad((f.center.clone(), f.center.clone()), reach);
            if f.a < 0.0 {
                let peak: Vec<f64> = f.beta.iter().map(|v| -v / (2.0 * f.a)).collect();
                let (l, h) = pad((peak.clone(), peak), 3.0 / (-f.a).sqrt() + 2.0);
                for k in 0..dim {
                    b.0[k] = b.0[k].min(l[k]);
                    b.1[k] = b.1[k].max(h[k]);
                }
            }
            Some(b)
        }
        Body::Restricted(r) if r.outside => {
            let mut b = pad((r.center.clone(), r.center.clone()), r.radius + 1.0);
            for (_, leaf) in r.inner.leaves() {
                if let Some((l, h)) = sweep_box(dim, leaf) {
                    for k in 0..dim {
                        b.0[k] = b.0[k].min(l[k]);
                        b.1[k] = b.1[k].max(h[k]);
                    }
                }
            }
            Some(b)
        }
        other => {
            let m = Measure { dimension: dim, body: other.clone() };
            let b = m.support_box()?;
            if b.0.iter().zip(&b.1).any(|(l, h)| l > h) {
                return None;
            }
            Some(pad(b, 1.0))
        }
    }
}

fn is_constant(body: &Body) -> bool {
    matches!(body, Body::ExpQuad(e) if e.a == 0.0 && e.modifier == Modifier::One && is_origin(&e.b))
}

/// `sup_x |μ|(B(x, 1))` over open unit balls, by a lattice sweep of
/// spacing 1/2; `+∞` when a family's envelope is unbounded.
pub fn uniform_norm(mu: &Measure, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    let dim = mu.dimension;
    let leaves: Vec<(f64, &Body)> = mu.leaves().into_iter().filter(|(c, _)| *c != 0.0).collect();
    if leaves.iter().any(|(_, b)| leaf_unbounded(b)) {
        return Ok(f64::INFINITY);
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for (_, b) in &leaves {
        if let Some((l, h)) = sweep_box(dim, b) {
            for k in 0..dim {
                lo[k] = lo[k].min(l[k]);
                hi[k] = hi[k].max(h[k]);
            }
        }
    }
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Ok(0.0);
    }
    let atoms = merged_atoms(mu.atoms());
    let constant: f64 = leaves.iter().filter(|(_, b)| is_constant(b)).map(|(c, _)| c).sum();
    let rest: Vec<(f64, &Body)> = leaves
        .iter()
        .filter(|(_, b)| !is_constant(b) && !matches!(b, Body::DiracComb { .. }))
        .copied()
        .collect();
    let counts: Vec<usize> = (0..dim).map(|k| ((hi[k] - lo[k]) / 0.5).ceil() as usize + 1).collect();
    let total: usize = counts.iter().product();
    let mut best = 0.0f64;
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let x: Vec<f64> = (0..dim).map(|k| (lo[k] + 0.5 * idx[k] as f64).min(hi[k])).collect();
        let m = ball_mass(dim, &x, &atoms, constant, &rest, cfg)?;
        best = best.max(m);
        for k in 0..dim {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(best)
}

fn ball_mass(
    dim: usize,
    x: &[f64],
    atoms: &[Atom],
    constant: f64,
    rest: &[(f64, &Body)],
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let inside = |z: &[f64]| z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < 1.0;
    let mut m: f64 = atoms.iter().filter(|a| inside(&a.location)).map(|a| a.weight.abs()).sum();
    if rest.is_empty() {
        return Ok(m + constant.abs() * ball_volume(dim));
    }
    let lo: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
    let hi: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
    let ln_ref = rest
        .iter()
        .map(|(c, b)| c.abs().ln() + crate::yspace::sampled_sup(b, &lo, &hi))
        .fold(constant.abs().ln(), f64::max);
    // The constant part joins the integrand so cancellations are seen.
    let konst = crate::measures::Measure::exp_quad(dim, 0.0, Vec::new(), Modifier::One)?;
    let mut leaves = rest.to_vec();
    if constant != 0.0 {
        leaves.push((constant, &konst.body));
    }
    let zero = |_: &[f64]| 0.0;
    let it = YIntegrand {
        leaves,
        abs: true,
        ln_weight: &zero,
        poly: None,
        indicator: if dim > 1 { Some(&inside) } else { None },
        spheres: vec![Sphere { center: x.to_vec(), radius: 1.0 }],
        ln_ref,
    };
    let r = it.integrate(&lo, &hi, cfg)?;
    m += r.value * ln_ref.exp();
    Ok(m)
}
