//! Translation and dilation as parameter rewrites.

use crate::error::Result;

use super::{dot, Atom, Body, Component, Measure};

/// `τ_y μ`, the push-forward of `μ` under `x ↦ x + y`.
pub fn translate(mu: &Measure, y: &[f64]) -> Result<Measure> {
    assert_eq!(y.len(), mu.dimension, "translation vector has wrong dimension");
    if y.iter().all(|v| *v == 0.0) {
        return Ok(mu.clone());
    }
    let dim = mu.dimension;
    let parts = mu
        .leaves()
        .into_iter()
        .map(|(c, b)| {
            let (pre, body) = translate_body(b, y)?;
            Ok((c * pre, Measure { dimension: dim, body }))
        })
        .collect::<Result<Vec<_>>>()?;
    Measure::sum(dim, parts)
}

fn shifted(v: &[f64], y: &[f64]) -> Vec<f64> {
    v.iter().zip(y).map(|(a, b)| a + b).collect()
}

/// Returns the translated leaf and the scalar prefactor it generates.
fn translate_body(body: &Body, y: &[f64]) -> Result<(f64, Body)> {
    let yy = dot(y, y);
    Ok(match body {
        Body::DiracComb { atoms } => (
            1.0,
            Body::DiracComb {
                atoms: atoms
                    .iter()
                    .map(|a| Atom {
                        location: shifted(&a.location, y),
                        weight: a.weight,
                    })
                    .collect(),
            },
        ),
        Body::ExpQuad(e) => {
            // A|x-y|² + b·(x-y) = A|x|² + (b - 2Ay)·x + (A|y|² - b·y)
            let mut e = e.clone();
            let pre = (e.a * yy - dot(&e.b, y)).exp();
            e.b = e.b.iter().zip(y).map(|(b, y)| b - 2.0 * e.a * y).collect();
            e.center = shifted(&e.center, y);
            (pre, Body::ExpQuad(e))
        }
        Body::HalfSpacePiece(h) => {
            // A|x-y|² - 2A⟨x0, x-y⟩ = A|x|² - 2A⟨x0 + y, x⟩ + A|y|² + 2A⟨x0, y⟩
            let mut h = h.clone();
            let pre = (h.a * yy + 2.0 * h.a * dot(&h.x0, y)).exp();
            h.x0 = shifted(&h.x0, y);
            h.shift = shifted(&h.shift, y);
            (pre, Body::HalfSpacePiece(h))
        }
        Body::AnnulusSum(s) => {
            let mut s = s.clone();
            s.center = shifted(&s.center, y);
            (1.0, Body::AnnulusSum(s))
        }
        Body::Grid(g) => {
            let mut g = g.clone();
            g.center = shifted(&g.center, y);
            (1.0, Body::Grid(g))
        }
        Body::Restricted(r) => {
            let mut r = r.clone();
            r.inner = Box::new(translate(&r.inner, y)?);
            r.center = shifted(&r.center, y);
            (1.0, Body::Restricted(r))
        }
        Body::Sum { components } => {
            let parts = components
                .iter()
                .map(|c| {
                    Ok(Component {
                        coefficient: c.coefficient,
                        measure: translate(&c.measure, y)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            (1.0, Body::Sum { components: parts })
        }
    })
}

/// `μ_λ`, with `μ_λ(E) = λ^{-N} μ(λE)`; a density `f` becomes `f(λx)`.
pub fn dilate(mu: &Measure, lambda: f64) -> Result<Measure> {
    assert!(lambda > 0.0 && lambda.is_finite(), "dilation factor must be positive");
    if lambda == 1.0 {
        return Ok(mu.clone());
    }
    let body = dilate_body(mu.dimension, &mu.body, lambda)?;
    Measure::new(mu.dimension, body)
}

fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|a| a * c).collect()
}

fn dilate_body(dim: usize, body: &Body, lambda: f64) -> Result<Body> {
    let inv = 1.0 / lambda;
    Ok(match body {
        Body::DiracComb { atoms } => Body::DiracComb {
            atoms: atoms
                .iter()
                .map(|a| Atom {
                    location: scaled(&a.location, inv),
                    weight: a.weight * lambda.powi(-(dim as i32)),
                })
                .collect(),
        },
        Body::ExpQuad(e) => {
            let mut e = e.clone();
            e.a *= lambda * lambda;
            e.b = scaled(&e.b, lambda);
            e.center = scaled(&e.center, inv);
            e.scale *= lambda;
            Body::ExpQuad(e)
        }
        Body::HalfSpacePiece(h) => {
            let mut h = h.clone();
            h.a *= lambda * lambda;
            h.x0 = scaled(&h.x0, inv);
            h.shift = scaled(&h.shift, inv);
            h.scale *= lambda;
            h.c *= inv;
            Body::HalfSpacePiece(h)
        }
        Body::AnnulusSum(s) => {
            let mut s = s.clone();
            s.center = scaled(&s.center, inv);
            for t in &mut s.terms {
                t.lambda *= inv;
            }
            Body::AnnulusSum(s)
        }
        Body::Grid(g) => {
            let mut g = g.clone();
            g.center = scaled(&g.center, inv);
            g.half_width *= inv;
            Body::Grid(g)
        }
        Body::Restricted(r) => {
            let mut r = r.clone();
            r.inner = Box::new(dilate(&r.inner, lambda)?);
            r.center = scaled(&r.center, inv);
            r.radius *= inv;
            Body::Restricted(r)
        }
        Body::Sum { components } => Body::Sum {
            components: components
                .iter()
                .map(|c| {
                    Ok(Component {
                        coefficient: c.coefficient,
                        measure: dilate(&c.measure, lambda)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        },
    })
}
