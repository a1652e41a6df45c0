//! Initial data: signed Radon measures with at most quadratic-exponential
//! growth, built from closed-form families and finite sums of them.

mod io;
mod norms;
mod profile;
mod transform;

pub use io::{measure_to_toml, parse_measure, read_grid_sidecar, read_measure, write_grid_sidecar, write_measure};
pub use norms::{btv_norm, estimate_growth_index, meps_norm, shell_masses, uniform_norm};
pub(crate) use norms::ln_shell_mass;
pub use profile::{tilted_integral, Factored, ShellDiagnostics, TiltedIntegral, BOUNDARY_BAND};
pub use transform::{dilate, translate};

use serde::{Deserialize, Serialize};

use crate::error::{HgError, Result};

/// A measure on ℝᴺ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measure {
    pub dimension: usize,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    DiracComb { atoms: Vec<Atom> },
    ExpQuad(ExpQuad),
    AnnulusSum(AnnulusSum),
    HalfSpacePiece(HalfSpacePiece),
    Grid(GridDensity),
    Restricted(Restricted),
    Sum { components: Vec<Component> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub location: Vec<f64>,
    pub weight: f64,
}

/// Density `e^{A|x|² + b·x} v(scale·(x - center))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpQuad {
    pub a: f64,
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default)]
    pub modifier: Modifier,
    #[serde(default)]
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// Profile `v` multiplying the exponential-quadratic factor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Modifier {
    #[default]
    One,
    /// `(1 + |x|²)^{-α/2}`
    PowerDecay { alpha: f64 },
    /// `e^{-γ|x|}`
    ExpDecay { gamma: f64 },
    /// `e^{-γ|x|} (1 + |x|²)^{-α/2}`
    ExpPowerDecay { gamma: f64, alpha: f64 },
    /// `e^{-γ|x|^α}` with `1 < α < 2`
    StretchedExpDecay { gamma: f64, alpha: f64 },
    /// `χ(|x'| < 1) φ(x₁) e^{-η₀ x₁}` on `x₁ = ⟨x, n⟩ > 0`, with
    /// `φ(s) = 1/(1 + s²)` when `phi` is set and `φ ≡ 1` otherwise.
    ProductWindow { n: Vec<f64>, eta0: f64, phi: bool },
}

impl Modifier {
    pub fn is_radial(&self) -> bool {
        !matches!(self, Modifier::ProductWindow { .. })
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: &str| Err(HgError::InvalidMeasure(m.into()));
        match *self {
            Modifier::One => Ok(()),
            Modifier::PowerDecay { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            Modifier::PowerDecay { .. } => bad("power decay needs alpha > 0"),
            Modifier::ExpDecay { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            Modifier::ExpDecay { .. } => bad("exponential decay needs gamma > 0"),
            Modifier::ExpPowerDecay { gamma, alpha } if gamma > 0.0 && alpha > 0.0 && gamma.is_finite() && alpha.is_finite() => Ok(()),
            Modifier::ExpPowerDecay { .. } => bad("exp-power decay needs gamma > 0 and alpha > 0"),
            Modifier::StretchedExpDecay { gamma, alpha } if gamma > 0.0 && alpha > 1.0 && alpha < 2.0 && gamma.is_finite() => Ok(()),
            Modifier::StretchedExpDecay { .. } => bad("stretched decay needs gamma > 0 and 1 < alpha < 2"),
            Modifier::ProductWindow { ref n, eta0, .. } => {
                if n.len() != dim {
                    return bad("window normal has wrong dimension");
                }
                if (norm(n) - 1.0).abs() > 1e-12 {
                    return bad("window normal must be a unit vector");
                }
                if !(eta0 >= 0.0 && eta0.is_finite()) {
                    return bad("window needs eta0 >= 0");
                }
                Ok(())
            }
        }
    }
}

/// `Σ b_j χ{λ_j/r_j < |x - center| < λ_j r_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusSum {
    #[serde(default)]
    pub center: Vec<f64>,
    pub terms: Vec<AnnulusTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnulusTerm {
    pub b: f64,
    pub lambda: f64,
    pub r: f64,
}

impl AnnulusTerm {
    pub fn inner(&self) -> f64 {
        self.lambda / self.r
    }
    pub fn outer(&self) -> f64 {
        self.lambda * self.r
    }
    /// The term covering the shell `inner < |x| < outer`.
    pub fn from_radii(b: f64, inner: f64, outer: f64) -> Self {
        AnnulusTerm {
            b,
            lambda: (inner * outer).sqrt(),
            r: (outer / inner).sqrt(),
        }
    }
}

/// One building block of the convex regular-set construction:
/// `e^{A|x|² - 2A⟨x0, x⟩} w(scale·(x - shift))` where `w` is the product
/// window along `n` with decay rate `eta0`; `φ` is present iff `!strict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpacePiece {
    pub n: Vec<f64>,
    pub c: f64,
    pub strict: bool,
    pub a: f64,
    #[serde(default)]
    pub x0: Vec<f64>,
    pub eta0: f64,
    #[serde(default)]
    pub shift: Vec<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

impl HalfSpacePiece {
    /// The piece `v(n, c)` (or `w(n, c)` when strict) for growth rate `a`,
    /// with `η₀ = 2Ac` so that its regular set is `⟨x - x0, n⟩ ≤ c`
    /// (strictly when `strict`).
    pub fn new(n: Vec<f64>, c: f64, strict: bool, a: f64, x0: Vec<f64>) -> Self {
        let dim = n.len();
        HalfSpacePiece {
            n,
            c,
            strict,
            a,
            x0,
            eta0: 2.0 * a * c,
            shift: vec![0.0; dim],
            scale: 1.0,
        }
    }
}

/// Piecewise-constant density on the cube `center ± half_width`, split into
/// `cells_per_axis` cells per axis, samples stored row-major (last axis
/// fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDensity {
    #[serde(default)]
    pub center: Vec<f64>,
    pub half_width: f64,
    pub cells_per_axis: usize,
    #[serde(default)]
    pub samples: Vec<f64>,
    /// Sidecar file holding the samples; resolved on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
}

impl GridDensity {
    /// `Σ_cells s · Π_axis p[axis][i_axis]`, with every factor replaced by
    /// its absolute value when `abs`.
    pub fn contract(&self, p: &[Vec<f64>], abs: bool) -> f64 {
        let dim = p.len();
        let n = self.cells_per_axis;
        if dim == 1 {
            return self.samples.iter().zip(&p[0]).map(|(s, q)| if abs { (s * q).abs() } else { s * q }).sum();
        }
        // Contract the last axis first; the remaining axes form a smaller grid.
        let last = &p[dim - 1];
        let reduced: Vec<f64> = self
            .samples
            .chunks(n)
            .map(|row| row.iter().zip(last).map(|(s, q)| if abs { (s * q).abs() } else { s * q }).sum())
            .collect();
        let sub = GridDensity {
            center: self.center[..dim - 1].to_vec(),
            half_width: self.half_width,
            cells_per_axis: n,
            samples: reduced,
            sidecar: None,
        };
        sub.contract(&p[..dim - 1], abs)
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.cells_per_axis as f64
    }

    /// Edges of the cells along `axis`.
    pub fn edges(&self, axis: usize) -> Vec<f64> {
        let h = self.cell_width();
        let lo = self.center[axis] - self.half_width;
        (0..=self.cells_per_axis).map(|i| lo + h * i as f64).collect()
    }

    /// Sample value at `y`, zero outside the support.
    pub fn value_at(&self, y: &[f64]) -> f64 {
        let n = self.cells_per_axis;
        let h = self.cell_width();
        let mut idx = 0usize;
        for (k, &yk) in y.iter().enumerate() {
            let s = (yk - (self.center[k] - self.half_width)) / h;
            if !(s >= 0.0 && s < n as f64) {
                return 0.0;
            }
            idx = idx * n + (s as usize).min(n - 1);
        }
        self.samples[idx]
    }
}

/// The inner measure restricted to the open ball `|x - center| < radius`
/// (or to its complement when `outside`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Restricted {
    pub inner: Box<Measure>,
    #[serde(default)]
    pub center: Vec<f64>,
    pub radius: f64,
    pub outside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub coefficient: f64,
    pub measure: Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Nonnegative,
    Nonpositive,
    Signed,
}

impl Sign {
    fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Nonpositive
        } else {
            Sign::Nonnegative
        }
    }

    fn join(self, other: Sign) -> Sign {
        if self == other {
            self
        } else {
            Sign::Signed
        }
    }

    fn flip(self) -> Sign {
        match self {
            Sign::Nonnegative => Sign::Nonpositive,
            Sign::Nonpositive => Sign::Nonnegative,
            Sign::Signed => Sign::Signed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSource {
    Analytic,
    Estimated,
}

/// Optimal index `ε₀ = inf{ε : μ ∈ M_ε}` and whether `μ ∈ M_{ε₀}`.
///
/// `attained` is `None` only for estimated indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthIndex {
    pub eps0: f64,
    pub attained: Option<bool>,
    pub source: IndexSource,
}

impl GrowthIndex {
    pub fn maximal_time(&self) -> f64 {
        if self.eps0 == 0.0 {
            f64::INFINITY
        } else {
            0.25 / self.eps0
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn finite_vec(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(HgError::InvalidMeasure(format!("{what} must be finite")))
    }
}

fn fill_vec(v: &mut Vec<f64>, dim: usize, what: &str) -> Result<()> {
    if v.is_empty() {
        *v = vec![0.0; dim];
    }
    if v.len() != dim {
        return Err(HgError::InvalidMeasure(format!(
            "{what} has length {} in dimension {dim}",
            v.len()
        )));
    }
    finite_vec(v, what)
}

impl Measure {
    /// Validates, fills defaulted vectors and flattens nested sums.
    pub fn new(dimension: usize, body: Body) -> Result<Measure> {
        if dimension == 0 {
            return Err(HgError::InvalidMeasure("dimension must be at least 1".into()));
        }
        let body = normalize_body(dimension, body)?;
        Ok(Measure { dimension, body })
    }

    /// Re-runs validation on a deserialized value.
    pub fn normalized(self) -> Result<Measure> {
        Measure::new(self.dimension, self.body)
    }

    pub fn zero(dim: usize) -> Measure {
        Measure {
            dimension: dim,
            body: Body::DiracComb { atoms: Vec::new() },
        }
    }

    pub fn dirac(location: Vec<f64>, weight: f64) -> Result<Measure> {
        let dim = location.len();
        Measure::new(dim, Body::DiracComb { atoms: vec![Atom { location, weight }] })
    }

    pub fn dirac_comb(dim: usize, atoms: Vec<Atom>) -> Result<Measure> {
        Measure::new(dim, Body::DiracComb { atoms })
    }

    pub fn exp_quad(dim: usize, a: f64, b: Vec<f64>, modifier: Modifier) -> Result<Measure> {
        Measure::new(
            dim,
            Body::ExpQuad(ExpQuad {
                a,
                b,
                modifier,
                center: Vec::new(),
                scale: 1.0,
            }),
        )
    }

    /// The constant density `c`.
    pub fn constant(dim: usize, c: f64) -> Result<Measure> {
        let m = Measure::exp_quad(dim, 0.0, Vec::new(), Modifier::One)?;
        Measure::sum(dim, vec![(c, m)])
    }

    pub fn annulus_sum(dim: usize, terms: Vec<AnnulusTerm>) -> Result<Measure> {
        Measure::new(dim, Body::AnnulusSum(AnnulusSum { center: Vec::new(), terms }))
    }

    pub fn grid(dim: usize, center: Vec<f64>, half_width: f64, cells_per_axis: usize, samples: Vec<f64>) -> Result<Measure> {
        Measure::new(
            dim,
            Body::Grid(GridDensity {
                center,
                half_width,
                cells_per_axis,
                samples,
                sidecar: None,
            }),
        )
    }

    /// The indicator of the cube `center ± half_width` as a one-cell grid.
    pub fn indicator_cube(center: Vec<f64>, half_width: f64) -> Result<Measure> {
        let dim = center.len();
        Measure::grid(dim, center, half_width, 1, vec![1.0])
    }

    pub fn sum(dim: usize, parts: Vec<(f64, Measure)>) -> Result<Measure> {
        let components = parts
            .into_iter()
            .map(|(coefficient, measure)| Component { coefficient, measure })
            .collect();
        Measure::new(dim, Body::Sum { components })
    }

    pub fn restricted(inner: Measure, center: Vec<f64>, radius: f64, outside: bool) -> Result<Measure> {
        let dim = inner.dimension;
        Measure::new(
            dim,
            Body::Restricted(Restricted {
                inner: Box::new(inner),
                center,
                radius,
                outside,
            }),
        )
    }

    /// Leaves of the measure with their accumulated coefficients.
    pub fn leaves(&self) -> Vec<(f64, &Body)> {
        match &self.body {
            Body::Sum { components } => components.iter().map(|c| (c.coefficient, &c.measure.body)).collect(),
            other => vec![(1.0, other)],
        }
    }

    pub fn sign(&self) -> Sign {
        body_sign(&self.body)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.sign() == Sign::Nonnegative
    }

    /// Optimal index from the families' analytic structure.
    pub fn growth_index(&self) -> GrowthIndex {
        let (eps0, attained) = body_index(self.dimension, &self.body);
        GrowthIndex {
            eps0,
            attained: Some(attained || eps0 == 0.0),
            source: IndexSource::Analytic,
        }
    }

    /// Smallest box containing the support, or `None` when unbounded.
    pub fn support_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        body_support(self.dimension, &self.body)
    }

    /// Density at `y` of the absolutely continuous part (atoms ignored).
    pub fn density(&self, y: &[f64]) -> f64 {
        self.leaves()
            .iter()
            .map(|(c, b)| {
                let (s, l) = ln_density(b, y);
                c * s * l.exp()
            })
            .sum()
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        for (c, b) in self.leaves() {
            collect_atoms(b, c, &mut out);
        }
        out
    }
}

fn collect_atoms(body: &Body, coef: f64, out: &mut Vec<Atom>) {
    match body {
        Body::DiracComb { atoms } => out.extend(atoms.iter().map(|a| Atom {
            location: a.location.clone(),
            weight: coef * a.weight,
        })),
        Body::Restricted(r) => {
            for (c, b) in r.inner.leaves() {
                let mut inner = Vec::new();
                collect_atoms(b, coef * c, &mut inner);
                out.extend(inner.into_iter().filter(|a| r.contains(&a.location)));
            }
        }
        _ => {}
    }
}

impl Restricted {
    pub fn contains(&self, y: &[f64]) -> bool {
        let d2: f64 = y.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        (d2 < self.radius * self.radius) != self.outside
    }
}

fn normalize_body(dim: usize, body: Body) -> Result<Body> {
    match body {
        Body::DiracComb { atoms } => {
            for a in &atoms {
                if a.location.len() != dim {
                    return Err(HgError::InvalidMeasure("atom location has wrong dimension".into()));
                }
                finite_vec(&a.location, "atom location")?;
                if !a.weight.is_finite() {
                    return Err(HgError::InvalidMeasure("atom weights must be finite".into()));
                }
            }
            Ok(Body::DiracComb { atoms })
        }
        Body::ExpQuad(mut e) => {
            if !e.a.is_finite() {
                return Err(HgError::InvalidMeasure("A must be finite".into()));
            }
            fill_vec(&mut e.b, dim, "tilt b")?;
            fill_vec(&mut e.center, dim, "modifier center")?;
            if !(e.scale > 0.0 && e.scale.is_finite()) {
                return Err(HgError::InvalidMeasure("modifier scale must be positive".into()));
            }
            if !e.modifier.is_radial() {
                return Err(HgError::InvalidMeasure(
                    "the product window modifier is only valid inside a half-space piece".into(),
                ));
            }
            e.modifier.validate(dim)?;
            Ok(Body::ExpQuad(e))
        }
        Body::AnnulusSum(mut s) => {
            fill_vec(&mut s.center, dim, "annulus center")?;
            let mut prev = 0.0;
            for t in &s.terms {
                if !(t.b >= 0.0 && t.b.is_finite()) {
                    return Err(HgError::InvalidMeasure("annulus weights must be finite and nonnegative".into()));
                }
                if !(t.r > 1.0 && t.r.is_finite()) {
                    return Err(HgError::InvalidMeasure("annulus ratios must exceed 1".into()));
                }
                if !(t.lambda > prev && t.lambda.is_finite()) {
                    return Err(HgError::InvalidMeasure("annulus scales must be positive and strictly increasing".into()));
                }
                prev = t.lambda;
            }
            Ok(Body::AnnulusSum(s))
        }
        Body::HalfSpacePiece(mut h) => {
            fill_vec(&mut h.x0, dim, "x0")?;
            fill_vec(&mut h.shift, dim, "window shift")?;
            if h.n.len() != dim || (norm(&h.n) - 1.0).abs() > 1e-12 {
                return Err(HgError::InvalidMeasure("half-space normal must be a unit vector in dimension N".into()));
            }
            if !(h.c >= 0.0 && h.c.is_finite()) || (h.strict && h.c == 0.0) {
                return Err(HgError::InvalidMeasure("half-space offset must be >= 0 (> 0 when strict)".into()));
            }
            if !(h.eta0 >= 0.0 && h.eta0.is_finite() && h.a.is_finite() && h.scale > 0.0 && h.scale.is_finite()) {
                return Err(HgError::InvalidMeasure("half-space piece parameters out of range".into()));
            }
            Ok(Body::HalfSpacePiece(h))
        }
        Body::Grid(mut g) => {
            fill_vec(&mut g.center, dim, "grid center")?;
            if !(g.half_width > 0.0 && g.half_width.is_finite()) || g.cells_per_axis == 0 {
                return Err(HgError::InvalidMeasure("grid needs a positive support radius and at least one cell".into()));
            }
            let expected = g
                .cells_per_axis
                .checked_pow(dim as u32)
                .ok_or_else(|| HgError::InvalidMeasure("grid too large".into()))?;
            if g.samples.len() != expected {
                return Err(HgError::InvalidMeasure(format!(
                    "grid has {} samples, expected {expected}",
                    g.samples.len()
                )));
            }
            finite_vec(&g.samples, "grid samples")?;
            Ok(Body::Grid(g))
        }
        Body::Restricted(mut r) => {
            if r.inner.dimension != dim {
                return Err(HgError::DimensionMismatch { left: dim, right: r.inner.dimension });
            }
            fill_vec(&mut r.center, dim, "restriction center")?;
            if !(r.radius > 0.0 && r.radius.is_finite()) {
                return Err(HgError::InvalidMeasure("restriction radius must be positive".into()));
            }
            let inner = Measure::new(dim, r.inner.body)?;
            if matches!(inner.body, Body::Restricted(_)) {
                return Err(HgError::InvalidMeasure("nested restrictions are not supported".into()));
            }
            r.inner = Box::new(inner);
            Ok(Body::Restricted(r))
        }
        Body::Sum { components } => {
            let mut flat: Vec<Component> = Vec::new();
            for c in components {
                if !c.coefficient.is_finite() {
                    return Err(HgError::InvalidMeasure("sum coefficients must be finite".into()));
                }
                if c.measure.dimension != dim {
                    return Err(HgError::DimensionMismatch { left: dim, right: c.measure.dimension });
                }
                let inner = Measure::new(dim, c.measure.body)?;
                match inner.body {
                    Body::Sum { components } => {
                        for sub in components {
                            push_folded(&mut flat, dim, c.coefficient * sub.coefficient, sub.measure.body);
                        }
                    }
                    body => push_folded(&mut flat, dim, c.coefficient, body),
                }
            }
            if flat.len() == 1 && flat[0].coefficient == 1.0 {
                return Ok(flat.pop().unwrap().measure.body);
            }
            Ok(Body::Sum { components: flat })
        }
    }
}

/// Folds a coefficient into the leaf where the family supports it.
fn push_folded(out: &mut Vec<Component>, dim: usize, coef: f64, body: Body) {
    let (coef, body) = match body {
        Body::DiracComb { mut atoms } => {
            for a in &mut atoms {
                a.weight *= coef;
            }
            (1.0, Body::DiracComb { atoms })
        }
        Body::Grid(mut g) => {
            for s in &mut g.samples {
                *s *= coef;
            }
            (1.0, Body::Grid(g))
        }
        Body::AnnulusSum(mut s) if coef >= 0.0 => {
            for t in &mut s.terms {
                t.b *= coef;
            }
            (1.0, Body::AnnulusSum(s))
        }
        other => (coef, other),
    };
    out.push(Component {
        coefficient: coef,
        measure: Measure { dimension: dim, body },
    });
}

fn body_sign(body: &Body) -> Sign {
    match body {
        Body::DiracComb { atoms } => atoms
            .iter()
            .filter(|a| a.weight != 0.0)
            .map(|a| Sign::of(a.weight))
            .reduce(Sign::join)
            .unwrap_or(Sign::Nonnegative),
        Body::Grid(g) => g
            .samples
            .iter()
            .filter(|s| **s != 0.0)
            .map(|s| Sign::of(*s))
            .reduce(Sign::join)
            .unwrap_or(Sign::Nonnegative),
        Body::ExpQuad(_) | Body::AnnulusSum(_) | Body::HalfSpacePiece(_) => Sign::Nonnegative,
        Body::Restricted(r) => r.inner.sign(),
        Body::Sum { components } => components
            .iter()
            .filter(|c| c.coefficient != 0.0)
            .map(|c| {
                let s = c.measure.sign();
                if c.coefficient < 0.0 {
                    s.flip()
                } else {
                    s
                }
            })
            .reduce(Sign::join)
            .unwrap_or(Sign::Nonnegative),
    }
}

fn body_index(dim: usize, body: &Body) -> (f64, bool) {
    match body {
        Body::DiracComb { .. } | Body::AnnulusSum(_) | Body::Grid(_) => (0.0, true),
        Body::ExpQuad(_) | Body::HalfSpacePiece(_) => {
            let f = Factored::of(body).expect("growth family is factored");
            if f.a <= 0.0 {
                (0.0, true)
            } else {
                let w: Vec<f64> = f.beta.iter().map(|b| b / f.scale).collect();
                (f.a, f.profile.tilted_integrable(dim, &w))
            }
        }
        Body::Restricted(r) => {
            if r.outside {
                body_index(dim, &r.inner.body)
            } else {
                (0.0, true)
            }
        }
        Body::Sum { components } => {
            let idx: Vec<(f64, bool)> = components
                .iter()
                .filter(|c| c.coefficient != 0.0)
                .map(|c| body_index(dim, &c.measure.body))
                .collect();
            let eps0 = idx.iter().map(|p| p.0).fold(0.0, f64::max);
            let attained = idx.iter().filter(|p| p.0 == eps0).all(|p| p.1);
            (eps0, attained)
        }
    }
}

fn body_support(dim: usize, body: &Body) -> Option<(Vec<f64>, Vec<f64>)> {
    match body {
        Body::DiracComb { atoms } => {
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for a in atoms {
                for k in 0..dim {
                    lo[k] = lo[k].min(a.location[k]);
                    hi[k] = hi[k].max(a.location[k]);
                }
            }
            Some((lo, hi))
        }
        Body::AnnulusSum(s) => {
            let r = s.terms.iter().filter(|t| t.b != 0.0).map(|t| t.outer()).fold(f64::NEG_INFINITY, f64::max);
            if r == f64::NEG_INFINITY {
                return Some((vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]));
            }
            Some((s.center.iter().map(|c| c - r).collect(), s.center.iter().map(|c| c + r).collect()))
        }
        Body::Grid(g) => Some((
            g.center.iter().map(|c| c - g.half_width).collect(),
            g.center.iter().map(|c| c + g.half_width).collect(),
        )),
        Body::ExpQuad(_) => None,
        Body::HalfSpacePiece(_) => None,
        Body::Restricted(r) => {
            if r.outside {
                None
            } else {
                Some((
                    r.center.iter().map(|c| c - r.radius).collect(),
                    r.center.iter().map(|c| c + r.radius).collect(),
                ))
            }
        }
        Body::Sum { components } => {
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for c in components.iter().filter(|c| c.coefficient != 0.0) {
                let (l, h) = body_support(dim, &c.measure.body)?;
                for k in 0..dim {
                    lo[k] = lo[k].min(l[k]);
                    hi[k] = hi[k].max(h[k]);
                }
            }
            Some((lo, hi))
        }
    }
}

/// `(sign, ln|f(y)|)` for the density of an absolutely continuous leaf;
/// atoms contribute nothing.
pub fn ln_density(body: &Body, y: &[f64]) -> (f64, f64) {
    match body {
        Body::DiracComb { .. } => (1.0, f64::NEG_INFINITY),
        // Inline forms of `Factored::ln_density`; this sits in every hot loop.
        Body::ExpQuad(e) => {
            let r2: f64 = y.iter().map(|v| v * v).sum();
            let base = e.a * r2 + dot(&e.b, y);
            let lv = if e.modifier.is_radial() {
                let d2: f64 = y.iter().zip(&e.center).map(|(a, c)| (a - c) * (a - c)).sum();
                e.modifier.ln_radial(e.scale * d2.sqrt())
            } else {
                let z: Vec<f64> = y.iter().zip(&e.center).map(|(a, c)| e.scale * (a - c)).collect();
                e.modifier.ln_value(&z)
            };
            (1.0, base + lv)
        }
        Body::HalfSpacePiece(h) => {
            let mut r2 = 0.0;
            let mut x0y = 0.0;
            let mut z1 = 0.0;
            let mut zz = 0.0;
            for k in 0..y.len() {
                r2 += y[k] * y[k];
                x0y += h.x0[k] * y[k];
                let z = h.scale * (y[k] - h.shift[k]);
                z1 += z * h.n[k];
                zz += z * z;
            }
            if z1 <= 0.0 || (y.len() > 1 && zz - z1 * z1 >= 1.0) {
                return (1.0, f64::NEG_INFINITY);
            }
            (1.0, h.a * r2 - 2.0 * h.a * x0y + Modifier::ln_window_axis(h.eta0, !h.strict, z1))
        }
        Body::AnnulusSum(s) => {
            let r = y.iter().zip(&s.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let v: f64 = s
                .terms
                .iter()
                .filter(|t| r > t.inner() && r < t.outer())
                .map(|t| t.b)
                .sum();
            (1.0, v.ln())
        }
        Body::Grid(g) => {
            let v = g.value_at(y);
            (v.signum(), v.abs().ln())
        }
        Body::Restricted(r) => {
            if !r.contains(y) {
                return (1.0, f64::NEG_INFINITY);
            }
            let v = r.inner.density(y);
            if let [(c, b)] = r.inner.leaves().as_slice() {
                // Keep log precision for single growth leaves.
                let (s, l) = ln_density(b, y);
                return (s * c.signum(), l + c.abs().ln());
            }
            (v.signum(), v.abs().ln())
        }
        Body::Sum { components } => {
            let v: f64 = components
                .iter()
                .map(|c| {
                    let (s, l) = ln_density(&c.measure.body, y);
                    c.coefficient * s * l.exp()
                })
                .sum();
            (v.signum(), v.abs().ln())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_flatten_and_fold() {
        let d = Measure::dirac(vec![0.0], 1.0).unwrap();
        let g = Measure::indicator_cube(vec![0.0], 1.0).unwrap();
        let inner = Measure::sum(1, vec![(2.0, d.clone()), (1.0, g)]).unwrap();
        let outer = Measure::sum(1, vec![(-1.0, inner), (3.0, d)]).unwrap();
        let Body::Sum { components } = &outer.body else { panic!() };
        assert_eq!(components.len(), 3);
        assert!(components.iter().all(|c| c.coefficient == 1.0));
        assert_eq!(outer.sign(), Sign::Signed);
    }

    #[test]
    fn single_unit_sum_unwraps() {
        let d = Measure::dirac(vec![0.0, 1.0], 2.0).unwrap();
        let s = Measure::sum(2, vec![(1.0, d.clone())]).unwrap();
        assert_eq!(s, d);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(Measure::annulus_sum(1, vec![AnnulusTerm { b: 1.0, lambda: 2.0, r: 1.0 }]).is_err());
        assert!(Measure::annulus_sum(
            1,
            vec![
                AnnulusTerm { b: 1.0, lambda: 2.0, r: 2.0 },
                AnnulusTerm { b: 1.0, lambda: 2.0, r: 2.0 }
            ]
        )
        .is_err());
        assert!(Measure::exp_quad(1, 0.1, vec![], Modifier::StretchedExpDecay { gamma: 1.0, alpha: 2.0 }).is_err());
        assert!(Measure::exp_quad(1, 0.1, vec![], Modifier::ProductWindow { n: vec![1.0], eta0: 0.0, phi: true }).is_err());
        assert!(Measure::grid(2, vec![], 1.0, 2, vec![1.0; 3]).is_err());
        assert!(Measure::dirac(vec![f64::NAN], 1.0).is_err());
        let bad = HalfSpacePiece::new(vec![1.0, 0.0], 0.0, true, 0.25, vec![]);
        assert!(Measure::new(2, Body::HalfSpacePiece(bad)).is_err());
        let d1 = Measure::dirac(vec![0.0], 1.0).unwrap();
        let d2 = Measure::dirac(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            Measure::sum(1, vec![(1.0, d1), (1.0, d2)]),
            Err(HgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn growth_index_examples() {
        let m = Measure::exp_quad(1, 0.25, vec![], Modifier::One).unwrap();
        let g = m.growth_index();
        assert_eq!((g.eps0, g.attained), (0.25, Some(false)));
        let comb = Measure::dirac_comb(1, vec![Atom { location: vec![0.0], weight: 1.0 }]).unwrap();
        assert_eq!(comb.growth_index().eps0, 0.0);
        assert_eq!(comb.growth_index().attained, Some(true));
        let m = Measure::exp_quad(1, 0.25, vec![], Modifier::ExpDecay { gamma: 1.0 }).unwrap();
        assert_eq!(m.growth_index().attained, Some(true));
        // Power decay is attained only for alpha > N.
        let p = |alpha, dim| Measure::exp_quad(dim, 0.3, vec![], Modifier::PowerDecay { alpha }).unwrap().growth_index().attained;
        assert_eq!(p(1.5, 1), Some(true));
        assert_eq!(p(1.5, 2), Some(false));
        assert_eq!(p(1.0, 1), Some(false));
    }

    #[test]
    fn sum_attainment_is_conjunction_over_maximizers() {
        let a = Measure::exp_quad(1, 0.25, vec![], Modifier::ExpDecay { gamma: 1.0 }).unwrap();
        let b = Measure::exp_quad(1, 0.25, vec![], Modifier::One).unwrap();
        let c = Measure::exp_quad(1, 0.1, vec![], Modifier::One).unwrap();
        let s = Measure::sum(1, vec![(1.0, a.clone()), (1.0, c.clone())]).unwrap();
        assert_eq!(s.growth_index().attained, Some(true));
        let s = Measure::sum(1, vec![(1.0, a), (1.0, b), (1.0, c)]).unwrap();
        assert_eq!(s.growth_index().attained, Some(false));
    }

    #[test]
    fn grid_lookup_is_row_major() {
        let g = GridDensity {
            center: vec![0.0, 0.0],
            half_width: 1.0,
            cells_per_axis: 2,
            samples: vec![1.0, 2.0, 3.0, 4.0],
            sidecar: None,
        };
        assert_eq!(g.value_at(&[-0.5, 0.5]), 2.0);
        assert_eq!(g.value_at(&[0.5, -0.5]), 3.0);
        assert_eq!(g.value_at(&[1.5, 0.0]), 0.0);
    }
}
