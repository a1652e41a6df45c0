//! Quadrature engine.
//!
//! Every kernel integral in the crate bottoms out in one of the rules here:
//! adaptive Gauss–Kronrod (21 points) on finite intervals with a global
//! error-driven bisection queue, fixed Gauss–Legendre and Gauss–Hermite
//! rules, and the angular rules used for the spherical reductions in two and
//! three dimensions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{HgError, Result};

/// Tolerances and budgets shared by every integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Target relative error.
    pub rel_tol: f64,
    /// Absolute error floor.
    pub abs_tol: f64,
    /// Node budget for a single one-dimensional adaptive integral, counted in
    /// integrand evaluations.
    pub max_nodes_per_axis: usize,
    /// Multiplier on analytic truncation radii.
    pub tail_safety: f64,
    /// Minimum number of angular nodes for the circle/sphere rules.
    pub angular_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_nodes_per_axis: 4096,
            tail_safety: 1.25,
            angular_nodes: 64,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(HgError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_nodes_per_axis < 16 {
            return Err(HgError::InvalidConfig("max_nodes_per_axis must be at least 16".into()));
        }
        if !(self.tail_safety >= 1.0) {
            return Err(HgError::InvalidConfig("tail_safety must be >= 1".into()));
        }
        if self.angular_nodes < 4 {
            return Err(HgError::InvalidConfig("angular_nodes must be at least 4".into()));
        }
        Ok(())
    }

    /// Tolerance target for a quantity of magnitude `value`.
    pub fn target(&self, value: f64) -> f64 {
        (self.rel_tol * value.abs()).max(self.abs_tol)
    }

    /// A copy with the relative tolerance tightened by `factor`, used for
    /// inner integrals of nested rules.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Result of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

impl Integral {
    pub const ZERO: Integral = Integral { value: 0.0, error: 0.0, evals: 0 };

    pub fn add(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            error: self.error + other.error,
            evals: self.evals + other.evals,
        }
    }

    pub fn scale(self, c: f64) -> Integral {
        Integral {
            value: self.value * c,
            error: self.error * c.abs(),
            evals: self.evals,
        }
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_238,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// One 21-point Gauss–Kronrod panel. Returns (kronrod value, error estimate).
fn qk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    if !value.is_finite() {
        err = f64::INFINITY;
    }
    (value, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// `breakpoints` are interior points where the integrand is known to be
/// non-smooth; they seed the initial partition (points outside `(a, b)` are
/// ignored). `min_panels` splits the interval uniformly before adaption.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    min_panels: usize,
    cfg: &QuadratureConfig,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(HgError::QuadratureFailure(format!("non-finite interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral::ZERO);
    }
    if a > b {
        return integrate(f, b, a, breakpoints, min_panels, cfg).map(|r| r.scale(-1.0));
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    let n = min_panels.max(1);
    for i in 1..n {
        cuts.push(a + (b - a) * i as f64 / n as f64);
    }
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals = 0usize;
    for w in cuts.windows(2) {
        let (v, e) = qk21(&mut f, w[0], w[1]);
        evals += 21;
        total += v;
        total_err += e;
        heap.push(Panel { a: w[0], b: w[1], value: v, error: e });
    }
    // The budget never starves the seeded partition.
    let budget = cfg.max_nodes_per_axis.max(evals + 42);
    loop {
        if !total.is_finite() {
            return Err(HgError::QuadratureFailure("integrand produced non-finite values".into()));
        }
        if total_err <= cfg.target(total) {
            return Ok(Integral { value: total, error: total_err, evals });
        }
        if evals + 42 > budget {
            return Err(HgError::QuadratureFailure(format!(
                "adaptive quadrature on [{a:.6e}, {b:.6e}] reached {evals} evaluations with error {total_err:.3e} (value {total:.6e})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel can no longer be split in floating point.
            return Err(HgError::QuadratureFailure(format!(
                "panel collapsed near {mid:.6e} with error {:.3e}",
                worst.error
            )));
        }
        let (v1, e1) = qk21(&mut f, worst.a, mid);
        let (v2, e2) = qk21(&mut f, mid, worst.b);
        evals += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        // Guard against drift from the incremental sums.
        total_err = total_err.max(0.0);
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

/// Integral reported in log form: `value = e^{ln_value}` with relative
/// error `rel_error`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnIntegral {
    pub ln_value: f64,
    pub rel_error: f64,
    pub evals: usize,
}

impl LnIntegral {
    pub const ZERO: LnIntegral = LnIntegral {
        ln_value: f64::NEG_INFINITY,
        rel_error: 0.0,
        evals: 0,
    };
}

/// Integrates `e^{ln_h}` over the finite interval `[a, b]`, factoring out the
/// maximum of `ln_h` so that integrands far outside the floating-point
/// range are handled. `ln_h` should be close to unimodal; the maximum is
/// located by sampling followed by golden-section refinement.
pub fn ln_integrate<F: Fn(f64) -> f64>(
    ln_h: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<LnIntegral> {
    if !(b > a) {
        return Ok(LnIntegral::ZERO);
    }
    const SAMPLES: usize = 64;
    let xs: Vec<f64> = (0..=SAMPLES).map(|i| a + (b - a) * i as f64 / SAMPLES as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| ln_h(x)).collect();
    let mut evals = SAMPLES + 1;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, v) in vals.iter().enumerate() {
        if *v > best {
            best = *v;
            best_i = i;
        }
    }
    for &p in breakpoints {
        if p > a && p < b {
            let v = ln_h(p);
            evals += 1;
            best = best.max(v);
        }
    }
    // Golden-section refinement inside the bracket around the best sample.
    let mut lo = xs[best_i.saturating_sub(1)];
    let mut hi = xs[(best_i + 1).min(SAMPLES)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (ln_h(x1), ln_h(x2));
    for _ in 0..60 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = ln_h(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = ln_h(x2);
        }
        evals += 1;
        if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
            break;
        }
    }
    let x_star = if f1 >= f2 { x1 } else { x2 };
    let refv = best.max(f1).max(f2);
    if refv == f64::NEG_INFINITY {
        return Ok(LnIntegral { evals, ..LnIntegral::ZERO });
    }
    if !refv.is_finite() {
        return Err(HgError::QuadratureFailure("log-integrand is not finite".into()));
    }
    // Trim regions that sit more than e^{-80} below the peak.
    const DROP: f64 = 80.0;
    let mut left = a;
    for i in (0..best_i).rev() {
        if vals[i] < refv - DROP && xs[i] < x_star {
            left = xs[i];
            break;
        }
    }
    let mut right = b;
    for i in best_i + 1..=SAMPLES {
        if vals[i] < refv - DROP && xs[i] > x_star {
            right = xs[i];
            break;
        }
    }
    // The sample grid can be far coarser than the peak; without tightening
    // the ends, every node may miss a narrow peak and the error estimate
    // would still look converged.
    let crossing = |mut below: f64, mut above: f64| {
        for _ in 0..100 {
            let mid = 0.5 * (below + above);
            if mid == below || mid == above {
                break;
            }
            if ln_h(mid) < refv - DROP {
                below = mid;
            } else {
                above = mid;
            }
        }
        below
    };
    if left > a || ln_h(left) < refv - DROP {
        left = crossing(left, x_star);
        evals += 100;
    }
    if right < b || ln_h(right) < refv - DROP {
        right = crossing(right, x_star);
        evals += 100;
    }
    let mut breaks: Vec<f64> = breakpoints.to_vec();
    breaks.push(x_star);
    let r = integrate(|x| (ln_h(x) - refv).exp(), left, right, &breaks, 2, cfg)?;
    if r.value <= 0.0 {
        return Ok(LnIntegral { evals: evals + r.evals, ..LnIntegral::ZERO });
    }
    Ok(LnIntegral {
        ln_value: r.value.ln() + refv,
        rel_error: r.error / r.value,
        evals: evals + r.evals,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss–Hermite nodes and weights for the weight `e^{-x²}` on the real line.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 3e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Unit directions and weights for integrating over the unit sphere in
/// `dim` dimensions (weights sum to the sphere's surface measure).
///
/// `dim = 1` gives the two points `±1`; `dim = 2` the trapezoid rule on the
/// circle (exact for trigonometric polynomials of degree below `n`);
/// `dim = 3` a product rule with Gauss–Legendre in the polar cosine and the
/// trapezoid rule in azimuth.
pub fn sphere_rule(dim: usize, n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    use std::f64::consts::PI;
    match dim {
        1 => Ok(vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]),
        2 => Ok((0..n)
            .map(|k| {
                let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                (vec![th.cos(), th.sin()], 2.0 * PI / n as f64)
            })
            .collect()),
        3 => {
            let n_polar = n.div_ceil(2).max(2);
            let (cx, cw) = gauss_legendre(n_polar);
            let mut out = Vec::with_capacity(n_polar * n);
            for (c, wc) in cx.iter().zip(cw.iter()) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for k in 0..n {
                    let ph = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                    out.push((vec![s * ph.cos(), s * ph.sin(), *c], wc * 2.0 * PI / n as f64));
                }
            }
            Ok(out)
        }
        _ => Err(HgError::DimensionUnsupported {
            dim,
            what: "angular quadrature".into(),
        }),
    }
}

/// Nested adaptive integration over an axis-aligned box in up to three
/// dimensions.
///
/// `line_breaks(axis, prefix)` returns breakpoints for the innermost free
/// coordinate `axis` given the already fixed outer coordinates `prefix`.
pub fn integrate_box<F, B>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    line_breaks: &B,
    cfg: &QuadratureConfig,
) -> Result<Integral>
where
    F: Fn(&[f64]) -> f64,
    B: Fn(usize, &[f64]) -> Vec<f64>,
{
    let dim = lo.len();
    if dim == 0 || dim > 3 {
        return Err(HgError::DimensionUnsupported {
            dim,
            what: "tensor quadrature".into(),
        });
    }
    let mut prefix = Vec::with_capacity(dim);
    nested(f, lo, hi, line_breaks, cfg, &mut prefix)
}

fn nested<F, B>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    line_breaks: &B,
    cfg: &QuadratureConfig,
    prefix: &mut Vec<f64>,
) -> Result<Integral>
where
    F: Fn(&[f64]) -> f64,
    B: Fn(usize, &[f64]) -> Vec<f64>,
{
    let axis = prefix.len();
    let dim = lo.len();
    let breaks = line_breaks(axis, prefix);
    if axis + 1 == dim {
        let mut point = prefix.clone();
        point.push(0.0);
        return integrate(
            |s| {
                point[axis] = s;
                f(&point)
            },
            lo[axis],
            hi[axis],
            &breaks,
            4,
            cfg,
        );
    }
    let inner_cfg = cfg.tightened(0.1);
    let mut evals = 0usize;
    let mut inner_err = 0.0;
    let mut failure: Option<HgError> = None;
    let outer = integrate(
        |s| {
            if failure.is_some() {
                return 0.0;
            }
            prefix.push(s);
            let r = nested(f, lo, hi, line_breaks, &inner_cfg, prefix);
            prefix.pop();
            match r {
                Ok(r) => {
                    evals += r.evals;
                    inner_err = f64::max(inner_err, r.error);
                    r.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        lo[axis],
        hi[axis],
        &breaks,
        4,
        cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let outer = outer?;
    Ok(Integral {
        value: outer.value,
        error: outer.error + inner_err * (hi[axis] - lo[axis]),
        evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_and_gaussian() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x| x * x, 0.0, 3.0, &[], 1, &cfg).unwrap();
        assert!((r.value - 9.0).abs() < 1e-13);
        let r = integrate(|x| (-x * x).exp(), -10.0, 10.0, &[], 1, &cfg).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gk_kink_with_breakpoint() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x: f64| (-x.abs()).exp(), -30.0, 30.0, &[0.0], 1, &cfg).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn gk_budget_exhaustion_is_reported() {
        let cfg = QuadratureConfig { max_nodes_per_axis: 16, rel_tol: 1e-15, ..Default::default() };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-4, 1.0, &[], 1, &cfg);
        assert!(matches!(r, Err(HgError::QuadratureFailure(_))));
    }

    #[test]
    fn ln_integrate_handles_huge_exponents() {
        let cfg = QuadratureConfig::default();
        // ∫ e^{1000 - (x-3)²} dx over the line = e^{1000} √π.
        let r = ln_integrate(|x| 1000.0 - (x - 3.0) * (x - 3.0), -50.0, 60.0, &[], &cfg).unwrap();
        let want = 1000.0 + 0.5 * std::f64::consts::PI.ln();
        assert!((r.ln_value - want).abs() < 1e-10);
        // A narrow peak far from the sample grid.
        let r = ln_integrate(|x| -50.0 * (x - 1234.567).powi(2), 0.0, 5000.0, &[], &cfg).unwrap();
        let want = 0.5 * (std::f64::consts::PI / 50.0).ln();
        assert!((r.ln_value - want).abs() < 1e-9);
    }

    #[test]
    fn legendre_and_hermite_moments() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        let (x, w) = gauss_hermite(20);
        let m0: f64 = w.iter().sum();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        let sp = std::f64::consts::PI.sqrt();
        assert!((m0 - sp).abs() < 1e-13);
        assert!((m4 - 0.75 * sp).abs() < 1e-12);
    }

    #[test]
    fn sphere_rules_have_correct_area() {
        use std::f64::consts::PI;
        let a2: f64 = sphere_rule(2, 64).unwrap().iter().map(|p| p.1).sum();
        let a3: f64 = sphere_rule(3, 32).unwrap().iter().map(|p| p.1).sum();
        assert!((a2 - 2.0 * PI).abs() < 1e-13);
        assert!((a3 - 4.0 * PI).abs() < 1e-12);
        // Second moment of z on the sphere is 4π/3.
        let m: f64 = sphere_rule(3, 32).unwrap().iter().map(|(p, w)| w * p[2] * p[2]).sum();
        assert!((m - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_integral_of_gaussian() {
        let cfg = QuadratureConfig { rel_tol: 1e-10, ..Default::default() };
        let f = |p: &[f64]| (-(p[0] * p[0] + p[1] * p[1])).exp();
        let r = integrate_box(&f, &[-8.0, -8.0], &[8.0, 8.0], &|_, _| Vec::new(), &cfg).unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-9);
    }
}
