//! Truncated multivariate Taylor arithmetic and heat-kernel polynomials.

use std::collections::HashMap;

/// Monomials of total degree `≤ deg` in `nv` variables with a product table.
pub(crate) struct JetSpace {
    pub nv: usize,
    pub deg: usize,
    monos: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    table: Vec<(usize, usize, usize)>,
}

impl JetSpace {
    pub fn new(nv: usize, deg: usize) -> JetSpace {
        let mut monos = vec![vec![0u8; nv]];
        for d in 1..=deg {
            let mut cur = Vec::new();
            gen(nv, d, &mut vec![0u8; nv], 0, &mut cur);
            monos.extend(cur);
        }
        let index: HashMap<Vec<u8>, usize> = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let mut table = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                let s: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                if let Some(&k) = index.get(&s) {
                    table.push((i, j, k));
                }
            }
        }
        JetSpace { nv, deg, monos, index, table }
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn constant(&self, c: f64) -> Jet<'_> {
        let mut v = vec![0.0; self.len()];
        v[0] = c;
        Jet { sp: self, c: v }
    }

    /// The jet of the coordinate `k` expanded about `at`.
    pub fn var(&self, k: usize, at: f64) -> Jet<'_> {
        let mut j = self.constant(at);
        if self.deg > 0 {
            let mut e = vec![0u8; self.nv];
            e[k] = 1;
            j.c[self.index[&e]] = 1.0;
        }
        j
    }
}

fn gen(nv: usize, left: usize, cur: &mut Vec<u8>, k: usize, out: &mut Vec<Vec<u8>>) {
    if k + 1 == nv {
        cur[k] = left as u8;
        out.push(cur.clone());
        cur[k] = 0;
        return;
    }
    for e in (0..=left).rev() {
        cur[k] = e as u8;
        gen(nv, left - e, cur, k + 1, out);
    }
    cur[k] = 0;
}

#[derive(Clone)]
pub(crate) struct Jet<'a> {
    sp: &'a JetSpace,
    pub c: Vec<f64>,
}

impl<'a> Jet<'a> {
    pub fn add(&self, o: &Jet<'a>) -> Jet<'a> {
        Jet { sp: self.sp, c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: f64) -> Jet<'a> {
        Jet { sp: self.sp, c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn add_const(&self, s: f64) -> Jet<'a> {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }

    pub fn mul(&self, o: &Jet<'a>) -> Jet<'a> {
        let mut c = vec![0.0; self.c.len()];
        for &(i, j, k) in &self.sp.table {
            c[k] += self.c[i] * o.c[j];
        }
        Jet { sp: self.sp, c }
    }

    /// `Σ_{k ≤ deg} a_k g^k` with `g` the non-constant part.
    fn series(&self, a: &[f64]) -> Jet<'a> {
        let mut g = self.clone();
        g.c[0] = 0.0;
        let mut out = self.sp.constant(a[0]);
        let mut p = self.sp.constant(1.0);
        for ak in a.iter().skip(1) {
            p = p.mul(&g);
            out = out.add(&p.scale(*ak));
        }
        out
    }

    pub fn exp(&self) -> Jet<'a> {
        let e0 = self.c[0].exp();
        let mut a = vec![e0];
        let mut f = 1.0;
        for k in 1..=self.sp.deg {
            f *= k as f64;
            a.push(e0 / f);
        }
        self.series(&a)
    }

    pub fn ln(&self) -> Jet<'a> {
        let f0 = self.c[0];
        let mut a = vec![f0.ln()];
        for k in 1..=self.sp.deg {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            a.push(sign / (k as f64 * f0.powi(k as i32)));
        }
        self.series(&a)
    }

    pub fn recip(&self) -> Jet<'a> {
        let f0 = self.c[0];
        let a: Vec<f64> = (0..=self.sp.deg).map(|k| (-1f64).powi(k as i32) / f0.powi(k as i32 + 1)).collect();
        self.series(&a)
    }

    /// `∂^e f` at the expansion point.
    pub fn derivative(&self, e: &[u8]) -> f64 {
        match self.sp.index.get(e) {
            Some(&k) => self.c[k] * e.iter().map(|&v| crate::special::factorial(v as usize)).product::<f64>(),
            None => 0.0,
        }
    }
}

/// `∂_x^α ∂_t^m K(w, t) = K(w, t) · P(w, t)` with `P` a polynomial in `w`
/// and `1/t`, `w = x - y`.
#[derive(Debug, Clone)]
pub(crate) struct KernelPoly {
    dim: usize,
    /// `(powers of w, power of 1/t, coefficient)`
    terms: Vec<(Vec<u8>, i32, f64)>,
}

impl KernelPoly {
    pub fn new(dim: usize, alpha: &[usize], m: usize) -> KernelPoly {
        let mut p = KernelPoly { dim, terms: vec![(vec![0; dim], 0, 1.0)] };
        for (i, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                p = p.dx(i);
            }
        }
        for _ in 0..m {
            p = p.dt();
        }
        p.simplify();
        p
    }

    /// `∂_{x_i}(K P) = K (-w_i/(2t) P + ∂_{w_i} P)`
    fn dx(&self, i: usize) -> KernelPoly {
        let mut out = Vec::new();
        for (b, k, c) in &self.terms {
            let mut nb = b.clone();
            nb[i] += 1;
            out.push((nb, k + 1, -0.5 * c));
            if b[i] > 0 {
                let mut nb = b.clone();
                nb[i] -= 1;
                out.push((nb, *k, c * b[i] as f64));
            }
        }
        KernelPoly { dim: self.dim, terms: out }
    }

    /// `∂_t(K P) = K ((|w|²/(4t²) - N/(2t)) P + ∂_t P)`
    fn dt(&self) -> KernelPoly {
        let mut out = Vec::new();
        for (b, k, c) in &self.terms {
            for j in 0..self.dim {
                let mut nb = b.clone();
                nb[j] += 2;
                out.push((nb, k + 2, 0.25 * c));
            }
            out.push((b.clone(), k + 1, -0.5 * self.dim as f64 * c));
            if *k != 0 {
                out.push((b.clone(), k + 1, -(*k as f64) * c));
            }
        }
        KernelPoly { dim: self.dim, terms: out }
    }

    fn simplify(&mut self) {
        let mut map: HashMap<(Vec<u8>, i32), f64> = HashMap::new();
        for (b, k, c) in self.terms.drain(..) {
            *map.entry((b, k)).or_insert(0.0) += c;
        }
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| *c != 0.0).map(|((b, k), c)| (b, k, c)).collect();
        terms.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        self.terms = terms;
    }

    pub fn eval(&self, w: &[f64], t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(b, k, c)| c * t.powi(-k) * b.iter().zip(w).map(|(e, x)| x.powi(*e as i32)).product::<f64>())
            .sum()
    }

    /// Sum of absolute term values, a scale for rounding error.
    pub fn eval_abs(&self, w: &[f64], t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(b, k, c)| (c * t.powi(-k) * b.iter().zip(w).map(|(e, x)| x.powi(*e as i32)).product::<f64>()).abs())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_exp_ln_recip() {
        let sp = JetSpace::new(2, 4);
        let x = sp.var(0, 0.3);
        let y = sp.var(1, -0.2);
        // f = exp(x y) / (1 + x)
        let f = x.mul(&y).exp().mul(&x.add_const(1.0).recip());
        let v = |x: f64, y: f64| (x * y).exp() / (1.0 + x);
        let h = 1e-3;
        let fd = (v(0.3 + h, -0.2) - v(0.3 - h, -0.2)) / (2.0 * h);
        assert!((f.derivative(&[1, 0]) - fd).abs() < 1e-6);
        assert!((f.derivative(&[0, 0]) - v(0.3, -0.2)).abs() < 1e-15);
        let l = x.add_const(1.0).ln();
        // d⁴/dx⁴ ln(1+x) = -6/(1+x)⁴
        assert!((l.derivative(&[4, 0]) + 6.0 / 1.3f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn kernel_poly_matches_heat_equation() {
        let t = 0.7;
        let w = [0.4, -1.1];
        let lap = KernelPoly::new(2, &[2, 0], 0).eval(&w, t) + KernelPoly::new(2, &[0, 2], 0).eval(&w, t);
        let dt = KernelPoly::new(2, &[0, 0], 1).eval(&w, t);
        assert!((lap - dt).abs() < 1e-14);
        // ∂_x K / K = -w/(2t)
        assert!((KernelPoly::new(2, &[1, 0], 0).eval(&w, t) + w[0] / (2.0 * t)).abs() < 1e-15);
    }
}
