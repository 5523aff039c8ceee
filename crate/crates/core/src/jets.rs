//! Truncated power series ("jets") in one and three variables.
//!
//! Coefficients are Taylor coefficients (derivative / k!). Elementary
//! functions are computed by the Euler-operator recurrences: with `E` the
//! operator multiplying a monomial by its total degree, `E exp(a) = exp(a)·E a`,
//! `a·E log(a) = E a`, and so on. Each recurrence only needs the two sums
//! `Σ_{ν≠0} a_ν b_{μ−ν}` and `Σ_{ν≠0} |ν| a_ν b_{μ−ν}`, which both jet types
//! provide through [`Series::conv_at`].

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Operations shared by [`Jet1`] and [`Jet3`]. Flat coefficient storage is in
/// graded order: total degree never decreases along the slice.
pub trait Series: Clone + Sized {
    fn coeffs(&self) -> &[C64];
    fn coeffs_mut(&mut self) -> &mut [C64];
    fn zeros_like(&self) -> Self;
    /// Total degree of the monomial stored at flat index `k`.
    fn degree_of(&self, k: usize) -> usize;
    /// `(Σ a_ν b_{μ−ν}, Σ |ν| a_ν b_{μ−ν})` over `ν ≠ 0, ν ≤ μ`, where `μ` is
    /// the monomial at flat index `k`.
    fn conv_at(&self, a: &[C64], b: &[C64], k: usize) -> (C64, C64);
    fn mul_trunc(&self, other: &Self) -> Self;

    fn constant_term(&self) -> C64 {
        self.coeffs()[0]
    }

    fn constant_like(&self, c: C64) -> Self {
        let mut z = self.zeros_like();
        z.coeffs_mut()[0] = c;
        z
    }

    fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.coeffs_mut().iter_mut().for_each(|c| *c *= s);
        out
    }

    fn add_const(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.coeffs_mut()[0] += s;
        out
    }

    fn add_series(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (x, y) in out.coeffs_mut().iter_mut().zip(o.coeffs()) {
            *x += *y;
        }
        out
    }

    fn sub_series(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (x, y) in out.coeffs_mut().iter_mut().zip(o.coeffs()) {
            *x -= *y;
        }
        out
    }

    /// Largest coefficient magnitude.
    fn max_norm(&self) -> f64 {
        self.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Sum of coefficient magnitudes: a bound for the polynomial on the unit polydisc.
    fn l1_norm(&self) -> f64 {
        self.coeffs().iter().map(|c| c.norm()).sum()
    }

    /// `Σ |c_μ| ρ^{|μ|}`: a bound for the polynomial on the polydisc of radius `ρ`.
    fn weighted_l1(&self, rho: f64) -> f64 {
        self.coeffs().iter().enumerate().map(|(k, c)| c.norm() * rho.powi(self.degree_of(k) as i32)).sum()
    }

    /// `self / other`.
    fn div_series(&self, other: &Self) -> Result<Self> {
        let a0 = other.constant_term();
        if a0 == C64::new(0.0, 0.0) {
            return Err(Error::SingularJet);
        }
        let inv_a0 = 1.0 / a0;
        let a = other.coeffs();
        let c = self.coeffs();
        let mut out = self.zeros_like();
        let n = c.len();
        for k in 0..n {
            let (s0, _) = if k == 0 {
                (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
            } else {
                out.conv_at(a, out.coeffs(), k)
            };
            let v = (c[k] - s0) * inv_a0;
            out.coeffs_mut()[k] = v;
        }
        Ok(out)
    }

    fn recip(&self) -> Result<Self> {
        self.constant_like(C64::new(1.0, 0.0)).div_series(self)
    }

    fn exp(&self) -> Self {
        let a = self.coeffs();
        let mut out = self.zeros_like();
        out.coeffs_mut()[0] = a[0].exp();
        for k in 1..a.len() {
            let (_, s1) = out.conv_at(a, out.coeffs(), k);
            let d = out.degree_of(k) as f64;
            out.coeffs_mut()[k] = s1 / d;
        }
        out
    }

    /// Principal-branch logarithm; the constant term must avoid `(−∞, 0]`.
    fn ln(&self) -> Result<Self> {
        let a = self.coeffs();
        let a0 = a[0];
        check_principal_cut(a0, "log")?;
        let mut out = self.zeros_like();
        out.coeffs_mut()[0] = a0.ln();
        let inv_a0 = 1.0 / a0;
        for k in 1..a.len() {
            let (s0, s1) = out.conv_at(a, out.coeffs(), k);
            let d = out.degree_of(k) as f64;
            out.coeffs_mut()[k] = (a[k] * d - (s0 * d - s1)) * inv_a0 / d;
        }
        Ok(out)
    }

    /// `self^alpha` on the principal branch.
    fn pow(&self, alpha: C64) -> Result<Self> {
        let a0 = self.constant_term();
        check_principal_cut(a0, "pow")?;
        Ok(self.pow_from(alpha, a0.powc(alpha)))
    }

    /// Integer power; no branch restriction, needs a nonzero constant term
    /// only for negative exponents.
    fn powi(&self, n: i32) -> Result<Self> {
        let a0 = self.constant_term();
        if n >= 0 {
            let mut result = self.constant_like(C64::new(1.0, 0.0));
            let mut base = self.clone();
            let mut e = n as u32;
            while e > 0 {
                if e & 1 == 1 {
                    result = result.mul_trunc(&base);
                }
                e >>= 1;
                if e > 0 {
                    base = base.mul_trunc(&base);
                }
            }
            return Ok(result);
        }
        if a0 == C64::new(0.0, 0.0) {
            return Err(Error::SingularJet);
        }
        Ok(self.pow_from(C64::new(n as f64, 0.0), a0.powi(n)))
    }

    #[doc(hidden)]
    fn pow_from(&self, alpha: C64, b0: C64) -> Self {
        let a = self.coeffs();
        let inv_a0 = 1.0 / a[0];
        let mut out = self.zeros_like();
        out.coeffs_mut()[0] = b0;
        for k in 1..a.len() {
            let (s0, s1) = out.conv_at(a, out.coeffs(), k);
            let d = out.degree_of(k) as f64;
            out.coeffs_mut()[k] = ((alpha + 1.0) * s1 - s0 * d) * inv_a0 / d;
        }
        out
    }

    fn sqrt(&self) -> Result<Self> {
        self.pow(C64::new(0.5, 0.0))
    }

    fn sin_cos(&self) -> (Self, Self) {
        let a = self.coeffs();
        let mut s = self.zeros_like();
        let mut c = self.zeros_like();
        s.coeffs_mut()[0] = a[0].sin();
        c.coeffs_mut()[0] = a[0].cos();
        for k in 1..a.len() {
            let (_, sc) = c.conv_at(a, c.coeffs(), k);
            let (_, ss) = s.conv_at(a, s.coeffs(), k);
            let d = s.degree_of(k) as f64;
            s.coeffs_mut()[k] = sc / d;
            c.coeffs_mut()[k] = -ss / d;
        }
        (s, c)
    }

    fn sin(&self) -> Self {
        self.sin_cos().0
    }

    fn cos(&self) -> Self {
        self.sin_cos().1
    }

    /// Principal arctangent.
    fn atan(&self) -> Result<Self> {
        let a0 = self.constant_term();
        let w0 = C64::new(1.0, 0.0) + a0 * a0;
        if w0.norm() < 1e-300 || (a0.re == 0.0 && a0.im.abs() >= 1.0) {
            return Err(Error::Domain { function: "atan", detail: format!("argument {a0} on a branch cut") });
        }
        let w = self.mul_trunc(self).add_const(C64::new(1.0, 0.0));
        let a = self.coeffs();
        let wc = w.coeffs();
        let inv_w0 = 1.0 / wc[0];
        let mut out = self.zeros_like();
        out.coeffs_mut()[0] = a0.atan();
        for k in 1..a.len() {
            let (s0, s1) = out.conv_at(wc, out.coeffs(), k);
            let d = out.degree_of(k) as f64;
            out.coeffs_mut()[k] = (a[k] * d - (s0 * d - s1)) * inv_w0 / d;
        }
        Ok(out)
    }
}

fn check_principal_cut(a0: C64, function: &'static str) -> Result<()> {
    if a0.im == 0.0 && a0.re <= 0.0 {
        return Err(Error::Domain { function, detail: format!("constant term {a0} on the cut (−∞, 0]") });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Jet1

/// Univariate truncated power series of order `N` (`N+1` coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub c: Vec<C64>,
}

impl Jet1 {
    pub fn zeros(order: usize) -> Self {
        Jet1 { c: vec![C64::new(0.0, 0.0); order + 1] }
    }

    pub fn constant(v: C64, order: usize) -> Self {
        let mut j = Self::zeros(order);
        j.c[0] = v;
        j
    }

    /// The identity function expanded at `x0`: `x0 + t`.
    pub fn variable(x0: C64, order: usize) -> Self {
        let mut j = Self::constant(x0, order);
        if order >= 1 {
            j.c[1] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn from_coeffs(c: Vec<C64>) -> Self {
        assert!(!c.is_empty());
        Jet1 { c }
    }

    pub fn from_real(c: &[f64]) -> Self {
        Jet1 { c: c.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// Same series truncated (or zero-extended) to a new order.
    pub fn with_order(&self, order: usize) -> Self {
        let mut c = self.c.clone();
        c.resize(order + 1, C64::new(0.0, 0.0));
        Jet1 { c }
    }

    /// Evaluates the polynomial at offset `t` from the expansion point.
    pub fn eval(&self, t: C64) -> C64 {
        self.c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * t + c)
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative_at(&self, k: usize) -> C64 {
        self.c[k] * crate::geometry::factorial(k)
    }

    /// `outer ∘ inner`; the inner series must vanish at the expansion point.
    pub fn compose(&self, inner: &Jet1) -> Result<Jet1> {
        if inner.c[0].norm() != 0.0 {
            return Err(Error::Composition);
        }
        let n = inner.order();
        let mut acc = Jet1::constant(*self.c.last().unwrap(), n);
        for &ck in self.c.iter().rev().skip(1) {
            acc = acc.mul_trunc(inner).add_const(ck);
        }
        Ok(acc.with_order(n))
    }

    /// Substitutes `inner` (zero constant term) into a univariate outer series
    /// with a multivariate inner argument.
    pub fn compose_into<S: Series>(&self, inner: &S) -> Result<S> {
        if inner.constant_term().norm() != 0.0 {
            return Err(Error::Composition);
        }
        let mut acc = inner.constant_like(*self.c.last().unwrap());
        for &ck in self.c.iter().rev().skip(1) {
            acc = acc.mul_trunc(inner).add_const(ck);
        }
        Ok(acc)
    }

    /// Term-by-term integral `∫_0^w p(s) ds`.
    pub fn integrate_to(&self, w: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let mut wp = w;
        for (k, &c) in self.c.iter().enumerate() {
            acc += c * (wp / (k as f64 + 1.0));
            wp *= w;
        }
        acc
    }

    /// Antiderivative with zero constant term, truncated at the same order.
    pub fn antiderivative(&self) -> Jet1 {
        let n = self.order();
        let mut out = Jet1::zeros(n);
        for k in 1..=n {
            out.c[k] = self.c[k - 1] / k as f64;
        }
        out
    }

    pub fn derivative(&self) -> Jet1 {
        let n = self.order();
        let mut out = Jet1::zeros(n);
        for k in 0..n {
            out.c[k] = self.c[k + 1] * (k as f64 + 1.0);
        }
        out
    }
}

impl Series for Jet1 {
    fn coeffs(&self) -> &[C64] {
        &self.c
    }
    fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.c
    }
    fn zeros_like(&self) -> Self {
        Jet1::zeros(self.order())
    }
    #[inline]
    fn degree_of(&self, k: usize) -> usize {
        k
    }
    #[inline]
    fn conv_at(&self, a: &[C64], b: &[C64], k: usize) -> (C64, C64) {
        let mut s0 = C64::new(0.0, 0.0);
        let mut s1 = C64::new(0.0, 0.0);
        for nu in 1..=k {
            let p = a[nu] * b[k - nu];
            s0 += p;
            s1 += p * nu as f64;
        }
        (s0, s1)
    }
    fn mul_trunc(&self, other: &Self) -> Self {
        assert_eq!(self.c.len(), other.c.len(), "jet orders differ");
        let n = self.c.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, &a) in self.c.iter().enumerate() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            for (o, &b) in out[i..].iter_mut().zip(&other.c) {
                *o += a * b;
            }
        }
        Jet1 { c: out }
    }
}

// ---------------------------------------------------------------------------
// Jet3

/// Monomial set of a [`Jet3`]: `t^i y^j θ^k` is kept iff `i+j+k ≤ total`,
/// `j+k ≤ rest` and `k ≤ theta`. The standard total-degree jet uses
/// `rest = theta = total`; the narrower shapes let derivatives in the
/// (y, θ) directions stay low while the t-direction goes deep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Jet3Shape {
    pub total: usize,
    pub rest: usize,
    pub theta: usize,
}

impl Jet3Shape {
    pub fn total_degree(d: usize) -> Self {
        Jet3Shape { total: d, rest: d, theta: d }
    }

    pub fn contains(&self, i: usize, j: usize, k: usize) -> bool {
        i + j + k <= self.total && j + k <= self.rest && k <= self.theta
    }
}

/// Precomputed index maps for one [`Jet3Shape`].
#[derive(Debug)]
pub struct Jet3Layout {
    pub shape: Jet3Shape,
    monomials: Vec<(usize, usize, usize)>,
    degrees: Vec<usize>,
    box_index: Vec<usize>,
    dims: (usize, usize, usize),
}

impl Jet3Layout {
    pub fn new(shape: Jet3Shape) -> Arc<Self> {
        let rest = shape.rest.min(shape.total);
        let theta = shape.theta.min(rest);
        let dims = (shape.total + 1, rest + 1, theta + 1);
        let mut monomials = Vec::new();
        for deg in 0..=shape.total {
            for i in (0..=deg).rev() {
                for j in (0..=deg - i).rev() {
                    let k = deg - i - j;
                    if shape.contains(i, j, k) {
                        monomials.push((i, j, k));
                    }
                }
            }
        }
        let mut box_index = vec![usize::MAX; dims.0 * dims.1 * dims.2];
        for (idx, &(i, j, k)) in monomials.iter().enumerate() {
            box_index[(i * dims.1 + j) * dims.2 + k] = idx;
        }
        let degrees = monomials.iter().map(|&(i, j, k)| i + j + k).collect();
        Arc::new(Jet3Layout { shape, monomials, degrees, box_index, dims })
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, idx: usize) -> (usize, usize, usize) {
        self.monomials[idx]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        if i >= self.dims.0 || j >= self.dims.1 || k >= self.dims.2 {
            return None;
        }
        let v = self.box_index[(i * self.dims.1 + j) * self.dims.2 + k];
        (v != usize::MAX).then_some(v)
    }

    #[inline]
    fn index_unchecked(&self, i: usize, j: usize, k: usize) -> usize {
        self.box_index[(i * self.dims.1 + j) * self.dims.2 + k]
    }
}

/// Trivariate truncated power series in the NAK offsets `(t, y, θ)`.
#[derive(Debug, Clone)]
pub struct Jet3 {
    layout: Arc<Jet3Layout>,
    pub c: Vec<C64>,
}

impl Jet3 {
    pub fn zeros(layout: &Arc<Jet3Layout>) -> Self {
        Jet3 { layout: layout.clone(), c: vec![C64::new(0.0, 0.0); layout.len()] }
    }

    pub fn constant(layout: &Arc<Jet3Layout>, v: C64) -> Self {
        let mut j = Self::zeros(layout);
        j.c[0] = v;
        j
    }

    /// Coordinate function `x0 + var_axis` (axis 0 = t, 1 = y, 2 = θ).
    pub fn variable(layout: &Arc<Jet3Layout>, axis: usize, x0: C64) -> Self {
        let mut j = Self::constant(layout, x0);
        let idx = match axis {
            0 => layout.index(1, 0, 0),
            1 => layout.index(0, 1, 0),
            _ => layout.index(0, 0, 1),
        };
        if let Some(idx) = idx {
            j.c[idx] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn layout(&self) -> &Arc<Jet3Layout> {
        &self.layout
    }

    pub fn shape(&self) -> Jet3Shape {
        self.layout.shape
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> C64 {
        self.layout.index(i, j, k).map_or(C64::new(0.0, 0.0), |idx| self.c[idx])
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: C64) {
        if let Some(idx) = self.layout.index(i, j, k) {
            self.c[idx] = v;
        }
    }

    /// The univariate jet along one axis (other variables set to zero).
    pub fn restrict(&self, axis: usize) -> Jet1 {
        let s = self.layout.shape;
        let n = match axis {
            0 => s.total,
            1 => s.rest.min(s.total),
            _ => s.theta.min(s.rest).min(s.total),
        };
        let mut out = Jet1::zeros(n);
        for m in 0..=n {
            out.c[m] = match axis {
                0 => self.get(m, 0, 0),
                1 => self.get(0, m, 0),
                _ => self.get(0, 0, m),
            };
        }
        out
    }

    /// Evaluates the polynomial at offsets `(t, y, θ)`.
    pub fn eval(&self, t: C64, y: C64, th: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (idx, &c) in self.c.iter().enumerate() {
            let (i, j, k) = self.layout.monomial(idx);
            acc += c * t.powu(i as u32) * y.powu(j as u32) * th.powu(k as u32);
        }
        acc
    }

    /// Copies the coefficients into a layout with a smaller (or equal) shape.
    pub fn project(&self, layout: &Arc<Jet3Layout>) -> Jet3 {
        let mut out = Jet3::zeros(layout);
        for idx in 0..layout.len() {
            let (i, j, k) = layout.monomial(idx);
            out.c[idx] = self.get(i, j, k);
        }
        out
    }
}

impl Series for Jet3 {
    fn coeffs(&self) -> &[C64] {
        &self.c
    }
    fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.c
    }
    fn zeros_like(&self) -> Self {
        Jet3::zeros(&self.layout)
    }
    #[inline]
    fn degree_of(&self, k: usize) -> usize {
        self.layout.degrees[k]
    }
    fn conv_at(&self, a: &[C64], b: &[C64], k: usize) -> (C64, C64) {
        let lay = &*self.layout;
        let (i, j, kk) = lay.monomial(k);
        let mut s0 = C64::new(0.0, 0.0);
        let mut s1 = C64::new(0.0, 0.0);
        for i1 in 0..=i {
            for j1 in 0..=j {
                for k1 in 0..=kk {
                    if i1 + j1 + k1 == 0 {
                        continue;
                    }
                    let av = a[lay.index_unchecked(i1, j1, k1)];
                    if av.re == 0.0 && av.im == 0.0 {
                        continue;
                    }
                    let p = av * b[lay.index_unchecked(i - i1, j - j1, kk - k1)];
                    s0 += p;
                    s1 += p * (i1 + j1 + k1) as f64;
                }
            }
        }
        (s0, s1)
    }
    fn mul_trunc(&self, other: &Self) -> Self {
        assert_eq!(self.layout.shape, other.layout.shape, "jet shapes differ");
        // Output-driven: the down-set guarantees every ν ≤ μ is stored.
        let lay = &*self.layout;
        let (a, b) = (&self.c, &other.c);
        let out = (0..lay.len())
            .map(|idx| {
                let (i, j, k) = lay.monomial(idx);
                let mut s = C64::new(0.0, 0.0);
                for i1 in 0..=i {
                    for j1 in 0..=j {
                        for k1 in 0..=k {
                            let av = a[lay.index_unchecked(i1, j1, k1)];
                            if av.re != 0.0 || av.im != 0.0 {
                                s += av * b[lay.index_unchecked(i - i1, j - j1, k - k1)];
                            }
                        }
                    }
                }
                s
            })
            .collect();
        Jet3 { layout: self.layout.clone(), c: out }
    }
}

macro_rules! impl_ops {
    ($t:ty) => {
        impl Add for &$t {
            type Output = $t;
            fn add(self, o: &$t) -> $t {
                self.add_series(o)
            }
        }
        impl Sub for &$t {
            type Output = $t;
            fn sub(self, o: &$t) -> $t {
                self.sub_series(o)
            }
        }
        impl Mul for &$t {
            type Output = $t;
            fn mul(self, o: &$t) -> $t {
                self.mul_trunc(o)
            }
        }
        impl Mul<C64> for &$t {
            type Output = $t;
            fn mul(self, s: C64) -> $t {
                self.scale(s)
            }
        }
        impl Mul<f64> for &$t {
            type Output = $t;
            fn mul(self, s: f64) -> $t {
                self.scale(C64::new(s, 0.0))
            }
        }
        impl Neg for &$t {
            type Output = $t;
            fn neg(self) -> $t {
                self.scale(C64::new(-1.0, 0.0))
            }
        }
        impl AddAssign<&$t> for $t {
            fn add_assign(&mut self, o: &$t) {
                for (x, y) in self.coeffs_mut().iter_mut().zip(o.coeffs()) {
                    *x += *y;
                }
            }
        }
    };
}

impl_ops!(Jet1);
impl_ops!(Jet3);

/// Arithmetic selector mirroring the four binary jet operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn jet_arith<S: Series>(a: &S, b: &S, op: JetOp) -> Result<S> {
    match op {
        JetOp::Add => Ok(a.add_series(b)),
        JetOp::Sub => Ok(a.sub_series(b)),
        JetOp::Mul => Ok(a.mul_trunc(b)),
        JetOp::Div => a.div_series(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * (1.0 + y.norm()))
    }

    #[test]
    fn product_of_binomials() {
        let a = Jet1::from_real(&[1.0, 1.0, 0.0]);
        let b = Jet1::from_real(&[1.0, -1.0, 0.0]);
        assert_eq!((&a * &b).c, Jet1::from_real(&[1.0, 0.0, -1.0]).c);
    }

    #[test]
    fn exp_and_log_known_series() {
        let t = Jet1::variable(c(0.0), 3);
        let e = t.exp();
        assert!(close(&e.c, &Jet1::from_real(&[1.0, 1.0, 0.5, 1.0 / 6.0]).c, 1e-15));
        let l = t.add_const(c(1.0)).ln().unwrap();
        assert!(close(&l.c, &Jet1::from_real(&[0.0, 1.0, -0.5, 1.0 / 3.0]).c, 1e-15));
    }

    #[test]
    fn log_rejects_cut() {
        let t = Jet1::variable(c(-2.0), 3);
        assert!(matches!(t.ln(), Err(Error::Domain { .. })));
        assert!(matches!(Jet1::variable(c(0.0), 2).recip(), Err(Error::SingularJet)));
    }

    #[test]
    fn compose_examples() {
        let inner = Jet1::from_real(&[0.0, 1.0, 1.0, 0.0]);
        let id = Jet1::from_real(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(id.compose(&inner).unwrap().c, inner.c);
        let sq = Jet1::from_real(&[0.0, 0.0, 1.0, 0.0]);
        assert!(close(&sq.compose(&inner).unwrap().c, &Jet1::from_real(&[0.0, 0.0, 1.0, 2.0]).c, 1e-15));
        assert!(matches!(sq.compose(&Jet1::from_real(&[1.0, 1.0, 0.0, 0.0])), Err(Error::Composition)));
    }

    #[test]
    fn atan_and_trig() {
        let x0 = 0.3;
        let t = Jet1::variable(c(x0), 4);
        let a = t.atan().unwrap();
        // d/dx atan = 1/(1+x²)
        let d1 = 1.0 / (1.0 + x0 * x0);
        assert!((a.c[1] - d1).norm() < 1e-15);
        let d2 = -2.0 * x0 / (1.0 + x0 * x0).powi(2) / 2.0;
        assert!((a.c[2] - d2).norm() < 1e-15);
        let (s, co) = t.sin_cos();
        let one = &(&s * &s) + &(&co * &co);
        assert!(close(&one.c, &Jet1::constant(c(1.0), 4).c, 1e-14));
    }

    fn fd_derivative(f: impl Fn(f64) -> C64, x: f64, k: usize, h: f64) -> C64 {
        // central differences of order 2
        match k {
            1 => (f(x + h) - f(x - h)) / (2.0 * h),
            2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
            3 => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h),
            _ => unreachable!(),
        }
    }

    #[test]
    fn exp_of_jet_matches_finite_differences() {
        // a(t) = 0.4 + 0.7 t − 0.2 t² + 0.1 t³ (as a function, not just a jet)
        let coeffs = [0.4, 0.7, -0.2, 0.1];
        let poly = |t: f64| C64::new(coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c), 0.0);
        let a = Jet1::from_real(&coeffs);
        let e = a.exp();
        for k in 1..=3 {
            let fd = fd_derivative(|t| poly(t).exp(), 0.0, k, 1e-3);
            let jet = e.derivative_at(k);
            assert!((fd - jet).norm() / jet.norm() <= 1e-5, "k={k} {fd} {jet}");
        }
    }

    #[test]
    fn multivariate_restriction_matches_univariate() {
        let lay = Jet3Layout::new(Jet3Shape::total_degree(5));
        assert_eq!(lay.len(), 56); // C(8,3)
        let z = &(&Jet3::variable(&lay, 0, c(0.2)) * 0.5) + &Jet3::variable(&lay, 1, c(0.0));
        let w = &z + &(&Jet3::variable(&lay, 2, c(0.0)) * &Jet3::variable(&lay, 0, c(0.0)));
        let e = w.exp().sin();
        let e1 = (&Jet1::variable(c(0.2), 5) * 0.5).exp().sin();
        assert!(close(&e.restrict(0).c, &e1.c, 1e-14));
        let l1 = Jet1::variable(c(0.1), 5).add_const(c(1.0)).ln().unwrap();
        let l3 = Jet3::variable(&lay, 1, c(1.1)).ln().unwrap();
        assert!(close(&l3.restrict(1).c, &l1.c, 1e-14));
    }

    #[test]
    fn jet3_shapes_are_exact_truncations() {
        let full = Jet3Layout::new(Jet3Shape::total_degree(8));
        let narrow = Jet3Layout::new(Jet3Shape { total: 8, rest: 3, theta: 1 });
        let build = |lay: &Arc<Jet3Layout>| {
            let t = Jet3::variable(lay, 0, c(0.3));
            let y = Jet3::variable(lay, 1, c(-0.2));
            let th = Jet3::variable(lay, 2, c(0.1));
            let u = &(&t * &y) + &th.sin();
            (&u.exp() * &(&t + &y).recip().unwrap()).atan().unwrap().pow(C64::new(0.7, 0.2)).unwrap()
        };
        let a = build(&full).project(&narrow);
        let b = build(&narrow);
        assert!(close(&a.c, &b.c, 1e-12));
    }

    #[test]
    fn multivariate_mul_matches_evaluation() {
        let lay = Jet3Layout::new(Jet3Shape::total_degree(6));
        let t = Jet3::variable(&lay, 0, c(0.0));
        let y = Jet3::variable(&lay, 1, c(0.0));
        let th = Jet3::variable(&lay, 2, c(0.0));
        // polynomial of degree 3 squared is degree 6: exact
        let p = &(&(&t * &y) + &th) + &(&(&y * &y) * &t);
        let p = p.add_const(c(1.5));
        let sq = &p * &p;
        let (a, b, g) = (C64::new(0.3, 0.0), C64::new(-0.7, 0.0), C64::new(0.2, 0.0));
        let pv = p.eval(a, b, g);
        assert!((sq.eval(a, b, g) - pv * pv).norm() < 1e-13);
    }

    fn arb_jet(order: usize) -> impl Strategy<Value = Jet1> {
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), order + 1)
            .prop_map(|v| Jet1::from_coeffs(v.into_iter().map(|(r, i)| C64::new(r, i)).collect()))
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_jet(6), b in arb_jet(6), cc in arb_jet(6)) {
            let l = &(&a * &b) * &cc;
            let r = &a * &(&b * &cc);
            prop_assert!(close(&l.c, &r.c, 1e-13));
            let l = &a * &(&b + &cc);
            let r = &(&a * &b) + &(&a * &cc);
            prop_assert!(close(&l.c, &r.c, 1e-13));
        }

        #[test]
        fn division_inverts_multiplication(a in arb_jet(7), b in arb_jet(7)) {
            prop_assume!(b.c[0].norm() > 0.5);
            let q = a.div_series(&b).unwrap();
            let back = &q * &b;
            let scale = 1.0 + q.max_norm() * b.max_norm();
            prop_assert!(back.c.iter().zip(&a.c).all(|(x, y)| (x - y).norm() <= 1e-13 * scale));
            let one = b.div_series(&b).unwrap();
            let scale = 1.0 + b.recip().unwrap().max_norm() * b.max_norm();
            let unit = Jet1::constant(c(1.0), 7);
            prop_assert!(one.c.iter().zip(&unit.c).all(|(x, y)| (x - y).norm() <= 1e-13 * scale));
        }

        #[test]
        fn product_matches_brute_force_convolution(a in arb_jet(8), b in arb_jet(8)) {
            let p = &a * &b;
            for k in 0..=8 {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..=k { s += a.c[i] * b.c[k - i]; }
                prop_assert!((p.c[k] - s).norm() <= 1e-13 * (1.0 + s.norm()));
            }
        }

        #[test]
        fn compose_matches_substitution(outer in arb_jet(5), mut inner in arb_jet(5)) {
            inner.c[0] = C64::new(0.0, 0.0);
            let got = outer.compose(&inner).unwrap();
            // brute force: expand Σ o_k inner^k by repeated full polynomial products
            let mut expect = vec![C64::new(0.0, 0.0); 6];
            let mut power = vec![C64::new(0.0, 0.0); 6];
            power[0] = C64::new(1.0, 0.0);
            for k in 0..=5 {
                for m in 0..=5 { expect[m] += outer.c[k] * power[m]; }
                let mut next = vec![C64::new(0.0, 0.0); 6];
                for i in 0..=5 { for j in 0..=5 - i { next[i + j] += power[i] * inner.c[j]; } }
                power = next;
            }
            prop_assert!(close(&got.c, &expect, 1e-11));
        }

        #[test]
        fn pow_log_exp_consistency(a in arb_jet(6), re in -1.5f64..1.5, im in -1.0f64..1.0) {
            prop_assume!(a.c[0].re > 0.3);
            let alpha = C64::new(re, im);
            let p = a.pow(alpha).unwrap();
            let q = (&a.ln().unwrap() * alpha).exp();
            prop_assert!(close(&p.c, &q.c, 1e-9));
        }
    }
}
