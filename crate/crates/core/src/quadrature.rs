//! Taylor-grid quadrature for real-analytic integrands given as jet providers.
//!
//! The interval `[0, L]` is cut into cells of width `h = min(1, T^{-ε}/R)`.
//! On each cell the integrand's order-`N` Taylor polynomial at the left end is
//! integrated termwise. Cell sums are accumulated in ascending order with
//! compensated summation, so results are reproducible bit for bit.

use crate::jets::Jet1;
use crate::{Error, Result};
use num_complex::Complex64 as C64;

/// Integration interval and error-budget parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Interval length `L`; the interval is `[0, L]` in provider coordinates.
    pub length: f64,
    /// Target error exponent γ (error `O(T^{-γ})`).
    pub gamma: f64,
    /// Budget exponent ε.
    pub eps: f64,
    /// Ambient scale `T` used for spacing and bookkeeping.
    pub t_ctx: f64,
}

impl QuadratureSpec {
    pub fn new(length: f64, gamma: f64, eps: f64, t_ctx: f64) -> Result<Self> {
        if !(length >= 0.0) || !length.is_finite() {
            return Err(Error::InvalidParams(format!("interval length {length} must be finite and >= 0")));
        }
        if !(gamma > 0.0) || !(eps > 0.0) {
            return Err(Error::InvalidParams(format!("gamma={gamma} and eps={eps} must be positive")));
        }
        if !(t_ctx >= 1.0) {
            return Err(Error::InvalidParams(format!("T_ctx={t_ctx} must be >= 1")));
        }
        Ok(Self { length, gamma, eps, t_ctx })
    }
}

/// Growth data declared by an integrand: `|∂ⁿg(u)| ≤ n!(C·R)ⁿ(1+u^l)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Growth {
    pub r: f64,
    pub l: f64,
}

impl Growth {
    pub fn new(r: f64, l: f64) -> Self {
        Self { r: r.max(1e-300), l: l.max(0.0) }
    }
}

/// Cell layout and Taylor order derived from a spec and growth data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub h: f64,
    pub order: usize,
    pub length: f64,
}

impl Grid {
    pub fn new(spec: &QuadratureSpec, growth: Growth) -> Self {
        let h = (spec.t_ctx.powf(-spec.eps) / growth.r).min(1.0);
        let order = ((1.0 + growth.l / spec.gamma) * (spec.gamma / spec.eps)).ceil().max(2.0) as usize;
        Self { h, order, length: spec.length }
    }

    /// Number of cells, counting a final partial cell.
    pub fn cell_count(&self) -> usize {
        if self.length <= 0.0 {
            return 0;
        }
        let full = (self.length / self.h).floor();
        let rest = self.length - full * self.h;
        // Ignore slivers that are pure rounding noise.
        full as usize + usize::from(rest > self.h * 1e-12)
    }

    /// `(left end, width)` of cell `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let u = i as f64 * self.h;
        (u, (self.length - u).min(self.h))
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.cell_count()).map(move |i| self.cell(i))
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: C64,
    comp: C64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: C64) {
        let (re, cre) = two_sum(self.sum.re, x.re);
        let (im, cim) = two_sum(self.sum.im, x.im);
        self.sum = C64::new(re, im);
        self.comp += C64::new(cre, cim);
    }

    pub fn value(&self) -> C64 {
        self.sum + self.comp
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let c = if a.abs() >= b.abs() { (a - s) + b } else { (b - s) + a };
    (s, c)
}

/// Termwise integral of a Taylor polynomial over `[0, w]`.
///
/// Returns the integral using all coefficients together with the integral
/// using two fewer, whose difference feeds the error estimate.
pub fn cell_integral(jet: &Jet1, w: f64) -> (C64, C64) {
    let n = jet.c.len();
    let cut = n.saturating_sub(2);
    let mut full = C64::new(0.0, 0.0);
    let mut low = C64::new(0.0, 0.0);
    // Horner in w: Σ c_k w^{k+1}/(k+1).
    for k in (0..n).rev() {
        let term = jet.c[k] / (k as f64 + 1.0);
        full = full * w + term;
        low = low * w + if k < cut { term } else { C64::new(0.0, 0.0) };
    }
    (full * w, low * w)
}

/// Integrates `g` over `[0, spec.length]`.
///
/// `provider(u, order)` returns the order-`order` Taylor jet of `g` at `u`.
/// Returns `(value, err_est)`. The estimate is advisory.
pub fn taylor_grid_integrate<F>(growth: Growth, spec: &QuadratureSpec, mut provider: F) -> Result<(C64, f64)>
where
    F: FnMut(f64, usize) -> Result<Jet1>,
{
    let mut out = taylor_grid_integrate_many(growth, spec, 1, |u, n| Ok(vec![provider(u, n)?]))?;
    let (v, e) = out.pop().expect("one integrand");
    Ok((v, e))
}

/// Integrates several integrands that share one provider call per grid point.
pub fn taylor_grid_integrate_many<F>(
    growth: Growth,
    spec: &QuadratureSpec,
    count: usize,
    provider: F,
) -> Result<Vec<(C64, f64)>>
where
    F: FnMut(f64, usize) -> Result<Vec<Jet1>>,
{
    integrate_on_grid(&Grid::new(spec, growth), count, provider)
}

/// [`taylor_grid_integrate_many`] on an explicit grid (spacing and order).
pub fn integrate_on_grid<F>(grid: &Grid, count: usize, mut provider: F) -> Result<Vec<(C64, f64)>>
where
    F: FnMut(f64, usize) -> Result<Vec<Jet1>>,
{
    let mut sums = vec![CompensatedSum::new(); count];
    let mut errs = vec![0.0f64; count];
    for (u, w) in grid.cells() {
        let jets = provider(u, grid.order)?;
        if jets.len() != count {
            return Err(Error::InvalidParams(format!(
                "provider returned {} jets, expected {count}",
                jets.len()
            )));
        }
        for ((jet, s), e) in jets.iter().zip(sums.iter_mut()).zip(errs.iter_mut()) {
            let (full, low) = cell_integral(jet, w);
            s.add(full);
            *e += (full - low).norm();
        }
    }
    Ok(sums.into_iter().zip(errs).map(|(s, e)| (s.value(), e)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Series;
    use std::f64::consts::PI;

    fn spec(l: f64) -> QuadratureSpec {
        QuadratureSpec::new(l, 4.0, 1.0 / 16.0, 1.0).unwrap()
    }

    fn exp_jet(a: C64, u: f64, n: usize) -> Jet1 {
        // e^{a(u+σ)} as a jet in σ.
        Jet1::variable(C64::new(u, 0.0), n).scale(a).exp()
    }

    #[test]
    fn constant_is_exact() {
        let (v, _) =
            taylor_grid_integrate(Growth::new(1.0, 0.0), &spec(1.0), |_, n| Ok(Jet1::constant(C64::new(1.0, 0.0), n)))
                .unwrap();
        assert_eq!(v, C64::new(1.0, 0.0));
    }

    #[test]
    fn cubic_is_exact() {
        let (v, _) = taylor_grid_integrate(Growth::new(3.0, 3.0), &spec(2.0), |u, n| {
            Jet1::variable(C64::new(u, 0.0), n).powi(3)
        })
        .unwrap();
        assert!((v - C64::new(4.0, 0.0)).norm() < 1e-14, "{v}");
    }

    #[test]
    fn decaying_exponential() {
        let (v, e) =
            taylor_grid_integrate(Growth::new(1.0, 0.0), &spec(10.0), |u, n| Ok(exp_jet(C64::new(-1.0, 0.0), u, n)))
                .unwrap();
        let exact = 1.0 - (-10.0f64).exp();
        assert!((v.re - exact).abs() / exact < 1e-10 && v.im == 0.0, "{v}");
        assert!(e < 1e-10);
    }

    #[test]
    fn zero_length() {
        let out = taylor_grid_integrate(Growth::new(1.0, 0.0), &spec(0.0), |_, _| -> Result<Jet1> {
            panic!("provider must not be called")
        })
        .unwrap();
        assert_eq!(out, (C64::new(0.0, 0.0), 0.0));
    }

    #[test]
    fn invalid_spec() {
        assert!(QuadratureSpec::new(-1.0, 4.0, 0.1, 1.0).is_err());
        assert!(QuadratureSpec::new(1.0, 0.0, 0.1, 1.0).is_err());
        assert!(QuadratureSpec::new(1.0, 4.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn grid_partial_cell() {
        let g = Grid::new(&spec(2.5), Growth::new(1.0, 0.0));
        assert_eq!(g.h, 1.0);
        assert_eq!(g.order, 64);
        assert_eq!(g.cell_count(), 3);
        assert_eq!(g.cell(2), (2.0, 0.5));
        let g = Grid::new(&QuadratureSpec::new(1.0, 4.0, 0.5, 16.0).unwrap(), Growth::new(2.0, 4.0));
        assert!((g.h - 0.125).abs() < 1e-15);
        assert_eq!(g.order, 16);
    }

    // e(−t)·1/(1+t²) against composite Simpson with a very fine mesh.
    fn osc_jet(u: f64, n: usize) -> Jet1 {
        let t = Jet1::variable(C64::new(u, 0.0), n);
        let denom = (&t * &t).add_const(C64::new(1.0, 0.0));
        let phase = t.scale(C64::new(0.0, -2.0 * PI)).exp();
        phase.div_series(&denom).unwrap()
    }

    fn osc(t: f64) -> C64 {
        C64::from_polar(1.0, -2.0 * PI * t) / (1.0 + t * t)
    }

    fn adaptive_simpson(a: f64, b: f64, tol: f64, depth: u32) -> C64 {
        let m = 0.5 * (a + b);
        let whole = (osc(a) + osc(m) * 4.0 + osc(b)) * ((b - a) / 6.0);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let left = (osc(a) + osc(lm) * 4.0 + osc(m)) * ((m - a) / 6.0);
        let right = (osc(m) + osc(rm) * 4.0 + osc(b)) * ((b - m) / 6.0);
        let diff = left + right - whole;
        if depth == 0 || diff.norm() < 15.0 * tol {
            left + right + diff / 15.0
        } else {
            adaptive_simpson(a, m, tol / 2.0, depth - 1) + adaptive_simpson(m, b, tol / 2.0, depth - 1)
        }
    }

    #[test]
    fn oscillatory_matches_adaptive_reference() {
        let growth = Growth::new(2.0 * PI + 1.0, 0.0);
        let (v, _) = taylor_grid_integrate(growth, &spec(50.0), |u, n| Ok(osc_jet(u, n))).unwrap();
        let reference: C64 = (0..50).map(|i| adaptive_simpson(i as f64, i as f64 + 1.0, 1e-14, 40)).sum();
        assert!((v - reference).norm() < 1e-9, "{v} vs {reference}");
    }

    #[test]
    fn order_robustness() {
        let growth = Growth::new(2.0 * PI + 1.0, 0.0);
        let s = spec(20.0);
        let (v, e) = taylor_grid_integrate(growth, &s, |u, n| Ok(osc_jet(u, n))).unwrap();
        let (v2, _) = taylor_grid_integrate(growth, &s, |u, n| Ok(osc_jet(u, n + 2))).unwrap();
        assert!((v - v2).norm() <= 10.0 * e.max(1e-16), "{} vs err {e}", (v - v2).norm());
    }

    #[test]
    fn many_matches_single() {
        let growth = Growth::new(2.0 * PI + 1.0, 0.0);
        let s = spec(7.3);
        let many = taylor_grid_integrate_many(growth, &s, 2, |u, n| {
            Ok(vec![osc_jet(u, n), exp_jet(C64::new(-0.5, 1.0), u, n)])
        })
        .unwrap();
        let (a, _) = taylor_grid_integrate(growth, &s, |u, n| Ok(osc_jet(u, n))).unwrap();
        assert_eq!(many[0].0, a);
        let z = C64::new(-0.5, 1.0);
        let exact = ((z * 7.3).exp() - 1.0) / z;
        assert!((many[1].0 - exact).norm() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(C64::new(1e16, 0.0));
        for _ in 0..1000 {
            s.add(C64::new(1.0, 0.0));
        }
        s.add(C64::new(-1e16, 0.0));
        assert_eq!(s.value(), C64::new(1000.0, 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn additivity(l in 0.5f64..30.0, a_re in -1.0f64..0.2, a_im in -6.0f64..6.0) {
                let z = C64::new(a_re, a_im);
                let growth = Growth::new(z.norm() + 1.0, 0.0);
                let whole = taylor_grid_integrate(growth, &spec(l), |u, n| Ok(exp_jet(z, u, n))).unwrap().0;
                let half = l / 2.0;
                let left = taylor_grid_integrate(growth, &spec(half), |u, n| Ok(exp_jet(z, u, n))).unwrap().0;
                let right = taylor_grid_integrate(growth, &spec(l - half), |u, n| Ok(exp_jet(z, u + half, n))).unwrap().0;
                // Relative to ∫|g|, the natural scale for cancellation.
                let abs_int = if a_re.abs() < 1e-9 { l } else { ((a_re * l).exp() - 1.0) / a_re };
                prop_assert!((whole - left - right).norm() <= 1e-12 * abs_int,
                    "whole {} split {}", whole, left + right);
            }
        }
    }
}
