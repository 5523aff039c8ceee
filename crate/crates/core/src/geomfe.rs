//! Geometric approximate functional equations.
//!
//! `L(f, 1/2+iT) = exp(prefactor) · ∫_{t0}^{t1} f(α̃t) t^{ν−1} dt + O(T^{−γ})` with
//! `α̃ = −1 + i/T̃`. For holomorphic forms `T̃ = T` and `ν = s + (k−1)/2`; for
//! even Maass forms `T̃ = T₁` is chosen by [`select_t1`] and `ν = s − 1/2`.

use crate::forms::{CuspFormSpec, FormKind};
use crate::specfun::{log_gamma_c, select_t1, LogComplex};
use crate::{Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Largest prefactor log-magnitude for which binary64 assembly is attempted.
pub const MAX_LOGMAG: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationWindow {
    pub t0: f64,
    pub t1: f64,
    /// The Lemma constant (max over the two ends).
    pub c: f64,
    /// Decay rates at ∞ and at 0: |f(α̃t)| ≲ e^{−a t/T̃} and ≲ t^{-k} e^{−a₀/(T̃t)}.
    pub a_inf: f64,
    pub a_zero: f64,
    pub t_tilde: f64,
}

impl TruncationWindow {
    /// Tail bound `(2T/a) e^{−a t1/(2T)}` at ∞ plus its mirror at 0.
    pub fn tail_bound(&self) -> f64 {
        let tt = self.t_tilde;
        let hi = 2.0 * tt / self.a_inf * (-self.a_inf * self.t1 / (2.0 * tt)).exp();
        let lo = 2.0 * tt / self.a_zero * (-self.a_zero / (2.0 * tt * self.t0)).exp();
        hi + lo
    }

    /// The window with `t1` scaled by `f` and `t0` divided by `f`.
    pub fn widened(&self, f: f64) -> Self {
        Self { t0: self.t0 / f, t1: self.t1 * f, ..*self }
    }
}

fn log_scale(t: f64) -> f64 {
    t.ln().max(1.0)
}

/// Smallest `c′` such that `t > 2T(s0−1)log(t)/a` for every `t > c′ T log T`.
fn c_prime(a: f64, s0: f64, t: f64) -> f64 {
    let k = 2.0 * t * (s0 - 1.0) / a;
    // t − K log t has its minimum at t = K; it is positive everywhere for K ≤ e.
    if k <= std::f64::consts::E {
        return 0.0;
    }
    // Larger fixed point of t = K log t.
    let mut x = 2.0 * k * k.ln();
    for _ in 0..200 {
        let next = k * x.ln();
        if (next - x).abs() <= 1e-13 * x {
            x = next;
            break;
        }
        x = next;
    }
    x / (t * log_scale(t))
}

fn lemma_c(a: f64, s0: f64, t: f64, gamma: f64) -> f64 {
    2.0 * (c_prime(a, s0, t) + 1.0) * (1.0 + 1.0 / a) * (1.0 + gamma)
}

/// Truncation window for the contour with parameter `t_tilde` (`T` for
/// holomorphic forms, `T₁` for Maass forms).
pub fn truncation_window(form: &CuspFormSpec, t_tilde: f64, gamma: f64) -> Result<TruncationWindow> {
    if !(t_tilde > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidParams(format!("window needs T̃ > 0 and γ > 0 (T̃={t_tilde}, γ={gamma})")));
    }
    let n1 = form
        .coefficients
        .first_nonzero()
        .ok_or_else(|| Error::InvalidParams("form has no nonzero coefficient".into()))?;
    let a = 2.0 * PI * n1 as f64;
    // Through the Fricke relation the point −C1/(α̃t) has imaginary part
    // C1/(T̃ t |α̃|²); halve for the t^{-k} prefactor as in the Lemma.
    let alpha2 = 1.0 + 1.0 / (t_tilde * t_tilde);
    let a0 = a * form.fricke.c1 / (2.0 * alpha2);
    let k = form.weight as f64;
    let s0 = match form.kind {
        FormKind::Holomorphic => k / 2.0,
        FormKind::MaassEven => 0.0,
    };
    let c = lemma_c(a, s0, t_tilde, gamma).max(lemma_c(a0, k - s0, t_tilde, gamma));
    let scale = c * t_tilde * log_scale(t_tilde);
    Ok(TruncationWindow { t0: 1.0 / scale, t1: scale, c, a_inf: a, a_zero: a0, t_tilde })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourKind {
    Holo,
    Maass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourSpec {
    pub kind: ContourKind,
    /// `T = Im s`.
    pub t: f64,
    pub t_tilde: f64,
    pub alpha: C64,
    pub nu: C64,
    pub prefactor: LogComplex,
    pub window: TruncationWindow,
    /// Selected `C(T₁)` for Maass contours.
    pub c_t1: Option<LogComplex>,
}

impl ContourSpec {
    pub fn s(&self) -> C64 {
        C64::new(0.5, self.t)
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("T must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Holomorphic contour: prefactor `(2π)^ν (−α i)^ν / Γ(ν)` in log space.
pub fn holo_contour(form: &CuspFormSpec, t: f64, gamma: f64) -> Result<ContourSpec> {
    if form.kind != FormKind::Holomorphic {
        return Err(Error::InvalidParams("holo_contour needs a holomorphic form".into()));
    }
    check_t(t)?;
    let k = form.weight as f64;
    let nu = C64::new(0.5 + (k - 1.0) / 2.0, t);
    let alpha = C64::new(-1.0, 1.0 / t);
    // Principal branch; −αi = 1/T + i has argument in (0, π/2).
    let log_mai = (-alpha * C64::new(0.0, 1.0)).ln();
    let log_pref = nu * (2.0 * PI).ln() + nu * log_mai - log_gamma_c(nu)?;
    Ok(ContourSpec {
        kind: ContourKind::Holo,
        t,
        t_tilde: t,
        alpha,
        nu,
        prefactor: LogComplex::exp(log_pref),
        window: truncation_window(form, t, gamma)?,
        c_t1: None,
    })
}

/// Maass contour: `T̃ = T₁` from the scan, prefactor `(2π)^s / (2 T₁^{s−1/2} C(T₁))`.
pub fn maass_contour(form: &CuspFormSpec, t: f64, gamma: f64) -> Result<ContourSpec> {
    let r = match (form.kind, form.r) {
        (FormKind::MaassEven, Some(r)) => r,
        _ => return Err(Error::InvalidParams("maass_contour needs an even Maass form".into())),
    };
    check_t(t)?;
    let (t1, c) = select_t1(t, r)?;
    let s = C64::new(0.5, t);
    let log_pref = s * (2.0 * PI).ln() - 2f64.ln() - (s - 0.5) * t1.ln();
    Ok(ContourSpec {
        kind: ContourKind::Maass,
        t,
        t_tilde: t1,
        alpha: C64::new(-1.0, 1.0 / t1),
        nu: s - 0.5,
        prefactor: LogComplex::exp(log_pref).div(c),
        window: truncation_window(form, t1, gamma)?,
        c_t1: Some(c),
    })
}

/// The contour matching the form's kind.
pub fn contour_for(form: &CuspFormSpec, t: f64, gamma: f64) -> Result<ContourSpec> {
    match form.kind {
        FormKind::Holomorphic => holo_contour(form, t, gamma),
        FormKind::MaassEven => maass_contour(form, t, gamma),
    }
}

/// `(L, err_note)`. The exponential is taken only at the end.
pub fn assemble_l(contour: &ContourSpec, integral: C64, quad_err: f64) -> Result<(C64, f64)> {
    if contour.prefactor.logmag.abs() > MAX_LOGMAG {
        return Err(Error::PrecisionRequired(contour.prefactor.logmag));
    }
    let (value, err) = assemble_l_log(contour, integral, quad_err)?;
    Ok((value.to_complex(), err))
}

/// Like [`assemble_l`] but returns `L` in log form, so it never overflows.
pub fn assemble_l_log(contour: &ContourSpec, integral: C64, quad_err: f64) -> Result<(LogComplex, f64)> {
    let scale = contour.prefactor.abs();
    let err = scale * (contour.window.tail_bound() + quad_err);
    if integral == C64::new(0.0, 0.0) {
        return Ok((LogComplex { logmag: f64::NEG_INFINITY, arg: 0.0 }, err));
    }
    Ok((contour.prefactor.mul(LogComplex::from_complex(integral)?), err))
}
