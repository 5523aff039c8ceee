//! Cusp forms on SL(2,Z): data model, JSON ingestion, the exact Δ table, and
//! evaluation of the lift `f̃(g) = j(g,i)^{−k} f(g·i)` with its Taylor jets.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{n_mat, reduce_to_fundamental_domain, Mat2, MultiIndex};
use crate::jets::{Jet1, Jet3, Jet3Layout, Jet3Shape, Series};
use crate::specfun::{bessel_k_jet, SpectralParam};

const TWO_PI: f64 = 2.0 * PI;

/// Lowest height of a point of the standard fundamental domain.
pub const Y_MIN: f64 = 0.866_025_403_784_438_6;

/// Default absolute accuracy of truncated Fourier sums.
pub const DEFAULT_LIFT_ACCURACY: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    Holomorphic,
    MaassEven,
}

/// Dense, 1-indexed Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    values: Vec<f64>,
    exact: Option<Vec<i128>>,
}

impl CoefficientTable {
    pub fn from_floats(values: Vec<f64>) -> Self {
        CoefficientTable { values, exact: None }
    }

    pub fn from_integers(ints: Vec<i128>) -> Self {
        CoefficientTable { values: ints.iter().map(|&v| v as f64).collect(), exact: Some(ints) }
    }

    pub fn n_max(&self) -> usize {
        self.values.len()
    }

    /// `f̂(n)` for `1 ≤ n ≤ n_max`.
    pub fn get(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    pub fn exact(&self, n: usize) -> Option<i128> {
        self.exact.as_ref().map(|e| e[n - 1])
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the first nonzero coefficient.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.values.iter().position(|&v| v != 0.0).map(|i| i + 1)
    }
}

/// Fricke data: `f(−C1/z) = C2·z^k·f(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fricke {
    pub c1: f64,
    pub c2: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuspFormSpec {
    pub kind: FormKind,
    pub weight: u32,
    pub level: u32,
    pub r: Option<SpectralParam>,
    pub coefficients: CoefficientTable,
    pub fricke: Fricke,
    /// Derivative scale R with ‖∂^β f̃‖ ≲ R^{|β|}.
    pub deriv_bound: f64,
    /// Absolute accuracy used to truncate Fourier sums.
    pub accuracy: f64,
}

impl CuspFormSpec {
    fn validate(&self) -> Result<()> {
        match self.kind {
            FormKind::Holomorphic => {
                if self.weight < 4 || self.weight % 2 != 0 {
                    return Err(Error::Load(format!("holomorphic weight must be even and ≥ 4, got {}", self.weight)));
                }
                if self.r.is_some() {
                    return Err(Error::Load("holomorphic forms take no spectral parameter r".into()));
                }
            }
            FormKind::MaassEven => {
                if self.weight != 0 {
                    return Err(Error::Load(format!("Maass forms have weight 0, got {}", self.weight)));
                }
                if self.r.is_none() {
                    return Err(Error::Load("Maass form requires the spectral parameter r".into()));
                }
            }
        }
        if self.level != 1 {
            return Err(Error::Load(format!("only level 1 is supported, got {}", self.level)));
        }
        if !(self.fricke.c1 > 0.0) {
            return Err(Error::Load("Fricke C1 must be positive".into()));
        }
        if self.fricke.c2.norm() == 0.0 {
            return Err(Error::Load("Fricke C2 must be nonzero".into()));
        }
        if self.coefficients.n_max() == 0 {
            return Err(Error::Load("coefficient table is empty".into()));
        }
        if !(self.deriv_bound >= 1.0) {
            return Err(Error::Load(format!("deriv_bound_R must be ≥ 1, got {}", self.deriv_bound)));
        }
        Ok(())
    }

    /// Holomorphic level-1 form with the given coefficients (Fricke C1 = C2 = 1).
    pub fn holomorphic(weight: u32, coefficients: CoefficientTable) -> Result<Self> {
        let accuracy = supported_accuracy(coefficients.n_max());
        let mut spec = CuspFormSpec {
            kind: FormKind::Holomorphic,
            weight,
            level: 1,
            r: None,
            coefficients,
            fricke: Fricke { c1: 1.0, c2: C64::new(1.0, 0.0) },
            deriv_bound: 1.0,
            accuracy,
        };
        spec.validate()?;
        spec.deriv_bound = estimate_r(&spec);
        Ok(spec)
    }

    /// The discriminant form Δ with `n_max` exact coefficients.
    pub fn delta(n_max: usize) -> Self {
        Self::holomorphic(12, gen_delta(n_max)).expect("Δ data is valid")
    }

    /// Even Maass form with the given spectral parameter and coefficients.
    pub fn maass_even(r: SpectralParam, coefficients: CoefficientTable) -> Result<Self> {
        let accuracy = supported_accuracy(coefficients.n_max());
        let mut spec = CuspFormSpec {
            kind: FormKind::MaassEven,
            weight: 0,
            level: 1,
            r: Some(r),
            coefficients,
            fricke: Fricke { c1: 1.0, c2: C64::new(1.0, 0.0) },
            deriv_bound: 1.0,
            accuracy,
        };
        spec.validate()?;
        spec.deriv_bound = estimate_r(&spec);
        Ok(spec)
    }
}

// ---------------------------------------------------------------------------
// Loading

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrickeFile {
    #[serde(rename = "C1")]
    c1: f64,
    #[serde(rename = "C2_re")]
    c2_re: f64,
    #[serde(rename = "C2_im")]
    c2_im: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormFile {
    kind: String,
    weight: u32,
    level: u32,
    #[serde(default)]
    r: Option<f64>,
    fricke: FrickeFile,
    coefficients: Vec<serde_json::Number>,
    #[serde(default, rename = "deriv_bound_R")]
    deriv_bound_r: Option<f64>,
}

fn parse_coefficients(nums: &[serde_json::Number]) -> Result<CoefficientTable> {
    let texts: Vec<String> = nums.iter().map(|n| n.to_string()).collect();
    let all_int = texts.iter().all(|t| t.bytes().all(|b| b.is_ascii_digit() || b == b'-'));
    if all_int {
        let ints = texts
            .iter()
            .map(|t| t.parse::<i128>().map_err(|e| Error::Load(format!("coefficient {t}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        return Ok(CoefficientTable::from_integers(ints));
    }
    let floats = texts
        .iter()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Load(format!("coefficient {t} is not a finite number"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientTable::from_floats(floats))
}

/// Parses and validates a form from its JSON text.
pub fn parse_form(text: &str) -> Result<CuspFormSpec> {
    let file: FormFile = serde_json::from_str(text).map_err(|e| Error::Load(e.to_string()))?;
    let kind = match file.kind.as_str() {
        "holomorphic" => FormKind::Holomorphic,
        "maass-even" => FormKind::MaassEven,
        other => return Err(Error::Load(format!("unknown kind {other:?}"))),
    };
    let r = match file.r {
        Some(v) => Some(SpectralParam::real(v).map_err(|e| Error::Load(e.to_string()))?),
        None => None,
    };
    let mut spec = CuspFormSpec {
        kind,
        weight: file.weight,
        level: file.level,
        r,
        coefficients: parse_coefficients(&file.coefficients)?,
        fricke: Fricke { c1: file.fricke.c1, c2: C64::new(file.fricke.c2_re, file.fricke.c2_im) },
        deriv_bound: file.deriv_bound_r.unwrap_or(1.0),
        accuracy: DEFAULT_LIFT_ACCURACY,
    };
    spec.accuracy = supported_accuracy(spec.coefficients.n_max());
    spec.validate()?;
    if file.deriv_bound_r.is_none() {
        spec.deriv_bound = estimate_r(&spec);
    }
    Ok(spec)
}

pub fn load_form(path: &Path) -> Result<CuspFormSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
    parse_form(&text)
}

/// JSON text of a form file for `spec` (exact integers when available).
pub fn form_to_json(spec: &CuspFormSpec) -> String {
    let coeffs: Vec<String> = (1..=spec.coefficients.n_max())
        .map(|n| match spec.coefficients.exact(n) {
            Some(v) => v.to_string(),
            None => format!("{:?}", spec.coefficients.get(n)),
        })
        .collect();
    let kind = match spec.kind {
        FormKind::Holomorphic => "holomorphic",
        FormKind::MaassEven => "maass-even",
    };
    let r = spec.r.map(|r| format!("  \"r\": {:?},\n", r.value().re)).unwrap_or_default();
    format!(
        "{{\n  \"kind\": \"{kind}\",\n  \"weight\": {},\n  \"level\": {},\n{r}  \"fricke\": {{\"C1\": {:?}, \"C2_re\": {:?}, \"C2_im\": {:?}}},\n  \"coefficients\": [{}]\n}}\n",
        spec.weight,
        spec.level,
        spec.fricke.c1,
        spec.fricke.c2.re,
        spec.fricke.c2.im,
        coeffs.join(", ")
    )
}

// ---------------------------------------------------------------------------
// Δ coefficients

/// Exact `τ(n)`, `1 ≤ n ≤ n_max`, from `Δ = q ∏ (1 − qⁿ)^24`.
pub fn gen_delta(n_max: usize) -> CoefficientTable {
    assert!(n_max >= 1, "n_max must be positive");
    let len = n_max; // coefficients of q^0 … q^{n_max−1} of ∏(1−qⁿ)^24
    // Euler's pentagonal series ∏(1−qⁿ) = Σ_k (−1)^k q^{k(3k−1)/2}, k ∈ ℤ
    let mut euler: Vec<(usize, i128)> = vec![(0, 1)];
    for k in 1i64.. {
        let g1 = (k * (3 * k - 1) / 2) as usize;
        let g2 = (k * (3 * k + 1) / 2) as usize;
        if g1 >= len {
            break;
        }
        let sign = if k % 2 == 0 { 1 } else { -1 };
        euler.push((g1, sign));
        if g2 < len {
            euler.push((g2, sign));
        }
    }
    let mut acc = vec![0i128; len];
    acc[0] = 1;
    for _ in 0..24 {
        let mut next = vec![0i128; len];
        for &(shift, sign) in &euler {
            for i in 0..len - shift {
                let v = acc[i];
                if v != 0 {
                    let term = v.checked_mul(sign).expect("τ(n) overflows i128");
                    next[i + shift] = next[i + shift].checked_add(term).expect("τ(n) overflows i128");
                }
            }
        }
        acc = next;
    }
    CoefficientTable::from_integers(acc)
}

// ---------------------------------------------------------------------------
// Lift evaluation

/// Minimum number of Fourier terms at height `y` for accuracy `acc`.
pub fn n_terms(y: f64, acc: f64) -> usize {
    (((1.0 / acc).ln() + 10.0) / (TWO_PI * y)).ceil().max(1.0) as usize
}

/// The best accuracy (no better than [`DEFAULT_LIFT_ACCURACY`]) for which
/// `n_max` coefficients satisfy `n_terms(√3/2, acc) ≤ n_max`.
pub fn supported_accuracy(n_max: usize) -> f64 {
    let exponent = TWO_PI * Y_MIN * n_max as f64 - 10.0;
    DEFAULT_LIFT_ACCURACY.max((-exponent).exp() * (1.0 + 1e-9))
}

/// Jet inputs describing a family `x·n(t)a(y)K(θ)`: `w = t + i e^{y}` (the
/// point `n(t)a(y)·i`), the `y` offset and the `θ` offset. `None` means the
/// coordinate is identically zero. `radius` is the offset radius over which
/// the jet will be used; Fourier sums are truncated so the neglected tail is
/// below the form's accuracy on that polydisc.
pub struct LiftArgs<'a, S: Series> {
    pub w: &'a S,
    pub y: Option<&'a S>,
    pub theta: Option<&'a S>,
    pub radius: f64,
}

/// Offset radius assumed by the public jet functions.
pub const DEFAULT_JET_RADIUS: f64 = 0.25;

/// Evaluates `f̃(x·n(t)a(y)K(θ))` as a series. `x` should be reduced so that
/// `Im(x·w₀)` is not tiny; no reduction happens here.
pub fn lift_series<S: Series>(form: &CuspFormSpec, x: &Mat2, args: LiftArgs<'_, S>) -> Result<S> {
    let w = args.w;
    let num = w.scale(C64::new(x.a, 0.0)).add_const(C64::new(x.b, 0.0));
    let den = w.scale(C64::new(x.c, 0.0)).add_const(C64::new(x.d, 0.0));
    let z = num.div_series(&den)?;
    let mut f = match form.kind {
        FormKind::Holomorphic => holomorphic_sum(form, &z, args.radius)?,
        FormKind::MaassEven => maass_sum(form, &z, args.radius)?,
    };
    let k = form.weight as i32;
    if k != 0 {
        f = f.mul_trunc(&den.powi(-k)?);
        if let Some(y) = args.y {
            f = f.mul_trunc(&y.scale(C64::new(0.5 * k as f64, 0.0)).exp());
        }
        if let Some(th) = args.theta {
            f = f.mul_trunc(&th.scale(C64::new(0.0, k as f64)).exp());
        }
    }
    Ok(f)
}

fn check_coefficients(form: &CuspFormSpec, required: usize) -> Result<()> {
    let available = form.coefficients.n_max();
    if available < required {
        return Err(Error::InsufficientCoefficients { required, available });
    }
    Ok(())
}

/// Remaining-term estimate for a convergent Fourier tail whose next term is
/// `bound` and whose jets shrink by `ratio` per index.
fn tail_done(bound: f64, ratio: f64, acc: f64) -> bool {
    ratio < 1.0 && bound / (1.0 - ratio) <= acc
}

fn holomorphic_sum<S: Series>(form: &CuspFormSpec, z: &S, rho: f64) -> Result<S> {
    let y0 = z.constant_term().im;
    if !(y0 > 0.0) {
        return Err(Error::Domain { function: "lift", detail: format!("Im z = {y0} not in the upper half-plane") });
    }
    let acc = form.accuracy;
    let n_min = n_terms(y0, acc);
    let q = z.scale(C64::new(0.0, TWO_PI)).exp();
    let qn = q.weighted_l1(rho);
    let coeffs = &form.coefficients;
    let mut power = q.clone();
    let mut total = q.zeros_like();
    let mut n = 1usize;
    loop {
        if n > coeffs.n_max() {
            let need = n_min.max(required_terms(qn, acc, n));
            return Err(Error::InsufficientCoefficients { required: need, available: coeffs.n_max() });
        }
        let c = coeffs.get(n);
        if c != 0.0 {
            total = total.add_series(&power.scale(C64::new(c, 0.0)));
        }
        let next_bound = power.weighted_l1(rho) * qn * coeff_growth(coeffs, n + 1);
        if n >= n_min && tail_done(next_bound, qn * growth_ratio(n), acc) {
            break;
        }
        power = power.mul_trunc(&q);
        n += 1;
    }
    check_coefficients(form, n_min)?;
    Ok(total)
}

/// Upper estimate of |f̂(m)| for tail bounds: the supplied value, or a
/// polynomial extrapolation beyond the table.
fn coeff_growth(coeffs: &CoefficientTable, m: usize) -> f64 {
    let nmax = coeffs.n_max();
    if m <= nmax {
        // local envelope: neighbouring coefficients can be much larger than a
        // single (possibly tiny) value
        let lo = m.saturating_sub(2).max(1);
        let hi = (m + 2).min(nmax);
        (lo..=hi).map(|j| coeffs.get(j).abs()).fold(0.0, f64::max)
    } else {
        let scale = (1..=nmax).map(|j| coeffs.get(j).abs() / (j as f64).powi(6)).fold(0.0, f64::max);
        scale * (m as f64).powi(6)
    }
}

/// `((n+1)/n)^6`: polynomial coefficient growth allowance per index.
fn growth_ratio(n: usize) -> f64 {
    ((n as f64 + 1.0) / n as f64).powi(6)
}

fn required_terms(qn: f64, acc: f64, have: usize) -> usize {
    if qn >= 1.0 {
        return have * 2;
    }
    // q^n decay with polynomial slack
    (have as f64).max((acc.ln() - 20.0) / qn.ln()).ceil() as usize
}

fn maass_sum<S: Series>(form: &CuspFormSpec, z: &S, rho: f64) -> Result<S> {
    let r = form.r.ok_or_else(|| Error::InvalidParams("Maass evaluation without r".into()))?;
    let y0 = z.constant_term().im;
    if !(y0 > 0.0) {
        return Err(Error::Domain { function: "lift", detail: format!("Im z = {y0} not in the upper half-plane") });
    }
    let acc = form.accuracy;
    let n_min = n_terms(y0, acc);
    // real and imaginary parts of z, taken coefficientwise (real variables)
    let mut xs = z.zeros_like();
    let mut ys = z.zeros_like();
    for (i, c) in z.coeffs().iter().enumerate() {
        xs.coeffs_mut()[i] = C64::new(c.re, 0.0);
        ys.coeffs_mut()[i] = C64::new(c.im, 0.0);
    }
    let dy = ys.add_const(C64::new(-y0, 0.0));
    let order = max_degree(z);
    let sqrt_y = ys.sqrt()?;
    let coeffs = &form.coefficients;
    let mut total = z.zeros_like();
    let mut n = 1usize;
    // decay of K_{ir}(2πny) ~ e^{−2πny}; jets pick up e^{2πn·|dy|₁}
    let ratio_base =
        (-TWO_PI * (y0 - dy.weighted_l1(rho))).exp() * (TWO_PI * xs.add_const(-xs.constant_term()).weighted_l1(rho)).exp();
    loop {
        if n > coeffs.n_max() {
            return Err(Error::InsufficientCoefficients {
                required: n_min.max(required_terms(ratio_base, acc, n)),
                available: coeffs.n_max(),
            });
        }
        let c = coeffs.get(n);
        let nf = n as f64;
        let x0 = TWO_PI * nf * y0;
        let kj = bessel_k_jet(r, x0, order)?;
        let kser = kj.compose_into(&dy.scale(C64::new(TWO_PI * nf, 0.0)))?;
        let term_mag;
        if c != 0.0 {
            let cosx = xs.scale(C64::new(TWO_PI * nf, 0.0)).cos();
            let term = sqrt_y.mul_trunc(&kser).mul_trunc(&cosx).scale(C64::new(2.0 * c * nf.sqrt(), 0.0));
            term_mag = term.weighted_l1(rho);
            total = total.add_series(&term);
        } else {
            term_mag = kser.weighted_l1(rho) * 2.0 * nf.sqrt();
        }
        let next_bound = term_mag.max(1e-300) * ratio_base * coeff_growth(coeffs, n + 1) / c.abs().max(1e-300);
        if n >= n_min && (tail_done(next_bound.min(term_mag * ratio_base * 4.0), ratio_base * growth_ratio(n), acc)) {
            break;
        }
        n += 1;
    }
    check_coefficients(form, n_min)?;
    Ok(total)
}

fn max_degree<S: Series>(s: &S) -> usize {
    let n = s.coeffs().len();
    if n == 0 {
        0
    } else {
        s.degree_of(n - 1)
    }
}

/// `f̃(m)` evaluated at `m` directly, without reducing to the fundamental domain.
pub fn lift_value_unreduced(form: &CuspFormSpec, m: &Mat2) -> Result<C64> {
    let w = Jet1::constant(C64::new(0.0, 1.0), 0);
    Ok(lift_series(form, m, LiftArgs { w: &w, y: None, theta: None, radius: 0.0 })?.c[0])
}

/// `f̃(m)`, reducing `m` to the fundamental domain first (Γ-invariance).
pub fn lift_value(form: &CuspFormSpec, m: &Mat2) -> Result<C64> {
    let red = reduce_to_fundamental_domain(m)?;
    lift_value_unreduced(form, &red.reduced)
}

/// Jet3 of `(t, y, θ) ↦ f̃(x·n(t)a(y)K(θ))` at the origin, total degree `d`.
pub fn lift_jet3(form: &CuspFormSpec, x: &Mat2, d: usize) -> Result<Jet3> {
    if d > 32 {
        return Err(Error::InvalidParams(format!("jet degree {d} exceeds 32")));
    }
    lift_jet3_shaped(form, x, &Jet3Layout::new(Jet3Shape::total_degree(d)), DEFAULT_JET_RADIUS)
}

/// [`lift_jet3`] on an arbitrary monomial layout.
pub fn lift_jet3_shaped(
    form: &CuspFormSpec,
    x: &Mat2,
    layout: &std::sync::Arc<Jet3Layout>,
    radius: f64,
) -> Result<Jet3> {
    let red = reduce_to_fundamental_domain(x)?;
    let t = Jet3::variable(layout, 0, C64::new(0.0, 0.0));
    let y = Jet3::variable(layout, 1, C64::new(0.0, 0.0));
    let th = Jet3::variable(layout, 2, C64::new(0.0, 0.0));
    let w = &t + &y.exp().scale(C64::new(0.0, 1.0));
    lift_series(form, &red.reduced, LiftArgs { w: &w, y: Some(&y), theta: Some(&th), radius })
}

/// Jet1 of `s ↦ f̃(x·n(u0 + s))` through order `n`, accurate for `|s| ≤ radius`.
pub fn lift_jet_n(form: &CuspFormSpec, x: &Mat2, u0: f64, n: usize, radius: f64) -> Result<Jet1> {
    let red = reduce_to_fundamental_domain(&(*x * n_mat(u0)))?;
    let w = Jet1::variable(C64::new(0.0, 1.0), n);
    lift_series(form, &red.reduced, LiftArgs { w: &w, y: None, theta: None, radius })
}

/// Jet1 of `σ ↦ f̃(x·ω(u0 + σ))` through order `n`, using
/// `ω(u0+σ) = ω(u0)·n(−σ/(1+u0/T))·a(log(1 + σ/(T+u0)))`.
pub fn lift_jet_omega(form: &CuspFormSpec, x: &Mat2, u0: f64, big_t: f64, n: usize, radius: f64) -> Result<Jet1> {
    let base = *x * crate::geometry::omega(u0, big_t);
    let red = reduce_to_fundamental_domain(&base)?;
    let (tj, yj) = omega_coordinate_jets(u0, big_t, n)?;
    // e^{y(σ)} = 1 + σ/(T+u0) exactly
    let mut ey = Jet1::constant(C64::new(1.0, 0.0), n);
    if n >= 1 {
        ey.c[1] = C64::new(1.0 / (big_t + u0), 0.0);
    }
    let w = &tj + &ey.scale(C64::new(0.0, 1.0));
    lift_series(form, &red.reduced, LiftArgs { w: &w, y: Some(&yj), theta: None, radius })
}

/// Jets of the N-coordinate `t(σ) = −σ/(1+u0/T)` and the A-coordinate
/// `y(σ) = log(1 + σ/(T+u0))` of `ω(u0)^{-1} ω(u0+σ)`.
pub fn omega_coordinate_jets(u0: f64, big_t: f64, n: usize) -> Result<(Jet1, Jet1)> {
    let mut tj = Jet1::zeros(n);
    if n >= 1 {
        tj.c[1] = C64::new(-1.0 / (1.0 + u0 / big_t), 0.0);
    }
    let mut inner = Jet1::constant(C64::new(1.0, 0.0), n);
    if n >= 1 {
        inner.c[1] = C64::new(1.0 / (big_t + u0), 0.0);
    }
    Ok((tj, inner.ln()?))
}

/// Flow along which [`curve_taylor`] expands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    /// `u ↦ x·n(u)`.
    N,
    /// `u ↦ x·ω(u)` with contour parameter `T̃`.
    Omega(f64),
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k.min(n - k) {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Taylor coefficients of `u ↦ ∂^β f̃(x·curve(u))` at `u0` through order `n`,
/// where `∂^β f̃(g)/β!` is the `(t,y,θ)^β` coefficient of `f̃(g n(t)a(y)K(θ))`.
pub fn curve_taylor(form: &CuspFormSpec, x: &Mat2, beta: MultiIndex, curve: Curve, u0: f64, n: usize) -> Result<Jet1> {
    let MultiIndex(_, b2, b3) = beta;
    match curve {
        Curve::N => {
            let shape = Jet3Shape { total: n + beta.order(), rest: b2 + b3, theta: b3 };
            let layout = Jet3Layout::new(shape);
            let g = lift_jet3_shaped(form, &(*x * n_mat(u0)), &layout, DEFAULT_JET_RADIUS)?;
            Ok(n_flow_from_jet3(&g, beta, n))
        }
        Curve::Omega(big_t) => {
            let shape = Jet3Shape { total: n + beta.order(), rest: n + b2 + b3, theta: b3 };
            let layout = Jet3Layout::new(shape);
            let base = *x * crate::geometry::omega(u0, big_t);
            let g = lift_jet3_shaped(form, &base, &layout, DEFAULT_JET_RADIUS)?;
            omega_flow_from_jet3(&g, beta, u0, big_t, n, n)
        }
    }
}

/// Shift rule along the N-flow: the `s^j` coefficient of
/// `∂^β f̃(v·n(s))/β!` is `C(β1+j, j)·G[β1+j, β2, β3]`.
pub fn n_flow_from_jet3(g: &Jet3, beta: MultiIndex, n: usize) -> Jet1 {
    let MultiIndex(b1, b2, b3) = beta;
    let mut out = Jet1::zeros(n);
    for j in 0..=n {
        out.c[j] = g.get(b1 + j, b2, b3) * binom(b1 + j, j);
    }
    out
}

/// The ω-flow analogue of [`n_flow_from_jet3`]. `g` is the Jet3 of
/// `F(T,Y,Θ) = f̃(v n(T)a(Y)K(Θ))` at the base point `v = x ω(u0)`. Using
/// `n(t)a(y)·n(t')a(y') = n(t + e^{y}t')a(y + y')`, the β-derivative at
/// `v n(t)a(y)` is `e^{β1 y} Σ C(i,β1)C(j,β2) F[i,j,β3] t^{i−β1} y^{j−β2}`.
/// Only powers `y^m` with `m ≤ y_degree` are kept (y(σ) = O(σ/T)).
pub fn omega_flow_from_jet3(g: &Jet3, beta: MultiIndex, u0: f64, big_t: f64, n: usize, y_degree: usize) -> Result<Jet1> {
    let MultiIndex(b1, b2, b3) = beta;
    let (tj, yj) = omega_coordinate_jets(u0, big_t, n)?;
    let tau = tj.c.get(1).copied().unwrap_or_default();
    let mut ypow = Jet1::constant(C64::new(1.0, 0.0), n);
    let mut out = Jet1::zeros(n);
    for m in 0..=y_degree.min(n) {
        let j = b2 + m;
        // P(σ) = Σ_i C(i,β1) F[i,j,β3] (τσ)^{i−β1}
        let mut p = Jet1::zeros(n);
        let mut any = false;
        let mut taupow = C64::new(1.0, 0.0);
        for e in 0..=n {
            let i = b1 + e;
            let c = g.get(i, j, b3);
            if c != C64::new(0.0, 0.0) {
                p.c[e] = c * binom(i, b1) * taupow;
                any = true;
            }
            taupow *= tau;
        }
        if any {
            out += &p.mul_trunc(&ypow).scale(C64::new(binom(j, b2), 0.0));
        }
        ypow = ypow.mul_trunc(&yj);
    }
    if b1 > 0 {
        // e^{β1 y(σ)} = (1 + σ/(T+u0))^{β1}
        let mut lin = Jet1::constant(C64::new(1.0, 0.0), n);
        if n >= 1 {
            lin.c[1] = C64::new(1.0 / (big_t + u0), 0.0);
        }
        out = out.mul_trunc(&lin.powi(b1 as i32)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Derivative scale

/// Directional derivative scales of f̃ (t, y, θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalR {
    pub t: f64,
    pub y: f64,
    pub theta: f64,
}

impl DirectionalR {
    pub fn max(&self) -> f64 {
        self.t.max(self.y).max(self.theta)
    }
}

/// Deterministic quasi-random points of the fundamental domain.
fn sample_points(count: usize, seed: u64) -> Vec<Mat2> {
    let phi1 = 0.754_877_666_246_692_7; // R2 sequence (plastic number)
    let phi2 = 0.569_840_290_998_053_3;
    let offset = (seed as f64 * std::f64::consts::FRAC_1_PI).fract();
    (0..count)
        .map(|k| {
            let u = (offset + phi1 * (k as f64 + 1.0)).fract();
            let v = (offset * 0.7 + phi2 * (k as f64 + 1.0)).fract();
            let x = u - 0.5;
            let ymin = (1.0 - x * x).sqrt();
            // heights from the bottom of the domain up to 3
            let y = ymin + v * (3.0 - ymin);
            let th = 2.0 * PI * ((k as f64 * 0.618_033_988_749_895).fract() - 0.5);
            n_mat(x) * crate::geometry::a_mat(y.ln()) * crate::geometry::k_mat(th)
        })
        .collect()
}

/// Directional scales from `count` quasi-random samples with jets of degree `d`.
pub fn estimate_r_directional(form: &CuspFormSpec, count: usize, d: usize, seed: u64) -> DirectionalR {
    let layout = Jet3Layout::new(Jet3Shape::total_degree(d));
    let mut out = DirectionalR { t: 1.0, y: 1.0, theta: 1.0 };
    let mut scale: f64 = 0.0;
    let mut jets = Vec::new();
    for m in sample_points(count, seed) {
        if let Ok(j) = lift_jet3_shaped(form, &m, &layout, 0.0) {
            scale = scale.max(j.c[0].norm());
            jets.push(j);
        }
    }
    if scale == 0.0 {
        return out;
    }
    for j in &jets {
        for idx in 1..layout.len() {
            let (a, b, c) = layout.monomial(idx);
            let ord = (a + b + c) as f64;
            let v = j.c[idx].norm() / scale;
            if v == 0.0 {
                continue;
            }
            let rr = v.powf(1.0 / ord);
            if a > 0 {
                out.t = out.t.max(rr);
            }
            if b > 0 {
                out.y = out.y.max(rr);
            }
            if c > 0 {
                out.theta = out.theta.max(rr);
            }
        }
    }
    out
}

/// `R = max over sampled β of (|∂^β f̃|/β!)^{1/|β|}` relative to the sup of
/// `|f̃|` over the samples, clamped below by 1.
pub fn estimate_r(form: &CuspFormSpec) -> f64 {
    estimate_r_with(form, 100, 4, 0)
}

pub fn estimate_r_with(form: &CuspFormSpec, count: usize, d: usize, seed: u64) -> f64 {
    estimate_r_directional(form, count, d, seed).max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{a_mat, k_mat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn delta() -> CuspFormSpec {
        CuspFormSpec::delta(60)
    }

    fn random_gamma(rng: &mut ChaCha8Rng, steps: usize) -> Mat2 {
        let mut g = Mat2::IDENTITY;
        for _ in 0..steps {
            let n = rng.gen_range(-3i32..=3) as f64;
            g = g * n_mat(n) * Mat2::new(0.0, -1.0, 1.0, 0.0);
        }
        g
    }

    #[test]
    fn tau_values() {
        let t = gen_delta(30);
        assert_eq!(t.exact(1), Some(1));
        assert_eq!(t.exact(2), Some(-24));
        assert_eq!(t.exact(3), Some(252));
        assert_eq!(t.exact(6), Some(-6048));
        assert_eq!(t.exact(6).unwrap(), t.exact(2).unwrap() * t.exact(3).unwrap());
        for p in [2i128, 3, 5] {
            let tp = t.exact(p as usize).unwrap();
            assert_eq!(t.exact((p * p) as usize).unwrap(), tp * tp - p.pow(11));
        }
    }

    #[test]
    fn tau_multiplicative_up_to_100() {
        let t = gen_delta(100);
        let gcd = |mut a: usize, mut b: usize| {
            while b != 0 {
                (a, b) = (b, a % b);
            }
            a
        };
        for m in 2..=100usize {
            for n in 2..=100 / m {
                if gcd(m, n) == 1 {
                    assert_eq!(t.exact(m * n).unwrap(), t.exact(m).unwrap() * t.exact(n).unwrap(), "{m}·{n}");
                }
            }
        }
    }

    #[test]
    fn load_minimal_delta_and_rejections() {
        let ok = r#"{"kind":"holomorphic","weight":12,"level":1,"fricke":{"C1":1.0,"C2_re":1.0,"C2_im":0.0},
                     "coefficients":[1,-24,252,-1472,4830,-6048,-16744,84480,-113643,-115920]}"#;
        let f = parse_form(ok).unwrap();
        assert_eq!(f.coefficients.n_max(), 10);
        assert!(f.coefficients.is_exact());
        let bad_kind = ok.replace("\"weight\":12", "\"weight\":0");
        assert!(matches!(parse_form(&bad_kind), Err(Error::Load(_))));
        let maass = ok.replace("holomorphic", "maass-even").replace("\"weight\":12", "\"weight\":0");
        assert!(matches!(parse_form(&maass), Err(Error::Load(_))));
        let unknown = ok.replace("\"level\":1", "\"level\":1,\"extra\":3");
        assert!(matches!(parse_form(&unknown), Err(Error::Load(_))));
    }

    #[test]
    fn three_coefficients_load_with_reduced_accuracy() {
        let text = r#"{"kind":"holomorphic","weight":12,"level":1,"fricke":{"C1":1.0,"C2_re":1.0,"C2_im":0.0},"coefficients":[1,-24,252]}"#;
        let f = parse_form(text).unwrap();
        assert_eq!(f.coefficients.n_max(), 3);
        assert!(f.accuracy > DEFAULT_LIFT_ACCURACY);
        assert!(n_terms(Y_MIN, f.accuracy) <= 3);
        assert_eq!(gen_delta(3).values(), f.coefficients.values());
    }

    #[test]
    fn json_round_trip() {
        let f = delta();
        let back = parse_form(&form_to_json(&f)).unwrap();
        assert_eq!(back.coefficients, f.coefficients);
    }

    #[test]
    fn delta_at_identity() {
        let f = delta();
        let v = lift_value(&f, &Mat2::IDENTITY).unwrap();
        let direct: f64 = (1..=60).map(|n| f.coefficients.get(n) * (-TWO_PI * n as f64).exp()).sum();
        assert!((v.re - direct).abs() <= 1e-12 * direct.abs() && v.im.abs() < 1e-18);
    }

    #[test]
    fn weight_factor_on_a() {
        let f = delta();
        let y0 = 0.4f64;
        let v = lift_value(&f, &a_mat(y0)).unwrap();
        let z = C64::new(0.0, y0.exp());
        let fz: C64 = (1..=60).map(|n| (C64::new(0.0, TWO_PI * n as f64) * z).exp() * f.coefficients.get(n)).sum();
        // Eq (tf) with d = e^{−y0/2}: (ci+d)^{−k} = e^{+k y0/2}
        let expect = fz * (6.0 * y0).exp();
        assert!((v - expect).norm() <= 1e-13 * expect.norm());
    }

    #[test]
    fn gamma_invariance() {
        // unreduced points sit lower in the plane and need a longer table
        let f = CuspFormSpec::delta(400);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = n_mat(rng.gen_range(-0.5..0.5)) * a_mat(rng.gen_range(0.0..1.0)) * k_mat(rng.gen_range(-3.0..3.0));
            let g = random_gamma(&mut rng, 2);
            let gm = g * m;
            let v1 = lift_value_unreduced(&f, &m).unwrap();
            if gm.act_i().im < 0.05 {
                continue;
            }
            let v2 = lift_value_unreduced(&f, &gm).unwrap();
            assert!((v1 - v2).norm() <= 1e-10 * v1.norm().max(1e-6), "{v1} vs {v2}");
            let v3 = lift_value(&f, &gm).unwrap();
            assert!((v1 - v3).norm() <= 1e-10 * v1.norm().max(1e-6));
        }
    }

    #[test]
    fn theta_equivariance() {
        let f = delta();
        let m = n_mat(0.2) * a_mat(0.3);
        let v = lift_value(&f, &m).unwrap();
        let vk = lift_value(&f, &(m * k_mat(0.7))).unwrap();
        let expect = v * C64::new(0.0, 12.0 * 0.7).exp();
        assert!((vk - expect).norm() <= 1e-12 * v.norm());
    }

    fn fd_check(f: &CuspFormSpec, x: &Mat2, beta: (usize, usize, usize), jet: &Jet3, tol: f64) {
        let eval = |t: f64, y: f64, th: f64| lift_value(f, &(*x * n_mat(t) * a_mat(y) * k_mat(th))).unwrap();
        let h = 1e-4;
        // central differences of order 2 in each active coordinate
        let diff1 = |g: &dyn Fn(f64) -> C64| (g(h) - g(-h)) / (2.0 * h);
        let diff2 = |g: &dyn Fn(f64) -> C64| (g(h) - 2.0 * g(0.0) + g(-h)) / (h * h);
        let got = jet.get(beta.0, beta.1, beta.2) * MultiIndex(beta.0, beta.1, beta.2).factorial();
        let fd = match beta {
            (1, 0, 0) => diff1(&|s| eval(s, 0.0, 0.0)),
            (0, 1, 0) => diff1(&|s| eval(0.0, s, 0.0)),
            (0, 0, 1) => diff1(&|s| eval(0.0, 0.0, s)),
            (2, 0, 0) => diff2(&|s| eval(s, 0.0, 0.0)),
            (0, 2, 0) => diff2(&|s| eval(0.0, s, 0.0)),
            (0, 0, 2) => diff2(&|s| eval(0.0, 0.0, s)),
            (1, 1, 0) => (eval(h, h, 0.0) - eval(h, -h, 0.0) - eval(-h, h, 0.0) + eval(-h, -h, 0.0)) / (4.0 * h * h),
            _ => unreachable!(),
        };
        let scale = got.norm().max(1e-3 * jet.c[0].norm());
        assert!((got - fd).norm() <= tol * scale, "β={beta:?}: jet {got} vs fd {fd}");
    }

    #[test]
    fn jet3_matches_finite_differences() {
        let f = delta();
        let x = n_mat(0.13) * a_mat(0.25) * k_mat(0.4);
        let jet = lift_jet3(&f, &x, 4).unwrap();
        assert!((jet.c[0] - lift_value(&f, &x).unwrap()).norm() < 1e-16);
        for beta in [(1, 0, 0), (0, 1, 0), (0, 0, 1), (2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0)] {
            let tol = if beta.0 + beta.1 + beta.2 == 1 { 1e-6 } else { 1e-5 };
            fd_check(&f, &x, beta, &jet, tol);
        }
    }

    #[test]
    fn n_flow_matches_restriction_and_value() {
        let f = delta();
        let x = n_mat(0.1) * a_mat(-0.2);
        let u0 = 0.35;
        let jn = curve_taylor(&f, &x, MultiIndex(0, 0, 0), Curve::N, u0, 12).unwrap();
        assert!((jn.c[0] - lift_value(&f, &(x * n_mat(u0))).unwrap()).norm() < 1e-17);
        let j3 = lift_jet3(&f, &(x * n_mat(u0)), 12).unwrap().restrict(0);
        let j1 = lift_jet_n(&f, &x, u0, 12, DEFAULT_JET_RADIUS).unwrap();
        for k in 0..=12 {
            assert!((jn.c[k] - j3.c[k]).norm() <= 1e-12 * j3.max_norm());
            assert!((j1.c[k] - j3.c[k]).norm() <= 1e-12 * j3.max_norm());
        }
    }

    #[test]
    fn n_flow_with_beta_matches_shifted_jets() {
        // coefficient of s^j in ∂^β f̃(x n(u0+s)) vs jets computed at the shifted base point
        let f = delta();
        let x = n_mat(-0.2) * a_mat(0.1) * k_mat(0.3);
        let beta = MultiIndex(1, 1, 1);
        let jn = curve_taylor(&f, &x, beta, Curve::N, 0.0, 14).unwrap();
        let s = 0.02;
        let shifted = lift_jet3(&f, &(x * n_mat(s)), 3).unwrap();
        let v = jn.eval(C64::new(s, 0.0));
        let base = lift_jet3(&f, &x, 3).unwrap();
        assert!((jn.c[0] - base.get(1, 1, 1)).norm() <= 1e-12 * base.get(1, 1, 1).norm(), "{} vs {}", jn.c[0], base.get(1, 1, 1));
        assert!((v - shifted.get(1, 1, 1)).norm() <= 1e-6 * shifted.get(1, 1, 1).norm(), "{v} vs {}", shifted.get(1, 1, 1));
    }

    #[test]
    fn omega_flow_matches_finite_difference() {
        let f = delta();
        let big_t = 20.0;
        let x = crate::geometry::kappa(3.0, big_t);
        let u0 = 0.7;
        let j = curve_taylor(&f, &x, MultiIndex(0, 0, 0), Curve::Omega(big_t), u0, 8).unwrap();
        let direct = lift_jet_omega(&f, &x, u0, big_t, 8, DEFAULT_JET_RADIUS).unwrap();
        let h = 1e-4;
        let g = |u: f64| lift_value(&f, &(x * crate::geometry::omega(u, big_t))).unwrap();
        let fd = (g(u0 + h) - g(u0 - h)) / (2.0 * h);
        assert!((j.c[0] - g(u0)).norm() <= 1e-12 * g(u0).norm());
        assert!((j.c[1] - fd).norm() <= 1e-6 * fd.norm(), "{} vs {fd}", j.c[1]);
        for k in 0..=8 {
            assert!((j.c[k] - direct.c[k]).norm() <= 1e-10 * direct.max_norm());
        }
    }

    #[test]
    fn omega_flow_with_beta_matches_pointwise_jets() {
        let f = delta();
        let big_t = 10.0;
        let x = crate::geometry::kappa(1.7, big_t);
        let u0 = 0.4;
        let beta = MultiIndex(1, 0, 1);
        let j = curve_taylor(&f, &x, beta, Curve::Omega(big_t), u0, 8).unwrap();
        let s = 0.03;
        let pt = lift_jet3(&f, &(x * crate::geometry::omega(u0 + s, big_t)), 2).unwrap();
        let v = j.eval(C64::new(s, 0.0));
        assert!((v - pt.get(1, 0, 1)).norm() <= 1e-8 * pt.get(1, 0, 1).norm(), "{v} vs {}", pt.get(1, 0, 1));
    }

    #[test]
    fn insufficient_coefficients_reported() {
        let f = CuspFormSpec::delta(12);
        // low in the plane without reduction needs many terms
        let m = a_mat((0.05f64).ln());
        match lift_value_unreduced(&f, &m) {
            Err(Error::InsufficientCoefficients { required, available }) => {
                assert_eq!(available, 12);
                assert!(required > 12);
            }
            other => panic!("expected InsufficientCoefficients, got {other:?}"),
        }
    }

    #[test]
    fn truncation_is_honest() {
        let mut f = delta();
        let x = n_mat(0.3) * a_mat(-0.1);
        let v = lift_value(&f, &x).unwrap();
        f.accuracy /= 2.0;
        let v2 = lift_value(&f, &x).unwrap();
        assert!((v - v2).norm() <= DEFAULT_LIFT_ACCURACY);
    }

    #[test]
    fn estimate_r_properties() {
        let zero = CuspFormSpec {
            coefficients: CoefficientTable::from_floats(vec![0.0; 20]),
            ..delta()
        };
        assert_eq!(estimate_r(&zero), 1.0);
        let f = delta();
        let a = estimate_r_with(&f, 100, 4, 1);
        let b = estimate_r_with(&f, 100, 4, 2);
        assert!(a.is_finite() && ((a - b) / a).abs() <= 0.1, "{a} vs {b}");
        let lo = estimate_r_with(&f, 40, 2, 3);
        let hi = estimate_r_with(&f, 40, 4, 3);
        assert!(hi >= lo);
    }

    #[test]
    fn maass_single_term_matches_closed_form() {
        // synthetic "form" with f̂(1) = 1 only: 2√y K_{ir}(2πy) cos(2πx)
        let r = SpectralParam::real(1.0).unwrap();
        let mut coeffs = vec![0.0; 20];
        coeffs[0] = 1.0;
        let f = CuspFormSpec::maass_even(r, CoefficientTable::from_floats(coeffs)).unwrap();
        let z = C64::new(0.2, 1.3);
        let m = n_mat(z.re) * a_mat(z.im.ln());
        let v = lift_value_unreduced(&f, &m).unwrap();
        let expect = 2.0 * z.im.sqrt() * crate::specfun::bessel_k(r, TWO_PI * z.im).unwrap() * (TWO_PI * z.re).cos();
        assert!((v - expect).norm() <= 1e-12 * expect.norm());
        let j = lift_jet3(&f, &m, 3).unwrap();
        fd_check(&f, &m, (1, 0, 0), &j, 1e-6);
        fd_check(&f, &m, (0, 1, 0), &j, 1e-6);
        fd_check(&f, &m, (0, 2, 0), &j, 1e-5);
        assert!(j.get(0, 0, 1).norm() < 1e-18); // weight 0: no θ dependence
    }
}
