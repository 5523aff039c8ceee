//! SL(2,R) matrix algebra, NAK (Iwasawa) coordinates and reduction to the
//! standard SL(2,Z) fundamental domain.
//!
//! Conventions: `n(t) = [[1,t],[0,1]]`, `a(y) = diag(e^{y/2}, e^{-y/2})`,
//! `K(θ) = [[cos θ, sin θ],[-sin θ, cos θ]]`, and every `g` factors uniquely as
//! `g = n(t) a(y) K(θ)` with `θ ∈ (-π, π]`. The point `g·i` is `t + i e^y`.

use std::f64::consts::PI;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance on `|ad - bc - 1|`, relative to the largest entry squared.
pub const DET_TOL: f64 = 1e-12;

/// A real 2×2 matrix `[[a, b], [c, d]]`, expected to be unimodular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Builds a matrix without validation. Callers in hot loops use this;
    /// debug builds still assert unimodularity.
    #[inline]
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        let m = Mat2 { a, b, c, d };
        debug_assert!(m.is_unimodular(), "non-unimodular matrix {m:?}");
        m
    }

    /// Builds a matrix, rejecting entries that are not unimodular within
    /// [`DET_TOL`].
    pub fn try_new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Mat2 { a, b, c, d };
        if m.is_unimodular() {
            Ok(m)
        } else {
            Err(Error::Domain {
                function: "Mat2::try_new",
                detail: format!("determinant {} is not 1", m.det()),
            })
        }
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a.mul_add(self.d, -(self.b * self.c))
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn is_unimodular(&self) -> bool {
        let scale = self.max_abs().max(1.0);
        (self.det() - 1.0).abs() <= DET_TOL * scale * scale && self.det().is_finite()
    }

    /// Inverse of a unimodular matrix (the adjugate).
    #[inline]
    pub fn inv(&self) -> Self {
        Mat2 { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn neg(&self) -> Self {
        Mat2 { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }

    /// `‖self − I‖∞` (largest entry magnitude).
    pub fn dist_to_identity(&self) -> f64 {
        (self.a - 1.0)
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max((self.d - 1.0).abs())
    }

    /// Möbius action on the upper half plane.
    pub fn act(&self, z: Complex64) -> Complex64 {
        (z * self.a + self.b) / (z * self.c + self.d)
    }

    /// `self · i`.
    pub fn act_i(&self) -> Complex64 {
        let den = self.c * self.c + self.d * self.d;
        Complex64::new((self.a * self.c + self.b * self.d) / den, 1.0 / den)
    }

    pub fn max_entry_diff(&self, other: &Mat2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }
}

/// Two-term dot product `x0*y0 + x1*y1` with one rounding-error correction;
/// keeps reduced matrices accurate when the integer factor has large entries.
#[inline]
fn dot2(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let p = x0 * y0;
    let e = x0.mul_add(y0, -p);
    let s = x1.mul_add(y1, p);
    s + e
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, o: Mat2) -> Mat2 {
        let m = Mat2 {
            a: dot2(self.a, o.a, self.b, o.c),
            b: dot2(self.a, o.b, self.b, o.d),
            c: dot2(self.c, o.a, self.d, o.c),
            d: dot2(self.c, o.b, self.d, o.d),
        };
        debug_assert!(
            (m.det() - 1.0).abs() <= DET_TOL * (self.max_abs() * o.max_abs()).max(1.0).powi(2),
            "product lost unimodularity: {m:?}"
        );
        m
    }
}

/// `n(t)`.
pub fn n_mat(t: f64) -> Mat2 {
    Mat2 { a: 1.0, b: t, c: 0.0, d: 1.0 }
}

/// `a(y) = diag(e^{y/2}, e^{-y/2})`.
pub fn a_mat(y: f64) -> Mat2 {
    let e = (0.5 * y).exp();
    Mat2 { a: e, b: 0.0, c: 0.0, d: 1.0 / e }
}

/// `K(θ)`.
pub fn k_mat(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2 { a: c, b: s, c: -s, d: c }
}

/// The lift `κ(t)` of the ray `{α t}`, `α = −1 + i/T`: `κ(t)·i = α t`.
pub fn kappa(t: f64, big_t: f64) -> Mat2 {
    let r = (t / big_t).sqrt();
    Mat2 { a: r, b: -(t * big_t).sqrt(), c: 0.0, d: 1.0 / r }
}

/// `ω(u) = κ(b)^{-1} κ(b(1 + u/T))`, independent of `b`.
pub fn omega(u: f64, big_t: f64) -> Mat2 {
    let g = (1.0 + u / big_t).sqrt();
    Mat2 { a: g, b: -u / g, c: 0.0, d: 1.0 / g }
}

/// Multi-index `β = (β₁, β₂, β₃)` over the (n, a, K) directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub usize, pub usize, pub usize);

impl MultiIndex {
    pub fn order(&self) -> usize {
        self.0 + self.1 + self.2
    }

    pub fn factorial(&self) -> f64 {
        factorial(self.0) * factorial(self.1) * factorial(self.2)
    }

    /// All multi-indices with `|β| ≤ d`, ordered by total degree then
    /// lexicographically.
    pub fn up_to(d: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for total in 0..=d {
            for b1 in (0..=total).rev() {
                for b2 in (0..=total - b1).rev() {
                    out.push(MultiIndex(b1, b2, total - b1 - b2));
                }
            }
        }
        out
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// NAK coordinates `(t, y, θ)` with `g = n(t) a(y) K(θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwasawaCoords {
    pub t: f64,
    pub y: f64,
    pub theta: f64,
}

/// Folds an angle into `(−π, π]`.
pub fn fold_angle(theta: f64) -> f64 {
    let mut th = theta.rem_euclid(2.0 * PI);
    if th > PI {
        th -= 2.0 * PI;
    }
    if th <= -PI {
        th += 2.0 * PI;
    }
    th
}

pub fn iwasawa_decompose(m: &Mat2) -> IwasawaCoords {
    let Mat2 { a: p, b: q, c: r, d: s } = *m;
    let rho = r * r + s * s;
    let mut theta = (-r).atan2(s);
    if theta <= -PI {
        theta += 2.0 * PI;
    }
    IwasawaCoords { t: (p * r + q * s) / rho, y: -rho.ln(), theta }
}

pub fn iwasawa_compose(c: &IwasawaCoords) -> Mat2 {
    let e = (0.5 * c.y).exp();
    let ei = 1.0 / e;
    let (sn, cs) = c.theta.sin_cos();
    Mat2 {
        a: e * cs - c.t * ei * sn,
        b: e * sn + c.t * ei * cs,
        c: -ei * sn,
        d: ei * cs,
    }
}

/// True iff all three NAK coordinates of `m` lie strictly inside `(−δ, δ)`.
pub fn in_neighborhood(m: &Mat2, delta: f64) -> bool {
    let c = iwasawa_decompose(m);
    c.t.abs() < delta && c.y.abs() < delta && c.theta.abs() < delta
}

/// Closed form of `n(−t) A n(t)`.
pub fn conjugated_n_displacement(m: &Mat2, t: f64) -> Mat2 {
    let Mat2 { a: p, b: q, c: r, d: s } = *m;
    Mat2 {
        a: p - t * r,
        b: (p - s) * t - t * t * r + q,
        c: r,
        d: t * r + s,
    }
}

/// `ω(u)^{-1} A ω(u)`.
pub fn conjugated_omega_displacement(m: &Mat2, u: f64, big_t: f64) -> Mat2 {
    let w = omega(u, big_t);
    w.inv() * *m * w
}

/// Result of a fundamental-domain reduction: `reduced = gamma · m`.
#[derive(Debug, Clone, Copy)]
pub struct Reduction {
    pub reduced: Mat2,
    pub gamma: Mat2,
    pub steps: usize,
}

/// Gauss reduction: alternate integer translations and `z ↦ −1/z` until
/// `m·i` lies in `|Re z| ≤ 1/2, |z| ≥ 1`.
pub fn reduce_to_fundamental_domain(m: &Mat2) -> Result<Reduction> {
    let z0 = m.act_i();
    let cap = (10.0 * (1.0 + z0.im.ln().abs())).ceil() as usize + 10;
    // gamma kept in integers; the point itself is tracked independently
    let (mut ga, mut gb, mut gc, mut gd) = (1i128, 0i128, 0i128, 1i128);
    let mut z = z0;
    let mut steps = 0usize;
    loop {
        let n = (z.re + 0.5).floor();
        if n != 0.0 {
            let ni = n as i128;
            ga -= ni * gc;
            gb -= ni * gd;
            z.re -= n;
        }
        if z.norm_sqr() < 1.0 - 1e-12 {
            let (na, nb) = (-gc, -gd);
            gc = ga;
            gd = gb;
            ga = na;
            gb = nb;
            z = -1.0 / z;
        } else {
            break;
        }
        steps += 1;
        if steps > cap {
            return Err(Error::ReductionFailure(steps));
        }
    }
    let gamma = Mat2 { a: ga as f64, b: gb as f64, c: gc as f64, d: gd as f64 };
    let reduced = gamma * *m;
    Ok(Reduction { reduced, gamma, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sl2(rng: &mut ChaCha8Rng) -> Mat2 {
        iwasawa_compose(&IwasawaCoords {
            t: rng.gen_range(-3.0..3.0),
            y: rng.gen_range(-3.0..3.0),
            theta: rng.gen_range(-3.1..3.1),
        })
    }

    #[test]
    fn decompose_identity_and_translation() {
        let c = iwasawa_decompose(&Mat2::IDENTITY);
        assert_eq!((c.t, c.y, c.theta), (0.0, 0.0, 0.0));
        let c = iwasawa_decompose(&n_mat(2.5));
        assert!((c.t - 2.5).abs() < 1e-15 && c.y.abs() < 1e-15 && c.theta == 0.0);
    }

    #[test]
    fn compose_a_factor() {
        let m = iwasawa_compose(&IwasawaCoords { t: 0.0, y: 2.0 * 2f64.ln(), theta: 0.0 });
        assert!(m.max_entry_diff(&Mat2 { a: 2.0, b: 0.0, c: 0.0, d: 0.5 }) < 1e-15);
        assert_eq!(iwasawa_compose(&IwasawaCoords { t: 0.0, y: 0.0, theta: 0.0 }), Mat2::IDENTITY);
    }

    #[test]
    fn round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let m = random_sl2(&mut rng);
            let back = iwasawa_compose(&iwasawa_decompose(&m));
            assert!(back.max_entry_diff(&m) <= 1e-12 * m.max_abs().max(1.0));
            let c = IwasawaCoords {
                t: rng.gen_range(-5.0..5.0),
                y: rng.gen_range(-4.0..4.0),
                theta: rng.gen_range(-PI..PI),
            };
            let d = iwasawa_decompose(&iwasawa_compose(&c));
            assert!((d.t - c.t).abs() < 1e-12 && (d.y - c.y).abs() < 1e-12);
            assert!((fold_angle(d.theta - c.theta)).abs() < 1e-12);
        }
    }

    #[test]
    fn theta_range_all_quadrants() {
        for th in [PI, -PI + 1e-9, 3.0, -3.0, 1.7, -1.7, 0.2] {
            let c = iwasawa_decompose(&k_mat(th));
            assert!(c.theta > -PI && c.theta <= PI);
            assert!(fold_angle(c.theta - th).abs() < 1e-12);
        }
    }

    #[test]
    fn neighborhood_membership() {
        let delta = 0.01;
        assert!(in_neighborhood(&Mat2::IDENTITY, 1e-9));
        assert!(!in_neighborhood(&n_mat(2.0 * delta), delta));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            // ‖m − I‖∞ = δ/10
            let e = delta / 10.0;
            let p = 1.0 + rng.gen_range(-e..e);
            let q = rng.gen_range(-e..e);
            let r = rng.gen_range(-e..e);
            let s = (1.0 + q * r) / p;
            let m = Mat2::new(p, q, r, s);
            assert!(in_neighborhood(&m, delta));
        }
    }

    #[test]
    fn conjugation_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(conjugated_n_displacement(&Mat2::IDENTITY, 3.7), Mat2::IDENTITY);
        for _ in 0..500 {
            let m = random_sl2(&mut rng);
            let t = rng.gen_range(-4.0..4.0);
            let direct = n_mat(-t) * m * n_mat(t);
            let closed = conjugated_n_displacement(&m, t);
            let scale = direct.max_abs().max(1.0);
            assert!(direct.max_entry_diff(&closed) <= 1e-14 * scale * 4.0);
            assert_eq!(conjugated_n_displacement(&m, 0.0), m);
        }
    }

    #[test]
    fn reduction_lands_in_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let m = iwasawa_compose(&IwasawaCoords {
                t: rng.gen_range(-50.0..50.0),
                y: rng.gen_range(-12.0..4.0),
                theta: rng.gen_range(-3.0..3.0),
            });
            let red = reduce_to_fundamental_domain(&m).unwrap();
            let z = red.reduced.act_i();
            assert!(z.re.abs() <= 0.5 + 1e-9 && z.norm() >= 1.0 - 1e-9, "{z}");
            let g = red.gamma;
            for v in [g.a, g.b, g.c, g.d] {
                assert!((v - v.round()).abs() < 1e-9);
            }
            assert_eq!(g.a * g.d - g.b * g.c, 1.0);
            assert!(red.reduced.max_entry_diff(&(g * m)) < 1e-9);
        }
    }

    #[test]
    fn reduction_identity_when_already_reduced() {
        let m = iwasawa_compose(&IwasawaCoords { t: 0.2, y: 0.5, theta: 0.3 });
        let red = reduce_to_fundamental_domain(&m).unwrap();
        assert_eq!(red.gamma, Mat2::IDENTITY);
        assert_eq!(red.reduced, m);
    }

    #[test]
    fn reduction_translates_real_part() {
        let m = n_mat(5.3) * a_mat(1.0);
        let red = reduce_to_fundamental_domain(&m).unwrap();
        assert!(red.reduced.act_i().re.abs() <= 0.5);
        assert_eq!(red.gamma, n_mat(-5.0));
    }

    #[test]
    fn kappa_lifts_the_ray() {
        let big_t = 37.0;
        for t in [1e-3, 0.5, 4.0, 900.0] {
            let z = kappa(t, big_t).act_i();
            let alpha = Complex64::new(-1.0, 1.0 / big_t);
            assert!((z - alpha * t).norm() <= 1e-12 * (1.0 + t));
        }
        let b = 3.0;
        let u = 1.7;
        let lhs = kappa(b, big_t).inv() * kappa(b * (1.0 + u / big_t), big_t);
        assert!(lhs.max_entry_diff(&omega(u, big_t)) < 1e-12);
        assert!(omega(u, big_t).max_entry_diff(&(n_mat(-u) * a_mat((1.0 + u / big_t).ln()))) < 1e-12);
    }

    #[test]
    fn multi_index_enumeration() {
        let all = MultiIndex::up_to(4);
        assert_eq!(all.len(), 35);
        assert_eq!(all[0], MultiIndex(0, 0, 0));
        assert_eq!(MultiIndex(2, 1, 3).factorial(), 12.0);
        assert_eq!(MultiIndex(2, 1, 3).order(), 6);
    }
}
