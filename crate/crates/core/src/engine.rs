//! Fast and direct pipelines for Fourier coefficients and L-values.
//!
//! The fast pipelines cut the contour into short segments, reduce every base
//! point into the fundamental domain, group points that are close to a common
//! representative `v`, and recover each member's segment integral from the
//! representative's integral table via the expansion
//! `f̃(v A n(s)) = Σ_β G_β(s) h(s)^β`, `h = NAK coordinates of n(−s)An(s)`
//! (or the `ω`-analogue for L-values).
//!
//! Evaluation is parallel over groups, while summation is sequential in
//! ascending segment index, so results do not depend on the thread count.

use crate::forms::{lift_jet3_shaped, lift_series, n_flow_from_jet3, omega_flow_from_jet3, CuspFormSpec, FormKind, LiftArgs};
use crate::geomfe::{assemble_l, assemble_l_log, contour_for, ContourSpec};
use crate::geometry::{
    a_mat, in_neighborhood, iwasawa_decompose, kappa, n_mat, omega, reduce_to_fundamental_domain, Mat2, MultiIndex,
};
use crate::jets::{Jet1, Jet3, Jet3Layout, Jet3Shape, Series};
use crate::quadrature::{CompensatedSum, Grid, Growth, QuadratureSpec};
use crate::specfun::{bessel_k, LogComplex};
use crate::{Error, Result};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Largest expansion order a group may use.
pub const D_MAX: usize = 8;
/// Absolute tolerance floor for per-segment expansion tails.
pub const TOL_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Double,
    /// Final L-values are also reported in log form, so they never overflow.
    Extended,
}

/// How segments are grouped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// δ = T^{−(2η+ε)} with adaptive expansion order; groups whose table
    /// costs more than evaluating their members one by one are dissolved.
    Auto,
    /// Like `Auto`, but every accurate group is kept regardless of cost.
    Always,
    /// Every segment is its own group (δ → 0).
    Singletons,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub gamma: f64,
    pub eps: f64,
    pub eta: f64,
    /// Fixed expansion order; adaptive when `None`.
    pub d: Option<usize>,
    pub precision: Precision,
    pub grouping: Grouping,
    /// Worker threads; rayon's global pool when `None`.
    pub threads: Option<usize>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            gamma: 4.0,
            eps: 1.0 / 16.0,
            eta: 1.0 / 8.0,
            d: None,
            precision: Precision::Double,
            grouping: Grouping::Auto,
            threads: None,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParams(format!("epsilon must be positive, got {}", self.eps)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0 / 3.0) {
            return Err(Error::InvalidParams(format!("eta must lie in (0, 1/3), got {}", self.eta)));
        }
        if !(self.eps < 1.0 - 3.0 * self.eta) {
            return Err(Error::InvalidParams(format!(
                "epsilon {} must be < 1 − 3·eta = {}",
                self.eps,
                1.0 - 3.0 * self.eta
            )));
        }
        if let Some(d) = self.d {
            if d > D_MAX {
                return Err(Error::InvalidParams(format!("expansion order {d} exceeds {D_MAX}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParams("threads must be ≥ 1".into()));
        }
        Ok(())
    }

    fn tol(&self, t: f64) -> f64 {
        t.powf(-self.gamma).max(TOL_FLOOR)
    }
}

/// Counters reported alongside every pipeline value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunStats {
    /// Grid points at which an f̃-jet was evaluated.
    pub jet_evals: u64,
    pub groups: usize,
    pub segments: usize,
    /// Largest expansion order used by any group.
    pub max_d: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOutput {
    pub value: C64,
    pub err_est: f64,
    /// `value` in log form (L-values in extended precision).
    pub log_value: Option<LogComplex>,
    pub stats: RunStats,
}

// ---------------------------------------------------------------------------
// Segments

/// Curve along which a segment runs from its base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flow {
    /// `u ↦ x n(u)` with integrand weight `e(−u)`.
    N,
    /// `u ↦ x ω(u)` with weight `(1+u/T̃)^{p}`.
    Omega { t_tilde: f64, p: C64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub index: usize,
    /// Unreduced base point.
    pub base: Mat2,
    /// `a_y` (1 for Fourier segments).
    pub weight: LogComplex,
    /// Length of the inner variable's range.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierPlan {
    pub x0: Mat2,
    pub m: u64,
    pub segments: Vec<Segment>,
    /// `(start, length)` of the directly integrated remainder.
    pub remainder: (f64, f64),
}

/// `x0 = a(−log T)`, `⌊T/M⌋` segments at `x0 n(jM)` plus a remainder.
pub fn plan_fourier_segments(t: u64, eta: f64) -> Result<FourierPlan> {
    if t < 1 {
        return Err(Error::InvalidParams("T must be a positive integer".into()));
    }
    let tf = t as f64;
    let x0 = a_mat(-tf.ln());
    // Guard against powf landing just below an integer.
    let m = ((tf.powf(eta) * (1.0 + 1e-12)).floor() as u64).max(1);
    let count = t / m;
    let segments = (0..count)
        .map(|j| Segment {
            index: j as usize,
            base: x0 * n_mat((j * m) as f64),
            weight: LogComplex::ONE,
            length: m as f64,
        })
        .collect();
    let start = (count * m) as f64;
    Ok(FourierPlan { x0, m, segments, remainder: (start, tf - start) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LvaluePlan {
    pub m: f64,
    pub ratio: f64,
    pub segments: Vec<Segment>,
}

/// Geometric ladder `b_j = t0 (1+T̃^{η−1})^j` up to `t1`, base points `κ(b_j)`.
pub fn plan_lvalue_segments(contour: &ContourSpec, k: u32, eta: f64) -> Result<LvaluePlan> {
    let tt = contour.t_tilde;
    let m = tt.powf(eta);
    let ratio = 1.0 + m / tt;
    let (t0, t1) = (contour.window.t0, contour.window.t1);
    let half_k = k as f64 / 2.0;
    let expo = contour.nu - half_k;
    let log_tt = (half_k - 1.0) * tt.ln();
    let mut segments = Vec::new();
    let mut j = 0usize;
    loop {
        let b = t0 * ratio.powi(j as i32);
        if b >= t1 * (1.0 - 1e-15) {
            break;
        }
        let next = b * ratio;
        let length = if next > t1 { tt * (t1 / b - 1.0) } else { m };
        segments.push(Segment {
            index: j,
            base: kappa(b, tt),
            weight: LogComplex::exp(expo * b.ln() + log_tt),
            length,
        });
        j += 1;
        if next >= t1 {
            break;
        }
    }
    Ok(LvaluePlan { m, ratio, segments })
}

// ---------------------------------------------------------------------------
// Expansion coefficients

/// Expansion coefficients `c_{β,l}` (degree-`l` coefficient of `h^β`).
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    pub d: usize,
    pub l: usize,
    pub betas: Vec<MultiIndex>,
    /// Row-major over (β, l).
    pub entries: Vec<C64>,
}

impl CoeffTable {
    pub fn get(&self, beta_idx: usize, l: usize) -> C64 {
        self.entries[beta_idx * (self.l + 1) + l]
    }

    /// Largest `l` whose entries exceed `tol` after scaling by `M^l`.
    fn effective_l(&self, m: f64, tol: f64) -> usize {
        let mut best = 0;
        for l in 0..=self.l {
            let scale = m.powi(l as i32);
            if (0..self.betas.len()).any(|b| self.get(b, l).norm() * scale > tol) {
                best = l;
            }
        }
        best
    }

    /// Copy truncated to `l ≤ new_l`.
    fn truncated(&self, new_l: usize) -> Self {
        let new_l = new_l.min(self.l);
        let mut entries = Vec::with_capacity(self.betas.len() * (new_l + 1));
        for b in 0..self.betas.len() {
            for l in 0..=new_l {
                entries.push(self.get(b, l));
            }
        }
        Self { d: self.d, l: new_l, betas: self.betas.clone(), entries }
    }
}

fn jet_matmul(x: &[Jet1; 4], y: &[Jet1; 4]) -> [Jet1; 4] {
    let [a, b, c, d] = x;
    let [p, q, r, s] = y;
    [
        &a.mul_trunc(p) + &b.mul_trunc(r),
        &a.mul_trunc(q) + &b.mul_trunc(s),
        &c.mul_trunc(p) + &d.mul_trunc(r),
        &c.mul_trunc(q) + &d.mul_trunc(s),
    ]
}

fn const_mat(m: &Mat2, order: usize) -> [Jet1; 4] {
    [m.a, m.b, m.c, m.d].map(|v| Jet1::constant(C64::new(v, 0.0), order))
}

/// Entries of the displacement `n(−s)An(s)` or `ω(s)⁻¹Aω(s)` as jets in `s` at 0.
fn displacement_jets(a: &Mat2, flow: Flow, order: usize) -> Result<[Jet1; 4]> {
    let s = Jet1::variable(ZERO, order);
    let one = Jet1::constant(ONE, order);
    let zero = Jet1::zeros(order);
    let (left, right) = match flow {
        Flow::N => ([one.clone(), -&s, zero.clone(), one.clone()], [one.clone(), s.clone(), zero, one]),
        Flow::Omega { t_tilde, .. } => {
            let g = s.scale(C64::new(1.0 / t_tilde, 0.0)).add_const(ONE).sqrt()?;
            let gi = g.recip()?;
            // ω(s) = [[g, −s/g], [0, 1/g]], ω(s)⁻¹ = [[1/g, s/g], [0, g]]
            let sg = s.mul_trunc(&gi);
            ([gi.clone(), sg.clone(), zero.clone(), g.clone()], [g, -&sg, zero, gi])
        }
    };
    Ok(jet_matmul(&jet_matmul(&left, &const_mat(a, order)), &right))
}

/// NAK coordinate jets `(h1, h2, h3)` of a matrix of jets near the identity.
fn nak_jets(m: &[Jet1; 4]) -> Result<[Jet1; 3]> {
    let [a, b, c, d] = m;
    if !(d.c[0].re > 0.0) {
        return Err(Error::GroupingContract);
    }
    let rho = &c.mul_trunc(c) + &d.mul_trunc(d);
    let t = (&a.mul_trunc(c) + &b.mul_trunc(d)).div_series(&rho)?;
    let y = -&rho.ln()?;
    let theta = (-c).div_series(d)?.atan()?;
    Ok([t, y, theta])
}

fn coeff_table_from_h(h: &[Jet1; 3], d: usize) -> CoeffTable {
    let order = h[0].order();
    let betas = MultiIndex::up_to(d);
    // powers[i][e] = h_i^e
    let powers: Vec<Vec<Jet1>> = h
        .iter()
        .map(|hi| {
            let mut p = vec![Jet1::constant(ONE, order)];
            for e in 1..=d {
                let next = p[e - 1].mul_trunc(hi);
                p.push(next);
            }
            p
        })
        .collect();
    let mut entries = Vec::with_capacity(betas.len() * (order + 1));
    for &MultiIndex(b1, b2, b3) in &betas {
        let prod = powers[0][b1].mul_trunc(&powers[1][b2]).mul_trunc(&powers[2][b3]);
        entries.extend_from_slice(&prod.c);
    }
    CoeffTable { d, l: order, betas, entries }
}

fn check_membership(v: &Mat2, x: &Mat2, delta: f64) -> Result<Mat2> {
    let a = v.inv() * *x;
    if !in_neighborhood(&a, delta) {
        return Err(Error::GroupingContract);
    }
    Ok(a)
}

fn default_l(d: usize) -> usize {
    2 * d + 12
}

/// `c_{β,l}` for member `x` expanded around representative `v` along the N-flow.
pub fn expansion_coeffs_n(v: &Mat2, x: &Mat2, d: usize, delta: f64) -> Result<CoeffTable> {
    let a = check_membership(v, x, delta)?;
    Ok(coeff_table_from_h(&nak_jets(&displacement_jets(&a, Flow::N, default_l(d))?)?, d))
}

/// `e_{β,l}` for the ω-flow, with `ω(u)⁻¹Aω(u)` expanded exactly in `u`.
pub fn expansion_coeffs_omega(v: &Mat2, x: &Mat2, d: usize, delta: f64, t_tilde: f64) -> Result<CoeffTable> {
    let a = check_membership(v, x, delta)?;
    let flow = Flow::Omega { t_tilde, p: ZERO };
    Ok(coeff_table_from_h(&nak_jets(&displacement_jets(&a, flow, default_l(d))?)?, d))
}

// ---------------------------------------------------------------------------
// Grouping

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub segment: usize,
    /// `A = v⁻¹ x̂`.
    pub offset: Mat2,
    pub table: CoeffTable,
    /// Estimated neglected expansion tail (absolute, integrated).
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGroup {
    /// Reduced, sign-normalized representative.
    pub rep: Mat2,
    pub members: Vec<Member>,
    pub d: usize,
    pub l: usize,
    /// Inner-variable length shared by all members.
    pub length: f64,
}

/// Reduce into the fundamental domain and fix the sign so that the NAK angle
/// lies in (−π/2, π/2]; valid because f̃(−g) = f̃(g) for even weight.
pub fn normalize_point(x: &Mat2) -> Result<Mat2> {
    let red = reduce_to_fundamental_domain(x)?.reduced;
    let th = iwasawa_decompose(&red).theta;
    Ok(if th > PI / 2.0 || th <= -PI / 2.0 { red.neg() } else { red })
}

fn cell_key(x: &Mat2, delta: f64) -> (i64, i64, i64) {
    let c = iwasawa_decompose(x);
    let q = |v: f64| (v / delta).floor() as i64;
    (q(c.t * (-c.y).exp()), q(c.y), q(c.theta))
}

/// Magnitudes `|G_β|` at a few points along a representative's segment.
#[derive(Debug, Clone)]
struct RepProfile {
    degree: usize,
    mags: Vec<(MultiIndex, f64)>,
}

impl RepProfile {
    fn new(form: &CuspFormSpec, rep: &Mat2, flow: Flow, length: f64, degree: usize) -> Result<Self> {
        let betas = MultiIndex::up_to(degree);
        let mut mags = vec![0.0f64; betas.len()];
        // Holomorphic forms: the coefficients come from one Jet1 of Φ.
        let holo = match form.kind {
            FormKind::Holomorphic => Some(holo_tables(form.weight, degree)),
            FormKind::MaassEven => None,
        };
        let layout = Jet3Layout::new(Jet3Shape::total_degree(degree));
        for frac in [0.0, 0.5, 1.0] {
            let u = frac * length;
            let g = match flow {
                Flow::N => *rep * n_mat(u),
                Flow::Omega { t_tilde, .. } => *rep * omega(u, t_tilde),
            };
            match &holo {
                Some((e, theta)) => {
                    let phi = crate::forms::lift_jet_n(form, &g, 0.0, degree, 0.1)?;
                    for (m, &b) in mags.iter_mut().zip(&betas) {
                        *m = m.max(holo_n_beta(&phi, e, theta, b, 0).c[0].norm());
                    }
                }
                None => {
                    let jet = lift_jet3_shaped(form, &g, &layout, 0.1)?;
                    for (m, &MultiIndex(i, j, k)) in mags.iter_mut().zip(&betas) {
                        *m = m.max(jet.get(i, j, k).norm());
                    }
                }
            }
        }
        Ok(Self { degree, mags: betas.into_iter().zip(mags).collect() })
    }

    /// Σ_{|β|=j} |G_β| ρ^β for j = 0..=degree.
    fn shells(&self, rho: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.degree + 1];
        for &(MultiIndex(i, j, k), m) in &self.mags {
            out[i + j + k] += m * rho[0].powi(i as i32) * rho[1].powi(j as i32) * rho[2].powi(k as i32);
        }
        out
    }

    /// Smallest `d ≤ d_max` whose neglected tail is ≤ `tol`, and that tail.
    fn order_for(&self, rho: [f64; 3], d_max: usize, tol: f64) -> Option<(usize, f64)> {
        let a = self.shells(rho);
        let top = self.degree;
        let q = if a[top - 1] > 0.0 { a[top] / a[top - 1] } else { 0.0 };
        if q >= 0.5 {
            return None;
        }
        let extrap = a[top] * q / (1.0 - q);
        (0..=d_max.min(top - 1)).find_map(|d| {
            let tail: f64 = a[d + 1..].iter().sum::<f64>() + extrap;
            (tail <= tol).then_some((d, tail))
        })
    }
}

/// Context for [`group_segments`].
pub struct GroupingCtx<'a> {
    pub form: &'a CuspFormSpec,
    pub flow: Flow,
    pub delta: f64,
    pub tol: f64,
    pub d_max: usize,
    pub fixed_d: Option<usize>,
    pub singletons: bool,
    /// Dissolve groups that do not pay for their table (see [`table_cost`]).
    pub cost_aware: bool,
    /// Quadrature order of a singleton (`⌈γ/ε⌉`).
    pub base_order: usize,
}

struct GroupBuild {
    group: SegmentGroup,
    profile: Option<RepProfile>,
}

/// Sup-norm of the NAK displacement coordinates over the segment.
fn displacement_radius(a: &Mat2, flow: Flow, length: f64) -> [f64; 3] {
    let mut rho = [0.0f64; 3];
    for i in 0..=16 {
        let s = length * i as f64 / 16.0;
        let b = match flow {
            Flow::N => n_mat(-s) * *a * n_mat(s),
            Flow::Omega { t_tilde, .. } => omega(s, t_tilde).inv() * *a * omega(s, t_tilde),
        };
        let c = iwasawa_decompose(&b);
        rho[0] = rho[0].max(c.t.abs());
        rho[1] = rho[1].max(c.y.abs());
        rho[2] = rho[2].max(c.theta.abs());
    }
    rho
}

fn try_admit(
    ctx: &GroupingCtx<'_>,
    build: &mut GroupBuild,
    x: &Mat2,
    segment: usize,
    length: f64,
) -> Result<Option<Member>> {
    let rep = build.group.rep;
    if (build.group.length - length).abs() > 1e-12 * length.max(1.0) {
        return Ok(None);
    }
    let a = rep.inv() * *x;
    if !in_neighborhood(&a, ctx.delta) {
        return Ok(None);
    }
    if build.profile.is_none() {
        build.profile = Some(RepProfile::new(ctx.form, &rep, ctx.flow, length, ctx.d_max + 2)?);
    }
    let profile = build.profile.as_ref().expect("profile set above");
    let rho = displacement_radius(&a, ctx.flow, length);
    let budget = ctx.tol / length.max(1.0);
    let (d, tail) = match ctx.fixed_d {
        Some(d) => {
            // A fixed order still needs a convergent expansion.
            if profile.order_for(rho, ctx.d_max, f64::INFINITY).is_none() {
                return Ok(None);
            }
            (d, profile.shells(rho)[d + 1..].iter().sum())
        }
        None => match profile.order_for(rho, ctx.d_max, budget) {
            Some(found) => found,
            None => return Ok(None),
        },
    };
    let full = coeff_table_from_h(&nak_jets(&displacement_jets(&a, ctx.flow, default_l(d))?)?, d);
    // The s-series of h^β must have converged on [0, length].
    let lmax = full.l;
    let top = (0..full.betas.len()).map(|b| full.get(b, lmax).norm()).fold(0.0, f64::max) * length.powi(lmax as i32);
    if top > budget * 1e-3 {
        return Ok(None);
    }
    let l = full.effective_l(length, budget * 1e-4);
    Ok(Some(Member { segment, offset: a, table: full.truncated(l), tail: tail * length }))
}

/// Reduces all base points and groups them around representatives.
///
/// Segment `i` of `segments` is referenced by position in the returned members.
pub fn group_segments(segments: &[Segment], ctx: &GroupingCtx<'_>) -> Result<Vec<SegmentGroup>> {
    let mut builds: Vec<GroupBuild> = Vec::new();
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (pos, seg) in segments.iter().enumerate() {
        let x = normalize_point(&seg.base)?;
        let key = cell_key(&x, ctx.delta.max(1e-300));
        let mut joined = false;
        if !ctx.singletons {
            'probe: for dk0 in -1..=1 {
                for dk1 in -1..=1 {
                    for dk2 in -1..=1 {
                        let nb = (key.0 + dk0, key.1 + dk1, key.2 + dk2);
                        let Some(ids) = buckets.get(&nb) else { continue };
                        for &gid in ids {
                            if let Some(member) = try_admit(ctx, &mut builds[gid], &x, pos, seg.length)? {
                                let g = &mut builds[gid].group;
                                g.d = g.d.max(member.table.d);
                                g.l = g.l.max(member.table.l);
                                g.members.push(member);
                                joined = true;
                                break 'probe;
                            }
                        }
                    }
                }
            }
        }
        if !joined {
            let identity = CoeffTable { d: 0, l: 0, betas: vec![MultiIndex(0, 0, 0)], entries: vec![ONE] };
            let member = Member { segment: pos, offset: Mat2::IDENTITY, table: identity, tail: 0.0 };
            buckets.entry(key).or_default().push(builds.len());
            builds.push(GroupBuild {
                group: SegmentGroup { rep: x, members: vec![member], d: 0, l: 0, length: seg.length },
                profile: None,
            });
        }
    }
    let mut out = Vec::with_capacity(builds.len());
    for b in builds {
        let g = b.group;
        let keep = !ctx.cost_aware
            || g.members.len() <= 1
            || table_cost(ctx.form, ctx.flow, g.d, g.l, ctx.base_order)
                <= g.members.len() as f64 * table_cost(ctx.form, ctx.flow, 0, 0, ctx.base_order);
        if keep {
            out.push(g);
            continue;
        }
        for m in g.members {
            let seg = &segments[m.segment];
            let identity = CoeffTable { d: 0, l: 0, betas: vec![MultiIndex(0, 0, 0)], entries: vec![ONE] };
            out.push(SegmentGroup {
                rep: normalize_point(&seg.base)?,
                members: vec![Member { segment: m.segment, offset: Mat2::IDENTITY, table: identity, tail: 0.0 }],
                d: 0,
                l: 0,
                length: seg.length,
            });
        }
    }
    Ok(out)
}

/// Rough per-grid-point work of an integral table, in complex multiply-adds.
/// Only ratios matter; the lift is counted as ~20 Jet1 products.
pub fn table_cost(form: &CuspFormSpec, flow: Flow, d: usize, l: usize, base_order: usize) -> f64 {
    let n = (base_order + l) as f64;
    let (d_f, l1) = (d as f64, (l + 1) as f64);
    let betas = MultiIndex::up_to(d).len() as f64;
    let lift = match (form.kind, d) {
        (_, 0) | (FormKind::Holomorphic, _) => 20.0 * (n + d_f).powi(2),
        // Shaped Jet3 (θ-degree 0): monomials × average sub-box.
        (FormKind::MaassEven, _) => 20.0 * ((n + d_f) * (d_f + 1.0)).powi(2) / 4.0,
    };
    let omega_extra = match flow {
        Flow::Omega { .. } if d > 0 => betas * (form.weight as f64 / 2.0 + d_f) * n,
        _ => 0.0,
    };
    lift + l1 * n * n + 2.0 * betas * l1 * n + omega_extra
}

// ---------------------------------------------------------------------------
// Integral tables

/// `I[β][l] = ∫₀^M s^l G_β(s) W(s) ds` for the representative.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralTable {
    pub d: usize,
    pub l: usize,
    pub betas: Vec<MultiIndex>,
    pub entries: Vec<C64>,
    pub err: f64,
    pub jet_evals: u64,
}

impl IntegralTable {
    pub fn get(&self, beta_idx: usize, l: usize) -> C64 {
        self.entries[beta_idx * (self.l + 1) + l]
    }
}

/// Quadrature setup shared by the table builders.
#[derive(Debug, Clone, Copy)]
struct QuadCtx {
    t_ctx: f64,
    gamma: f64,
    eps: f64,
    r: f64,
}

impl QuadCtx {
    fn new(form: &CuspFormSpec, params: &PipelineParams, t_ctx: f64, weight_scale: f64) -> Self {
        Self { t_ctx: t_ctx.max(1.0), gamma: params.gamma, eps: params.eps, r: form.deriv_bound + weight_scale }
    }

    /// Spacing `min(1, T^{−ε}/R)`; order `⌈γ/ε⌉ + l` (a degree-`l` factor
    /// shifts the truncation index by exactly `l`).
    fn grid(&self, length: f64, l: usize) -> Grid {
        let spec = QuadratureSpec { length, gamma: self.gamma, eps: self.eps, t_ctx: self.t_ctx };
        let mut g = Grid::new(&spec, Growth::new(self.r, 0.0));
        g.order += l;
        g
    }
}

fn flow_scale(flow: Flow) -> f64 {
    match flow {
        Flow::N => TWO_PI,
        Flow::Omega { t_tilde, p } => p.norm() / t_tilde,
    }
}

/// Weight `W(u+σ)` as a jet in σ.
fn weight_jet(flow: Flow, u: f64, n: usize) -> Result<Jet1> {
    match flow {
        Flow::N => Ok(Jet1::variable(C64::new(u, 0.0), n).scale(C64::new(0.0, -TWO_PI)).exp()),
        Flow::Omega { t_tilde, p } => {
            let mut base = Jet1::constant(C64::new(1.0 + u / t_tilde, 0.0), n);
            if n >= 1 {
                base.c[1] = C64::new(1.0 / t_tilde, 0.0);
            }
            base.pow(p)
        }
    }
}

/// `W(u+σ)·(u+σ)^l` for `l = 0..=lmax`.
fn weighted_powers(flow: Flow, u: f64, n: usize, lmax: usize) -> Result<Vec<Jet1>> {
    let w = weight_jet(flow, u, n)?;
    let var = Jet1::variable(C64::new(u, 0.0), n);
    let mut out = vec![w];
    for l in 1..=lmax {
        let next = out[l - 1].mul_trunc(&var);
        out.push(next);
    }
    Ok(out)
}

fn flow_point(v: &Mat2, flow: Flow, u: f64) -> Mat2 {
    match flow {
        Flow::N => *v * n_mat(u),
        Flow::Omega { t_tilde, .. } => *v * omega(u, t_tilde),
    }
}

/// Jet1 of `σ ↦ f̃(v·flow(u+σ))` (reducing the base point).
fn flow_jet(form: &CuspFormSpec, v: &Mat2, flow: Flow, u: f64, n: usize, radius: f64) -> Result<Jet1> {
    match flow {
        Flow::N => crate::forms::lift_jet_n(form, v, u, n, radius),
        Flow::Omega { t_tilde, .. } => crate::forms::lift_jet_omega(form, v, u, t_tilde, n, radius),
    }
}

/// Number of `y`-powers kept along the ω-flow: `(R h/T̃)^{m+1} ≤ 1e−17`.
fn omega_y_degree(r: f64, h: f64, t_tilde: f64, n: usize) -> usize {
    let q = (r * h / t_tilde).min(0.5);
    if q <= 0.0 {
        return 0;
    }
    let m = (-17.0 * 10f64.ln() / q.ln()).ceil() as usize;
    m.saturating_sub(1).min(n)
}

/// Margin added to the lift truncation radius for member displacements.
const MEMBER_RADIUS: f64 = 0.1;

/// How the β-jets `G_β(u+σ)` are produced at each grid point.
enum GSource {
    /// `d = 0`: one flow jet.
    Single,
    /// Holomorphic forms: `f̃(x n(t)a(y)K(θ)) = e^{ikθ} e^{ky/2} Φ(t + iε(y))`
    /// with `Φ(ζ) = f̃(x n(ζ))` holomorphic and `ε(y) = e^y − 1`, so one
    /// Jet1 of `Φ` of order `N + d` yields every `G_β`.
    /// `e[r][j] = [y^j] e^{ky/2}(iε(y))^r`, `theta[b] = (ik)^b/b!`.
    Holo { e: Vec<Vec<C64>>, theta: Vec<C64> },
    /// Maass forms (weight 0, so no θ-dependence): a shaped Jet3 lift.
    Maass { layout: Arc<Jet3Layout>, ydeg: usize },
}

impl GSource {
    fn new(form: &CuspFormSpec, flow: Flow, d: usize, grid: &Grid, q: &QuadCtx) -> Result<Self> {
        if d == 0 {
            return Ok(GSource::Single);
        }
        match form.kind {
            FormKind::Holomorphic => {
                let (e, theta) = holo_tables(form.weight, d);
                Ok(GSource::Holo { e, theta })
            }
            FormKind::MaassEven => {
                let ydeg = match flow {
                    Flow::N => 0,
                    Flow::Omega { t_tilde, .. } => omega_y_degree(q.r, grid.h, t_tilde, grid.order),
                };
                let shape = Jet3Shape { total: grid.order + d, rest: d + ydeg, theta: 0 };
                Ok(GSource::Maass { layout: Jet3Layout::new(shape), ydeg })
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn jets(
        &self,
        form: &CuspFormSpec,
        v: &Mat2,
        flow: Flow,
        betas: &[MultiIndex],
        u: f64,
        n: usize,
        h: f64,
    ) -> Result<Vec<Jet1>> {
        match self {
            GSource::Single => Ok(vec![flow_jet(form, v, flow, u, n, h)?]),
            GSource::Holo { e, theta } => {
                let d = e.len() - 1;
                let radius = h + MEMBER_RADIUS;
                match flow {
                    Flow::N => {
                        let phi = crate::forms::lift_jet_n(form, v, u, n + d, radius)?;
                        Ok(betas.iter().map(|&b| holo_n_beta(&phi, e, theta, b, n)).collect())
                    }
                    Flow::Omega { t_tilde, .. } => {
                        let phi = crate::forms::lift_jet_n(form, &(*v * omega(u, t_tilde)), 0.0, n + d, radius)?;
                        let k2 = form.weight as usize / 2;
                        Ok(holo_omega_betas(&phi, e, theta, betas, u, t_tilde, k2, n))
                    }
                }
            }
            GSource::Maass { layout, ydeg } => {
                let g: Jet3 = lift_jet3_shaped(form, &flow_point(v, flow, u), layout, h + MEMBER_RADIUS)?;
                betas
                    .iter()
                    .map(|&b| {
                        if b.2 > 0 {
                            return Ok(Jet1::zeros(n));
                        }
                        match flow {
                            Flow::N => Ok(n_flow_from_jet3(&g, b, n)),
                            Flow::Omega { t_tilde, .. } => omega_flow_from_jet3(&g, b, u, t_tilde, n, *ydeg),
                        }
                    })
                    .collect()
            }
        }
    }
}


/// `e[r][j] = [y^j] e^{ky/2}(i(e^y − 1))^r` and `θ_b = (ik)^b/b!` for `r, j, b ≤ d`.
fn holo_tables(weight: u32, d: usize) -> (Vec<Vec<C64>>, Vec<C64>) {
    let k = weight as f64;
    let ey = Jet1::variable(ZERO, d).exp();
    let envelope = Jet1::variable(ZERO, d).scale(C64::new(k / 2.0, 0.0)).exp();
    let mut ieps = ey.clone();
    ieps.c[0] = ZERO;
    let ieps = ieps.scale(C64::new(0.0, 1.0));
    let mut e = Vec::with_capacity(d + 1);
    let mut pw = envelope;
    for _ in 0..=d {
        e.push(pw.c.clone());
        pw = pw.mul_trunc(&ieps);
    }
    let mut theta = vec![ONE];
    for b in 1..=d {
        let prev = theta[b - 1];
        theta.push(prev * C64::new(0.0, k) / b as f64);
    }
    (e, theta)
}

/// `G_β` along the N-flow from `Φ`: the `σ^m` coefficient is
/// `θ_{β3} Σ_{r ≤ β2} e[r][β2]·C(m+r, r)·C(m+r+β1, β1)·Φ_{m+r+β1}`.
fn holo_n_beta(phi: &Jet1, e: &[Vec<C64>], theta: &[C64], b: MultiIndex, n: usize) -> Jet1 {
    let MultiIndex(b1, b2, b3) = b;
    let mut out = Jet1::zeros(n);
    for r in 0..=b2 {
        let er = e[r][b2];
        if er == ZERO {
            continue;
        }
        for m in 0..=n {
            out.c[m] += er * (binom(m + r, r) * binom(m + r + b1, b1)) * phi.c[m + r + b1];
        }
    }
    out.scale(theta[b3])
}

/// `G_β` along the ω-flow. With `ω(u+σ) = ω(u) n(τσ) a(log λ(σ))`,
/// `λ(σ) = 1 + σ/(T̃+u)`, `τ = −1/(1+u/T̃)`, one gets
/// `G_β(σ) = θ_{β3} Σ_{r ≤ β2} e[r][β2] λ^{k/2+β1+r} Ψ_{β1,r}(κσ)` with
/// `κ = τ + i/(T̃+u)` and `Ψ_{b,r,m} = C(m+r,r)C(m+r+b,b)Φ_{m+r+b}`.
#[allow(clippy::too_many_arguments)]
fn holo_omega_betas(
    phi: &Jet1,
    e: &[Vec<C64>],
    theta: &[C64],
    betas: &[MultiIndex],
    u: f64,
    t_tilde: f64,
    k2: usize,
    n: usize,
) -> Vec<Jet1> {
    let d = e.len() - 1;
    let inv = 1.0 / (t_tilde + u);
    let kappa = C64::new(-1.0 / (1.0 + u / t_tilde), inv);
    let mut kpow = vec![ONE; n + 1];
    for m in 1..=n {
        kpow[m] = kpow[m - 1] * kappa;
    }
    // λ^p for p = k/2 ..= k/2 + d.
    let lam: Vec<Jet1> = (0..=d)
        .map(|j| {
            let p = k2 + j;
            let mut jet = Jet1::zeros(n);
            let mut c = 1.0;
            for i in 0..=n.min(p) {
                jet.c[i] = C64::new(c, 0.0);
                c *= (p - i) as f64 / (i + 1) as f64 * inv;
            }
            jet
        })
        .collect();
    let mut cache: HashMap<(usize, usize), Jet1> = HashMap::new();
    betas
        .iter()
        .map(|&MultiIndex(b1, b2, b3)| {
            let base = cache.entry((b1, b2)).or_insert_with(|| {
                let mut out = Jet1::zeros(n);
                let mut psi = vec![ZERO; n + 1];
                for r in 0..=b2 {
                    let er = e[r][b2];
                    if er == ZERO {
                        continue;
                    }
                    for m in 0..=n {
                        psi[m] = kpow[m] * (binom(m + r, r) * binom(m + r + b1, b1)) * phi.c[m + r + b1];
                    }
                    // λ^p is a polynomial of degree p, so the product is sparse.
                    let lp = &lam[b1 + r];
                    let deg = (k2 + b1 + r).min(n);
                    for (i, &li) in lp.c[..=deg].iter().enumerate() {
                        let f = er * li;
                        for m in 0..=n - i {
                            out.c[m + i] += f * psi[m];
                        }
                    }
                }
                out
            });
            base.scale(theta[b3])
        })
        .collect()
}

fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

fn batch_table(
    form: &CuspFormSpec,
    v: &Mat2,
    flow: Flow,
    d: usize,
    l: usize,
    length: f64,
    q: &QuadCtx,
) -> Result<IntegralTable> {
    let grid = q.grid(length, l);
    let betas = MultiIndex::up_to(d);
    let count = betas.len() * (l + 1);
    let n = grid.order;
    let source = GSource::new(form, flow, d, &grid, q)?;
    let mut sums = vec![CompensatedSum::new(); count];
    let mut errs = vec![0.0f64; count];
    // Moments Q[l][a] = ∫₀^w P_l(σ) σ^a dσ keeping total degree ≤ n, and the
    // part of it with total degree > n − 2 (for the error estimate).
    let mut mom = vec![vec![ZERO; n + 1]; l + 1];
    let mut mom_hi = vec![vec![ZERO; n + 1]; l + 1];
    let mut evals = 0u64;
    for (u, w) in grid.cells() {
        evals += 1;
        let powers = weighted_powers(flow, u, n, l)?;
        let gs = source.jets(form, v, flow, &betas, u, n, grid.h)?;
        let mut wpow = vec![1.0f64; n + 2];
        for i in 1..n + 2 {
            wpow[i] = wpow[i - 1] * w;
        }
        for (pl, p) in powers.iter().enumerate() {
            for a in 0..=n {
                let mut full = ZERO;
                let mut hi = ZERO;
                for b in 0..=n - a {
                    let t = p.c[b] * (wpow[a + b + 1] / (a + b + 1) as f64);
                    full += t;
                    if a + b + 2 > n {
                        hi += t;
                    }
                }
                mom[pl][a] = full;
                mom_hi[pl][a] = hi;
            }
        }
        for (bi, g) in gs.iter().enumerate() {
            for pl in 0..=l {
                let mut full = ZERO;
                let mut hi = ZERO;
                let mut mag = 0.0;
                for a in 0..=n {
                    let term = g.c[a] * mom[pl][a];
                    full += term;
                    mag += term.norm();
                    hi += g.c[a] * mom_hi[pl][a];
                }
                let idx = bi * (l + 1) + pl;
                sums[idx].add(full);
                // Truncation tail, rounding in the Taylor sum, and the lift's
                // own absolute accuracy.
                errs[idx] += hi.norm() + f64::EPSILON * mag + form.accuracy * w * powers[pl].c[0].norm();
            }
        }
    }
    let err = errs.iter().copied().fold(0.0, f64::max);
    Ok(IntegralTable { d, l, betas, entries: sums.into_iter().map(|s| s.value()).collect(), err, jet_evals: evals })
}

/// Integral table along the N-flow with weight `e(−t)`.
pub fn batch_i(form: &CuspFormSpec, v: &Mat2, d: usize, l: usize, m: f64, t: f64, params: &PipelineParams) -> Result<IntegralTable> {
    let q = QuadCtx::new(form, params, t, TWO_PI);
    batch_table(form, v, Flow::N, d, l, m, &q)
}

/// Integral table along the ω-flow with weight `(1+u/T̃)^{ν−k/2−1}`.
pub fn batch_l(
    form: &CuspFormSpec,
    v: &Mat2,
    d: usize,
    l: usize,
    m: f64,
    contour: &ContourSpec,
    params: &PipelineParams,
) -> Result<IntegralTable> {
    let flow = lvalue_flow(form, contour);
    let q = QuadCtx::new(form, params, contour.t, flow_scale(flow));
    batch_table(form, v, flow, d, l, m, &q)
}

/// `max_j |prefactor·a_j|`: how segment errors scale into the L-value.
fn lvalue_out_scale(contour: &ContourSpec, segments: &[Segment]) -> f64 {
    let top = segments.iter().map(|s| s.weight.logmag).fold(f64::NEG_INFINITY, f64::max);
    (top + contour.prefactor.logmag).exp()
}

fn lvalue_flow(form: &CuspFormSpec, contour: &ContourSpec) -> Flow {
    Flow::Omega { t_tilde: contour.t_tilde, p: contour.nu - form.weight as f64 / 2.0 - 1.0 }
}

/// `Σ_{β,l} c_{β,l} I[β][l]` for one member.
pub fn member_value(table: &CoeffTable, integrals: &IntegralTable) -> C64 {
    let mut acc = CompensatedSum::new();
    for b in 0..table.betas.len() {
        for l in 0..=table.l {
            acc.add(table.get(b, l) * integrals.get(b, l));
        }
    }
    acc.value()
}

// ---------------------------------------------------------------------------
// Pipelines

fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct GroupedRun {
    /// Per input segment: (value, error estimate).
    values: Vec<(C64, f64)>,
    stats: RunStats,
}

/// `out_scale` bounds the factor that maps a normalized segment integral
/// into the final value; the tail tolerance is divided by it.
fn grouping_ctx<'a>(
    form: &'a CuspFormSpec,
    flow: Flow,
    scale_t: f64,
    out_scale: f64,
    params: &PipelineParams,
) -> GroupingCtx<'a> {
    let singletons = params.grouping == Grouping::Singletons;
    GroupingCtx {
        form,
        flow,
        delta: if singletons { 0.0 } else { scale_t.powf(-(2.0 * params.eta + params.eps)) },
        tol: params.tol(scale_t) / out_scale.max(1.0),
        d_max: params.d.unwrap_or(D_MAX),
        fixed_d: params.d,
        singletons,
        cost_aware: params.grouping == Grouping::Auto,
        base_order: (params.gamma / params.eps).ceil() as usize,
    }
}

/// Groups the segments (partial-length segments are never grouped) and
/// evaluates every group.
fn run_grouped(
    form: &CuspFormSpec,
    segments: &[Segment],
    flow: Flow,
    scale_t: f64,
    out_scale: f64,
    q: &QuadCtx,
    params: &PipelineParams,
) -> Result<GroupedRun> {
    let ctx = grouping_ctx(form, flow, scale_t, out_scale, params);
    let groups = group_segments(segments, &ctx)?;
    let mut stats = RunStats { groups: groups.len(), segments: segments.len(), ..Default::default() };
    stats.max_d = groups.iter().map(|g| g.d).max().unwrap_or(0);
    let evaluated: Vec<Result<(IntegralTable, Vec<(usize, C64, f64)>)>> = with_pool(params.threads, || {
        groups
            .par_iter()
            .map(|g| {
                let table = batch_table(form, &g.rep, flow, g.d, g.l, g.length, q)?;
                let vals = g
                    .members
                    .iter()
                    .map(|m| (m.segment, member_value(&m.table, &table), table.err + m.tail))
                    .collect();
                Ok((table, vals))
            })
            .collect()
    })?;
    let mut values = vec![(ZERO, 0.0); segments.len()];
    for r in evaluated {
        let (table, vals) = r?;
        stats.jet_evals += table.jet_evals;
        for (pos, v, e) in vals {
            values[pos] = (v, e);
        }
    }
    Ok(GroupedRun { values, stats })
}

fn fourier_scale(form: &CuspFormSpec, t: f64) -> Result<C64> {
    let base = t.powf(form.weight as f64 / 2.0 - 1.0);
    match form.kind {
        FormKind::Holomorphic => Ok(C64::new(base * TWO_PI.exp(), 0.0)),
        FormKind::MaassEven => {
            let r = form.r.ok_or_else(|| Error::InvalidParams("Maass form without r".into()))?;
            Ok(C64::new(base, 0.0) / bessel_k(r, TWO_PI)?)
        }
    }
}

fn check_fourier_t(t: u64) -> Result<()> {
    if t < 1 {
        return Err(Error::InvalidParams("T must be a positive integer".into()));
    }
    Ok(())
}

/// Normalized integral `∫₀^T f̃(x0 n(t)) e(−t) dt` with fast grouping; the
/// second value is the error estimate.
pub fn fourier_integral_fast(form: &CuspFormSpec, t: u64, params: &PipelineParams) -> Result<(C64, f64, RunStats)> {
    params.validate()?;
    check_fourier_t(t)?;
    let tf = t as f64;
    let plan = plan_fourier_segments(t, params.eta)?;
    let q = QuadCtx::new(form, params, tf, TWO_PI);
    let run = run_grouped(form, &plan.segments, Flow::N, tf, 1.0, &q, params)?;
    let mut stats = run.stats;
    let mut acc = CompensatedSum::new();
    let mut err = 0.0;
    for (v, e) in &run.values {
        acc.add(*v);
        err += e;
    }
    let (start, len) = plan.remainder;
    if len > 0.0 {
        let rem = batch_table(form, &(plan.x0 * n_mat(start)), Flow::N, 0, 0, len, &q)?;
        stats.jet_evals += rem.jet_evals;
        acc.add(rem.entries[0]);
        err += rem.err;
    }
    Ok((acc.value(), err, stats))
}

/// `f̂(T)` via the grouped pipeline.
pub fn fourier_fast(form: &CuspFormSpec, t: u64, params: &PipelineParams) -> Result<EngineOutput> {
    let (j, err, stats) = fourier_integral_fast(form, t, params)?;
    let s = fourier_scale(form, t as f64)?;
    Ok(EngineOutput { value: j * s, err_est: err * s.norm(), log_value: None, stats })
}

/// Normalized integral over `[0, T]` in one Taylor-grid pass.
pub fn fourier_integral_direct(form: &CuspFormSpec, t: u64, params: &PipelineParams) -> Result<(C64, f64, RunStats)> {
    params.validate()?;
    check_fourier_t(t)?;
    let tf = t as f64;
    let q = QuadCtx::new(form, params, tf, TWO_PI);
    let table = batch_table(form, &a_mat(-tf.ln()), Flow::N, 0, 0, tf, &q)?;
    let stats = RunStats { jet_evals: table.jet_evals, groups: 0, segments: 1, max_d: 0 };
    Ok((table.entries[0], table.err, stats))
}

/// `f̂(T)` by direct integration (the O(T) oracle).
pub fn fourier_direct(form: &CuspFormSpec, t: u64, params: &PipelineParams) -> Result<EngineOutput> {
    let (j, err, stats) = fourier_integral_direct(form, t, params)?;
    let s = fourier_scale(form, t as f64)?;
    Ok(EngineOutput { value: j * s, err_est: err * s.norm(), log_value: None, stats })
}

fn finish_lvalue(
    contour: &ContourSpec,
    integral: C64,
    err: f64,
    stats: RunStats,
    params: &PipelineParams,
) -> Result<EngineOutput> {
    match params.precision {
        Precision::Double => {
            let (value, e) = assemble_l(contour, integral, err)?;
            Ok(EngineOutput { value, err_est: e, log_value: None, stats })
        }
        Precision::Extended => {
            let (log, e) = assemble_l_log(contour, integral, err)?;
            Ok(EngineOutput { value: log.to_complex(), err_est: e, log_value: Some(log), stats })
        }
    }
}

/// Contour integral `∫_{t0}^{t1} f(α̃t) t^{ν−1} dt` via the grouped ladder.
pub fn lvalue_integral_fast(form: &CuspFormSpec, contour: &ContourSpec, params: &PipelineParams) -> Result<(C64, f64, RunStats)> {
    params.validate()?;
    let plan = plan_lvalue_segments(contour, form.weight, params.eta)?;
    let flow = lvalue_flow(form, contour);
    let q = QuadCtx::new(form, params, contour.t, flow_scale(flow));
    let run = run_grouped(form, &plan.segments, flow, contour.t_tilde, lvalue_out_scale(contour, &plan.segments), &q, params)?;
    let mut acc = CompensatedSum::new();
    let mut err = 0.0;
    for (seg, (v, e)) in plan.segments.iter().zip(&run.values) {
        let w = seg.weight.to_complex();
        acc.add(*v * w);
        err += e * w.norm();
    }
    Ok((acc.value(), err, run.stats))
}

/// `L(f, 1/2 + iT)` via the grouped pipeline.
pub fn lvalue_fast(form: &CuspFormSpec, t: f64, params: &PipelineParams) -> Result<EngineOutput> {
    params.validate()?;
    let contour = contour_for(form, t, params.gamma)?;
    let (integral, err, stats) = lvalue_integral_fast(form, &contour, params)?;
    finish_lvalue(&contour, integral, err, stats, params)
}

/// Contour integral by a single pass over `t = t0 e^{w/T̃}`, `w ∈ [0, T̃ log(t1/t0)]`.
pub fn lvalue_integral_direct(form: &CuspFormSpec, contour: &ContourSpec, params: &PipelineParams) -> Result<(C64, f64, RunStats)> {
    params.validate()?;
    let tt = contour.t_tilde;
    let (t0, t1) = (contour.window.t0, contour.window.t1);
    let half_k = form.weight as f64 / 2.0;
    let expo = contour.nu - half_k;
    let q = QuadCtx::new(form, params, contour.t, expo.norm() / tt);
    let grid = q.grid(tt * (t1 / t0).ln(), 0);
    let mut evals = 0u64;
    let mut results = crate::quadrature::integrate_on_grid(&grid, 1, |w, n| {
        evals += 1;
        let base = kappa(t0 * (w / tt).exp(), tt);
        let red = reduce_to_fundamental_domain(&base)?.reduced;
        // κ(b e^{σ/T̃}) = κ(b) n(−T̃(e^{σ/T̃}−1)) a(σ/T̃)
        let y = Jet1::variable(ZERO, n).scale(C64::new(1.0 / tt, 0.0));
        let ey = y.exp();
        let wj = &ey.add_const(-ONE).scale(C64::new(-tt, 0.0)) + &ey.scale(C64::new(0.0, 1.0));
        let f = lift_series(form, &red, LiftArgs { w: &wj, y: Some(&y), theta: None, radius: grid.h })?;
        let phase = Jet1::variable(C64::new(w, 0.0), n).scale(expo / tt).exp();
        Ok(vec![f.mul_trunc(&phase)])
    })?;
    let (v, e) = results.pop().expect("one integrand");
    let c0 = LogComplex::exp((half_k - 1.0) * tt.ln() + expo * t0.ln()).to_complex();
    let stats = RunStats { jet_evals: evals, groups: 0, segments: 1, max_d: 0 };
    Ok((v * c0, e * c0.norm(), stats))
}

/// `L(f, 1/2 + iT)` by direct integration (the O(T) oracle).
pub fn lvalue_direct(form: &CuspFormSpec, t: f64, params: &PipelineParams) -> Result<EngineOutput> {
    params.validate()?;
    let contour = contour_for(form, t, params.gamma)?;
    let (integral, err, stats) = lvalue_integral_direct(form, &contour, params)?;
    finish_lvalue(&contour, integral, err, stats, params)
}

// ---------------------------------------------------------------------------
// Count-only planning

/// Jet-evaluation and group counts of [`fourier_fast`] without evaluating.
pub fn fourier_fast_counts(form: &CuspFormSpec, t: u64, params: &PipelineParams) -> Result<RunStats> {
    params.validate()?;
    check_fourier_t(t)?;
    let tf = t as f64;
    let plan = plan_fourier_segments(t, params.eta)?;
    let q = QuadCtx::new(form, params, tf, TWO_PI);
    let groups = group_segments(&plan.segments, &grouping_ctx(form, Flow::N, tf, 1.0, params))?;
    let mut stats = RunStats { groups: groups.len(), segments: plan.segments.len(), ..Default::default() };
    for g in &groups {
        stats.jet_evals += q.grid(g.length, g.l).cell_count() as u64;
        stats.max_d = stats.max_d.max(g.d);
    }
    if plan.remainder.1 > 0.0 {
        stats.jet_evals += q.grid(plan.remainder.1, 0).cell_count() as u64;
    }
    Ok(stats)
}

/// Jet-evaluation count of [`fourier_direct`].
pub fn fourier_direct_counts(form: &CuspFormSpec, t: u64, params: &PipelineParams) -> Result<RunStats> {
    params.validate()?;
    check_fourier_t(t)?;
    let q = QuadCtx::new(form, params, t as f64, TWO_PI);
    Ok(RunStats { jet_evals: q.grid(t as f64, 0).cell_count() as u64, groups: 0, segments: 1, max_d: 0 })
}

/// Counts of [`lvalue_fast`] without evaluating.
pub fn lvalue_fast_counts(form: &CuspFormSpec, t: f64, params: &PipelineParams) -> Result<RunStats> {
    params.validate()?;
    let contour = contour_for(form, t, params.gamma)?;
    let plan = plan_lvalue_segments(&contour, form.weight, params.eta)?;
    let flow = lvalue_flow(form, &contour);
    let q = QuadCtx::new(form, params, contour.t, flow_scale(flow));
    let groups = group_segments(&plan.segments, &grouping_ctx(form, flow, contour.t_tilde, lvalue_out_scale(&contour, &plan.segments), params))?;
    let mut stats = RunStats { groups: groups.len(), segments: plan.segments.len(), ..Default::default() };
    for g in &groups {
        stats.jet_evals += q.grid(g.length, g.l).cell_count() as u64;
        stats.max_d = stats.max_d.max(g.d);
    }
    Ok(stats)
}

/// Counts of [`lvalue_direct`].
pub fn lvalue_direct_counts(form: &CuspFormSpec, t: f64, params: &PipelineParams) -> Result<RunStats> {
    params.validate()?;
    let contour = contour_for(form, t, params.gamma)?;
    let tt = contour.t_tilde;
    let expo = contour.nu - form.weight as f64 / 2.0;
    let q = QuadCtx::new(form, params, contour.t, expo.norm() / tt);
    let len = tt * (contour.window.t1 / contour.window.t0).ln();
    Ok(RunStats { jet_evals: q.grid(len, 0).cell_count() as u64, groups: 0, segments: 1, max_d: 0 })
}
