//! Built-in invariant suites. The report contains no timings, so two runs
//! produce byte-identical output.

use crate::{io_failure, Failure};
use lfun_core::engine::{self, PipelineParams};
use lfun_core::forms::{lift_jet_n, lift_value, lift_value_unreduced, load_form, CuspFormSpec, FormKind};
use lfun_core::geomfe::truncation_window;
use lfun_core::geometry::{a_mat, n_mat, reduce_to_fundamental_domain, Mat2};
use lfun_core::jets::{Jet1, Series};
use lfun_core::quadrature::{taylor_grid_integrate, Growth, QuadratureSpec};
use lfun_core::specfun::{bessel_k, hyp2f1, log_gamma_c, SpectralParam};
use num_complex::Complex64 as C64;
use std::fmt::Write as _;
use std::path::Path;

struct Check {
    suite: &'static str,
    name: String,
    ok: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn add(&mut self, suite: &'static str, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push(Check { suite, name: name.into(), ok, detail: detail.into() });
    }

    /// Records `err ≤ tol`; errors from the library count as failures.
    fn close(&mut self, suite: &'static str, name: &str, err: lfun_core::Result<f64>, tol: f64) {
        match err {
            Ok(e) => self.add(suite, name, e <= tol, format!("err {e:.3e} (tol {tol:.0e})")),
            Err(x) => self.add(suite, name, false, format!("error: {x}")),
        }
    }

    fn render(&self) -> String {
        let mut s = String::from("lfun selftest\n");
        for c in &self.checks {
            let tag = if c.ok { "PASS" } else { "FAIL" };
            writeln!(s, "[{tag}] {}: {} — {}", c.suite, c.name, c.detail).expect("writing to a String");
        }
        let failed = self.checks.iter().filter(|c| !c.ok).count();
        writeln!(s, "summary: {} passed, {failed} failed", self.checks.len() - failed).expect("writing to a String");
        s
    }
}

/// Deterministic sample points (R2 low-discrepancy sequence).
fn r2(i: usize) -> (f64, f64) {
    const G: f64 = 1.324_717_957_244_746;
    ((0.5 + i as f64 / G).fract(), (0.5 + i as f64 / (G * G)).fract())
}

fn geometry_suite(r: &mut Report) {
    let mut worst = 0.0f64;
    let mut ok = true;
    for i in 0..24 {
        let (u, v) = r2(i);
        let m = n_mat(6.0 * u - 3.0) * a_mat(-4.0 * v) * Mat2::new(1.0, 0.0, 2.0 * u - 1.0, 1.0);
        match reduce_to_fundamental_domain(&m) {
            Ok(red) => {
                let z = red.reduced.act_i();
                let g = red.gamma;
                let integral = [g.a, g.b, g.c, g.d].iter().all(|e| (e - e.round()).abs() < 1e-9);
                ok &= z.re.abs() <= 0.5 + 1e-9 && z.norm() >= 1.0 - 1e-9 && integral;
                worst = worst.max((g * m).max_entry_diff(&red.reduced) / m.max_abs().max(1.0));
            }
            Err(_) => ok = false,
        }
    }
    r.add("geometry", "reduction lands in the fundamental domain", ok && worst < 1e-9, format!("24 points, max |γm − reduced| {worst:.1e}"));
}

fn jets_suite(r: &mut Report) {
    let x = Jet1::variable(C64::new(0.3, 0.1), 20);
    let roundtrip = x.add_const(C64::new(1.0, 0.0)).ln().map(|l| l.exp().sub_series(&x.add_const(C64::new(1.0, 0.0))).max_norm());
    r.close("jets", "exp(log(1 + x)) = 1 + x", roundtrip, 1e-13);
    let (s, c) = x.sin_cos();
    let one = s.mul_trunc(&s).add_series(&c.mul_trunc(&c)).add_const(C64::new(-1.0, 0.0)).max_norm();
    r.close("jets", "sin² + cos² = 1", Ok(one), 1e-13);
}

fn specfun_suite(r: &mut Report) {
    let half = log_gamma_c(C64::new(0.5, 0.0)).map(|g| (g - C64::new(0.5 * std::f64::consts::PI.ln(), 0.0)).norm());
    r.close("specfun", "log Γ(1/2) = log √π", half, 1e-13);
    let z = C64::new(2.3, 4.1);
    let rec = log_gamma_c(z + 1.0).and_then(|a| log_gamma_c(z).map(|b| (a - b - z.ln()).norm()));
    r.close("specfun", "Γ(z+1) = zΓ(z)", rec, 1e-12);
    let k0 = SpectralParam::real(0.0).and_then(|p| bessel_k(p, 1.0)).map(|k| (k.re - 0.421_024_438_240_708_3).abs());
    r.close("specfun", "K_0(1)", k0, 1e-13);
    let one = C64::new(1.0, 0.0);
    let f = hyp2f1(one, one, C64::new(2.0, 0.0), C64::new(0.3, 0.0)).map(|v| (v.re + (0.7f64).ln() / 0.3).abs());
    r.close("specfun", "2F1(1,1;2;z) = −log(1−z)/z", f, 1e-13);
}

fn quadrature_suite(r: &mut Report) {
    let cases: [(&str, f64, f64, fn(&Jet1) -> Jet1); 3] = [
        ("∫₀^π sin = 2", std::f64::consts::PI, 2.0, |t| t.sin()),
        ("∫₀^1 exp = e − 1", 1.0, std::f64::consts::E - 1.0, |t| t.exp()),
        ("∫₀^2 t³ = 4", 2.0, 4.0, |t| t.mul_trunc(t).mul_trunc(t)),
    ];
    for (name, len, exact, integrand) in cases {
        let spec = match QuadratureSpec::new(len, 4.0, 1.0 / 16.0, 1.0) {
            Ok(s) => s,
            Err(e) => {
                r.add("quadrature", name, false, format!("error: {e}"));
                continue;
            }
        };
        let res = taylor_grid_integrate(Growth::new(1.0, 0.0), &spec, |u, n| {
            Ok(integrand(&Jet1::variable(C64::new(u, 0.0), n)))
        });
        r.close("quadrature", name, res.map(|(v, _)| (v.re - exact).abs()), 1e-10);
    }
}

fn forms_suite(r: &mut Report, form: &CuspFormSpec) {
    // Γ-invariance: an unreduced point and its reduction must agree; a table
    // that is not modular (e.g. a corrupted coefficient) breaks this.
    let mut worst = 0.0f64;
    let mut failed = None;
    for i in 0..8 {
        let (u, v) = r2(i);
        let m = n_mat(u - 0.5) * a_mat((0.75 + 0.2 * v).ln());
        match (lift_value(form, &m), lift_value_unreduced(form, &m)) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b).norm() / a.norm().max(b.norm()).max(1e-300)),
            (Err(e), _) | (_, Err(e)) => failed = Some(e.to_string()),
        }
    }
    match failed {
        Some(e) => r.add("forms", "Γ-invariance of the lift", false, format!("error: {e}")),
        None => r.add("forms", "Γ-invariance of the lift", worst <= 1e-8, format!("8 points, max rel diff {worst:.1e}")),
    }

    // Hecke relations for a normalized level-1 eigenform.
    let c = &form.coefficients;
    let n_max = c.n_max();
    let k1 = match form.kind {
        FormKind::Holomorphic => form.weight as i32 - 1,
        FormKind::MaassEven => 0,
    };
    let mut worst = 0.0f64;
    let mut count = 0;
    for m in 2..=n_max {
        for n in m + 1..=n_max / m {
            if gcd(m, n) == 1 {
                let want = c.get(m) * c.get(n);
                worst = worst.max((c.get(m * n) - want).abs() / want.abs().max(c.get(m * n).abs()).max(1.0));
                count += 1;
            }
        }
        if is_prime(m) && m * m <= n_max {
            let want = c.get(m) * c.get(m) - (m as f64).powi(k1) * c.get(1);
            worst = worst.max((c.get(m * m) - want).abs() / want.abs().max(1.0));
            count += 1;
        }
    }
    let normalized = (c.get(1) - 1.0).abs() < 1e-12;
    r.add(
        "forms",
        "Hecke relations of the coefficient table",
        normalized && worst <= 1e-9,
        format!("{count} relations, a(1) = {}, max rel defect {worst:.1e}", c.get(1)),
    );

    // Jet vs central difference along the horocycle.
    let x = a_mat(-(0.9f64).ln());
    let h = 1e-4;
    let fd = lift_jet_n(form, &x, 0.2, 3, 0.25).and_then(|j| {
        let p = lift_value(form, &(x * n_mat(0.2 + h)))?;
        let q = lift_value(form, &(x * n_mat(0.2 - h)))?;
        Ok((j.c[1] - (p - q) / (2.0 * h)).norm() / j.c[1].norm().max(1e-300))
    });
    r.close("forms", "first derivative vs finite difference", fd, 1e-6);
}

fn geomfe_suite(r: &mut Report, form: &CuspFormSpec) {
    let t = 100.0;
    match truncation_window(form, t, 4.0) {
        Ok(w) => r.add(
            "geomfe",
            "truncation window at T = 100",
            w.t0 < 1.0 && w.t1 > 1.0 && w.tail_bound() <= t.powf(-4.0),
            format!("[{:.3e}, {:.3e}], tail bound {:.1e}", w.t0, w.t1, w.tail_bound()),
        ),
        Err(e) => r.add("geomfe", "truncation window at T = 100", false, format!("error: {e}")),
    }
}

fn engine_suite(r: &mut Report, form: &CuspFormSpec, threads: Option<usize>) {
    let p = PipelineParams { threads, ..Default::default() };
    let t = 64u64;
    let pair = engine::fourier_fast(form, t, &p).and_then(|a| Ok((a.value, engine::fourier_direct(form, t, &p)?.value)));
    match pair {
        Ok((fast, direct)) => {
            let scale = direct.norm().max(1e-300);
            let d = (fast - direct).norm() / scale;
            r.add("engine", "Fourier fast = direct at T = 64", d <= 1e-9, format!("rel diff {d:.1e}"));
            if form.coefficients.n_max() >= t as usize {
                let want = form.coefficients.get(t as usize);
                let e = (fast - C64::new(want, 0.0)).norm() / want.abs().max(1e-300);
                r.add("engine", "Fourier fast reproduces a(64)", e <= 1e-6, format!("rel err {e:.1e}"));
            }
        }
        Err(e) => r.add("engine", "Fourier fast = direct at T = 64", false, format!("error: {e}")),
    }
    if form.kind == FormKind::Holomorphic {
        let l = engine::lvalue_fast(form, 16.0, &p).and_then(|a| Ok((a.value - engine::lvalue_direct(form, 16.0, &p)?.value).norm()));
        r.close("engine", "L-value fast = direct at T = 16", l, 1e-6);
    }
}

pub fn run(form_path: Option<&Path>, report_path: Option<&Path>, threads: Option<usize>) -> Result<(), Failure> {
    let mut r = Report::default();
    geometry_suite(&mut r);
    jets_suite(&mut r);
    specfun_suite(&mut r);
    quadrature_suite(&mut r);
    let form = match form_path {
        None => Some(CuspFormSpec::delta(200)),
        Some(p) => match load_form(p) {
            Ok(f) => Some(f),
            Err(e) => {
                r.add("forms", "load form file", false, e.to_string());
                None
            }
        },
    };
    if let Some(form) = &form {
        forms_suite(&mut r, form);
        geomfe_suite(&mut r, form);
        engine_suite(&mut r, form, threads);
    }
    let text = r.render();
    print!("{text}");
    if let Some(p) = report_path {
        std::fs::write(p, &text).map_err(|e| io_failure(p, e))?;
    }
    if r.checks.iter().all(|c| c.ok) {
        Ok(())
    } else {
        Err(Failure::SelftestFailed)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}
