//! `fourier`, `lvalue` and `gen-delta`.

use crate::{io_failure, EvalArgs, Failure, Mode};
use lfun_core::engine::{self, EngineOutput, Grouping, PipelineParams, Precision};
use lfun_core::forms::{form_to_json, gen_delta as delta_table, load_form, CuspFormSpec};
use serde_json::{json, Value};
use std::path::Path;
use std::time::Instant;

pub fn params_json(p: &PipelineParams) -> Value {
    json!({
        "gamma": p.gamma,
        "epsilon": p.eps,
        "eta": p.eta,
        "d": p.d,
        "precision": match p.precision { Precision::Double => "double", Precision::Extended => "extended" },
        "grouping": match p.grouping {
            Grouping::Auto => "auto",
            Grouping::Always => "always",
            Grouping::Singletons => "singletons",
        },
        "threads": p.threads,
    })
}

/// The result record; floats use shortest round-trip formatting, and
/// non-finite values become `null`.
pub fn record(out: &EngineOutput, wall: f64, mut params: Value, extra: &[(&str, Value)]) -> Value {
    if let Value::Object(m) = &mut params {
        for (k, v) in extra {
            m.insert((*k).to_string(), v.clone());
        }
    }
    let mut rec = json!({
        "value_re": out.value.re,
        "value_im": out.value.im,
        "abs_error_estimate": out.err_est,
        "wall_seconds": wall,
        "jet_evals": out.stats.jet_evals,
        "groups": out.stats.groups,
        "params": params,
    });
    if let Some(l) = out.log_value {
        rec["log_abs"] = json!(l.logmag);
        rec["arg"] = json!(l.arg);
    }
    rec
}

pub fn emit(value: &Value, output: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize") + "\n";
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(path: &Path) -> Result<CuspFormSpec, Failure> {
    Ok(load_form(path)?)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Fast => "fast",
        Mode::Direct => "direct",
    }
}

pub fn fourier_index(t: f64) -> Result<u64, Failure> {
    if !(t >= 1.0 && t.fract() == 0.0 && t < 2f64.powi(53)) {
        return Err(Failure::Usage(format!("fourier needs a positive integer T, got {t}")));
    }
    Ok(t as u64)
}

pub fn fourier(args: &EvalArgs, threads: Option<usize>) -> Result<(), Failure> {
    let params = args.params.to_params(threads);
    params.validate()?;
    let t = fourier_index(args.t)?;
    let form = load(&args.form)?;
    let start = Instant::now();
    let out = match args.mode {
        Mode::Fast => engine::fourier_fast(&form, t, &params)?,
        Mode::Direct => engine::fourier_direct(&form, t, &params)?,
    };
    let wall = start.elapsed().as_secs_f64();
    let extra = [("T", json!(t)), ("mode", json!(mode_name(args.mode))), ("form", json!(args.form.display().to_string()))];
    emit(&record(&out, wall, params_json(&params), &extra), args.output.as_deref())
}

pub fn lvalue(args: &EvalArgs, threads: Option<usize>) -> Result<(), Failure> {
    let params = args.params.to_params(threads);
    params.validate()?;
    if !(args.t > 0.0 && args.t.is_finite()) {
        return Err(Failure::Usage(format!("lvalue needs T > 0, got {}", args.t)));
    }
    let form = load(&args.form)?;
    let start = Instant::now();
    let out = match args.mode {
        Mode::Fast => engine::lvalue_fast(&form, args.t, &params)?,
        Mode::Direct => engine::lvalue_direct(&form, args.t, &params)?,
    };
    let wall = start.elapsed().as_secs_f64();
    let extra = [("T", json!(args.t)), ("mode", json!(mode_name(args.mode))), ("form", json!(args.form.display().to_string()))];
    emit(&record(&out, wall, params_json(&params), &extra), args.output.as_deref())
}

pub fn gen_delta(n: usize, output: Option<&Path>) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::Usage("--n must be positive".into()));
    }
    let form = CuspFormSpec::holomorphic(12, delta_table(n))?;
    let text = form_to_json(&form);
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
