//! Scaling benchmark: one CSV row per (T, mode) and a least-squares slope of
//! `log(jet_evals)` against `log(T)` per mode.

use crate::run::fourier_index;
use crate::{io_failure, Failure, Mode, ParamArgs};
use clap::{Args, ValueEnum};
use lfun_core::engine::{self, RunStats};
use lfun_core::forms::load_form;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Pipeline {
    Fourier,
    Lvalue,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Form file (JSON)
    #[arg(long)]
    form: PathBuf,
    #[arg(long, value_enum, default_value_t = Pipeline::Fourier)]
    pipeline: Pipeline,
    /// Comma-separated list of T values.
    #[arg(long = "T", visible_alias = "t", value_delimiter = ',')]
    t: Vec<f64>,
    /// Powers of two `a..b` (inclusive), appended to `--T`.
    #[arg(long, value_parser = parse_range)]
    pow2: Option<(u32, u32)>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Fast, Mode::Direct])]
    modes: Vec<Mode>,
    /// Plan and count only; values are left empty and wall time is the
    /// planning time.
    #[arg(long)]
    count_only: bool,
    #[command(flatten)]
    params: ParamArgs,
    /// CSV destination (default: stdout). Slopes go to stderr, and also to
    /// stdout when this is set.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u32 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u32 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a > b || b > 52 {
        return Err("need a <= b <= 52".into());
    }
    Ok((a, b))
}

pub const CSV_HEADER: &str = "T,mode,wall_seconds,jet_evals,groups,value_re,value_im";

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

struct Row {
    t: f64,
    mode: Mode,
    wall: f64,
    stats: RunStats,
    value: Option<(f64, f64)>,
}

pub fn run(args: &BenchArgs, threads: Option<usize>) -> Result<(), Failure> {
    let params = args.params.to_params(threads);
    params.validate()?;
    let mut ts = args.t.clone();
    if let Some((a, b)) = args.pow2 {
        ts.extend((a..=b).map(|e| 2f64.powi(e as i32)));
    }
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if ts.len() < 4 || !(lo > 0.0) || hi / lo < 100.0 {
        return Err(Failure::Usage("bench needs at least 4 positive T values spanning 2 decades".into()));
    }
    if args.modes.is_empty() {
        return Err(Failure::Usage("no modes given".into()));
    }
    let form = load_form(&args.form)?;
    let mut rows = Vec::new();
    for &t in &ts {
        for &mode in &args.modes {
            let start = Instant::now();
            let (stats, value) = match (args.pipeline, args.count_only) {
                (Pipeline::Fourier, true) => {
                    let n = fourier_index(t)?;
                    let s = match mode {
                        Mode::Fast => engine::fourier_fast_counts(&form, n, &params)?,
                        Mode::Direct => engine::fourier_direct_counts(&form, n, &params)?,
                    };
                    (s, None)
                }
                (Pipeline::Lvalue, true) => {
                    let s = match mode {
                        Mode::Fast => engine::lvalue_fast_counts(&form, t, &params)?,
                        Mode::Direct => engine::lvalue_direct_counts(&form, t, &params)?,
                    };
                    (s, None)
                }
                (Pipeline::Fourier, false) => {
                    let n = fourier_index(t)?;
                    let o = match mode {
                        Mode::Fast => engine::fourier_fast(&form, n, &params)?,
                        Mode::Direct => engine::fourier_direct(&form, n, &params)?,
                    };
                    (o.stats, Some((o.value.re, o.value.im)))
                }
                (Pipeline::Lvalue, false) => {
                    let o = match mode {
                        Mode::Fast => engine::lvalue_fast(&form, t, &params)?,
                        Mode::Direct => engine::lvalue_direct(&form, t, &params)?,
                    };
                    (o.stats, Some((o.value.re, o.value.im)))
                }
            };
            rows.push(Row { t, mode, wall: start.elapsed().as_secs_f64(), stats, value });
        }
    }
    let csv = render_csv(&rows);
    let slopes = render_slopes(&rows, &args.modes);
    match &args.output {
        Some(p) => {
            std::fs::write(p, csv).map_err(|e| io_failure(p, e))?;
            print!("{slopes}");
        }
        None => print!("{csv}"),
    }
    eprint!("{slopes}");
    Ok(())
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Fast => "fast",
        Mode::Direct => "direct",
    }
}

fn render_csv(rows: &[Row]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in rows {
        let (re, im) = r.value.map(|(a, b)| (a.to_string(), b.to_string())).unwrap_or_default();
        writeln!(s, "{},{},{},{},{},{re},{im}", r.t, mode_name(r.mode), r.wall, r.stats.jet_evals, r.stats.groups)
            .expect("writing to a String");
    }
    s
}

fn render_slopes(rows: &[Row], modes: &[Mode]) -> String {
    let mut s = String::new();
    for &m in modes {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.mode == m && r.stats.jet_evals > 0)
            .map(|r| (r.t.ln(), (r.stats.jet_evals as f64).ln()))
            .collect();
        match fit_slope(&pts) {
            Some(k) => writeln!(s, "slope mode={} jet_evals_vs_T={k:.4}", mode_name(m)),
            None => writeln!(s, "slope mode={} jet_evals_vs_T=undefined", mode_name(m)),
        }
        .expect("writing to a String");
    }
    s
}
