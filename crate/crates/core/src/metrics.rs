//! Norm-1 measurements, m-sweeps over both modes, and report files.

use std::cell::Cell;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EomError, Result};
use crate::galerkin::{Mode, Prepared, Solution, SolveConfig};
use crate::problem::ProblemSpec;
use crate::quadrature::GaussLegendre;
use crate::reference::{reference_for, ReferenceSolution};

pub const NORM_PANELS: usize = 200;
pub const NORM_ORDER: usize = 10;
/// Number of points in the pointwise arrays of a report.
pub const POINTWISE_GRID: usize = 401;
/// `log10` floor used in plot data.
pub const LOG_FLOOR: f64 = -16.0;
/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "EOM_THREADS";

/// `int_a^b |f(x)| dx` by composite Gauss-Legendre (200 panels of 10 nodes).
/// Panels are split at sign changes of `f` so the kinks of `|f|` fall on
/// sub-panel boundaries.
pub fn norm1(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    norm1_with(f, a, b, NORM_PANELS)
}

const SIGN_SAMPLES: usize = 10;

pub fn norm1_with(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> Result<f64> {
    if !(a < b) || panels == 0 {
        return if a == b { Ok(0.0) } else { Err(EomError::Argument(format!("bad interval [{a}, {b}]"))) };
    }
    let rule = GaussLegendre::cached(NORM_ORDER);
    let bad: Cell<Option<f64>> = Cell::new(None);
    let mut eval = |x: f64| {
        let v = f(x);
        if !v.is_finite() && bad.get().is_none() {
            bad.set(Some(x));
        }
        v
    };
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let hi = if p + 1 == panels { b } else { lo + width };
        let mut cuts = vec![lo];
        let mut x_prev = lo;
        let mut f_prev = eval(lo);
        for k in 1..=SIGN_SAMPLES {
            let x = if k == SIGN_SAMPLES { hi } else { lo + (hi - lo) * k as f64 / SIGN_SAMPLES as f64 };
            let fx = eval(x);
            if f_prev * fx < 0.0 {
                let (mut l, mut r, mut fl) = (x_prev, x, f_prev);
                while r - l > 1e-15 * (1.0 + l.abs()) {
                    let mid = 0.5 * (l + r);
                    let fm = eval(mid);
                    if fm == 0.0 || !fm.is_finite() {
                        l = mid;
                        r = mid;
                        break;
                    }
                    if (fm < 0.0) == (fl < 0.0) {
                        l = mid;
                        fl = fm;
                    } else {
                        r = mid;
                    }
                }
                cuts.push(0.5 * (l + r));
            }
            x_prev = x;
            f_prev = fx;
        }
        cuts.push(hi);
        for w in cuts.windows(2) {
            total += rule.integrate(w[0], w[1], |x| eval(x).abs());
        }
        if let Some(x) = bad.get() {
            return Err(EomError::Numeric {
                x,
                context: "non-finite sample in norm1".into(),
            });
        }
    }
    Ok(total)
}

/// `x -> y_m(x) - y_ref(x)`.
pub fn error_function<'a>(sol: &'a Solution, reference: &'a ReferenceSolution) -> impl Fn(f64) -> f64 + 'a {
    move |x| sol.y_eval(x) - reference.eval(x)
}

/// `x -> x y'' + 2 y' + x f(x) g(y)` with `y` and its derivatives taken from
/// the coefficients of `z` and the true `g`.
pub fn residual_pointwise<'a>(sol: &'a Solution, problem: &'a ProblemSpec) -> impl Fn(f64) -> f64 + 'a {
    move |x| x * sol.y_second(x) + 2.0 * sol.y_deriv(x) + x * problem.f(x) * problem.g(sol.y_eval(x))
}

/// One `(m, mode)` cell of a sweep. Norms are `NaN` when the solve failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub m: usize,
    pub residual_norm1: f64,
    pub error_norm1: f64,
    pub newton_iters: usize,
    pub wall_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl SweepRecord {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Sampled `|error|` and `|residual|` at the largest successful `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pointwise {
    pub m: usize,
    pub x: Vec<f64>,
    pub abs_error: Vec<f64>,
    pub abs_residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub problem: String,
    #[serde(rename = "N")]
    pub series_degree: usize,
    #[serde(rename = "M")]
    pub truncation: f64,
    pub mode: Mode,
    pub records: Vec<SweepRecord>,
    pub pointwise: Option<Pointwise>,
}

impl SweepReport {
    pub fn record(&self, m: usize) -> Option<&SweepRecord> {
        self.records.iter().find(|r| r.m == m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub grid_points: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            newton_max_iter: 50,
            grid_points: POINTWISE_GRID,
        }
    }
}

/// Thread pool honouring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| EomError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(EomError::Config(format!("{THREADS_ENV} must be at least 1")));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| EomError::Config(e.to_string()))
}

/// Solve `problem` for every `m` in `ms` and every mode, one report per mode.
/// Degrees are visited in ascending order so each solve starts from the
/// previous one; a failed degree is recorded and the next starts afresh.
pub fn run_sweep(problem: &ProblemSpec, ms: &[usize], series_degree: Option<usize>, modes: &[Mode], opts: &SweepOptions) -> Result<Vec<SweepReport>> {
    if ms.is_empty() || ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EomError::Argument("m range must be non-empty and strictly ascending".into()));
    }
    if modes.is_empty() {
        return Err(EomError::Argument("at least one mode is required".into()));
    }
    let problem = match series_degree {
        Some(n) => problem.clone().with_series_degree(n),
        None => problem.clone(),
    };
    let prep = Prepared::new(&problem)?;
    let reference = reference_for(&problem, prep.truncation())?;
    let pool = thread_pool()?;
    pool.install(|| {
        modes
            .par_iter()
            .map(|&mode| sweep_mode(&prep, &reference, ms, mode, opts))
            .collect()
    })
}

fn sweep_mode(prep: &Prepared, reference: &ReferenceSolution, ms: &[usize], mode: Mode, opts: &SweepOptions) -> Result<SweepReport> {
    let m_max = prep.truncation();
    let problem = &prep.problem;
    let mut records = Vec::with_capacity(ms.len());
    let mut prev: Option<Solution> = None;
    let mut last_ok: Option<Solution> = None;
    for &m in ms {
        let config = SolveConfig {
            newton_tol: opts.newton_tol,
            newton_max_iter: opts.newton_max_iter,
            ..SolveConfig::new(m, mode)
        };
        let start = Instant::now();
        let outcome = prep.solve_from(&config, prev.as_ref().map(|s| &s.c)).and_then(|sol| {
            let res = norm1(residual_pointwise(&sol, problem), 0.0, m_max)?;
            let err = norm1(error_function(&sol, reference), 0.0, m_max)?;
            Ok((sol, res, err))
        });
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        match outcome {
            Ok((sol, res, err)) => {
                records.push(SweepRecord {
                    m,
                    residual_norm1: res,
                    error_norm1: err,
                    newton_iters: sol.newton_iters,
                    wall_time_ms: elapsed,
                    failure: None,
                });
                prev = Some(sol.clone());
                last_ok = Some(sol);
            }
            Err(e) => {
                records.push(SweepRecord {
                    m,
                    residual_norm1: f64::NAN,
                    error_norm1: f64::NAN,
                    newton_iters: match &e {
                        EomError::NonConvergence { iterations, .. } => *iterations,
                        _ => 0,
                    },
                    wall_time_ms: elapsed,
                    failure: Some(e.to_string()),
                });
                prev = None;
            }
        }
    }
    let pointwise = last_ok.map(|sol| sample_pointwise(&sol, problem, reference, opts.grid_points.max(2)));
    Ok(SweepReport {
        problem: problem.name.clone(),
        series_degree: problem.series_degree,
        truncation: m_max,
        mode,
        records,
        pointwise,
    })
}

/// `|error|` and `|residual|` of `sol` on `n` equispaced points of `[0, M]`.
pub fn sample_pointwise(sol: &Solution, problem: &ProblemSpec, reference: &ReferenceSolution, n: usize) -> Pointwise {
    let err = error_function(sol, reference);
    let res = residual_pointwise(sol, problem);
    let x: Vec<f64> = (0..n).map(|i| sol.truncation * i as f64 / (n - 1) as f64).collect();
    Pointwise {
        m: sol.m,
        abs_error: x.iter().map(|&t| err(t).abs()).collect(),
        abs_residual: x.iter().map(|&t| res(t).abs()).collect(),
        x,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Plotdata,
}

impl std::str::FromStr for Format {
    type Err = EomError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "plotdata" | "dat" => Ok(Format::Plotdata),
            other => Err(EomError::Argument(format!("unknown format '{other}' (csv, json, plotdata)"))),
        }
    }
}

fn stem(report: &SweepReport) -> String {
    format!("{}_{}", report.problem, report.mode)
}

fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".to_string()
    }
}

/// `log10 v`, with zero (and anything below the floor) mapped to [`LOG_FLOOR`].
pub fn log10_clamped(v: f64) -> f64 {
    if v.is_nan() {
        f64::NAN
    } else if v <= 0.0 {
        LOG_FLOOR
    } else {
        v.log10().max(LOG_FLOOR)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EomError + '_ {
    move |source| EomError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `report` into `dir` in the given format; returns the files written.
pub fn emit(report: &SweepReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    match format {
        Format::Csv => {
            let path = dir.join(format!("{}_sweep.csv", stem(report)));
            fs::write(&path, to_csv(report)?).map_err(io_err(&path))?;
            Ok(vec![path])
        }
        Format::Json => {
            let path = dir.join(format!("{}_sweep.json", stem(report)));
            let text = serde_json::to_string_pretty(report).map_err(|e| EomError::Serialize(e.to_string()))?;
            fs::write(&path, text + "\n").map_err(io_err(&path))?;
            Ok(vec![path])
        }
        Format::Plotdata => {
            let norms = dir.join(format!("{}_norms.dat", stem(report)));
            fs::write(&norms, norms_dat(report)).map_err(io_err(&norms))?;
            let mut out = vec![norms];
            if let Some(pw) = &report.pointwise {
                let path = dir.join(format!("{}_pointwise.dat", stem(report)));
                fs::write(&path, pointwise_dat(report, pw)).map_err(io_err(&path))?;
                out.push(path);
            }
            Ok(out)
        }
    }
}

pub const CSV_HEADER: [&str; 5] = ["m", "residual_norm1", "error_norm1", "newton_iters", "wall_time_ms"];

pub fn to_csv(report: &SweepReport) -> Result<String> {
    let ser = |e: csv::Error| EomError::Serialize(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(ser)?;
    for r in &report.records {
        w.write_record([
            r.m.to_string(),
            fmt17(r.residual_norm1),
            fmt17(r.error_norm1),
            r.newton_iters.to_string(),
            fmt17(r.wall_time_ms),
        ])
        .map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| EomError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EomError::Serialize(e.to_string()))
}

/// Parse the output of [`to_csv`] back into records.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let ser = |e: String| EomError::Serialize(e);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| ser(e.to_string()))?;
        let num = |i: usize| -> Result<f64> { row[i].parse::<f64>().map_err(|e| ser(format!("column {i}: {e}"))) };
        let int = |i: usize| -> Result<usize> { row[i].parse::<usize>().map_err(|e| ser(format!("column {i}: {e}"))) };
        let residual = num(1)?;
        out.push(SweepRecord {
            m: int(0)?,
            residual_norm1: residual,
            error_norm1: num(2)?,
            newton_iters: int(3)?,
            wall_time_ms: num(4)?,
            failure: residual.is_nan().then(|| "failed".to_string()),
        });
    }
    Ok(out)
}

fn norms_dat(report: &SweepReport) -> String {
    let mut s = format!(
        "# {} {} N={} M={}\n# m log10(residual_norm1) log10(error_norm1)\n",
        report.problem, report.mode, report.series_degree, report.truncation
    );
    for r in &report.records {
        s += &format!("{} {:.10e} {:.10e}\n", r.m, log10_clamped(r.residual_norm1), log10_clamped(r.error_norm1));
    }
    s
}

fn pointwise_dat(report: &SweepReport, pw: &Pointwise) -> String {
    let mut s = format!(
        "# {} {} m={} M={}\n# x log10|error| log10|residual|\n",
        report.problem, report.mode, pw.m, report.truncation
    );
    for i in 0..pw.x.len() {
        s += &format!(
            "{:.10e} {:.10e} {:.10e}\n",
            pw.x[i],
            log10_clamped(pw.abs_error[i]),
            log10_clamped(pw.abs_residual[i])
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::lookup;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn norm1_examples() {
        assert_eq!(norm1(|_| 0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(norm1(|x| x, 0.0, 1.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(norm1(f64::sin, 0.0, PI).unwrap(), 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(norm1(|x| x - 0.5, 0.0, 1.0).unwrap(), 0.25, epsilon = 1e-12);
        match norm1(|x| if x > 0.5 { f64::NAN } else { x }, 0.0, 1.0) {
            Err(EomError::Numeric { x, .. }) => assert!(x > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_function_examples() {
        let p = lookup("lane-emden-p0").unwrap();
        let prep = Prepared::new(&p).unwrap();
        let sol = prep.solve(&SolveConfig::new(2, Mode::Eom)).unwrap();
        let r = reference_for(&p, prep.truncation()).unwrap();
        let e = error_function(&sol, &r);
        for i in 0..=20 {
            assert_abs_diff_eq!(e(prep.truncation() * i as f64 / 20.0), 0.0, epsilon = 1e-12);
        }
        let res = residual_pointwise(&sol, &p);
        assert!(norm1(&res, 0.0, prep.truncation()).unwrap() < 1e-11);

        let p1 = lookup("lane-emden-p1").unwrap();
        let prep = Prepared::new(&p1).unwrap();
        let sol = prep.solve(&SolveConfig::new(8, Mode::Eom)).unwrap();
        let r = reference_for(&p1, prep.truncation()).unwrap();
        let e = error_function(&sol, &r);
        assert_abs_diff_eq!(e(0.0), 0.0, epsilon = 1e-10);
        let a = norm1(&e, 0.0, PI).unwrap();
        let b = norm1(|x| -e(x), 0.0, PI).unwrap();
        assert_eq!(a, b);
        let res = residual_pointwise(&sol, &p1);
        assert_abs_diff_eq!(res(0.0), 2.0 * p1.b, epsilon = 1e-9);
    }

    #[test]
    fn quadrature_is_converged() {
        let p = lookup("lane-emden-sin").unwrap();
        let prep = Prepared::new(&p).unwrap();
        let sol = prep.solve(&SolveConfig::new(6, Mode::Eom)).unwrap();
        let f = residual_pointwise(&sol, &p);
        let a = norm1_with(&f, 0.0, prep.truncation(), NORM_PANELS).unwrap();
        let b = norm1_with(&f, 0.0, prep.truncation(), 2 * NORM_PANELS).unwrap();
        assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} {b}");
    }

    #[test]
    fn sweep_and_emit() {
        let p = lookup("lane-emden-p1").unwrap();
        let reports = run_sweep(&p, &[2, 3, 4, 5, 6, 7, 8], None, &[Mode::Eom, Mode::Oom], &SweepOptions::default()).unwrap();
        assert_eq!(reports.len(), 2);
        let eom = &reports[0];
        assert_eq!(eom.mode, Mode::Eom);
        assert_eq!(eom.series_degree, 8);
        assert!(eom.records.iter().all(SweepRecord::succeeded));
        assert!(eom.records.windows(2).all(|w| w[0].m < w[1].m));
        assert!(eom.record(8).unwrap().residual_norm1 < eom.record(2).unwrap().residual_norm1);
        let pw = eom.pointwise.as_ref().unwrap();
        assert!(pw.x.len() >= 400);
        assert_eq!(pw.m, 8);

        let dir = tempfile::tempdir().unwrap();
        let mut files = Vec::new();
        for f in [Format::Csv, Format::Json, Format::Plotdata] {
            files.extend(emit(eom, f, dir.path()).unwrap());
        }
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(
            names,
            [
                "lane-emden-p1_eom_sweep.csv",
                "lane-emden-p1_eom_sweep.json",
                "lane-emden-p1_eom_norms.dat",
                "lane-emden-p1_eom_pointwise.dat"
            ]
        );
        let parsed = parse_csv(&fs::read_to_string(&files[0]).unwrap()).unwrap();
        assert_eq!(parsed, eom.records);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[1]).unwrap()).unwrap();
        for key in ["problem", "N", "M", "mode"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        let dat = fs::read_to_string(&files[3]).unwrap();
        assert!(dat.lines().filter(|l| !l.starts_with('#')).count() >= 400);
    }

    #[test]
    fn log_clamp() {
        assert_eq!(log10_clamped(0.0), -16.0);
        assert_eq!(log10_clamped(1e-20), -16.0);
        assert_abs_diff_eq!(log10_clamped(1e-3), -3.0, epsilon = 1e-15);
    }

    #[test]
    fn failures_are_recorded() {
        let p = lookup("lane-emden-p5").unwrap();
        let opts = SweepOptions {
            newton_max_iter: 1,
            ..SweepOptions::default()
        };
        let r = run_sweep(&p, &[2, 3], None, &[Mode::Eom], &opts).unwrap();
        let rec = &r[0].records[0];
        assert!(!rec.succeeded());
        assert!(rec.residual_norm1.is_nan());
        let csv = to_csv(&r[0]).unwrap();
        assert!(parse_csv(&csv).unwrap()[0].failure.is_some());
    }

    #[test]
    fn bad_sweep_arguments() {
        let p = lookup("lane-emden-p1").unwrap();
        let o = SweepOptions::default();
        assert!(run_sweep(&p, &[], None, &[Mode::Eom], &o).is_err());
        assert!(run_sweep(&p, &[3, 2], None, &[Mode::Eom], &o).is_err());
        assert!(run_sweep(&p, &[2], None, &[], &o).is_err());
        assert!("pdf".parse::<Format>().is_err());
    }
}
