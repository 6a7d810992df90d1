use std::fmt;
use std::path::PathBuf;

use eom_core::basis::{increaser, k_matrices, matrix_a, matrix_a_inv};
use eom_core::galerkin::{Mode, Prepared, SolveConfig};
use eom_core::metrics::{emit, error_function, norm1, residual_pointwise, run_sweep, Format, SweepOptions};
use eom_core::operators::{diff_matrix, gram_matrix, int_matrix};
use eom_core::problem::{lookup, registry, ProblemSpec};
use eom_core::reference::{determine_m, exact_solution, reference_for, rk_reference};
use eom_core::{EomError, RationalMatrix};

use crate::args::{Cli, Command, MatrixArgs, MatrixKind, ProblemArgs, ReferenceArgs, SolveArgs, SweepArgs, TextOrJson};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    NotConverged(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::NotConverged(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<EomError> for CliError {
    fn from(e: EomError) -> Self {
        match &e {
            EomError::NonConvergence { best, .. } => CliError::NotConverged(format!("{e}\nbest iterate: {best:?}")),
            EomError::Argument(_)
            | EomError::Domain { .. }
            | EomError::Validation(_)
            | EomError::Config(_)
            | EomError::Serialize(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Matrices(a) => matrices(a),
        Command::Reference(a) => reference(a),
        Command::Problems => {
            println!("{:<22} {:<22} {:<28} {:>4} {:>4} {:>6} {:>3}", "name", "f", "g", "a", "b", "M", "N");
            for p in registry() {
                let m = p.truncation.map_or("auto".to_string(), |m| m.to_string());
                println!(
                    "{:<22} {:<22} {:<28} {:>4} {:>4} {:>6} {:>3}",
                    p.name,
                    json_label(&p.f_kind),
                    json_label(&p.g_kind),
                    p.a,
                    p.b,
                    m,
                    p.series_degree
                );
            }
            Ok(())
        }
    }
}

fn json_label<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).map_or_else(|_| "?".into(), |s| s.trim_matches('"').to_string())
}

fn resolve(args: &ProblemArgs) -> CliResult<ProblemSpec> {
    let mut p = match (&args.problem, &args.problem_file) {
        (Some(name), _) => lookup(name).ok_or_else(|| {
            CliError::Usage(format!("unknown problem '{name}'; `eom problems` lists the built-in names"))
        })?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read problem file {}: {e}", path.display())))?;
            ProblemSpec::from_json(&text)?
        }
        (None, None) => return Err(CliError::Usage("either --problem or --problem-file is required".into())),
    };
    if let Some(n) = args.series_degree {
        p = p.with_series_degree(n);
    }
    if let Some(m) = args.truncation {
        p = p.with_truncation(m);
    }
    p.validate()?;
    Ok(p)
}

fn parse_modes(s: &str) -> CliResult<Vec<Mode>> {
    let mut modes = Vec::new();
    for part in s.split(',').filter(|x| !x.trim().is_empty()) {
        let mode: Mode = part.parse()?;
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }
    if modes.is_empty() {
        return Err(CliError::Usage("no modes given".into()));
    }
    Ok(modes)
}

/// `a..b` (inclusive), a single degree, or a comma-separated list.
pub fn parse_m_range(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("invalid degree range '{s}' (expected e.g. 2..8, 5 or 2,4,6)"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let ms: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<CliResult<_>>()?
    };
    if ms.is_empty() || ms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad());
    }
    Ok(ms)
}

fn parse_formats(s: &str) -> CliResult<Vec<Format>> {
    let formats: Vec<Format> = s
        .split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.parse::<Format>().map_err(CliError::from))
        .collect::<CliResult<_>>()?;
    if formats.is_empty() {
        return Err(CliError::Usage("no output formats given".into()));
    }
    Ok(formats)
}

fn solve(a: SolveArgs) -> CliResult<()> {
    let p = resolve(&a.problem)?;
    let mode: Mode = a.mode.parse()?;
    let prep = Prepared::new(&p)?;
    let config = SolveConfig::new(a.m, mode).with_tol(a.tol);
    let sol = prep.solve(&config)?;
    let m_trunc = prep.truncation();
    let reference = reference_for(&p, m_trunc)?;
    let residual = norm1(residual_pointwise(&sol, &p), 0.0, m_trunc)?;
    let error = norm1(error_function(&sol, &reference), 0.0, m_trunc)?;
    let y_end = sol.y_eval(m_trunc);
    match a.format {
        TextOrJson::Json => {
            let mut v = serde_json::to_value(&sol).map_err(|e| CliError::Failed(e.to_string()))?;
            v["N"] = p.series_degree.into();
            v["residual_norm1"] = residual.into();
            v["error_norm1"] = error.into();
            v["y_at_M"] = y_end.into();
            println!("{}", serde_json::to_string_pretty(&v).map_err(|e| CliError::Failed(e.to_string()))?);
        }
        TextOrJson::Text => {
            println!("problem        {}", p.name);
            println!("mode           {mode}");
            println!("m              {}", sol.m);
            println!("M              {m_trunc}");
            if p.g_kind.needs_series() {
                println!("N              {}", p.series_degree);
            }
            println!("newton         {} iterations, |R*| = {:.3e}", sol.newton_iters, sol.final_residual_norm);
            println!("residual norm1 {residual:.6e}");
            println!("error norm1    {error:.6e} ({:?} reference)", reference.kind);
            println!("y(M)           {y_end:.6e}");
            println!("coefficients   {:?}", sol.h.entries());
        }
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> CliResult<()> {
    let p = resolve(&a.problem)?;
    let ms = parse_m_range(&a.m)?;
    let modes = parse_modes(&a.modes)?;
    let formats = parse_formats(&a.format)?;
    let opts = SweepOptions {
        newton_tol: a.tol,
        ..SweepOptions::default()
    };
    let mut reports = run_sweep(&p, &ms, None, &modes, &opts)?;
    let mut failed = Vec::new();
    let mut written: Vec<PathBuf> = Vec::new();
    for report in &mut reports {
        if a.no_timing {
            report.records.iter_mut().for_each(|r| r.wall_time_ms = 0.0);
        }
        println!("{} [{}] M = {} N = {}", report.problem, report.mode, report.truncation, report.series_degree);
        println!("  {:>3} {:>14} {:>14} {:>6}", "m", "residual", "error", "iters");
        for r in &report.records {
            println!(
                "  {:>3} {:>14.6e} {:>14.6e} {:>6}",
                r.m, r.residual_norm1, r.error_norm1, r.newton_iters
            );
            if let Some(f) = &r.failure {
                failed.push(format!("{} m={}: {f}", report.mode, r.m));
            }
        }
        for &f in &formats {
            written.extend(emit(report, f, &a.out)?);
        }
    }
    for w in &written {
        println!("wrote {}", w.display());
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!("{} solve(s) failed:\n  {}", failed.len(), failed.join("\n  "))))
    }
}

fn matrices(a: MatrixArgs) -> CliResult<()> {
    let mat: RationalMatrix = match a.kind {
        MatrixKind::A => matrix_a(a.m),
        MatrixKind::AInv => matrix_a_inv(a.m),
        MatrixKind::D => diff_matrix(a.m)?,
        MatrixKind::P => int_matrix(a.m),
        MatrixKind::E => increaser(a.m, a.gap),
        MatrixKind::Q => {
            let small = a.small.unwrap_or(a.m);
            gram_matrix(a.big.unwrap_or(small), small)?
        }
        MatrixKind::K => {
            let (k, kp) = k_matrices(a.m, a.gap)?;
            print_matrix("K", &k, a.float);
            print_matrix("K'", &kp, a.float);
            return Ok(());
        }
    };
    print_matrix(&format!("{:?}", a.kind), &mat, a.float);
    Ok(())
}

fn print_matrix(label: &str, m: &RationalMatrix, float: bool) {
    println!("# {label} ({}x{})", m.rows(), m.cols());
    if float {
        print!("{}", m.map_f64());
    } else {
        print!("{m}");
    }
}

fn reference(a: ReferenceArgs) -> CliResult<()> {
    let p = resolve(&a.problem)?;
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let m = determine_m(&p)?;
    let r = match exact_solution(&p) {
        Some(r) => r.with_domain(0.0, m),
        None => rk_reference(&p, m, a.tol)?,
    };
    println!("# {} ({:?}) on [0, {m}]", p.name, r.kind);
    println!("# x y dy/dx");
    for i in 0..a.points {
        let x = m * i as f64 / (a.points - 1) as f64;
        println!("{x:.10e} {:.15e} {:.15e}", r.eval(x), r.deriv_eval(x));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_ranges() {
        assert_eq!(parse_m_range("2..8").unwrap(), vec![2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(parse_m_range("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_m_range("5").unwrap(), vec![5]);
        assert_eq!(parse_m_range("2,4,6").unwrap(), vec![2, 4, 6]);
        assert!(parse_m_range("8..2").is_err());
        assert!(parse_m_range("4,2").is_err());
        assert!(parse_m_range("x").is_err());
    }

    #[test]
    fn modes_and_formats() {
        assert_eq!(parse_modes("eom,oom").unwrap(), vec![Mode::Eom, Mode::Oom]);
        assert_eq!(parse_modes("oom,oom").unwrap(), vec![Mode::Oom]);
        assert!(parse_modes("").is_err());
        assert_eq!(parse_formats("csv,plotdata").unwrap(), vec![Format::Csv, Format::Plotdata]);
        assert!(parse_formats("png").is_err());
    }

    #[test]
    fn exit_codes() {
        let e: CliError = EomError::NonConvergence {
            iterations: 50,
            residual: 1.0,
            best: vec![0.0],
        }
        .into();
        assert_eq!(e.exit_code(), 3);
        assert_eq!(CliError::from(EomError::Argument("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(EomError::Singular("x".into())).exit_code(), 1);
    }
}
