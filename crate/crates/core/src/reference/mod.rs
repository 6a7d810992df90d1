//! Reference solutions: closed forms where they exist, otherwise a DOP853
//! integration started from the regular-singular series at a small `x0`.

mod dop853;

use std::sync::Arc;

use crate::error::{EomError, Result};
use crate::problem::{FKind, GKind, ProblemSpec};

pub use dop853::Dop853Options;

/// Cap on the truncation length chosen by [`determine_m`].
pub const MAX_TRUNCATION: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClosedForm {
    /// `1 - x^2/6`
    Polytrope0,
    /// `sin(x)/x`
    Polytrope1,
    /// `(1 + x^2/3)^(-1/2)`
    Polytrope5,
    /// `-2 ln(1 + x^2)`
    LogQuadratic,
    /// `exp(x^2)`
    ExpSquare,
}

impl ClosedForm {
    fn eval(self, x: f64) -> f64 {
        match self {
            ClosedForm::Polytrope0 => 1.0 - x * x / 6.0,
            ClosedForm::Polytrope1 => {
                if x.abs() < 1e-4 {
                    1.0 - x * x / 6.0 + x.powi(4) / 120.0
                } else {
                    x.sin() / x
                }
            }
            ClosedForm::Polytrope5 => (1.0 + x * x / 3.0).powf(-0.5),
            ClosedForm::LogQuadratic => -2.0 * (x * x).ln_1p(),
            ClosedForm::ExpSquare => (x * x).exp(),
        }
    }

    fn deriv(self, x: f64) -> f64 {
        match self {
            ClosedForm::Polytrope0 => -x / 3.0,
            ClosedForm::Polytrope1 => {
                if x.abs() < 1e-4 {
                    -x / 3.0 + x.powi(3) / 30.0
                } else {
                    (x * x.cos() - x.sin()) / (x * x)
                }
            }
            ClosedForm::Polytrope5 => -x / 3.0 * (1.0 + x * x / 3.0).powf(-1.5),
            ClosedForm::LogQuadratic => -4.0 * x / (1.0 + x * x),
            ClosedForm::ExpSquare => 2.0 * x * (x * x).exp(),
        }
    }
}

#[derive(Debug)]
struct DenseTrajectory {
    x0: f64,
    a: f64,
    b: f64,
    ypp0: f64,
    steps: Vec<dop853::DenseStep<2>>,
}

impl DenseTrajectory {
    fn state(&self, x: f64) -> [f64; 2] {
        if x <= self.x0 {
            return [
                self.a + self.b * x + 0.5 * self.ypp0 * x * x,
                self.b + self.ypp0 * x,
            ];
        }
        let idx = self.steps.partition_point(|s| s.x <= x).saturating_sub(1);
        self.steps[idx].eval(x)
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Closed(ClosedForm),
    Dense(Arc<DenseTrajectory>),
}

/// A solution `y(x)` usable as the accuracy baseline on `valid_on`.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub kind: ReferenceKind,
    pub valid_on: (f64, f64),
    inner: Inner,
}

impl ReferenceSolution {
    pub fn eval(&self, x: f64) -> f64 {
        match &self.inner {
            Inner::Closed(c) => c.eval(x),
            Inner::Dense(d) => d.state(x)[0],
        }
    }

    pub fn deriv_eval(&self, x: f64) -> f64 {
        match &self.inner {
            Inner::Closed(c) => c.deriv(x),
            Inner::Dense(d) => d.state(x)[1],
        }
    }

    /// `(min, max)` of `y` over `valid_on`, sampled on `samples` points.
    pub fn range(&self, samples: usize) -> (f64, f64) {
        let (lo, hi) = self.valid_on;
        let n = samples.max(2);
        (0..n)
            .map(|i| self.eval(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)))
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.valid_on = (lo, hi);
        self
    }
}

/// Closed-form solution of `problem`, when one is known.
pub fn exact_solution(problem: &ProblemSpec) -> Option<ReferenceSolution> {
    let form = match (problem.f_kind, problem.g_kind, problem.a, problem.b) {
        (FKind::ConstantOne, GKind::PowerInt(0), a, b) if a == 1.0 && b == 0.0 => ClosedForm::Polytrope0,
        (FKind::ConstantOne, GKind::PowerInt(1), a, b) if a == 1.0 && b == 0.0 => ClosedForm::Polytrope1,
        (FKind::ConstantOne, GKind::PowerInt(5), a, b) if a == 1.0 && b == 0.0 => ClosedForm::Polytrope5,
        (FKind::ConstantOne, GKind::TwoExpCombo, a, b) if a == 0.0 && b == 0.0 => ClosedForm::LogQuadratic,
        (FKind::PolyMinus2TwoX2Plus3, GKind::PowerInt(1), a, b) if a == 1.0 && b == 0.0 => {
            ClosedForm::ExpSquare
        }
        _ => return None,
    };
    Some(ReferenceSolution {
        kind: ReferenceKind::ClosedForm,
        valid_on: (0.0, f64::INFINITY),
        inner: Inner::Closed(form),
    })
}

/// Options for [`rk_reference_with`].
#[derive(Debug, Clone, Copy)]
pub struct RkOptions {
    /// Local relative and absolute tolerance.
    pub tol: f64,
    /// Start of the numerical integration; `[0, x0]` uses the series.
    pub x0: f64,
}

impl Default for RkOptions {
    fn default() -> Self {
        Self { tol: 1e-12, x0: 1e-6 }
    }
}

/// Numeric reference on `[0, m]` with the default start point.
pub fn rk_reference(problem: &ProblemSpec, m: f64, tol: f64) -> Result<ReferenceSolution> {
    rk_reference_with(problem, m, RkOptions { tol, ..RkOptions::default() })
}

/// Integrate `y'' = -(2/x) y' - f(x) g(y)` from the series start
/// `y(x0) = a + b x0 + y''(0) x0^2 / 2`, `y'(x0) = b + y''(0) x0`.
pub fn rk_reference_with(problem: &ProblemSpec, m: f64, opts: RkOptions) -> Result<ReferenceSolution> {
    if !(m > 0.0) {
        return Err(EomError::Argument(format!("reference interval end must be positive, got {m}")));
    }
    if !(opts.tol > 0.0) || !(opts.x0 > 0.0) || opts.x0 >= m {
        return Err(EomError::Argument("need tol > 0 and 0 < x0 < M".into()));
    }
    let ypp0 = problem.second_derivative_at_origin();
    if !ypp0.is_finite() {
        return Err(EomError::Numeric {
            x: 0.0,
            context: "g(a) is not finite".into(),
        });
    }
    let (a, b, x0) = (problem.a, problem.b, opts.x0);
    let u0 = [a + b * x0 + 0.5 * ypp0 * x0 * x0, b + ypp0 * x0];
    let f_kind = problem.f_kind;
    let g_kind = problem.g_kind;
    let rhs = move |x: f64, u: &[f64; 2]| [u[1], -2.0 / x * u[1] - f_kind.eval(x) * g_kind.eval(u[0])];
    let steps = dop853::integrate(
        rhs,
        x0,
        u0,
        m,
        Dop853Options {
            rtol: opts.tol,
            atol: opts.tol,
            h0: 0.1 * x0,
            max_steps: 200_000,
        },
    )?;
    Ok(ReferenceSolution {
        kind: ReferenceKind::Numeric,
        valid_on: (0.0, m),
        inner: Inner::Dense(Arc::new(DenseTrajectory {
            x0,
            a,
            b,
            ypp0,
            steps,
        })),
    })
}

/// Closed form if known, otherwise a numeric reference at tolerance `1e-12`.
pub fn reference_for(problem: &ProblemSpec, m: f64) -> Result<ReferenceSolution> {
    match exact_solution(problem) {
        Some(r) => Ok(r.with_domain(0.0, m)),
        None => rk_reference(problem, m, 1e-12),
    }
}

/// Truncation length: the configured value if present; otherwise the first
/// zero of the reference solution, capped at [`MAX_TRUNCATION`]. The rule
/// needs `y(0) > 0`.
pub fn determine_m(problem: &ProblemSpec) -> Result<f64> {
    if let Some(m) = problem.truncation {
        return Ok(m);
    }
    if !(problem.a > 0.0) {
        return Err(EomError::Config(format!(
            "problem '{}' has y(0) = {} and no explicit M; the first-zero rule needs y(0) > 0",
            problem.name, problem.a
        )));
    }
    let reference = reference_for(problem, MAX_TRUNCATION)?;
    Ok(first_root(|x| reference.eval(x), 0.0, MAX_TRUNCATION, 2000).unwrap_or(MAX_TRUNCATION))
}

/// Smallest root of `f` on `(lo, hi]` found by a grid scan and bisection.
fn first_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize) -> Option<f64> {
    let dx = (hi - lo) / grid as f64;
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    for i in 1..=grid {
        let x = if i == grid { hi } else { lo + dx * i as f64 };
        let fx = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        if f_prev.signum() != fx.signum() && f_prev != 0.0 {
            let (mut a, mut b, mut fa) = (x_prev, x, f_prev);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let fm = f(mid);
                if fm == 0.0 {
                    return Some(mid);
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            return Some(0.5 * (a + b));
        }
        x_prev = x;
        f_prev = fx;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::lookup;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_examples() {
        let p1 = exact_solution(&lookup("lane-emden-p1").unwrap()).unwrap();
        assert_abs_diff_eq!(p1.eval(PI), 0.0, epsilon = 1e-15);
        assert_eq!(p1.eval(0.0), 1.0);
        let p5 = exact_solution(&lookup("lane-emden-p5").unwrap()).unwrap();
        assert_eq!(p5.eval(0.0), 1.0);
        let log = exact_solution(&lookup("emden-fowler-two-exp").unwrap()).unwrap();
        assert_abs_diff_eq!(log.eval(1.0), -2.0 * 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(log.eval(1.0), -1.38629, epsilon = 1e-5);
        assert!(exact_solution(&lookup("lane-emden-sinh").unwrap()).is_none());
        assert!(exact_solution(&lookup("lane-emden-p3_2").unwrap()).is_none());
    }

    #[test]
    fn closed_form_derivatives() {
        for p in crate::problem::registry() {
            if let Some(r) = exact_solution(&p) {
                assert_eq!(r.eval(0.0), p.a, "{}", p.name);
                assert_abs_diff_eq!(r.deriv_eval(0.0), p.b, epsilon = 1e-12);
                for &x in &[0.3, 1.1, 2.0] {
                    let fd = eom_testkit::central_diff(|t| r.eval(t), x, 1e-5);
                    assert!((r.deriv_eval(x) - fd).abs() <= 1e-8 * fd.abs().max(1.0), "{} at {x}", p.name);
                }
            }
        }
    }

    #[test]
    fn rk_matches_closed_forms() {
        for (name, m) in [("lane-emden-p1", PI), ("lane-emden-p5", 5.0), ("emden-fowler-linear", 1.0)] {
            let p = lookup(name).unwrap();
            let exact = exact_solution(&p).unwrap();
            let rk = rk_reference(&p, m, 1e-12).unwrap();
            let worst = (0..=200)
                .map(|i| m * i as f64 / 200.0)
                .map(|x| (rk.eval(x) - exact.eval(x)).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-9, "{name}: {worst:e}");
        }
    }

    #[test]
    fn determine_m_examples() {
        let m0 = determine_m(&lookup("lane-emden-p0").unwrap()).unwrap();
        assert_abs_diff_eq!(m0, 6f64.sqrt(), epsilon = 1e-10);
        let m1 = determine_m(&lookup("lane-emden-p1").unwrap()).unwrap();
        assert_abs_diff_eq!(m1, PI, epsilon = 1e-10);
        assert_eq!(determine_m(&lookup("lane-emden-p5").unwrap()).unwrap(), 5.0);
        assert_eq!(determine_m(&lookup("lane-emden-exp").unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn determine_m_needs_positive_start() {
        let mut p = lookup("lane-emden-exp").unwrap();
        p.truncation = None;
        assert!(matches!(determine_m(&p), Err(EomError::Config(_))));
    }

    #[test]
    fn rk_argument_errors() {
        let p = lookup("lane-emden-p1").unwrap();
        assert!(rk_reference(&p, -1.0, 1e-12).is_err());
        assert!(rk_reference(&p, 1.0, 0.0).is_err());
    }
}
