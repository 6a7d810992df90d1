//! Galerkin assembly and Newton solve for the mapped problem
//! `s v'' + 2 v' + s M f(sM) g(M v) = 0`, `v(0) = a/M`, `v'(0) = b`, with
//! `s = x/M` and `v = y/M`.
//!
//! The unknown is `c`, the Bernstein coefficients of `z'' ~ v''` at degree
//! `m`. Two antiderivatives give `z'` (degree `m+1`) and `z` (degree `m+2`)
//! with the initial conditions built in.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::basis::{elevate_coeffs, monomial_coeffs, CoeffVector, MAX_BASIS_DEGREE};
use crate::error::{EomError, Result};
use crate::matrix::Matrix;
use crate::operators::{antiderivative_coeffs, best_series_coeffs, derivative_coeffs, gram_matrix, product_row, projection_matrix, series_row};
use crate::problem::{FKind, GKind, ProblemSpec};
use crate::reference::{determine_m, reference_for};
use crate::scalar::{f64_to_ratio, Scalar};

/// How degree-raising intermediates are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact operational matrices: every product keeps its full degree.
    Eom,
    /// Ordinary operational matrices: integration and every product are
    /// replaced by their `L^2` projection onto degree `m`.
    Oom,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Eom => "eom",
            Mode::Oom => "oom",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = EomError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eom" => Ok(Mode::Eom),
            "oom" => Ok(Mode::Oom),
            other => Err(EomError::Argument(format!("unknown mode '{other}' (expected eom or oom)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub m: usize,
    pub mode: Mode,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Start degree `m` from the converged degree `m-1` solution.
    pub continuation: bool,
}

impl SolveConfig {
    pub fn new(m: usize, mode: Mode) -> Self {
        Self {
            m,
            mode,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            continuation: true,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.newton_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.m > MAX_BASIS_DEGREE {
            return Err(EomError::Domain {
                what: "basis degree m",
                value: self.m as f64,
                lo: 2.0,
                hi: MAX_BASIS_DEGREE as f64,
            });
        }
        if !(self.newton_tol > 0.0) {
            return Err(EomError::Argument(format!("newton_tol must be positive, got {}", self.newton_tol)));
        }
        if self.newton_max_iter == 0 {
            return Err(EomError::Argument("newton_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Parameters of the problem after the change of variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappedProblem {
    pub name: String,
    pub f_kind: FKind,
    pub g_kind: GKind,
    /// `v(0) = a/M`.
    pub v0: f64,
    /// `v'(0) = b`.
    pub slope: f64,
    pub truncation: f64,
}

pub fn map_domain(problem: &ProblemSpec, truncation: f64) -> Result<MappedProblem> {
    if !(truncation > 0.0) || !truncation.is_finite() {
        return Err(EomError::Argument(format!("truncation M must be positive, got {truncation}")));
    }
    Ok(MappedProblem {
        name: problem.name.clone(),
        f_kind: problem.f_kind,
        g_kind: problem.g_kind,
        v0: problem.a / truncation,
        slope: problem.b,
        truncation,
    })
}

fn lift<T: Scalar>(x: f64) -> T {
    T::from_rational(&f64_to_ratio(x).expect("finite parameter"))
}

/// `(z', z)` from `z''`: `g = P^T c + b`, `h = P^T g + a/M`.
pub fn antiderivative_chain<T: Scalar>(c: &CoeffVector<T>, v0: &T, slope: &T) -> (CoeffVector<T>, CoeffVector<T>) {
    let g = shift(&antiderivative_coeffs(c), slope);
    let h = shift(&antiderivative_coeffs(&g), v0);
    (g, h)
}

fn shift<T: Scalar>(v: &CoeffVector<T>, by: &T) -> CoeffVector<T> {
    CoeffVector::new(v.entries().iter().map(|x| x.clone() + by.clone()).collect()).expect("non-empty")
}

/// Coefficients of `s M f(sM)`.
pub fn forcing_coeffs<T: Scalar>(f_kind: FKind, truncation: &T) -> CoeffVector<T> {
    let d = |i, m| monomial_coeffs::<T>(i, m).expect("i <= m");
    match f_kind {
        FKind::ConstantOne => d(1, 1).scale(truncation),
        FKind::PolyMinus2TwoX2Plus3 => {
            let m2 = truncation.clone() * truncation.clone();
            let cubic = d(3, 3).scale(&(T::from_i64(2) * m2));
            let linear = d(1, 3).scale(&T::from_i64(3));
            cubic
                .add(&linear)
                .expect("same degree")
                .scale(&(T::from_i64(-2) * truncation.clone()))
        }
    }
}

/// Fitted expansion `g(Mz) ~ sum_k e_k z^k` over an interval in `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesFit {
    pub degree: usize,
    /// Interval in the mapped variable `z = y/M`.
    pub interval: (f64, f64),
    pub coeffs: Vec<f64>,
}

impl SeriesFit {
    pub fn new(g_kind: GKind, truncation: f64, degree: usize, y_interval: (f64, f64)) -> Result<Self> {
        let interval = (y_interval.0 / truncation, y_interval.1 / truncation);
        let coeffs = best_series_coeffs(|z| g_kind.eval(truncation * z), degree, interval.0, interval.1)?;
        Ok(Self {
            degree,
            interval,
            coeffs,
        })
    }
}

/// How `g(M z)` is expanded in terms of `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity<T> {
    /// `g == 1`.
    Constant,
    /// `M^p h^p`.
    Power { p: i64, scale: T },
    /// `sum_k e_k h^k`.
    Series { coeffs: Vec<T>, degree: usize },
}

impl<T: Scalar> Nonlinearity<T> {
    pub fn new(g_kind: GKind, truncation: f64, fit: Option<&SeriesFit>) -> Result<Self> {
        match (g_kind, fit) {
            (GKind::PowerInt(0), _) => Ok(Nonlinearity::Constant),
            (GKind::PowerInt(p), _) if p > 0 => {
                let m: T = lift(truncation);
                let scale = (1..p).fold(m.clone(), |acc, _| acc * m.clone());
                Ok(Nonlinearity::Power { p, scale })
            }
            (GKind::PowerInt(p), _) => Err(EomError::Argument(format!("power_int needs p >= 0, got {p}"))),
            (_, Some(fit)) => Ok(Nonlinearity::Series {
                coeffs: fit.coeffs.iter().map(|&e| lift(e)).collect(),
                degree: fit.degree,
            }),
            (g, None) => Err(EomError::Argument(format!("{g:?} needs a series fit"))),
        }
    }

    /// Degree of the expansion for an argument of degree `q`.
    pub fn degree_for(&self, q: usize) -> usize {
        match self {
            Nonlinearity::Constant => 0,
            Nonlinearity::Power { p, .. } => q * *p as usize,
            Nonlinearity::Series { degree, .. } => q * degree,
        }
    }
}

/// Exact coefficients of `g(M z)` for `z = h^T psi`.
pub fn nonlinearity_coeffs<T: Scalar>(nl: &Nonlinearity<T>, h: &CoeffVector<T>) -> Result<CoeffVector<T>> {
    match nl {
        Nonlinearity::Constant => Ok(CoeffVector::constant(0, T::one())),
        Nonlinearity::Power { p, scale } => Ok(crate::operators::power_row(h, *p)?.scale(scale)),
        Nonlinearity::Series { coeffs, degree } => series_row(coeffs, h, *degree),
    }
}

/// The assembled residual `R(c)` and its Galerkin reduction `R*(c) = R(c) Q`.
#[derive(Debug, Clone)]
pub struct ResidualSystem<T> {
    pub m: usize,
    pub mode: Mode,
    pub max_num: usize,
    v0: T,
    slope: T,
    forcing: CoeffVector<T>,
    nonlinearity: Nonlinearity<T>,
    x_row: CoeffVector<T>,
    gram: Matrix<T>,
    projectors: HashMap<usize, Matrix<T>>,
}

impl<T: Scalar> ResidualSystem<T> {
    pub fn assemble(mapped: &MappedProblem, m: usize, mode: Mode, fit: Option<&SeriesFit>) -> Result<Self> {
        if m < 2 {
            return Err(EomError::Argument(format!("basis degree must be >= 2, got {m}")));
        }
        let truncation: T = lift(mapped.truncation);
        let forcing = forcing_coeffs(mapped.f_kind, &truncation);
        let nonlinearity = Nonlinearity::new(mapped.g_kind, mapped.truncation, fit)?;
        let i_deg = forcing.degree();
        let (max_num, sources) = match mode {
            Mode::Eom => ((m + 1).max(i_deg + nonlinearity.degree_for(m + 2)), Vec::new()),
            Mode::Oom => {
                let mut sources = vec![m + 1, i_deg + nonlinearity.degree_for(m).min(m)];
                if nonlinearity.degree_for(m) > m {
                    sources.push(2 * m);
                }
                (m, sources)
            }
        };
        let to_t = |r: &crate::matrix::RationalMatrix| Matrix::from_fn(r.rows(), r.cols(), |i, j| T::from_rational(&r[(i, j)]));
        let mut projectors = HashMap::new();
        for from in sources.into_iter().filter(|&d| d > m) {
            if let std::collections::hash_map::Entry::Vacant(e) = projectors.entry(from) {
                e.insert(to_t(&projection_matrix(from, m)?));
            }
        }
        Ok(Self {
            m,
            mode,
            max_num,
            v0: lift(mapped.v0),
            slope: lift(mapped.slope),
            forcing,
            nonlinearity,
            x_row: monomial_coeffs(1, 1)?,
            gram: to_t(&gram_matrix(max_num, m)?),
            projectors,
        })
    }

    fn reduce(&self, v: CoeffVector<T>) -> CoeffVector<T> {
        match self.mode {
            Mode::Oom if v.degree() > self.m => {
                let p = &self.projectors[&v.degree()];
                CoeffVector::new(p.mul_vec(v.entries())).expect("non-empty")
            }
            _ => v,
        }
    }

    fn check_len(&self, c: &CoeffVector<T>) -> Result<()> {
        if c.degree() != self.m {
            return Err(EomError::Argument(format!(
                "expected {} coefficients, got {}",
                self.m + 1,
                c.degree() + 1
            )));
        }
        Ok(())
    }

    /// `(z', z)` for the unknown `c`. In OOM mode each antiderivative is
    /// projected back to degree `m`.
    pub fn chain(&self, c: &CoeffVector<T>) -> (CoeffVector<T>, CoeffVector<T>) {
        match self.mode {
            Mode::Eom => antiderivative_chain(c, &self.v0, &self.slope),
            Mode::Oom => {
                let g = shift(&self.reduce(antiderivative_coeffs(c)), &self.slope);
                let h = shift(&self.reduce(antiderivative_coeffs(&g)), &self.v0);
                (g, h)
            }
        }
    }

    /// Coefficients of the residual at degree `max_num`.
    pub fn residual_row(&self, c: &CoeffVector<T>) -> Result<CoeffVector<T>> {
        self.check_len(c)?;
        let (g, h) = self.chain(c);
        let s = match self.mode {
            Mode::Eom => nonlinearity_coeffs(&self.nonlinearity, &h)?,
            Mode::Oom => self.projected_nonlinearity(&self.nonlinearity, &h)?,
        };
        let terms = [
            self.reduce(product_row(c, &self.x_row)),
            g.scale(&T::from_i64(2)),
            self.reduce(product_row(&s, &self.forcing)),
        ];
        let mut out = CoeffVector::zeros(self.max_num);
        for t in terms {
            let gap = self.max_num - t.degree();
            out = out.add(&elevate_coeffs(&t, gap))?;
        }
        Ok(out)
    }

    fn projected_nonlinearity(&self, nl: &Nonlinearity<T>, h: &CoeffVector<T>) -> Result<CoeffVector<T>> {
        match nl {
            Nonlinearity::Constant => Ok(CoeffVector::constant(0, T::one())),
            Nonlinearity::Power { p, scale } => {
                let mut acc = h.clone();
                for _ in 1..*p {
                    acc = self.reduce(product_row(&acc, h));
                }
                Ok(acc.scale(scale))
            }
            Nonlinearity::Series { coeffs, .. } => {
                let q = h.degree();
                let mut acc = CoeffVector::constant(q, coeffs[0].clone()).add(&h.scale(&coeffs[1]))?;
                let mut power = h.clone();
                for e in &coeffs[2..] {
                    power = self.reduce(product_row(&power, h));
                    acc = acc.add(&power.scale(e))?;
                }
                Ok(acc)
            }
        }
    }

    /// `R(c) Q(max_num, m)`: the Galerkin equations.
    pub fn reduced(&self, c: &CoeffVector<T>) -> Result<Vec<T>> {
        Ok(self.gram.vec_mul(self.residual_row(c)?.entries()))
    }
}

impl ResidualSystem<f64> {
    /// Forward-difference Jacobian of [`ResidualSystem::reduced`] at `c`,
    /// given `r0 = reduced(c)`.
    pub fn jacobian(&self, c: &CoeffVector<f64>, r0: &[f64]) -> Result<Matrix<f64>> {
        let n = self.m + 1;
        let mut jac = Matrix::zeros(n, n);
        let root_eps = f64::EPSILON.sqrt();
        for j in 0..n {
            let mut shifted = c.entries().to_vec();
            let step = root_eps * shifted[j].abs().max(1.0);
            shifted[j] += step;
            let step = shifted[j] - c.entries()[j];
            let r = self.reduced(&CoeffVector::new(shifted)?)?;
            for i in 0..n {
                jac[(i, j)] = (r[i] - r0[i]) / step;
            }
        }
        Ok(jac)
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Outcome of [`newton_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub c: CoeffVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

const MIN_DAMPING: f64 = 1.0 / 1024.0;

/// Newton iteration on `R*(c) = 0`. Stops when `|R*|_inf < tol` or the step
/// max-norm drops below `tol`. A full step that does not lower `|R*|_inf` is
/// halved, at most ten times.
pub fn newton_solve(sys: &ResidualSystem<f64>, c0: &CoeffVector<f64>, tol: f64, max_iter: usize) -> Result<NewtonResult> {
    let mut c = c0.clone();
    let mut r = sys.reduced(&c)?;
    let mut norm = max_norm(&r);
    let mut best = (norm, c.clone());
    for it in 0..max_iter {
        if norm < tol {
            return Ok(NewtonResult {
                c,
                iterations: it,
                residual: norm,
            });
        }
        let jac = sys.jacobian(&c, &r)?;
        let delta = jac
            .solve_vec(&r)
            .map_err(|e| EomError::Singular(format!("Newton Jacobian at iteration {it} (|R*| = {norm:e}): {e}")))?;
        let mut lambda = 1.0;
        let (next, r_next, norm_next) = loop {
            let trial: Vec<f64> = c.entries().iter().zip(&delta).map(|(x, d)| x - lambda * d).collect();
            let trial = CoeffVector::new(trial)?;
            let r_trial = sys.reduced(&trial)?;
            let n_trial = max_norm(&r_trial);
            if (n_trial.is_finite() && n_trial < norm) || lambda < MIN_DAMPING {
                break (trial, r_trial, n_trial);
            }
            lambda *= 0.5;
        };
        if !norm_next.is_finite() {
            break;
        }
        c = next;
        r = r_next;
        norm = norm_next;
        if norm < best.0 || !best.0.is_finite() {
            best = (norm, c.clone());
        }
        if lambda * max_norm(&delta) < tol || norm < tol {
            return Ok(NewtonResult {
                c,
                iterations: it + 1,
                residual: norm,
            });
        }
    }
    Err(EomError::NonConvergence {
        iterations: max_iter,
        residual: best.0,
        best: best.1.into_entries(),
    })
}

/// Everything about a problem that does not depend on `m` or the mode.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: ProblemSpec,
    pub mapped: MappedProblem,
    pub fit: Option<SeriesFit>,
}

impl Prepared {
    pub fn new(problem: &ProblemSpec) -> Result<Self> {
        problem.validate()?;
        let truncation = determine_m(problem)?;
        let mapped = map_domain(problem, truncation)?;
        let fit = if problem.g_kind.needs_series() {
            let interval = match problem.approx_interval {
                Some(iv) => iv,
                None => default_interval(problem, truncation)?,
            };
            Some(SeriesFit::new(problem.g_kind, truncation, problem.series_degree, interval)?)
        } else {
            None
        };
        Ok(Self {
            problem: problem.clone(),
            mapped,
            fit,
        })
    }

    pub fn truncation(&self) -> f64 {
        self.mapped.truncation
    }

    pub fn system(&self, m: usize, mode: Mode) -> Result<ResidualSystem<f64>> {
        ResidualSystem::assemble(&self.mapped, m, mode, self.fit.as_ref())
    }

    /// `m = 2` starting point: every entry equals `v''(0) = -M f(0) g(a) / 3`.
    pub fn initial_guess(&self, m: usize) -> CoeffVector<f64> {
        let v = self.mapped.truncation * self.problem.second_derivative_at_origin();
        CoeffVector::constant(m, if v.is_finite() { v } else { 0.0 })
    }

    /// Solve at `config.m`, starting from `guess` elevated to that degree if
    /// given, else from [`Prepared::initial_guess`].
    pub fn solve_from(&self, config: &SolveConfig, guess: Option<&CoeffVector<f64>>) -> Result<Solution> {
        config.validate()?;
        let start = std::time::Instant::now();
        let sys = self.system(config.m, config.mode)?;
        let c0 = match guess {
            Some(g) if g.degree() <= config.m => elevate_coeffs(g, config.m - g.degree()),
            Some(g) => {
                return Err(EomError::Argument(format!(
                    "initial guess degree {} exceeds m = {}",
                    g.degree(),
                    config.m
                )))
            }
            None => self.initial_guess(config.m),
        };
        let res = newton_solve(&sys, &c0, config.newton_tol, config.newton_max_iter)?;
        let (_, h) = sys.chain(&res.c);
        let dh = derivative_coeffs(&h)?;
        let d2h = derivative_coeffs(&dh)?;
        Ok(Solution {
            problem: self.problem.name.clone(),
            mode: config.mode,
            m: config.m,
            truncation: self.mapped.truncation,
            max_num: sys.max_num,
            c: res.c,
            h,
            dh,
            d2h,
            newton_iters: res.iterations,
            final_residual_norm: res.residual,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Solve at `config.m`; with continuation, every degree from 2 upward is
    /// solved in turn and seeds the next.
    pub fn solve(&self, config: &SolveConfig) -> Result<Solution> {
        config.validate()?;
        if !config.continuation {
            return self.solve_from(config, None);
        }
        let mut prev: Option<Solution> = None;
        for m in 2..=config.m {
            let cfg = SolveConfig { m, ..*config };
            prev = Some(self.solve_from(&cfg, prev.as_ref().map(|s| &s.c))?);
        }
        Ok(prev.expect("m >= 2"))
    }
}

/// Padded range of the reference solution, in `y` units.
fn default_interval(problem: &ProblemSpec, truncation: f64) -> Result<(f64, f64)> {
    let (lo, hi) = reference_for(problem, truncation)?.range(400);
    let pad = 0.1 * (hi - lo).max(1e-3);
    Ok((lo - pad, hi + pad))
}

pub fn solve(problem: &ProblemSpec, config: &SolveConfig) -> Result<Solution> {
    Prepared::new(problem)?.solve(config)
}

/// A converged approximation `y(x) = M z(x/M)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub problem: String,
    pub mode: Mode,
    pub m: usize,
    #[serde(rename = "M")]
    pub truncation: f64,
    pub max_num: usize,
    /// The unknown: `z''` at degree `m`.
    pub c: CoeffVector<f64>,
    /// `z`; degree `m+2` in EOM mode and `m` in OOM mode.
    pub h: CoeffVector<f64>,
    /// `z'`, differentiated exactly from `h`.
    pub dh: CoeffVector<f64>,
    /// `z''`, differentiated exactly from `h`.
    pub d2h: CoeffVector<f64>,
    pub newton_iters: usize,
    pub final_residual_norm: f64,
    pub wall_time_ms: f64,
}

impl Solution {
    fn at(v: &CoeffVector<f64>, s: f64) -> f64 {
        crate::basis::de_casteljau(v.entries(), s)
    }

    pub fn y_eval(&self, x: f64) -> f64 {
        self.truncation * Self::at(&self.h, x / self.truncation)
    }

    pub fn y_deriv(&self, x: f64) -> f64 {
        Self::at(&self.dh, x / self.truncation)
    }

    pub fn y_second(&self, x: f64) -> f64 {
        Self::at(&self.d2h, x / self.truncation) / self.truncation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::poly_eval;
    use crate::problem::lookup;
    use crate::scalar::Rational;
    use approx::assert_abs_diff_eq;
    use eom_testkit::{integrate, SplitMix};
    use num_traits::Zero;

    fn cv(v: &[f64]) -> CoeffVector<f64> {
        CoeffVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mapping_examples() {
        let p = lookup("lane-emden-p1").unwrap();
        let mp = map_domain(&p, 2.0).unwrap();
        assert_eq!((mp.v0, mp.slope), (0.5, 0.0));
        let mp = map_domain(&lookup("lane-emden-exp").unwrap(), 5.0).unwrap();
        assert_eq!((mp.v0, mp.slope), (0.0, 0.0));
        assert!(map_domain(&p, 0.0).is_err());
        // y = x^2 => v(s) = M s^2, v'' = 2M = M y''.
        let m = 3.0;
        let v = |s: f64| (s * m).powi(2) / m;
        let fd = eom_testkit::central_diff(|s| eom_testkit::central_diff(v, s, 1e-4), 0.4, 1e-4);
        assert_abs_diff_eq!(fd / m, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn antiderivative_examples() {
        let (_, h) = antiderivative_chain(&CoeffVector::<f64>::zeros(3), &1.0, &0.0);
        assert!(h.entries().iter().all(|&x| x == 1.0));
        let (_, h) = antiderivative_chain(&CoeffVector::<f64>::zeros(3), &0.0, &1.0);
        for s in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(poly_eval(&h, s).unwrap(), s, epsilon = 1e-15);
        }
        let m = 6f64.sqrt();
        let c = CoeffVector::constant(2, -m / 3.0);
        let (_, h) = antiderivative_chain(&c, &(1.0 / m), &0.0);
        for s in [0.0, 0.25, 0.8, 1.0] {
            assert_abs_diff_eq!(poly_eval(&h, s).unwrap(), (1.0 - s * s) / m, epsilon = 1e-15);
        }
    }

    #[test]
    fn forcing_examples() {
        let k = forcing_coeffs::<f64>(FKind::ConstantOne, &1.0);
        assert_eq!(k.entries(), &[0.0, 1.0]);
        let k = forcing_coeffs::<f64>(FKind::ConstantOne, &3.0);
        assert_eq!(k.entries(), &[0.0, 3.0]);
        let k = forcing_coeffs::<f64>(FKind::PolyMinus2TwoX2Plus3, &1.0);
        assert_eq!(k.degree(), 3);
        assert_abs_diff_eq!(poly_eval(&k, 0.5).unwrap(), -3.5, epsilon = 1e-14);
        let m = 1.7;
        let k = forcing_coeffs::<f64>(FKind::PolyMinus2TwoX2Plus3, &m);
        for s in [0.1, 0.6, 0.9] {
            let want = s * m * FKind::PolyMinus2TwoX2Plus3.eval(s * m);
            assert_abs_diff_eq!(poly_eval(&k, s).unwrap(), want, epsilon = 1e-12);
        }
    }

    #[test]
    fn nonlinearity_examples() {
        let mut rng = SplitMix::new(7);
        let h = cv(&(0..5).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<_>>());
        let id = Nonlinearity::<f64>::new(GKind::PowerInt(1), 1.0, None).unwrap();
        assert_eq!(nonlinearity_coeffs(&id, &h).unwrap(), h);
        assert_eq!(id.degree_for(5), 5);
        let one = Nonlinearity::<f64>::new(GKind::PowerInt(0), 1.0, None).unwrap();
        assert_eq!(nonlinearity_coeffs(&one, &h).unwrap().entries(), &[1.0]);
        let p5 = Nonlinearity::<f64>::new(GKind::PowerInt(5), 1.0, None).unwrap();
        let s = nonlinearity_coeffs(&p5, &h).unwrap();
        assert_eq!(s.degree(), 20);
        for i in 0..20 {
            let x = i as f64 / 19.0;
            assert_abs_diff_eq!(poly_eval(&s, x).unwrap(), poly_eval(&h, x).unwrap().powi(5), epsilon = 1e-10);
        }
        assert!(Nonlinearity::<f64>::new(GKind::PowerInt(-1), 1.0, None).is_err());
        assert!(Nonlinearity::<f64>::new(GKind::Exp, 1.0, None).is_err());
    }

    #[test]
    fn max_num_bookkeeping() {
        let p = lookup("lane-emden-p5").unwrap();
        let mp = map_domain(&p, 2.0).unwrap();
        let sys = ResidualSystem::<f64>::assemble(&mp, 3, Mode::Eom, None).unwrap();
        assert_eq!(sys.max_num, 26);
        let p0 = map_domain(&lookup("lane-emden-p0").unwrap(), 2.0).unwrap();
        let sys = ResidualSystem::<f64>::assemble(&p0, 3, Mode::Eom, None).unwrap();
        assert_eq!(sys.max_num, 4);
        let sys = ResidualSystem::<f64>::assemble(&mp, 3, Mode::Oom, None).unwrap();
        assert_eq!(sys.max_num, 3);
    }

    #[test]
    fn exact_rational_zero_residual() {
        let mp = map_domain(&lookup("lane-emden-p0").unwrap(), 2.0).unwrap();
        let sys = ResidualSystem::<Rational>::assemble(&mp, 2, Mode::Eom, None).unwrap();
        let c = CoeffVector::constant(2, Rational::from_ratio(-2, 3));
        assert!(sys.residual_row(&c).unwrap().entries().iter().all(Zero::is_zero));
        assert!(sys.reduced(&c).unwrap().iter().all(Zero::is_zero));
    }

    #[test]
    fn zero_chain_reduces_to_source() {
        let mp = map_domain(&lookup("lane-emden-exp").unwrap(), 2.0).unwrap();
        let fit = SeriesFit::new(GKind::Exp, 2.0, 6, (-1.0, 0.1)).unwrap();
        let sys = ResidualSystem::<f64>::assemble(&mp, 3, Mode::Eom, Some(&fit)).unwrap();
        let r = sys.residual_row(&CoeffVector::zeros(3)).unwrap();
        // R(s) = s M f(sM) g(0) = 2 s * e0.
        for s in [0.0, 0.4, 1.0] {
            assert_abs_diff_eq!(poly_eval(&r, s).unwrap(), 2.0 * s * fit.coeffs[0], epsilon = 1e-12);
        }
    }

    fn pointwise_residual(mp: &MappedProblem, c: &CoeffVector<f64>, s: f64) -> f64 {
        let (g, h) = antiderivative_chain(c, &mp.v0, &mp.slope);
        let m = mp.truncation;
        s * poly_eval(c, s).unwrap()
            + 2.0 * poly_eval(&g, s).unwrap()
            + s * m * mp.f_kind.eval(s * m) * mp.g_kind.eval(m * poly_eval(&h, s).unwrap())
    }

    #[test]
    fn reduced_matches_quadrature() {
        let mp = map_domain(&lookup("lane-emden-p1").unwrap(), std::f64::consts::PI).unwrap();
        let mut rng = SplitMix::new(11);
        for m in [2, 4, 5] {
            let sys = ResidualSystem::<f64>::assemble(&mp, m, Mode::Eom, None).unwrap();
            let c = cv(&(0..=m).map(|_| rng.uniform(-2.0, 2.0)).collect::<Vec<_>>());
            let red = sys.reduced(&c).unwrap();
            for (j, rj) in red.iter().enumerate() {
                let q = integrate(
                    |s| pointwise_residual(&mp, &c, s) * eom_testkit::bernstein(j, m, s),
                    0.0,
                    1.0,
                    1e-14,
                );
                assert_abs_diff_eq!(*rj, q, epsilon = 1e-10);
            }
        }
        // Nonlinear power and polynomial forcing.
        let mp = map_domain(&lookup("lane-emden-p5").unwrap(), 2.5).unwrap();
        let lin = map_domain(&lookup("emden-fowler-linear").unwrap(), 1.0).unwrap();
        for mp in [mp, lin] {
            let sys = ResidualSystem::<f64>::assemble(&mp, 3, Mode::Eom, None).unwrap();
            let c = cv(&[-0.3, 0.2, -0.5, 0.1]);
            for (j, rj) in sys.reduced(&c).unwrap().iter().enumerate() {
                let q = integrate(
                    |s| pointwise_residual(&mp, &c, s) * eom_testkit::bernstein(j, 3, s),
                    0.0,
                    1.0,
                    1e-14,
                );
                assert_abs_diff_eq!(*rj, q, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn reduction_is_linear() {
        let mp = map_domain(&lookup("lane-emden-p5").unwrap(), 2.0).unwrap();
        let sys = ResidualSystem::<f64>::assemble(&mp, 3, Mode::Eom, None).unwrap();
        let r1 = sys.residual_row(&cv(&[0.1, -0.2, 0.3, 0.4])).unwrap();
        let r2 = sys.residual_row(&cv(&[-0.5, 0.2, 0.0, 0.1])).unwrap();
        let alpha = 1.75;
        let combo = r1.scale(&alpha).add(&r2).unwrap();
        let lhs = sys.gram.vec_mul(combo.entries());
        let a = sys.gram.vec_mul(r1.entries());
        let b = sys.gram.vec_mul(r2.entries());
        for i in 0..lhs.len() {
            assert_abs_diff_eq!(lhs[i], alpha * a[i] + b[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn jacobian_matches_secant() {
        let prep = Prepared::new(&lookup("lane-emden-sinh").unwrap()).unwrap();
        let sys = prep.system(4, Mode::Eom).unwrap();
        let mut rng = SplitMix::new(3);
        for _ in 0..5 {
            let c = cv(&(0..5).map(|_| rng.uniform(-1.0, 0.0)).collect::<Vec<_>>());
            let r0 = sys.reduced(&c).unwrap();
            let jac = sys.jacobian(&c, &r0).unwrap();
            let dir: Vec<f64> = (0..5).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let t = 1e-5;
            let plus = cv(&c.entries().iter().zip(&dir).map(|(x, d)| x + t * d).collect::<Vec<_>>());
            let minus = cv(&c.entries().iter().zip(&dir).map(|(x, d)| x - t * d).collect::<Vec<_>>());
            let (rp, rm) = (sys.reduced(&plus).unwrap(), sys.reduced(&minus).unwrap());
            let jd = jac.mul_vec(&dir);
            for i in 0..5 {
                let secant = (rp[i] - rm[i]) / (2.0 * t);
                assert!((jd[i] - secant).abs() <= 1e-4 * secant.abs().max(1e-3), "{} vs {}", jd[i], secant);
            }
        }
    }

    #[test]
    fn initial_guess_examples() {
        let p1 = Prepared::new(&lookup("lane-emden-p1").unwrap()).unwrap();
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(p1.truncation(), pi, epsilon = 1e-10);
        for v in p1.initial_guess(2).entries() {
            assert_abs_diff_eq!(*v, -pi / 3.0, epsilon = 1e-10);
        }
        let p0 = Prepared::new(&lookup("lane-emden-p0").unwrap()).unwrap();
        let m = p0.truncation();
        assert!(p0.initial_guess(2).entries().iter().all(|&v| (v + m / 3.0).abs() < 1e-15));
    }

    #[test]
    fn p0_exact_at_m2() {
        let sol = solve(&lookup("lane-emden-p0").unwrap(), &SolveConfig::new(2, Mode::Eom)).unwrap();
        assert!(sol.newton_iters <= 1);
        let m = sol.truncation;
        for i in 0..100 {
            let x = m * i as f64 / 99.0;
            assert_abs_diff_eq!(sol.y_eval(x), 1.0 - x * x / 6.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sol.y_second(0.7), -1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn affine_problems_converge_fast() {
        for name in ["lane-emden-p0", "lane-emden-p1", "emden-fowler-linear"] {
            let prep = Prepared::new(&lookup(name).unwrap()).unwrap();
            let mut prev: Option<Solution> = None;
            for m in 2..=8 {
                let sol = prep.solve_from(&SolveConfig::new(m, Mode::Eom), prev.as_ref().map(|s| &s.c)).unwrap();
                assert!(sol.newton_iters <= 2, "{name} m={m}: {}", sol.newton_iters);
                prev = Some(sol);
            }
        }
    }

    #[test]
    fn p1_m8_close_to_sinc() {
        let sol = solve(&lookup("lane-emden-p1").unwrap(), &SolveConfig::new(8, Mode::Eom)).unwrap();
        let worst = (0..=200)
            .map(|i| sol.truncation * i as f64 / 200.0)
            .map(|x| {
                let exact = if x == 0.0 { 1.0 } else { x.sin() / x };
                (sol.y_eval(x) - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst:e}");
    }

    #[test]
    fn initial_conditions_embedded() {
        for p in crate::problem::registry() {
            let sol = solve(&p, &SolveConfig::new(4, Mode::Eom)).unwrap();
            assert_abs_diff_eq!(sol.y_eval(0.0), p.a, epsilon = 1e-10);
            let slope = eom_testkit::central_diff(|x| sol.y_eval(x), 0.0, 1e-6);
            assert_abs_diff_eq!(slope, p.b, epsilon = 1e-6);
        }
    }

    #[test]
    fn continuation_guess_is_elevation() {
        let prep = Prepared::new(&lookup("lane-emden-p5").unwrap()).unwrap();
        let s4 = prep.solve(&SolveConfig::new(4, Mode::Eom)).unwrap();
        let guess = elevate_coeffs(&s4.c, 1);
        for s in [0.0, 0.3, 0.9] {
            assert_abs_diff_eq!(poly_eval(&guess, s).unwrap(), poly_eval(&s4.c, s).unwrap(), epsilon = 1e-13);
        }
        let s5 = prep.solve_from(&SolveConfig::new(5, Mode::Eom), Some(&s4.c)).unwrap();
        assert!(s5.final_residual_norm < 1e-12);
    }

    #[test]
    fn p5_m8_converges() {
        let prep = Prepared::new(&lookup("lane-emden-p5").unwrap()).unwrap();
        let sol = prep.solve(&SolveConfig::new(8, Mode::Eom)).unwrap();
        assert!(sol.final_residual_norm < 1e-10);
    }

    #[test]
    fn eom_not_worse_than_oom_p5() {
        let prep = Prepared::new(&lookup("lane-emden-p5").unwrap()).unwrap();
        let resid = |mode| {
            let sol = prep.solve(&SolveConfig::new(6, mode)).unwrap();
            let m = sol.truncation;
            integrate(
                |x| {
                    (x * sol.y_second(x) + 2.0 * sol.y_deriv(x) + x * sol.y_eval(x).powi(5)).abs()
                },
                0.0,
                m,
                1e-12,
            )
        };
        assert!(resid(Mode::Eom) <= resid(Mode::Oom));
    }

    #[test]
    fn config_and_mode_parsing() {
        assert_eq!("EOM".parse::<Mode>().unwrap(), Mode::Eom);
        assert!("xom".parse::<Mode>().is_err());
        assert!(SolveConfig::new(1, Mode::Eom).validate().is_err());
        assert!(SolveConfig::new(3, Mode::Eom).with_tol(0.0).validate().is_err());
        let sys = Prepared::new(&lookup("lane-emden-p1").unwrap()).unwrap().system(3, Mode::Eom).unwrap();
        assert!(sys.reduced(&cv(&[1.0, 2.0])).is_err());
    }
}
