//! Exact operational matrices for the Bernstein basis: differentiation,
//! integration, products, powers, truncated series and the Galerkin matrix.
//!
//! Every degree-raising operation changes the output basis so the result is
//! represented without approximation error. The `*_row` helpers apply the
//! same operators directly to coefficient vectors; they are what the solver
//! calls at run time, and the explicit matrices are what the tests check them
//! against.

use num_bigint::{BigInt, BigUint};

use crate::basis::{elevate_coeffs, monomial_coeffs, k_matrices, CoeffVector};
use crate::error::{EomError, Result};
use crate::matrix::{Matrix, RationalMatrix};
use crate::quadrature::{legendre_with_derivative, GaussLegendre};
use crate::scalar::{f64_to_ratio, factorial_exact, Rational, Scalar};

/// Largest truncated-series degree accepted by [`best_series_coeffs`].
pub const MAX_SERIES_DEGREE: usize = 30;

/// `D_m = m (K'^T_{m,1} - K^T_{m,1})`, with `d/dx psi_m = D_m psi_{m-1}`.
pub fn diff_matrix(m: usize) -> Result<RationalMatrix> {
    if m == 0 {
        return Err(EomError::Argument(
            "differentiation needs m >= 1; a degree-0 derivative leaves the basis".into(),
        ));
    }
    let (k, kp) = k_matrices(m, 1)?;
    kp.transpose()
        .sub(&k.transpose())
        .map(|d| d.scale(&Rational::from_i64(m as i64)))
}

/// `P_m`, `(m+1) x (m+2)`, with `int_0^x psi_m = P_m psi_{m+1}(x)`.
pub fn int_matrix(m: usize) -> RationalMatrix {
    let w = Rational::from_ratio(1, m as i64 + 1);
    Matrix::from_fn(m + 1, m + 2, |i, j| {
        if j > i {
            w.clone()
        } else {
            Rational::from_i64(0)
        }
    })
}

/// Coefficients of the derivative: `(D_m^T v)` written without the matrix.
pub fn derivative_coeffs<T: Scalar>(v: &CoeffVector<T>) -> Result<CoeffVector<T>> {
    let m = v.degree();
    if m == 0 {
        return Err(EomError::Argument("cannot differentiate a degree-0 vector".into()));
    }
    let e = v.entries();
    let mm = T::from_i64(m as i64);
    CoeffVector::new(
        (0..m)
            .map(|i| mm.clone() * (e[i + 1].clone() - e[i].clone()))
            .collect(),
    )
}

/// Coefficients of the antiderivative vanishing at 0: `P_m^T v`.
pub fn antiderivative_coeffs<T: Scalar>(v: &CoeffVector<T>) -> CoeffVector<T> {
    let m = v.degree();
    let w = T::from_ratio(1, m as i64 + 1);
    let mut out = Vec::with_capacity(m + 2);
    let mut acc = T::zero();
    out.push(T::zero());
    for c in v.entries() {
        acc = acc + c.clone();
        out.push(acc.clone() * w.clone());
    }
    CoeffVector::new(out).expect("non-empty")
}

/// `a_{i,j,m,n} = C(m,i) C(n,j) / C(m+n,i+j)`, so that
/// `B_{i,m} B_{j,n} = a_{i,j,m,n} B_{i+j,m+n}`.
pub fn product_coeff<T: Scalar>(i: usize, j: usize, m: usize, n: usize) -> T {
    T::binomial(m, i) * T::binomial(n, j) / T::binomial(m + n, i + j)
}

/// Which side of the product identity a [`ProductMatrix`] encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductForm {
    /// `c^T psi_m psi_n^T = psi_{m+n}^T C~`, shape `(m+n+1) x (n+1)`.
    Tilde,
    /// `psi_n psi_m^T c = C^ psi_{m+n}`, shape `(n+1) x (m+n+1)`.
    Hat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductMatrix<T> {
    pub matrix: Matrix<T>,
    /// Degree of the multiplying vector `c`.
    pub left_degree: usize,
    /// Degree of the basis being multiplied.
    pub right_degree: usize,
    pub form: ProductForm,
}

impl<T: Scalar> ProductMatrix<T> {
    pub fn transpose(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
            left_degree: self.left_degree,
            right_degree: self.right_degree,
            form: match self.form {
                ProductForm::Tilde => ProductForm::Hat,
                ProductForm::Hat => ProductForm::Tilde,
            },
        }
    }
}

/// `C~_{m,n}` for the vector `c` of degree `m`.
pub fn product_tilde<T: Scalar>(c: &CoeffVector<T>, n: usize) -> ProductMatrix<T> {
    let m = c.degree();
    let e = c.entries();
    let matrix = Matrix::from_fn(m + n + 1, n + 1, |i, j| {
        if i < j || i > j + m {
            T::zero()
        } else {
            e[i - j].clone() * product_coeff::<T>(i - j, j, m, n)
        }
    });
    ProductMatrix {
        matrix,
        left_degree: m,
        right_degree: n,
        form: ProductForm::Tilde,
    }
}

/// `C^_{n,m} = C~_{m,n}^T`.
pub fn product_hat<T: Scalar>(c: &CoeffVector<T>, n: usize) -> ProductMatrix<T> {
    product_tilde(c, n).transpose()
}

/// Bernstein coefficients of the product `(u^T psi)(v^T psi)`; equal to
/// `u^T product_hat(v, deg u)` without building the matrix.
pub fn product_row<T: Scalar>(u: &CoeffVector<T>, v: &CoeffVector<T>) -> CoeffVector<T> {
    let (n, m) = (u.degree(), v.degree());
    let mut out = vec![T::zero(); n + m + 1];
    let vs: Vec<T> = v
        .entries()
        .iter()
        .enumerate()
        .map(|(j, vj)| vj.clone() * T::binomial(m, j))
        .collect();
    for (i, ui) in u.entries().iter().enumerate() {
        if ui.is_zero() {
            continue;
        }
        let w = ui.clone() * T::binomial(n, i);
        for (j, vj) in vs.iter().enumerate() {
            out[i + j] = out[i + j].clone() + w.clone() * vj.clone();
        }
    }
    for (k, o) in out.iter_mut().enumerate() {
        *o = o.clone() / T::binomial(n + m, k);
    }
    CoeffVector::new(out).expect("non-empty")
}

/// `c^T prod_{i=1}^{p-1} C^_{i m, m}`: coefficients of `(c^T psi_m)^p` at
/// degree `p m`.
pub fn power_row<T: Scalar>(c: &CoeffVector<T>, p: i64) -> Result<CoeffVector<T>> {
    if p < 1 {
        return Err(EomError::Argument(format!("power must be >= 1, got {p}")));
    }
    let mut acc = c.clone();
    for _ in 1..p {
        acc = product_row(&acc, c);
    }
    Ok(acc)
}

/// Galerkin matrix `Q(M, m)` with entries `int_0^1 B_{i,M} B_{j,m} dx`
/// `= C(M,i) C(m,j) (i+j)! (M+m-i-j)! / (M+m+1)!`.
pub fn gram_matrix(big: usize, small: usize) -> Result<RationalMatrix> {
    if small > big {
        return Err(EomError::Argument(format!(
            "gram matrix needs big degree >= small degree, got {big} < {small}"
        )));
    }
    let total = big + small;
    let fact: Vec<BigUint> = (0..=total + 1).map(factorial_exact).collect();
    let denom = BigInt::from(fact[total + 1].clone());
    Ok(Matrix::from_fn(big + 1, small + 1, |i, j| {
        let num = crate::scalar::binomial_exact(big, i)
            * crate::scalar::binomial_exact(small, j)
            * &fact[i + j]
            * &fact[total - i - j];
        Rational::new(BigInt::from(num), denom.clone())
    }))
}

/// Exact monomial Gram matrix `U = int_a^b t_N t_N^T dx` for rational bounds.
pub fn moment_matrix(n: usize, a: &Rational, b: &Rational) -> RationalMatrix {
    // U_{ij} = (b^{i+j+1} - a^{i+j+1}) / (i+j+1)
    let mut pa = vec![Rational::from_i64(1)];
    let mut pb = vec![Rational::from_i64(1)];
    for k in 1..=2 * n + 1 {
        pa.push(pa[k - 1].clone() * a.clone());
        pb.push(pb[k - 1].clone() * b.clone());
    }
    Matrix::from_fn(n + 1, n + 1, |i, j| {
        let k = i + j + 1;
        (pb[k].clone() - pa[k].clone()) / Rational::from_i64(k as i64)
    })
}

/// Monomial coefficients `e` of the best `L^2[a,b]` polynomial approximation
/// of degree `n` to `f`, i.e. the solution of `e^T U = int_a^b f t_N^T`.
///
/// The projection is computed in the Legendre basis of `[a, b]` (Gauss-Legendre
/// coefficients) and converted to monomials in exact arithmetic. This is the
/// same polynomial the normal equations define, without pushing quadrature
/// noise through `U^{-1}`, whose condition number grows like a Hilbert
/// matrix.
pub fn best_series_coeffs<F>(f: F, n: usize, a: f64, b: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    if n > MAX_SERIES_DEGREE {
        return Err(EomError::Validation(format!(
            "series degree {n} exceeds the limit of {MAX_SERIES_DEGREE}"
        )));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(EomError::Argument(format!("need a finite interval with a < b, got [{a}, {b}]")));
    }
    let order = (2 * n + 2).max(96);
    let rule = GaussLegendre::cached(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let samples: Vec<(f64, f64, f64)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let x = mid + half * t;
            (t, w, f(x))
        })
        .collect();
    if let Some(&(t, _, _)) = samples.iter().find(|s| !s.2.is_finite()) {
        return Err(EomError::Numeric {
            x: mid + half * t,
            context: "integrand of the series projection".into(),
        });
    }
    // alpha_k = (2k+1)/2 int_{-1}^{1} f P_k dt
    let alpha: Vec<f64> = (0..=n)
        .map(|k| {
            let s: f64 = samples
                .iter()
                .map(|&(t, w, fx)| w * fx * legendre_with_derivative(k, t).0)
                .sum();
            s * (2 * k + 1) as f64 / 2.0
        })
        .collect();

    // P_k(t) with t = (2x - (a+b)) / (b-a), expanded in powers of x exactly.
    let to_q = |v: f64, what: &str| {
        f64_to_ratio(v).ok_or_else(|| EomError::Numeric {
            x: v,
            context: format!("{what} is not finite"),
        })
    };
    let qa = to_q(a, "a")?;
    let qb = to_q(b, "b")?;
    let two = Rational::from_i64(2);
    let scale = two.clone() / (qb.clone() - qa.clone());
    let shift = -(qa.clone() + qb.clone()) / (qb - qa);
    // t as a polynomial in x: [shift, scale]
    let t_poly = vec![shift, scale];
    let mut p_prev = vec![Rational::from_i64(1)];
    let mut p_cur = t_poly.clone();
    let mut e = vec![Rational::from_i64(0); n + 1];
    for (k, ak) in alpha.iter().enumerate() {
        let ak = to_q(*ak, "legendre coefficient")?;
        let pk: &Vec<Rational> = match k {
            0 => &p_prev,
            _ => &p_cur,
        };
        for (d, c) in pk.iter().enumerate() {
            e[d] = e[d].clone() + ak.clone() * c.clone();
        }
        if k >= 1 && k < n {
            // (k+1) P_{k+1} = (2k+1) t P_k - k P_{k-1}
            let kk = k as i64;
            let mut next = vec![Rational::from_i64(0); k + 2];
            for (d, c) in p_cur.iter().enumerate() {
                let v = Rational::from_i64(2 * kk + 1) * c.clone();
                next[d] = next[d].clone() + v.clone() * t_poly[0].clone();
                next[d + 1] = next[d + 1].clone() + v * t_poly[1].clone();
            }
            for (d, c) in p_prev.iter().enumerate() {
                next[d] = next[d].clone() - Rational::from_i64(kk) * c.clone();
            }
            for v in next.iter_mut() {
                *v = v.clone() / Rational::from_i64(kk + 1);
            }
            p_prev = std::mem::replace(&mut p_cur, next);
        }
    }
    Ok(e.iter().map(Scalar::to_f64).collect())
}

/// Row of the series operational matrix: coefficients at degree `q N` of
/// `sum_{i=0}^{N} e_i (h^T psi_q)^i`, where `q = deg h`.
pub fn series_row<T: Scalar>(e: &[T], h: &CoeffVector<T>, n: usize) -> Result<CoeffVector<T>> {
    if n < 2 {
        return Err(EomError::Argument(format!("series degree must be >= 2, got {n}")));
    }
    if e.len() != n + 1 {
        return Err(EomError::Argument(format!(
            "expected {} series coefficients, got {}",
            n + 1,
            e.len()
        )));
    }
    let q = h.degree();
    if q < 1 {
        return Err(EomError::Argument("series argument must have degree >= 1".into()));
    }
    let top = q * n;
    let mut acc = monomial_coeffs::<T>(0, top)?.scale(&e[0]);
    acc = acc.add(&elevate_coeffs(h, q * (n - 1)).scale(&e[1]))?;
    let mut power = h.clone();
    for (i, ei) in e.iter().enumerate().skip(2) {
        power = product_row(&power, h);
        if ei.is_zero() {
            continue;
        }
        acc = acc.add(&elevate_coeffs(&power, q * (n - i)).scale(ei))?;
    }
    Ok(acc)
}

/// Linear map sending degree-`from` coefficients to their `L^2` best
/// degree-`to` representation: `G_to^{-1} Q(from, to)^T`.
pub fn projection_matrix(from: usize, to: usize) -> Result<RationalMatrix> {
    if to >= from {
        return Err(EomError::Argument(format!(
            "projection target {to} must be below the source degree {from}"
        )));
    }
    let g = gram_matrix(to, to)?;
    let q = gram_matrix(from, to)?;
    g.solve(&q.transpose())
        .map_err(|e| EomError::Singular(format!("gram matrix of degree {to}: {e}")))
}

/// L2-best degree-`m` representation of `v`.
pub fn project_to_degree<T: Scalar>(v: &CoeffVector<T>, m: usize) -> Result<CoeffVector<T>> {
    let p = projection_matrix(v.degree(), m)?;
    let p: Matrix<T> = Matrix::from_fn(p.rows(), p.cols(), |i, j| T::from_rational(&p[(i, j)]));
    CoeffVector::new(p.mul_vec(v.entries()))
}
