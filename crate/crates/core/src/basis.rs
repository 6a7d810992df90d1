//! Bernstein basis: evaluation, the monomial change of basis, and the
//! degree-bookkeeping matrices (K-matrices and the increaser).

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, EomError, Result};
use crate::matrix::{Matrix, RationalMatrix};
use crate::scalar::{Rational, Scalar};

/// Largest basis degree accepted for the unknown `z''`.
pub const MAX_BASIS_DEGREE: usize = 64;

/// Coefficients of a polynomial in the degree-`m` Bernstein basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVector<T> {
    entries: Vec<T>,
}

impl<T: Scalar> CoeffVector<T> {
    /// Wrap coefficients; the degree is `entries.len() - 1`.
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if entries.is_empty() {
            return Err(EomError::Argument("a coefficient vector needs at least one entry".into()));
        }
        Ok(Self { entries })
    }

    pub fn zeros(degree: usize) -> Self {
        Self {
            entries: vec![T::zero(); degree + 1],
        }
    }

    /// The constant `value` written at `degree` (every coefficient equal).
    pub fn constant(degree: usize, value: T) -> Self {
        Self {
            entries: vec![value; degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn scale(&self, s: &T) -> Self {
        Self {
            entries: self.entries.iter().map(|v| v.clone() * s.clone()).collect(),
        }
    }

    /// Coefficient-wise sum of two vectors of equal degree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.degree() != other.degree() {
            return Err(EomError::Argument(format!(
                "degree mismatch: {} vs {}",
                self.degree(),
                other.degree()
            )));
        }
        Ok(Self {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn to_f64(&self) -> CoeffVector<f64> {
        CoeffVector {
            entries: self.entries.iter().map(Scalar::to_f64).collect(),
        }
    }
}

/// `B_{i,m}(x) = C(m,i) x^i (1-x)^(m-i)`.
pub fn eval_basis(i: usize, m: usize, x: f64) -> Result<f64> {
    if i > m {
        return Err(EomError::Argument(format!("basis index {i} exceeds degree {m}")));
    }
    check_unit_interval("x", x)?;
    Ok(f64::binomial(m, i) * x.powi(i as i32) * (1.0 - x).powi((m - i) as i32))
}

/// `psi_m(x)`, all degree-`m` basis functions at `x`.
pub fn basis_vector(m: usize, x: f64) -> Result<Vec<f64>> {
    check_unit_interval("x", x)?;
    Ok(basis_vector_unchecked(m, x))
}

/// Triangular recurrence `B_{i,k} = (1-x) B_{i,k-1} + x B_{i-1,k-1}`; stays
/// accurate for degrees where `x^i` alone would underflow.
pub(crate) fn basis_vector_unchecked(m: usize, x: f64) -> Vec<f64> {
    let mut b = vec![0.0; m + 1];
    b[0] = 1.0;
    let u = 1.0 - x;
    for k in 1..=m {
        for i in (1..=k).rev() {
            b[i] = u * b[i] + x * b[i - 1];
        }
        b[0] *= u;
    }
    b
}

/// `A_m` with `psi_m(x) = A_m T_m(x)`, where `T_m` is the monomial column.
pub fn matrix_a(m: usize) -> RationalMatrix {
    Matrix::from_fn(m + 1, m + 1, |i, j| {
        if j < i {
            Rational::from_i64(0)
        } else {
            let v = Rational::binomial(m, i) * Rational::binomial(m - i, j - i);
            if (j - i) % 2 == 1 {
                -v
            } else {
                v
            }
        }
    })
}

/// Closed-form inverse of [`matrix_a`]: entry `(i,j) = C(m-i, j-i) / C(m, j)`.
pub fn matrix_a_inv(m: usize) -> RationalMatrix {
    Matrix::from_fn(m + 1, m + 1, |i, j| {
        if j < i {
            Rational::from_i64(0)
        } else {
            Rational::binomial(m - i, j - i) / Rational::binomial(m, j)
        }
    })
}

/// `d_{i,m}`: Bernstein coefficients of `x^i` at degree `m`.
pub fn monomial_coeffs<T: Scalar>(i: usize, m: usize) -> Result<CoeffVector<T>> {
    if i > m {
        return Err(EomError::Argument(format!(
            "x^{i} is not representable at degree {m}"
        )));
    }
    // Row i of A^{-1}; C(m-i, j-i) / C(m, j) == C(j, i) / C(m, i).
    let denom = T::binomial(m, i);
    Ok(CoeffVector {
        entries: (0..=m)
            .map(|j| {
                if j < i {
                    T::zero()
                } else {
                    T::binomial(j, i) / denom.clone()
                }
            })
            .collect(),
    })
}

/// The K-matrices `[I_m | 0]` and `[0 | I_m]`, each `m x (m+pad)`.
pub fn k_matrices(m: usize, pad: usize) -> Result<(RationalMatrix, RationalMatrix)> {
    if m == 0 {
        return Err(EomError::Argument("K-matrices need m >= 1".into()));
    }
    let one = Rational::from_i64(1);
    let zero = Rational::from_i64(0);
    let left = Matrix::from_fn(m, m + pad, |i, j| if i == j { one.clone() } else { zero.clone() });
    let right = Matrix::from_fn(m, m + pad, |i, j| {
        if j == i + pad {
            one.clone()
        } else {
            zero.clone()
        }
    });
    Ok((left, right))
}

/// Increaser `E_{m,i} = A_m K_{m+1,i} A_{m+i}^{-1}`, so `psi_m = E_{m,i} psi_{m+i}`.
pub fn increaser(m: usize, gap: usize) -> RationalMatrix {
    let (k, _) = k_matrices(m + 1, gap).expect("m + 1 >= 1");
    matrix_a(m)
        .matmul(&k)
        .and_then(|ak| ak.matmul(&matrix_a_inv(m + gap)))
        .expect("conformable by construction")
}

/// `E_{m,i}^T v`: the same polynomial written at degree `m + gap`.
pub fn elevate_coeffs<T: Scalar>(v: &CoeffVector<T>, gap: usize) -> CoeffVector<T> {
    if gap == 0 {
        return v.clone();
    }
    let m = v.degree();
    let n = m + gap;
    let mut out = vec![T::zero(); n + 1];
    // Elevation is multiplication by the constant 1 = sum_l B_{l,gap}.
    for (j, vj) in v.entries.iter().enumerate() {
        if vj.is_zero() {
            continue;
        }
        let w = vj.clone() * T::binomial(m, j);
        for l in 0..=gap {
            out[j + l] = out[j + l].clone() + w.clone() * T::binomial(gap, l);
        }
    }
    for (k, o) in out.iter_mut().enumerate() {
        *o = o.clone() / T::binomial(n, k);
    }
    CoeffVector { entries: out }
}

/// `v^T psi_deg(x)` by the de Casteljau recurrence.
pub fn poly_eval(v: &CoeffVector<f64>, x: f64) -> Result<f64> {
    check_unit_interval("x", x)?;
    Ok(de_casteljau(v.entries(), x))
}

pub(crate) fn de_casteljau(coeffs: &[f64], x: f64) -> f64 {
    let mut work = coeffs.to_vec();
    let u = 1.0 - x;
    let n = work.len();
    for r in 1..n {
        for i in 0..n - r {
            work[i] = u * work[i] + x * work[i + 1];
        }
    }
    work[0]
}
