use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense square complex matrix acting on `n` qubits (`dim == 2^n`).
///
/// Serialized as `{"dim": d, "rows": [[[re, im], ...], ...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct ComplexMatrix(DMatrix<C64>);

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    rows: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(json: MatrixJson) -> Result<Self> {
        if json.rows.len() != json.dim {
            return Err(Error::DimensionMismatch {
                expected: json.dim,
                got: json.rows.len(),
            });
        }
        if let Some(row) = json.rows.iter().find(|r| r.len() != json.dim) {
            return Err(Error::DimensionMismatch {
                expected: json.dim,
                got: row.len(),
            });
        }
        let d = json.dim;
        ComplexMatrix::new(DMatrix::from_fn(d, d, |i, j| {
            let [re, im] = json.rows[i][j];
            c(re, im)
        }))
    }
}

impl From<ComplexMatrix> for MatrixJson {
    fn from(m: ComplexMatrix) -> Self {
        let d = m.dim();
        MatrixJson {
            dim: d,
            rows: (0..d)
                .map(|i| (0..d).map(|j| [m.0[(i, j)].re, m.0[(i, j)].im]).collect())
                .collect(),
        }
    }
}

pub(crate) fn qubit_count(dim: usize) -> Result<usize> {
    if dim >= 2 && dim.is_power_of_two() {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(Error::NotPowerOfTwo(dim))
    }
}

impl ComplexMatrix {
    /// Wraps a square matrix whose dimension is `2^n`, `n >= 1`.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        qubit_count(m.nrows())?;
        Ok(Self(m))
    }

    /// Unchecked constructor for internally produced matrices of valid shape.
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert!(m.nrows() == m.ncols() && m.nrows().is_power_of_two());
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_iterator(
            diag.len(),
            diag.iter().map(|&x| c(x, 0.0)),
        )))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::wrap(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::wrap(DMatrix::identity(dim, dim))
    }

    /// `|v><v|` for a (not necessarily normalized) vector.
    pub fn outer(v: &DVector<C64>) -> Result<Self> {
        Self::new(v * v.adjoint())
    }

    /// Projector onto the computational basis state with index `index`.
    pub fn basis_projector(dim: usize, index: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(index, index)] = c(1.0, 0.0);
        Self::wrap(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn as_inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self::wrap(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self::wrap(self.0.transpose())
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::wrap(self.0.kronecker(&other.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::wrap(&self.0 * c(s, 0.0))
    }

    /// `U M U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        Self::wrap(&u.0 * &self.0 * u.0.adjoint())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(M + M†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::wrap((&self.0 + self.0.adjoint()) * c(0.5, 0.0))
    }

    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim();
        Self::wrap(self.0.adjoint() * &self.0).max_abs_diff(&Self::identity(d))
    }

    pub(crate) fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            })
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix::wrap(&self.0 * &rhs.0)
    }
}
