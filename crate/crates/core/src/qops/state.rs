use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::eig_hermitian;
use super::matrix::{c, qubit_count, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Tolerance for the structural checks on states, effects and unitaries.
pub const STRUCTURAL_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct DensityOperator(ComplexMatrix);

impl TryFrom<ComplexMatrix> for DensityOperator {
    type Error = Error;
    fn try_from(m: ComplexMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<DensityOperator> for ComplexMatrix {
    fn from(rho: DensityOperator) -> Self {
        rho.0
    }
}

impl DensityOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let dev = m.hermitian_deviation();
        if dev > STRUCTURAL_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = m.trace().re;
        if (tr - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::NotUnitTrace(tr));
        }
        let lam = eig_hermitian(&m)?.min();
        if lam < -STRUCTURAL_TOL {
            return Err(Error::NotPositive(lam));
        }
        Ok(Self(m))
    }

    /// Skips validation; for operators that are density operators by construction.
    pub(crate) fn assume_valid(m: ComplexMatrix) -> Self {
        Self(m)
    }

    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        qubit_count(psi.len())?;
        Self::new(ComplexMatrix::outer(&(psi / c(norm, 0.0)))?)
    }

    /// Computational basis state `|a⟩⟨a|`.
    pub fn basis(outcome: &OutcomeString) -> Self {
        Self(ComplexMatrix::basis_projector(1 << outcome.len(), outcome.index()))
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        Self(ComplexMatrix::identity(d).scale(1.0 / d as f64))
    }

    /// `(1 - r)|ψ⟩⟨ψ| + (r/4) I` for a Bell state `ψ`.
    pub fn werner(bell: BellState, r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::OutOfRange { name: "r", value: r });
        }
        let m = &bell_projector(bell).scale(1.0 - r) + &ComplexMatrix::identity(4).scale(r / 4.0);
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

/// Measurement outcome `a₁…a_n`; `a₁` is the most significant bit of the basis index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct OutcomeString(Vec<u8>);

impl OutcomeString {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() || bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidOutcome(format!("{bits:?}")));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n.max(1)])
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|j| ((index >> (n - 1 - j)) & 1) as u8).collect())
    }

    /// Every outcome of `n` bits in ascending index order.
    pub fn all(n: usize) -> impl Iterator<Item = OutcomeString> {
        (0..1usize << n).map(move |i| Self::from_index(i, n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }
}

impl FromStr for OutcomeString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Error::InvalidOutcome(s.to_string())),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits).map_err(|_| Error::InvalidOutcome(s.to_string()))
    }
}

impl TryFrom<String> for OutcomeString {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<OutcomeString> for String {
    fn from(o: OutcomeString) -> Self {
        o.to_string()
    }
}

impl fmt::Display for OutcomeString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Single-qubit unitary from Z-Y-Z Euler angles: `Rz(a) Ry(b) Rz(c)`.
pub fn euler_zyz(a: f64, b: f64, cz: f64) -> DMatrix<C64> {
    let (cb, sb) = ((b / 2.0).cos(), (b / 2.0).sin());
    let p = |x: f64| C64::from_polar(1.0, x / 2.0);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            p(-(a + cz)) * cb,
            -p(-(a - cz)) * sb,
            p(a - cz) * sb,
            p(a + cz) * cb,
        ],
    )
}

/// `V₁ ⊗ … ⊗ V_n`, one 2×2 unitary per qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LocalUnitaryJson", into = "LocalUnitaryJson")]
pub struct LocalUnitary {
    factors: Vec<DMatrix<C64>>,
}

#[derive(Serialize, Deserialize)]
struct LocalUnitaryJson {
    factors: Vec<ComplexMatrix>,
}

impl TryFrom<LocalUnitaryJson> for LocalUnitary {
    type Error = Error;
    fn try_from(j: LocalUnitaryJson) -> Result<Self> {
        Self::new(j.factors.into_iter().map(ComplexMatrix::into_inner).collect())
    }
}

impl From<LocalUnitary> for LocalUnitaryJson {
    fn from(v: LocalUnitary) -> Self {
        Self {
            factors: v.factors.into_iter().map(ComplexMatrix::wrap).collect(),
        }
    }
}

impl LocalUnitary {
    pub fn new(factors: Vec<DMatrix<C64>>) -> Result<Self> {
        Self::with_tolerance(factors, STRUCTURAL_TOL)
    }

    /// As [`LocalUnitary::new`] with a custom unitarity tolerance, for factors
    /// transcribed at limited precision.
    pub fn with_tolerance(factors: Vec<DMatrix<C64>>, tol: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Unsupported("local unitary needs at least one factor".into()));
        }
        for f in &factors {
            if f.shape() != (2, 2) {
                return Err(Error::DimensionMismatch { expected: 2, got: f.nrows() });
            }
            let dev = ComplexMatrix::wrap(f.clone()).unitarity_deviation();
            if dev > tol {
                return Err(Error::NotUnitary(dev));
            }
        }
        Ok(Self { factors })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            factors: vec![DMatrix::identity(2, 2); n],
        }
    }

    /// Three Z-Y-Z angles per qubit.
    pub fn from_euler(angles: &[f64]) -> Self {
        assert!(angles.len() % 3 == 0 && !angles.is_empty());
        Self {
            factors: angles.chunks(3).map(|a| euler_zyz(a[0], a[1], a[2])).collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[DMatrix<C64>] {
        &self.factors
    }

    pub fn max_unitarity_deviation(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| ComplexMatrix::wrap(f.clone()).unitarity_deviation())
            .fold(0.0, f64::max)
    }

    pub fn operator(&self) -> ComplexMatrix {
        let mut acc = self.factors[0].clone();
        for f in &self.factors[1..] {
            acc = acc.kronecker(f);
        }
        ComplexMatrix::wrap(acc)
    }

    /// `V|a⟩`, computed factor by factor.
    pub fn apply_to_basis(&self, outcome: &OutcomeString) -> DVector<C64> {
        let mut v = DVector::from_element(1, c(1.0, 0.0));
        for (f, &bit) in self.factors.iter().zip(outcome.bits()) {
            v = v.kronecker(&f.column(bit as usize).into_owned());
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl FromStr for BellState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi_plus" => Ok(Self::PhiPlus),
            "phi_minus" => Ok(Self::PhiMinus),
            "psi_plus" => Ok(Self::PsiPlus),
            "psi_minus" => Ok(Self::PsiMinus),
            _ => Err(Error::Unsupported(format!("unknown Bell state {s:?}"))),
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PhiPlus => "phi_plus",
            Self::PhiMinus => "phi_minus",
            Self::PsiPlus => "psi_plus",
            Self::PsiMinus => "psi_minus",
        })
    }
}

pub fn bell_vector(bell: BellState) -> DVector<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match bell {
        BellState::PhiPlus => [s, 0.0, 0.0, s],
        BellState::PhiMinus => [s, 0.0, 0.0, -s],
        BellState::PsiPlus => [0.0, s, s, 0.0],
        BellState::PsiMinus => [0.0, s, -s, 0.0],
    };
    DVector::from_iterator(4, amps.iter().map(|&x| c(x, 0.0)))
}

pub fn bell_projector(bell: BellState) -> ComplexMatrix {
    ComplexMatrix::wrap({
        let v = bell_vector(bell);
        &v * v.adjoint()
    })
}
