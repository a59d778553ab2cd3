//! Normalized entanglement witnesses measured as a single POVM outcome:
//! separability windows, purification unitaries, mitigated bounds and the
//! admissible `η` window.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{multistart, MultistartOptions, NelderMead};
use crate::qops::{
    bell_projector, c, eig_hermitian, expectation, BellState, ComplexMatrix, DensityOperator, C64,
};

/// Separability window of the two-qubit Bell-diagonal witness below.
pub const WITNESS_WINDOW: (f64, f64) = (0.125, 0.375);

const WITNESS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessOperator {
    #[serde(rename = "W")]
    pub w: ComplexMatrix,
    #[serde(rename = "B_L")]
    pub b_lower: f64,
    #[serde(rename = "B_U")]
    pub b_upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl WitnessOperator {
    pub fn new(w: ComplexMatrix, b_lower: f64, b_upper: f64) -> Result<Self> {
        check_witness(&w)?;
        if b_lower > b_upper {
            return Err(Error::Validation(format!("window ({b_lower}, {b_upper}) is reversed")));
        }
        Ok(Self { w, b_lower, b_upper, provenance: None })
    }

    pub fn window(&self) -> (f64, f64) {
        (self.b_lower, self.b_upper)
    }

    /// `tr[W ρ]`.
    pub fn expectation(&self, rho: &DensityOperator) -> Result<f64> {
        expectation(rho, &self.w)
    }
}

fn check_witness(w: &ComplexMatrix) -> Result<()> {
    let tr = w.trace().re;
    if (tr - 1.0).abs() > WITNESS_TOL {
        return Err(Error::NotUnitTrace(tr));
    }
    let lam = eig_hermitian(w)?.min();
    if lam < -WITNESS_TOL {
        return Err(Error::NotPositive(lam));
    }
    Ok(())
}

/// `¼|φ⁻⟩⟨φ⁻| + ¼|ψ⁺⟩⟨ψ⁺| + ½|ψ⁻⟩⟨ψ⁻|` with its window `(1/8, 3/8)`.
pub fn build_witness() -> WitnessOperator {
    let w = &(&bell_projector(BellState::PhiMinus).scale(0.25) + &bell_projector(BellState::PsiPlus).scale(0.25))
        + &bell_projector(BellState::PsiMinus).scale(0.5);
    let mut op = WitnessOperator::new(w, WITNESS_WINDOW.0, WITNESS_WINDOW.1).expect("convex mixture of projectors");
    op.provenance = Some("bell-diagonal witness (1/4, 1/4, 1/2) on phi-, psi+, psi-".into());
    op
}

fn bloch_ket(theta: f64, phi: f64) -> DVector<C64> {
    DVector::from_vec(vec![c((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)])
}

/// `tr[W (|u⟩⟨u| ⊗ |v⟩⟨v|)]` with `u, v` given by Bloch angles `(θ₁, φ₁, θ₂, φ₂)`.
pub fn product_expectation(w: &ComplexMatrix, angles: &[f64]) -> f64 {
    let psi = bloch_ket(angles[0], angles[1]).kronecker(&bloch_ket(angles[2], angles[3]));
    (psi.adjoint() * w.as_inner() * &psi)[(0, 0)].re
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityBounds {
    pub b_lower: f64,
    pub b_upper: f64,
    /// Starts that reached the reported extreme within `1e-6`.
    pub lower_agreement: usize,
    pub upper_agreement: usize,
    pub starts: usize,
    pub seed: u64,
}

/// Extremes of `tr[W σ]` over two-qubit product pure states by seeded multistart.
pub fn separability_bounds(w: &ComplexMatrix, starts: usize, seed: u64) -> Result<SeparabilityBounds> {
    if w.dim() != 4 {
        return Err(Error::Unsupported(format!(
            "separability bounds are implemented for two qubits, got dimension {}",
            w.dim()
        )));
    }
    check_witness(w)?;
    let opts = MultistartOptions {
        starts,
        seed,
        range: std::f64::consts::PI,
        local: NelderMead { max_evals: 4000, f_tol: 1e-13, initial_step: 0.5 },
    };
    let x0 = [0.0; 4];
    let lo = multistart(|x: &[f64]| product_expectation(w, x), &x0, &opts);
    let hi = multistart(|x: &[f64]| -product_expectation(w, x), &x0, &opts);
    let agree = |finals: &[f64], best: f64| finals.iter().filter(|f| (*f - best).abs() <= 1e-6).count();
    Ok(SeparabilityBounds {
        b_lower: lo.best.f,
        b_upper: -hi.best.f,
        lower_agreement: agree(&lo.finals, lo.best.f),
        upper_agreement: agree(&hi.finals, hi.best.f),
        starts: lo.finals.len(),
        seed,
    })
}

/// Unitary on `2n` qubits whose first column is `Σᵢ √λᵢ |eᵢ⟩|i⟩`; the
/// remaining columns are a Gram-Schmidt completion over the standard basis in
/// index order.
pub fn purification_unitary(w: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_witness(w)?;
    let d = w.dim();
    let eig = eig_hermitian(w)?;
    let mut first = DVector::<C64>::zeros(d * d);
    for (i, &lam) in eig.values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        for row in 0..d {
            first[row * d + i] += eig.vectors[(row, i)] * s;
        }
    }
    let norm = first.norm();
    first /= c(norm, 0.0);

    let mut cols: Vec<DVector<C64>> = vec![first];
    for k in 0..d * d {
        if cols.len() == d * d {
            break;
        }
        let mut v = DVector::<C64>::zeros(d * d);
        v[k] = c(1.0, 0.0);
        // two passes keep the basis orthonormal to machine precision
        for _ in 0..2 {
            for q in &cols {
                let overlap = q.dotc(&v);
                v -= q * overlap;
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            cols.push(v / c(n, 0.0));
        }
    }
    ComplexMatrix::new(DMatrix::from_columns(&cols))
}

/// `⟨0|U†(ρ ⊗ I)U|0⟩`, checked against `tr[W ρ]`.
pub fn probability_form(w: &ComplexMatrix, rho: &DensityOperator) -> Result<f64> {
    if rho.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: rho.dim() });
    }
    let u = purification_unitary(w)?;
    let extended = rho.matrix().kron(&ComplexMatrix::identity(w.dim()));
    let col = u.as_inner().column(0);
    let p = (col.adjoint() * extended.as_inner() * col)[(0, 0)].re;
    let direct = expectation(rho, w)?;
    if (p - direct).abs() > WITNESS_TOL {
        return Err(Error::Validation(format!("purification gives {p}, direct trace {direct}")));
    }
    Ok(p)
}

/// The window in the `p₀_η` domain.
pub fn mitigated_bounds(b_lower: f64, b_upper: f64, trace_pi: f64, epsilon: f64, eta: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let scale = 1.0 / (trace_pi * (1.0 - epsilon));
    let shift = epsilon / (1.0 - epsilon) * eta;
    Ok((scale * b_lower - shift, scale * b_upper - shift))
}

/// Range of `η` for which raw probabilities `B_L + κ` and `B_U − κ`, both
/// inside the separability window, are certified after post-processing.
/// `None` when empty.
pub fn eta_window(b_lower: f64, b_upper: f64, trace_pi: f64, epsilon: f64, kappa: f64) -> Result<Option<(f64, f64)>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if kappa < 0.0 {
        return Err(Error::OutOfRange { name: "kappa", value: kappa });
    }
    let inv = 1.0 / trace_pi;
    let cc = inv - (1.0 - epsilon);
    let lo = (cc * b_lower + inv * kappa) / epsilon;
    let hi = (cc * b_upper - inv * kappa) / epsilon;
    Ok((lo < hi).then_some((lo, hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    EntangledBelow,
    EntangledAbove,
    Inconclusive,
}

impl Verdict {
    pub fn is_entangled(self) -> bool {
        self != Verdict::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationVerdict {
    pub probability: f64,
    pub window: (f64, f64),
    pub verdict: Verdict,
    /// Distance to the violated bound; for inconclusive results, minus the
    /// distance to the nearest bound.
    pub margin: f64,
}

pub fn certify(p: f64, window: (f64, f64)) -> CertificationVerdict {
    let (lo, hi) = window;
    let (verdict, margin) = if p < lo {
        (Verdict::EntangledBelow, lo - p)
    } else if p > hi {
        (Verdict::EntangledAbove, p - hi)
    } else {
        (Verdict::Inconclusive, -(p - lo).min(hi - p))
    };
    CertificationVerdict { probability: p, window, verdict, margin }
}
