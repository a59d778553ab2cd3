//! Local-unitary pre-processing of the state and the affine classical
//! post-processing `p₀ = ((p_e / tr Π) − εη)/(1 − ε)` with its error bound.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::decomposer::ElementDecomposition;
use crate::error::{Error, Result};
use crate::qops::{expectation, DensityOperator, LocalUnitary, OutcomeString};
use crate::tomography::PovmElement;

/// Probabilities outside `[0, 1]` by at most this much are clamped with a warning.
pub const CLAMP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationParameters {
    pub trace_pi: f64,
    pub epsilon: f64,
    pub eta: f64,
    #[serde(rename = "V")]
    pub v: LocalUnitary,
}

impl MitigationParameters {
    pub fn new(trace_pi: f64, epsilon: f64, eta: f64, v: LocalUnitary) -> Result<Self> {
        let p = Self { trace_pi, epsilon, eta, v };
        p.validate()?;
        Ok(p)
    }

    /// `η = q_c` of the decomposition.
    pub fn from_decomposition(d: &ElementDecomposition) -> Result<Self> {
        Self::new(d.trace_pi, d.epsilon, d.q_c, d.v.clone())
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.trace_pi > 0.0 && self.trace_pi.is_finite()) {
            return Err(Error::OutOfRange { name: "trace_pi", value: self.trace_pi });
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if !self.eta.is_finite() {
            return Err(Error::OutOfRange { name: "eta", value: self.eta });
        }
        Ok(())
    }
}

/// Where a report's inputs came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter_set: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub p_e: f64,
    pub p0_eta: f64,
    /// `εδ/(1 − ε)`.
    pub bound: f64,
    pub error_rate_raw: f64,
    /// Raw error rate of the pre-processed effect `V†ΠV`.
    pub error_rate_qpp: f64,
    pub parameters: MitigationParameters,
    #[serde(default)]
    pub provenance: Provenance,
}

/// `VρV†`.
pub fn apply_qpp(rho: &DensityOperator, v: &LocalUnitary) -> Result<DensityOperator> {
    if rho.n_qubits() != v.n_qubits() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: 1 << v.n_qubits() });
    }
    DensityOperator::new(rho.matrix().conjugate_by(&v.operator()).hermitian_part())
}

/// `p_e = tr[VρV† Π]`.
pub fn noisy_probability(rho: &DensityOperator, pi: &PovmElement, v: &LocalUnitary) -> Result<f64> {
    let p = expectation(&apply_qpp(rho, v)?, pi.matrix())?;
    clamp_probability(p)
}

fn clamp_probability(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        return Ok(p);
    }
    let excess = if p < 0.0 { -p } else { p - 1.0 };
    if excess > CLAMP_TOL {
        return Err(Error::OutOfRange { name: "p_e", value: p });
    }
    warn!("clamping probability {p:e} into [0, 1]");
    Ok(p.clamp(0.0, 1.0))
}

/// Unclamped estimate of the ideal probability.
pub fn post_process(p_e: f64, params: &MitigationParameters) -> Result<f64> {
    params.validate()?;
    let eps = params.epsilon;
    Ok((p_e / params.trace_pi - eps * params.eta) / (1.0 - eps))
}

pub fn error_bound(epsilon: f64, delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(epsilon * delta / (1.0 - epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorRateConvention {
    /// `1 − ⟨a|Π|a⟩`
    Raw,
    /// `1 − ⟨a|Π|a⟩ / tr Π`
    Normalized,
}

pub fn readout_error_rate(pi: &PovmElement, a: &OutcomeString, convention: ErrorRateConvention) -> Result<f64> {
    let diag = expectation(&DensityOperator::basis(a), pi.matrix())?;
    Ok(match convention {
        ErrorRateConvention::Raw => 1.0 - diag,
        ErrorRateConvention::Normalized => 1.0 - diag / pi.trace(),
    })
}

/// `q(a) = tr[VρV† P]`, the quantity `η` stands in for.
pub fn true_q(rho: &DensityOperator, d: &ElementDecomposition) -> Result<f64> {
    match &d.p {
        Some(p) => expectation(&apply_qpp(rho, &d.v)?, p),
        None => Ok(0.0),
    }
}

/// Pre-process, measure analytically, post-process with `η = q_c`.
pub fn mitigate(rho: &DensityOperator, pi: &PovmElement, d: &ElementDecomposition) -> Result<MitigationReport> {
    mitigate_with(rho, pi, d, MitigationParameters::from_decomposition(d)?)
}

/// As [`mitigate`] with explicit parameters (e.g. another `η`).
pub fn mitigate_with(
    rho: &DensityOperator,
    pi: &PovmElement,
    d: &ElementDecomposition,
    parameters: MitigationParameters,
) -> Result<MitigationReport> {
    if pi.outcome != d.outcome {
        return Err(Error::InvalidOutcome(format!("element {} vs decomposition {}", pi.outcome, d.outcome)));
    }
    let p_e = noisy_probability(rho, pi, &parameters.v)?;
    let p0_eta = post_process(p_e, &parameters)?;
    let qpp_effect = PovmElement::new(pi.outcome.clone(), pi.matrix().conjugate_by(&parameters.v.operator().adjoint()).hermitian_part())?;
    Ok(MitigationReport {
        p_e,
        p0_eta,
        bound: error_bound(parameters.epsilon, d.delta)?,
        error_rate_raw: readout_error_rate(pi, &pi.outcome, ErrorRateConvention::Raw)?,
        error_rate_qpp: readout_error_rate(&qpp_effect, &pi.outcome, ErrorRateConvention::Raw)?,
        parameters,
        provenance: Provenance::default(),
    })
}
