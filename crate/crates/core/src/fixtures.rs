//! Published device data shipped with the crate: POVM elements, local
//! unitaries and scalar parameter sets, printed at 3-4 significant digits.
//!
//! Files are embedded at build time; setting `MITIGATOR_FIXTURES` to a
//! directory makes [`Fixture::load`] read `<dir>/<id>.json` instead.

use std::collections::BTreeMap;
use std::path::Path;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::decomposer::{normalize_element, normalize_with_trace, NormalizedElement};
use crate::error::{Error, Result};
use crate::qops::{ComplexMatrix, LocalUnitary, OutcomeString};
use crate::tomography::PovmElement;

pub const FIXTURE_DIR_VAR: &str = "MITIGATOR_FIXTURES";

/// Printed matrices must be Hermitian to this tolerance before symmetrizing.
pub const HERMITIAN_TOL: f64 = 1e-6;

/// Printed unitaries must be unitary to this tolerance before polar projection.
pub const UNITARY_TOL: f64 = 5e-3;

const EMBEDDED: &[(&str, &str)] = &[
    ("rigetti_params", include_str!("../../../fixtures/rigetti_params.json")),
    ("rigetti_pi00", include_str!("../../../fixtures/rigetti_pi00.json")),
    ("rigetti_v", include_str!("../../../fixtures/rigetti_v.json")),
    ("sydney_params", include_str!("../../../fixtures/sydney_params.json")),
    ("sydney_pi00", include_str!("../../../fixtures/sydney_pi00.json")),
    ("sydney_pi00_qpp", include_str!("../../../fixtures/sydney_pi00_qpp.json")),
    ("sydney_tables", include_str!("../../../fixtures/sydney_tables.json")),
    ("sydney_v", include_str!("../../../fixtures/sydney_v.json")),
    ("yorktown_params", include_str!("../../../fixtures/yorktown_params.json")),
    ("yorktown_pi000", include_str!("../../../fixtures/yorktown_pi000.json")),
];

pub fn embedded_ids() -> impl Iterator<Item = &'static str> {
    EMBEDDED.iter().map(|(id, _)| *id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    PovmElement,
    LocalUnitary,
    Parameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub id: String,
    pub kind: FixtureKind,
    pub source: String,
    pub payload: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<OutcomeString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_trace: Option<f64>,
    #[serde(default)]
    pub normalized: bool,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

/// A fixture POVM element after symmetrization.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureElement {
    pub id: String,
    pub element: PovmElement,
    pub declared_trace: Option<f64>,
    /// The printed matrix is already `Π / tr Π`.
    pub normalized: bool,
    /// Max-norm change made by `M ← (M + M†)/2`.
    pub symmetrization_delta: f64,
}

impl FixtureElement {
    /// `Π̃` with the trace used for post-processing: the declared one for
    /// pre-normalized data, otherwise the trace of the printed matrix.
    pub fn normalized(&self) -> Result<NormalizedElement> {
        if self.normalized {
            let tr = self
                .declared_trace
                .ok_or_else(|| Error::Validation(format!("{}: normalized element without declared_trace", self.id)))?;
            normalize_with_trace(&self.element, tr)
        } else {
            normalize_element(&self.element)
        }
    }
}

impl Fixture {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Loads by id from `MITIGATOR_FIXTURES` if set, else from the embedded copies.
    pub fn load(id: &str) -> Result<Self> {
        if let Some(dir) = std::env::var_os(FIXTURE_DIR_VAR) {
            let path = Path::new(&dir).join(format!("{id}.json"));
            debug!("loading fixture {id} from {}", path.display());
            return Self::from_path(&path);
        }
        Self::embedded(id)
    }

    pub fn embedded(id: &str) -> Result<Self> {
        let (_, text) = EMBEDDED.iter().find(|(k, _)| *k == id).ok_or_else(|| {
            Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("no fixture named {id}")))
        })?;
        Self::from_json(text)
    }

    fn expect_kind(&self, kind: FixtureKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Validation(format!("{}: expected {kind:?}, found {:?}", self.id, self.kind)));
        }
        Ok(())
    }

    pub fn element(&self) -> Result<FixtureElement> {
        self.expect_kind(FixtureKind::PovmElement)?;
        let raw: ComplexMatrix = serde_json::from_value(self.payload.clone())?;
        let dev = raw.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let sym = raw.hermitian_part();
        let symmetrization_delta = sym.max_abs_diff(&raw);
        debug!("{}: symmetrization delta {symmetrization_delta:e}", self.id);
        let outcome = self
            .outcome
            .clone()
            .unwrap_or_else(|| OutcomeString::zeros(sym.n_qubits()));
        let element = PovmElement::new(outcome, sym)?;
        if let Some(declared) = self.declared_trace {
            let computed = element.trace();
            if !self.normalized && (computed - declared).abs() > 5e-3 {
                warn!("{}: computed trace {computed:.4} vs declared {declared}", self.id);
            }
        }
        Ok(FixtureElement {
            id: self.id.clone(),
            element,
            declared_trace: self.declared_trace,
            normalized: self.normalized,
            symmetrization_delta,
        })
    }

    /// Factors projected onto the nearest unitary (polar part), after checking
    /// the printed values are unitary to [`UNITARY_TOL`].
    pub fn local_unitary(&self) -> Result<LocalUnitary> {
        self.expect_kind(FixtureKind::LocalUnitary)?;
        #[derive(Deserialize)]
        struct Factors {
            factors: Vec<ComplexMatrix>,
        }
        let Factors { factors } = serde_json::from_value(self.payload.clone())?;
        let mut out = Vec::with_capacity(factors.len());
        for f in factors {
            if f.dim() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, got: f.dim() });
            }
            let dev = f.unitarity_deviation();
            if dev > UNITARY_TOL {
                return Err(Error::NotUnitary(dev));
            }
            let svd = f.into_inner().svd(true, true);
            let u = svd.u.expect("requested U") * svd.v_t.expect("requested V^T");
            debug!("{}: factor unitarity deviation {dev:e} before projection", self.id);
            out.push(u);
        }
        LocalUnitary::new(out)
    }

    pub fn parameters(&self) -> Result<BTreeMap<String, f64>> {
        self.expect_kind(FixtureKind::Parameters)?;
        Ok(serde_json::from_value(self.payload.clone())?)
    }

    pub fn parameter(&self, key: &str) -> Result<f64> {
        self.parameters()?
            .get(key)
            .copied()
            .ok_or_else(|| Error::Validation(format!("{}: missing parameter {key}", self.id)))
    }

    /// Bit-flip probability of the classical-confusion completion, if any.
    pub fn completion_flip(&self) -> Option<f64> {
        self.metadata.get("completion")?.get("flip_probability")?.as_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{eig_hermitian, expectation, DensityOperator};

    #[test]
    fn every_embedded_fixture_parses_by_kind() {
        for id in embedded_ids() {
            let f = Fixture::embedded(id).unwrap();
            assert_eq!(f.id, id);
            match f.kind {
                FixtureKind::PovmElement => {
                    let e = f.element().unwrap();
                    assert!(e.symmetrization_delta <= HERMITIAN_TOL);
                }
                FixtureKind::LocalUnitary => {
                    assert!(f.local_unitary().unwrap().max_unitarity_deviation() < 1e-12);
                }
                FixtureKind::Parameters => assert!(!f.parameters().unwrap().is_empty()),
            }
        }
    }

    #[test]
    fn unknown_fixture_is_io_error() {
        assert!(matches!(Fixture::embedded("nope"), Err(Error::Io(_))));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        assert!(Fixture::embedded("sydney_v").unwrap().element().is_err());
        assert!(Fixture::embedded("sydney_pi00").unwrap().parameters().is_err());
    }

    #[test]
    fn sydney_element_values() {
        let e = Fixture::embedded("sydney_pi00").unwrap().element().unwrap();
        let p = expectation(&DensityOperator::basis(&"00".parse().unwrap()), e.element.matrix()).unwrap();
        assert!((p - 0.8787).abs() < 1e-12);
        assert!((e.element.trace() - 0.9452).abs() < 1e-12);
        let mixed = expectation(&DensityOperator::maximally_mixed(2), e.element.matrix()).unwrap();
        assert!((mixed - 0.2363).abs() < 1e-12);
        let max = eig_hermitian(e.element.matrix()).unwrap().max();
        assert!((max - 0.8788).abs() < 1e-4);
    }

    #[test]
    fn rigetti_uses_declared_trace() {
        let e = Fixture::embedded("rigetti_pi00").unwrap().element().unwrap();
        let n = e.normalized().unwrap();
        assert_eq!(n.trace, 0.8742);
        assert!(n.matrix.max_abs_diff(e.element.matrix()) < 1e-3);
        assert!((n.matrix.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn yorktown_trace_close_to_declared() {
        let f = Fixture::embedded("yorktown_pi000").unwrap();
        let e = f.element().unwrap();
        assert_eq!(e.element.n_qubits(), 3);
        assert!((e.element.trace() - 1.32).abs() < 5e-3);
    }

    #[test]
    fn sydney_completion_metadata() {
        assert_eq!(Fixture::embedded("sydney_pi00").unwrap().completion_flip(), Some(0.02));
        assert_eq!(Fixture::embedded("rigetti_pi00").unwrap().completion_flip(), None);
    }

    #[test]
    fn non_hermitian_payload_is_rejected() {
        let text = r#"{"id":"x","kind":"povm_element","source":"t","outcome":"0",
            "payload":{"dim":2,"rows":[[[0.5,0],[0.1,0]],[[0.2,0],[0.5,0]]]}}"#;
        assert!(matches!(Fixture::from_json(text).unwrap().element(), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn parameters_lookup() {
        let f = Fixture::embedded("sydney_params").unwrap();
        assert_eq!(f.parameter("epsilon").unwrap(), 0.074);
        assert!(f.parameter("missing").is_err());
    }
}
