//! Gate-level density-matrix simulation and the device circuits for noisy
//! Bell-state preparation and the witness measurement.
//!
//! Qubit 0 is the most significant tensor factor. Gate lists are stored in
//! execution order; printed gate strings are products read right to left.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{
    c, eig_hermitian, partial_trace, permute_qubits, BellState, ComplexMatrix, DensityOperator, C64,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    #[serde(rename = "RY")]
    Ry,
    H,
    X,
    #[serde(rename = "CX")]
    Cx,
    /// Controlled `R_Y(angle)`: qubits are `[control, target]`.
    #[serde(rename = "CU")]
    Cry,
    /// `|00⟩⟨00| ⊗ I + |11⟩⟨11| ⊗ X` on `[c1, c2, target]`, identity on the
    /// mixed control patterns.
    #[serde(rename = "CCX")]
    Ccx,
}

impl GateKind {
    fn arity(self) -> usize {
        match self {
            GateKind::Ry | GateKind::H | GateKind::X => 1,
            GateKind::Cx | GateKind::Cry => 2,
            GateKind::Ccx => 3,
        }
    }

    fn takes_angle(self) -> bool {
        matches!(self, GateKind::Ry | GateKind::Cry)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

fn ry(theta: f64) -> DMatrix<C64> {
    let (s, co) = (theta / 2.0).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

fn controlled(u: &DMatrix<C64>) -> DMatrix<C64> {
    let mut m = DMatrix::identity(4, 4);
    m.view_mut((2, 2), (2, 2)).copy_from(u);
    m
}

impl Gate {
    pub fn ry(q: usize, angle: f64) -> Self {
        Self { kind: GateKind::Ry, qubits: vec![q], angle: Some(angle) }
    }
    pub fn h(q: usize) -> Self {
        Self { kind: GateKind::H, qubits: vec![q], angle: None }
    }
    pub fn x(q: usize) -> Self {
        Self { kind: GateKind::X, qubits: vec![q], angle: None }
    }
    pub fn cx(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cx, qubits: vec![control, target], angle: None }
    }
    pub fn cry(control: usize, target: usize, angle: f64) -> Self {
        Self { kind: GateKind::Cry, qubits: vec![control, target], angle: Some(angle) }
    }
    pub fn ccx(c1: usize, c2: usize, target: usize) -> Self {
        Self { kind: GateKind::Ccx, qubits: vec![c1, c2, target], angle: None }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let bad = || Error::InvalidQubits { indices: self.qubits.clone(), n_qubits };
        if self.qubits.len() != self.kind.arity() {
            return Err(bad());
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= n_qubits || self.qubits[..i].contains(&q) {
                return Err(bad());
            }
        }
        match (self.kind.takes_angle(), self.angle) {
            (true, Some(a)) if a.is_finite() => Ok(()),
            (false, None) => Ok(()),
            _ => Err(Error::Validation(format!("{:?} gate has angle {:?}", self.kind, self.angle))),
        }
    }

    /// Matrix on the gate's own qubits, in the order listed.
    pub fn local_matrix(&self) -> DMatrix<C64> {
        let one = c(1.0, 0.0);
        let x = DMatrix::from_row_slice(2, 2, &[C64::default(), one, one, C64::default()]);
        match self.kind {
            GateKind::Ry => ry(self.angle.unwrap_or(0.0)),
            GateKind::H => {
                let s = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                DMatrix::from_row_slice(2, 2, &[s, s, s, -s])
            }
            GateKind::X => x,
            GateKind::Cx => controlled(&x),
            GateKind::Cry => controlled(&ry(self.angle.unwrap_or(0.0))),
            GateKind::Ccx => {
                let mut m = DMatrix::identity(8, 8);
                m.view_mut((6, 6), (2, 2)).copy_from(&x);
                m
            }
        }
    }

    /// Full `2ⁿ × 2ⁿ` operator.
    pub fn operator(&self, n_qubits: usize) -> Result<ComplexMatrix> {
        self.validate(n_qubits)?;
        let g = self.local_matrix();
        let k = self.qubits.len();
        let d = 1usize << n_qubits;
        let mask: usize = self.qubits.iter().map(|&q| 1 << (n_qubits - 1 - q)).sum();
        let sub = |x: usize| {
            self.qubits
                .iter()
                .enumerate()
                .fold(0, |acc, (pos, &q)| acc | (((x >> (n_qubits - 1 - q)) & 1) << (k - 1 - pos)))
        };
        Ok(ComplexMatrix::wrap(DMatrix::from_fn(d, d, |i, j| {
            if i & !mask != j & !mask {
                C64::default()
            } else {
                g[(sub(i), sub(j))]
            }
        })))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CircuitJson", into = "CircuitJson")]
pub struct Circuit {
    n_qubits: usize,
    label_map: BTreeMap<String, usize>,
    gates: Vec<Gate>,
}

#[derive(Serialize, Deserialize)]
struct CircuitJson {
    n_qubits: usize,
    #[serde(default)]
    label_map: BTreeMap<String, usize>,
    gates: Vec<Gate>,
}

impl TryFrom<CircuitJson> for Circuit {
    type Error = Error;
    fn try_from(j: CircuitJson) -> Result<Self> {
        Self::new(j.n_qubits, j.label_map, j.gates)
    }
}

impl From<Circuit> for CircuitJson {
    fn from(c: Circuit) -> Self {
        Self { n_qubits: c.n_qubits, label_map: c.label_map, gates: c.gates }
    }
}

impl Circuit {
    pub fn new(n_qubits: usize, label_map: BTreeMap<String, usize>, gates: Vec<Gate>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidQubits { indices: vec![], n_qubits });
        }
        for g in &gates {
            g.validate(n_qubits)?;
        }
        if let Some((label, &q)) = label_map.iter().find(|(_, &q)| q >= n_qubits) {
            return Err(Error::Validation(format!("label {label} maps to qubit {q} of {n_qubits}")));
        }
        Ok(Self { n_qubits, label_map, gates })
    }

    pub fn empty(n_qubits: usize) -> Self {
        Self { n_qubits, label_map: BTreeMap::new(), gates: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn label_map(&self) -> &BTreeMap<String, usize> {
        &self.label_map
    }

    pub fn qubit(&self, label: &str) -> Option<usize> {
        self.label_map.get(label).copied()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Circuit) -> Result<Circuit> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: other.n_qubits });
        }
        let mut out = self.clone();
        out.gates.extend(other.gates.iter().cloned());
        Ok(out)
    }

    /// Product of all gate operators, last gate leftmost.
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        let mut u = ComplexMatrix::identity(1 << self.n_qubits);
        for g in &self.gates {
            u = &g.operator(self.n_qubits)? * &u;
        }
        Ok(u)
    }

    /// Inverse circuit: reversed order, negated rotation angles.
    pub fn inverse(&self) -> Circuit {
        let gates = self
            .gates
            .iter()
            .rev()
            .map(|g| Gate { angle: g.angle.map(|a| -a), ..g.clone() })
            .collect();
        Circuit { gates, ..self.clone() }
    }
}

/// Applies the gates one by one as `ρ ← GρG†`.
pub fn run(circuit: &Circuit, initial: &DensityOperator) -> Result<DensityOperator> {
    if initial.n_qubits() != circuit.n_qubits {
        return Err(Error::DimensionMismatch { expected: 1 << circuit.n_qubits, got: initial.dim() });
    }
    let mut rho = initial.matrix().clone();
    for g in &circuit.gates {
        rho = rho.conjugate_by(&g.operator(circuit.n_qubits)?);
    }
    DensityOperator::new(rho)
}

fn check_unit(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value: p })
    }
}

/// `2 arctan √x`, defined on `[0, ∞]` with `θ(∞) = π`.
fn theta(x: f64) -> f64 {
    2.0 * x.sqrt().atan()
}

pub fn theta_of(p: f64) -> Result<f64> {
    check_unit("p", p)?;
    Ok(theta(p))
}

pub fn alpha_of(p: f64) -> Result<f64> {
    check_unit("p", p)?;
    Ok((1.0 - p) / (1.0 + 3.0 * p))
}

pub fn beta_of(p: f64) -> Result<f64> {
    check_unit("p", p)?;
    Ok((1.0 - p) / (1.0 + p))
}

/// Device labels of the preparation circuits and their simulator indices.
pub const PREP_LABELS: [(&str, usize); 6] = [("q0", 0), ("q1", 1), ("q2", 2), ("q4", 3), ("q6", 4), ("q7", 5)];

/// Simulator indices of the pair carrying the prepared state (q1, q4).
pub const PREP_DATA: [usize; 2] = [1, 3];

fn label_map(labels: &[(&str, usize)]) -> BTreeMap<String, usize> {
    labels.iter().map(|(l, q)| (l.to_string(), *q)).collect()
}

/// The printed preparation gate string evaluated at parameter `s`.
///
/// `CU(π/2)` is a controlled `R_Y(π/2)`; `CU(x)` with a ratio argument is a
/// controlled `R_Y(θ(x))`. The first `H` acts on q1 in both strings.
pub fn bell_gate_string(psi: BellState, s: f64) -> Result<Circuit> {
    let (alpha, beta) = (alpha_of(s)?, beta_of(s)?);
    let q = |l: &str| PREP_LABELS.iter().find(|(k, _)| *k == l).map(|(_, i)| *i).expect("known label");
    let (q1, q4, q6, q7) = (q("q1"), q("q4"), q("q6"), q("q7"));
    // execution order: the printed string reversed
    let gates = match psi {
        BellState::PhiPlus => vec![
            Gate::ry(q7, theta(beta)),
            Gate::cx(q7, q4),
            Gate::cry(q4, q1, PI / 2.0),
            Gate::x(q4),
            Gate::cry(q4, q1, theta(alpha)),
            Gate::x(q4),
            Gate::cx(q1, q6),
            Gate::h(q1),
            Gate::cx(q1, q4),
        ],
        BellState::PsiMinus => vec![
            Gate::ry(q7, theta(1.0 / beta)),
            Gate::cx(q7, q4),
            Gate::cry(q4, q1, theta(1.0 / alpha)),
            Gate::x(q4),
            Gate::cry(q4, q1, PI / 2.0),
            Gate::x(q4),
            Gate::cx(q1, q6),
            Gate::h(q1),
            Gate::cx(q1, q4),
        ],
        other => return Err(Error::Unsupported(format!("no preparation circuit for {other}"))),
    };
    Circuit::new(6, label_map(&PREP_LABELS), gates)
}

/// Circuit whose output on (q1, q4) is `(1 − p)|ψ⟩⟨ψ| + (p/4) I`.
///
/// Simulation shows the printed string at parameter `s` yields the mixing
/// weight `1 − s`, so the string is evaluated at `1 − p`.
pub fn prepare_noisy_bell(psi: BellState, p: f64) -> Result<Circuit> {
    check_unit("p", p)?;
    bell_gate_string(psi, 1.0 - p)
}

fn zero_state(n: usize) -> DensityOperator {
    DensityOperator::basis(&crate::qops::OutcomeString::zeros(n))
}

pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let eig = eig_hermitian(&(a - b))?;
    Ok(0.5 * eig.values.iter().map(|x| x.abs()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepValidation {
    pub psi: BellState,
    pub p: f64,
    pub marginal: ComplexMatrix,
    pub trace_distance: f64,
}

/// Runs `circuit` on `|0…0⟩` and compares the (q1, q4) marginal with the Werner target.
pub fn validate_preparation(circuit: &Circuit, psi: BellState, p: f64) -> Result<PrepValidation> {
    let out = run(circuit, &zero_state(circuit.n_qubits()))?;
    let marginal = partial_trace(out.matrix(), &PREP_DATA)?;
    let target = DensityOperator::werner(psi, p)?;
    Ok(PrepValidation {
        psi,
        p,
        trace_distance: trace_distance(&marginal, target.matrix())?,
        marginal,
    })
}

pub fn validate_noisy_bell(psi: BellState, p: f64) -> Result<PrepValidation> {
    validate_preparation(&prepare_noisy_bell(psi, p)?, psi, p)
}

/// Labels q1..q4 of the witness circuit.
pub const WITNESS_LABELS: [(&str, usize); 4] = [("q1", 0), ("q2", 1), ("q3", 2), ("q4", 3)];

/// The measured data pair (q1, q4); q2 and q3 are ancillas.
pub const WITNESS_DATA: [usize; 2] = [0, 3];

/// `U†_W̃` in execution order.
pub fn witness_circuit() -> Circuit {
    let (q1, q2, q3, q4) = (0, 1, 2, 3);
    let gates = vec![
        Gate::cx(q1, q4),
        Gate::h(q1),
        Gate::ccx(q1, q4, q2),
        Gate::cry(q1, q4, -theta(2.0)),
        Gate::x(q3),
        Gate::x(q1),
        Gate::cx(q1, q4),
        Gate::cx(q1, q2),
        Gate::cx(q1, q3),
        Gate::ry(q1, -PI / 3.0),
    ];
    Circuit::new(4, label_map(&WITNESS_LABELS), gates).expect("static circuit")
}

/// Places `data` on qubits `at` and `rest` on the remaining qubits in ascending order.
pub fn embed(data: &DensityOperator, at: &[usize], rest: &DensityOperator) -> Result<DensityOperator> {
    let n = data.n_qubits() + rest.n_qubits();
    if at.len() != data.n_qubits() {
        return Err(Error::InvalidQubits { indices: at.to_vec(), n_qubits: n });
    }
    let mut old: Vec<usize> = at.to_vec();
    old.extend((0..n).filter(|q| !at.contains(q)));
    let order: Vec<usize> = (0..n)
        .map(|q| old.iter().position(|&o| o == q).ok_or_else(|| Error::InvalidQubits { indices: at.to_vec(), n_qubits: n }))
        .collect::<Result<_>>()?;
    DensityOperator::new(permute_qubits(&data.tensor(rest).matrix().clone(), &order)?)
}

/// Probability of outcome 00 on (q1, q4) after the witness circuit, with `rho`
/// on (q1, q4) and `ancilla` on (q2, q3).
pub fn witness_probability_with(circuit: &Circuit, rho: &DensityOperator, ancilla: &DensityOperator) -> Result<f64> {
    let full = embed(rho, &WITNESS_DATA, ancilla)?;
    let out = run(circuit, &full)?;
    Ok(partial_trace(out.matrix(), &WITNESS_DATA)?.get(0, 0).re)
}

pub fn witness_probability(rho: &DensityOperator) -> Result<f64> {
    witness_probability_with(&witness_circuit(), rho, &zero_state(2))
}

/// Largest `|p(00) − tr[W̃ρ]|` over the given states.
pub fn validate_witness_circuit(states: &[DensityOperator], w: &ComplexMatrix) -> Result<f64> {
    let circuit = witness_circuit();
    let ancilla = zero_state(2);
    states.iter().try_fold(0.0f64, |worst, rho| {
        let p = witness_probability_with(&circuit, rho, &ancilla)?;
        Ok(worst.max((p - crate::qops::expectation(rho, w)?).abs()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::random::{random_density, stream_rng};
    use crate::qops::{bell_projector, OutcomeString};
    use crate::witness::build_witness;
    use proptest::prelude::*;

    fn basis(s: &str) -> DensityOperator {
        DensityOperator::basis(&s.parse::<OutcomeString>().unwrap())
    }

    #[test]
    fn every_gate_is_unitary() {
        let gates = [Gate::ry(0, 0.7), Gate::h(1), Gate::x(2), Gate::cx(2, 0), Gate::cry(1, 2, -1.1), Gate::ccx(2, 0, 1)];
        for g in gates {
            assert!(g.operator(3).unwrap().unitarity_deviation() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn ccx_matches_written_projectors() {
        let x = Gate::x(0).local_matrix();
        let p0 = ComplexMatrix::basis_projector(2, 0);
        let p1 = ComplexMatrix::basis_projector(2, 1);
        let written = &p0.kron(&p0).kron(&ComplexMatrix::identity(2)) + &p1.kron(&p1).kron(&ComplexMatrix::wrap(x));
        let g = ComplexMatrix::wrap(Gate::ccx(0, 1, 2).local_matrix());
        for i in [0, 1, 6, 7] {
            for j in 0..8 {
                assert_eq!(g.get(i, j), written.get(i, j));
            }
        }
        // mixed control patterns act as identity
        for i in 2..6 {
            assert_eq!(g.get(i, i), c(1.0, 0.0));
        }
    }

    #[test]
    fn invalid_gates_are_rejected() {
        assert!(Circuit::new(2, BTreeMap::new(), vec![Gate::x(2)]).is_err());
        assert!(Circuit::new(2, BTreeMap::new(), vec![Gate::cx(1, 1)]).is_err());
        let no_angle = Gate { kind: GateKind::Ry, qubits: vec![0], angle: None };
        assert!(Circuit::new(1, BTreeMap::new(), vec![no_angle]).is_err());
        let mut c = Circuit::empty(1);
        assert!(c.push(Gate::h(3)).is_err());
    }

    #[test]
    fn run_examples() {
        let rho = basis("00");
        assert_eq!(run(&Circuit::empty(2), &rho).unwrap(), rho);
        let bell = Circuit::new(2, BTreeMap::new(), vec![Gate::h(0), Gate::cx(0, 1)]).unwrap();
        let out = run(&bell, &rho).unwrap();
        assert!(out.matrix().max_abs_diff(&bell_projector(BellState::PhiPlus)) < 1e-15);
        let flip = Circuit::new(2, BTreeMap::new(), vec![Gate::x(0)]).unwrap();
        assert_eq!(run(&flip, &rho).unwrap(), basis("10"));
        assert!(run(&flip, &basis("0")).is_err());
    }

    #[test]
    fn run_agrees_with_total_unitary() {
        let c = witness_circuit();
        let u = c.unitary().unwrap();
        assert!(u.unitarity_deviation() < 1e-10);
        let rho = random_density(&mut stream_rng(1, 0), 4, 3);
        let a = run(&c, &rho).unwrap();
        assert!(a.matrix().max_abs_diff(&rho.matrix().conjugate_by(&u)) < 1e-12);
        let back = run(&c.inverse(), &a).unwrap();
        assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-12);
    }

    #[test]
    fn parameter_maps() {
        assert_eq!((theta_of(0.0).unwrap(), alpha_of(0.0).unwrap(), beta_of(0.0).unwrap()), (0.0, 1.0, 1.0));
        assert!((theta_of(1.0).unwrap() - PI / 2.0).abs() < 1e-15);
        assert_eq!((alpha_of(1.0).unwrap(), beta_of(1.0).unwrap()), (0.0, 0.0));
        assert!((alpha_of(0.375).unwrap() - 5.0 / 17.0).abs() < 1e-15);
        assert!((beta_of(0.375).unwrap() - 5.0 / 11.0).abs() < 1e-15);
        assert!((theta_of(0.375).unwrap() - 2.0 * 0.375f64.sqrt().atan()).abs() < 1e-15);
        assert!(theta_of(1.5).is_err() && alpha_of(-0.1).is_err());
        assert_eq!(theta(f64::INFINITY), PI);
    }

    #[test]
    fn noisy_bell_endpoints() {
        let v = validate_noisy_bell(BellState::PhiPlus, 0.0).unwrap();
        assert!(v.trace_distance <= 1e-10);
        for psi in [BellState::PhiPlus, BellState::PsiMinus] {
            let v = validate_noisy_bell(psi, 1.0).unwrap();
            assert!(v.marginal.max_abs_diff(&ComplexMatrix::identity(4).scale(0.25)) <= 1e-10);
        }
    }

    #[test]
    fn noisy_bell_reproduces_werner_family() {
        for psi in [BellState::PhiPlus, BellState::PsiMinus] {
            for k in 0..=20 {
                let p = k as f64 * 0.05;
                let v = validate_noisy_bell(psi, p).unwrap();
                assert!(v.trace_distance <= 1e-8, "{psi} p={p}: {}", v.trace_distance);
                assert!((v.marginal.trace().re - 1.0).abs() <= 1e-10);
                assert!(eig_hermitian(&v.marginal).unwrap().min() >= -1e-10);
            }
        }
    }

    #[test]
    fn printed_string_uses_complementary_weight() {
        let c = bell_gate_string(BellState::PsiMinus, 0.375).unwrap();
        let at_p = validate_preparation(&c, BellState::PsiMinus, 0.375).unwrap();
        let at_complement = validate_preparation(&c, BellState::PsiMinus, 0.625).unwrap();
        assert!((at_p.trace_distance - 0.1875).abs() < 1e-8);
        assert!(at_complement.trace_distance < 1e-10);
    }

    #[test]
    fn preparation_circuits_are_unitary_and_pure() {
        for psi in [BellState::PhiPlus, BellState::PsiMinus] {
            let c = prepare_noisy_bell(psi, 0.3).unwrap();
            assert!(c.unitary().unwrap().unitarity_deviation() <= 1e-10);
            assert!((run(&c, &zero_state(6)).unwrap().purity() - 1.0).abs() <= 1e-10);
            assert_eq!(c.qubit("q4"), Some(3));
        }
        assert!(bell_gate_string(BellState::PsiPlus, 0.3).is_err());
    }

    #[test]
    fn witness_circuit_targets() {
        let cases = [
            (DensityOperator::new(bell_projector(BellState::PhiPlus)).unwrap(), 0.0),
            (DensityOperator::maximally_mixed(2), 0.25),
            (DensityOperator::new(bell_projector(BellState::PsiMinus)).unwrap(), 0.5),
        ];
        for (rho, target) in cases {
            assert!((witness_probability(&rho).unwrap() - target).abs() < 1e-12);
        }
    }

    #[test]
    fn witness_circuit_matches_witness_on_random_states() {
        let mut rng = stream_rng(12, 0);
        let states: Vec<_> = (0..50).map(|_| random_density(&mut rng, 2, 4)).collect();
        let dev = validate_witness_circuit(&states, &build_witness().w).unwrap();
        assert!(dev < 1e-12, "{dev}");
    }

    #[test]
    fn inverse_circuit_prepares_the_witness() {
        let out = run(&witness_circuit().inverse(), &zero_state(4)).unwrap();
        let reduced = partial_trace(out.matrix(), &WITNESS_DATA).unwrap();
        assert!(reduced.max_abs_diff(&build_witness().w) < 1e-12);
    }

    #[test]
    fn embed_places_factors() {
        let e = embed(&basis("11"), &[0, 3], &basis("00")).unwrap();
        assert_eq!(e, basis("1001"));
        let e = embed(&basis("10"), &[2, 0], &basis("1")).unwrap();
        assert_eq!(e, basis("011"));
    }

    #[test]
    fn circuit_json_round_trip() {
        let c = witness_circuit();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"label_map\"") && text.contains("\"CCX\""));
        let back: Circuit = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"n_qubits":1,"gates":[{"kind":"CX","qubits":[0,1]}]}"#;
        assert!(serde_json::from_str::<Circuit>(bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn run_is_multiplicative(seed in 0u64..1000, split in 0usize..10) {
            let c = witness_circuit();
            let (a, b) = c.gates().split_at(split);
            let c1 = Circuit::new(4, BTreeMap::new(), a.to_vec()).unwrap();
            let c2 = Circuit::new(4, BTreeMap::new(), b.to_vec()).unwrap();
            let rho = random_density(&mut stream_rng(seed, 0), 4, 2);
            let whole = run(&c1.then(&c2).unwrap(), &rho).unwrap();
            let staged = run(&c2, &run(&c1, &rho).unwrap()).unwrap();
            prop_assert_eq!(whole, staged);
        }
    }
}
