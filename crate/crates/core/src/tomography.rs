//! Detector tomography: probe states, Born-rule shot simulation, least-squares
//! reconstruction of effects and repair to a physical POVM.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qops::{
    c, eig_hermitian, expectation, random::stream_rng, ComplexMatrix, DensityOperator,
    OutcomeString, C64, STRUCTURAL_TOL,
};

/// Tolerance on positivity, the unit upper bound and completeness.
pub const POVM_TOL: f64 = 1e-8;

/// Hermitian effect `0 ≤ Π ≤ I` for one outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElementJson", into = "ElementJson")]
pub struct PovmElement {
    pub outcome: OutcomeString,
    matrix: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
struct ElementJson {
    outcome: OutcomeString,
    matrix: ComplexMatrix,
}

impl TryFrom<ElementJson> for PovmElement {
    type Error = Error;
    fn try_from(j: ElementJson) -> Result<Self> {
        Self::new(j.outcome, j.matrix)
    }
}

impl From<PovmElement> for ElementJson {
    fn from(e: PovmElement) -> Self {
        Self { outcome: e.outcome, matrix: e.matrix }
    }
}

impl PovmElement {
    pub fn new(outcome: OutcomeString, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.n_qubits() != outcome.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << outcome.len(),
                got: matrix.dim(),
            });
        }
        let dev = matrix.hermitian_deviation();
        if dev > STRUCTURAL_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let eig = eig_hermitian(&matrix)?;
        if eig.min() < -POVM_TOL {
            return Err(Error::NotPositive(eig.min()));
        }
        if eig.max() > 1.0 + POVM_TOL {
            return Err(Error::Validation(format!(
                "effect has eigenvalue {:.6} above 1",
                eig.max()
            )));
        }
        Ok(Self { outcome, matrix })
    }

    /// The noiseless projector `|a⟩⟨a|`.
    pub fn ideal(outcome: OutcomeString) -> Self {
        let matrix = ComplexMatrix::basis_projector(1 << outcome.len(), outcome.index());
        Self { outcome, matrix }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn n_qubits(&self) -> usize {
        self.outcome.len()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// One effect per outcome string, in ascending outcome index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmJson", into = "PovmJson")]
pub struct Povm {
    elements: Vec<PovmElement>,
}

#[derive(Serialize, Deserialize)]
struct PovmJson {
    elements: Vec<PovmElement>,
}

impl TryFrom<PovmJson> for Povm {
    type Error = Error;
    fn try_from(j: PovmJson) -> Result<Self> {
        Self::new(j.elements)
    }
}

impl From<Povm> for PovmJson {
    fn from(p: Povm) -> Self {
        Self { elements: p.elements }
    }
}

impl Povm {
    pub fn new(elements: Vec<PovmElement>) -> Result<Self> {
        let n = elements.first().map(PovmElement::n_qubits).unwrap_or(0);
        if n == 0 || elements.len() != 1 << n {
            return Err(Error::Validation(format!(
                "a POVM on {n} qubits needs {} elements, got {}",
                1usize << n,
                elements.len()
            )));
        }
        for (i, e) in elements.iter().enumerate() {
            if e.outcome.index() != i || e.n_qubits() != n {
                return Err(Error::Validation(format!(
                    "element {i} carries outcome {}",
                    e.outcome
                )));
            }
        }
        let povm = Self { elements };
        let dev = povm.completeness_deviation();
        if dev > POVM_TOL {
            return Err(Error::Incomplete(dev));
        }
        Ok(povm)
    }

    /// Assigns outcomes by position.
    pub fn from_matrices(matrices: Vec<ComplexMatrix>) -> Result<Self> {
        let n = matrices.first().map(ComplexMatrix::n_qubits).unwrap_or(0);
        let elements = matrices
            .into_iter()
            .enumerate()
            .map(|(i, m)| PovmElement::new(OutcomeString::from_index(i, n.max(1)), m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(elements)
    }

    pub fn computational(n: usize) -> Self {
        Self {
            elements: OutcomeString::all(n).map(PovmElement::ideal).collect(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.elements[0].n_qubits()
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn element(&self, outcome: &OutcomeString) -> Option<&PovmElement> {
        self.elements.get(outcome.index()).filter(|e| &e.outcome == outcome)
    }

    pub fn completeness_deviation(&self) -> f64 {
        let d = 1usize << self.n_qubits();
        let sum = self
            .elements
            .iter()
            .fold(ComplexMatrix::zeros(d), |acc, e| &acc + &e.matrix);
        sum.max_abs_diff(&ComplexMatrix::identity(d))
    }

    /// `p(a) = tr[ρ Π_a]` for every outcome.
    pub fn probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        self.elements.iter().map(|e| expectation(rho, &e.matrix)).collect()
    }

    /// Largest element-wise max-norm distance to another POVM.
    pub fn max_distance(&self, other: &Povm) -> f64 {
        self.elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| a.matrix.max_abs_diff(&b.matrix))
            .fold(0.0, f64::max)
    }

    /// Completes a single published effect into a full POVM.
    ///
    /// The other outcomes share `I − Π` as `(I − Π)^{1/2} C_b (I − Π)^{1/2}`,
    /// where the diagonal `C_b` holds per-qubit bit-flip confusion weights
    /// `flip^{#differing bits}` renormalized over `b ≠ a`.
    pub fn complete_with_confusion(element: &PovmElement, flip: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&flip) {
            return Err(Error::OutOfRange { name: "flip", value: flip });
        }
        let n = element.n_qubits();
        let d = 1usize << n;
        let a = element.outcome.index();
        let rest = &ComplexMatrix::identity(d) - &element.matrix;
        let rest_sqrt = eig_hermitian(&rest)?.map(|x| x.max(0.0).sqrt());
        let confusion = |b: usize, x: usize| -> f64 {
            let flips = (b ^ x).count_ones() as i32;
            flip.powi(flips) * (1.0 - flip).powi(n as i32 - flips)
        };
        let mut matrices = Vec::with_capacity(d);
        for b in 0..d {
            if b == a {
                matrices.push(element.matrix.clone());
                continue;
            }
            let weights: Vec<f64> = (0..d)
                .map(|x| {
                    let norm: f64 = (0..d).filter(|&bb| bb != a).map(|bb| confusion(bb, x)).sum();
                    confusion(b, x) / norm
                })
                .collect();
            let cb = ComplexMatrix::from_real_diagonal(&weights)?;
            matrices.push((&(&rest_sqrt * &cb) * &rest_sqrt).hermitian_part());
        }
        Self::from_matrices(matrices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeScheme {
    /// Eigenstates of X, Y and Z on every qubit: `6^n` probes.
    Pauli6,
    /// Tetrahedral single-qubit states on every qubit: `4^n` probes.
    Mub4,
}

impl FromStr for ProbeScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pauli6" => Ok(Self::Pauli6),
            "mub4" => Ok(Self::Mub4),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

impl fmt::Display for ProbeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pauli6 => "pauli6",
            Self::Mub4 => "mub4",
        })
    }
}

fn bloch_state(x: f64, y: f64, z: f64) -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![c((1.0 + z) / 2.0, 0.0), c(x / 2.0, -y / 2.0)],
        vec![c(x / 2.0, y / 2.0), c((1.0 - z) / 2.0, 0.0)],
    ])
    .expect("2x2")
}

fn single_qubit_probes(scheme: ProbeScheme) -> Vec<(&'static str, ComplexMatrix)> {
    match scheme {
        ProbeScheme::Pauli6 => vec![
            ("z+", bloch_state(0.0, 0.0, 1.0)),
            ("z-", bloch_state(0.0, 0.0, -1.0)),
            ("x+", bloch_state(1.0, 0.0, 0.0)),
            ("x-", bloch_state(-1.0, 0.0, 0.0)),
            ("y+", bloch_state(0.0, 1.0, 0.0)),
            ("y-", bloch_state(0.0, -1.0, 0.0)),
        ],
        ProbeScheme::Mub4 => {
            let s = 1.0 / 3f64.sqrt();
            vec![
                ("t0", bloch_state(s, s, s)),
                ("t1", bloch_state(s, -s, -s)),
                ("t2", bloch_state(-s, s, -s)),
                ("t3", bloch_state(-s, -s, s)),
            ]
        }
    }
}

/// Product probe states with their identifiers (`"z+_x-"` style).
#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub scheme: ProbeScheme,
    pub ids: Vec<String>,
    pub states: Vec<DensityOperator>,
}

impl ProbeSet {
    pub fn new(n: usize, scheme: ProbeScheme) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange { name: "n", value: 0.0 });
        }
        let single = single_qubit_probes(scheme);
        let mut ids = vec![String::new()];
        let mut mats: Vec<Option<ComplexMatrix>> = vec![None];
        for _ in 0..n {
            let mut next_ids = Vec::with_capacity(ids.len() * single.len());
            let mut next_mats = Vec::with_capacity(ids.len() * single.len());
            for (id, m) in ids.iter().zip(&mats) {
                for (label, s) in &single {
                    next_ids.push(if id.is_empty() {
                        label.to_string()
                    } else {
                        format!("{id}_{label}")
                    });
                    next_mats.push(Some(match m {
                        Some(m) => m.kron(s),
                        None => s.clone(),
                    }));
                }
            }
            ids = next_ids;
            mats = next_mats;
        }
        let states = mats
            .into_iter()
            .map(|m| DensityOperator::assume_valid(m.expect("n >= 1")))
            .collect();
        Ok(Self { scheme, ids, states })
    }

    pub fn n_qubits(&self) -> usize {
        self.states[0].n_qubits()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn probe_states(n: usize, scheme: ProbeScheme) -> Result<Vec<DensityOperator>> {
    Ok(ProbeSet::new(n, scheme)?.states)
}

/// Outcome counts per probe, serialized as
/// `{"shots": N, "seed": s, "counts": {"<probe-id>": {"<bitstring>": n}}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    pub shots: u64,
    pub seed: u64,
    pub counts: BTreeMap<String, BTreeMap<String, u64>>,
}

impl CountTable {
    pub fn validate(&self) -> Result<()> {
        for (probe, row) in &self.counts {
            let total: u64 = row.values().sum();
            if total != self.shots {
                return Err(Error::Validation(format!(
                    "probe {probe} has {total} counts, expected {}",
                    self.shots
                )));
            }
            for key in row.keys() {
                key.parse::<OutcomeString>()?;
            }
        }
        Ok(())
    }
}

/// Draws `shots` outcomes for one probe.
///
/// Counts come from a chain of conditional binomials, which is an exact
/// multinomial sample.
pub fn simulate_shots(
    povm: &Povm,
    probe: &DensityOperator,
    shots: u64,
    seed: u64,
) -> Result<BTreeMap<OutcomeString, u64>> {
    sample_counts(povm, probe, shots, seed, 0)
}

pub fn sample_counts(
    povm: &Povm,
    probe: &DensityOperator,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<BTreeMap<OutcomeString, u64>> {
    if shots == 0 {
        return Err(Error::OutOfRange { name: "shots", value: 0.0 });
    }
    let probs = povm.probabilities(probe)?;
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::ProbabilitySum(total));
    }
    let probs: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
    let mut rng = stream_rng(seed, stream);
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut out = BTreeMap::new();
    for (e, &p) in povm.elements().iter().zip(&probs) {
        let k = if remaining == 0 || mass <= 0.0 {
            0
        } else if p >= mass {
            remaining
        } else {
            Binomial::new(remaining, (p / mass).clamp(0.0, 1.0))
                .expect("probability in [0, 1]")
                .sample(&mut rng)
        };
        out.insert(e.outcome.clone(), k);
        remaining -= k;
        mass -= p;
    }
    Ok(out)
}

/// Samples every probe of `probes`; probe `i` uses stream `i` of `seed`.
pub fn simulate_counts(povm: &Povm, probes: &ProbeSet, shots: u64, seed: u64) -> Result<CountTable> {
    let rows: Vec<(String, BTreeMap<String, u64>)> = probes
        .states
        .par_iter()
        .enumerate()
        .map(|(i, rho)| {
            let counts = sample_counts(povm, rho, shots, seed, i as u64)?;
            let row = counts.into_iter().map(|(o, k)| (o.to_string(), k)).collect();
            Ok((probes.ids[i].clone(), row))
        })
        .collect::<Result<_>>()?;
    Ok(CountTable {
        shots,
        seed,
        counts: rows.into_iter().collect(),
    })
}

/// Tensor products of I, X, Y, Z on `n` qubits, in lexicographic order.
fn pauli_basis(n: usize) -> Vec<ComplexMatrix> {
    let i = c(0.0, 1.0);
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let single = [
        DMatrix::from_row_slice(2, 2, &[one, zero, zero, one]),
        DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]),
        DMatrix::from_row_slice(2, 2, &[zero, -i, i, zero]),
        DMatrix::from_row_slice(2, 2, &[one, zero, zero, -one]),
    ];
    let mut basis: Vec<DMatrix<C64>> = vec![DMatrix::from_element(1, 1, one)];
    for _ in 0..n {
        basis = basis
            .iter()
            .flat_map(|b| single.iter().map(move |s| b.kronecker(s)))
            .collect();
    }
    basis.into_iter().map(|m| ComplexMatrix::new(m).expect("power of two")).collect()
}

/// Least-squares effects from per-probe outcome frequencies `freqs[probe][outcome]`.
///
/// Each effect is expanded in the Pauli basis; the real design matrix
/// `A[k][j] = tr[ρ_k P_j]` is inverted through its SVD.
pub fn linear_inversion(states: &[DensityOperator], freqs: &[Vec<f64>]) -> Result<Vec<ComplexMatrix>> {
    let n = states.first().map(DensityOperator::n_qubits).ok_or_else(|| {
        Error::RankDeficient { rank: 0, needed: 1 }
    })?;
    let basis = pauli_basis(n);
    let needed = basis.len();
    let design = DMatrix::from_fn(states.len(), needed, |k, j| {
        crate::qops::trace_product(states[k].matrix(), &basis[j]).re
    });
    let svd = design.svd(true, true);
    let top = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * top).count();
    if rank < needed {
        return Err(Error::RankDeficient { rank, needed });
    }
    let outcomes = 1usize << n;
    (0..outcomes)
        .map(|a| {
            let rhs = DVector::from_iterator(states.len(), freqs.iter().map(|row| row[a]));
            let coeffs = svd
                .solve(&rhs, 1e-12 * top)
                .map_err(|e| Error::Validation(e.to_string()))?;
            let m = basis
                .iter()
                .zip(coeffs.iter())
                .fold(ComplexMatrix::zeros(outcomes), |acc, (p, &w)| &acc + &p.scale(w));
            Ok(m.hermitian_part())
        })
        .collect()
}

/// Raw least-squares effects and their physical projection.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub raw: Vec<ComplexMatrix>,
    pub povm: Povm,
}

pub fn reconstruct_povm(probes: &ProbeSet, counts: &CountTable) -> Result<Reconstruction> {
    counts.validate()?;
    let n = probes.n_qubits();
    let freqs = probes
        .ids
        .iter()
        .map(|id| {
            let row = counts.counts.get(id).ok_or_else(|| Error::MissingCounts(id.clone()))?;
            let shots = counts.shots as f64;
            let mut f = vec![0.0; 1 << n];
            for (bits, &k) in row {
                let o: OutcomeString = bits.parse()?;
                if o.len() != n {
                    return Err(Error::InvalidOutcome(bits.clone()));
                }
                f[o.index()] = k as f64 / shots;
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    reconstruct_from_frequencies(&probes.states, &freqs)
}

/// As [`reconstruct_povm`] for frequencies (or exact probabilities) directly.
pub fn reconstruct_from_frequencies(states: &[DensityOperator], freqs: &[Vec<f64>]) -> Result<Reconstruction> {
    let raw = linear_inversion(states, freqs)?;
    let povm = project_to_physical(&raw)?;
    Ok(Reconstruction { raw, povm })
}

/// Clips negative eigenvalues of every element, then rescales jointly by
/// `S^{-1/2} (·) S^{-1/2}` with `S` the clipped sum, restoring `Σ Π = I`.
pub fn project_to_physical(raw: &[ComplexMatrix]) -> Result<Povm> {
    let first = raw.first().ok_or_else(|| Error::Validation("empty POVM".into()))?;
    let d = first.dim();
    let sum = raw.iter().fold(ComplexMatrix::zeros(d), |acc, m| &acc + m);
    let dev = sum.max_abs_diff(&ComplexMatrix::identity(d));
    if dev > 0.2 {
        return Err(Error::Incomplete(dev));
    }
    let clipped = raw
        .iter()
        .map(|m| Ok(eig_hermitian(&m.hermitian_part())?.map(|x| x.max(0.0))))
        .collect::<Result<Vec<_>>>()?;
    let s = clipped.iter().fold(ComplexMatrix::zeros(d), |acc, m| &acc + m);
    let s_eig = eig_hermitian(&s.hermitian_part())?;
    if s_eig.min() <= 1e-12 {
        return Err(Error::Validation("clipped effects do not span the space".into()));
    }
    let inv_sqrt = s_eig.map(|x| 1.0 / x.sqrt());
    let fixed: Vec<ComplexMatrix> = clipped
        .iter()
        .map(|m| m.conjugate_by(&inv_sqrt).hermitian_part())
        .collect();
    let n = first.n_qubits();
    let elements = fixed
        .into_iter()
        .enumerate()
        .map(|(i, m)| PovmElement::new(OutcomeString::from_index(i, n), m))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(elements)
}
