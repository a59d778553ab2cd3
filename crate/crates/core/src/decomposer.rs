//! Decomposition of a normalized noisy effect as
//! `Π̃ = (1 − ε) V|a⟩⟨a|V† + ε P` with product `V` and unit-trace `P ≥ 0`,
//! chosen to minimize `ε · δ(P)`, plus crosstalk and partial-transpose tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{multistart, MultistartOptions};
use crate::qops::{
    eig_hermitian, operator_schmidt_spectrum, partial_transpose, ComplexMatrix, LocalUnitary,
    OutcomeString,
};
use crate::tomography::{Povm, PovmElement, POVM_TOL};

/// Below this `ε` the decomposition is exact and `P` is left undefined.
pub const EXACT_EPSILON: f64 = 1e-12;

/// Eigenvalues of `Π̃` at or below this are treated as outside its support.
const SUPPORT_TOL: f64 = 1e-12;

/// Unit-trace effect `Π / tr Π` with the trace kept for post-processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedElement {
    pub outcome: OutcomeString,
    pub matrix: ComplexMatrix,
    pub trace: f64,
}

pub fn normalize_element(pi: &PovmElement) -> Result<NormalizedElement> {
    let trace = pi.trace();
    if trace <= 1e-12 {
        return Err(Error::VanishingTrace(trace));
    }
    Ok(NormalizedElement {
        outcome: pi.outcome.clone(),
        matrix: pi.matrix().scale(1.0 / trace),
        trace,
    })
}

/// For effects published already normalized: rescales to exact unit trace
/// and carries the separately reported `tr Π`.
pub fn normalize_with_trace(pi: &PovmElement, declared_trace: f64) -> Result<NormalizedElement> {
    if declared_trace <= 1e-12 {
        return Err(Error::VanishingTrace(declared_trace));
    }
    let mut n = normalize_element(pi)?;
    n.trace = declared_trace;
    Ok(n)
}

/// Extremes of `tr[ρ P]` over states and the derived half-width and center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub b_minus: f64,
    pub b_plus: f64,
    pub delta: f64,
    pub q_c: f64,
}

pub fn spectral_window(p: &ComplexMatrix) -> Result<SpectralWindow> {
    let eig = eig_hermitian(p)?;
    let (b_minus, b_plus) = (eig.min(), eig.max());
    Ok(SpectralWindow {
        b_minus,
        b_plus,
        delta: (b_plus - b_minus) / 2.0,
        q_c: (b_plus + b_minus) / 2.0,
    })
}

/// Smallest feasible `ε` for a fixed `V` and the resulting residual.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub epsilon: f64,
    /// `R(ε) = Π̃ − (1 − ε) V|a⟩⟨a|V†`, equal to `ε P`.
    pub residual: ComplexMatrix,
    /// `R(ε)/ε`; `None` when `ε` vanishes.
    pub p: Option<ComplexMatrix>,
    /// `ε · δ(P)`, computed as half the spectral spread of `R(ε)`.
    pub objective: f64,
}

/// Solves `min ε` subject to `Π̃ − (1 − ε) V|a⟩⟨a|V† ≥ 0`.
///
/// With `|φ⟩ = V|a⟩` the answer is `1 − 1/⟨φ|Π̃⁺|φ⟩` when `|φ⟩` lies in the
/// support of `Π̃`, clamped to `[0, 1]`, and `1` otherwise.
pub fn min_epsilon_for_unitary(
    pi_tilde: &ComplexMatrix,
    v: &LocalUnitary,
    a: &OutcomeString,
) -> Result<InnerSolution> {
    if v.n_qubits() != a.len() || pi_tilde.n_qubits() != a.len() {
        return Err(Error::DimensionMismatch {
            expected: pi_tilde.n_qubits(),
            got: a.len(),
        });
    }
    let eig = eig_hermitian(pi_tilde)?;
    if eig.min() < -POVM_TOL {
        return Err(Error::NotPositive(eig.min()));
    }
    let phi = v.apply_to_basis(a);
    let overlaps = eig.vectors.adjoint() * &phi;
    let mut inv_weight = 0.0;
    let mut outside = 0.0;
    for (k, &lam) in eig.values.iter().enumerate() {
        let w = overlaps[k].norm_sqr();
        if lam > SUPPORT_TOL {
            inv_weight += w / lam;
        } else {
            outside += w;
        }
    }
    let epsilon = if outside > SUPPORT_TOL || inv_weight <= 0.0 {
        1.0
    } else {
        (1.0 - 1.0 / inv_weight).clamp(0.0, 1.0)
    };
    let projector = ComplexMatrix::outer(&phi)?;
    let residual = (pi_tilde - &projector.scale(1.0 - epsilon)).hermitian_part();
    let spread = eig_hermitian(&residual)?;
    let objective = (spread.max() - spread.min()) / 2.0;
    let p = (epsilon > EXACT_EPSILON).then(|| residual.scale(1.0 / epsilon));
    Ok(InnerSolution {
        epsilon,
        residual,
        p,
        objective: if epsilon > EXACT_EPSILON { objective } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub search: MultistartOptions,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            search: MultistartOptions::default(),
        }
    }
}

impl DecomposeOptions {
    pub fn with_seed(seed: u64) -> Self {
        let mut o = Self::default();
        o.search.seed = seed;
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub starts: usize,
    pub evals: usize,
    pub seed: u64,
    pub best_start: usize,
}

/// One outcome's decomposition; `p` is `None` when `exact` (`ε = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDecomposition {
    pub outcome: OutcomeString,
    pub epsilon: f64,
    #[serde(rename = "V")]
    pub v: LocalUnitary,
    #[serde(rename = "P")]
    pub p: Option<ComplexMatrix>,
    pub b_minus: f64,
    pub b_plus: f64,
    pub delta: f64,
    pub q_c: f64,
    pub objective: f64,
    pub exact: bool,
    /// `tr Π` of the element before normalization.
    pub trace_pi: f64,
}

impl ElementDecomposition {
    pub fn from_inner(
        outcome: &OutcomeString,
        v: LocalUnitary,
        inner: InnerSolution,
        trace_pi: f64,
    ) -> Result<Self> {
        let (window, exact) = match &inner.p {
            Some(p) => (spectral_window(p)?, false),
            None => (
                SpectralWindow {
                    b_minus: 0.0,
                    b_plus: 0.0,
                    delta: 0.0,
                    q_c: 0.0,
                },
                true,
            ),
        };
        Ok(Self {
            outcome: outcome.clone(),
            epsilon: inner.epsilon,
            v,
            p: inner.p,
            b_minus: window.b_minus,
            b_plus: window.b_plus,
            delta: window.delta,
            q_c: window.q_c,
            objective: inner.epsilon * window.delta,
            exact,
            trace_pi,
        })
    }

    /// Builds `Π = tr Π · [(1 − ε)V|a⟩⟨a|V† + εP]` together with its decomposition.
    pub fn synthetic(
        outcome: &OutcomeString,
        v: LocalUnitary,
        p: ComplexMatrix,
        epsilon: f64,
        trace_pi: f64,
    ) -> Result<(Self, PovmElement)> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        let window = spectral_window(&p)?;
        let phi = v.apply_to_basis(outcome);
        let pi_tilde = &ComplexMatrix::outer(&phi)?.scale(1.0 - epsilon) + &p.scale(epsilon);
        let element = PovmElement::new(outcome.clone(), pi_tilde.scale(trace_pi).hermitian_part())?;
        let exact = epsilon <= EXACT_EPSILON;
        let d = Self {
            outcome: outcome.clone(),
            epsilon,
            v,
            p: (!exact).then_some(p),
            b_minus: window.b_minus,
            b_plus: window.b_plus,
            delta: window.delta,
            q_c: window.q_c,
            objective: epsilon * window.delta,
            exact,
            trace_pi,
        };
        Ok((d, element))
    }

    /// Max-norm residual of `Π̃ − (1 − ε)V|a⟩⟨a|V† − εP`.
    pub fn reconstruction_error(&self, pi_tilde: &ComplexMatrix) -> Result<f64> {
        let phi = self.v.apply_to_basis(&self.outcome);
        let mut rebuilt = ComplexMatrix::outer(&phi)?.scale(1.0 - self.epsilon);
        if let Some(p) = &self.p {
            rebuilt = &rebuilt + &p.scale(self.epsilon);
        }
        Ok(pi_tilde.max_abs_diff(&rebuilt))
    }
}

/// Best single-element decomposition together with search metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementSearch {
    #[serde(flatten)]
    pub decomposition: ElementDecomposition,
    /// Three Z-Y-Z angles per qubit of the returned `V`.
    pub angles: Vec<f64>,
    /// Objective of `V = I`, which the search never exceeds.
    pub identity_objective: f64,
    pub optimizer: OptimizerInfo,
}

pub fn decompose_element(pi: &NormalizedElement, opts: &DecomposeOptions) -> Result<ElementSearch> {
    let n = pi.outcome.len();
    let a = &pi.outcome;
    let objective = |angles: &[f64]| -> f64 {
        min_epsilon_for_unitary(&pi.matrix, &LocalUnitary::from_euler(angles), a)
            .map(|s| s.objective)
            .unwrap_or(f64::INFINITY)
    };
    let identity = min_epsilon_for_unitary(&pi.matrix, &LocalUnitary::identity(n), a)?;
    let x0 = vec![0.0; 3 * n];
    let found = multistart(objective, &x0, &opts.search);
    let (angles, inner) = if found.best.f <= identity.objective {
        let v = LocalUnitary::from_euler(&found.best.x);
        (found.best.x.clone(), min_epsilon_for_unitary(&pi.matrix, &v, a)?)
    } else {
        (x0, identity.clone())
    };
    let decomposition =
        ElementDecomposition::from_inner(a, LocalUnitary::from_euler(&angles), inner, pi.trace)?;
    assert!(decomposition.objective <= identity.objective + 1e-12);
    Ok(ElementSearch {
        decomposition,
        angles,
        identity_objective: identity.objective,
        optimizer: OptimizerInfo {
            starts: found.finals.len(),
            evals: found.total_evals,
            seed: opts.search.seed,
            best_start: found.best_start,
        },
    })
}

/// Shared-`V` decomposition of every outcome of a POVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullDecomposition {
    #[serde(rename = "V")]
    pub v: LocalUnitary,
    pub angles: Vec<f64>,
    pub outcomes: Vec<ElementDecomposition>,
    /// `Σ_a ε_a δ(P_a)`.
    pub objective: f64,
    pub identity_objective: f64,
    pub optimizer: OptimizerInfo,
}

fn full_objective(normalized: &[NormalizedElement], v: &LocalUnitary) -> Result<f64> {
    normalized
        .iter()
        .map(|e| Ok(min_epsilon_for_unitary(&e.matrix, v, &e.outcome)?.objective))
        .sum()
}

pub fn decompose_full(povm: &Povm, opts: &DecomposeOptions) -> Result<FullDecomposition> {
    let n = povm.n_qubits();
    let normalized = povm
        .elements()
        .iter()
        .map(normalize_element)
        .collect::<Result<Vec<_>>>()?;
    let objective = |angles: &[f64]| -> f64 {
        full_objective(&normalized, &LocalUnitary::from_euler(angles)).unwrap_or(f64::INFINITY)
    };
    let x0 = vec![0.0; 3 * n];
    let identity_objective = full_objective(&normalized, &LocalUnitary::identity(n))?;
    let found = multistart(objective, &x0, &opts.search);
    let angles = if found.best.f <= identity_objective { found.best.x.clone() } else { x0 };
    let v = LocalUnitary::from_euler(&angles);
    let outcomes = normalized
        .iter()
        .map(|e| {
            let inner = min_epsilon_for_unitary(&e.matrix, &v, &e.outcome)?;
            ElementDecomposition::from_inner(&e.outcome, v.clone(), inner, e.trace)
        })
        .collect::<Result<Vec<_>>>()?;
    let objective = outcomes.iter().map(|d| d.objective).sum();
    Ok(FullDecomposition {
        v,
        angles,
        outcomes,
        objective,
        identity_objective,
        optimizer: OptimizerInfo {
            starts: found.finals.len(),
            evals: found.total_evals,
            seed: opts.search.seed,
            best_start: found.best_start,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosstalkVerdict {
    Product,
    Crosstalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSpectrum {
    /// Qubits on one side of the cut.
    pub part: Vec<usize>,
    pub spectrum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkReport {
    pub verdict: CrosstalkVerdict,
    pub cuts: Vec<CutSpectrum>,
}

/// Flags crosstalk when some single-qubit cut has a second operator Schmidt
/// coefficient above `rel_tol` times the first.
pub fn detect_crosstalk(pi: &PovmElement, rel_tol: f64) -> Result<CrosstalkReport> {
    let n = pi.n_qubits();
    if n < 2 {
        return Err(Error::Unsupported("crosstalk needs at least two qubits".into()));
    }
    let parts: Vec<Vec<usize>> = if n == 2 { vec![vec![0]] } else { (0..n).map(|q| vec![q]).collect() };
    let cuts = parts
        .into_iter()
        .map(|part| {
            let spectrum = operator_schmidt_spectrum(pi.matrix(), &part)?;
            Ok(CutSpectrum { part, spectrum })
        })
        .collect::<Result<Vec<_>>>()?;
    let crosstalk = cuts.iter().any(|c| c.spectrum.len() > 1 && c.spectrum[1] > rel_tol * c.spectrum[0]);
    Ok(CrosstalkReport {
        verdict: if crosstalk { CrosstalkVerdict::Crosstalk } else { CrosstalkVerdict::Product },
        cuts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PptVerdict {
    Ppt,
    Npt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PptReport {
    pub transposed: Vec<usize>,
    pub verdict: PptVerdict,
    pub min_eigenvalue: f64,
}

/// Partial-transpose test of a unit-trace PSD operator on the cut `transposed | rest`.
pub fn ppt_check(p: &ComplexMatrix, transposed: &[usize]) -> Result<PptReport> {
    let tr = p.trace().re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(Error::NotUnitTrace(tr));
    }
    let lam = eig_hermitian(p)?.min();
    if lam < -POVM_TOL {
        return Err(Error::NotPositive(lam));
    }
    let min_eigenvalue = eig_hermitian(&partial_transpose(p, transposed)?)?.min();
    Ok(PptReport {
        transposed: transposed.to_vec(),
        verdict: if min_eigenvalue < -1e-8 { PptVerdict::Npt } else { PptVerdict::Ppt },
        min_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::random::{random_local_unitary, random_unit_trace_psd, stream_rng};
    use crate::qops::{bell_projector, c, BellState};

    fn outcome(s: &str) -> OutcomeString {
        s.parse().unwrap()
    }

    /// Smallest ε on a grid-refined bisection of min eig R(ε) ≥ 0.
    fn bisect_epsilon(pi_tilde: &ComplexMatrix, v: &LocalUnitary, a: &OutcomeString) -> f64 {
        let proj = ComplexMatrix::outer(&v.apply_to_basis(a)).unwrap();
        let feasible = |e: f64| {
            let r = (pi_tilde - &proj.scale(1.0 - e)).hermitian_part();
            eig_hermitian(&r).unwrap().min() >= -1e-13
        };
        if feasible(0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn noiseless_projector_needs_no_epsilon() {
        let a = outcome("01");
        let pi = ComplexMatrix::basis_projector(4, a.index());
        let s = min_epsilon_for_unitary(&pi, &LocalUnitary::identity(2), &a).unwrap();
        assert_eq!(s.epsilon, 0.0);
        assert!(s.p.is_none());
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn depolarized_projector_closed_form() {
        // (1-λ)|a><a| + λ I/d needs ε = λ(d-1)/d
        let (lam, d) = (0.2, 4.0);
        let a = outcome("00");
        let pi = &ComplexMatrix::basis_projector(4, 0).scale(1.0 - lam) + &ComplexMatrix::identity(4).scale(lam / d);
        let s = min_epsilon_for_unitary(&pi, &LocalUnitary::identity(2), &a).unwrap();
        assert!((s.epsilon - 0.15).abs() < 1e-14);
        let b = bisect_epsilon(&pi, &LocalUnitary::identity(2), &a);
        assert!((b - 0.15).abs() < 1e-10);
    }

    #[test]
    fn closed_form_agrees_with_bisection() {
        let mut rng = stream_rng(21, 0);
        for trial in 0..100 {
            let n = 1 + trial % 2;
            let pi = random_unit_trace_psd(&mut rng, n);
            let v = random_local_unitary(&mut rng, n);
            let a = OutcomeString::from_index(trial % (1 << n), n);
            let s = min_epsilon_for_unitary(&pi, &v, &a).unwrap();
            let b = bisect_epsilon(&pi, &v, &a);
            assert!((s.epsilon - b).abs() < 1e-8, "trial {trial}: {} vs {b}", s.epsilon);
            // feasibility is monotone in ε
            let proj = ComplexMatrix::outer(&v.apply_to_basis(&a)).unwrap();
            for k in 1..=5 {
                let e = s.epsilon + (1.0 - s.epsilon) * k as f64 / 5.0;
                let r = (&pi - &proj.scale(1.0 - e)).hermitian_part();
                assert!(eig_hermitian(&r).unwrap().min() >= -1e-9);
            }
        }
    }

    #[test]
    fn singular_element_with_weight_outside_support() {
        // Π̃ = |1><1| cannot contain |0>
        let pi = ComplexMatrix::basis_projector(2, 1);
        let s = min_epsilon_for_unitary(&pi, &LocalUnitary::identity(1), &outcome("0")).unwrap();
        assert_eq!(s.epsilon, 1.0);
        assert!(s.p.unwrap().max_abs_diff(&pi) < 1e-15);
        // rank-deficient but containing |0>
        let pi = ComplexMatrix::from_real_diagonal(&[0.9, 0.1, 0.0, 0.0]).unwrap();
        let s = min_epsilon_for_unitary(&pi, &LocalUnitary::identity(2), &outcome("00")).unwrap();
        assert!((s.epsilon - 0.1).abs() < 1e-14);
    }

    #[test]
    fn inner_solve_rejects_non_positive_input() {
        let bad = ComplexMatrix::from_real_diagonal(&[1.1, -0.1]).unwrap();
        assert!(matches!(
            min_epsilon_for_unitary(&bad, &LocalUnitary::identity(1), &outcome("0")),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn spectral_window_examples() {
        let w = spectral_window(&ComplexMatrix::identity(4).scale(0.25)).unwrap();
        assert!((w.b_minus - 0.25).abs() < 1e-15 && (w.b_plus - 0.25).abs() < 1e-15);
        assert!(w.delta.abs() < 1e-15 && (w.q_c - 0.25).abs() < 1e-15);
        let w = spectral_window(&ComplexMatrix::from_real_diagonal(&[0.0, 1.0]).unwrap()).unwrap();
        assert_eq!((w.b_minus, w.b_plus, w.delta, w.q_c), (0.0, 1.0, 0.5, 0.5));
    }

    #[test]
    fn normalization() {
        let ideal = PovmElement::ideal(outcome("00"));
        let n = normalize_element(&ideal).unwrap();
        assert_eq!(n.trace, 1.0);
        assert_eq!(&n.matrix, ideal.matrix());
        let zero = PovmElement::new(outcome("0"), ComplexMatrix::zeros(2)).unwrap();
        assert!(matches!(normalize_element(&zero), Err(Error::VanishingTrace(_))));
    }

    #[test]
    fn ideal_element_decomposes_exactly() {
        let pi = normalize_element(&PovmElement::ideal(outcome("10"))).unwrap();
        let d = decompose_element(&pi, &DecomposeOptions::default()).unwrap().decomposition;
        assert_eq!(d.epsilon, 0.0);
        assert_eq!(d.objective, 0.0);
        assert!(d.exact && d.p.is_none());
        assert!(d.reconstruction_error(&pi.matrix).unwrap() < 1e-12);
    }

    #[test]
    fn decomposition_invariants_on_random_elements() {
        let mut rng = stream_rng(5, 1);
        let povm = Povm::from_matrices(crate::qops::random::noisy_computational_povm(&mut rng, 2, 0.2)).unwrap();
        let mut opts = DecomposeOptions::with_seed(4);
        opts.search.starts = 6;
        for e in povm.elements() {
            let pi = normalize_element(e).unwrap();
            let s = decompose_element(&pi, &opts).unwrap();
            let d = &s.decomposition;
            assert!(d.reconstruction_error(&pi.matrix).unwrap() <= 1e-8);
            let p = d.p.as_ref().unwrap();
            assert!((p.trace().re - 1.0).abs() <= 1e-8);
            assert!(eig_hermitian(p).unwrap().min() >= -1e-8);
            let w = spectral_window(p).unwrap();
            assert!((w.b_minus - d.b_minus).abs() < 1e-8 && (w.q_c - d.q_c).abs() < 1e-8);
            assert!(d.objective <= s.identity_objective);
            assert!((d.objective - d.epsilon * d.delta).abs() < 1e-12);
        }
    }

    #[test]
    fn search_is_deterministic_for_a_seed() {
        let mut rng = stream_rng(8, 0);
        let povm = Povm::from_matrices(crate::qops::random::noisy_computational_povm(&mut rng, 2, 0.3)).unwrap();
        let pi = normalize_element(&povm.elements()[2]).unwrap();
        let mut opts = DecomposeOptions::with_seed(17);
        opts.search.starts = 4;
        let a = decompose_element(&pi, &opts).unwrap();
        let b = decompose_element(&pi, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bit_flip_confusion_keeps_identity() {
        // diagonal elements of a per-qubit 5% flip channel
        let q = 0.05;
        let single = |bit: usize| ComplexMatrix::from_real_diagonal(&if bit == 0 { [1.0 - q, q] } else { [q, 1.0 - q] }).unwrap();
        let matrices: Vec<ComplexMatrix> = (0..4).map(|a| single(a >> 1).kron(&single(a & 1))).collect();
        let povm = Povm::from_matrices(matrices).unwrap();
        let mut opts = DecomposeOptions::with_seed(2);
        opts.search.starts = 8;
        let full = decompose_full(&povm, &opts).unwrap();
        for (e, d) in povm.elements().iter().zip(&full.outcomes) {
            let pi = normalize_element(e).unwrap();
            let at_identity = bisect_epsilon(&pi.matrix, &LocalUnitary::identity(2), &e.outcome);
            assert!((d.epsilon - at_identity).abs() < 1e-6, "{}: {} vs {at_identity}", e.outcome, d.epsilon);
        }
        assert!(full.objective <= full.identity_objective + 1e-15);
    }

    #[test]
    fn product_elements_factorize_the_inner_solve() {
        // for Π̃ = Ã ⊗ B̃ and V = V₁ ⊗ V₂: 1 - ε = (1 - ε_A)(1 - ε_B)
        let mut rng = stream_rng(13, 0);
        for _ in 0..20 {
            let a = random_unit_trace_psd(&mut rng, 1);
            let b = random_unit_trace_psd(&mut rng, 1);
            let v1 = random_local_unitary(&mut rng, 1);
            let v2 = random_local_unitary(&mut rng, 1);
            let both = LocalUnitary::new(vec![v1.factors()[0].clone(), v2.factors()[0].clone()]).unwrap();
            let ea = min_epsilon_for_unitary(&a, &v1, &outcome("0")).unwrap().epsilon;
            let eb = min_epsilon_for_unitary(&b, &v2, &outcome("1")).unwrap().epsilon;
            let eab = min_epsilon_for_unitary(&a.kron(&b), &both, &outcome("01")).unwrap().epsilon;
            assert!(((1.0 - eab) - (1.0 - ea) * (1.0 - eb)).abs() < 1e-10);
        }
    }

    #[test]
    fn crosstalk_on_product_and_correlated_elements() {
        let a = ComplexMatrix::from_rows(&[vec![c(0.9, 0.0), c(0.02, 0.01)], vec![c(0.02, -0.01), c(0.05, 0.0)]]).unwrap();
        let b = ComplexMatrix::from_real_diagonal(&[0.95, 0.03]).unwrap();
        let prod = PovmElement::new(outcome("00"), a.kron(&b)).unwrap();
        assert_eq!(detect_crosstalk(&prod, 1e-3).unwrap().verdict, CrosstalkVerdict::Product);
        let corr = PovmElement::new(outcome("00"), bell_projector(BellState::PhiPlus)).unwrap();
        let r = detect_crosstalk(&corr, 1e-3).unwrap();
        assert_eq!(r.verdict, CrosstalkVerdict::Crosstalk);
        assert_eq!(r.cuts.len(), 1);
        assert!(detect_crosstalk(&PovmElement::ideal(outcome("0")), 1e-3).is_err());
    }

    #[test]
    fn ppt_examples() {
        let mixed = ComplexMatrix::identity(8).scale(1.0 / 8.0);
        for q in 0..3 {
            assert_eq!(ppt_check(&mixed, &[q]).unwrap().verdict, PptVerdict::Ppt);
        }
        let r = ppt_check(&bell_projector(BellState::PhiPlus), &[1]).unwrap();
        assert_eq!(r.verdict, PptVerdict::Npt);
        assert!((r.min_eigenvalue + 0.5).abs() < 1e-12);
        // separable mixture
        let mut rng = stream_rng(2, 2);
        let mut sep = ComplexMatrix::zeros(4);
        for _ in 0..5 {
            let x = random_unit_trace_psd(&mut rng, 1);
            let y = random_unit_trace_psd(&mut rng, 1);
            sep = &sep + &x.kron(&y).scale(0.2);
        }
        assert_eq!(ppt_check(&sep, &[0]).unwrap().verdict, PptVerdict::Ppt);
    }
}
