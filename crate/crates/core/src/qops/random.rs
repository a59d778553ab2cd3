//! Seeded random states, unitaries and POVMs for sweeps and property checks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::linalg::eig_hermitian;
use super::matrix::{c, ComplexMatrix, C64};
use super::state::{DensityOperator, LocalUnitary};

/// Independent generator for `stream` under a base `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

pub fn random_pure_vector(rng: &mut impl Rng, dim: usize) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| gaussian(rng));
    let n = v.norm();
    v / c(n, 0.0)
}

/// Random mixed state of the given rank (Hilbert-Schmidt measure for full rank).
pub fn random_density(rng: &mut impl Rng, n_qubits: usize, rank: usize) -> DensityOperator {
    let d = 1usize << n_qubits;
    let g = ginibre(rng, d, rank.clamp(1, d));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::assume_valid(ComplexMatrix::wrap(m / c(tr, 0.0)).hermitian_part())
}

pub fn random_pure(rng: &mut impl Rng, n_qubits: usize) -> DensityOperator {
    random_density(rng, n_qubits, 1)
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn haar_unitary(rng: &mut impl Rng, dim: usize) -> DMatrix<C64> {
    let qr = ginibre(rng, dim, dim).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / c(d.norm(), 0.0) } else { c(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn random_local_unitary(rng: &mut impl Rng, n_qubits: usize) -> LocalUnitary {
    LocalUnitary::new((0..n_qubits).map(|_| haar_unitary(rng, 2)).collect())
        .expect("Haar factors are unitary")
}

/// Random PSD operator of unit trace.
pub fn random_unit_trace_psd(rng: &mut impl Rng, n_qubits: usize) -> ComplexMatrix {
    random_density(rng, n_qubits, 1 << n_qubits).matrix().clone()
}

/// Random complete POVM with one full-rank element per outcome.
pub fn random_povm_matrices(rng: &mut impl Rng, n_qubits: usize) -> Vec<ComplexMatrix> {
    let d = 1usize << n_qubits;
    let raw: Vec<DMatrix<C64>> = (0..d)
        .map(|_| {
            let g = ginibre(rng, d, d);
            &g * g.adjoint()
        })
        .collect();
    let sum = raw.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m);
    let inv_sqrt = eig_hermitian(&ComplexMatrix::wrap(sum).hermitian_part())
        .expect("sum of PSD matrices is Hermitian")
        .map(|x| 1.0 / x.sqrt());
    raw.into_iter()
        .map(|m| ComplexMatrix::wrap(m).conjugate_by(&inv_sqrt).hermitian_part())
        .collect()
}

/// A POVM close to the computational measurement: mixes each ideal projector
/// with a random POVM at weight `noise`.
pub fn noisy_computational_povm(rng: &mut impl Rng, n_qubits: usize, noise: f64) -> Vec<ComplexMatrix> {
    let d = 1usize << n_qubits;
    random_povm_matrices(rng, n_qubits)
        .into_iter()
        .enumerate()
        .map(|(i, m)| &ComplexMatrix::basis_projector(d, i).scale(1.0 - noise) + &m.scale(noise))
        .collect()
}
