//! Spectral and multi-qubit index manipulations on [`ComplexMatrix`].

use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::{c, ComplexMatrix, C64};
use super::state::DensityOperator;
use crate::error::{Error, Result};

/// Hermiticity tolerance accepted by [`eig_hermitian`].
pub const EIG_HERMITIAN_TOL: f64 = 1e-8;

/// Ascending eigenvalues with the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Rebuilds `Σ f(λ_i) |e_i><e_i|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let w = c(f(lam), 0.0);
            for i in 0..d {
                scaled[(i, k)] *= w;
            }
        }
        ComplexMatrix::wrap(scaled * self.vectors.adjoint())
    }
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let dev = m.hermitian_deviation();
    if dev > EIG_HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = SymmetricEigen::new(m.hermitian_part().into_inner());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let d = m.dim();
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(eig_hermitian(m)?.min())
}

/// `Re tr[ρ E]`, rejecting a non-negligible imaginary part.
pub fn expectation(rho: &DensityOperator, effect: &ComplexMatrix) -> Result<f64> {
    rho.matrix().check_same_dim(effect)?;
    let t = trace_product(rho.matrix(), effect);
    if t.im.abs() > 1e-10 {
        return Err(Error::ImaginaryTrace(t.im));
    }
    Ok(t.re)
}

/// `tr[A B]` without forming the product.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let (a, b) = (a.as_inner(), b.as_inner());
    let d = a.nrows();
    let mut acc = c(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

fn check_qubits(indices: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &q in indices {
        if q >= n || seen[q] {
            return Err(Error::InvalidQubits {
                indices: indices.to_vec(),
                n_qubits: n,
            });
        }
        seen[q] = true;
    }
    Ok(())
}

/// Places the bits of `sub` (most significant first) on `qubits` of an `n`-qubit index.
fn scatter(sub: usize, qubits: &[usize], n: usize) -> usize {
    let k = qubits.len();
    qubits.iter().enumerate().fold(0, |acc, (pos, &q)| {
        acc | (((sub >> (k - 1 - pos)) & 1) << (n - 1 - q))
    })
}

/// Traces out every qubit not in `keep`. Kept qubits appear in ascending order.
pub fn partial_trace(m: &ComplexMatrix, keep: &[usize]) -> Result<ComplexMatrix> {
    let n = m.n_qubits();
    check_qubits(keep, n)?;
    if keep.is_empty() {
        return Err(Error::InvalidQubits {
            indices: vec![],
            n_qubits: n,
        });
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let dk = 1usize << keep.len();
    let dt = 1usize << traced.len();
    let inner = m.as_inner();
    let out = DMatrix::from_fn(dk, dk, |i, j| {
        let (bi, bj) = (scatter(i, &keep, n), scatter(j, &keep, n));
        (0..dt)
            .map(|t| {
                let bt = scatter(t, &traced, n);
                inner[(bi | bt, bj | bt)]
            })
            .sum()
    });
    Ok(ComplexMatrix::wrap(out))
}

/// Transposes the tensor factors on `transposed`.
pub fn partial_transpose(m: &ComplexMatrix, transposed: &[usize]) -> Result<ComplexMatrix> {
    let n = m.n_qubits();
    check_qubits(transposed, n)?;
    let mask = transposed.iter().fold(0usize, |acc, &q| acc | (1 << (n - 1 - q)));
    let inner = m.as_inner();
    let d = m.dim();
    Ok(ComplexMatrix::wrap(DMatrix::from_fn(d, d, |i, j| {
        let swap = (i ^ j) & mask;
        inner[(i ^ swap, j ^ swap)]
    })))
}

/// Reorders tensor factors: qubit `order[p]` of `m` becomes qubit `p` of the result.
pub fn permute_qubits(m: &ComplexMatrix, order: &[usize]) -> Result<ComplexMatrix> {
    let n = m.n_qubits();
    if order.len() != n {
        return Err(Error::InvalidQubits {
            indices: order.to_vec(),
            n_qubits: n,
        });
    }
    check_qubits(order, n)?;
    let d = m.dim();
    let old_index = |new: usize| scatter(new, order, n);
    let inner = m.as_inner();
    Ok(ComplexMatrix::wrap(DMatrix::from_fn(d, d, |i, j| {
        inner[(old_index(i), old_index(j))]
    })))
}

/// Realigned matrix `R[(a,a'),(b,b')] = M[(a,b),(a',b')]` for the cut `part | rest`.
pub fn realign(m: &ComplexMatrix, part: &[usize]) -> Result<DMatrix<C64>> {
    let n = m.n_qubits();
    check_qubits(part, n)?;
    if part.is_empty() || part.len() == n {
        return Err(Error::InvalidQubits {
            indices: part.to_vec(),
            n_qubits: n,
        });
    }
    let mut order: Vec<usize> = part.to_vec();
    order.sort_unstable();
    order.extend((0..n).filter(|q| !part.contains(q)));
    let p = permute_qubits(m, &order)?;
    let da = 1usize << part.len();
    let db = m.dim() / da;
    let inner = p.as_inner();
    Ok(DMatrix::from_fn(da * da, db * db, |row, col| {
        let (a, a2) = (row / da, row % da);
        let (b, b2) = (col / db, col % db);
        inner[(a * db + b, a2 * db + b2)]
    }))
}

/// Operator Schmidt coefficients across `part | rest`, descending.
pub fn operator_schmidt_spectrum(m: &ComplexMatrix, part: &[usize]) -> Result<Vec<f64>> {
    let r = realign(m, part)?;
    let mut sv: Vec<f64> = r.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Number of Schmidt coefficients above `rel_tol` times the largest.
pub fn schmidt_rank(spectrum: &[f64], rel_tol: f64) -> usize {
    let top = spectrum.first().copied().unwrap_or(0.0);
    spectrum.iter().filter(|&&s| s > rel_tol * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::state::{bell_projector, BellState};

    fn diag(v: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(v).unwrap()
    }

    fn qubit_a() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(0.7, 0.0), c(0.1, -0.2)], vec![c(0.1, 0.2), c(0.3, 0.0)]])
            .unwrap()
    }

    fn qubit_b() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(0.4, 0.0), c(-0.25, 0.05)], vec![c(-0.25, -0.05), c(0.6, 0.0)]])
            .unwrap()
    }

    #[test]
    fn partial_trace_recovers_product_marginals() {
        let (a, b) = (qubit_a(), qubit_b());
        let ab = a.kron(&b);
        assert!(partial_trace(&ab, &[0]).unwrap().max_abs_diff(&a) < 1e-14);
        assert!(partial_trace(&ab, &[1]).unwrap().max_abs_diff(&b) < 1e-14);
        assert_eq!(partial_trace(&ab, &[0, 1]).unwrap(), ab);
    }

    #[test]
    fn bell_marginal_is_maximally_mixed() {
        let phi = bell_projector(BellState::PhiPlus);
        let half = ComplexMatrix::identity(2).scale(0.5);
        assert!(partial_trace(&phi, &[0]).unwrap().max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_indices() {
        let m = ComplexMatrix::identity(4);
        assert!(partial_trace(&m, &[2]).is_err());
        assert!(partial_trace(&m, &[0, 0]).is_err());
        assert!(partial_trace(&m, &[]).is_err());
        assert!(partial_transpose(&m, &[5]).is_err());
    }

    #[test]
    fn partial_transpose_of_bell_state_is_negative() {
        let pt = partial_transpose(&bell_projector(BellState::PhiPlus), &[1]).unwrap();
        let eig = eig_hermitian(&pt).unwrap();
        assert!((eig.min() + 0.5).abs() < 1e-12);
        // involution
        let back = partial_transpose(&pt, &[1]).unwrap();
        assert!(back.max_abs_diff(&bell_projector(BellState::PhiPlus)) < 1e-15);
    }

    #[test]
    fn partial_transpose_of_product_transposes_factor() {
        let (a, b) = (qubit_a(), qubit_b());
        let pt = partial_transpose(&a.kron(&b), &[0]).unwrap();
        assert!(pt.max_abs_diff(&a.transpose().kron(&b)) < 1e-15);
        let id = ComplexMatrix::identity(4).scale(0.25);
        assert_eq!(partial_transpose(&id, &[0]).unwrap(), id);
    }

    #[test]
    fn schmidt_rank_of_product_and_bell() {
        let ab = qubit_a().kron(&qubit_b());
        assert_eq!(schmidt_rank(&operator_schmidt_spectrum(&ab, &[0]).unwrap(), 1e-10), 1);
        let phi = bell_projector(BellState::PhiPlus);
        let s = operator_schmidt_spectrum(&phi, &[0]).unwrap();
        assert_eq!(schmidt_rank(&s, 1e-10), 4);
        // (II + XX - YY + ZZ)/4 realigns to four equal coefficients 1/2
        for v in s {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn realign_handles_non_contiguous_cuts() {
        let a = qubit_a();
        let b = qubit_b();
        let id = ComplexMatrix::identity(2).scale(0.5);
        // qubits 0 and 2 carry a and b, qubit 1 the identity
        let m = a.kron(&id).kron(&b);
        let s = operator_schmidt_spectrum(&m, &[0, 2]).unwrap();
        assert_eq!(schmidt_rank(&s, 1e-10), 1);
        let s = operator_schmidt_spectrum(&m, &[1]).unwrap();
        assert_eq!(schmidt_rank(&s, 1e-10), 1);
    }

    #[test]
    fn eig_on_simple_matrices() {
        let e = eig_hermitian(&ComplexMatrix::identity(4)).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let e = eig_hermitian(&diag(&[0.9, 0.1])).unwrap();
        assert!((e.values[0] - 0.1).abs() < 1e-15 && (e.values[1] - 0.9).abs() < 1e-15);
        let non_herm = ComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]])
            .unwrap();
        assert!(matches!(eig_hermitian(&non_herm), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn spectral_map_reconstructs() {
        let m = qubit_a().kron(&qubit_b());
        let e = eig_hermitian(&m).unwrap();
        assert!(e.map(|x| x).max_abs_diff(&m) < 1e-14);
    }
}
