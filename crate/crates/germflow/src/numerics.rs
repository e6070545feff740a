//! Dense complex linear algebra kernel: validated Hermitian matrices,
//! deterministic Hermitian eigendecomposition, and unitary evolution
//! generated by a Hermitian matrix. Every other module builds on this one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Absolute entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex matrix checked to satisfy `a[i][j] == conj(a[j][i])`
/// within [`HERMITIAN_TOL`] at construction, then stored exactly
/// symmetrized so downstream algebra never re-validates.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    matrix: CMatrix,
}

impl HermitianMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::validation(format!(
                "hermitian matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let mut defect = 0.0_f64;
        for i in 0..matrix.nrows() {
            for j in 0..matrix.ncols() {
                let a = matrix[(i, j)];
                if !a.re.is_finite() || !a.im.is_finite() {
                    return Err(Error::validation(format!(
                        "non-finite entry at ({i}, {j})"
                    )));
                }
                let d = (a - matrix[(j, i)].conj()).norm();
                if d > defect {
                    defect = d;
                }
            }
        }
        if defect > HERMITIAN_TOL {
            return Err(Error::validation(format!(
                "matrix is not Hermitian: symmetry defect {defect:.3e} exceeds {HERMITIAN_TOL:.0e}"
            )));
        }
        Ok(Self::symmetrize_unchecked(&matrix))
    }

    /// `(m + m^†)/2` without the tolerance check. The entrywise form
    /// `(a_ij + conj(a_ji))/2` is exactly conjugate-symmetric in floating
    /// point, so the result is Hermitian to the last bit.
    fn symmetrize_unchecked(m: &CMatrix) -> Self {
        let n = m.nrows();
        let matrix = CMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
        HermitianMatrix { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        HermitianMatrix {
            matrix: CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn scaled(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix {
            matrix: &self.matrix * Complex64::new(s, 0.0),
        }
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::validation(format!(
                "dimension mismatch in matrix sum: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(HermitianMatrix {
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Result<HermitianMatrix> {
        self.add(&other.scaled(-1.0))
    }

    /// Largest entrywise absolute difference; both operands must be square
    /// of equal dimension.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::validation("dimension mismatch in matrix diff".to_string()));
        }
        let mut d = 0.0_f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                d = d.max((self.matrix[(i, j)] - other.matrix[(i, j)]).norm());
            }
        }
        Ok(d)
    }

    /// Operator norm = max |eigenvalue|.
    pub fn operator_norm(&self) -> f64 {
        let eig = hermitian_eig(self);
        eig.eigenvalues
            .iter()
            .fold(0.0_f64, |acc, &l| acc.max(l.abs()))
    }
}

/// `i * s * (A B - B A)`, exactly symmetrized. Hermitian whenever A and B
/// are, which makes it safe glue for commutator-based constructions.
pub fn scaled_commutator(a: &HermitianMatrix, b: &HermitianMatrix, s: f64) -> Result<HermitianMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::validation(format!(
            "dimension mismatch in commutator: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let k = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    let scaled = k * Complex64::new(0.0, s);
    Ok(HermitianMatrix::symmetrize_unchecked(&scaled))
}

/// Exact symmetrization `(m + m^†)/2` of an arbitrary square matrix.
/// Intended for products of Hermitian matrices whose symmetry defect is
/// pure rounding; the defect is discarded, not checked.
pub fn symmetrized(m: &CMatrix) -> Result<HermitianMatrix> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::validation("symmetrize expects a square non-empty matrix".to_string()));
    }
    Ok(HermitianMatrix::symmetrize_unchecked(m))
}

/// Eigendecomposition of a Hermitian matrix with a deterministic gauge.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Real eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Vec<CVector>,
}

impl EigenDecomposition {
    /// `sum_k lambda_k v_k v_k^†`, exactly symmetrized.
    pub fn reconstruct(&self) -> HermitianMatrix {
        let n = self.eigenvectors.first().map_or(0, |v| v.len());
        let mut m = CMatrix::zeros(n, n);
        for (l, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            m += v * v.adjoint() * Complex64::new(*l, 0.0);
        }
        HermitianMatrix::symmetrize_unchecked(&m)
    }
}

/// Index of the first component of maximal modulus. Used both for the
/// deterministic eigenvector phase gauge and for tie-breaking the sort
/// order of numerically equal eigenvalues.
fn first_max_modulus_index(v: &CVector) -> usize {
    let mut best = 0usize;
    let mut best_norm = -1.0_f64;
    for (i, c) in v.iter().enumerate() {
        let n = c.norm_sqr();
        if n > best_norm {
            best_norm = n;
            best = i;
        }
    }
    best
}

/// Rotate the global phase so the first max-modulus component is real
/// and positive. Pure gauge: spectral projectors are untouched.
pub(crate) fn canonicalize_phase(v: &mut CVector) {
    let idx = first_max_modulus_index(v);
    let pivot = v[idx];
    let r = pivot.norm();
    if r > 0.0 {
        let phase = pivot / r;
        let correction = phase.conj();
        for c in v.iter_mut() {
            *c *= correction;
        }
    }
}

/// Hermitian eigendecomposition: eigenvalues descending, orthonormal
/// eigenvectors, deterministic output for identical input. Ties between
/// bitwise-equal eigenvalues are broken by the index of the first
/// max-modulus eigenvector component, ascending.
pub fn hermitian_eig(h: &HermitianMatrix) -> EigenDecomposition {
    let eig = h.matrix().clone().symmetric_eigen();
    let n = h.dim();
    let mut pairs: Vec<(f64, usize, CVector)> = (0..n)
        .map(|k| {
            let mut v: CVector = eig.eigenvectors.column(k).into_owned();
            canonicalize_phase(&mut v);
            let tiebreak = first_max_modulus_index(&v);
            (eig.eigenvalues[k], tiebreak, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    EigenDecomposition {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        eigenvectors: pairs.into_iter().map(|p| p.2).collect(),
    }
}

/// `exp(-i t H) v` via the eigendecomposition of `H`; exactly unitary up
/// to rounding because each eigencomponent is multiplied by a pure phase.
pub fn evolve_unitary(h: &HermitianMatrix, t: f64, v: &CVector) -> Result<CVector> {
    if h.dim() != v.len() {
        return Err(Error::validation(format!(
            "dimension mismatch: generator is {}x{} but vector has length {}",
            h.dim(),
            h.dim(),
            v.len()
        )));
    }
    if !t.is_finite() {
        return Err(Error::validation(format!("non-finite time {t}")));
    }
    let eig = hermitian_eig(h);
    let mut out = CVector::zeros(v.len());
    for (l, w) in eig.eigenvalues.iter().zip(&eig.eigenvectors) {
        let amp = w.dotc(v); // w^† v
        let phase = Complex64::new(0.0, -l * t).exp();
        out += w * (amp * phase);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;

    /// Dense random Hermitian matrix with entries of order one.
    pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> HermitianMatrix {
        let raw = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        symmetrized(&raw).unwrap()
    }

    pub fn random_unit_vector<R: Rng>(rng: &mut R, dim: usize) -> CVector {
        loop {
            let v = CVector::from_fn(dim, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let n = v.norm();
            if n > 1e-3 {
                return v / Complex64::new(n, 0.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use test_support::{random_hermitian, random_unit_vector};

    fn cvec(entries: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(entries.len(), entries.iter().map(|&(re, im)| Complex64::new(re, im)))
    }

    #[test]
    fn rejects_non_square() {
        let m = CMatrix::zeros(2, 3);
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 0)] = Complex64::new(0.5, 0.0);
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(HermitianMatrix::new(m).is_err());
    }

    #[test]
    fn accepts_rounding_level_asymmetry() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = Complex64::new(0.25, 1e-13);
        m[(1, 0)] = Complex64::new(0.25, -1e-13 + 1e-14);
        let h = HermitianMatrix::new(m).unwrap();
        // stored symmetrized
        assert_eq!(h.matrix()[(0, 1)].conj(), h.matrix()[(1, 0)]);
    }

    #[test]
    fn diagonal_eigenvalues_sorted_descending() {
        let h = HermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        let eig = hermitian_eig(&h);
        assert_eq!(eig.eigenvalues, vec![2.0, 1.0]);
        assert!((eig.eigenvectors[0][1].re - 1.0).abs() < 1e-14);
        assert!((eig.eigenvectors[1][0].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_x_eigenpairs() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 0)] = Complex64::new(1.0, 0.0);
        let h = HermitianMatrix::new(m).unwrap();
        let eig = hermitian_eig(&h);
        assert!((eig.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((eig.eigenvalues[1] + 1.0).abs() < 1e-12);
        let s = 1.0 / 2.0_f64.sqrt();
        let plus = cvec(&[(s, 0.0), (s, 0.0)]);
        let minus = cvec(&[(s, 0.0), (-s, 0.0)]);
        // projective comparison: |<v, expected>|^2 = 1
        assert!((eig.eigenvectors[0].dotc(&plus).norm() - 1.0).abs() < 1e-12);
        assert!((eig.eigenvectors[1].dotc(&minus).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_spectrum_is_projector_complete() {
        let h = HermitianMatrix::identity(3);
        let eig = hermitian_eig(&h);
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0, 1.0]);
        // compare the spectral projector, not individual degenerate vectors
        let recon = eig.reconstruct();
        assert!(recon.max_abs_diff(&HermitianMatrix::identity(3)).unwrap() < 1e-12);
    }

    #[test]
    fn reconstruction_and_orthonormality_up_to_dim_256() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2usize, 3, 8, 32, 128, 256] {
            let h = random_hermitian(&mut rng, dim);
            let eig = hermitian_eig(&h);
            let recon = eig.reconstruct();
            assert!(
                recon.max_abs_diff(&h).unwrap() < 1e-10,
                "reconstruction defect too large at dim {dim}"
            );
            let mut gram_defect = 0.0_f64;
            for (i, vi) in eig.eigenvectors.iter().enumerate() {
                for (j, vj) in eig.eigenvectors.iter().enumerate() {
                    let g = vi.dotc(vj);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    gram_defect = gram_defect.max((g - Complex64::new(expect, 0.0)).norm());
                }
            }
            assert!(gram_defect < 1e-10, "gram defect {gram_defect:.3e} at dim {dim}");
        }
    }

    #[test]
    fn eig_is_deterministic_including_degenerate_spectra() {
        // degenerate eigenvalue 1 with a rotated two-dimensional eigenspace
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = {
            let basis = random_hermitian(&mut rng, 3);
            let eig = hermitian_eig(&basis);
            let mut m = CMatrix::zeros(3, 3);
            for (k, v) in eig.eigenvectors.iter().enumerate() {
                let l = if k == 2 { 0.0 } else { 1.0 };
                m += v * v.adjoint() * Complex64::new(l, 0.0);
            }
            symmetrized(&m).unwrap()
        };
        let a = hermitian_eig(&h);
        let b = hermitian_eig(&h);
        assert_eq!(a.eigenvalues, b.eigenvalues);
        for (va, vb) in a.eigenvectors.iter().zip(&b.eigenvectors) {
            assert_eq!(va, vb);
        }
    }

    #[test]
    fn evolve_zero_generator_is_identity() {
        let h = HermitianMatrix::zeros(3);
        let v = cvec(&[(0.3, 0.1), (0.0, 0.2), (0.9, 0.0)]);
        let out = evolve_unitary(&h, 1.7, &v).unwrap();
        assert!((out - v).norm() < 1e-14);
    }

    #[test]
    fn evolve_pauli_z_quarter_period() {
        let h = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        let v = cvec(&[(1.0, 0.0), (0.0, 0.0)]);
        let out = evolve_unitary(&h, std::f64::consts::FRAC_PI_2, &v).unwrap();
        // exp(-i pi/2) = -i on the first component
        assert!((out[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!(out[1].norm() < 1e-12);
    }

    #[test]
    fn evolve_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let h = random_hermitian(&mut rng, 4);
        let v = random_unit_vector(&mut rng, 4);
        let out = evolve_unitary(&h, 0.3, &v).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evolve_satisfies_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_hermitian(&mut rng, 5);
        let v = random_unit_vector(&mut rng, 5);
        let direct = evolve_unitary(&h, 0.37 + 0.91, &v).unwrap();
        let stepped = evolve_unitary(&h, 0.91, &evolve_unitary(&h, 0.37, &v).unwrap()).unwrap();
        assert!((direct - stepped).norm() < 1e-10);
    }

    #[test]
    fn evolve_rejects_dimension_mismatch() {
        let h = HermitianMatrix::identity(3);
        let v = cvec(&[(1.0, 0.0), (0.0, 0.0)]);
        assert!(evolve_unitary(&h, 1.0, &v).is_err());
    }

    #[test]
    fn scaled_commutator_matches_pauli_algebra() {
        // i [sigma_x, sigma_y] = -2 sigma_z
        let sx = symmetrized(&CMatrix::from_fn(2, 2, |i, j| {
            if i != j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
        }))
        .unwrap();
        let sy = symmetrized(&CMatrix::from_fn(2, 2, |i, j| {
            if i == 0 && j == 1 {
                Complex64::new(0.0, -1.0)
            } else if i == 1 && j == 0 {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
        .unwrap();
        let c = scaled_commutator(&sx, &sy, 1.0).unwrap();
        let expect = HermitianMatrix::from_real_diagonal(&[-2.0, 2.0]);
        assert!(c.max_abs_diff(&expect).unwrap() < 1e-14);
    }
}
