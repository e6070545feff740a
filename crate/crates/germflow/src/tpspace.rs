//! Observables over a finite transition probability space: weighted sums
//! of the functions `p_psi`, their spectral representation, the Jordan
//! product recovered from squares, the sup-norm, and the associativity
//! defect that separates the quantum product from a classical one.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{self, hermitian_eig, CMatrix, HermitianMatrix};
use crate::projective::{transition_probability, PureState};

/// Eigenvalues below `SPECTRAL_FLOOR_REL` times the combination's weight
/// scale are treated as exact zeros and omitted from spectral forms.
const SPECTRAL_FLOOR_REL: f64 = 1e-12;

/// The function `f = sum_i mu_i p_{psi_i}` on the pure-state space,
/// equivalently the Hermitian operator `sum_i mu_i |psi_i><psi_i|`.
#[derive(Clone, Debug)]
pub struct PureStateCombination {
    terms: Vec<(f64, PureState)>,
}

impl PureStateCombination {
    pub fn new(terms: Vec<(f64, PureState)>) -> Result<Self> {
        let first_dim = match terms.first() {
            Some((_, psi)) => psi.dim(),
            None => return Err(Error::validation("combination must have at least one term".to_string())),
        };
        for (w, psi) in &terms {
            if !w.is_finite() {
                return Err(Error::validation(format!("non-finite weight {w}")));
            }
            if psi.dim() != first_dim {
                return Err(Error::validation(format!(
                    "combination mixes dimensions {first_dim} and {}",
                    psi.dim()
                )));
            }
        }
        Ok(PureStateCombination { terms })
    }

    pub fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }

    pub fn terms(&self) -> &[(f64, PureState)] {
        &self.terms
    }

    /// Pointwise value `f(psi) = sum_i mu_i p(psi_i, psi)`.
    pub fn evaluate(&self, psi: &PureState) -> Result<f64> {
        let mut acc = 0.0;
        for (w, term) in &self.terms {
            acc += w * transition_probability(term, psi)?;
        }
        Ok(acc)
    }

    /// Upper bound `sum_i |mu_i|` on the operator norm; sets the scale
    /// against which spectral noise is floored.
    fn weight_scale(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w.abs()).sum()
    }
}

/// Orthogonal spectral resolution `f = sum_a lambda_a p_{e_a}` with
/// nonzero eigenvalues sorted descending. The dimension is carried
/// explicitly because the zero observable decomposes to no pairs at all.
#[derive(Clone, Debug)]
pub struct SpectralForm {
    dim: usize,
    pairs: Vec<(f64, PureState)>,
}

impl SpectralForm {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[(f64, PureState)] {
        &self.pairs
    }

    pub fn is_zero(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn as_operator(&self) -> HermitianMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (l, e) in &self.pairs {
            m += e.amplitudes() * e.amplitudes().adjoint() * Complex64::new(*l, 0.0);
        }
        numerics::symmetrized(&m).expect("spectral operator is square")
    }

    pub fn evaluate(&self, psi: &PureState) -> Result<f64> {
        let mut acc = 0.0;
        for (l, e) in &self.pairs {
            acc += l * transition_probability(e, psi)?;
        }
        Ok(acc)
    }
}

/// `sum_i mu_i |psi_i><psi_i|`.
pub fn as_operator(f: &PureStateCombination) -> HermitianMatrix {
    let dim = f.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for (w, psi) in f.terms() {
        m += psi.amplitudes() * psi.amplitudes().adjoint() * Complex64::new(*w, 0.0);
    }
    numerics::symmetrized(&m).expect("operator of a combination is square")
}

fn decompose_operator(op: &HermitianMatrix, weight_scale: f64) -> Result<SpectralForm> {
    let eig = hermitian_eig(op);
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    // scale by the weight bound as well, so exact cancellations (zero
    // operator assembled from nonzero terms) floor to the empty form
    let floor = SPECTRAL_FLOOR_REL * max_abs.max(weight_scale);
    let mut pairs = Vec::new();
    for (l, v) in eig.eigenvalues.iter().zip(eig.eigenvectors) {
        if l.abs() > floor {
            pairs.push((*l, PureState::normalized(v)?));
        }
    }
    Ok(SpectralForm { dim: op.dim(), pairs })
}

/// Spectral representation of `f`: eigenpairs of its operator with the
/// noise floor applied, eigenvalues descending.
pub fn spectral_decompose(f: &PureStateCombination) -> Result<SpectralForm> {
    decompose_operator(&as_operator(f), f.weight_scale())
}

/// `f^2 = sum_a lambda_a^2 p_{e_a}`: same spectral states, squared
/// eigenvalues, re-sorted descending.
pub fn jordan_square(f: &PureStateCombination) -> Result<SpectralForm> {
    let form = spectral_decompose(f)?;
    let mut pairs: Vec<(f64, PureState)> =
        form.pairs.into_iter().map(|(l, e)| (l * l, e)).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(SpectralForm { dim: form.dim, pairs })
}

/// Jordan product built purely from squares and spectral resolutions:
/// `f o g = ((f+g)^2 - (f-g)^2) / 4`. Agrees with the operator
/// anticommutator `(FG+GF)/2`; the two routes are kept separate so that
/// agreement stays a checkable statement rather than a definition.
pub fn jordan_product(
    f: &PureStateCombination,
    g: &PureStateCombination,
) -> Result<SpectralForm> {
    if f.dim() != g.dim() {
        return Err(Error::validation(format!(
            "dimension mismatch in jordan product: {} vs {}",
            f.dim(),
            g.dim()
        )));
    }
    let mut sum_terms = f.terms().to_vec();
    sum_terms.extend(g.terms().iter().cloned());
    let mut diff_terms = f.terms().to_vec();
    diff_terms.extend(g.terms().iter().map(|(w, psi)| (-w, psi.clone())));

    let sum_sq = jordan_square(&PureStateCombination::new(sum_terms)?)?;
    let diff_sq = jordan_square(&PureStateCombination::new(diff_terms)?)?;

    let mut terms: Vec<(f64, PureState)> = Vec::new();
    let mut scale = 0.0;
    for (l, e) in sum_sq.pairs {
        terms.push((l / 4.0, e));
        scale += l.abs() / 4.0;
    }
    for (l, e) in diff_sq.pairs {
        terms.push((-l / 4.0, e));
        scale += l.abs() / 4.0;
    }
    if terms.is_empty() {
        return Ok(SpectralForm { dim: f.dim(), pairs: Vec::new() });
    }
    let combo = PureStateCombination::new(terms)?;
    decompose_operator(&as_operator(&combo), scale)
}

/// `||f|| = sup_psi |f(psi)| =` max `|eigenvalue|` of the operator.
pub fn sup_norm(f: &PureStateCombination) -> f64 {
    as_operator(f).operator_norm()
}

/// Operator-level anticommutator `(FG + GF)/2`, the oracle the spectral
/// route must reproduce.
pub fn jordan_operator(f: &HermitianMatrix, g: &HermitianMatrix) -> Result<HermitianMatrix> {
    if f.dim() != g.dim() {
        return Err(Error::validation(format!(
            "dimension mismatch in anticommutator: {} vs {}",
            f.dim(),
            g.dim()
        )));
    }
    let m = (f.matrix() * g.matrix() + g.matrix() * f.matrix()) * Complex64::new(0.5, 0.0);
    numerics::symmetrized(&m)
}

/// Jordan associator `(A o B) o C - A o (B o C)`; equals
/// `[B, [A, C]] / 4` with plain operator commutators.
pub fn associativity_defect(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    c: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    let left = jordan_operator(&jordan_operator(a, b)?, c)?;
    let right = jordan_operator(a, &jordan_operator(b, c)?)?;
    left.sub(&right)
}
