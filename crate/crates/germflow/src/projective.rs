//! Pure states as a transition probability space: unit vectors modulo
//! global phase, the pairing `p = |<psi|phi>|^2`, expectation functions
//! `f_A`, their Poisson bracket, and the Hamiltonian flows they generate.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{self, evolve_unitary, scaled_commutator, CVector, HermitianMatrix};

/// Tolerance on `| ||psi|| - 1 |` when accepting an amplitude vector.
pub const NORM_TOL: f64 = 1e-12;
/// Two states are the same projective point iff `|1 - p| < PROJECTIVE_TOL`.
pub const PROJECTIVE_TOL: f64 = 1e-10;
/// Rounding overshoot of `p` beyond `[0,1]` that is clamped rather than
/// reported as a numeric failure.
const CLAMP_TOL: f64 = 1e-14;
const IMAG_TOL: f64 = 1e-12;

/// A point of the projective space: a unit amplitude vector. The global
/// phase is physically meaningless; all equality goes through
/// [`transition_probability`], and [`PureState::canonical`] exists solely
/// to give serialization a fixed representative.
#[derive(Clone, Debug)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    /// Accepts a vector already normalized within [`NORM_TOL`], then
    /// renormalizes exactly so the stored norm is 1 to rounding.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = Self::check_finite(&amplitudes)?;
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::validation(format!(
                "state vector norm {norm:.17} is not 1 within {NORM_TOL:.0e}"
            )));
        }
        Ok(Self::rescaled(amplitudes, norm))
    }

    /// Normalizes any nonzero finite vector. For amplitude data produced
    /// by closed-form constructions whose normalization is analytic but
    /// subject to rounding drift.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = Self::check_finite(&amplitudes)?;
        if norm < 1e-12 {
            return Err(Error::validation(
                "cannot normalize a (numerically) zero vector".to_string(),
            ));
        }
        Ok(Self::rescaled(amplitudes, norm))
    }

    pub fn basis_vector(dim: usize, k: usize) -> Result<Self> {
        if dim == 0 || k >= dim {
            return Err(Error::validation(format!(
                "basis index {k} out of range for dimension {dim}"
            )));
        }
        let mut v = CVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        Ok(PureState { amplitudes: v })
    }

    fn check_finite(v: &CVector) -> Result<f64> {
        if v.is_empty() {
            return Err(Error::validation("state vector must be non-empty".to_string()));
        }
        for (i, c) in v.iter().enumerate() {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::validation(format!("non-finite amplitude at {i}")));
            }
        }
        Ok(v.norm())
    }

    fn rescaled(mut amplitudes: CVector, norm: f64) -> Self {
        let inv = Complex64::new(1.0 / norm, 0.0);
        for c in amplitudes.iter_mut() {
            *c *= inv;
        }
        PureState { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// Fixed representative of the ray: global phase rotated so the first
    /// max-modulus component is real positive.
    pub fn canonical(&self) -> PureState {
        let mut v = self.amplitudes.clone();
        numerics::canonicalize_phase(&mut v);
        PureState { amplitudes: v }
    }

    /// Projector `|psi><psi|` as a validated Hermitian matrix.
    pub fn projector(&self) -> HermitianMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        numerics::symmetrized(&m).expect("outer product of a state is square")
    }

    pub fn projectively_equal(&self, other: &PureState) -> Result<bool> {
        let p = transition_probability(self, other)?;
        Ok((1.0 - p).abs() < PROJECTIVE_TOL)
    }
}

/// Strictly positive semiclassical parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HbarValue {
    value: f64,
}

impl HbarValue {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::validation(format!("hbar must be finite and positive, got {value}")));
        }
        Ok(HbarValue { value })
    }

    pub fn value(self) -> f64 {
        self.value
    }
}

/// `p(psi, phi) = |<psi|phi>|^2`. Symmetric, phase-invariant, in `[0,1]`;
/// rounding overshoot up to 1e-14 is clamped, anything larger is a
/// numeric failure.
pub fn transition_probability(psi: &PureState, phi: &PureState) -> Result<f64> {
    if psi.dim() != phi.dim() {
        return Err(Error::validation(format!(
            "dimension mismatch in transition probability: {} vs {}",
            psi.dim(),
            phi.dim()
        )));
    }
    let p = psi.amplitudes.dotc(&phi.amplitudes).norm_sqr();
    if p > 1.0 {
        if p - 1.0 > CLAMP_TOL {
            return Err(Error::numeric(
                "transition_probability",
                format!("overlap {p:.17} exceeds 1 beyond rounding"),
            ));
        }
        return Ok(1.0);
    }
    Ok(p)
}

/// `f_A(psi) = <psi|A|psi>`. The imaginary residue must be pure rounding
/// (below 1e-12); it is checked and then discarded.
pub fn expectation(a: &HermitianMatrix, psi: &PureState) -> Result<f64> {
    if a.dim() != psi.dim() {
        return Err(Error::validation(format!(
            "dimension mismatch in expectation: operator {} vs state {}",
            a.dim(),
            psi.dim()
        )));
    }
    let image = a.matrix() * &psi.amplitudes;
    let z = psi.amplitudes.dotc(&image);
    if z.im.abs() > IMAG_TOL {
        return Err(Error::numeric(
            "expectation",
            format!("imaginary residue {:.3e} exceeds {IMAG_TOL:.0e}", z.im),
        ));
    }
    Ok(z.re)
}

/// `{f_A, f_B}(psi) = f_{[A,B]_hbar}(psi)` with `[A,B]_hbar = i(AB-BA)/hbar`.
pub fn poisson_bracket(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    hbar: HbarValue,
    psi: &PureState,
) -> Result<f64> {
    let bracket = scaled_commutator(a, b, 1.0 / hbar.value())?;
    expectation(&bracket, psi)
}

/// Flow generated by `f_A`: `psi(t) = exp(-i t A / hbar) psi`.
pub fn hamiltonian_flow(
    a: &HermitianMatrix,
    hbar: HbarValue,
    t: f64,
    psi: &PureState,
) -> Result<PureState> {
    let out = evolve_unitary(a, t / hbar.value(), &psi.amplitudes)?;
    PureState::normalized(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::test_support::{random_hermitian, random_unit_vector};
    use crate::numerics::CMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(entries: &[(f64, f64)]) -> PureState {
        let v = CVector::from_iterator(
            entries.len(),
            entries.iter().map(|&(re, im)| Complex64::new(re, im)),
        );
        PureState::normalized(v).unwrap()
    }

    fn pauli_x() -> HermitianMatrix {
        numerics::symmetrized(&CMatrix::from_fn(2, 2, |i, j| {
            if i != j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
        .unwrap()
    }

    fn pauli_y() -> HermitianMatrix {
        numerics::symmetrized(&CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => Complex64::new(0.0, -1.0),
            (1, 0) => Complex64::new(0.0, 1.0),
            _ => Complex64::new(0.0, 0.0),
        }))
        .unwrap()
    }

    #[test]
    fn new_rejects_unnormalized_vector() {
        let v = CVector::from_element(2, Complex64::new(0.9, 0.0));
        assert!(PureState::new(v).is_err());
    }

    #[test]
    fn new_accepts_rounding_drift_and_stores_unit_norm() {
        let s = (0.5f64).sqrt() * (1.0 + 3e-13);
        let v = CVector::from_element(2, Complex64::new(s, 0.0));
        let psi = PureState::new(v).unwrap();
        assert!((psi.amplitudes().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalized_rejects_zero_vector() {
        let v = CVector::zeros(3);
        assert!(PureState::normalized(v).is_err());
    }

    #[test]
    fn transition_probability_examples() {
        let e1 = PureState::basis_vector(2, 0).unwrap();
        let e2 = PureState::basis_vector(2, 1).unwrap();
        let diag = state(&[(1.0, 0.0), (1.0, 0.0)]);
        assert_eq!(transition_probability(&e1, &e1).unwrap(), 1.0);
        assert_eq!(transition_probability(&e1, &e2).unwrap(), 0.0);
        assert!((transition_probability(&e1, &diag).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn transition_probability_is_phase_invariant_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let psi = PureState::new(random_unit_vector(&mut rng, 5)).unwrap();
            let phi = PureState::new(random_unit_vector(&mut rng, 5)).unwrap();
            let rotated = PureState::normalized(
                psi.amplitudes() * Complex64::from_polar(1.0, 1.234),
            )
            .unwrap();
            let p = transition_probability(&psi, &phi).unwrap();
            assert!((transition_probability(&rotated, &phi).unwrap() - p).abs() < 1e-14);
            assert_eq!(transition_probability(&phi, &psi).unwrap(), p);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn transition_probability_rejects_dimension_mismatch() {
        let a = PureState::basis_vector(2, 0).unwrap();
        let b = PureState::basis_vector(3, 0).unwrap();
        assert!(transition_probability(&a, &b).is_err());
    }

    #[test]
    fn expectation_examples() {
        let e1 = PureState::basis_vector(2, 0).unwrap();
        assert_eq!(expectation(&HermitianMatrix::identity(2), &e1).unwrap(), 1.0);
        let sz = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert_eq!(expectation(&sz, &e1).unwrap(), 1.0);
        assert_eq!(expectation(&pauli_x(), &e1).unwrap(), 0.0);
    }

    #[test]
    fn poisson_bracket_pauli_example_and_hbar_scaling() {
        let e1 = PureState::basis_vector(2, 0).unwrap();
        // i [sigma_x, sigma_y] = -2 sigma_z
        let b1 = poisson_bracket(&pauli_x(), &pauli_y(), HbarValue::new(1.0).unwrap(), &e1).unwrap();
        assert!((b1 + 2.0).abs() < 1e-14);
        let b2 = poisson_bracket(&pauli_x(), &pauli_y(), HbarValue::new(0.5).unwrap(), &e1).unwrap();
        assert!((b2 + 4.0).abs() < 1e-14);
    }

    #[test]
    fn poisson_bracket_is_antisymmetric_and_vanishes_on_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let hbar = HbarValue::new(0.3).unwrap();
        for _ in 0..10 {
            let a = random_hermitian(&mut rng, 4);
            let b = random_hermitian(&mut rng, 4);
            let psi = PureState::new(random_unit_vector(&mut rng, 4)).unwrap();
            let ab = poisson_bracket(&a, &b, hbar, &psi).unwrap();
            let ba = poisson_bracket(&b, &a, hbar, &psi).unwrap();
            assert!((ab + ba).abs() < 1e-12);
            assert!(poisson_bracket(&a, &a, hbar, &psi).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn operator_jacobi_identity() {
        // with K(X,Y) = i(XY - YX): sum of K(A,K(B,C)) cyclic = -(Jacobi sum) = 0
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let a = random_hermitian(&mut rng, 4);
            let b = random_hermitian(&mut rng, 4);
            let c = random_hermitian(&mut rng, 4);
            let sum = scaled_commutator(&a, &scaled_commutator(&b, &c, 1.0).unwrap(), 1.0)
                .unwrap()
                .add(&scaled_commutator(&b, &scaled_commutator(&c, &a, 1.0).unwrap(), 1.0).unwrap())
                .unwrap()
                .add(&scaled_commutator(&c, &scaled_commutator(&a, &b, 1.0).unwrap(), 1.0).unwrap())
                .unwrap();
            assert!(sum.max_abs_diff(&HermitianMatrix::zeros(4)).unwrap() < 1e-10);
        }
    }

    #[test]
    fn operator_leibniz_for_jordan_product() {
        // [A, B o C] = [A,B] o C + B o [A,C]
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let comm = |x: &CMatrix, y: &CMatrix| x * y - y * x;
        let jordan = |x: &CMatrix, y: &CMatrix| (x * y + y * x) * Complex64::new(0.5, 0.0);
        for _ in 0..10 {
            let a = random_hermitian(&mut rng, 4).into_matrix();
            let b = random_hermitian(&mut rng, 4).into_matrix();
            let c = random_hermitian(&mut rng, 4).into_matrix();
            let lhs = comm(&a, &jordan(&b, &c));
            let rhs = jordan(&comm(&a, &b), &c) + jordan(&b, &comm(&a, &c));
            let defect = (lhs - rhs).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            assert!(defect < 1e-10);
        }
    }

    #[test]
    fn flow_at_zero_time_is_identity() {
        let psi = state(&[(0.6, 0.0), (0.0, 0.8)]);
        let out = hamiltonian_flow(&pauli_x(), HbarValue::new(1.0).unwrap(), 0.0, &psi).unwrap();
        assert!(out.projectively_equal(&psi).unwrap());
    }

    #[test]
    fn flow_fixes_eigenstates_of_its_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let psi = PureState::new(random_unit_vector(&mut rng, 3)).unwrap();
        let gen = psi.projector();
        let out = hamiltonian_flow(&gen, HbarValue::new(0.7).unwrap(), 2.9, &psi).unwrap();
        assert!(out.projectively_equal(&psi).unwrap());
    }

    #[test]
    fn simultaneous_flow_preserves_transition_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let hbar = HbarValue::new(1.0).unwrap();
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, 4);
            let phi1 = PureState::new(random_unit_vector(&mut rng, 4)).unwrap();
            let phi2 = PureState::new(random_unit_vector(&mut rng, 4)).unwrap();
            let before = transition_probability(&phi1, &phi2).unwrap();
            for t in [0.1, 1.0, 10.0] {
                let a = hamiltonian_flow(&h, hbar, t, &phi1).unwrap();
                let b = hamiltonian_flow(&h, hbar, t, &phi2).unwrap();
                let after = transition_probability(&a, &b).unwrap();
                assert!((after - before).abs() < 1e-10, "unitarity broken at t={t}");
            }
        }
    }

    #[test]
    fn canonical_representative_pivots_first_max_modulus_component() {
        let psi = state(&[(0.0, 1.0), (1.0, 0.0)]); // equal moduli, tie -> index 0
        let canon = psi.canonical();
        assert!(canon.amplitudes()[0].im.abs() < 1e-15);
        assert!(canon.amplitudes()[0].re > 0.0);
        assert!(canon.projectively_equal(&psi).unwrap());
    }

    #[test]
    fn hbar_must_be_positive() {
        assert!(HbarValue::new(0.0).is_err());
        assert!(HbarValue::new(-1.0).is_err());
        assert!(HbarValue::new(f64::NAN).is_err());
    }
}
