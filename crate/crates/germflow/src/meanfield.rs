//! Homogeneous mean-field systems: the permutation-symmetric sector of
//! `(C^M)^(tensor L)` in the occupation-number basis, collective operators,
//! Hamiltonians `H_L = L * Htilde(X_a)`, exact quantum evolution against
//! the classical Hartree flow, the fidelity diagnostic, and ground-state /
//! stationary-point correspondence.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{self, hermitian_eig, CMatrix, CVector, HermitianMatrix};
use crate::projective::PureState;

const ENERGY_DRIFT_TOL: f64 = 1e-8;
const DEFAULT_FLOW_STEP: f64 = 1e-3;
const MAX_STEP_HALVINGS: u32 = 12;

/// `C(L+M-1, M-1)`, the dimension of the symmetric sector.
pub fn symmetric_dimension(m: usize, l: usize) -> Result<usize> {
    if m < 2 {
        return Err(Error::validation("M must be ≥ 2".to_string()));
    }
    let mut num: u128 = 1;
    // C(l+m-1, m-1) accumulated multiplicatively; each prefix is itself a
    // binomial, so the division below is always exact
    for i in 1..=(m - 1) as u128 {
        let factor = l as u128 + i;
        num = num
            .checked_mul(factor)
            .ok_or_else(|| Error::validation(format!("symmetric dimension overflows for M={m}, L={l}")))?;
        num /= i;
    }
    usize::try_from(num)
        .map_err(|_| Error::validation(format!("symmetric dimension overflows usize for M={m}, L={l}")))
}

/// Occupation tuples `(n_1..n_M)` with `sum = L`, lexicographically
/// descending. The ordering is the file-format contract for every matrix
/// and state in this module.
#[derive(Clone, Debug)]
pub struct OccupationBasis {
    m: usize,
    l: usize,
    tuples: Vec<Vec<usize>>,
}

impl OccupationBasis {
    pub fn new(m: usize, l: usize) -> Result<Self> {
        let dim = symmetric_dimension(m, l)?;
        let mut tuples = Vec::with_capacity(dim);
        let mut current = vec![0usize; m];
        fill_descending(&mut tuples, &mut current, 0, l, m);
        debug_assert_eq!(tuples.len(), dim);
        Ok(OccupationBasis { m, l, tuples })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.tuples.len()
    }

    pub fn tuple(&self, idx: usize) -> &[usize] {
        &self.tuples[idx]
    }

    pub fn index_of(&self, tuple: &[usize]) -> Option<usize> {
        // list is descending, so compare target against element
        self.tuples
            .binary_search_by(|t| tuple.cmp(t.as_slice()))
            .ok()
    }
}

fn fill_descending(out: &mut Vec<Vec<usize>>, current: &mut Vec<usize>, pos: usize, remaining: usize, m: usize) {
    if pos == m - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for n in (0..=remaining).rev() {
        current[pos] = n;
        fill_descending(out, current, pos + 1, remaining - n, m);
    }
}

/// State in the symmetric sector, unit norm, coefficients indexed by the
/// descending occupation order of [`OccupationBasis`].
#[derive(Clone, Debug)]
pub struct SymmetricState {
    m: usize,
    l: usize,
    coefficients: CVector,
}

impl SymmetricState {
    pub fn new(m: usize, l: usize, coefficients: CVector) -> Result<Self> {
        let dim = symmetric_dimension(m, l)?;
        if coefficients.len() != dim {
            return Err(Error::validation(format!(
                "symmetric state for M={m}, L={l} needs {dim} coefficients, got {}",
                coefficients.len()
            )));
        }
        let norm = coefficients.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "symmetric state norm {norm:.17} is not 1 within 1e-12"
            )));
        }
        Ok(SymmetricState {
            m,
            l,
            coefficients: coefficients / Complex64::new(norm, 0.0),
        })
    }

    fn renormalized(m: usize, l: usize, coefficients: CVector) -> Result<Self> {
        let norm = coefficients.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::numeric("symmetric_state", "state norm collapsed".to_string()));
        }
        Ok(SymmetricState {
            m,
            l,
            coefficients: coefficients / Complex64::new(norm, 0.0),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn coefficients(&self) -> &CVector {
        &self.coefficients
    }

    pub fn inner(&self, other: &SymmetricState) -> Result<Complex64> {
        if self.m != other.m || self.l != other.l {
            return Err(Error::validation(format!(
                "sector mismatch: (M={}, L={}) vs (M={}, L={})",
                self.m, self.l, other.m, other.l
            )));
        }
        Ok(self.coefficients.dotc(&other.coefficients))
    }

    /// `|<self|other>|^2`, clamped against rounding overshoot.
    pub fn overlap(&self, other: &SymmetricState) -> Result<f64> {
        let p = self.inner(other)?.norm_sqr();
        if p > 1.0 + 1e-14 {
            return Err(Error::numeric("overlap", format!("overlap {p:.17} exceeds 1 beyond rounding")));
        }
        Ok(p.min(1.0))
    }
}

/// Natural logs of factorials `0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(0.0);
    for k in 1..=n {
        t.push(t[k - 1] + (k as f64).ln());
    }
    t
}

/// `q(psi) = psi ⊗ … ⊗ psi` expanded in the occupation basis: the
/// coefficient on `n` is `sqrt(L!/(n_1!…n_M!)) * prod psi_m^{n_m}`.
pub fn product_state(psi: &PureState, basis: &OccupationBasis) -> Result<SymmetricState> {
    if psi.dim() != basis.m() {
        return Err(Error::validation(format!(
            "single-particle state has dim {}, basis expects M={}",
            psi.dim(),
            basis.m()
        )));
    }
    let lnf = ln_factorials(basis.l());
    let amp = psi.amplitudes();
    let mut coefficients = CVector::zeros(basis.dim());
    for idx in 0..basis.dim() {
        let n = basis.tuple(idx);
        // log-magnitude route: multinomials up to L! overflow naive f64
        // products long before the coefficients themselves do
        let mut ln_mag = 0.5 * lnf[basis.l()];
        let mut phase = 0.0;
        let mut zero = false;
        for (m, &occ) in n.iter().enumerate() {
            ln_mag -= 0.5 * lnf[occ];
            if occ > 0 {
                let a = amp[m];
                let r = a.norm();
                if r == 0.0 {
                    zero = true;
                    break;
                }
                ln_mag += occ as f64 * r.ln();
                phase += occ as f64 * a.arg();
            }
        }
        if !zero {
            coefficients[idx] = Complex64::from_polar(ln_mag.exp(), phase);
        }
    }
    SymmetricState::renormalized(basis.m(), basis.l(), coefficients)
}

/// `S_A = sum_j A^{(j)}` on the symmetric sector, assembled by ladder
/// calculus `S_A = sum_{m,n} A_{mn} a_m^† a_n`.
pub fn collective_matrix(a: &HermitianMatrix, basis: &OccupationBasis) -> Result<HermitianMatrix> {
    let m_levels = basis.m();
    if a.dim() != m_levels {
        return Err(Error::validation(format!(
            "single-particle operator is {}x{}, basis expects M={}",
            a.dim(),
            a.dim(),
            m_levels
        )));
    }
    let d = basis.dim();
    let mut out = CMatrix::zeros(d, d);
    let mut shifted = vec![0usize; m_levels];
    for col in 0..d {
        let n = basis.tuple(col);
        let mut diag = Complex64::new(0.0, 0.0);
        for m in 0..m_levels {
            diag += a.matrix()[(m, m)] * n[m] as f64;
        }
        out[(col, col)] += diag;
        for src in 0..m_levels {
            if n[src] == 0 {
                continue;
            }
            for dst in 0..m_levels {
                if dst == src {
                    continue;
                }
                let entry = a.matrix()[(dst, src)];
                if entry.norm_sqr() == 0.0 {
                    continue;
                }
                shifted.copy_from_slice(n);
                shifted[src] -= 1;
                shifted[dst] += 1;
                let row = basis
                    .index_of(&shifted)
                    .expect("shifted occupation stays in the sector");
                let amp = ((n[src] * (n[dst] + 1)) as f64).sqrt();
                out[(row, col)] += entry * amp;
            }
        }
    }
    numerics::symmetrized(&out)
}

/// Generators `A_a` (M×M Hermitian) with the structure constants of their
/// commutator algebra, `[A_a, A_b] = i c_ab^d A_d`, recovered numerically
/// and re-verified at construction.
#[derive(Clone, Debug)]
pub struct CollectiveAlgebra {
    generators: Vec<HermitianMatrix>,
    structure: Vec<f64>, // flat [a][b][d]
}

impl CollectiveAlgebra {
    pub fn new(generators: Vec<HermitianMatrix>) -> Result<Self> {
        let n = generators.len();
        if n == 0 {
            return Err(Error::validation("algebra needs at least one generator".to_string()));
        }
        let m = generators[0].dim();
        for g in &generators {
            if g.dim() != m {
                return Err(Error::validation("generators must share one dimension".to_string()));
            }
        }
        // real Gram matrix of the generators under <X,Y> = Re tr(X Y)
        let gram = DMatrix::<f64>::from_fn(n, n, |i, j| {
            real_trace_product(&generators[i], &generators[j])
        });
        let lu = gram.clone().lu();
        let mut structure = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                // K = i[A_a, A_b] = -sum_d c_ab^d A_d
                let k = numerics::scaled_commutator(&generators[a], &generators[b], 1.0)?;
                let rhs =
                    nalgebra::DVector::<f64>::from_fn(n, |d, _| -real_trace_product(&generators[d], &k));
                let c = lu.solve(&rhs).ok_or_else(|| {
                    Error::validation("generators must be linearly independent".to_string())
                })?;
                let mut recon = HermitianMatrix::zeros(m);
                for d in 0..n {
                    recon = recon.add(&generators[d].scaled(-c[d]))?;
                    structure[(a * n + b) * n + d] = c[d];
                }
                let defect = recon.max_abs_diff(&k)?;
                if defect > 1e-10 {
                    return Err(Error::validation(format!(
                        "generator set is not closed under commutation: defect {defect:.3e} at pair ({a}, {b})"
                    )));
                }
            }
        }
        Ok(CollectiveAlgebra { generators, structure })
    }

    /// Spin-½ generators `sigma_a / 2`; structure constants are the
    /// Levi-Civita symbol.
    pub fn su2() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let sx = CMatrix::from_row_slice(2, 2, &[z, Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0), z]);
        let sy = CMatrix::from_row_slice(2, 2, &[z, Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5), z]);
        let sz = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.5, 0.0), z, z, Complex64::new(-0.5, 0.0)],
        );
        let gens = vec![
            numerics::symmetrized(&sx).expect("pauli"),
            numerics::symmetrized(&sy).expect("pauli"),
            numerics::symmetrized(&sz).expect("pauli"),
        ];
        CollectiveAlgebra::new(gens).expect("su(2) closes")
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn m(&self) -> usize {
        self.generators[0].dim()
    }

    pub fn generator(&self, a: usize) -> &HermitianMatrix {
        &self.generators[a]
    }

    pub fn generators(&self) -> &[HermitianMatrix] {
        &self.generators
    }

    pub fn structure_constant(&self, a: usize, b: usize, d: usize) -> f64 {
        let n = self.len();
        self.structure[(a * n + b) * n + d]
    }

    /// Generator expectations `x_a = <psi|A_a|psi>` of a single-particle state.
    pub fn expectations(&self, psi: &PureState) -> Result<Vec<f64>> {
        self.generators
            .iter()
            .map(|g| crate::projective::expectation(g, psi))
            .collect()
    }
}

fn real_trace_product(x: &HermitianMatrix, y: &HermitianMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.dim() {
        for j in 0..x.dim() {
            acc += (x.matrix()[(i, j)] * y.matrix()[(j, i)]).re;
        }
    }
    acc
}

/// Real polynomial in the generator symbols: a sum of
/// `(coefficient, monomial as index sequence)` terms. An empty index
/// sequence is the constant monomial.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSpec {
    terms: Vec<(f64, Vec<usize>)>,
}

impl PolynomialSpec {
    pub fn new(terms: Vec<(f64, Vec<usize>)>) -> Result<Self> {
        for (c, _) in &terms {
            if !c.is_finite() {
                return Err(Error::validation(format!("non-finite coefficient {c}")));
            }
        }
        Ok(Self::canonicalized(terms))
    }

    pub fn zero() -> Self {
        PolynomialSpec { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::canonicalized(vec![(c, Vec::new())])
    }

    pub fn linear(index: usize) -> Self {
        PolynomialSpec { terms: vec![(1.0, vec![index])] }
    }

    /// Sort each monomial, merge equal monomials, drop zero terms.
    /// Commutativity of the classical symbols makes this lossless; the
    /// quantum ordering ambiguity is handled in [`hamiltonian_matrix`]
    /// by symmetrization, never here.
    fn canonicalized(terms: Vec<(f64, Vec<usize>)>) -> Self {
        let mut sorted: Vec<(Vec<usize>, f64)> = terms
            .into_iter()
            .map(|(c, mut mono)| {
                mono.sort_unstable();
                (mono, c)
            })
            .collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(f64, Vec<usize>)> = Vec::new();
        for (mono, c) in sorted {
            match merged.last_mut() {
                Some((acc, last)) if *last == mono => *acc += c,
                _ => merged.push((c, mono)),
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        PolynomialSpec { terms: merged }
    }

    pub fn terms(&self) -> &[(f64, Vec<usize>)] {
        &self.terms
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms
            .iter()
            .flat_map(|(_, mono)| mono.iter().copied())
            .max()
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(_, mono)| mono.len()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, mono)| c * mono.iter().map(|&i| x[i]).product::<f64>())
            .sum()
    }

    /// Partial derivative with respect to symbol `k`.
    pub fn partial(&self, k: usize) -> PolynomialSpec {
        let mut out = Vec::new();
        for (c, mono) in &self.terms {
            let count = mono.iter().filter(|&&i| i == k).count();
            if count > 0 {
                let mut reduced = mono.clone();
                let pos = reduced.iter().position(|&i| i == k).unwrap();
                reduced.remove(pos);
                out.push((c * count as f64, reduced));
            }
        }
        Self::canonicalized(out)
    }

    pub fn scale(&self, s: f64) -> PolynomialSpec {
        Self::canonicalized(self.terms.iter().map(|(c, m)| (c * s, m.clone())).collect())
    }

    pub fn add(&self, other: &PolynomialSpec) -> PolynomialSpec {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::canonicalized(terms)
    }

    pub fn multiply(&self, other: &PolynomialSpec) -> PolynomialSpec {
        let mut terms = Vec::new();
        for (c1, m1) in &self.terms {
            for (c2, m2) in &other.terms {
                let mut mono = m1.clone();
                mono.extend(m2.iter().copied());
                terms.push((c1 * c2, mono));
            }
        }
        Self::canonicalized(terms)
    }
}

/// Polynomial in matrix arguments: `sum_terms c * sym(X_{i_1}···X_{i_k})`
/// with each monomial averaged over all orderings of its factors.
pub fn polynomial_operator(p: &PolynomialSpec, x: &[CMatrix], dim: usize) -> Result<HermitianMatrix> {
    if let Some(max) = p.max_index() {
        if max >= x.len() {
            return Err(Error::validation(format!(
                "polynomial references generator {max}, only {} provided",
                x.len()
            )));
        }
    }
    let mut acc = CMatrix::zeros(dim, dim);
    for (c, mono) in p.terms() {
        acc += symmetrized_monomial(x, mono, dim) * Complex64::new(*c, 0.0);
    }
    numerics::symmetrized(&acc)
}

/// `H_L = L * Htilde(X_1..X_n)` with `X_a = S_{A_a} / L`.
pub fn hamiltonian_matrix(
    h: &PolynomialSpec,
    alg: &CollectiveAlgebra,
    basis: &OccupationBasis,
) -> Result<HermitianMatrix> {
    if basis.l() == 0 {
        return Err(Error::validation("mean-field Hamiltonian needs L ≥ 1".to_string()));
    }
    if basis.m() != alg.m() {
        return Err(Error::validation(format!(
            "algebra acts on C^{}, basis has M={}",
            alg.m(),
            basis.m()
        )));
    }
    if let Some(max) = h.max_index() {
        if max >= alg.len() {
            return Err(Error::validation(format!(
                "polynomial references generator {max}, algebra has {}",
                alg.len()
            )));
        }
    }
    let d = basis.dim();
    let l = basis.l() as f64;
    let scaled: Vec<CMatrix> = (0..alg.len())
        .map(|a| collective_matrix(alg.generator(a), basis).map(|s| s.into_matrix() / Complex64::new(l, 0.0)))
        .collect::<Result<_>>()?;
    Ok(polynomial_operator(h, &scaled, d)?.scaled(l))
}

/// Average of `X_{i_1}···X_{i_k}` over all orderings of the factors.
fn symmetrized_monomial(x: &[CMatrix], mono: &[usize], dim: usize) -> CMatrix {
    if mono.is_empty() {
        return CMatrix::identity(dim, dim);
    }
    let mut indices = mono.to_vec();
    indices.sort_unstable();
    let mut acc = CMatrix::zeros(dim, dim);
    let mut count = 0u64;
    loop {
        let mut prod = x[indices[0]].clone();
        for &i in &indices[1..] {
            prod *= &x[i];
        }
        acc += prod;
        count += 1;
        if !next_permutation(&mut indices) {
            break;
        }
    }
    acc / Complex64::new(count as f64, 0.0)
}

/// Lexicographic next permutation over a multiset; enumerates each
/// distinct ordering exactly once.
fn next_permutation(seq: &mut [usize]) -> bool {
    if seq.len() < 2 {
        return false;
    }
    let mut i = seq.len() - 1;
    while i > 0 && seq[i - 1] >= seq[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = seq.len() - 1;
    while seq[j] <= seq[i - 1] {
        j -= 1;
    }
    seq.swap(i - 1, j);
    seq[i..].reverse();
    true
}

/// `exp(-i H t) Phi`.
pub fn quantum_evolve(phi: &SymmetricState, h: &HermitianMatrix, t: f64) -> Result<SymmetricState> {
    let out = numerics::evolve_unitary(h, t, phi.coefficients())?;
    SymmetricState::renormalized(phi.m(), phi.l(), out)
}

/// Hartree flow `i dpsi/dt = h_eff(psi) psi` with
/// `h_eff = sum_a (dHtilde/dx_a)(x(psi)) A_a`, integrated with RK4 at a
/// fixed step that is halved until the classical energy drifts by less
/// than 1e-8 over the whole run.
pub fn classical_flow(
    psi0: &PureState,
    h: &PolynomialSpec,
    alg: &CollectiveAlgebra,
    t_grid: &[f64],
) -> Result<Vec<PureState>> {
    validate_grid(t_grid, false)?;
    if psi0.dim() != alg.m() {
        return Err(Error::validation(format!(
            "initial state has dim {}, algebra acts on C^{}",
            psi0.dim(),
            alg.m()
        )));
    }
    if let Some(max) = h.max_index() {
        if max >= alg.len() {
            return Err(Error::validation(format!(
                "polynomial references generator {max}, algebra has {}",
                alg.len()
            )));
        }
    }
    let partials: Vec<PolynomialSpec> = (0..alg.len()).map(|a| h.partial(a)).collect();
    let m = alg.m();
    let rhs = |v: &CVector| -> CVector {
        let x: Vec<f64> = alg
            .generators()
            .iter()
            .map(|g| v.dotc(&(g.matrix() * v)).re)
            .collect();
        let mut heff = CMatrix::zeros(m, m);
        for (a, p) in partials.iter().enumerate() {
            let c = p.eval(&x);
            if c != 0.0 {
                heff += alg.generator(a).matrix() * Complex64::new(c, 0.0);
            }
        }
        heff * v * Complex64::new(0.0, -1.0)
    };
    let energy = |v: &CVector| -> f64 {
        let x: Vec<f64> = alg
            .generators()
            .iter()
            .map(|g| v.dotc(&(g.matrix() * v)).re)
            .collect();
        h.eval(&x)
    };

    let mut step = DEFAULT_FLOW_STEP;
    for _ in 0..=MAX_STEP_HALVINGS {
        match integrate_grid(psi0, t_grid, step, &rhs, &energy)? {
            Some(states) => return Ok(states),
            None => step *= 0.5,
        }
    }
    Err(Error::numeric(
        "classical_flow",
        format!("energy drift stayed above {ENERGY_DRIFT_TOL:.0e} after {MAX_STEP_HALVINGS} step halvings"),
    ))
}

/// One full pass over the grid at a fixed base step. Returns `None` when
/// the energy drift tolerance was violated (caller halves and retries).
fn integrate_grid(
    psi0: &PureState,
    t_grid: &[f64],
    base_step: f64,
    rhs: &impl Fn(&CVector) -> CVector,
    energy: &impl Fn(&CVector) -> f64,
) -> Result<Option<Vec<PureState>>> {
    let mut v = psi0.amplitudes().clone();
    let e0 = energy(&v);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut t = 0.0;
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / base_step).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for _ in 0..steps {
                rk4_step(&mut v, dt, rhs);
                let n = v.norm();
                if !n.is_finite() || n < 1e-12 {
                    return Err(Error::numeric("classical_flow", "state norm collapsed".to_string()));
                }
                v /= Complex64::new(n, 0.0);
                if (energy(&v) - e0).abs() > ENERGY_DRIFT_TOL {
                    return Ok(None);
                }
            }
            t = target;
        }
        out.push(PureState::normalized(v.clone())?);
    }
    Ok(Some(out))
}

fn rk4_step(v: &mut CVector, dt: f64, rhs: &impl Fn(&CVector) -> CVector) {
    let h = Complex64::new(dt, 0.0);
    let half = Complex64::new(0.5 * dt, 0.0);
    let k1 = rhs(v);
    let k2 = rhs(&(&*v + &k1 * half));
    let k3 = rhs(&(&*v + &k2 * half));
    let k4 = rhs(&(&*v + &k3 * h));
    *v += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
        * Complex64::new(dt / 6.0, 0.0);
}

fn validate_grid(t_grid: &[f64], require_zero_start: bool) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::validation("time grid must be non-empty".to_string()));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::validation("time grid must be strictly increasing".to_string()));
        }
    }
    if !t_grid.iter().all(|t| t.is_finite()) || t_grid[0] < 0.0 {
        return Err(Error::validation("time grid must be finite and start at t ≥ 0".to_string()));
    }
    if require_zero_start && t_grid[0] != 0.0 {
        return Err(Error::validation("time grid must start at t = 0".to_string()));
    }
    Ok(())
}

/// Time-indexed record of the quantum/classical comparison at one system
/// size: fidelities, both sets of generator expectations, classical energy.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub l: usize,
    pub times: Vec<f64>,
    pub fidelities: Vec<f64>,
    pub classical_states: Vec<PureState>,
    pub quantum_states: Vec<SymmetricState>,
    pub classical_expectations: Vec<Vec<f64>>,
    pub quantum_expectations: Vec<Vec<f64>>,
    pub classical_energies: Vec<f64>,
}

/// `F(t) = p(exactly evolved product state, product state of the Hartree
/// point)` along `t_grid`, which must start at 0 so `F(0) = 1` anchors
/// the record.
pub fn fidelity_trajectory(
    psi0: &PureState,
    h: &PolynomialSpec,
    alg: &CollectiveAlgebra,
    l: usize,
    t_grid: &[f64],
) -> Result<Trajectory> {
    validate_grid(t_grid, true)?;
    let basis = OccupationBasis::new(alg.m(), l)?;
    let h_l = hamiltonian_matrix(h, alg, &basis)?;
    let phi0 = product_state(psi0, &basis)?;
    let classical = classical_flow(psi0, h, alg, t_grid)?;

    // one eigendecomposition serves every grid time
    let eig = hermitian_eig(&h_l);
    let weights: Vec<Complex64> = eig.eigenvectors.iter().map(|w| w.dotc(phi0.coefficients())).collect();

    let collectives: Vec<HermitianMatrix> = alg
        .generators()
        .iter()
        .map(|g| collective_matrix(g, &basis))
        .collect::<Result<_>>()?;

    let mut fidelities = Vec::with_capacity(t_grid.len());
    let mut quantum_states = Vec::with_capacity(t_grid.len());
    let mut classical_expectations = Vec::with_capacity(t_grid.len());
    let mut quantum_expectations = Vec::with_capacity(t_grid.len());
    let mut classical_energies = Vec::with_capacity(t_grid.len());

    for (k, &t) in t_grid.iter().enumerate() {
        let mut v = CVector::zeros(basis.dim());
        for ((lam, w), amp) in eig.eigenvalues.iter().zip(&eig.eigenvectors).zip(&weights) {
            v += w * (amp * Complex64::new(0.0, -lam * t).exp());
        }
        let phi_t = SymmetricState::renormalized(basis.m(), l, v)?;
        let target = product_state(&classical[k], &basis)?;
        fidelities.push(phi_t.overlap(&target)?);

        let xq: Vec<f64> = collectives
            .iter()
            .map(|s| phi_t.coefficients().dotc(&(s.matrix() * phi_t.coefficients())).re / l as f64)
            .collect();
        let xc = alg.expectations(&classical[k])?;
        classical_energies.push(h.eval(&xc));
        quantum_expectations.push(xq);
        classical_expectations.push(xc);
        quantum_states.push(phi_t);
    }

    Ok(Trajectory {
        l,
        times: t_grid.to_vec(),
        fidelities,
        classical_states: classical,
        quantum_states,
        classical_expectations,
        quantum_expectations,
        classical_energies,
    })
}

/// One classical stationary candidate: generator expectations and energy.
#[derive(Clone, Debug)]
pub struct GroundCandidate {
    pub x: Vec<f64>,
    pub energy: f64,
}

/// Quantum ground state vs classical minimizer at one size.
#[derive(Clone, Debug)]
pub struct GroundStateReport {
    pub l: usize,
    pub quantum_point: Vec<f64>,
    pub quantum_energy_per_site: f64,
    pub candidates: Vec<GroundCandidate>,
    pub classical_point: Vec<f64>,
    pub classical_energy: f64,
    /// Euclidean distance from the quantum point to the nearest global
    /// classical minimizer.
    pub distance: f64,
}

/// Ground-state correspondence: exact diagonalization on the quantum
/// side, deterministic multistart projected gradient descent on the
/// classical side. All global minimizers (within 1e-8 in energy) are
/// reported; the distance is taken to the nearest one, so degenerate
/// symmetric minima are described rather than forced to a choice.
pub fn ground_state_correspondence(
    h: &PolynomialSpec,
    alg: &CollectiveAlgebra,
    l: usize,
) -> Result<GroundStateReport> {
    let basis = OccupationBasis::new(alg.m(), l)?;
    let h_l = hamiltonian_matrix(h, alg, &basis)?;
    let eig = hermitian_eig(&h_l);
    let last = eig.eigenvalues.len() - 1;
    let ground_energy = eig.eigenvalues[last];
    let ground = &eig.eigenvectors[last];

    let quantum_point: Vec<f64> = alg
        .generators()
        .iter()
        .map(|g| {
            collective_matrix(g, &basis)
                .map(|s| ground.dotc(&(s.matrix() * ground)).re / l as f64)
        })
        .collect::<Result<_>>()?;

    let mut candidates: Vec<GroundCandidate> = Vec::new();
    for start in classical_starts(alg.m()) {
        let minimized = minimize_classical(&start, h, alg)?;
        let x = alg.expectations(&minimized)?;
        let energy = h.eval(&x);
        let dup = candidates.iter().any(|c| {
            c.x.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() < 1e-6
        });
        if !dup {
            candidates.push(GroundCandidate { x, energy });
        }
    }
    candidates.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let best = candidates[0].energy;
    let mut distance = f64::INFINITY;
    let mut classical_point = candidates[0].x.clone();
    for c in candidates.iter().filter(|c| c.energy - best < 1e-8) {
        let d = c
            .x
            .iter()
            .zip(&quantum_point)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d < distance {
            distance = d;
            classical_point = c.x.clone();
        }
    }

    Ok(GroundStateReport {
        l,
        quantum_point,
        quantum_energy_per_site: ground_energy / l as f64,
        candidates,
        classical_point,
        classical_energy: best,
        distance,
    })
}

/// Deterministic coarse cover of the projective space: basis vectors and
/// all two-level mixtures with phases in {1, i, -1, -i}.
fn classical_starts(m: usize) -> Vec<PureState> {
    let mut out = Vec::new();
    for j in 0..m {
        out.push(PureState::basis_vector(m, j).expect("basis start"));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..m {
        for k in (j + 1)..m {
            for phase in [
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(0.0, -1.0),
            ] {
                let mut v = CVector::zeros(m);
                v[j] = Complex64::new(s, 0.0);
                v[k] = phase * s;
                out.push(PureState::normalized(v).expect("mixture start"));
            }
        }
    }
    out
}

/// Projected gradient descent on `h(x(psi))` over the unit sphere, with
/// backtracking. Gradient of the energy in psi-bar is `h_eff(psi) psi`.
fn minimize_classical(
    start: &PureState,
    h: &PolynomialSpec,
    alg: &CollectiveAlgebra,
) -> Result<PureState> {
    let partials: Vec<PolynomialSpec> = (0..alg.len()).map(|a| h.partial(a)).collect();
    let m = alg.m();
    let energy_and_grad = |v: &CVector| -> (f64, CVector) {
        let x: Vec<f64> = alg
            .generators()
            .iter()
            .map(|g| v.dotc(&(g.matrix() * v)).re)
            .collect();
        let mut heff = CMatrix::zeros(m, m);
        for (a, p) in partials.iter().enumerate() {
            let c = p.eval(&x);
            if c != 0.0 {
                heff += alg.generator(a).matrix() * Complex64::new(c, 0.0);
            }
        }
        let img = heff * v;
        let mean = v.dotc(&img);
        // tangent projection of the Riemannian gradient
        let grad = img - v * mean;
        (h.eval(&x), grad)
    };

    let mut v = start.amplitudes().clone();
    let mut step = 0.5;
    let (mut e, mut g) = energy_and_grad(&v);
    for _ in 0..5000 {
        let gnorm = g.norm();
        if gnorm < 1e-13 {
            break;
        }
        let trial_raw = &v - &g * Complex64::new(step, 0.0);
        let trial = &trial_raw / Complex64::new(trial_raw.norm(), 0.0);
        let (et, gt) = energy_and_grad(&trial);
        if et < e - 1e-16 {
            v = trial;
            e = et;
            g = gt;
            step = (step * 1.3).min(1.0);
        } else {
            step *= 0.5;
            if step < 1e-14 {
                break;
            }
        }
    }
    PureState::normalized(v)
}
