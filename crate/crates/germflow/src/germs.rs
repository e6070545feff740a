//! Coherent-state germs for three phase-space families — Gaussian wave
//! packets on the plane, spin coherent states on the sphere, product
//! states on the projective ray space — with overlap decay, germ
//! equivalence, momentum maps, Berezin quantization on the sphere with
//! its commutator/anticommutator residuals, pullbacks, and funnel limits.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::meanfield::{
    collective_matrix, polynomial_operator, product_state, CollectiveAlgebra, OccupationBasis,
    PolynomialSpec,
};
use crate::numerics::{self, CMatrix, CVector, HermitianMatrix};
use crate::projective::{expectation, transition_probability, PureState};

/// Point of one of the three classical phase spaces.
#[derive(Clone, Debug)]
pub enum PhasePoint {
    /// Cotangent-plane point `(p, q)`, both of the family's dimension.
    Plane { p: Vec<f64>, q: Vec<f64> },
    /// Sphere point, `theta` in `[0, pi]`, `phi` in `[0, 2pi)`.
    Sphere { theta: f64, phi: f64 },
    /// Ray in `C^M`.
    Ray(PureState),
}

impl PhasePoint {
    pub fn plane(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::validation(format!(
                "plane point needs equal nonzero p/q dimensions, got {} and {}",
                p.len(),
                q.len()
            )));
        }
        if !p.iter().chain(q.iter()).all(|v| v.is_finite()) {
            return Err(Error::validation("plane point has non-finite coordinates".to_string()));
        }
        Ok(PhasePoint::Plane { p, q })
    }

    pub fn sphere(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::validation(format!("theta {theta} outside [0, pi]")));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(Error::validation(format!("phi {phi} outside [0, 2pi)")));
        }
        Ok(PhasePoint::Sphere { theta, phi })
    }

    pub fn ray(psi: PureState) -> Self {
        PhasePoint::Ray(psi)
    }

    /// Unit normal of a sphere point.
    fn unit_vector(theta: f64, phi: f64) -> [f64; 3] {
        [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
    }
}

/// The three germ families.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GermFamily {
    /// Gaussian wave packets over `T*R^n`; analytic only, never discretized.
    HeisenbergGauss { n: usize },
    /// Spin coherent states; schedule entry `L` is twice the spin,
    /// `dim = L + 1`, `hbar = 2/L`.
    SpinSU2,
    /// Symmetric product states over `C^M`.
    BosonicUM { m: usize },
}

impl GermFamily {
    fn validate(&self) -> Result<()> {
        match self {
            GermFamily::HeisenbergGauss { n } if *n == 0 => {
                Err(Error::validation("plane dimension n must be ≥ 1".to_string()))
            }
            GermFamily::BosonicUM { m } if *m < 2 => Err(Error::validation("M must be ≥ 2".to_string())),
            _ => Ok(()),
        }
    }

    /// Semiclassical parameter at schedule entry `L`.
    pub fn hbar(&self, l: usize) -> f64 {
        match self {
            GermFamily::SpinSU2 => 2.0 / l as f64,
            _ => 1.0 / l as f64,
        }
    }

    fn check_point(&self, x: &PhasePoint) -> Result<()> {
        match (self, x) {
            (GermFamily::HeisenbergGauss { n }, PhasePoint::Plane { p, q }) => {
                if p.len() != *n || q.len() != *n {
                    return Err(Error::validation(format!(
                        "plane point has dimension {}, family expects n={n}",
                        p.len()
                    )));
                }
                Ok(())
            }
            (GermFamily::SpinSU2, PhasePoint::Sphere { .. }) => Ok(()),
            (GermFamily::BosonicUM { m }, PhasePoint::Ray(psi)) => {
                if psi.dim() != *m {
                    return Err(Error::validation(format!(
                        "ray has dimension {}, family expects M={m}",
                        psi.dim()
                    )));
                }
                Ok(())
            }
            _ => Err(Error::validation("phase point does not match the germ family".to_string())),
        }
    }
}

/// Reparametrization / gauge change applied to a germ before comparison.
#[derive(Clone, Debug)]
pub enum GermModification {
    None,
    /// Multiply the germ state by `exp(i rate * s(x))` with `s` the sum of
    /// the point's coordinates; a pure gauge that no overlap can see.
    PointwisePhase { rate: f64 },
    /// Precompose with the rotation `phi -> phi + alpha` about the z-axis
    /// (sphere family only).
    SphereRotation { alpha: f64 },
    /// Precompose with the translation `q -> q + dq` (plane family only).
    PlaneShift { dq: Vec<f64> },
}

/// A germ family together with an optional reparametrization.
#[derive(Clone, Debug)]
pub struct GermDescriptor {
    family: GermFamily,
    modification: GermModification,
}

impl GermDescriptor {
    pub fn new(family: GermFamily) -> Result<Self> {
        family.validate()?;
        Ok(GermDescriptor { family, modification: GermModification::None })
    }

    pub fn with_modification(family: GermFamily, modification: GermModification) -> Result<Self> {
        family.validate()?;
        match (&family, &modification) {
            (GermFamily::SpinSU2, GermModification::SphereRotation { .. })
            | (GermFamily::HeisenbergGauss { .. }, GermModification::PlaneShift { .. })
            | (_, GermModification::None)
            | (_, GermModification::PointwisePhase { .. }) => {}
            _ => {
                return Err(Error::validation(
                    "modification is not defined for this germ family".to_string(),
                ))
            }
        }
        Ok(GermDescriptor { family, modification })
    }

    pub fn family(&self) -> &GermFamily {
        &self.family
    }

    pub fn modification(&self) -> &GermModification {
        &self.modification
    }

    /// The point the underlying unmodified germ is evaluated at.
    fn precomposed(&self, x: &PhasePoint) -> Result<PhasePoint> {
        self.family.check_point(x)?;
        match (&self.modification, x) {
            (GermModification::SphereRotation { alpha }, PhasePoint::Sphere { theta, phi }) => {
                PhasePoint::sphere(*theta, (phi + alpha).rem_euclid(std::f64::consts::TAU))
            }
            (GermModification::PlaneShift { dq }, PhasePoint::Plane { p, q }) => {
                if dq.len() != q.len() {
                    return Err(Error::validation("plane shift has wrong dimension".to_string()));
                }
                PhasePoint::plane(p.clone(), q.iter().zip(dq).map(|(a, b)| a + b).collect())
            }
            _ => Ok(x.clone()),
        }
    }

    fn phase_at(&self, x: &PhasePoint) -> f64 {
        match &self.modification {
            GermModification::PointwisePhase { rate } => {
                let s = match x {
                    PhasePoint::Plane { p, q } => p.iter().chain(q.iter()).sum::<f64>(),
                    PhasePoint::Sphere { theta, phi } => theta + phi,
                    PhasePoint::Ray(psi) => psi
                        .amplitudes()
                        .iter()
                        .enumerate()
                        .map(|(k, c)| (k + 1) as f64 * c.norm_sqr())
                        .sum(),
                };
                rate * s
            }
            _ => 0.0,
        }
    }
}

/// The sequence of sizes `L` along which the classical limit is taken.
#[derive(Clone, Debug)]
pub struct SemiclassicalSchedule {
    l_values: Vec<usize>,
}

impl SemiclassicalSchedule {
    pub fn new(l_values: Vec<usize>) -> Result<Self> {
        if l_values.is_empty() {
            return Err(Error::validation("schedule must be non-empty".to_string()));
        }
        if l_values[0] == 0 {
            return Err(Error::validation("schedule entries must be ≥ 1".to_string()));
        }
        for w in l_values.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::validation("schedule must be strictly increasing".to_string()));
            }
        }
        Ok(SemiclassicalSchedule { l_values })
    }

    pub fn l_values(&self) -> &[usize] {
        &self.l_values
    }

    pub fn last(&self) -> usize {
        *self.l_values.last().unwrap()
    }
}

/// Symbolic Gaussian wave packet: center `(q, p)`, width `hbar`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub hbar: f64,
}

/// A germ state: an explicit vector for the compact families, symbolic
/// Gaussian parameters for the plane family.
#[derive(Clone, Debug)]
pub enum GermState {
    Vector(PureState),
    Gaussian(GaussianParams),
}

impl GermState {
    pub fn vector(&self) -> Result<&PureState> {
        match self {
            GermState::Vector(v) => Ok(v),
            GermState::Gaussian(_) => Err(Error::validation(
                "expected an explicit state vector, got symbolic Gaussian parameters".to_string(),
            )),
        }
    }
}

/// Descending-m spin operators `[J_x, J_y, J_z]` for spin `j = two_j/2`;
/// index `k` carries `m = j - k`, so the highest weight is `e_0`.
pub(crate) fn spin_operators(two_j: usize) -> [HermitianMatrix; 3] {
    let dim = two_j + 1;
    let j = two_j as f64 / 2.0;
    let mut jz = CMatrix::zeros(dim, dim);
    let mut jp = CMatrix::zeros(dim, dim); // raising: k+1 -> k
    for k in 0..dim {
        let m = j - k as f64;
        jz[(k, k)] = Complex64::new(m, 0.0);
        if k + 1 < dim {
            // J+ |j, m-1> = sqrt(j(j+1) - m(m-1)) |j, m>
            let amp = (j * (j + 1.0) - m * (m - 1.0)).sqrt();
            jp[(k, k + 1)] = Complex64::new(amp, 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm) * Complex64::new(0.5, 0.0);
    let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
    [
        numerics::symmetrized(&jx).expect("spin operator"),
        numerics::symmetrized(&jy).expect("spin operator"),
        numerics::symmetrized(&jz).expect("spin operator"),
    ]
}

/// Spin coherent state `|theta, phi>` in the descending-m basis:
/// amplitude `e^{-i m phi} sqrt(C(2j, j-m)) cos^{j+m}(theta/2) sin^{j-m}(theta/2)`.
pub(crate) fn coherent_state(two_j: usize, theta: f64, phi: f64) -> PureState {
    let dim = two_j + 1;
    let j = two_j as f64 / 2.0;
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let mut lnc = Vec::with_capacity(dim); // ln C(2j, k)
    lnc.push(0.0);
    for k in 1..dim {
        let prev = lnc[k - 1];
        lnc.push(prev + ((two_j - k + 1) as f64).ln() - (k as f64).ln());
    }
    let mut v = CVector::zeros(dim);
    for k in 0..dim {
        let m = j - k as f64;
        let mag = if c == 0.0 {
            if k == two_j { 1.0 } else { 0.0 }
        } else if s == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else {
            (0.5 * lnc[k] + (two_j - k) as f64 * c.ln() + k as f64 * s.ln()).exp()
        };
        if mag != 0.0 {
            v[k] = Complex64::from_polar(mag, -m * phi);
        }
    }
    PureState::normalized(v).expect("coherent amplitudes are nonzero")
}

/// The germ injection `q_hbar(x)` at size `L`, after applying the
/// descriptor's modification.
pub fn germ_state(g: &GermDescriptor, l: usize, x: &PhasePoint) -> Result<GermState> {
    if l == 0 {
        return Err(Error::validation("germ size L must be ≥ 1".to_string()));
    }
    let base = g.precomposed(x)?;
    let phase = g.phase_at(x);
    let state = match (&g.family, &base) {
        (GermFamily::SpinSU2, PhasePoint::Sphere { theta, phi }) => {
            GermState::Vector(coherent_state(l, *theta, *phi))
        }
        (GermFamily::BosonicUM { m }, PhasePoint::Ray(psi)) => {
            let basis = OccupationBasis::new(*m, l)?;
            let sym = product_state(psi, &basis)?;
            GermState::Vector(PureState::normalized(sym.coefficients().clone())?)
        }
        (GermFamily::HeisenbergGauss { .. }, PhasePoint::Plane { p, q }) => {
            GermState::Gaussian(GaussianParams { q: q.clone(), p: p.clone(), hbar: 1.0 / l as f64 })
        }
        _ => unreachable!("precomposed validates the point"),
    };
    if phase != 0.0 {
        if let GermState::Vector(v) = &state {
            let rotated = v.amplitudes() * Complex64::from_polar(1.0, phase);
            return Ok(GermState::Vector(PureState::normalized(rotated)?));
        }
        // the Gaussian overlap is phase-insensitive, so a pointwise phase
        // leaves the symbolic parameters untouched
    }
    Ok(state)
}

fn clamp_probability(p: f64, stage: &str) -> Result<f64> {
    if p > 1.0 + 1e-14 {
        return Err(Error::numeric(stage, format!("overlap {p:.17} exceeds 1 beyond rounding")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Closed-form `p(q_hbar(x), q_hbar(y))` for one germ family.
pub fn germ_overlap(g: &GermDescriptor, l: usize, x: &PhasePoint, y: &PhasePoint) -> Result<f64> {
    if l == 0 {
        return Err(Error::validation("germ size L must be ≥ 1".to_string()));
    }
    let a = g.precomposed(x)?;
    let b = g.precomposed(y)?;
    let p = match (&g.family, &a, &b) {
        (GermFamily::SpinSU2, PhasePoint::Sphere { theta: t1, phi: f1 }, PhasePoint::Sphere { theta: t2, phi: f2 }) => {
            let n1 = PhasePoint::unit_vector(*t1, *f1);
            let n2 = PhasePoint::unit_vector(*t2, *f2);
            let cos_half_sq = (1.0 + n1.iter().zip(&n2).map(|(u, v)| u * v).sum::<f64>()) / 2.0;
            // (cos^2(Theta/2))^(2j) with 2j = L
            cos_half_sq.max(0.0).powi(l as i32)
        }
        (GermFamily::BosonicUM { .. }, PhasePoint::Ray(psi), PhasePoint::Ray(phi)) => {
            transition_probability(psi, phi)?.powi(l as i32)
        }
        (GermFamily::HeisenbergGauss { .. }, PhasePoint::Plane { p: p1, q: q1 }, PhasePoint::Plane { p: p2, q: q2 }) => {
            let hbar = 1.0 / l as f64;
            let d2: f64 = q1.iter().zip(q2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                + p1.iter().zip(p2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (-d2 / (2.0 * hbar)).exp()
        }
        _ => unreachable!("precomposed validates the points"),
    };
    clamp_probability(p, "germ_overlap")
}

/// One `(L, hbar, value)` record of a semiclassical sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualRow {
    pub l: usize,
    pub hbar: f64,
    pub residual: f64,
}

/// Sweep record with the least-squares slope of `ln residual` against
/// `ln hbar` (over the strictly positive rows; `None` if fewer than two).
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    pub exponent: Option<f64>,
}

pub(crate) fn fit_exponent(rows: &[ResidualRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.residual > 0.0)
        .map(|r| (r.hbar.ln(), r.residual.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if var == 0.0 {
        return None;
    }
    Some(cov / var)
}

fn report_from_rows(rows: Vec<ResidualRow>) -> ResidualReport {
    let exponent = fit_exponent(&rows);
    ResidualReport { rows, exponent }
}

/// Overlap `p(q_hbar(x), q_hbar(y))` along the schedule. Distinct points
/// give strictly decreasing rows; equal points give constant 1. The
/// fitted slope is against `ln hbar`, so geometric decay in `L` shows up
/// as a schedule-dependent number, reported mechanically.
pub fn germ_delta_limit(
    g: &GermDescriptor,
    x: &PhasePoint,
    y: &PhasePoint,
    sched: &SemiclassicalSchedule,
) -> Result<ResidualReport> {
    let mut rows = Vec::with_capacity(sched.l_values().len());
    for &l in sched.l_values() {
        rows.push(ResidualRow { l, hbar: g.family.hbar(l), residual: germ_overlap(g, l, x, y)? });
    }
    Ok(report_from_rows(rows))
}

/// Per-point overlap trajectory between two germs of the same family.
#[derive(Clone, Debug)]
pub struct EquivalencePoint {
    pub point: PhasePoint,
    pub rows: Vec<ResidualRow>,
    /// Heuristic verdict on the finite schedule: the germs are declared
    /// equivalent at this point iff `1 - p` at the largest scheduled `L`
    /// is below 1e-9.
    pub equivalent: bool,
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub points: Vec<EquivalencePoint>,
}

/// Compare two germs pointwise: overlap `p(q1_hbar(x), q2_hbar(x))` along
/// the schedule. The compact families are compared through explicit state
/// vectors (so gauge phases are demonstrably invisible); the plane family
/// through the closed-form Gaussian overlap.
pub fn germ_equivalence(
    g1: &GermDescriptor,
    g2: &GermDescriptor,
    points: &[PhasePoint],
    sched: &SemiclassicalSchedule,
) -> Result<EquivalenceReport> {
    if g1.family != g2.family {
        return Err(Error::validation("germs live on different phase spaces".to_string()));
    }
    if points.is_empty() {
        return Err(Error::validation("equivalence needs at least one point".to_string()));
    }
    let mut out = Vec::with_capacity(points.len());
    for x in points {
        let mut rows = Vec::with_capacity(sched.l_values().len());
        for &l in sched.l_values() {
            let p = match &g1.family {
                GermFamily::HeisenbergGauss { .. } => {
                    let a = g1.precomposed(x)?;
                    let b = g2.precomposed(x)?;
                    let base = GermDescriptor::new(g1.family.clone())?;
                    germ_overlap(&base, l, &a, &b)?
                }
                _ => {
                    let s1 = germ_state(g1, l, x)?;
                    let s2 = germ_state(g2, l, x)?;
                    transition_probability(s1.vector()?, s2.vector()?)?
                }
            };
            rows.push(ResidualRow { l, hbar: g1.family.hbar(l), residual: p });
        }
        let last = rows.last().map(|r| r.residual).unwrap_or(0.0);
        out.push(EquivalencePoint { point: x.clone(), rows, equivalent: 1.0 - last < 1e-9 });
    }
    Ok(EquivalenceReport { points: out })
}

/// Image of a germ state under the momentum map.
#[derive(Clone, Debug)]
pub enum MomentumPoint {
    /// Scaled spin expectations `<J>/j`, a point of the unit sphere's ball.
    Sphere([f64; 3]),
    /// `hbar * (one-body reduced density)` as an `M x M` Hermitian matrix.
    Ray(HermitianMatrix),
    /// Plane coordinates `(p, q)`.
    Plane { p: Vec<f64>, q: Vec<f64> },
}

/// Momentum map of a germ-family state at size `L` (`hbar` fixed by the
/// family's schedule rule).
pub fn momentum_map(g: &GermDescriptor, l: usize, state: &GermState) -> Result<MomentumPoint> {
    if l == 0 {
        return Err(Error::validation("germ size L must be ≥ 1".to_string()));
    }
    match (&g.family, state) {
        (GermFamily::SpinSU2, GermState::Vector(v)) => {
            if v.dim() != l + 1 {
                return Err(Error::validation(format!(
                    "state has dimension {}, spin family expects {}",
                    v.dim(),
                    l + 1
                )));
            }
            let ops = spin_operators(l);
            let j = l as f64 / 2.0;
            let mut out = [0.0; 3];
            for (a, op) in ops.iter().enumerate() {
                out[a] = expectation(op, v)? / j;
            }
            Ok(MomentumPoint::Sphere(out))
        }
        (GermFamily::BosonicUM { m }, GermState::Vector(v)) => {
            let basis = OccupationBasis::new(*m, l)?;
            if v.dim() != basis.dim() {
                return Err(Error::validation(format!(
                    "state has dimension {}, symmetric sector has {}",
                    v.dim(),
                    basis.dim()
                )));
            }
            let hbar = 1.0 / l as f64;
            let c = v.amplitudes();
            let mut rho = CMatrix::zeros(*m, *m);
            let mut shifted = vec![0usize; *m];
            for idx in 0..basis.dim() {
                let n = basis.tuple(idx);
                for src in 0..*m {
                    if n[src] == 0 {
                        continue;
                    }
                    // diagonal: <a_src^† a_src> = n_src
                    rho[(src, src)] += c[idx].conj() * c[idx] * n[src] as f64;
                    for dst in 0..*m {
                        if dst == src {
                            continue;
                        }
                        shifted.copy_from_slice(n);
                        shifted[src] -= 1;
                        shifted[dst] += 1;
                        let target = basis.index_of(&shifted).expect("shift stays in sector");
                        let amp = ((n[src] * (n[dst] + 1)) as f64).sqrt();
                        // rho[a][b] = <a_b^† a_a>, so hbar*rho of a product
                        // state is exactly the ray projector
                        rho[(src, dst)] += c[target].conj() * c[idx] * amp;
                    }
                }
            }
            Ok(MomentumPoint::Ray(numerics::symmetrized(&(rho * Complex64::new(hbar, 0.0)))?))
        }
        (GermFamily::HeisenbergGauss { .. }, GermState::Gaussian(params)) => {
            Ok(MomentumPoint::Plane { p: params.p.clone(), q: params.q.clone() })
        }
        _ => Err(Error::validation("state does not belong to the germ family".to_string())),
    }
}

/// Normalized quadrature rule on the sphere: nodes with positive weights
/// summing to 1.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<PhasePoint>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(nodes: Vec<PhasePoint>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::validation("rule needs matching nonempty nodes and weights".to_string()));
        }
        for x in &nodes {
            if !matches!(x, PhasePoint::Sphere { .. }) {
                return Err(Error::validation("quadrature nodes must be sphere points".to_string()));
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::validation("quadrature weights must be positive".to_string()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!(
                "quadrature weights sum to {total:.17}, expected 1"
            )));
        }
        Ok(QuadratureRule { nodes, weights })
    }

    /// Tensor rule exact for every matrix element used at spin `j`:
    /// Gauss-Legendre of order `2j + 2` in `cos(theta)`, uniform grid of
    /// `4j + 4` points in `phi`.
    pub fn default_for_two_j(two_j: usize) -> Self {
        let n_gl = two_j + 2;
        let n_phi = 2 * two_j + 4;
        let (roots, gl_weights) = gauss_legendre(n_gl);
        let mut nodes = Vec::with_capacity(n_gl * n_phi);
        let mut weights = Vec::with_capacity(n_gl * n_phi);
        for (u, w) in roots.iter().zip(&gl_weights) {
            let theta = u.clamp(-1.0, 1.0).acos();
            for k in 0..n_phi {
                let phi = std::f64::consts::TAU * k as f64 / n_phi as f64;
                nodes.push(PhasePoint::Sphere { theta, phi });
                weights.push(w / (2.0 * n_phi as f64));
            }
        }
        QuadratureRule::new(nodes, weights).expect("tensor rule is normalized")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| match x {
            PhasePoint::Sphere { theta, phi } => (*theta, *phi, *w),
            _ => unreachable!("validated at construction"),
        })
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`, by Newton
/// iteration on the recurrence.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // the i-th guess converges to the i-th largest root
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    debug_assert!(n >= 1);
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Berezin quantization of a sphere function with its self-diagnosis.
#[derive(Clone, Debug)]
pub struct SphereQuantization {
    pub matrix: HermitianMatrix,
    /// `max |Q(1) - identity|`, measured with the same rule and states.
    pub identity_deviation: f64,
    /// Set when the rule failed to reproduce the identity to 1e-8,
    /// i.e. its order is insufficient for this `j`.
    pub warning: Option<String>,
}

/// `Q_hbar(f) = (2j+1) * sum_k w_k f(x_k) |q(x_k)><q(x_k)|`, normalized so
/// `Q(1) = identity`.
pub fn quantize_sphere<F>(f: F, two_j: usize, rule: &QuadratureRule) -> Result<SphereQuantization>
where
    F: Fn(f64, f64) -> f64,
{
    if two_j == 0 {
        return Err(Error::validation("quantization needs 2j ≥ 1".to_string()));
    }
    let dim = two_j + 1;
    let mut acc = CMatrix::zeros(dim, dim);
    let mut unit = CMatrix::zeros(dim, dim);
    let scale = dim as f64;
    for (theta, phi, w) in rule.iter() {
        let v = coherent_state(two_j, theta, phi);
        let value = f(theta, phi);
        if !value.is_finite() {
            return Err(Error::numeric(
                "quantize_sphere",
                format!("function value not finite at theta={theta}, phi={phi}"),
            ));
        }
        let one = Complex64::new(1.0, 0.0);
        acc.gerc(Complex64::new(scale * w * value, 0.0), v.amplitudes(), v.amplitudes(), one);
        unit.gerc(Complex64::new(scale * w, 0.0), v.amplitudes(), v.amplitudes(), one);
    }
    let matrix = numerics::symmetrized(&acc)?;
    let identity_deviation = numerics::symmetrized(&unit)?
        .max_abs_diff(&HermitianMatrix::identity(dim))?;
    let warning = (identity_deviation > 1e-8).then(|| {
        format!("quadrature does not resolve the identity at 2j={two_j}: deviation {identity_deviation:.3e}")
    });
    Ok(SphereQuantization { matrix, identity_deviation, warning })
}

/// Sphere coordinate functions `x_1, x_2, x_3` as a callable for a
/// polynomial in them.
pub fn sphere_function(poly: &PolynomialSpec) -> impl Fn(f64, f64) -> f64 + '_ {
    move |theta, phi| {
        let n = PhasePoint::unit_vector(theta, phi);
        poly.eval(&n)
    }
}

/// Poisson bracket of polynomials on the unit sphere with
/// `{x_a, x_b} = -eps_abc x_c`, the sign forced by the `i(AB-BA)/hbar`
/// commutator convention (asserted against the quantization in tests).
pub fn sphere_poisson_bracket(f: &PolynomialSpec, g: &PolynomialSpec) -> Result<PolynomialSpec> {
    for p in [f, g] {
        if p.max_index().unwrap_or(0) > 2 {
            return Err(Error::validation("sphere polynomials use symbols x1, x2, x3".to_string()));
        }
    }
    let eps = |a: usize, b: usize| -> Option<(usize, f64)> {
        match (a, b) {
            (0, 1) => Some((2, 1.0)),
            (1, 0) => Some((2, -1.0)),
            (1, 2) => Some((0, 1.0)),
            (2, 1) => Some((0, -1.0)),
            (2, 0) => Some((1, 1.0)),
            (0, 2) => Some((1, -1.0)),
            _ => None,
        }
    };
    let mut acc = PolynomialSpec::zero();
    for a in 0..3 {
        let fa = f.partial(a);
        if fa.terms().is_empty() {
            continue;
        }
        for b in 0..3 {
            let gb = g.partial(b);
            if gb.terms().is_empty() {
                continue;
            }
            if let Some((c, sign)) = eps(a, b) {
                let bracket_ab = PolynomialSpec::linear(c).scale(-sign);
                acc = acc.add(&fa.multiply(&gb).multiply(&bracket_ab));
            }
        }
    }
    Ok(acc)
}

fn schedule_quantize_pair(
    f: &PolynomialSpec,
    g: &PolynomialSpec,
    l: usize,
) -> Result<(HermitianMatrix, HermitianMatrix, QuadratureRule)> {
    for p in [f, g] {
        if p.max_index().unwrap_or(0) > 2 {
            return Err(Error::validation("sphere polynomials use symbols x1, x2, x3".to_string()));
        }
    }
    let rule = QuadratureRule::default_for_two_j(l);
    let qf = quantize_sphere(sphere_function(f), l, &rule)?;
    let qg = quantize_sphere(sphere_function(g), l, &rule)?;
    for q in [&qf, &qg] {
        if let Some(w) = &q.warning {
            return Err(Error::numeric("quantize_sphere", w.clone()));
        }
    }
    Ok((qf.matrix, qg.matrix, rule))
}

/// `|| [Q(f), Q(g)]_hbar - Q({f,g}) ||` (operator norm) along the
/// schedule, with `hbar = 2/L = 1/j`.
pub fn dirac_residual(
    f: &PolynomialSpec,
    g: &PolynomialSpec,
    sched: &SemiclassicalSchedule,
) -> Result<ResidualReport> {
    let bracket = sphere_poisson_bracket(f, g)?;
    let mut rows = Vec::with_capacity(sched.l_values().len());
    for &l in sched.l_values() {
        let hbar = GermFamily::SpinSU2.hbar(l);
        let (qf, qg, rule) = schedule_quantize_pair(f, g, l)?;
        let qbr = quantize_sphere(sphere_function(&bracket), l, &rule)?.matrix;
        let lhs = numerics::scaled_commutator(&qf, &qg, 1.0 / hbar)?;
        let residual = lhs.sub(&qbr)?.operator_norm();
        rows.push(ResidualRow { l, hbar, residual });
    }
    Ok(report_from_rows(rows))
}

/// `|| Q(f) o Q(g) - Q(fg) ||` (operator norm) along the schedule.
pub fn vonneumann_residual(
    f: &PolynomialSpec,
    g: &PolynomialSpec,
    sched: &SemiclassicalSchedule,
) -> Result<ResidualReport> {
    let product = f.multiply(g);
    let mut rows = Vec::with_capacity(sched.l_values().len());
    for &l in sched.l_values() {
        let hbar = GermFamily::SpinSU2.hbar(l);
        let (qf, qg, rule) = schedule_quantize_pair(f, g, l)?;
        let qprod = quantize_sphere(sphere_function(&product), l, &rule)?.matrix;
        let lhs = crate::tpspace::jordan_operator(&qf, &qg)?;
        let residual = lhs.sub(&qprod)?.operator_norm();
        rows.push(ResidualRow { l, hbar, residual });
    }
    Ok(report_from_rows(rows))
}

/// The function `x -> <q_hbar(x)| F |q_hbar(x)>` on the phase space.
pub struct Pullback {
    descriptor: GermDescriptor,
    l: usize,
    operator: HermitianMatrix,
}

/// Pullback of a matrix observable along the germ. Only the compact
/// families carry matrix observables; the plane family is analytic-only.
pub fn pullback(operator: HermitianMatrix, g: &GermDescriptor, l: usize) -> Result<Pullback> {
    let expected = match &g.family {
        GermFamily::SpinSU2 => l + 1,
        GermFamily::BosonicUM { m } => OccupationBasis::new(*m, l)?.dim(),
        GermFamily::HeisenbergGauss { .. } => {
            return Err(Error::validation(
                "the plane family is analytic-only and has no matrix observables".to_string(),
            ))
        }
    };
    if operator.dim() != expected {
        return Err(Error::validation(format!(
            "observable has dimension {}, representation space has {expected}",
            operator.dim()
        )));
    }
    Ok(Pullback { descriptor: g.clone(), l, operator })
}

impl Pullback {
    pub fn at(&self, x: &PhasePoint) -> Result<f64> {
        let state = germ_state(&self.descriptor, self.l, x)?;
        expectation(&self.operator, state.vector()?)
    }
}

/// One `(L, hbar, value)` row of a funnel sweep.
#[derive(Clone, Debug)]
pub struct FunnelRow {
    pub l: usize,
    pub hbar: f64,
    pub value: f64,
}

/// Funnel values along the schedule with the classical limit and the
/// decay exponent of `|value - limit|` against `hbar`.
#[derive(Clone, Debug)]
pub struct FunnelReport {
    pub rows: Vec<FunnelRow>,
    pub limit: f64,
    pub exponent: Option<f64>,
}

/// Scaled generator matrices of the family at size `L`, plus the classical
/// generator values at the point. Bosonic germs need their collective
/// algebra supplied; the other families ignore it.
fn funnel_generators(
    g: &GermDescriptor,
    l: usize,
    alg: Option<&CollectiveAlgebra>,
) -> Result<Vec<CMatrix>> {
    match &g.family {
        GermFamily::SpinSU2 => {
            let j = l as f64 / 2.0;
            Ok(spin_operators(l)
                .into_iter()
                .map(|op| op.into_matrix() / Complex64::new(j, 0.0))
                .collect())
        }
        GermFamily::BosonicUM { m } => {
            let alg = alg.ok_or_else(|| {
                Error::validation("bosonic funnels need a collective algebra".to_string())
            })?;
            if alg.m() != *m {
                return Err(Error::validation(format!(
                    "algebra acts on C^{}, family expects M={m}",
                    alg.m()
                )));
            }
            let basis = OccupationBasis::new(*m, l)?;
            alg.generators()
                .iter()
                .map(|a| {
                    collective_matrix(a, &basis)
                        .map(|s| s.into_matrix() / Complex64::new(l as f64, 0.0))
                })
                .collect()
        }
        GermFamily::HeisenbergGauss { .. } => unreachable!("plane funnels are analytic"),
    }
}

fn classical_generator_values(
    g: &GermDescriptor,
    x: &PhasePoint,
    alg: Option<&CollectiveAlgebra>,
) -> Result<Vec<f64>> {
    let base = g.precomposed(x)?;
    match (&g.family, &base) {
        (GermFamily::SpinSU2, PhasePoint::Sphere { theta, phi }) => {
            Ok(PhasePoint::unit_vector(*theta, *phi).to_vec())
        }
        (GermFamily::BosonicUM { .. }, PhasePoint::Ray(psi)) => {
            let alg = alg.ok_or_else(|| {
                Error::validation("bosonic funnels need a collective algebra".to_string())
            })?;
            alg.expectations(psi)
        }
        (GermFamily::HeisenbergGauss { .. }, PhasePoint::Plane { p, q }) => {
            let mut out = q.clone();
            out.extend_from_slice(p);
            Ok(out)
        }
        _ => unreachable!("precomposed validates the point"),
    }
}

/// Gaussian expectation of a symmetrized polynomial of degree ≤ 2 in the
/// symbols `(q_1..q_n, p_1..p_n)`: each squared symbol picks up `hbar/2`.
fn gaussian_polynomial_moment(poly: &PolynomialSpec, cl: &[f64], hbar: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (c, mono) in poly.terms() {
        let v = match mono.len() {
            0 => 1.0,
            1 => cl[mono[0]],
            2 => cl[mono[0]] * cl[mono[1]] + if mono[0] == mono[1] { hbar / 2.0 } else { 0.0 },
            _ => {
                return Err(Error::validation(
                    "plane funnels are restricted to polynomial degree ≤ 2".to_string(),
                ))
            }
        };
        acc += c * v;
    }
    Ok(acc)
}

/// `A_hbar(q_hbar(x))` along the schedule against the classical limit
/// `A_0(x)`, the polynomial evaluated on the classical generator values.
pub fn funnel_limit(
    a: &PolynomialSpec,
    g: &GermDescriptor,
    x: &PhasePoint,
    sched: &SemiclassicalSchedule,
    alg: Option<&CollectiveAlgebra>,
) -> Result<FunnelReport> {
    let cl = classical_generator_values(g, x, alg)?;
    if let Some(max) = a.max_index() {
        if max >= cl.len() {
            return Err(Error::validation(format!(
                "funnel polynomial references generator {max}, family has {}",
                cl.len()
            )));
        }
    }
    let limit = a.eval(&cl);
    let mut rows = Vec::with_capacity(sched.l_values().len());
    for &l in sched.l_values() {
        let hbar = g.family.hbar(l);
        let value = match &g.family {
            GermFamily::HeisenbergGauss { .. } => gaussian_polynomial_moment(a, &cl, hbar)?,
            _ => {
                let gens = funnel_generators(g, l, alg)?;
                let dim = gens[0].nrows();
                let op = polynomial_operator(a, &gens, dim)?;
                let state = germ_state(g, l, x)?;
                expectation(&op, state.vector()?)?
            }
        };
        rows.push(FunnelRow { l, hbar, value });
    }
    let err_rows: Vec<ResidualRow> = rows
        .iter()
        .map(|r| ResidualRow { l: r.l, hbar: r.hbar, residual: (r.value - limit).abs() })
        .collect();
    Ok(FunnelReport { rows, limit, exponent: fit_exponent(&err_rows) })
}

/// Classical Poisson bracket of generator polynomials from the family's
/// structure constants, `{x_a, x_b} = -c_ab^d x_d`.
fn classical_bracket(
    a: &PolynomialSpec,
    b: &PolynomialSpec,
    g: &GermDescriptor,
    alg: Option<&CollectiveAlgebra>,
) -> Result<PolynomialSpec> {
    match &g.family {
        GermFamily::SpinSU2 => sphere_poisson_bracket(a, b),
        GermFamily::BosonicUM { .. } => {
            let alg = alg.ok_or_else(|| {
                Error::validation("bosonic brackets need a collective algebra".to_string())
            })?;
            let n = alg.len();
            for p in [a, b] {
                if p.max_index().is_some_and(|i| i >= n) {
                    return Err(Error::validation(format!(
                        "bracket polynomial references generator {}, algebra has {n}",
                        p.max_index().unwrap()
                    )));
                }
            }
            let mut acc = PolynomialSpec::zero();
            for i in 0..n {
                let ai = a.partial(i);
                if ai.terms().is_empty() {
                    continue;
                }
                for k in 0..n {
                    let bk = b.partial(k);
                    if bk.terms().is_empty() {
                        continue;
                    }
                    for d in 0..n {
                        let c = alg.structure_constant(i, k, d);
                        if c != 0.0 {
                            let factor = PolynomialSpec::linear(d).scale(-c);
                            acc = acc.add(&ai.multiply(&bk).multiply(&factor));
                        }
                    }
                }
            }
            Ok(acc)
        }
        GermFamily::HeisenbergGauss { n } => {
            // symbols 0..n-1 are q_i, n..2n-1 are p_i; {q_i, p_i} = -1
            for p in [a, b] {
                if p.max_index().is_some_and(|i| i >= 2 * n) {
                    return Err(Error::validation(format!(
                        "bracket polynomial references symbol {}, plane has {}",
                        p.max_index().unwrap(),
                        2 * n
                    )));
                }
            }
            let mut acc = PolynomialSpec::zero();
            for i in 0..*n {
                let terms = [
                    (a.partial(i), b.partial(n + i), -1.0),
                    (a.partial(n + i), b.partial(i), 1.0),
                ];
                for (da, db, sign) in terms {
                    if !da.terms().is_empty() && !db.terms().is_empty() {
                        acc = acc.add(&da.multiply(&db).scale(sign));
                    }
                }
            }
            Ok(acc)
        }
    }
}

/// Sup over the grid of
/// `| <[A_hbar, B_hbar]_hbar at q_hbar(x)> - {A_0, B_0}(x) |` along the
/// schedule. The classical side uses the bracket of the limit
/// polynomials, which agrees with the bracket of the pullbacks to the
/// order resolved here.
pub fn bracket_residual(
    a: &PolynomialSpec,
    b: &PolynomialSpec,
    g: &GermDescriptor,
    grid: &[PhasePoint],
    sched: &SemiclassicalSchedule,
    alg: Option<&CollectiveAlgebra>,
) -> Result<ResidualReport> {
    if grid.is_empty() {
        return Err(Error::validation("bracket residual needs a nonempty grid".to_string()));
    }
    let bracket = classical_bracket(a, b, g, alg)?;
    let mut rows = Vec::with_capacity(sched.l_values().len());
    for &l in sched.l_values() {
        let hbar = g.family.hbar(l);
        let mut sup = 0.0f64;
        match &g.family {
            GermFamily::HeisenbergGauss { .. } => {
                for x in grid {
                    let cl = classical_generator_values(g, x, alg)?;
                    // Weyl calculus: the hbar-commutator of degree-≤2
                    // symbols is exactly the bracket polynomial
                    let quantum = gaussian_polynomial_moment(&bracket, &cl, hbar)?;
                    let classical = bracket.eval(&cl);
                    sup = sup.max((quantum - classical).abs());
                }
            }
            _ => {
                let gens = funnel_generators(g, l, alg)?;
                let dim = gens[0].nrows();
                let op_a = polynomial_operator(a, &gens, dim)?;
                let op_b = polynomial_operator(b, &gens, dim)?;
                let comm = numerics::scaled_commutator(&op_a, &op_b, 1.0 / hbar)?;
                for x in grid {
                    let state = germ_state(g, l, x)?;
                    let quantum = expectation(&comm, state.vector()?)?;
                    let cl = classical_generator_values(g, x, alg)?;
                    let classical = bracket.eval(&cl);
                    sup = sup.max((quantum - classical).abs());
                }
            }
        }
        rows.push(ResidualRow { l, hbar, residual: sup });
    }
    Ok(report_from_rows(rows))
}
