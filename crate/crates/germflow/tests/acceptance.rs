//! Acceptance gate: one test per release-blocking criterion, each printing
//! `ACCEPTANCE <n> <name>: PASS|FAIL (measured values)`. Run with
//! `cargo test --test acceptance -- --nocapture` for the full scoreboard.
//!
//! Every tolerance is pinned in the assertions. Criteria 8 and 10 assert
//! idealized decay rates that the exact closed forms do not reach in the
//! scheduled regime; those tests fail by design and report the measured
//! numbers rather than loosening the bands.

use std::fs;
use std::path::Path;
use std::process::Command;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use germflow::germs::{
    dirac_residual, germ_overlap, quantize_sphere, sphere_function, vonneumann_residual,
    GermDescriptor, GermFamily, PhasePoint, QuadratureRule, SemiclassicalSchedule,
};
use germflow::meanfield::{
    fidelity_trajectory, ground_state_correspondence, product_state, CollectiveAlgebra,
    OccupationBasis, PolynomialSpec,
};
use germflow::numerics::{
    hermitian_eig, scaled_commutator, CMatrix, CVector, EigenDecomposition, HermitianMatrix,
};
use germflow::projective::{hamiltonian_flow, transition_probability, HbarValue, PureState};
use germflow::tpspace::{
    as_operator, associativity_defect, jordan_operator, jordan_product, spectral_decompose,
    PureStateCombination,
};

/// Prints the criterion verdict, then enforces it. A clause is a pass flag
/// plus the measured statement; violated clauses are flagged in the line.
fn conclude(number: u8, name: &str, clauses: &[(bool, String)]) {
    let pass = clauses.iter().all(|c| c.0);
    let detail = clauses
        .iter()
        .map(|(ok, text)| if *ok { text.clone() } else { format!("VIOLATED: {text}") })
        .collect::<Vec<_>>()
        .join("; ");
    let line = format!(
        "ACCEPTANCE {number} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("{line}");
    assert!(pass, "{line}");
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn random_state<R: Rng>(rng: &mut R, dim: usize) -> PureState {
    let v = CVector::from_iterator(
        dim,
        (0..dim).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
    );
    PureState::normalized(v).unwrap()
}

fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> HermitianMatrix {
    let a = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    HermitianMatrix::new(h).unwrap()
}

fn random_combination<R: Rng>(rng: &mut R, dim: usize, terms: usize) -> PureStateCombination {
    let list = (0..terms)
        .map(|_| (rng.gen_range(-2.0..2.0), random_state(rng, dim)))
        .collect();
    PureStateCombination::new(list).unwrap()
}

// --- independent spin oracle: highest-weight vector rotated through
// --- exp(-i phi Jz) exp(-i theta Jy), built from ladder matrices

fn spin_jy_jz(two_j: usize) -> (HermitianMatrix, HermitianMatrix) {
    let dim = two_j + 1;
    let j = two_j as f64 / 2.0;
    let mut jp = CMatrix::zeros(dim, dim);
    for k in 0..two_j {
        let m = j - k as f64;
        jp[(k, k + 1)] = Complex64::new((j * (j + 1.0) - m * (m - 1.0)).sqrt(), 0.0);
    }
    let jy = (&jp - &jp.adjoint()) * Complex64::new(0.0, -0.5);
    let jz = CMatrix::from_fn(dim, dim, |r, c| {
        if r == c { Complex64::new(j - r as f64, 0.0) } else { Complex64::new(0.0, 0.0) }
    });
    (HermitianMatrix::new(jy).unwrap(), HermitianMatrix::new(jz).unwrap())
}

fn rotated_highest_weight(
    eig_jy: &EigenDecomposition,
    two_j: usize,
    theta: f64,
    phi: f64,
) -> CVector {
    let dim = two_j + 1;
    let j = two_j as f64 / 2.0;
    let mut v = CVector::zeros(dim);
    for (lam, w) in eig_jy.eigenvalues.iter().zip(&eig_jy.eigenvectors) {
        // <w|e0> = conj(w[0]); spectral application of exp(-i theta Jy)
        v += w * (Complex64::new(0.0, -lam * theta).exp() * w[0].conj());
    }
    for k in 0..dim {
        v[k] *= Complex64::from_polar(1.0, -phi * (j - k as f64));
    }
    v
}

#[test]
fn criterion_01_su2_overlap() {
    let g = GermDescriptor::new(GermFamily::SpinSU2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let pairs: Vec<[f64; 4]> = (0..50)
        .map(|_| {
            [
                rng.gen_range(0.0..std::f64::consts::PI),
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::PI),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ]
        })
        .collect();

    let mut worst = 0.0f64;
    for two_j in 1..=50 {
        let (jy, _) = spin_jy_jz(two_j);
        let eig = hermitian_eig(&jy);
        for &[t1, p1, t2, p2] in &pairs {
            let closed = germ_overlap(
                &g,
                two_j,
                &PhasePoint::sphere(t1, p1).unwrap(),
                &PhasePoint::sphere(t2, p2).unwrap(),
            )
            .unwrap();
            let v1 = rotated_highest_weight(&eig, two_j, t1, p1);
            let v2 = rotated_highest_weight(&eig, two_j, t2, p2);
            let explicit = v1.dotc(&v2).norm_sqr();
            worst = worst.max((closed - explicit).abs());
        }
    }
    conclude(
        1,
        "su2_overlap",
        &[(worst < 1e-10, format!("max |closed - rotated| = {worst:.2e}, tol 1e-10, 2j in 1..=50, 50 pairs"))],
    );
}

#[test]
fn criterion_02_bosonic_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for &m in &[2usize, 3, 4] {
        for &l in &[5usize, 18, 30] {
            let g = GermDescriptor::new(GermFamily::BosonicUM { m }).unwrap();
            let basis = OccupationBasis::new(m, l).unwrap();
            for k in 0..6 {
                let psi = random_state(&mut rng, m);
                // half the pairs nearly parallel so the L-th power stays O(1)
                let phi = if k % 2 == 0 {
                    random_state(&mut rng, m)
                } else {
                    let mut v = psi.amplitudes().clone();
                    for i in 0..m {
                        v[i] += Complex64::new(
                            rng.gen_range(-0.05..0.05),
                            rng.gen_range(-0.05..0.05),
                        );
                    }
                    PureState::normalized(v).unwrap()
                };
                let closed = germ_overlap(
                    &g,
                    l,
                    &PhasePoint::ray(psi.clone()),
                    &PhasePoint::ray(phi.clone()),
                )
                .unwrap();
                let sector = product_state(&psi, &basis)
                    .unwrap()
                    .overlap(&product_state(&phi, &basis).unwrap())
                    .unwrap();
                worst = worst.max((closed - sector).abs());
            }
        }
    }
    conclude(
        2,
        "bosonic_overlap",
        &[(worst < 1e-10, format!("max |closed - sector| = {worst:.2e}, tol 1e-10, M in 2..=4, L in 5..=30"))],
    );
}

// --- independent Gauss-Legendre rule for the wavefunction quadrature

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x =
                (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..64 {
                let (p, d) = legendre_pair(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre_pair(n, x);
            (x, 2.0 / ((1.0 - x * x) * d * d))
        })
        .collect()
}

fn wave_packet(x: f64, q: f64, p: f64, hbar: f64) -> Complex64 {
    let mag = (std::f64::consts::PI * hbar).powf(-0.25)
        * (-(x - q) * (x - q) / (2.0 * hbar)).exp();
    Complex64::from_polar(mag, p * (x - q / 2.0) / hbar)
}

fn quadrature_overlap(q1: &[f64], p1: &[f64], q2: &[f64], p2: &[f64], hbar: f64) -> f64 {
    let rule = gauss_legendre(300);
    let mut total = Complex64::new(1.0, 0.0);
    for d in 0..q1.len() {
        let center = 0.5 * (q1[d] + q2[d]);
        let half_width = 12.0 * hbar.sqrt() + (q1[d] - q2[d]).abs();
        let (lo, hi) = (center - half_width, center + half_width);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(r, w) in &rule {
            let x = 0.5 * (hi - lo) * r + 0.5 * (hi + lo);
            acc += wave_packet(x, q1[d], p1[d], hbar).conj()
                * wave_packet(x, q2[d], p2[d], hbar)
                * Complex64::new(0.5 * (hi - lo) * w, 0.0);
        }
        total *= acc;
    }
    total.norm_sqr()
}

#[test]
fn criterion_03_heisenberg_overlap() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let n = 1 + k % 2;
        let l = 1 + k % 3;
        let g = GermDescriptor::new(GermFamily::HeisenbergGauss { n }).unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let (qa, pa, qb, pb) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let closed = germ_overlap(
            &g,
            l,
            &PhasePoint::plane(pa.clone(), qa.clone()).unwrap(),
            &PhasePoint::plane(pb.clone(), qb.clone()).unwrap(),
        )
        .unwrap();
        let quad = quadrature_overlap(&qa, &pa, &qb, &pb, 1.0 / l as f64);
        worst = worst.max((closed - quad).abs());
    }
    conclude(
        3,
        "heisenberg_overlap",
        &[(worst < 1e-8, format!("max |closed - quadrature| = {worst:.2e}, tol 1e-8, n in {{1,2}}, 20 pairs"))],
    );
}

#[test]
fn criterion_04_spectral_theorem() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_recon = 0.0f64;
    let mut worst_pairwise = 0.0f64;
    for _ in 0..100 {
        let dim = rng.gen_range(2..=16);
        let terms = rng.gen_range(1..=8);
        let f = random_combination(&mut rng, dim, terms);
        let form = spectral_decompose(&f).unwrap();
        let recon = as_operator(&f).max_abs_diff(&form.as_operator()).unwrap();
        worst_recon = worst_recon.max(recon);
        for (i, (_, ei)) in form.pairs().iter().enumerate() {
            for (_, ej) in form.pairs().iter().skip(i + 1) {
                worst_pairwise = worst_pairwise.max(transition_probability(ei, ej).unwrap());
            }
        }
    }
    conclude(
        4,
        "spectral_theorem",
        &[
            (worst_recon < 1e-9, format!("max reconstruction error = {worst_recon:.2e}, tol 1e-9")),
            (worst_pairwise < 1e-10, format!("max pairwise p(e_a, e_b) = {worst_pairwise:.2e}, tol 1e-10, 100 combinations, dim <= 16")),
        ],
    );
}

#[test]
fn criterion_05_jordan_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst_product = 0.0f64;
    let mut worst_assoc = 0.0f64;
    for _ in 0..100 {
        let f = random_combination(&mut rng, 6, 4);
        let g = random_combination(&mut rng, 6, 4);
        let via_squares = jordan_product(&f, &g).unwrap().as_operator();
        let direct = jordan_operator(&as_operator(&f), &as_operator(&g)).unwrap();
        worst_product = worst_product.max(via_squares.max_abs_diff(&direct).unwrap());

        let a = random_hermitian(&mut rng, 6);
        let b = random_hermitian(&mut rng, 6);
        let c = random_hermitian(&mut rng, 6);
        let defect = associativity_defect(&a, &b, &c).unwrap();
        // K(X,Y) = i(XY-YX), so [B,[A,C]]/4 = K(B, K(A,C)) * (-1/4)
        let nested =
            scaled_commutator(&b, &scaled_commutator(&a, &c, 1.0).unwrap(), -0.25).unwrap();
        worst_assoc = worst_assoc.max(defect.max_abs_diff(&nested).unwrap());
    }
    conclude(
        5,
        "jordan_product",
        &[
            (worst_product < 1e-10, format!("max |squares route - anticommutator| = {worst_product:.2e}, tol 1e-10")),
            (worst_assoc < 1e-12, format!("max |associator - [B,[A,C]]/4| = {worst_assoc:.2e}, tol 1e-12, 100 triples")),
        ],
    );
}

#[test]
fn criterion_06_unitarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let hbar = HbarValue::new(1.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dim = rng.gen_range(2..=8);
        let h = random_hermitian(&mut rng, dim);
        let psi = random_state(&mut rng, dim);
        let phi = random_state(&mut rng, dim);
        let before = transition_probability(&psi, &phi).unwrap();
        for &t in &[0.1, 1.0, 10.0] {
            let after = transition_probability(
                &hamiltonian_flow(&h, hbar, t, &psi).unwrap(),
                &hamiltonian_flow(&h, hbar, t, &phi).unwrap(),
            )
            .unwrap();
            worst = worst.max((after - before).abs());
        }
    }
    conclude(
        6,
        "unitarity",
        &[(worst < 1e-10, format!("max |p(t) - p(0)| = {worst:.2e}, tol 1e-10, 100 pairs, t in {{0.1, 1, 10}}"))],
    );
}

#[test]
fn criterion_07_berezin_normalization() {
    let mut worst_identity = 0.0f64;
    for two_j in 1..=32 {
        let rule = QuadratureRule::default_for_two_j(two_j);
        let q = quantize_sphere(|_, _| 1.0, two_j, &rule).unwrap();
        assert!(q.warning.is_none(), "default rule flagged undersized at 2j = {two_j}");
        worst_identity = worst_identity.max(q.identity_deviation);
    }
    let rule = QuadratureRule::default_for_two_j(1);
    let x3 = PolynomialSpec::linear(2);
    let qz = quantize_sphere(sphere_function(&x3), 1, &rule).unwrap();
    let expect = HermitianMatrix::from_real_diagonal(&[1.0 / 3.0, -1.0 / 3.0]);
    let half_spin = qz.matrix.max_abs_diff(&expect).unwrap();
    conclude(
        7,
        "berezin_normalization",
        &[
            (worst_identity < 1e-8, format!("max ||Q(1) - I|| = {worst_identity:.2e} over 2j in 1..=32, tol 1e-8")),
            (half_spin < 1e-10, format!("|Q_(1/2)(cos theta) - diag(1/3, -1/3)| = {half_spin:.2e}, tol 1e-10")),
        ],
    );
}

fn decay_clauses(label: &str, rows: &[f64], exponent: f64, clauses: &mut Vec<(bool, String)>) {
    let decreasing = rows.windows(2).all(|w| w[1] < w[0]);
    clauses.push((decreasing, format!("{label} residuals strictly decreasing [{}]", fmt_list(rows))));
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[1] / w[0]).collect();
    let in_band = ratios.iter().all(|r| (0.35..=0.65).contains(r));
    clauses.push((in_band, format!("{label} per-doubling ratios in [0.35, 0.65] [{}]", fmt_list(&ratios))));
    clauses.push((exponent >= 0.8, format!("{label} fitted exponent >= 0.8 [{exponent:.4}]")));
}

#[test]
fn criterion_08_residual_decay() {
    let sched = SemiclassicalSchedule::new(vec![4, 8, 16, 32, 64]).unwrap();
    let x1 = PolynomialSpec::linear(0);
    let x2 = PolynomialSpec::linear(1);
    let x3 = PolynomialSpec::linear(2);

    let dirac = dirac_residual(&x1, &x2, &sched).unwrap();
    let vn = vonneumann_residual(&x3, &x3, &sched).unwrap();

    let mut clauses = Vec::new();
    let dirac_rows: Vec<f64> = dirac.rows.iter().map(|r| r.residual).collect();
    decay_clauses("dirac(x1,x2)", &dirac_rows, dirac.exponent.unwrap(), &mut clauses);
    let vn_rows: Vec<f64> = vn.rows.iter().map(|r| r.residual).collect();
    decay_clauses("vonneumann(x3,x3)", &vn_rows, vn.exponent.unwrap(), &mut clauses);
    conclude(8, "residual_decay", &clauses);
}

#[test]
fn criterion_09_meanfield_linear_exactness() {
    let alg = CollectiveAlgebra::su2();
    let h = PolynomialSpec::new(vec![(1.0, vec![2]), (0.25, vec![0])]).unwrap();
    let psi0 = PureState::normalized(CVector::from_iterator(
        2,
        [
            Complex64::new((std::f64::consts::PI / 6.0).cos(), 0.0),
            Complex64::new((std::f64::consts::PI / 6.0).sin(), 0.0),
        ],
    ))
    .unwrap();
    let grid = [0.0, 1.0, 2.5, 5.0];
    let mut worst = 0.0f64;
    for &l in &[2usize, 8, 32, 64] {
        let traj = fidelity_trajectory(&psi0, &h, &alg, l, &grid).unwrap();
        for f in &traj.fidelities {
            worst = worst.max((f - 1.0).abs());
        }
    }
    conclude(
        9,
        "meanfield_linear_exactness",
        &[(worst < 1e-9, format!("max |F_L(t) - 1| = {worst:.2e}, tol 1e-9, L <= 64, t <= 5"))],
    );
}

#[test]
fn criterion_10_meanfield_convergence() {
    // regression baselines: fidelities at t = 1 from the first verified run
    const BASELINES: [(usize, f64); 5] = [
        (8, 0.995468715433184),
        (16, 0.996181834693990),
        (32, 0.996546884473282),
        (64, 0.996731621156722),
        (128, 0.996824554797695),
    ];
    let alg = CollectiveAlgebra::su2();
    let h = PolynomialSpec::new(vec![(1.0, vec![2]), (0.5, vec![0, 0])]).unwrap();
    let psi0 = PureState::normalized(CVector::from_iterator(
        2,
        [
            Complex64::new((std::f64::consts::PI / 6.0).cos(), 0.0),
            Complex64::new((std::f64::consts::PI / 6.0).sin(), 0.0),
        ],
    ))
    .unwrap();
    let grid: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();

    let mut fidelities_t1 = Vec::new();
    let mut sups = Vec::new();
    for &(l, _) in &BASELINES {
        let traj = fidelity_trajectory(&psi0, &h, &alg, l, &grid).unwrap();
        fidelities_t1.push(traj.fidelities[4]);
        let sup = traj
            .quantum_expectations
            .iter()
            .zip(&traj.classical_expectations)
            .flat_map(|(xq, xc)| xq.iter().zip(xc).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        sups.push(sup);
    }

    let mut clauses = Vec::new();
    let increasing = fidelities_t1.windows(2).all(|w| w[1] > w[0]);
    clauses.push((
        increasing,
        format!(
            "F_L(1) strictly increasing over L in {{8..128}} [{}]",
            fidelities_t1.iter().map(|f| format!("{f:.6}")).collect::<Vec<_>>().join(", ")
        ),
    ));
    let ratios: Vec<f64> =
        fidelities_t1.windows(2).map(|w| (1.0 - w[0]) / (1.0 - w[1])).collect();
    let in_band = ratios.iter().all(|r| (1.4..=2.6).contains(r));
    clauses.push((in_band, format!("(1-F_L)/(1-F_2L) in [1.4, 2.6] [{}]", fmt_list(&ratios))));
    let baseline_err = fidelities_t1
        .iter()
        .zip(&BASELINES)
        .map(|(f, (_, b))| (f - b).abs())
        .fold(0.0f64, f64::max);
    clauses.push((baseline_err < 1e-6, format!("max drift from archived baselines = {baseline_err:.2e}, tol 1e-6")));
    let sup_ratios: Vec<f64> = sups.windows(2).map(|w| w[1] / w[0]).collect();
    let sup_halves = sup_ratios.iter().all(|r| (0.35..=0.65).contains(r));
    clauses.push((
        sup_halves,
        format!("sup_t<=2 |<X_a> - x_a| halves per doubling, ratios in [0.35, 0.65] [{}]", fmt_list(&sup_ratios)),
    ));
    conclude(10, "meanfield_convergence", &clauses);
}

#[test]
fn criterion_11_ground_state_correspondence() {
    let alg = CollectiveAlgebra::su2();
    let h = PolynomialSpec::new(vec![(1.0, vec![2]), (0.5, vec![0, 0])]).unwrap();
    let ls = [8usize, 16, 32, 64, 128];
    let distances: Vec<f64> = ls
        .iter()
        .map(|&l| ground_state_correspondence(&h, &alg, l).unwrap().distance)
        .collect();
    let ratios: Vec<f64> = distances.windows(2).map(|w| w[1] / w[0]).collect();
    conclude(
        11,
        "ground_state_correspondence",
        &[
            (distances[3] < 0.1, format!("distance at L = 64 is {:.3e}, tol 0.1", distances[3])),
            (
                ratios.iter().all(|r| (0.35..=0.65).contains(r)),
                format!("distance halves per doubling, ratios in [0.35, 0.65] [{}]", fmt_list(&ratios)),
            ),
        ],
    );
}

#[test]
fn criterion_12_determinism() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<_> = fs::read_dir(&configs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no shipped configs found in {}", configs.display());

    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0usize;
    let mut identical = true;
    for (i, config) in paths.iter().enumerate() {
        let (a, b) = (tmp.path().join(format!("a{i}")), tmp.path().join(format!("b{i}")));
        for dir in [&a, &b] {
            let out = Command::new(env!("CARGO_BIN_EXE_germflow"))
                .env_remove("GERMFLOW_OUT")
                .arg("run")
                .arg(config)
                .arg("--out")
                .arg(dir)
                .output()
                .unwrap();
            assert!(
                out.status.success(),
                "{} failed: {}",
                config.display(),
                String::from_utf8_lossy(&out.stderr)
            );
        }
        for entry in fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if Path::new(&name).extension().is_some_and(|x| x == "csv") {
                identical &= fs::read(a.join(&name)).unwrap() == fs::read(b.join(&name)).unwrap();
                compared += 1;
            }
        }
    }
    conclude(
        12,
        "determinism",
        &[(
            identical && compared == paths.len(),
            format!("{compared} CSVs byte-identical across double runs of {} configs", paths.len()),
        )],
    );
}
