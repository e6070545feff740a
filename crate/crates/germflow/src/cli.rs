//! Scenario runner: one JSON config in, deterministic CSV artifacts and a
//! run manifest out. All floating-point output is fixed at 17 significant
//! digits so identical configs reproduce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::germs::{
    bracket_residual, dirac_residual, funnel_limit, germ_delta_limit, germ_equivalence,
    vonneumann_residual, GermDescriptor, GermFamily, GermModification, PhasePoint,
    SemiclassicalSchedule,
};
use crate::meanfield::{
    fidelity_trajectory, ground_state_correspondence, CollectiveAlgebra, PolynomialSpec,
};
use crate::numerics::{CMatrix, CVector, HermitianMatrix};
use crate::projective::PureState;

/// Discriminator selecting which pipeline a config drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    GermDelta,
    GermEquiv,
    Residuals,
    Funnel,
    Meanfield,
    GroundState,
}

impl StudyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StudyKind::GermDelta => "germ_delta",
            StudyKind::GermEquiv => "germ_equiv",
            StudyKind::Residuals => "residuals",
            StudyKind::Funnel => "funnel",
            StudyKind::Meanfield => "meanfield",
            StudyKind::GroundState => "ground_state",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(rename = "L_values")]
    pub l_values: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    SpinSu2,
    HeisenbergGauss { n: u32 },
    BosonicUm {
        #[serde(rename = "M")]
        m: u32,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModificationConfig {
    None,
    PointwisePhase { rate: f64 },
    SphereRotation { alpha: f64 },
    PlaneShift { dq: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointConfig {
    Sphere {
        theta: f64,
        phi: f64,
    },
    Plane {
        p: Vec<f64>,
        q: Vec<f64>,
    },
    Ray {
        re: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coeff: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monomial: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialConfig {
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Dirac,
    Vonneumann,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    Su2,
    Explicit { matrices: Vec<MatrixConfig> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorConfig {
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

/// One scenario. A single schema serves every study; `validate` reports
/// which fields the chosen study requires, forbids, or defaults.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub study: StudyKind,
    /// Output stem: files are written as `<study>_<name>.csv`.
    pub name: String,
    /// Reproducibility anchor, echoed into the manifest. No current study
    /// draws random numbers; the field is reserved so future stochastic
    /// scenarios cannot appear without a pinned seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modification: Option<ModificationConfig>,
    pub schedule: ScheduleConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<PolynomialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable_b: Option<PolynomialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<PolynomialConfig>,
    /// Interaction strength: scales every degree-≥2 term of `hamiltonian`.
    /// Any finite value is admissible, including negative couplings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<VectorConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t_grid: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
}

/// Written as `manifest.json` (atomically) next to the CSV outputs. The
/// config echo re-validates and reproduces the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ScenarioConfig,
    pub outputs: Vec<String>,
    pub stages: Vec<StageRecord>,
}

/// Everything a run needs beyond the config itself.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub jobs: usize,
    /// Highest-precedence output directory (the `--out` flag).
    pub out_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 1, out_dir: None }
    }
}

enum Prepared {
    GermDelta {
        descriptor: GermDescriptor,
        x: PhasePoint,
        y: PhasePoint,
        schedule: SemiclassicalSchedule,
    },
    GermEquiv {
        base: GermDescriptor,
        modified: GermDescriptor,
        points: Vec<PhasePoint>,
        schedule: SemiclassicalSchedule,
    },
    Residuals {
        kind: ResidualKind,
        f: PolynomialSpec,
        g: PolynomialSpec,
        schedule: SemiclassicalSchedule,
    },
    Funnel {
        descriptor: GermDescriptor,
        observable: PolynomialSpec,
        bracket_with: Option<PolynomialSpec>,
        points: Vec<PhasePoint>,
        schedule: SemiclassicalSchedule,
        algebra: Option<CollectiveAlgebra>,
    },
    Meanfield {
        algebra: CollectiveAlgebra,
        hamiltonian: PolynomialSpec,
        psi0: PureState,
        t_grid: Vec<f64>,
        schedule: SemiclassicalSchedule,
    },
    GroundState {
        algebra: CollectiveAlgebra,
        hamiltonian: PolynomialSpec,
        schedule: SemiclassicalSchedule,
    },
}

fn err_text(e: &Error) -> String {
    match e {
        Error::Validation(m) => m.clone(),
        other => other.to_string(),
    }
}

struct Check {
    errors: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { errors: Vec::new() }
    }

    fn push(&mut self, path: &str, message: impl AsRef<str>) {
        self.errors.push(format!("{path}: {}", message.as_ref()));
    }

    /// Record fields the chosen study does not read.
    fn forbid(&mut self, study: StudyKind, fields: &[(&str, bool)]) {
        for (name, present) in fields {
            if *present {
                self.push(name, format!("not used by the {} study", study.as_str()));
            }
        }
    }
}

fn to_schedule(cfg: &ScheduleConfig, check: &mut Check) -> Option<SemiclassicalSchedule> {
    let ls: Vec<usize> = cfg.l_values.iter().map(|&l| l as usize).collect();
    match SemiclassicalSchedule::new(ls) {
        Ok(s) => Some(s),
        Err(e) => {
            check.push("schedule.L_values", err_text(&e));
            None
        }
    }
}

fn to_family(cfg: &FamilyConfig, check: &mut Check) -> Option<GermFamily> {
    let family = match cfg {
        FamilyConfig::SpinSu2 => GermFamily::SpinSU2,
        FamilyConfig::HeisenbergGauss { n } => GermFamily::HeisenbergGauss { n: *n as usize },
        FamilyConfig::BosonicUm { m } => GermFamily::BosonicUM { m: *m as usize },
    };
    match GermDescriptor::new(family.clone()) {
        Ok(_) => Some(family),
        Err(e) => {
            check.push("family", err_text(&e));
            None
        }
    }
}

fn to_modification(cfg: Option<&ModificationConfig>) -> GermModification {
    match cfg {
        None | Some(ModificationConfig::None) => GermModification::None,
        Some(ModificationConfig::PointwisePhase { rate }) => {
            GermModification::PointwisePhase { rate: *rate }
        }
        Some(ModificationConfig::SphereRotation { alpha }) => {
            GermModification::SphereRotation { alpha: *alpha }
        }
        Some(ModificationConfig::PlaneShift { dq }) => {
            GermModification::PlaneShift { dq: dq.clone() }
        }
    }
}

fn to_polynomial(cfg: &PolynomialConfig, path: &str, check: &mut Check) -> Option<PolynomialSpec> {
    let terms: Vec<(f64, Vec<usize>)> = cfg
        .terms
        .iter()
        .map(|t| (t.coeff, t.monomial.iter().map(|&i| i as usize).collect()))
        .collect();
    match PolynomialSpec::new(terms) {
        Ok(p) => Some(p),
        Err(e) => {
            check.push(path, err_text(&e));
            None
        }
    }
}

fn to_state(cfg: &VectorConfig, path: &str, check: &mut Check) -> Option<PureState> {
    let n = cfg.re.len();
    if let Some(im) = &cfg.im {
        if im.len() != n {
            check.push(path, format!("re has {n} entries but im has {}", im.len()));
            return None;
        }
    }
    let v = CVector::from_iterator(
        n,
        (0..n).map(|k| Complex64::new(cfg.re[k], cfg.im.as_ref().map_or(0.0, |im| im[k]))),
    );
    match PureState::normalized(v) {
        Ok(s) => Some(s),
        Err(e) => {
            check.push(path, err_text(&e));
            None
        }
    }
}

fn to_point(cfg: &PointConfig, family: &GermFamily, path: &str, check: &mut Check) -> Option<PhasePoint> {
    let point = match cfg {
        PointConfig::Sphere { theta, phi } => PhasePoint::sphere(*theta, *phi),
        PointConfig::Plane { p, q } => PhasePoint::plane(p.clone(), q.clone()),
        PointConfig::Ray { re, im } => {
            let vc = VectorConfig { re: re.clone(), im: im.clone() };
            return match to_state(&vc, path, check) {
                Some(s) => check_point_family(PhasePoint::ray(s), family, path, check),
                None => None,
            };
        }
    };
    match point {
        Ok(p) => check_point_family(p, family, path, check),
        Err(e) => {
            check.push(path, err_text(&e));
            None
        }
    }
}

fn check_point_family(
    point: PhasePoint,
    family: &GermFamily,
    path: &str,
    check: &mut Check,
) -> Option<PhasePoint> {
    let ok = match (family, &point) {
        (GermFamily::SpinSU2, PhasePoint::Sphere { .. }) => true,
        (GermFamily::HeisenbergGauss { n }, PhasePoint::Plane { p, .. }) => {
            if p.len() != *n {
                check.push(path, format!("plane point has dimension {}, family expects n={n}", p.len()));
                return None;
            }
            true
        }
        (GermFamily::BosonicUM { m }, PhasePoint::Ray(psi)) => {
            if psi.dim() != *m {
                check.push(path, format!("ray has dimension {}, family expects M={m}", psi.dim()));
                return None;
            }
            true
        }
        _ => false,
    };
    if ok {
        Some(point)
    } else {
        check.push(path, "point kind does not match the family");
        None
    }
}

fn to_algebra(cfg: Option<&GeneratorConfig>, check: &mut Check) -> Option<CollectiveAlgebra> {
    match cfg {
        None | Some(GeneratorConfig::Su2) => Some(CollectiveAlgebra::su2()),
        Some(GeneratorConfig::Explicit { matrices }) => {
            let mut gens = Vec::with_capacity(matrices.len());
            for (i, mc) in matrices.iter().enumerate() {
                let path = format!("generators.matrices[{i}]");
                let rows = mc.re.len();
                if rows == 0 || mc.re.iter().any(|r| r.len() != rows) {
                    check.push(&path, "re must be a square non-empty matrix");
                    return None;
                }
                if let Some(im) = &mc.im {
                    if im.len() != rows || im.iter().any(|r| r.len() != rows) {
                        check.push(&path, "im must match the shape of re");
                        return None;
                    }
                }
                let m = CMatrix::from_fn(rows, rows, |r, c| {
                    Complex64::new(mc.re[r][c], mc.im.as_ref().map_or(0.0, |im| im[r][c]))
                });
                match HermitianMatrix::new(m) {
                    Ok(h) => gens.push(h),
                    Err(e) => {
                        check.push(&path, err_text(&e));
                        return None;
                    }
                }
            }
            match CollectiveAlgebra::new(gens) {
                Ok(a) => Some(a),
                Err(e) => {
                    check.push("generators", err_text(&e));
                    None
                }
            }
        }
    }
}

fn apply_kappa(h: PolynomialSpec, kappa: Option<f64>, check: &mut Check) -> Option<PolynomialSpec> {
    let Some(k) = kappa else { return Some(h) };
    if !k.is_finite() {
        check.push("kappa", "must be finite");
        return None;
    }
    let terms = h
        .terms()
        .iter()
        .map(|(c, m)| (if m.len() >= 2 { c * k } else { *c }, m.clone()))
        .collect();
    match PolynomialSpec::new(terms) {
        Ok(p) => Some(p),
        Err(e) => {
            check.push("kappa", err_text(&e));
            None
        }
    }
}

fn symbol_count(family: &GermFamily, algebra: Option<&CollectiveAlgebra>) -> usize {
    match family {
        GermFamily::SpinSU2 => 3,
        GermFamily::BosonicUM { .. } => algebra.map_or(0, |a| a.len()),
        GermFamily::HeisenbergGauss { n } => 2 * n,
    }
}

fn check_symbols(p: &PolynomialSpec, count: usize, path: &str, check: &mut Check) {
    if let Some(max) = p.max_index() {
        if max >= count {
            check.push(path, format!("references symbol {max}, but only {count} are defined"));
        }
    }
}

fn check_t_grid(t_grid: &[f64], check: &mut Check) {
    if t_grid.is_empty() {
        check.push("t_grid", "must be non-empty");
        return;
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        check.push("t_grid", "entries must be finite");
        return;
    }
    if t_grid[0] != 0.0 {
        check.push("t_grid", "must start at 0 so F(0) = 1 anchors the record");
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        check.push("t_grid", "must be strictly increasing");
    }
}

fn prepare(cfg: &ScenarioConfig) -> std::result::Result<Prepared, Vec<String>> {
    let mut check = Check::new();

    if cfg.name.is_empty()
        || !cfg.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        check.push("name", "must be non-empty and match [A-Za-z0-9_-]+");
    }
    let schedule = to_schedule(&cfg.schedule, &mut check);

    let prepared = match cfg.study {
        StudyKind::GermDelta | StudyKind::GermEquiv => {
            check.forbid(
                cfg.study,
                &[
                    ("observable", cfg.observable.is_some()),
                    ("observable_b", cfg.observable_b.is_some()),
                    ("residual", cfg.residual.is_some()),
                    ("hamiltonian", cfg.hamiltonian.is_some()),
                    ("kappa", cfg.kappa.is_some()),
                    ("generators", cfg.generators.is_some()),
                    ("psi0", cfg.psi0.is_some()),
                    ("t_grid", !cfg.t_grid.is_empty()),
                ],
            );
            let family = match &cfg.family {
                Some(f) => to_family(f, &mut check),
                None => {
                    check.push("family", "required by this study");
                    None
                }
            };
            let Some(family) = family else {
                return Err(check.errors);
            };
            let modification = to_modification(cfg.modification.as_ref());
            let modified = match GermDescriptor::with_modification(family.clone(), modification) {
                Ok(d) => Some(d),
                Err(e) => {
                    check.push("modification", err_text(&e));
                    None
                }
            };
            let mut points = Vec::new();
            for (i, pc) in cfg.points.iter().enumerate() {
                let path = format!("points[{i}]");
                if let Some(p) = to_point(pc, &family, &path, &mut check) {
                    points.push(p);
                }
            }
            if cfg.study == StudyKind::GermDelta {
                if cfg.points.len() != 2 {
                    check.push("points", format!("germ_delta compares exactly 2 points, got {}", cfg.points.len()));
                }
                if !check.errors.is_empty() {
                    return Err(check.errors);
                }
                let y = points.pop().unwrap();
                let x = points.pop().unwrap();
                Prepared::GermDelta {
                    descriptor: modified.unwrap(),
                    x,
                    y,
                    schedule: schedule.unwrap(),
                }
            } else {
                if cfg.points.is_empty() {
                    check.push("points", "germ_equiv needs at least one point");
                }
                if !check.errors.is_empty() {
                    return Err(check.errors);
                }
                let base = GermDescriptor::new(family).expect("family validated above");
                Prepared::GermEquiv {
                    base,
                    modified: modified.unwrap(),
                    points,
                    schedule: schedule.unwrap(),
                }
            }
        }
        StudyKind::Residuals => {
            check.forbid(
                cfg.study,
                &[
                    ("modification", cfg.modification.is_some()),
                    ("points", !cfg.points.is_empty()),
                    ("hamiltonian", cfg.hamiltonian.is_some()),
                    ("kappa", cfg.kappa.is_some()),
                    ("generators", cfg.generators.is_some()),
                    ("psi0", cfg.psi0.is_some()),
                    ("t_grid", !cfg.t_grid.is_empty()),
                ],
            );
            if let Some(f) = &cfg.family {
                if !matches!(f, FamilyConfig::SpinSu2) {
                    check.push("family", "residuals quantize the sphere; omit or use spin_su2");
                }
            }
            let kind = match cfg.residual.clone() {
                Some(k) => Some(k),
                None => {
                    check.push("residual", "required: dirac or vonneumann");
                    None
                }
            };
            let f = match &cfg.observable {
                Some(p) => to_polynomial(p, "observable", &mut check),
                None => {
                    check.push("observable", "required by this study");
                    None
                }
            };
            let g = match &cfg.observable_b {
                Some(p) => to_polynomial(p, "observable_b", &mut check),
                None => {
                    check.push("observable_b", "required by this study");
                    None
                }
            };
            if let Some(p) = &f {
                check_symbols(p, 3, "observable", &mut check);
            }
            if let Some(p) = &g {
                check_symbols(p, 3, "observable_b", &mut check);
            }
            if !check.errors.is_empty() {
                return Err(check.errors);
            }
            Prepared::Residuals {
                kind: kind.unwrap(),
                f: f.unwrap(),
                g: g.unwrap(),
                schedule: schedule.unwrap(),
            }
        }
        StudyKind::Funnel => {
            check.forbid(
                cfg.study,
                &[
                    ("residual", cfg.residual.is_some()),
                    ("hamiltonian", cfg.hamiltonian.is_some()),
                    ("kappa", cfg.kappa.is_some()),
                    ("psi0", cfg.psi0.is_some()),
                    ("t_grid", !cfg.t_grid.is_empty()),
                ],
            );
            let family = match &cfg.family {
                Some(f) => to_family(f, &mut check),
                None => {
                    check.push("family", "required by this study");
                    None
                }
            };
            let Some(family) = family else {
                return Err(check.errors);
            };
            let algebra = match &family {
                GermFamily::BosonicUM { m } => {
                    let alg = to_algebra(cfg.generators.as_ref(), &mut check);
                    if let Some(a) = &alg {
                        if a.m() != *m {
                            check.push(
                                "generators",
                                format!("matrices act on C^{}, family expects M={m}", a.m()),
                            );
                        }
                    }
                    alg
                }
                _ => {
                    if cfg.generators.is_some() {
                        check.push("generators", "only the bosonic family takes a generator set");
                    }
                    None
                }
            };
            let modification = to_modification(cfg.modification.as_ref());
            let descriptor = match GermDescriptor::with_modification(family.clone(), modification) {
                Ok(d) => Some(d),
                Err(e) => {
                    check.push("modification", err_text(&e));
                    None
                }
            };
            let observable = match &cfg.observable {
                Some(p) => to_polynomial(p, "observable", &mut check),
                None => {
                    check.push("observable", "required by this study");
                    None
                }
            };
            let bracket_with = match &cfg.observable_b {
                Some(p) => to_polynomial(p, "observable_b", &mut check),
                None => None,
            };
            let count = symbol_count(&family, algebra.as_ref());
            if let Some(p) = &observable {
                check_symbols(p, count, "observable", &mut check);
            }
            if let Some(p) = &bracket_with {
                check_symbols(p, count, "observable_b", &mut check);
            }
            let mut points = Vec::new();
            for (i, pc) in cfg.points.iter().enumerate() {
                let path = format!("points[{i}]");
                if let Some(p) = to_point(pc, &family, &path, &mut check) {
                    points.push(p);
                }
            }
            if cfg.points.is_empty() {
                check.push("points", "funnel needs at least one evaluation point");
            }
            if !check.errors.is_empty() {
                return Err(check.errors);
            }
            Prepared::Funnel {
                descriptor: descriptor.unwrap(),
                observable: observable.unwrap(),
                bracket_with,
                points,
                schedule: schedule.unwrap(),
                algebra,
            }
        }
        StudyKind::Meanfield | StudyKind::GroundState => {
            let is_meanfield = cfg.study == StudyKind::Meanfield;
            check.forbid(
                cfg.study,
                &[
                    ("family", cfg.family.is_some()),
                    ("modification", cfg.modification.is_some()),
                    ("points", !cfg.points.is_empty()),
                    ("observable", cfg.observable.is_some()),
                    ("observable_b", cfg.observable_b.is_some()),
                    ("residual", cfg.residual.is_some()),
                    ("psi0", !is_meanfield && cfg.psi0.is_some()),
                    ("t_grid", !is_meanfield && !cfg.t_grid.is_empty()),
                ],
            );
            let algebra = to_algebra(cfg.generators.as_ref(), &mut check);
            let hamiltonian = match &cfg.hamiltonian {
                Some(p) => to_polynomial(p, "hamiltonian", &mut check)
                    .and_then(|h| apply_kappa(h, cfg.kappa, &mut check)),
                None => {
                    check.push("hamiltonian", "required by this study");
                    None
                }
            };
            if let (Some(h), Some(a)) = (&hamiltonian, &algebra) {
                check_symbols(h, a.len(), "hamiltonian", &mut check);
            }
            if is_meanfield {
                let psi0 = match &cfg.psi0 {
                    Some(v) => to_state(v, "psi0", &mut check),
                    None => {
                        check.push("psi0", "required by this study");
                        None
                    }
                };
                if let (Some(s), Some(a)) = (&psi0, &algebra) {
                    if s.dim() != a.m() {
                        check.push(
                            "psi0",
                            format!("has dimension {}, generators act on C^{}", s.dim(), a.m()),
                        );
                    }
                }
                check_t_grid(&cfg.t_grid, &mut check);
                if !check.errors.is_empty() {
                    return Err(check.errors);
                }
                Prepared::Meanfield {
                    algebra: algebra.unwrap(),
                    hamiltonian: hamiltonian.unwrap(),
                    psi0: psi0.unwrap(),
                    t_grid: cfg.t_grid.clone(),
                    schedule: schedule.unwrap(),
                }
            } else {
                if !check.errors.is_empty() {
                    return Err(check.errors);
                }
                Prepared::GroundState {
                    algebra: algebra.unwrap(),
                    hamiltonian: hamiltonian.unwrap(),
                    schedule: schedule.unwrap(),
                }
            }
        }
    };
    if check.errors.is_empty() {
        Ok(prepared)
    } else {
        Err(check.errors)
    }
}

/// Exhaustive field checks; a returned empty list means the config runs.
pub fn validate_config(cfg: &ScenarioConfig) -> Vec<String> {
    match prepare(cfg) {
        Ok(_) => Vec::new(),
        Err(errors) => errors,
    }
}

/// Fan `count` independent jobs over at most `jobs` workers; results come
/// back in index order, so parallelism never changes output bytes.
fn map_ordered<T, F>(count: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = jobs.max(1).min(count.max(1));
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T>>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let out = f(i);
                *slots[i].lock().expect("result slot") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot").expect("worker filled every slot"))
        .collect()
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn single(l: usize) -> SemiclassicalSchedule {
    SemiclassicalSchedule::new(vec![l]).expect("L ≥ 1 by schedule validation")
}

fn execute(prepared: &Prepared, jobs: usize) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    match prepared {
        Prepared::GermDelta { descriptor, x, y, schedule } => {
            lines.push("L,hbar,p".to_string());
            let ls = schedule.l_values();
            let rows = map_ordered(ls.len(), jobs, |i| {
                let report = germ_delta_limit(descriptor, x, y, &single(ls[i]))?;
                Ok(report.rows.into_iter().next().expect("one row per L"))
            })?;
            for r in rows {
                lines.push(format!("{},{},{}", r.l, fmt_f(r.hbar), fmt_f(r.residual)));
            }
        }
        Prepared::GermEquiv { base, modified, points, schedule } => {
            lines.push("point,L,hbar,p,equivalent".to_string());
            let reports = map_ordered(points.len(), jobs, |i| {
                germ_equivalence(base, modified, &points[i..=i], schedule)
            })?;
            for (pi, report) in reports.iter().enumerate() {
                let point = &report.points[0];
                for r in &point.rows {
                    lines.push(format!(
                        "{pi},{},{},{},{}",
                        r.l,
                        fmt_f(r.hbar),
                        fmt_f(r.residual),
                        u8::from(point.equivalent)
                    ));
                }
            }
        }
        Prepared::Residuals { kind, f, g, schedule } => {
            lines.push("L,hbar,residual".to_string());
            let ls = schedule.l_values();
            let rows = map_ordered(ls.len(), jobs, |i| {
                let report = match kind {
                    ResidualKind::Dirac => dirac_residual(f, g, &single(ls[i]))?,
                    ResidualKind::Vonneumann => vonneumann_residual(f, g, &single(ls[i]))?,
                };
                Ok(report.rows.into_iter().next().expect("one row per L"))
            })?;
            for r in rows {
                lines.push(format!("{},{},{}", r.l, fmt_f(r.hbar), fmt_f(r.residual)));
            }
        }
        Prepared::Funnel { descriptor, observable, bracket_with, points, schedule, algebra } => {
            let ls = schedule.l_values();
            if let Some(b) = bracket_with {
                lines.push("L,hbar,residual".to_string());
                let rows = map_ordered(ls.len(), jobs, |i| {
                    let report = bracket_residual(
                        observable,
                        b,
                        descriptor,
                        points,
                        &single(ls[i]),
                        algebra.as_ref(),
                    )?;
                    Ok(report.rows.into_iter().next().expect("one row per L"))
                })?;
                for r in rows {
                    lines.push(format!("{},{},{}", r.l, fmt_f(r.hbar), fmt_f(r.residual)));
                }
            } else {
                lines.push("point,L,hbar,value,limit".to_string());
                for (pi, x) in points.iter().enumerate() {
                    let reports = map_ordered(ls.len(), jobs, |i| {
                        funnel_limit(observable, descriptor, x, &single(ls[i]), algebra.as_ref())
                    })?;
                    for rep in reports {
                        let row = &rep.rows[0];
                        lines.push(format!(
                            "{pi},{},{},{},{}",
                            row.l,
                            fmt_f(row.hbar),
                            fmt_f(row.value),
                            fmt_f(rep.limit)
                        ));
                    }
                }
            }
        }
        Prepared::Meanfield { algebra, hamiltonian, psi0, t_grid, schedule } => {
            let k = algebra.len();
            let mut header = String::from("t,L,fidelity");
            for a in 1..=k {
                let _ = write!(header, ",x{a}_cl");
            }
            for a in 1..=k {
                let _ = write!(header, ",X{a}_q");
            }
            header.push_str(",energy_cl");
            lines.push(header);
            let ls = schedule.l_values();
            let trajectories = map_ordered(ls.len(), jobs, |i| {
                fidelity_trajectory(psi0, hamiltonian, algebra, ls[i], t_grid)
            })?;
            for traj in &trajectories {
                for (ti, &t) in traj.times.iter().enumerate() {
                    let mut line = format!("{},{},{}", fmt_f(t), traj.l, fmt_f(traj.fidelities[ti]));
                    for a in 0..k {
                        let _ = write!(line, ",{}", fmt_f(traj.classical_expectations[ti][a]));
                    }
                    for a in 0..k {
                        let _ = write!(line, ",{}", fmt_f(traj.quantum_expectations[ti][a]));
                    }
                    let _ = write!(line, ",{}", fmt_f(traj.classical_energies[ti]));
                    lines.push(line);
                }
            }
        }
        Prepared::GroundState { algebra, hamiltonian, schedule } => {
            let k = algebra.len();
            let mut header = String::from("L");
            for a in 1..=k {
                let _ = write!(header, ",x{a}_q");
            }
            for a in 1..=k {
                let _ = write!(header, ",x{a}_cl");
            }
            header.push_str(",energy_q,energy_cl,distance");
            lines.push(header);
            let ls = schedule.l_values();
            let reports = map_ordered(ls.len(), jobs, |i| {
                ground_state_correspondence(hamiltonian, algebra, ls[i])
            })?;
            for rep in &reports {
                let mut line = format!("{}", rep.l);
                for a in 0..k {
                    let _ = write!(line, ",{}", fmt_f(rep.quantum_point[a]));
                }
                for a in 0..k {
                    let _ = write!(line, ",{}", fmt_f(rep.classical_point[a]));
                }
                let _ = write!(
                    line,
                    ",{},{},{}",
                    fmt_f(rep.quantum_energy_per_site),
                    fmt_f(rep.classical_energy),
                    fmt_f(rep.distance)
                );
                lines.push(line);
            }
        }
    }
    Ok(lines)
}

/// Output directory precedence: `--out` flag, then `GERMFLOW_OUT`, then
/// the config's `out_dir`, then the working directory.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Ok(env_dir) = std::env::var("GERMFLOW_OUT") {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    match &cfg.out_dir {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from("."),
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Run one scenario: validate, compute, write `<study>_<name>.csv` and an
/// atomically renamed `manifest.json`. Returns the output directory and
/// the manifest.
pub fn run_config(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<(PathBuf, RunManifest)> {
    let mut stages = Vec::new();

    let started = Instant::now();
    let prepared = prepare(cfg).map_err(|errors| Error::validation(errors.join("; ")))?;
    stages.push(StageRecord { name: "validate".to_string(), seconds: started.elapsed().as_secs_f64() });

    let started = Instant::now();
    let lines = execute(&prepared, opts.jobs)?;
    stages.push(StageRecord { name: "compute".to_string(), seconds: started.elapsed().as_secs_f64() });

    let started = Instant::now();
    let dir = resolve_out_dir(opts.out_dir.as_deref(), cfg);
    fs::create_dir_all(&dir)?;
    let csv_name = format!("{}_{}.csv", cfg.study.as_str(), cfg.name);
    let mut body = lines.join("\n");
    body.push('\n');
    fs::write(dir.join(&csv_name), body)?;

    let mut manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        outputs: vec![csv_name],
        stages,
    };
    manifest
        .stages
        .push(StageRecord { name: "write".to_string(), seconds: started.elapsed().as_secs_f64() });
    let tmp = dir.join("manifest.json.tmp");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&tmp, text)?;
    fs::rename(&tmp, dir.join("manifest.json"))?;
    Ok((dir, manifest))
}

/// Exit code mapping: validation and parse problems are 2, numeric
/// failures are 3, anything else (I/O) is 1.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Json(_) => 2,
        Error::Numeric { .. } => 3,
        Error::Io(_) => 1,
    }
}

/// The config document format, printed by `germflow schema`.
pub const SCHEMA_JSON: &str = r##"{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "germflow scenario",
  "type": "object",
  "required": ["study", "name", "schedule"],
  "additionalProperties": false,
  "properties": {
    "study": {
      "enum": ["germ_delta", "germ_equiv", "residuals", "funnel", "meanfield", "ground_state"],
      "description": "Which pipeline to run; decides which optional fields are required."
    },
    "name": {
      "type": "string",
      "pattern": "^[A-Za-z0-9_-]+$",
      "description": "Output stem: files are written as <study>_<name>.csv."
    },
    "seed": {
      "type": "integer",
      "minimum": 0,
      "default": 0,
      "description": "Reproducibility anchor echoed into the manifest; no current study draws random numbers."
    },
    "out_dir": {
      "type": "string",
      "description": "Output directory; overridden by GERMFLOW_OUT and by --out."
    },
    "family": {
      "type": "object",
      "description": "Germ family (germ_delta, germ_equiv, funnel). kind: spin_su2 | heisenberg_gauss (n >= 1) | bosonic_um (M >= 2).",
      "oneOf": [
        {"properties": {"kind": {"const": "spin_su2"}}, "required": ["kind"], "additionalProperties": false},
        {"properties": {"kind": {"const": "heisenberg_gauss"}, "n": {"type": "integer", "minimum": 1}}, "required": ["kind", "n"], "additionalProperties": false},
        {"properties": {"kind": {"const": "bosonic_um"}, "M": {"type": "integer", "minimum": 2}}, "required": ["kind", "M"], "additionalProperties": false}
      ]
    },
    "modification": {
      "type": "object",
      "description": "Reparametrization applied to the (second) germ. kind: none | pointwise_phase (rate) | sphere_rotation (alpha) | plane_shift (dq).",
      "oneOf": [
        {"properties": {"kind": {"const": "none"}}, "required": ["kind"], "additionalProperties": false},
        {"properties": {"kind": {"const": "pointwise_phase"}, "rate": {"type": "number"}}, "required": ["kind", "rate"], "additionalProperties": false},
        {"properties": {"kind": {"const": "sphere_rotation"}, "alpha": {"type": "number"}}, "required": ["kind", "alpha"], "additionalProperties": false},
        {"properties": {"kind": {"const": "plane_shift"}, "dq": {"type": "array", "items": {"type": "number"}}}, "required": ["kind", "dq"], "additionalProperties": false}
      ]
    },
    "schedule": {
      "type": "object",
      "required": ["L_values"],
      "additionalProperties": false,
      "properties": {
        "L_values": {
          "type": "array",
          "items": {"type": "integer", "minimum": 1},
          "minItems": 1,
          "description": "Strictly increasing sizes; hbar is 2/L for spin_su2 and 1/L otherwise."
        }
      }
    },
    "points": {
      "type": "array",
      "description": "Phase-space points. kind: sphere (theta in [0,pi], phi in [0,2pi)) | plane (p, q) | ray (re, im; normalized on load). germ_delta takes exactly two.",
      "items": {
        "oneOf": [
          {"properties": {"kind": {"const": "sphere"}, "theta": {"type": "number"}, "phi": {"type": "number"}}, "required": ["kind", "theta", "phi"], "additionalProperties": false},
          {"properties": {"kind": {"const": "plane"}, "p": {"type": "array", "items": {"type": "number"}}, "q": {"type": "array", "items": {"type": "number"}}}, "required": ["kind", "p", "q"], "additionalProperties": false},
          {"properties": {"kind": {"const": "ray"}, "re": {"type": "array", "items": {"type": "number"}}, "im": {"type": "array", "items": {"type": "number"}}}, "required": ["kind", "re"], "additionalProperties": false}
        ]
      }
    },
    "observable": {
      "$ref": "#/definitions/polynomial",
      "description": "Polynomial in the family generators (residuals: f; funnel: the funnel observable)."
    },
    "observable_b": {
      "$ref": "#/definitions/polynomial",
      "description": "Second polynomial (residuals: g; funnel: switches the study to the bracket residual over the point grid)."
    },
    "residual": {
      "enum": ["dirac", "vonneumann"],
      "description": "residuals study: commutator-vs-bracket or Jordan-vs-product."
    },
    "hamiltonian": {
      "$ref": "#/definitions/polynomial",
      "description": "Mean-field H-tilde as a polynomial in the scaled collective generators."
    },
    "kappa": {
      "type": "number",
      "description": "Interaction strength; scales every degree->=2 term of hamiltonian. Any finite value, negative included."
    },
    "generators": {
      "type": "object",
      "description": "Collective generator set: {kind: su2} (default) or {kind: explicit, matrices: [{re, im}]}, Hermitian, closed under i[.,.].",
      "oneOf": [
        {"properties": {"kind": {"const": "su2"}}, "required": ["kind"], "additionalProperties": false},
        {"properties": {"kind": {"const": "explicit"}, "matrices": {"type": "array", "items": {"type": "object"}}}, "required": ["kind", "matrices"], "additionalProperties": false}
      ]
    },
    "psi0": {
      "type": "object",
      "required": ["re"],
      "additionalProperties": false,
      "properties": {
        "re": {"type": "array", "items": {"type": "number"}},
        "im": {"type": "array", "items": {"type": "number"}}
      },
      "description": "Initial single-particle state for meanfield; normalized on load."
    },
    "t_grid": {
      "type": "array",
      "items": {"type": "number"},
      "description": "Strictly increasing times starting at 0 (meanfield only)."
    }
  },
  "definitions": {
    "polynomial": {
      "type": "object",
      "required": ["terms"],
      "additionalProperties": false,
      "properties": {
        "terms": {
          "type": "array",
          "items": {
            "type": "object",
            "required": ["coeff"],
            "additionalProperties": false,
            "properties": {
              "coeff": {"type": "number"},
              "monomial": {"type": "array", "items": {"type": "integer", "minimum": 0}}
            }
          }
        }
      },
      "description": "sum of coeff * product of generator symbols; sphere symbols are 0,1,2 for x1,x2,x3; plane symbols are q_1..q_n then p_1..p_n."
    }
  }
}
"##;

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ScenarioConfig {
        serde_json::from_str(text).unwrap()
    }

    fn delta_config() -> ScenarioConfig {
        parse(
            r#"{
                "study": "germ_delta",
                "name": "su2_pair",
                "family": {"kind": "spin_su2"},
                "schedule": {"L_values": [2, 4, 8]},
                "points": [
                    {"kind": "sphere", "theta": 0.0, "phi": 0.0},
                    {"kind": "sphere", "theta": 1.5707963267948966, "phi": 0.0}
                ]
            }"#,
        )
    }

    #[test]
    fn minimal_delta_config_reproduces_the_powers_of_a_quarter() {
        let cfg = delta_config();
        assert!(validate_config(&cfg).is_empty());
        let prepared = prepare(&cfg).unwrap();
        let lines = execute(&prepared, 1).unwrap();
        assert_eq!(lines[0], "L,hbar,p");
        let p: Vec<f64> = lines[1..]
            .iter()
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.0625).abs() < 1e-12);
        assert!((p[2] - 0.00390625).abs() < 1e-12);
    }

    #[test]
    fn jobs_do_not_change_output() {
        let cfg = delta_config();
        let prepared = prepare(&cfg).unwrap();
        let serial = execute(&prepared, 1).unwrap();
        let parallel = execute(&prepared, 4).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn small_m_is_rejected_with_the_field_message() {
        let cfg = parse(
            r#"{
                "study": "germ_delta",
                "name": "too_small",
                "family": {"kind": "bosonic_um", "M": 1},
                "schedule": {"L_values": [2]},
                "points": []
            }"#,
        );
        let errors = validate_config(&cfg);
        assert!(errors.iter().any(|e| e.contains("M must be ≥ 2")), "{errors:?}");
    }

    #[test]
    fn empty_schedule_names_the_field() {
        let cfg = parse(
            r#"{
                "study": "germ_delta",
                "name": "empty",
                "family": {"kind": "spin_su2"},
                "schedule": {"L_values": []},
                "points": [
                    {"kind": "sphere", "theta": 0.0, "phi": 0.0},
                    {"kind": "sphere", "theta": 1.0, "phi": 0.0}
                ]
            }"#,
        );
        let errors = validate_config(&cfg);
        assert!(errors.iter().any(|e| e.starts_with("schedule.L_values")), "{errors:?}");
    }

    #[test]
    fn negative_kappa_is_admissible() {
        let cfg = parse(
            r#"{
                "study": "ground_state",
                "name": "attractive",
                "schedule": {"L_values": [4]},
                "hamiltonian": {"terms": [{"coeff": 1.0, "monomial": [2]}, {"coeff": 0.5, "monomial": [0, 0]}]},
                "kappa": -1.0
            }"#,
        );
        assert!(validate_config(&cfg).is_empty());
    }

    #[test]
    fn kappa_scales_only_interaction_terms() {
        let mut check = Check::new();
        let h = PolynomialSpec::new(vec![(1.0, vec![2]), (0.5, vec![0, 0])]).unwrap();
        let scaled = apply_kappa(h, Some(-2.0), &mut check).unwrap();
        assert!(check.errors.is_empty());
        assert_eq!(scaled.terms(), &[(-1.0, vec![0, 0]), (1.0, vec![2])]);
    }

    #[test]
    fn unused_fields_are_flagged() {
        let cfg = parse(
            r#"{
                "study": "germ_delta",
                "name": "noisy",
                "family": {"kind": "spin_su2"},
                "schedule": {"L_values": [2]},
                "points": [
                    {"kind": "sphere", "theta": 0.0, "phi": 0.0},
                    {"kind": "sphere", "theta": 1.0, "phi": 0.0}
                ],
                "hamiltonian": {"terms": [{"coeff": 1.0, "monomial": [2]}]}
            }"#,
        );
        let errors = validate_config(&cfg);
        assert!(errors.iter().any(|e| e.starts_with("hamiltonian:")), "{errors:?}");
    }

    #[test]
    fn unknown_fields_fail_to_parse() {
        let r: std::result::Result<ScenarioConfig, _> = serde_json::from_str(
            r#"{"study": "germ_delta", "name": "x", "schedule": {"L_values": [1]}, "mystery": 3}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn point_family_mismatch_is_reported_with_index() {
        let cfg = parse(
            r#"{
                "study": "germ_delta",
                "name": "mixed",
                "family": {"kind": "spin_su2"},
                "schedule": {"L_values": [2]},
                "points": [
                    {"kind": "sphere", "theta": 0.0, "phi": 0.0},
                    {"kind": "plane", "p": [0.0], "q": [0.0]}
                ]
            }"#,
        );
        let errors = validate_config(&cfg);
        assert!(errors.iter().any(|e| e.starts_with("points[1]")), "{errors:?}");
    }

    #[test]
    fn linear_mean_field_fidelity_is_exact() {
        let cfg = parse(
            r#"{
                "study": "meanfield",
                "name": "linear",
                "schedule": {"L_values": [2, 4]},
                "hamiltonian": {"terms": [{"coeff": 1.0, "monomial": [0]}, {"coeff": -0.5, "monomial": [2]}]},
                "psi0": {"re": [0.8, 0.6]},
                "t_grid": [0.0, 0.25, 0.5]
            }"#,
        );
        let prepared = prepare(&cfg).unwrap();
        let lines = execute(&prepared, 1).unwrap();
        assert_eq!(
            lines[0],
            "t,L,fidelity,x1_cl,x2_cl,x3_cl,X1_q,X2_q,X3_q,energy_cl"
        );
        for line in &lines[1..] {
            let f: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert!((f - 1.0).abs() < 1e-9, "{line}");
        }
    }

    #[test]
    fn meanfield_requires_its_fields() {
        let cfg = parse(
            r#"{"study": "meanfield", "name": "bare", "schedule": {"L_values": [2]}}"#,
        );
        let errors = validate_config(&cfg);
        for field in ["hamiltonian", "psi0", "t_grid"] {
            assert!(errors.iter().any(|e| e.starts_with(field)), "{field}: {errors:?}");
        }
    }

    #[test]
    fn float_format_is_fixed_width_scientific() {
        assert_eq!(fmt_f(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_f(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f(-0.00390625), "-3.9062500000000000e-3");
    }

    #[test]
    fn schema_text_is_valid_json() {
        let v: serde_json::Value = serde_json::from_str(SCHEMA_JSON).unwrap();
        assert!(v.get("properties").is_some());
    }

    #[test]
    fn config_round_trips_through_serialization() {
        let cfg = delta_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let again: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert!(validate_config(&again).is_empty());
        let a = execute(&prepare(&cfg).unwrap(), 1).unwrap();
        let b = execute(&prepare(&again).unwrap(), 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn residuals_study_rejects_symbols_off_the_sphere() {
        let cfg = parse(
            r#"{
                "study": "residuals",
                "name": "bad_symbol",
                "schedule": {"L_values": [2]},
                "residual": "dirac",
                "observable": {"terms": [{"coeff": 1.0, "monomial": [5]}]},
                "observable_b": {"terms": [{"coeff": 1.0, "monomial": [0]}]}
            }"#,
        );
        let errors = validate_config(&cfg);
        assert!(errors.iter().any(|e| e.starts_with("observable:")), "{errors:?}");
    }

    #[test]
    fn funnel_study_emits_value_and_limit_columns() {
        let cfg = parse(
            r#"{
                "study": "funnel",
                "name": "square",
                "family": {"kind": "spin_su2"},
                "schedule": {"L_values": [2, 4]},
                "observable": {"terms": [{"coeff": 1.0, "monomial": [2, 2]}]},
                "points": [{"kind": "sphere", "theta": 1.0471975511965976, "phi": 0.0}]
            }"#,
        );
        let prepared = prepare(&cfg).unwrap();
        let lines = execute(&prepared, 2).unwrap();
        assert_eq!(lines[0], "point,L,hbar,value,limit");
        let first: Vec<&str> = lines[1].split(',').collect();
        let value: f64 = first[3].parse().unwrap();
        let limit: f64 = first[4].parse().unwrap();
        assert!((value - 0.625).abs() < 1e-12);
        assert!((limit - 0.25).abs() < 1e-12);
    }
}
