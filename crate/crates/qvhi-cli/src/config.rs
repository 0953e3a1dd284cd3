//! JSON experiment configurations. Every document carries a
//! `schema_version` and is validated strictly: unknown keys are rejected.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use serde::Deserialize;

use qvhi_core::clarke::{LocallyLipschitz1D, SubgradientSelection, SuperpositionFunctional};
use qvhi_core::convex::{ConstraintSet, ConvexFunction, RadialConstraintFamily, RadialKind};
use qvhi_core::hilbert::{read_coord_matrix, DualVector, GramSpace, LinearMap, NonlinearOperator};
use qvhi_core::problems::{synthetic_instance, Regime};
use qvhi_core::qvhi::{OuterConfig, QVHIProblem};
use qvhi_core::vi::{StepRule, VISolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let file = File::open(path).map_err(|e| format!("cannot open config {path:?}: {e}"))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| format!("invalid config {path:?}: {e}"))
}

pub fn check_schema(version: u32) -> Result<(), String> {
    if version != SCHEMA_VERSION {
        return Err(format!(
            "unsupported schema_version {version}; this build expects {SCHEMA_VERSION}"
        ));
    }
    Ok(())
}

/// Inner (VI) solver parameters.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerParams {
    /// "auto" or a positive number.
    pub step: serde_json::Value,
    pub tol: f64,
    pub max_iter: usize,
    pub eps_inner: f64,
}

impl Default for InnerParams {
    fn default() -> Self {
        let d = VISolverConfig::default();
        InnerParams {
            step: serde_json::Value::String("auto".to_string()),
            tol: d.tol,
            max_iter: d.max_iter,
            eps_inner: d.eps_inner,
        }
    }
}

impl InnerParams {
    pub fn to_vi_config(&self) -> Result<VISolverConfig, String> {
        let step = match &self.step {
            serde_json::Value::String(s) if s == "auto" => StepRule::Auto,
            serde_json::Value::Number(n) => StepRule::Fixed(
                n.as_f64()
                    .ok_or_else(|| "step must be a number or \"auto\"".to_string())?,
            ),
            other => return Err(format!("step must be a number or \"auto\", got {other}")),
        };
        Ok(VISolverConfig {
            step,
            tol: self.tol,
            max_iter: self.max_iter,
            eps_inner: self.eps_inner,
        })
    }
}

/// Outer (fixed-point) solver parameters.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuterParams {
    pub damping: f64,
    pub tol_outer: f64,
    pub max_outer: usize,
    /// "min-norm" | "direction" | "midpoint".
    pub selection: String,
    pub multistart: usize,
    pub seed: u64,
    pub tol_feas: f64,
    pub inner: InnerParams,
}

impl Default for OuterParams {
    fn default() -> Self {
        let d = OuterConfig::default();
        OuterParams {
            damping: d.damping,
            tol_outer: d.tol_outer,
            max_outer: d.max_outer,
            selection: "min-norm".to_string(),
            multistart: d.multistart,
            seed: d.seed,
            tol_feas: d.tol_feas,
            inner: InnerParams::default(),
        }
    }
}

impl OuterParams {
    pub fn to_outer_config(&self, seed_override: Option<u64>) -> Result<OuterConfig, String> {
        let selection = match self.selection.as_str() {
            "min-norm" => SubgradientSelection::MinNorm,
            "direction" => SubgradientSelection::DirectionAttaining,
            "midpoint" => SubgradientSelection::Midpoint,
            other => {
                return Err(format!(
                    "unknown selection `{other}` (expected min-norm | direction | midpoint)"
                ))
            }
        };
        Ok(OuterConfig {
            damping: self.damping,
            tol_outer: self.tol_outer,
            max_outer: self.max_outer,
            selection,
            vi_cfg: self.inner.to_vi_config()?,
            multistart: self.multistart,
            seed: seed_override.unwrap_or(self.seed),
            tol_feas: self.tol_feas,
        })
    }
}

/// Convex part of a linear problem spec.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PhiSpec {
    #[default]
    Zero,
    L1 {
        weight: f64,
    },
    Quad {
        c: f64,
    },
}

/// Constraint family of a linear problem spec.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ConstraintSpec {
    #[default]
    Free,
    AmbientNorm {
        m0: f64,
        level_slope: f64,
    },
}

/// Linear QVHI problem assembled from coordinate-format matrix files
/// (paths are resolved relative to the config file).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProblemSpec {
    /// Coordinate-format SPD Gram matrix; identity when absent.
    #[serde(default)]
    pub gram_v: Option<String>,
    /// Coordinate-format operator matrix (dual coordinates).
    pub a_matrix: String,
    pub m_strong: f64,
    pub lipschitz: f64,
    pub f: Vec<f64>,
    /// Potential key: remark43 | abs | smooth-quad | zero.
    #[serde(default = "default_potential")]
    pub potential: String,
    #[serde(default)]
    pub potential_scale: Option<f64>,
    #[serde(default)]
    pub phi: PhiSpec,
    #[serde(default)]
    pub constraint: ConstraintSpec,
}

fn default_potential() -> String {
    "zero".to_string()
}

/// Problem selection: by bundled name, synthetic generator, or matrix files.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ProblemSpec {
    Builtin(String),
    Synthetic {
        dim: usize,
        seed: u64,
        regime: String,
    },
    Linear(LinearProblemSpec),
}

impl ProblemSpec {
    pub fn build(&self, config_dir: &Path) -> Result<QVHIProblem, String> {
        match self {
            ProblemSpec::Builtin(name) => builtin_problem(name),
            ProblemSpec::Synthetic { dim, seed, regime } => {
                let regime = match regime.as_str() {
                    "unique" => Regime::Unique,
                    "multistable" => Regime::Multistable,
                    other => {
                        return Err(format!(
                            "unknown regime `{other}` (expected unique | multistable)"
                        ))
                    }
                };
                synthetic_instance(*dim, *seed, regime).map_err(|e| e.to_string())
            }
            ProblemSpec::Linear(spec) => linear_problem(spec, config_dir),
        }
    }
}

/// Bundled demo problems.
pub fn builtin_problem(name: &str) -> Result<QVHIProblem, String> {
    match name {
        // 1D: A = id, f = 0.5, j the nonconvex example potential, M = id,
        // no constraints; the unique stationary point is u = 0.25.
        "demo-1d-remark43" => {
            let v = GramSpace::euclidean(1, "V");
            let x = GramSpace::euclidean(1, "X");
            let j = SuperpositionFunctional::uniform(
                &x,
                DVector::from_element(1, 1.0),
                LocallyLipschitz1D::remark43(),
            )
            .map_err(|e| e.to_string())?;
            QVHIProblem::new(
                NonlinearOperator::gram_identity(&v),
                ConvexFunction::zero(&v),
                j,
                LinearMap::identity_between(&v, &x).map_err(|e| e.to_string())?,
                DualVector::from_slice(&v, &[0.5]).map_err(|e| e.to_string())?,
                RadialConstraintFamily::unconstrained(&v),
                ConstraintSet::whole_space(&v),
                1.0,
                0.0,
            )
            .map_err(|e| e.to_string())
        }
        // 1D: A = id, f = 2, j = 0, K(v) = {|z| <= 1 + |v|/2}; the fixed
        // point is u = 2 with the constraint exactly active.
        "demo-1d-constraint" => {
            let v = GramSpace::euclidean(1, "V");
            let x = GramSpace::euclidean(1, "X");
            QVHIProblem::new(
                NonlinearOperator::gram_identity(&v),
                ConvexFunction::zero(&v),
                SuperpositionFunctional::zero(&x).map_err(|e| e.to_string())?,
                LinearMap::identity_between(&v, &x).map_err(|e| e.to_string())?,
                DualVector::from_slice(&v, &[2.0]).map_err(|e| e.to_string())?,
                RadialConstraintFamily::new(
                    &v,
                    RadialKind::AmbientNorm,
                    |u| 1.0 + u.coords()[0].abs() / 2.0,
                    1.0,
                )
                .map_err(|e| e.to_string())?,
                ConstraintSet::whole_space(&v),
                0.0,
                0.0,
            )
            .map_err(|e| e.to_string())
        }
        other => Err(format!(
            "unknown builtin problem `{other}` (expected demo-1d-remark43 | demo-1d-constraint)"
        )),
    }
}

fn read_matrix_file(path: &Path) -> Result<nalgebra::DMatrix<f64>, String> {
    let file = File::open(path).map_err(|e| format!("cannot open matrix file {path:?}: {e}"))?;
    read_coord_matrix(BufReader::new(file)).map_err(|e| format!("bad matrix file {path:?}: {e}"))
}

fn linear_problem(spec: &LinearProblemSpec, config_dir: &Path) -> Result<QVHIProblem, String> {
    let resolve = |p: &str| -> PathBuf {
        let pb = PathBuf::from(p);
        if pb.is_absolute() {
            pb
        } else {
            config_dir.join(pb)
        }
    };
    let a_mat = read_matrix_file(&resolve(&spec.a_matrix))?;
    let dim = a_mat.nrows();
    let v = match &spec.gram_v {
        Some(path) => {
            GramSpace::new(read_matrix_file(&resolve(path))?, "V").map_err(|e| e.to_string())?
        }
        None => GramSpace::euclidean(dim, "V"),
    };
    let x = GramSpace::euclidean(dim, "X");
    let a = NonlinearOperator::linear(&v, a_mat, spec.m_strong, spec.lipschitz)
        .map_err(|e| e.to_string())?;
    let mut h = LocallyLipschitz1D::by_key(&spec.potential).map_err(|e| e.to_string())?;
    if let Some(s) = spec.potential_scale {
        h = h.scaled(s).map_err(|e| e.to_string())?;
    }
    let j = SuperpositionFunctional::uniform(&x, DVector::from_element(dim, 1.0), h)
        .map_err(|e| e.to_string())?;
    let phi = match &spec.phi {
        PhiSpec::Zero => ConvexFunction::zero(&v),
        PhiSpec::L1 { weight } => {
            ConvexFunction::weighted_l1(&v, DVector::from_element(dim, *weight))
                .map_err(|e| e.to_string())?
        }
        PhiSpec::Quad { c } => ConvexFunction::scaled_sq_norm(&v, *c).map_err(|e| e.to_string())?,
    };
    let family = match &spec.constraint {
        ConstraintSpec::Free => RadialConstraintFamily::unconstrained(&v),
        ConstraintSpec::AmbientNorm { m0, level_slope } => {
            let (m0, slope) = (*m0, *level_slope);
            RadialConstraintFamily::new(
                &v,
                RadialKind::AmbientNorm,
                move |u| m0 + slope * u.norm(),
                m0,
            )
            .map_err(|e| e.to_string())?
        }
    };
    let f = DualVector::from_slice(&v, &spec.f).map_err(|e| e.to_string())?;
    let (alpha, beta) = (j.alpha(), j.beta());
    QVHIProblem::new(
        a,
        phi,
        j,
        LinearMap::identity_between(&v, &x).map_err(|e| e.to_string())?,
        f,
        family,
        ConstraintSet::whole_space(&v),
        alpha,
        beta,
    )
    .map_err(|e| e.to_string())
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub outer: OuterParams,
}

/// Perturbed-data families for the convergence study.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum FamilySpec {
    ShrinkingBall { limit_radius: f64 },
    MovingBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        drift: Vec<f64>,
    },
    PolyhedralCap { normal: Vec<f64>, offset: f64 },
    GShift { radius: f64, shift: Vec<f64> },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum OperatorSpec {
    #[default]
    Identity,
    SpdSeed(u64),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoscoConfig {
    pub schema_version: u32,
    pub dim: usize,
    pub family: FamilySpec,
    pub n_list: Vec<u32>,
    #[serde(default)]
    pub operator: OperatorSpec,
    pub g: Vec<f64>,
    #[serde(default)]
    pub inner: InnerParams,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCompareConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub u_spacing: f64,
    pub z_spacing: f64,
    pub box_lower: Vec<f64>,
    pub box_upper: Vec<f64>,
    #[serde(default)]
    pub outer: OuterParams,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum LawSpec {
    LinearConst(f64),
    NonlinearDemo { alpha_a: f64, m_a: f64 },
}

impl Default for LawSpec {
    fn default() -> Self {
        LawSpec::LinearConst(1.0)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSpec {
    pub key: String,
    pub scale: Option<f64>,
    /// Overrides the claimed growth certificate (c0, c1).
    pub growth: Option<(f64, f64)>,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec {
            key: "zero".to_string(),
            scale: None,
            growth: None,
        }
    }
}

impl PotentialSpec {
    pub fn build(&self) -> Result<LocallyLipschitz1D, String> {
        let mut h = LocallyLipschitz1D::by_key(&self.key).map_err(|e| e.to_string())?;
        if let Some((c0, c1)) = self.growth {
            h = h.with_growth(c0, c1).map_err(|e| e.to_string())?;
        }
        if let Some(s) = self.scale {
            h = h.scaled(s).map_err(|e| e.to_string())?;
        }
        Ok(h)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum FemConstraintSpec {
    #[default]
    Free,
    AmbientNorm {
        m0: f64,
        varrho2: f64,
    },
    GradientL1 {
        m0: f64,
        varrho1: f64,
        varrho2: f64,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum LoadSpec {
    Constant(f64),
    ManufacturedSine,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum StudySpec {
    Solve,
    Convergence { n_list: Vec<usize> },
    SmallnessSweep { c1_factors: Vec<f64> },
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec::Solve
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FemConfig {
    pub schema_version: u32,
    /// "interior" | "boundary".
    pub model: String,
    pub dim: u8,
    pub n_cells: usize,
    #[serde(default)]
    pub law: LawSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    /// Convex integrand: "zero" | "abs" | "half-square".
    #[serde(default = "default_convex")]
    pub convex: String,
    pub load: LoadSpec,
    #[serde(default)]
    pub constraint: FemConstraintSpec,
    /// Constant obstacle value on Σ₃ (boundary model).
    #[serde(default)]
    pub k2: Option<f64>,
    #[serde(default)]
    pub study: StudySpec,
    #[serde(default)]
    pub outer: OuterParams,
    /// Sampled hypothesis audit size.
    #[serde(default = "default_audit_samples")]
    pub audit_samples: usize,
}

fn default_convex() -> String {
    "zero".to_string()
}

fn default_audit_samples() -> usize {
    200
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub outer: OuterParams,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub n_starts: usize,
    #[serde(default)]
    pub outer: OuterParams,
}

/// Random SPD operator with spectrum in [1, 2] (for the Mosco study).
pub fn spd_operator(space: &Arc<GramSpace>, seed: u64) -> Result<NonlinearOperator, String> {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = space.dim();
    let gauss = nalgebra::DMatrix::from_fn(dim, dim, |_, _| {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    });
    let q = gauss.qr().q();
    let eigs = DVector::from_fn(dim, |_, _| rng.gen_range(1.0..2.0));
    let s = &q * nalgebra::DMatrix::from_diagonal(&eigs) * q.transpose();
    let s = (&s + s.transpose()) * 0.5;
    NonlinearOperator::linear(space, s, eigs.min(), eigs.max()).map_err(|e| e.to_string())
}
