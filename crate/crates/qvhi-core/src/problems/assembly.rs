//! Material laws, operator/embedding/trace assembly, and the builders for
//! the interior and boundary semipermeability models.
//!
//! The interior model: `−div a(x, ∇u) = g₁ + g₂(x, u)` with
//! `−g₂ ∈ ∂h(x, u)` in Ω, homogeneous Dirichlet data on Γ₁, and a monotone
//! flux relation `−∂u/∂ν_a ∈ ∂_c k(x, u)` on Γ₂, under the solution-dependent
//! constraint `r(u) ≤ m(u)`. Its weak form has A from the law, φ the
//! boundary convex part, j the domain superposition of h, and M the nodal
//! embedding V → L²(Ω).
//!
//! The boundary model swaps the roles: the nonmonotone relation
//! `−∂u/∂ν_a ∈ ∂h₂(x, u)` lives on Σ₂ (so j rides the trace map), the convex
//! part `p` lives in the domain, and the unilateral bound `u ≤ k₂` on Σ₃
//! becomes the set C.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::clarke::{LocallyLipschitz1D, SuperpositionFunctional};
use crate::convex::{ConstraintSet, ConvexFunction, RadialConstraintFamily, RadialKind, Scalar1};
use crate::hilbert::{DualVector, GramSpace, LinearMap, NonlinearOperator, Vector};
use crate::qvhi::QVHIProblem;
use crate::{Error, Result};

use super::mesh::FEMSpace;

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Diffusion law `a(x, ξ)` with its growth constant `m_a`
/// (`‖a(x,ξ)‖ ≤ m_a(1+‖ξ‖)`) and strong monotonicity constant `α_a`
/// (`(a(x,ξ₁)−a(x,ξ₂))·(ξ₁−ξ₂) ≥ α_a‖ξ₁−ξ₂‖²`). The constants are claims,
/// sampled at construction and auditable through `check_hypotheses`.
#[derive(Clone)]
pub struct MaterialLaw {
    pub kind: MaterialKind,
    a_fn: Arc<dyn Fn(&[f64; 2], &[f64; 2]) -> [f64; 2] + Send + Sync>,
    coefficient: Option<Arc<dyn Fn(&[f64; 2]) -> f64 + Send + Sync>>,
    pub m_a: f64,
    pub alpha_a: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaterialKind {
    LinearIso,
    NonlinearDemo,
}

impl MaterialLaw {
    /// Isotropic linear law `a(x, ξ) = c(x) ξ` with `α_a ≤ inf c` and
    /// `m_a ≥ sup c` (spot-checked on a coarse grid).
    pub fn linear_iso(
        c: impl Fn(&[f64; 2]) -> f64 + Send + Sync + 'static,
        alpha_a: f64,
        m_a: f64,
    ) -> Result<Self> {
        if !(alpha_a >= 0.0 && m_a >= alpha_a && m_a > 0.0) {
            return Err(Error::InvalidData(
                "linear law needs 0 <= alpha_a <= m_a, m_a > 0".to_string(),
            ));
        }
        let c = Arc::new(c);
        for i in 0..9 {
            for k in 0..9 {
                let x = [i as f64 / 8.0, k as f64 / 8.0];
                let v = c(&x);
                if !(v >= alpha_a - 1e-12 && v <= m_a + 1e-12) {
                    return Err(Error::HypothesisViolated {
                        clause: "coefficient range".to_string(),
                        witness: format!("c({x:?}) = {v} outside [{alpha_a}, {m_a}]"),
                    });
                }
            }
        }
        let ca = c.clone();
        Ok(MaterialLaw {
            kind: MaterialKind::LinearIso,
            a_fn: Arc::new(move |x, xi| {
                let v = ca(x);
                [v * xi[0], v * xi[1]]
            }),
            coefficient: Some(c),
            m_a,
            alpha_a,
        })
    }

    /// Constant-coefficient linear law.
    pub fn linear_const(c: f64) -> Result<Self> {
        MaterialLaw::linear_iso(move |_| c, c, c)
    }

    /// A genuinely nonlinear law
    /// `a(x, ξ) = (α_a + (m_a − α_a)/(1 + ‖ξ‖)) ξ`: the radial coefficient
    /// decays from `m_a` at the origin toward `α_a`, keeping strong
    /// monotonicity `α_a` and Lipschitz bound `m_a`.
    pub fn nonlinear_demo(alpha_a: f64, m_a: f64) -> Result<Self> {
        if !(alpha_a > 0.0 && m_a >= alpha_a) {
            return Err(Error::InvalidData(
                "nonlinear demo law needs 0 < alpha_a <= m_a".to_string(),
            ));
        }
        Ok(MaterialLaw {
            kind: MaterialKind::NonlinearDemo,
            a_fn: Arc::new(move |_, xi| {
                let t = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
                let g = alpha_a + (m_a - alpha_a) / (1.0 + t);
                [g * xi[0], g * xi[1]]
            }),
            coefficient: None,
            m_a,
            alpha_a,
        })
    }

    /// Overrides the claimed constants without changing the law (for
    /// injecting hypothesis violations into the audit).
    pub fn with_claimed_constants(mut self, alpha_a: f64, m_a: f64) -> Self {
        self.alpha_a = alpha_a;
        self.m_a = m_a;
        self
    }

    pub fn eval(&self, x: &[f64; 2], xi: &[f64; 2]) -> [f64; 2] {
        (self.a_fn)(x, xi)
    }
}

impl std::fmt::Debug for MaterialLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MaterialLaw")
            .field("kind", &self.kind)
            .field("alpha_a", &self.alpha_a)
            .field("m_a", &self.m_a)
            .finish()
    }
}

/// Assembles `⟨Au, v⟩ = ∫ a(x, ∇u)·∇v dx` with one-point quadrature per cell
/// (exact for linear laws since P1 gradients are cellwise constant). Linear
/// laws precompute the weighted stiffness matrix; nonlinear laws assemble
/// per call. Operator constants: `m = α_a`, `L = m_a` in the stiffness
/// metric.
pub fn assemble_operator(space: &Arc<FEMSpace>, law: &MaterialLaw) -> Result<NonlinearOperator> {
    let nf = space.n_free();
    if law.kind == MaterialKind::LinearIso {
        let c = law.coefficient.clone().expect("linear law has a coefficient");
        let mesh = &space.mesh;
        let mut k_c = DMatrix::zeros(nf, nf);
        for cell in 0..mesh.n_cells() {
            let coeff = c(&mesh.cell_centroid(cell));
            let ns = mesh.cell_nodes(cell);
            let grads = mesh.cell_basis_gradients(cell);
            let measure = mesh.cell_measure(cell);
            for (i, &gi) in ns.iter().enumerate() {
                let Some(fi) = space.free_position(gi) else {
                    continue;
                };
                for (k, &gk) in ns.iter().enumerate() {
                    if let Some(fk) = space.free_position(gk) {
                        k_c[(fi, fk)] += coeff
                            * measure
                            * (grads[i][0] * grads[k][0] + grads[i][1] * grads[k][1]);
                    }
                }
            }
        }
        return NonlinearOperator::linear(&space.space_v, k_c, law.alpha_a, law.m_a);
    }
    let space_c = space.clone();
    let law_c = law.clone();
    NonlinearOperator::new(
        &space.space_v,
        law.alpha_a,
        law.m_a,
        move |u: &Vector| -> DualVector {
            let mesh = &space_c.mesh;
            let nodal = space_c.nodal_values(u);
            let mut out = DVector::zeros(space_c.n_free());
            for cell in 0..mesh.n_cells() {
                let ns = mesh.cell_nodes(cell);
                let grads = mesh.cell_basis_gradients(cell);
                let measure = mesh.cell_measure(cell);
                let mut gu = [0.0, 0.0];
                for (i, &g) in ns.iter().enumerate() {
                    gu[0] += nodal[g] * grads[i][0];
                    gu[1] += nodal[g] * grads[i][1];
                }
                let flux = law_c.eval(&mesh.cell_centroid(cell), &gu);
                for (i, &g) in ns.iter().enumerate() {
                    if let Some(fi) = space_c.free_position(g) {
                        out[fi] += measure * (flux[0] * grads[i][0] + flux[1] * grads[i][1]);
                    }
                }
            }
            DualVector::new(&space_c.space_v, out).expect("assembled flux is finite")
        },
    )
}

/// Node-identity embedding of the free-node space into the nodal L²(Ω)
/// space (Dirichlet rows stay zero).
pub fn assemble_embedding(space: &Arc<FEMSpace>) -> Result<LinearMap> {
    let n_all = space.mesh.n_nodes();
    let mut m = DMatrix::zeros(n_all, space.n_free());
    for (pos, &g) in space.free_nodes.iter().enumerate() {
        m[(g, pos)] = 1.0;
    }
    LinearMap::new(&space.space_v, &space.space_x_domain, m)
}

/// Restriction to the non-Dirichlet flux-part nodes with the lumped boundary
/// mass as the codomain metric. Errors when the flux part is empty.
pub fn assemble_trace(space: &Arc<FEMSpace>) -> Result<LinearMap> {
    let xb = space.space_x_boundary.as_ref().ok_or(Error::EmptyBoundaryPart {
        part: "Flux (Γ₂/Σ₂)".to_string(),
    })?;
    let mut m = DMatrix::zeros(space.flux_nodes.len(), space.n_free());
    for (row, &g) in space.flux_nodes.iter().enumerate() {
        let pos = space
            .free_position(g)
            .expect("flux nodes are non-Dirichlet");
        m[(row, pos)] = 1.0;
    }
    LinearMap::new(&space.space_v, xb, m)
}

/// Lumped load functional `f_i = ω_i g₁(x_i)` on the free nodes.
pub fn assemble_load(space: &Arc<FEMSpace>, g1: &dyn Fn(&[f64; 2]) -> f64) -> DualVector {
    let coords = DVector::from_fn(space.n_free(), |i, _| {
        let g = space.free_nodes[i];
        space.domain_weights[g] * g1(&space.mesh.nodes[g])
    });
    DualVector::new(&space.space_v, coords).expect("load values must be finite")
}

/// Convex boundary/domain integrand presets for φ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvexChoice {
    Zero,
    /// `k(r) = |r|`.
    Abs,
    /// `k(r) = r²/2`.
    HalfSquare,
}

impl ConvexChoice {
    fn scalar(self) -> Option<Scalar1> {
        match self {
            ConvexChoice::Zero => None,
            ConvexChoice::Abs => Some(Scalar1::Abs),
            ConvexChoice::HalfSquare => Some(Scalar1::HalfSquare),
        }
    }

    pub(crate) fn value(self, r: f64) -> f64 {
        match self.scalar() {
            None => 0.0,
            Some(s) => s.value(r),
        }
    }
}

/// Constraint-family recipe for the assembled models.
#[derive(Clone, Debug)]
pub enum ConstraintChoice {
    /// `K(v)` is the whole space.
    Free,
    /// `r(w) = ‖w‖_V`, `m(v) = m0 + Σ ω_i ϱ₂(x_i)|v_i|` on the embedded
    /// nodal values.
    AmbientNorm { m0: f64, varrho2: f64 },
    /// The gradient-integral variant: `r(w) = Σ_cells ϱ₁ |∇w| |T|` with the
    /// same level map.
    GradientL1 { m0: f64, varrho1: f64, varrho2: f64 },
}

fn build_family(
    space: &Arc<FEMSpace>,
    choice: &ConstraintChoice,
) -> Result<RadialConstraintFamily> {
    match choice {
        ConstraintChoice::Free => Ok(RadialConstraintFamily::unconstrained(&space.space_v)),
        ConstraintChoice::AmbientNorm { m0, varrho2 } => {
            let level = level_map(space, *m0, *varrho2);
            RadialConstraintFamily::new(&space.space_v, RadialKind::AmbientNorm, level, *m0)
        }
        ConstraintChoice::GradientL1 { m0, varrho1, varrho2 } => {
            let mesh = &space.mesh;
            let dim = mesh.dim as usize;
            let n_cells = mesh.n_cells();
            let mut d = DMatrix::zeros(n_cells * dim, space.n_free());
            for cell in 0..n_cells {
                let ns = mesh.cell_nodes(cell);
                let grads = mesh.cell_basis_gradients(cell);
                for (i, &g) in ns.iter().enumerate() {
                    if let Some(fi) = space.free_position(g) {
                        for k in 0..dim {
                            d[(cell * dim + k, fi)] = grads[i][k];
                        }
                    }
                }
            }
            let grad_space = GramSpace::euclidean(n_cells * dim, "grad");
            let map = LinearMap::new(&space.space_v, &grad_space, d)?;
            let weights =
                DVector::from_fn(n_cells, |c, _| varrho1 * space.mesh.cell_measure(c));
            let level = level_map(space, *m0, *varrho2);
            RadialConstraintFamily::new(
                &space.space_v,
                RadialKind::WeightedL1 {
                    map: Arc::new(map),
                    group_size: dim,
                    weights,
                },
                level,
                *m0,
            )
        }
    }
}

/// `m(v) = m0 + ∫ |v| ϱ₂ dx ≈ m0 + Σ ω_i ϱ₂ |v_i|`, evaluated on the nodal
/// embedding of `v` (the level map acts on L²(Ω)).
fn level_map(
    space: &Arc<FEMSpace>,
    m0: f64,
    varrho2: f64,
) -> impl Fn(&Vector) -> f64 + Send + Sync + 'static {
    let weights = space.domain_weights.clone();
    let free = space.free_nodes.clone();
    move |v: &Vector| {
        let mut acc = m0;
        for (pos, &g) in free.iter().enumerate() {
            acc += weights[g] * varrho2 * v.coords()[pos].abs();
        }
        acc
    }
}

/// Smallness data of an assembled model: the condition
/// `c̄₁ √2 ‖M‖² < α_a` with the numerically computed operator norm.
#[derive(Clone, Debug)]
pub struct SmallnessInfo {
    pub c1_bar: f64,
    pub alpha_a: f64,
    pub m_norm: f64,
    pub beta: f64,
    /// `α_a / (√2 ‖M‖²)`: the flip point of the sweep.
    pub critical_c1: f64,
    pub pass: bool,
    pub margin: f64,
}

pub fn smallness_info(alpha_a: f64, c1_bar: f64, m_norm: f64) -> SmallnessInfo {
    let beta = SQRT2 * c1_bar;
    let margin = alpha_a - beta * m_norm * m_norm;
    SmallnessInfo {
        c1_bar,
        alpha_a,
        m_norm,
        beta,
        critical_c1: alpha_a / (SQRT2 * m_norm * m_norm),
        pass: margin > 0.0,
        margin,
    }
}

/// Which model an [`AssembledProblem`] came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Interior,
    Boundary,
}

/// Everything `check_hypotheses` needs to re-audit the ingredients.
#[derive(Clone)]
pub struct Recipe {
    pub law: MaterialLaw,
    /// The locally Lipschitz integrand (h for the interior model, h₂ for the
    /// boundary model).
    pub potential: LocallyLipschitz1D,
    pub convex_choice: ConvexChoice,
    pub constraint: ConstraintChoice,
    /// Obstacle values on the Σ₃ nodes (boundary model only).
    pub k2: Option<DVector<f64>>,
}

/// A FEM-discretized instance: the abstract problem plus its discrete spaces
/// and provenance.
pub struct AssembledProblem {
    pub qvhi: QVHIProblem,
    pub space: Arc<FEMSpace>,
    pub provenance: String,
    pub smallness: SmallnessInfo,
    pub recipe: Recipe,
}

impl std::fmt::Debug for AssembledProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AssembledProblem")
            .field("provenance", &self.provenance)
            .field("free_dofs", &self.space.n_free())
            .field("smallness_margin", &self.smallness.margin)
            .finish()
    }
}

/// Interior semipermeability model: A from the law, φ the Γ₂ convex part,
/// j the domain superposition of `h`, M the embedding, f the lumped load of
/// `g₁`. Growth constants enter as `α = √2 c̄₀ |Ω|^{1/2}`, `β = √2 c̄₁`;
/// the smallness condition is evaluated with the computed embedding norm and
/// enforced at construction.
pub fn build_interior_problem(
    space: &Arc<FEMSpace>,
    law: &MaterialLaw,
    h: &LocallyLipschitz1D,
    k_choice: ConvexChoice,
    g1: impl Fn(&[f64; 2]) -> f64,
    constraint: &ConstraintChoice,
) -> Result<AssembledProblem> {
    let a = assemble_operator(space, law)?;
    let embedding = assemble_embedding(space)?;
    let m_norm = embedding.operator_norm()?;
    let (c0, c1) = h.growth();
    let info = smallness_info(law.alpha_a, c1, m_norm);
    let domain_measure: f64 = space.domain_weights.sum();
    let alpha = SQRT2 * c0 * domain_measure.sqrt();
    let beta = SQRT2 * c1;
    let j = SuperpositionFunctional::uniform(
        &space.space_x_domain,
        space.domain_weights.clone(),
        h.clone(),
    )?;
    let phi = boundary_convex_part(space, k_choice)?;
    let f = assemble_load(space, &g1);
    let family = build_family(space, constraint)?;
    let qvhi = QVHIProblem::new(
        a,
        phi,
        j,
        embedding,
        f,
        family,
        ConstraintSet::whole_space(&space.space_v),
        alpha,
        beta,
    )?;
    Ok(AssembledProblem {
        qvhi,
        space: space.clone(),
        provenance: format!(
            "interior model: {:?} law, domain potential, |M| = {m_norm:.6}",
            law.kind
        ),
        smallness: info,
        recipe: Recipe {
            law: law.clone(),
            potential: h.clone(),
            convex_choice: k_choice,
            constraint: constraint.clone(),
            k2: None,
        },
    })
}

/// φ(v) = Σ over Γ₂ nodes of σ_i k(v_i), prox under the stiffness metric.
fn boundary_convex_part(space: &Arc<FEMSpace>, k_choice: ConvexChoice) -> Result<ConvexFunction> {
    let Some(scalar) = k_choice.scalar() else {
        return Ok(ConvexFunction::zero(&space.space_v));
    };
    let Some(bw) = space.boundary_weights.as_ref() else {
        // No flux part (1D interior presets): the boundary integral is empty.
        return Ok(ConvexFunction::zero(&space.space_v));
    };
    let mut weights = DVector::zeros(space.n_free());
    for (row, &g) in space.flux_nodes.iter().enumerate() {
        let pos = space.free_position(g).expect("flux nodes are free");
        weights[pos] = bw[row];
    }
    ConvexFunction::separable(&space.space_v, scalar, weights)
}

/// Boundary semipermeability model: the nonmonotone part `h₂` rides the
/// trace onto Σ₂, the convex part `p` is a domain integral, and
/// `C = {v ≤ k₂ on Σ₃}`. `k₂ ≥ 0` is enforced (the anchor 0 must stay
/// feasible); `k₂ ≢ 0` is only audited, since the fully active obstacle
/// `k₂ ≡ 0` is a legitimate degenerate configuration.
pub fn build_boundary_problem(
    space: &Arc<FEMSpace>,
    law: &MaterialLaw,
    h2: &LocallyLipschitz1D,
    p_choice: ConvexChoice,
    g1: impl Fn(&[f64; 2]) -> f64,
    k2: &DVector<f64>,
    constraint: &ConstraintChoice,
) -> Result<AssembledProblem> {
    if space.obstacle_nodes.is_empty() {
        return Err(Error::EmptyBoundaryPart {
            part: "Obstacle (Σ₃)".to_string(),
        });
    }
    if k2.len() != space.obstacle_nodes.len() {
        return Err(Error::InvalidData(format!(
            "k2 needs one value per obstacle node ({} nodes, got {})",
            space.obstacle_nodes.len(),
            k2.len()
        )));
    }
    if k2.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::HypothesisViolated {
            clause: "obstacle sign".to_string(),
            witness: "k2 must be nonnegative and finite".to_string(),
        });
    }
    let a = assemble_operator(space, law)?;
    let trace = assemble_trace(space)?;
    let m_norm = trace.operator_norm()?;
    let (c0, c1) = h2.growth();
    let info = smallness_info(law.alpha_a, c1, m_norm);
    let bw = space
        .boundary_weights
        .as_ref()
        .expect("trace assembly guarantees boundary weights");
    let boundary_measure: f64 = bw.sum();
    let alpha = SQRT2 * c0 * boundary_measure.sqrt();
    let beta = SQRT2 * c1;
    let j = SuperpositionFunctional::uniform(
        space.space_x_boundary.as_ref().unwrap(),
        bw.clone(),
        h2.clone(),
    )?;
    // Domain convex part with lumped weights on the free nodes.
    let phi = match p_choice.scalar() {
        None => ConvexFunction::zero(&space.space_v),
        Some(scalar) => {
            let weights = DVector::from_fn(space.n_free(), |i, _| {
                space.domain_weights[space.free_nodes[i]]
            });
            ConvexFunction::separable(&space.space_v, scalar, weights)?
        }
    };
    let f = assemble_load(space, &g1);
    let family = build_family(space, constraint)?;
    let mut upper = DVector::from_element(space.n_free(), f64::INFINITY);
    for (row, &g) in space.obstacle_nodes.iter().enumerate() {
        let pos = space.free_position(g).expect("obstacle nodes are free");
        upper[pos] = k2[row];
    }
    let c_set = ConstraintSet::box_set(
        &space.space_v,
        DVector::from_element(space.n_free(), f64::NEG_INFINITY),
        upper,
    )?;
    let qvhi = QVHIProblem::new(
        a,
        phi,
        j,
        trace,
        f,
        family,
        c_set,
        alpha,
        beta,
    )?;
    Ok(AssembledProblem {
        qvhi,
        space: space.clone(),
        provenance: format!(
            "boundary model: {:?} law, trace potential, |γ| = {m_norm:.6}",
            law.kind
        ),
        smallness: info,
        recipe: Recipe {
            law: law.clone(),
            potential: h2.clone(),
            convex_choice: p_choice,
            constraint: constraint.clone(),
            k2: Some(k2.clone()),
        },
    })
}
