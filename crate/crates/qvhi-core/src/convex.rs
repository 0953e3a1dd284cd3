//! Convex potentials, constraint sets with metric projections, and the
//! solution-dependent radial constraint family `K(v) = {w : r(w) ≤ m(v)}`.
//!
//! All proxes and projections are taken in the V-metric of the owning
//! [`GramSpace`]. Under a diagonal Gram matrix the separable cases are exact
//! one-pass formulas; under a general metric they run an accelerated
//! proximal-gradient loop (Euclidean steps, exact Euclidean scalar proxes)
//! whose iterates stay feasible for box-type sets.

use std::sync::Arc;

use nalgebra::DVector;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hilbert::{
    assert_same_space, euclid_gram_lmax, inner, random_in_ball, riesz, DualVector, LinearMap,
    SpaceRef, Vector,
};
use crate::{Error, Result};

/// Dykstra cycle cap for composite proxes and set intersections.
const DYKSTRA_MAX_CYCLES: usize = 500;
/// Iteration cap for the accelerated proximal-gradient inner loops.
const FISTA_MAX_ITER: usize = 100_000;
/// Iteration cap for the splitting projection onto weighted-l1 sublevels.
const ADMM_MAX_ITER: usize = 5_000;
/// Newton cap for the l2-seminorm multiplier equation.
const NEWTON_MAX_ITER: usize = 100;

/// Scalar convex building blocks with exact Euclidean proxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scalar1 {
    /// `r ↦ |r|`; prox is soft thresholding.
    Abs,
    /// `r ↦ r²/2`; prox is shrinkage `y/(1+σ)`.
    HalfSquare,
}

impl Scalar1 {
    pub fn value(self, r: f64) -> f64 {
        match self {
            Scalar1::Abs => r.abs(),
            Scalar1::HalfSquare => 0.5 * r * r,
        }
    }

    /// `argmin_z ½(z−y)² + σ·g(z)` for `σ ≥ 0`.
    pub fn prox(self, y: f64, sigma: f64) -> f64 {
        match self {
            Scalar1::Abs => {
                if y > sigma {
                    y - sigma
                } else if y < -sigma {
                    y + sigma
                } else {
                    0.0
                }
            }
            Scalar1::HalfSquare => y / (1.0 + sigma),
        }
    }
}

/// Per-node prox step used by the metric proximal-gradient loop.
enum NodeProx {
    /// Convex penalty `w_i · g(z_i)` from a [`Scalar1`].
    Penalty { kind: Scalar1, weights: DVector<f64> },
    /// Box indicator: clamp to `[lower_i, upper_i]` (entries may be infinite).
    Clamp {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
}

impl NodeProx {
    fn apply(&self, y: &mut DVector<f64>, sigma: f64) {
        match self {
            NodeProx::Penalty { kind, weights } => {
                for i in 0..y.len() {
                    if weights[i] != 0.0 {
                        y[i] = kind.prox(y[i], sigma * weights[i]);
                    }
                }
            }
            NodeProx::Clamp { lower, upper } => {
                for i in 0..y.len() {
                    y[i] = y[i].clamp(lower[i], upper[i]);
                }
            }
        }
    }
}

/// Accelerated proximal gradient for
/// `argmin_z ½‖z−x‖²_G + τ·(separable part)`, in Euclidean steps with exact
/// per-node proxes. Restarted Nesterov momentum; the returned iterate is a
/// fresh prox output, so box indicators are satisfied exactly.
fn metric_separable_prox(x: &Vector, tau: f64, node_prox: &NodeProx, eps: f64) -> Result<Vector> {
    let space = x.space();
    // Warm start: the exact solution for the diagonal part of the metric.
    let mut z = x.coords().clone();
    match node_prox {
        NodeProx::Penalty { kind, weights } => {
            for i in 0..z.len() {
                let gii = space.gram()[(i, i)];
                if weights[i] != 0.0 && gii > 0.0 {
                    z[i] = kind.prox(z[i], tau * weights[i] / gii);
                }
            }
        }
        NodeProx::Clamp { .. } => node_prox.apply(&mut z, 1.0),
    }
    if space.is_diagonal() {
        return Vector::new(space, z);
    }
    let step = 1.0 / euclid_gram_lmax(space);
    let sigma = step * tau;
    let mut y = z.clone();
    let mut t = 1.0f64;
    let target = eps * 0.5;
    for _ in 0..FISTA_MAX_ITER {
        let mut z_next = &y - (space.gram() * (&y - x.coords())) * step;
        node_prox.apply(&mut z_next, sigma);
        let dz = &z_next - &z;
        let change = (space.gram() * &dz).dot(&dz).max(0.0).sqrt();
        let dm = &z_next - &y;
        let mapping = (space.gram() * &dm).dot(&dm).max(0.0).sqrt();
        if change <= target && mapping <= target {
            return Vector::new(space, z_next);
        }
        // Adaptive restart on momentum working against the step.
        if dm.dot(&dz) < 0.0 {
            t = 1.0;
            y = z_next.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &z_next + (&z_next - &z) * ((t - 1.0) / t_next);
            t = t_next;
        }
        z = z_next;
    }
    Err(Error::ProxStalled {
        iterations: FISTA_MAX_ITER,
        residual: eps,
    })
}

type ValueOracle = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
type ProxOracle = Arc<dyn Fn(&Vector, f64, f64) -> Result<Vector> + Send + Sync>;
type ContainsOracle = Arc<dyn Fn(&Vector, f64) -> bool + Send + Sync>;
type ProjectOracle = Arc<dyn Fn(&Vector, f64) -> Result<Vector> + Send + Sync>;
type LevelOracle = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;

/// Convex, lower semicontinuous potential with value and prox oracles and an
/// optional affine minorant `(l, b)` with `value(z) ≥ ⟨l, z⟩ + b`.
/// Clones share the oracles.
#[derive(Clone)]
pub struct ConvexFunction {
    space: SpaceRef,
    value: ValueOracle,
    prox: ProxOracle,
    minorant: Option<(DualVector, f64)>,
    is_zero: bool,
}

impl ConvexFunction {
    pub fn custom(
        space: &SpaceRef,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        prox: impl Fn(&Vector, f64, f64) -> Result<Vector> + Send + Sync + 'static,
        minorant: Option<(DualVector, f64)>,
    ) -> Self {
        ConvexFunction {
            space: space.clone(),
            value: Arc::new(value),
            prox: Arc::new(prox),
            minorant,
            is_zero: false,
        }
    }

    /// The zero potential; its prox is the identity.
    pub fn zero(space: &SpaceRef) -> Self {
        ConvexFunction {
            space: space.clone(),
            value: Arc::new(|_| 0.0),
            prox: Arc::new(|x, _, _| Ok(x.clone())),
            minorant: Some((DualVector::zeros(space), 0.0)),
            is_zero: true,
        }
    }

    /// Separable potential `v ↦ Σ w_i g(v_i)` with nonnegative node weights.
    pub fn separable(space: &SpaceRef, kind: Scalar1, weights: DVector<f64>) -> Result<Self> {
        if weights.len() != space.dim() {
            return Err(Error::InvalidData(
                "separable weights length must match space dim".to_string(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidData(
                "separable weights must be finite and nonnegative".to_string(),
            ));
        }
        let w_val = weights.clone();
        let node_prox = Arc::new(NodeProx::Penalty { kind, weights });
        Ok(ConvexFunction {
            space: space.clone(),
            value: Arc::new(move |v: &Vector| {
                v.coords()
                    .iter()
                    .zip(w_val.iter())
                    .map(|(r, w)| w * kind.value(*r))
                    .sum()
            }),
            prox: Arc::new(move |x, tau, eps| metric_separable_prox(x, tau, &node_prox, eps)),
            // Both scalar kinds are nonnegative.
            minorant: Some((DualVector::zeros(space), 0.0)),
            is_zero: false,
        })
    }

    /// Weighted l1: `v ↦ Σ w_i |v_i|`.
    pub fn weighted_l1(space: &SpaceRef, weights: DVector<f64>) -> Result<Self> {
        ConvexFunction::separable(space, Scalar1::Abs, weights)
    }

    /// The V-metric quadratic `v ↦ (c/2)‖v‖²_V`; prox is exact scaling.
    pub fn scaled_sq_norm(space: &SpaceRef, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::InvalidData(
                "quadratic potential needs c >= 0".to_string(),
            ));
        }
        Ok(ConvexFunction {
            space: space.clone(),
            value: Arc::new(move |v: &Vector| 0.5 * c * inner(v, v)),
            prox: Arc::new(move |x, tau, _| Ok(x.scaled(1.0 / (1.0 + tau * c)))),
            minorant: Some((DualVector::zeros(space), 0.0)),
            is_zero: c == 0.0,
        })
    }

    pub fn value(&self, v: &Vector) -> f64 {
        assert_same_space(&self.space, v.space());
        (self.value)(v)
    }

    /// `argmin_z ½‖z−x‖²_V + τ·value(z)` to inner tolerance `eps`.
    pub fn prox(&self, x: &Vector, tau: f64, eps: f64) -> Result<Vector> {
        assert!(tau > 0.0, "prox needs tau > 0, got {tau}");
        assert_same_space(&self.space, x.space());
        (self.prox)(x, tau, eps)
    }

    pub fn minorant(&self) -> Option<(&DualVector, f64)> {
        self.minorant.as_ref().map(|(l, b)| (l, *b))
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }
}

impl std::fmt::Debug for ConvexFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexFunction")
            .field("space", &self.space.label())
            .field("is_zero", &self.is_zero)
            .field("has_minorant", &self.minorant.is_some())
            .finish()
    }
}

/// Nonempty closed convex set with membership and V-metric projection
/// oracles. Clones share the oracles.
#[derive(Clone)]
pub struct ConstraintSet {
    space: SpaceRef,
    contains: ContainsOracle,
    project: ProjectOracle,
    is_whole: bool,
}

impl ConstraintSet {
    pub fn custom(
        space: &SpaceRef,
        contains: impl Fn(&Vector, f64) -> bool + Send + Sync + 'static,
        project: impl Fn(&Vector, f64) -> Result<Vector> + Send + Sync + 'static,
    ) -> Self {
        ConstraintSet {
            space: space.clone(),
            contains: Arc::new(contains),
            project: Arc::new(project),
            is_whole: false,
        }
    }

    pub fn whole_space(space: &SpaceRef) -> Self {
        ConstraintSet {
            space: space.clone(),
            contains: Arc::new(|_, _| true),
            project: Arc::new(|x, _| Ok(x.clone())),
            is_whole: true,
        }
    }

    /// V-metric closed ball. `center = None` means the origin.
    pub fn ball(space: &SpaceRef, center: Option<Vector>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidData(format!(
                "ball radius must be nonnegative, got {radius}"
            )));
        }
        if let Some(c) = &center {
            assert_same_space(space, c.space());
        }
        let c1 = center.clone();
        let c2 = center;
        Ok(ConstraintSet {
            space: space.clone(),
            contains: Arc::new(move |v, tol| {
                let d = match &c1 {
                    Some(c) => (v - c).norm(),
                    None => v.norm(),
                };
                d <= radius + tol
            }),
            project: Arc::new(move |v, _| {
                let d = match &c2 {
                    Some(c) => v - c,
                    None => v.clone(),
                };
                let n = d.norm();
                if n <= radius {
                    return Ok(v.clone());
                }
                let scaled = d.scaled(radius / n);
                Ok(match &c2 {
                    Some(c) => c + &scaled,
                    None => scaled,
                })
            }),
            is_whole: false,
        })
    }

    /// Componentwise box; bounds may contain infinities. The projection is an
    /// exact clamp under a diagonal metric and a feasible-iterate
    /// proximal-gradient solve otherwise.
    pub fn box_set(space: &SpaceRef, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != space.dim() || upper.len() != space.dim() {
            return Err(Error::InvalidData(
                "box bounds must match space dim".to_string(),
            ));
        }
        for i in 0..lower.len() {
            if lower[i].is_nan() || upper[i].is_nan() {
                return Err(Error::NonFinite {
                    context: "box bounds".to_string(),
                });
            }
            if lower[i] > upper[i] {
                return Err(Error::EmptyBox { index: i });
            }
        }
        let l1 = lower.clone();
        let u1 = upper.clone();
        let node_prox = Arc::new(NodeProx::Clamp { lower, upper });
        Ok(ConstraintSet {
            space: space.clone(),
            contains: Arc::new(move |v, tol| {
                v.coords()
                    .iter()
                    .zip(l1.iter().zip(u1.iter()))
                    .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
            }),
            project: Arc::new(move |v, eps| metric_separable_prox(v, 1.0, &node_prox, eps)),
            is_whole: false,
        })
    }

    /// Halfspace `{z : ⟨a, z⟩ ≤ b}` with exact metric projection.
    pub fn halfspace(space: &SpaceRef, a: DualVector, b: f64) -> Result<Self> {
        assert_same_space(space, a.space());
        let ra = riesz(&a);
        let denom = a.pair(&ra);
        if denom <= 0.0 {
            return Err(Error::InvalidData(
                "halfspace normal must be nonzero".to_string(),
            ));
        }
        let a1 = a.clone();
        let scale = 1.0 + denom.sqrt();
        Ok(ConstraintSet {
            space: space.clone(),
            contains: Arc::new(move |v, tol| a1.pair(v) <= b + tol * scale),
            project: Arc::new(move |v, _| {
                let s = a.pair(v) - b;
                if s <= 0.0 {
                    Ok(v.clone())
                } else {
                    Ok(v.axpy(-s / denom, &ra))
                }
            }),
            is_whole: false,
        })
    }

    /// Intersection projected by cyclic Dykstra. The last member is projected
    /// last in every cycle, so sets with exactly feasible projections (boxes,
    /// balls) should go last when exact feasibility matters downstream.
    pub fn intersection(space: &SpaceRef, sets: Vec<ConstraintSet>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidData(
                "intersection needs at least one set".to_string(),
            ));
        }
        for s in &sets {
            assert_same_space(space, &s.space);
        }
        let members: Vec<ConstraintSet> = sets.into_iter().filter(|s| !s.is_whole).collect();
        if members.is_empty() {
            return Ok(ConstraintSet::whole_space(space));
        }
        if members.len() == 1 {
            return Ok(members.into_iter().next().unwrap());
        }
        let members = Arc::new(members);
        let m1 = members.clone();
        Ok(ConstraintSet {
            space: space.clone(),
            contains: Arc::new(move |v, tol| m1.iter().all(|s| s.contains(v, tol))),
            project: Arc::new(move |v, eps| {
                let eps_sub = eps * 0.25;
                let mut y = v.clone();
                let mut corrections = vec![Vector::zeros(v.space()); members.len()];
                let mut residual = f64::INFINITY;
                for _ in 0..DYKSTRA_MAX_CYCLES {
                    let y_start = y.clone();
                    for (set, p) in members.iter().zip(corrections.iter_mut()) {
                        let w = &y + p;
                        let y_new = set.project(&w, eps_sub)?;
                        *p = &w - &y_new;
                        y = y_new;
                    }
                    let change = (&y - &y_start).norm();
                    let feasible = members.iter().all(|s| s.contains(&y, eps));
                    residual = change;
                    if change <= eps * 0.5 * (1.0 + y.norm()) && feasible {
                        return Ok(y);
                    }
                }
                Err(Error::ProjectionStalled {
                    iterations: DYKSTRA_MAX_CYCLES,
                    residual,
                })
            }),
            is_whole: false,
        })
    }

    pub fn contains(&self, v: &Vector, tol: f64) -> bool {
        assert_same_space(&self.space, v.space());
        (self.contains)(v, tol)
    }

    /// V-metric projection to inner tolerance `eps`. Idempotent within `2eps`.
    pub fn project(&self, v: &Vector, eps: f64) -> Result<Vector> {
        assert_same_space(&self.space, v.space());
        (self.project)(v, eps)
    }

    pub fn is_whole(&self) -> bool {
        self.is_whole
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }
}

impl std::fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstraintSet")
            .field("space", &self.space.label())
            .field("is_whole", &self.is_whole)
            .finish()
    }
}

/// Euclidean projection onto the weighted l1 ball `{y : Σ w_i |y_i| ≤ c}`
/// by the sort-based threshold search. Weights must be positive.
pub fn project_weighted_l1_ball(v: &DVector<f64>, weights: &DVector<f64>, c: f64) -> DVector<f64> {
    assert_eq!(v.len(), weights.len());
    assert!(c >= 0.0);
    let total: f64 = v
        .iter()
        .zip(weights.iter())
        .map(|(x, w)| w * x.abs())
        .sum();
    if total <= c {
        return v.clone();
    }
    // Ratios |v_i|/w_i are the breakpoints of the piecewise-linear
    // threshold equation sum_i w_i max(|v_i| - t w_i, 0) = c.
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = v[i].abs() / weights[i];
        let rj = v[j].abs() / weights[j];
        rj.partial_cmp(&ri).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut s1 = 0.0; // sum of w_i |v_i| over the active set
    let mut s2 = 0.0; // sum of w_i^2 over the active set
    let mut t = 0.0;
    for (k, &i) in order.iter().enumerate() {
        s1 += weights[i] * v[i].abs();
        s2 += weights[i] * weights[i];
        let cand = (s1 - c) / s2;
        let next_ratio = if k + 1 < order.len() {
            let j = order[k + 1];
            v[j].abs() / weights[j]
        } else {
            0.0
        };
        if cand >= next_ratio - 1e-15 {
            t = cand.max(0.0);
            break;
        }
    }
    DVector::from_fn(v.len(), |i, _| {
        let mag = (v[i].abs() - t * weights[i]).max(0.0);
        mag * v[i].signum()
    })
}

/// How the radial functional `r` is realized; drives the projection
/// algorithm for its sublevel sets.
#[derive(Clone)]
pub enum RadialKind {
    /// `r ≡ 0`: every sublevel set is the whole space.
    Free,
    /// `r(w) = ‖w‖_V`: exact radial scaling.
    AmbientNorm,
    /// `r(w) = sqrt(Σ ω_k (Dw)_k²)`: scalar Newton on the dual multiplier,
    /// one linear solve per step.
    SeminormL2 {
        map: Arc<LinearMap>,
        weights: DVector<f64>,
    },
    /// `r(w) = Σ_g ϱ_g ‖(Dw)_g‖₂` over consecutive groups of `group_size`
    /// rows (size 1 is a plain weighted l1): splitting iteration with dual
    /// updates, ball step by weighted group soft thresholding.
    WeightedL1 {
        map: Arc<LinearMap>,
        group_size: usize,
        weights: DVector<f64>,
    },
}

impl std::fmt::Debug for RadialKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RadialKind::Free => write!(f, "Free"),
            RadialKind::AmbientNorm => write!(f, "AmbientNorm"),
            RadialKind::SeminormL2 { .. } => write!(f, "SeminormL2"),
            RadialKind::WeightedL1 { group_size, .. } => {
                write!(f, "WeightedL1(group_size={group_size})")
            }
        }
    }
}

/// Solution-dependent constraint family `K(v) = {w : r(w) ≤ m(v)}` with `r`
/// positively homogeneous, subadditive and nonnegative, and
/// `m(v) ≥ ρ > 0`, `r(0) ≤ ρ`. Homogeneity, subadditivity and the level
/// bound are witnessed on samples at construction. Clones share the oracle.
#[derive(Clone)]
pub struct RadialConstraintFamily {
    space: SpaceRef,
    kind: RadialKind,
    level: LevelOracle,
    rho: f64,
}

impl RadialConstraintFamily {
    pub fn new(
        space: &SpaceRef,
        kind: RadialKind,
        level: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        rho: f64,
    ) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidData(format!(
                "rho = inf m must be positive, got {rho}"
            )));
        }
        match &kind {
            RadialKind::SeminormL2 { map, weights } => {
                assert_same_space(space, map.domain());
                if weights.len() != map.codomain().dim()
                    || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
                {
                    return Err(Error::InvalidData(
                        "seminorm weights must be nonnegative, one per map row".to_string(),
                    ));
                }
            }
            RadialKind::WeightedL1 {
                map,
                group_size,
                weights,
            } => {
                assert_same_space(space, map.domain());
                let rows = map.codomain().dim();
                if *group_size == 0 || rows % group_size != 0 {
                    return Err(Error::InvalidData(
                        "group size must divide the map row count".to_string(),
                    ));
                }
                if weights.len() != rows / group_size
                    || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
                {
                    return Err(Error::InvalidData(
                        "weighted-l1 weights must be nonnegative, one per group".to_string(),
                    ));
                }
            }
            RadialKind::Free | RadialKind::AmbientNorm => {}
        }
        let family = RadialConstraintFamily {
            space: space.clone(),
            kind,
            level: Arc::new(level),
            rho,
        };
        let r0 = family.r(&Vector::zeros(space));
        if r0 > rho + 1e-12 {
            return Err(Error::DegenerateConstraint {
                level: rho,
                r_zero: r0,
            });
        }
        family.sample_audit()?;
        Ok(family)
    }

    /// Whole-space family: `r ≡ 0`, `m ≡ 1`.
    pub fn unconstrained(space: &SpaceRef) -> Self {
        RadialConstraintFamily::new(space, RadialKind::Free, |_| 1.0, 1.0)
            .expect("free family is always valid")
    }

    fn sample_audit(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
        for _ in 0..16 {
            let u = random_in_ball(&self.space, 2.0, &mut rng);
            let v = random_in_ball(&self.space, 2.0, &mut rng);
            let ru = self.r(&u);
            let rv = self.r(&v);
            for lambda in [0.5, 2.0, 3.7] {
                let r_scaled = self.r(&u.scaled(lambda));
                if (r_scaled - lambda * ru).abs() > 1e-10 * (1.0 + lambda * ru.abs()) {
                    return Err(Error::HypothesisViolated {
                        clause: "r positively homogeneous".to_string(),
                        witness: format!(
                            "r({lambda}·u) = {r_scaled}, {lambda}·r(u) = {}",
                            lambda * ru
                        ),
                    });
                }
            }
            let r_sum = self.r(&(&u + &v));
            if r_sum > ru + rv + 1e-10 * (1.0 + ru + rv) {
                return Err(Error::HypothesisViolated {
                    clause: "r subadditive".to_string(),
                    witness: format!("r(u+v) = {r_sum} > r(u)+r(v) = {}", ru + rv),
                });
            }
            let mv = self.m(&v);
            if mv < self.rho - 1e-12 * (1.0 + self.rho) {
                return Err(Error::HypothesisViolated {
                    clause: "m(v) >= rho".to_string(),
                    witness: format!("m(v) = {mv} < rho = {}", self.rho),
                });
            }
        }
        Ok(())
    }

    /// The radial functional.
    pub fn r(&self, w: &Vector) -> f64 {
        assert_same_space(&self.space, w.space());
        match &self.kind {
            RadialKind::Free => 0.0,
            RadialKind::AmbientNorm => w.norm(),
            RadialKind::SeminormL2 { map, weights } => {
                weighted_seminorm(map.apply(w).coords(), weights)
            }
            RadialKind::WeightedL1 {
                map,
                group_size,
                weights,
            } => {
                let dw = map.apply(w);
                let gs = *group_size;
                (0..weights.len())
                    .map(|g| {
                        let sq: f64 = (0..gs).map(|k| dw.coords()[g * gs + k].powi(2)).sum();
                        weights[g] * sq.sqrt()
                    })
                    .sum()
            }
        }
    }

    /// The constraint level `m(v)`.
    pub fn m(&self, v: &Vector) -> f64 {
        assert_same_space(&self.space, v.space());
        (self.level)(v)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn kind(&self) -> &RadialKind {
        &self.kind
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    /// The sublevel set `{w : r(w) ≤ m(v)}` with a projection oracle chosen
    /// by the kind of `r`.
    pub fn constraint_set_at(&self, v: &Vector) -> Result<ConstraintSet> {
        let level = self.m(v);
        let r0 = self.r(&Vector::zeros(&self.space));
        if level < r0 - 1e-12 {
            return Err(Error::DegenerateConstraint { level, r_zero: r0 });
        }
        match &self.kind {
            RadialKind::Free => Ok(ConstraintSet::whole_space(&self.space)),
            RadialKind::AmbientNorm => ConstraintSet::ball(&self.space, None, level),
            RadialKind::SeminormL2 { map, weights } => Ok(seminorm_sublevel_set(
                &self.space,
                map.clone(),
                weights.clone(),
                level,
            )),
            RadialKind::WeightedL1 {
                map,
                group_size,
                weights,
            } => Ok(weighted_l1_sublevel_set(
                &self.space,
                map.clone(),
                *group_size,
                weights.clone(),
                level,
            )),
        }
    }
}

impl std::fmt::Debug for RadialConstraintFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialConstraintFamily")
            .field("space", &self.space.label())
            .field("kind", &self.kind)
            .field("rho", &self.rho)
            .finish()
    }
}

fn weighted_seminorm(dw: &DVector<f64>, weights: &DVector<f64>) -> f64 {
    dw.iter()
        .zip(weights.iter())
        .map(|(x, om)| om * x * x)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// `{w : ‖Dw‖_ω ≤ c}` projected by safeguarded Newton on the KKT multiplier:
/// `z(μ) = (G + μ DᵀWD)⁻¹ G x`, one factorization and two solves per step.
fn seminorm_sublevel_set(
    space: &SpaceRef,
    map: Arc<LinearMap>,
    weights: DVector<f64>,
    c: f64,
) -> ConstraintSet {
    let m1 = map.clone();
    let w1 = weights.clone();
    let space_c = space.clone();
    ConstraintSet::custom(
        space,
        move |v, tol| weighted_seminorm(m1.apply(v).coords(), &w1) <= c + tol * (1.0 + c),
        move |x, eps| {
            let dx = map.apply(x);
            if weighted_seminorm(dx.coords(), &weights) <= c {
                return Ok(x.clone());
            }
            let dmat = map.matrix();
            // H = Dᵀ W D
            let mut wd = dmat.clone();
            for (k, mut row) in wd.row_iter_mut().enumerate() {
                row *= weights[k];
            }
            let h = dmat.tr_mul(&wd);
            let gx = space_c.gram() * x.coords();
            type Chol = nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>;
            let r_of = |mu: f64| -> Option<(f64, DVector<f64>, Chol)> {
                let sys = space_c.gram() + &h * mu;
                let chol = Chol::new(sys)?;
                let z = chol.solve(&gx);
                let dz = dmat * &z;
                Some((weighted_seminorm(&dz, &weights), z, chol))
            };
            let tol = eps * (1.0 + c);
            // Bracket the multiplier.
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            let mut guard = 0;
            loop {
                match r_of(hi) {
                    Some((r, _, _)) if r <= c => break,
                    Some(_) => {
                        lo = hi;
                        hi *= 4.0;
                    }
                    None => {
                        return Err(Error::NotSpd {
                            label: space_c.label().to_string(),
                        })
                    }
                }
                guard += 1;
                if guard > 200 {
                    return Err(Error::ProjectionStalled {
                        iterations: guard,
                        residual: f64::INFINITY,
                    });
                }
            }
            let mut mu = 0.5 * (lo + hi);
            let mut last_residual = f64::INFINITY;
            for _ in 0..NEWTON_MAX_ITER {
                let (r, z, chol) = r_of(mu).ok_or_else(|| Error::NotSpd {
                    label: space_c.label().to_string(),
                })?;
                last_residual = (r - c).abs();
                if last_residual <= tol {
                    return Vector::new(&space_c, z);
                }
                if r > c {
                    lo = mu;
                } else {
                    hi = mu;
                }
                // psi'(mu) = (Dz)ᵀ W D z'(mu) / r with z' = -(G+muH)⁻¹ H z.
                let zp = -chol.solve(&(&h * &z));
                let dz = dmat * &z;
                let dzp = dmat * &zp;
                let dpsi = dz
                    .iter()
                    .zip(dzp.iter())
                    .zip(weights.iter())
                    .map(|((a, b), om)| om * a * b)
                    .sum::<f64>()
                    / r.max(1e-300);
                let newton = mu - (r - c) / dpsi;
                mu = if dpsi < 0.0 && newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
            }
            Err(Error::ProjectionStalled {
                iterations: NEWTON_MAX_ITER,
                residual: last_residual,
            })
        },
    )
}

/// `{w : Σ_g ϱ_g ‖(Dw)_g‖ ≤ c}` projected by an alternating splitting with
/// dual updates; the ball step is weighted group soft thresholding.
fn weighted_l1_sublevel_set(
    space: &SpaceRef,
    map: Arc<LinearMap>,
    group_size: usize,
    weights: DVector<f64>,
    c: f64,
) -> ConstraintSet {
    let group_r = {
        let weights = weights.clone();
        move |dw: &DVector<f64>| -> f64 {
            (0..weights.len())
                .map(|g| {
                    let sq: f64 = (0..group_size)
                        .map(|k| dw[g * group_size + k].powi(2))
                        .sum();
                    weights[g] * sq.sqrt()
                })
                .sum()
        }
    };
    let r1 = {
        let map = map.clone();
        let group_r = group_r.clone();
        move |v: &Vector| group_r(map.apply(v).coords())
    };
    let r2 = r1.clone();
    let space_c = space.clone();
    let weights_c = weights.clone();
    ConstraintSet::custom(
        space,
        move |v, tol| r1(v) <= c + tol * (1.0 + c),
        move |x, eps| {
            if r2(x) <= c {
                return Ok(x.clone());
            }
            let dmat = map.matrix();
            let nd = dmat.nrows();
            let dtd = dmat.tr_mul(dmat);
            let trace_g: f64 = (0..space_c.dim()).map(|i| space_c.gram()[(i, i)]).sum();
            let trace_d: f64 = (0..dtd.nrows()).map(|i| dtd[(i, i)]).sum();
            let sigma = (trace_g / trace_d.max(1e-12)).max(1e-8);
            let sys = space_c.gram() + &dtd * sigma;
            let chol = nalgebra::linalg::Cholesky::new(sys).ok_or_else(|| Error::NotSpd {
                label: space_c.label().to_string(),
            })?;
            let gx = space_c.gram() * x.coords();
            let project_ball = |v: &DVector<f64>| -> DVector<f64> {
                let active: Vec<usize> =
                    (0..weights_c.len()).filter(|g| weights_c[*g] > 0.0).collect();
                let norms = DVector::from_fn(active.len(), |gi, _| {
                    let g = active[gi];
                    (0..group_size)
                        .map(|k| v[g * group_size + k].powi(2))
                        .sum::<f64>()
                        .sqrt()
                });
                let w_act = DVector::from_fn(active.len(), |gi, _| weights_c[active[gi]]);
                let shrunk = project_weighted_l1_ball(&norms, &w_act, c);
                let mut out = v.clone();
                for (gi, &g) in active.iter().enumerate() {
                    let scale = if norms[gi] > 0.0 {
                        shrunk[gi] / norms[gi]
                    } else {
                        0.0
                    };
                    for k in 0..group_size {
                        out[g * group_size + k] *= scale;
                    }
                }
                out
            };
            let mut y = project_ball(&(dmat * x.coords()));
            let mut lambda = DVector::zeros(nd);
            let mut residual = f64::INFINITY;
            for _ in 0..ADMM_MAX_ITER {
                let rhs = &gx + dmat.tr_mul(&(&y - &lambda)) * sigma;
                let z = chol.solve(&rhs);
                let dz = dmat * &z;
                let y_prev = y.clone();
                y = project_ball(&(&dz + &lambda));
                lambda += &dz - &y;
                let primal = (&dz - &y).norm();
                let dual = sigma * (dmat.tr_mul(&(&y - &y_prev))).norm();
                let feas_gap = (group_r(&dz) - c).max(0.0);
                residual = primal.max(dual).max(feas_gap);
                if primal <= eps * (1.0 + dz.norm())
                    && dual <= eps * (1.0 + gx.norm())
                    && feas_gap <= eps * (1.0 + c)
                {
                    return Vector::new(&space_c, z);
                }
            }
            Err(Error::ProjectionStalled {
                iterations: ADMM_MAX_ITER,
                residual,
            })
        },
    )
}

/// Approximate `argmin_{z ∈ E} ½‖z−x‖²_V + τ φ(z)` by Dykstra-style
/// alternation between the prox of `φ` and the projection onto `E`, with
/// exact single-pass shortcuts when either part is trivial. The returned
/// point is the projection-sequence iterate, so it inherits the feasibility
/// guarantees of `E.project`.
pub fn composite_prox(
    phi: &ConvexFunction,
    e: &ConstraintSet,
    x: &Vector,
    tau: f64,
    eps_inner: f64,
) -> Result<Vector> {
    assert!(tau > 0.0, "composite_prox needs tau > 0, got {tau}");
    assert_same_space(phi.space(), x.space());
    assert_same_space(e.space(), x.space());
    if phi.is_zero() && e.is_whole() {
        return Ok(x.clone());
    }
    if phi.is_zero() {
        return e.project(x, eps_inner);
    }
    if e.is_whole() {
        return phi.prox(x, tau, eps_inner);
    }
    let eps_sub = eps_inner * 0.1;
    let mut y = x.clone();
    let mut p = Vector::zeros(x.space());
    let mut q = Vector::zeros(x.space());
    let mut residual = f64::INFINITY;
    for _ in 0..DYKSTRA_MAX_CYCLES {
        let zp = &y + &p;
        let z = phi.prox(&zp, tau, eps_sub)?;
        p = &zp - &z;
        let w = &z + &q;
        let y_new = e.project(&w, eps_sub)?;
        q = &w - &y_new;
        let gap = (&z - &y_new).norm();
        let change = (&y_new - &y).norm();
        y = y_new;
        residual = gap.max(change);
        if residual <= eps_inner * (1.0 + y.norm()) {
            return Ok(y);
        }
    }
    Err(Error::ProxStalled {
        iterations: DYKSTRA_MAX_CYCLES,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::GramSpace;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;

    #[test]
    fn box_projection_identity_and_diagonal() {
        let s = GramSpace::euclidean(2, "V");
        let e = ConstraintSet::box_set(
            &s,
            DVector::from_element(2, f64::NEG_INFINITY),
            DVector::from_element(2, 1.0),
        )
        .unwrap();
        let x = Vector::from_slice(&s, &[3.0, 0.0]).unwrap();
        let p = e.project(&x, 1e-12).unwrap();
        assert_eq!(p.coords().as_slice(), &[1.0, 0.0]);

        let s = GramSpace::diagonal(DVector::from_column_slice(&[2.0, 1.0]), "V").unwrap();
        let e = ConstraintSet::box_set(
            &s,
            DVector::from_element(2, f64::NEG_INFINITY),
            DVector::from_element(2, 1.0),
        )
        .unwrap();
        let x = Vector::from_slice(&s, &[3.0, 0.0]).unwrap();
        let p = e.project(&x, 1e-12).unwrap();
        assert_eq!(p.coords().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn box_projection_nondiagonal_metric() {
        // KKT of the metric projection: at (1,1) the multiplier is positive.
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = GramSpace::new(g, "V").unwrap();
        let e = ConstraintSet::box_set(
            &s,
            DVector::from_element(2, f64::NEG_INFINITY),
            DVector::from_element(2, 1.0),
        )
        .unwrap();
        let x = Vector::from_slice(&s, &[3.0, 3.0]).unwrap();
        let p = e.project(&x, 1e-10).unwrap();
        assert_relative_eq!(p.coords()[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(p.coords()[1], 1.0, epsilon = 1e-9);
        // Feasibility is exact by construction of the clamp iterates.
        assert!(p.coords()[0] <= 1.0 && p.coords()[1] <= 1.0);
    }

    #[test]
    fn empty_box_rejected() {
        let s = GramSpace::euclidean(2, "V");
        let r = ConstraintSet::box_set(
            &s,
            DVector::from_column_slice(&[0.0, 2.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
        );
        assert!(matches!(r, Err(Error::EmptyBox { index: 1 })));
    }

    #[test]
    fn soft_threshold_prox() {
        let s = GramSpace::euclidean(1, "V");
        let phi = ConvexFunction::weighted_l1(&s, DVector::from_element(1, 1.0)).unwrap();
        let x = Vector::from_slice(&s, &[3.0]).unwrap();
        let z = phi.prox(&x, 1.0, 1e-12).unwrap();
        assert_relative_eq!(z.coords()[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn composite_prox_box_and_l1() {
        // phi = |z|, E = [0, 0.5], x = 3, tau = 1: minimizer is the boundary 0.5.
        let s = GramSpace::euclidean(1, "V");
        let phi = ConvexFunction::weighted_l1(&s, DVector::from_element(1, 1.0)).unwrap();
        let e = ConstraintSet::box_set(
            &s,
            DVector::from_column_slice(&[0.0]),
            DVector::from_column_slice(&[0.5]),
        )
        .unwrap();
        let x = Vector::from_slice(&s, &[3.0]).unwrap();
        let z = composite_prox(&phi, &e, &x, 1.0, 1e-10).unwrap();
        assert_relative_eq!(z.coords()[0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn composite_prox_shortcuts() {
        let s = GramSpace::euclidean(2, "V");
        let phi = ConvexFunction::zero(&s);
        let e = ConstraintSet::box_set(
            &s,
            DVector::from_column_slice(&[0.0, 0.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
        )
        .unwrap();
        let x = Vector::from_slice(&s, &[2.0, -1.0]).unwrap();
        let z = composite_prox(&phi, &e, &x, 0.7, 1e-12).unwrap();
        assert_eq!(z.coords().as_slice(), &[1.0, 0.0]);

        let whole = ConstraintSet::whole_space(&s);
        let z = composite_prox(&phi, &whole, &x, 0.7, 1e-12).unwrap();
        assert_eq!(z.coords().as_slice(), x.coords().as_slice());
    }

    #[test]
    fn ball_projection_and_interior() {
        let s = GramSpace::euclidean(2, "V");
        let fam = RadialConstraintFamily::new(&s, RadialKind::AmbientNorm, |_| 1.0, 1.0).unwrap();
        let v = Vector::zeros(&s);
        let set = fam.constraint_set_at(&v).unwrap();
        let w = Vector::from_slice(&s, &[2.0, 0.0]).unwrap();
        let p = set.project(&w, 1e-12).unwrap();
        assert_relative_eq!(p.coords()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.coords()[1], 0.0, epsilon = 1e-12);

        let w = Vector::from_slice(&s, &[0.3, 0.4]).unwrap();
        let p = set.project(&w, 1e-12).unwrap();
        assert_eq!(p.coords().as_slice(), w.coords().as_slice());
    }

    #[test]
    fn weighted_l1_sublevel_projection_matches_sorting_oracle() {
        // r(w) = |w1| + |w2| with the identity map; projecting (2, 0) onto
        // the unit sublevel must give (1, 0).
        let s = GramSpace::euclidean(2, "V");
        let id = Arc::new(LinearMap::identity(&s));
        let fam = RadialConstraintFamily::new(
            &s,
            RadialKind::WeightedL1 {
                map: id,
                group_size: 1,
                weights: DVector::from_element(2, 1.0),
            },
            |_| 1.0,
            1.0,
        )
        .unwrap();
        let set = fam.constraint_set_at(&Vector::zeros(&s)).unwrap();
        let w = Vector::from_slice(&s, &[2.0, 0.0]).unwrap();
        let p = set.project(&w, 1e-9).unwrap();
        assert_relative_eq!(p.coords()[0], 1.0, epsilon = 1e-6);
        assert!(p.coords()[1].abs() <= 1e-6);
        assert!(fam.r(&p) <= 1.0 + 1e-8);

        // Against the exact sort-based projection on random points (identity
        // map and metric makes the sublevel projection a plain l1-ball one).
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let weights = DVector::from_column_slice(&[1.0, 2.0]);
        let fam = RadialConstraintFamily::new(
            &s,
            RadialKind::WeightedL1 {
                map: Arc::new(LinearMap::identity(&s)),
                group_size: 1,
                weights: weights.clone(),
            },
            |_| 1.5,
            1.5,
        )
        .unwrap();
        let set = fam.constraint_set_at(&Vector::zeros(&s)).unwrap();
        for _ in 0..20 {
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
            let direct = project_weighted_l1_ball(&x, &weights, 1.5);
            let via_set = set.project(&Vector::new(&s, x).unwrap(), 1e-10).unwrap();
            assert!((via_set.coords() - &direct).norm() <= 1e-6);
        }
    }

    #[test]
    fn seminorm_l2_projection_newton() {
        // r(w) = |w_1| realized as a 1-row seminorm: projecting (2, 5) onto
        // {|w_1| <= 1} under the identity metric moves only the first
        // coordinate.
        let s = GramSpace::euclidean(2, "V");
        let row = LinearMap::new(
            &s,
            &GramSpace::euclidean(1, "D"),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let fam = RadialConstraintFamily::new(
            &s,
            RadialKind::SeminormL2 {
                map: Arc::new(row),
                weights: DVector::from_element(1, 1.0),
            },
            |_| 1.0,
            1.0,
        )
        .unwrap();
        let set = fam.constraint_set_at(&Vector::zeros(&s)).unwrap();
        let p = set
            .project(&Vector::from_slice(&s, &[2.0, 5.0]).unwrap(), 1e-10)
            .unwrap();
        assert_relative_eq!(p.coords()[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(p.coords()[1], 5.0, epsilon = 1e-8);
    }

    #[test]
    fn projection_characterization_sampled() {
        // <x - z*, z - z*> <= eps(1 + |z - z*|) for z in E.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let gram = &b * b.transpose() + DMatrix::identity(3, 3);
        let s = GramSpace::new(gram, "V").unwrap();
        let e = ConstraintSet::box_set(
            &s,
            DVector::from_element(3, -0.5),
            DVector::from_element(3, 0.5),
        )
        .unwrap();
        let eps = 1e-9;
        for _ in 0..20 {
            let x = Vector::new(&s, DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let z_star = e.project(&x, eps).unwrap();
            for _ in 0..20 {
                let z =
                    Vector::new(&s, DVector::from_fn(3, |_, _| rng.gen_range(-0.5..0.5))).unwrap();
                let lhs = inner(&(&x - &z_star), &(&z - &z_star));
                assert!(
                    lhs <= 1e-6 * (1.0 + (&z - &z_star).norm()),
                    "characterization violated: {lhs}"
                );
            }
        }
    }

    #[test]
    fn prox_firmly_nonexpansive_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let gram = &b * b.transpose() + DMatrix::identity(3, 3);
        let s = GramSpace::new(gram, "V").unwrap();
        let phi =
            ConvexFunction::separable(&s, Scalar1::Abs, DVector::from_element(3, 0.7)).unwrap();
        let eps = 1e-10;
        for _ in 0..20 {
            let x1 = Vector::new(&s, DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let x2 = Vector::new(&s, DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let p1 = phi.prox(&x1, 0.5, eps).unwrap();
            let p2 = phi.prox(&x2, 0.5, eps).unwrap();
            assert!((&p1 - &p2).norm() <= (&x1 - &x2).norm() + 2.0 * 1e-7);
        }
    }

    #[test]
    fn prox_optimality_sampled() {
        // value(z*) + |z*-x|^2/(2 tau) <= value(z) + |z-x|^2/(2 tau) + slack.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let gram = &b * b.transpose() + DMatrix::identity(3, 3);
        let s = GramSpace::new(gram, "V").unwrap();
        let phi =
            ConvexFunction::separable(&s, Scalar1::Abs, DVector::from_element(3, 1.0)).unwrap();
        let tau = 0.8;
        for _ in 0..10 {
            let x = Vector::new(&s, DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let z_star = phi.prox(&x, tau, 1e-10).unwrap();
            let f_star = phi.value(&z_star) + inner(&(&z_star - &x), &(&z_star - &x)) / (2.0 * tau);
            for _ in 0..30 {
                let z =
                    Vector::new(&s, DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
                let f = phi.value(&z) + inner(&(&z - &x), &(&z - &x)) / (2.0 * tau);
                assert!(f_star <= f + 1e-6, "prox suboptimal: {f_star} > {f}");
            }
        }
    }

    #[test]
    fn radial_family_level_scaling_is_radial() {
        // Scaling m by c scales the ambient-norm projection radially.
        let s = GramSpace::euclidean(2, "V");
        let w = Vector::from_slice(&s, &[3.0, 4.0]).unwrap();
        for c in [0.5, 1.0, 2.0] {
            let fam =
                RadialConstraintFamily::new(&s, RadialKind::AmbientNorm, move |_| c, c).unwrap();
            let p = fam
                .constraint_set_at(&Vector::zeros(&s))
                .unwrap()
                .project(&w, 1e-12)
                .unwrap();
            assert_relative_eq!(p.norm(), c, epsilon = 1e-12);
            assert_relative_eq!(p.coords()[0] / p.coords()[1], 0.75, epsilon = 1e-12);
        }
    }

    #[test]
    fn nonpositive_rho_rejected() {
        let s = GramSpace::euclidean(2, "V");
        let bad = RadialConstraintFamily::new(&s, RadialKind::AmbientNorm, |_| 0.5, 0.0);
        assert!(bad.is_err());
    }

    #[test]
    fn intersection_dykstra_ball_and_box() {
        let s = GramSpace::euclidean(2, "V");
        let ball = ConstraintSet::ball(&s, None, 1.0).unwrap();
        let boxc = ConstraintSet::box_set(
            &s,
            DVector::from_column_slice(&[0.25, f64::NEG_INFINITY]),
            DVector::from_element(2, f64::INFINITY),
        )
        .unwrap();
        let inter = ConstraintSet::intersection(&s, vec![ball, boxc]).unwrap();
        let x = Vector::from_slice(&s, &[-2.0, 0.3]).unwrap();
        let p = inter.project(&x, 1e-10).unwrap();
        assert!(p.coords()[0] >= 0.25 - 1e-9);
        assert!(p.norm() <= 1.0 + 1e-8);
        let q = inter.project(&p, 1e-10).unwrap();
        assert!((&q - &p).norm() <= 2e-9, "projection not idempotent");
    }

    #[test]
    fn weighted_l1_ball_projection_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let n = rng.gen_range(1..7);
            let v = DVector::from_fn(n, |_, _| rng.gen_range(-4.0..4.0));
            let w = DVector::from_fn(n, |_, _| rng.gen_range(0.2..3.0));
            let c = rng.gen_range(0.1..4.0);
            let fast = project_weighted_l1_ball(&v, &w, c);
            // Independent slow route: bisection on the threshold equation.
            let phi = |t: f64| -> f64 {
                v.iter()
                    .zip(w.iter())
                    .map(|(x, wi)| wi * (x.abs() - t * wi).max(0.0))
                    .sum()
            };
            let expected = if phi(0.0) <= c {
                v.clone()
            } else {
                let (mut lo, mut hi) = (0.0, v.amax() / w.min() + 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if phi(mid) > c {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                DVector::from_fn(n, |i, _| (v[i].abs() - t * w[i]).max(0.0) * v[i].signum())
            };
            assert!(
                (&fast - &expected).norm() <= 1e-8 * (1.0 + expected.norm()),
                "sort-based and bisection projections disagree"
            );
        }
    }
}
