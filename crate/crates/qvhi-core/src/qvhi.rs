//! Outer machinery for the quasi-variational-hemivariational inequality:
//! find `u ∈ C` with `u ∈ K(u)` and
//!
//! ```text
//! ⟨Au − f, z − u⟩ + φ(z) − φ(u) + j⁰(Mu; Mz − Mu) ≥ 0   for all z ∈ K(u).
//! ```
//!
//! The problem is attacked through its multiplier form: find `u` and
//! `w ∈ ∂j(Mu)` with `⟨Au − f + M*w, z − u⟩ + φ(z) − φ(u) ≥ 0` on `K(u)`.
//! The solver iterates the composed map `(v, w) ↦ (p(v, w), F(M p(v, w)))`
//! where `p` solves the auxiliary VI with `g = f − M*w` on `E = K(v) ∩ C`
//! and `F` is the truncated subgradient map. The iterate stays in the a
//! priori box `D = {‖v‖ ≤ R₁, ‖w‖_X ≤ R}`. The underlying existence
//! argument is a topological fixed-point theorem, not a contraction, so the
//! damped Picard iteration used here may fail to settle; failures restart
//! from fresh points in `D` and are ultimately reported honestly through
//! `converged = false`.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clarke::{
    truncated_subgradient, SubgradientSelection, SuperpositionFunctional, TruncationData,
};
use crate::convex::{ConstraintSet, ConvexFunction, RadialConstraintFamily};
use crate::hilbert::{
    assert_same_space, random_in_ball, riesz, DualVector, LinearMap, NonlinearOperator, SpaceRef,
    Vector,
};
use crate::vi::{solve_vi, vi_residual, VIInstance, VISolution, VISolverConfig};
use crate::{Error, Result};

/// Full problem data with the growth constants `(alpha, beta)` of
/// `‖∂j(x)‖_X ≤ alpha + beta‖x‖_X`. Construction fails fast on bad data:
/// smallness `m > beta·‖M‖²`, a missing minorant of `φ`, or an infeasible
/// anchor (`0` must lie in `C` and in every sampled `K(v)`).
#[derive(Clone)]
pub struct QVHIProblem {
    pub a: NonlinearOperator,
    pub phi: ConvexFunction,
    pub j: SuperpositionFunctional,
    pub m_map: Arc<LinearMap>,
    pub f: DualVector,
    pub k_family: RadialConstraintFamily,
    pub c_set: ConstraintSet,
    pub alpha: f64,
    pub beta: f64,
    m_norm: f64,
}

impl QVHIProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: NonlinearOperator,
        phi: ConvexFunction,
        j: SuperpositionFunctional,
        m_map: LinearMap,
        f: DualVector,
        k_family: RadialConstraintFamily,
        c_set: ConstraintSet,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let v_space = a.domain();
        assert_same_space(v_space, phi.space());
        assert_same_space(v_space, f.space());
        assert_same_space(v_space, k_family.space());
        assert_same_space(v_space, c_set.space());
        assert_same_space(v_space, m_map.domain());
        assert_same_space(j.space(), m_map.codomain());
        if alpha < j.alpha() - 1e-12 || beta < j.beta() - 1e-12 {
            return Err(Error::InvalidData(format!(
                "declared growth (alpha = {alpha}, beta = {beta}) is below the bound derived from the potential ({}, {})",
                j.alpha(),
                j.beta()
            )));
        }
        if phi.minorant().is_none() {
            return Err(Error::MissingMinorant);
        }
        let m_norm = m_map.operator_norm()?;
        let m = a.m_strong();
        let bound = beta * m_norm * m_norm;
        if m <= bound {
            return Err(Error::SmallnessViolated {
                m,
                bound,
                margin: m - bound,
            });
        }
        let problem = QVHIProblem {
            a,
            phi,
            j,
            m_map: Arc::new(m_map),
            f,
            k_family,
            c_set,
            alpha,
            beta,
            m_norm,
        };
        let zero = Vector::zeros(problem.space_v());
        if !problem.c_set.contains(&zero, 1e-9) {
            return Err(Error::InfeasibleAnchor {
                context: "0 is not in C".to_string(),
            });
        }
        // 0 ∈ K(v) for sampled v: the anchor that keeps every constraint set
        // nonempty (r(0) ≤ ρ ≤ m(v)).
        let r0 = problem.k_family.r(&zero);
        let mut rng = ChaCha8Rng::seed_from_u64(0x0a4c_0a4c);
        for _ in 0..8 {
            let v = random_in_ball(problem.space_v(), 1.5, &mut rng);
            let level = problem.k_family.m(&v);
            if r0 > level + 1e-12 {
                return Err(Error::InfeasibleAnchor {
                    context: format!("r(0) = {r0} exceeds m(v) = {level} at a sampled v"),
                });
            }
        }
        Ok(problem)
    }

    pub fn space_v(&self) -> &SpaceRef {
        self.a.domain()
    }

    pub fn space_x(&self) -> &SpaceRef {
        self.j.space()
    }

    /// Cached `‖M‖` (power iteration at construction).
    pub fn m_norm(&self) -> f64 {
        self.m_norm
    }

    /// Smallness margin `m − beta·‖M‖²`; always positive for constructed
    /// problems. [`check_smallness_parts`] evaluates candidate data without
    /// constructing.
    pub fn check_smallness(&self) -> (bool, f64) {
        check_smallness_parts(self.a.m_strong(), self.beta, self.m_norm)
    }
}

impl std::fmt::Debug for QVHIProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QVHIProblem")
            .field("v", &self.space_v().label())
            .field("x", &self.space_x().label())
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("m_norm", &self.m_norm)
            .finish()
    }
}

/// `(pass, margin)` of the smallness condition `m > beta·‖M‖²`.
pub fn check_smallness_parts(m: f64, beta: f64, m_norm: f64) -> (bool, f64) {
    let margin = m - beta * m_norm * m_norm;
    (margin > 0.0, margin)
}

/// A priori solution bounds around the anchor `z0`:
/// `R1` bounds `‖u‖`, `R2 = ‖M‖R1` bounds `‖Mu‖_X`, and `R = alpha + beta·R2`
/// bounds the truncated subgradients.
#[derive(Clone, Debug)]
pub struct APrioriBounds {
    pub z0: Vector,
    pub c1: f64,
    pub c2: f64,
    pub r1: f64,
    pub r2: f64,
    pub r: f64,
}

/// Computes the bound chain
/// `c1 = ‖Az0‖ + ‖f‖ + alpha‖M‖ + ‖l‖ + beta‖M‖²‖z0‖`,
/// `c2 = |φ(z0)| + ‖l‖‖z0‖ + |b|`, then
/// `‖u − z0‖ ≤ sqrt(δ₁² + 2δ₂)` with `δᵢ = cᵢ/(m − beta‖M‖²)`.
/// The anchor must be feasible for every constraint level (`r(z0) ≤ ρ`) and
/// lie in `C`; `z0 = 0` always qualifies for constructed problems.
pub fn a_priori_bounds(p: &QVHIProblem, z0: &Vector) -> Result<APrioriBounds> {
    assert_same_space(p.space_v(), z0.space());
    let (l, b) = p.phi.minorant().ok_or(Error::MissingMinorant)?;
    let (pass, margin) = p.check_smallness();
    if !pass {
        return Err(Error::SmallnessViolated {
            m: p.a.m_strong(),
            bound: p.beta * p.m_norm * p.m_norm,
            margin,
        });
    }
    if p.k_family.r(z0) > p.k_family.rho() + 1e-12 || !p.c_set.contains(z0, 1e-9) {
        return Err(Error::InfeasibleAnchor {
            context: "bound anchor z0 must satisfy r(z0) <= rho and z0 in C".to_string(),
        });
    }
    let z0_norm = z0.norm();
    let l_norm = l.norm();
    let c1 = p.a.apply(z0).norm()
        + p.f.norm()
        + p.alpha * p.m_norm
        + l_norm
        + p.beta * p.m_norm * p.m_norm * z0_norm;
    let c2 = p.phi.value(z0).abs() + l_norm * z0_norm + b.abs();
    let bound = crate::vi::elementary_bound(c1 / margin, c2 / margin)?;
    let r1 = z0_norm + bound;
    let r2 = p.m_norm * r1;
    let trunc = TruncationData::new(p.alpha, p.beta, r2);
    Ok(APrioriBounds {
        z0: z0.clone(),
        c1,
        c2,
        r1,
        r2,
        r: trunc.r,
    })
}

/// Configuration of the damped fixed-point outer loop.
#[derive(Clone, Debug)]
pub struct OuterConfig {
    /// Damping θ ∈ (0, 1] of the subgradient update.
    pub damping: f64,
    /// Stopping tolerance on `‖v⁺−v‖_V + ‖w⁺−w‖_X`.
    pub tol_outer: f64,
    pub max_outer: usize,
    pub selection: SubgradientSelection,
    pub vi_cfg: VISolverConfig,
    /// Restart budget (fresh random starts in `D` after cycles or stalls).
    pub multistart: usize,
    pub seed: u64,
    /// Feasibility tolerance of the convergence certificate.
    pub tol_feas: f64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        OuterConfig {
            damping: 0.5,
            tol_outer: 1e-9,
            max_outer: 2_000,
            selection: SubgradientSelection::MinNorm,
            vi_cfg: VISolverConfig::default(),
            multistart: 5,
            seed: 0,
            tol_feas: 1e-7,
        }
    }
}

/// One outer iterate record (for experiment CSV output).
#[derive(Clone, Copy, Debug)]
pub struct OuterIterate {
    pub attempt: usize,
    pub iteration: usize,
    pub residual: f64,
    pub v_norm: f64,
    pub w_norm: f64,
    /// `max(r(v) − m(v), 0)`; the C-part of feasibility is certified at
    /// convergence only.
    pub k_feasibility: f64,
}

#[derive(Clone, Debug)]
pub struct QVHISolution {
    pub u: Vector,
    /// Certified multiplier: the subgradient selection at `M u` itself, so
    /// it lies nodally in `∂j(Mu)` whenever the truncation is inactive.
    pub w: Vector,
    pub outer_residual: f64,
    /// `max(r(u) − m(u), dist_C(u), 0)`.
    pub constraint_residual: f64,
    pub truncation_active: bool,
    pub bounds: APrioriBounds,
    pub converged: bool,
    pub outer_iterations: usize,
    pub attempts: usize,
    pub history: Vec<OuterIterate>,
}

/// Solves the auxiliary problem `P(v, w)`: the VI with `g = f − M*w` on
/// `E = K(v) ∩ C`. Errors if the inner solver does not converge.
pub fn auxiliary_solve(
    p: &QVHIProblem,
    v: &Vector,
    w: &Vector,
    vi_cfg: &VISolverConfig,
) -> Result<Vector> {
    let sol = auxiliary_solve_full(p, v, w, v, vi_cfg)?;
    if !sol.converged {
        return Err(Error::InnerSolveFailed {
            iterations: sol.iterations,
            residual: sol.fp_residual,
        });
    }
    Ok(sol.u)
}

fn auxiliary_instance(p: &QVHIProblem, v: &Vector, w: &Vector) -> Result<VIInstance> {
    assert_same_space(p.space_x(), w.space());
    let k_set = p.k_family.constraint_set_at(v)?;
    let e = if p.c_set.is_whole() {
        k_set
    } else if k_set.is_whole() {
        p.c_set.clone()
    } else {
        // C last: its projection output is exactly feasible for box-type C.
        ConstraintSet::intersection(p.space_v(), vec![k_set, p.c_set.clone()])?
    };
    let g = &p.f - &p.m_map.adjoint_apply(w);
    Ok(VIInstance::new(p.a.clone(), p.phi.clone(), e, g))
}

fn auxiliary_solve_full(
    p: &QVHIProblem,
    v: &Vector,
    w: &Vector,
    u0: &Vector,
    vi_cfg: &VISolverConfig,
) -> Result<VISolution> {
    let inst = auxiliary_instance(p, v, w)?;
    solve_vi(&inst, vi_cfg, u0)
}

/// Projects a candidate start into `D = (C ∩ ball R1) × ball_X(R)`. The
/// radial shrink stays in `C` because `0 ∈ C` and `C` is convex.
fn clip_to_domain(
    p: &QVHIProblem,
    bounds: &APrioriBounds,
    v: &Vector,
    w: &Vector,
    eps: f64,
) -> Result<(Vector, Vector)> {
    let mut v = p.c_set.project(v, eps)?;
    let vn = v.norm();
    if vn > bounds.r1 && vn > 0.0 {
        v = v.scaled(bounds.r1 / vn);
    }
    let wn = w.norm();
    let w = if wn > bounds.r {
        if bounds.r == 0.0 {
            Vector::zeros(p.space_x())
        } else {
            w.scaled(bounds.r / wn)
        }
    } else {
        w.clone()
    };
    Ok((v, w))
}

fn random_in_domain(
    p: &QVHIProblem,
    bounds: &APrioriBounds,
    rng: &mut impl Rng,
    eps: f64,
) -> Result<(Vector, Vector)> {
    let v = random_in_ball(p.space_v(), bounds.r1 * 0.9, rng);
    let w = if bounds.r > 0.0 {
        random_in_ball(p.space_x(), bounds.r * 0.9, rng)
    } else {
        Vector::zeros(p.space_x())
    };
    clip_to_domain(p, bounds, &v, &w, eps)
}

fn constraint_residual(p: &QVHIProblem, u: &Vector, eps: f64) -> Result<f64> {
    let k_gap = (p.k_family.r(u) - p.k_family.m(u)).max(0.0);
    let c_gap = if p.c_set.is_whole() {
        0.0
    } else {
        (u - &p.c_set.project(u, eps)?).norm()
    };
    Ok(k_gap.max(c_gap))
}

/// Damped Picard iteration on the fixed-point map with cycle detection and
/// multistart. Non-convergence after all restarts returns the best iterate
/// with `converged = false`; there is no convergence guarantee to appeal to,
/// only the existence of a fixed point.
pub fn solve_qvhi(
    p: &QVHIProblem,
    cfg: &OuterConfig,
    v0: &Vector,
    w0: &Vector,
) -> Result<QVHISolution> {
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return Err(Error::InvalidData(format!(
            "damping must lie in (0, 1], got {}",
            cfg.damping
        )));
    }
    let bounds = a_priori_bounds(p, &Vector::zeros(p.space_v()))?;
    let eps = cfg.vi_cfg.eps_inner;
    let theta = cfg.damping;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let attempts = cfg.multistart.max(1);
    let mut best: Option<QVHISolution> = None;
    let mut history: Vec<OuterIterate> = Vec::new();

    for attempt in 1..=attempts {
        let (mut v, mut w) = if attempt == 1 {
            clip_to_domain(p, &bounds, v0, w0, eps)?
        } else {
            random_in_domain(p, &bounds, &mut rng, eps)?
        };
        let mut window: VecDeque<(Vector, Vector)> = VecDeque::with_capacity(20);
        for outer in 1..=cfg.max_outer {
            let vi_sol = auxiliary_solve_full(p, &v, &w, &v, &cfg.vi_cfg)?;
            if !vi_sol.converged {
                log::debug!(
                    "inner solve stalled at outer iteration {outer} (residual {}); restarting",
                    vi_sol.fp_residual
                );
                break;
            }
            let u_next = vi_sol.u;
            let mu = p.m_map.apply(&u_next);
            let dir = &mu - &p.m_map.apply(&v);
            let w_sel = truncated_subgradient(&p.j, &mu, bounds.r2, cfg.selection, Some(&dir));
            let w_next = w.scaled(1.0 - theta).axpy(theta, &w_sel);
            let step = (&u_next - &v).norm() + (&w_next - &w).norm();
            v = u_next;
            w = w_next;
            history.push(OuterIterate {
                attempt,
                iteration: outer,
                residual: step,
                v_norm: v.norm(),
                w_norm: w.norm(),
                k_feasibility: (p.k_family.r(&v) - p.k_family.m(&v)).max(0.0),
            });

            let candidate = |converged: bool, history: &[OuterIterate]| -> Result<QVHISolution> {
                Ok(QVHISolution {
                    u: v.clone(),
                    w: w_sel.clone(),
                    outer_residual: step,
                    constraint_residual: constraint_residual(p, &v, eps)?,
                    truncation_active: mu.norm() > bounds.r2 + cfg.tol_feas,
                    bounds: bounds.clone(),
                    converged,
                    outer_iterations: outer,
                    attempts: attempt,
                    history: history.to_vec(),
                })
            };

            if step <= cfg.tol_outer {
                let mut sol = candidate(true, &history)?;
                sol.converged = sol.constraint_residual <= cfg.tol_feas && !sol.truncation_active;
                if sol.converged {
                    return Ok(sol);
                }
                if best
                    .as_ref()
                    .map_or(true, |b| sol.outer_residual < b.outer_residual)
                {
                    best = Some(sol);
                }
                break;
            }

            // Cycle detection: a revisit at lag >= 2 within the window while
            // the step is still above tolerance means a periodic orbit.
            let scale = 1e-12 * (1.0 + v.norm() + w.norm());
            let cycling = window
                .iter()
                .rev()
                .skip(1)
                .any(|(pv, pw)| (&v - pv).norm() + (&w - pw).norm() <= scale);
            if cycling {
                log::debug!("cycle detected at outer iteration {outer}; restarting");
                let sol = candidate(false, &history)?;
                if best
                    .as_ref()
                    .map_or(true, |b| sol.outer_residual < b.outer_residual)
                {
                    best = Some(sol);
                }
                break;
            }
            if window.len() == 20 {
                window.pop_front();
            }
            window.push_back((v.clone(), w.clone()));

            if outer == cfg.max_outer {
                let sol = candidate(false, &history)?;
                if best
                    .as_ref()
                    .map_or(true, |b| sol.outer_residual < b.outer_residual)
                {
                    best = Some(sol);
                }
            }
        }
    }
    match best {
        Some(sol) => Ok(sol),
        None => {
            // Every attempt died before producing an iterate (inner stalls).
            let (v, _) = clip_to_domain(p, &bounds, v0, w0, eps)?;
            let mu = p.m_map.apply(&v);
            Ok(QVHISolution {
                u: v.clone(),
                w: truncated_subgradient(&p.j, &mu, bounds.r2, cfg.selection, None),
                outer_residual: f64::INFINITY,
                constraint_residual: constraint_residual(p, &v, eps)?,
                truncation_active: mu.norm() > bounds.r2 + cfg.tol_feas,
                bounds,
                converged: false,
                outer_iterations: 0,
                attempts,
                history,
            })
        }
    }
}

/// Residual certificate of a candidate pair `(u, w)`.
#[derive(Clone, Debug)]
pub struct QVHIResidual {
    /// Fixed-point residual of the VI with `g = f − M*w` on `K(u) ∩ C`.
    pub fp: f64,
    /// Constraint violation `max(r(u) − m(u), dist_C(u), 0)`.
    pub feas: f64,
    /// Whether `w` lies nodally in the interval subdifferential of `j` at
    /// `Mu` (within `1e-10` scaled).
    pub subgrad_ok: bool,
}

pub fn qvhi_residual(
    p: &QVHIProblem,
    u: &Vector,
    w: &Vector,
    tau_probe: f64,
    eps_inner: f64,
) -> Result<QVHIResidual> {
    let inst = auxiliary_instance(p, u, w)?;
    let fp = vi_residual(&inst, u, tau_probe, eps_inner)?;
    let feas = constraint_residual(p, u, eps_inner)?;
    let mu = p.m_map.apply(u);
    let mut subgrad_ok = true;
    for i in 0..p.space_x().dim() {
        let (lo, hi) = p.j.h_at(i).interval_subdifferential(mu.coords()[i]);
        let tol = 1e-10 * (1.0 + lo.abs().max(hi.abs()));
        if w.coords()[i] < lo - tol || w.coords()[i] > hi + tol {
            subgrad_ok = false;
            break;
        }
    }
    Ok(QVHIResidual {
        fp,
        feas,
        subgrad_ok,
    })
}

/// Direct certification of the defining inequality over feasible samples.
#[derive(Clone, Debug)]
pub struct InequalityReport {
    pub min_value: f64,
    pub n_samples: usize,
    pub pass: bool,
}

/// Evaluates `⟨Au − f, z − u⟩ + φ(z) − φ(u) + j⁰(Mu; Mz − Mu)` at every
/// sample and reports the minimum; passes iff it stays above `−slack`.
pub fn verify_inequality(
    p: &QVHIProblem,
    u: &Vector,
    z_samples: &[Vector],
    slack: f64,
) -> Result<InequalityReport> {
    if z_samples.is_empty() {
        return Err(Error::InvalidData(
            "verify_inequality needs a nonempty sample set".to_string(),
        ));
    }
    let au_f = &p.a.apply(u) - &p.f;
    let phi_u = p.phi.value(u);
    let mu = p.m_map.apply(u);
    let mut min_value = f64::INFINITY;
    for z in z_samples {
        let dz = z - u;
        let value =
            au_f.pair(&dz) + p.phi.value(z) - phi_u + p.j.j0_directional(&mu, &p.m_map.apply(&dz));
        min_value = min_value.min(value);
    }
    Ok(InequalityReport {
        min_value,
        n_samples: z_samples.len(),
        pass: min_value >= -slack,
    })
}

/// Samples from `K(u) ∩ C` by rejection plus projection, deterministic per
/// seed.
pub fn sample_constraint_set(
    p: &QVHIProblem,
    u: &Vector,
    radius: f64,
    n: usize,
    seed: u64,
    eps: f64,
) -> Result<Vec<Vector>> {
    let k_set = p.k_family.constraint_set_at(u)?;
    let e = if p.c_set.is_whole() {
        k_set
    } else if k_set.is_whole() {
        p.c_set.clone()
    } else {
        ConstraintSet::intersection(p.space_v(), vec![k_set, p.c_set.clone()])?
    };
    crate::vi::sample_feasible(&e, radius, n, seed, eps)
}

/// One connected blob of accepted grid points.
#[derive(Clone, Debug)]
pub struct BruteForceCluster {
    /// Accepted point with the largest inequality margin.
    pub representative: Vector,
    /// `min_z LHS` at the representative.
    pub margin: f64,
    pub size: usize,
}

#[derive(Clone, Debug)]
pub struct BruteForceReport {
    pub clusters: Vec<BruteForceCluster>,
    pub scanned: usize,
    pub feasible_points: usize,
    pub eps_grid: f64,
}

/// Desk-scale oracle for dimensions 1 and 2: scans a u-grid over the box,
/// keeps feasible points whose inequality minimum over the feasible z-grid
/// stays above `−eps_grid` (calibrated from grid spacing and sampled local
/// Lipschitz bounds), and clusters the survivors by adjacency. Potentials
/// are evaluated at grid base points, so a solution pinned exactly at a
/// subdifferential breakpoint in X can evade the scan; the solver-facing
/// instances keep their solutions off the breakpoints.
///
/// The box must contain the a priori ball `‖u‖_V ≤ R1`.
pub fn brute_force_qvhi(
    p: &QVHIProblem,
    u_spacing: f64,
    z_spacing: f64,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<BruteForceReport> {
    let dim = p.space_v().dim();
    if dim > 2 {
        return Err(Error::DimensionTooLarge { dim, max: 2 });
    }
    if lower.len() != dim || upper.len() != dim {
        return Err(Error::InvalidData("box bounds must match dim".to_string()));
    }
    let bounds = a_priori_bounds(p, &Vector::zeros(p.space_v()))?;
    // Coordinate extent of the V-ball of radius R1: |x_i| <= R1 sqrt((G^-1)_ii).
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        let gi = riesz(&DualVector::new(p.space_v(), e)?);
        let extent = bounds.r1 * gi.coords()[i].max(0.0).sqrt();
        if lower[i] > -extent + 1e-12 || upper[i] < extent - 1e-12 {
            return Err(Error::InvalidData(format!(
                "scan box must contain the a priori ball: axis {i} needs [-{extent}, {extent}]"
            )));
        }
    }

    let axis = |lo: f64, hi: f64, h: f64| -> Vec<f64> {
        let n = ((hi - lo) / h).floor() as usize + 1;
        (0..n).map(|k| lo + k as f64 * h).collect()
    };
    let u_axes: Vec<Vec<f64>> = (0..dim).map(|i| axis(lower[i], upper[i], u_spacing)).collect();
    let z_axes: Vec<Vec<f64>> = (0..dim).map(|i| axis(lower[i], upper[i], z_spacing)).collect();
    let grid_points = |axes: &[Vec<f64>]| -> Vec<DVector<f64>> {
        match axes.len() {
            1 => axes[0].iter().map(|x| DVector::from_column_slice(&[*x])).collect(),
            _ => {
                let mut out = Vec::with_capacity(axes[0].len() * axes[1].len());
                for x in &axes[0] {
                    for y in &axes[1] {
                        out.push(DVector::from_column_slice(&[*x, *y]));
                    }
                }
                out
            }
        }
    };
    let u_points = grid_points(&u_axes);
    let z_points = grid_points(&z_axes);

    // z-side precomputation: r(z), C-membership, phi(z), Mz.
    let feas_tol = 1e-9;
    struct ZData {
        coords: DVector<f64>,
        mz: DVector<f64>,
        phi: f64,
        r: f64,
        in_c: bool,
    }
    let z_data: Vec<ZData> = z_points
        .par_iter()
        .map(|zc| {
            let z = Vector::new(p.space_v(), zc.clone()).unwrap();
            ZData {
                coords: zc.clone(),
                mz: p.m_map.apply(&z).coords().clone(),
                phi: p.phi.value(&z),
                r: p.k_family.r(&z),
                in_c: p.c_set.contains(&z, feas_tol),
            }
        })
        .collect();
    // Coarse subset for the conservative prefilter (a subset of the fine
    // grid, so rejection by the coarse minimum is exact).
    let coarse_stride = ((0.05 / z_spacing).round() as usize).max(1);
    let coarse_idx: Vec<usize> = match dim {
        1 => (0..z_points.len()).step_by(coarse_stride).collect(),
        _ => {
            let ny = z_axes[1].len();
            let mut v = Vec::new();
            for ix in (0..z_axes[0].len()).step_by(coarse_stride) {
                for iy in (0..ny).step_by(coarse_stride) {
                    v.push(ix * ny + iy);
                }
            }
            v
        }
    };

    // Local Lipschitz scale of the inequality in u, sampled on the box.
    let rho_box: f64 = {
        let corner = DVector::from_fn(dim, |i, _| lower[i].abs().max(upper[i].abs()));
        Vector::new(p.space_v(), corner)?.norm()
    };
    let phi_lip = {
        let mut rng = ChaCha8Rng::seed_from_u64(0xb0b0);
        let mut lip: f64 = 0.0;
        for _ in 0..200 {
            let a = DVector::from_fn(dim, |i, _| rng.gen_range(lower[i]..upper[i]));
            let b = DVector::from_fn(dim, |i, _| rng.gen_range(lower[i]..upper[i]));
            let va = Vector::new(p.space_v(), a)?;
            let vb = Vector::new(p.space_v(), b)?;
            let d = (&va - &vb).norm();
            if d > 1e-9 {
                lip = lip.max((p.phi.value(&va) - p.phi.value(&vb)).abs() / d);
            }
        }
        lip
    };
    let a0_norm = p.a.apply(&Vector::zeros(p.space_v())).norm();
    let af_scale = p.a.lipschitz() * rho_box + a0_norm + p.f.norm();
    let j_scale = (p.alpha + p.beta * p.m_norm * rho_box) * p.m_norm;
    let lip_u = af_scale + p.a.lipschitz() * 2.0 * rho_box + phi_lip + 2.0 * j_scale;
    let eps_grid = 2.0 * lip_u * u_spacing * (dim as f64).sqrt();

    let evaluate_min = |uc: &DVector<f64>, z_subset: &[usize], stop_below: f64| -> Option<f64> {
        let u = Vector::new(p.space_v(), uc.clone()).ok()?;
        let level = p.k_family.m(&u);
        if p.k_family.r(&u) > level + feas_tol || !p.c_set.contains(&u, feas_tol) {
            return None;
        }
        let au_f = &p.a.apply(&u) - &p.f;
        let phi_u = p.phi.value(&u);
        let mu = p.m_map.apply(&u);
        let nodal: Vec<(f64, f64)> = (0..p.space_x().dim())
            .map(|i| p.j.h_at(i).interval_subdifferential(mu.coords()[i]))
            .collect();
        let wx = p.j.weights();
        let mut min_v = f64::INFINITY;
        for &zi in z_subset {
            let zd = &z_data[zi];
            if zd.r > level + feas_tol || !zd.in_c {
                continue;
            }
            let mut value = 0.0;
            for k in 0..dim {
                value += au_f.coords()[k] * (zd.coords[k] - uc[k]);
            }
            value += zd.phi - phi_u;
            for (i, (lo, hi)) in nodal.iter().enumerate() {
                let d = zd.mz[i] - mu.coords()[i];
                value += wx[i] * if d >= 0.0 { hi * d } else { lo * d };
            }
            if value < min_v {
                min_v = value;
                if min_v < stop_below {
                    return Some(min_v);
                }
            }
        }
        Some(min_v)
    };

    let all_z: Vec<usize> = (0..z_data.len()).collect();
    let margins: Vec<Option<f64>> = u_points
        .par_iter()
        .map(|uc| {
            let coarse = evaluate_min(uc, &coarse_idx, -eps_grid)?;
            if coarse < -eps_grid {
                return Some(f64::NEG_INFINITY); // rejected, feasible
            }
            evaluate_min(uc, &all_z, -eps_grid)
        })
        .collect();

    let feasible_points = margins.iter().filter(|m| m.is_some()).count();
    let survivors: Vec<(usize, f64)> = margins
        .iter()
        .enumerate()
        .filter_map(|(i, m)| match m {
            Some(v) if *v >= -eps_grid => Some((i, *v)),
            _ => None,
        })
        .collect();

    // Cluster by grid adjacency (diagonal neighbors included).
    let index_of: std::collections::HashMap<usize, usize> = survivors
        .iter()
        .enumerate()
        .map(|(k, (i, _))| (*i, k))
        .collect();
    let neighbors = |flat: usize| -> Vec<usize> {
        match dim {
            1 => {
                let mut v = Vec::new();
                if flat > 0 {
                    v.push(flat - 1);
                }
                if flat + 1 < u_points.len() {
                    v.push(flat + 1);
                }
                v
            }
            _ => {
                let ny = u_axes[1].len();
                let (ix, iy) = (flat / ny, flat % ny);
                let mut v = Vec::new();
                for dx in -1i64..=1 {
                    for dy in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = ix as i64 + dx;
                        let nyy = iy as i64 + dy;
                        if nx >= 0
                            && (nx as usize) < u_axes[0].len()
                            && nyy >= 0
                            && (nyy as usize) < ny
                        {
                            v.push(nx as usize * ny + nyy as usize);
                        }
                    }
                }
                v
            }
        }
    };
    let mut visited = vec![false; survivors.len()];
    let mut clusters = Vec::new();
    for start in 0..survivors.len() {
        if visited[start] {
            continue;
        }
        let mut stack = vec![start];
        visited[start] = true;
        let mut members = Vec::new();
        while let Some(k) = stack.pop() {
            members.push(k);
            for nb in neighbors(survivors[k].0) {
                if let Some(&kk) = index_of.get(&nb) {
                    if !visited[kk] {
                        visited[kk] = true;
                        stack.push(kk);
                    }
                }
            }
        }
        let &best = members
            .iter()
            .max_by(|a, b| {
                survivors[**a]
                    .1
                    .partial_cmp(&survivors[**b].1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(survivors[**b].0.cmp(&survivors[**a].0))
            })
            .unwrap();
        clusters.push(BruteForceCluster {
            representative: Vector::new(p.space_v(), u_points[survivors[best].0].clone())?,
            margin: survivors[best].1,
            size: members.len(),
        });
    }
    if feasible_points == 0 {
        log::warn!("brute force scan found no feasible grid points");
    }
    Ok(BruteForceReport {
        clusters,
        scanned: u_points.len(),
        feasible_points,
        eps_grid,
    })
}

/// Multistart sampling of the solution set.
#[derive(Clone, Debug)]
pub struct SolutionSetSample {
    pub solutions: Vec<QVHISolution>,
    /// Deduplicated representatives at tolerance `10·tol_outer`.
    pub clusters: Vec<Vector>,
    /// Max pairwise V-distance among converged solutions.
    pub diameter: f64,
    pub failures: usize,
    /// Every converged solution satisfies `‖u‖ ≤ R1 + 1e-6`.
    pub r1_audit_ok: bool,
}

/// Runs `solve_qvhi` from `n_starts` random points of `D` (independent
/// per-start seeds, runs execute in parallel, results are ordered by start
/// index so the outcome is schedule-independent).
pub fn sample_solution_set(
    p: &QVHIProblem,
    cfg: &OuterConfig,
    n_starts: usize,
    seed: u64,
) -> Result<SolutionSetSample> {
    assert!(n_starts >= 1, "need at least one start");
    let bounds = a_priori_bounds(p, &Vector::zeros(p.space_v()))?;
    let results: Vec<Result<QVHISolution>> = (0..n_starts)
        .into_par_iter()
        .map(|k| {
            let start_seed = seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let mut rng = ChaCha8Rng::seed_from_u64(start_seed);
            let (v0, w0) = random_in_domain(p, &bounds, &mut rng, cfg.vi_cfg.eps_inner)?;
            let local_cfg = OuterConfig {
                seed: start_seed.wrapping_add(1),
                ..cfg.clone()
            };
            solve_qvhi(p, &local_cfg, &v0, &w0)
        })
        .collect();
    let mut solutions = Vec::with_capacity(n_starts);
    for r in results {
        solutions.push(r?);
    }
    let converged: Vec<&QVHISolution> = solutions.iter().filter(|s| s.converged).collect();
    let failures = solutions.len() - converged.len();
    let mut clusters: Vec<Vector> = Vec::new();
    let dedupe_tol = 10.0 * cfg.tol_outer;
    for s in &converged {
        if !clusters.iter().any(|c| (&s.u - c).norm() <= dedupe_tol) {
            clusters.push(s.u.clone());
        }
    }
    let mut diameter = 0.0f64;
    for i in 0..converged.len() {
        for k in (i + 1)..converged.len() {
            diameter = diameter.max((&converged[i].u - &converged[k].u).norm());
        }
    }
    let r1_audit_ok = converged
        .iter()
        .all(|s| s.u.norm() <= s.bounds.r1 + 1e-6);
    Ok(SolutionSetSample {
        solutions,
        clusters,
        diameter,
        failures,
        r1_audit_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clarke::{radial_retraction, LocallyLipschitz1D};
    use crate::convex::RadialKind;
    use crate::hilbert::GramSpace;
    use approx::assert_relative_eq;

    /// 1D instance with A = id, f = 0.5, j = the nonconvex example potential,
    /// M = id, no constraints. Stationarity 0 = u − 0.5 + ζ with ζ ∈ ∂j(u)
    /// pins u = 0.25 (smooth branch ζ = u).
    pub(crate) fn remark_instance() -> QVHIProblem {
        let v = GramSpace::euclidean(1, "V");
        let x = GramSpace::euclidean(1, "X");
        let j = SuperpositionFunctional::uniform(
            &x,
            DVector::from_element(1, 1.0),
            LocallyLipschitz1D::remark43(),
        )
        .unwrap();
        QVHIProblem::new(
            NonlinearOperator::gram_identity(&v),
            ConvexFunction::zero(&v),
            j,
            LinearMap::new(&v, &x, nalgebra::DMatrix::identity(1, 1)).unwrap(),
            DualVector::from_slice(&v, &[0.5]).unwrap(),
            RadialConstraintFamily::unconstrained(&v),
            ConstraintSet::whole_space(&v),
            1.0,
            0.0,
        )
        .unwrap()
    }

    /// 1D instance with growing constraint levels: A = id, f = 2, j = 0,
    /// K(v) = {|z| ≤ 1 + |v|/2}. The fixed point solves u = min(2, 1 + u/2),
    /// i.e. u = 2 with the constraint exactly active.
    pub(crate) fn growing_ball_instance() -> QVHIProblem {
        let v = GramSpace::euclidean(1, "V");
        let x = GramSpace::euclidean(1, "X");
        let vc = v.clone();
        QVHIProblem::new(
            NonlinearOperator::gram_identity(&v),
            ConvexFunction::zero(&v),
            SuperpositionFunctional::zero(&x).unwrap(),
            LinearMap::new(&v, &x, nalgebra::DMatrix::identity(1, 1)).unwrap(),
            DualVector::from_slice(&v, &[2.0]).unwrap(),
            RadialConstraintFamily::new(
                &v,
                RadialKind::AmbientNorm,
                move |u| 1.0 + Vector::new(&vc, u.coords().clone()).unwrap().norm() / 2.0,
                1.0,
            )
            .unwrap(),
            ConstraintSet::whole_space(&v),
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn smallness_parts_examples() {
        // beta = 0: passes for any m > 0.
        let (pass, _) = check_smallness_parts(0.7, 0.0, 5.0);
        assert!(pass);
        // Boundary case fails with zero margin.
        let (pass, margin) = check_smallness_parts(1.0, 1.0, 1.0);
        assert!(!pass);
        assert_eq!(margin, 0.0);
        let (pass, margin) = check_smallness_parts(1.0, 0.5, 1.0);
        assert!(pass);
        assert_relative_eq!(margin, 0.5);
    }

    #[test]
    fn smallness_enforced_at_construction() {
        let v = GramSpace::euclidean(1, "V");
        let x = GramSpace::euclidean(1, "X");
        let j = SuperpositionFunctional::uniform(
            &x,
            DVector::from_element(1, 1.0),
            LocallyLipschitz1D::smooth_quad(), // beta = 1
        )
        .unwrap();
        let r = QVHIProblem::new(
            NonlinearOperator::gram_identity(&v), // m = 1
            ConvexFunction::zero(&v),
            j,
            LinearMap::new(&v, &x, nalgebra::DMatrix::identity(1, 1)).unwrap(),
            DualVector::zeros(&v),
            RadialConstraintFamily::unconstrained(&v),
            ConstraintSet::whole_space(&v),
            0.0,
            1.0, // beta |M|^2 = 1 = m: fails
        );
        assert!(matches!(r, Err(Error::SmallnessViolated { .. })));
    }

    #[test]
    fn a_priori_bounds_vanishing_data() {
        let v = GramSpace::euclidean(1, "V");
        let x = GramSpace::euclidean(1, "X");
        let p = QVHIProblem::new(
            NonlinearOperator::gram_identity(&v),
            ConvexFunction::zero(&v),
            SuperpositionFunctional::zero(&x).unwrap(),
            LinearMap::new(&v, &x, nalgebra::DMatrix::identity(1, 1)).unwrap(),
            DualVector::zeros(&v),
            RadialConstraintFamily::unconstrained(&v),
            ConstraintSet::whole_space(&v),
            0.0,
            0.0,
        )
        .unwrap();
        let b = a_priori_bounds(&p, &Vector::zeros(p.space_v())).unwrap();
        assert_eq!(b.c1, 0.0);
        assert_eq!(b.c2, 0.0);
        assert_eq!(b.r1, 0.0);
        assert_eq!(b.r2, 0.0);
        assert_eq!(b.r, 0.0);
    }

    #[test]
    fn a_priori_bounds_unit_example() {
        // alpha = 1, beta = 0, |M| = 1, m = 1, f = 0: c1 = 1, c2 = 0, R1 = 1.
        let p = {
            let mut p = remark_instance();
            p.f = DualVector::zeros(p.space_v());
            p
        };
        let b = a_priori_bounds(&p, &Vector::zeros(p.space_v())).unwrap();
        assert_relative_eq!(b.c1, 1.0, epsilon = 1e-12);
        assert_eq!(b.c2, 0.0);
        assert_relative_eq!(b.r1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.r2, 1.0, epsilon = 1e-7);
        assert_relative_eq!(b.r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn auxiliary_solve_linear_cases() {
        let p = remark_instance();
        let cfg = VISolverConfig::default();
        // w = 0, no constraints, A = id: u = riesz(f) = 0.5.
        let u = auxiliary_solve(&p, &Vector::zeros(p.space_v()), &Vector::zeros(p.space_x()), &cfg)
            .unwrap();
        assert_relative_eq!(u.coords()[0], 0.5, epsilon = 1e-9);
        // Shift by -w for M = id, A = id.
        let w = Vector::from_slice(p.space_x(), &[0.2]).unwrap();
        let u = auxiliary_solve(&p, &Vector::zeros(p.space_v()), &w, &cfg).unwrap();
        assert_relative_eq!(u.coords()[0], 0.3, epsilon = 1e-9);
        // Ball constraint: radial clamp of the unconstrained solution.
        let p2 = growing_ball_instance();
        let u = auxiliary_solve(
            &p2,
            &Vector::zeros(p2.space_v()),
            &Vector::zeros(p2.space_x()),
            &cfg,
        )
        .unwrap();
        assert_relative_eq!(u.coords()[0], 1.0, epsilon = 1e-9); // clamp(2 -> ball(1))
    }

    #[test]
    fn solve_qvhi_remark_hand_solution() {
        let p = remark_instance();
        let cfg = OuterConfig::default();
        let sol = solve_qvhi(
            &p,
            &cfg,
            &Vector::zeros(p.space_v()),
            &Vector::zeros(p.space_x()),
        )
        .unwrap();
        assert!(sol.converged, "{sol:?}");
        assert_relative_eq!(sol.u.coords()[0], 0.25, epsilon = 1e-8);
        assert_relative_eq!(sol.w.coords()[0], 0.25, epsilon = 1e-8);
        assert!(!sol.truncation_active);
        assert!(sol.u.norm() <= sol.bounds.r1 + 1e-6);

        let res = qvhi_residual(&p, &sol.u, &sol.w, 1.0, 1e-10).unwrap();
        assert!(res.fp <= 2.0 * cfg.tol_outer, "fp = {}", res.fp);
        assert!(res.feas <= 1e-9);
        assert!(res.subgrad_ok);
    }

    #[test]
    fn solve_qvhi_growing_ball_hand_solution() {
        let p = growing_ball_instance();
        let cfg = OuterConfig {
            tol_outer: 1e-10,
            ..Default::default()
        };
        let sol = solve_qvhi(
            &p,
            &cfg,
            &Vector::zeros(p.space_v()),
            &Vector::zeros(p.space_x()),
        )
        .unwrap();
        assert!(sol.converged, "{sol:?}");
        assert_relative_eq!(sol.u.coords()[0], 2.0, epsilon = 1e-8);
        // Constraint exactly active: r(u) = m(u) = 2.
        assert_relative_eq!(p.k_family.r(&sol.u), p.k_family.m(&sol.u), epsilon = 1e-8);
    }

    #[test]
    fn special_case_collapse_to_vi() {
        // j = 0 and a constant K reduce the outer loop to one inner solve.
        let v = GramSpace::euclidean(2, "V");
        let x = GramSpace::euclidean(2, "X");
        let a = NonlinearOperator::linear(
            &v,
            nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.4, 0.4, 1.5]),
            1.3,
            2.3,
        )
        .unwrap();
        let phi = ConvexFunction::weighted_l1(&v, DVector::from_element(2, 0.3)).unwrap();
        let fam = RadialConstraintFamily::new(&v, RadialKind::AmbientNorm, |_| 1.2, 1.2).unwrap();
        let f = DualVector::from_slice(&v, &[1.0, -0.8]).unwrap();
        let p = QVHIProblem::new(
            a.clone(),
            phi.clone(),
            SuperpositionFunctional::zero(&x).unwrap(),
            LinearMap::new(&v, &x, nalgebra::DMatrix::identity(2, 2)).unwrap(),
            f.clone(),
            fam,
            ConstraintSet::whole_space(&v),
            0.0,
            0.0,
        )
        .unwrap();
        let vi_cfg = VISolverConfig {
            tol: 1e-12,
            ..Default::default()
        };
        let cfg = OuterConfig {
            vi_cfg: vi_cfg.clone(),
            tol_outer: 1e-9,
            ..Default::default()
        };
        let v0 = Vector::zeros(p.space_v());
        let sol = solve_qvhi(&p, &cfg, &v0, &Vector::zeros(p.space_x())).unwrap();
        assert!(sol.converged);

        let inst = VIInstance::new(
            a,
            phi,
            ConstraintSet::ball(&v, None, 1.2).unwrap(),
            f,
        );
        let vi_sol = solve_vi(&inst, &vi_cfg, &v0).unwrap();
        assert!(vi_sol.converged);
        assert!(
            (&sol.u - &vi_sol.u).norm() <= 1e-10,
            "collapse gap {}",
            (&sol.u - &vi_sol.u).norm()
        );
    }

    #[test]
    fn verify_inequality_at_solution() {
        let p = remark_instance();
        let sol = solve_qvhi(
            &p,
            &OuterConfig::default(),
            &Vector::zeros(p.space_v()),
            &Vector::zeros(p.space_x()),
        )
        .unwrap();
        let samples = sample_constraint_set(&p, &sol.u, 2.0, 2000, 5, 1e-9).unwrap();
        let report = verify_inequality(&p, &sol.u, &samples, 1e-6).unwrap();
        assert!(report.pass, "{report:?}");

        // z = u contributes exactly zero.
        let self_rep = verify_inequality(&p, &sol.u, &[sol.u.clone()], 0.0).unwrap();
        assert!(self_rep.min_value.abs() <= 1e-15);

        // A random non-solution violates.
        let bad = Vector::from_slice(p.space_v(), &[0.9]).unwrap();
        let rep = verify_inequality(&p, &bad, &samples, 1e-6).unwrap();
        assert!(rep.min_value < 0.0);
    }

    #[test]
    fn brute_force_finds_hand_solution() {
        let p = remark_instance();
        let lower = DVector::from_column_slice(&[-2.0]);
        let upper = DVector::from_column_slice(&[2.0]);
        let report = brute_force_qvhi(&p, 1e-3, 1e-3, &lower, &upper).unwrap();
        assert!(!report.clusters.is_empty());
        let best = report
            .clusters
            .iter()
            .min_by(|a, b| {
                (a.representative.coords()[0] - 0.25)
                    .abs()
                    .partial_cmp(&(b.representative.coords()[0] - 0.25).abs())
                    .unwrap()
            })
            .unwrap();
        assert!(
            (best.representative.coords()[0] - 0.25).abs() <= 2e-3,
            "oracle cluster at {} not near 0.25",
            best.representative.coords()[0]
        );
        // Exactly one solution for this instance.
        assert_eq!(report.clusters.len(), 1, "{report:?}");
    }

    #[test]
    fn residual_detects_non_solutions_and_zero_data() {
        let p = remark_instance();
        // A feasible point away from the solution has a positive residual.
        let bad_u = Vector::from_slice(p.space_v(), &[0.8]).unwrap();
        let bad_w = Vector::from_slice(p.space_x(), &[0.1]).unwrap();
        let res = qvhi_residual(&p, &bad_u, &bad_w, 1.0, 1e-10).unwrap();
        assert!(res.fp > 1e-3, "fp = {}", res.fp);

        // All-vanishing data: u = 0, w = 0 is stationary with every
        // residual at zero and 0 in the subdifferential.
        let v = GramSpace::euclidean(1, "V");
        let x = GramSpace::euclidean(1, "X");
        let p0 = QVHIProblem::new(
            NonlinearOperator::gram_identity(&v),
            ConvexFunction::zero(&v),
            SuperpositionFunctional::zero(&x).unwrap(),
            LinearMap::identity_between(&v, &x).unwrap(),
            DualVector::zeros(&v),
            RadialConstraintFamily::unconstrained(&v),
            ConstraintSet::whole_space(&v),
            0.0,
            0.0,
        )
        .unwrap();
        let res = qvhi_residual(
            &p0,
            &Vector::zeros(&v),
            &Vector::zeros(&x),
            1.0,
            1e-12,
        )
        .unwrap();
        assert_eq!(res.fp, 0.0);
        assert_eq!(res.feas, 0.0);
        assert!(res.subgrad_ok);
    }

    #[test]
    fn brute_force_requires_box_containing_a_priori_ball() {
        // A scan box that cannot contain every candidate solution is bad
        // data, reported as an error rather than a silent empty answer.
        let p = remark_instance(); // R1 = 1.5
        let lower = DVector::from_column_slice(&[-0.5]);
        let upper = DVector::from_column_slice(&[0.5]);
        assert!(matches!(
            brute_force_qvhi(&p, 1e-2, 1e-2, &lower, &upper),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn sample_solution_set_single_start() {
        let p = remark_instance();
        let sample = sample_solution_set(&p, &OuterConfig::default(), 1, 3).unwrap();
        assert_eq!(sample.solutions.len(), 1);
        assert!(sample.clusters.len() <= 1);
        assert_eq!(sample.diameter, 0.0);
    }

    #[test]
    fn brute_force_rejects_high_dim() {
        let v = GramSpace::euclidean(3, "V");
        let x = GramSpace::euclidean(3, "X");
        let p = QVHIProblem::new(
            NonlinearOperator::gram_identity(&v),
            ConvexFunction::zero(&v),
            SuperpositionFunctional::zero(&x).unwrap(),
            LinearMap::new(&v, &x, nalgebra::DMatrix::identity(3, 3)).unwrap(),
            DualVector::zeros(&v),
            RadialConstraintFamily::unconstrained(&v),
            ConstraintSet::whole_space(&v),
            0.0,
            0.0,
        )
        .unwrap();
        let b = DVector::from_element(3, 1.0);
        assert!(matches!(
            brute_force_qvhi(&p, 0.1, 0.1, &(-b.clone()), &b),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn sample_solution_set_unique_instance() {
        let p = remark_instance();
        let cfg = OuterConfig::default();
        let sample = sample_solution_set(&p, &cfg, 8, 42).unwrap();
        assert_eq!(sample.failures, 0, "{:?}", sample.failures);
        assert_eq!(sample.clusters.len(), 1);
        assert!(sample.diameter <= 10.0 * cfg.tol_outer);
        assert!(sample.r1_audit_ok);
        // Determinism across runs.
        let again = sample_solution_set(&p, &cfg, 8, 42).unwrap();
        assert_eq!(
            sample.clusters[0].coords().as_slice(),
            again.clusters[0].coords().as_slice()
        );
    }

    #[test]
    fn d_invariance_of_iterates() {
        // Solutions and certified multipliers stay inside D.
        for p in [remark_instance(), growing_ball_instance()] {
            let cfg = OuterConfig::default();
            let sample = sample_solution_set(&p, &cfg, 6, 9).unwrap();
            for s in &sample.solutions {
                assert!(s.u.norm() <= s.bounds.r1 + 1e-6);
                assert!(s.w.norm() <= s.bounds.r + 1e-6);
                assert!(p.m_map.apply(&s.u).norm() <= s.bounds.r2 + 1e-6);
            }
        }
    }

    #[test]
    fn subgradient_admissibility_of_certificate() {
        let p = remark_instance();
        let sol = solve_qvhi(
            &p,
            &OuterConfig::default(),
            &Vector::zeros(p.space_v()),
            &Vector::zeros(p.space_x()),
        )
        .unwrap();
        let mu = p.m_map.apply(&sol.u);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let d = random_in_ball(p.space_x(), 2.0, &mut rng);
            let pairing = crate::hilbert::inner(&sol.w, &d);
            assert!(pairing <= p.j.j0_directional(&mu, &d) + 1e-10);
        }
    }

    #[test]
    fn retraction_consistency_in_solver() {
        // The truncation radius equals alpha + beta R2 exactly.
        let p = remark_instance();
        let b = a_priori_bounds(&p, &Vector::zeros(p.space_v())).unwrap();
        let t = TruncationData::new(p.alpha, p.beta, b.r2);
        assert_eq!(t.r, b.r);
        let z = Vector::from_slice(p.space_x(), &[5.0]).unwrap();
        assert!(radial_retraction(&z, b.r2).norm() <= b.r2 + 1e-12);
    }
}
