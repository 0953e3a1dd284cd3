//! Inner variational inequality of the first kind:
//! find `u ∈ E` with `⟨Au − g, z − u⟩ + φ(z) − φ(u) ≥ 0` for all `z ∈ E`.
//!
//! Solved by forward-backward splitting
//! `u⁺ = prox_{τ(φ+ι_E)}(u − τ J⁻¹(Au − g))` with the Riesz map `J⁻¹` of the
//! V-metric. For an m-strongly monotone, L-Lipschitz operator the iteration
//! contracts with factor `q = sqrt(1 − 2τm + τ²L²) < 1` whenever
//! `τ ∈ (0, 2m/L²)`; the default step `τ = m/L²` minimizes `q`.

use crate::convex::{composite_prox, ConstraintSet, ConvexFunction};
use crate::hilbert::{
    assert_same_space, random_in_ball, riesz, DualVector, NonlinearOperator, SpaceRef, Vector,
};
use crate::{Error, Result};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Inner problem data: operator, convex part, constraint set, right-hand
/// side. All on one space. Clones share the oracles.
#[derive(Clone, Debug)]
pub struct VIInstance {
    pub a: NonlinearOperator,
    pub phi: ConvexFunction,
    pub e: ConstraintSet,
    pub g: DualVector,
}

impl VIInstance {
    pub fn new(
        a: NonlinearOperator,
        phi: ConvexFunction,
        e: ConstraintSet,
        g: DualVector,
    ) -> Self {
        assert_same_space(a.domain(), phi.space());
        assert_same_space(a.domain(), e.space());
        assert_same_space(a.domain(), g.space());
        VIInstance { a, phi, e, g }
    }

    pub fn space(&self) -> &SpaceRef {
        self.a.domain()
    }
}

/// Step-size rule for the splitting iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// `τ = m/L²`, the minimizer of the contraction factor.
    Auto,
    /// Fixed step; must lie in `(0, 2m/L²)`.
    Fixed(f64),
}

#[derive(Clone, Debug)]
pub struct VISolverConfig {
    pub step: StepRule,
    /// Stopping tolerance on the fixed-point residual `‖u⁺−u‖/τ`.
    pub tol: f64,
    pub max_iter: usize,
    /// Tolerance handed to prox/projection suboracles.
    pub eps_inner: f64,
}

impl Default for VISolverConfig {
    fn default() -> Self {
        VISolverConfig {
            step: StepRule::Auto,
            tol: 1e-10,
            max_iter: 50_000,
            eps_inner: 1e-9,
        }
    }
}

impl VISolverConfig {
    pub fn resolve_step(&self, a: &NonlinearOperator) -> Result<f64> {
        let m = a.m_strong();
        let l = a.lipschitz();
        let limit = 2.0 * m / (l * l);
        match self.step {
            StepRule::Auto => Ok(m / (l * l)),
            StepRule::Fixed(t) => {
                if t > 0.0 && t < limit {
                    Ok(t)
                } else {
                    Err(Error::InvalidStep { tau: t, limit })
                }
            }
        }
    }
}

/// Contraction factor `sqrt(1 − 2τm + τ²L²)` of one splitting step.
pub fn contraction_factor(m: f64, l: f64, tau: f64) -> f64 {
    (1.0 - 2.0 * tau * m + tau * tau * l * l).max(0.0).sqrt()
}

#[derive(Clone, Debug)]
pub struct VISolution {
    pub u: Vector,
    /// `‖u⁺ − u‖_V / τ` at the last step.
    pub fp_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Forward-backward splitting for the inner VI. Requires `m > 0`.
/// Non-convergence within `max_iter` is reported in-band
/// (`converged = false`, history returned); genuinely broken sub-oracles are
/// errors.
pub fn solve_vi(inst: &VIInstance, cfg: &VISolverConfig, u0: &Vector) -> Result<VISolution> {
    if !(inst.a.m_strong() > 0.0) {
        return Err(Error::InvalidData(
            "solve_vi needs a strongly monotone operator (m > 0)".to_string(),
        ));
    }
    assert_same_space(inst.space(), u0.space());
    let tau = cfg.resolve_step(&inst.a)?;
    let mut u = u0.clone();
    let mut history = Vec::new();
    for it in 1..=cfg.max_iter {
        let au = inst.a.apply(&u);
        let grad = riesz(&(&au - &inst.g));
        let step_point = u.axpy(-tau, &grad);
        let u_next = composite_prox(&inst.phi, &inst.e, &step_point, tau, cfg.eps_inner)?;
        let res = (&u_next - &u).norm() / tau;
        history.push(res);
        u = u_next;
        if res <= cfg.tol {
            return Ok(VISolution {
                u,
                fp_residual: res,
                iterations: it,
                converged: true,
                history,
            });
        }
    }
    let fp_residual = history.last().copied().unwrap_or(f64::INFINITY);
    Ok(VISolution {
        u,
        fp_residual,
        iterations: cfg.max_iter,
        converged: false,
        history,
    })
}

/// Stationarity certificate: `‖u − prox(u − τ J⁻¹(Au − g))‖_V / τ`; zero (up
/// to the inner tolerance) exactly at the solution.
pub fn vi_residual(inst: &VIInstance, u: &Vector, tau_probe: f64, eps_inner: f64) -> Result<f64> {
    assert!(tau_probe > 0.0, "probe step must be positive");
    let au = inst.a.apply(u);
    let grad = riesz(&(&au - &inst.g));
    let step_point = u.axpy(-tau_probe, &grad);
    let u_next = composite_prox(&inst.phi, &inst.e, &step_point, tau_probe, eps_inner)?;
    Ok((&u_next - u).norm() / tau_probe)
}

/// Slack report of the direct and Minty forms over a sample of feasible
/// test points.
#[derive(Clone, Debug)]
pub struct MintyReport {
    /// `min_z ⟨Au − g, z − u⟩ + φ(z) − φ(u)` over the samples.
    pub min_slack_solution_form: f64,
    /// `min_z ⟨Az − g, z − u⟩ + φ(z) − φ(u)` over the samples.
    pub min_slack_minty_form: f64,
    pub n_samples: usize,
}

impl MintyReport {
    pub fn passes(&self, slack: f64) -> bool {
        self.min_slack_solution_form >= -slack && self.min_slack_minty_form >= -slack
    }
}

/// Evaluates both inequality forms at every sample. For a monotone operator
/// the two characterize the same solution set, so at a solution both minima
/// are nonnegative up to tolerance. Errors if a sample is outside `E`.
pub fn minty_check(
    inst: &VIInstance,
    u: &Vector,
    z_samples: &[Vector],
    feas_tol: f64,
) -> Result<MintyReport> {
    if z_samples.is_empty() {
        return Err(Error::InvalidData(
            "minty_check needs at least one sample".to_string(),
        ));
    }
    let au = inst.a.apply(u);
    let phi_u = inst.phi.value(u);
    let mut min3 = f64::INFINITY;
    let mut min4 = f64::INFINITY;
    for z in z_samples {
        if !inst.e.contains(z, feas_tol) {
            return Err(Error::InvalidData(
                "minty_check sample lies outside E".to_string(),
            ));
        }
        let dz = z - u;
        let phi_gap = inst.phi.value(z) - phi_u;
        let form3 = (&au - &inst.g).pair(&dz) + phi_gap;
        let form4 = (&inst.a.apply(z) - &inst.g).pair(&dz) + phi_gap;
        min3 = min3.min(form3);
        min4 = min4.min(form4);
    }
    Ok(MintyReport {
        min_slack_solution_form: min3,
        min_slack_minty_form: min4,
        n_samples: z_samples.len(),
    })
}

/// Feasible sample generator for verification: points drawn from a ball are
/// kept if already feasible and projected onto `E` otherwise, giving a mix
/// of interior and boundary samples. Deterministic per seed.
pub fn sample_feasible(
    e: &ConstraintSet,
    radius: f64,
    n: usize,
    seed: u64,
    eps: f64,
) -> Result<Vec<Vector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = random_in_ball(e.space(), radius, &mut rng);
        if e.contains(&x, eps) {
            out.push(x);
        } else {
            out.push(e.project(&x, eps)?);
        }
    }
    Ok(out)
}

/// Indexed data perturbation `n ↦ (Eₙ, gₙ)` with `Eₙ → E` in the Mosco sense
/// and `gₙ → g` strongly. Constraint sets are rebuilt per call.
pub struct MoscoFamily {
    at: Box<dyn Fn(u32) -> Result<(ConstraintSet, DualVector)> + Send + Sync>,
    description: String,
}

impl MoscoFamily {
    pub fn new(
        description: &str,
        at: impl Fn(u32) -> Result<(ConstraintSet, DualVector)> + Send + Sync + 'static,
    ) -> Self {
        MoscoFamily {
            at: Box::new(at),
            description: description.to_string(),
        }
    }

    pub fn at(&self, n: u32) -> Result<(ConstraintSet, DualVector)> {
        assert!(n >= 1, "family indices are positive");
        (self.at)(n)
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Balls of radius `limit + 1/n` shrinking onto the limit ball.
    pub fn shrinking_balls(space: &SpaceRef, g: DualVector, limit_radius: f64) -> Self {
        let space = space.clone();
        MoscoFamily::new("shrinking-balls", move |n| {
            let e = ConstraintSet::ball(&space, None, limit_radius + 1.0 / n as f64)?;
            Ok((e, g.clone()))
        })
    }

    /// Boxes `[lower + d/n, upper + d/n]` drifting onto `[lower, upper]`.
    pub fn moving_boxes(
        space: &SpaceRef,
        g: DualVector,
        lower: nalgebra::DVector<f64>,
        upper: nalgebra::DVector<f64>,
        drift: nalgebra::DVector<f64>,
    ) -> Self {
        let space = space.clone();
        MoscoFamily::new("moving-boxes", move |n| {
            let t = 1.0 / n as f64;
            let e = ConstraintSet::box_set(&space, &lower + &drift * t, &upper + &drift * t)?;
            Ok((e, g.clone()))
        })
    }

    /// Halfspace caps `{⟨a, z⟩ ≤ b + 1/n}` closing onto `{⟨a, z⟩ ≤ b}`.
    pub fn polyhedral_caps(space: &SpaceRef, g: DualVector, a: DualVector, b: f64) -> Self {
        let space = space.clone();
        MoscoFamily::new("polyhedral-caps", move |n| {
            let e = ConstraintSet::halfspace(&space, a.clone(), b + 1.0 / n as f64)?;
            Ok((e, g.clone()))
        })
    }

    /// Fixed set, right-hand sides `gₙ = g + e/n`.
    pub fn g_shift(
        set_factory: impl Fn() -> Result<ConstraintSet> + Send + Sync + 'static,
        g: DualVector,
        shift: DualVector,
    ) -> Self {
        assert_same_space(g.space(), shift.space());
        MoscoFamily::new("g-shift", move |n| {
            let e = set_factory()?;
            Ok((e, &g + &shift.scaled(1.0 / n as f64)))
        })
    }
}

impl std::fmt::Debug for MoscoFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MoscoFamily")
            .field("description", &self.description)
            .finish()
    }
}

/// One perturbed solve in a [`perturbation_experiment`].
#[derive(Clone, Debug)]
pub struct PerturbationRecord {
    pub n: u32,
    /// `‖uₙ − u‖_V` against the unperturbed solution.
    pub error: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Data part of the proof's bound chain: `‖gₙ − g‖_{V*} / m`, the exact
    /// error bound when only the right-hand side moves.
    pub g_gap_bound: f64,
}

#[derive(Debug)]
pub struct PerturbationStudy {
    pub base: VISolution,
    pub records: Vec<PerturbationRecord>,
}

/// Solves the base problem and every indexed perturbation `(Eₙ, gₙ)`
/// (operator and convex part shared with the base), reporting errors against
/// the base solution. Errors if any solve fails to converge.
pub fn perturbation_experiment(
    base: &VIInstance,
    family: &MoscoFamily,
    n_list: &[u32],
    cfg: &VISolverConfig,
) -> Result<PerturbationStudy> {
    let zero = Vector::zeros(base.space());
    let base_sol = solve_vi(base, cfg, &zero)?;
    if !base_sol.converged {
        return Err(Error::InnerSolveFailed {
            iterations: base_sol.iterations,
            residual: base_sol.fp_residual,
        });
    }
    let m = base.a.m_strong();
    let mut records = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let (e_n, g_n) = family.at(n)?;
        let g_gap_bound = (&g_n - &base.g).norm() / m;
        let inst = VIInstance::new(base.a.clone(), base.phi.clone(), e_n, g_n);
        let sol = solve_vi(&inst, cfg, &base_sol.u)?;
        if !sol.converged {
            return Err(Error::InnerSolveFailed {
                iterations: sol.iterations,
                residual: sol.fp_residual,
            });
        }
        records.push(PerturbationRecord {
            n,
            error: (&sol.u - &base_sol.u).norm(),
            iterations: sol.iterations,
            residual: sol.fp_residual,
            g_gap_bound,
        });
    }
    Ok(PerturbationStudy {
        base: base_sol,
        records,
    })
}

/// Upper bound from `x² ≤ δ₁x + δ₂`: any such `x > 0` satisfies
/// `x ≤ sqrt(δ₁² + 2δ₂)`. Accepts zero arguments (the bound is continuous);
/// rejects negative or non-finite input.
pub fn elementary_bound(delta1: f64, delta2: f64) -> Result<f64> {
    if !(delta1 >= 0.0) || !(delta2 >= 0.0) || !delta1.is_finite() || !delta2.is_finite() {
        return Err(Error::InvalidData(format!(
            "elementary_bound needs nonnegative finite inputs, got ({delta1}, {delta2})"
        )));
    }
    Ok((delta1 * delta1 + 2.0 * delta2).sqrt())
}
