//! Concrete problem instances: synthetic generators with known constants and
//! P1 finite-element discretizations of the interior and boundary
//! semipermeability models.

mod assembly;
mod mesh;
mod synthetic;

pub use assembly::{
    assemble_embedding, assemble_load, assemble_operator, assemble_trace, build_boundary_problem,
    build_interior_problem, smallness_info, AssembledProblem, ConstraintChoice, ConvexChoice,
    MaterialKind, MaterialLaw, ModelKind, Recipe, SmallnessInfo,
};
pub use mesh::{
    build_mesh, manufactured, manufactured_errors, BoundaryFacet, BoundaryPart, BoundarySpec,
    Cells, FEMSpace, Mesh,
};
pub use synthetic::{synthetic_instance, Regime};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hilbert::{random_in_ball, Vector};

/// Outcome of one sampled hypothesis clause.
#[derive(Clone, Debug)]
pub struct ClauseResult {
    pub clause: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub clauses: Vec<ClauseResult>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&ClauseResult> {
        self.clauses.iter().filter(|c| !c.pass).collect()
    }
}

/// Sampled verification of the model hypotheses: the law's zero/growth/
/// monotonicity clauses, the potential growth bound, convexity of the convex
/// integrand, the radial-family conditions, the smallness condition, and the
/// obstacle sign conditions. Report-only; each violation carries a witness.
pub fn check_hypotheses(
    problem: &AssembledProblem,
    n_samples: usize,
    seed: u64,
) -> HypothesisReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clauses = Vec::new();
    let law = &problem.recipe.law;
    let dim = problem.space.mesh.dim as usize;
    let sample_x = |rng: &mut ChaCha8Rng| -> [f64; 2] {
        [
            rng.gen_range(0.0..1.0),
            if dim == 2 { rng.gen_range(0.0..1.0) } else { 0.0 },
        ]
    };
    let sample_xi = |rng: &mut ChaCha8Rng| -> [f64; 2] {
        [
            rng.gen_range(-3.0..3.0),
            if dim == 2 { rng.gen_range(-3.0..3.0) } else { 0.0 },
        ]
    };
    let norm2 = |v: &[f64; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();

    // Law (a): a(x, 0) = 0.
    {
        let mut witness = None;
        for _ in 0..n_samples {
            let x = sample_x(&mut rng);
            let v = law.eval(&x, &[0.0, 0.0]);
            if norm2(&v) > 1e-12 {
                witness = Some(format!("a({x:?}, 0) = {v:?}"));
                break;
            }
        }
        clauses.push(ClauseResult {
            clause: "law (a): a(x, 0) = 0".to_string(),
            pass: witness.is_none(),
            witness,
        });
    }
    // Law (c): growth m_a (1 + |xi|).
    {
        let mut witness = None;
        for _ in 0..n_samples {
            let x = sample_x(&mut rng);
            let xi = sample_xi(&mut rng);
            let v = law.eval(&x, &xi);
            if norm2(&v) > law.m_a * (1.0 + norm2(&xi)) + 1e-9 {
                witness = Some(format!("|a({x:?}, {xi:?})| = {}", norm2(&v)));
                break;
            }
        }
        clauses.push(ClauseResult {
            clause: "law (c): growth".to_string(),
            pass: witness.is_none(),
            witness,
        });
    }
    // Law (d): strong monotonicity with constant alpha_a > 0.
    {
        let mut witness = if law.alpha_a > 0.0 {
            None
        } else {
            Some(format!("alpha_a = {} is not positive", law.alpha_a))
        };
        if witness.is_none() {
            for _ in 0..n_samples {
                let x = sample_x(&mut rng);
                let xi1 = sample_xi(&mut rng);
                let xi2 = sample_xi(&mut rng);
                let d = [xi1[0] - xi2[0], xi1[1] - xi2[1]];
                let dn2 = d[0] * d[0] + d[1] * d[1];
                if dn2 < 1e-18 {
                    continue;
                }
                let a1 = law.eval(&x, &xi1);
                let a2 = law.eval(&x, &xi2);
                let pairing = (a1[0] - a2[0]) * d[0] + (a1[1] - a2[1]) * d[1];
                if pairing < law.alpha_a * dn2 - 1e-9 * (1.0 + dn2) {
                    witness = Some(format!(
                        "monotonicity ratio {} below alpha_a = {}",
                        pairing / dn2,
                        law.alpha_a
                    ));
                    break;
                }
            }
        }
        clauses.push(ClauseResult {
            clause: "law (d): strong monotonicity".to_string(),
            pass: witness.is_none(),
            witness,
        });
    }
    // Potential growth: |∂h(r)| <= c0 + c1 |r| (endpoints of the interval).
    {
        let h = &problem.recipe.potential;
        let (c0, c1) = h.growth();
        let mut witness = None;
        let mut points: Vec<f64> = (0..n_samples).map(|_| rng.gen_range(-5.0..5.0)).collect();
        points.extend_from_slice(h.breakpoints());
        for r in points {
            let (lo, hi) = h.interval_subdifferential(r);
            let bound = c0 + c1 * r.abs() + 1e-12;
            if lo.abs() > bound || hi.abs() > bound {
                witness = Some(format!(
                    "∂h({r}) = [{lo}, {hi}] exceeds {c0} + {c1}|r|"
                ));
                break;
            }
        }
        clauses.push(ClauseResult {
            clause: "potential growth: |∂h| <= c0 + c1|r|".to_string(),
            pass: witness.is_none(),
            witness,
        });
    }
    // Convex integrand: midpoint convexity of the scalar preset.
    {
        let k = problem.recipe.convex_choice;
        let mut witness = None;
        for _ in 0..n_samples {
            let a = rng.gen_range(-4.0..4.0);
            let b = rng.gen_range(-4.0..4.0);
            let mid = k.value(0.5 * (a + b));
            if mid > 0.5 * (k.value(a) + k.value(b)) + 1e-12 {
                witness = Some(format!("midpoint convexity fails at ({a}, {b})"));
                break;
            }
        }
        clauses.push(ClauseResult {
            clause: "convex integrand: convexity".to_string(),
            pass: witness.is_none(),
            witness,
        });
    }
    // Radial family: positive homogeneity, subadditivity, level bound.
    {
        let fam = &problem.qvhi.k_family;
        let space = problem.qvhi.space_v();
        let mut witness = None;
        let r0 = fam.r(&Vector::zeros(space));
        if r0 > fam.rho() + 1e-12 {
            witness = Some(format!("r(0) = {r0} exceeds rho = {}", fam.rho()));
        }
        for _ in 0..n_samples.min(64) {
            if witness.is_some() {
                break;
            }
            let u = random_in_ball(space, 2.0, &mut rng);
            let w = random_in_ball(space, 2.0, &mut rng);
            let (ru, rw) = (fam.r(&u), fam.r(&w));
            let lam = rng.gen_range(0.1..3.0);
            if (fam.r(&u.scaled(lam)) - lam * ru).abs() > 1e-9 * (1.0 + lam * ru) {
                witness = Some("positive homogeneity fails".to_string());
            } else if fam.r(&(&u + &w)) > ru + rw + 1e-9 * (1.0 + ru + rw) {
                witness = Some("subadditivity fails".to_string());
            } else if fam.m(&w) < fam.rho() - 1e-12 {
                witness = Some(format!("m(v) = {} below rho = {}", fam.m(&w), fam.rho()));
            }
        }
        clauses.push(ClauseResult {
            clause: "constraint family: homogeneity/subadditivity/level".to_string(),
            pass: witness.is_none(),
            witness,
        });
    }
    // Smallness condition with the computed operator norm.
    {
        let s = &problem.smallness;
        clauses.push(ClauseResult {
            clause: "smallness: c1*sqrt(2)*|M|^2 < alpha_a".to_string(),
            pass: s.pass,
            witness: if s.pass {
                None
            } else {
                Some(format!(
                    "margin {} with c1 = {}, |M| = {}, critical c1 = {}",
                    s.margin, s.c1_bar, s.m_norm, s.critical_c1
                ))
            },
        });
    }
    // Obstacle data (boundary model only).
    if let Some(k2) = &problem.recipe.k2 {
        let nonneg = k2.iter().all(|v| *v >= 0.0);
        clauses.push(ClauseResult {
            clause: "obstacle: k2 >= 0".to_string(),
            pass: nonneg,
            witness: if nonneg {
                None
            } else {
                Some("negative obstacle value".to_string())
            },
        });
        let not_trivial = k2.iter().any(|v| *v > 0.0);
        clauses.push(ClauseResult {
            clause: "obstacle: k2 not identically 0".to_string(),
            pass: not_trivial,
            witness: if not_trivial {
                None
            } else {
                Some("k2 is identically zero (fully active obstacle)".to_string())
            },
        });
    }
    HypothesisReport { clauses }
}

/// Nodal export records `(x, y, value)` including the Dirichlet zeros.
pub fn nodal_export(space: &FEMSpace, u: &Vector) -> Vec<([f64; 2], f64)> {
    let nodal = space.nodal_values(u);
    (0..space.mesh.n_nodes())
        .map(|i| (space.mesh.nodes[i], nodal[i]))
        .collect()
}

/// Nodal interpolation of a scalar field as a plain closure-friendly vector,
/// mostly for loads given analytically.
pub fn nodal_field(mesh: &Mesh, f: impl Fn(&[f64; 2]) -> f64) -> DVector<f64> {
    DVector::from_fn(mesh.n_nodes(), |i, _| f(&mesh.nodes[i]))
}
