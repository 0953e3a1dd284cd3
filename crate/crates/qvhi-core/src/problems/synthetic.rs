//! Randomized finite-dimensional instances with exactly known operator
//! constants, used for oracle comparisons and bound audits.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clarke::{LocallyLipschitz1D, SuperpositionFunctional};
use crate::convex::{ConstraintSet, ConvexFunction, RadialConstraintFamily, RadialKind};
use crate::hilbert::{DualVector, GramSpace, LinearMap, NonlinearOperator};
use crate::qvhi::QVHIProblem;
use crate::Result;

/// Instance character.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Small nonsmooth coupling and slowly varying constraint levels; the
    /// outer map is empirically contractive, so the solution is unique.
    Unique,
    /// The nonconvex example potential with a strongly solution-dependent
    /// constraint level; multiple fixed points are possible.
    Multistable,
}

/// Random SPD linear operator (constants exact from the spectrum), a convex
/// part drawn from {0, weighted-l1, V-quadratic}, a named potential for j,
/// the identity for M, and a norm-ball constraint family
/// `m(v) = m0 + c‖v‖`. Smallness holds by construction; deterministic per
/// seed.
pub fn synthetic_instance(dim: usize, seed: u64, regime: Regime) -> Result<QVHIProblem> {
    assert!(dim >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = GramSpace::euclidean(dim, "V");
    let x = GramSpace::euclidean(dim, "X");

    // Random orthogonal frame and a spectrum in [1, 2].
    let gauss = DMatrix::from_fn(dim, dim, |_, _| {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    });
    let q = gauss.qr().q();
    let eigs = DVector::from_fn(dim, |_, _| rng.gen_range(1.0..2.0));
    let s = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let m = eigs.min();
    let l = eigs.max();
    let a = NonlinearOperator::linear(&v, s, m, l)?;

    let phi = match rng.gen_range(0..3) {
        0 => ConvexFunction::zero(&v),
        1 => ConvexFunction::weighted_l1(&v, DVector::from_element(dim, 0.15))?,
        _ => ConvexFunction::scaled_sq_norm(&v, 0.3)?,
    };

    let (h, level_slope) = match regime {
        Regime::Unique => (
            LocallyLipschitz1D::smooth_quad().scaled(0.15 * m)?,
            0.05,
        ),
        Regime::Multistable => (LocallyLipschitz1D::remark43(), 0.3),
    };
    let j = SuperpositionFunctional::uniform(&x, DVector::from_element(dim, 1.0), h)?;
    let (alpha, beta) = (j.alpha(), j.beta());

    let m0 = rng.gen_range(0.8..1.2);
    let family = RadialConstraintFamily::new(
        &v,
        RadialKind::AmbientNorm,
        move |u| m0 + level_slope * u.norm(),
        m0,
    )?;

    let f_dir = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let f_norm = rng.gen_range(0.4..0.9) * m0;
    let f_scale = if f_dir.norm() > 1e-9 {
        f_norm / f_dir.norm()
    } else {
        0.0
    };
    let f = DualVector::new(&v, f_dir * f_scale)?;

    QVHIProblem::new(
        a,
        phi,
        j,
        LinearMap::identity_between(&v, &x)?,
        f,
        family,
        ConstraintSet::whole_space(&v),
        alpha,
        beta,
    )
}
