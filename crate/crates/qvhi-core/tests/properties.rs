//! Property tests of the algebraic invariants that hold for arbitrary data.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use qvhi_core::clarke::LocallyLipschitz1D;
use qvhi_core::convex::project_weighted_l1_ball;
use qvhi_core::hilbert::{inner, riesz, DualVector, GramSpace, LinearMap, Vector};
use qvhi_core::vi::elementary_bound;

fn small_f64() -> impl Strategy<Value = f64> {
    (-50i32..50).prop_map(|k| k as f64 / 7.0)
}

proptest! {
    /// The sort-based weighted-l1 projection lands inside the ball, is
    /// idempotent, and never moves a feasible point.
    #[test]
    fn weighted_l1_projection_feasible_idempotent(
        xs in proptest::collection::vec(small_f64(), 1..6),
        ws in proptest::collection::vec(1u32..40, 1..6),
        c in 1u32..30,
    ) {
        let n = xs.len().min(ws.len());
        let v = DVector::from_fn(n, |i, _| xs[i]);
        let w = DVector::from_fn(n, |i, _| ws[i] as f64 / 10.0);
        let c = c as f64 / 10.0;
        let r = |y: &DVector<f64>| -> f64 {
            y.iter().zip(w.iter()).map(|(x, wi)| wi * x.abs()).sum()
        };
        let p = project_weighted_l1_ball(&v, &w, c);
        prop_assert!(r(&p) <= c + 1e-9 * (1.0 + c));
        let pp = project_weighted_l1_ball(&p, &w, c);
        prop_assert!((&pp - &p).norm() <= 1e-9 * (1.0 + p.norm()));
        if r(&v) <= c {
            prop_assert_eq!(p, v);
        }
    }

    /// x² ≤ δ₁x + δ₂ implies x ≤ elementary_bound(δ₁, δ₂).
    #[test]
    fn elementary_bound_dominates(d1 in 0f64..5.0, d2 in 0f64..5.0, t in 0f64..1.0) {
        // The positive root of x² = δ₁x + δ₂ is the largest admissible x;
        // test the whole admissible segment.
        let root = 0.5 * (d1 + (d1 * d1 + 4.0 * d2).sqrt());
        let x = t * root;
        prop_assume!(x > 0.0);
        prop_assert!(x * x <= d1 * x + d2 + 1e-12);
        let bound = elementary_bound(d1, d2).unwrap();
        prop_assert!(x <= bound + 1e-12);
    }

    /// Riesz inverts the Gram multiply, and the adjoint identity holds, on
    /// arbitrary SPD metrics.
    #[test]
    fn riesz_and_adjoint_identities(
        seed in proptest::array::uniform16(-5i8..5),
        wv in proptest::array::uniform4(-3i8..3),
    ) {
        let b = DMatrix::from_fn(4, 4, |i, k| seed[4 * i + k] as f64 / 4.0);
        let gram = &b * b.transpose() + DMatrix::identity(4, 4) * 0.7;
        let v_space = GramSpace::new(gram, "V").unwrap();
        let x_space = GramSpace::euclidean(3, "X");
        let map = LinearMap::new(
            &v_space,
            &x_space,
            DMatrix::from_fn(3, 4, |i, k| ((i + 2 * k) as f64 - 3.0) / 3.0),
        )
        .unwrap();

        let v = Vector::from_slice(&v_space, &[
            wv[0] as f64, wv[1] as f64, wv[2] as f64, wv[3] as f64,
        ])
        .unwrap();
        // riesz(G v) = v.
        let g = DualVector::new(&v_space, v_space.gram() * v.coords()).unwrap();
        let back = riesz(&g);
        prop_assert!((&back - &v).norm() <= 1e-10 * (1.0 + v.norm()));
        // <M* w, v> = <w, M v>_X.
        let w = Vector::from_slice(&x_space, &[wv[0] as f64, wv[3] as f64, 1.0]).unwrap();
        let lhs = map.adjoint_apply(&w).pair(&v);
        let rhs = inner(&w, &map.apply(&v));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    /// h⁰ is positively homogeneous in the direction and dominated by the
    /// growth certificate.
    #[test]
    fn h0_homogeneous_and_bounded(r in small_f64(), d in small_f64(), lam in 0f64..4.0) {
        for h in [
            LocallyLipschitz1D::remark43(),
            LocallyLipschitz1D::abs(),
            LocallyLipschitz1D::smooth_quad(),
        ] {
            let base = h.h0_directional(r, d);
            let scaled = h.h0_directional(r, lam * d);
            prop_assert!((scaled - lam * base).abs() <= 1e-10 * (1.0 + base.abs() * lam));
            let (c0, c1) = h.growth();
            prop_assert!(base.abs() <= (c0 + c1 * r.abs()) * d.abs() + 1e-12);
        }
    }
}
