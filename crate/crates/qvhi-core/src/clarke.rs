//! Locally Lipschitz scalar potentials and their Clarke machinery.
//!
//! Potentials are piecewise C¹ on a sorted breakpoint grid. For this class
//! the Clarke subdifferential at a point is the convex hull of the one-sided
//! derivatives — an interval — and the generalized directional derivative is
//! its support function. Superposition functionals sum nodal potentials with
//! positive quadrature weights; the carrying X-space must have exactly those
//! weights as its diagonal Gram matrix, which makes nodal subgradients
//! consistent with the X-pairing without extra bookkeeping.

use std::sync::Arc;

use nalgebra::DVector;

use crate::hilbert::{assert_same_space, SpaceRef, Vector};
use crate::{Error, Result};

type PieceFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Scalar locally Lipschitz potential, C¹ on each piece between sorted
/// breakpoints. Piece `i` covers `(b[i-1], b[i])`; piece 0 and the last
/// piece are the unbounded tails. `growth = (c0, c1)` is the claimed bound
/// `|∂h(r)| ≤ c0 + c1|r|`.
#[derive(Clone)]
pub struct LocallyLipschitz1D {
    breakpoints: Vec<f64>,
    value_fn: PieceFn,
    deriv_fn: PieceFn,
    growth: (f64, f64),
    is_zero: bool,
}

impl LocallyLipschitz1D {
    pub fn new(
        breakpoints: Vec<f64>,
        value: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        growth: (f64, f64),
    ) -> Result<Self> {
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidData(
                "breakpoints must be strictly increasing".to_string(),
            ));
        }
        if !(growth.0 >= 0.0 && growth.1 >= 0.0) {
            return Err(Error::InvalidData(
                "growth constants must be nonnegative".to_string(),
            ));
        }
        // Continuity across breakpoints.
        for (i, b) in breakpoints.iter().enumerate() {
            let left = value(i, *b);
            let right = value(i + 1, *b);
            if !left.is_finite() || !right.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("potential value at breakpoint {b}"),
                });
            }
            if (left - right).abs() > 1e-12 * (1.0 + left.abs().max(right.abs())) {
                return Err(Error::InvalidData(format!(
                    "potential discontinuous at breakpoint {b}: {left} vs {right}"
                )));
            }
        }
        Ok(LocallyLipschitz1D {
            breakpoints,
            value_fn: Arc::new(value),
            deriv_fn: Arc::new(deriv),
            growth,
            is_zero: false,
        })
    }

    /// The zero potential.
    pub fn zero() -> Self {
        LocallyLipschitz1D {
            breakpoints: Vec::new(),
            value_fn: Arc::new(|_, _| 0.0),
            deriv_fn: Arc::new(|_, _| 0.0),
            growth: (0.0, 0.0),
            is_zero: true,
        }
    }

    /// The nonconvex example potential: 0 for r < 0, r²/2 on [0, 1),
    /// constant 1/2 beyond. Its subdifferential is 0 / r / [0,1] / 0 and is
    /// bounded by 1, so the growth certificate is (1, 0). `|∂h(r)| ≤ |r|`
    /// also holds, so (0, 1) is an equally valid claim; use
    /// [`LocallyLipschitz1D::with_growth`] to switch.
    pub fn remark43() -> Self {
        LocallyLipschitz1D::new(
            vec![0.0, 1.0],
            |piece, r| match piece {
                0 => 0.0,
                1 => 0.5 * r * r,
                _ => 0.5,
            },
            |piece, r| match piece {
                0 => 0.0,
                1 => r,
                _ => 0.0,
            },
            (1.0, 0.0),
        )
        .expect("preset is valid")
    }

    /// `h(r) = |r|`.
    pub fn abs() -> Self {
        LocallyLipschitz1D::new(
            vec![0.0],
            |piece, r| if piece == 0 { -r } else { r },
            |piece, _| if piece == 0 { -1.0 } else { 1.0 },
            (1.0, 0.0),
        )
        .expect("preset is valid")
    }

    /// `h(r) = r²/2` (smooth, convex).
    pub fn smooth_quad() -> Self {
        LocallyLipschitz1D::new(Vec::new(), |_, r| 0.5 * r * r, |_, r| r, (0.0, 1.0))
            .expect("preset is valid")
    }

    /// Built-in potentials by key: `remark43`, `abs`, `smooth-quad`, `zero`.
    pub fn by_key(key: &str) -> Result<Self> {
        match key {
            "remark43" => Ok(LocallyLipschitz1D::remark43()),
            "abs" => Ok(LocallyLipschitz1D::abs()),
            "smooth-quad" => Ok(LocallyLipschitz1D::smooth_quad()),
            "zero" => Ok(LocallyLipschitz1D::zero()),
            other => Err(Error::InvalidData(format!(
                "unknown potential key `{other}` (expected remark43 | abs | smooth-quad | zero)"
            ))),
        }
    }

    /// Replaces the claimed growth certificate. The caller asserts the new
    /// bound; `check_hypotheses` audits it by sampling.
    pub fn with_growth(mut self, c0: f64, c1: f64) -> Result<Self> {
        if !(c0 >= 0.0 && c1 >= 0.0) {
            return Err(Error::InvalidData(
                "growth constants must be nonnegative".to_string(),
            ));
        }
        self.growth = (c0, c1);
        Ok(self)
    }

    /// Output scaling `r ↦ s·h(r)` for `s ≥ 0`; subgradients and growth
    /// constants scale linearly.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::InvalidData(format!(
                "scaling factor must be nonnegative, got {s}"
            )));
        }
        if s == 0.0 {
            return Ok(LocallyLipschitz1D::zero());
        }
        let value = self.value_fn.clone();
        let deriv = self.deriv_fn.clone();
        Ok(LocallyLipschitz1D {
            breakpoints: self.breakpoints.clone(),
            value_fn: Arc::new(move |p, r| s * value(p, r)),
            deriv_fn: Arc::new(move |p, r| s * deriv(p, r)),
            growth: (s * self.growth.0, s * self.growth.1),
            is_zero: false,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn growth(&self) -> (f64, f64) {
        self.growth
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    /// Piece containing `r`, plus whether `r` sits exactly on a breakpoint
    /// (then the returned index is the left piece).
    fn locate(&self, r: f64) -> (usize, bool) {
        let idx = self.breakpoints.partition_point(|b| *b < r);
        if idx < self.breakpoints.len() && self.breakpoints[idx] == r {
            (idx, true)
        } else {
            (idx, false)
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        let (piece, on_bp) = self.locate(r);
        // Continuity makes either side valid on a breakpoint.
        let p = if on_bp { piece + 1 } else { piece };
        (self.value_fn)(p, r)
    }

    /// Clarke subdifferential as the interval hull of one-sided derivatives:
    /// `(h'(r), h'(r))` inside a piece, `(min, max)` of the left/right
    /// derivatives on a breakpoint.
    pub fn interval_subdifferential(&self, r: f64) -> (f64, f64) {
        let (piece, on_bp) = self.locate(r);
        if on_bp {
            let left = (self.deriv_fn)(piece, r);
            let right = (self.deriv_fn)(piece + 1, r);
            (left.min(right), left.max(right))
        } else {
            let d = (self.deriv_fn)(piece, r);
            (d, d)
        }
    }

    /// Generalized directional derivative
    /// `h⁰(r; d) = max{ζ·d : ζ ∈ ∂h(r)}`, exact for piecewise-C¹ potentials.
    pub fn h0_directional(&self, r: f64, d: f64) -> f64 {
        let (lo, hi) = self.interval_subdifferential(r);
        if d >= 0.0 {
            hi * d
        } else {
            lo * d
        }
    }
}

impl std::fmt::Debug for LocallyLipschitz1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocallyLipschitz1D")
            .field("breakpoints", &self.breakpoints)
            .field("growth", &self.growth)
            .field("is_zero", &self.is_zero)
            .finish()
    }
}

/// Rule for picking one subgradient out of each nodal interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubgradientSelection {
    /// Interval point closest to zero; deterministic, stabilizes the outer
    /// fixed-point iteration.
    MinNorm,
    /// `argmax ζ·d_i` for a supplied direction (min-norm where `d_i = 0`).
    DirectionAttaining,
    /// Interval midpoint.
    Midpoint,
}

/// Truncation constants of the modified subgradient map: radius `r2` in X
/// and the range bound `r = alpha + beta·r2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationData {
    pub r2: f64,
    pub r: f64,
}

impl TruncationData {
    pub fn new(alpha: f64, beta: f64, r2: f64) -> Self {
        TruncationData {
            r2,
            r: alpha + beta * r2,
        }
    }
}

#[derive(Clone)]
enum Potentials {
    Uniform(LocallyLipschitz1D),
    PerNode(Vec<LocallyLipschitz1D>),
}

/// Discrete superposition functional `j(w) = Σ_i ω_i h_i(w_i)` on a space X
/// whose Gram matrix is `diag(ω)`. Clones share the nodal potentials.
#[derive(Clone)]
pub struct SuperpositionFunctional {
    potentials: Potentials,
    weights: DVector<f64>,
    space: SpaceRef,
    alpha: f64,
    beta: f64,
    is_zero: bool,
}

impl SuperpositionFunctional {
    /// Same potential at every node.
    pub fn uniform(space: &SpaceRef, weights: DVector<f64>, h: LocallyLipschitz1D) -> Result<Self> {
        Self::build(space, weights, Potentials::Uniform(h))
    }

    /// One potential per node (x-dependent integrand after quadrature).
    pub fn per_node(
        space: &SpaceRef,
        weights: DVector<f64>,
        hs: Vec<LocallyLipschitz1D>,
    ) -> Result<Self> {
        if hs.len() != space.dim() {
            return Err(Error::InvalidData(
                "need one potential per node".to_string(),
            ));
        }
        Self::build(space, weights, Potentials::PerNode(hs))
    }

    /// `j ≡ 0` on the given space.
    pub fn zero(space: &SpaceRef) -> Result<Self> {
        let weights = space.gram().diagonal();
        Self::build(
            space,
            weights,
            Potentials::Uniform(LocallyLipschitz1D::zero()),
        )
    }

    fn build(space: &SpaceRef, weights: DVector<f64>, potentials: Potentials) -> Result<Self> {
        if weights.len() != space.dim() {
            return Err(Error::InvalidData(
                "quadrature weights must match the X dimension".to_string(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidData(
                "quadrature weights must be positive and finite".to_string(),
            ));
        }
        if !space.is_diagonal() {
            return Err(Error::InvalidData(format!(
                "X-space `{}` must carry a diagonal (lumped) Gram matrix equal to the quadrature weights",
                space.label()
            )));
        }
        for i in 0..weights.len() {
            let g = space.gram()[(i, i)];
            if (g - weights[i]).abs() > 1e-12 * (1.0 + g.abs()) {
                return Err(Error::InvalidData(format!(
                    "X gram diagonal {g} mismatches quadrature weight {} at node {i}",
                    weights[i]
                )));
            }
        }
        let total: f64 = weights.sum();
        let (c0, c1, is_zero) = match &potentials {
            Potentials::Uniform(h) => (h.growth().0, h.growth().1, h.is_zero()),
            Potentials::PerNode(hs) => hs.iter().fold((0.0f64, 0.0f64, true), |acc, h| {
                (
                    acc.0.max(h.growth().0),
                    acc.1.max(h.growth().1),
                    acc.2 && h.is_zero(),
                )
            }),
        };
        Ok(SuperpositionFunctional {
            potentials,
            weights,
            space: space.clone(),
            alpha: c0 * total.sqrt(),
            beta: c1,
            is_zero,
        })
    }

    pub fn h_at(&self, node: usize) -> &LocallyLipschitz1D {
        match &self.potentials {
            Potentials::Uniform(h) => h,
            Potentials::PerNode(hs) => &hs[node],
        }
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    /// Growth constant α in `‖∂j(w)‖_X ≤ α + β‖w‖_X`, derived from the nodal
    /// claims: `α = max c0 · sqrt(Σ ω_i)`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Growth constant β, derived as `max c1`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    pub fn value(&self, w: &Vector) -> f64 {
        assert_same_space(&self.space, w.space());
        (0..self.space.dim())
            .map(|i| self.weights[i] * self.h_at(i).value(w.coords()[i]))
            .sum()
    }

    /// `j⁰(w; d) = Σ_i ω_i h⁰(w_i; d_i)`: the discretized upper surrogate;
    /// sublinear in `d`.
    pub fn j0_directional(&self, w: &Vector, d: &Vector) -> f64 {
        assert_same_space(&self.space, w.space());
        assert_same_space(&self.space, d.space());
        (0..self.space.dim())
            .map(|i| self.weights[i] * self.h_at(i).h0_directional(w.coords()[i], d.coords()[i]))
            .sum()
    }

    /// A selection of `∂j(w)` as an element of X: nodal values `ζ_i` in the
    /// interval subdifferential, chosen by the rule. The X-pairing
    /// `⟨ζ, d⟩_X = Σ ω_i ζ_i d_i` carries the quadrature weights through the
    /// diagonal Gram matrix.
    pub fn select(
        &self,
        w: &Vector,
        rule: SubgradientSelection,
        direction: Option<&Vector>,
    ) -> Vector {
        assert_same_space(&self.space, w.space());
        if let Some(d) = direction {
            assert_same_space(&self.space, d.space());
        }
        if matches!(rule, SubgradientSelection::DirectionAttaining) {
            assert!(
                direction.is_some(),
                "direction-attaining selection needs a direction"
            );
        }
        let coords = DVector::from_fn(self.space.dim(), |i, _| {
            let (lo, hi) = self.h_at(i).interval_subdifferential(w.coords()[i]);
            match rule {
                SubgradientSelection::MinNorm => 0.0f64.clamp(lo, hi),
                SubgradientSelection::Midpoint => 0.5 * (lo + hi),
                SubgradientSelection::DirectionAttaining => {
                    let di = direction.unwrap().coords()[i];
                    if di > 0.0 {
                        hi
                    } else if di < 0.0 {
                        lo
                    } else {
                        0.0f64.clamp(lo, hi)
                    }
                }
            }
        });
        Vector::new(&self.space, coords).expect("subgradient coordinates are finite")
    }
}

impl std::fmt::Debug for SuperpositionFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SuperpositionFunctional")
            .field("space", &self.space.label())
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("is_zero", &self.is_zero)
            .finish()
    }
}

/// Radial retraction onto the X-ball of radius `r2`: identity inside,
/// `r2·z/‖z‖_X` outside. Nonexpansive in the X-metric.
pub fn radial_retraction(z: &Vector, r2: f64) -> Vector {
    assert!(r2 > 0.0, "retraction radius must be positive");
    let n = z.norm();
    if n <= r2 {
        z.clone()
    } else {
        z.scaled(r2 / n)
    }
}

/// The truncated subgradient map `F(z) = ∂j(P_{R₂}(z))` with the selection
/// rule applied after retraction; its range is bounded by `α + β R₂`.
pub fn truncated_subgradient(
    j: &SuperpositionFunctional,
    z: &Vector,
    r2: f64,
    rule: SubgradientSelection,
    direction: Option<&Vector>,
) -> Vector {
    j.select(&radial_retraction(z, r2), rule, direction)
}

/// Search parameters for [`relaxed_monotonicity_witness`].
#[derive(Clone, Debug)]
pub struct WitnessSearchGrid {
    /// Pair centers; defaults to the potential's breakpoints.
    pub centers: Option<Vec<f64>>,
    /// Offsets δ used to form pairs (c−δ, c+δ), (c−δ, c), (c, c+δ).
    pub radii: Vec<f64>,
    /// Range and step count of an additional coarse all-pairs scan.
    pub range: (f64, f64),
    pub coarse_steps: usize,
}

impl Default for WitnessSearchGrid {
    fn default() -> Self {
        WitnessSearchGrid {
            centers: None,
            radii: (2..=64).map(|n| 1.0 / n as f64).collect(),
            range: (-2.0, 2.0),
            coarse_steps: 41,
        }
    }
}

/// A pair violating relaxed monotonicity of `∂h`:
/// `(ζ_r − ζ_s)(r − s) < −m (r−s)²` for some admissible subgradients.
#[derive(Clone, Copy, Debug)]
pub struct MonotonicityWitness {
    pub r: f64,
    pub s: f64,
    /// `min (ζ_r − ζ_s)(r−s) + m (r−s)²` over extreme selections; negative.
    pub violation: f64,
}

/// Searches pairs near the breakpoints (and on a coarse grid) for violations
/// of the relaxed monotonicity condition with constant `m_relax`, taking the
/// worst admissible subgradients on each side. Returns the most violating
/// pair, or `None` when every sampled pair satisfies the condition — as for
/// any convex potential.
pub fn relaxed_monotonicity_witness(
    h: &LocallyLipschitz1D,
    m_relax: f64,
    grid: &WitnessSearchGrid,
) -> Option<MonotonicityWitness> {
    assert!(m_relax >= 0.0, "relaxation constant must be nonnegative");
    let worst = |r: f64, s: f64| -> f64 {
        let t = r - s;
        if t == 0.0 {
            return 0.0;
        }
        let (lo_r, hi_r) = h.interval_subdifferential(r);
        let (lo_s, hi_s) = h.interval_subdifferential(s);
        let term_r = if t >= 0.0 { lo_r * t } else { hi_r * t };
        let term_s = if t >= 0.0 { -hi_s * t } else { -lo_s * t };
        term_r + term_s + m_relax * t * t
    };
    let mut best: Option<MonotonicityWitness> = None;
    let mut consider = |r: f64, s: f64| {
        let v = worst(r, s);
        if v < -1e-12 && best.map_or(true, |b| v < b.violation) {
            best = Some(MonotonicityWitness { r, s, violation: v });
        }
    };
    let centers: Vec<f64> = grid
        .centers
        .clone()
        .unwrap_or_else(|| h.breakpoints().to_vec());
    for c in &centers {
        for delta in &grid.radii {
            consider(c - delta, c + delta);
            consider(c - delta, *c);
            consider(*c, c + delta);
        }
    }
    if grid.coarse_steps >= 2 {
        let (a, b) = grid.range;
        let step = (b - a) / (grid.coarse_steps - 1) as f64;
        for i in 0..grid.coarse_steps {
            for k in (i + 1)..grid.coarse_steps {
                consider(a + i as f64 * step, a + k as f64 * step);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::GramSpace;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn remark43_interval_subdifferential() {
        let j = LocallyLipschitz1D::remark43();
        assert_eq!(j.interval_subdifferential(0.5), (0.5, 0.5));
        assert_eq!(j.interval_subdifferential(1.0), (0.0, 1.0));
        assert_eq!(j.interval_subdifferential(-3.0), (0.0, 0.0));
        assert_eq!(j.interval_subdifferential(0.0), (0.0, 0.0));
        assert_eq!(j.interval_subdifferential(2.0), (0.0, 0.0));
    }

    #[test]
    fn remark43_values_continuous() {
        let j = LocallyLipschitz1D::remark43();
        assert_eq!(j.value(-1.0), 0.0);
        assert_relative_eq!(j.value(0.5), 0.125);
        assert_relative_eq!(j.value(1.0), 0.5);
        assert_relative_eq!(j.value(5.0), 0.5);
    }

    #[test]
    fn h0_directional_at_breakpoint() {
        let j = LocallyLipschitz1D::remark43();
        assert_eq!(j.h0_directional(1.0, 1.0), 1.0);
        assert_eq!(j.h0_directional(1.0, -1.0), 0.0);
        assert_eq!(j.h0_directional(0.37, 0.0), 0.0);
        assert_eq!(j.h0_directional(-2.0, 0.0), 0.0);
    }

    #[test]
    fn discontinuous_potential_rejected() {
        let bad = LocallyLipschitz1D::new(
            vec![0.0],
            |piece, _| if piece == 0 { 0.0 } else { 1.0 },
            |_, _| 0.0,
            (1.0, 0.0),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn j0_directional_sums_nodes() {
        let x = GramSpace::euclidean(2, "X");
        let j = SuperpositionFunctional::uniform(
            &x,
            DVector::from_element(2, 1.0),
            LocallyLipschitz1D::remark43(),
        )
        .unwrap();
        let w = Vector::from_slice(&x, &[1.0, 1.0]).unwrap();
        let d = Vector::from_slice(&x, &[1.0, -1.0]).unwrap();
        assert_relative_eq!(j.j0_directional(&w, &d), 1.0);
        assert_eq!(j.j0_directional(&w, &Vector::zeros(&x)), 0.0);
    }

    #[test]
    fn j0_smooth_region_is_weighted_gradient() {
        let x = GramSpace::diagonal(DVector::from_column_slice(&[0.5, 2.0]), "X").unwrap();
        let j = SuperpositionFunctional::uniform(
            &x,
            DVector::from_column_slice(&[0.5, 2.0]),
            LocallyLipschitz1D::remark43(),
        )
        .unwrap();
        let w = Vector::from_slice(&x, &[0.3, 0.6]).unwrap();
        let d = Vector::from_slice(&x, &[1.0, -2.0]).unwrap();
        // All nodes in the C1 region: weighted sum of h'(w_i) d_i.
        let expected = 0.5 * 0.3 * 1.0 + 2.0 * 0.6 * (-2.0);
        assert_relative_eq!(j.j0_directional(&w, &d), expected, max_relative = 1e-14);
    }

    #[test]
    fn gram_weight_mismatch_rejected() {
        let x = GramSpace::diagonal(DVector::from_column_slice(&[1.0, 2.0]), "X").unwrap();
        let r = SuperpositionFunctional::uniform(
            &x,
            DVector::from_element(2, 1.0),
            LocallyLipschitz1D::abs(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn selection_rules() {
        let x = GramSpace::euclidean(1, "X");
        let j = SuperpositionFunctional::uniform(
            &x,
            DVector::from_element(1, 1.0),
            LocallyLipschitz1D::remark43(),
        )
        .unwrap();
        let at_bp = Vector::from_slice(&x, &[1.0]).unwrap();
        let up = Vector::from_slice(&x, &[1.0]).unwrap();
        assert_eq!(
            j.select(&at_bp, SubgradientSelection::MinNorm, None).coords()[0],
            0.0
        );
        assert_eq!(
            j.select(&at_bp, SubgradientSelection::DirectionAttaining, Some(&up))
                .coords()[0],
            1.0
        );
        assert_eq!(
            j.select(&at_bp, SubgradientSelection::Midpoint, None).coords()[0],
            0.5
        );
        let smooth = Vector::from_slice(&x, &[0.5]).unwrap();
        for rule in [
            SubgradientSelection::MinNorm,
            SubgradientSelection::Midpoint,
        ] {
            assert_eq!(j.select(&smooth, rule, None).coords()[0], 0.5);
        }
    }

    #[test]
    fn selection_dominated_by_j0() {
        // <zeta, d>_X <= j0(w; d) for every rule and sampled direction.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let weights = DVector::from_column_slice(&[0.7, 1.3, 0.25]);
        let x = GramSpace::diagonal(weights.clone(), "X").unwrap();
        let j =
            SuperpositionFunctional::uniform(&x, weights, LocallyLipschitz1D::remark43()).unwrap();
        for _ in 0..200 {
            let w = Vector::new(
                &x,
                DVector::from_fn(3, |_, _| {
                    // Mix of breakpoint hits and generic points.
                    if rng.gen_bool(0.3) {
                        [0.0, 1.0][rng.gen_range(0..2)]
                    } else {
                        rng.gen_range(-2.0..2.0)
                    }
                }),
            )
            .unwrap();
            let d = Vector::new(&x, DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let bound = j.j0_directional(&w, &d);
            for rule in [
                SubgradientSelection::MinNorm,
                SubgradientSelection::Midpoint,
                SubgradientSelection::DirectionAttaining,
            ] {
                let zeta = j.select(&w, rule, Some(&d));
                let pairing = crate::hilbert::inner(&zeta, &d);
                assert!(
                    pairing <= bound + 1e-12,
                    "pairing {pairing} exceeds j0 {bound}"
                );
            }
        }
    }

    #[test]
    fn j0_sublinear_in_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let weights = DVector::from_column_slice(&[1.0, 0.5]);
        let x = GramSpace::diagonal(weights.clone(), "X").unwrap();
        let j =
            SuperpositionFunctional::uniform(&x, weights, LocallyLipschitz1D::remark43()).unwrap();
        for _ in 0..100 {
            let w = Vector::new(&x, DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let d1 = Vector::new(&x, DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let d2 = Vector::new(&x, DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
            let lam = rng.gen_range(0.0..3.0);
            let homog = j.j0_directional(&w, &d1.scaled(lam));
            assert_relative_eq!(
                homog,
                lam * j.j0_directional(&w, &d1),
                epsilon = 1e-12,
                max_relative = 1e-12
            );
            let sub = j.j0_directional(&w, &(&d1 + &d2));
            assert!(sub <= j.j0_directional(&w, &d1) + j.j0_directional(&w, &d2) + 1e-12);
        }
    }

    #[test]
    fn radial_retraction_formula() {
        let x = GramSpace::euclidean(2, "X");
        let z = Vector::from_slice(&x, &[3.0, 4.0]).unwrap();
        let p = radial_retraction(&z, 1.0);
        assert_relative_eq!(p.coords()[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(p.coords()[1], 0.8, epsilon = 1e-15);

        let boundary = Vector::from_slice(&x, &[1.0, 0.0]).unwrap();
        assert_eq!(
            radial_retraction(&boundary, 1.0).coords().as_slice(),
            boundary.coords().as_slice()
        );
        assert_eq!(
            radial_retraction(&Vector::zeros(&x), 1.0).coords().as_slice(),
            &[0.0, 0.0]
        );
    }

    #[test]
    fn radial_retraction_nonexpansive_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let weights = DVector::from_column_slice(&[2.0, 0.5, 1.5]);
        let x = GramSpace::diagonal(weights, "X").unwrap();
        for _ in 0..100 {
            let a = Vector::new(&x, DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0))).unwrap();
            let b = Vector::new(&x, DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0))).unwrap();
            let pa = radial_retraction(&a, 1.2);
            let pb = radial_retraction(&b, 1.2);
            assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-12);
        }
    }

    #[test]
    fn truncated_subgradient_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let weights = DVector::from_column_slice(&[1.0, 1.0]);
        let x = GramSpace::diagonal(weights.clone(), "X").unwrap();
        let j =
            SuperpositionFunctional::uniform(&x, weights, LocallyLipschitz1D::remark43()).unwrap();
        let r2 = 1.5;
        let bound = j.alpha() + j.beta() * r2;
        for _ in 0..100 {
            let z =
                Vector::new(&x, DVector::from_fn(2, |_, _| rng.gen_range(-15.0..15.0))).unwrap();
            let f = truncated_subgradient(&j, &z, r2, SubgradientSelection::MinNorm, None);
            assert!(f.norm() <= bound + 1e-9);
            // Remark potential: every nodal subgradient lies in [0, 1].
            assert!(f.coords().amax() <= 1.0 + 1e-12);
        }
        // Inside the ball the retraction is inactive.
        let z = Vector::from_slice(&x, &[0.5, 0.9]).unwrap();
        let f = truncated_subgradient(&j, &z, r2, SubgradientSelection::MinNorm, None);
        let direct = j.select(&z, SubgradientSelection::MinNorm, None);
        assert_eq!(f.coords().as_slice(), direct.coords().as_slice());
    }

    #[test]
    fn growth_audit_sampled() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let weights = DVector::from_column_slice(&[0.4, 1.1, 0.9]);
        let x = GramSpace::diagonal(weights.clone(), "X").unwrap();
        for h in [
            LocallyLipschitz1D::remark43(),
            LocallyLipschitz1D::abs(),
            LocallyLipschitz1D::smooth_quad(),
        ] {
            let j = SuperpositionFunctional::uniform(&x, weights.clone(), h).unwrap();
            for _ in 0..100 {
                let w =
                    Vector::new(&x, DVector::from_fn(3, |_, _| rng.gen_range(-4.0..4.0))).unwrap();
                for rule in [
                    SubgradientSelection::MinNorm,
                    SubgradientSelection::Midpoint,
                ] {
                    let zeta = j.select(&w, rule, None);
                    assert!(zeta.norm() <= j.alpha() + j.beta() * w.norm() + 1e-10);
                }
            }
        }
    }

    #[test]
    fn witness_found_for_remark43() {
        let h = LocallyLipschitz1D::remark43();
        let grid = WitnessSearchGrid::default();
        // m = 5: violations exist for pairs (1 - 1/n, 1 + 1/n) once n > 11.
        // The most violating pair may sit exactly on the breakpoint (the
        // left slope 1 is admissible there), so the bracket is r <= 1 < s.
        let w = relaxed_monotonicity_witness(&h, 5.0, &grid).expect("violation must exist");
        assert!(w.r <= 1.0 && w.s > 1.0, "pair must bracket 1: {w:?}");
        assert!(w.violation < 0.0);
        // The specific pair with n = 12 is itself violating: worst-case value
        // (zeta_r - zeta_s)(r - s) + m (r-s)^2 = -(2/12)(1 - 11/12).
        let (r, s) = (1.0 - 1.0 / 12.0, 1.0 + 1.0 / 12.0);
        let (lo_r, _) = h.interval_subdifferential(r);
        let (_, hi_s) = h.interval_subdifferential(s);
        let v = (lo_r - hi_s) * (r - s) + 5.0 * (r - s) * (r - s);
        assert_relative_eq!(v, -(2.0 / 12.0) * (1.0 - 11.0 / 12.0), epsilon = 1e-15);
        assert!(v < 0.0);

        // m = 0 (plain monotonicity) is violated as well.
        assert!(relaxed_monotonicity_witness(&h, 0.0, &grid).is_some());
    }

    #[test]
    fn no_witness_for_convex_potential() {
        let h = LocallyLipschitz1D::smooth_quad();
        let grid = WitnessSearchGrid::default();
        for m in [0.0, 1.0, 5.0, 50.0] {
            assert!(relaxed_monotonicity_witness(&h, m, &grid).is_none());
        }
        let habs = LocallyLipschitz1D::abs();
        assert!(relaxed_monotonicity_witness(&habs, 0.0, &grid).is_none());
    }

    #[test]
    fn by_key_roundtrip() {
        assert!(LocallyLipschitz1D::by_key("remark43").is_ok());
        assert!(LocallyLipschitz1D::by_key("abs").is_ok());
        assert!(LocallyLipschitz1D::by_key("smooth-quad").is_ok());
        assert!(LocallyLipschitz1D::by_key("nope").is_err());
    }

    #[test]
    fn scaled_potential_growth() {
        let h = LocallyLipschitz1D::remark43()
            .with_growth(0.0, 1.0)
            .unwrap()
            .scaled(0.25)
            .unwrap();
        assert_eq!(h.growth(), (0.0, 0.25));
        assert_relative_eq!(h.value(0.5), 0.25 * 0.125);
        let (lo, hi) = h.interval_subdifferential(1.0);
        assert_relative_eq!(lo, 0.0);
        assert_relative_eq!(hi, 0.25);
    }
}
