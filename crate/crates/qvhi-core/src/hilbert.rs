//! Finite-dimensional Hilbert space primitives.
//!
//! A space is a symmetric positive-definite Gram matrix; every norm, adjoint
//! and dual pairing below is taken with respect to it. Primal vectors store
//! plain coordinates; dual vectors store functional coordinates, so the
//! pairing `⟨g, v⟩` is an ordinary dot product and dual norms go through one
//! Gram solve. Keeping the V/V* distinction explicit is what makes adjoints
//! correct under non-identity metrics (FEM stiffness as the V-gram).

use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

type Cholesky = nalgebra::linalg::Cholesky<f64, Dyn>;

/// Relative symmetry tolerance for Gram matrices.
const GRAM_SYMMETRY_TOL: f64 = 1e-12;
/// Relative eigenvalue tolerance of the operator-norm power iteration.
const POWER_ITERATION_TOL: f64 = 1e-8;
const POWER_ITERATION_MAX: usize = 10_000;

/// A finite-dimensional Hilbert space given by an SPD Gram matrix.
///
/// The Cholesky factorization is computed at construction and reused by every
/// Gram solve on this space.
pub struct GramSpace {
    dim: usize,
    gram: DMatrix<f64>,
    label: String,
    diagonal: bool,
    chol: Cholesky,
    euclid_lmax: OnceLock<f64>,
}

/// Shared handle to a space. Vectors hold one of these; spaces are compared
/// by identity, not by matrix contents.
pub type SpaceRef = Arc<GramSpace>;

impl GramSpace {
    /// Builds a space from an SPD Gram matrix. Fails if the matrix is not
    /// square, not symmetric within `1e-12` relative tolerance, has
    /// non-finite entries, or has no Cholesky factorization (not SPD).
    pub fn new(gram: DMatrix<f64>, label: &str) -> Result<SpaceRef> {
        let dim = gram.nrows();
        if dim == 0 || gram.ncols() != dim {
            return Err(Error::InvalidData(format!(
                "gram matrix of `{label}` must be square and nonempty, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let mut scale: f64 = 0.0;
        for v in gram.iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("gram matrix of `{label}`"),
                });
            }
            scale = scale.max(v.abs());
        }
        let mut diagonal = true;
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (gram[(i, j)] - gram[(j, i)]).abs() > GRAM_SYMMETRY_TOL * scale.max(1.0) {
                    return Err(Error::NotSpd {
                        label: label.to_string(),
                    });
                }
                if gram[(i, j)] != 0.0 || gram[(j, i)] != 0.0 {
                    diagonal = false;
                }
            }
        }
        let chol = Cholesky::new(gram.clone()).ok_or_else(|| Error::NotSpd {
            label: label.to_string(),
        })?;
        Ok(Arc::new(GramSpace {
            dim,
            gram,
            label: label.to_string(),
            diagonal,
            chol,
            euclid_lmax: OnceLock::new(),
        }))
    }

    /// Euclidean space: identity Gram matrix.
    pub fn euclidean(dim: usize, label: &str) -> SpaceRef {
        GramSpace::new(DMatrix::identity(dim, dim), label).expect("identity gram is SPD")
    }

    /// Space with a diagonal Gram matrix (all entries must be positive).
    pub fn diagonal(diag: DVector<f64>, label: &str) -> Result<SpaceRef> {
        GramSpace::new(DMatrix::from_diagonal(&diag), label)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Whether the Gram matrix is diagonal (several projections and proxes
    /// have exact one-pass forms in that case).
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }
}

impl std::fmt::Debug for GramSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GramSpace")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Panics unless `a` and `b` are the same space object.
#[track_caller]
pub fn assert_same_space(a: &SpaceRef, b: &SpaceRef) {
    assert!(
        Arc::ptr_eq(a, b),
        "space mismatch: `{}` (dim {}) vs `{}` (dim {})",
        a.label(),
        a.dim(),
        b.label(),
        b.dim()
    );
}

/// Element of a [`GramSpace`] in primal coordinates.
#[derive(Clone, Debug)]
pub struct Vector {
    coords: DVector<f64>,
    space: SpaceRef,
}

/// Functional on a [`GramSpace`]: pairing with a [`Vector`] is the plain dot
/// product of coordinates.
#[derive(Clone, Debug)]
pub struct DualVector {
    coords: DVector<f64>,
    space: SpaceRef,
}

impl Vector {
    /// Wraps coordinates, checking length and finiteness.
    pub fn new(space: &SpaceRef, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != space.dim() {
            return Err(Error::InvalidData(format!(
                "vector length {} does not match space `{}` of dim {}",
                coords.len(),
                space.label(),
                space.dim()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("vector in `{}`", space.label()),
            });
        }
        Ok(Vector {
            coords,
            space: space.clone(),
        })
    }

    pub fn from_slice(space: &SpaceRef, coords: &[f64]) -> Result<Self> {
        Vector::new(space, DVector::from_column_slice(coords))
    }

    pub fn zeros(space: &SpaceRef) -> Self {
        Vector {
            coords: DVector::zeros(space.dim()),
            space: space.clone(),
        }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector {
            coords: &self.coords * c,
            space: self.space.clone(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Vector) -> Vector {
        assert_same_space(&self.space, &other.space);
        let mut coords = self.coords.clone();
        coords.axpy(c, &other.coords, 1.0);
        Vector {
            coords,
            space: self.space.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        inner(self, self).max(0.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|v| v.is_finite())
    }
}

impl DualVector {
    pub fn new(space: &SpaceRef, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != space.dim() {
            return Err(Error::InvalidData(format!(
                "dual vector length {} does not match space `{}` of dim {}",
                coords.len(),
                space.label(),
                space.dim()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("dual vector on `{}`", space.label()),
            });
        }
        Ok(DualVector {
            coords,
            space: space.clone(),
        })
    }

    pub fn from_slice(space: &SpaceRef, coords: &[f64]) -> Result<Self> {
        DualVector::new(space, DVector::from_column_slice(coords))
    }

    pub fn zeros(space: &SpaceRef) -> Self {
        DualVector {
            coords: DVector::zeros(space.dim()),
            space: space.clone(),
        }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn scaled(&self, c: f64) -> DualVector {
        DualVector {
            coords: &self.coords * c,
            space: self.space.clone(),
        }
    }

    /// Duality pairing `⟨g, v⟩`: a plain dot product by the storage
    /// convention.
    pub fn pair(&self, v: &Vector) -> f64 {
        assert_same_space(&self.space, &v.space);
        self.coords.dot(&v.coords)
    }

    /// Dual norm `‖g‖_* = sqrt(gᵀ G⁻¹ g)` via one Gram solve.
    pub fn norm(&self) -> f64 {
        let s = riesz(self);
        self.coords.dot(s.coords()).max(0.0).sqrt()
    }
}

macro_rules! impl_linear_ops {
    ($ty:ident) => {
        impl std::ops::Add for &$ty {
            type Output = $ty;
            fn add(self, rhs: &$ty) -> $ty {
                assert_same_space(&self.space, &rhs.space);
                $ty {
                    coords: &self.coords + &rhs.coords,
                    space: self.space.clone(),
                }
            }
        }
        impl std::ops::Sub for &$ty {
            type Output = $ty;
            fn sub(self, rhs: &$ty) -> $ty {
                assert_same_space(&self.space, &rhs.space);
                $ty {
                    coords: &self.coords - &rhs.coords,
                    space: self.space.clone(),
                }
            }
        }
        impl std::ops::Neg for &$ty {
            type Output = $ty;
            fn neg(self) -> $ty {
                $ty {
                    coords: -&self.coords,
                    space: self.space.clone(),
                }
            }
        }
        impl std::ops::Mul<f64> for &$ty {
            type Output = $ty;
            fn mul(self, c: f64) -> $ty {
                self.scaled(c)
            }
        }
    };
}

impl_linear_ops!(Vector);
impl_linear_ops!(DualVector);

/// Inner product `uᵀ G v` of the common space.
pub fn inner(u: &Vector, v: &Vector) -> f64 {
    assert_same_space(&u.space, &v.space);
    (u.space.gram() * &v.coords).dot(&u.coords)
}

/// Riesz representative: the solution `s` of `G s = g`, so that
/// `⟨s, v⟩ = g(v)` for every `v`.
pub fn riesz(g: &DualVector) -> Vector {
    let coords = g.space.chol.solve(&g.coords);
    Vector {
        coords,
        space: g.space.clone(),
    }
}

/// Largest eigenvalue of the Gram matrix itself (Euclidean), used as a
/// Lipschitz constant for gradient steps of `z ↦ ½‖z−x‖²_G`. Cached.
pub fn euclid_gram_lmax(space: &SpaceRef) -> f64 {
    *space.euclid_lmax.get_or_init(|| {
        if space.is_diagonal() {
            return space.gram().diagonal().max();
        }
        let mut v = DVector::from_element(space.dim(), 1.0 / (space.dim() as f64).sqrt());
        let mut lambda = 0.0f64;
        for _ in 0..POWER_ITERATION_MAX {
            let mut y = space.gram() * &v;
            let norm = y.norm();
            if norm == 0.0 {
                break;
            }
            y /= norm;
            let next = (space.gram() * &y).dot(&y);
            let done = (next - lambda).abs() <= POWER_ITERATION_TOL * next.abs().max(1e-300);
            lambda = next;
            v = y;
            if done {
                break;
            }
        }
        // Rayleigh quotients underestimate; a 1% pad keeps step sizes valid.
        lambda * 1.01
    })
}

/// Linear map between two Gram spaces, stored densely.
pub struct LinearMap {
    matrix: DMatrix<f64>,
    domain: SpaceRef,
    codomain: SpaceRef,
    norm_cache: OnceLock<f64>,
}

impl LinearMap {
    pub fn new(domain: &SpaceRef, codomain: &SpaceRef, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != codomain.dim() || matrix.ncols() != domain.dim() {
            return Err(Error::InvalidData(format!(
                "linear map shape {}x{} does not match codomain `{}` (dim {}) x domain `{}` (dim {})",
                matrix.nrows(),
                matrix.ncols(),
                codomain.label(),
                codomain.dim(),
                domain.label(),
                domain.dim()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "linear map matrix".to_string(),
            });
        }
        Ok(LinearMap {
            matrix,
            domain: domain.clone(),
            codomain: codomain.clone(),
            norm_cache: OnceLock::new(),
        })
    }

    pub fn identity(space: &SpaceRef) -> Self {
        LinearMap::new(space, space, DMatrix::identity(space.dim(), space.dim()))
            .expect("identity map is well formed")
    }

    /// Coordinate identity between two spaces of the same dimension (the
    /// metrics may differ, so this is not an isometry in general).
    pub fn identity_between(domain: &SpaceRef, codomain: &SpaceRef) -> Result<Self> {
        if domain.dim() != codomain.dim() {
            return Err(Error::InvalidData(format!(
                "identity map needs equal dims, got {} and {}",
                domain.dim(),
                codomain.dim()
            )));
        }
        LinearMap::new(
            domain,
            codomain,
            DMatrix::identity(domain.dim(), domain.dim()),
        )
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn domain(&self) -> &SpaceRef {
        &self.domain
    }

    pub fn codomain(&self) -> &SpaceRef {
        &self.codomain
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        assert_same_space(&self.domain, &v.space);
        Vector {
            coords: &self.matrix * &v.coords,
            space: self.codomain.clone(),
        }
    }

    /// Adjoint action on a codomain element `w`: the functional
    /// `v ↦ ⟨w, Mv⟩_X`, i.e. coordinates `Mᵀ G_X w`.
    pub fn adjoint_apply(&self, w: &Vector) -> DualVector {
        assert_same_space(&self.codomain, &w.space);
        let weighted = self.codomain.gram() * &w.coords;
        DualVector {
            coords: self.matrix.tr_mul(&weighted),
            space: self.domain.clone(),
        }
    }

    /// Operator norm `sup ‖Mv‖_X / ‖v‖_V`: square root of the largest
    /// generalized eigenvalue of `Mᵀ G_X M v = λ G_V v`, by power iteration
    /// with Gram solves (relative eigenvalue tolerance 1e-8, cap 10 000).
    pub fn operator_norm(&self) -> Result<f64> {
        if let Some(v) = self.norm_cache.get() {
            return Ok(*v);
        }
        if self.matrix.iter().all(|v| *v == 0.0) {
            let _ = self.norm_cache.set(0.0);
            return Ok(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
        let mut lambda = f64::NAN;
        for _attempt in 0..4 {
            let mut v = random_direction(&self.domain, &mut rng);
            lambda = f64::NAN;
            for it in 0..POWER_ITERATION_MAX {
                let mv = self.apply(&v);
                let next = inner(&mv, &mv).max(0.0);
                if next == 0.0 {
                    // Start vector lies in the kernel; try a fresh one.
                    lambda = f64::NAN;
                    break;
                }
                if (next - lambda).abs() <= POWER_ITERATION_TOL * next {
                    let _ = self.norm_cache.set(next.sqrt());
                    return Ok(next.sqrt());
                }
                lambda = next;
                let pulled = riesz(&self.adjoint_apply(&mv));
                let norm = pulled.norm();
                if norm == 0.0 {
                    lambda = f64::NAN;
                    break;
                }
                v = pulled.scaled(1.0 / norm);
                if it + 1 == POWER_ITERATION_MAX {
                    return Err(Error::PowerIterationStalled {
                        iterations: POWER_ITERATION_MAX,
                        tol: POWER_ITERATION_TOL,
                        last: lambda,
                    });
                }
            }
        }
        Err(Error::PowerIterationStalled {
            iterations: POWER_ITERATION_MAX,
            tol: POWER_ITERATION_TOL,
            last: lambda,
        })
    }
}

impl std::fmt::Debug for LinearMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearMap")
            .field("domain", &self.domain.label())
            .field("codomain", &self.codomain.label())
            .field("shape", &(self.matrix.nrows(), self.matrix.ncols()))
            .finish()
    }
}

/// Nonlinear operator oracle `A: V → V*` with claimed strong-monotonicity and
/// Lipschitz constants. The oracle must be a pure function of its input.
/// Clones share the oracle.
#[derive(Clone)]
pub struct NonlinearOperator {
    op: Arc<dyn Fn(&Vector) -> DualVector + Send + Sync>,
    m_strong: f64,
    lipschitz: f64,
    domain: SpaceRef,
}

impl NonlinearOperator {
    pub fn new(
        domain: &SpaceRef,
        m_strong: f64,
        lipschitz: f64,
        op: impl Fn(&Vector) -> DualVector + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(m_strong >= 0.0) || !(lipschitz > 0.0) || m_strong > lipschitz {
            return Err(Error::InvalidData(format!(
                "operator constants must satisfy 0 <= m <= L with L > 0, got m = {m_strong}, L = {lipschitz}"
            )));
        }
        Ok(NonlinearOperator {
            op: Arc::new(op),
            m_strong,
            lipschitz,
            domain: domain.clone(),
        })
    }

    /// Linear operator `u ↦ S u` (dual coordinates), with caller-supplied
    /// constants.
    pub fn linear(
        domain: &SpaceRef,
        matrix: DMatrix<f64>,
        m_strong: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        if matrix.nrows() != domain.dim() || matrix.ncols() != domain.dim() {
            return Err(Error::InvalidData(
                "linear operator matrix must be dim x dim".to_string(),
            ));
        }
        let space = domain.clone();
        NonlinearOperator::new(domain, m_strong, lipschitz, move |v: &Vector| DualVector {
            coords: &matrix * v.coords(),
            space: space.clone(),
        })
    }

    /// The Riesz identity `A u = G u`: m = L = 1 in the space's own metric.
    pub fn gram_identity(domain: &SpaceRef) -> Self {
        let space = domain.clone();
        NonlinearOperator::new(domain, 1.0, 1.0, move |v: &Vector| DualVector {
            coords: space.gram() * v.coords(),
            space: space.clone(),
        })
        .expect("identity constants are valid")
    }

    pub fn apply(&self, v: &Vector) -> DualVector {
        assert_same_space(&self.domain, &v.space);
        let out = (self.op)(v);
        assert_same_space(&self.domain, &out.space);
        out
    }

    pub fn m_strong(&self) -> f64 {
        self.m_strong
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn domain(&self) -> &SpaceRef {
        &self.domain
    }
}

impl std::fmt::Debug for NonlinearOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearOperator")
            .field("domain", &self.domain.label())
            .field("m_strong", &self.m_strong)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// Gaussian direction normalized to unit V-norm.
pub fn random_direction(space: &SpaceRef, rng: &mut impl Rng) -> Vector {
    loop {
        let coords = DVector::from_fn(space.dim(), |_, _| {
            // Box-Muller keeps us independent of rand_distr.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        });
        let v = Vector {
            coords,
            space: space.clone(),
        };
        let n = v.norm();
        if n > 1e-12 {
            return v.scaled(1.0 / n);
        }
    }
}

/// Uniform sample from the V-metric ball of the given radius.
pub fn random_in_ball(space: &SpaceRef, radius: f64, rng: &mut impl Rng) -> Vector {
    let dir = random_direction(space, rng);
    let u: f64 = rng.gen_range(0.0..1.0);
    dir.scaled(radius * u.powf(1.0 / space.dim() as f64))
}

/// Sampled strong-monotonicity and Lipschitz witnesses for `A` over pairs in
/// the radius-ball: returns `(min ratio, max ratio)` of
/// `⟨Av₁−Av₂, v₁−v₂⟩/‖v₁−v₂‖²` and `‖Av₁−Av₂‖_*/‖v₁−v₂‖`. A witness, not a
/// proof; deterministic given the seed. Cauchy-Schwarz guarantees
/// `m_est ≤ L_est`.
pub fn estimate_constants(
    a: &NonlinearOperator,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> (f64, f64) {
    assert!(n_samples >= 2, "estimate_constants needs n_samples >= 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = a.domain();
    let mut m_est = f64::INFINITY;
    let mut l_est: f64 = 0.0;
    let mut taken = 0;
    while taken < n_samples {
        let v1 = random_in_ball(space, radius, &mut rng);
        let v2 = random_in_ball(space, radius, &mut rng);
        let d = &v1 - &v2;
        let dn2 = inner(&d, &d);
        if dn2 < 1e-24 {
            continue;
        }
        let da = &a.apply(&v1) - &a.apply(&v2);
        m_est = m_est.min(da.pair(&d) / dn2);
        l_est = l_est.max(da.norm() / dn2.sqrt());
        taken += 1;
    }
    (m_est, l_est)
}

/// Writes a dense matrix in the plain-text coordinate format:
/// a header line `rows cols nnz`, then one `i j value` triple per structural
/// nonzero, 0-indexed.
pub fn write_coord_matrix<W: Write>(out: &mut W, m: &DMatrix<f64>) -> Result<()> {
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), nnz)?;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(out, "{i} {j} {v}")?;
            }
        }
    }
    Ok(())
}

/// Reads a matrix in the coordinate format written by
/// [`write_coord_matrix`]. Duplicate entries accumulate.
pub fn read_coord_matrix<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty coordinate matrix file".to_string()))??;
    let mut parts = header.split_whitespace();
    let parse_dim = |s: Option<&str>| -> Result<usize> {
        s.ok_or_else(|| Error::Parse("coordinate header needs `rows cols nnz`".to_string()))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("bad coordinate header: {e}")))
    };
    let rows = parse_dim(parts.next())?;
    let cols = parse_dim(parts.next())?;
    let nnz = parse_dim(parts.next())?;
    let mut m = DMatrix::zeros(rows, cols);
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut p = trimmed.split_whitespace();
        let i: usize = p
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry line `{trimmed}`")))?;
        let j: usize = p
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry line `{trimmed}`")))?;
        let v: f64 = p
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry line `{trimmed}`")))?;
        if i >= rows || j >= cols {
            return Err(Error::Parse(format!(
                "entry ({i}, {j}) outside {rows}x{cols} matrix"
            )));
        }
        m[(i, j)] += v;
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Parse(format!(
            "coordinate header promised {nnz} entries, found {seen}"
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn space2(g: [[f64; 2]; 2]) -> SpaceRef {
        GramSpace::new(
            DMatrix::from_row_slice(2, 2, &[g[0][0], g[0][1], g[1][0], g[1][1]]),
            "V",
        )
        .unwrap()
    }

    #[test]
    fn inner_identity_orthogonal() {
        let s = GramSpace::euclidean(2, "V");
        let u = Vector::from_slice(&s, &[1.0, 0.0]).unwrap();
        let v = Vector::from_slice(&s, &[0.0, 1.0]).unwrap();
        assert_eq!(inner(&u, &v), 0.0);
    }

    #[test]
    fn inner_diagonal_metric() {
        let s = space2([[2.0, 0.0], [0.0, 3.0]]);
        let u = Vector::from_slice(&s, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(inner(&u, &u), 5.0, max_relative = 1e-14);
    }

    #[test]
    fn inner_matches_hand_assembled_stiffness() {
        // 1D stiffness of a 3-cell uniform mesh on [0,1], both ends fixed:
        // two free nodes, K = (1/h) [[2,-1],[-1,2]] with h = 1/3.
        let h = 1.0 / 3.0;
        let k = DMatrix::from_row_slice(2, 2, &[2.0 / h, -1.0 / h, -1.0 / h, 2.0 / h]);
        let s = GramSpace::new(k, "V").unwrap();
        let hat = Vector::from_slice(&s, &[1.0, 0.0]).unwrap();
        // Hat at x = 1/3: slope 3 on [0,1/3], slope -3 on [1/3,2/3]:
        // integral of slope^2 is 9/3 + 9/3 = 6.
        assert_relative_eq!(inner(&hat, &hat), 6.0, max_relative = 1e-14);
    }

    #[test]
    fn riesz_identity_and_diagonal() {
        let s = GramSpace::euclidean(2, "V");
        let g = DualVector::from_slice(&s, &[3.0, 4.0]).unwrap();
        let r = riesz(&g);
        assert_eq!(r.coords().as_slice(), &[3.0, 4.0]);

        let s = space2([[2.0, 0.0], [0.0, 2.0]]);
        let g = DualVector::from_slice(&s, &[2.0, 4.0]).unwrap();
        let r = riesz(&g);
        assert_relative_eq!(r.coords()[0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(r.coords()[1], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn riesz_residual_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = 6;
            let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let gram = &b * b.transpose() + DMatrix::identity(n, n) * 0.5;
            let s = GramSpace::new(gram.clone(), "V").unwrap();
            let g = DualVector::new(&s, DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)))
                .unwrap();
            let sol = riesz(&g);
            let res = &gram * sol.coords() - g.coords();
            assert!(res.amax() <= 1e-10, "residual {}", res.amax());
        }
    }

    #[test]
    fn riesz_roundtrip_gram_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let gram = &b * b.transpose() + DMatrix::identity(5, 5);
        let s = GramSpace::new(gram, "V").unwrap();
        for _ in 0..20 {
            let v = Vector::new(&s, DVector::from_fn(5, |_, _| rng.gen_range(-3.0..3.0))).unwrap();
            let g = DualVector::new(&s, s.gram() * v.coords()).unwrap();
            let back = riesz(&g);
            assert!((&back - &v).norm() <= 1e-10 * (1.0 + v.norm()));
        }
    }

    #[test]
    fn non_spd_gram_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]); // eigenvalues 3, -1
        assert!(matches!(
            GramSpace::new(m, "bad"),
            Err(Error::NotSpd { .. })
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GramSpace::new(asym, "asym").is_err());
    }

    #[test]
    #[should_panic(expected = "space mismatch")]
    fn inner_space_mismatch_panics() {
        let a = GramSpace::euclidean(2, "A");
        let b = GramSpace::euclidean(2, "B");
        let u = Vector::zeros(&a);
        let v = Vector::zeros(&b);
        let _ = inner(&u, &v);
    }

    #[test]
    fn adjoint_identity_and_selection() {
        let v = GramSpace::euclidean(2, "V");
        let m = LinearMap::identity(&v);
        let w = Vector::from_slice(&v, &[1.0, 2.0]).unwrap();
        let g = m.adjoint_apply(&w);
        assert_eq!(g.coords().as_slice(), &[1.0, 2.0]);

        // Row selection of the first coordinate: M = [1 0], X = R.
        let x = GramSpace::euclidean(1, "X");
        let sel = LinearMap::new(&v, &x, DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let w = Vector::from_slice(&x, &[5.0]).unwrap();
        let g = sel.adjoint_apply(&w);
        assert_eq!(g.coords().as_slice(), &[5.0, 0.0]);
    }

    #[test]
    fn adjoint_identity_random_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bv = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let gv = &bv * bv.transpose() + DMatrix::identity(4, 4);
        let bx = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let gx = &bx * bx.transpose() + DMatrix::identity(3, 3);
        let v_space = GramSpace::new(gv, "V").unwrap();
        let x_space = GramSpace::new(gx, "X").unwrap();
        let m = LinearMap::new(
            &v_space,
            &x_space,
            DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-2.0..2.0)),
        )
        .unwrap();
        for _ in 0..50 {
            let w = Vector::new(
                &x_space,
                DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0)),
            )
            .unwrap();
            let v = Vector::new(
                &v_space,
                DVector::from_fn(4, |_, _| rng.gen_range(-2.0..2.0)),
            )
            .unwrap();
            let lhs = m.adjoint_apply(&w).pair(&v);
            let rhs = inner(&w, &m.apply(&v));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn operator_norm_identity_and_scaling() {
        let v = GramSpace::euclidean(3, "V");
        let id = LinearMap::identity(&v);
        assert_relative_eq!(id.operator_norm().unwrap(), 1.0, max_relative = 1e-7);
        let double = LinearMap::new(&v, &v, DMatrix::identity(3, 3) * 2.0).unwrap();
        assert_relative_eq!(double.operator_norm().unwrap(), 2.0, max_relative = 1e-7);
    }

    #[test]
    fn operator_norm_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = GramSpace::euclidean(4, "V");
        let x = GramSpace::euclidean(3, "X");
        let mat = DMatrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
        for c in [0.5, -2.0, 3.25] {
            let m = LinearMap::new(&v, &x, mat.clone()).unwrap();
            let mc = LinearMap::new(&v, &x, &mat * c).unwrap();
            assert_relative_eq!(
                mc.operator_norm().unwrap(),
                c.abs() * m.operator_norm().unwrap(),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn operator_norm_zero_map() {
        let v = GramSpace::euclidean(3, "V");
        let z = LinearMap::new(&v, &v, DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(z.operator_norm().unwrap(), 0.0);
    }

    #[test]
    fn estimate_constants_identity_and_scaled() {
        let v = GramSpace::euclidean(3, "V");
        let a = NonlinearOperator::gram_identity(&v);
        let (m, l) = estimate_constants(&a, 50, 2.0, 1);
        assert_relative_eq!(m, 1.0, epsilon = 1e-9);
        assert_relative_eq!(l, 1.0, epsilon = 1e-9);

        let sp = v.clone();
        let a2 = NonlinearOperator::new(&v, 2.0, 2.0, move |u: &Vector| DualVector {
            coords: sp.gram() * u.coords() * 2.0,
            space: sp.clone(),
        })
        .unwrap();
        let (m, l) = estimate_constants(&a2, 50, 2.0, 1);
        assert_relative_eq!(m, 2.0, epsilon = 1e-9);
        assert_relative_eq!(l, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn estimate_constants_diagonal_range() {
        let v = GramSpace::euclidean(2, "V");
        let a = NonlinearOperator::linear(
            &v,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]),
            1.0,
            3.0,
        )
        .unwrap();
        let (m, l) = estimate_constants(&a, 200, 1.0, 5);
        assert!((1.0..=3.0).contains(&m), "m_est = {m}");
        assert!((1.0..=3.0).contains(&l), "l_est = {l}");
        assert!(m <= l);
    }

    #[test]
    fn coord_matrix_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = DMatrix::from_fn(4, 3, |i, j| {
            if (i + j) % 2 == 0 {
                rng.gen_range(-5.0..5.0)
            } else {
                0.0
            }
        });
        let mut buf = Vec::new();
        write_coord_matrix(&mut buf, &m).unwrap();
        let back = read_coord_matrix(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn coord_matrix_bad_header() {
        let r = read_coord_matrix(std::io::Cursor::new(b"2 2\n".to_vec()));
        assert!(matches!(r, Err(Error::Parse(_))));
    }
}
