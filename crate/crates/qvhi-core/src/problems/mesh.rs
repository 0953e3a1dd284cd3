//! Structured P1 meshes on the unit interval and unit square, boundary part
//! labeling, and the assembled FEM spaces (stiffness V-metric, lumped
//! domain/boundary masses).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::hilbert::{GramSpace, SpaceRef, Vector};
use crate::{Error, Result};

/// Boundary part tags. `Dirichlet` is the homogeneous essential part
/// (Γ₁ / Σ₁), `Flux` carries the semipermeability relation (Γ₂ / Σ₂), and
/// `Obstacle` carries the unilateral bound (Σ₃).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPart {
    Dirichlet,
    Flux,
    Obstacle,
}

/// Named boundary presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundarySpec {
    /// Dirichlet on left and right; flux on the rest (empty in 1D).
    InteriorModel,
    /// Dirichlet everywhere.
    FullDirichlet,
    /// 2D only: Dirichlet on bottom and left, flux on top, obstacle on the
    /// right edge.
    BoundaryModel,
}

#[derive(Clone, Debug)]
pub enum Cells {
    Intervals(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

/// A boundary facet: a node in 1D, an edge in 2D.
#[derive(Clone, Debug)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    pub part: BoundaryPart,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub dim: u8,
    pub nodes: Vec<[f64; 2]>,
    pub cells: Cells,
    pub boundary: Vec<BoundaryFacet>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        match &self.cells {
            Cells::Intervals(c) => c.len(),
            Cells::Triangles(c) => c.len(),
        }
    }

    pub fn cell_nodes(&self, idx: usize) -> Vec<usize> {
        match &self.cells {
            Cells::Intervals(c) => c[idx].to_vec(),
            Cells::Triangles(c) => c[idx].to_vec(),
        }
    }

    pub fn cell_measure(&self, idx: usize) -> f64 {
        match &self.cells {
            Cells::Intervals(c) => {
                let [a, b] = c[idx];
                (self.nodes[b][0] - self.nodes[a][0]).abs()
            }
            Cells::Triangles(c) => {
                let [a, b, d] = c[idx];
                triangle_area(self.nodes[a], self.nodes[b], self.nodes[d])
            }
        }
    }

    pub fn cell_centroid(&self, idx: usize) -> [f64; 2] {
        let ns = self.cell_nodes(idx);
        let mut c = [0.0, 0.0];
        for &n in &ns {
            c[0] += self.nodes[n][0];
            c[1] += self.nodes[n][1];
        }
        [c[0] / ns.len() as f64, c[1] / ns.len() as f64]
    }

    /// Gradients of the nodal basis functions on a cell (constant for P1).
    pub fn cell_basis_gradients(&self, idx: usize) -> Vec<[f64; 2]> {
        match &self.cells {
            Cells::Intervals(c) => {
                let [a, b] = c[idx];
                let h = self.nodes[b][0] - self.nodes[a][0];
                vec![[-1.0 / h, 0.0], [1.0 / h, 0.0]]
            }
            Cells::Triangles(c) => {
                let [a, b, d] = c[idx];
                let (pa, pb, pd) = (self.nodes[a], self.nodes[b], self.nodes[d]);
                let two_a = 2.0 * triangle_area(pa, pb, pd);
                // grad lambda_i = rot90(opposite edge) / (2 area), oriented
                // for a counterclockwise triangle.
                let rot = |p: [f64; 2], q: [f64; 2]| [p[1] - q[1], q[0] - p[0]];
                vec![
                    [rot(pb, pd)[0] / two_a, rot(pb, pd)[1] / two_a],
                    [rot(pd, pa)[0] / two_a, rot(pd, pa)[1] / two_a],
                    [rot(pa, pb)[0] / two_a, rot(pa, pb)[1] / two_a],
                ]
            }
        }
    }

    pub fn facet_measure(&self, facet: &BoundaryFacet) -> f64 {
        if facet.nodes.len() == 1 {
            1.0
        } else {
            let a = self.nodes[facet.nodes[0]];
            let b = self.nodes[facet.nodes[1]];
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        }
    }

    /// Nodes incident to any facet of the part.
    pub fn part_nodes(&self, part: BoundaryPart) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary
            .iter()
            .filter(|f| f.part == part)
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn triangle_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Uniform interval mesh (1D) or structured right-triangle mesh on the unit
/// square (2D) with boundary parts assigned by the preset.
pub fn build_mesh(dim: u8, n_cells: usize, spec: BoundarySpec) -> Result<Mesh> {
    if n_cells < 2 {
        return Err(Error::InvalidData(
            "build_mesh needs n_cells >= 2".to_string(),
        ));
    }
    match dim {
        1 => build_mesh_1d(n_cells, spec),
        2 => build_mesh_2d(n_cells, spec),
        d => Err(Error::InvalidData(format!("mesh dim must be 1 or 2, got {d}"))),
    }
}

fn build_mesh_1d(n: usize, spec: BoundarySpec) -> Result<Mesh> {
    let h = 1.0 / n as f64;
    let nodes: Vec<[f64; 2]> = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
    let cells: Vec<[usize; 2]> = (0..n).map(|i| [i, i + 1]).collect();
    let boundary = match spec {
        BoundarySpec::InteriorModel | BoundarySpec::FullDirichlet => vec![
            BoundaryFacet {
                nodes: vec![0],
                part: BoundaryPart::Dirichlet,
            },
            BoundaryFacet {
                nodes: vec![n],
                part: BoundaryPart::Dirichlet,
            },
        ],
        BoundarySpec::BoundaryModel => {
            return Err(Error::InvalidData(
                "the boundary model needs three boundary parts; use dim = 2".to_string(),
            ))
        }
    };
    Ok(Mesh {
        dim: 1,
        nodes,
        cells: Cells::Intervals(cells),
        boundary,
    })
}

fn build_mesh_2d(n: usize, spec: BoundarySpec) -> Result<Mesh> {
    let h = 1.0 / n as f64;
    let np = n + 1;
    let idx = |ix: usize, iy: usize| iy * np + ix;
    let mut nodes = Vec::with_capacity(np * np);
    for iy in 0..np {
        for ix in 0..np {
            nodes.push([ix as f64 * h, iy as f64 * h]);
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for iy in 0..n {
        for ix in 0..n {
            let bl = idx(ix, iy);
            let br = idx(ix + 1, iy);
            let tl = idx(ix, iy + 1);
            let tr = idx(ix + 1, iy + 1);
            cells.push([bl, br, tr]); // lower-right triangle, CCW
            cells.push([bl, tr, tl]); // upper-left triangle, CCW
        }
    }
    let mut boundary = Vec::with_capacity(4 * n);
    let part_of = |side: &str| -> BoundaryPart {
        match (spec, side) {
            (BoundarySpec::FullDirichlet, _) => BoundaryPart::Dirichlet,
            (BoundarySpec::InteriorModel, "left" | "right") => BoundaryPart::Dirichlet,
            (BoundarySpec::InteriorModel, _) => BoundaryPart::Flux,
            (BoundarySpec::BoundaryModel, "bottom" | "left") => BoundaryPart::Dirichlet,
            (BoundarySpec::BoundaryModel, "top") => BoundaryPart::Flux,
            (BoundarySpec::BoundaryModel, _) => BoundaryPart::Obstacle,
        }
    };
    for k in 0..n {
        boundary.push(BoundaryFacet {
            nodes: vec![idx(k, 0), idx(k + 1, 0)],
            part: part_of("bottom"),
        });
        boundary.push(BoundaryFacet {
            nodes: vec![idx(k, n), idx(k + 1, n)],
            part: part_of("top"),
        });
        boundary.push(BoundaryFacet {
            nodes: vec![idx(0, k), idx(0, k + 1)],
            part: part_of("left"),
        });
        boundary.push(BoundaryFacet {
            nodes: vec![idx(n, k), idx(n, k + 1)],
            part: part_of("right"),
        });
    }
    Ok(Mesh {
        dim: 2,
        nodes,
        cells: Cells::Triangles(cells),
        boundary,
    })
}

/// Assembled discrete spaces for one mesh: the free-node stiffness V-metric,
/// the lumped nodal L²(Ω) space over all nodes, and (when a flux part
/// exists) the lumped boundary mass on the non-Dirichlet flux nodes.
pub struct FEMSpace {
    pub mesh: Arc<Mesh>,
    /// Non-Dirichlet node indices, sorted.
    pub free_nodes: Vec<usize>,
    free_position: Vec<Option<usize>>,
    /// Stiffness Gram space on the free nodes (`‖v‖_V = ‖∇v‖_{L²}`).
    pub space_v: SpaceRef,
    /// Lumped-mass Gram space over all nodes (X = L²(Ω)).
    pub space_x_domain: SpaceRef,
    pub domain_weights: DVector<f64>,
    /// Non-Dirichlet nodes on the flux part, sorted.
    pub flux_nodes: Vec<usize>,
    /// Lumped boundary mass on the flux nodes (X = L²(Σ₂)), if any.
    pub space_x_boundary: Option<SpaceRef>,
    pub boundary_weights: Option<DVector<f64>>,
    /// Non-Dirichlet nodes on the obstacle part, sorted.
    pub obstacle_nodes: Vec<usize>,
}

impl FEMSpace {
    pub fn build(mesh: Mesh) -> Result<Arc<FEMSpace>> {
        let mesh = Arc::new(mesh);
        let n = mesh.n_nodes();
        let dirichlet = mesh.part_nodes(BoundaryPart::Dirichlet);
        if dirichlet.is_empty() {
            return Err(Error::EmptyBoundaryPart {
                part: "Dirichlet".to_string(),
            });
        }
        let is_dirichlet: Vec<bool> = {
            let mut v = vec![false; n];
            for d in &dirichlet {
                v[*d] = true;
            }
            v
        };
        let free_nodes: Vec<usize> = (0..n).filter(|i| !is_dirichlet[*i]).collect();
        let mut free_position = vec![None; n];
        for (pos, g) in free_nodes.iter().enumerate() {
            free_position[*g] = Some(pos);
        }

        // Global stiffness, then the free-node restriction.
        let mut stiffness = DMatrix::zeros(n, n);
        let mut lumped = DVector::zeros(n);
        for c in 0..mesh.n_cells() {
            let ns = mesh.cell_nodes(c);
            let grads = mesh.cell_basis_gradients(c);
            let measure = mesh.cell_measure(c);
            if measure <= 0.0 {
                return Err(Error::InvalidData(format!(
                    "cell {c} is degenerate or negatively oriented"
                )));
            }
            for (i, &gi) in ns.iter().enumerate() {
                lumped[gi] += measure / ns.len() as f64;
                for (k, &gk) in ns.iter().enumerate() {
                    stiffness[(gi, gk)] +=
                        measure * (grads[i][0] * grads[k][0] + grads[i][1] * grads[k][1]);
                }
            }
        }
        let nf = free_nodes.len();
        let mut k_free = DMatrix::zeros(nf, nf);
        for (i, &gi) in free_nodes.iter().enumerate() {
            for (k, &gk) in free_nodes.iter().enumerate() {
                k_free[(i, k)] = stiffness[(gi, gk)];
            }
        }
        let space_v = GramSpace::new(k_free, "V")?;
        let space_x_domain = GramSpace::diagonal(lumped.clone(), "X")?;

        let flux_nodes: Vec<usize> = mesh
            .part_nodes(BoundaryPart::Flux)
            .into_iter()
            .filter(|i| !is_dirichlet[*i])
            .collect();
        let (space_x_boundary, boundary_weights) = if flux_nodes.is_empty() {
            (None, None)
        } else {
            let mut pos = vec![None; n];
            for (p, g) in flux_nodes.iter().enumerate() {
                pos[*g] = Some(p);
            }
            let mut w = DVector::zeros(flux_nodes.len());
            for facet in mesh.boundary.iter().filter(|f| f.part == BoundaryPart::Flux) {
                let share = mesh.facet_measure(facet) / facet.nodes.len() as f64;
                for nd in &facet.nodes {
                    if let Some(p) = pos[*nd] {
                        w[p] += share;
                    }
                }
            }
            if w.iter().any(|x| *x <= 0.0) {
                return Err(Error::InvalidData(
                    "a flux node received no boundary mass".to_string(),
                ));
            }
            (Some(GramSpace::diagonal(w.clone(), "X_b")?), Some(w))
        };

        let obstacle_nodes: Vec<usize> = mesh
            .part_nodes(BoundaryPart::Obstacle)
            .into_iter()
            .filter(|i| !is_dirichlet[*i])
            .collect();

        Ok(Arc::new(FEMSpace {
            mesh,
            free_nodes,
            free_position,
            space_v,
            space_x_domain,
            domain_weights: lumped,
            flux_nodes,
            space_x_boundary,
            boundary_weights,
            obstacle_nodes,
        }))
    }

    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    /// Free position of a global node, `None` for Dirichlet nodes.
    pub fn free_position(&self, global: usize) -> Option<usize> {
        self.free_position[global]
    }

    /// Full nodal values (zeros on the Dirichlet part) from free-node
    /// coefficients.
    pub fn nodal_values(&self, u: &Vector) -> DVector<f64> {
        let mut out = DVector::zeros(self.mesh.n_nodes());
        for (pos, &g) in self.free_nodes.iter().enumerate() {
            out[g] = u.coords()[pos];
        }
        out
    }

    /// Free-node interpolation of a nodal function (Dirichlet values are
    /// dropped).
    pub fn interpolate(&self, f: impl Fn(&[f64; 2]) -> f64) -> Vector {
        let coords = DVector::from_fn(self.n_free(), |i, _| f(&self.mesh.nodes[self.free_nodes[i]]));
        Vector::new(&self.space_v, coords).expect("interpolated values must be finite")
    }
}

impl std::fmt::Debug for FEMSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FEMSpace")
            .field("dim", &self.mesh.dim)
            .field("nodes", &self.mesh.n_nodes())
            .field("free", &self.n_free())
            .field("flux_nodes", &self.flux_nodes.len())
            .field("obstacle_nodes", &self.obstacle_nodes.len())
            .finish()
    }
}

/// Gauss-Legendre 4-point rule on [0, 1] (degree 7).
const GAUSS_1D: [(f64, f64); 4] = [
    (0.5 - 0.430568155797026, 0.173927422568727),
    (0.5 - 0.169990521792428, 0.326072577431273),
    (0.5 + 0.169990521792428, 0.326072577431273),
    (0.5 + 0.430568155797026, 0.173927422568727),
];

/// Degree-4 6-point triangle rule in barycentric coordinates
/// (weights sum to 1; multiply by the triangle area).
const TRI_QUAD: [([f64; 3], f64); 6] = [
    (
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
        0.223381589678011,
    ),
    (
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        0.109951743655322,
    ),
];

/// H¹-seminorm and L² errors of a discrete solution against a smooth exact
/// solution, by per-cell quadrature (Gauss-4 in 1D, degree-4 in 2D).
pub fn manufactured_errors(
    space: &FEMSpace,
    u: &Vector,
    exact: &dyn Fn(&[f64; 2]) -> f64,
    exact_grad: &dyn Fn(&[f64; 2]) -> [f64; 2],
) -> (f64, f64) {
    let nodal = space.nodal_values(u);
    let mesh = &space.mesh;
    let mut h1_sq = 0.0;
    let mut l2_sq = 0.0;
    for c in 0..mesh.n_cells() {
        let ns = mesh.cell_nodes(c);
        let grads = mesh.cell_basis_gradients(c);
        let measure = mesh.cell_measure(c);
        let mut uh_grad = [0.0, 0.0];
        for (i, &g) in ns.iter().enumerate() {
            uh_grad[0] += nodal[g] * grads[i][0];
            uh_grad[1] += nodal[g] * grads[i][1];
        }
        match &mesh.cells {
            Cells::Intervals(cells) => {
                let [a, b] = cells[c];
                let (xa, xb) = (mesh.nodes[a][0], mesh.nodes[b][0]);
                for (t, w) in GAUSS_1D {
                    let x = xa + t * (xb - xa);
                    let uh = nodal[a] * (1.0 - t) + nodal[b] * t;
                    let p = [x, 0.0];
                    let ge = exact_grad(&p);
                    h1_sq += w * measure * (uh_grad[0] - ge[0]).powi(2);
                    l2_sq += w * measure * (uh - exact(&p)).powi(2);
                }
            }
            Cells::Triangles(cells) => {
                let [a, b, d] = cells[c];
                let (pa, pb, pd) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[d]);
                for (bary, w) in TRI_QUAD {
                    let x = [
                        bary[0] * pa[0] + bary[1] * pb[0] + bary[2] * pd[0],
                        bary[0] * pa[1] + bary[1] * pb[1] + bary[2] * pd[1],
                    ];
                    let uh = bary[0] * nodal[a] + bary[1] * nodal[b] + bary[2] * nodal[d];
                    let ge = exact_grad(&x);
                    h1_sq += w
                        * measure
                        * ((uh_grad[0] - ge[0]).powi(2) + (uh_grad[1] - ge[1]).powi(2));
                    l2_sq += w * measure * (uh - exact(&x)).powi(2);
                }
            }
        }
    }
    (h1_sq.max(0.0).sqrt(), l2_sq.max(0.0).sqrt())
}

/// Manufactured sine data: `u = sin(πx)` in 1D, `u = sin(πx) sin(πy)` in 2D,
/// with loads `π² u` and `2π² u` for the unit-coefficient law.
pub mod manufactured {
    use std::f64::consts::PI;

    pub fn exact(dim: u8, x: &[f64; 2]) -> f64 {
        match dim {
            1 => (PI * x[0]).sin(),
            _ => (PI * x[0]).sin() * (PI * x[1]).sin(),
        }
    }

    pub fn gradient(dim: u8, x: &[f64; 2]) -> [f64; 2] {
        match dim {
            1 => [PI * (PI * x[0]).cos(), 0.0],
            _ => [
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            ],
        }
    }

    pub fn load(dim: u8, x: &[f64; 2]) -> f64 {
        match dim {
            1 => PI * PI * exact(1, x),
            _ => 2.0 * PI * PI * exact(2, x),
        }
    }
}
