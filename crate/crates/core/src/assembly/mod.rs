//! P1 finite element operators and time-sampled data vectors.
//!
//! All matrices are assembled on the fully cut mesh; constraints are applied
//! afterwards through [`ConstrainedSpace`].

pub mod data;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use data::{Field, InitialDisplacement, ProblemData, SpaceFn, Term, TimeFn};

use crate::domain::{BoundaryTag, ConstrainedSpace, CrackedMesh};
use crate::error::{Error, Result};
use crate::linalg::{csr_from_triplets, restrict};
use crate::tensor::{strain_size, SymTensor};

/// Elastic and viscous tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub elastic: SymTensor,
    pub viscous: SymTensor,
    /// Coercivity constant of the elastic tensor.
    pub gamma: f64,
}

impl Material {
    pub fn new(elastic: SymTensor, viscous: SymTensor) -> Result<Self> {
        if elastic.size() != viscous.size() {
            return Err(Error::Domain(
                "elastic and viscous tensors act on different strain spaces".into(),
            ));
        }
        let gamma = elastic.min_eigenvalue();
        if !(gamma > 0.0) {
            return Err(Error::Domain(format!(
                "elastic tensor is not coercive (gamma = {gamma})"
            )));
        }
        let scale = viscous.matrix().amax().max(1e-300);
        if viscous.min_eigenvalue() < -1e-12 * scale {
            return Err(Error::Domain("viscous tensor must be nonnegative".into()));
        }
        Ok(Self {
            elastic,
            viscous,
            gamma,
        })
    }
}

/// Order in which element contributions are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum AssemblyOrder {
    Natural,
    /// Elements visited in a random order drawn from the seed.
    Permuted(u64),
}

fn element_order(n: usize, order: AssemblyOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if let AssemblyOrder::Permuted(seed) = order {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    idx
}

/// Strain-displacement matrix of an element (Mandel rows, local dof columns
/// ordered node-major) and the element measure.
pub fn strain_operator(mesh: &CrackedMesh, e: usize) -> (DMatrix<f64>, f64) {
    let el = &mesh.elements[e];
    let signed = mesh.element_measure(e);
    match mesh.dim {
        1 => {
            let h = signed;
            (DMatrix::from_row_slice(1, 2, &[-1.0 / h, 1.0 / h]), h.abs())
        }
        _ => {
            let p: Vec<[f64; 2]> = el.iter().map(|&q| mesh.nodes[q]).collect();
            let two_a = 2.0 * signed;
            let mut b = DMatrix::zeros(3, 6);
            let r = std::f64::consts::FRAC_1_SQRT_2;
            for a in 0..3 {
                let (n1, n2) = (p[(a + 1) % 3], p[(a + 2) % 3]);
                let dx = (n1[1] - n2[1]) / two_a;
                let dy = (n2[0] - n1[0]) / two_a;
                b[(0, 2 * a)] = dx;
                b[(1, 2 * a + 1)] = dy;
                b[(2, 2 * a)] = r * dy;
                b[(2, 2 * a + 1)] = r * dx;
            }
            (b, signed.abs())
        }
    }
}

fn element_dofs(mesh: &CrackedMesh, e: usize) -> Vec<usize> {
    let nc = mesh.ncomp();
    mesh.elements[e]
        .iter()
        .flat_map(|&p| (0..nc).map(move |c| p * nc + c))
        .collect()
}

fn element_mass(mesh: &CrackedMesh, e: usize) -> DMatrix<f64> {
    let nc = mesh.ncomp();
    let nv = mesh.dim + 1;
    let m = mesh.element_measure(e).abs() / ((nv * (nv + 1)) as f64);
    DMatrix::from_fn(nv * nc, nv * nc, |i, j| {
        if i % nc != j % nc {
            0.0
        } else if i / nc == j / nc {
            2.0 * m
        } else {
            m
        }
    })
}

fn element_stiffness(mesh: &CrackedMesh, e: usize, tensor: &SymTensor) -> DMatrix<f64> {
    let (b, vol) = strain_operator(mesh, e);
    let k = b.transpose() * tensor.matrix() * &b * vol;
    (&k + k.transpose()) * 0.5
}

fn assemble(
    mesh: &CrackedMesh,
    order: AssemblyOrder,
    local: impl Fn(usize) -> DMatrix<f64> + Sync,
) -> CsrMatrix<f64> {
    let ne = mesh.elements.len();
    let blocks: Vec<DMatrix<f64>> = if ne >= 256 {
        (0..ne).into_par_iter().map(&local).collect()
    } else {
        (0..ne).map(&local).collect()
    };
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for e in element_order(ne, order) {
        let dofs = element_dofs(mesh, e);
        let k = &blocks[e];
        for (a, &da) in dofs.iter().enumerate() {
            for (b, &db) in dofs.iter().enumerate() {
                rows.push(da);
                cols.push(db);
                vals.push(k[(a, b)]);
            }
        }
    }
    csr_from_triplets(mesh.n_dofs(), &rows, &cols, &vals)
}

/// Consistent P1 mass matrix on all dofs of the cut mesh.
pub fn full_mass(mesh: &CrackedMesh, order: AssemblyOrder) -> CsrMatrix<f64> {
    assemble(mesh, order, |e| element_mass(mesh, e))
}

/// `(T e u, e v)` on all dofs of the cut mesh.
pub fn full_stiffness(
    mesh: &CrackedMesh,
    tensor: &SymTensor,
    order: AssemblyOrder,
) -> Result<CsrMatrix<f64>> {
    if tensor.size() != strain_size(mesh.dim) {
        return Err(Error::Domain(format!(
            "tensor acts on {} strain components, mesh needs {}",
            tensor.size(),
            strain_size(mesh.dim)
        )));
    }
    Ok(assemble(mesh, order, |e| {
        element_stiffness(mesh, e, tensor)
    }))
}

/// Facet mass of the Neumann boundary; point evaluation in one dimension.
pub fn neumann_mass(mesh: &CrackedMesh) -> CsrMatrix<f64> {
    let nc = mesh.ncomp();
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for f in mesh
        .boundary_facets
        .iter()
        .filter(|f| f.tag == BoundaryTag::Neumann)
    {
        if mesh.dim == 1 {
            for c in 0..nc {
                let d = f.nodes[0] * nc + c;
                rows.push(d);
                cols.push(d);
                vals.push(1.0);
            }
        } else {
            let (a, b) = (f.nodes[0], f.nodes[1]);
            let len =
                (mesh.nodes[a][0] - mesh.nodes[b][0]).hypot(mesh.nodes[a][1] - mesh.nodes[b][1]);
            for (p, q) in [(a, a), (a, b), (b, a), (b, b)] {
                let w = if p == q { len / 3.0 } else { len / 6.0 };
                for c in 0..nc {
                    rows.push(p * nc + c);
                    cols.push(q * nc + c);
                    vals.push(w);
                }
            }
        }
    }
    csr_from_triplets(mesh.n_dofs(), &rows, &cols, &vals)
}

pub fn mass_matrix(mesh: &CrackedMesh, space: &ConstrainedSpace) -> CsrMatrix<f64> {
    restrict(&full_mass(mesh, AssemblyOrder::Natural), space)
}

pub fn stiffness_matrix(
    mesh: &CrackedMesh,
    space: &ConstrainedSpace,
    tensor: &SymTensor,
) -> Result<CsrMatrix<f64>> {
    Ok(restrict(
        &full_stiffness(mesh, tensor, AssemblyOrder::Natural)?,
        space,
    ))
}

/// Assembled operators of a problem on the cut mesh.
#[derive(Debug, Clone)]
pub struct Operators {
    pub mass: CsrMatrix<f64>,
    pub stiff_elastic: CsrMatrix<f64>,
    pub stiff_viscous: CsrMatrix<f64>,
    /// `(e u, e v)`, used for strain norms.
    pub stiff_identity: CsrMatrix<f64>,
    pub neumann_mass: CsrMatrix<f64>,
}

impl Operators {
    pub fn assemble(mesh: &CrackedMesh, material: &Material, order: AssemblyOrder) -> Result<Self> {
        Ok(Self {
            mass: full_mass(mesh, order),
            stiff_elastic: full_stiffness(mesh, &material.elastic, order)?,
            stiff_viscous: full_stiffness(mesh, &material.viscous, order)?,
            stiff_identity: full_stiffness(mesh, &SymTensor::identity(mesh.dim), order)?,
            neumann_mass: neumann_mass(mesh),
        })
    }
}

/// `(f_j, v)` with `f_j` the 3-point Gauss average of `f` over `((j-1) tau, j tau)`.
pub fn load_vector(
    data: &ProblemData,
    mesh: &CrackedMesh,
    mass: &CsrMatrix<f64>,
    j: usize,
    tau: f64,
) -> DVector<f64> {
    if data.body_force.is_zero() {
        return DVector::zeros(mesh.n_dofs());
    }
    let favg = data
        .body_force
        .nodal_average(mesh, (j as f64 - 1.0) * tau, j as f64 * tau);
    crate::linalg::matvec(mass, &favg)
}

/// `(N(j tau), v)` on the Neumann boundary.
pub fn neumann_vector(
    data: &ProblemData,
    mesh: &CrackedMesh,
    neumann_mass: &CsrMatrix<f64>,
    j: usize,
    tau: f64,
) -> DVector<f64> {
    if data.traction.is_zero() {
        return DVector::zeros(mesh.n_dofs());
    }
    crate::linalg::matvec(neumann_mass, &data.traction.nodal(mesh, j as f64 * tau))
}

/// Dirichlet lifts and their difference quotients on the grid.
#[derive(Debug, Clone)]
pub struct DirichletSamples {
    /// `z(j tau)` interpolated at every node, `j = 0..n`
    pub z: Vec<DVector<f64>>,
    /// `dz_0 = z'(0)`, `dz_j = (z_j - z_{j-1}) / tau`
    pub dz: Vec<DVector<f64>>,
    /// `d2z_j = (dz_j - dz_{j-1}) / tau`, zero at `j = 0`
    pub d2z: Vec<DVector<f64>>,
}

pub fn dirichlet_samples(
    data: &ProblemData,
    mesh: &CrackedMesh,
    n: usize,
    t_final: f64,
) -> DirichletSamples {
    let tau = t_final / n as f64;
    let z: Vec<DVector<f64>> = (0..=n)
        .map(|j| data.dirichlet.nodal(mesh, j as f64 * tau))
        .collect();
    let mut dz = vec![data.dirichlet.nodal_d1(mesh, 0.0)];
    for j in 1..=n {
        dz.push((&z[j] - &z[j - 1]) / tau);
    }
    let mut d2z = vec![DVector::zeros(mesh.n_dofs())];
    for j in 1..=n {
        d2z.push((&dz[j] - &dz[j - 1]) / tau);
    }
    DirichletSamples { z, dz, d2z }
}
