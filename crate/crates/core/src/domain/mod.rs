//! Meshes of the reference configuration with duplicated nodes along
//! prescribed crack paths.

mod io;
mod schedule;

use std::collections::{BTreeMap, BTreeSet};

pub use io::{read_blueprint, write_blueprint, write_mesh};
pub use schedule::{
    check_h3, space_at, ConstrainedSpace, CrackSchedule, ReleaseTime, ScheduleEvent,
};

use crate::error::{Error, Result};

pub type SegmentId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    pub tag: BoundaryTag,
}

/// A crack facet given by two node indices of the uncut mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrackFacet {
    pub a: usize,
    pub b: usize,
    pub segment: SegmentId,
}

/// Two coincident nodes that may separate once every listed segment is released.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackPair {
    pub plus: usize,
    pub minus: usize,
    pub segments: Vec<SegmentId>,
}

/// Raw mesh description before crack nodes are duplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshBlueprint {
    pub dim: usize,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Vec<usize>>,
    pub boundary_facets: Vec<BoundaryFacet>,
    pub crack_facets: Vec<CrackFacet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrackPath {
    pub segment: SegmentId,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySpec {
    Interval {
        length: f64,
        elements: usize,
        dirichlet: Vec<Side>,
    },
    /// Structured grid; each cell is split along its lower-left to upper-right diagonal.
    Rectangle {
        width: f64,
        height: f64,
        nx: usize,
        ny: usize,
        dirichlet: Vec<Side>,
        cracks: Vec<CrackPath>,
    },
    Blueprint(MeshBlueprint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrackedMesh {
    pub dim: usize,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Vec<usize>>,
    pub boundary_facets: Vec<BoundaryFacet>,
    pub crack_pairs: Vec<CrackPair>,
    /// Crack facets in terms of the nodes of the uncut mesh.
    pub crack_facets: Vec<CrackFacet>,
}

impl CrackedMesh {
    /// Displacement components per node.
    pub fn ncomp(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * self.ncomp()
    }

    pub fn segments(&self) -> BTreeSet<SegmentId> {
        self.crack_facets.iter().map(|f| f.segment).collect()
    }

    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> BTreeSet<usize> {
        self.boundary_facets
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| f.nodes.iter().copied())
            .collect()
    }

    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        let nc = self.ncomp();
        self.nodes_with_tag(BoundaryTag::Dirichlet)
            .into_iter()
            .flat_map(|p| (0..nc).map(move |c| p * nc + c))
            .collect()
    }

    /// Signed measure of an element.
    pub fn element_measure(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        match self.dim {
            1 => self.nodes[el[1]][0] - self.nodes[el[0]][0],
            _ => {
                let [x0, y0] = self.nodes[el[0]];
                let [x1, y1] = self.nodes[el[1]];
                let [x2, y2] = self.nodes[el[2]];
                0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
            }
        }
    }

    pub fn measure(&self) -> f64 {
        (0..self.elements.len())
            .map(|e| self.element_measure(e).abs())
            .sum()
    }

    /// Nodal interpolation of a vector field.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> Vec<f64>) -> nalgebra::DVector<f64> {
        let nc = self.ncomp();
        let mut v = nalgebra::DVector::zeros(self.n_dofs());
        for (p, x) in self.nodes.iter().enumerate() {
            let val = f(*x);
            for c in 0..nc {
                v[p * nc + c] = val[c];
            }
        }
        v
    }
}

pub fn build_mesh(spec: &GeometrySpec) -> Result<CrackedMesh> {
    let bp = match spec {
        GeometrySpec::Interval {
            length,
            elements,
            dirichlet,
        } => interval_blueprint(*length, *elements, dirichlet)?,
        GeometrySpec::Rectangle {
            width,
            height,
            nx,
            ny,
            dirichlet,
            cracks,
        } => rectangle_blueprint(*width, *height, *nx, *ny, dirichlet, cracks)?,
        GeometrySpec::Blueprint(bp) => bp.clone(),
    };
    CrackedMesh::from_blueprint(&bp)
}

fn interval_blueprint(length: f64, n: usize, dirichlet: &[Side]) -> Result<MeshBlueprint> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::Mesh(format!(
            "interval length must be positive, got {length}"
        )));
    }
    if n == 0 {
        return Err(Error::Mesh("interval needs at least one element".into()));
    }
    if let Some(s) = dirichlet
        .iter()
        .find(|s| !matches!(s, Side::Left | Side::Right))
    {
        return Err(Error::Mesh(format!("an interval has no {s:?} side")));
    }
    let h = length / n as f64;
    let nodes = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
    let elements = (0..n).map(|i| vec![i, i + 1]).collect();
    let tag = |s: Side| {
        if dirichlet.contains(&s) {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::Neumann
        }
    };
    let boundary_facets = vec![
        BoundaryFacet {
            nodes: vec![0],
            tag: tag(Side::Left),
        },
        BoundaryFacet {
            nodes: vec![n],
            tag: tag(Side::Right),
        },
    ];
    Ok(MeshBlueprint {
        dim: 1,
        nodes,
        elements,
        boundary_facets,
        crack_facets: Vec::new(),
    })
}

fn rectangle_blueprint(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    dirichlet: &[Side],
    cracks: &[CrackPath],
) -> Result<MeshBlueprint> {
    if !(width > 0.0 && height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(Error::Mesh("rectangle sides must be positive".into()));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::Mesh(
            "rectangle needs at least one cell per direction".into(),
        ));
    }
    let id = |i: usize, j: usize| i + j * (nx + 1);
    let (hx, hy) = (width / nx as f64, height / ny as f64);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([i as f64 * hx, j as f64 * hy]);
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push(vec![a, b, c]);
            elements.push(vec![a, c, d]);
        }
    }
    let tag = |s: Side| {
        if dirichlet.contains(&s) {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::Neumann
        }
    };
    let mut boundary_facets = Vec::new();
    for i in 0..nx {
        boundary_facets.push(BoundaryFacet {
            nodes: vec![id(i, 0), id(i + 1, 0)],
            tag: tag(Side::Bottom),
        });
        boundary_facets.push(BoundaryFacet {
            nodes: vec![id(i, ny), id(i + 1, ny)],
            tag: tag(Side::Top),
        });
    }
    for j in 0..ny {
        boundary_facets.push(BoundaryFacet {
            nodes: vec![id(0, j), id(0, j + 1)],
            tag: tag(Side::Left),
        });
        boundary_facets.push(BoundaryFacet {
            nodes: vec![id(nx, j), id(nx, j + 1)],
            tag: tag(Side::Right),
        });
    }
    let snap = |p: [f64; 2]| -> Result<(i64, i64)> {
        let fi = p[0] / hx;
        let fj = p[1] / hy;
        let (ri, rj) = (fi.round(), fj.round());
        if (fi - ri).abs() > 1e-9
            || (fj - rj).abs() > 1e-9
            || ri < 0.0
            || rj < 0.0
            || ri > nx as f64
            || rj > ny as f64
        {
            return Err(Error::NonConforming(format!(
                "crack point ({}, {}) is not a grid node",
                p[0], p[1]
            )));
        }
        Ok((ri as i64, rj as i64))
    };
    let mut crack_facets = Vec::new();
    for path in cracks {
        if path.points.len() < 2 {
            return Err(Error::NonConforming(format!(
                "crack segment {} needs at least two points",
                path.segment
            )));
        }
        for w in path.points.windows(2) {
            let (i0, j0) = snap(w[0])?;
            let (i1, j1) = snap(w[1])?;
            let (di, dj) = (i1 - i0, j1 - j0);
            let steps = di.abs().max(dj.abs());
            let conforming = steps > 0 && (di == 0 || dj == 0 || di == dj);
            if !conforming {
                return Err(Error::NonConforming(format!(
                    "crack piece ({}, {}) -> ({}, {}) does not follow grid edges",
                    w[0][0], w[0][1], w[1][0], w[1][1]
                )));
            }
            let (si, sj) = (di.signum(), dj.signum());
            for s in 0..steps {
                let a = id((i0 + s * si) as usize, (j0 + s * sj) as usize);
                let b = id((i0 + (s + 1) * si) as usize, (j0 + (s + 1) * sj) as usize);
                crack_facets.push(CrackFacet {
                    a,
                    b,
                    segment: path.segment,
                });
            }
        }
    }
    Ok(MeshBlueprint {
        dim: 2,
        nodes,
        elements,
        boundary_facets,
        crack_facets,
    })
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn element_edges(el: &[usize]) -> [(usize, usize); 3] {
    [
        edge_key(el[0], el[1]),
        edge_key(el[1], el[2]),
        edge_key(el[2], el[0]),
    ]
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl CrackedMesh {
    /// Validates a blueprint and duplicates the interior nodes of every crack path.
    pub fn from_blueprint(bp: &MeshBlueprint) -> Result<Self> {
        let nv = bp.dim + 1;
        if !(bp.dim == 1 || bp.dim == 2) {
            return Err(Error::Mesh(format!("unsupported dimension {}", bp.dim)));
        }
        if bp.elements.is_empty() {
            return Err(Error::Mesh("mesh has no elements".into()));
        }
        if bp
            .nodes
            .iter()
            .any(|x| !x[0].is_finite() || !x[1].is_finite())
        {
            return Err(Error::Mesh("non-finite node coordinate".into()));
        }
        for (e, el) in bp.elements.iter().enumerate() {
            if el.len() != nv {
                return Err(Error::Mesh(format!(
                    "element {e} has {} nodes, expected {nv}",
                    el.len()
                )));
            }
            if let Some(&p) = el.iter().find(|&&p| p >= bp.nodes.len()) {
                return Err(Error::Mesh(format!(
                    "element {e} references missing node {p}"
                )));
            }
        }
        let mut mesh = CrackedMesh {
            dim: bp.dim,
            nodes: bp.nodes.clone(),
            elements: bp.elements.clone(),
            boundary_facets: Vec::new(),
            crack_pairs: Vec::new(),
            crack_facets: bp.crack_facets.clone(),
        };
        for e in 0..mesh.elements.len() {
            let m = mesh.element_measure(e);
            if m.abs() <= 1e-14 * mesh.element_scale(e) {
                return Err(Error::Mesh(format!("element {e} is degenerate")));
            }
        }
        if bp.dim == 1 {
            mesh.boundary_facets = boundary_facets_1d(bp)?;
            if !bp.crack_facets.is_empty() {
                return Err(Error::Mesh(
                    "cracks are not supported in one dimension".into(),
                ));
            }
            return Ok(mesh);
        }
        let mut edge_elems: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (e, el) in bp.elements.iter().enumerate() {
            for k in element_edges(el) {
                edge_elems.entry(k).or_default().push(e);
            }
        }
        if let Some((k, _)) = edge_elems.iter().find(|(_, v)| v.len() > 2) {
            return Err(Error::Mesh(format!(
                "edge {:?} is shared by more than two elements",
                k
            )));
        }
        let boundary_edges: BTreeSet<(usize, usize)> = edge_elems
            .iter()
            .filter(|(_, v)| v.len() == 1)
            .map(|(k, _)| *k)
            .collect();
        let boundary_nodes: BTreeSet<usize> =
            boundary_edges.iter().flat_map(|&(a, b)| [a, b]).collect();

        let mut tagged: BTreeMap<(usize, usize), BoundaryTag> = BTreeMap::new();
        for f in &bp.boundary_facets {
            if f.nodes.len() != 2 {
                return Err(Error::Mesh(
                    "boundary facets in 2D must have two nodes".into(),
                ));
            }
            let k = edge_key(f.nodes[0], f.nodes[1]);
            if !boundary_edges.contains(&k) {
                return Err(Error::Mesh(format!(
                    "facet {:?} is not on the boundary",
                    f.nodes
                )));
            }
            if tagged.insert(k, f.tag).is_some_and(|t| t != f.tag) {
                return Err(Error::Mesh(format!(
                    "facet {:?} has conflicting tags",
                    f.nodes
                )));
            }
        }
        mesh.boundary_facets = boundary_edges
            .iter()
            .map(|&k| BoundaryFacet {
                nodes: vec![k.0, k.1],
                tag: tagged.get(&k).copied().unwrap_or(BoundaryTag::Neumann),
            })
            .collect();

        let mut crack_edges: BTreeMap<(usize, usize), SegmentId> = BTreeMap::new();
        for f in &bp.crack_facets {
            if f.a >= bp.nodes.len() || f.b >= bp.nodes.len() {
                return Err(Error::Mesh(format!(
                    "crack facet references missing node ({}, {})",
                    f.a, f.b
                )));
            }
            let k = edge_key(f.a, f.b);
            if !edge_elems.contains_key(&k) {
                return Err(Error::NonConforming(format!(
                    "({}, {}) is not a mesh edge",
                    f.a, f.b
                )));
            }
            for p in [f.a, f.b] {
                if boundary_nodes.contains(&p) {
                    return Err(Error::CrackTouchesBoundary { node: p });
                }
            }
            if crack_edges.insert(k, f.segment).is_some() {
                return Err(Error::NonConforming(format!(
                    "crack facet ({}, {}) listed twice",
                    f.a, f.b
                )));
            }
        }
        let mut incident: BTreeMap<usize, Vec<SegmentId>> = BTreeMap::new();
        for (&(a, b), &s) in &crack_edges {
            incident.entry(a).or_default().push(s);
            incident.entry(b).or_default().push(s);
        }
        let mut node_elems: Vec<Vec<usize>> = vec![Vec::new(); bp.nodes.len()];
        for (e, el) in bp.elements.iter().enumerate() {
            for &p in el {
                node_elems[p].push(e);
            }
        }
        for (&p, segs) in &incident {
            if segs.len() > 2 {
                return Err(Error::NonConforming(format!("crack branches at node {p}")));
            }
            if segs.len() < 2 {
                continue;
            }
            let ring = &node_elems[p];
            let mut uf = UnionFind((0..ring.len()).collect());
            for (i, &e) in ring.iter().enumerate() {
                for (jj, &f) in ring.iter().enumerate().skip(i + 1) {
                    let shared: Vec<usize> = bp.elements[e]
                        .iter()
                        .copied()
                        .filter(|q| *q != p && bp.elements[f].contains(q))
                        .collect();
                    if let Some(&q) = shared.first() {
                        if !crack_edges.contains_key(&edge_key(p, q)) {
                            uf.union(i, jj);
                        }
                    }
                }
            }
            let roots: BTreeSet<usize> = (0..ring.len()).map(|i| uf.find(i)).collect();
            if roots.len() != 2 {
                return Err(Error::NonConforming(format!(
                    "crack does not split the neighbourhood of node {p} into two sides"
                )));
            }
            let keep = uf.find(0);
            let minus = mesh.nodes.len();
            mesh.nodes.push(mesh.nodes[p]);
            for (i, &e) in ring.iter().enumerate() {
                if uf.find(i) != keep {
                    for q in mesh.elements[e].iter_mut() {
                        if *q == p {
                            *q = minus;
                        }
                    }
                }
            }
            let mut segments = segs.clone();
            segments.sort_unstable();
            segments.dedup();
            mesh.crack_pairs.push(CrackPair {
                plus: p,
                minus,
                segments,
            });
        }
        Ok(mesh)
    }

    fn element_scale(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        let mut s: f64 = 0.0;
        for &a in el {
            for &b in el {
                let d = (self.nodes[a][0] - self.nodes[b][0])
                    .hypot(self.nodes[a][1] - self.nodes[b][1]);
                s = s.max(d);
            }
        }
        s.powi(self.dim as i32)
    }

    /// Mesh in which the given pairs are merged into their plus node.
    pub fn glued(&self, pairs: &[usize]) -> CrackedMesh {
        let mut map: Vec<usize> = (0..self.nodes.len()).collect();
        for &i in pairs {
            let p = &self.crack_pairs[i];
            map[p.minus] = p.plus;
        }
        let mut m = self.clone();
        for el in m.elements.iter_mut() {
            for q in el.iter_mut() {
                *q = map[*q];
            }
        }
        m
    }
}

fn boundary_facets_1d(bp: &MeshBlueprint) -> Result<Vec<BoundaryFacet>> {
    let mut count = vec![0usize; bp.nodes.len()];
    for el in &bp.elements {
        for &p in el {
            count[p] += 1;
        }
    }
    let ends: BTreeSet<usize> = (0..bp.nodes.len()).filter(|&p| count[p] == 1).collect();
    let mut tags: BTreeMap<usize, BoundaryTag> = BTreeMap::new();
    for f in &bp.boundary_facets {
        if f.nodes.len() != 1 || !ends.contains(&f.nodes[0]) {
            return Err(Error::Mesh(format!(
                "facet {:?} is not an end point",
                f.nodes
            )));
        }
        tags.insert(f.nodes[0], f.tag);
    }
    Ok(ends
        .into_iter()
        .map(|p| BoundaryFacet {
            nodes: vec![p],
            tag: tags.get(&p).copied().unwrap_or(BoundaryTag::Neumann),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn square_with_crack(n: usize, from: [f64; 2], to: [f64; 2]) -> Result<CrackedMesh> {
        build_mesh(&GeometrySpec::Rectangle {
            width: 1.0,
            height: 1.0,
            nx: n,
            ny: n,
            dirichlet: vec![Side::Left],
            cracks: vec![CrackPath {
                segment: 0,
                points: vec![from, to],
            }],
        })
    }

    #[test]
    fn interval_without_crack() {
        let m = build_mesh(&GeometrySpec::Interval {
            length: 1.0,
            elements: 8,
            dirichlet: vec![Side::Left],
        })
        .unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert!(m.crack_pairs.is_empty());
        assert_eq!(m.dirichlet_dofs(), vec![0]);
        assert_eq!(
            m.nodes_with_tag(BoundaryTag::Neumann)
                .into_iter()
                .collect::<Vec<_>>(),
            vec![8]
        );
    }

    #[test]
    fn horizontal_crack_duplicates_interior_path_nodes() {
        let m = square_with_crack(8, [0.25, 0.5], [0.75, 0.5]).unwrap();
        // path nodes at x = 0.25, 0.375, 0.5, 0.625, 0.75; the two tips stay single
        assert_eq!(m.crack_pairs.len(), 3);
        assert_eq!(m.n_nodes(), 81 + 3);
        for pair in &m.crack_pairs {
            assert_eq!(m.nodes[pair.plus], m.nodes[pair.minus]);
            let y = m.nodes[pair.plus][1];
            assert!((y - 0.5).abs() < 1e-15);
            // every element sees at most one copy
            for el in &m.elements {
                assert!(!(el.contains(&pair.plus) && el.contains(&pair.minus)));
            }
            let above_plus = m
                .elements
                .iter()
                .filter(|el| el.contains(&pair.plus))
                .count();
            let above_minus = m
                .elements
                .iter()
                .filter(|el| el.contains(&pair.minus))
                .count();
            assert_eq!(above_plus + above_minus, 6);
            assert!(above_plus > 0 && above_minus > 0);
        }
    }

    #[test]
    fn each_side_of_the_crack_is_consistent() {
        let m = square_with_crack(8, [0.25, 0.5], [0.75, 0.5]).unwrap();
        for pair in &m.crack_pairs {
            let side = |p: usize| -> Vec<f64> {
                m.elements
                    .iter()
                    .filter(|el| el.contains(&p))
                    .map(|el| el.iter().map(|&q| m.nodes[q][1]).sum::<f64>() / 3.0 - 0.5)
                    .collect()
            };
            let plus = side(pair.plus);
            let minus = side(pair.minus);
            assert!(plus.iter().all(|y| y.signum() == plus[0].signum()));
            assert!(minus.iter().all(|y| y.signum() == minus[0].signum()));
            assert_ne!(plus[0].signum(), minus[0].signum());
        }
    }

    #[test]
    fn vertical_and_diagonal_cracks_are_accepted() {
        let m = square_with_crack(8, [0.5, 0.25], [0.5, 0.75]).unwrap();
        assert_eq!(m.crack_pairs.len(), 3);
        let m = square_with_crack(8, [0.25, 0.25], [0.75, 0.75]).unwrap();
        assert_eq!(m.crack_pairs.len(), 3);
    }

    #[test]
    fn crack_reaching_boundary_is_rejected() {
        let err = square_with_crack(8, [0.0, 0.5], [0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::CrackTouchesBoundary { .. }));
        let err = square_with_crack(8, [0.5, 0.5], [1.0, 0.5]).unwrap_err();
        assert!(matches!(err, Error::CrackTouchesBoundary { .. }));
    }

    #[test]
    fn non_conforming_path_is_rejected() {
        assert!(matches!(
            square_with_crack(8, [0.25, 0.5], [0.75, 0.625]).unwrap_err(),
            Error::NonConforming(_)
        ));
        assert!(matches!(
            square_with_crack(8, [0.3, 0.5], [0.75, 0.5]).unwrap_err(),
            Error::NonConforming(_)
        ));
        // anti-diagonal direction is not a triangulation edge
        assert!(matches!(
            square_with_crack(8, [0.25, 0.75], [0.75, 0.25]).unwrap_err(),
            Error::NonConforming(_)
        ));
    }

    #[test]
    fn branching_crack_is_rejected() {
        let spec = GeometrySpec::Rectangle {
            width: 1.0,
            height: 1.0,
            nx: 8,
            ny: 8,
            dirichlet: vec![],
            cracks: vec![
                CrackPath {
                    segment: 0,
                    points: vec![[0.25, 0.5], [0.75, 0.5]],
                },
                CrackPath {
                    segment: 1,
                    points: vec![[0.5, 0.5], [0.5, 0.75]],
                },
            ],
        };
        assert!(matches!(
            build_mesh(&spec).unwrap_err(),
            Error::NonConforming(_)
        ));
    }

    #[test]
    fn node_ordering_is_deterministic() {
        let a = square_with_crack(6, [1.0 / 6.0, 0.5], [5.0 / 6.0, 0.5]).unwrap();
        let b = square_with_crack(6, [1.0 / 6.0, 0.5], [5.0 / 6.0, 0.5]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gluing_all_pairs_restores_uncut_connectivity() {
        let m = square_with_crack(8, [0.25, 0.5], [0.75, 0.5]).unwrap();
        let glued = m.glued(&(0..m.crack_pairs.len()).collect::<Vec<_>>());
        let uncut = build_mesh(&GeometrySpec::Rectangle {
            width: 1.0,
            height: 1.0,
            nx: 8,
            ny: 8,
            dirichlet: vec![Side::Left],
            cracks: vec![],
        })
        .unwrap();
        assert_eq!(glued.elements, uncut.elements);
    }

    #[test]
    fn multi_piece_polyline_and_segment_assignment() {
        let spec = GeometrySpec::Rectangle {
            width: 1.0,
            height: 1.0,
            nx: 8,
            ny: 8,
            dirichlet: vec![],
            cracks: vec![
                CrackPath {
                    segment: 3,
                    points: vec![[0.25, 0.5], [0.5, 0.5]],
                },
                CrackPath {
                    segment: 7,
                    points: vec![[0.5, 0.5], [0.5, 0.625], [0.625, 0.75]],
                },
            ],
        };
        let m = build_mesh(&spec).unwrap();
        let junction = m
            .crack_pairs
            .iter()
            .find(|p| m.nodes[p.plus] == [0.5, 0.5])
            .unwrap();
        assert_eq!(junction.segments, vec![3, 7]);
        // interior nodes: (0.375,.5) (0.5,.5) (0.5,.625)
        assert_eq!(m.crack_pairs.len(), 3);
    }

    #[test]
    fn blueprint_validation() {
        let mut bp = MeshBlueprint {
            dim: 2,
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            elements: vec![vec![0, 1, 2]],
            boundary_facets: vec![],
            crack_facets: vec![],
        };
        let m = CrackedMesh::from_blueprint(&bp).unwrap();
        assert_eq!(m.boundary_facets.len(), 3);
        assert!(m
            .boundary_facets
            .iter()
            .all(|f| f.tag == BoundaryTag::Neumann));
        bp.elements = vec![vec![0, 1, 5]];
        assert!(CrackedMesh::from_blueprint(&bp).is_err());
        bp.elements = vec![vec![0, 1, 1]];
        assert!(CrackedMesh::from_blueprint(&bp).is_err());
    }
}
