use std::fmt;
use std::sync::Arc;

use crate::mesh::Mesh;
use crate::scalar::Real;

pub(crate) const NO_DOF: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Continuous piecewise affine functions vanishing on the boundary.
    P1Zero,
    /// Crouzeix–Raviart functions vanishing at boundary edge midpoints.
    CrZero,
    /// Velocity pair: first component in `P1Zero`, second in `CrZero`.
    KouhiaStenberg,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::P1Zero => "p1-lagrange-zero",
            SpaceKind::CrZero => "crouzeix-raviart-zero",
            SpaceKind::KouhiaStenberg => "kouhia-stenberg",
        })
    }
}

impl SpaceKind {
    /// Length of a flattened gradient.
    pub fn gradient_dim(self) -> usize {
        match self {
            SpaceKind::KouhiaStenberg => 4,
            _ => 2,
        }
    }

    fn local_count(self) -> usize {
        match self {
            SpaceKind::KouhiaStenberg => 6,
            _ => 3,
        }
    }
}

/// A discrete space over a shared mesh.
///
/// Global *nodes* are vertices (P1), edges (CR), or vertices followed by edges (KS).
/// Interior nodes carry degrees of freedom; boundary nodes only appear in boundary
/// payloads of [`FeFunction`]s.
#[derive(Debug, Clone)]
pub struct Space<T> {
    kind: SpaceKind,
    mesh: Arc<Mesh<T>>,
    node_dof: Vec<usize>,
    dof_node: Vec<usize>,
    node_boundary: Vec<usize>,
    boundary_nodes: Vec<usize>,
    local_nodes: Vec<usize>,
    local_grads: Vec<T>,
    local_divs: Vec<T>,
    seminorms: Vec<T>,
}

impl<T: Real> Space<T> {
    pub fn new(kind: SpaceKind, mesh: Arc<Mesh<T>>) -> Self {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let boundary: Vec<bool> = match kind {
            SpaceKind::P1Zero => (0..nv).map(|v| mesh.is_boundary_vertex(v)).collect(),
            SpaceKind::CrZero => (0..ne).map(|e| mesh.is_boundary_edge(e)).collect(),
            SpaceKind::KouhiaStenberg => (0..nv)
                .map(|v| mesh.is_boundary_vertex(v))
                .chain((0..ne).map(|e| mesh.is_boundary_edge(e)))
                .collect(),
        };
        let mut node_dof = vec![NO_DOF; boundary.len()];
        let mut node_boundary = vec![NO_DOF; boundary.len()];
        let mut dof_node = Vec::new();
        let mut boundary_nodes = Vec::new();
        for (node, &b) in boundary.iter().enumerate() {
            if b {
                node_boundary[node] = boundary_nodes.len();
                boundary_nodes.push(node);
            } else {
                node_dof[node] = dof_node.len();
                dof_node.push(node);
            }
        }

        let dim = kind.gradient_dim();
        let nl = kind.local_count();
        let nt = mesh.n_triangles();
        let mut local_nodes = Vec::with_capacity(nt * nl);
        let mut local_grads = Vec::with_capacity(nt * nl * dim);
        let mut local_divs = Vec::with_capacity(if kind == SpaceKind::KouhiaStenberg { nt * nl } else { 0 });
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        for t in 0..nt {
            let tri = mesh.triangle(t);
            let edges = mesh.triangle_edges(t);
            let g = mesh.barycentric_gradients(t);
            match kind {
                SpaceKind::P1Zero => {
                    for i in 0..3 {
                        local_nodes.push(tri[i]);
                        local_grads.extend_from_slice(&g[i]);
                    }
                }
                SpaceKind::CrZero => {
                    // ψ_E = 1 − 2 λ_k for the edge E opposite vertex k
                    for k in 0..3 {
                        local_nodes.push(edges[k]);
                        local_grads.extend_from_slice(&[-two * g[k][0], -two * g[k][1]]);
                    }
                }
                SpaceKind::KouhiaStenberg => {
                    for i in 0..3 {
                        local_nodes.push(tri[i]);
                        local_grads.extend_from_slice(&[g[i][0], half * g[i][1], half * g[i][1], T::zero()]);
                        local_divs.push(g[i][0]);
                    }
                    for k in 0..3 {
                        let d = [-two * g[k][0], -two * g[k][1]];
                        local_nodes.push(nv + edges[k]);
                        local_grads.extend_from_slice(&[T::zero(), half * d[0], half * d[0], d[1]]);
                        local_divs.push(d[1]);
                    }
                }
            }
        }

        let mut sq = vec![T::zero(); dof_node.len()];
        for t in 0..nt {
            let area = mesh.area(t);
            for l in 0..nl {
                let dof = node_dof[local_nodes[t * nl + l]];
                if dof != NO_DOF {
                    let gl = &local_grads[(t * nl + l) * dim..(t * nl + l + 1) * dim];
                    sq[dof] += area * gl.iter().map(|&x| x * x).sum::<T>();
                }
            }
        }
        let seminorms = sq.into_iter().map(|s| s.sqrt()).collect();

        Space {
            kind,
            mesh,
            node_dof,
            dof_node,
            node_boundary,
            boundary_nodes,
            local_nodes,
            local_grads,
            local_divs,
            seminorms,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_node.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_dof.len()
    }

    pub fn n_boundary_nodes(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn gradient_dim(&self) -> usize {
        self.kind.gradient_dim()
    }

    pub fn local_count(&self) -> usize {
        self.kind.local_count()
    }

    /// Degree of freedom of a global node, `None` on the boundary.
    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        Some(self.node_dof[node]).filter(|&d| d != NO_DOF)
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.dof_node[dof]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    /// Geometric location of a node: vertex or edge midpoint.
    pub fn node_position(&self, node: usize) -> [T; 2] {
        let nv = self.mesh.n_vertices();
        match self.kind {
            SpaceKind::P1Zero => self.mesh.vertex(node),
            SpaceKind::CrZero => self.mesh.edge_midpoint(node),
            SpaceKind::KouhiaStenberg if node < nv => self.mesh.vertex(node),
            SpaceKind::KouhiaStenberg => self.mesh.edge_midpoint(node - nv),
        }
    }

    /// Velocity component (0 or 1) a node belongs to; always 0 for scalar spaces.
    pub fn node_component(&self, node: usize) -> usize {
        usize::from(self.kind == SpaceKind::KouhiaStenberg && node >= self.mesh.n_vertices())
    }

    pub(crate) fn node_boundary_index(&self, node: usize) -> usize {
        self.node_boundary[node]
    }

    /// Global nodes of triangle `t`.
    pub fn local_nodes(&self, t: usize) -> &[usize] {
        let nl = self.local_count();
        &self.local_nodes[t * nl..(t + 1) * nl]
    }

    /// Flattened gradient of local basis function `l` on triangle `t`.
    pub fn local_gradient(&self, t: usize, l: usize) -> &[T] {
        let nl = self.local_count();
        let dim = self.gradient_dim();
        let k = t * nl + l;
        &self.local_grads[k * dim..(k + 1) * dim]
    }

    /// Divergence of local basis function `l` on triangle `t` (Kouhia–Stenberg only).
    pub(crate) fn local_divergence(&self, t: usize, l: usize) -> T {
        self.local_divs[t * self.local_count() + l]
    }

    /// `|φ_j|_{H¹}` (or `‖ε(φ_j)‖` for the vector space) of each basis function.
    pub fn seminorms(&self) -> &[T] {
        &self.seminorms
    }

    /// `∫_T φ_l` for local basis function `l`, counting only the first velocity component.
    pub(crate) fn local_integral(&self, t: usize, l: usize) -> T {
        let third = self.mesh.area(t) / T::lit(3.0);
        match self.kind {
            SpaceKind::KouhiaStenberg if l >= 3 => T::zero(),
            _ => third,
        }
    }

    pub fn zero_function(&self) -> FeFunction<T> {
        FeFunction::zeros(self.n_dofs())
    }
}

/// Coefficients on the degrees of freedom, plus optional values on boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction<T> {
    pub coefficients: Vec<T>,
    /// Values on [`Space::boundary_nodes`], in that order.
    pub boundary: Option<Vec<T>>,
}

impl<T: Real> FeFunction<T> {
    pub fn zeros(n: usize) -> Self {
        FeFunction { coefficients: vec![T::zero(); n], boundary: None }
    }

    pub fn from_coefficients(coefficients: Vec<T>) -> Self {
        FeFunction { coefficients, boundary: None }
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Value at a global node.
    pub fn node_value(&self, space: &Space<T>, node: usize) -> T {
        match space.dof_of_node(node) {
            Some(d) => self.coefficients[d],
            None => match &self.boundary {
                Some(b) => b[space.node_boundary_index(node)],
                None => T::zero(),
            },
        }
    }

    /// `self + s · other` on the coefficients; the boundary payload of `self` is kept.
    pub fn axpy(&self, s: T, other: &FeFunction<T>) -> FeFunction<T> {
        let coefficients = self.coefficients.iter().zip(&other.coefficients).map(|(&a, &b)| a + s * b).collect();
        FeFunction { coefficients, boundary: self.boundary.clone() }
    }
}

/// Nodal interpolation; the second component of `g` is only used by the vector space.
pub fn interpolate<T: Real, G: Fn([T; 2]) -> [T; 2]>(space: &Space<T>, g: G) -> FeFunction<T> {
    let sample = |node: usize| g(space.node_position(node))[space.node_component(node)];
    let coefficients = (0..space.n_dofs()).map(|d| sample(space.node_of_dof(d))).collect();
    let boundary = space.boundary_nodes().iter().map(|&n| sample(n)).collect();
    FeFunction { coefficients, boundary: Some(boundary) }
}

/// Zero on interior degrees of freedom and `g` sampled on boundary nodes: boundary
/// vertices for the first component, boundary edge midpoints for the second.
pub fn interpolate_boundary<T: Real, G: Fn([T; 2]) -> [T; 2]>(space: &Space<T>, g: G) -> FeFunction<T> {
    let boundary = space
        .boundary_nodes()
        .iter()
        .map(|&n| g(space.node_position(n))[space.node_component(n)])
        .collect();
    FeFunction { coefficients: vec![T::zero(); space.n_dofs()], boundary: Some(boundary) }
}
