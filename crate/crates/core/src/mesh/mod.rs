//! Conforming 2D triangulations.
//!
//! Triangles are stored counter-clockwise as `[v0, v1, v2]` where `(v0, v1)` is the
//! refinement edge and `v2` the newest vertex, which is the labelling used by
//! newest-vertex bisection in [`refine`]. Local edge `i` of a triangle is the edge
//! opposite local vertex `i`.

mod generate;
mod refine;

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::scalar::{pairwise_sum, Real};

pub use generate::{channel_mesh, lshape_mesh, structured_mesh};
pub use refine::{grade_toward, refine, refine_with_budget};

/// Default cap on the number of triangles any generator or refinement may produce.
pub const DEFAULT_TRIANGLE_BUDGET: usize = 200_000;

/// Sentinel for "no triangle" in [`Mesh::edge_triangles`].
pub const NO_TRIANGLE: usize = usize::MAX;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {triangle} has non-positive signed area {area}")]
    NonPositiveArea { triangle: usize, area: f64 },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("vertex {vertex} is a hanging node on edge ({a}, {b})")]
    HangingNode { vertex: usize, a: usize, b: usize },
    #[error("vertex index {index} out of range in triangle {triangle}")]
    InvalidIndex { triangle: usize, index: usize },
    #[error("marked triangle index {0} out of range")]
    InvalidMark(usize),
    #[error("mesh would have {triangles} triangles, exceeding the budget of {budget}")]
    Budget { triangles: usize, budget: usize },
    #[error("malformed mesh file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    vertices: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    boundary_edge: Vec<bool>,
    boundary_vertex: Vec<bool>,
    areas: Vec<T>,
    gradients: Vec<[[T; 2]; 3]>,
    midpoints: Vec<[T; 2]>,
}

#[inline]
fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Real> Mesh<T> {
    /// Builds connectivity and geometry caches, validating orientation and conformity.
    pub fn new(vertices: Vec<[T; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut gradients = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i >= nv {
                    return Err(MeshError::InvalidIndex { triangle: t, index: i });
                }
            }
            let [p0, p1, p2] = tri.map(|i| vertices[i]);
            let twice = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            if !(twice > T::zero()) {
                return Err(MeshError::NonPositiveArea {
                    triangle: t,
                    area: (twice * T::lit(0.5)).to_f64().unwrap_or(f64::NAN),
                });
            }
            let g = |pj: [T; 2], pk: [T; 2]| [(pj[1] - pk[1]) / twice, (pk[0] - pj[0]) / twice];
            gradients.push([g(p1, p2), g(p2, p0), g(p0, p1)]);
            areas.push(twice * T::lit(0.5));
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<[usize; 2]> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let key = edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_triangles.push([NO_TRIANGLE, NO_TRIANGLE]);
                    edges.len() - 1
                });
                let slots = &mut edge_triangles[e];
                if slots[0] == NO_TRIANGLE {
                    slots[0] = t;
                } else if slots[1] == NO_TRIANGLE {
                    slots[1] = t;
                } else {
                    return Err(MeshError::NonManifoldEdge(key.0, key.1));
                }
                *slot = e;
            }
            triangle_edges.push(local);
        }

        let boundary_edge: Vec<bool> = edge_triangles.iter().map(|s| s[1] == NO_TRIANGLE).collect();
        let mut boundary_vertex = vec![false; nv];
        for (e, &b) in edges.iter().zip(&boundary_edge) {
            if b {
                boundary_vertex[e[0]] = true;
                boundary_vertex[e[1]] = true;
            }
        }
        let half = T::lit(0.5);
        let midpoints = edges
            .iter()
            .map(|&[a, b]| [(vertices[a][0] + vertices[b][0]) * half, (vertices[a][1] + vertices[b][1]) * half])
            .collect();

        let mesh = Mesh {
            vertices,
            triangles,
            edges,
            edge_triangles,
            triangle_edges,
            boundary_edge,
            boundary_vertex,
            areas,
            gradients,
            midpoints,
        };
        mesh.check_hanging_nodes()?;
        Ok(mesh)
    }

    /// A vertex sitting exactly on the midpoint of a boundary edge is a hanging node
    /// (bisection only ever creates midpoints).
    fn check_hanging_nodes(&self) -> Result<(), MeshError> {
        let key = |p: [T; 2]| (p[0].to_f64().unwrap_or(0.0).to_bits(), p[1].to_f64().unwrap_or(0.0).to_bits());
        let by_coord: HashMap<(u64, u64), usize> =
            self.vertices.iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if self.boundary_edge[e] {
                if let Some(&v) = by_coord.get(&key(self.midpoints[e])) {
                    return Err(MeshError::HangingNode { vertex: v, a, b });
                }
            }
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn vertex(&self, v: usize) -> [T; 2] {
        self.vertices[v]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    /// Edges of triangle `t`; entry `i` is opposite local vertex `i`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    /// Incident triangles of edge `e`; the second is [`NO_TRIANGLE`] on the boundary.
    pub fn edge_triangles(&self, e: usize) -> [usize; 2] {
        self.edge_triangles[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn edge_midpoint(&self, e: usize) -> [T; 2] {
        self.midpoints[e]
    }

    pub fn area(&self, t: usize) -> T {
        self.areas[t]
    }

    pub fn areas(&self) -> &[T] {
        &self.areas
    }

    /// Gradients of the three barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [[T; 2]; 3] {
        self.gradients[t]
    }

    pub fn barycenter(&self, t: usize) -> [T; 2] {
        let third = T::one() / T::lit(3.0);
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) * third, (a[1] + b[1] + c[1]) * third]
    }

    /// Longest edge length of triangle `t`.
    pub fn diameter(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        let d = |p: [T; 2], q: [T; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    pub fn edge_length(&self, e: usize) -> T {
        let [a, b] = self.edges[e].map(|i| self.vertices[i]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    pub fn total_area(&self) -> T {
        pairwise_sum(&self.areas)
    }

    /// Diagonal of the bounding box, which is the diameter for the polygonal domains generated here.
    pub fn domain_diameter(&self) -> T {
        let (mut lo, mut hi) = ([T::infinity(); 2], [T::neg_infinity(); 2]);
        for p in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.boundary_edge.iter().filter(|&&b| b).count()
    }

    /// Writes `vertices N triangles M`, then `N` lines `x y`, then `M` lines `i j k`.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), MeshError> {
        writeln!(out, "vertices {} triangles {}", self.vertices.len(), self.triangles.len())?;
        for p in &self.vertices {
            writeln!(out, "{} {}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    /// Reads the format of [`Mesh::write_text`].
    pub fn read_text<R: BufRead>(input: R) -> Result<Self, MeshError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| MeshError::Parse("empty input".into()))??;
        let words: Vec<&str> = header.split_whitespace().collect();
        let (nv, nt) = match words.as_slice() {
            ["vertices", n, "triangles", m] => (
                n.parse::<usize>().map_err(|e| MeshError::Parse(e.to_string()))?,
                m.parse::<usize>().map_err(|e| MeshError::Parse(e.to_string()))?,
            ),
            _ => return Err(MeshError::Parse(format!("bad header {header:?}"))),
        };
        let mut next = || -> Result<String, MeshError> {
            lines.next().ok_or_else(|| MeshError::Parse("unexpected end of input".into()))?.map_err(MeshError::from)
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = next()?;
            let xs: Vec<f64> = line
                .split_whitespace()
                .map(|w| w.parse::<f64>().map_err(|e| MeshError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            if xs.len() != 2 {
                return Err(MeshError::Parse(format!("bad vertex line {line:?}")));
            }
            vertices.push([T::lit(xs[0]), T::lit(xs[1])]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = next()?;
            let ix: Vec<usize> = line
                .split_whitespace()
                .map(|w| w.parse::<usize>().map_err(|e| MeshError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?;
            if ix.len() != 3 {
                return Err(MeshError::Parse(format!("bad triangle line {line:?}")));
            }
            triangles.push([ix[0], ix[1], ix[2]]);
        }
        Mesh::new(vertices, triangles)
    }
}
