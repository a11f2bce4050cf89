use std::collections::{HashMap, HashSet};

use super::{edge_key, Mesh, MeshError, DEFAULT_TRIANGLE_BUDGET};
use crate::scalar::Real;

/// Newest-vertex bisection of every marked triangle plus the conforming closure.
pub fn refine<T: Real>(mesh: &Mesh<T>, marked: &[usize]) -> Result<Mesh<T>, MeshError> {
    refine_with_budget(mesh, marked, DEFAULT_TRIANGLE_BUDGET)
}

pub fn refine_with_budget<T: Real>(mesh: &Mesh<T>, marked: &[usize], budget: usize) -> Result<Mesh<T>, MeshError> {
    let nt = mesh.n_triangles();
    if let Some(&bad) = marked.iter().find(|&&t| t >= nt) {
        return Err(MeshError::InvalidMark(bad));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let refinement_edge = |tri: &[usize; 3]| edge_key(tri[0], tri[1]);

    let mut marked_edges: HashSet<(usize, usize)> = marked.iter().map(|&t| refinement_edge(&mesh.triangle(t))).collect();
    // Closure: a triangle with any marked edge must also bisect its refinement edge.
    loop {
        let mut changed = false;
        for tri in mesh.triangles() {
            let re = refinement_edge(tri);
            if marked_edges.contains(&re) {
                continue;
            }
            let others = [edge_key(tri[1], tri[2]), edge_key(tri[2], tri[0])];
            if others.iter().any(|e| marked_edges.contains(e)) {
                marked_edges.insert(re);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut out: Vec<[usize; 3]> = Vec::with_capacity(nt * 2);
    let mut stack: Vec<[usize; 3]> = Vec::new();
    let half = T::lit(0.5);
    for tri in mesh.triangles() {
        stack.push(*tri);
        while let Some(t) = stack.pop() {
            let re = refinement_edge(&t);
            if !marked_edges.contains(&re) {
                out.push(t);
                if out.len() > budget {
                    return Err(MeshError::Budget { triangles: out.len(), budget });
                }
                continue;
            }
            let m = *midpoint_of.entry(re).or_insert_with(|| {
                let (p, q) = (vertices[t[0]], vertices[t[1]]);
                vertices.push([(p[0] + q[0]) * half, (p[1] + q[1]) * half]);
                vertices.len() - 1
            });
            let [v0, v1, v2] = t;
            // pushed in reverse so that (v2, v0, m) is emitted first
            stack.push([v1, v2, m]);
            stack.push([v2, v0, m]);
        }
    }
    Mesh::new(vertices, out)
}

/// `depth` rounds of refinement toward `point`; round `k` bisects every triangle whose
/// barycenter lies within `2^{-k} · diam(Ω)` of `point`.
pub fn grade_toward<T: Real>(mesh: &Mesh<T>, point: [T; 2], depth: u32) -> Result<Mesh<T>, MeshError> {
    let diam = mesh.domain_diameter();
    let mut current = mesh.clone();
    for k in 1..=depth {
        let radius = diam * T::lit(0.5).powi(k as i32);
        let marked: Vec<usize> = (0..current.n_triangles())
            .filter(|&t| {
                let c = current.barycenter(t);
                (c[0] - point[0]).hypot(c[1] - point[1]) < radius
            })
            .collect();
        current = refine(&current, &marked)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::super::lshape_mesh;
    use super::*;

    fn assert_invariants(m: &Mesh<f64>, area: f64) {
        assert!((m.total_area() - area).abs() <= 1e-12 * area);
        for e in 0..m.n_edges() {
            let [t0, t1] = m.edge_triangles(e);
            assert_ne!(t0, super::super::NO_TRIANGLE);
            let _ = t1;
            let [a, b] = m.edges()[e];
            let mid = m.edge_midpoint(e);
            assert_eq!(mid, [(m.vertex(a)[0] + m.vertex(b)[0]) / 2.0, (m.vertex(a)[1] + m.vertex(b)[1]) / 2.0]);
        }
        for t in 0..m.n_triangles() {
            assert!(m.area(t) > 0.0);
        }
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = lshape_mesh::<f64>(1).unwrap();
        let r = refine(&m, &[]).unwrap();
        assert_eq!(r.triangles(), m.triangles());
        assert_eq!(r.vertices(), m.vertices());
    }

    #[test]
    fn marking_all_at_least_doubles() {
        let mut m = lshape_mesh::<f64>(0).unwrap();
        for _ in 0..4 {
            let all: Vec<usize> = (0..m.n_triangles()).collect();
            let r = refine(&m, &all).unwrap();
            assert!(r.n_triangles() >= 2 * m.n_triangles());
            assert_invariants(&r, 3.0);
            m = r;
        }
    }

    #[test]
    fn single_mark_closure_is_conforming() {
        let m = lshape_mesh::<f64>(0).unwrap();
        for t in 0..m.n_triangles() {
            let r = refine(&m, &[t]).unwrap();
            assert!(r.n_triangles() >= 7);
            assert_invariants(&r, 3.0);
            // repeated single marks stay conforming
            let r2 = refine(&r, &[0, r.n_triangles() - 1]).unwrap();
            assert_invariants(&r2, 3.0);
        }
    }

    #[test]
    fn refinement_keeps_existing_vertices() {
        let m = lshape_mesh::<f64>(1).unwrap();
        let r = refine(&m, &[0, 5, 9]).unwrap();
        assert_eq!(&r.vertices()[..m.n_vertices()], m.vertices());
    }

    #[test]
    fn grading_concentrates_at_corner() {
        let m = lshape_mesh::<f64>(3).unwrap();
        assert_eq!(grade_toward(&m, [0.0, 0.0], 0).unwrap().triangles(), m.triangles());
        let g = grade_toward(&m, [0.0, 0.0], 6).unwrap();
        assert_invariants(&g, 3.0);
        let smallest = (0..g.n_triangles()).map(|t| g.diameter(t)).fold(f64::INFINITY, f64::min);
        let at_corner = (0..g.n_triangles())
            .filter(|&t| g.triangle(t).iter().any(|&v| g.vertex(v) == [0.0, 0.0]))
            .map(|t| g.diameter(t))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(at_corner, smallest);
        assert!(smallest < m.diameter(0) / 4.0);
    }

    #[test]
    fn budget_is_enforced() {
        let m = lshape_mesh::<f64>(2).unwrap();
        let all: Vec<usize> = (0..m.n_triangles()).collect();
        assert!(matches!(refine_with_budget(&m, &all, 100), Err(MeshError::Budget { .. })));
    }
}
