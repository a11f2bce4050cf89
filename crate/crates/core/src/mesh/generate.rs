use std::collections::HashMap;

use super::{Mesh, MeshError, DEFAULT_TRIANGLE_BUDGET};
use crate::scalar::Real;

/// Structured triangulation of a union of unit squares `[i, i+1] × [j, j+1]`.
///
/// Each square is split into `4^levels` sub-squares, each cut by one diagonal. The
/// diagonal runs through the sub-square corner closest to `focus`, so that the
/// pattern is radial around it. The diagonal is the longest edge of both halves and
/// is their common refinement edge.
pub fn structured_mesh<T: Real>(
    cells: &[(i64, i64)],
    levels: u32,
    focus: [f64; 2],
) -> Result<Mesh<T>, MeshError> {
    let n: i64 = 1i64.checked_shl(levels).filter(|&n| n > 0 && n < (1 << 20)).ok_or(MeshError::Budget {
        triangles: usize::MAX,
        budget: DEFAULT_TRIANGLE_BUDGET,
    })?;
    let count = cells.len().saturating_mul(2).saturating_mul((n * n) as usize);
    if count > DEFAULT_TRIANGLE_BUDGET {
        return Err(MeshError::Budget { triangles: count, budget: DEFAULT_TRIANGLE_BUDGET });
    }

    let h = 1.0 / n as f64;
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices: Vec<[T; 2]> = Vec::new();
    let mut vertex = |i: i64, j: i64, vertices: &mut Vec<[T; 2]>| -> usize {
        *index.entry((i, j)).or_insert_with(|| {
            vertices.push([T::lit(i as f64 * h), T::lit(j as f64 * h)]);
            vertices.len() - 1
        })
    };

    let mut triangles = Vec::with_capacity(count);
    for &(ci, cj) in cells {
        for sj in 0..n {
            for si in 0..n {
                let (i0, j0) = (ci * n + si, cj * n + sj);
                let corners = [(i0, j0), (i0 + 1, j0), (i0 + 1, j0 + 1), (i0, j0 + 1)];
                let dist = |&(i, j): &(i64, i64)| {
                    let (x, y) = (i as f64 * h - focus[0], j as f64 * h - focus[1]);
                    x * x + y * y
                };
                // index of the corner nearest the focus; ties resolved by corner order
                let mut near = 0;
                for k in 1..4 {
                    if dist(&corners[k]) < dist(&corners[near]) - 1e-12 {
                        near = k;
                    }
                }
                let ids: Vec<usize> = corners.iter().map(|&(i, j)| vertex(i, j, &mut vertices)).collect();
                let a = ids[near];
                let c = ids[(near + 2) % 4];
                let b = ids[(near + 1) % 4];
                let d = ids[(near + 3) % 4];
                // corners are counter-clockwise, so (a, c, d) and (c, a, b) are too
                triangles.push([a, c, d]);
                triangles.push([c, a, b]);
            }
        }
    }
    Mesh::new(vertices, triangles)
}

/// `(−1, 1)² \ [0, 1)²` with `6 · 4^levels` triangles.
pub fn lshape_mesh<T: Real>(levels: u32) -> Result<Mesh<T>, MeshError> {
    structured_mesh(&[(-1, -1), (0, -1), (-1, 0)], levels, [0.0, 0.0])
}

/// `((−2, 8) × (−1, 1)) \ ([−2, 0] × [−1, 0])` with `36 · 4^levels` triangles.
pub fn channel_mesh<T: Real>(levels: u32) -> Result<Mesh<T>, MeshError> {
    let mut cells = vec![(-2, 0), (-1, 0)];
    for i in 0..8 {
        cells.push((i, -1));
        cells.push((i, 0));
    }
    structured_mesh(&cells, levels, [0.0, 0.0])
}
