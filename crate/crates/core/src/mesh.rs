//! Structured triangulations of axis-aligned rectangles.
//!
//! Vertices are numbered row by row (`j * (nx + 1) + i`), and every cell is
//! split along its lower-left to upper-right diagonal into a lower and an
//! upper triangle, both counterclockwise.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Rect::new(lo, hi, lo, hi)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub side: Side,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
}

/// Affine map from the reference triangle (0,0),(1,0),(0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElemGeom {
    /// Columns are the edge vectors `p1 - p0` and `p2 - p0`.
    pub jacobian: [[f64; 2]; 2],
    pub det_j: f64,
    pub inv_jt: [[f64; 2]; 2],
    pub area: f64,
    pub origin: [f64; 2],
}

impl ElemGeom {
    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    /// Pulls a reference gradient back to physical coordinates.
    pub fn grad(&self, ref_grad: [f64; 2]) -> [f64; 2] {
        let m = &self.inv_jt;
        [
            m[0][0] * ref_grad[0] + m[0][1] * ref_grad[1],
            m[1][0] * ref_grad[0] + m[1][1] * ref_grad[1],
        ]
    }
}

pub fn build_rect_mesh(domain: Rect, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 {
        return Err(Error::config("mesh.nx", "must be at least 1"));
    }
    if ny == 0 {
        return Err(Error::config("mesh.ny", "must be at least 1"));
    }
    let finite = [domain.x0, domain.x1, domain.y0, domain.y1]
        .iter()
        .all(|v| v.is_finite());
    if !finite || domain.x1 <= domain.x0 || domain.y1 <= domain.y0 {
        return Err(Error::config("mesh.domain", "rectangle must satisfy x1 > x0 and y1 > y0"));
    }

    let hx = (domain.x1 - domain.x0) / nx as f64;
    let hy = (domain.y1 - domain.y0) / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // pin the last row/column to the exact boundary coordinate
        let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
        for i in 0..=nx {
            let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
            vertices.push([x, y]);
        }
    }

    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(i, 0), vid(i + 1, 0)],
            side: Side::Bottom,
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(nx, j), vid(nx, j + 1)],
            side: Side::Right,
        });
    }
    for i in (0..nx).rev() {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(i + 1, ny), vid(i, ny)],
            side: Side::Top,
        });
    }
    for j in (0..ny).rev() {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(0, j + 1), vid(0, j)],
            side: Side::Left,
        });
    }

    Ok(Mesh {
        vertices,
        triangles,
        boundary_edges,
        domain,
        nx,
        ny,
    })
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn element_geometry(&self, elem: usize) -> ElemGeom {
        let [a, b, c] = self.triangles[elem];
        let p0 = self.vertices[a];
        let p1 = self.vertices[b];
        let p2 = self.vertices[c];
        let jacobian = [
            [p1[0] - p0[0], p2[0] - p0[0]],
            [p1[1] - p0[1], p2[1] - p0[1]],
        ];
        let det_j = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        let inv_det = 1.0 / det_j;
        // (J^{-1})^T
        let inv_jt = [
            [jacobian[1][1] * inv_det, -jacobian[1][0] * inv_det],
            [-jacobian[0][1] * inv_det, jacobian[0][0] * inv_det],
        ];
        ElemGeom {
            jacobian,
            det_j,
            inv_jt,
            area: 0.5 * det_j,
            origin: p0,
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles())
            .map(|e| self.element_geometry(e).area)
            .sum()
    }

    /// Sorted edge list with the number of incident triangles per edge.
    pub fn edge_incidence(&self) -> BTreeMap<(usize, usize), usize> {
        let mut counts = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Smallest bounding-box edge length of the cells.
    pub fn h(&self) -> f64 {
        let hx = (self.domain.x1 - self.domain.x0) / self.nx as f64;
        let hy = (self.domain.y1 - self.domain.y0) / self.ny as f64;
        hx.max(hy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_single_cell() {
        let m = build_rect_mesh(Rect::square(0.0, 1.0), 1, 1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two() {
        let m = build_rect_mesh(Rect::square(0.0, 1.0), 2, 2).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_triangles(), 8);
        assert_eq!(m.boundary_edges.len(), 8);
    }

    #[test]
    fn large_domain_area() {
        let pi = std::f64::consts::PI;
        let m = build_rect_mesh(Rect::square(-pi, 3.0 * pi), 200, 200).unwrap();
        let expected = (4.0 * pi).powi(2);
        assert!(((m.total_area() - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let r = Rect::square(0.0, 1.0);
        assert!(matches!(build_rect_mesh(r, 0, 2), Err(Error::Config { key, .. }) if key == "mesh.nx"));
        assert!(matches!(build_rect_mesh(r, 2, 0), Err(Error::Config { key, .. }) if key == "mesh.ny"));
        assert!(build_rect_mesh(Rect::new(1.0, 1.0, 0.0, 1.0), 2, 2).is_err());
        assert!(build_rect_mesh(Rect::new(0.0, 1.0, 2.0, 1.0), 2, 2).is_err());
    }

    #[test]
    fn reference_geometry() {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 0.0], [0.0, 2.0]],
            triangles: vec![[0, 1, 2], [0, 3, 4]],
            boundary_edges: vec![],
            domain: Rect::square(0.0, 2.0),
            nx: 1,
            ny: 1,
        };
        let g = mesh.element_geometry(0);
        assert_eq!(g.jacobian, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g.area, 0.5);
        let g = mesh.element_geometry(1);
        assert_eq!(g.det_j, 4.0);
        assert_eq!(g.area, 2.0);
    }

    #[test]
    fn geometry_maps_reference_vertices() {
        let m = build_rect_mesh(Rect::new(-1.0, 2.5, 0.3, 1.1), 5, 3).unwrap();
        for e in 0..m.n_triangles() {
            let g = m.element_geometry(e);
            assert!(g.det_j > 0.0);
            assert!((g.area - g.det_j / 2.0).abs() < 1e-15);
            for (k, xi) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
                let p = g.map(*xi);
                let v = m.vertices[m.triangles[e][k]];
                assert!((p[0] - v[0]).abs() < 1e-14 && (p[1] - v[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn edge_incidence_counts() {
        for (nx, ny) in [(1, 1), (3, 2), (7, 5)] {
            let m = build_rect_mesh(Rect::square(0.0, 1.0), nx, ny).unwrap();
            let boundary: std::collections::BTreeSet<_> = m
                .boundary_edges
                .iter()
                .map(|e| (e.vertices[0].min(e.vertices[1]), e.vertices[0].max(e.vertices[1])))
                .collect();
            for (edge, count) in m.edge_incidence() {
                if boundary.contains(&edge) {
                    assert_eq!(count, 1, "boundary edge {edge:?}");
                } else {
                    assert_eq!(count, 2, "interior edge {edge:?}");
                }
            }
        }
    }
}
