//! Lagrange P1/P2 spaces on triangle meshes with one shared quadrature rule.

pub mod quadrature;

use std::sync::Arc;

pub use quadrature::{quad_rule, QuadRule, DEFAULT_QUAD_DEGREE};

use crate::error::{Error, Result};
use crate::mesh::{ElemGeom, Mesh};
use crate::sparse::{solve_cg, CsrPattern, SparseMatrix};

/// Relative residual for the projection mass solve.
pub const PROJECTION_TOL: f64 = 1e-14;

/// Nodal coefficient vector of a finite-element function.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCoeffs {
    pub values: Vec<f64>,
}

impl FieldCoeffs {
    pub fn new(values: Vec<f64>) -> Self {
        FieldCoeffs { values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        FieldCoeffs { values: vec![c; n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &FieldCoeffs, b: f64) -> FieldCoeffs {
        assert_eq!(self.len(), other.len(), "coefficient lengths differ");
        FieldCoeffs {
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        }
    }
}

/// Scalar samples at every (element, quadrature point) pair, element-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadField {
    pub n_elems: usize,
    pub n_q: usize,
    pub samples: Vec<f64>,
}

impl QuadField {
    pub fn new(n_elems: usize, n_q: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != n_elems * n_q {
            return Err(Error::Structural(format!(
                "quadrature field needs {} samples, got {}",
                n_elems * n_q,
                samples.len()
            )));
        }
        Ok(QuadField { n_elems, n_q, samples })
    }

    pub fn constant(n_elems: usize, n_q: usize, c: f64) -> Self {
        QuadField {
            n_elems,
            n_q,
            samples: vec![c; n_elems * n_q],
        }
    }

    pub fn get(&self, elem: usize, q: usize) -> f64 {
        self.samples[elem * self.n_q + q]
    }

    pub fn same_shape(&self, other: &QuadField) -> bool {
        self.n_elems == other.n_elems && self.n_q == other.n_q
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QuadField {
        QuadField {
            n_elems: self.n_elems,
            n_q: self.n_q,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64>) -> Result<QuadField> {
        Ok(QuadField {
            n_elems: self.n_elems,
            n_q: self.n_q,
            samples: self.samples.iter().map(|&v| f(v)).collect::<Result<_>>()?,
        })
    }

    pub fn zip_map(&self, other: &QuadField, f: impl Fn(f64, f64) -> f64) -> QuadField {
        assert!(self.same_shape(other), "quadrature field shapes differ");
        QuadField {
            n_elems: self.n_elems,
            n_q: self.n_q,
            samples: self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &QuadField, b: f64) -> QuadField {
        self.zip_map(other, |x, y| a * x + b * y)
    }
}

/// Reference basis values at `xi`, local order: vertices then edges (0,1),(1,2),(2,0).
pub fn ref_basis(degree: usize, xi: [f64; 2]) -> Vec<f64> {
    let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
    match degree {
        1 => l.to_vec(),
        2 => vec![
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ],
        _ => panic!("unsupported degree {degree}"),
    }
}

pub fn ref_basis_grads(degree: usize, xi: [f64; 2]) -> Vec<[f64; 2]> {
    let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
    let g = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    match degree {
        1 => g.to_vec(),
        2 => {
            let vert = |i: usize| {
                let c = 4.0 * l[i] - 1.0;
                [c * g[i][0], c * g[i][1]]
            };
            let edge = |a: usize, b: usize| {
                [
                    4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
                    4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
                ]
            };
            vec![vert(0), vert(1), vert(2), edge(0, 1), edge(1, 2), edge(2, 0)]
        }
        _ => panic!("unsupported degree {degree}"),
    }
}

/// Reference coordinates of the local nodes.
pub fn ref_nodes(degree: usize) -> Vec<[f64; 2]> {
    let mut nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    if degree == 2 {
        nodes.extend([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]);
    }
    nodes
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Mesh,
    pub degree: usize,
    pub n_dofs: usize,
    pub dof_coords: Vec<[f64; 2]>,
    pub quad: QuadRule,
    n_loc: usize,
    elem_dofs: Vec<usize>,
    basis_tab: Vec<f64>,
    grad_tab: Vec<[f64; 2]>,
    geoms: Vec<ElemGeom>,
    quad_points: Vec<[f64; 2]>,
    pattern: Arc<CsrPattern>,
    scatter: Vec<usize>,
}

pub fn build_space(mesh: Mesh, degree: usize, quad: QuadRule) -> Result<FeSpace> {
    if degree != 1 && degree != 2 {
        return Err(Error::config("mesh.degree", format!("degree must be 1 or 2, got {degree}")));
    }
    if quad.degree < 2 * degree {
        return Err(Error::config(
            "mesh.quad_degree",
            format!("quadrature degree {} is below 2k = {}", quad.degree, 2 * degree),
        ));
    }
    let n_loc = if degree == 1 { 3 } else { 6 };
    let n_v = mesh.n_vertices();
    let mut dof_coords = mesh.vertices.clone();
    let mut elem_dofs = Vec::with_capacity(n_loc * mesh.n_triangles());
    if degree == 1 {
        for t in &mesh.triangles {
            elem_dofs.extend_from_slice(t);
        }
    } else {
        let edges: Vec<(usize, usize)> = mesh.edge_incidence().into_keys().collect();
        for &(a, b) in &edges {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            dof_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        let edge_id = |a: usize, b: usize| {
            let key = (a.min(b), a.max(b));
            n_v + edges.binary_search(&key).expect("edge present")
        };
        for t in &mesh.triangles {
            elem_dofs.extend_from_slice(t);
            elem_dofs.push(edge_id(t[0], t[1]));
            elem_dofs.push(edge_id(t[1], t[2]));
            elem_dofs.push(edge_id(t[2], t[0]));
        }
    }
    let n_dofs = dof_coords.len();

    let n_q = quad.len();
    let mut basis_tab = Vec::with_capacity(n_q * n_loc);
    let mut grad_tab = Vec::with_capacity(n_q * n_loc);
    for p in &quad.points {
        basis_tab.extend(ref_basis(degree, *p));
        grad_tab.extend(ref_basis_grads(degree, *p));
    }

    let geoms: Vec<ElemGeom> = (0..mesh.n_triangles()).map(|e| mesh.element_geometry(e)).collect();
    let quad_points = geoms
        .iter()
        .flat_map(|g| quad.points.iter().map(move |p| g.map(*p)))
        .collect();

    let mut coords = Vec::with_capacity(elem_dofs.len() * n_loc);
    for dofs in elem_dofs.chunks(n_loc) {
        for &i in dofs {
            for &j in dofs {
                coords.push((i, j));
            }
        }
    }
    let pattern = Arc::new(CsrPattern::from_coords(n_dofs, n_dofs, &coords));
    let scatter = coords
        .iter()
        .map(|&(i, j)| pattern.find(i, j).expect("pattern built from these coordinates"))
        .collect();

    Ok(FeSpace {
        mesh,
        degree,
        n_dofs,
        dof_coords,
        quad,
        n_loc,
        elem_dofs,
        basis_tab,
        grad_tab,
        geoms,
        quad_points,
        pattern,
        scatter,
    })
}

impl FeSpace {
    pub fn n_elems(&self) -> usize {
        self.geoms.len()
    }

    pub fn n_q(&self) -> usize {
        self.quad.len()
    }

    pub fn n_loc(&self) -> usize {
        self.n_loc
    }

    pub fn elem_dofs(&self, elem: usize) -> &[usize] {
        &self.elem_dofs[elem * self.n_loc..(elem + 1) * self.n_loc]
    }

    pub fn geom(&self, elem: usize) -> &ElemGeom {
        &self.geoms[elem]
    }

    /// Basis function `i` at reference quadrature point `q`.
    pub fn basis(&self, q: usize, i: usize) -> f64 {
        self.basis_tab[q * self.n_loc + i]
    }

    pub fn basis_row(&self, q: usize) -> &[f64] {
        &self.basis_tab[q * self.n_loc..(q + 1) * self.n_loc]
    }

    pub fn ref_grad(&self, q: usize, i: usize) -> [f64; 2] {
        self.grad_tab[q * self.n_loc + i]
    }

    pub fn ref_grad_row(&self, q: usize) -> &[[f64; 2]] {
        &self.grad_tab[q * self.n_loc..(q + 1) * self.n_loc]
    }

    pub fn phys_grad(&self, elem: usize, q: usize, i: usize) -> [f64; 2] {
        self.geoms[elem].grad(self.ref_grad(q, i))
    }

    /// Physical coordinates of quadrature point `q` of `elem`.
    pub fn quad_point(&self, elem: usize, q: usize) -> [f64; 2] {
        self.quad_points[elem * self.n_q() + q]
    }

    /// `w_q * det_j`
    pub fn quad_weight(&self, elem: usize, q: usize) -> f64 {
        self.quad.weights[q] * self.geoms[elem].det_j
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    /// CSR value positions of the local `n_loc x n_loc` block of `elem`, row-major.
    pub fn scatter(&self, elem: usize) -> &[usize] {
        let m = self.n_loc * self.n_loc;
        &self.scatter[elem * m..(elem + 1) * m]
    }

    pub fn check_coeffs(&self, c: &FieldCoeffs) -> Result<()> {
        if c.len() != self.n_dofs {
            return Err(Error::Structural(format!(
                "coefficient vector has length {}, space has {} dofs",
                c.len(),
                self.n_dofs
            )));
        }
        Ok(())
    }

    pub fn check_quad(&self, f: &QuadField) -> Result<()> {
        if f.n_elems != self.n_elems() || f.n_q != self.n_q() {
            return Err(Error::Structural(format!(
                "quadrature field shape ({}, {}) does not match space ({}, {})",
                f.n_elems,
                f.n_q,
                self.n_elems(),
                self.n_q()
            )));
        }
        Ok(())
    }

    pub fn eval_at_quad(&self, c: &FieldCoeffs) -> QuadField {
        assert_eq!(c.len(), self.n_dofs, "coefficients do not belong to this space");
        let n_q = self.n_q();
        let mut samples = Vec::with_capacity(self.n_elems() * n_q);
        for e in 0..self.n_elems() {
            let dofs = self.elem_dofs(e);
            for q in 0..n_q {
                samples.push(self.basis_row(q).iter().zip(dofs).map(|(phi, &d)| phi * c.values[d]).sum());
            }
        }
        QuadField {
            n_elems: self.n_elems(),
            n_q,
            samples,
        }
    }

    /// Physical gradients at quadrature points, element-major.
    pub fn eval_grad_at_quad(&self, c: &FieldCoeffs) -> Vec<[f64; 2]> {
        assert_eq!(c.len(), self.n_dofs, "coefficients do not belong to this space");
        let mut out = Vec::with_capacity(self.n_elems() * self.n_q());
        for e in 0..self.n_elems() {
            let dofs = self.elem_dofs(e);
            let g = &self.geoms[e];
            for q in 0..self.n_q() {
                let mut r = [0.0, 0.0];
                for (gr, &d) in self.ref_grad_row(q).iter().zip(dofs) {
                    r[0] += gr[0] * c.values[d];
                    r[1] += gr[1] * c.values[d];
                }
                out.push(g.grad(r));
            }
        }
        out
    }

    /// Samples a function of position at every quadrature point.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> QuadField {
        QuadField {
            n_elems: self.n_elems(),
            n_q: self.n_q(),
            samples: self.quad_points.iter().map(|p| f(p[0], p[1])).collect(),
        }
    }

    /// Nodal interpolant.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> FieldCoeffs {
        FieldCoeffs {
            values: self.dof_coords.iter().map(|p| f(p[0], p[1])).collect(),
        }
    }

    /// Quadrature inner product of two fields.
    pub fn inner_q(&self, a: &QuadField, b: &QuadField) -> f64 {
        let n_q = self.n_q();
        let mut s = 0.0;
        for e in 0..self.n_elems() {
            let dj = self.geoms[e].det_j;
            for q in 0..n_q {
                let k = e * n_q + q;
                s += self.quad.weights[q] * dj * a.samples[k] * b.samples[k];
            }
        }
        s
    }

    pub fn norm_q(&self, a: &QuadField) -> f64 {
        self.inner_q(a, a).sqrt()
    }

    pub fn integrate(&self, a: &QuadField) -> f64 {
        let n_q = self.n_q();
        let mut s = 0.0;
        for e in 0..self.n_elems() {
            let dj = self.geoms[e].det_j;
            for q in 0..n_q {
                s += self.quad.weights[q] * dj * a.samples[e * n_q + q];
            }
        }
        s
    }

    /// `b_i = sum_e sum_q w_q det_j qf(e,q) phi_i(x_q)`
    pub fn load_vector(&self, qf: &QuadField) -> Vec<f64> {
        assert!(qf.n_elems == self.n_elems() && qf.n_q == self.n_q(), "quadrature field shape");
        let n_q = self.n_q();
        let mut b = vec![0.0; self.n_dofs];
        for e in 0..self.n_elems() {
            let dofs = self.elem_dofs(e);
            let dj = self.geoms[e].det_j;
            for q in 0..n_q {
                let wv = self.quad.weights[q] * dj * qf.samples[e * n_q + q];
                for (phi, &d) in self.basis_row(q).iter().zip(dofs) {
                    b[d] += wv * phi;
                }
            }
        }
        b
    }

    /// L2 projection in the quadrature inner product: solves `G c = b`.
    pub fn l2_project(&self, mass: &SparseMatrix, qf: &QuadField) -> Result<FieldCoeffs> {
        self.check_quad(qf)?;
        if mass.n_rows() != self.n_dofs || mass.n_cols() != self.n_dofs {
            return Err(Error::Structural("mass matrix does not match the space".into()));
        }
        let b = self.load_vector(qf);
        let res = solve_cg(mass, &b, None, PROJECTION_TOL, 20 * self.n_dofs + 100)?;
        Ok(FieldCoeffs::new(res.x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, Rect};

    fn space(n: usize, k: usize) -> FeSpace {
        let mesh = build_rect_mesh(Rect::square(0.0, 1.0), n, n).unwrap();
        build_space(mesh, k, quad_rule(6).unwrap()).unwrap()
    }

    #[test]
    fn dof_counts() {
        assert_eq!(space(1, 1).n_dofs, 4);
        assert_eq!(space(1, 2).n_dofs, 9);
        assert_eq!(space(3, 2).n_dofs, 49);
    }

    #[test]
    fn rejects_low_quadrature() {
        let mesh = build_rect_mesh(Rect::square(0.0, 1.0), 1, 1).unwrap();
        let err = build_space(mesh.clone(), 2, quad_rule(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Config { key, .. } if key == "mesh.quad_degree"));
        assert!(build_space(mesh.clone(), 1, quad_rule(2).unwrap()).is_ok());
        assert!(build_space(mesh, 3, quad_rule(6).unwrap()).is_err());
    }

    #[test]
    fn lagrange_property() {
        for k in [1, 2] {
            let nodes = ref_nodes(k);
            for (a, x) in nodes.iter().enumerate() {
                let phi = ref_basis(k, *x);
                for (b, v) in phi.iter().enumerate() {
                    let expect = if a == b { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_tables() {
        for k in [1, 2] {
            let s = space(2, k);
            for q in 0..s.n_q() {
                let sum: f64 = s.basis_row(q).iter().sum();
                assert!((sum - 1.0).abs() < 1e-13);
                let g = s.ref_grad_row(q).iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
                assert!(g[0].abs() < 1e-13 && g[1].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn p2_edge_dofs_at_midpoints() {
        let s = space(2, 2);
        for e in 0..s.n_elems() {
            let d = s.elem_dofs(e);
            let g = s.geom(e);
            for (loc, xi) in ref_nodes(2).iter().enumerate() {
                let p = g.map(*xi);
                let c = s.dof_coords[d[loc]];
                assert!((p[0] - c[0]).abs() < 1e-14 && (p[1] - c[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eval_reproduces_polynomials() {
        for k in [1, 2] {
            let s = space(3, k);
            let c = s.interpolate(|_, _| 2.5);
            assert!(s.eval_at_quad(&c).samples.iter().all(|v| (v - 2.5).abs() < 1e-14));
            assert!(s.eval_grad_at_quad(&c).iter().all(|g| g[0].abs() < 1e-12 && g[1].abs() < 1e-12));
            let c = s.interpolate(|x, _| x);
            let qf = s.eval_at_quad(&c);
            for e in 0..s.n_elems() {
                for q in 0..s.n_q() {
                    assert!((qf.get(e, q) - s.quad_point(e, q)[0]).abs() < 1e-14);
                }
            }
        }
        let s = space(3, 2);
        let c = s.interpolate(|x, y| x * x - x * y + 0.5 * y * y);
        let qf = s.eval_at_quad(&c);
        let gr = s.eval_grad_at_quad(&c);
        for e in 0..s.n_elems() {
            for q in 0..s.n_q() {
                let [x, y] = s.quad_point(e, q);
                assert!((qf.get(e, q) - (x * x - x * y + 0.5 * y * y)).abs() < 1e-13);
                let g = gr[e * s.n_q() + q];
                assert!((g[0] - (2.0 * x - y)).abs() < 1e-12 && (g[1] - (y - x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pattern_scatter_consistent() {
        let s = space(2, 2);
        for e in 0..s.n_elems() {
            let d = s.elem_dofs(e);
            let sc = s.scatter(e);
            for i in 0..s.n_loc() {
                for j in 0..s.n_loc() {
                    assert_eq!(Some(sc[i * s.n_loc() + j]), s.pattern().find(d[i], d[j]));
                }
            }
        }
    }
}
