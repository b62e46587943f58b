//! Dense reference implementations used as test oracles.
//!
//! Basis functions come from a physical-coordinate Vandermonde solve on each
//! element, quadrature points from an affine map written here, and every
//! scheme step from its weak form evaluated as a residual over quadrature
//! points. The linear systems are recovered column by column and solved by
//! dense Gaussian elimination.
#![allow(dead_code)]

pub mod checks;

use ieq_fem::fem::FeSpace;

pub type Dense = Vec<Vec<f64>>;

/// Partial-pivot Gaussian elimination.
pub fn dense_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Dense = a.iter().zip(b).map(|(row, bi)| row.iter().copied().chain([*bi]).collect()).collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
        m.swap(k, p);
        let piv = m[k][k];
        assert!(piv.abs() > 1e-300, "singular dense system");
        for i in k + 1..n {
            let f = m[i][k] / piv;
            if f != 0.0 {
                for j in k..=n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (m[k][n] - s) / m[k][k];
    }
    x
}

pub fn dense_matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

fn monomials(degree: usize, x: f64, y: f64) -> Vec<f64> {
    match degree {
        1 => vec![1.0, x, y],
        2 => vec![1.0, x, y, x * x, x * y, y * y],
        _ => panic!("degree"),
    }
}

fn monomial_grads(degree: usize, x: f64, y: f64) -> Vec<[f64; 2]> {
    match degree {
        1 => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        2 => vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0 * x, 0.0], [y, x], [0.0, 2.0 * y]],
        _ => panic!("degree"),
    }
}

pub struct OracleElem {
    pub dofs: Vec<usize>,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// `phi[q][i]`
    pub phi: Vec<Vec<f64>>,
    pub grad: Vec<Vec<[f64; 2]>>,
}

pub struct Oracle {
    pub n: usize,
    pub nq: usize,
    pub elems: Vec<OracleElem>,
}

impl Oracle {
    pub fn new(space: &FeSpace) -> Oracle {
        let deg = space.degree;
        let nq = space.quad.points.len();
        let elems = (0..space.mesh.triangles.len())
            .map(|e| {
                let [a, b, c] = space.mesh.triangles[e].map(|v| space.mesh.vertices[v]);
                let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
                let points: Vec<[f64; 2]> = space
                    .quad
                    .points
                    .iter()
                    .map(|&[s, t]| [a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]), a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1])])
                    .collect();
                let weights: Vec<f64> = space.quad.weights.iter().map(|w| w * area2).collect();
                let dofs = space.elem_dofs(e).to_vec();
                // columns of the inverse Vandermonde are the basis coefficients
                let nl = dofs.len();
                let vander: Dense = dofs
                    .iter()
                    .map(|&d| {
                        let p = space.dof_coords[d];
                        monomials(deg, p[0], p[1])
                    })
                    .collect();
                let coef: Vec<Vec<f64>> = (0..nl)
                    .map(|i| {
                        let mut rhs = vec![0.0; nl];
                        rhs[i] = 1.0;
                        dense_solve(&vander, &rhs)
                    })
                    .collect();
                let phi = points
                    .iter()
                    .map(|p| {
                        let m = monomials(deg, p[0], p[1]);
                        coef.iter().map(|c| c.iter().zip(&m).map(|(x, y)| x * y).sum()).collect()
                    })
                    .collect();
                let grad = points
                    .iter()
                    .map(|p| {
                        let g = monomial_grads(deg, p[0], p[1]);
                        coef.iter()
                            .map(|c| {
                                let gx = c.iter().zip(&g).map(|(x, y)| x * y[0]).sum();
                                let gy = c.iter().zip(&g).map(|(x, y)| x * y[1]).sum();
                                [gx, gy]
                            })
                            .collect()
                    })
                    .collect();
                OracleElem { dofs, points, weights, phi, grad }
            })
            .collect();
        Oracle { n: space.n_dofs, nq, elems }
    }

    pub fn n_samples(&self) -> usize {
        self.elems.len() * self.nq
    }

    pub fn mass(&self, weight: Option<&[f64]>) -> Dense {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (e, el) in self.elems.iter().enumerate() {
            for q in 0..self.nq {
                let w = el.weights[q] * weight.map_or(1.0, |f| f[e * self.nq + q]);
                for (i, &di) in el.dofs.iter().enumerate() {
                    for (j, &dj) in el.dofs.iter().enumerate() {
                        m[di][dj] += w * el.phi[q][i] * el.phi[q][j];
                    }
                }
            }
        }
        m
    }

    pub fn stiffness(&self, weight: Option<&[f64]>) -> Dense {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (e, el) in self.elems.iter().enumerate() {
            for q in 0..self.nq {
                let w = el.weights[q] * weight.map_or(1.0, |f| f[e * self.nq + q]);
                for (i, &di) in el.dofs.iter().enumerate() {
                    for (j, &dj) in el.dofs.iter().enumerate() {
                        let (gi, gj) = (el.grad[q][i], el.grad[q][j]);
                        m[di][dj] += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    }
                }
            }
        }
        m
    }

    /// Values at all quadrature points, element-major.
    pub fn eval(&self, c: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_samples());
        for el in &self.elems {
            for q in 0..self.nq {
                out.push(el.dofs.iter().enumerate().map(|(i, &d)| c[d] * el.phi[q][i]).sum());
            }
        }
        out
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.elems.iter().flat_map(|el| el.points.iter().map(|p| f(p[0], p[1])).collect::<Vec<_>>()).collect()
    }

    /// `(g, phi_i)` for samples `g`.
    pub fn load(&self, g: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        for (e, el) in self.elems.iter().enumerate() {
            for q in 0..self.nq {
                for (i, &d) in el.dofs.iter().enumerate() {
                    b[d] += el.weights[q] * g[e * self.nq + q] * el.phi[q][i];
                }
            }
        }
        b
    }

    /// `(grad c, grad phi_i)`
    pub fn grad_load(&self, c: &[f64], mobility: f64) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        for el in &self.elems {
            for q in 0..self.nq {
                let mut g = [0.0; 2];
                for (i, &d) in el.dofs.iter().enumerate() {
                    g[0] += c[d] * el.grad[q][i][0];
                    g[1] += c[d] * el.grad[q][i][1];
                }
                for (i, &d) in el.dofs.iter().enumerate() {
                    b[d] += mobility * el.weights[q] * (g[0] * el.grad[q][i][0] + g[1] * el.grad[q][i][1]);
                }
            }
        }
        b
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for (e, el) in self.elems.iter().enumerate() {
            for q in 0..self.nq {
                s += el.weights[q] * f[e * self.nq + q] * g[e * self.nq + q];
            }
        }
        s
    }

    /// L2 projection of samples onto the space.
    pub fn project(&self, g: &[f64]) -> Vec<f64> {
        dense_solve(&self.mass(None), &self.load(g))
    }
}

/// Largest entrywise difference relative to `max(1, max |b|)`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn rel_diff_dense(a: &Dense, b: &Dense) -> f64 {
    let fa: Vec<f64> = a.iter().flatten().copied().collect();
    let fb: Vec<f64> = b.iter().flatten().copied().collect();
    rel_diff(&fa, &fb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eq {
    Ch,
    Ac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sch {
    Bdf1,
    Bdf2,
    Cn,
}

/// Problem data of one oracle step: double-well potential, constant mobility.
#[derive(Clone, Copy)]
pub struct StepData<'a> {
    pub eq: Eq,
    pub scheme: Sch,
    pub method: usize,
    pub dt: f64,
    pub c_grad: f64,
    pub c_pot: f64,
    pub mobility: f64,
    pub b: f64,
    pub t_n: f64,
    pub source: Option<&'a dyn Fn(f64, f64, f64) -> f64>,
}

/// Previous levels as plain data. `aux` is nodal for method 1 and
/// quadrature samples for methods 2/3 (for method 3: the projected values).
pub struct Levels {
    pub u: Vec<f64>,
    pub aux: Vec<f64>,
    pub u_prev: Option<Vec<f64>>,
    pub aux_prev: Option<Vec<f64>>,
}

pub struct StepOut {
    pub u: Vec<f64>,
    pub w: Option<Vec<f64>>,
    /// Method 1: nodal `U_h`; methods 2/3: quadrature samples of `U`.
    pub aux: Vec<f64>,
    /// Method 3: `Pi U`.
    pub shadow: Option<Vec<f64>>,
}

pub fn h_double_well(u: f64, b: f64) -> f64 {
    (u * u * u - u) / (0.25 * (u * u - 1.0).powi(2) + b).sqrt()
}

/// One step from the weak form.
pub fn oracle_step(o: &Oracle, d: &StepData<'_>, lv: &Levels) -> StepOut {
    let n = o.n;
    let ns = o.n_samples();
    let un = &lv.u;
    let up = lv.u_prev.as_ref();
    let hist = || up.expect("history");
    let ustar: Vec<f64> = match d.scheme {
        Sch::Bdf1 => un.clone(),
        Sch::Bdf2 => (0..n).map(|i| 2.0 * un[i] - hist()[i]).collect(),
        Sch::Cn => (0..n).map(|i| 1.5 * un[i] - 0.5 * hist()[i]).collect(),
    };
    let h: Vec<f64> = o.eval(&ustar).iter().map(|&v| h_double_well(v, d.b)).collect();
    let t_src = match d.scheme {
        Sch::Cn => d.t_n + 0.5 * d.dt,
        _ => d.t_n + d.dt,
    };
    let src = d.source.map(|s| o.load(&o.sample(|x, y| s(x, y, t_src))));

    // unknown layout: u | w (CH) | U_h (M1)
    let has_w = d.eq == Eq::Ch;
    let has_aux = d.method == 1;
    let nz = n * (1 + has_w as usize + has_aux as usize);
    let w_off = n;
    let a_off = if has_w { 2 * n } else { n };

    let un_q = o.eval(un);
    let up_q = up.map(|p| o.eval(p));
    // quadrature samples of the previous auxiliary levels
    let aux_q = |v: &Vec<f64>| if d.method == 1 { o.eval(v) } else { v.clone() };
    let an_q = aux_q(&lv.aux);
    let ap_q = lv.aux_prev.as_ref().map(aux_q);

    // time-difference combination of a level triple, e.g. 3x - 4x^n + x^{n-1}
    let diff = |new: f64, now: f64, prev: Option<f64>| match d.scheme {
        Sch::Bdf1 | Sch::Cn => new - now,
        Sch::Bdf2 => 3.0 * new - 4.0 * now + prev.unwrap(),
    };
    let dt_scale = match d.scheme {
        Sch::Bdf1 | Sch::Cn => 1.0 / d.dt,
        Sch::Bdf2 => 1.0 / (2.0 * d.dt),
    };
    let level = |new: f64, now: f64| match d.scheme {
        Sch::Cn => 0.5 * (new + now),
        _ => new,
    };
    // pointwise U^{n+1} from the quadrature relation (methods 2/3)
    let aux_pointwise = |u_q: &[f64]| -> Vec<f64> {
        (0..ns)
            .map(|k| {
                let du = diff(u_q[k], un_q[k], up_q.as_ref().map(|p| p[k]));
                let rhs = 0.5 * h[k] * du;
                match d.scheme {
                    Sch::Bdf2 => (rhs + 4.0 * an_q[k] - ap_q.as_ref().unwrap()[k]) / 3.0,
                    _ => rhs + an_q[k],
                }
            })
            .collect()
    };

    let residual = |z: &[f64]| -> Vec<f64> {
        let u = &z[..n];
        let u_q = o.eval(u);
        let aux_new_q = if has_aux { o.eval(&z[a_off..a_off + n]) } else { aux_pointwise(&u_q) };
        let u_eval: Vec<f64> = (0..n).map(|i| level(u[i], un[i])).collect();
        let aux_eval_q: Vec<f64> = (0..ns).map(|k| level(aux_new_q[k], an_q[k])).collect();
        let hu: Vec<f64> = (0..ns).map(|k| h[k] * aux_eval_q[k]).collect();
        let dudt_q: Vec<f64> = (0..ns).map(|k| dt_scale * diff(u_q[k], un_q[k], up_q.as_ref().map(|p| p[k]))).collect();
        let mut r = vec![0.0; nz];
        let time = o.load(&dudt_q);
        match d.eq {
            Eq::Ch => {
                let w = &z[w_off..w_off + n];
                let flux = o.grad_load(w, d.mobility);
                let wq = o.load(&o.eval(w));
                let lap = o.grad_load(&u_eval, d.c_grad);
                let pot = o.load(&hu);
                for i in 0..n {
                    r[i] = time[i] + flux[i] - src.as_ref().map_or(0.0, |s| s[i]);
                    r[w_off + i] = wq[i] - lap[i] - d.c_pot * pot[i];
                }
            }
            Eq::Ac => {
                let lap = o.grad_load(&u_eval, d.c_grad);
                let pot = o.load(&hu);
                for i in 0..n {
                    r[i] = time[i] + lap[i] + d.c_pot * pot[i] - src.as_ref().map_or(0.0, |s| s[i]);
                }
            }
        }
        if has_aux {
            let rel: Vec<f64> = (0..ns)
                .map(|k| {
                    diff(aux_new_q[k], an_q[k], ap_q.as_ref().map(|p| p[k]))
                        - 0.5 * h[k] * diff(u_q[k], un_q[k], up_q.as_ref().map(|p| p[k]))
                })
                .collect();
            let g = o.load(&rel);
            r[a_off..a_off + n].copy_from_slice(&g);
        }
        r
    };

    let zero = vec![0.0; nz];
    let r0 = residual(&zero);
    let mut jac = vec![vec![0.0; nz]; nz];
    let mut e = vec![0.0; nz];
    for j in 0..nz {
        e[j] = 1.0;
        let rj = residual(&e);
        for i in 0..nz {
            jac[i][j] = rj[i] - r0[i];
        }
        e[j] = 0.0;
    }
    let neg: Vec<f64> = r0.iter().map(|v| -v).collect();
    let z = dense_solve(&jac, &neg);
    let u = z[..n].to_vec();
    let w = has_w.then(|| z[w_off..w_off + n].to_vec());
    if has_aux {
        StepOut { u, w, aux: z[a_off..a_off + n].to_vec(), shadow: None }
    } else {
        let aux = aux_pointwise(&o.eval(&u));
        let shadow = (d.method == 3).then(|| o.project(&aux));
        StepOut { u, w, aux, shadow }
    }
}
