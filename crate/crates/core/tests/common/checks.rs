//! Library-versus-oracle comparisons shared by the equivalence tests and the acceptance runner.

use std::sync::Arc;

use super::*;
use ieq_fem::assembly::{assemble_mass, assemble_stiffness};
use ieq_fem::fem::{build_space, quad_rule, FeSpace, FieldCoeffs, QuadField};
use ieq_fem::ieq::{AuxState, Method, Scheme};
use ieq_fem::mesh::{build_rect_mesh, Rect};
use ieq_fem::potential::{Equation, EquationCoeffs, Mobility, PotentialSpec};
use ieq_fem::scheme::{LinearSolverKind, State, StepConfig, Stepper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-10;

pub const COMBOS: [(Eq, Sch); 5] = [
    (Eq::Ch, Sch::Bdf1),
    (Eq::Ch, Sch::Bdf2),
    (Eq::Ac, Sch::Bdf1),
    (Eq::Ac, Sch::Bdf2),
    (Eq::Ac, Sch::Cn),
];

/// P1 and P2 spaces on every rectangle split into at most 8 triangles.
pub fn small_spaces() -> Vec<Arc<FeSpace>> {
    let shapes = [
        (Rect::square(0.0, 1.0), 1, 1),
        (Rect::new(-1.0, 2.0, 0.0, 1.0), 2, 1),
        (Rect::new(0.0, 1.0, -0.5, 1.5), 1, 2),
        (Rect::new(-1.0, 1.0, -1.0, 1.0), 2, 2),
    ];
    let mut out = Vec::new();
    for (rect, nx, ny) in shapes {
        for degree in [1, 2] {
            let mesh = build_rect_mesh(rect, nx, ny).unwrap();
            assert!(mesh.triangles.len() <= 8);
            out.push(Arc::new(build_space(mesh, degree, quad_rule(6).unwrap()).unwrap()));
        }
    }
    out
}

fn positive_weight(rng: &mut ChaCha8Rng, sp: &FeSpace) -> QuadField {
    let samples = (0..sp.n_elems() * sp.n_q()).map(|_| 0.2 + rng.random::<f64>()).collect();
    QuadField::new(sp.n_elems(), sp.n_q(), samples).unwrap()
}

fn within(label: &str, d: f64) -> Result<(), String> {
    if d < TOL {
        Ok(())
    } else {
        Err(format!("{label}: relative difference {d:e}"))
    }
}

pub fn check_quadrature(sp: &FeSpace) -> Result<(), String> {
    let o = Oracle::new(sp);
    for (e, el) in o.elems.iter().enumerate() {
        for q in 0..o.nq {
            let p = sp.quad_point(e, q);
            let d = (p[0] - el.points[q][0]).abs().max((p[1] - el.points[q][1]).abs());
            let dw = (sp.quad_weight(e, q) - el.weights[q]).abs();
            if d >= 1e-14 || dw >= 1e-14 {
                return Err(format!("element {e} point {q}: offset {d:e}, weight {dw:e}"));
            }
        }
    }
    Ok(())
}

/// Mass, stiffness (plain and weighted), quadrature evaluation and load vector.
pub fn check_matrices(sp: &FeSpace, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = Oracle::new(sp);
    let wgt = positive_weight(&mut rng, sp);
    let cases = [
        ("mass", assemble_mass(sp, None).unwrap(), o.mass(None)),
        ("stiffness", assemble_stiffness(sp, None).unwrap(), o.stiffness(None)),
        ("weighted mass", assemble_mass(sp, Some(&wgt)).unwrap(), o.mass(Some(&wgt.samples))),
        ("weighted stiffness", assemble_stiffness(sp, Some(&wgt)).unwrap(), o.stiffness(Some(&wgt.samples))),
    ];
    let tag = format!("P{} {} cells", sp.degree, sp.n_elems());
    for (name, lib, dense) in &cases {
        within(&format!("{name}, {tag}"), rel_diff_dense(&lib.to_dense(), dense))?;
    }
    let c: Vec<f64> = (0..sp.n_dofs).map(|_| rng.random::<f64>() - 0.5).collect();
    within(&format!("eval_at_quad, {tag}"), rel_diff(&sp.eval_at_quad(&FieldCoeffs::new(c.clone())).samples, &o.eval(&c)))?;
    within(&format!("load vector, {tag}"), rel_diff(&sp.load_vector(&wgt), &o.load(&wgt.samples)))
}

fn random_nodal(rng: &mut ChaCha8Rng, n: usize) -> FieldCoeffs {
    FieldCoeffs::new((0..n).map(|_| 1.6 * rng.random::<f64>() - 0.8).collect())
}

fn levels_of(o: &Oracle, st: &State) -> Levels {
    let aux = |a: &AuxState| match a {
        AuxState::M1 { u_h } => u_h.values.clone(),
        AuxState::M2 { u_q } => u_q.samples.clone(),
        AuxState::M3 { shadow, .. } => o.eval(&shadow.values),
    };
    Levels {
        u: st.u.values.clone(),
        aux: aux(&st.aux),
        u_prev: st.u_prev.as_ref().map(|u| u.values.clone()),
        aux_prev: st.aux_prev.as_ref().map(aux),
    }
}

/// One library step against the dense weak-form step from the same random data.
pub fn check_step(sp: &Arc<FeSpace>, eq: Eq, sch: Sch, method: usize, dt: f64, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c_grad, c_pot, mobility, b) = (0.3, 1.7, 0.8, 2.0);
    let src = |x: f64, y: f64, t: f64| (x + 2.0 * t).sin() * (1.0 + y * y);
    let mut cfg = StepConfig::new(
        dt,
        [Method::M1, Method::M2, Method::M3][method - 1],
        match sch {
            Sch::Bdf1 => Scheme::Bdf1,
            Sch::Bdf2 => Scheme::Bdf2,
            Sch::Cn => Scheme::Cn,
        },
        EquationCoeffs::new(c_grad, c_pot, Mobility::Constant(mobility)).unwrap(),
        PotentialSpec::double_well(b).unwrap(),
    );
    cfg.source = Some(Arc::new(src));
    cfg.solver = LinearSolverKind::Direct;
    let equation = match eq {
        Eq::Ch => Equation::CahnHilliard,
        Eq::Ac => Equation::AllenCahn,
    };
    let mut stepper = Stepper::new(Arc::clone(sp), equation, cfg).unwrap();
    let mut st = stepper.init_from_nodal(random_nodal(&mut rng, sp.n_dofs)).unwrap();
    st.step = 3;
    st.time = 3.0 * dt;
    if sch != Sch::Bdf1 {
        let prev = stepper.init_from_nodal(random_nodal(&mut rng, sp.n_dofs)).unwrap();
        st.u_prev = Some(prev.u);
        st.aux_prev = Some(prev.aux);
    }
    let o = Oracle::new(sp);
    let data = StepData {
        eq,
        scheme: sch,
        method,
        dt,
        c_grad,
        c_pot,
        mobility,
        b,
        t_n: st.time,
        source: Some(&src),
    };
    let want = oracle_step(&o, &data, &levels_of(&o, &st));
    let (next, _) = stepper.step(&st).map_err(|e| e.to_string())?;
    let label = format!("{eq:?} {sch:?} M{method} P{} {} cells dt {dt}", sp.degree, sp.n_elems());
    within(&format!("{label}: u"), rel_diff(&next.u.values, &want.u))?;
    if let Some(w) = &want.w {
        within(&format!("{label}: w"), rel_diff(&next.w.as_ref().expect("w").values, w))?;
    }
    match &next.aux {
        AuxState::M1 { u_h } => within(&format!("{label}: U_h"), rel_diff(&u_h.values, &want.aux))?,
        AuxState::M2 { u_q } => within(&format!("{label}: U"), rel_diff(&u_q.samples, &want.aux))?,
        AuxState::M3 { u_q, shadow } => {
            within(&format!("{label}: U"), rel_diff(&u_q.samples, &want.aux))?;
            within(&format!("{label}: Pi U"), rel_diff(&shadow.values, want.shadow.as_ref().unwrap()))?;
        }
    }
    if (next.time - (st.time + dt)).abs() >= 1e-15 {
        return Err(format!("{label}: time {} after step from {}", next.time, st.time));
    }
    Ok(())
}

/// Every equivalence check; returns the number of comparisons made.
pub fn check_all() -> Result<usize, String> {
    let mut count = 0;
    let mut seed = 0;
    for sp in small_spaces() {
        check_quadrature(&sp)?;
        seed += 1;
        check_matrices(&sp, 1000 + seed)?;
        count += 2;
        for (eq, sch) in COMBOS {
            for method in 1..=3 {
                for dt in [1e-3, 0.5] {
                    seed += 1;
                    check_step(&sp, eq, sch, method, dt, seed)?;
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}
