use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shellvi_core::assembly::*;
use shellvi_core::forms::{gamma_tilde, rho_tilde, rotation_penalty, FieldJet};
use shellvi_core::geometry::{elasticity_tensor, eval_geometry, plane_chart};
use shellvi_core::mesh::{family_mesh, p1_gradients, DofMap, TriMesh, FIELDS};
use shellvi_core::quadrature::{to_physical, Rule};
use shellvi_core::sparse::{Cholesky, SymMatrix};

fn reference_disc(level: usize) -> Discretization {
    Discretization::new(family_mesh(0.5, level).unwrap())
}

fn rel_asymmetry(m: &SymMatrix) -> f64 {
    m.asymmetry() / m.max_abs()
}

#[test]
fn assembled_operators_are_symmetric() {
    let d = reference_disc(2);
    let sys = assemble_linear(&d, &ModelParams::reference(1e-3, LoadProfile::Dome)).unwrap();
    for m in [&sys.a_mem, &sys.a_flex, &sys.p_rot()] {
        assert!(rel_asymmetry(m) <= 1e-12);
    }
}

#[test]
fn single_flat_element_matches_hand_integration() {
    let (lambda, mu, eps) = (0.4, 0.012, 0.001);
    let mesh = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![false; 3], 2.0).unwrap();
    let d = Discretization::new(mesh);
    let mut p = ModelParams::reference(1.0, LoadProfile::None);
    p.surface = plane_chart(0.1, 2.0).unwrap();
    let sys = assemble_linear(&d, &p).unwrap();

    // plane stress-like isotropic form Λ tr γ tr γ' + 4μ γ:γ' over area 1/2
    let big_lambda = 4.0 * lambda * mu / (lambda + 2.0 * mu);
    let g = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let area = 0.5;
    for k in 0..3 {
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i < 2 && j < 2 {
                        let dot = g[k][0] * g[l][0] + g[k][1] * g[l][1];
                        let delta = if i == j { 1.0 } else { 0.0 };
                        eps * area * (big_lambda * g[k][i] * g[l][j] + 2.0 * mu * (dot * delta + g[k][j] * g[l][i]))
                    } else {
                        0.0
                    };
                    let r = d.dofs.dof(k, i);
                    let c = d.dofs.dof(l, j);
                    assert!((sys.a_mem.get(r, c) - want).abs() <= 1e-15, "({k},{i})x({l},{j})");
                    // flat plate: bending acts on the rotation field only
                    assert!(sys.a_flex.get(r, c).abs() <= 1e-18);
                    let rf = d.dofs.dof(k, i + 3);
                    let cf = d.dofs.dof(l, j + 3);
                    assert!((sys.a_flex.get(rf, cf) - want * eps * eps / 3.0).abs() <= 1e-20);
                }
            }
        }
    }
}

/// Energies of a P1 field computed through the pointwise tensors; an
/// assembly path that shares no code with the element B-rows.
fn energies_by_quadrature(d: &Discretization, p: &ModelParams, u: &[f64]) -> (f64, f64, f64, f64) {
    let (mut em, mut ef, mut er, mut el) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..d.mesh.num_triangles() {
        let corners = d.mesh.corners(t);
        let grads = p1_gradients(&corners);
        let tri = d.mesh.triangles[t];
        for qp in Rule::Degree4.points() {
            let y = to_physical(&corners, qp.bary);
            let g = eval_geometry(&p.surface, y).unwrap();
            let c = elasticity_tensor(&g, p.lambda, p.mu).unwrap();
            let mut zeta = FieldJet::zero();
            let mut phi = FieldJet::zero();
            for k in 0..3 {
                let b = d.dofs.base(tri[k]);
                let z = Vector3::new(u[b], u[b + 1], u[b + 2]);
                let f = Vector3::new(u[b + 3], u[b + 4], u[b + 5]);
                zeta.value += z * qp.bary[k];
                phi.value += f * qp.bary[k];
                for a in 0..2 {
                    zeta.grad[a] += z * grads[k][a];
                    phi.grad[a] += f * grads[k][a];
                }
            }
            let w = d.mesh.area(t) * qp.weight;
            let gam = gamma_tilde(&g, &zeta);
            let rho = rho_tilde(&g, &zeta, &phi);
            em += w * g.sqrt_a * p.eps * c.bilinear(&gam, &gam);
            ef += w * g.sqrt_a * p.eps.powi(3) / 3.0 * c.bilinear(&rho, &rho);
            er += w * p.penalty_scale() * rotation_penalty(&g, &zeta, &phi).norm_squared();
            el += w * g.sqrt_a * p.load.density(p.eps, y) * g.normal().dot(&zeta.value);
        }
    }
    (em, ef, er, el)
}

#[test]
fn quadratic_forms_match_pointwise_tensors() {
    let d = reference_disc(1);
    let p = ModelParams::reference(3e-3, LoadProfile::Dome);
    let sys = assemble_linear(&d, &p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let u: Vec<f64> = (0..d.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let quad = |m: &SymMatrix| m.mul(&u).iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        let (em, ef, er, el) = energies_by_quadrature(&d, &p, &u);
        assert!((quad(&sys.a_mem) - em).abs() <= 1e-12 * em.abs());
        assert!((quad(&sys.a_flex) - ef).abs() <= 1e-12 * ef.abs());
        assert!((quad(&sys.p_rot()) - er).abs() <= 1e-12 * er.abs());
        let load: f64 = sys.load_vec.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!((load - el).abs() <= 1e-12 * el.abs());
    }
}

#[test]
fn eliminated_operator_is_positive_definite() {
    let d = reference_disc(1);
    let sys = assemble_linear(&d, &ModelParams::reference(1e-2, LoadProfile::Dome)).unwrap();
    let j = jacobian(&sys, &d, &vec![0.0; d.len()]).unwrap();

    // smallest eigenvalue of the free block by inverse power iteration
    let nf = d.dofs.num_free();
    let mut chol = Cholesky::new(j.pattern().clone()).unwrap();
    chol.factorize(&j).unwrap();
    let mut x: Vec<f64> = (0..d.len()).map(|i| if i < nf { 1.0 + (i as f64).sin() } else { 0.0 }).collect();
    let mut lambda_min = 0.0;
    for _ in 0..500 {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= n);
        let mut y = x.clone();
        chol.solve_in_place(&mut y).unwrap();
        lambda_min = 1.0 / x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        x = y;
    }
    assert!(lambda_min > 0.0);

    let dense = j.to_dense();
    let free = DMatrix::from_fn(nf, nf, |r, c| dense[(r, c)]);
    let exact = free.symmetric_eigenvalues().min();
    assert!(exact > 0.0);
    assert!((lambda_min - exact).abs() <= 1e-6 * exact, "{lambda_min} vs {exact}");
}

fn rel_change(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let diff = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / b.max_abs()
}

#[test]
fn higher_order_quadrature_barely_changes_operators() {
    // the production-scale coarse mesh
    let d = reference_disc(5);
    let mut p = ModelParams::reference(1e-3, LoadProfile::Dome);
    let lo = assemble_linear(&d, &p).unwrap();
    p.rule = Rule::Degree6;
    let hi = assemble_linear(&d, &p).unwrap();
    assert!(rel_change(&lo.a_mem, &hi.a_mem) <= 1e-8);
    assert!(rel_change(&lo.a_flex, &hi.a_flex) <= 1e-8);
    assert!(rel_change(&lo.rot_form, &hi.rot_form) <= 1e-8);
}

#[test]
fn dome_load_pushes_towards_the_plane() {
    let d = reference_disc(3);
    let sys = assemble_linear(&d, &ModelParams::reference(1e-3, LoadProfile::Dome)).unwrap();
    let total_z: f64 = (0..d.mesh.num_vertices()).map(|v| sys.load_vec[d.dofs.dof(v, 2)]).sum();
    assert!(total_z < 0.0);
}

#[test]
fn residual_is_linear_above_the_obstacle() {
    let d = reference_disc(2);
    let sys = assemble_linear(&d, &ModelParams::reference(1e-3, LoadProfile::Dome)).unwrap();
    let mut u = vec![0.0; d.len()];
    for v in 0..d.mesh.num_vertices() {
        if !d.mesh.boundary[v] {
            u[d.dofs.dof(v, 2)] = 0.05;
            u[d.dofs.dof(v, 4)] = -0.3;
        }
    }
    assert_eq!(sys.active_set_size(&d, &u), 0);
    let f = residual(&sys, &d, &u).unwrap();
    let mut lin = sys.linear().mul(&u);
    for (l, b) in lin.iter_mut().zip(&sys.load_vec) {
        *l -= b;
    }
    for c in d.dofs.constrained() {
        lin[c] = 0.0;
    }
    assert_eq!(f, lin);
    let mut k = sys.linear().clone();
    k.eliminate(|i| !d.dofs.is_free(i));
    assert_eq!(jacobian(&sys, &d, &u).unwrap().values, k.values);
}

fn penalty_part(sys: &SystemMatrices, d: &Discretization, u: &[f64]) -> Vec<f64> {
    let f = residual(sys, d, u).unwrap();
    let lin = sys.linear().mul(u);
    f.iter()
        .zip(&lin)
        .zip(&sys.load_vec)
        .enumerate()
        .map(|(i, ((f, l), b))| if d.dofs.is_free(i) { f - (l - b) } else { 0.0 })
        .collect()
}

#[test]
fn obstacle_contribution_scales_with_inverse_kappa() {
    let d = reference_disc(2);
    let mut sys = assemble_linear(&d, &ModelParams::reference(1e-3, LoadProfile::Dome)).unwrap();
    let mut u = vec![0.0; d.len()];
    for v in 0..d.mesh.num_vertices() {
        if !d.mesh.boundary[v] {
            u[d.dofs.dof(v, 2)] = -0.3;
        }
    }
    assert!(sys.active_set_size(&d, &u) > 0);
    let n1 = penalty_part(&sys, &d, &u);
    sys.set_kappa(2e-3).unwrap();
    let n2 = penalty_part(&sys, &d, &u);
    let scale = n1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(scale > 0.0);
    for (a, b) in n1.iter().zip(&n2) {
        assert!((0.5 * a - b).abs() <= 1e-12 * scale);
    }
}

#[test]
fn jacobian_matches_finite_differences_away_from_the_kink() {
    let d = reference_disc(1);
    let sys = assemble_linear(&d, &ModelParams::reference(1e-3, LoadProfile::Dome)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut tested = 0;
    for _ in 0..5000 {
        if tested == 3 {
            break;
        }
        let mut u = vec![0.0; d.len()];
        for i in 0..d.dofs.num_free() {
            u[i] = if i % FIELDS == 2 { rng.random_range(-0.3..0.0) } else { rng.random_range(-0.05..0.05) };
        }
        if sys.gaps(&d, &u).iter().any(|s| s.abs() < 1e-5) {
            continue;
        }
        assert!(sys.active_set_size(&d, &u) > 0);
        tested += 1;
        let dir: Vec<f64> = (0..d.len())
            .map(|i| if d.dofs.is_free(i) { rng.random_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let h = 1e-7;
        let up: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
        let (fp, fm) = (residual(&sys, &d, &up).unwrap(), residual(&sys, &d, &um).unwrap());
        let jd = jacobian(&sys, &d, &u).unwrap().mul(&dir);
        let mut err = 0.0f64;
        let mut size = 0.0f64;
        for i in 0..d.dofs.num_free() {
            err = err.max(((fp[i] - fm[i]) / (2.0 * h) - jd[i]).abs());
            size = size.max(jd[i].abs());
        }
        assert!(err <= 1e-6 * size, "relative FD mismatch {}", err / size);
    }
    assert_eq!(tested, 3, "could not draw states clear of the kink");
}

#[test]
fn assembly_is_independent_of_thread_count() {
    let d = reference_disc(4);
    let p = ModelParams::reference(1e-3, LoadProfile::Dome);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| assemble_linear(&d, &p).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.a_mem.values, b.a_mem.values);
    assert_eq!(a.a_flex.values, b.a_flex.values);
    assert_eq!(a.rot_form.values, b.rot_form.values);
    assert_eq!(a.load_vec, b.load_vec);
}

#[test]
fn dofmap_of_flat_element_has_no_constraints() {
    let mesh = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![false; 3], 2.0).unwrap();
    let d = DofMap::new(&mesh);
    assert_eq!(d.num_free(), d.len());
}
