use nalgebra::{Matrix2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shellvi_core::geometry::*;

fn cap() -> ImmersionSpec {
    ImmersionSpec::reference_cap()
}

fn random_point(rng: &mut ChaCha8Rng, r: f64) -> [f64; 2] {
    loop {
        let y = [rng.random_range(-r..r), rng.random_range(-r..r)];
        if y[0].hypot(y[1]) < r {
            return y;
        }
    }
}

fn close(fd: f64, an: f64, rel: f64) -> bool {
    (fd - an).abs() <= rel * an.abs().max(1.0)
}

#[test]
fn pointwise_identities_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let y = random_point(&mut rng, 0.5);
        let g = eval_geometry(&cap(), y).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g.a_con[j].dot(&g.a_cov[i]) - want).abs() <= 1e-10);
            }
        }
        assert!((g.a_upper * g.a_lower - Matrix2::identity()).abs().max() <= 1e-10);
        assert!((g.a_lower - g.a_lower.transpose()).abs().max() == 0.0);
        assert!(g.a_lower.symmetric_eigenvalues().min() > 0.0);
        assert!((g.b_lower[(0, 1)] - g.b_lower[(1, 0)]).abs() <= 1e-10);
        for s in 0..2 {
            assert!((g.christoffel[s][0][1] - g.christoffel[s][1][0]).abs() <= 1e-10);
        }
        for a in 0..2 {
            let w = g.d_normal[a] + g.a_cov[0] * g.b_mixed[(0, a)] + g.a_cov[1] * g.b_mixed[(1, a)];
            assert!(w.abs().max() <= 1e-12);
        }
        assert!((g.sqrt_a - g.a_lower.determinant().sqrt()).abs() <= 1e-12);
    }
}

#[test]
fn normal_derivative_matches_differentiated_cross_product() {
    // independent of the Weingarten route used by eval_geometry
    let spec = cap();
    let normal = |y: [f64; 2]| {
        let j = spec.jet(y).unwrap();
        let c = j.d1[0].cross(&j.d1[1]);
        c / c.norm()
    };
    let y = [0.3, 0.1];
    let g = eval_geometry(&spec, y).unwrap();
    let h = 1e-6;
    for a in 0..2 {
        let mut yp = y;
        let mut ym = y;
        yp[a] += h;
        ym[a] -= h;
        let fd = (normal(yp) - normal(ym)) / (2.0 * h);
        assert!((fd - g.d_normal[a]).abs().max() <= 1e-8);
    }
}

#[test]
fn chart_derivatives_match_central_differences() {
    let spec = cap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = 1e-5;
    for _ in 0..100 {
        let y = random_point(&mut rng, 0.49);
        let j = spec.jet(y).unwrap();
        for a in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[a] += h;
            ym[a] -= h;
            let (jp, jm) = (spec.jet(yp).unwrap(), spec.jet(ym).unwrap());
            let d1 = (jp.value - jm.value) / (2.0 * h);
            for i in 0..3 {
                assert!(close(d1[i], j.d1[a][i], 1e-6));
                for b in 0..2 {
                    let d2 = (jp.d1[b][i] - jm.d1[b][i]) / (2.0 * h);
                    assert!(close(d2, j.d2[b][a][i], 1e-6));
                    for c in 0..2 {
                        let d3 = (jp.d2[b][c][i] - jm.d2[b][c][i]) / (2.0 * h);
                        assert!(close(d3, j.d3[b][c][a][i], 1e-6));
                    }
                }
            }
        }
        // second derivatives straight from positions, at the looser accuracy
        // a second difference allows
        let hh = 1e-4;
        for a in 0..2 {
            for b in 0..2 {
                let shift = |da: f64, db: f64| {
                    let mut p = y;
                    p[a] += da;
                    p[b] += db;
                    spec.theta(p).unwrap()
                };
                let fd = (shift(hh, hh) - shift(hh, -hh) - shift(-hh, hh) + shift(-hh, -hh)) / (4.0 * hh * hh);
                for i in 0..3 {
                    assert!(close(fd[i], j.d2[a][b][i], 1e-6));
                }
            }
        }
    }
}

#[test]
fn first_derivatives_of_geometry_match_central_differences() {
    let spec = cap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let h = 1e-6;
    for _ in 0..50 {
        let y = random_point(&mut rng, 0.49);
        let (_, dg) = eval_geometry_derivatives(&spec, y).unwrap();
        for c in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[c] += h;
            ym[c] -= h;
            let gp = eval_geometry(&spec, yp).unwrap();
            let gm = eval_geometry(&spec, ym).unwrap();
            let tol = 1e-7;
            assert!(((gp.a_upper - gm.a_upper) / (2.0 * h) - dg.d_a_upper[c]).abs().max() <= tol);
            assert!(((gp.b_lower - gm.b_lower) / (2.0 * h) - dg.d_b_lower[c]).abs().max() <= tol);
            assert!(((gp.b_mixed - gm.b_mixed) / (2.0 * h) - dg.d_b_mixed[c]).abs().max() <= tol);
            for i in 0..3 {
                let fd = (gp.a_con[i] - gm.a_con[i]) / (2.0 * h);
                assert!((fd - dg.d_a_con[c][i]).abs().max() <= tol);
            }
            for a in 0..2 {
                let fd = (gp.d_normal[a] - gm.d_normal[a]) / (2.0 * h);
                assert!((fd - dg.d2_normal[c][a]).abs().max() <= tol);
            }
        }
    }
}

#[test]
fn gauss_curvature_at_apex_from_finite_differences() {
    // curvature of the graph z = f(y) at a critical point is det(∇²f)
    let spec = cap();
    let h = 1e-4;
    let f = |a: f64, b: f64| spec.theta([a, b]).unwrap().z;
    let fxx = (f(h, 0.0) - 2.0 * f(0.0, 0.0) + f(-h, 0.0)) / (h * h);
    let fyy = (f(0.0, h) - 2.0 * f(0.0, 0.0) + f(0.0, -h)) / (h * h);
    let fxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
    let k_fd = fxx * fyy - fxy * fxy;
    let g = eval_geometry(&spec, [0.0, 0.0]).unwrap();
    assert!((k_fd - 1.0).abs() < 1e-6);
    assert!((g.gauss_k - 1.0).abs() < 1e-14);
}

#[test]
fn surface_is_elliptic_on_the_closed_disk() {
    // the cap is part of a unit sphere, so K should be 1 everywhere
    let spec = cap();
    let mut k_min = f64::INFINITY;
    for i in 0..=60 {
        let r = 0.5 * i as f64 / 60.0;
        for j in 0..120 {
            let t = std::f64::consts::TAU * j as f64 / 120.0;
            let g = eval_geometry(&spec, [r * t.cos(), r * t.sin()]).unwrap();
            k_min = k_min.min(g.gauss_k);
        }
    }
    assert!(k_min > 0.99, "min K = {k_min}");
}

#[test]
fn elasticity_tensor_symmetries_and_coercivity() {
    let spec = cap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (lambda, mu) = (0.4, 0.012);
    for _ in 0..200 {
        let y = random_point(&mut rng, 0.5);
        let g = eval_geometry(&spec, y).unwrap();
        let c = elasticity_tensor(&g, lambda, mu).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for s in 0..2 {
                    for t in 0..2 {
                        let v = c.get(a, b, s, t);
                        assert!((v - c.get(b, a, s, t)).abs() < 1e-15);
                        assert!((v - c.get(a, b, t, s)).abs() < 1e-15);
                        assert!((v - c.get(s, t, a, b)).abs() < 1e-15);
                    }
                }
            }
        }
        let (x, z, w) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let t = Matrix2::new(x, w, w, z);
        let lam_min = g.a_upper.symmetric_eigenvalues().min();
        let lower = 2.0 * mu * t.norm_squared() * lam_min * lam_min;
        assert!(c.bilinear(&t, &t) >= lower * (1.0 - 1e-12));
        assert!(c.bilinear(&t, &t) > 0.0);
    }
}

#[test]
fn rim_points_are_admissible() {
    let g = eval_geometry(&cap(), [0.5, 0.0]).unwrap();
    assert!(g.theta.z > 0.0);
    let v = Vector3::new(0.5, 0.0, 0.75f64.sqrt() - 0.85);
    assert!((g.theta - v).norm() < 1e-15);
}
