//! Semismooth Newton for the discrete penalised system, continuation in the
//! penalty parameter and H¹ distances between discrete displacement fields.

use crate::assembly::{residual, residual_and_jacobian, Discretization, SystemMatrices};
use crate::error::{Error, Result};
use crate::mesh::{p1_gradients, TriMesh};
use crate::quadrature::Rule;
use crate::sparse::Cholesky;

/// Step halvings allowed per Newton iteration.
const MAX_HALVINGS: usize = 30;

/// Outcome of one nonlinear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    /// Number of Newton steps taken (linear solves).
    pub newton_iters: usize,
    pub final_residual_inf: f64,
    /// Quadrature points with `(θ + ζ̃)·q < 0` at the returned state.
    pub active_set_size: usize,
    /// `‖F‖∞` before each step and at the returned state.
    pub residual_history: Vec<f64>,
    /// Active-set size matching each entry of `residual_history`.
    pub active_history: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-14,
            max_iter: 50,
        }
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `F(u) = 0` from `init`. Each step solves `J(u) δ = −F(u)` with a
/// sparse Cholesky factorization and backtracks on `‖F‖₂` by halving.
///
/// Failing to reach `tol` is reported through `SolveReport::converged`; a
/// Jacobian that is not numerically positive definite is an error.
pub fn newton_solve(
    disc: &Discretization,
    sys: &SystemMatrices,
    init: &[f64],
    opts: NewtonOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if init.len() != disc.len() {
        return Err(Error::DimensionMismatch {
            expected: disc.len(),
            actual: init.len(),
        });
    }
    let mut u = init.to_vec();
    for c in disc.dofs.constrained() {
        u[c] = 0.0;
    }
    let mut chol: Option<Cholesky> = None;
    let mut history = Vec::new();
    let mut active_history = Vec::new();
    let mut iters = 0;

    let (mut f, mut jac, mut active) = residual_and_jacobian(sys, disc, &u)?;
    loop {
        let r_inf = norm_inf(&f);
        history.push(r_inf);
        active_history.push(active);
        if r_inf <= opts.tol || iters >= opts.max_iter {
            let report = SolveReport {
                converged: r_inf <= opts.tol,
                newton_iters: iters,
                final_residual_inf: r_inf,
                active_set_size: active,
                residual_history: history,
                active_history,
            };
            return Ok((u, report));
        }

        let solver = match chol.as_mut() {
            Some(c) => c,
            None => chol.insert(Cholesky::new(jac.pattern().clone())?),
        };
        solver.factorize(&jac)?;
        let mut step: Vec<f64> = f.iter().map(|x| -x).collect();
        solver.solve_in_place(&mut step)?;
        iters += 1;

        let merit = norm2(&f);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let ft = residual(sys, disc, &trial)?;
            if norm2(&ft) < (1.0 - 1e-4 * t) * merit {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            // no decrease along the Newton direction: stagnation at roundoff
            let report = SolveReport {
                converged: false,
                newton_iters: iters,
                final_residual_inf: r_inf,
                active_set_size: active,
                residual_history: history,
                active_history,
            };
            return Ok((u, report));
        };
        u = next;
        (f, jac, active) = residual_and_jacobian(sys, disc, &u)?;
    }
}

/// One solve of a continuation in κ.
#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub kappa: f64,
    pub state: Vec<f64>,
    /// H¹ distance of the displacement to the previous step's; `None` for
    /// the first solve.
    pub cauchy_error: Option<f64>,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub newton: NewtonOptions,
    /// Upper bound on the number of solves.
    pub max_steps: usize,
    /// Start every solve from zero instead of the previous solution.
    pub cold_start: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            newton: NewtonOptions::default(),
            max_steps: 60,
            cold_start: false,
        }
    }
}

/// Solves at `κ₀, shrink·κ₀, shrink²·κ₀, …` on a fixed mesh, warm starting
/// each solve, until the H¹ distance between consecutive displacements
/// drops below `stop_tol` (at least one pair is always computed).
///
/// `on_step` sees every step as soon as it is available, so callers can
/// stream results.
pub fn kappa_continuation(
    disc: &Discretization,
    sys: &mut SystemMatrices,
    kappa0: f64,
    shrink: f64,
    stop_tol: f64,
    opts: ContinuationOptions,
    mut on_step: impl FnMut(&ContinuationStep) -> Result<()>,
) -> Result<Vec<ContinuationStep>> {
    if !(kappa0 > 0.0) || !kappa0.is_finite() {
        return Err(Error::InvalidParameter(format!("kappa0 must be positive, got {kappa0}")));
    }
    if !(shrink > 0.0 && shrink < 1.0) {
        return Err(Error::InvalidParameter(format!("shrink must lie in (0, 1), got {shrink}")));
    }
    if stop_tol.is_nan() || stop_tol < 0.0 {
        return Err(Error::InvalidParameter(format!("stop_tol must be nonnegative, got {stop_tol}")));
    }
    let mut steps: Vec<ContinuationStep> = Vec::new();
    let mut kappa = kappa0;
    let zero = vec![0.0; disc.len()];
    while steps.len() < opts.max_steps.max(2) {
        sys.set_kappa(kappa)?;
        let init = match steps.last() {
            Some(prev) if !opts.cold_start => prev.state.as_slice(),
            _ => zero.as_slice(),
        };
        let (state, report) = newton_solve(disc, sys, init, opts.newton).map_err(|e| at(kappa, e))?;
        if !report.converged {
            return Err(at(
                kappa,
                Error::NotConverged {
                    iterations: report.newton_iters,
                    residual: report.final_residual_inf,
                },
            ));
        }
        let cauchy_error = match steps.last() {
            Some(prev) => Some(h1_distance_same_mesh(disc, &prev.state, &state)),
            None => None,
        };
        let step = ContinuationStep {
            kappa,
            state,
            cauchy_error,
            report,
        };
        on_step(&step)?;
        steps.push(step);
        if cauchy_error.is_some_and(|e| e < stop_tol || stop_tol == f64::INFINITY) {
            break;
        }
        kappa *= shrink;
    }
    Ok(steps)
}

fn at(kappa: f64, e: Error) -> Error {
    Error::AtKappa {
        kappa,
        source: Box::new(e),
    }
}

/// Full H¹ norm `(‖v‖²_{L²} + ‖∇v‖²_{L²})^{1/2}` of a P1 vector field given by
/// its vertex values.
pub fn h1_norm(mesh: &TriMesh, values: &[[f64; 3]]) -> f64 {
    let rule = Rule::Degree4.points();
    let mut acc = 0.0;
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles[t];
        let corners = mesh.corners(t);
        let area = mesh.area(t);
        let grads = p1_gradients(&corners);
        for c in 0..3 {
            let nodal = [values[tri[0]][c], values[tri[1]][c], values[tri[2]][c]];
            let gx: f64 = (0..3).map(|k| nodal[k] * grads[k][0]).sum();
            let gy: f64 = (0..3).map(|k| nodal[k] * grads[k][1]).sum();
            acc += area * (gx * gx + gy * gy);
            for qp in &rule {
                let v: f64 = (0..3).map(|k| nodal[k] * qp.bary[k]).sum();
                acc += area * qp.weight * v * v;
            }
        }
    }
    acc.sqrt()
}

fn h1_distance_same_mesh(disc: &Discretization, a: &[f64], b: &[f64]) -> f64 {
    let da = disc.dofs.displacement(a);
    let db = disc.dofs.displacement(b);
    let diff: Vec<[f64; 3]> = da
        .iter()
        .zip(&db)
        .map(|(x, y)| [x[0] - y[0], x[1] - y[1], x[2] - y[2]])
        .collect();
    h1_norm(&disc.mesh, &diff)
}

/// H¹ distance between the displacement fields of two states, the coarse one
/// carried onto the fine mesh by exact P1 prolongation. The fine mesh must
/// descend from the coarse one by refinement (or be the same mesh).
pub fn h1_error(coarse: &Discretization, s_coarse: &[f64], fine: &Discretization, s_fine: &[f64]) -> Result<f64> {
    for (d, s) in [(coarse, s_coarse), (fine, s_fine)] {
        if s.len() != d.len() {
            return Err(Error::DimensionMismatch {
                expected: d.len(),
                actual: s.len(),
            });
        }
    }
    let carried = fine.mesh.prolongate(&coarse.mesh, &coarse.dofs.displacement(s_coarse))?;
    let diff: Vec<[f64; 3]> = carried
        .iter()
        .zip(fine.dofs.displacement(s_fine))
        .map(|(x, y)| [x[0] - y[0], x[1] - y[1], x[2] - y[2]])
        .collect();
    Ok(h1_norm(&fine.mesh, &diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_linear, LoadProfile, ModelParams};
    use crate::mesh::{disk_mesh, refine};

    #[test]
    fn zero_load_returns_zero_immediately() {
        let d = Discretization::new(disk_mesh(0.5, 0.2).unwrap());
        let sys = assemble_linear(&d, &ModelParams::reference(1e-3, LoadProfile::None)).unwrap();
        let (u, rep) = newton_solve(&d, &sys, &vec![0.0; d.len()], NewtonOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.newton_iters <= 1);
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_options() {
        let d = Discretization::new(disk_mesh(0.5, 0.2).unwrap());
        let mut sys = assemble_linear(&d, &ModelParams::reference(1e-3, LoadProfile::Dome)).unwrap();
        let bad = NewtonOptions { tol: 0.0, max_iter: 5 };
        assert!(newton_solve(&d, &sys, &vec![0.0; d.len()], bad).is_err());
        assert!(newton_solve(&d, &sys, &[0.0], NewtonOptions::default()).is_err());
        let opts = ContinuationOptions::default();
        assert!(kappa_continuation(&d, &mut sys, 1e-2, 1.5, 1e-6, opts, |_| Ok(())).is_err());
        assert!(kappa_continuation(&d, &mut sys, -1.0, 0.5, 1e-6, opts, |_| Ok(())).is_err());
    }

    #[test]
    fn h1_norm_of_constant_field_is_area_weighted() {
        let m = disk_mesh(0.5, 0.2).unwrap();
        let vals = vec![[1.0, 0.0, 0.0]; m.num_vertices()];
        let area: f64 = (0..m.num_triangles()).map(|t| m.area(t)).sum();
        assert!((h1_norm(&m, &vals) - area.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn h1_error_of_identical_and_zero_states() {
        let c = Discretization::new(disk_mesh(0.5, 0.2).unwrap());
        let f = Discretization::new(refine(&c.mesh).unwrap());
        let s: Vec<f64> = (0..f.len()).map(|i| (i as f64 * 0.1).sin()).collect();
        assert_eq!(h1_error(&f, &s, &f, &s).unwrap(), 0.0);
        let direct = h1_norm(&f.mesh, &f.dofs.displacement(&s));
        assert_eq!(h1_error(&c, &vec![0.0; c.len()], &f, &s).unwrap(), direct);
    }
}
