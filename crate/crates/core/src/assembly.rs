//! Assembly of the discrete doubly penalised problem.
//!
//! Unknowns per vertex are `(ζ̃₁, ζ̃₂, ζ̃₃, φ̃₁, φ̃₂, φ̃₃)` in Cartesian
//! components. The discrete equations read
//!
//! ```text
//! F(u) = (A_mem + A_flex + P_rot) u + (ε/κ) N(u) − f = 0
//! ```
//!
//! where `A_mem` is `ε∫a^{αβστ}γ̃_{στ}γ̃_{αβ}√a`, `A_flex` is
//! `(ε³/3)∫a^{αβστ}ρ̃_{στ}ρ̃_{αβ}√a`, `P_rot` is
//! `(ε/κ)∫(φ̃ + (∂_αζ̃·a₃)a^α)·(ψ̃ + (∂_αη̃·a₃)a^α)`, `N` is the obstacle term
//! `∫min((θ+ζ̃)·q, 0) q·η̃` and `f = ∫ p̃·η̃ √a`. Neither penalty integral
//! carries the area element.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{elasticity_tensor, eval_geometry, GeometryEval, ImmersionSpec};
use crate::mesh::{p1_gradients, DofMap, TriMesh, FIELDS};
use crate::quadrature::{to_physical, QuadPoint, Rule};
use crate::sparse::{Pattern, SymMatrix};

const LOCAL: usize = 3 * FIELDS;
type LocalMat = SMatrix<f64, LOCAL, LOCAL>;
type LocalVec = SVector<f64, LOCAL>;
type BRows = SMatrix<f64, 3, LOCAL>;

/// Elements handed to the thread pool at a time; bounds the memory held by
/// element matrices awaiting accumulation.
const CHUNK: usize = 2048;

/// Transverse load profiles `g` entering `p̃ = g a₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadProfile {
    None,
    /// `g = −(ε/10)(−5|y|² + 0.295)` on `|y|² < 0.060`.
    Dome,
    /// `g = ε·10⁴(|y|² − 0.0059ℓ)` on `|y|² < 0.0059ℓ`.
    Indenter { ell: u32 },
    /// The dome profile multiplied by a constant factor.
    ScaledDome(f64),
}

impl LoadProfile {
    /// Load density `g(y)` for half-thickness `eps`.
    pub fn density(&self, eps: f64, y: [f64; 2]) -> f64 {
        let r2 = y[0] * y[0] + y[1] * y[1];
        match *self {
            LoadProfile::None => 0.0,
            LoadProfile::Dome => {
                if r2 < 0.060 {
                    -(eps / 10.0) * (-5.0 * r2 + 0.295)
                } else {
                    0.0
                }
            }
            LoadProfile::Indenter { ell } => {
                let rad2 = 0.0059 * ell as f64;
                if r2 < rad2 {
                    eps * 1e4 * (r2 - rad2)
                } else {
                    0.0
                }
            }
            LoadProfile::ScaledDome(factor) => factor * LoadProfile::Dome.density(eps, y),
        }
    }
}

/// Physical and numerical parameters of one discrete problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub eps: f64,
    pub lambda: f64,
    pub mu: f64,
    pub kappa: f64,
    pub q: Vector3<f64>,
    pub load: LoadProfile,
    pub surface: ImmersionSpec,
    pub rule: Rule,
}

impl ModelParams {
    /// ε = 0.001, λ = 0.4, μ = 0.012, q = (0, 0, 1) on the reference cap.
    pub fn reference(kappa: f64, load: LoadProfile) -> Self {
        ModelParams {
            eps: 0.001,
            lambda: 0.4,
            mu: 0.012,
            kappa,
            q: Vector3::z(),
            load,
            surface: ImmersionSpec::reference_cap(),
            rule: Rule::Degree4,
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(self.eps > 0.0) {
            return bad("eps must be positive, got eps", self.eps);
        }
        if !(self.mu > 0.0) {
            return bad("mu must be positive, got mu", self.mu);
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be nonnegative, got lambda", self.lambda);
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return bad("kappa must be positive and finite, got kappa", self.kappa);
        }
        if (self.q.norm() - 1.0).abs() > 1e-12 {
            return bad("q must have unit length, got |q|", self.q.norm());
        }
        Ok(())
    }

    /// Factor `ε/κ` in front of both penalty terms.
    pub fn penalty_scale(&self) -> f64 {
        self.eps / self.kappa
    }
}

/// A mesh together with its unknown numbering and matrix pattern.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: TriMesh,
    pub dofs: DofMap,
    pub pattern: Arc<Pattern>,
}

impl Discretization {
    pub fn new(mesh: TriMesh) -> Self {
        let dofs = DofMap::new(&mesh);
        let pattern = Arc::new(Pattern::from_mesh(&mesh, &dofs));
        Discretization { mesh, dofs, pattern }
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Global unknown indices of triangle `t` in local order `6k + field`.
    pub fn element_dofs(&self, t: usize) -> [usize; LOCAL] {
        let mut out = [0; LOCAL];
        for (k, &v) in self.mesh.triangles[t].iter().enumerate() {
            for f in 0..FIELDS {
                out[FIELDS * k + f] = self.dofs.dof(v, f);
            }
        }
        out
    }

    fn check_state(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: u.len(),
            });
        }
        Ok(())
    }
}

/// Quadrature point data needed by the obstacle term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstaclePoint {
    pub element: usize,
    pub basis: [f64; 3],
    /// Quadrature weight times element area.
    pub weight: f64,
    /// Rest height `θ·q`.
    pub height: f64,
}

/// Assembled linear operators of the discrete problem.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub a_mem: SymMatrix,
    pub a_flex: SymMatrix,
    /// Rotation-penalty form without its `ε/κ` factor.
    pub rot_form: SymMatrix,
    pub load_vec: Vec<f64>,
    pub obstacle: Vec<ObstaclePoint>,
    params: ModelParams,
    linear: SymMatrix,
}

impl SystemMatrices {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `P_rot = (ε/κ) · rot_form`.
    pub fn p_rot(&self) -> SymMatrix {
        let mut p = self.rot_form.clone();
        p.scale(self.params.penalty_scale());
        p
    }

    /// `A_mem + A_flex + P_rot`, without elimination.
    pub fn linear(&self) -> &SymMatrix {
        &self.linear
    }

    /// Switches to another penalty parameter without reassembling.
    pub fn set_kappa(&mut self, kappa: f64) -> Result<()> {
        let p = self.params.with_kappa(kappa);
        p.validate()?;
        self.params = p;
        self.linear = combine(&self.a_mem, &self.a_flex, &self.rot_form, p.penalty_scale());
        Ok(())
    }

    /// Obstacle integral `(ε/κ) N(u)` and the matching generalised
    /// derivative; `None` for the tangent skips its assembly.
    fn obstacle_term(
        &self,
        disc: &Discretization,
        u: &[f64],
        mut res: Option<&mut [f64]>,
        mut tan: Option<&mut SymMatrix>,
    ) -> usize {
        let q = self.params.q;
        let c = self.params.penalty_scale();
        let mut active = 0;
        for p in &self.obstacle {
            let dofs = disc.element_dofs(p.element);
            let mut s = p.height;
            for k in 0..3 {
                for i in 0..3 {
                    s += p.basis[k] * u[dofs[FIELDS * k + i]] * q[i];
                }
            }
            if s >= 0.0 {
                continue;
            }
            active += 1;
            if let Some(r) = res.as_deref_mut() {
                for k in 0..3 {
                    for i in 0..3 {
                        r[dofs[FIELDS * k + i]] += c * p.weight * s * q[i] * p.basis[k];
                    }
                }
            }
            if let Some(t) = tan.as_deref_mut() {
                for k in 0..3 {
                    for i in 0..3 {
                        for l in 0..3 {
                            for j in 0..3 {
                                let v = c * p.weight * p.basis[k] * p.basis[l] * q[i] * q[j];
                                if v != 0.0 {
                                    t.add(dofs[FIELDS * k + i], dofs[FIELDS * l + j], v);
                                }
                            }
                        }
                    }
                }
            }
        }
        active
    }

    /// Number of quadrature points with `(θ + ζ̃)·q < 0`.
    pub fn active_set_size(&self, disc: &Discretization, u: &[f64]) -> usize {
        self.obstacle_term(disc, u, None, None)
    }

    /// Gap `(θ + ζ̃)·q` at every obstacle quadrature point.
    pub fn gaps(&self, disc: &Discretization, u: &[f64]) -> Vec<f64> {
        let q = self.params.q;
        self.obstacle
            .iter()
            .map(|p| {
                let dofs = disc.element_dofs(p.element);
                let mut s = p.height;
                for k in 0..3 {
                    for i in 0..3 {
                        s += p.basis[k] * u[dofs[FIELDS * k + i]] * q[i];
                    }
                }
                s
            })
            .collect()
    }
}

fn combine(a_mem: &SymMatrix, a_flex: &SymMatrix, rot: &SymMatrix, c: f64) -> SymMatrix {
    let mut k = a_mem.clone();
    k.axpy(1.0, a_flex);
    k.axpy(c, rot);
    k
}

struct ElementContrib {
    mem: LocalMat,
    flex: LocalMat,
    rot: LocalMat,
    load: LocalVec,
    obstacle: Vec<ObstaclePoint>,
}

/// Element loop with the quadrature rule of `p`; contributions are computed
/// in parallel and accumulated in element order.
pub fn assemble_linear(disc: &Discretization, p: &ModelParams) -> Result<SystemMatrices> {
    p.validate()?;
    let mesh = &disc.mesh;
    for t in 0..mesh.num_triangles() {
        let a = mesh.area(t);
        if !(a > 0.0) {
            return Err(Error::InvalidMesh(format!("triangle {t} has nonpositive area {a:e}")));
        }
    }
    let rule = p.rule.points();

    let mut a_mem = SymMatrix::zeros(disc.pattern.clone());
    let mut a_flex = SymMatrix::zeros(disc.pattern.clone());
    let mut rot_form = SymMatrix::zeros(disc.pattern.clone());
    let mut load_vec = vec![0.0; disc.len()];
    let mut obstacle = Vec::with_capacity(mesh.num_triangles() * rule.len());

    let nt = mesh.num_triangles();
    let mut start = 0;
    while start < nt {
        let end = (start + CHUNK).min(nt);
        let contribs: Vec<Result<ElementContrib>> = (start..end)
            .into_par_iter()
            .map(|t| element_contrib(mesh, t, p, &rule))
            .collect();
        for (t, c) in (start..end).zip(contribs) {
            let c = c?;
            let dofs = disc.element_dofs(t);
            for i in 0..LOCAL {
                let r = dofs[i];
                load_vec[r] += c.load[i];
                for j in 0..LOCAL {
                    let k = disc
                        .pattern
                        .find(r, dofs[j])
                        .expect("element couplings are in the pattern");
                    a_mem.values[k] += c.mem[(i, j)];
                    a_flex.values[k] += c.flex[(i, j)];
                    rot_form.values[k] += c.rot[(i, j)];
                }
            }
            obstacle.extend(c.obstacle);
        }
        start = end;
    }

    let linear = combine(&a_mem, &a_flex, &rot_form, p.penalty_scale());
    Ok(SystemMatrices {
        a_mem,
        a_flex,
        rot_form,
        load_vec,
        obstacle,
        params: *p,
        linear,
    })
}

fn element_contrib(mesh: &TriMesh, t: usize, p: &ModelParams, rule: &[QuadPoint]) -> Result<ElementContrib> {
    let corners = mesh.corners(t);
    let area = mesh.area(t);
    let grads = p1_gradients(&corners);
    let mut out = ElementContrib {
        mem: LocalMat::zeros(),
        flex: LocalMat::zeros(),
        rot: LocalMat::zeros(),
        load: LocalVec::zeros(),
        obstacle: Vec::with_capacity(rule.len()),
    };
    for qp in rule {
        let y = clamp_to_disk(to_physical(&corners, qp.bary), p.surface.domain_radius);
        let g = eval_geometry(&p.surface, y)?;
        let d = elasticity_tensor(&g, p.lambda, p.mu)?.voigt();
        let w = area * qp.weight;
        let wa = w * g.sqrt_a;

        let (bm, bf, r) = strain_rows(&g, &grads, &qp.bary);
        out.mem += bm.transpose() * d * bm * (wa * p.eps);
        out.flex += bf.transpose() * d * bf * (wa * p.eps.powi(3) / 3.0);
        out.rot += r.transpose() * r * w;

        let load = p.load.density(p.eps, y);
        if load != 0.0 {
            let a3 = g.normal();
            for k in 0..3 {
                for i in 0..3 {
                    out.load[FIELDS * k + i] += wa * load * qp.bary[k] * a3[i];
                }
            }
        }
        out.obstacle.push(ObstaclePoint {
            element: t,
            basis: qp.bary,
            weight: w,
            height: g.theta.dot(&p.q),
        });
    }
    Ok(out)
}

/// Rows mapping local unknowns to the Voigt vectors `(t₁₁, t₂₂, t₁₂)` of
/// `γ̃` and `ρ̃`, and to the rotation residual `φ̃ + (∂_αζ̃·a₃)a^α`.
pub(crate) fn strain_rows(g: &GeometryEval, grads: &[[f64; 2]; 3], basis: &[f64; 3]) -> (BRows, BRows, BRows) {
    let mut bm = BRows::zeros();
    let mut bf = BRows::zeros();
    let mut r = BRows::zeros();
    let [a1, a2, a3] = g.a_cov;
    let [n1, n2] = g.d_normal;
    for k in 0..3 {
        let [g1, g2] = grads[k];
        for i in 0..3 {
            let z = FIELDS * k + i;
            let f = z + 3;
            let mem = [g1 * a1[i], g2 * a2[i], 0.5 * (g1 * a2[i] + g2 * a1[i])];
            for row in 0..3 {
                bm[(row, z)] = mem[row];
                bf[(row, f)] = mem[row];
            }
            bf[(0, z)] = g1 * n1[i];
            bf[(1, z)] = g2 * n2[i];
            bf[(2, z)] = 0.5 * (g1 * n2[i] + g2 * n1[i]);

            let tilt = g.a_con[0] * (g1 * a3[i]) + g.a_con[1] * (g2 * a3[i]);
            for row in 0..3 {
                r[(row, z)] = tilt[row];
            }
            r[(i, f)] = basis[k];
        }
    }
    (bm, bf, r)
}

/// Boundary quadrature points can land a rounding error outside the disk.
fn clamp_to_disk(y: [f64; 2], radius: f64) -> [f64; 2] {
    let r = y[0].hypot(y[1]);
    if r > radius {
        [y[0] * radius / r, y[1] * radius / r]
    } else {
        y
    }
}

/// `F(u) = K u + (ε/κ) N(u) − f` with constrained rows set to zero.
pub fn residual(sys: &SystemMatrices, disc: &Discretization, u: &[f64]) -> Result<Vec<f64>> {
    disc.check_state(u)?;
    let mut f = sys.linear.mul(u);
    for (fi, li) in f.iter_mut().zip(&sys.load_vec) {
        *fi -= li;
    }
    sys.obstacle_term(disc, u, Some(&mut f), None);
    for c in disc.dofs.constrained() {
        f[c] = 0.0;
    }
    Ok(f)
}

/// Generalised Jacobian `K + (ε/κ) ∫1_{s<0} q⊗q`, with the constrained
/// rows and columns replaced by the identity.
pub fn jacobian(sys: &SystemMatrices, disc: &Discretization, u: &[f64]) -> Result<SymMatrix> {
    disc.check_state(u)?;
    let mut j = sys.linear.clone();
    sys.obstacle_term(disc, u, None, Some(&mut j));
    let nf = disc.dofs.num_free();
    j.eliminate(|d| d >= nf);
    Ok(j)
}

/// Residual and Jacobian in one pass over the obstacle points; returns the
/// active-set size as well.
pub fn residual_and_jacobian(
    sys: &SystemMatrices,
    disc: &Discretization,
    u: &[f64],
) -> Result<(Vec<f64>, SymMatrix, usize)> {
    disc.check_state(u)?;
    let mut f = sys.linear.mul(u);
    for (fi, li) in f.iter_mut().zip(&sys.load_vec) {
        *fi -= li;
    }
    let mut j = sys.linear.clone();
    let active = sys.obstacle_term(disc, u, Some(&mut f), Some(&mut j));
    let nf = disc.dofs.num_free();
    for c in disc.dofs.constrained() {
        f[c] = 0.0;
    }
    j.eliminate(|d| d >= nf);
    Ok((f, j, active))
}
