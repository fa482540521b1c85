//! Pointwise strain tensors and penalty nonlinearities.
//!
//! Intrinsic fields (`η̃`, `ξ̃`) are Cartesian vectors in E³; covariant
//! fields are the components `η_i = η̃·a_i`. Symmetric 2×2 results are
//! returned as full matrices.

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::geometry::{Elast4, GeometryDerivatives, GeometryEval};

/// Value and first derivatives of an intrinsic vector field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldJet {
    pub value: Vector3<f64>,
    /// `grad[α] = ∂_α η̃`
    pub grad: [Vector3<f64>; 2],
}

impl FieldJet {
    pub fn zero() -> Self {
        FieldJet {
            value: Vector3::zeros(),
            grad: [Vector3::zeros(); 2],
        }
    }

    pub fn constant(v: Vector3<f64>) -> Self {
        FieldJet {
            value: v,
            grad: [Vector3::zeros(); 2],
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        FieldJet {
            value: self.value * c,
            grad: [self.grad[0] * c, self.grad[1] * c],
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        FieldJet {
            value: self.value + o.value,
            grad: [self.grad[0] + o.grad[0], self.grad[1] + o.grad[1]],
        }
    }
}

/// Covariant components of a displacement with the derivatives Koiter's
/// strain tensors need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariantJet {
    pub eta: [f64; 3],
    /// `grad_eta[i][β] = ∂_β η_i`
    pub grad_eta: [[f64; 2]; 3],
    /// `∂_{αβ} η₃`
    pub hess_eta3: Matrix2<f64>,
}

/// `γ̃_{αβ}(η̃) = ½(∂_α η̃·a_β + ∂_β η̃·a_α)`.
pub fn gamma_tilde(g: &GeometryEval, eta: &FieldJet) -> Matrix2<f64> {
    sym_pair(|a, b| eta.grad[a].dot(&g.a_cov[b]))
}

/// `ρ̃_{αβ}(η̃, ξ̃) = ½(∂_α η̃·∂_β a₃ + ∂_β η̃·∂_α a₃ + ∂_α ξ̃·a_β + ∂_β ξ̃·a_α)`.
///
/// For `ξ̃ = −(∂_α η̃·a₃)a^α` this is `−ρ_{αβ}(η)`; the sign is irrelevant in
/// the quadratic flexural energy.
pub fn rho_tilde(g: &GeometryEval, eta: &FieldJet, xi: &FieldJet) -> Matrix2<f64> {
    sym_pair(|a, b| eta.grad[a].dot(&g.d_normal[b]) + xi.grad[a].dot(&g.a_cov[b]))
}

/// Linearised change of metric in covariant components,
/// `γ_{αβ}(η) = ½(∂_β η_α + ∂_α η_β) − Γ^σ_{αβ} η_σ − b_{αβ} η₃`.
pub fn gamma_covariant(g: &GeometryEval, cj: &CovariantJet) -> Matrix2<f64> {
    let mut out = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let mut v = 0.5 * (cj.grad_eta[a][b] + cj.grad_eta[b][a]) - g.b_lower[(a, b)] * cj.eta[2];
            for s in 0..2 {
                v -= g.christoffel[s][a][b] * cj.eta[s];
            }
            out[(a, b)] = v;
        }
    }
    out
}

/// Linearised change of curvature in covariant components (Koiter's
/// `ρ_{αβ}(η)`), including the `∂_α b^τ_β` terms.
pub fn rho_covariant(g: &GeometryEval, dg: &GeometryDerivatives, cj: &CovariantJet) -> Matrix2<f64> {
    let bm = &g.b_mixed;
    let gam = &g.christoffel;
    let eta = &cj.eta;
    let d = &cj.grad_eta;
    let mut out = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let mut v = cj.hess_eta3[(a, b)];
            for s in 0..2 {
                v -= gam[s][a][b] * d[2][s];
                v -= bm[(s, a)] * g.b_lower[(s, b)] * eta[2];
                let mut cov_b = d[s][b];
                let mut cov_a = d[s][a];
                for t in 0..2 {
                    cov_b -= gam[t][b][s] * eta[t];
                    cov_a -= gam[t][a][s] * eta[t];
                }
                v += bm[(s, a)] * cov_b + bm[(s, b)] * cov_a;
            }
            for t in 0..2 {
                let mut c = dg.d_b_mixed[a][(t, b)];
                for s in 0..2 {
                    c += gam[t][a][s] * bm[(s, b)] - gam[s][a][b] * bm[(t, s)];
                }
                v += c * eta[t];
            }
            out[(a, b)] = v;
        }
    }
    out
}

/// Pointwise penalty operator on covariant components,
/// `β(ξ)_i = min((θ + ξ_j a^j)·q, 0) (a^i·q) / √(Σ_ℓ |a^ℓ·q|²)`.
pub fn beta_pointwise(g: &GeometryEval, xi: &[f64; 3], q: &Vector3<f64>) -> Vector3<f64> {
    let mut pos = g.theta;
    for j in 0..3 {
        pos += g.a_con[j] * xi[j];
    }
    let s = pos.dot(q).min(0.0);
    let c = Vector3::new(g.a_con[0].dot(q), g.a_con[1].dot(q), g.a_con[2].dot(q));
    c * (s / c.norm())
}

/// Obstacle density `min((θ + ζ̃)·q, 0) q` and its generalised derivative
/// `1_{(θ+ζ̃)·q < 0} q ⊗ q` (zero at the kink).
pub fn obstacle_penalty(g: &GeometryEval, zeta: &FieldJet, q: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let s = (g.theta + zeta.value).dot(q);
    if s < 0.0 {
        (q * s, q * q.transpose())
    } else {
        (Vector3::zeros(), Matrix3::zeros())
    }
}

/// Rotation constraint residual `φ̃ + (∂_α ζ̃·a₃) a^α`.
pub fn rotation_penalty(g: &GeometryEval, zeta: &FieldJet, phi: &FieldJet) -> Vector3<f64> {
    let a3 = g.normal();
    phi.value + g.a_con[0] * zeta.grad[0].dot(&a3) + g.a_con[1] * zeta.grad[1].dot(&a3)
}

/// Membrane and bending stress resultants `n = ε C:γ`, `m = (ε³/3) C:ρ`.
pub fn stress_resultants(
    c: &Elast4,
    gamma: &Matrix2<f64>,
    rho: &Matrix2<f64>,
    eps: f64,
) -> (Matrix2<f64>, Matrix2<f64>) {
    (c.contract(gamma) * eps, c.contract(rho) * (eps * eps * eps / 3.0))
}

fn sym_pair(f: impl Fn(usize, usize) -> f64) -> Matrix2<f64> {
    let d11 = f(0, 0);
    let d22 = f(1, 1);
    let off = 0.5 * (f(0, 1) + f(1, 0));
    Matrix2::new(d11, off, off, d22)
}
