//! Test fields with exact derivatives, shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use shellvi_core::forms::{CovariantJet, FieldJet};
use shellvi_core::geometry::{GeometryDerivatives, GeometryEval};

/// Quadratic Cartesian field `η̃(y) = c + L y + ½ yᵀ H y` with exact jets.
pub struct PolyField {
    pub c: Vector3<f64>,
    pub lin: [Vector3<f64>; 2],
    /// `hess[α][β] = ∂_{αβ} η̃`, symmetric in the pair
    pub hess: [[Vector3<f64>; 2]; 2],
}

impl PolyField {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut v = || Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let c = v();
        let lin = [v(), v()];
        let h01 = v();
        let hess = [[v(), h01], [h01, v()]];
        PolyField { c, lin, hess }
    }

    pub fn value(&self, y: [f64; 2]) -> Vector3<f64> {
        let mut out = self.c + self.lin[0] * y[0] + self.lin[1] * y[1];
        for a in 0..2 {
            for b in 0..2 {
                out += self.hess[a][b] * (0.5 * y[a] * y[b]);
            }
        }
        out
    }

    pub fn grad(&self, y: [f64; 2], a: usize) -> Vector3<f64> {
        self.lin[a] + self.hess[a][0] * y[0] + self.hess[a][1] * y[1]
    }

    pub fn jet(&self, y: [f64; 2]) -> FieldJet {
        FieldJet {
            value: self.value(y),
            grad: [self.grad(y, 0), self.grad(y, 1)],
        }
    }
}

/// Covariant components `η_i = η̃·a_i` and their derivatives by the product
/// rule, using the chart's analytic derivatives of the basis.
pub fn covariant_jet(g: &GeometryEval, dg: &GeometryDerivatives, f: &PolyField) -> CovariantJet {
    let y = g.y;
    let v = f.value(y);
    let gr = [f.grad(y, 0), f.grad(y, 1)];
    let d_basis = |i: usize, b: usize| if i < 2 { dg.d2_theta[i][b] } else { g.d_normal[b] };
    let mut cj = CovariantJet {
        eta: [0.0; 3],
        grad_eta: [[0.0; 2]; 3],
        hess_eta3: Matrix2::zeros(),
    };
    for i in 0..3 {
        cj.eta[i] = v.dot(&g.a_cov[i]);
        for b in 0..2 {
            cj.grad_eta[i][b] = gr[b].dot(&g.a_cov[i]) + v.dot(&d_basis(i, b));
        }
    }
    let a3 = g.normal();
    for a in 0..2 {
        for b in 0..2 {
            cj.hess_eta3[(a, b)] = f.hess[a][b].dot(&a3)
                + gr[a].dot(&g.d_normal[b])
                + gr[b].dot(&g.d_normal[a])
                + v.dot(&dg.d2_normal[a][b]);
        }
    }
    cj
}

/// `ξ̃ = −(∂_σ η̃·a₃) a^σ` with its derivatives.
pub fn compatible_rotation(g: &GeometryEval, dg: &GeometryDerivatives, f: &PolyField) -> FieldJet {
    let y = g.y;
    let a3 = g.normal();
    let gr = [f.grad(y, 0), f.grad(y, 1)];
    let value = -(g.a_con[0] * gr[0].dot(&a3) + g.a_con[1] * gr[1].dot(&a3));
    let mut grad = [Vector3::zeros(); 2];
    for a in 0..2 {
        for s in 0..2 {
            let coef = gr[s].dot(&a3);
            let d_coef = f.hess[a][s].dot(&a3) + gr[s].dot(&g.d_normal[a]);
            grad[a] -= g.a_con[s] * d_coef + dg.d_a_con[a][s] * coef;
        }
    }
    FieldJet { value, grad }
}

pub fn random_point(rng: &mut ChaCha8Rng) -> [f64; 2] {
    loop {
        let y: [f64; 2] = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        if y[0].hypot(y[1]) <= 0.5 {
            return y;
        }
    }
}
