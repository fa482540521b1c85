//! Midsurface geometry.
//!
//! A chart `θ: ω̄ → E³` is described by an [`ImmersionSpec`]; the chart only
//! has to supply closed-form derivatives of `θ` up to third order
//! ([`ThetaJet`]). Every other quantity (bases, fundamental forms,
//! Christoffel symbols, curvature and their first derivatives) is derived
//! from that jet in [`eval_geometry`] and [`eval_geometry_derivatives`].
//!
//! Index conventions: Greek indices run over `{0, 1}`, Latin over
//! `{0, 1, 2}`. Mixed tensors are stored with the upper index as the row,
//! so `b_mixed[(σ, α)] = b^σ_α`.

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Relative slack for points on the rim of the parameter disk.
const RIM_SLACK: f64 = 1e-9;

/// Supported charts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// `θ(y) = (y₁, y₂, √(R² − |y|²) − offset)` over the disk of radius `R/2`.
    SphericalCap,
    /// `θ(y) = (y₁, y₂, −offset)`: a flat plate, for checks against
    /// hand-computed plane elasticity.
    Plane,
}

/// Analytic immersion of the shell midsurface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImmersionSpec {
    pub chart: Chart,
    /// Sphere radius `R`.
    pub radius: f64,
    /// Downward shift of the cap so that it floats above the plane `x₃ = 0`.
    pub vertical_offset: f64,
    /// Radius of the parameter disk `ω`.
    pub domain_radius: f64,
}

/// Spherical cap chart over the disk of radius `R/2`.
pub fn spherical_cap_chart(radius: f64, offset: f64) -> Result<ImmersionSpec> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    if !(offset > 0.0) || offset >= radius {
        return Err(Error::InvalidParameter(format!(
            "vertical offset must satisfy 0 < offset < R = {radius}, got {offset}"
        )));
    }
    Ok(ImmersionSpec {
        chart: Chart::SphericalCap,
        radius,
        vertical_offset: offset,
        domain_radius: 0.5 * radius,
    })
}

/// Horizontal plate at height `height` over the disk of radius `domain_radius`.
pub fn plane_chart(height: f64, domain_radius: f64) -> Result<ImmersionSpec> {
    if !(domain_radius > 0.0) || !height.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "plane chart needs a positive radius and finite height, got {domain_radius}, {height}"
        )));
    }
    Ok(ImmersionSpec {
        chart: Chart::Plane,
        radius: 2.0 * domain_radius,
        vertical_offset: -height,
        domain_radius,
    })
}

impl ImmersionSpec {
    /// The cap used throughout the experiments: `R = 1`, offset `0.85`.
    pub fn reference_cap() -> Self {
        spherical_cap_chart(1.0, 0.85).expect("reference cap parameters are valid")
    }

    pub fn contains(&self, y: [f64; 2]) -> bool {
        (y[0] * y[0] + y[1] * y[1]).sqrt() <= self.domain_radius * (1.0 + RIM_SLACK)
    }

    fn check(&self, y: [f64; 2]) -> Result<()> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(y[0], y[1], self.domain_radius))
        }
    }

    /// Position `θ(y)`.
    pub fn theta(&self, y: [f64; 2]) -> Result<Vector3<f64>> {
        self.check(y)?;
        Ok(match self.chart {
            Chart::SphericalCap => {
                let s = self.cap_height(y);
                Vector3::new(y[0], y[1], s - self.vertical_offset)
            }
            Chart::Plane => Vector3::new(y[0], y[1], -self.vertical_offset),
        })
    }

    /// `θ` and its partial derivatives up to third order.
    pub fn jet(&self, y: [f64; 2]) -> Result<ThetaJet> {
        self.check(y)?;
        Ok(match self.chart {
            Chart::SphericalCap => self.cap_jet(y),
            Chart::Plane => ThetaJet {
                value: Vector3::new(y[0], y[1], -self.vertical_offset),
                d1: [Vector3::x(), Vector3::y()],
                d2: [[Vector3::zeros(); 2]; 2],
                d3: [[[Vector3::zeros(); 2]; 2]; 2],
            },
        })
    }

    fn cap_height(&self, y: [f64; 2]) -> f64 {
        (self.radius * self.radius - y[0] * y[0] - y[1] * y[1]).sqrt()
    }

    fn cap_jet(&self, y: [f64; 2]) -> ThetaJet {
        let s = self.cap_height(y);
        let s3 = s * s * s;
        let s5 = s3 * s * s;
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

        let mut jet = ThetaJet {
            value: Vector3::new(y[0], y[1], s - self.vertical_offset),
            d1: [Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)],
            d2: [[Vector3::zeros(); 2]; 2],
            d3: [[[Vector3::zeros(); 2]; 2]; 2],
        };
        for a in 0..2 {
            jet.d1[a].z = -y[a] / s;
            for b in 0..2 {
                jet.d2[a][b].z = -delta(a, b) / s - y[a] * y[b] / s3;
                for c in 0..2 {
                    jet.d3[a][b][c].z = -(delta(a, b) * y[c] + delta(a, c) * y[b] + delta(b, c) * y[a])
                        / s3
                        - 3.0 * y[a] * y[b] * y[c] / s5;
                }
            }
        }
        jet
    }
}

/// Derivatives of the immersion at one parameter point.
#[derive(Debug, Clone, Copy)]
pub struct ThetaJet {
    pub value: Vector3<f64>,
    /// `d1[α] = ∂_α θ`
    pub d1: [Vector3<f64>; 2],
    /// `d2[α][β] = ∂_{αβ} θ`
    pub d2: [[Vector3<f64>; 2]; 2],
    /// `d3[α][β][γ] = ∂_{αβγ} θ`
    pub d3: [[[Vector3<f64>; 2]; 2]; 2],
}

/// Pointwise geometry of the midsurface.
#[derive(Debug, Clone, Copy)]
pub struct GeometryEval {
    pub y: [f64; 2],
    pub theta: Vector3<f64>,
    /// Covariant basis `a₁, a₂, a₃`.
    pub a_cov: [Vector3<f64>; 3],
    /// Contravariant basis `a¹, a², a³`.
    pub a_con: [Vector3<f64>; 3],
    /// First fundamental form `a_{αβ}`.
    pub a_lower: Matrix2<f64>,
    /// `a^{αβ}`, the inverse of `a_lower`.
    pub a_upper: Matrix2<f64>,
    /// Second fundamental form `b_{αβ}`.
    pub b_lower: Matrix2<f64>,
    /// `b_mixed[(σ, α)] = b^σ_α`.
    pub b_mixed: Matrix2<f64>,
    /// `christoffel[σ][α][β] = Γ^σ_{αβ}`.
    pub christoffel: [[[f64; 2]; 2]; 2],
    pub sqrt_a: f64,
    /// `d_normal[α] = ∂_α a₃`.
    pub d_normal: [Vector3<f64>; 2],
    pub gauss_k: f64,
}

impl GeometryEval {
    pub fn christoffel(&self, sigma: usize, alpha: usize, beta: usize) -> f64 {
        self.christoffel[sigma][alpha][beta]
    }

    /// Normal `a₃ = a³`.
    pub fn normal(&self) -> Vector3<f64> {
        self.a_cov[2]
    }
}

/// Evaluates every first- and second-order geometric quantity at `y`.
pub fn eval_geometry(spec: &ImmersionSpec, y: [f64; 2]) -> Result<GeometryEval> {
    let jet = spec.jet(y)?;
    Ok(geometry_from_jet(y, &jet))
}

pub(crate) fn geometry_from_jet(y: [f64; 2], jet: &ThetaJet) -> GeometryEval {
    let a1 = jet.d1[0];
    let a2 = jet.d1[1];
    let cross = a1.cross(&a2);
    let sqrt_a = cross.norm();
    let a3 = cross / sqrt_a;

    let a_lower = Matrix2::new(a1.dot(&a1), a1.dot(&a2), a2.dot(&a1), a2.dot(&a2));
    let det_a = a_lower[(0, 0)] * a_lower[(1, 1)] - a_lower[(0, 1)] * a_lower[(1, 0)];
    let a_upper = Matrix2::new(
        a_lower[(1, 1)] / det_a,
        -a_lower[(0, 1)] / det_a,
        -a_lower[(1, 0)] / det_a,
        a_lower[(0, 0)] / det_a,
    );
    let a_con = [
        a1 * a_upper[(0, 0)] + a2 * a_upper[(0, 1)],
        a1 * a_upper[(1, 0)] + a2 * a_upper[(1, 1)],
        a3,
    ];

    let mut b_lower = Matrix2::zeros();
    let mut christoffel = [[[0.0; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            b_lower[(a, b)] = jet.d2[a][b].dot(&a3);
            for s in 0..2 {
                christoffel[s][a][b] = jet.d2[a][b].dot(&a_con[s]);
            }
        }
    }
    let b_mixed = a_upper * b_lower;
    let det_b = b_lower[(0, 0)] * b_lower[(1, 1)] - b_lower[(0, 1)] * b_lower[(1, 0)];

    // Weingarten: ∂_α a₃ = −b^σ_α a_σ
    let d_normal = [
        -(a1 * b_mixed[(0, 0)] + a2 * b_mixed[(1, 0)]),
        -(a1 * b_mixed[(0, 1)] + a2 * b_mixed[(1, 1)]),
    ];

    GeometryEval {
        y,
        theta: jet.value,
        a_cov: [a1, a2, a3],
        a_con,
        a_lower,
        a_upper,
        b_lower,
        b_mixed,
        christoffel,
        sqrt_a,
        d_normal,
        gauss_k: det_b / det_a,
    }
}

/// First derivatives of the pointwise geometry, needed only by the
/// covariant change-of-curvature tensor and by consistency checks.
#[derive(Debug, Clone, Copy)]
pub struct GeometryDerivatives {
    /// `d2_theta[α][β] = ∂_{αβ} θ = ∂_β a_α`.
    pub d2_theta: [[Vector3<f64>; 2]; 2],
    /// `d_a_upper[γ] = ∂_γ a^{αβ}`.
    pub d_a_upper: [Matrix2<f64>; 2],
    /// `d_b_lower[γ] = ∂_γ b_{αβ}`.
    pub d_b_lower: [Matrix2<f64>; 2],
    /// `d_b_mixed[γ][(σ, α)] = ∂_γ b^σ_α`.
    pub d_b_mixed: [Matrix2<f64>; 2],
    /// `d_a_con[γ][i] = ∂_γ a^i`.
    pub d_a_con: [[Vector3<f64>; 3]; 2],
    /// `d2_normal[γ][α] = ∂_{γα} a₃`.
    pub d2_normal: [[Vector3<f64>; 2]; 2],
}

pub fn eval_geometry_derivatives(
    spec: &ImmersionSpec,
    y: [f64; 2],
) -> Result<(GeometryEval, GeometryDerivatives)> {
    let jet = spec.jet(y)?;
    let g = geometry_from_jet(y, &jet);
    let a = [g.a_cov[0], g.a_cov[1]];
    let a3 = g.normal();

    let mut d_a_upper = [Matrix2::zeros(); 2];
    let mut d_b_lower = [Matrix2::zeros(); 2];
    let mut d_b_mixed = [Matrix2::zeros(); 2];
    let mut d_a_con = [[Vector3::zeros(); 3]; 2];
    let mut d2_normal = [[Vector3::zeros(); 2]; 2];

    for c in 0..2 {
        let mut d_a_lower = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                d_a_lower[(i, j)] = jet.d2[i][c].dot(&a[j]) + a[i].dot(&jet.d2[j][c]);
                d_b_lower[c][(i, j)] =
                    jet.d3[i][j][c].dot(&a3) + jet.d2[i][j].dot(&g.d_normal[c]);
            }
        }
        d_a_upper[c] = -(g.a_upper * d_a_lower * g.a_upper);
        d_b_mixed[c] = d_a_upper[c] * g.b_lower + g.a_upper * d_b_lower[c];

        for s in 0..2 {
            let mut v = Vector3::zeros();
            for b in 0..2 {
                v += a[b] * d_a_upper[c][(s, b)] + jet.d2[b][c] * g.a_upper[(s, b)];
            }
            d_a_con[c][s] = v;
        }
        d_a_con[c][2] = g.d_normal[c];

        // ∂_γ(−b^σ_α a_σ)
        for al in 0..2 {
            let mut v = Vector3::zeros();
            for s in 0..2 {
                v -= a[s] * d_b_mixed[c][(s, al)] + jet.d2[s][c] * g.b_mixed[(s, al)];
            }
            d2_normal[c][al] = v;
        }
    }

    Ok((
        g,
        GeometryDerivatives {
            d2_theta: jet.d2,
            d_a_upper,
            d_b_lower,
            d_b_mixed,
            d_a_con,
            d2_normal,
        },
    ))
}

/// Contravariant elasticity tensor `a^{αβστ}` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elast4 {
    c: [[[[f64; 2]; 2]; 2]; 2],
}

impl Elast4 {
    pub fn get(&self, a: usize, b: usize, s: usize, t: usize) -> f64 {
        self.c[a][b][s][t]
    }

    /// `t ↦ a^{αβστ} t_{στ}`.
    pub fn contract(&self, t: &Matrix2<f64>) -> Matrix2<f64> {
        let mut out = Matrix2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for s in 0..2 {
                    for u in 0..2 {
                        acc += self.c[a][b][s][u] * t[(s, u)];
                    }
                }
                out[(a, b)] = acc;
            }
        }
        out
    }

    /// `a^{αβστ} s_{στ} t_{αβ}`.
    pub fn bilinear(&self, s: &Matrix2<f64>, t: &Matrix2<f64>) -> f64 {
        self.contract(s).component_mul(t).sum()
    }

    /// Matrix `D` acting on `(t₁₁, t₂₂, t₁₂)` such that
    /// `vᵀ D w = a^{αβστ} w_{στ} v_{αβ}` for symmetric tensors.
    pub fn voigt(&self) -> Matrix3<f64> {
        let c = &self.c;
        Matrix3::new(
            c[0][0][0][0],
            c[0][0][1][1],
            2.0 * c[0][0][0][1],
            c[1][1][0][0],
            c[1][1][1][1],
            2.0 * c[1][1][0][1],
            2.0 * c[0][1][0][0],
            2.0 * c[0][1][1][1],
            4.0 * c[0][1][0][1],
        )
    }
}

/// `a^{αβστ} = (4λμ/(λ+2μ)) a^{αβ}a^{στ} + 2μ(a^{ασ}a^{βτ} + a^{ατ}a^{βσ})`.
pub fn elasticity_tensor(g: &GeometryEval, lambda: f64, mu: f64) -> Result<Elast4> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let au = &g.a_upper;
    let k = 4.0 * lambda * mu / (lambda + 2.0 * mu);
    let mut c = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for s in 0..2 {
                for t in 0..2 {
                    c[a][b][s][t] = k * au[(a, b)] * au[(s, t)]
                        + 2.0 * mu * (au[(a, s)] * au[(b, t)] + au[(a, t)] * au[(b, s)]);
                }
            }
        }
    }
    Ok(Elast4 { c })
}
