//! Legacy ASCII VTK output of deformed midsurfaces.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix2, Vector3};

use crate::assembly::{Discretization, ModelParams};
use crate::error::{Error, Result};
use crate::forms::{gamma_tilde, rho_tilde, stress_resultants, FieldJet};
use crate::geometry::{elasticity_tensor, eval_geometry};
use crate::mesh::p1_gradients;

/// Per-vertex fields written alongside the deformed surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFields {
    /// Deformed positions `θ + ζ̃`.
    pub points: Vec<[f64; 3]>,
    pub displacement_magnitude: Vec<f64>,
    /// `(θ + ζ̃)·q`.
    pub gap: Vec<f64>,
    /// Traces and determinants of the mixed stress resultants `n^α_β`,
    /// `m^α_β`, averaged over the elements around each vertex.
    pub membrane_trace: Vec<f64>,
    pub membrane_det: Vec<f64>,
    pub bending_trace: Vec<f64>,
    pub bending_det: Vec<f64>,
}

/// Evaluates the exported fields of a state.
pub fn surface_fields(disc: &Discretization, p: &ModelParams, state: &[f64]) -> Result<SurfaceFields> {
    if state.len() != disc.len() {
        return Err(Error::DimensionMismatch {
            expected: disc.len(),
            actual: state.len(),
        });
    }
    let mesh = &disc.mesh;
    let nv = mesh.num_vertices();
    let zeta = disc.dofs.displacement(state);
    let mut points = Vec::with_capacity(nv);
    let mut magnitude = Vec::with_capacity(nv);
    let mut gap = Vec::with_capacity(nv);
    for (v, y) in mesh.vertices.iter().enumerate() {
        let z = Vector3::from(zeta[v]);
        let x = p.surface.theta(*y)? + z;
        points.push([x.x, x.y, x.z]);
        magnitude.push(z.norm());
        gap.push(x.dot(&p.q));
    }

    let mut inv = vec![[0.0; 4]; nv];
    let mut count = vec![0usize; nv];
    for t in 0..mesh.num_triangles() {
        let tri = mesh.triangles[t];
        let grads = p1_gradients(&mesh.corners(t));
        let mut zj = FieldJet::zero();
        let mut pj = FieldJet::zero();
        for k in 0..3 {
            let b = disc.dofs.base(tri[k]);
            let z = Vector3::new(state[b], state[b + 1], state[b + 2]);
            let f = Vector3::new(state[b + 3], state[b + 4], state[b + 5]);
            for a in 0..2 {
                zj.grad[a] += z * grads[k][a];
                pj.grad[a] += f * grads[k][a];
            }
        }
        for &v in &tri {
            let b = disc.dofs.base(v);
            zj.value = Vector3::new(state[b], state[b + 1], state[b + 2]);
            pj.value = Vector3::new(state[b + 3], state[b + 4], state[b + 5]);
            let g = eval_geometry(&p.surface, mesh.vertices[v])?;
            let c = elasticity_tensor(&g, p.lambda, p.mu)?;
            let (n, m) = stress_resultants(&c, &gamma_tilde(&g, &zj), &rho_tilde(&g, &zj, &pj), p.eps);
            let (tn, dn) = mixed_invariants(&n, &g.a_lower);
            let (tm, dm) = mixed_invariants(&m, &g.a_lower);
            let acc = &mut inv[v];
            acc[0] += tn;
            acc[1] += dn;
            acc[2] += tm;
            acc[3] += dm;
            count[v] += 1;
        }
    }
    let avg = |i: usize| -> Vec<f64> { inv.iter().zip(&count).map(|(a, &c)| a[i] / c.max(1) as f64).collect() };
    Ok(SurfaceFields {
        points,
        displacement_magnitude: magnitude,
        gap,
        membrane_trace: avg(0),
        membrane_det: avg(1),
        bending_trace: avg(2),
        bending_det: avg(3),
    })
}

/// Trace and determinant of `t^α_β = t^{αγ} a_{γβ}`.
fn mixed_invariants(upper: &Matrix2<f64>, a_lower: &Matrix2<f64>) -> (f64, f64) {
    let mixed = upper * a_lower;
    (mixed.trace(), mixed.determinant())
}

/// Renders the deformed surface as a legacy ASCII `UNSTRUCTURED_GRID`.
pub fn render_vtk(disc: &Discretization, fields: &SurfaceFields, title: &str) -> String {
    let mesh = &disc.mesh;
    let mut s = String::new();
    let title = title.replace('\n', " ");
    let _ = writeln!(s, "# vtk DataFile Version 2.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", fields.points.len());
    for p in &fields.points {
        let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let nt = mesh.num_triangles();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {}", fields.points.len());
    let scalars = [
        ("displacement_magnitude", &fields.displacement_magnitude),
        ("gap", &fields.gap),
        ("membrane_trace", &fields.membrane_trace),
        ("membrane_det", &fields.membrane_det),
        ("bending_trace", &fields.bending_trace),
        ("bending_det", &fields.bending_det),
    ];
    for (name, values) in scalars {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(s, "{v:e}");
        }
    }
    s
}

/// Writes the deformed surface of `state` to `path`.
pub fn export_vtk(disc: &Discretization, p: &ModelParams, state: &[f64], path: &Path) -> Result<()> {
    let fields = surface_fields(disc, p, state)?;
    let text = render_vtk(disc, &fields, "deformed shell midsurface");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
