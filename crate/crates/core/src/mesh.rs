//! P1 triangulations of the parameter disk, degree-of-freedom numbering and
//! nodal interpolation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Scalar unknowns per vertex: three Cartesian components of the
/// displacement followed by three of the auxiliary rotation field.
pub const FIELDS: usize = 6;

/// Relative tolerance for boundary vertices to sit on the circle.
const CIRCLE_TOL: f64 = 1e-12;

/// One red-refinement step, kept so that nodal vectors can be carried from
/// any ancestor mesh to its descendants.
#[derive(Debug, Clone)]
struct RefinementStep {
    parent_hash: [u8; 32],
    parent_vertices: usize,
    /// Endpoints of the parent edge for each new vertex, in creation order.
    midpoints: Vec<[usize; 2]>,
}

/// Triangulation of the disk `|y| ≤ radius` with counter-clockwise triangles.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    pub h: f64,
    pub level: usize,
    pub radius: f64,
    lineage: Vec<RefinementStep>,
}

impl TriMesh {
    /// Builds a mesh from raw arrays, fixing the orientation of every
    /// triangle and checking the invariants.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        radius: f64,
    ) -> Result<Self> {
        if boundary.len() != vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: vertices.len(),
                actual: boundary.len(),
            });
        }
        for t in &mut triangles {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t:?} references a missing vertex")));
            }
            if signed_area(&vertices, *t) < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut mesh = TriMesh {
            vertices,
            triangles,
            boundary,
            h: 0.0,
            level: 0,
            radius,
            lineage: Vec::new(),
        };
        mesh.h = mesh_diameter(&mesh);
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t])
    }

    /// Longest edge of triangle `t`.
    pub fn element_diameter(&self, t: usize) -> f64 {
        let p = self.corners(t);
        (0..3).map(|i| dist(p[i], p[(i + 1) % 3])).fold(0.0, f64::max)
    }

    /// Checks orientation and the boundary-circle invariant.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let a = self.area(t);
            if !(a > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} {:?} has nonpositive area {a:e}",
                    self.triangles[t]
                )));
            }
        }
        for (v, &b) in self.boundary.iter().enumerate() {
            if b {
                let r = norm(self.vertices[v]);
                if (r - self.radius).abs() > CIRCLE_TOL * self.radius {
                    return Err(Error::InvalidMesh(format!(
                        "boundary vertex {v} at radius {r} is off the circle of radius {}",
                        self.radius
                    )));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the ASCII export, as lowercase hex.
    pub fn content_hash(&self) -> String {
        hex(&self.hash_bytes())
    }

    fn hash_bytes(&self) -> [u8; 32] {
        Sha256::digest(self.to_ascii().as_bytes()).into()
    }

    /// `vertices N triangles M`, then `x y flag` lines, then `i j k` lines.
    pub fn to_ascii(&self) -> String {
        let mut s = String::with_capacity(48 * (self.vertices.len() + self.triangles.len()));
        let _ = writeln!(s, "vertices {} triangles {}", self.vertices.len(), self.triangles.len());
        for (p, &b) in self.vertices.iter().zip(&self.boundary) {
            let _ = writeln!(s, "{:.17e} {:.17e} {}", p[0], p[1], b as u8);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn from_ascii(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "vertices" || h[2] != "triangles" {
            return Err(Error::Parse(format!("bad mesh header `{header}`")));
        }
        let nv: usize = parse(h[1])?;
        let nt: usize = parse(h[3])?;

        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated vertex list".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad vertex line `{line}`")));
            }
            vertices.push([parse(f[0])?, parse(f[1])?]);
            boundary.push(match f[2] {
                "0" => false,
                "1" => true,
                other => return Err(Error::Parse(format!("bad boundary flag `{other}`"))),
            });
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated triangle list".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad triangle line `{line}`")));
            }
            triangles.push([parse(f[0])?, parse(f[1])?, parse(f[2])?]);
        }
        if let Some(extra) = lines.next() {
            return Err(Error::Parse(format!("trailing data `{extra}`")));
        }
        let radius = vertices
            .iter()
            .zip(&boundary)
            .filter(|(_, &b)| b)
            .map(|(p, _)| norm(*p))
            .fold(0.0, f64::max);
        TriMesh::new(vertices, triangles, boundary, radius)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ascii()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ascii(&text)
    }

    /// Carries per-vertex values from an ancestor mesh onto this mesh by
    /// exact P1 evaluation: vertices are copied and each midpoint takes the
    /// mean of its edge endpoints. On boundary edges this is the value of the
    /// zero extension, the natural choice for clamped fields.
    pub fn prolongate<const K: usize>(
        &self,
        ancestor: &TriMesh,
        values: &[[f64; K]],
    ) -> Result<Vec<[f64; K]>> {
        if values.len() != ancestor.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: ancestor.num_vertices(),
                actual: values.len(),
            });
        }
        let target = ancestor.hash_bytes();
        let start = if self.hash_bytes() == target {
            self.lineage.len()
        } else {
            self.lineage
                .iter()
                .position(|s| s.parent_hash == target)
                .ok_or_else(|| {
                    Error::NotNested(format!(
                        "mesh {} is not a refinement descendant of mesh {}",
                        &self.content_hash()[..12],
                        &hex(&target)[..12]
                    ))
                })?
        };
        let mut cur = values.to_vec();
        for step in &self.lineage[start..] {
            debug_assert_eq!(cur.len(), step.parent_vertices);
            cur.reserve(step.midpoints.len());
            for &[a, b] in &step.midpoints {
                let mut v = [0.0; K];
                for k in 0..K {
                    v[k] = 0.5 * (cur[a][k] + cur[b][k]);
                }
                cur.push(v);
            }
        }
        Ok(cur)
    }
}

/// Ring mesh of the disk: `n = ⌈radius/target_h⌉` concentric rings, ring `k`
/// carrying `6k` equally spaced vertices, neighbouring rings stitched by
/// merging their vertices in angular order.
pub fn disk_mesh(radius: f64, target_h: f64) -> Result<TriMesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    if !(target_h > 0.0) {
        return Err(Error::InvalidParameter(format!("target_h must be positive, got {target_h}")));
    }
    if target_h >= radius {
        return Err(Error::InvalidParameter(format!(
            "target_h = {target_h} must be smaller than the radius {radius}"
        )));
    }
    let n = (radius / target_h).ceil() as usize;
    let tau = std::f64::consts::TAU;

    let mut vertices = vec![[0.0, 0.0]];
    let mut boundary = vec![n == 0];
    let mut ring_start = vec![0usize];
    for k in 1..=n {
        ring_start.push(vertices.len());
        let r = radius * k as f64 / n as f64;
        let m = 6 * k;
        for j in 0..m {
            let phi = tau * j as f64 / m as f64;
            vertices.push(if k == n {
                [radius * phi.cos(), radius * phi.sin()]
            } else {
                [r * phi.cos(), r * phi.sin()]
            });
            boundary.push(k == n);
        }
    }

    let mut triangles = Vec::with_capacity(6 * n * n);
    for k in 1..=n {
        let n_in = if k == 1 { 1 } else { 6 * (k - 1) };
        let n_out = 6 * k;
        let inner = |i: usize| ring_start[k - 1] + i % n_in;
        let outer = |j: usize| ring_start[k] + j % n_out;
        let (mut i, mut j) = (0, 0);
        while i < n_in || j < n_out {
            let next_in = (i + 1) as f64 / n_in as f64;
            let next_out = (j + 1) as f64 / n_out as f64;
            let advance_outer = j < n_out && (i == n_in || k == 1 || next_out <= next_in);
            if advance_outer {
                triangles.push([inner(i), outer(j), outer(j + 1)]);
                j += 1;
            } else {
                triangles.push([inner(i), outer(j), inner(i + 1)]);
                i += 1;
            }
            if k == 1 && j == n_out {
                break;
            }
        }
    }
    TriMesh::new(vertices, triangles, boundary, radius)
}

/// Uniform red refinement. Midpoints of boundary edges are pushed radially
/// onto the circle.
pub fn refine(m: &TriMesh) -> Result<TriMesh> {
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in &m.triangles {
        for e in 0..3 {
            *edge_count.entry(edge_key(t[e], t[(e + 1) % 3])).or_insert(0) += 1;
        }
    }

    let mut vertices = m.vertices.clone();
    let mut boundary = m.boundary.clone();
    let mut midpoints = Vec::new();
    let mut mid_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(edge_count.len());
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());

    for t in &m.triangles {
        let mut mids = [0usize; 3];
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            let key = edge_key(a, b);
            mids[e] = *mid_index.entry(key).or_insert_with(|| {
                let pa = m.vertices[key.0];
                let pb = m.vertices[key.1];
                let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                let on_boundary = edge_count[&key] == 1;
                if on_boundary {
                    let s = m.radius / norm(p);
                    p = [p[0] * s, p[1] * s];
                }
                vertices.push(p);
                boundary.push(on_boundary);
                midpoints.push([key.0, key.1]);
                vertices.len() - 1
            });
        }
        let [v0, v1, v2] = *t;
        let [m01, m12, m20] = mids;
        triangles.push([v0, m01, m20]);
        triangles.push([m01, v1, m12]);
        triangles.push([m20, m12, v2]);
        triangles.push([m01, m12, m20]);
    }

    let mut fine = TriMesh::new(vertices, triangles, boundary, m.radius)?;
    fine.level = m.level + 1;
    fine.lineage = m.lineage.clone();
    fine.lineage.push(RefinementStep {
        parent_hash: m.hash_bytes(),
        parent_vertices: m.num_vertices(),
        midpoints,
    });
    Ok(fine)
}

/// Largest element diameter.
pub fn mesh_diameter(m: &TriMesh) -> f64 {
    (0..m.num_triangles()).map(|t| m.element_diameter(t)).fold(0.0, f64::max)
}

/// Largest ratio `h_T / ρ_T` with `ρ_T` the inscribed-circle diameter.
pub fn shape_regularity(m: &TriMesh) -> f64 {
    (0..m.num_triangles())
        .map(|t| {
            let p = m.corners(t);
            let perimeter: f64 = (0..3).map(|i| dist(p[i], p[(i + 1) % 3])).sum();
            let rho = 4.0 * m.area(t) / perimeter;
            m.element_diameter(t) / rho
        })
        .fold(0.0, f64::max)
}

/// `h / min_T h_T`, the constant of the inverse assumption.
pub fn inverse_ratio(m: &TriMesh) -> f64 {
    let hmin = (0..m.num_triangles())
        .map(|t| m.element_diameter(t))
        .fold(f64::INFINITY, f64::min);
    m.h / hmin
}

/// Mesh of the standard experiment family: a two-ring disk mesh refined
/// `level` times.
pub fn family_mesh(radius: f64, level: usize) -> Result<TriMesh> {
    let mut m = disk_mesh(radius, FAMILY_BASE_H * radius)?;
    for _ in 0..level {
        m = refine(&m)?;
    }
    Ok(m)
}

/// Base spacing of [`family_mesh`] relative to the disk radius.
pub const FAMILY_BASE_H: f64 = 0.5;

/// Numbering of the six scalar unknowns per vertex. Interior vertices come
/// first, so the free unknowns are exactly `0..num_free()`.
#[derive(Debug, Clone)]
pub struct DofMap {
    base: Vec<usize>,
    owner: Vec<usize>,
    num_free: usize,
}

impl DofMap {
    pub fn new(m: &TriMesh) -> Self {
        let nv = m.num_vertices();
        let mut base = vec![0; nv];
        let mut owner = vec![0; nv];
        let mut next = 0;
        for pass in [false, true] {
            for v in 0..nv {
                if m.boundary[v] == pass {
                    base[v] = next * FIELDS;
                    owner[next] = v;
                    next += 1;
                }
            }
        }
        let num_free = FIELDS * m.boundary.iter().filter(|&&b| !b).count();
        DofMap { base, owner, num_free }
    }

    pub fn len(&self) -> usize {
        FIELDS * self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn num_free(&self) -> usize {
        self.num_free
    }

    pub fn is_free(&self, dof: usize) -> bool {
        dof < self.num_free
    }

    pub fn base(&self, vertex: usize) -> usize {
        self.base[vertex]
    }

    pub fn dof(&self, vertex: usize, field: usize) -> usize {
        debug_assert!(field < FIELDS);
        self.base[vertex] + field
    }

    /// Inverse of [`DofMap::dof`].
    pub fn vertex_field(&self, dof: usize) -> (usize, usize) {
        (self.owner[dof / FIELDS], dof % FIELDS)
    }

    pub fn constrained(&self) -> std::ops::Range<usize> {
        self.num_free..self.len()
    }

    /// The displacement part of a state vector as per-vertex triples.
    pub fn displacement(&self, state: &[f64]) -> Vec<[f64; 3]> {
        self.base
            .iter()
            .map(|&b| [state[b], state[b + 1], state[b + 2]])
            .collect()
    }

    /// The rotation part of a state vector as per-vertex triples.
    pub fn rotation(&self, state: &[f64]) -> Vec<[f64; 3]> {
        self.base
            .iter()
            .map(|&b| [state[b + 3], state[b + 4], state[b + 5]])
            .collect()
    }
}

/// Nodal interpolant `Π_h f`. Every entry, including the constrained ones,
/// takes the value of `f` at the vertex.
pub fn interpolate<F>(f: F, m: &TriMesh, d: &DofMap) -> Vec<f64>
where
    F: Fn([f64; 2]) -> [f64; FIELDS],
{
    let mut out = vec![0.0; d.len()];
    for (v, p) in m.vertices.iter().enumerate() {
        let val = f(*p);
        out[d.base(v)..d.base(v) + FIELDS].copy_from_slice(&val);
    }
    out
}

/// Gradients of the three P1 basis functions of a triangle.
pub fn p1_gradients(p: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        g[i] = [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area];
    }
    g
}

fn signed_area(v: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b { (a, b) } else { (b, a) }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("cannot parse `{s}`")))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
